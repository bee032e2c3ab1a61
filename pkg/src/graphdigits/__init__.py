"""Graph-based digit recognition.

Raster digits are thinned to unit-width skeletons, converted to minimal
graph representations, decomposed into arc/line/loop primitives and
recognized by searching for learned mid-level feature classes; recognition
is translation and scale invariant and unaffected by non-overlapping
background objects.
"""

from .estimator import DigitGraphClassifier
from .features import (DecompositionGraph, Interval, MidLevelFeatureClass,
                       class_membership, graphs_equivalent, learn_class,
                       load_model, save_model, select_informative)
from .graphs import PointGraph, build_pixel_graph, simplify, split_components
from .measurements import coverage, measure_arc, measure_line, measure_relation
from .pipeline import (EvalReport, SceneConfig, TrainConfig, evaluate_multi,
                       evaluate_single, train)
from .primitives import (Decomposition, DecomposeConfig, Primitive,
                         classify_arc, classify_line, decompose, find_loops)
from .raster import (GrayImage, ScenePlacement, binarize_upscale,
                     compose_scene, load_idx, save_idx)
from .recognizer import (Detection, SearchBudget, classify_scene,
                         classify_single, find_instances, recognize_noisy)
from .thinning import recurrent_filter, thin

__all__ = [name for name in dir() if not name.startswith("_")]
