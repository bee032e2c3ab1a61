"""End-to-end orchestration: training, single- and multi-digit evaluation.

Training, per digit: simplify every example, propose high-coverage
subgraph features from seeded-random examples, decompose them, gather the
measurements of matching instances across the digit's examples, learn
interval classes over a widening grid, and keep the classes that are
informative on the validation set (near-zero false alarms, non-zero
hits).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .features import (DecompositionGraph, MidLevelFeatureClass, learn_class,
                       measurement_keys, select_informative, slack_for,
                       structural_class)
from .graphs import PointGraph, build_pixel_graph, simplify, split_components
from .measurements import (CIRCULAR_FIELDS, measure_primitive,
                           measure_relation, relation_fields, signed_diff,
                           unary_fields)
from .primitives import DecomposeConfig, decompose
from .raster import (GrayImage, ScenePlacement, binarize_upscale,
                     compose_scene, random_placements, rescale_binary)
from .recognizer import PrimitiveIndex, SearchBudget, classify_scene, find_instances
from .thinning import thin


@dataclass
class TrainConfig:
    examples_per_digit: int = 100
    coverage_floor: float = 0.9
    features_per_digit: int = 3
    decompositions_per_feature: int = 3
    slack_grid: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2)
    fa_ceiling: float = 0.01
    seed: int = 0
    line_threshold: float = 0.1
    binarize_threshold: float = 0.1
    upscale_factor: int = 10
    # coverage a matched instance must reach, during both training-time
    # gathering and detection (the learned classes carry it)
    match_coverage: float = 0.75
    # source examples tried per feature slot before settling for the one
    # whose shapes matched the most sibling examples
    source_retries: int = 8
    # full proposal rounds per digit; a new round redraws every source
    # example when no candidate class survived validation
    proposal_rounds: int = 3
    budget: SearchBudget = field(default_factory=SearchBudget)


class TrainingError(RuntimeError):
    pass


def simplified_graph(img: GrayImage | np.ndarray, cfg: TrainConfig) -> PointGraph:
    """Binarize, upscale, thin and simplify; return the longest connected
    component (training images contain a single digit)."""
    mask = binarize_upscale(img, cfg.upscale_factor, cfg.binarize_threshold)
    g = simplify(build_pixel_graph(thin(mask)), mask)
    comps = [c for c in split_components(g) if c.edges]
    if not comps:
        return PointGraph(np.empty((0, 2)), set())
    return max(comps, key=lambda c: c.total_length)


def _pendant_chains(g: PointGraph) -> list[frozenset]:
    """Edge sets of maximal chains hanging off a leaf vertex."""
    adj = g.neighbors()
    deg = g.degrees()
    chains = []
    for leaf in np.nonzero(deg == 1)[0]:
        chain = []
        prev, cur = -1, int(leaf)
        while deg[cur] <= 2:
            nxt = [n for n in adj[cur] if n != prev]
            if not nxt:
                break
            chain.append((min(cur, nxt[0]), max(cur, nxt[0])))
            prev, cur = cur, nxt[0]
        if chain and len(chain) < len(g.edges):
            chains.append(frozenset(chain))
    return chains


def propose_features(g: PointGraph, coverage_floor: float,
                     rng: np.random.Generator) -> frozenset:
    """Pick one high-coverage connected feature: the whole graph or the
    graph minus one pendant chain (seeded random choice)."""
    total = g.total_length
    candidates = [frozenset(g.edges)]
    for chain in _pendant_chains(g):
        rest = frozenset(g.edges) - chain
        if rest and sum(g.edge_length(e) for e in rest) / total >= coverage_floor:
            candidates.append(rest)
    candidates.sort(key=sorted)
    return candidates[int(rng.integers(len(candidates)))]


def _instance_measurements(index: PrimitiveIndex, graph: DecompositionGraph,
                           assignment) -> dict:
    meas = {}
    for key in measurement_keys(graph):
        if key[0] == "v":
            _, j, f = key
            meas[key] = index.unary[assignment[j]][f]
        else:
            _, j, k, f = key
            meas[key] = index.relation(assignment[j], assignment[k])[f]
    return meas


def _decomposition_measurements(primitives, graph_length: float) -> dict:
    """Measurements of an explicit decomposition, keyed like instances."""
    meas = {}
    for j, p in enumerate(primitives):
        u = measure_primitive(p)
        for f in unary_fields(p.kind):
            meas[("v", j, f)] = u[f]
    for j in range(len(primitives)):
        for k in range(j + 1, len(primitives)):
            r = measure_relation(primitives[j], primitives[k], graph_length)
            for f in relation_fields(primitives[j].kind, primitives[k].kind):
                meas[("e", j, k, f)] = r[f]
    return meas


def _measurement_distance(a: dict, b: dict) -> float:
    d = 0.0
    for key, va in a.items():
        vb = b[key]
        if key[-1] in CIRCULAR_FIELDS:
            d += abs(signed_diff(vb, va)) / 180.0
        else:
            d += abs(va - vb) / (abs(va) + abs(vb) + 1e-9)
    return d


def _median_closest(examples: list[dict]) -> int:
    keys = examples[0].keys()
    scores = np.zeros(len(examples))
    for key in keys:
        vals = np.array([ex[key] for ex in examples], float)
        if key[-1] in CIRCULAR_FIELDS:
            continue  # circular medians are ill-defined; scalars suffice
        med = np.median(vals)
        span = vals.max() - vals.min()
        if span > 1e-9:
            scores += np.abs(vals - med) / span
    return int(np.argmin(scores))


def generate_candidates(label: int, graphs: list[PointGraph],
                        indexes: list[PrimitiveIndex], cfg: TrainConfig,
                        rng: np.random.Generator
                        ) -> list[MidLevelFeatureClass]:
    """Candidate feature classes for one digit, before selection."""
    dconfig = DecomposeConfig(line_threshold=cfg.line_threshold,
                              max_walk_edges=cfg.budget.max_walk_edges,
                              max_loop_edges=cfg.budget.max_loop_edges)
    candidates: list[MidLevelFeatureClass] = []
    usable = [i for i, g in enumerate(graphs) if g.edges]
    if not usable:
        raise TrainingError(f"digit {label}: no usable training graphs")
    for slot in range(cfg.features_per_digit):
        best_slot: list[MidLevelFeatureClass] = []
        best_support = -1
        for _ in range(cfg.source_retries):
            slot_cands, support = _slot_candidates(
                label, graphs, indexes, cfg, rng, dconfig, slot, usable)
            if support > best_support:
                best_slot, best_support = slot_cands, support
            if support >= 0.6 * len(indexes):
                break
        candidates.extend(best_slot)
    return candidates


def _slot_candidates(label, graphs, indexes, cfg, rng, dconfig, slot, usable):
    """Candidates from one randomly chosen source example, plus the best
    structural support (matched example count) any of its shapes achieved."""
    candidates: list[MidLevelFeatureClass] = []
    best_support = 0
    src_idx = usable[int(rng.integers(len(usable)))]
    src_graph = graphs[src_idx]
    feature_edges = propose_features(src_graph, cfg.coverage_floor, rng)
    decs = decompose(src_graph, feature_edges, dconfig)
    seen_shapes = set()
    shape_count = 0
    for dec in decs:
        dg = DecompositionGraph.complete(dec.kinds())
        shape = dg.shape_key()
        if shape in seen_shapes:
            continue
        seen_shapes.add(shape)
        shape_count += 1
        if shape_count > cfg.decompositions_per_feature:
            break
        probe = structural_class(label, dg, min_coverage=cfg.match_coverage)
        src_meas = _decomposition_measurements(dec.primitives,
                                               src_graph.total_length)
        examples = []
        for index in indexes:
            result = find_instances(index, probe, cfg.budget,
                                    max_detections=32)
            if not result.detections:
                continue
            # among structural matches, keep the one whose measurements
            # are closest to the source feature's own, so ranges stay
            # tight across examples instead of mixing alignments
            best = min(
                result.detections[:32],
                key=lambda det: _measurement_distance(
                    src_meas,
                    _instance_measurements(index, dg, det.assignment)))
            examples.append(_instance_measurements(
                index, dg, best.assignment))
        if not examples:
            continue
        best_support = max(best_support, len(examples))
        ref = examples[_median_closest(examples)]
        feature_id = f"d{label}-f{slot}-i{src_idx}-{'+'.join(dec.kinds())}"
        source = {"feature_id": feature_id, "dataset-index": src_idx,
                  "vertices": [list(p.verts) for p in dec.primitives],
                  "n-examples": len(examples)}
        for frac in cfg.slack_grid:
            slack = slack_for(dg, examples, frac)
            candidates.append(learn_class(
                label, dg, examples, reference=ref, slack=slack,
                min_coverage=cfg.match_coverage,
                class_id=f"{feature_id}-w{frac:g}", source=source,
                on_wide_circular="drop"))
    return candidates, best_support


def train(train_set: list[GrayImage], validation_set: list[GrayImage],
          cfg: TrainConfig | None = None,
          progress=None) -> list[MidLevelFeatureClass]:
    """Learn a model (list of informative feature classes) from labeled
    single-digit images."""
    cfg = cfg or TrainConfig()
    if not train_set or not validation_set:
        raise TrainingError("both training and validation sets must be nonempty")
    rng = np.random.default_rng(cfg.seed)

    by_digit: dict[int, list[GrayImage]] = {}
    for img in train_set:
        if img.label is None or not 0 <= img.label <= 9:
            raise TrainingError("training images must carry labels 0-9")
        by_digit.setdefault(img.label, []).append(img)

    val_indexes: list[tuple[int, PrimitiveIndex]] = []
    for img in validation_set:
        if img.label is None:
            raise TrainingError("validation images must carry labels 0-9")
        g = simplified_graph(img, cfg)
        if g.edges:
            val_indexes.append(
                (img.label, PrimitiveIndex(g, cfg.budget, cfg.line_threshold)))

    model: list[MidLevelFeatureClass] = []
    for digit in sorted(by_digit):
        imgs = by_digit[digit][:cfg.examples_per_digit]
        graphs = [simplified_graph(img, cfg) for img in imgs]
        indexes = [PrimitiveIndex(g, cfg.budget, cfg.line_threshold)
                   for g in graphs if g.edges]
        survivors = []
        for _ in range(cfg.proposal_rounds):
            candidates = generate_candidates(digit, graphs, indexes, cfg, rng)
            survivors = select_informative(
                candidates, val_indexes, cfg.fa_ceiling,
                search=lambda idx, cls: bool(
                    find_instances(idx, cls, cfg.budget,
                                   max_detections=1).detections))
            if survivors:
                break
        if not survivors:
            raise TrainingError(f"digit {digit}: no informative class survived")
        model.extend(survivors)
        if progress:
            progress(digit, survivors)
    return model


@dataclass
class EvalReport:
    n_images: int = 0
    n_correct: int = 0
    per_digit: dict = field(default_factory=dict)  # digit -> [n, correct]
    confusion: dict = field(default_factory=dict)  # (true, pred) -> count
    exhausted_count: int = 0
    wall_time: float = 0.0

    @property
    def overall_accuracy(self) -> float:
        return self.n_correct / self.n_images if self.n_images else 0.0

    def record(self, true: int, pred: int | None) -> None:
        pred_key = -1 if pred is None else pred
        self.n_images += 1
        self.per_digit.setdefault(true, [0, 0])
        self.per_digit[true][0] += 1
        if pred == true:
            self.n_correct += 1
            self.per_digit[true][1] += 1
        self.confusion[(true, pred_key)] = \
            self.confusion.get((true, pred_key), 0) + 1

    def digit_accuracy(self, digit: int) -> float:
        n, c = self.per_digit.get(digit, (0, 0))
        return c / n if n else 0.0

    def to_json(self) -> dict:
        return {
            "overall-accuracy": self.overall_accuracy,
            "n-images": self.n_images,
            "per-digit": {str(d): {"n": n, "correct": c,
                                   "accuracy": c / n if n else 0.0}
                          for d, (n, c) in sorted(self.per_digit.items())},
            "confusion": [[t, p, c] for (t, p), c in sorted(self.confusion.items())],
            "budget-exhaustion-count": self.exhausted_count,
            "wall-time-seconds": self.wall_time,
        }


@dataclass
class SceneConfig:
    canvas: tuple[int, int] = (1000, 1000)
    size_range: tuple[int, int] = (84, 560)
    digits_per_scene: int = 1
    margin: int = 8


def _best_label(detections) -> int | None:
    if not detections:
        return None
    return max(detections, key=lambda d: d.coverage).label


def evaluate_single(model, test_set: list[GrayImage],
                    scene_cfg: SceneConfig | None = None,
                    cfg: TrainConfig | None = None,
                    seed: int = 0) -> EvalReport:
    """Place each test digit at a random location and scale, classify, and
    report accuracy."""
    scene_cfg = scene_cfg or SceneConfig()
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(seed)
    report = EvalReport()
    start = time.time()
    for img in test_set:
        mask = binarize_upscale(img, cfg.upscale_factor, cfg.binarize_threshold)
        placement = random_placements(
            rng, 1, [0], scene_cfg.canvas, scene_cfg.size_range,
            margin=scene_cfg.margin)[0]
        scene = compose_scene([placement], [mask], scene_cfg.canvas)
        result = classify_scene(scene, model, cfg.budget, cfg.line_threshold)
        report.exhausted_count += bool(result.exhausted)
        report.record(img.label, _best_label(result.detections))
    report.wall_time = time.time() - start
    return report


def evaluate_multi(model, test_set: list[GrayImage],
                   scene_cfg: SceneConfig | None = None,
                   cfg: TrainConfig | None = None,
                   seed: int = 0) -> EvalReport:
    """Compose non-overlapping multi-digit scenes and report per-digit
    accuracy; a placed digit is correct when some detection's bounding box
    centre falls inside its placement and carries its label."""
    scene_cfg = scene_cfg or SceneConfig(canvas=(2000, 2000),
                                         size_range=(81, 1000),
                                         digits_per_scene=3)
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(seed)
    report = EvalReport()
    start = time.time()
    k = scene_cfg.digits_per_scene
    for base in range(0, len(test_set) - k + 1, k):
        group = test_set[base:base + k]
        masks = [binarize_upscale(img, cfg.upscale_factor,
                                  cfg.binarize_threshold) for img in group]
        placements = random_placements(
            rng, k, list(range(k)), scene_cfg.canvas, scene_cfg.size_range,
            labels=[img.label for img in group], margin=scene_cfg.margin)
        scene = compose_scene(placements, masks, scene_cfg.canvas)
        result = classify_scene(scene, model, cfg.budget, cfg.line_threshold)
        report.exhausted_count += bool(result.exhausted)
        for p in placements:
            pred = None
            for det in result.detections:
                cx = 0.5 * (det.bbox[0] + det.bbox[2])
                cy = 0.5 * (det.bbox[1] + det.bbox[3])
                x0, y0, x1, y1 = p.bbox()
                if x0 <= cx < x1 and y0 <= cy < y1:
                    pred = det.label
                    break
            report.record(p.label, pred)
    report.wall_time = time.time() - start
    return report


def place_single(mask: np.ndarray, size: int, origin: tuple[int, int],
                 canvas: tuple[int, int]) -> np.ndarray:
    """Convenience: one rescaled digit on an otherwise blank canvas."""
    return compose_scene([ScenePlacement(0, size, origin)], [mask], canvas)
