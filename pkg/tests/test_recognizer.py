"""Backtracking instance search, scene classification and noise recovery."""

import numpy as np

from helpers import brute_force_instances, random_connected_graph

from graphdigits.features import (DecompositionGraph, learn_class,
                                  structural_class)
from graphdigits.graphs import PointGraph
from graphdigits.measurements import measure_primitive, measure_relation
from graphdigits.primitives import decompose
from graphdigits.raster import binarize_upscale
from graphdigits.recognizer import (PrimitiveIndex, SearchBudget,
                                    classify_scene, classify_single,
                                    find_instances, recognize_noisy,
                                    scene_components)
from graphdigits.synth import make_corpus


def _class_from_decomposition(label, dec, graph, slack, class_id="t",
                              min_coverage=0.0):
    dg = DecompositionGraph.complete(dec.kinds())
    meas = {}
    prims = dec.primitives
    for j, p in enumerate(prims):
        for f, v in measure_primitive(p).items():
            meas[("v", j, f)] = v
    for j in range(len(prims)):
        for k in range(j + 1, len(prims)):
            rel = measure_relation(prims[j], prims[k], graph.total_length)
            for f, v in rel.items():
                meas[("e", j, k, f)] = v
    return learn_class(label, dg, [meas], slack=slack, class_id=class_id,
                       min_coverage=min_coverage)


class TestFindInstances:
    def test_self_instance_found(self):
        rng = np.random.default_rng(0)
        found_any = False
        for _ in range(20):
            g = random_connected_graph(rng, 6)
            decs = decompose(g)
            if not decs:
                continue
            cls = _class_from_decomposition(3, decs[0], g, slack=1.0)
            result = find_instances(g, cls)
            assert result.detections, "source decomposition must self-match"
            found_any = True
        assert found_any

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(1)
        budget = SearchBudget(node_limit=10**7)
        checked = 0
        for _ in range(40):
            src = random_connected_graph(rng, 6)
            decs = decompose(src)
            if not decs:
                continue
            dec = decs[int(rng.integers(len(decs)))]
            slack = float(rng.uniform(0, 30))
            cls = _class_from_decomposition(
                1, dec, src, slack, min_coverage=float(rng.uniform(0, 0.5)))
            target = random_connected_graph(rng, 6)
            for g in (src, target):
                index = PrimitiveIndex(g, budget)
                fast = {d.key(): d for d in
                        find_instances(index, cls, budget).detections}
                slow = brute_force_instances(index, cls)
                assert set(fast) == set(slow)
                for k in fast:
                    assert abs(fast[k].coverage - slow[k].coverage) < 1e-12
                checked += 1
        assert checked >= 20

    def test_budget_exhaustion_flagged(self):
        rng = np.random.default_rng(2)
        g = random_connected_graph(rng, 8)
        cls = structural_class(0, DecompositionGraph.complete(
            ("line", "line")))
        tiny = SearchBudget(node_limit=1)
        result = find_instances(g, cls, tiny)
        assert result.exhausted

    def test_detections_sorted_by_coverage(self):
        g = PointGraph(np.array([[0, 0], [10, 0], [20, 0], [20, 30]], float),
                       {(0, 1), (1, 2), (2, 3)})
        cls = structural_class(0, DecompositionGraph.complete(("line",)))
        dets = find_instances(g, cls).detections
        assert len(dets) >= 2
        covs = [d.coverage for d in dets]
        assert covs == sorted(covs, reverse=True)


class TestScenes:
    def _model(self):
        # structural loop detector: fires on anything with a cycle
        return [structural_class(0, DecompositionGraph.complete(("loop",)),
                                 min_coverage=0.5, class_id="loop-det")]

    def _ring_mask(self, size=41, r0=8, r1=16):
        yy, xx = np.mgrid[:size, :size]
        r = np.hypot(yy - size // 2, xx - size // 2)
        return (r > r0) & (r < r1)

    def test_classify_scene_per_component(self):
        ring = self._ring_mask()
        scene = np.zeros((60, 120), bool)
        scene[5:46, 5:46] = ring
        scene[5:46, 70:111] = ring
        result = classify_scene(scene, self._model())
        assert len(result.detections) == 2
        assert {d.component_index for d in result.detections} == {0, 1}

    def test_translation_moves_bbox_only(self):
        ring = self._ring_mask()
        a = np.zeros((120, 120), bool)
        a[10:51, 10:51] = ring
        b = np.zeros((120, 120), bool)
        b[40:81, 55:96] = ring
        da = classify_scene(a, self._model()).detections[0]
        db = classify_scene(b, self._model()).detections[0]
        assert da.label == db.label and da.class_id == db.class_id
        ax0, ay0, ax1, ay1 = da.bbox
        bx0, by0, bx1, by1 = db.bbox
        assert abs((ax1 - ax0) - (bx1 - bx0)) < 1e-9
        assert abs((bx0 - ax0) - 45) < 1e-9 and abs((by0 - ay0) - 30) < 1e-9

    def test_classify_single_none_when_no_match(self):
        mask = np.zeros((30, 30), bool)
        mask[15, 5:25] = True  # a bare line: no loop anywhere
        assert classify_single(mask, self._model()) is None

    def test_scene_components_skips_empty(self):
        assert scene_components(np.zeros((10, 10), bool)) == []

    def test_scale_invariant_label(self):
        corpus = make_corpus(1, seed=9)
        img = corpus[8]  # a digit with a loop
        mask = binarize_upscale(img.pixels, 10, 0.1)
        small = classify_scene(mask, self._model()).detections
        from graphdigits.raster import rescale_binary
        big = classify_scene(rescale_binary(mask, 500),
                             self._model()).detections
        assert [d.label for d in small] == [d.label for d in big]


class TestRecognizeNoisy:
    def _model(self):
        return [structural_class(0, DecompositionGraph.complete(("loop",)),
                                 min_coverage=0.5, class_id="loop-det")]

    def test_clean_input_found_at_iteration_zero(self):
        yy, xx = np.mgrid[:41, :41]
        r = np.hypot(yy - 20, xx - 20)
        mask = (r > 8) & (r < 16)
        det, it = recognize_noisy(mask, self._model())
        assert det is not None and it == 0 and det.iteration == 0

    def test_no_detection_returns_none(self):
        mask = np.zeros((20, 20), bool)
        mask[10, 2:18] = True
        det, it = recognize_noisy(mask, self._model(), max_iterations=3)
        assert det is None and it is None

    def test_fragmented_ring_recovered_later(self):
        yy, xx = np.mgrid[:61, :61]
        r = np.hypot(yy - 30, xx - 30)
        ring = (r > 14) & (r < 22)
        rng = np.random.default_rng(5)
        damaged = ring & (rng.random(ring.shape) > 0.3)
        det, it = recognize_noisy(damaged, self._model(), max_iterations=10)
        assert det is not None
        assert it >= 0
