"""Command-line interface: subcommand behavior and exit codes."""

import json

import numpy as np
import pytest

from graphdigits.cli import main
from graphdigits.features import (DecompositionGraph, save_model,
                                  structural_class)
from graphdigits.graphs import PointGraph
from graphdigits.raster import load_idx, read_pbm, read_pgm, write_pgm
from graphdigits.synth import make_corpus


@pytest.fixture(scope="module")
def corpus_idx(tmp_path_factory):
    """A small labeled IDX corpus written via the gen-digits subcommand."""
    d = tmp_path_factory.mktemp("corpus")
    images, labels = str(d / "imgs.idx"), str(d / "labels.idx")
    assert main(["gen-digits", "--per-digit", "3",
                 "--out-images", images, "--out-labels", labels]) == 0
    return images, labels


@pytest.fixture(scope="module")
def digit_pgm(tmp_path_factory):
    """A zero digit (closed loop) as a PGM file."""
    p = tmp_path_factory.mktemp("img") / "zero.pgm"
    img = make_corpus(1, seed=3, digits=(0,))[0]
    write_pgm(p, np.rint(img.pixels * 255).astype(np.uint8))
    return str(p)


@pytest.fixture(scope="module")
def loop_model(tmp_path_factory):
    """A one-class model that fires on any dominant loop."""
    p = tmp_path_factory.mktemp("model") / "model.json"
    cls = structural_class(0, DecompositionGraph.complete(("loop",)),
                           min_coverage=0.5, class_id="loop-det")
    save_model(p, [cls])
    return str(p)


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self):
        assert main(["no-such-command"]) == 1

    def test_missing_required_option_is_usage_error(self, digit_pgm):
        assert main(["thin", digit_pgm]) == 1

    def test_malformed_model_is_data_error(self, tmp_path, digit_pgm):
        bad = tmp_path / "bad.json"
        bad.write_text("not json at all")
        assert main(["recognize", str(bad), digit_pgm]) == 2

    def test_malformed_image_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"GIF89a nonsense")
        assert main(["thin", str(bad), "--out", str(tmp_path / "o.pbm")]) == 2

    def test_budget_exhaustion_exit_code(self, tmp_path, digit_pgm):
        # a two-vertex class makes the search visit many candidate pairs,
        # so a one-node budget must be reported as exhausted
        model = tmp_path / "model.json"
        cls = structural_class(1, DecompositionGraph.complete(
            ("line", "line")), class_id="pair")
        save_model(model, [cls])
        assert main(["--budget", "1", "recognize", str(model),
                     digit_pgm]) == 3


class TestDatasetCommands:
    def test_gen_digits_round_trips(self, corpus_idx):
        images, labels = corpus_idx
        corpus = load_idx(images, labels)
        assert len(corpus) == 30
        assert sorted({img.label for img in corpus}) == list(range(10))

    def test_ingest_writes_pgms(self, corpus_idx, tmp_path):
        images, labels = corpus_idx
        out = tmp_path / "dump"
        assert main(["ingest", images, labels, "--out-dir", str(out),
                     "--count", "4"]) == 0
        files = sorted(out.glob("*.pgm"))
        assert len(files) == 4
        assert read_pgm(files[0]).shape == (28, 28)


class TestImageCommands:
    def test_thin_writes_unit_width_skeleton(self, digit_pgm, tmp_path):
        out = tmp_path / "skel.pbm"
        assert main(["thin", digit_pgm, "--out", str(out)]) == 0
        skel = read_pbm(out)
        assert skel.any()
        # no 2x2 block anywhere: unit width
        blocks = skel[:-1, :-1] & skel[1:, :-1] & skel[:-1, 1:] & skel[1:, 1:]
        assert not blocks.any()

    def test_simplify_writes_loadable_graph(self, digit_pgm, tmp_path):
        gj = tmp_path / "graph.json"
        ov = tmp_path / "overlay.pgm"
        assert main(["simplify", digit_pgm, "--graph-json", str(gj),
                     "--overlay", str(ov)]) == 0
        g = PointGraph.from_json(json.loads(gj.read_text()))
        assert g.edges
        assert read_pgm(ov).shape == (280, 280)

    def test_decompose_prints_json_lines(self, digit_pgm, tmp_path, capsys):
        gj = tmp_path / "graph.json"
        assert main(["simplify", digit_pgm, "--graph-json", str(gj)]) == 0
        capsys.readouterr()
        assert main(["decompose", str(gj)]) == 0
        lines = [ln for ln in capsys.readouterr().out.splitlines() if ln]
        assert lines
        for ln in lines:
            rec = json.loads(ln)
            assert rec["kinds"] and rec["primitives"]

    def test_denoise_dumps_iterations(self, digit_pgm, tmp_path):
        out = tmp_path / "iters"
        assert main(["denoise", digit_pgm, "--out-dir", str(out),
                     "--iterations", "3"]) == 0
        assert sorted(p.name for p in out.glob("*.pbm")) == \
            ["iter-01.pbm", "iter-02.pbm", "iter-03.pbm"]


class TestRecognitionCommands:
    def test_recognize_emits_detection_lines(self, loop_model, digit_pgm,
                                             tmp_path, capsys):
        out = tmp_path / "dets.jsonl"
        ov = tmp_path / "overlay.pgm"
        assert main(["recognize", loop_model, digit_pgm, "--out", str(out),
                     "--overlay", str(ov)]) == 0
        lines = out.read_text().splitlines()
        assert lines
        det = json.loads(lines[0])
        assert det["label"] == 0 and det["class-id"] == "loop-det"
        assert set(det) == {"label", "class-id", "coverage", "bbox",
                            "component", "iteration"}
        assert capsys.readouterr().out.splitlines()[0] == lines[0]
        assert read_pgm(ov).shape == (280, 280)

    def test_evaluate_single_writes_report(self, loop_model, corpus_idx,
                                           tmp_path, capsys):
        images, labels = corpus_idx
        rep = tmp_path / "report.json"
        code = main(["evaluate-single", loop_model, images, labels,
                     "--count", "2", "--canvas", "400", "400",
                     "--size-range", "84", "160", "--report", str(rep)])
        assert code == 0
        payload = json.loads(rep.read_text())
        assert payload["n-images"] == 2
        # the corpus starts with zeros and the loop detector labels 0
        assert payload["overall-accuracy"] == 1.0

    def test_evaluate_multi_writes_report(self, loop_model, corpus_idx,
                                          tmp_path, capsys):
        images, labels = corpus_idx
        rep = tmp_path / "report.json"
        code = main(["evaluate-multi", loop_model, images, labels,
                     "--count", "2", "--digits-per-scene", "2",
                     "--canvas", "800", "800", "--size-range", "84", "200",
                     "--report", str(rep)])
        assert code == 0
        assert json.loads(rep.read_text())["n-images"] == 2

    def test_gen_scenes_writes_pbm_and_manifest(self, corpus_idx, tmp_path):
        images, labels = corpus_idx
        out = tmp_path / "scenes"
        assert main(["gen-scenes", images, labels, "--out-dir", str(out),
                     "--count", "2", "--digits-per-scene", "2",
                     "--canvas", "800", "800",
                     "--size-range", "84", "200"]) == 0
        assert len(list(out.glob("scene-*.pbm"))) == 2
        manifest = json.loads((out / "scene-0000.json").read_text())
        scene = manifest[0]
        assert len(scene) == 2
        for placement in scene:
            assert {"source-index", "size", "origin",
                    "label"} <= set(placement)
