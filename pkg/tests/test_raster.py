"""Image I/O, binarization, upscaling and scene composition."""

import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphdigits.raster import (DataFormatError, GrayImage, ScenePlacement,
                                SceneOverlapError, binarize_upscale,
                                compose_scene, load_idx, load_idx_labels,
                                load_manifest, random_placements, read_pbm,
                                read_pgm, rescale_binary, save_idx,
                                save_manifest, write_pbm, write_pgm)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _images(n=3, h=5, w=4, seed=0):
    rng = np.random.default_rng(seed)
    return [GrayImage(rng.random((h, w)), i % 10) for i in range(n)]


class TestIdx:
    def test_round_trip(self, tmp_path):
        imgs = _images()
        save_idx(imgs, tmp_path / "i.idx", tmp_path / "l.idx")
        back = load_idx(tmp_path / "i.idx", tmp_path / "l.idx")
        assert len(back) == len(imgs)
        for a, b in zip(imgs, back):
            # stored as uint8, so exact to 1/255 quantization
            assert np.abs(a.pixels - b.pixels).max() <= 1 / 255 + 1e-12
            assert a.label == b.label

    def test_gzip_supported(self, tmp_path):
        imgs = _images()
        save_idx(imgs, tmp_path / "i.idx")
        data = (tmp_path / "i.idx").read_bytes()
        with gzip.open(tmp_path / "i.idx.gz", "wb") as f:
            f.write(data)
        back = load_idx(tmp_path / "i.idx.gz")
        assert len(back) == len(imgs)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + b"\0" * 4)
        with pytest.raises(DataFormatError):
            load_idx(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "short.idx"
        p.write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, 2, 3, 3) + b"\0" * 5)
        with pytest.raises(DataFormatError):
            load_idx(p)

    def test_label_count_mismatch(self, tmp_path):
        save_idx(_images(3), tmp_path / "i.idx")
        (tmp_path / "l.idx").write_bytes(
            struct.pack(">II", IDX_LABELS_MAGIC, 2) + b"\0\1")
        with pytest.raises(DataFormatError):
            load_idx(tmp_path / "i.idx", tmp_path / "l.idx")

    def test_labels_bad_magic(self, tmp_path):
        p = tmp_path / "l.idx"
        p.write_bytes(struct.pack(">II", IDX_IMAGES_MAGIC, 1) + b"\0")
        with pytest.raises(DataFormatError):
            load_idx_labels(p)


class TestPnm:
    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (7, 11), dtype=np.uint8)
        write_pgm(tmp_path / "x.pgm", img)
        back = read_pgm(tmp_path / "x.pgm")
        assert np.allclose(back, img / 255.0)

    def test_pbm_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        mask = rng.random((9, 13)) > 0.5
        write_pbm(tmp_path / "x.pbm", mask)
        assert (read_pbm(tmp_path / "x.pbm") == mask).all()

    def test_pbm_width_not_multiple_of_8(self, tmp_path):
        mask = np.eye(5, dtype=bool)
        write_pbm(tmp_path / "x.pbm", mask)
        assert (read_pbm(tmp_path / "x.pbm") == mask).all()


class TestBinarizeUpscale:
    def test_shape_and_thresholding(self):
        img = np.array([[0.0, 0.5], [0.05, 1.0]])
        mask = binarize_upscale(img, factor=10, threshold=0.1)
        assert mask.shape == (20, 20)
        assert mask[19, 19] and not mask[0, 0]

    def test_factor_one_is_pure_threshold(self):
        img = np.array([[0.05, 0.2]])
        assert (binarize_upscale(img, 1, 0.1) == [[False, True]]).all()

    @given(st.floats(0.05, 0.45), st.floats(0.5, 0.95))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_threshold(self, t_lo, t_hi):
        rng = np.random.default_rng(3)
        img = rng.random((6, 6))
        lo = binarize_upscale(img, 4, t_lo)
        hi = binarize_upscale(img, 4, t_hi)
        # raising the threshold never adds black pixels
        assert (hi <= lo).all()

    def test_invalid_args(self):
        img = np.zeros((2, 2))
        with pytest.raises(ValueError):
            binarize_upscale(img, 0, 0.1)
        with pytest.raises(ValueError):
            binarize_upscale(img, 2, 1.5)


class TestScenes:
    def test_identity_placement(self):
        mask = np.eye(6, dtype=bool)
        scene = compose_scene([ScenePlacement(0, 6, (0, 0))], [mask], (6, 6))
        assert (scene == mask).all()

    def test_disjoint_pixel_count(self):
        a = np.ones((4, 4), bool)
        b = np.ones((3, 3), bool)
        scene = compose_scene(
            [ScenePlacement(0, 4, (0, 0)), ScenePlacement(1, 3, (10, 10))],
            [a, b], (20, 20))
        assert scene.sum() == 16 + 9

    def test_overlap_rejected(self):
        a = np.ones((4, 4), bool)
        with pytest.raises(SceneOverlapError):
            compose_scene(
                [ScenePlacement(0, 4, (0, 0)), ScenePlacement(0, 4, (2, 2))],
                [a], (20, 20))

    def test_out_of_canvas_rejected(self):
        a = np.ones((4, 4), bool)
        with pytest.raises(ValueError):
            compose_scene([ScenePlacement(0, 8, (15, 15))], [a], (20, 20))

    def test_rescale_binary_preserves_solid(self):
        mask = np.ones((5, 5), bool)
        assert rescale_binary(mask, 12).all()

    def test_random_placements_deterministic(self):
        kw = dict(n_objects=3, source_indices=[0, 1, 2],
                  canvas=(300, 300), size_range=(30, 80))
        a = random_placements(np.random.default_rng(5), **kw)
        b = random_placements(np.random.default_rng(5), **kw)
        assert a == b

    def test_random_placements_disjoint_and_in_canvas(self):
        rng = np.random.default_rng(6)
        ps = random_placements(rng, 4, [0, 1, 2, 3], (500, 500), (40, 120))
        boxes = [p.bbox() for p in ps]
        for x0, y0, x1, y1 in boxes:
            assert 0 <= x0 < x1 <= 500 and 0 <= y0 < y1 <= 500
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                ax0, ay0, ax1, ay1 = boxes[i]
                bx0, by0, bx1, by1 = boxes[j]
                assert ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0

    def test_manifest_round_trip(self, tmp_path):
        ps = [ScenePlacement(0, 30, (5, 7), 3), ScenePlacement(2, 44, (100, 9), 8)]
        save_manifest(tmp_path / "m.json", [ps])
        assert load_manifest(tmp_path / "m.json") == [ps]

    def test_scene_black_pixels_belong_to_one_placement(self):
        rng = np.random.default_rng(7)
        src = rng.random((10, 10)) > 0.4
        ps = random_placements(rng, 3, [0, 0, 0], (400, 400), (30, 60))
        scene = compose_scene(ps, [src], (400, 400))
        total = 0
        for p in ps:
            x0, y0, x1, y1 = p.bbox()
            total += scene[y0:y1, x0:x1].sum()
        assert total == scene.sum()
