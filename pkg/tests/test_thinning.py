"""Skeletonization properties and the recurrent uniform filter."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphdigits.thinning import (has_square_block, recurrent_filter, thin,
                                  topology_counts)


def _random_blob(rng, shape=(40, 40), n_seeds=3, n_grow=220):
    """Connected-ish random blob by dilating random seed points."""
    from scipy import ndimage
    mask = np.zeros(shape, bool)
    ys = rng.integers(5, shape[0] - 5, n_seeds)
    xs = rng.integers(5, shape[1] - 5, n_seeds)
    mask[ys, xs] = True
    for _ in range(n_grow // 20):
        mask = ndimage.binary_dilation(mask, iterations=2)
        noise = rng.random(shape) > 0.6
        mask &= ~(noise & ~ndimage.binary_erosion(mask))
    return mask


class TestThin:
    def test_empty_input(self):
        assert not thin(np.zeros((5, 5), bool)).any()

    def test_single_pixel_unchanged(self):
        mask = np.zeros((5, 5), bool)
        mask[2, 2] = True
        assert (thin(mask) == mask).all()

    def test_solid_bar_becomes_unit_path(self):
        mask = np.zeros((9, 26), bool)
        mask[3:6, 3:23] = True
        sk = thin(mask)
        assert (sk <= mask).all()
        assert not has_square_block(sk)
        assert topology_counts(sk) == (1, 0)

    def test_annulus_keeps_hole(self):
        yy, xx = np.mgrid[:41, :41]
        r = np.hypot(yy - 20, xx - 20)
        mask = (r > 8) & (r < 16)
        sk = thin(mask)
        assert topology_counts(mask) == (1, 1)
        assert topology_counts(sk) == (1, 1)
        assert not has_square_block(sk)

    def test_idempotent_properties(self):
        rng = np.random.default_rng(0)
        mask = _random_blob(rng)
        once = thin(mask)
        twice = thin(once)
        assert not has_square_block(twice)
        assert topology_counts(twice) == topology_counts(once)

    def test_random_blobs_topology(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            mask = _random_blob(rng)
            if not mask.any():
                continue
            sk = thin(mask)
            assert (sk <= mask).all()
            assert not has_square_block(sk)
            assert topology_counts(sk) == topology_counts(mask)

    def test_components_thinned_independently(self):
        a = np.zeros((30, 60), bool)
        a[5:10, 5:25] = True
        b = np.zeros((30, 60), bool)
        b[18:23, 30:50] = True
        both = thin(a | b)
        assert (both == (thin(a) | thin(b))).all()


class TestTopologyCounts:
    def test_known_values(self):
        mask = np.zeros((10, 10), bool)
        assert topology_counts(mask) == (0, 0)
        mask[1, 1] = True
        mask[5, 5] = True
        assert topology_counts(mask) == (2, 0)
        ring = np.zeros((7, 7), bool)
        ring[1:6, 1:6] = True
        ring[2:5, 2:5] = False
        assert topology_counts(ring) == (1, 1)


class TestRecurrentFilter:
    def test_argument_validation(self):
        img = np.zeros((5, 5), bool)
        with pytest.raises(ValueError):
            recurrent_filter(img, kernel=2)
        with pytest.raises(ValueError):
            recurrent_filter(img, threshold=0.0)
        with pytest.raises(ValueError):
            recurrent_filter(img, iterations=0)

    def test_interior_of_block_stays_black(self):
        img = np.zeros((20, 20), bool)
        img[5:15, 5:15] = True
        out = recurrent_filter(img, 3, 0.9, 3)
        assert out[-1][9, 9]

    def test_isolated_pixel_removed(self):
        # 3x3 window mean is 1/9 < 0.2, so one iteration clears it
        img = np.zeros((9, 9), bool)
        img[4, 4] = True
        out = recurrent_filter(img, 3, 0.2, 1)
        assert not out[0].any()

    def test_returns_one_image_per_iteration(self):
        img = np.zeros((6, 6), bool)
        img[2:4, 2:4] = True
        out = recurrent_filter(img, 3, 0.25, 4)
        assert len(out) == 4

    @given(st.integers(0, 5), st.integers(0, 5))
    @settings(max_examples=20, deadline=None)
    def test_translation_commutes(self, dx, dy):
        rng = np.random.default_rng(42)
        core = rng.random((8, 8)) > 0.5
        img = np.zeros((30, 30), bool)
        img[8:16, 8:16] = core
        moved = np.zeros((30, 30), bool)
        moved[8 + dy:16 + dy, 8 + dx:16 + dx] = core
        a = recurrent_filter(img, 3, 0.25, 3)[-1]
        b = recurrent_filter(moved, 3, 0.25, 3)[-1]
        assert (np.roll(a, (dy, dx), axis=(0, 1)) == b).all()
