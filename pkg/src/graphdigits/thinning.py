"""Skeletonization and the recurrent uniform-filter recovery loop."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage.morphology import thin as _morphological_thin

_STRUCT8 = np.ones((3, 3), dtype=int)


def topology_counts(mask: np.ndarray) -> tuple[int, int]:
    """(number of 8-connected components, number of holes) of a binary mask.

    Holes are 4-connected white regions not reaching the border.
    """
    mask = np.asarray(mask, bool)
    n_comp = ndimage.label(mask, structure=_STRUCT8)[1]
    n_bg = ndimage.label(np.pad(~mask, 1, constant_values=True))[1]
    return n_comp, n_bg - 1


def has_square_block(mask: np.ndarray) -> bool:
    """True if the mask contains a 2x2 all-black block."""
    m = np.asarray(mask, bool)
    return bool((m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]).any())


def thin(mask: np.ndarray) -> np.ndarray:
    """Thin a binary mask to a unit-width skeleton.

    Guarantees: output is a subset of the input, contains no 2x2 black
    block, and preserves the component and hole counts.
    """
    mask = np.asarray(mask, bool)
    if not mask.any():
        return np.zeros_like(mask)
    # thin each 8-connected component inside its own bounding box: the
    # result is identical (thinning is local to a component) and sparse
    # scenes avoid paying for empty canvas area
    labels, n = ndimage.label(mask, structure=_STRUCT8)
    out = np.zeros_like(mask)
    for sl, lab in zip(ndimage.find_objects(labels), range(1, n + 1)):
        comp = labels[sl] == lab
        out[sl] |= _remove_square_blocks(_morphological_thin(comp))
    return out


def _remove_square_blocks(sk: np.ndarray) -> np.ndarray:
    # Morphological thinning occasionally leaves a 2x2 block at dense
    # crossings.  Delete one pixel per block, accepting a deletion only if
    # the global component/hole counts are unchanged.  Blocks are rare, so
    # the relabeling cost is negligible.
    sk = sk.copy()
    base = topology_counts(sk)
    while True:
        blk = sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]
        ys, xs = np.nonzero(blk)
        if len(ys) == 0:
            return sk
        y0, x0 = int(ys[0]), int(xs[0])
        for dy in (1, 0):
            for dx in (1, 0):
                sk[y0 + dy, x0 + dx] = False
                if topology_counts(sk) == base:
                    break
                sk[y0 + dy, x0 + dx] = True
            else:
                continue
            break
        else:
            # No single deletion preserves topology; leave the block rather
            # than damage connectivity.
            return sk


def recurrent_filter(mask: np.ndarray, kernel: int = 3, threshold: float = 0.25,
                     iterations: int = 10) -> list[np.ndarray]:
    """Repeatedly smooth a binary image with a uniform box filter.

    Each iteration replaces every pixel by (mean of the black indicator
    over the kernel window, zero padded) > threshold.  Returns the image
    after each iteration.
    """
    if kernel < 3 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 3")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    current = np.asarray(mask, float)
    out = []
    for _ in range(iterations):
        mean = ndimage.uniform_filter(current, size=kernel, mode="constant")
        current = (mean > threshold).astype(float)
        out.append(current.astype(bool))
    return out
