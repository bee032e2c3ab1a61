"""Synthetic handwritten-digit corpus.

Stroke-based generator producing 28x28 grayscale digits with seeded
per-sample jitter, used wherever a labeled digit corpus is needed and no
IDX dataset is supplied.  Each digit is a set of control polylines in the
unit square (y grows downward); samples jitter the control points, apply a
mild random affine map, smooth with a Catmull-Rom spline and render with a
round pen on a supersampled grid.
"""

from __future__ import annotations

import numpy as np

from .raster import GrayImage

# Control strokes per digit, unit square coordinates (x right, y down).
_PROTOTYPES: dict[int, list[list[tuple[float, float]]]] = {
    0: [[(0.50, 0.12), (0.24, 0.30), (0.22, 0.62), (0.50, 0.88),
         (0.76, 0.62), (0.78, 0.30), (0.50, 0.12)]],
    1: [[(0.44, 0.14), (0.52, 0.40), (0.54, 0.65), (0.55, 0.88)]],
    2: [[(0.24, 0.30), (0.38, 0.14), (0.64, 0.16), (0.74, 0.34),
         (0.62, 0.55), (0.40, 0.70), (0.24, 0.86), (0.52, 0.84),
         (0.78, 0.84)]],
    3: [[(0.28, 0.20), (0.55, 0.13), (0.70, 0.28), (0.52, 0.46),
         (0.72, 0.62), (0.62, 0.82), (0.30, 0.86)]],
    4: [[(0.58, 0.12), (0.36, 0.38), (0.22, 0.60), (0.50, 0.60),
         (0.78, 0.58)],
        [(0.62, 0.34), (0.62, 0.62), (0.62, 0.88)]],
    5: [[(0.72, 0.14), (0.46, 0.15), (0.30, 0.17), (0.29, 0.34),
         (0.30, 0.46), (0.55, 0.44), (0.72, 0.58), (0.70, 0.76),
         (0.48, 0.87), (0.26, 0.80)]],
    6: [[(0.66, 0.12), (0.44, 0.30), (0.30, 0.52), (0.30, 0.74),
         (0.50, 0.86), (0.68, 0.72), (0.64, 0.54), (0.44, 0.52),
         (0.31, 0.64)]],
    7: [[(0.24, 0.16), (0.50, 0.15), (0.76, 0.16), (0.62, 0.42),
         (0.50, 0.64), (0.42, 0.87)]],
    8: [[(0.50, 0.50), (0.30, 0.34), (0.50, 0.12), (0.70, 0.34),
         (0.50, 0.50), (0.28, 0.68), (0.50, 0.88), (0.72, 0.68),
         (0.50, 0.50)]],
    9: [[(0.68, 0.30), (0.50, 0.14), (0.32, 0.28), (0.38, 0.46),
         (0.62, 0.46), (0.68, 0.30)],
        [(0.68, 0.30), (0.66, 0.58), (0.60, 0.88)]],
}


def _catmull_rom(points: np.ndarray, samples_per_seg: int = 12) -> np.ndarray:
    """Dense polyline through the control points (centripetal-ish spline)."""
    if len(points) < 3:
        t = np.linspace(0, 1, samples_per_seg * max(1, len(points) - 1) + 1)
        return points[0] + np.outer(t, points[-1] - points[0])
    pts = np.vstack([points[0], points, points[-1]])
    out = []
    for i in range(1, len(pts) - 2):
        p0, p1, p2, p3 = pts[i - 1], pts[i], pts[i + 1], pts[i + 2]
        t = np.linspace(0, 1, samples_per_seg, endpoint=False)[:, None]
        out.append(
            0.5 * ((2 * p1) + (-p0 + p2) * t
                   + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t**2
                   + (-p0 + 3 * p1 - 3 * p2 + p3) * t**3))
    out.append(pts[-2][None, :])
    return np.vstack(out)


def _render(strokes: list[np.ndarray], size: int = 28, pen: float = 0.05,
            supersample: int = 4) -> np.ndarray:
    n = size * supersample
    img = np.zeros((n, n), dtype=bool)
    radius = pen * n
    ir = int(np.ceil(radius))
    yy, xx = np.mgrid[-ir:ir + 1, -ir:ir + 1]
    disk = (xx**2 + yy**2) <= radius**2
    for stroke in strokes:
        dense = _catmull_rom(stroke)
        # resample evenly so pen stamps overlap
        seglen = np.hypot(*np.diff(dense, axis=0).T)
        total = seglen.sum()
        n_stamps = max(2, int(total * n * 2))
        t = np.linspace(0, 1, n_stamps)
        cum = np.concatenate([[0], np.cumsum(seglen)]) / max(total, 1e-12)
        px = np.interp(t, cum, dense[:, 0]) * n
        py = np.interp(t, cum, dense[:, 1]) * n
        for x, y in zip(px, py):
            cx, cy = int(round(x)), int(round(y))
            x0, x1 = max(0, cx - ir), min(n, cx + ir + 1)
            y0, y1 = max(0, cy - ir), min(n, cy + ir + 1)
            img[y0:y1, x0:x1] |= disk[y0 - cy + ir:y1 - cy + ir,
                                      x0 - cx + ir:x1 - cx + ir]
    blocks = img.reshape(size, supersample, size, supersample)
    return blocks.mean(axis=(1, 3))


def sample_digit(digit: int, rng: np.random.Generator,
                 jitter: float = 0.025) -> GrayImage:
    """One randomized 28x28 grayscale rendering of ``digit``."""
    strokes = []
    scale = rng.uniform(0.85, 1.0)
    shear = rng.uniform(-0.12, 0.12)
    dx, dy = rng.uniform(-0.04, 0.04, size=2)
    for proto in _PROTOTYPES[digit]:
        pts = np.array(proto, dtype=float)
        pts = pts + rng.normal(0.0, jitter, size=pts.shape)
        centered = pts - 0.5
        centered[:, 0] += shear * centered[:, 1]
        pts = centered * scale + 0.5 + np.array([dx, dy])
        strokes.append(np.clip(pts, 0.04, 0.96))
    pen = rng.uniform(0.045, 0.06)
    return GrayImage(_render(strokes, pen=pen), label=digit)


def make_corpus(per_digit: int, seed: int, digits=range(10),
                jitter: float = 0.025) -> list[GrayImage]:
    """A labeled corpus with ``per_digit`` samples of each digit."""
    rng = np.random.default_rng(seed)
    out = []
    for d in digits:
        for _ in range(per_digit):
            out.append(sample_digit(d, rng, jitter=jitter))
    return out


def delete_random_black(mask: np.ndarray, fraction: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Structurally damage a binary image by deleting a random fraction of
    its black pixels."""
    mask = np.asarray(mask, bool).copy()
    ys, xs = np.nonzero(mask)
    n_kill = int(round(fraction * len(ys)))
    idx = rng.choice(len(ys), size=n_kill, replace=False)
    mask[ys[idx], xs[idx]] = False
    return mask


def noise_image(shape: tuple[int, int], density: float,
                rng: np.random.Generator) -> np.ndarray:
    """Uniform random black-pixel noise at the given density."""
    return rng.random(shape) < density
