"""Raster ingestion and scene composition.

Images are numpy arrays of shape ``(height, width)``.  Grayscale images are
floats in [0, 1]; binary images are boolean masks where True means black
(ink).  Pixel coordinates are ``(x, y)`` with x = column, y = row.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """Malformed input file (bad magic, truncated payload, count mismatch)."""


@dataclass
class GrayImage:
    pixels: np.ndarray  # (h, w) float in [0, 1]
    label: int | None = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ScenePlacement:
    """One object placed in a composed scene."""

    source_index: int
    size: int  # square side of the placed object, pixels
    origin: tuple[int, int]  # (x, y) of the top-left corner in the canvas
    label: int | None = None

    def bbox(self) -> tuple[int, int, int, int]:
        x, y = self.origin
        return (x, y, x + self.size, y + self.size)


def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path=None) -> list[GrayImage]:
    """Load an IDX image file (standard MNIST layout, big-endian).

    Intensities are rescaled from [0, 255] to [0, 1].  When ``labels_path``
    is given, each image carries its label; the label count must match.
    """
    with _open_maybe_gzip(images_path) as f:
        header = f.read(16)
        if len(header) < 16:
            raise DataFormatError(f"{images_path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        payload = f.read(count * rows * cols)
        if len(payload) != count * rows * cols:
            raise DataFormatError(f"{images_path}: truncated IDX payload")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)
    labels = None
    if labels_path is not None:
        labels = load_idx_labels(labels_path)
        if len(labels) != count:
            raise DataFormatError(
                f"label count {len(labels)} does not match image count {count}"
            )
    return [
        GrayImage(raw[i].astype(np.float64) / 255.0,
                  None if labels is None else int(labels[i]))
        for i in range(count)
    ]


def load_idx_labels(path) -> np.ndarray:
    with _open_maybe_gzip(path) as f:
        header = f.read(8)
        if len(header) < 8:
            raise DataFormatError(f"{path}: truncated IDX header")
        magic, count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        payload = f.read(count)
        if len(payload) != count:
            raise DataFormatError(f"{path}: truncated IDX payload")
    return np.frombuffer(payload, dtype=np.uint8)


def save_idx(images: list[GrayImage], images_path, labels_path=None) -> None:
    """Write images (and optionally labels) in IDX format."""
    if images:
        h, w = images[0].pixels.shape
    else:
        h = w = 0
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(images), h, w))
        for img in images:
            f.write(np.clip(img.pixels * 255.0, 0, 255).astype(np.uint8).tobytes())
    if labels_path is not None:
        with open(labels_path, "wb") as f:
            f.write(struct.pack(">II", IDX_LABELS_MAGIC, len(images)))
            f.write(bytes(0 if img.label is None else img.label for img in images))


def binarize_upscale(img: GrayImage | np.ndarray, factor: int = 10,
                     threshold: float = 0.1) -> np.ndarray:
    """Upscale a grayscale image by an integer factor (bilinear) and threshold.

    A pixel is black iff its resampled intensity exceeds ``threshold``.
    """
    pixels = img.pixels if isinstance(img, GrayImage) else np.asarray(img, float)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    if factor == 1:
        up = pixels
    else:
        up = ndimage.zoom(pixels, factor, order=1, grid_mode=True, mode="nearest")
    return up > threshold


def rescale_binary(mask: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor rescale of a square binary mask to ``size`` pixels."""
    h, w = mask.shape
    ys = np.minimum((np.arange(size) * h) // size, h - 1)
    xs = np.minimum((np.arange(size) * w) // size, w - 1)
    return mask[np.ix_(ys, xs)]


class SceneOverlapError(ValueError):
    """Placed bounding boxes overlap while forbid_overlap is set."""


def _boxes_overlap(a, b) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def compose_scene(placements: list[ScenePlacement], sources: list[np.ndarray],
                  canvas: tuple[int, int], forbid_overlap: bool = True) -> np.ndarray:
    """Compose binary sources into a canvas; output is the union of placements.

    ``canvas`` is (width, height).  Sources are rescaled nearest-neighbor to
    each placement's target size.
    """
    cw, ch = canvas
    out = np.zeros((ch, cw), dtype=bool)
    boxes = []
    for p in placements:
        x0, y0, x1, y1 = p.bbox()
        if x0 < 0 or y0 < 0 or x1 > cw or y1 > ch:
            raise ValueError(f"placement {p} outside canvas {canvas}")
        if forbid_overlap:
            for b in boxes:
                if _boxes_overlap(p.bbox(), b):
                    raise SceneOverlapError(f"placement {p} overlaps {b}")
        boxes.append(p.bbox())
        out[y0:y1, x0:x1] |= rescale_binary(sources[p.source_index], p.size)
    return out


def random_placements(rng: np.random.Generator, n_objects: int,
                      source_indices: list[int], canvas: tuple[int, int],
                      size_range: tuple[int, int], labels=None,
                      margin: int = 4, max_tries: int = 1000
                      ) -> list[ScenePlacement]:
    """Draw non-overlapping random placements by rejection sampling.

    ``margin`` keeps content away from the canvas border so later filtering
    stages see zero-padded surroundings.  Raises after ``max_tries`` failed
    attempts per object.
    """
    cw, ch = canvas
    placements: list[ScenePlacement] = []
    for k in range(n_objects):
        idx = source_indices[k % len(source_indices)]
        for _ in range(max_tries):
            size = int(rng.integers(size_range[0], size_range[1] + 1))
            if size + 2 * margin > min(cw, ch):
                continue
            x = int(rng.integers(margin, cw - size - margin + 1))
            y = int(rng.integers(margin, ch - size - margin + 1))
            cand = ScenePlacement(idx, size, (x, y),
                                  None if labels is None else labels[k])
            if all(not _boxes_overlap(cand.bbox(), p.bbox()) for p in placements):
                placements.append(cand)
                break
        else:
            raise SceneOverlapError(
                f"could not place object {k} after {max_tries} tries")
    return placements


def placements_to_json(placements: list[ScenePlacement]) -> list[dict]:
    return [
        {"source-index": p.source_index, "size": p.size,
         "origin": list(p.origin), "label": p.label}
        for p in placements
    ]


def placements_from_json(records: list[dict]) -> list[ScenePlacement]:
    return [
        ScenePlacement(r["source-index"], r["size"], tuple(r["origin"]),
                       r.get("label"))
        for r in records
    ]


def save_manifest(path, scenes: list[list[ScenePlacement]]) -> None:
    with open(path, "w") as f:
        json.dump([placements_to_json(s) for s in scenes], f, indent=2)


def load_manifest(path) -> list[list[ScenePlacement]]:
    with open(path) as f:
        return [placements_from_json(s) for s in json.load(f)]


# --- PGM (P5) / PBM (P4) -------------------------------------------------

def write_pgm(path, gray: np.ndarray) -> None:
    """Write a grayscale image (floats in [0,1] or uint8) as binary PGM."""
    arr = np.asarray(gray)
    if arr.dtype != np.uint8:
        arr = np.clip(arr * 255.0, 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    fields, pos = _read_pnm_header(data, b"P5", 3)
    w, h, maxval = fields
    arr = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return arr.reshape(h, w).astype(np.float64) / maxval


def write_pbm(path, mask: np.ndarray) -> None:
    """Write a binary mask (True = black) as binary PBM."""
    mask = np.asarray(mask, bool)
    h, w = mask.shape
    packed = np.packbits(mask, axis=1)
    with open(path, "wb") as f:
        f.write(f"P4\n{w} {h}\n".encode())
        f.write(packed.tobytes())


def read_pbm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    fields, pos = _read_pnm_header(data, b"P4", 2)
    w, h = fields
    row_bytes = (w + 7) // 8
    arr = np.frombuffer(data, dtype=np.uint8, count=h * row_bytes, offset=pos)
    bits = np.unpackbits(arr.reshape(h, row_bytes), axis=1)[:, :w]
    return bits.astype(bool)


def _read_pnm_header(data: bytes, magic: bytes, n_fields: int):
    if not data.startswith(magic):
        raise DataFormatError(f"not a {magic.decode()} file")
    fields = []
    pos = len(magic)
    while len(fields) < n_fields:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    return fields, pos + 1
