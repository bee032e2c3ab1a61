"""Command-line interface.

One binary with subcommands covering the full pipeline: dataset dumps,
thinning, graph simplification, primitive decomposition, training,
evaluation, scene generation, recognition and noise recovery.

Exit codes: 0 success, 1 usage error, 2 data error, 3 search-budget
exhaustion during evaluation or recognition.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .features import load_model, save_model
from .graphs import PointGraph, build_pixel_graph, simplify, supercover_line
from .pipeline import (EvalReport, SceneConfig, TrainConfig, TrainingError,
                       evaluate_multi, evaluate_single, simplified_graph,
                       train)
from .primitives import DecomposeConfig, decompose
from .raster import (DataFormatError, binarize_upscale, compose_scene,
                     load_idx, load_idx_labels, random_placements, read_pbm,
                     read_pgm, save_idx, save_manifest, write_pbm, write_pgm)
from .recognizer import SearchBudget, classify_scene, recognize_noisy
from .synth import make_corpus
from .thinning import recurrent_filter, thin

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


def _load_image(path: str) -> np.ndarray:
    """Grayscale image in [0, 1] from a PGM or PBM file."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path)
    if magic == b"P4":
        return read_pbm(path).astype(float)
    raise DataFormatError(f"{path}: expected a P5 PGM or P4 PBM file")


def _mask(img: np.ndarray, cfg) -> np.ndarray:
    return binarize_upscale(img, cfg["upscale_factor"],
                            cfg["binarize_threshold"])


def _budget(cfg) -> SearchBudget:
    return SearchBudget(node_limit=cfg["budget"])


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(seed=cfg["seed"], line_threshold=cfg["line_threshold"],
                       binarize_threshold=cfg["binarize_threshold"],
                       upscale_factor=cfg["upscale_factor"],
                       fa_ceiling=cfg["fa_ceiling"], budget=_budget(cfg))


def _graph_overlay(mask: np.ndarray, g: PointGraph) -> np.ndarray:
    """Grayscale render: background white, mask grey, graph edges black."""
    out = np.full(mask.shape, 255, np.uint8)
    out[mask.astype(bool)] = 160
    h, w = mask.shape
    for i, j in sorted(g.edges):
        (x0, y0), (x1, y1) = (np.rint(g.vertices[i]).astype(int),
                              np.rint(g.vertices[j]).astype(int))
        for x, y in supercover_line(x0, y0, x1, y1):
            if 0 <= y < h and 0 <= x < w:
                out[y, x] = 0
    for x, y in np.asarray(np.rint(g.vertices), int):
        if 0 <= y < h and 0 <= x < w:
            out[y, x] = 64
    return out


def _detection_overlay(mask: np.ndarray, detections) -> np.ndarray:
    """Grayscale render: mask grey, each detection's bounding box black."""
    out = np.full(mask.shape, 255, np.uint8)
    out[mask.astype(bool)] = 160
    h, w = mask.shape
    for det in detections:
        x0, y0, x1, y1 = (int(round(v)) for v in det.bbox)
        x0, x1 = max(0, x0), min(w - 1, x1)
        y0, y1 = max(0, y0), min(h - 1, y1)
        out[y0, x0:x1 + 1] = 0
        out[y1, x0:x1 + 1] = 0
        out[y0:y1 + 1, x0] = 0
        out[y0:y1 + 1, x1] = 0
    return out


def _labeled_images(images_path: str, labels_path: str) -> list:
    return load_idx(images_path, labels_path)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for every random choice.")
@click.option("--line-threshold", type=float, default=0.1, show_default=True,
              help="Max perpendicular deviation/length ratio for lines.")
@click.option("--binarize-threshold", type=float, default=0.1,
              show_default=True, help="Grey level above which a pixel is ink.")
@click.option("--upscale-factor", type=int, default=10, show_default=True,
              help="Bilinear upscale factor applied before thinning.")
@click.option("--fa-ceiling", type=float, default=0.01, show_default=True,
              help="Max validation false-alarm rate for a kept class.")
@click.option("--budget", type=int, default=1_000_000, show_default=True,
              help="Backtracking node limit per class per component.")
@click.pass_context
def cli(ctx, **kwargs):
    """Graph-based digit recognition pipeline."""
    ctx.obj = kwargs


@cli.command()
@click.argument("images_idx", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_idx", type=click.Path(exists=True, dir_okay=False),
                required=False)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--count", type=int, default=None,
              help="Dump only the first N images.")
@click.pass_obj
def ingest(cfg, images_idx, labels_idx, out_dir, count):
    """Dump an IDX image file (with optional labels) to individual PGMs."""
    images = load_idx(images_idx)
    labels = (load_idx_labels(labels_idx) if labels_idx
              else [None] * len(images))
    if len(images) != len(labels):
        raise DataFormatError(f"{len(images)} images but {len(labels)} labels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(images) if count is None else min(count, len(images))
    for i in range(n):
        suffix = "" if labels[i] is None else f"-{int(labels[i])}"
        write_pgm(out / f"img-{i:05d}{suffix}.pgm",
                  np.rint(images[i].pixels * 255).astype(np.uint8))
    click.echo(f"wrote {n} images to {out}")


@cli.command("gen-digits")
@click.option("--per-digit", type=int, default=100, show_default=True)
@click.option("--out-images", type=click.Path(dir_okay=False), required=True)
@click.option("--out-labels", type=click.Path(dir_okay=False), required=True)
@click.pass_obj
def gen_digits(cfg, per_digit, out_images, out_labels):
    """Write a synthetic labeled digit corpus as an IDX image/label pair."""
    corpus = make_corpus(per_digit, seed=cfg["seed"])
    save_idx(corpus, out_images, out_labels)
    click.echo(f"wrote {len(corpus)} digits")


@cli.command("thin")
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_obj
def thin_cmd(cfg, image, out):
    """Binarize, upscale and thin one image; write the skeleton as PBM."""
    write_pbm(out, thin(_mask(_load_image(image), cfg)))
    click.echo(f"wrote {out}")


@cli.command("simplify")
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--graph-json", type=click.Path(dir_okay=False), required=True)
@click.option("--overlay", type=click.Path(dir_okay=False), default=None,
              help="Also render the graph over the mask as a PGM.")
@click.pass_obj
def simplify_cmd(cfg, image, graph_json, overlay):
    """Thin one image and reduce its skeleton to a minimal graph."""
    mask = _mask(_load_image(image), cfg)
    g = simplify(build_pixel_graph(thin(mask)), mask)
    Path(graph_json).write_text(json.dumps(g.to_json()))
    if overlay:
        write_pgm(overlay, _graph_overlay(mask, g))
    click.echo(f"{len(g.vertices)} vertices, {len(g.edges)} edges")


@cli.command("decompose")
@click.argument("graph_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-decompositions", type=int, default=10, show_default=True)
@click.pass_obj
def decompose_cmd(cfg, graph_json, max_decompositions):
    """Print primitive decompositions of a graph JSON file, one per line."""
    g = PointGraph.from_json(json.loads(Path(graph_json).read_text()))
    config = DecomposeConfig(line_threshold=cfg["line_threshold"],
                             max_decompositions=max_decompositions)
    for dec in decompose(g, None, config):
        click.echo(json.dumps({
            "kinds": list(dec.kinds()),
            "primitives": [{"kind": p.kind, "vertices": list(p.verts)}
                           for p in dec.primitives]}))


@cli.command("train")
@click.argument("images_idx", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_idx", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output model JSON path.")
@click.option("--validation-fraction", type=float, default=0.2,
              show_default=True)
@click.pass_obj
def train_cmd(cfg, images_idx, labels_idx, out, validation_fraction):
    """Learn feature classes from a labeled IDX corpus; write model JSON."""
    images = _labeled_images(images_idx, labels_idx)
    rng = np.random.default_rng(cfg["seed"])
    order = rng.permutation(len(images))
    n_val = max(1, int(round(validation_fraction * len(images))))
    val = [images[i] for i in order[:n_val]]
    trn = [images[i] for i in order[n_val:]]
    model = train(trn, val, _train_config(cfg))
    save_model(out, model)
    click.echo(f"wrote {len(model)} classes to {out}")


def _echo_report(report: EvalReport, out: str | None) -> None:
    payload = report.to_json()
    if out:
        Path(out).write_text(json.dumps(payload, indent=2))
    click.echo(json.dumps(payload))


@cli.command("evaluate-single")
@click.argument("model_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("images_idx", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_idx", type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_out", type=click.Path(dir_okay=False))
@click.option("--canvas", type=int, nargs=2, default=(1000, 1000),
              show_default=True)
@click.option("--size-range", type=int, nargs=2, default=(84, 560),
              show_default=True)
@click.option("--count", type=int, default=None,
              help="Evaluate only the first N images.")
@click.pass_context
def evaluate_single_cmd(ctx, model_json, images_idx, labels_idx, report_out,
                        canvas, size_range, count):
    """Classify single digits at random locations and scales."""
    cfg = ctx.obj
    model, _ = load_model(model_json)
    images = _labeled_images(images_idx, labels_idx)[:count]
    report = evaluate_single(
        model, images,
        SceneConfig(canvas=tuple(canvas), size_range=tuple(size_range)),
        _train_config(cfg), seed=cfg["seed"])
    _echo_report(report, report_out)
    if report.exhausted_count:
        ctx.exit(EXIT_BUDGET)


@cli.command("evaluate-multi")
@click.argument("model_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("images_idx", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_idx", type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_out", type=click.Path(dir_okay=False))
@click.option("--canvas", type=int, nargs=2, default=(2000, 2000),
              show_default=True)
@click.option("--size-range", type=int, nargs=2, default=(81, 1000),
              show_default=True)
@click.option("--digits-per-scene", type=int, default=3, show_default=True)
@click.option("--count", type=int, default=None,
              help="Use only the first N images.")
@click.pass_context
def evaluate_multi_cmd(ctx, model_json, images_idx, labels_idx, report_out,
                       canvas, size_range, digits_per_scene, count):
    """Classify non-overlapping multi-digit scenes, per-digit accuracy."""
    cfg = ctx.obj
    model, _ = load_model(model_json)
    images = _labeled_images(images_idx, labels_idx)[:count]
    report = evaluate_multi(
        model, images,
        SceneConfig(canvas=tuple(canvas), size_range=tuple(size_range),
                    digits_per_scene=digits_per_scene),
        _train_config(cfg), seed=cfg["seed"])
    _echo_report(report, report_out)
    if report.exhausted_count:
        ctx.exit(EXIT_BUDGET)


@cli.command("recognize")
@click.argument("model_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write detections as JSON lines (default: stdout only).")
@click.option("--overlay", type=click.Path(dir_okay=False), default=None,
              help="Render detection bounding boxes over the mask as a PGM.")
@click.pass_context
def recognize_cmd(ctx, model_json, image, out, overlay):
    """Detect digits in one image; print detections as JSON lines."""
    cfg = ctx.obj
    model, _ = load_model(model_json)
    mask = _mask(_load_image(image), cfg)
    result = classify_scene(mask, model, _budget(cfg), cfg["line_threshold"])
    lines = [json.dumps(det.to_json()) for det in result.detections]
    for line in lines:
        click.echo(line)
    if out:
        Path(out).write_text("".join(line + "\n" for line in lines))
    if overlay:
        write_pgm(overlay, _detection_overlay(mask, result.detections))
    if result.exhausted:
        ctx.exit(EXIT_BUDGET)


@cli.command("gen-scenes")
@click.argument("images_idx", type=click.Path(exists=True, dir_okay=False))
@click.argument("labels_idx", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--count", type=int, default=10, show_default=True,
              help="Number of scenes.")
@click.option("--digits-per-scene", type=int, default=3, show_default=True)
@click.option("--canvas", type=int, nargs=2, default=(2000, 2000),
              show_default=True)
@click.option("--size-range", type=int, nargs=2, default=(81, 1000),
              show_default=True)
@click.pass_obj
def gen_scenes(cfg, images_idx, labels_idx, out_dir, count, digits_per_scene,
               canvas, size_range):
    """Compose non-overlapping digit scenes; write PBMs plus manifests."""
    images = _labeled_images(images_idx, labels_idx)
    masks = [binarize_upscale(img, cfg["upscale_factor"],
                              cfg["binarize_threshold"]) for img in images]
    rng = np.random.default_rng(cfg["seed"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        chosen = [int(rng.integers(len(masks)))
                  for _ in range(digits_per_scene)]
        placements = random_placements(
            rng, digits_per_scene, chosen, tuple(canvas), tuple(size_range),
            labels=[images[c].label for c in chosen])
        scene = compose_scene(placements, masks, tuple(canvas))
        write_pbm(out / f"scene-{i:04d}.pbm", scene)
        save_manifest(out / f"scene-{i:04d}.json", [placements])
    click.echo(f"wrote {count} scenes to {out}")


@cli.command("denoise")
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--kernel", type=int, default=3, show_default=True)
@click.option("--threshold", type=float, default=0.25, show_default=True)
@click.option("--iterations", type=int, default=10, show_default=True)
@click.option("--model", "model_json",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Also report the first iteration at which a class fires.")
@click.pass_obj
def denoise(cfg, image, out_dir, kernel, threshold, iterations, model_json):
    """Run the recurrent uniform filter; dump each iteration as a PBM."""
    mask = _mask(_load_image(image), cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(recurrent_filter(mask, kernel, threshold,
                                             iterations), start=1):
        write_pbm(out / f"iter-{i:02d}.pbm", img)
    click.echo(f"wrote {iterations} iterations to {out}")
    if model_json:
        model, _ = load_model(model_json)
        det, found_at = recognize_noisy(
            mask, model, kernel, threshold, iterations, _budget(cfg),
            cfg["line_threshold"])
        if det is None:
            click.echo("no detection")
        else:
            click.echo(json.dumps(det.to_json()))


def main(argv=None) -> int:
    try:
        # in non-standalone mode ctx.exit(code) surfaces as a return value
        rv = cli.main(args=argv, standalone_mode=False)
        if isinstance(rv, int):
            return rv
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return EXIT_DATA
    except (DataFormatError, TrainingError, OSError, ValueError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
