"""Command-line entry points.

``train-colors`` fits a color family from labeled images; ``sim`` runs the
experiment grid (``sim experiment``) or serves the live world to operator
consoles (``sim serve``).

Exit codes: 2 for unreadable inputs or config schema violations, 3 for too
few training samples.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from blimpsim.perception import (
    CELL_SIZE,
    InsufficientSamples,
    rgb_to_lab,
    train_color_family,
)
from blimpsim.world import ConfigError


def _load_image_rgb(path: str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _cells_in_rect(img: np.ndarray, rect) -> list:
    """Mean (A, B) of every grid-aligned 16x16 cell fully inside a rect."""
    x, y, w, h = (int(v) for v in rect)
    H, W = img.shape[:2]
    samples = []
    c0 = (x + CELL_SIZE - 1) // CELL_SIZE
    r0 = (y + CELL_SIZE - 1) // CELL_SIZE
    c1 = (x + w) // CELL_SIZE
    r1 = (y + h) // CELL_SIZE
    for r in range(r0, r1):
        for c in range(c0, c1):
            py, px = r * CELL_SIZE, c * CELL_SIZE
            if py + CELL_SIZE > H or px + CELL_SIZE > W:
                continue
            block = img[py:py + CELL_SIZE, px:px + CELL_SIZE]
            ab = rgb_to_lab(block)[..., 1:]
            samples.append(ab.reshape(-1, 2).mean(axis=0))
    return samples


def main_train_colors(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="train-colors",
        description="Fit a color family from labeled target images.")
    ap.add_argument("--images", required=True, help="directory of PNG images")
    ap.add_argument("--labels", required=True,
                    help="JSON file of labeled cell rectangles per image")
    ap.add_argument("--out", required=True, help="output family JSON")
    ap.add_argument("--name", default="target", help="family label")
    args = ap.parse_args(argv)

    try:
        with open(args.labels, "r", encoding="utf-8") as fh:
            labels = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"train-colors: cannot read labels: {e}", file=sys.stderr)
        return 2

    entries = labels.get("files", labels) if isinstance(labels, dict) else labels
    if isinstance(entries, dict):
        entries = [{"file": k, "rects": v} for k, v in entries.items()]

    samples = []
    try:
        for entry in entries:
            path = os.path.join(args.images, entry["file"])
            img = _load_image_rgb(path)
            for rect in entry.get("rects", []):
                samples.extend(_cells_in_rect(img, rect))
    except (OSError, KeyError, TypeError, ValueError) as e:
        print(f"train-colors: cannot read inputs: {e}", file=sys.stderr)
        return 2

    try:
        family = train_color_family(samples, name=args.name)
    except InsufficientSamples as e:
        print(f"train-colors: {e}", file=sys.stderr)
        return 3

    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(family.to_json(), fh, indent=1)
        fh.write("\n")
    eig = np.linalg.eigvalsh(family.sigma)
    print(f"trained {family.name!r} on {len(samples)} cell samples")
    print(f"mu = [{family.mu[0]:.3f}, {family.mu[1]:.3f}], "
          f"sigma eigenvalues = [{eig[0]:.4f}, {eig[1]:.4f}]")
    return 0


def _cmd_experiment(args) -> int:
    from blimpsim.config import load_config
    from blimpsim.experiments import (
        run_delivery_experiment,
        run_pickup_experiment,
        write_metrics_csv,
    )

    try:
        sim = load_config(args.config)
    except ConfigError as e:
        print(f"sim experiment: {e}", file=sys.stderr)
        return 2

    seeds = list(range(args.seeds))
    rows = run_pickup_experiment(
        sim.world, sim.pickup_grid.n_blimps, sim.pickup_grid.n_balloons,
        seeds, duration=sim.pickup_grid.duration, n_jobs=args.jobs)
    rows += run_delivery_experiment(
        sim.world, sim.delivery_grid.n_blimps, sim.delivery_grid.n_balloons,
        seeds, duration=sim.delivery_grid.duration, n_jobs=args.jobs)
    write_metrics_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from blimpsim.config import load_config
    from blimpsim.service import serve

    try:
        sim = load_config(args.config)
    except ConfigError as e:
        print(f"sim serve: {e}", file=sys.stderr)
        return 2
    serve(sim.world, port=args.port, speed=args.speed, record=args.record)
    return 0


def main_sim(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="sim", description="Multi-blimp swarm simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("experiment", help="run the experiment grid")
    exp.add_argument("--config", required=True)
    exp.add_argument("--seeds", type=int, default=30)
    exp.add_argument("--out", required=True)
    exp.add_argument("--jobs", type=int, default=None)
    exp.set_defaults(func=_cmd_experiment)

    srv = sub.add_parser("serve", help="serve the live world over WebSocket")
    srv.add_argument("--config", required=True)
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--speed", type=float, default=1.0)
    srv.add_argument("--record", default=None,
                     help="append JSONL snapshots to this file")
    srv.set_defaults(func=_cmd_serve)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main_sim())
