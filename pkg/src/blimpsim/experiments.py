"""Experiment harness: seeded pickup and pickup-and-delivery runs.

A pickup run counts an *attempt* at every onset of the nonzero charge
feedforward toward a balloon and a *success* at every capture event; after
each capture the balloon and the blimp are redeployed to fresh random
spawn poses once a fixed handling delay has passed (standing in for the
human operator of the field protocol).  A delivery run lets blimps carry
balloons to the hoops and additionally counts deliveries.

Every run is a pure function of (configuration, seed); rows come out in
grid order and serialize to a byte-stable CSV.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import replace

from blimpsim.world import ConfigError, World, WorldConfig

CSV_HEADER = ("seed", "n_blimps", "n_balloons", "attempts", "successes",
              "deliveries")

PICKUP_MAX_BLIMPS = 4
PICKUP_MAX_BALLOONS = 8


def run_cell(base: WorldConfig, scenario: str, n_blimps: int, n_balloons: int,
             duration: float, seed: int) -> dict:
    """One seeded run; returns its metrics row."""
    cfg = replace(base, seed=seed, n_blimps=n_blimps, n_balloons=n_balloons,
                  scenario=scenario)
    world = World(cfg)
    world.run(duration)
    return {
        "seed": seed,
        "n_blimps": n_blimps,
        "n_balloons": n_balloons,
        "attempts": world.metrics["attempts"],
        "successes": world.metrics["successes"],
        "deliveries": world.metrics["deliveries"],
    }


def _run_tasks(tasks, n_jobs: int | None = None) -> list[dict]:
    if n_jobs is None:
        n_jobs = min(os.cpu_count() or 1, 2)
    if n_jobs > 1 and len(tasks) > 1:
        from joblib import Parallel, delayed
        return Parallel(n_jobs=n_jobs)(delayed(run_cell)(*t) for t in tasks)
    return [run_cell(*t) for t in tasks]


def run_pickup_experiment(base: WorldConfig, n_blimps, n_balloons,
                          seeds, duration: float = 300.0,
                          n_jobs: int | None = None) -> list[dict]:
    """The pickup grid: every (n_blimps, n_balloons) cell over every seed.

    ``n_blimps`` and ``n_balloons`` are iterables of counts (1..4 and 1..8
    respectively, the deployable range of the protocol).
    """
    blimp_counts = list(n_blimps)
    balloon_counts = list(n_balloons)
    for nb in blimp_counts:
        if not 1 <= nb <= PICKUP_MAX_BLIMPS:
            raise ConfigError(f"pickup runs support 1..4 blimps, got {nb}")
    for nt in balloon_counts:
        if not 1 <= nt <= PICKUP_MAX_BALLOONS:
            raise ConfigError(f"pickup runs support 1..8 balloons, got {nt}")
    tasks = [
        (base, "pickup", nb, nt, duration, seed)
        for nb in blimp_counts
        for nt in balloon_counts
        for seed in seeds
    ]
    return _run_tasks(tasks, n_jobs)


def run_delivery_experiment(base: WorldConfig, n_blimps, n_balloons,
                            seeds, duration: float = 300.0,
                            n_jobs: int | None = None) -> list[dict]:
    """Full pickup-and-delivery runs over the given cells and seeds."""
    tasks = [
        (base, "delivery", nb, nt, duration, seed)
        for nb in list(n_blimps)
        for nt in list(n_balloons)
        for seed in seeds
    ]
    return _run_tasks(tasks, n_jobs)


def metrics_csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([row[k] for k in CSV_HEADER])
    return buf.getvalue().encode("ascii")


def write_metrics_csv(rows, path) -> None:
    data = metrics_csv_bytes(rows)
    with open(path, "wb") as fh:
        fh.write(data)


def median_attempts_by_blimps(rows) -> dict[int, float]:
    """Median attempts per blimp count (used for the scaling check)."""
    import statistics
    by = {}
    for row in rows:
        by.setdefault(row["n_blimps"], []).append(row["attempts"])
    return {k: statistics.median(v) for k, v in sorted(by.items())}


def spearman_blimps_vs_attempts(rows) -> float:
    from scipy import stats
    x = [row["n_blimps"] for row in rows]
    y = [row["attempts"] for row in rows]
    return float(stats.spearmanr(x, y).statistic)
