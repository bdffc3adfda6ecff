"""A miniature of the scaling study: attempts vs swarm size.

Runs a reduced pickup grid (60 simulated seconds, 4 seeds per cell) and
prints the attempt statistics; the full 300 s x 30 seed study runs via
``sim experiment`` or the acceptance suite.

Run: python3 demos/demo_experiment.py
"""

from blimpsim.experiments import (
    median_attempts_by_blimps,
    metrics_csv_bytes,
    run_pickup_experiment,
    spearman_blimps_vs_attempts,
)
from blimpsim.world import WorldConfig

base = WorldConfig(state_dir="/tmp/blimpsim-demo")
rows = run_pickup_experiment(base, n_blimps=[1, 2, 3, 4], n_balloons=[8],
                             seeds=range(4), duration=60.0)

print("pickup attempts over 60 s, 4 seeds per swarm size:")
for n in (1, 2, 3, 4):
    attempts = [r["attempts"] for r in rows if r["n_blimps"] == n]
    print(f"  {n} blimp(s): {attempts}")
print("medians:", median_attempts_by_blimps(rows))
print(f"spearman(n_blimps, attempts) = "
      f"{spearman_blimps_vs_attempts(rows):.3f}")
print("\nmetrics CSV head:")
print("\n".join(metrics_csv_bytes(rows).decode().splitlines()[:4]))
