"""Perception walkthrough: a rendered frame through the detector stack.

Renders a camera view containing a target balloon and a goal hoop, then
shows the activation grid, the filtered detection, and both goal-detection
paths (color blob and IR frame differencing).

Run: python3 demos/demo_perception.py
"""

import numpy as np

from blimpsim.dynamics import rotation_matrix
from blimpsim.perception import (
    LogOddsGrid,
    activate_cells,
    detect_goal,
    diff_frames,
    largest_cluster,
    logodds_update,
)
from blimpsim.rendering import (
    BACKGROUND_RGB,
    BackgroundPool,
    BalloonSprite,
    CameraModel,
    HoopSprite,
    Scene,
    fast_cell_means,
    make_noise_pool,
    render_scene_pooled,
)
from blimpsim.world import default_families

cam = CameraModel()
balloon_family, goal_family = default_families(cam)
print("color families trained on synthetic calibration renders:")
print(f"  balloon: mu=({balloon_family.mu[0]:.1f}, {balloon_family.mu[1]:.1f})")
print(f"  goal:    mu=({goal_family.mu[0]:.1f}, {goal_family.mu[1]:.1f})")

rng = np.random.default_rng(42)
pool = BackgroundPool(BACKGROUND_RGB, make_noise_pool(rng, 4))
R = rotation_matrix((0.0, 0.0, 0.0))
r = np.array([0.0, 0.0, 2.0])
origin = cam.origin_world(R, r)
scene = Scene(
    balloons=[BalloonSprite(origin + np.array([2.2, 0.5, 0.1]), 0.15)],
    hoops=[HoopSprite(origin + np.array([4.0, -1.2, 0.8]),
                      np.array([-1.0, 0.0, 0.0]), 0.75, sides=3)],
)
frame = render_scene_pooled(scene, cam, R, r, pool, 0, rng)

means, goal_mask, n_goal_px = fast_cell_means(frame, goal_family, 3.5)
act = activate_cells(frame, balloon_family, 3.5, means=means)
grid = logodds_update(LogOddsGrid.from_probs(), act)

print("\nactivated cells ('#' = balloon color match):")
for row in act:
    print("  " + "".join("#" if c else "." for c in row))

det = largest_cluster(grid)
print(f"\nballoon detection: valid={det.valid}  center=({det.c_b[0]:.1f}, "
      f"{det.c_b[1]:.1f}) px  n_b={det.n_b} cells")

goal = detect_goal(goal_mask, min_blob=60)
print(f"goal via color blob: valid={goal.valid}  shape={goal.shape.value}  "
      f"n_g={goal.n_g} px ({n_goal_px} matching pixels)")

# the IR fallback: difference an illuminated and a dark frame
f_on = render_scene_pooled(scene, cam, R, r, pool, 1, rng, ir=True)
f_off = render_scene_pooled(scene, cam, R, r, pool, 1, rng, ir=False)
d = diff_frames(f_on, f_off)
goal_ir = detect_goal(d, luminance_thresh=60, min_blob=60)
print(f"goal via IR differencing: valid={goal_ir.valid}  "
      f"shape={goal_ir.shape.value}  n_g={goal_ir.n_g} px")
