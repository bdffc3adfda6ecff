"""Synthetic camera rendering and its fused perception kernels.

The camera is an ideal pinhole (80 deg horizontal FOV, 320x240) mounted at
the front of the gondola below the hull, looking along body-x.  Scenes are
rasterized as depth-sorted "stamps": balloons become shaded disks with the
correct perspective silhouette radius f R / sqrt(d^2 - R^2); hoops become
tubes of small disks stamped along the shape perimeter.  Per-pixel Gaussian
sensor noise (sigma = 6/255) covers every pixel; per-object brightness
jitter (+-20%) models uneven lighting.

With IR illumination on, retroreflective hoop pixels render near
saturation while everything else dims to 60%, so the IR-on/IR-off frame
difference isolates the hoops.

The numba kernels exist for throughput: the scheduler renders thousands of
frames per simulated minute, so backgrounds+noise are pre-composited into a
reusable pool and only stamped pixels are touched per frame, and the chroma
pass (exact sRGB -> CIELAB A/B, gamma by table, cube roots by two
division-free Newton steps) is fused with the 16x16 cell reduction and the
per-pixel goal-color test.  Tests pin the fast chroma against
:func:`blimpsim.perception.rgb_to_lab` to float precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from blimpsim.perception import (
    CELL_SIZE,
    FRAME_HEIGHT,
    FRAME_WIDTH,
    GRID_COLS,
    GRID_ROWS,
    ColorFamily,
    Frame,
)

NOISE_SIGMA = 6.0          # 8-bit counts, i.e. 6/255 full scale
BRIGHTNESS_JITTER = 0.2
IR_DIM_FACTOR = 0.6
IR_RING_COLOR = (248, 246, 240)

BACKGROUND_RGB = (96, 108, 98)
BALLOON_RGB = (204, 42, 48)
HOOP_RGB = (232, 218, 96)


# --------------------------------------------------------------------------
# camera

@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera rigidly mounted in the body frame, axis along x_B.

    The mount sits at the gondola front, below the COM, so that centering
    a target in the image puts the hanging net on a collision course.
    """

    hfov_deg: float = 80.0
    width: int = FRAME_WIDTH
    height: int = FRAME_HEIGHT
    mount: tuple[float, float, float] = (0.35, 0.0, -0.60)
    near: float = 0.15

    @property
    def f_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)

    def origin_world(self, R: np.ndarray, r: np.ndarray) -> np.ndarray:
        return r + R @ np.asarray(self.mount)

    def project(self, points, R: np.ndarray, r: np.ndarray):
        """World points -> (u, v, depth) with u right, v down.

        ``depth`` is the forward (body-x) distance from the camera; points
        behind the near plane get depth <= 0 and must be culled by the
        caller.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.origin_world(R, r)) @ R  # world->body via R^T on rows
        x = rel[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.center[0] - self.f_px * rel[:, 1] / x
            v = self.center[1] - self.f_px * rel[:, 2] / x
        return u, v, x


# --------------------------------------------------------------------------
# scene description

@dataclass(frozen=True)
class BalloonSprite:
    center: np.ndarray
    radius: float
    rgb: tuple[int, int, int] = BALLOON_RGB


@dataclass
class HoopSprite:
    center: np.ndarray
    normal: np.ndarray
    aperture: float
    tube: float = 0.05
    rgb: tuple[int, int, int] = HOOP_RGB
    sides: int = 0  # 0 = circle, else polygon vertex count
    points: np.ndarray | None = None  # cached perimeter samples

    def perimeter(self) -> np.ndarray:
        if self.points is None:
            self.points = hoop_perimeter_points(self)
        return self.points


@dataclass
class Scene:
    balloons: list = field(default_factory=list)
    hoops: list = field(default_factory=list)
    background: tuple[int, int, int] = BACKGROUND_RGB


def hoop_perimeter_points(h: HoopSprite, samples: int = 160) -> np.ndarray:
    """3-D points along the hoop outline (circle or polygon inscribed in
    the aperture circle), in its plane."""
    n = np.asarray(h.normal, dtype=float)
    n = n / np.linalg.norm(n)
    up = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(up, n)
    if np.linalg.norm(e1) < 1e-9:
        e1 = np.array([1.0, 0.0, 0.0])
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    if h.sides == 0:
        ang = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
        ring = (np.outer(np.cos(ang), e1) + np.outer(np.sin(ang), e2)) * h.aperture
    else:
        vang = math.pi / 2.0 + np.arange(h.sides) * 2.0 * math.pi / h.sides
        verts = (np.outer(np.cos(vang), e1) + np.outer(np.sin(vang), e2)) * h.aperture
        per_edge = max(2, samples // h.sides)
        segs = []
        for i in range(h.sides):
            a, b = verts[i], verts[(i + 1) % h.sides]
            t = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None]
            segs.append(a + t * (b - a))
        ring = np.vstack(segs)
    return np.asarray(h.center, dtype=float) + ring


# --------------------------------------------------------------------------
# stamping kernel

@njit(cache=True)
def _stamp_with_noise(img, stamps, noise):
    """Draw depth-sorted disk stamps over a pre-noised background.

    Stamp pixels are written as clip(color * shade + noise), matching what
    a full background-then-stamps-then-noise composite would produce.

    stamp row: [u, v, radius_px, r, g, b, shaded_flag]
    """
    H, W = img.shape[0], img.shape[1]
    for k in range(stamps.shape[0]):
        u = stamps[k, 0]
        v = stamps[k, 1]
        rad = stamps[k, 2]
        cr = stamps[k, 3]
        cg = stamps[k, 4]
        cb = stamps[k, 5]
        shaded = stamps[k, 6] > 0.5
        x0 = int(max(0.0, math.floor(u - rad)))
        x1 = int(min(W - 1.0, math.ceil(u + rad)))
        y0 = int(max(0.0, math.floor(v - rad)))
        y1 = int(min(H - 1.0, math.ceil(v + rad)))
        if x1 < x0 or y1 < y0:
            continue
        r2 = rad * rad
        for y in range(y0, y1 + 1):
            dy = y + 0.5 - v
            for x in range(x0, x1 + 1):
                dx = x + 0.5 - u
                q = dx * dx + dy * dy
                if q <= r2:
                    s = 1.0 - 0.35 * q / r2 if shaded else 1.0
                    p0 = cr * s + noise[y, x, 0]
                    p1 = cg * s + noise[y, x, 1]
                    p2 = cb * s + noise[y, x, 2]
                    img[y, x, 0] = np.uint8(min(max(p0, 0.0), 255.0))
                    img[y, x, 1] = np.uint8(min(max(p1, 0.0), 255.0))
                    img[y, x, 2] = np.uint8(min(max(p2, 0.0), 255.0))


# --------------------------------------------------------------------------
# chroma kernel

def _lab_tables():
    """Per-code-value contributions of each sRGB channel to white-scaled
    XYZ: nine 256-entry tables, exact by construction."""
    lin = np.empty(256)
    for i in range(256):
        x = i / 255.0
        lin[i] = x / 12.92 if x <= 0.04045 else ((x + 0.055) / 1.055) ** 2.4
    m = np.array([
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ])
    white = np.array([0.95047, 1.0, 1.08883])
    tables = np.empty((3, 3, 256))
    for row in range(3):
        for ch in range(3):
            tables[row, ch] = m[row, ch] * lin / white[row]
    return tables


_XYZ_LUT = _lab_tables()

_DELTA = 6.0 / 29.0
_DELTA3 = _DELTA ** 3
_KNEE_SLOPE = 1.0 / (3.0 * _DELTA ** 2)

# Direct table of the companding f(t) on [0, 1.15].  f is C1 (the linear
# knee is tangent to the cube root), so linear interpolation is smooth and
# accurate to ~1.4e-6, i.e. ~1e-3 in A/B -- three orders below the sensor
# noise.
_F_N = 8192
_F_MAX = 1.15
_ts = np.linspace(0.0, _F_MAX, _F_N + 1)
_F_LUT = np.where(_ts > _DELTA3, np.cbrt(_ts), _ts * _KNEE_SLOPE + 4.0 / 29.0)
del _ts


@njit(cache=True, fastmath=True, inline="always")
def _fcube(t, f_lut):
    ft = t * (_F_N / _F_MAX)
    i = int(ft)
    if i >= _F_N:
        i = _F_N - 1
    return f_lut[i] + (f_lut[i + 1] - f_lut[i]) * (ft - i)


@njit(cache=True, fastmath=True)
def lab_cell_sums_and_mask(img, xyz_lut, f_lut, cell_ab, mask,
                           mu_a, mu_b, i11, i12, i22, d2_max, want_mask):
    """Per-pixel chroma pass: accumulate (A, B) sums per 16x16 cell and,
    when ``want_mask``, test each pixel against the goal color family.

    Returns the goal-pixel count.  ``cell_ab`` must be zeroed by the
    caller; divide by 256 for cell means.
    """
    H, W = img.shape[0], img.shape[1]
    count = 0
    for y in range(H):
        cy = y // CELL_SIZE
        for x in range(W):
            r8 = img[y, x, 0]
            g8 = img[y, x, 1]
            b8 = img[y, x, 2]
            X = xyz_lut[0, 0, r8] + xyz_lut[0, 1, g8] + xyz_lut[0, 2, b8]
            Y = xyz_lut[1, 0, r8] + xyz_lut[1, 1, g8] + xyz_lut[1, 2, b8]
            Z = xyz_lut[2, 0, r8] + xyz_lut[2, 1, g8] + xyz_lut[2, 2, b8]
            fx = _fcube(X, f_lut)
            fy = _fcube(Y, f_lut)
            fz = _fcube(Z, f_lut)
            a = 500.0 * (fx - fy)
            b = 200.0 * (fy - fz)
            cx = x // CELL_SIZE
            cell_ab[cy, cx, 0] += a
            cell_ab[cy, cx, 1] += b
            if want_mask:
                da = a - mu_a
                db = b - mu_b
                d2 = da * (i11 * da + i12 * db) + db * (i12 * da + i22 * db)
                if d2 < d2_max:
                    mask[y, x] = 1
                    count += 1
                else:
                    mask[y, x] = 0
    return count


# --------------------------------------------------------------------------
# frame synthesis

def make_noise_pool(rng: np.random.Generator, n: int = 16) -> np.ndarray:
    """Pre-sampled Gaussian sensor-noise frames, cycled by the scheduler."""
    return np.rint(rng.normal(0.0, NOISE_SIGMA,
                              (n, FRAME_HEIGHT, FRAME_WIDTH, 3))).astype(np.int16)


def composite_background(bg_rgb, noise: np.ndarray) -> np.ndarray:
    """Background color plus one noise frame, clipped to 8 bits."""
    bg = np.asarray(bg_rgb, dtype=np.int16)
    return np.clip(bg[None, None, :] + noise, 0, 255).astype(np.uint8)


class BackgroundPool:
    """Pre-composited background+noise frames for both illumination modes."""

    def __init__(self, background, noise_pool: np.ndarray):
        self.noise = noise_pool
        self.normal = np.stack(
            [composite_background(background, n) for n in noise_pool])
        dimmed = tuple(c * IR_DIM_FACTOR for c in background)
        self.ir = np.stack(
            [composite_background(dimmed, n) for n in noise_pool])
        self.size = noise_pool.shape[0]


def build_stamps(scene: Scene, camera: CameraModel, R: np.ndarray,
                 r: np.ndarray, rng: np.random.Generator,
                 ir: bool = False) -> np.ndarray:
    """Project the scene into a far-to-near sorted stamp array.

    One brightness-jitter uniform is drawn per object in scene order, so a
    seeded generator reproduces the frame exactly.
    """
    stamps = []

    def push(u, v, rad, depth, rgb, shaded):
        stamps.append((u, v, rad, rgb[0], rgb[1], rgb[2],
                       1.0 if shaded else 0.0, depth))

    dim = IR_DIM_FACTOR if ir else 1.0
    for b in scene.balloons:
        jit = 1.0 + BRIGHTNESS_JITTER * (2.0 * rng.random() - 1.0)
        u, v, x = camera.project(b.center, R, r)
        u, v, x = float(u[0]), float(v[0]), float(x[0])
        if x <= max(camera.near, b.radius):
            continue
        rad = camera.f_px * b.radius / math.sqrt(x * x - b.radius * b.radius)
        if u + rad < 0 or u - rad > camera.width or v + rad < 0 or v - rad > camera.height:
            continue
        rgb = tuple(min(255.0, c * jit * dim) for c in b.rgb)
        push(u, v, rad, x, rgb, True)

    hoop_rows = []
    for h in scene.hoops:
        jit = 1.0 + BRIGHTNESS_JITTER * (2.0 * rng.random() - 1.0)
        pts = h.perimeter()
        u, v, x = camera.project(pts, R, r)
        ok = x > camera.near
        if not ok.any():
            continue
        rgb = IR_RING_COLOR if ir else tuple(min(255.0, c * jit) for c in h.rgb)
        u, v, x = u[ok], v[ok], x[ok]
        rad = np.maximum(1.0, camera.f_px * h.tube / x)
        vis = ((u + rad >= 0) & (u - rad <= camera.width)
               & (v + rad >= 0) & (v - rad <= camera.height))
        if not vis.any():
            continue
        rows = np.empty((int(vis.sum()), 8))
        rows[:, 0] = u[vis]
        rows[:, 1] = v[vis]
        rows[:, 2] = rad[vis]
        rows[:, 3:6] = rgb
        rows[:, 6] = 0.0
        rows[:, 7] = x[vis]
        hoop_rows.append(rows)

    if not stamps and not hoop_rows:
        return np.zeros((0, 7))
    arr = np.asarray(stamps, dtype=np.float64).reshape(-1, 8)
    if hoop_rows:
        arr = np.vstack([arr, *hoop_rows])
    return np.ascontiguousarray(arr[np.argsort(-arr[:, 7], kind="stable")][:, :7])


def render_scene(scene: Scene, camera: CameraModel, R: np.ndarray,
                 r: np.ndarray, noise: np.ndarray,
                 rng: np.random.Generator, ir: bool = False) -> Frame:
    """Rasterize the scene from a pose into a noisy 8-bit frame."""
    bg = scene.background
    if ir:
        bg = tuple(c * IR_DIM_FACTOR for c in bg)
    img = composite_background(bg, noise)
    stamps = build_stamps(scene, camera, R, r, rng, ir)
    _stamp_with_noise(img, stamps, np.ascontiguousarray(noise))
    return Frame(img, ir=ir)


def render_scene_pooled(scene: Scene, camera: CameraModel, R: np.ndarray,
                        r: np.ndarray, pool: BackgroundPool, idx: int,
                        rng: np.random.Generator, ir: bool = False) -> Frame:
    """Pool-backed render: copy a pre-noised background, stamp objects."""
    base = pool.ir if ir else pool.normal
    i = idx % pool.size
    img = base[i].copy()
    stamps = build_stamps(scene, camera, R, r, rng, ir)
    if stamps.shape[0]:
        _stamp_with_noise(img, stamps, pool.noise[i])
    return Frame(img, ir=ir)


_NULL_MASK = np.zeros((FRAME_HEIGHT, FRAME_WIDTH), dtype=np.uint8)


def fast_cell_means(frame: Frame, goal_family: ColorFamily | None = None,
                    goal_d_thresh: float = 3.5):
    """Fused chroma pass over a frame.

    Returns (cell_means (15,20,2), goal_mask or None, goal_pixel_count).
    """
    cell_ab = np.zeros((GRID_ROWS, GRID_COLS, 2))
    if goal_family is None:
        lab_cell_sums_and_mask(
            frame.pixels, _XYZ_LUT, _F_LUT, cell_ab, _NULL_MASK,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, False)
        return cell_ab / (CELL_SIZE * CELL_SIZE), None, 0
    mask = np.empty((FRAME_HEIGHT, FRAME_WIDTH), dtype=np.uint8)
    si = goal_family.sigma_inv
    n = lab_cell_sums_and_mask(
        frame.pixels, _XYZ_LUT, _F_LUT, cell_ab, mask,
        float(goal_family.mu[0]), float(goal_family.mu[1]),
        float(si[0, 0]), float(si[0, 1]), float(si[1, 1]),
        float(goal_d_thresh * goal_d_thresh), True)
    return cell_ab / (CELL_SIZE * CELL_SIZE), mask.astype(bool), int(n)
