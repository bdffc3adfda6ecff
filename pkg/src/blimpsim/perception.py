"""Camera perception: color-family balloon detection and shape-gated goals.

Balloon path: the 320x240 frame is segmented into a 20x15 grid of 16x16
pixel cells.  Each cell's mean chroma (CIELAB A/B, luminance discarded) is
compared to a trained 2-D Gaussian color family via the Mahalanobis
distance; cells under the threshold are "activated".  A per-cell log-odds
filter accumulates activations over frames (recursive, no history buffer),
and the largest 4-connected cluster of believed cells yields the detection
center c_b and size n_b.

Goal path: a binary mask (either pixels matching the goal color family, or
the thresholded IR-on/IR-off frame difference) is reduced to its largest
blob; the blob's approximated contour polygon classifies the hoop shape by
corner count (3 = triangle, 4 = rectangle, >= 8 = circle) and anything else
is rejected as a false positive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import cv2
import numpy as np
from scipy import ndimage

FRAME_WIDTH = 320
FRAME_HEIGHT = 240
CELL_SIZE = 16
GRID_COLS = FRAME_WIDTH // CELL_SIZE   # 20
GRID_ROWS = FRAME_HEIGHT // CELL_SIZE  # 15


@dataclass
class PerceptionConfig:
    """Pipeline thresholds, all reachable over the parameter protocol."""

    d_thresh: float = 3.5        # balloon cell activation, Mahalanobis units
    p_hit: float = 0.8
    p_miss: float = 0.3
    clamp: float = 6.0
    p_act: float = 0.7
    goal_mode: str = "color"     # "color" | "ir"
    goal_d_thresh: float = 3.5   # goal pixel match, Mahalanobis units
    luminance_thresh: float = 60.0
    min_blob: int = 60


class InsufficientSamples(ValueError):
    """Too few labeled cells to train a color family."""


class SingularCovariance(ArithmeticError):
    """Family covariance not invertible despite regularization."""


class DimensionMismatch(ValueError):
    """Frames of different geometry cannot be differenced."""


# --------------------------------------------------------------------------
# color space

# sRGB -> XYZ (D65), and the CIELAB companding constants
_M_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0
_DELTA3 = _DELTA ** 3


def rgb_to_lab(rgb) -> np.ndarray:
    """sRGB (8-bit) to CIELAB under D65.  Accepts any (..., 3) array."""
    x = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _M_RGB2XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _DELTA3, np.cbrt(t), t / (3.0 * _DELTA ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


# --------------------------------------------------------------------------
# frames and color families

@dataclass
class Frame:
    """One camera frame: 320x240 RGB, with an IR-illumination tag."""

    pixels: np.ndarray
    ir: bool = False

    def __post_init__(self):
        if self.pixels.shape != (FRAME_HEIGHT, FRAME_WIDTH, 3):
            raise DimensionMismatch(
                f"expected {FRAME_HEIGHT}x{FRAME_WIDTH}x3, got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise DimensionMismatch("frame pixels must be 8-bit")

    @property
    def width(self) -> int:
        return FRAME_WIDTH

    @property
    def height(self) -> int:
        return FRAME_HEIGHT


@dataclass
class ColorFamily:
    """2-D Gaussian over (A, B) chroma representing one target color."""

    mu: np.ndarray
    sigma: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).reshape(2)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)
        try:
            self.sigma_inv = np.linalg.inv(self.sigma)
        except np.linalg.LinAlgError as e:
            raise SingularCovariance(str(e)) from e

    def to_json(self) -> dict:
        return {"name": self.name, "mu": self.mu.tolist(),
                "sigma": self.sigma.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "ColorFamily":
        return cls(mu=np.array(doc["mu"]), sigma=np.array(doc["sigma"]),
                   name=doc.get("name", ""))


def train_color_family(samples, name: str = "", eps: float = 1e-3) -> ColorFamily:
    """Fit a color family to labeled cell means in (A, B).

    The mean is the sample mean; the covariance is the population
    covariance (divide by n) plus eps*I regularization.  Requires at least
    8 samples.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 8:
        raise InsufficientSamples(f"need >= 8 samples, got {pts.shape[0]}")
    mu = pts.mean(axis=0)
    centered = pts - mu
    sigma = (centered.T @ centered) / pts.shape[0] + eps * np.eye(2)
    return ColorFamily(mu=mu, sigma=sigma, name=name)


def mahalanobis(mu_c, family: ColorFamily) -> float:
    """Covariance-normalized distance of a chroma sample from the family."""
    d = np.asarray(mu_c, dtype=float) - family.mu
    q = float(d @ family.sigma_inv @ d)
    if not math.isfinite(q) or q < 0:
        raise SingularCovariance("non-positive quadratic form")
    return math.sqrt(q)


def cell_means(frame: Frame) -> np.ndarray:
    """Per-cell mean chroma: (rows, cols, 2) array of (A, B) means."""
    ab = rgb_to_lab(frame.pixels)[..., 1:]
    blocks = ab.reshape(GRID_ROWS, CELL_SIZE, GRID_COLS, CELL_SIZE, 2)
    return blocks.mean(axis=(1, 3))


def activate_cells(frame: Frame, family: ColorFamily, d_thresh: float,
                   means: np.ndarray | None = None) -> np.ndarray:
    """Boolean (rows, cols) grid of cells whose mean chroma lies within
    ``d_thresh`` Mahalanobis units of the family."""
    if means is None:
        means = cell_means(frame)
    d = means - family.mu
    d2 = np.einsum("rci,ij,rcj->rc", d, family.sigma_inv, d)
    return d2 < d_thresh * d_thresh


# --------------------------------------------------------------------------
# log-odds filtering and cluster extraction

@dataclass
class LogOddsGrid:
    """Per-cell log-odds belief that the target color occupies the cell.

    Updated recursively: l += l_hit on activation, l_miss otherwise, then
    clamped to [l_min, l_max].  ``p_act`` is the belief threshold above
    which a cell counts toward cluster extraction.
    """

    l: np.ndarray = field(
        default_factory=lambda: np.zeros((GRID_ROWS, GRID_COLS)))
    l_hit: float = math.log(0.8 / 0.2)
    l_miss: float = math.log(0.3 / 0.7)
    l_min: float = -6.0
    l_max: float = 6.0
    p_act: float = 0.7

    @classmethod
    def from_probs(cls, p_hit: float = 0.8, p_miss: float = 0.3,
                   clamp: float = 6.0, p_act: float = 0.7,
                   shape=(GRID_ROWS, GRID_COLS)) -> "LogOddsGrid":
        return cls(
            l=np.zeros(shape),
            l_hit=math.log(p_hit / (1.0 - p_hit)),
            l_miss=math.log(p_miss / (1.0 - p_miss)),
            l_min=-clamp,
            l_max=clamp,
            p_act=p_act,
        )

    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.l))

    def reset(self):
        self.l[:] = 0.0


def logodds_update(grid: LogOddsGrid, activations: np.ndarray) -> LogOddsGrid:
    """One recursive belief update from a boolean activation grid."""
    if activations.shape != grid.l.shape:
        raise DimensionMismatch(
            f"activation grid {activations.shape} vs belief {grid.l.shape}")
    l = grid.l + np.where(activations, grid.l_hit, grid.l_miss)
    np.clip(l, grid.l_min, grid.l_max, out=l)
    return replace(grid, l=l)


@dataclass(frozen=True)
class Detection:
    """Largest believed cluster: pixel center, cell count, validity."""

    c_b: tuple[float, float] = (0.0, 0.0)
    n_b: int = 0
    valid: bool = False


_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


def largest_cluster(grid: LogOddsGrid) -> Detection:
    """Center and size of the largest 4-connected cluster of cells whose
    belief exceeds ``p_act``; ties go to the cluster whose top-left cell is
    lexicographically smallest in (row, col)."""
    active = grid.probabilities() > grid.p_act
    if not active.any():
        return Detection()
    labels, n = ndimage.label(active, structure=_FOUR_CONN)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    best_size = sizes.max()
    candidates = np.flatnonzero(sizes == best_size)
    best = None
    best_key = None
    for lab in candidates:
        cells = np.argwhere(labels == lab)  # row-major, so cells[0] is top-left
        key = tuple(cells[0])
        if best_key is None or key < best_key:
            best_key = key
            best = cells
    centers_u = best[:, 1] * CELL_SIZE + CELL_SIZE / 2.0
    centers_v = best[:, 0] * CELL_SIZE + CELL_SIZE / 2.0
    return Detection(
        c_b=(float(centers_u.mean()), float(centers_v.mean())),
        n_b=int(best_size),
        valid=True,
    )


# --------------------------------------------------------------------------
# goal detection

class GoalShape(enum.Enum):
    TRIANGLE = "triangle"
    RECTANGLE = "rectangle"
    CIRCLE = "circle"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class GoalDetection:
    """Largest shape-classified blob: bbox center, pixel size, shape."""

    c_g: tuple[float, float] = (0.0, 0.0)
    n_g: int = 0
    shape: GoalShape = GoalShape.UNKNOWN
    valid: bool = False


def diff_frames(f1: Frame, f2: Frame) -> np.ndarray:
    """Pixel-wise Euclidean norm of the RGB difference, scaled to 8 bits.

    Used on an IR-on/IR-off pair to isolate retroreflective surfaces; the
    result is symmetric in its arguments.
    """
    if f1.pixels.shape != f2.pixels.shape:
        raise DimensionMismatch("frame geometry differs")
    d = f1.pixels.astype(np.int16) - f2.pixels.astype(np.int16)
    norm = np.sqrt(np.sum(d.astype(np.float64) ** 2, axis=-1)) / math.sqrt(3.0)
    return np.rint(norm).astype(np.uint8)


def color_blob_mask(frame: Frame, family: ColorFamily, d_thresh: float) -> np.ndarray:
    """Per-pixel chroma match against a family: the color-blob goal path."""
    ab = rgb_to_lab(frame.pixels)[..., 1:]
    d = ab - family.mu
    d2 = np.einsum("hwi,ij,hwj->hw", d, family.sigma_inv, d)
    return d2 < d_thresh * d_thresh


# polygon-approximation tolerance as a fraction of the contour perimeter
_APPROX_TOL = 0.02
_CIRCLE_MIN_VERTICES = 8


def classify_corner_count(vertices: int) -> GoalShape:
    if vertices == 3:
        return GoalShape.TRIANGLE
    if vertices == 4:
        return GoalShape.RECTANGLE
    if vertices >= _CIRCLE_MIN_VERTICES:
        return GoalShape.CIRCLE
    return GoalShape.UNKNOWN


def detect_goal(source, luminance_thresh: float | None = None,
                min_blob: int = 50) -> GoalDetection:
    """Reduce a mask (or a grayscale image plus threshold) to the closest
    plausible goal hoop.

    Pipeline: threshold -> largest 8-connected blob of at least
    ``min_blob`` pixels -> external contour -> polygon approximation at 2%
    of the perimeter -> corner-count classification.  Blobs that classify
    as UNKNOWN are rejected.
    """
    src = np.asarray(source)
    if src.dtype == bool:
        mask = src.astype(np.uint8)
    else:
        if luminance_thresh is None:
            raise ValueError("grayscale source needs a luminance threshold")
        mask = (src > luminance_thresh).astype(np.uint8)

    n, labels, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
    if n <= 1:
        return GoalDetection()
    areas = stats[1:, cv2.CC_STAT_AREA]
    best = int(np.argmax(areas)) + 1
    if stats[best, cv2.CC_STAT_AREA] < min_blob:
        return GoalDetection()

    blob = (labels == best).astype(np.uint8)
    contours, _ = cv2.findContours(blob, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        return GoalDetection()
    cnt = max(contours, key=cv2.contourArea)
    peri = cv2.arcLength(cnt, True)
    approx = cv2.approxPolyDP(cnt, _APPROX_TOL * peri, True)
    shape = classify_corner_count(len(approx))

    x, y, w, h = (stats[best, cv2.CC_STAT_LEFT], stats[best, cv2.CC_STAT_TOP],
                  stats[best, cv2.CC_STAT_WIDTH], stats[best, cv2.CC_STAT_HEIGHT])
    c_g = (float(x) + w / 2.0, float(y) + h / 2.0)
    n_g = int(stats[best, cv2.CC_STAT_AREA])
    if shape is GoalShape.UNKNOWN:
        return GoalDetection(c_g=c_g, n_g=n_g, shape=shape, valid=False)
    return GoalDetection(c_g=c_g, n_g=n_g, shape=shape, valid=True)
