import math

import numpy as np
import pytest

from blimpsim.perception import (
    CELL_SIZE,
    GRID_COLS,
    GRID_ROWS,
    ColorFamily,
    Detection,
    DimensionMismatch,
    Frame,
    GoalShape,
    InsufficientSamples,
    LogOddsGrid,
    activate_cells,
    cell_means,
    classify_corner_count,
    color_blob_mask,
    detect_goal,
    diff_frames,
    largest_cluster,
    logodds_update,
    mahalanobis,
    rgb_to_lab,
    train_color_family,
)


def solid_frame(rgb, ir=False):
    px = np.empty((240, 320, 3), dtype=np.uint8)
    px[:] = rgb
    return Frame(px, ir=ir)


class TestRgbToLab:
    def test_black(self):
        L, a, b = rgb_to_lab((0, 0, 0))
        assert L == pytest.approx(0.0, abs=1e-9)
        assert a == pytest.approx(0.0, abs=1e-9)
        assert b == pytest.approx(0.0, abs=1e-9)

    def test_white_point(self):
        L, a, b = rgb_to_lab((255, 255, 255))
        assert L == pytest.approx(100.0, abs=1e-4)
        assert a == pytest.approx(0.0, abs=1e-4)
        assert b == pytest.approx(0.0, abs=1e-4)

    def test_pure_red_reference(self):
        # published sRGB->XYZ->LAB evaluation of saturated red
        L, a, b = rgb_to_lab((255, 0, 0))
        assert L == pytest.approx(53.24, abs=0.05)
        assert a == pytest.approx(80.09, abs=0.05)
        assert b == pytest.approx(67.20, abs=0.05)

    def test_against_skimage_oracle(self):
        skcolor = pytest.importorskip("skimage.color")
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        ours = rgb_to_lab(img)
        ref = skcolor.rgb2lab(img.astype(np.float64) / 255.0)
        np.testing.assert_allclose(ours, ref, atol=2e-2)


class TestColorFamily:
    def test_identical_samples_epsilon_covariance(self):
        fam = train_color_family([(12.0, -7.5)] * 10)
        np.testing.assert_allclose(fam.mu, [12.0, -7.5])
        np.testing.assert_allclose(fam.sigma, 1e-3 * np.eye(2), atol=1e-15)

    def test_population_covariance_by_hand(self):
        # the four cardinal points, duplicated to reach the sample floor:
        # population covariance is 0.5 I regardless of duplication
        pts = [(1, 0), (-1, 0), (0, 1), (0, -1)] * 2
        fam = train_color_family(pts)
        np.testing.assert_allclose(fam.mu, [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(fam.sigma, (0.5 + 1e-3) * np.eye(2), atol=1e-12)

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            train_color_family([(1, 0), (-1, 0), (0, 1), (0, -1)])

    def test_disjoint_clusters_separated(self):
        rng = np.random.default_rng(1)
        a = rng.normal((10.0, 0.0), 0.5, (50, 2))
        b = rng.normal((60.0, 30.0), 0.5, (50, 2))  # ~10 sigma away
        fa, fb = train_color_family(a), train_color_family(b)
        ra = 3 * math.sqrt(np.linalg.eigvalsh(fa.sigma).max())
        rb = 3 * math.sqrt(np.linalg.eigvalsh(fb.sigma).max())
        assert np.linalg.norm(fa.mu - fb.mu) > ra + rb

    def test_json_roundtrip(self):
        fam = train_color_family([(5, 2), (6, 1), (4, 3), (5, 1),
                                  (6, 3), (4, 2), (5, 3), (6, 2)], name="red")
        fam2 = ColorFamily.from_json(fam.to_json())
        np.testing.assert_allclose(fam2.mu, fam.mu)
        np.testing.assert_allclose(fam2.sigma, fam.sigma)
        assert fam2.name == "red"


class TestMahalanobis:
    def test_zero_at_mean(self):
        fam = ColorFamily(mu=(3, 4), sigma=np.eye(2))
        assert mahalanobis((3, 4), fam) == 0.0

    def test_diagonal_scaling(self):
        fam = ColorFamily(mu=(0, 0), sigma=np.diag([4.0, 1.0]))
        assert mahalanobis((4, 0), fam) == pytest.approx(2.0, abs=1e-12)

    def test_euclidean_special_case(self):
        fam = ColorFamily(mu=(0, 0), sigma=np.eye(2))
        assert mahalanobis((3, 4), fam) == pytest.approx(5.0, abs=1e-12)


class TestActivateCells:
    def test_uniform_background_far(self):
        fam = train_color_family([(80.0, 67.0)] * 8, name="red")
        frame = solid_frame((100, 110, 100))
        assert not activate_cells(frame, fam, 3.0).any()

    def test_zero_threshold_rejects_all(self):
        px = np.zeros((240, 320, 3), dtype=np.uint8)
        px[:] = (200, 40, 45)
        frame = Frame(px)
        ab = rgb_to_lab(np.array([200, 40, 45]))[1:]
        fam = train_color_family([tuple(ab)] * 8)
        assert not activate_cells(frame, fam, 0.0).any()

    def test_disk_activates_covered_cells(self):
        # paint a disk of the family color on a far-away background and
        # check every geometrically fully-covered cell activates
        balloon = np.array([200, 40, 45], dtype=np.uint8)
        bg = np.array([100, 110, 100], dtype=np.uint8)
        for radius in (32, 40):
            px = np.empty((240, 320, 3), dtype=np.uint8)
            px[:] = bg
            cy, cx = 120, 168
            yy, xx = np.mgrid[0:240, 0:320]
            inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
            px[inside] = balloon
            frame = Frame(px)
            ab = tuple(rgb_to_lab(balloon)[1:])
            fam = train_color_family([ab] * 8)
            act = activate_cells(frame, fam, 3.0)
            full = np.zeros((GRID_ROWS, GRID_COLS), dtype=bool)
            for r in range(GRID_ROWS):
                for c in range(GRID_COLS):
                    corners = [(c * 16 + dx, r * 16 + dy)
                               for dx in (0, 16) for dy in (0, 16)]
                    full[r, c] = all(
                        (x - cx) ** 2 + (y - cy) ** 2 <= radius ** 2
                        for x, y in corners)
            assert full.sum() >= (9 if radius == 40 else 4)
            assert act[full].all()


class TestLogOdds:
    def test_single_hit_matches_bayes(self):
        grid = LogOddsGrid.from_probs(p_hit=0.8, p_miss=0.3, shape=(1, 1))
        grid = logodds_update(grid, np.array([[True]]))
        assert grid.l[0, 0] == pytest.approx(math.log(4.0), abs=1e-12)
        assert grid.probabilities()[0, 0] == pytest.approx(0.8, abs=1e-12)

    def test_two_hits(self):
        grid = LogOddsGrid.from_probs(shape=(1, 1))
        for _ in range(2):
            grid = logodds_update(grid, np.array([[True]]))
        assert grid.probabilities()[0, 0] == pytest.approx(16.0 / 17.0, abs=1e-12)

    def test_clamp_under_many_hits(self):
        grid = LogOddsGrid.from_probs(shape=(1, 1))
        act = np.array([[True]])
        for _ in range(1_000_000):
            grid = logodds_update(grid, act)
        assert grid.l[0, 0] == grid.l_max

    def test_matches_probability_domain_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            grid = LogOddsGrid.from_probs(p_hit=0.8, p_miss=0.3,
                                          clamp=1e9, shape=(1, 1))
            odds = 1.0
            for _ in range(rng.integers(5, 60)):
                hit = bool(rng.random() < 0.5)
                odds *= (0.8 / 0.2) if hit else (0.3 / 0.7)
                grid = logodds_update(grid, np.array([[hit]]))
                p_ref = odds / (1.0 + odds)
                assert grid.probabilities()[0, 0] == pytest.approx(p_ref, abs=1e-12)

    def test_convergence_statistics(self):
        # stationary target seen with probability 0.8 must be believed
        # within 20 frames; a 0.2 flicker must not be
        rng = np.random.default_rng(99)
        reached = 0
        stayed_low = 0
        trials = 500
        for _ in range(trials):
            g_hi = LogOddsGrid.from_probs(shape=(1, 1))
            g_lo = LogOddsGrid.from_probs(shape=(1, 1))
            hi_ok = False
            for _ in range(20):
                g_hi = logodds_update(g_hi, np.array([[rng.random() < 0.8]]))
                g_lo = logodds_update(g_lo, np.array([[rng.random() < 0.2]]))
                if g_hi.probabilities()[0, 0] > 0.99:
                    hi_ok = True
            reached += hi_ok
            stayed_low += g_lo.probabilities()[0, 0] < 0.5
        assert reached / trials >= 0.95
        assert stayed_low / trials >= 0.95

    def test_shape_mismatch(self):
        grid = LogOddsGrid()
        with pytest.raises(DimensionMismatch):
            logodds_update(grid, np.ones((3, 3), dtype=bool))


class TestLargestCluster:
    def grid_with(self, cells, p_act=0.7):
        g = LogOddsGrid.from_probs(p_act=p_act)
        for r, c in cells:
            g.l[r, c] = 6.0
        return g

    def test_empty_invalid(self):
        det = largest_cluster(LogOddsGrid())
        assert not det.valid
        assert det.n_b == 0

    def test_l_shape_centroid(self):
        det = largest_cluster(self.grid_with([(0, 0), (0, 1), (1, 0)]))
        assert det.valid
        assert det.n_b == 3
        assert det.c_b[0] == pytest.approx(40.0 / 3.0, abs=1e-12)
        assert det.c_b[1] == pytest.approx(40.0 / 3.0, abs=1e-12)

    def test_diagonal_not_connected(self):
        det = largest_cluster(self.grid_with([(2, 2), (3, 3), (4, 4)]))
        assert det.n_b == 1  # 4-connectivity splits a diagonal chain

    def test_tie_breaks_to_topleft(self):
        det = largest_cluster(self.grid_with(
            [(5, 5), (5, 6), (2, 10), (2, 11)]))
        assert det.n_b == 2
        assert det.c_b[1] == pytest.approx(2 * 16 + 8.0)  # row-2 component wins

    def test_determinism(self):
        g = self.grid_with([(1, 1), (1, 2), (7, 9)])
        d1 = largest_cluster(g)
        d2 = largest_cluster(g)
        assert d1 == d2


class TestDiffFrames:
    def test_identical_frames_zero(self):
        f = solid_frame((120, 80, 200))
        assert diff_frames(f, f).max() == 0

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = Frame(rng.integers(0, 256, (240, 320, 3), dtype=np.uint8), ir=True)
        b = Frame(rng.integers(0, 256, (240, 320, 3), dtype=np.uint8))
        np.testing.assert_array_equal(diff_frames(a, b), diff_frames(b, a))

    def test_full_scale(self):
        a = solid_frame((255, 255, 255))
        b = solid_frame((0, 0, 0))
        assert diff_frames(a, b).min() == 255

    def test_isolates_changed_pixels(self):
        base = solid_frame((50, 50, 50))
        lit = solid_frame((50, 50, 50), ir=True)
        lit.pixels[100:110, 200:220] = (250, 250, 250)
        d = diff_frames(lit, base)
        assert (d > 0).sum() == 10 * 20
        assert d[105, 210] == pytest.approx(200, abs=1)


def rasterize_polygon(points, size=(240, 320)):
    import cv2
    mask = np.zeros(size, dtype=np.uint8)
    cv2.fillPoly(mask, [np.asarray(points, dtype=np.int32)], 1)
    return mask.astype(bool)


class TestDetectGoal:
    def test_square_classified_rectangle(self):
        mask = np.zeros((240, 320), dtype=bool)
        mask[90:150, 130:190] = True  # 60x60 solid square
        det = detect_goal(mask)
        assert det.valid
        assert det.shape is GoalShape.RECTANGLE
        assert det.n_g == 3600
        assert det.c_g[0] == pytest.approx(160.0, abs=1.0)
        assert det.c_g[1] == pytest.approx(120.0, abs=1.0)

    def test_disk_classified_circle(self):
        yy, xx = np.mgrid[0:240, 0:320]
        mask = (xx - 160) ** 2 + (yy - 120) ** 2 <= 30 ** 2
        det = detect_goal(mask)
        assert det.valid
        assert det.shape is GoalShape.CIRCLE

    def test_triangle(self):
        mask = rasterize_polygon([(160, 60), (90, 180), (230, 180)])
        det = detect_goal(mask)
        assert det.valid
        assert det.shape is GoalShape.TRIANGLE

    def test_speckle_rejected_by_min_size(self):
        rng = np.random.default_rng(5)
        mask = np.zeros((240, 320), dtype=bool)
        pts = rng.integers(0, (240, 320), (60, 2))
        mask[pts[:, 0], pts[:, 1]] = True
        det = detect_goal(mask, min_blob=50)
        assert not det.valid

    def test_pentagon_rejected_unknown(self):
        # 5..7 vertices fall outside the corner-count table
        pts = [(160 + 70 * math.cos(a), 120 + 70 * math.sin(a))
               for a in np.linspace(-math.pi / 2, 1.5 * math.pi, 5, endpoint=False)]
        det = detect_goal(rasterize_polygon(pts))
        assert not det.valid
        assert det.shape is GoalShape.UNKNOWN

    def test_grayscale_threshold_path(self):
        gray = np.zeros((240, 320), dtype=np.uint8)
        gray[80:160, 120:200] = 200
        det = detect_goal(gray, luminance_thresh=60)
        assert det.valid and det.shape is GoalShape.RECTANGLE
        with pytest.raises(ValueError):
            detect_goal(gray)

    def test_corner_count_table(self):
        assert classify_corner_count(3) is GoalShape.TRIANGLE
        assert classify_corner_count(4) is GoalShape.RECTANGLE
        assert classify_corner_count(8) is GoalShape.CIRCLE
        assert classify_corner_count(12) is GoalShape.CIRCLE
        for v in (1, 2, 5, 6, 7):
            assert classify_corner_count(v) is GoalShape.UNKNOWN


def random_shape_mask(rng):
    """One randomized triangle/rectangle/disk with 1% salt-and-pepper noise."""
    import cv2
    kind = rng.integers(0, 3)
    mask = np.zeros((240, 320), dtype=np.uint8)
    cx, cy = rng.uniform(110, 210), rng.uniform(80, 160)
    ang = rng.uniform(0, 2 * math.pi)
    if kind == 0:  # triangle
        s = rng.uniform(50, 90)
        pts = []
        for k in range(3):
            a = ang + k * 2 * math.pi / 3
            pts.append((cx + s * math.cos(a), cy + s * math.sin(a)))
        cv2.fillPoly(mask, [np.asarray(pts, dtype=np.int32)], 1)
        label = GoalShape.TRIANGLE
    elif kind == 1:  # rectangle
        w, h = rng.uniform(40, 100), rng.uniform(40, 100)
        box = cv2.boxPoints(((cx, cy), (w, h), math.degrees(ang)))
        cv2.fillPoly(mask, [box.astype(np.int32)], 1)
        label = GoalShape.RECTANGLE
    else:  # circle
        r = rng.uniform(22, 55)
        cv2.circle(mask, (int(cx), int(cy)), int(r), 1, -1)
        label = GoalShape.CIRCLE
    noise = rng.random((240, 320)) < 0.01
    mask = np.where(noise, 1 - mask, mask)
    return mask.astype(bool), label


class TestShapeClassifierAccuracy:
    def test_randomized_shapes_quick(self):
        rng = np.random.default_rng(2024)
        ok = 0
        n = 90
        for _ in range(n):
            mask, label = random_shape_mask(rng)
            det = detect_goal(mask, min_blob=120)
            ok += det.valid and det.shape is label
        assert ok / n >= 0.95


class TestColorBlobMask:
    def test_matches_only_family_pixels(self):
        bg = np.array([100, 110, 100], dtype=np.uint8)
        yellow = np.array([230, 220, 90], dtype=np.uint8)
        px = np.empty((240, 320, 3), dtype=np.uint8)
        px[:] = bg
        px[50:100, 50:150] = yellow
        fam = train_color_family([tuple(rgb_to_lab(yellow)[1:])] * 8)
        mask = color_blob_mask(Frame(px), fam, 3.0)
        assert mask[50:100, 50:150].all()
        assert not mask[150:, :].any()
