import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrhands.errors import DataError
from lrhands.geometry import (EllipseFeatures, extract_contours,
                              extract_features, filter_contours, fit_ellipse)

from conftest import random_blob_mask


def flood_fill_components(mask):
    """Brute-force 8-connected labeling oracle; returns component pixel sets."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    components = []
    for r0 in range(mask.shape[0]):
        for c0 in range(mask.shape[1]):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            queue = deque([(r0, c0)])
            seen[r0, c0] = True
            pixels = []
            while queue:
                r, c = queue.popleft()
                pixels.append((r, c))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if (0 <= rr < mask.shape[0] and 0 <= cc < mask.shape[1]
                                and mask[rr, cc] and not seen[rr, cc]):
                            seen[rr, cc] = True
                            queue.append((rr, cc))
            components.append(pixels)
    return components


def sample_ellipse_points(center, axes, angle, n=120, noise=0.0, rng=None):
    """Points on a rotated ellipse in the bottom-border angle convention."""
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    e1 = np.array([math.cos(angle), -math.sin(angle)])
    e2 = np.array([math.sin(angle), math.cos(angle)])
    pts = (np.asarray(center)
           + axes[0] * np.cos(t)[:, None] * e1
           + axes[1] * np.sin(t)[:, None] * e2)
    if noise:
        pts = pts + rng.normal(0.0, noise, pts.shape)
    return pts


class TestExtractContours:
    def test_single_square(self):
        mask = np.zeros((20, 20), dtype=bool)
        mask[5:15, 5:15] = True
        contours = extract_contours(mask)
        assert len(contours) == 1
        assert contours[0].area == 100
        assert np.array_equal(contours[0].mask, mask)

    def test_two_disjoint_squares(self):
        mask = np.zeros((20, 30), dtype=bool)
        mask[2:6, 2:6] = True
        mask[10:18, 20:28] = True
        contours = extract_contours(mask)
        assert len(contours) == 2
        assert sorted(c.area for c in contours) == [16, 64]

    def test_matches_flood_fill_oracle(self, rng):
        for _ in range(10):
            mask = random_blob_mask(rng)
            oracle = flood_fill_components(mask)
            contours = extract_contours(mask)
            assert len(contours) == len(oracle)
            # areas count filled regions; discs carry no holes, so they match
            assert sorted(c.area for c in contours) == sorted(len(p) for p in oracle)

    def test_hole_is_filled_in_region(self):
        mask = np.zeros((20, 20), dtype=bool)
        mask[4:16, 4:16] = True
        mask[8:12, 8:12] = False  # hole
        contours = extract_contours(mask)
        assert len(contours) == 1
        assert contours[0].area == 144  # hole included in the filled region
        assert contours[0].mask[10, 10]

    def test_empty_mask(self):
        assert extract_contours(np.zeros((5, 5), dtype=bool)) == []

    def test_single_pixel(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 3] = True
        contours = extract_contours(mask)
        assert len(contours) == 1
        assert contours[0].area == 1
        assert contours[0].boundary.tolist() == [[3.0, 2.0]]

    def test_boundary_pixels_lie_on_component_edge(self, rng):
        mask = random_blob_mask(rng, n_blobs=1)
        for contour in extract_contours(mask):
            for x, y in contour.boundary.astype(int):
                assert mask[y, x]
                neighborhood = mask[max(0, y - 1): y + 2, max(0, x - 1): x + 2]
                touches_background = (~neighborhood).any() or y in (0, mask.shape[0] - 1) \
                    or x in (0, mask.shape[1] - 1)
                assert touches_background


class TestFilterContours:
    def _contour_at(self, frame_shape, r0, c0, size):
        mask = np.zeros(frame_shape, dtype=bool)
        mask[r0: r0 + size, c0: c0 + size] = True
        return extract_contours(mask)[0]

    def test_keeps_largest_three(self):
        shape = (100, 100)
        sizes = [30, 26, 22, 18, 14]
        contours = [self._contour_at(shape, 100 - s - 1, 10 + 13 * i, s)
                    for i, s in enumerate(sizes)]
        kept = filter_contours(contours, (100, 100), min_area_factor=0.1)
        assert [c.area for c in kept] == [900, 676, 484]

    def test_small_contour_removed(self):
        contour = self._contour_at((100, 100), 95, 40, 4)
        assert filter_contours([contour], (100, 100), min_area_factor=0.1) == []

    def test_top_border_contour_removed(self):
        contour = self._contour_at((100, 100), 0, 40, 20)
        assert filter_contours([contour], (100, 100)) == []

    @pytest.mark.parametrize("r0,c0", [(80, 0), (80, 80), (80, 40)])
    def test_left_right_bottom_borders_kept(self, r0, c0):
        contour = self._contour_at((100, 100), r0, c0, 20)
        assert len(filter_contours([contour], (100, 100))) == 1

    def test_output_sorted_and_capped(self, rng):
        shape = (60, 120)
        contours = []
        for i in range(5):
            contours.append(self._contour_at(shape, 59 - 14, 2 + 22 * i, 14))
        kept = filter_contours(contours, (120, 60), min_area_factor=0.05)
        assert len(kept) == 3
        areas = [c.area for c in kept]
        assert areas == sorted(areas, reverse=True)


class TestFitEllipse:
    def test_axis_aligned_two_to_one(self):
        pts = sample_ellipse_points((50, 40), (20, 10), 0.0)
        fit = fit_ellipse(pts)
        assert fit.orientation == pytest.approx(0.0, abs=0.01)
        assert fit.semi_axes[0] / fit.semi_axes[1] == pytest.approx(2.0, rel=0.02)

    def test_rotated_quarter_pi(self):
        pts = sample_ellipse_points((50, 40), (20, 10), math.pi / 4)
        fit = fit_ellipse(pts)
        assert fit.orientation == pytest.approx(math.pi / 4, abs=0.01)

    def test_noisy_recovery_within_five_percent(self, rng):
        axes = (30.0, 14.0)
        pts = sample_ellipse_points((80, 60), axes, 1.1, noise=0.01 * axes[0], rng=rng)
        fit = fit_ellipse(pts)
        assert fit.center[0] == pytest.approx(80, abs=0.05 * axes[0])
        assert fit.center[1] == pytest.approx(60, abs=0.05 * axes[0])
        assert fit.semi_axes[0] == pytest.approx(axes[0], rel=0.05)
        assert fit.semi_axes[1] == pytest.approx(axes[1], rel=0.05)
        assert fit.orientation == pytest.approx(1.1, abs=0.05)

    def test_orientation_grid_round_trip(self):
        for angle in np.linspace(0.0, math.pi, 13, endpoint=False):
            pts = sample_ellipse_points((100, 100), (40, 18), angle, n=90)
            fit = fit_ellipse(pts)
            err = abs(fit.orientation - angle)
            assert min(err, math.pi - err) < 0.02

    def test_cyclic_rotation_invariance(self):
        pts = sample_ellipse_points((30, 30), (12, 7), 0.6, n=60)
        base = fit_ellipse(pts)
        rolled = fit_ellipse(np.roll(pts, 17, axis=0))
        assert rolled.orientation == pytest.approx(base.orientation, abs=1e-9)
        assert rolled.center == pytest.approx(base.center, abs=1e-9)

    def test_too_few_points_rejected(self):
        with pytest.raises(DataError, match="6 boundary points"):
            fit_ellipse(np.zeros((5, 2)))

    def test_collinear_points_rejected(self):
        pts = np.column_stack([np.arange(10.0), 2.0 * np.arange(10.0)])
        with pytest.raises(DataError, match="degenerate"):
            fit_ellipse(pts)

    def test_contour_input(self):
        mask = np.zeros((60, 60), dtype=bool)
        ys, xs = np.mgrid[:60, :60]
        mask[((xs - 30) / 20.0) ** 2 + ((ys - 30) / 10.0) ** 2 <= 1.0] = True
        contour = extract_contours(mask)[0]
        fit = fit_ellipse(contour)
        assert fit.semi_axes[0] == pytest.approx(20, rel=0.08)
        assert min(fit.orientation, math.pi - fit.orientation) < 0.05


class TestExtractFeatures:
    def test_quarter_width(self):
        pts = sample_ellipse_points((25, 40), (10, 5), 0.3)
        feats = extract_features(fit_ellipse(pts), (100, 80))
        assert feats.x == pytest.approx(0.25, abs=1e-6)

    def test_horizontal_and_vertical(self):
        horizontal = fit_ellipse(sample_ellipse_points((50, 40), (20, 8), 0.0))
        vertical = fit_ellipse(sample_ellipse_points((50, 40), (20, 8), math.pi / 2))
        assert extract_features(horizontal, (100, 80)).theta == pytest.approx(0.0, abs=0.01)
        assert extract_features(vertical, (100, 80)).theta == pytest.approx(math.pi / 2, abs=0.01)

    def test_center_clamped(self):
        pts = sample_ellipse_points((-10, 40), (10, 5), 0.2)
        feats = extract_features(fit_ellipse(pts), (100, 80))
        assert feats.x == 0.0

    @given(cx=st.floats(-50, 150), angle=st.floats(0, math.pi - 1e-6),
           major=st.floats(8, 30), ratio=st.floats(0.3, 0.9))
    @settings(max_examples=40, deadline=None)
    def test_feature_image_bounds(self, cx, angle, major, ratio):
        pts = sample_ellipse_points((cx, 40), (major, major * ratio), angle, n=48)
        feats = extract_features(fit_ellipse(pts), (100, 80))
        assert 0.0 <= feats.x <= 1.0
        assert 0.0 <= feats.theta <= math.pi

    def test_invalid_feature_values_rejected(self):
        with pytest.raises(DataError):
            EllipseFeatures(x=1.5, theta=0.1)
        with pytest.raises(DataError):
            EllipseFeatures(x=0.5, theta=4.0)
