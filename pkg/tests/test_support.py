import numpy as np

from telewalk.support import (
    clamp_to_polygon,
    convex_hull,
    foot_rectangle,
    polygon_margin,
    support_polygon,
)


class TestFootRectangle:
    def test_axis_aligned(self):
        corners = foot_rectangle(np.array([0.0, 0.0, 0.0]), 0.12, 0.07)
        assert np.allclose(sorted(map(tuple, corners)),
                           sorted([(0.06, 0.035), (-0.06, 0.035),
                                   (-0.06, -0.035), (0.06, -0.035)]), atol=1e-15)

    def test_rotation_moves_corners(self):
        corners = foot_rectangle(np.array([1.0, 2.0, np.pi / 2]), 0.12, 0.07)
        assert np.allclose(sorted(map(tuple, corners)),
                           sorted([(1 - 0.035, 2 + 0.06), (1 - 0.035, 2 - 0.06),
                                   (1 + 0.035, 2 - 0.06), (1 + 0.035, 2 + 0.06)]),
                           atol=1e-12)


class TestConvexHull:
    def test_square_with_interior_point(self):
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
        hull = convex_hull(pts)
        assert len(hull) == 4
        assert {(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)} == set(map(tuple, hull))

    def test_hull_is_ccw(self):
        pts = np.random.default_rng(70).uniform(-1, 1, (30, 2))
        hull = convex_hull(pts)
        area2 = 0.0
        for i in range(len(hull)):
            a, b = hull[i], hull[(i + 1) % len(hull)]
            area2 += a[0] * b[1] - b[0] * a[1]
        assert area2 > 0


class TestMarginAndClamp:
    def setup_method(self):
        self.hull = convex_hull(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))

    def test_inside_positive_margin(self):
        assert polygon_margin(np.array([0.5, 0.5]), self.hull) > 0.49

    def test_outside_negative_margin(self):
        assert polygon_margin(np.array([2.0, 0.5]), self.hull) < 0
        assert np.isclose(polygon_margin(np.array([2.0, 0.5]), self.hull), -1.0)

    def test_clamp_inside_is_identity(self):
        p = np.array([0.3, 0.7])
        assert np.array_equal(clamp_to_polygon(p, self.hull), p)

    def test_clamp_outside_projects_to_boundary(self):
        out = clamp_to_polygon(np.array([2.0, 0.5]), self.hull)
        assert np.allclose(out, [1.0, 0.5], atol=1e-12)
        out = clamp_to_polygon(np.array([2.0, 2.0]), self.hull)
        assert np.allclose(out, [1.0, 1.0], atol=1e-12)

    def test_clamped_point_has_nonnegative_margin(self):
        rng = np.random.default_rng(71)
        for _ in range(100):
            p = rng.uniform(-2, 3, 2)
            c = clamp_to_polygon(p, self.hull)
            assert polygon_margin(c, self.hull) > -1e-9


class TestSupportPolygon:
    def test_double_support_hull_contains_both_feet(self):
        left = np.array([0.0, 0.08, 0.0])
        right = np.array([0.18, -0.08, 0.0])
        hull = support_polygon([left, right], 0.12, 0.07)
        for pose in (left, right):
            assert polygon_margin(pose[:2], hull) > 0
        # Midpoint between the feet is inside the double-support hull.
        mid = (left[:2] + right[:2]) / 2
        assert polygon_margin(mid, hull) > 0

    def test_single_support_rectangle(self):
        hull = support_polygon([np.array([0.0, 0.0, 0.0])], 0.12, 0.07)
        assert len(hull) == 4
        assert polygon_margin(np.array([0.0, 0.0]), hull) > 0.034
        assert polygon_margin(np.array([0.07, 0.0]), hull) < 0
