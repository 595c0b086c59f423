"""Window geometry, distances, and pattern file round-trips."""

import numpy as np
import pytest
from scipy.spatial import cKDTree

from dppmle.errors import DegeneratePattern, PointOutsideWindow, WindowNotRect
from dppmle.geometry import (CompositeWindow, DistanceMatrix, PointPattern,
                             Rect, boundary_distance, format_window_spec,
                             pairwise, pairwise_torus, parse_window_spec,
                             read_pattern, rshape, write_pattern)


class TestRect:
    def test_volume_and_sides(self):
        w = Rect((0.0, 0.0), (2.0, 3.0))
        assert w.volume == 6.0
        assert np.allclose(w.side_lengths, [2.0, 3.0])
        assert w.dim == 2

    def test_anchored(self):
        w = Rect.anchored(1.0, 2.0)
        assert w.lo == (0.0, 0.0)
        assert w.hi == (1.0, 2.0)

    def test_containment_closed(self):
        w = Rect.anchored(1.0, 1.0)
        assert w.contains((0.0, 0.0))
        assert w.contains((1.0, 1.0))
        assert not w.contains((1.0 + 1e-12, 0.5))
        got = w.contains(np.array([[0.5, 0.5], [2.0, 0.5]]))
        assert got.tolist() == [True, False]

    def test_empty_rect_rejected(self):
        with pytest.raises(ValueError):
            Rect((0.0, 0.0), (0.0, 1.0))

    def test_shifted_intersection_volume(self):
        w = Rect.anchored(1.0, 1.0)
        assert w.shifted_intersection_volume(w, (0.25, 0.0)) == pytest.approx(0.75)
        assert w.shifted_intersection_volume(w, (0.5, 0.5)) == pytest.approx(0.25)
        assert w.shifted_intersection_volume(w, (2.0, 0.0)) == 0.0


class TestComposite:
    def test_union_overlap_counted_once(self):
        w = CompositeWindow([
            ("+", Rect((0.0, 0.0), (1.0, 1.0))),
            ("+", Rect((0.5, 0.0), (1.5, 1.0))),
        ])
        assert w.volume == pytest.approx(1.5)
        assert w.contains((1.25, 0.5))
        assert not w.contains((1.25, 1.25))

    def test_subtraction(self):
        w = CompositeWindow([
            ("+", Rect((0.0, 0.0), (1.0, 1.0))),
            ("-", Rect((0.25, 0.25), (0.75, 0.75))),
        ])
        assert w.volume == pytest.approx(0.75)
        assert not w.contains((0.5, 0.5))
        assert w.contains((0.1, 0.1))

    def test_pieces_disjoint(self):
        w = rshape()
        for i, a in enumerate(w.pieces):
            for b in w.pieces[i + 1:]:
                assert a.shifted_intersection_volume(b, (0.0, 0.0)) == 0.0

    def test_rshape_area(self):
        assert rshape().volume == pytest.approx(3.7, abs=1e-12)

    def test_rshape_bounding_box(self):
        bb = rshape().bounding_box
        assert bb.lo == (0.0, 0.0)
        assert bb.hi == (1.7, 3.0)

    def test_containment_vs_volume_monte_carlo(self):
        # hit fraction on the bounding box estimates |W| / |bbox|
        w = rshape()
        rng = np.random.default_rng(7)
        bb = w.bounding_box
        draws = rng.uniform(bb.lo, bb.hi, size=(100_000, 2))
        frac = w.contains(draws).mean()
        assert frac * bb.volume == pytest.approx(w.volume, rel=1e-2)

    def test_translation_overlap_matches_monte_carlo(self):
        w = rshape()
        rng = np.random.default_rng(11)
        bb = w.bounding_box
        draws = rng.uniform(bb.lo, bb.hi, size=(200_000, 2))
        for v in [(0.1, 0.0), (0.0, 0.4), (0.3, -0.2)]:
            exact = w.shifted_intersection_volume(w, v)
            hits = w.contains(draws) & w.contains(draws - np.asarray(v))
            assert exact == pytest.approx(hits.mean() * bb.volume, abs=2e-2)


class TestPointPattern:
    def test_point_outside_raises(self):
        with pytest.raises(PointOutsideWindow):
            PointPattern(np.array([[0.5, 1.5]]), Rect.anchored(1.0, 1.0))

    def test_duplicates_raise(self):
        with pytest.raises(DegeneratePattern):
            PointPattern(np.array([[0.2, 0.2], [0.2, 0.2]]),
                         Rect.anchored(1.0, 1.0))

    def test_empty_pattern_ok(self):
        p = PointPattern(np.empty((0, 2)), Rect.anchored(1.0, 1.0))
        assert p.n_points == 0

    def test_points_read_only(self):
        p = PointPattern(np.array([[0.2, 0.2]]), Rect.anchored(1.0, 1.0))
        with pytest.raises(ValueError):
            p.points[0, 0] = 0.5

    def test_intensity(self):
        p = PointPattern(np.array([[0.5, 0.5], [1.5, 0.5]]),
                         Rect.anchored(2.0, 1.0))
        assert p.intensity == pytest.approx(1.0)


class TestDistances:
    def test_single_point(self):
        p = PointPattern(np.array([[0.5, 0.5]]), Rect.anchored(1.0, 1.0))
        d = pairwise(p)
        assert d.matrix.shape == (1, 1)
        assert d.matrix[0, 0] == 0.0
        assert d.mode == "plain"

    def test_three_four_five(self):
        p = PointPattern(np.array([[0.0, 0.0], [3.0, 4.0]]),
                         Rect.anchored(5.0, 5.0))
        d = pairwise(p).matrix
        assert d[0, 1] == pytest.approx(5.0)
        assert d[1, 0] == pytest.approx(5.0)

    def test_torus_wrap(self):
        p = PointPattern(np.array([[0.05, 0.5], [0.95, 0.5]]),
                         Rect.anchored(1.0, 1.0))
        assert pairwise(p).matrix[0, 1] == pytest.approx(0.9)
        d = pairwise_torus(p)
        assert d.matrix[0, 1] == pytest.approx(0.1)
        assert d.mode == "torus"

    def test_torus_needs_rect(self):
        p = PointPattern(np.array([[0.2, 0.2]]), rshape())
        with pytest.raises(WindowNotRect):
            pairwise_torus(p)

    def test_torus_never_exceeds_plain(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.0, 1.0, size=(200, 2)) * np.array([2.0, 3.0])
        p = PointPattern(pts, Rect.anchored(2.0, 3.0))
        dp = pairwise(p).matrix
        dt = pairwise_torus(p).matrix
        assert np.all(dt <= dp + 1e-12)
        assert np.allclose(dt, dt.T)
        assert np.all(np.diag(dt) == 0.0)

    def test_empty_pattern_rejected(self):
        p = PointPattern(np.empty((0, 2)), Rect.anchored(1.0, 1.0))
        with pytest.raises(DegeneratePattern):
            pairwise(p)

    def test_distance_matrix_validation(self):
        with pytest.raises(ValueError):
            DistanceMatrix(np.zeros((2, 3)), "plain")


class TestBoundaryDistance:
    def test_rect_exact(self):
        w = Rect.anchored(2.0, 1.0)
        assert boundary_distance(w, (0.3, 0.5)) == pytest.approx(0.3)
        assert boundary_distance(w, (1.0, 0.9)) == pytest.approx(0.1)
        assert boundary_distance(w, (1.0, 0.5)) == pytest.approx(0.5)
        assert boundary_distance(w, (0.0, 0.5)) == 0.0

    def test_outside_raises(self):
        with pytest.raises(PointOutsideWindow):
            boundary_distance(Rect.anchored(1.0, 1.0), (1.5, 0.5))

    def test_hole_edges_count(self):
        w = CompositeWindow([
            ("+", Rect((0.0, 0.0), (1.0, 1.0))),
            ("-", Rect((0.4, 0.4), (0.6, 0.6))),
        ])
        # nearest boundary of (0.3, 0.5) is the hole's left edge at x=0.4
        assert boundary_distance(w, (0.3, 0.5)) == pytest.approx(0.1)
        assert boundary_distance(w, (0.05, 0.5)) == pytest.approx(0.05)

    def test_internal_seams_do_not_count(self):
        # two abutting pieces: the shared edge x=0.5 is interior
        w = CompositeWindow([
            ("+", Rect((0.0, 0.0), (0.5, 1.0))),
            ("+", Rect((0.5, 0.0), (1.0, 1.0))),
        ])
        assert boundary_distance(w, (0.5, 0.5)) == pytest.approx(0.5)

    def test_rshape_against_grid_search(self):
        # brute force: nearest boundary cell of a 1e-3 containment grid
        w = rshape()
        bb = w.bounding_box
        h = 1e-3
        xs = np.arange(bb.lo[0] - h, bb.hi[0] + 2 * h, h)
        ys = np.arange(bb.lo[1] - h, bb.hi[1] + 2 * h, h)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        mask = w.contains(np.stack([gx, gy], axis=-1))
        edge = np.zeros_like(mask)
        edge[1:, :] |= mask[1:, :] != mask[:-1, :]
        edge[:-1, :] |= mask[1:, :] != mask[:-1, :]
        edge[:, 1:] |= mask[:, 1:] != mask[:, :-1]
        edge[:, :-1] |= mask[:, 1:] != mask[:, :-1]
        edge &= mask
        boundary_pts = np.stack([gx[edge], gy[edge]], axis=-1)
        tree = cKDTree(boundary_pts)
        rng = np.random.default_rng(19)
        queries = []
        while len(queries) < 50:
            q = rng.uniform(bb.lo, bb.hi)
            if w.contains(q):
                queries.append(q)
        for q in queries:
            brute = tree.query(q)[0]
            assert boundary_distance(w, q) == pytest.approx(brute, abs=2e-3)


class TestPatternIO:
    def test_round_trip_rect_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0.0, 1.0, size=(37, 2)) * np.array([2.0, 3.0])
        p = PointPattern(pts, Rect.anchored(2.0, 3.0))
        path = tmp_path / "pattern.txt"
        write_pattern(p, path)
        q = read_pattern(path)
        assert np.array_equal(q.points, p.points)
        assert isinstance(q.window, Rect)
        assert q.window.lo == p.window.lo and q.window.hi == p.window.hi

    def test_round_trip_composite(self, tmp_path):
        w = rshape()
        rng = np.random.default_rng(6)
        bb = w.bounding_box
        pts = []
        while len(pts) < 20:
            c = rng.uniform(bb.lo, bb.hi)
            if w.contains(c):
                pts.append(c)
        p = PointPattern(np.array(pts), w)
        path = tmp_path / "pattern.txt"
        write_pattern(p, path)
        q = read_pattern(path)
        assert np.array_equal(q.points, p.points)
        assert isinstance(q.window, CompositeWindow)
        assert q.window.volume == pytest.approx(w.volume, abs=1e-15)

    def test_window_spec_round_trip(self):
        for spec in ["rect 0 2 0 3",
                     "composite + 0 1 0 1 - 0.25 0.75 0.25 0.75"]:
            w = parse_window_spec(spec)
            again = parse_window_spec(format_window_spec(w))
            assert again.volume == pytest.approx(w.volume, abs=1e-15)

    def test_rshape_spec(self):
        w = parse_window_spec("rshape")
        assert w.volume == pytest.approx(3.7)

    def test_bad_specs(self):
        for spec in ["", "circle 1", "rect 0 1 0", "composite * 0 1 0 1"]:
            with pytest.raises(ValueError):
                parse_window_spec(spec)

    def test_empty_pattern_round_trip(self, tmp_path):
        p = PointPattern(np.empty((0, 2)), Rect.anchored(1.0, 1.0))
        path = tmp_path / "empty.txt"
        write_pattern(p, path)
        q = read_pattern(path)
        assert q.n_points == 0
        assert isinstance(q.window, Rect)
