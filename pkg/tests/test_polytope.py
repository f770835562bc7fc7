import numpy as np
import pytest

from stationopt.polytope import (
    DegenerateRegionError,
    EmptyRegionError,
    HalfSpace,
    HPolytope,
    UnboundedRegionError,
    VPolytope,
    enumerate_vertices,
    format_polytope,
    least_squares_hyperplane,
    project_out,
    remove_redundant,
    sample_uniform,
    triangulate,
)

from oracles import (
    brute_force_vertices,
    divergence_volume,
    hausdorff_convex_2d,
    match_vertex_sets,
    normal_equations_fit,
    project_vertices_hull,
    random_bounded_hpolytope,
)


def unit_cube() -> HPolytope:
    A = np.vstack([np.eye(3), -np.eye(3)])
    b = np.concatenate([-np.ones(3), np.zeros(3)])
    return HPolytope(A, b)


def unit_simplex() -> HPolytope:
    A = np.vstack([-np.eye(3), np.ones(3)])
    b = np.array([0.0, 0.0, 0.0, -1.0])
    return HPolytope(A, b)


class TestRepresentations:
    def test_halfspace_rejects_zero_normal(self):
        with pytest.raises(ValueError):
            HalfSpace((0.0, 0.0), 1.0)

    def test_normalize(self):
        h = HalfSpace((3.0, 4.0), 10.0).normalized()
        assert np.allclose(h.coefficients, (0.6, 0.8))
        assert h.offset == pytest.approx(2.0)

    def test_h_and_v_contains_agree(self):
        h = unit_cube()
        v = enumerate_vertices(h)
        for point in [(0.5, 0.5, 0.5), (0.0, 0.0, 0.0), (1.2, 0.5, 0.5), (-0.1, 0.2, 0.3)]:
            assert h.contains(point) == v.contains(point)

    def test_fix_coordinate(self):
        square = unit_cube().fix_coordinate(2, 0.5)
        assert square.dim == 2
        assert square.contains((0.5, 0.5))
        assert not square.contains((1.5, 0.5))

    def test_dump_roundtrips_visually(self):
        text = format_polytope(unit_cube(), "cube")
        assert "H-polytope" in text and "x0" in text
        textv = format_polytope(VPolytope(np.eye(3)), "tri")
        assert "V-polytope" in textv


class TestEnumerateVertices:
    def test_unit_cube(self):
        v = enumerate_vertices(unit_cube())
        expect = np.array(
            [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float
        )
        assert match_vertex_sets(v.vertices, expect, 1e-9)

    def test_unit_simplex(self):
        v = enumerate_vertices(unit_simplex())
        expect = np.vstack([np.zeros(3), np.eye(3)])
        assert match_vertex_sets(v.vertices, expect, 1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_plane_triples(self, seed):
        A, b = random_bounded_hpolytope(seed)
        got = enumerate_vertices(HPolytope(A, b))
        expect = brute_force_vertices(A, b)
        assert match_vertex_sets(got.vertices, expect, 1e-7)

    def test_unbounded_raises(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(UnboundedRegionError):
            enumerate_vertices(HPolytope(A, -np.ones(2)))

    def test_empty_raises(self):
        A = np.array([[1.0], [-1.0]])
        b = np.array([-0.0, 1.0])  # x <= 0 and x >= 1
        with pytest.raises(EmptyRegionError):
            enumerate_vertices(HPolytope(A, b))


class TestRemoveRedundant:
    def test_duplicate_facet_dropped(self):
        h = unit_cube()
        doubled = HPolytope(np.vstack([h.A, h.A[:1]]), np.concatenate([h.b, h.b[:1]]))
        assert remove_redundant(doubled).n_rows == 6

    def test_slack_plane_dropped(self):
        h = unit_cube()
        extra = HPolytope(np.vstack([h.A, [[1.0, 0, 0]]]), np.concatenate([h.b, [-2.0]]))
        reduced = remove_redundant(extra)
        assert reduced.n_rows == 6
        assert match_vertex_sets(
            enumerate_vertices(reduced).vertices, enumerate_vertices(h).vertices, 1e-9
        )

    @pytest.mark.parametrize("seed", range(4))
    def test_region_unchanged(self, seed):
        A, b = random_bounded_hpolytope(seed, extra_planes=9)
        h = HPolytope(A, b)
        reduced = remove_redundant(h)
        assert reduced.n_rows <= h.n_rows
        assert match_vertex_sets(
            enumerate_vertices(reduced).vertices, enumerate_vertices(h).vertices, 1e-7
        )

    def test_infeasible_raises(self):
        A = np.array([[1.0], [-1.0]])
        b = np.array([0.0, 1.0])
        with pytest.raises(EmptyRegionError):
            remove_redundant(HPolytope(A, b))


class TestProjectOut:
    def test_cube_projects_to_square(self):
        square = project_out(unit_cube(), 2)
        assert square.dim == 2
        verts = brute_force_vertices(square.A, square.b)
        assert match_vertex_sets(verts, np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float), 1e-9)

    def test_simplex_projects_to_triangle(self):
        tri = project_out(unit_simplex(), 2)
        verts = brute_force_vertices(tri.A, tri.b)
        assert match_vertex_sets(verts, np.array([[0, 0], [1, 0], [0, 1]], float), 1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_vertex_projection_hull(self, seed):
        A, b = random_bounded_hpolytope(100 + seed)
        projected = project_out(HPolytope(A, b), 2)
        got = brute_force_vertices(projected.A, projected.b)
        expect = project_vertices_hull(brute_force_vertices(A, b), drop=2)
        assert hausdorff_convex_2d(got, expect) < 1e-7

    def test_commutes_across_coordinates(self):
        A, b = random_bounded_hpolytope(7, extra_planes=4, dim=4)
        h = HPolytope(A, b)
        # eliminating x3 then x1 must equal eliminating x1 then x3 (shifted index)
        p1 = project_out(project_out(h, 3), 1)
        p2 = project_out(project_out(h, 1), 2)
        v1 = brute_force_vertices(p1.A, p1.b)
        v2 = brute_force_vertices(p2.A, p2.b)
        assert hausdorff_convex_2d(v1, v2) < 1e-8

    def test_projection_of_4d_box(self):
        A = np.vstack([np.eye(4), -np.eye(4)])
        b = np.concatenate([-np.ones(4), np.zeros(4)])
        p = project_out(HPolytope(A, b), 3)
        assert p.dim == 3
        assert match_vertex_sets(
            enumerate_vertices(p).vertices, enumerate_vertices(unit_cube()).vertices, 1e-9
        )

    @pytest.mark.parametrize("seed", range(3))
    def test_random_4d_matches_projected_hull(self, seed):
        from scipy.spatial import ConvexHull

        A, b = random_bounded_hpolytope(300 + seed, extra_planes=5, dim=4)
        projected = project_out(HPolytope(A, b), 3)
        got = enumerate_vertices(projected).vertices
        pts = np.delete(brute_force_vertices(A, b), 3, axis=1)
        hull = ConvexHull(pts)
        expect = []
        for p in pts[hull.vertices]:
            if not any(np.linalg.norm(p - q) < 1e-7 for q in expect):
                expect.append(p)
        assert match_vertex_sets(got, np.array(expect), 1e-7)


class TestTriangulate:
    def test_tetrahedron_total_volume(self):
        v = VPolytope(np.vstack([np.zeros(3), np.eye(3)]))
        tets = triangulate(v)
        assert sum(t.volume for t in tets) == pytest.approx(1.0 / 6.0, abs=1e-12)

    def test_cube_volume_one(self):
        v = enumerate_vertices(unit_cube())
        tets = triangulate(v)
        assert sum(t.volume for t in tets) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_volume_matches_divergence_oracle(self, seed):
        A, b = random_bounded_hpolytope(200 + seed)
        verts = enumerate_vertices(HPolytope(A, b))
        total = sum(t.volume for t in triangulate(verts))
        oracle = divergence_volume(A, b, verts.vertices)
        assert total == pytest.approx(oracle, abs=1e-9)

    def test_flat_input_raises(self):
        flat = VPolytope(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float))
        with pytest.raises(DegenerateRegionError):
            triangulate(flat)


class TestSampleUniform:
    def test_points_inside_and_deterministic(self):
        v = enumerate_vertices(unit_cube())
        pts1 = sample_uniform(v, 500, seed=42)
        pts2 = sample_uniform(v, 500, seed=42)
        assert np.array_equal(pts1, pts2)
        h = unit_cube()
        assert all(h.contains(p, tol=1e-9) for p in pts1)

    def test_single_sample_reproducible(self):
        v = enumerate_vertices(unit_cube())
        assert np.array_equal(sample_uniform(v, 1, seed=7), sample_uniform(v, 1, seed=7))

    def test_tetrahedron_mean_near_centroid(self):
        v = VPolytope(np.vstack([np.zeros(3), np.eye(3)]))
        pts = sample_uniform(v, 10_000, seed=11)
        mean = pts.mean(axis=0)
        # centroid of the unit simplex is (1/4, 1/4, 1/4); CLT bound
        assert np.all(np.abs(mean - 0.25) < 0.02)

    def test_degenerate_raises(self):
        flat = VPolytope(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float))
        with pytest.raises(DegenerateRegionError):
            sample_uniform(flat, 10, seed=0)

    def test_count_validation(self):
        v = enumerate_vertices(unit_cube())
        with pytest.raises(ValueError):
            sample_uniform(v, 0, seed=0)


class TestLeastSquares:
    def test_exact_affine_recovery(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-2, 5, size=(40, 3))
        truth = np.array([1.5, -2.0, 0.25, 4.0])
        values = truth[0] + pts @ truth[1:]
        fitted = least_squares_hyperplane(pts, values)
        assert np.allclose(fitted, truth, atol=1e-10)
        residual = values - (fitted[0] + pts @ fitted[1:])
        assert np.abs(residual).max() < 1e-9

    def test_constant_values(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 1, size=(25, 3))
        fitted = least_squares_hyperplane(pts, np.full(25, 3.25))
        assert np.allclose(fitted, [3.25, 0, 0, 0], atol=1e-10)

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1, 1, size=(60, 3))
        values = rng.normal(size=60)
        fitted = least_squares_hyperplane(pts, values)
        oracle = normal_equations_fit(pts, values)
        assert np.allclose(fitted, oracle, atol=1e-8)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(6)
        pts = rng.uniform(-1, 1, size=(80, 3))
        values = rng.normal(size=80) * 50.0
        fitted = least_squares_hyperplane(pts, values)
        X = np.column_stack([np.ones(80), pts])
        r = values - X @ fitted
        assert np.abs(X.T @ r).max() < 1e-6 * max(1.0, np.abs(values).max())

    def test_rank_deficiency_raises(self):
        pts = np.zeros((10, 3))
        with pytest.raises(ValueError):
            least_squares_hyperplane(pts, np.arange(10.0))

    def test_too_few_points_raise(self):
        with pytest.raises(ValueError):
            least_squares_hyperplane(np.eye(3), np.ones(3))
