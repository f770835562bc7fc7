"""Low-dimensional polytope computations.

Everything a compressor operating range needs: H/V representations,
redundancy removal, Fourier-Motzkin projection, triangulation, volume
and rejection-free uniform sampling.  Dimensions stay <= 6 (3-D operating
ranges plus a few intermediate coordinates during composition), which
keeps the brute-force-friendly algorithms here perfectly adequate.

Half spaces are stored as ``c . x + offset <= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection

FACET_TOL = 1e-9


class EmptyRegionError(ValueError):
    """The described region contains no point."""


class UnboundedRegionError(ValueError):
    """A bounded polytope was required but the region is unbounded."""


class DegenerateRegionError(ValueError):
    """The region is not full-dimensional."""


@dataclass(frozen=True)
class HalfSpace:
    """One inequality ``coefficients . x + offset <= 0``."""

    coefficients: tuple[float, ...]
    offset: float

    def __post_init__(self) -> None:
        if not any(c != 0.0 for c in self.coefficients):
            raise ValueError("half-space coefficients must not all be zero")

    def normalized(self) -> "HalfSpace":
        norm = float(np.linalg.norm(self.coefficients))
        return HalfSpace(tuple(c / norm for c in self.coefficients), self.offset / norm)


class HPolytope:
    """Intersection of half spaces, ``A x + b <= 0`` row-wise."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b row counts differ")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero rows are not valid half spaces")
        self.A = A
        self.b = b

    @classmethod
    def from_halfspaces(cls, halfspaces: list[HalfSpace]) -> "HPolytope":
        A = np.array([h.coefficients for h in halfspaces], dtype=float)
        b = np.array([h.offset for h in halfspaces], dtype=float)
        return cls(A, b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def halfspaces(self) -> list[HalfSpace]:
        return [HalfSpace(tuple(row), float(off)) for row, off in zip(self.A, self.b)]

    def normalized(self) -> "HPolytope":
        norms = np.linalg.norm(self.A, axis=1)
        return HPolytope(self.A / norms[:, None], self.b / norms)

    def contains(self, x, tol: float = FACET_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        scale = np.maximum(1.0, np.abs(self.b))
        return bool(np.all(self.A @ x + self.b <= tol * scale))

    def fix_coordinate(self, index: int, value: float) -> "HPolytope":
        """Intersect with the hyperplane ``x[index] = value`` and drop the coordinate."""
        rest = np.delete(self.A, index, axis=1)
        b = self.b + self.A[:, index] * value
        keep = np.linalg.norm(rest, axis=1) > 0.0
        residual = b[~keep]
        if np.any(residual > FACET_TOL * np.maximum(1.0, np.abs(residual))):
            raise EmptyRegionError(f"slice x[{index}]={value} is infeasible")
        return HPolytope(rest[keep], b[keep])

    def chebyshev_center(self) -> tuple[np.ndarray, float]:
        """Center and radius of a largest inscribed ball.

        Raises :class:`EmptyRegionError` if there is no feasible point.
        """
        norms = np.linalg.norm(self.A, axis=1)
        A_lp = np.hstack([self.A, norms[:, None]])
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        bounds = [(None, None)] * self.dim + [(0.0, None)]
        res = linprog(c, A_ub=A_lp, b_ub=-self.b, bounds=bounds, method="highs")
        if res.status == 2:
            raise EmptyRegionError("polytope has no feasible point")
        if res.status == 3:
            # Radius can only be unbounded together with the region.
            raise UnboundedRegionError("polytope is unbounded")
        if res.status != 0:
            raise RuntimeError(f"Chebyshev LP failed: {res.message}")
        return res.x[:-1], float(res.x[-1])

    def is_empty(self) -> bool:
        try:
            self.chebyshev_center()
        except EmptyRegionError:
            return True
        except UnboundedRegionError:
            return False
        return False

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate min/max; raises if unbounded or empty."""
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for j in range(self.dim):
            for sign, out in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(self.dim)
                c[j] = sign
                res = linprog(c, A_ub=self.A, b_ub=-self.b, bounds=[(None, None)] * self.dim, method="highs")
                if res.status == 3:
                    raise UnboundedRegionError(f"polytope unbounded in coordinate {j}")
                if res.status == 2:
                    raise EmptyRegionError("polytope has no feasible point")
                if res.status != 0:
                    raise RuntimeError(f"bounding-box LP failed: {res.message}")
                out[j] = sign * res.fun
        return lo, hi


class VPolytope:
    """Convex hull of a finite vertex set, one vertex per row."""

    def __init__(self, vertices: np.ndarray):
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        if vertices.size == 0:
            raise ValueError("a vertex polytope needs at least one vertex")
        self.vertices = vertices

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def contains(self, x, tol: float = 1e-9) -> bool:
        """Membership via a small feasibility LP over convex weights."""
        x = np.asarray(x, dtype=float)
        n = self.vertices.shape[0]
        A_eq = np.vstack([self.vertices.T, np.ones(n)])
        b_eq = np.concatenate([x, [1.0]])
        scale = max(1.0, float(np.abs(self.vertices).max()))
        res = linprog(
            np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=[(0.0, None)] * n, method="highs",
            options={"primal_feasibility_tolerance": max(1e-10, tol * scale)},
        )
        return res.status == 0


@dataclass(frozen=True)
class Tetrahedron:
    """Four vertices in 3-D; degenerate (flat) simplices are rejected."""

    vertices: tuple[tuple[float, float, float], ...]

    @property
    def volume(self) -> float:
        v = np.asarray(self.vertices)
        return abs(float(np.linalg.det(v[1:] - v[0]))) / 6.0


def enumerate_vertices(h: HPolytope, tol: float = FACET_TOL) -> VPolytope:
    """Vertex enumeration of a bounded H-polytope (dimension <= 4).

    Backed by qhull's halfspace intersection around a Chebyshev center;
    vertices closer than ``tol`` (scaled by the coordinate magnitude) are
    merged.
    """
    if h.dim > 4:
        raise ValueError("vertex enumeration is limited to dimension <= 4")
    lo, hi = h.bounding_box()  # raises on unbounded/empty input
    center, radius = h.chebyshev_center()
    scale = max(1.0, float(np.abs(lo).max()), float(np.abs(hi).max()))
    if radius <= tol * scale:
        raise DegenerateRegionError("polytope is not full-dimensional")
    hs = np.hstack([h.A, h.b[:, None]])
    inter = HalfspaceIntersection(hs, center)
    return VPolytope(_dedupe_points(inter.intersections, tol * scale))


def _dedupe_points(points: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for p in points:
        if not any(np.linalg.norm(p - q) <= tol for q in kept):
            kept.append(p)
    order = np.lexsort(np.array(kept).T[::-1])
    return np.array(kept)[order]


def remove_redundant(h: HPolytope, tol: float = FACET_TOL) -> HPolytope:
    """Minimal normalized H-description of the same region.

    Every surviving half space is tight at some feasible point, certified
    by one LP per facet.  Raises :class:`EmptyRegionError` on infeasible
    input.
    """
    hp = h.normalized()
    if hp.is_empty():
        raise EmptyRegionError("cannot reduce an infeasible system")
    # Exact/near duplicates go first so the LP loop sees each plane once.
    A_rows: list[np.ndarray] = []
    b_rows: list[float] = []
    for row, off in zip(hp.A, hp.b):
        dup = any(
            np.linalg.norm(row - r2) <= tol and abs(off - o2) <= tol
            for r2, o2 in zip(A_rows, b_rows)
        )
        if not dup:
            A_rows.append(row)
            b_rows.append(off)
    A = np.array(A_rows)
    b = np.array(b_rows)
    active = list(range(len(b)))
    for i in range(len(b)):
        others = [j for j in active if j != i]
        if not others:
            continue
        res = linprog(
            -A[i],
            A_ub=A[others],
            b_ub=-b[others],
            bounds=[(None, None)] * hp.dim,
            method="highs",
        )
        if res.status == 0 and -res.fun + b[i] <= tol:
            active = others
        # Unbounded in direction A[i] means the row is essential; keep it.
    return HPolytope(A[active], b[active])


def project_out(h: HPolytope, index: int, tol: float = FACET_TOL) -> HPolytope:
    """Orthogonal projection eliminating one coordinate (Fourier-Motzkin).

    The combined rows are pruned with :func:`remove_redundant` right away
    to contain the quadratic blow-up; fine for the dimensions used here.
    """
    col = h.A[:, index]
    rest = np.delete(h.A, index, axis=1)
    scale = np.linalg.norm(h.A, axis=1)
    zero = np.abs(col) <= tol * scale
    pos = (col > 0) & ~zero
    neg = (col < 0) & ~zero

    rows: list[np.ndarray] = [np.append(rest[i], h.b[i]) for i in np.where(zero)[0]]
    for i in np.where(pos)[0]:
        ri = np.append(rest[i], h.b[i]) / col[i]
        for j in np.where(neg)[0]:
            rj = np.append(rest[j], h.b[j]) / -col[j]
            combined = ri + rj
            if np.linalg.norm(combined[:-1]) > tol:
                rows.append(combined)
            elif combined[-1] > tol:
                raise EmptyRegionError("projection of an infeasible system")
    if not rows:
        raise ValueError("projection produced an unconstrained region")
    stacked = np.array(rows)
    return remove_redundant(HPolytope(stacked[:, :-1], stacked[:, -1]), tol)


def triangulate(v: VPolytope, tol: float = FACET_TOL) -> list[Tetrahedron]:
    """Split a full-dimensional 3-D polytope into interior-disjoint tetrahedra.

    Fans the triangulated hull boundary from an interior point, so the
    volumes add up to the polytope volume exactly.
    """
    if v.dim != 3:
        raise ValueError("triangulation is defined for 3-D polytopes")
    verts = v.vertices
    centered = verts - verts.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if len(verts) < 4 or svals[-1] <= tol * max(1.0, svals[0]):
        raise DegenerateRegionError("polytope is flat; no 3-D triangulation")
    hull = ConvexHull(verts)
    center = verts[np.unique(hull.vertices)].mean(axis=0)
    tets = []
    for simplex in hull.simplices:
        corners = (tuple(center),) + tuple(tuple(verts[k]) for k in simplex)
        tet = Tetrahedron(corners)
        if tet.volume > 0.0:
            tets.append(tet)
    return tets


def _fold_to_barycentric(stu: np.ndarray) -> np.ndarray:
    """Fold unit-cube samples onto the unit simplex (rejection free).

    The three reflections map the parallelepiped spanned by a tetrahedron
    onto the tetrahedron itself while preserving uniformity.
    """
    s, t, u = stu[:, 0].copy(), stu[:, 1].copy(), stu[:, 2].copy()
    flip = s + t > 1.0
    s[flip], t[flip] = 1.0 - s[flip], 1.0 - t[flip]
    case1 = t + u > 1.0
    case2 = ~case1 & (s + t + u > 1.0)
    t_new = 1.0 - u[case1]
    u_new = 1.0 - s[case1] - t[case1]
    t[case1], u[case1] = t_new, u_new
    s_new = 1.0 - t[case2] - u[case2]
    u_new2 = s[case2] + t[case2] + u[case2] - 1.0
    s[case2], u[case2] = s_new, u_new2
    return np.column_stack([s, t, u])


def sample_uniform(v: VPolytope, count: int, seed: int) -> np.ndarray:
    """``count`` uniform samples from a full-dimensional 3-D polytope.

    Tetrahedra of a triangulation are picked with probability proportional
    to their volume; inside a tetrahedron the parallelepiped-fold transform
    avoids rejection entirely.  Deterministic for a fixed seed.
    """
    if count < 1:
        raise ValueError("need at least one sample")
    tets = triangulate(v)
    volumes = np.array([t.volume for t in tets])
    rng = np.random.default_rng(seed)
    choice = rng.choice(len(tets), size=count, p=volumes / volumes.sum())
    stu = _fold_to_barycentric(rng.random((count, 3)))
    corners = np.array([t.vertices for t in tets])[choice]
    base = corners[:, 0, :]
    edges = corners[:, 1:, :] - base[:, None, :]
    return base + np.einsum("nk,nkd->nd", stu, edges)


def least_squares_hyperplane(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Ordinary least-squares fit ``values ~ a0 + a . points``.

    Returns ``(a0, a1, .., ad)``; raises on a rank-deficient design matrix.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    n, d = points.shape
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} points, got {n}")
    X = np.column_stack([np.ones(n), points])
    coeffs, _, rank, _ = np.linalg.lstsq(X, values, rcond=None)
    if rank < d + 1:
        raise ValueError("design matrix is rank deficient")
    return coeffs


def format_polytope(p: HPolytope | VPolytope, label: str = "") -> str:
    """Plain-text facet/vertex dump for debugging."""
    lines = [f"# {label}" if label else "#"]
    if isinstance(p, HPolytope):
        lines.append(f"# H-polytope, dim={p.dim}, rows={p.n_rows}")
        for row, off in zip(p.A, p.b):
            terms = " ".join(f"{c:+.12g}*x{j}" for j, c in enumerate(row))
            lines.append(f"{terms} {off:+.12g} <= 0")
    else:
        lines.append(f"# V-polytope, dim={p.dim}, vertices={len(p.vertices)}")
        for vert in p.vertices:
            lines.append(" ".join(f"{c:.12g}" for c in vert))
    return "\n".join(lines) + "\n"
