"""Polytope machinery behind the operating-range construction.

Shows both representations, redundancy removal, Fourier-Motzkin
projection, triangulation with exact volumes, and the rejection-free
uniform sampler.
"""

import numpy as np

from stationopt.polytope import (
    HPolytope,
    enumerate_vertices,
    format_polytope,
    project_out,
    remove_redundant,
    sample_uniform,
    triangulate,
)

# A box cut by a diagonal plane: x + y + z <= 2.2 inside [0,1]^3.
A = np.vstack([np.eye(3), -np.eye(3), np.ones((1, 3))])
b = np.array([-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -2.2])
poly = HPolytope(A, b)

print("== vertex enumeration ==")
verts = enumerate_vertices(poly)
print(format_polytope(verts, "cut cube"))

print("== redundancy removal ==")
padded = HPolytope(
    np.vstack([poly.A, [[1.0, 0.0, 0.0]], poly.A[:1]]),
    np.concatenate([poly.b, [-5.0], poly.b[:1]]),  # slack plane + duplicate
)
reduced = remove_redundant(padded)
print(f"  {padded.n_rows} half spaces -> {reduced.n_rows} facets")

print("\n== projection onto (x, y) ==")
shadow = project_out(poly, 2)
print(format_polytope(shadow, "shadow"))

print("== triangulation and volume ==")
tets = triangulate(verts)
volume = sum(t.volume for t in tets)
print(f"  {len(tets)} tetrahedra, total volume {volume:.9f}")
print(f"  (cube volume 1 minus the clipped corner {(3 * 1.0 - 2.2) ** 3 / 6:.9f})")

print("\n== uniform sampling ==")
points = sample_uniform(verts, 50_000, seed=42)
inside = sum(poly.contains(p) for p in points[:1000])
print(f"  first 1000 samples inside the region: {inside}/1000")
print(f"  sample mean {np.round(points.mean(axis=0), 4)} (centroid pulled off 0.5 by the cut)")
