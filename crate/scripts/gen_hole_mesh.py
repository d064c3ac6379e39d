"""Generate the unit-square-minus-hole fixture used by the anisotropic
semilinear experiment.

The domain is (0,1)^2 minus [4/9,5/9]^2. Points sit on a jittered grid of
spacing 1/63 (so both hole edges are grid lines); boundary points are not
jittered. The Delaunay triangulation of the point set is filtered by
dropping triangles whose centroid lies inside the hole.

Markers: 1 on the outer boundary, 2 on the hole boundary.

    python3 scripts/gen_hole_mesh.py data/meshes/square_hole.mesh
"""

import sys

import numpy as np
from scipy.spatial import Delaunay

N = 63
A, B = 28, 35  # 4/9 = 28/63, 5/9 = 35/63
JITTER = 0.3
SEED = 20240611


def on_outer(i, j):
    return i in (0, N) or j in (0, N)


def on_hole(i, j):
    return A <= i <= B and A <= j <= B and (i in (A, B) or j in (A, B))


def in_hole(i, j):
    return A < i < B and A < j < B


def main(path):
    rng = np.random.default_rng(SEED)
    h = 1.0 / N
    pts, kind = [], []
    for j in range(N + 1):
        for i in range(N + 1):
            if in_hole(i, j):
                continue
            x, y = i * h, j * h
            if on_outer(i, j):
                kind.append(1)
            elif on_hole(i, j):
                kind.append(2)
            else:
                x += JITTER * h * rng.uniform(-1, 1)
                y += JITTER * h * rng.uniform(-1, 1)
                kind.append(0)
            pts.append((x, y))
    pts = np.array(pts)
    tri = Delaunay(pts).simplices
    lo, hi = A * h, B * h
    keep = []
    for t in tri:
        c = pts[t].mean(axis=0)
        if lo < c[0] < hi and lo < c[1] < hi:
            continue
        a, b, d = pts[t]
        area = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0])
        if area < 0:
            t = [t[0], t[2], t[1]]
        keep.append(list(t))

    # boundary edges: edges used by exactly one kept triangle
    count = {}
    for t in keep:
        for k in range(3):
            e = (t[k], t[(k + 1) % 3])
            key = tuple(sorted(e))
            count.setdefault(key, []).append(e)
    bnd = []
    for key, uses in count.items():
        if len(uses) == 1:
            a, b = uses[0]
            ka, kb = kind[a], kind[b]
            if ka == 0 or kb == 0 or ka != kb:
                raise SystemExit(f"boundary edge {key} joins kinds {ka}, {kb}")
            bnd.append((a, b, ka))
    n_outer = sum(1 for e in bnd if e[2] == 1)
    n_hole = sum(1 for e in bnd if e[2] == 2)
    assert n_outer == 4 * N, n_outer
    assert n_hole == 4 * (B - A), n_hole

    with open(path, "w") as f:
        f.write("# unit square minus [4/9,5/9]^2; markers 1 outer, 2 hole\n")
        f.write(f"{len(pts)} {len(keep)} {len(bnd)}\n")
        for x, y in pts:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for t in keep:
            f.write(f"{t[0]} {t[1]} {t[2]}\n")
        for a, b, m in sorted(bnd, key=lambda e: (e[2], e[0], e[1])):
            f.write(f"{a} {b} {m}\n")
    print(f"{len(pts)} vertices, {len(keep)} triangles, {len(bnd)} boundary edges")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/meshes/square_hole.mesh")
