#!/usr/bin/env python3
"""Generate the 2D meshes shipped in data/meshes.

Omega = (-0.5, 0.5)^2 is triangulated with a structured criss-cross-free pattern of spacing h.
The extended domain is the convex polygon inscribed in the circle of radius R = 1.5; the annulus
between the square and that polygon is filled by a Delaunay triangulation of lattice points.

Node classes: 0 strictly inside Omega, 1 on the square boundary or in the annulus (exterior
data), 2 on the outer polygon (zero extension).

Usage: make_meshes.py OUT_DIR [h ...]
"""

import math
import pathlib
import sys

import numpy as np
from scipy.spatial import Delaunay

RADIUS = 1.5
HALF = 0.5


def square_mesh(h):
    n = round(2 * HALF / h)
    xs = np.linspace(-HALF, HALF, n + 1)
    pts = [(x, y) for y in xs for x in xs]
    cls = [0 if 0 < i < n and 0 < j < n else 1 for j in range(n + 1) for i in range(n + 1)]
    cells = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 1, a + n + 2
            # alternate diagonals so no vertex collects a fan of long edges
            if (i + j) % 2 == 0:
                cells += [(a, b, d), (a, d, c)]
            else:
                cells += [(a, b, c), (b, d, c)]
    return pts, cls, cells, n


def build(h):
    pts, cls, cells, n = square_mesh(h)
    boundary_idx = [k for k, c in enumerate(cls) if c == 1]

    ring_n = max(16, round(2 * math.pi * RADIUS / h))
    ring = [(RADIUS * math.cos(2 * math.pi * k / ring_n), RADIUS * math.sin(2 * math.pi * k / ring_n))
            for k in range(ring_n)]
    # inscribed polygon apothem
    apothem = RADIUS * math.cos(math.pi / ring_n)

    annulus = []
    m = math.ceil(RADIUS / h)
    for j in range(-m, m + 1):
        for i in range(-m, m + 1):
            # shifted rows give a near-equilateral lattice
            x = (i + 0.5 * (j % 2)) * h
            y = j * h * math.sqrt(3) / 2
            dist_sq = max(abs(x) - HALF, abs(y) - HALF)
            if dist_sq < 0.8 * h:
                continue
            if math.hypot(x, y) > apothem - 0.6 * h:
                continue
            annulus.append((x, y))

    outer_pts = [pts[k] for k in boundary_idx] + annulus + ring
    tri = Delaunay(np.array(outer_pts))
    nb = len(boundary_idx)
    na = len(annulus)

    all_pts = list(pts)
    all_cls = list(cls)
    remap = list(boundary_idx)
    for p in annulus:
        remap.append(len(all_pts))
        all_pts.append(p)
        all_cls.append(1)
    for p in ring:
        remap.append(len(all_pts))
        all_pts.append(p)
        all_cls.append(2)

    out_cells = list(cells)
    for simplex in tri.simplices:
        q = np.array([outer_pts[k] for k in simplex])
        cx, cy = q.mean(axis=0)
        if abs(cx) < HALF and abs(cy) < HALF:
            continue
        area = 0.5 * ((q[1, 0] - q[0, 0]) * (q[2, 1] - q[0, 1]) - (q[1, 1] - q[0, 1]) * (q[2, 0] - q[0, 0]))
        if abs(area) < 1e-14:
            continue
        a, b, c = (remap[k] for k in simplex)
        out_cells.append((a, b, c) if area > 0 else (a, c, b))
    assert nb + na + len(ring) == len(outer_pts)
    return all_pts, all_cls, out_cells


def min_angle(pts, cells):
    worst = math.pi
    for c in cells:
        p = [np.array(pts[k]) for k in c]
        for k in range(3):
            u = p[(k + 1) % 3] - p[k]
            v = p[(k + 2) % 3] - p[k]
            worst = min(worst, math.acos(np.clip(u @ v / np.linalg.norm(u) / np.linalg.norm(v), -1, 1)))
    return math.degrees(worst)


def write(path, pts, cls, cells):
    with open(path, "w") as f:
        f.write(f"2 {len(pts)} {len(cells)}\n")
        for (x, y), c in zip(pts, cls):
            f.write(f"{float(x)!r} {float(y)!r} {c}\n")
        for c in cells:
            f.write(f"{c[0]} {c[1]} {c[2]}\n")


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/meshes")
    out.mkdir(parents=True, exist_ok=True)
    sizes = [float(v) for v in sys.argv[2:]] or [0.2, 0.1]
    for h in sizes:
        pts, cls, cells = build(h)
        name = out / f"square_h{h:g}.mesh"
        write(name, pts, cls, cells)
        print(f"{name}: {len(pts)} nodes, {len(cells)} cells, "
              f"{sum(1 for c in cls if c == 0)} interior, min angle {min_angle(pts, cells):.1f} deg")


if __name__ == "__main__":
    main()
