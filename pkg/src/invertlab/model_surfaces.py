"""Reference meshes with known conformal data: flat annuli and discs,
cylinders, punctured planes, icospheres, and a one-holed torus.

These back the closed-form checks of the harmonic engine (annulus
condenser, capacities, conformal-type families) and the topology tests.
"""

from __future__ import annotations

import numpy as np

from .mesh import SurfaceMesh


def _ring_strip_faces(base0, base1, n_t):
    """Faces between two rings of n_t vertices with matching angular index."""
    faces = []
    for i in range(n_t):
        j = (i + 1) % n_t
        a, b = base0 + i, base0 + j
        c, d = base1 + i, base1 + j
        faces.append((a, b, d))
        faces.append((a, d, c))
    return faces


def _rings_to_mesh(rings):
    rings = [np.asarray(r, dtype=float) for r in rings]
    n_t = len(rings[0])
    verts = np.vstack(rings)
    faces = []
    for k in range(len(rings) - 1):
        faces.extend(_ring_strip_faces(k * n_t, (k + 1) * n_t, n_t))
    return SurfaceMesh(vertices=verts, faces=np.array(faces, dtype=int))


def _circle(radius, n_t, z=0.0, phase=0.0):
    theta = phase + 2 * np.pi * np.arange(n_t) / n_t
    return np.column_stack(
        [radius * np.cos(theta), radius * np.sin(theta), np.full(n_t, z)]
    )


def annulus_mesh(a, n_t=None, n_r=None, grading="geometric"):
    """Flat annulus a <= |z| <= 1 in the z=0 plane.

    Geometric grading keeps triangles near-equilateral at every radius,
    which is what the log-shaped condenser solution wants; on these
    grids the discrete condenser is nodally exact, so convergence
    studies should ask for grading="linear" instead.
    """
    if n_t is None:
        n_t = 144
    span = np.log(1.0 / a)
    if n_r is None:
        n_r = max(4, int(round(span / (2 * np.pi / n_t))))
    if grading == "linear":
        radii = np.linspace(a, 1.0, n_r + 1)
    else:
        radii = np.exp(np.linspace(np.log(a), 0.0, n_r + 1))
    mesh = _rings_to_mesh([_circle(r, n_t) for r in radii])
    mesh.marked["inner_ring_start"] = 0
    return mesh


def annulus_boundary_loops(mesh, n_t=None):
    """(inner, outer) vertex index arrays by radius extremes."""
    r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
    rin, rout = r.min(), r.max()
    inner = np.where(np.abs(r - rin) < 1e-9 * (1 + rin))[0]
    outer = np.where(np.abs(r - rout) < 1e-9 * (1 + rout))[0]
    return inner, outer


def disc_mesh(radius=1.0, n_r=8, n_t=24):
    """Flat disc with a center fan."""
    radii = radius * np.arange(1, n_r + 1) / n_r
    rings = [_circle(r, n_t) for r in radii]
    verts = np.vstack([np.zeros((1, 3))] + rings)
    faces = []
    for i in range(n_t):
        j = (i + 1) % n_t
        faces.append((0, 1 + j, 1 + i))
    for k in range(n_r - 1):
        faces.extend(_ring_strip_faces(1 + k * n_t, 1 + (k + 1) * n_t, n_t))
    return SurfaceMesh(vertices=verts, faces=np.array(faces, dtype=int))


def punctured_plane_mesh(r_outer, n_t=96, n_r=None, r_inner=1.0):
    """Flat annulus r_inner <= r <= r_outer; exhaustion surrogate for the
    plane minus a disc.  Radii land exactly on the geometric grid, so a
    base point like r = e is an actual vertex when r_outer = e^k."""
    span = np.log(r_outer / r_inner)
    if n_r is None:
        n_r = max(4, int(round(span / (2 * np.pi / n_t))))
    radii = r_inner * np.exp(np.linspace(0.0, span, n_r + 1))
    return _rings_to_mesh([_circle(r, n_t) for r in radii])


def cylinder_mesh(length, radius=1.0, n_t=48, n_s=None):
    """Cylinder of revolution, rings uniform along the axis."""
    if n_s is None:
        n_s = max(2, int(round(length / (2 * np.pi * radius / n_t))))
    heights = np.linspace(0.0, length, n_s + 1)
    return _rings_to_mesh([_circle(radius, n_t, z=h) for h in heights])


def trumpet_mesh(s_max, n_t=48, n_s=None):
    """Truncated exponential trumpet, realized in its conformal class.

    The abstract metric ds^2 + e^{2s} dtheta^2 on [0, S] x S^1 is
    conformal to a unit cylinder of height 1 - e^{-S}; we mesh that
    embedded cylinder, so capacities agree with the modulus integral
    of the trumpet profile while staying honestly induced-metric.
    """
    height = 1.0 - np.exp(-s_max)
    if n_s is None:
        n_s = max(2, int(round(height / (2 * np.pi / n_t))) + 2)
    heights = np.linspace(0.0, height, n_s + 1)
    return _rings_to_mesh([_circle(1.0, n_t, z=h) for h in heights])


def cylinder_boundary_loops(mesh):
    """(bottom, top) vertex index arrays by axial extremes."""
    z = mesh.vertices[:, 2]
    lo, hi = z.min(), z.max()
    bottom = np.where(np.abs(z - lo) < 1e-12 + 1e-9 * abs(lo))[0]
    top = np.where(np.abs(z - hi) < 1e-12 + 1e-9 * abs(hi))[0]
    return bottom, top


def icosphere(level=1):
    """Subdivided icosahedron on the unit sphere: 10*4^level + 2 vertices."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=int,
    )
    for _ in range(level):
        verts, faces = _sphere_subdivide(verts, faces)
    return SurfaceMesh(vertices=verts, faces=faces)


def _sphere_subdivide(verts, faces):
    verts = [v for v in verts]
    cache = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache:
            m = verts[a] + verts[b]
            m = m / np.linalg.norm(m)
            cache[key] = len(verts)
            verts.append(m)
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return np.array(verts), np.array(out, dtype=int)


def one_holed_torus_mesh(n_u=24, n_v=12, R=2.0, r=0.8):
    """Torus grid with one vertex star removed: chi = -1, one boundary loop."""
    verts = []
    for i in range(n_u):
        u = 2 * np.pi * i / n_u
        for j in range(n_v):
            v = 2 * np.pi * j / n_v
            verts.append(
                (
                    (R + r * np.cos(v)) * np.cos(u),
                    (R + r * np.cos(v)) * np.sin(u),
                    r * np.sin(v),
                )
            )

    def vid(i, j):
        return (i % n_u) * n_v + (j % n_v)

    faces = []
    for i in range(n_u):
        for j in range(n_v):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i, j + 1), vid(i + 1, j + 1)
            faces.append((a, b, d))
            faces.append((a, d, c))
    hole = vid(0, 0)
    faces = [f for f in faces if hole not in f]
    # drop the now-isolated vertex and reindex
    keep = np.ones(n_u * n_v, dtype=bool)
    keep[hole] = False
    remap = np.cumsum(keep) - 1
    verts = np.array(verts)[keep]
    faces = np.array([[remap[i] for i in f] for f in faces], dtype=int)
    return SurfaceMesh(vertices=verts, faces=faces)


def nearest_vertex(mesh, point):
    point = np.asarray(point, dtype=float)
    d = np.linalg.norm(mesh.vertices - point[None, :], axis=1)
    return int(np.argmin(d))
