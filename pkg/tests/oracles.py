"""Independent closed-form and grid-extraction oracles shared by the tests.

Everything here is computed from first principles (classical potential
theory formulas, direct root solves, marching cubes on a dense grid) with
no calls into the library's own solvers, so test comparisons are honest.
"""

import numpy as np
from scipy import integrate
from skimage import measure

TAU = 2.0 * np.pi


# ---------------------------------------------------------------------------
# flat annulus a <= |z| <= 1

def annulus_potential(a, r):
    """Harmonic condenser potential, 0 at |z|=a, 1 at |z|=1."""
    return (np.log(a) - np.log(r)) / np.log(a)


def annulus_capacity(a):
    """Dirichlet energy of the annulus condenser potential."""
    return TAU / np.log(1.0 / a)


def annulus_gradient_magnitude(a, r):
    """|grad u| of the condenser potential at radius r."""
    return 1.0 / (r * np.log(1.0 / a))


# ---------------------------------------------------------------------------
# explicit fibers

def braun_fiber(c1, c2, ks=(-1, 0, 1)):
    """Solutions of e^x cos y = c1, e^x sin y = c2, z = 0."""
    x = 0.5 * np.log(c1 * c1 + c2 * c2)
    y0 = np.arctan2(c2, c1)
    return np.array([[x, y0 + TAU * k, 0.0] for k in ks])


def exp_c2_fiber(ks=(-1, 0, 1)):
    """Solutions of (e^{z1}, z2) = (1, 1) with the realified layout."""
    return np.array([[0.0, TAU * k, 1.0, 0.0] for k in ks])


def braun_sheet_x(t):
    """x coordinate along the k-th braun sheet over the segment (t, 1, 0)."""
    return 0.5 * np.log(t * t + 1.0)


# ---------------------------------------------------------------------------
# revolution surfaces

def revolution_modulus(r_of_s, s0, s1):
    """Conformal modulus of a surface of revolution, integral ds/(2 pi r)."""
    val, _ = integrate.quad(lambda s: 1.0 / (TAU * r_of_s(s)), s0, s1)
    return val


def cylinder_modulus(length):
    return length / TAU


def flat_annulus_modulus(r_outer):
    # planar annulus 1 < r < R parametrized by arclength of log r
    return np.log(r_outer) / TAU


def trumpet_modulus(s_max):
    return revolution_modulus(lambda s: np.exp(s), 0.0, s_max)


# ---------------------------------------------------------------------------
# marching-cubes grid extraction of a plane preimage in R^3

def grid_extraction(mapping, plane, radius, n=64):
    """Mesh {w . (F(x) - q) = 0} inside the ball by marching cubes.

    Returns (vertices, faces) with faces clipped to the ball.  Completely
    independent of the advancing-front tracer.
    """
    w = plane.normals[0]
    q = plane.point
    lin = np.linspace(-radius, radius, n)
    X, Y, Z = np.meshgrid(lin, lin, lin, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    vals = np.array([w @ (mapping.evaluate(p) - q) for p in pts])
    vol = vals.reshape(n, n, n)
    spacing = (lin[1] - lin[0],) * 3
    verts, faces, _, _ = measure.marching_cubes(vol, 0.0, spacing=spacing)
    verts = verts + np.array([lin[0]] * 3)
    keep = np.linalg.norm(verts, axis=1) <= radius
    faces = faces[keep[faces].all(axis=1)]
    return verts, faces


def seeded_component_stats(verts, faces, seeds, tol):
    """(component count, boundary loop counts) over components near seeds.

    A component counts if it contains a vertex within tol of some seed.
    Boundary loops are counted as connected components of the boundary
    edge graph, which is robust to the jagged clip boundary.
    """
    n = len(verts)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
    labels = np.array([find(i) for i in range(n)])

    hit = set()
    for s in seeds:
        d = np.linalg.norm(verts - np.asarray(s), axis=1)
        i = int(np.argmin(d))
        if d[i] <= tol:
            hit.add(labels[i])
    if not hit:
        return 0, []

    from collections import Counter
    edge_count = Counter()
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            edge_count[(min(u, v), max(u, v))] += 1
    boundary = [e for e, k in edge_count.items() if k == 1]

    loops = []
    for lab in sorted(hit):
        bedges = [e for e in boundary if labels[e[0]] == lab]
        if not bedges:
            loops.append(0)
            continue
        bparent = {}
        for u, v in bedges:
            bparent.setdefault(u, u)
            bparent.setdefault(v, v)

        def bfind(i):
            while bparent[i] != i:
                bparent[i] = bparent[bparent[i]]
                i = bparent[i]
            return i

        for u, v in bedges:
            ru, rv = bfind(u), bfind(v)
            if ru != rv:
                bparent[ru] = rv
        loops.append(len({bfind(u) for u in bparent}))
    return len(hit), loops
