"""Vector-field sections over plane families and their topological checks.

For each plane through a target point, the condenser (or log-singular)
potential on the traced preimage surface yields a vector s(p) in the
plane; over the icosphere family this is a tangent field on S^2 whose
index sum is forced to 2, and over the conjugation-invariant line
family on RP^1 the sign parity is forced odd.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import harmonic
from .mesh import mesh_topology
from .tracing import Plane, TraceError, trace_preimage, mark_condenser_boundaries


@dataclass
class PlaneFamily:
    kind: str  # icosphere | rp1 | explicit
    samples: np.ndarray  # (m, n) parameter points
    planes: list
    adjacency: np.ndarray  # triangles (icosphere) or consecutive pairs (rp1)
    level: int | None = None
    antipode: np.ndarray | None = None  # sample index of -p, icosphere only


def _plane_basis_from_normal(p):
    """Deterministic tangent basis: Gram-Schmidt against +z, else +x near poles."""
    p = np.asarray(p, dtype=float)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(p @ ref) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    u1 = ref - (ref @ p) * p
    u1 = u1 / np.linalg.norm(u1)
    u2 = np.cross(p, u1)
    return np.vstack([u1, u2])


def sample_tangent_planes(level, point=None):
    """Tangent-plane family of the unit icosphere: plane normal p per vertex."""
    if level > 4:
        raise ValueError("icosphere level capped at 4")
    from .model_surfaces import icosphere

    sphere = icosphere(level)
    pts = sphere.vertices
    point = np.zeros(3) if point is None else np.asarray(point, dtype=float)
    planes = []
    for p in pts:
        basis = _plane_basis_from_normal(p)
        planes.append(Plane(point, basis, p[None, :]))
    d = pts @ pts.T
    antipode = np.argmin(d, axis=1)
    if np.abs(pts + pts[antipode]).max() > 1e-9:
        raise RuntimeError("icosphere vertex set is not antipodally symmetric")
    return PlaneFamily(
        kind="icosphere",
        samples=pts,
        planes=planes,
        adjacency=sphere.faces,
        level=level,
        antipode=antipode,
    )


def sample_rp1_lines(m=64):
    """Conjugation-invariant lines l(theta) = R(cos t, sin t), t = j pi / m."""
    theta = np.pi * np.arange(m) / m
    dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    pairs = np.column_stack([np.arange(m), (np.arange(m) + 1) % m])
    return PlaneFamily(
        kind="rp1", samples=theta, planes=[d for d in dirs], adjacency=pairs
    )


@dataclass
class SectionField:
    family: PlaneFamily
    vectors: np.ndarray  # (m, n); zero rows where status != ok
    statuses: list  # ok | trace-failed | ends-not-disc | solver-failed
    provenance: dict
    details: list = field(default_factory=list)  # per-sample record dicts

    def ok_mask(self):
        return np.array([s == "ok" for s in self.statuses])

    def tangency_errors(self):
        errs = np.zeros(len(self.statuses))
        for i, (pl, s) in enumerate(zip(self.family.planes, self.vectors)):
            if self.statuses[i] != "ok":
                continue
            nrm = np.linalg.norm(s)
            if nrm > 0 and hasattr(pl, "normals"):
                errs[i] = np.abs(pl.normals @ s).max() / nrm
        return errs


def _project_to_plane(plane, v):
    v = np.asarray(v, dtype=float)
    resid = plane.normals @ v
    return v - plane.normals.T @ resid, float(np.abs(resid).max())


def _condenser_sample(mapping, q, p1, p2, p3, plane, params):
    radius = params.get("radius", 6.0)
    h = params.get("h", 0.3)
    window = params.get("window", 0.9)
    direct = params.get("direct")
    try:
        if direct is not None:
            mesh, loop0, loop1, v3 = direct(plane)
        else:
            mesh = trace_preimage(
                mapping, plane, [p1, p2, p3], radius=radius, h=h,
                max_vertices=params.get("max_vertices", 60000),
            )
            patches = mark_condenser_boundaries(mesh, mapping, [p1, p2], window)
            loop0, loop1 = patches
            v3 = int(np.argmin(np.linalg.norm(mesh.vertices - p3, axis=1)))
            if np.linalg.norm(mesh.vertices[v3] - p3) > max(h, window):
                return "ends-not-disc", np.zeros(mapping.dim), {
                    "reason": "third fiber point not on any traced component"
                }
            rep = mesh_topology(mesh)
            for comp in rep.components:
                if comp.genus not in (0, None):
                    return "ends-not-disc", np.zeros(mapping.dim), {
                        "reason": f"component {comp.label} has genus {comp.genus}"
                    }
    except TraceError as exc:
        return "trace-failed", np.zeros(mapping.dim), {"reason": str(exc)}
    try:
        fld = harmonic.solve_condenser(mesh, loop0, loop1)
        grad = harmonic.gradient_at(fld, v3)
    except harmonic.HarmonicSolveError as exc:
        return "solver-failed", np.zeros(mapping.dim), {"reason": str(exc)}
    s_raw = mapping.jacobian_matrix(mesh.vertices[v3]) @ grad
    s, resid = _project_to_plane(plane, s_raw)
    return "ok", s, {
        "projection_residual": resid,
        "capacity": harmonic.capacity(fld),
        "n_vertices": mesh.n_vertices,
    }


def _check_fiber_points(mapping, q, points, tol=1e-8):
    q = np.asarray(q, dtype=float)
    for p in points:
        r = np.linalg.norm(mapping.evaluate(np.asarray(p, dtype=float)) - q)
        if r > tol * (1 + np.linalg.norm(q)):
            raise ValueError(f"point {p} is not in the fiber over {q} (residual {r:g})")
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if np.linalg.norm(np.asarray(points[i]) - np.asarray(points[j])) < 1e-8:
                raise ValueError("fiber points must be pairwise distinct")


def build_condenser_section(mapping, q, p1, p2, p3, family, params=None):
    """Section s(p) = DF(p3) grad u(p3) of the condenser between p1 and p2.

    Antipodal icosphere samples share one plane; the pipeline runs once
    per unique plane and the result is assigned to both samples.
    """
    if p1 is None or p2 is None or p3 is None:
        raise ValueError("the condenser section needs three fiber points")
    params = dict(params or {})
    _check_fiber_points(mapping, q, [p1, p2, p3])
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    m = len(family.planes)
    reps = _unique_plane_representatives(family)
    jobs = int(params.get("jobs", 1))

    def work(i):
        return _condenser_sample(mapping, q, p1, p2, p3, family.planes[i], params)

    results = _run_tasks(work, reps, jobs)
    vectors = np.zeros((m, mapping.dim))
    statuses = [None] * m
    details = [None] * m
    for i in range(m):
        r = i if i in results else int(family.antipode[i])
        status, s, detail = results[r]
        vectors[i] = s
        statuses[i] = status
        details[i] = dict(detail, computed_at=r)
    return SectionField(
        family=family,
        vectors=vectors,
        statuses=statuses,
        provenance={
            "kind": "condenser",
            "fiber_points": [p1.tolist(), p2.tolist(), p3.tolist()],
            "q": np.asarray(q, dtype=float).tolist(),
            "params": {k: v for k, v in params.items() if k != "direct"},
        },
        details=details,
    )


def _unique_plane_representatives(family):
    if family.kind == "icosphere" and family.antipode is not None:
        return [i for i in range(len(family.planes)) if i <= family.antipode[i]]
    return list(range(len(family.planes)))


def _run_tasks(work, indices, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(work, indices))
    else:
        out = [work(i) for i in indices]
    return dict(zip(indices, out))


def _log_sample(mapping, q, a, b, plane, params):
    radii = params.get("radii", (4.0, 6.0, 8.0))
    h = params.get("h", 0.3)
    window = params.get("window", 0.9)
    direct = params.get("direct")
    try:
        meshes, inners, outers, bases = [], [], [], []
        for radius in radii:
            if direct is not None:
                mesh, inner, outer, vb = direct(plane, radius)
            else:
                mesh = trace_preimage(
                    mapping, plane, [a, b], radius=radius, h=h,
                    max_vertices=params.get("max_vertices", 60000),
                )
                (inner,) = mark_condenser_boundaries(mesh, mapping, [a], window)
                outer = mesh.marked["frozen"]
                if len(outer) == 0:
                    return "trace-failed", np.zeros(mapping.dim), {
                        "reason": "no truncation boundary; radius too large?"
                    }
                vb = int(np.argmin(np.linalg.norm(mesh.vertices - b, axis=1)))
            meshes.append(mesh)
            inners.append(inner)
            outers.append(outer)
            bases.append(vb)
    except TraceError as exc:
        return "trace-failed", np.zeros(mapping.dim), {"reason": str(exc)}
    try:
        res = harmonic.solve_log_normalized(meshes, inners, outers, bases, radii)
        ctype = harmonic.conformal_type(meshes, inners, outers, radii)
    except harmonic.HarmonicSolveError as exc:
        return "solver-failed", np.zeros(mapping.dim), {"reason": str(exc)}
    xb = meshes[-1].vertices[bases[-1]]
    s_raw = mapping.jacobian_matrix(xb) @ res.gradient_at_base
    s, resid = _project_to_plane(plane, s_raw)
    return "ok", s, {
        "projection_residual": resid,
        "convergence": res.gradient_cauchy_differences,
        "conformal_type": ctype.verdict,
        "capacities": ctype.capacities,
    }


def build_log_section(mapping, q, a, b, family, params=None):
    """Section s(p) = DF(b) grad u~(b) of the normalized exhaustion field."""
    if a is None or b is None:
        raise ValueError("the log section needs two fiber points")
    params = dict(params or {})
    _check_fiber_points(mapping, q, [a, b])
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    m = len(family.planes)
    reps = _unique_plane_representatives(family)
    jobs = int(params.get("jobs", 1))

    def work(i):
        return _log_sample(mapping, q, a, b, family.planes[i], params)

    results = _run_tasks(work, reps, jobs)
    vectors = np.zeros((m, mapping.dim))
    statuses = [None] * m
    details = [None] * m
    for i in range(m):
        r = i if i in results else int(family.antipode[i])
        status, s, detail = results[r]
        vectors[i] = s
        statuses[i] = status
        details[i] = dict(detail, computed_at=r)
    return SectionField(
        family=family,
        vectors=vectors,
        statuses=statuses,
        provenance={
            "kind": "log",
            "fiber_points": [a.tolist(), b.tolist()],
            "q": np.asarray(q, dtype=float).tolist(),
            "params": {k: v for k, v in params.items() if k != "direct"},
        },
        details=details,
    )


def continuity_diagnostic(fld: SectionField, refined: SectionField | None = None):
    """Max deviation of the section between adjacent samples, plus trend."""
    fam = fld.family
    ok = fld.ok_mask()
    if fam.kind == "icosphere":
        edges = set()
        for tri in fam.adjacency:
            for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                edges.add(tuple(sorted(map(int, e))))
        pairs = sorted(edges)
    else:
        pairs = [tuple(map(int, p)) for p in fam.adjacency]

    def stats(f):
        max_angle, max_jump = 0.0, 0.0
        for i, j in pairs:
            si, sj = f.vectors[i], f.vectors[j]
            ni, nj = np.linalg.norm(si), np.linalg.norm(sj)
            if ni < 1e-300 or nj < 1e-300:
                continue
            ang = np.degrees(np.arccos(np.clip(si @ sj / (ni * nj), -1, 1)))
            max_angle = max(max_angle, ang)
            max_jump = max(max_jump, abs(ni - nj) / max(ni, nj))
        return max_angle, max_jump

    if not ok.all():
        return {
            "complete": False,
            "n_failed": int((~ok).sum()),
            "verdict": None,
        }
    max_angle, max_jump = stats(fld)
    out = {
        "complete": True,
        "max_adjacent_angle_deg": max_angle,
        "max_relative_jump": max_jump,
    }
    if refined is not None and refined.ok_mask().all():
        ra, rj = stats(refined)
        out["refined_max_adjacent_angle_deg"] = ra
        out["trend"] = "decreasing" if ra <= max_angle + 1e-12 else "not-decreasing"
    return out


# -- index computations on S^2 -----------------------------------------


def _sphere_transport(v, p, q):
    """Parallel transport of tangent vector v along the geodesic p -> q."""
    denom = 1.0 + p @ q
    return v - (v @ q) / denom * (p + q)


def _spherical_area(a, b, c):
    num = a @ np.cross(b, c)
    den = 1.0 + a @ b + b @ c + c @ a
    return 2.0 * np.arctan2(num, den)


@dataclass
class IndexReport:
    zero_faces: list  # (face index, winding)
    index_sum: int | None
    windings: np.ndarray
    flags: list
    level: int | None


def _edge_angle(pts, vecs, i, j):
    """Signed turning from v_i to v_j along edge (i, j), at p_j."""
    pi, pj = pts[i], pts[j]
    vi = _sphere_transport(vecs[i], pi, pj)
    vj = vecs[j]
    return np.arctan2(pj @ np.cross(vi, vj), vi @ vj)


def _face_winding(pts, vecs, tri, edge_angles):
    """Net turning of the field direction around one spherical triangle.

    Each undirected edge's angle is computed once and negated for the
    opposite orientation, so the edge terms cancel exactly over a
    closed triangulation and the windings always total chi = 2.
    """
    total = 0.0
    for t in range(3):
        i, j = int(tri[t]), int(tri[(t + 1) % 3])
        if (i, j) in edge_angles:
            total += edge_angles[(i, j)]
        elif (j, i) in edge_angles:
            total -= edge_angles[(j, i)]
        else:
            edge_angles[(i, j)] = _edge_angle(pts, vecs, i, j)
            total += edge_angles[(i, j)]
    total += _spherical_area(pts[tri[0]], pts[tri[1]], pts[tri[2]])
    return total / (2 * np.pi)


def index_sum(fld: SectionField, field_fn=None, seed=0, max_subdivide=3):
    """Poincare-Hopf bookkeeping for a tangent field sampled on the icosphere.

    Faces with nonzero winding are the detected zeros.  Non-integer
    windings are re-resolved by subdividing the offending face when a
    callable field is available, else flagged, and a sum different from
    2 always raises the resolution flag, never a silent pass.
    """
    fam = fld.family
    if fam.kind != "icosphere":
        raise ValueError("index_sum needs an icosphere family")
    if not fld.ok_mask().all():
        raise ValueError("index_sum needs a complete field; filter failed runs first")
    pts = fam.samples
    vecs = fld.vectors.copy()
    flags = []
    rng = np.random.default_rng(seed)
    norms = np.linalg.norm(vecs, axis=1)
    tiny = 1e-10 * max(norms.max(), 1e-300)
    for i in np.where(norms <= tiny)[0]:
        # zero on a sample: nudge tangentially and retry
        t = _plane_basis_from_normal(pts[i])
        vecs[i] = vecs[i] + (10 * tiny + 1e-12) * (t.T @ rng.standard_normal(2))
        flags.append(f"sample {i} vanished; perturbed")

    edge_angles = {}
    windings = np.array(
        [_face_winding(pts, vecs, tri, edge_angles) for tri in fam.adjacency]
    )
    zero_faces = []
    idx_sum = 0
    for f, w in enumerate(windings):
        k = int(np.round(w))
        if abs(w - k) > 0.05:
            resolved = False
            if field_fn is not None:
                k2, ok2 = _subdivided_winding(
                    pts[fam.adjacency[f]], field_fn, max_subdivide
                )
                if ok2:
                    k, resolved = k2, True
            if not resolved:
                flags.append(
                    f"face {f} winding {w:.3f} not integral; resolution insufficient"
                )
        if k != 0:
            zero_faces.append((int(f), k))
        idx_sum += k
    if idx_sum != 2:
        flags.append(
            f"index sum {idx_sum} != 2; unresolved zeros, resolution insufficient"
        )
    return IndexReport(
        zero_faces=zero_faces,
        index_sum=idx_sum,
        windings=windings,
        flags=flags,
        level=fam.level,
    )


def _subdivided_winding(tri_pts, field_fn, rounds):
    """Re-evaluate a face winding on a refined boundary walk of the face."""
    a, b, c = (p / np.linalg.norm(p) for p in tri_pts)
    n = 2 ** max(rounds, 1)
    bary = (
        [(n - i, i, 0) for i in range(n)]
        + [(0, n - i, i) for i in range(n)]
        + [(i, 0, n - i) for i in range(n)]
    )
    pts = []
    for (x, y, z) in bary:
        p = (x * a + y * b + z * c) / n
        pts.append(p / np.linalg.norm(p))
    total = 0.0
    for i in range(len(pts)):
        p, q = pts[i], pts[(i + 1) % len(pts)]
        vp = field_fn(p)
        vq = field_fn(q)
        vp = vp - (vp @ p) * p
        vq = vq - (vq @ q) * q
        if np.linalg.norm(vp) < 1e-14 or np.linalg.norm(vq) < 1e-14:
            return 0, False
        vt = _sphere_transport(vp, p, q)
        total += np.arctan2(q @ np.cross(vt, vq), vt @ vq)
    area = sum(
        _spherical_area(pts[0], pts[i], pts[i + 1]) for i in range(1, len(pts) - 1)
    )
    w = (total + area) / (2 * np.pi)
    if abs(w - np.round(w)) <= 0.05:
        return int(np.round(w)), True
    return 0, False


# -- chart winding and the tautological bundle -------------------------


def chart_winding(fn, n_samples=256, radius=1.0):
    """Winding number around 0 of a complex-valued function on a circle."""
    theta = 2 * np.pi * np.arange(n_samples + 1) / n_samples
    vals = np.array([fn(radius * np.exp(1j * t)) for t in theta])
    if np.abs(vals).min() < 1e-14:
        raise ValueError("function vanishes on the sampling circle")
    args = np.angle(vals)
    d = np.diff(args)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(np.round(d.sum() / (2 * np.pi)))


def tautological_euler(n_samples=256):
    """Euler number of the tautological line bundle over CP^1.

    The global section alpha -> (1, alpha) reads, in the chart around
    the south pole, as the coefficient function zeta -> conj(zeta) /
    |zeta|^2 against the local frame; its winding at 0 is the answer.
    """
    return chart_winding(lambda z: np.conj(z) / abs(z) ** 2, n_samples=n_samples)


# -- RP^1 parity -------------------------------------------------------


def rp1_parity(fld: SectionField, tol=1e-8):
    """Sign-change parity of a section of the real tautological bundle.

    Coefficients are taken against the continuously rotating basis
    (cos t, sin t); the loop closes through the Mobius flip (the basis
    at t = pi is minus the basis at t = 0), so a nonvanishing section
    must change sign an odd number of times.
    """
    fam = fld.family
    if fam.kind != "rp1":
        raise ValueError("rp1_parity needs an rp1 family")
    theta = fam.samples
    dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    coeff = np.einsum("ij,ij->i", fld.vectors, dirs)
    # the section must live on the line: component off the line is an error
    off = fld.vectors - coeff[:, None] * dirs
    scale = np.linalg.norm(fld.vectors, axis=1).max() + 1e-300
    if (np.linalg.norm(off, axis=1) / scale > tol).any():
        raise ValueError("section leaves the sampled lines; reality violated")
    zeros = [int(i) for i in np.where(np.abs(coeff) <= tol * scale)[0]]
    if zeros:
        return {"parity": None, "zero_samples": zeros, "sign_changes": []}
    signs = np.sign(coeff)
    m = len(signs)
    changes = []
    for i in range(m - 1):
        if signs[i] != signs[i + 1]:
            changes.append((i, i + 1))
    # Mobius transition: compare the last sample against the flipped basis
    if signs[m - 1] != -signs[0]:
        changes.append((m - 1, 0))
    return {
        "parity": "odd" if len(changes) % 2 == 1 else "even",
        "zero_samples": [],
        "sign_changes": changes,
    }
