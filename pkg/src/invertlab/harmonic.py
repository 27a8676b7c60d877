"""Discrete Laplace-Beltrami solver on embedded triangle meshes.

Cotangent weights from the induced metric, direct sparse Dirichlet
solves, condenser capacities, and the exhaustion-based conformal-type
classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class HarmonicSolveError(RuntimeError):
    pass


def cotangent_laplacian(mesh):
    """Sparse cotangent Laplacian L = D - W, w_ij = (cot a + cot b)/2.

    Edge lengths and angles come from the ambient embedding (the induced
    metric).  Returns (L, info); info counts negative off-diagonal
    weights, which a 15-degree minimum angle keeps rare but possible.
    """
    nv = mesh.n_vertices
    faces = mesh.faces
    p = mesh.vertices[faces]
    rows, cols, vals = [], [], []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        a = p[:, j] - p[:, i]
        b = p[:, k] - p[:, i]
        cross_sq = np.sum(a * a, axis=1) * np.sum(b * b, axis=1) - np.sum(
            a * b, axis=1
        ) ** 2
        cot = np.sum(a * b, axis=1) / np.sqrt(np.maximum(cross_sq, 1e-300))
        w = 0.5 * cot
        rows.extend([faces[:, j], faces[:, k]])
        cols.extend([faces[:, k], faces[:, j]])
        vals.extend([-w, -w])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    W = sp.csr_matrix((vals, (rows, cols)), shape=(nv, nv))
    L = W - sp.diags(np.asarray(W.sum(axis=1)).ravel())
    off = W.tocoo()
    negative_weights = int(np.sum(off.data > 0))  # stored as -w_ij
    return L.tocsr(), {"negative_weights": negative_weights}


@dataclass
class HarmonicField:
    mesh: object
    values: np.ndarray
    constrained: np.ndarray  # vertex indices
    constrained_values: np.ndarray
    boundary_condition: dict
    face_gradients: np.ndarray
    energy: float
    solve_residual: float
    laplacian: sp.csr_matrix = field(repr=False, default=None)


def _face_gradients(mesh, u):
    """Per-face gradient of the piecewise-linear interpolant, in R^n."""
    p = mesh.vertices[mesh.faces]
    uu = u[mesh.faces]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    # orthonormal frame in each face plane
    n1 = np.linalg.norm(e1, axis=1)
    f1 = e1 / np.maximum(n1, 1e-300)[:, None]
    e2p = e2 - np.sum(e2 * f1, axis=1)[:, None] * f1
    n2 = np.linalg.norm(e2p, axis=1)
    f2 = e2p / np.maximum(n2, 1e-300)[:, None]
    # local coords: p1 = (n1, 0), p2 = (<e2,f1>, n2)
    x2 = np.sum(e2 * f1, axis=1)
    du1 = (uu[:, 1] - uu[:, 0]) / np.maximum(n1, 1e-300)
    du2 = (uu[:, 2] - uu[:, 0] - x2 * du1) / np.maximum(n2, 1e-300)
    return du1[:, None] * f1 + du2[:, None] * f2


def solve_dirichlet(mesh, constraints, rel_residual=1e-10):
    """Solve the interior cotangent-Laplace system with fixed vertex values.

    constraints: dict vertex index -> value.  Direct SPD factorization
    with a least-squares fallback; the relative interior residual must
    meet rel_residual or the solve raises.
    """
    if not constraints:
        raise HarmonicSolveError("no constrained vertices")
    L, _ = cotangent_laplacian(mesh)
    nv = mesh.n_vertices
    fixed_idx = np.array(sorted(constraints), dtype=int)
    fixed_val = np.array([constraints[i] for i in fixed_idx], dtype=float)
    mask = np.zeros(nv, dtype=bool)
    mask[fixed_idx] = True
    free = np.where(~mask)[0]

    u = np.zeros(nv)
    u[fixed_idx] = fixed_val
    if len(free):
        A = L[np.ix_(free, free)].tocsc()
        rhs = -L[np.ix_(free, fixed_idx)] @ fixed_val
        try:
            u_free = spla.splu(A).solve(rhs)
        except RuntimeError as exc:
            raise HarmonicSolveError(f"singular interior system: {exc}") from exc
        u[free] = u_free
        res = np.linalg.norm(A @ u_free - rhs)
        scale = np.linalg.norm(rhs) + np.linalg.norm(A @ u_free) + 1e-30
        rel = res / scale
        if rel > rel_residual:
            u_free, info = spla.cg(A, rhs, x0=u_free, rtol=rel_residual / 10,
                                   maxiter=10000)
            u[free] = u_free
            rel = np.linalg.norm(A @ u_free - rhs) / scale
            if rel > rel_residual:
                raise HarmonicSolveError(f"interior residual {rel:g} too large")
    else:
        rel = 0.0

    energy = float(u @ (L @ u))
    return HarmonicField(
        mesh=mesh,
        values=u,
        constrained=fixed_idx,
        constrained_values=fixed_val,
        boundary_condition={"type": "dirichlet", "n_constrained": len(fixed_idx)},
        face_gradients=_face_gradients(mesh, u),
        energy=energy,
        solve_residual=float(rel),
        laplacian=L,
    )


def solve_condenser(mesh, loop0, loop1, rel_residual=1e-10):
    """Condenser field: u = 0 on loop0, u = 1 on loop1, harmonic inside.

    Unconstrained boundary loops (e.g. a truncation circle) get natural
    boundary conditions, the discrete surrogate for the removable
    punctures of the bounded harmonic problem.
    """
    loop0 = np.asarray(loop0, dtype=int)
    loop1 = np.asarray(loop1, dtype=int)
    if len(loop0) == 0 or len(loop1) == 0:
        raise HarmonicSolveError("condenser needs two non-empty boundary loops")
    if np.intersect1d(loop0, loop1).size:
        raise HarmonicSolveError("condenser loops overlap")
    constraints = {int(i): 0.0 for i in loop0}
    constraints.update({int(i): 1.0 for i in loop1})
    fld = solve_dirichlet(mesh, constraints, rel_residual=rel_residual)
    fld.boundary_condition = {
        "type": "condenser",
        "loop0": loop0.tolist(),
        "loop1": loop1.tolist(),
    }
    return fld


def capacity(fld: HarmonicField) -> float:
    """Dirichlet energy of the field; the condenser capacity for 0/1 data."""
    return fld.energy


def check_max_principle(fld: HarmonicField, strict=True):
    """Interior values must stay inside the constrained range.

    Returns (ok, detail).  strict additionally requires interior values
    strictly inside when the boundary data is non-constant.
    """
    mask = np.ones(fld.mesh.n_vertices, dtype=bool)
    mask[fld.constrained] = False
    if not mask.any():
        return True, "no interior vertices"
    lo, hi = fld.constrained_values.min(), fld.constrained_values.max()
    interior = fld.values[mask]
    eps = 1e-12 * (1 + abs(hi) + abs(lo))
    if interior.min() < lo - eps or interior.max() > hi + eps:
        return False, f"interior range [{interior.min()}, {interior.max()}] exceeds [{lo}, {hi}]"
    if strict and hi - lo > eps:
        if interior.min() <= lo + eps or interior.max() >= hi - eps:
            return False, "interior attains a boundary extreme"
    return True, "ok"


def _boundary_vertices(mesh):
    counts = mesh.directed_edge_counts()
    bdry = set()
    for (a, b), c in counts.items():
        if counts.get((b, a), 0) == 0:
            bdry.add(a)
            bdry.add(b)
    return bdry


def gradient_at(fld: HarmonicField, vertex, _boundary_cache=None):
    """Area-weighted average of incident face gradients, in R^n.

    Only defined at interior vertices with a full triangle fan.
    """
    mesh = fld.mesh
    bdry = _boundary_cache if _boundary_cache is not None else _boundary_vertices(mesh)
    if vertex in bdry:
        raise HarmonicSolveError(f"vertex {vertex} lies on the boundary")
    incident = np.where(np.any(mesh.faces == vertex, axis=1))[0]
    if len(incident) == 0:
        raise HarmonicSolveError(f"vertex {vertex} has no incident faces")
    areas = mesh.face_normals_areas()[incident]
    g = fld.face_gradients[incident]
    return (areas[:, None] * g).sum(axis=0) / areas.sum()


@dataclass
class LogNormalizedResult:
    field: HarmonicField  # rescaled solve on the largest mesh
    base_vertex: int
    raw_values_at_base: list
    gradient_at_base: np.ndarray
    gradient_cauchy_differences: list
    radii: list


def solve_log_normalized(meshes, inner_loops, outer_loops, base_vertices, radii=None):
    """Exhaustion surrogate for the normalized log-singular problem.

    For each truncation: solve u_R = 0 on the inner loop, 1 on the outer
    truncation loop, then rescale by the value at the marked vertex b so
    the rescaled field has value 1 there.  The Cauchy differences of the
    rescaled gradient at b across truncations are the convergence record.
    """
    if len(meshes) < 1:
        raise HarmonicSolveError("need at least one mesh in the exhaustion")
    grads, fields = [], []
    raw_at_base = []
    for mesh, inner, outer, b in zip(meshes, inner_loops, outer_loops, base_vertices):
        fld = solve_condenser(mesh, inner, outer)
        ub = fld.values[b]
        if abs(ub) < 1e-12:
            raise HarmonicSolveError("base vertex value vanishes; b too close to T")
        raw_at_base.append(float(ub))
        fld.values = fld.values / ub
        fld.face_gradients = fld.face_gradients / ub
        fld.energy = fld.energy / ub**2
        fld.constrained_values = fld.constrained_values / ub
        fld.boundary_condition["rescaled_by"] = float(ub)
        grads.append(gradient_at(fld, b))
        fields.append(fld)
    diffs = [
        float(np.linalg.norm(g2 - g1)) for g1, g2 in zip(grads[:-1], grads[1:])
    ]
    return LogNormalizedResult(
        field=fields[-1],
        base_vertex=int(base_vertices[-1]),
        raw_values_at_base=raw_at_base,
        gradient_at_base=grads[-1],
        gradient_cauchy_differences=diffs,
        radii=list(radii) if radii is not None else list(range(len(meshes))),
    )


@dataclass
class ConformalTypeReport:
    radii: list
    capacities: list
    moduli: list
    verdict: str  # parabolic | hyperbolic | inconclusive
    thresholds: dict
    extrapolated_capacity: float


def conformal_type(
    meshes,
    inner_loops,
    outer_loops,
    radii,
    plateau_rel=0.02,
    hyperbolic_floor=0.5,
    parabolic_capacity=0.15,
    monotonicity_slack=0.02,
):
    """Classify an exhaustion as parabolic/hyperbolic from its capacities.

    Parabolic: capacities keep decaying (positive fitted slope of
    1/capacity against log radius and a last step that still moves), or
    have already dropped below parabolic_capacity.  Hyperbolic:
    capacities plateau at or above hyperbolic_floor.
    """
    radii = list(radii)
    if len(radii) < 3:
        raise HarmonicSolveError("need at least 3 truncation radii")
    if any(r2 <= r1 for r1, r2 in zip(radii[:-1], radii[1:])):
        raise HarmonicSolveError("exhaustion radii must be strictly increasing")
    caps = []
    for mesh, inner, outer in zip(meshes, inner_loops, outer_loops):
        fld = solve_condenser(mesh, inner, outer)
        caps.append(capacity(fld))
    for c1, c2 in zip(caps[:-1], caps[1:]):
        if c2 > c1 * (1 + monotonicity_slack):
            raise HarmonicSolveError(
                f"capacities increase along the exhaustion: {caps}"
            )

    rel_change = (caps[-2] - caps[-1]) / caps[-2] if caps[-2] else 0.0
    inv = 1.0 / np.array(caps)
    slope = np.polyfit(np.log(radii), inv, 1)[0]

    if caps[-1] >= hyperbolic_floor and abs(rel_change) <= plateau_rel:
        verdict = "hyperbolic"
    elif caps[-1] < parabolic_capacity:
        verdict = "parabolic"
    elif slope > 0 and rel_change > plateau_rel:
        verdict = "parabolic"
    else:
        verdict = "inconclusive"

    # crude tail extrapolation of the capacity sequence
    if rel_change <= plateau_rel:
        extrapolated = caps[-1]
    else:
        extrapolated = max(0.0, caps[-1] - (caps[-2] - caps[-1]))
    return ConformalTypeReport(
        radii=radii,
        capacities=[float(c) for c in caps],
        moduli=[float(1.0 / c) if c else np.inf for c in caps],
        verdict=verdict,
        thresholds={
            "plateau_rel": plateau_rel,
            "hyperbolic_floor": hyperbolic_floor,
            "parabolic_capacity": parabolic_capacity,
        },
        extrapolated_capacity=float(extrapolated),
    )
