"""Fiber enumeration and path lifting for local diffeomorphisms.

enumerate_fiber runs multistart damped Newton from a low-discrepancy
start set; lift_path continues a target-space polyline through the map
by predictor (DF^{-1} tangent) and corrector (Newton) steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .maps import MapSpec

DEFAULT_TOL = 1e-10
MAX_NEWTON_ITERS = 100


@dataclass
class FiberReport:
    map_name: str
    target: np.ndarray
    box: np.ndarray
    points: list
    residuals: list
    dedup_radius: float
    n_starts: int
    converged: int
    diverged: int
    seed: int
    tol: float


@dataclass
class LiftedPath:
    target_path: np.ndarray
    lifted_path: np.ndarray
    status: str  # complete | escaped-box | step-failure
    failure_location: np.ndarray | None = None


def _newton_solve(mapspec, q, x0, tol, box=None, max_iters=MAX_NEWTON_ITERS):
    """Damped Newton with Armijo backtracking on 0.5||F(x)-q||^2.

    Returns (x, converged).  Divergence is declared on iteration budget,
    a singular Jacobian, or escape from twice the search box.
    """
    x = np.array(x0, dtype=float)
    if box is not None:
        center = 0.5 * (box[:, 0] + box[:, 1])
        half = box[:, 1] - box[:, 0]  # 2x box around the center
    with np.errstate(over="ignore", invalid="ignore"):
        r = mapspec.evaluate(x) - q
        phi = 0.5 * float(r @ r)
        for _ in range(max_iters):
            if np.sqrt(2 * phi) <= tol:
                return x, True
            try:
                d = np.linalg.solve(mapspec.jacobian_matrix(x), -r)
            except np.linalg.LinAlgError:
                return x, False
            if not np.all(np.isfinite(d)):
                return x, False
            t = 1.0
            for _ in range(40):
                r_new = mapspec.evaluate(x + t * d) - q
                phi_new = 0.5 * float(r_new @ r_new)
                if np.isfinite(phi_new) and phi_new <= (1.0 - 1e-4 * t) * phi:
                    break
                t *= 0.5
            else:
                return x, False
            x = x + t * d
            r, phi = r_new, phi_new
            if box is not None and np.any(np.abs(x - center) > half):
                return x, False
        return x, np.sqrt(2 * phi) <= tol


def enumerate_fiber(
    mapspec: MapSpec,
    q,
    box,
    n_starts=512,
    tol=DEFAULT_TOL,
    dedup_radius=None,
    seed=0,
) -> FiberReport:
    """Enumerate F^{-1}(q) inside a box by multistart damped Newton.

    Deterministic given the seed.  Non-convergence only lowers recall;
    every reported point re-verifies its residual against tol.
    """
    q = np.asarray(q, dtype=float)
    box = np.asarray(box, dtype=float)
    n = mapspec.dim
    if q.shape != (n,) or box.shape != (n, 2):
        raise ValueError("target/box dimension mismatch")
    diam = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    if dedup_radius is None:
        dedup_radius = 1e-6 * diam

    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    starts = qmc.scale(sampler.random(n_starts), box[:, 0], box[:, 1])

    roots = []
    converged = diverged = 0
    for x0 in starts:
        x, ok = _newton_solve(mapspec, q, x0, tol, box=box)
        if ok and np.all(x >= box[:, 0]) and np.all(x <= box[:, 1]):
            converged += 1
            roots.append(x)
        else:
            diverged += 1

    roots.sort(key=lambda p: tuple(p))
    points, residuals = [], []
    for x in roots:
        if any(np.linalg.norm(x - p) < dedup_radius for p in points):
            continue
        res = float(np.linalg.norm(mapspec.evaluate(x) - q))
        if res <= tol:
            points.append(x)
            residuals.append(res)

    return FiberReport(
        map_name=mapspec.name,
        target=q,
        box=box,
        points=points,
        residuals=residuals,
        dedup_radius=dedup_radius,
        n_starts=n_starts,
        converged=converged,
        diverged=diverged,
        seed=seed,
        tol=tol,
    )


def _densify(path, step):
    """Subdivide a polyline so no segment exceeds the given step length."""
    nodes = [np.asarray(path[0], dtype=float)]
    for a, b in zip(path[:-1], path[1:]):
        a, b = np.asarray(a, float), np.asarray(b, float)
        seg = np.linalg.norm(b - a)
        k = max(1, int(np.ceil(seg / step)))
        for i in range(1, k + 1):
            nodes.append(a + (b - a) * (i / k))
    return np.array(nodes)


def lift_path(
    mapspec: MapSpec,
    start_point,
    target_path,
    step=0.05,
    tol=DEFAULT_TOL,
    max_norm=None,
) -> LiftedPath:
    """Lift a target-space polyline through F starting at a known preimage.

    Predictor: x += DF(x)^{-1} dq.  Corrector: Newton to F(x) = q_next.
    A singular Jacobian along the lift yields status "step-failure" with
    the last good location; exceeding max_norm yields "escaped-box".
    """
    start = np.asarray(start_point, dtype=float)
    targets = _densify(np.asarray(target_path, dtype=float), step)
    if np.linalg.norm(mapspec.evaluate(start) - targets[0]) > max(tol, 1e-8):
        raise ValueError("start_point is not a preimage of the path start")

    lifted = [start.copy()]
    x = start.copy()
    for q_prev, q_next in zip(targets[:-1], targets[1:]):
        try:
            dx = np.linalg.solve(mapspec.jacobian_matrix(x), q_next - q_prev)
        except np.linalg.LinAlgError:
            return LiftedPath(targets[: len(lifted)], np.array(lifted),
                              "step-failure", failure_location=x)
        x_pred = x + dx
        x_new, ok = _newton_solve(mapspec, q_next, x_pred, tol, max_iters=30)
        # keep the corrector local: a giant jump means we left the sheet
        if not ok or np.linalg.norm(x_new - x) > 50 * (np.linalg.norm(dx) + step):
            return LiftedPath(targets[: len(lifted)], np.array(lifted),
                              "step-failure", failure_location=x)
        x = x_new
        lifted.append(x.copy())
        if max_norm is not None and np.linalg.norm(x) > max_norm:
            return LiftedPath(targets[: len(lifted)], np.array(lifted),
                              "escaped-box")
    return LiftedPath(targets, np.array(lifted), "complete")


@dataclass
class AffineSubspace:
    """Affine subspace q0 + span(basis) of R^n; basis rows orthonormal."""

    base: np.ndarray
    basis: np.ndarray  # (d, n)

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        gram = self.basis @ self.basis.T
        if not np.allclose(gram, np.eye(len(self.basis)), atol=1e-10):
            raise ValueError("basis rows must be orthonormal")

    def project(self, y):
        rel = np.asarray(y, float) - self.base
        return self.base + self.basis.T @ (self.basis @ rel)

    def contains(self, y, tol=1e-8):
        return np.linalg.norm(np.asarray(y, float) - self.project(y)) <= tol


@dataclass
class ComponentSearchResult:
    verdict: str  # connected | not-found | disconnected-evidence
    path: np.ndarray | None = None
    attempts: int = 0
    detail: str = ""


def same_component(
    mapspec: MapSpec,
    subspace: AffineSubspace,
    p1,
    p2,
    budget=30,
    step=0.05,
    tol=1e-8,
    seed=0,
    component_labels=None,
) -> ComponentSearchResult:
    """Search for a lifted path between p1 and p2 inside F^{-1}(subspace).

    "connected" only comes with an explicit verified path.  Search
    failure alone never yields "disconnected": that verdict requires
    component labels from a full surface trace (component_labels maps
    the two points to labels that disagree).
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q1, q2 = mapspec.evaluate(p1), mapspec.evaluate(p2)
    for q in (q1, q2):
        if not subspace.contains(q, tol=1e-6):
            raise ValueError("endpoint does not map into the subspace")
    if np.linalg.norm(p1 - p2) <= tol:
        return ComponentSearchResult("connected", path=np.array([p1, p2]))
    if component_labels is not None:
        l1, l2 = component_labels
        if l1 != l2:
            return ComponentSearchResult(
                "disconnected-evidence", detail="traced component labels disagree"
            )

    def try_path(waypoints):
        path = [q1] + waypoints + [q2]
        lift = lift_path(mapspec, p1, np.array(path), step=step, tol=DEFAULT_TOL)
        if lift.status == "complete" and np.linalg.norm(lift.lifted_path[-1] - p2) <= max(
            tol, 1e-6
        ):
            return lift
        return None

    attempts = 0
    if np.linalg.norm(q1 - q2) > tol:
        attempts += 1
        lift = try_path([])
        if lift is not None:
            return ComponentSearchResult("connected", path=lift.lifted_path,
                                         attempts=attempts)

    rng = np.random.default_rng(seed)
    scale = 2.0 * (1.0 + np.linalg.norm(q1 - subspace.base))
    d = len(subspace.basis)
    while attempts < budget:
        attempts += 1
        n_way = int(rng.integers(2, 4))
        waypoints = [
            subspace.base + subspace.basis.T @ (scale * rng.standard_normal(d))
            for _ in range(n_way)
        ]
        lift = try_path(waypoints)
        if lift is not None:
            return ComponentSearchResult("connected", path=lift.lifted_path,
                                         attempts=attempts)
    return ComponentSearchResult("not-found", attempts=attempts,
                                 detail="no verified path within budget")
