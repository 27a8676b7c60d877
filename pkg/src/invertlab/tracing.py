"""Advancing-front tracing of preimage surfaces.

The preimage of a 2-plane under a local diffeomorphism F is the zero
set of c(x) = W^T (F(x) - q), a 2-surface in R^n.  The tracer grows a
triangle mesh front by front from seed points, projecting new vertices
onto the surface by Gauss-Newton, and freezes the front where it meets
the truncation sphere |x| = R.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import SurfaceMesh


class TraceError(RuntimeError):
    pass


@dataclass
class Plane:
    """Affine 2-plane in R^m: point, orthonormal basis, orthonormal normals."""

    point: np.ndarray
    basis: np.ndarray  # (2, m)
    normals: np.ndarray  # (m - 2, m)

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.basis = np.asarray(self.basis, dtype=float)
        self.normals = np.asarray(self.normals, dtype=float)
        m = len(self.point)
        if self.basis.shape != (2, m) or self.normals.shape != (m - 2, m):
            raise ValueError("plane frame shapes do not match the ambient dim")
        frame = np.vstack([self.basis, self.normals])
        gram = frame @ frame.T
        if np.abs(gram - np.eye(m)).max() > 1e-12:
            raise ValueError("plane frame is not orthonormal")

    @classmethod
    def from_point_normals(cls, point, normals):
        point = np.asarray(point, dtype=float)
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        qmat, _ = np.linalg.qr(normals.T, mode="complete")
        normals_on = qmat[:, : len(normals)].T
        if np.trace(normals_on @ normals.T) < 0:
            normals_on = -normals_on
        basis = qmat[:, len(normals):].T
        return cls(point, basis, normals_on)

    @classmethod
    def from_point_basis(cls, point, basis):
        point = np.asarray(point, dtype=float)
        basis = np.asarray(basis, dtype=float)
        qmat, _ = np.linalg.qr(basis.T, mode="complete")
        return cls(point, qmat[:, :2].T, qmat[:, 2:].T)

    def contains(self, y, tol=1e-9):
        return bool(np.abs(self.normals @ (np.asarray(y) - self.point)).max() <= tol)


def surface_projector(mapping, plane, tol=1e-10, max_iters=50):
    """Callable projecting ambient points onto the preimage surface."""

    def project(x):
        x, ok = _gauss_newton(mapping, plane, np.asarray(x, dtype=float),
                              tol=tol, max_iters=max_iters)
        return x

    return project


def _constraint(mapping, plane, x):
    return plane.normals @ (mapping.evaluate(x) - plane.point)


def _constraint_jac(mapping, plane, x):
    return plane.normals @ mapping.jacobian_matrix(x)


def _gauss_newton(mapping, plane, x, tol=1e-10, max_iters=50, sphere_radius=None):
    """Project x onto c = 0, optionally intersected with |x| = R."""
    x = x.copy()
    scale = 1.0 + np.linalg.norm(plane.point)
    for _ in range(max_iters):
        c = _constraint(mapping, plane, x)
        if sphere_radius is not None:
            c = np.append(c, 0.5 * (x @ x - sphere_radius**2))
        if np.linalg.norm(c) <= tol * scale:
            return x, True
        J = _constraint_jac(mapping, plane, x)
        if sphere_radius is not None:
            J = np.vstack([J, x])
        try:
            step = J.T @ np.linalg.solve(J @ J.T, c)
        except np.linalg.LinAlgError:
            return x, False
        if not np.all(np.isfinite(step)):
            return x, False
        x = x - step
    c = _constraint(mapping, plane, x)
    if sphere_radius is not None:
        c = np.append(c, 0.5 * (x @ x - sphere_radius**2))
    return x, bool(np.linalg.norm(c) <= tol * scale)


def _tangent_frame(mapping, plane, x):
    """Orthonormal basis (2, n) of the surface tangent plane at x."""
    J = _constraint_jac(mapping, plane, x)
    _, _, vt = np.linalg.svd(J)
    return vt[-2:]


def _transport(frame, target_frame):
    """Rotate target_frame so it is the closest match to frame."""
    a = frame @ target_frame.T
    u, _, vt = np.linalg.svd(a)
    return (u @ vt) @ target_frame


class _Tracer:
    def __init__(self, mapping, plane, radius, h, tol, max_vertices):
        self.map = mapping
        self.plane = plane
        self.R = radius
        self.h = h
        self.tol = tol
        self.max_vertices = max_vertices
        self.verts = []
        self.frames = []
        self.frozen = []
        cap = max_vertices + 64
        n = len(plane.point)
        self._V = np.empty((cap, n))
        self._F = np.empty((cap, 2, n))
        self._Z = np.zeros(cap, dtype=bool)
        self.faces = []
        self.fronts = []  # lists of vertex ids, unmeshed side to the right
        self.adj = {}  # mesh-edge adjacency, vertex id -> set of ids
        self.banned = set()  # vertex pairs that already triggered surgery
        self.failures = {
            "projection": 0,
            "stuck": 0,
            "skipped_merge": 0,
            "seeds_skipped": 0,
        }

    def _add_face(self, a, b, c):
        self.faces.append((a, b, c))
        for u, v in ((a, b), (b, c), (c, a)):
            self.adj.setdefault(u, set()).add(v)
            self.adj.setdefault(v, set()).add(u)

    # -- vertex helpers -------------------------------------------------
    def _new_vertex(self, x, parent_frame=None):
        frame = _tangent_frame(self.map, self.plane, x)
        if parent_frame is not None:
            frame = _transport(parent_frame, frame)
        frozen = False
        if np.linalg.norm(x) >= self.R - 0.15 * self.h:
            xs, ok = _gauss_newton(self.map, self.plane, x, tol=self.tol,
                                   sphere_radius=self.R)
            if ok:
                x = xs
                frame = _transport(frame, _tangent_frame(self.map, self.plane, x))
            frozen = True
        self.verts.append(x)
        self.frames.append(frame)
        self.frozen.append(frozen)
        k = len(self.verts) - 1
        self._V[k] = x
        self._F[k] = frame
        self._Z[k] = frozen
        return k

    def _angle(self, front, i):
        """Opening angle toward the unmeshed region at front position i."""
        v = front[i]
        vp = front[i - 1]
        vn = front[(i + 1) % len(front)]
        fr = self.frames[v]
        dp = fr @ (self.verts[vp] - self.verts[v])
        dn = fr @ (self.verts[vn] - self.verts[v])
        if np.linalg.norm(dp) < 1e-14 or np.linalg.norm(dn) < 1e-14:
            return 2 * np.pi
        w = (np.arctan2(dn[1], dn[0]) - np.arctan2(dp[1], dp[0])) % (2 * np.pi)
        return w

    def _front_angles(self, front):
        """Opening angles for every front position at once."""
        idx = np.array(front)
        P = self._V[idx]
        F = self._F[idx]
        dp = np.einsum("nij,nj->ni", F, np.roll(P, 1, axis=0) - P)
        dn = np.einsum("nij,nj->ni", F, np.roll(P, -1, axis=0) - P)
        w = (np.arctan2(dn[:, 1], dn[:, 0])
             - np.arctan2(dp[:, 1], dp[:, 0])) % (2 * np.pi)
        bad = (np.einsum("ni,ni->n", dp, dp) < 1e-28) | (
            np.einsum("ni,ni->n", dn, dn) < 1e-28)
        w[bad] = 2 * np.pi
        w[self._Z[idx]] = np.inf
        return w

    # -- front surgery --------------------------------------------------
    def _excluded(self, v):
        """Vertices too entangled with v to count as a front collision."""
        out = {v}
        out |= self.adj.get(v, set())
        for front in self.fronts:
            n = len(front)
            for j, u in enumerate(front):
                if u == v:
                    for d in (-2, -1, 1, 2):
                        out.add(front[(j + d) % n])
        return out

    def _find_collision(self, front_idx, i):
        """Nearest front vertex too close to front[i], excluding neighbors."""
        v = self.fronts[front_idx][i]
        xv = self.verts[v]
        skip = self._excluded(v)
        nbr_v = self.adj.get(v, set())
        best = None
        best_d = 0.9 * self.h
        for fj, other in enumerate(self.fronts):
            diff = self._V[np.array(other)] - xv
            d = np.sqrt(np.einsum("ni,ni->n", diff, diff))
            for j in np.argsort(d, kind="stable"):
                if d[j] >= best_d:
                    break
                j = int(j)
                w = other[j]
                if w in skip or (nbr_v & self.adj.get(w, set())):
                    continue
                if frozenset((v, w)) in self.banned:
                    continue
                # tangent planes must roughly agree for a true collision
                det = np.linalg.det(self.frames[v] @ self.frames[w].T)
                if abs(det) < 0.5:
                    continue
                if det < 0:
                    self.failures["skipped_merge"] += 1
                    continue
                # the chord midpoint must land on the surface near both
                mid, ok = _gauss_newton(self.map, self.plane,
                                        0.5 * (xv + self.verts[w]), tol=self.tol)
                if not ok or max(
                    np.linalg.norm(mid - xv), np.linalg.norm(mid - self.verts[w])
                ) > 0.6 * self.h:
                    continue
                best_d = d[j]
                best = (fj, j)
        return best

    def _split(self, front_idx, i, j):
        front = self.fronts[front_idx]
        lo, hi = (i, j) if i < j else (j, i)
        f1 = front[lo:hi + 1]
        f2 = front[hi:] + front[:lo + 1]
        self.fronts[front_idx] = f1
        self.fronts.append(f2)

    def _merge(self, fa, i, fb, j):
        a, b = self.fronts[fa], self.fronts[fb]
        merged = a[:i + 1] + b[j:] + b[:j + 1] + a[i:]
        self.fronts[fa] = merged
        del self.fronts[fb]

    def _close_small(self):
        keep = []
        for front in self.fronts:
            if len(front) <= 2:
                continue
            if len(front) == 3:
                a, b, c = front
                self._add_face(a, c, b)
                continue
            if len(front) == 4:
                a, b, c, d = front
                self._add_face(a, c, b)
                self._add_face(a, d, c)
                continue
            keep.append(front)
        self.fronts = keep

    # -- meshing --------------------------------------------------------
    def seed(self, x0):
        """Start a hexagonal patch at x0; skip seeds on already-meshed surface."""
        x0 = np.asarray(x0, dtype=float)
        r0 = np.abs(_constraint(self.map, self.plane, x0)).max()
        if r0 > 1e-6 * (1.0 + np.linalg.norm(self.plane.point)):
            raise TraceError(f"seed residual too large: {r0:g} at {x0}")
        x, ok = _gauss_newton(self.map, self.plane, x0, tol=self.tol)
        if not ok:
            raise TraceError(f"seed {x0} does not project onto the surface")
        if np.linalg.norm(x) >= self.R:
            self.failures["seeds_skipped"] += 1
            return False
        if self.verts:
            d = np.linalg.norm(np.array(self.verts) - x, axis=1)
            k = int(np.argmin(d))
            if d[k] < 0.8 * self.h:
                frame = _tangent_frame(self.map, self.plane, x)
                if abs(np.linalg.det(frame @ self.frames[k].T)) > 0.5:
                    # already covered; snap the nearest vertex onto the
                    # seed so every supplied seed is an exact mesh vertex
                    if not self.frozen[k]:
                        self.verts[k] = x
                        self.frames[k] = frame
                        self._V[k] = x
                        self._F[k] = frame
                    self.failures["seeds_skipped"] += 1
                    return False
        v0 = self._new_vertex(x)
        fr = self.frames[v0]
        ring = []
        for k in range(6):
            th = 2 * np.pi * k / 6
            p = x + self.h * (np.cos(th) * fr[0] + np.sin(th) * fr[1])
            p, ok = _gauss_newton(self.map, self.plane, p, tol=self.tol)
            if not ok:
                raise TraceError(f"seed hexagon failed to project near {x0}")
            ring.append(self._new_vertex(p, parent_frame=fr))
        for k in range(6):
            self._add_face(v0, ring[k], ring[(k + 1) % 6])
        self.fronts.append(ring)
        return True

    def _mesh_wedge(self, front_idx, i):
        front = self.fronts[front_idx]
        v = front[i]
        vp = front[i - 1]
        vn = front[(i + 1) % len(front)]
        fr = self.frames[v]
        xv = self.verts[v]
        dp = fr @ (self.verts[vp] - xv)
        w = self._angle(front, i)

        nt = int(3 * w / np.pi) + 1
        dw = w / nt
        if dw < 0.8 and nt > 1:
            nt -= 1
            dw = w / nt
        elif nt == 1 and dw > 0.8 and np.linalg.norm(
            self.verts[vn] - self.verts[vp]
        ) > 1.25 * self.h:
            nt = 2
            dw = w / 2
        if w < 0.8:
            nt = 1

        th0 = np.arctan2(dp[1], dp[0])
        chain = [vp]
        for j in range(1, nt):
            th = th0 + j * dw
            p = xv + self.h * (np.cos(th) * fr[0] + np.sin(th) * fr[1])
            p, ok = _gauss_newton(self.map, self.plane, p, tol=self.tol)
            if not ok:
                if np.linalg.norm(xv) > 0.85 * self.R:
                    p = xv * (self.R / np.linalg.norm(xv))
                    p, ok = _gauss_newton(self.map, self.plane, p, tol=self.tol,
                                          sphere_radius=self.R)
                if not ok:
                    self.failures["projection"] += 1
                    self.frozen[v] = True
                    self.failures["stuck"] += 1
                    return
            # snap would-be frozen points onto nearby frozen neighbors to
            # avoid slivers along the truncation sphere
            if np.linalg.norm(p) >= self.R - 0.15 * self.h:
                prev = chain[-1]
                if self.frozen[prev] and np.linalg.norm(
                    p - self.verts[prev]
                ) < 0.45 * self.h:
                    continue
                if self.frozen[vn] and np.linalg.norm(
                    p - self.verts[vn]
                ) < 0.45 * self.h:
                    continue
            chain.append(self._new_vertex(p, parent_frame=fr))
        chain.append(vn)
        for a, b in zip(chain[:-1], chain[1:]):
            self._add_face(v, a, b)
        self.fronts[front_idx] = front[:i] + chain[1:-1] + front[i + 1:]

    def run(self, seeds):
        """Grow seeds one at a time so fronts never span two seed patches."""
        iters = 0
        for s in seeds:
            if not self.seed(s):
                continue
            while True:
                iters += 1
                if iters > 20 * self.max_vertices:
                    raise TraceError("front iteration budget exhausted")
                # healthy traces need few or no front surgeries; a surgery
                # count rivaling the vertex count means the surface is
                # under-resolved at this h and the front is churning
                if len(self.banned) > max(120, 0.05 * len(self.verts)):
                    raise TraceError(
                        "front surgery runaway; the surface is "
                        "under-resolved at this mesh size")
                self._close_small()
                # drop fronts whose vertices are all frozen: boundary loops
                self.fronts = [
                    f for f in self.fronts if not all(self.frozen[v] for v in f)
                ]
                if not self.fronts:
                    break
                if len(self.verts) > self.max_vertices:
                    raise TraceError(
                        f"vertex budget {self.max_vertices} exceeded; raise h or R"
                    )
                best = None
                best_w = np.inf
                for fi, front in enumerate(self.fronts):
                    ws = self._front_angles(front)
                    i = int(np.argmin(ws))
                    if ws[i] < best_w:
                        best_w = ws[i]
                        best = (fi, i)
                if best is None or not np.isfinite(best_w):
                    break
                fi, i = best
                hit = self._find_collision(fi, i)
                if hit is not None:
                    fj, j = hit
                    self.banned.add(
                        frozenset((self.fronts[fi][i], self.fronts[fj][j]))
                    )
                    if fj == fi:
                        self._split(fi, i, j)
                    else:
                        self._merge(fi, i, fj, j)
                    continue
                self._mesh_wedge(fi, i)

    def to_mesh(self):
        verts = np.array(self.verts)
        faces = np.array(self.faces, dtype=int)
        res = np.array(
            [np.linalg.norm(_constraint(self.map, self.plane, x)) for x in self.verts]
        )
        mesh = SurfaceMesh(
            vertices=verts,
            faces=faces,
            marked={"frozen": np.where(self.frozen)[0]},
            truncation_radius=self.R,
            residuals={
                "constraint_max": float(res.max()) if len(res) else 0.0,
                "projection_failures": self.failures["projection"],
                "stuck_vertices": self.failures["stuck"],
                "skipped_merges": self.failures["skipped_merge"],
            },
        )
        return mesh


def trace_preimage(mapping, plane, seeds, radius, h=0.25, tol=1e-10,
                   max_vertices=60000):
    """Triangulate the preimage of a 2-plane inside the ball |x| <= radius.

    seeds: points near (or on) the surface, one per expected component.
    Fronts from different seeds merge when they meet, so duplicated
    seeds on one component are tolerated; merged fronts assume the seed
    frames agree in orientation (opposite orientations are skipped and
    counted in residuals["skipped_merges"]).
    """
    if len(seeds) == 0:
        raise TraceError("need at least one seed")
    tracer = _Tracer(mapping, plane, radius, h, tol, max_vertices)
    tracer.run(seeds)
    return tracer.to_mesh()


def mark_condenser_boundaries(mesh, mapping, fiber_points, window_radius):
    """Mark disc patches around fiber points for condenser boundary data.

    Returns a list of vertex index arrays, one per fiber point, and
    records them in mesh.marked["patch<k>"].  Patches must be pairwise
    disjoint and must not touch the truncation boundary.
    """
    boundary = set()
    counts = mesh.directed_edge_counts()
    for (a, b) in counts:
        if counts.get((b, a), 0) == 0:
            boundary.add(a)
            boundary.add(b)
    patches = []
    for k, p in enumerate(fiber_points):
        p = np.asarray(p, dtype=float)
        d = np.linalg.norm(mesh.vertices - p, axis=1)
        idx = np.where(d <= window_radius)[0]
        if len(idx) == 0:
            raise TraceError(
                f"no mesh vertex within {window_radius} of fiber point {k}; "
                "refine the mesh or widen the window"
            )
        if boundary.intersection(idx.tolist()):
            raise TraceError(
                f"patch {k} touches the truncation boundary; increase the "
                "truncation radius"
            )
        patches.append(idx)
    for a in range(len(patches)):
        for b in range(a + 1, len(patches)):
            if np.intersect1d(patches[a], patches[b]).size:
                raise TraceError(
                    f"patches {a} and {b} overlap; shrink the window radius"
                )
    for k, idx in enumerate(patches):
        mesh.marked[f"patch{k}"] = idx
    return patches
