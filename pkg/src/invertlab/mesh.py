"""Triangulated surfaces embedded in R^n: topology statistics, boundary
loops, refinement, and OFF export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SurfaceMesh:
    """Triangle mesh with vertices in R^n (n >= 2).

    Faces are index triples with consistent winding where the producer
    can guarantee it.  marked maps label -> vertex index (fiber points,
    log-solve base points).  residuals, when present, record the
    per-vertex implicit-constraint residual from tracing.
    """

    vertices: np.ndarray
    faces: np.ndarray
    marked: dict = field(default_factory=dict)
    truncation_radius: float | None = None
    residuals: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=int)
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (nf, 3)")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def edges(self):
        """Undirected edges as a sorted unique (ne, 2) array."""
        e = np.vstack(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_faces

    def directed_edge_counts(self):
        counts = {}
        for f in self.faces:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                counts[(int(a), int(b))] = counts.get((int(a), int(b)), 0) + 1
        return counts

    def is_manifold(self):
        """Every directed edge once, every undirected edge on <= 2 faces."""
        counts = self.directed_edge_counts()
        if any(c > 1 for c in counts.values()):
            return False
        for (a, b) in counts:
            if counts.get((b, a), 0) > 1:
                return False
        return True

    def boundary_loops(self):
        """Ordered vertex cycles of the boundary.

        A directed face edge is boundary when its reverse is absent;
        with consistent winding the loops come out coherently oriented.
        """
        counts = self.directed_edge_counts()
        nxt = {}
        for (a, b), c in counts.items():
            if counts.get((b, a), 0) == 0:
                nxt.setdefault(a, []).append(b)
        loops = []
        seen = set()
        for start in sorted(nxt):
            for b0 in nxt[start]:
                if (start, b0) in seen:
                    continue
                loop = [start]
                a, b = start, b0
                seen.add((a, b))
                while b != start:
                    loop.append(b)
                    outs = [c for c in nxt.get(b, []) if (b, c) not in seen]
                    if not outs:
                        break  # open chain: non-manifold boundary
                    a, b = b, outs[0]
                    seen.add((a, b))
                loops.append(loop)
        return loops

    def vertex_components(self):
        """Connected-component label per vertex (edges as adjacency)."""
        parent = np.arange(self.n_vertices)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in self.edges():
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        labels = np.array([find(i) for i in range(self.n_vertices)])
        _, labels = np.unique(labels, return_inverse=True)
        return labels

    def face_normals_areas(self):
        """Unit normals only make sense for dim 3; areas work in any dim."""
        p = self.vertices[self.faces]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        uu = np.sum(u * u, axis=1)
        vv = np.sum(v * v, axis=1)
        uv = np.sum(u * v, axis=1)
        area = 0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))
        return area

    def face_angles(self):
        """All interior angles, one row of 3 per face (radians)."""
        p = self.vertices[self.faces]
        angles = np.empty((self.n_faces, 3))
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            cosang = np.sum(a * b, axis=1) / np.maximum(na * nb, 1e-300)
            angles[:, i] = np.arccos(np.clip(cosang, -1.0, 1.0))
        return angles

    def min_angle(self):
        if self.n_faces == 0:
            return np.pi
        return float(self.face_angles().min())

    def to_off(self):
        lines = ["OFF", f"{self.n_vertices} {self.n_faces} 0"]
        for v in self.vertices:
            lines.append(" ".join(f"{c:.17g}" for c in v))
        for f in self.faces:
            lines.append("3 " + " ".join(str(int(i)) for i in f))
        return "\n".join(lines) + "\n"

    def sidecar_json(self):
        """Marked vertices and boundary loops, for the OFF sidecar file."""
        marked = {
            k: [int(i) for i in np.atleast_1d(v)] for k, v in self.marked.items()
        }
        return json.dumps(
            {
                "marked": marked,
                "boundary_loops": [[int(i) for i in l] for l in self.boundary_loops()],
                "truncation_radius": self.truncation_radius,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_off(cls, text, sidecar=None):
        toks = text.split("\n")
        if not toks or toks[0].strip() != "OFF":
            raise ValueError("not an OFF file")
        nv, nf, _ = (int(x) for x in toks[1].split())
        verts = np.array(
            [[float(c) for c in toks[2 + i].split()] for i in range(nv)]
        )
        faces = np.array(
            [[int(c) for c in toks[2 + nv + i].split()[1:]] for i in range(nf)],
            dtype=int,
        )
        marked = {}
        trunc = None
        if sidecar:
            meta = json.loads(sidecar)
            marked = {k: np.array(v, dtype=int) for k, v in meta["marked"].items()}
            trunc = meta.get("truncation_radius")
        return cls(vertices=verts, faces=faces, marked=marked,
                   truncation_radius=trunc, residuals={})


@dataclass
class ComponentTopology:
    label: int
    n_vertices: int
    euler_characteristic: int
    boundary_loops: int
    genus: int | None  # None when truncation leaves the count indeterminate


@dataclass
class TopologyReport:
    n_components: int
    components: list
    marked_membership: dict
    manifold: bool
    nonmanifold_edges: int


def mesh_topology(mesh: SurfaceMesh) -> TopologyReport:
    """Component count, Euler characteristic, loop count and genus estimate.

    Genus comes from chi = 2 - 2g - b and is reported only when that
    yields a non-negative integer on a manifold mesh.
    """
    labels = mesh.vertex_components()
    counts = mesh.directed_edge_counts()
    nonmanifold = sum(1 for (a, b), c in counts.items()
                      if c > 1 or counts.get((b, a), 0) > 1)
    manifold = nonmanifold == 0

    loops = mesh.boundary_loops()
    edges = mesh.edges()
    comps = []
    for label in range(labels.max() + 1 if len(labels) else 0):
        vmask = labels == label
        nv = int(vmask.sum())
        ne = int(np.sum(vmask[edges[:, 0]]))
        nf = int(np.sum(vmask[mesh.faces[:, 0]]))
        chi = nv - ne + nf
        b = sum(1 for loop in loops if labels[loop[0]] == label)
        genus = None
        if manifold:
            g2 = 2 - chi - b
            if g2 >= 0 and g2 % 2 == 0:
                genus = g2 // 2
        comps.append(ComponentTopology(label, nv, chi, b, genus))
    membership = {}
    for k, v in mesh.marked.items():
        labs = np.unique(labels[np.atleast_1d(v)])
        membership[k] = int(labs[0]) if len(labs) == 1 else [int(x) for x in labs]
    return TopologyReport(
        n_components=int(labels.max() + 1) if len(labels) else 0,
        components=comps,
        marked_membership=membership,
        manifold=manifold,
        nonmanifold_edges=nonmanifold,
    )


def refine(mesh: SurfaceMesh, factor=2, project=None) -> SurfaceMesh:
    """Uniform 1:4 edge-split refinement, log2(factor) rounds.

    project, when given, maps a new midpoint back onto the underlying
    surface (traced meshes re-run their corrector through this hook).
    Topology is preserved; callers may assert via mesh_topology.
    """
    rounds = int(round(np.log2(factor)))
    if 2**rounds != factor or factor < 2:
        raise ValueError("factor must be a power of two >= 2")
    out = mesh
    for _ in range(rounds):
        out = _split_once(out, project)
    return out


def _split_once(mesh, project):
    verts = [v for v in mesh.vertices]
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            m = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
            if project is not None:
                m = project(m)
            midpoint[key] = len(verts)
            verts.append(m)
        return midpoint[key]

    faces = []
    for a, b, c in mesh.faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        faces.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return SurfaceMesh(
        vertices=np.array(verts),
        faces=np.array(faces, dtype=int),
        marked=dict(mesh.marked),
        truncation_radius=mesh.truncation_radius,
    )
