"""Command line front end: deterministic runs, JSON reports, mesh export.

Exit codes: 0 success, 2 configuration error, 3 precondition violation,
4 numerical failure.  Reports are byte-stable for a fixed config and
seed; timestamps live in a separate "meta" field.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, harmonic, sections, spectral
from .fibers import enumerate_fiber
from .maps import get_map, load_map_config
from .mesh import SurfaceMesh, mesh_topology
from .model_surfaces import annulus_boundary_loops, annulus_mesh
from .tracing import Plane, TraceError, trace_preimage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4


class ConfigError(Exception):
    pass


class PreconditionError(Exception):
    pass


@dataclass
class RunConfig:
    map: str = "braun3d"
    q: tuple = ()
    box: tuple = ()  # flattened (lo, hi) pairs, row per dimension
    solve_tol: float = 1e-10
    mesh_h: float = 0.3
    window: float = 0.9
    radii: tuple = (4.0, 6.0, 8.0)
    level: int = 1
    seed: int = 0
    jobs: int = 1
    out: str = "invertlab-out"

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["map"] = {"name": self.map}
        cp["target"] = {
            "q": ",".join(repr(float(v)) for v in self.q),
            "box": ",".join(repr(float(v)) for v in self.box),
        }
        cp["solver"] = {
            "solve_tol": repr(self.solve_tol),
            "mesh_h": repr(self.mesh_h),
            "window": repr(self.window),
            "radii": ",".join(repr(float(r)) for r in self.radii),
        }
        cp["run"] = {
            "level": str(self.level),
            "seed": str(self.seed),
            "jobs": str(self.jobs),
            "out": self.out,
        }
        import io

        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
            kw = {}
            if cp.has_option("map", "name"):
                kw["map"] = cp["map"]["name"]
            if cp.has_option("target", "q") and cp["target"]["q"]:
                kw["q"] = tuple(float(v) for v in cp["target"]["q"].split(","))
            if cp.has_option("target", "box") and cp["target"]["box"]:
                kw["box"] = tuple(float(v) for v in cp["target"]["box"].split(","))
            for key in ("solve_tol", "mesh_h", "window"):
                if cp.has_option("solver", key):
                    kw[key] = float(cp["solver"][key])
            if cp.has_option("solver", "radii"):
                kw["radii"] = tuple(
                    float(v) for v in cp["solver"]["radii"].split(",")
                )
            for key, conv in (("level", int), ("seed", int), ("jobs", int),
                              ("out", str)):
                if cp.has_option("run", key):
                    kw[key] = conv(cp["run"][key])
            return cls(**kw)
        except (configparser.Error, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _write_report(cfg, out_dir, stages, clocks, artifacts):
    report = {
        "version": __version__,
        "config": _jsonable(asdict(cfg)),
        "stages": _jsonable(stages),
        "wall_clock_s": {k: round(v, 3) for k, v in clocks.items()},
        "artifacts": {name: _sha256(os.path.join(out_dir, name))
                      for name in sorted(artifacts)},
        "meta": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "host": platform.node(),
            "python": platform.python_version(),
        },
    }
    _dump_json(report, os.path.join(out_dir, "report.json"))
    return report


def _resolve_map(name):
    if name.endswith((".ini", ".cfg", ".conf")) or os.path.sep in name:
        if not os.path.exists(name):
            raise ConfigError(f"map config {name!r} not found")
        return load_map_config(name)
    try:
        return get_map(name)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"unknown map {name!r}") from exc


def _require(cfg, *fields):
    for f in fields:
        if not getattr(cfg, f):
            raise ConfigError(f"--{f.replace('_', '-')} is required here")


def _box_array(cfg, dim):
    box = np.asarray(cfg.box, dtype=float)
    if box.size != 2 * dim:
        raise ConfigError(
            f"--box needs {dim} lo:hi ranges for a {dim}-dimensional map"
        )
    return box.reshape(dim, 2)


def _ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


# -- subcommands -------------------------------------------------------


def cmd_fiber(cfg):
    mapping = _resolve_map(cfg.map)
    _require(cfg, "q", "box")
    q = np.asarray(cfg.q, dtype=float)
    box = _box_array(cfg, mapping.dim)
    out = _ensure_out(cfg)
    t0 = time.perf_counter()
    rep = enumerate_fiber(mapping, q, box, tol=cfg.solve_tol, seed=cfg.seed)
    dt = time.perf_counter() - t0
    # conditioning at each point, in lieu of an untestable genericity claim
    conditioning = []
    for p in rep.points:
        J = mapping.jacobian_matrix(np.asarray(p))
        conditioning.append(
            {"det": float(np.linalg.det(J)), "cond": float(np.linalg.cond(J))}
        )
    stage = {
        "map": rep.map_name,
        "q": rep.target,
        "box": rep.box,
        "points": rep.points,
        "residuals": rep.residuals,
        "n_points": len(rep.points),
        "n_starts": rep.n_starts,
        "converged": rep.converged,
        "diverged": rep.diverged,
        "dedup_radius": rep.dedup_radius,
        "seed": rep.seed,
        "tol": rep.tol,
        "conditioning": conditioning,
    }
    _dump_json(stage, os.path.join(out, "fiber.json"))
    with open(os.path.join(out, "fiber_points.csv"), "w") as fh:
        fh.write(",".join(f"x{i}" for i in range(mapping.dim)) + "\n")
        for p in rep.points:
            fh.write(",".join(f"{float(c):.17g}" for c in p) + "\n")
    _write_report(cfg, out, {"fiber": stage}, {"fiber": dt},
                  ["fiber.json", "fiber_points.csv"])
    return EXIT_OK


def cmd_trace(cfg, normals):
    mapping = _resolve_map(cfg.map)
    _require(cfg, "q", "box")
    if not normals:
        raise ConfigError("--normal is required (repeat it in dimension 4)")
    q = np.asarray(cfg.q, dtype=float)
    box = _box_array(cfg, mapping.dim)
    out = _ensure_out(cfg)
    nrm = np.array([np.asarray(n, dtype=float) for n in normals])
    if nrm.shape != (mapping.dim - 2, mapping.dim):
        raise ConfigError(
            f"a plane in dimension {mapping.dim} needs {mapping.dim - 2} normals"
        )
    plane = Plane.from_point_normals(q, nrm)
    t0 = time.perf_counter()
    fiber = enumerate_fiber(mapping, q, box, tol=cfg.solve_tol, seed=cfg.seed)
    if not fiber.points:
        raise PreconditionError(
            f"no fiber point of {cfg.map} over q={q.tolist()} in the box; "
            "a trace needs at least one seed"
        )
    mesh = trace_preimage(
        mapping, plane, [np.asarray(p) for p in fiber.points],
        radius=float(cfg.radii[-1]), h=cfg.mesh_h,
    )
    dt = time.perf_counter() - t0
    top = mesh_topology(mesh)
    with open(os.path.join(out, "surface.off"), "w") as fh:
        fh.write(mesh.to_off())
    with open(os.path.join(out, "surface.json"), "w") as fh:
        fh.write(mesh.sidecar_json())
    stage = {
        "n_vertices": mesh.n_vertices,
        "n_faces": mesh.n_faces,
        "residuals": mesh.residuals,
        "topology": {
            "n_components": top.n_components,
            "manifold": top.manifold,
            "components": [asdict(c) for c in top.components],
        },
        "seeds": fiber.points,
    }
    _dump_json(stage, os.path.join(out, "trace.json"))
    _write_report(cfg, out, {"trace": stage}, {"trace": dt},
                  ["surface.off", "surface.json", "trace.json"])
    return EXIT_OK


def cmd_condenser(cfg, annulus, mesh_path):
    out = _ensure_out(cfg)
    t0 = time.perf_counter()
    if mesh_path:
        sidecar_path = os.path.splitext(mesh_path)[0] + ".json"
        sidecar = None
        if os.path.exists(sidecar_path):
            with open(sidecar_path) as fh:
                sidecar = fh.read()
        with open(mesh_path) as fh:
            mesh = SurfaceMesh.from_off(fh.read(), sidecar=sidecar)
        if "patch0" in mesh.marked and "patch1" in mesh.marked:
            loop0, loop1 = mesh.marked["patch0"], mesh.marked["patch1"]
        else:
            loops = mesh.boundary_loops()
            if len(loops) < 2:
                raise PreconditionError(
                    "mesh needs two marked patches or two boundary loops"
                )
            loop0, loop1 = np.array(loops[0]), np.array(loops[1])
        closed_form = None
    else:
        a = annulus if annulus is not None else 0.25
        if not 0 < a < 1:
            raise ConfigError("--annulus modulus must lie in (0, 1)")
        mesh = annulus_mesh(a)
        loop0, loop1 = annulus_boundary_loops(mesh)
        closed_form = a
    fld = harmonic.solve_condenser(mesh, loop0, loop1)
    cap = harmonic.capacity(fld)
    dt = time.perf_counter() - t0
    stage = {"capacity": cap, "energy": fld.energy,
             "solve_residual": fld.solve_residual,
             "n_vertices": mesh.n_vertices}
    if closed_form is not None:
        a = closed_form
        r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
        exact = (np.log(a) - np.log(r)) / np.log(a)
        cap_exact = 2 * np.pi / np.log(1 / a)
        stage["closed_form"] = {
            "a": a,
            "max_nodal_error": float(np.abs(fld.values - exact).max()),
            "capacity_exact": cap_exact,
            "capacity_rel_error": abs(cap - cap_exact) / cap_exact,
            "pass": bool(
                np.abs(fld.values - exact).max() <= 2e-2
                and abs(cap - cap_exact) / cap_exact <= 0.02
            ),
        }
    with open(os.path.join(out, "field_values.csv"), "w") as fh:
        fh.write("vertex,value\n")
        for i, v in enumerate(fld.values):
            fh.write(f"{i},{v:.17g}\n")
    with open(os.path.join(out, "field_gradients.csv"), "w") as fh:
        dim = mesh.vertices.shape[1]
        fh.write("face," + ",".join(f"g{i}" for i in range(dim)) + "\n")
        for i, g in enumerate(fld.face_gradients):
            fh.write(f"{i}," + ",".join(f"{c:.17g}" for c in g) + "\n")
    _dump_json(stage, os.path.join(out, "condenser.json"))
    _write_report(cfg, out, {"condenser": stage}, {"condenser": dt},
                  ["condenser.json", "field_values.csv", "field_gradients.csv"])
    if closed_form is not None and not stage["closed_form"]["pass"]:
        raise harmonic.HarmonicSolveError("closed-form check failed")
    return EXIT_OK


def cmd_section(cfg):
    mapping = _resolve_map(cfg.map)
    _require(cfg, "q", "box")
    q = np.asarray(cfg.q, dtype=float)
    box = _box_array(cfg, mapping.dim)
    out = _ensure_out(cfg)
    clocks = {}
    t0 = time.perf_counter()
    fiber = enumerate_fiber(mapping, q, box, tol=cfg.solve_tol, seed=cfg.seed)
    clocks["fiber"] = time.perf_counter() - t0
    if len(fiber.points) < 3:
        raise PreconditionError(
            f"fiber over q={q.tolist()} has {len(fiber.points)} point(s); the "
            "condenser construction needs three distinct preimages of one "
            "target value, which an injective map can never supply"
        )
    p1, p2, p3 = (np.asarray(p) for p in fiber.points[:3])
    family = sections.sample_tangent_planes(cfg.level, point=q)
    t0 = time.perf_counter()
    fld = sections.build_condenser_section(
        mapping, q, p1, p2, p3, family,
        params={
            "radius": float(cfg.radii[-1]),
            "h": cfg.mesh_h,
            "window": cfg.window,
            "jobs": cfg.jobs,
        },
    )
    clocks["section"] = time.perf_counter() - t0
    section_doc = {
        "kind": fld.provenance["kind"],
        "provenance": fld.provenance,
        "samples": [
            {
                "id": i,
                "parameter": family.samples[i],
                "plane_basis": family.planes[i].basis,
                "plane_normals": family.planes[i].normals,
                "vector": fld.vectors[i],
                "status": fld.statuses[i],
                "detail": fld.details[i],
            }
            for i in range(len(fld.statuses))
        ],
        "n_ok": int(fld.ok_mask().sum()),
        "tangency_max": float(fld.tangency_errors().max()),
    }
    _dump_json(section_doc, os.path.join(out, "section.json"))
    artifacts = ["section.json"]
    stages = {"fiber": {"points": fiber.points}, "section": {
        "n_samples": len(fld.statuses),
        "statuses": sorted(set(fld.statuses)),
        "n_ok": section_doc["n_ok"],
    }}
    if fld.ok_mask().all() and np.linalg.norm(fld.vectors, axis=1).min() > 0:
        t0 = time.perf_counter()
        idx = sections.index_sum(fld)
        clocks["index"] = time.perf_counter() - t0
        index_doc = {
            "index_sum": idx.index_sum,
            "zero_faces": idx.zero_faces,
            "flags": idx.flags,
            "level": idx.level,
        }
        _dump_json(index_doc, os.path.join(out, "index.json"))
        artifacts.append("index.json")
        stages["index"] = index_doc
    else:
        stages["index"] = {"skipped": "field incomplete; index needs every sample ok"}
    _write_report(cfg, out, stages, clocks, artifacts)
    return EXIT_OK


def cmd_verify_identities(cfg, n_samples=50):
    out = _ensure_out(cfg)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    checks = []

    worst_det, worst_spec = 0.0, 0.0
    for _ in range(n_samples):
        n = int(rng.integers(2, 4))
        cmap = spectral.random_cubic_cmap(n, rng)
        z0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        det = spectral.det_identity_check(cmap, z0)
        worst_det = max(worst_det, det["rel_error"])
        spec = spectral.spectrum_identity_check(cmap, z0)
        worst_spec = max(worst_spec, spec.max_pairing_distance)
    checks.append({"check": "det-realification", "samples": n_samples,
                   "max_error": worst_det, "pass": worst_det <= 1e-10})
    checks.append({"check": "spectrum-realification", "samples": n_samples,
                   "max_error": worst_spec, "pass": worst_spec <= 1e-8})

    from .maps import cubic_shear

    cert = spectral.euler_relation_certificate(cubic_shear(), seed=cfg.seed)
    checks.append({"check": "euler-relation-cubic-shear",
                   "samples": cert["n_samples"],
                   "max_error": cert["max_euler_residual"],
                   "pass": cert["pass"]})
    from .maps import PolyMap

    hpart = PolyMap("cubic_shear_cubic_part",
                    spectral._cubic_part_real(cubic_shear()))
    nil = spectral.nilpotent_homogeneous_check(hpart, 3, seed=cfg.seed)
    checks.append({"check": "nilpotent-cubic-part", "samples": nil["n_samples"],
                   "max_error": nil["max_abs_eigenvalue"], "pass": nil["pass"]})

    dt = time.perf_counter() - t0
    _dump_json(checks, os.path.join(out, "identities.json"))
    _write_report(cfg, out, {"verify_identities": checks},
                  {"verify_identities": dt}, ["identities.json"])
    if not all(c["pass"] for c in checks):
        raise harmonic.HarmonicSolveError("identity checks failed")
    return EXIT_OK


def cmd_report(cfg):
    out = _ensure_out(cfg)
    files = sorted(
        f for f in os.listdir(out)
        if f.endswith((".json", ".csv", ".off")) and f != "report.json"
    )
    if not files:
        raise PreconditionError(f"no artifacts found in {out!r}")
    _write_report(cfg, out, {"collected": files}, {}, files)
    return EXIT_OK


# -- argument plumbing -------------------------------------------------


def _parse_floats(text):
    try:
        return tuple(float(v) for v in text.replace(":", ",").split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _env_default(name, conv, fallback):
    raw = os.environ.get(f"INVERTLAB_{name}")
    if raw is None:
        return fallback
    try:
        return conv(raw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad INVERTLAB_{name}={raw!r}: {exc}") from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="invertlab",
        description="Numerical laboratory for injectivity of local "
        "diffeomorphisms: fibers, preimage surfaces, harmonic fields, "
        "and topological sections.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--map", default=_env_default("MAP", str, "braun3d"),
                       help="builtin map name or map config path "
                       "(default: %(default)s)")
        p.add_argument("--q", type=_parse_floats,
                       default=_env_default("Q", _parse_floats, ()),
                       help="target point, comma separated")
        p.add_argument("--box", type=_parse_floats,
                       default=_env_default("BOX", _parse_floats, ()),
                       help="search box, lo:hi per dimension, comma separated")
        p.add_argument("--seed", type=int,
                       default=_env_default("SEED", int, 0),
                       help="RNG seed (default: %(default)s)")
        p.add_argument("--level", type=int,
                       default=_env_default("LEVEL", int, 1),
                       help="icosphere refinement level (default: %(default)s)")
        p.add_argument("--radii", type=_parse_floats,
                       default=_env_default("RADII", _parse_floats,
                                            (4.0, 6.0, 8.0)),
                       help="truncation radii, increasing (default: 4,6,8)")
        p.add_argument("--jobs", type=int,
                       default=_env_default("JOBS", int, 1),
                       help="parallel per-plane tasks (default: %(default)s)")
        p.add_argument("--out", default=_env_default("OUT", str,
                                                     "invertlab-out"),
                       help="output directory (default: %(default)s)")
        p.add_argument("--solve-tol", type=float, default=1e-10,
                       help="nonlinear solve tolerance (default: %(default)s)")
        p.add_argument("--mesh-h", type=float, default=0.3,
                       help="surface mesh edge length (default: %(default)s)")
        p.add_argument("--window", type=float, default=0.9,
                       help="condenser patch radius (default: %(default)s)")
        p.add_argument("--config", default=None,
                       help="RunConfig ini file; flags override its values")

    p = sub.add_parser("fiber", help="enumerate a fiber in a box")
    common(p)
    p = sub.add_parser("trace", help="trace the preimage surface of a plane")
    common(p)
    p.add_argument("--normal", action="append", type=_parse_floats,
                   default=None, help="plane normal (repeat in dimension 4)")
    p = sub.add_parser("condenser", help="solve a condenser field on a mesh")
    common(p)
    p.add_argument("--annulus", type=float, default=None,
                   help="inner radius of the bundled flat annulus mesh")
    p.add_argument("--mesh", default=None, help="OFF mesh path (with sidecar)")
    p = sub.add_parser("section", help="build the condenser section and its "
                       "index report over an icosphere plane family")
    common(p)
    p = sub.add_parser("verify-identities", help="run the algebraic identity "
                       "suites on random maps")
    common(p)
    p.add_argument("--samples", type=int, default=50)
    p = sub.add_parser("report", help="collect artifacts in --out into a "
                       "manifest report")
    common(p)
    return parser


def _config_from_args(args):
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file {args.config!r} not found")
        with open(args.config) as fh:
            cfg = RunConfig.from_ini(fh.read())
    else:
        cfg = RunConfig()
    defaults = RunConfig()
    for attr, flag in (
        ("map", "map"), ("q", "q"), ("box", "box"), ("seed", "seed"),
        ("level", "level"), ("radii", "radii"), ("jobs", "jobs"),
        ("out", "out"), ("solve_tol", "solve_tol"), ("mesh_h", "mesh_h"),
        ("window", "window"),
    ):
        val = getattr(args, flag)
        if val != getattr(defaults, attr) or not args.config:
            if val or isinstance(val, (int, float)):
                setattr(cfg, attr, val)
    if list(cfg.radii) != sorted(cfg.radii):
        raise ConfigError("--radii must be increasing")
    return cfg


def _fuse_negative_values(argv):
    """Join flags with values that start with a minus sign (e.g. --box -2:2)."""
    numeric_flags = {"--q", "--box", "--radii", "--normal"}
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok in numeric_flags and i + 1 < len(argv)
                and argv[i + 1].startswith("-")
                and any(c.isdigit() for c in argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_fuse_negative_values(argv))
    try:
        cfg = _config_from_args(args)
        if args.command == "fiber":
            return cmd_fiber(cfg)
        if args.command == "trace":
            return cmd_trace(cfg, args.normal)
        if args.command == "condenser":
            return cmd_condenser(cfg, args.annulus, args.mesh)
        if args.command == "section":
            return cmd_section(cfg)
        if args.command == "verify-identities":
            return cmd_verify_identities(cfg, args.samples)
        if args.command == "report":
            return cmd_report(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, ValueError) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (TraceError, harmonic.HarmonicSolveError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
