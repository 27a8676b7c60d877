"""Acceptance gate: thirteen criteria, one pass/fail line each.

Each test prints exactly one `[PASS]`/`[FAIL]` line (visible with
pytest -s, and in the captured output of failures) and enforces its
runtime budget.  Tolerances are pinned, not tuned.
"""

import json
import os
import time

import numpy as np
import pytest

import oracles
from invertlab.maps import get_map, cubic_shear
from invertlab.fibers import enumerate_fiber
from invertlab.model_surfaces import annulus_mesh, annulus_boundary_loops, \
    punctured_plane_mesh, nearest_vertex
from invertlab.mesh import refine
from invertlab import harmonic, spectral, sections
from invertlab.cli import main as cli_main


def _verdict(num, name, ok, budget_s, elapsed, detail=""):
    status = "PASS" if (ok and elapsed <= budget_s) else "FAIL"
    line = (f"[{status}] criterion {num:02d} {name}: {detail} "
            f"({elapsed:.1f}s / budget {budget_s:.0f}s)")
    print(line)
    assert ok, line
    assert elapsed <= budget_s, line


def test_criterion_01_condenser_closed_form():
    t0 = time.perf_counter()
    a = 0.25
    mesh = annulus_mesh(a, n_t=72, n_r=70, grading="linear")
    assert 4500 <= mesh.n_vertices <= 5500
    inner, outer = annulus_boundary_loops(mesh)
    fld = harmonic.solve_condenser(mesh, inner, outer)
    r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
    err = float(np.abs(fld.values - oracles.annulus_potential(a, r)).max())

    def proj(x):
        rr = np.linalg.norm(x[:2])
        target = 1.0 if rr > 1.0 - 0.002 else np.clip(rr, a, 1.0)
        s = target / rr
        return np.array([x[0] * s, x[1] * s, 0.0])

    fine = refine(mesh, project=proj)
    loops = fine.boundary_loops()
    loops.sort(key=lambda lp: np.linalg.norm(
        fine.vertices[lp][:, :2], axis=1).mean())
    fld2 = harmonic.solve_condenser(fine, loops[0], loops[1])
    r2 = np.linalg.norm(fine.vertices[:, :2], axis=1)
    err2 = float(np.abs(fld2.values - oracles.annulus_potential(a, r2)).max())
    elapsed = time.perf_counter() - t0
    _verdict(1, "condenser closed form", err <= 2e-2 and err2 < err, 10,
             elapsed, f"nodal error {err:.2e}, after refine {err2:.2e}")


def test_criterion_02_annulus_capacity():
    t0 = time.perf_counter()
    worst = 0.0
    for a in (0.25, float(np.exp(-2 * np.pi))):
        mesh = annulus_mesh(a)
        inner, outer = annulus_boundary_loops(mesh)
        cap = harmonic.capacity(harmonic.solve_condenser(mesh, inner, outer))
        exact = oracles.annulus_capacity(a)
        worst = max(worst, abs(cap - exact) / exact)
    elapsed = time.perf_counter() - t0
    _verdict(2, "annulus capacity", worst <= 0.02, 10, elapsed,
             f"worst relative error {worst:.2e} over a in {{0.25, e^-2pi}}")


def test_criterion_03_poincare_hopf():
    t0 = time.perf_counter()
    fam = sections.sample_tangent_planes(2)
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(20):
        a = rng.standard_normal(3)
        B = rng.standard_normal((3, 3))
        vecs = np.zeros((len(fam.samples), 3))
        for i, p in enumerate(fam.samples):
            v = a + B @ p
            vecs[i] = v - (v @ p) * p
        fld = sections.SectionField(fam, vecs, ["ok"] * len(vecs), {},
                                    [{} for _ in vecs])
        rep = sections.index_sum(fld)
        if rep.index_sum != 2 or rep.flags:
            failures += 1
    elapsed = time.perf_counter() - t0
    _verdict(3, "Poincare-Hopf index sum", failures == 0, 30, elapsed,
             f"{20 - failures}/20 random tangent fields summed to 2")


def test_criterion_04_tautological_euler():
    t0 = time.perf_counter()
    vals = [sections.tautological_euler(n_samples=n) for n in (64, 256, 1024)]
    elapsed = time.perf_counter() - t0
    _verdict(4, "tautological Euler number", vals == [-1, -1, -1], 1,
             elapsed, f"values {vals} at resolutions 64/256/1024")


def test_criterion_05_rp1_parity():
    t0 = time.perf_counter()
    fam = sections.sample_rp1_lines(64)
    dirs = np.column_stack([np.cos(fam.samples), np.sin(fam.samples)])
    rng = np.random.default_rng(5)
    certified = 0
    attempts = 0
    while certified < 20 and attempts < 200:
        attempts += 1
        ks = 2 * rng.integers(0, 4, size=3) + 1
        ca = rng.standard_normal(3)
        cb = rng.standard_normal(3)
        c = sum(ai * np.cos(k * fam.samples) + bi * np.sin(k * fam.samples)
                for k, ai, bi in zip(ks, ca, cb))
        if np.abs(c).min() < 1e-6 * np.abs(c).max():
            continue  # nonvanishing sample sets only, as specified
        vecs = c[:, None] * dirs
        fld = sections.SectionField(fam, vecs, ["ok"] * len(vecs), {},
                                    [{} for _ in vecs])
        rep = sections.rp1_parity(fld)
        if rep["parity"] == "odd" and len(rep["sign_changes"]) % 2 == 1:
            certified += 1
        else:
            break
    elapsed = time.perf_counter() - t0
    _verdict(5, "RP1 Mobius parity", certified == 20, 5, elapsed,
             f"{certified}/20 symmetric nonvanishing sections certified odd")


def test_criterion_06_spectral_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst_det, worst_spec = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        cmap = spectral.random_cubic_cmap(n, rng)
        z0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst_det = max(worst_det,
                        spectral.det_identity_check(cmap, z0)["rel_error"])
        rep = spectral.spectrum_identity_check(cmap, z0)
        worst_spec = max(worst_spec, rep.max_pairing_distance)
    elapsed = time.perf_counter() - t0
    _verdict(6, "spectral identities", worst_det <= 1e-10
             and worst_spec <= 1e-8, 30, elapsed,
             f"det rel {worst_det:.1e}, spectrum pairing {worst_spec:.1e}")


def test_criterion_07_euler_relation_certificate():
    t0 = time.perf_counter()
    mp = cubic_shear()
    cert = spectral.euler_relation_certificate(mp)
    box = np.array([[-5.0, 5.0], [-5.0, 5.0]])
    rep = enumerate_fiber(mp, [0.0, 0.0], box)
    fiber_ok = (len(rep.points) == 1
                and np.linalg.norm(rep.points[0]) <= 1e-8)
    elapsed = time.perf_counter() - t0
    _verdict(7, "Euler-relation certificate",
             cert["pass"] and cert["max_euler_residual"] <= 1e-12 and fiber_ok,
             10, elapsed,
             f"residual {cert['max_euler_residual']:.1e}, "
             f"fiber over 0 = {rep.points}")


def test_criterion_08_braun_fibers():
    t0 = time.perf_counter()
    mp = get_map("braun3d")
    box = np.array([[-10.0, 10.0]] * 3)
    rep = enumerate_fiber(mp, [2.0, 1.0, 0.0], box)
    pts = np.array(sorted(rep.points, key=lambda p: p[1]))
    fiber_err = (np.abs(pts - oracles.braun_fiber(2.0, 1.0)).max()
                 if pts.shape == (3, 3) else np.inf)
    rng = np.random.default_rng(8)
    det_err = 0.0
    for x in rng.uniform(-3, 3, size=(100, 3)):
        exact = np.exp(2.0 * x[0])
        det_err = max(det_err, abs(
            np.linalg.det(mp.jacobian_matrix(x)) - exact) / exact)
    elapsed = time.perf_counter() - t0
    _verdict(8, "braun3d fibers and determinant",
             len(rep.points) == 3 and fiber_err <= 1e-8 and det_err <= 1e-12,
             60, elapsed,
             f"{len(rep.points)} points, err {fiber_err:.1e}, "
             f"det err {det_err:.1e}")


def test_criterion_09_exp_fiber():
    t0 = time.perf_counter()
    mp = get_map("exp_c2")
    box = np.array([[-3, 3], [-7, 7], [-3, 3], [-3, 3]], dtype=float)
    rep = enumerate_fiber(mp, [1.0, 0.0, 1.0, 0.0], box, n_starts=1024)
    pts = np.array(sorted(rep.points, key=lambda p: p[1]))
    err = (np.abs(pts - oracles.exp_c2_fiber()).max()
           if pts.shape == (3, 4) else np.inf)
    elapsed = time.perf_counter() - t0
    _verdict(9, "exponential map fiber", len(rep.points) == 3 and err <= 1e-8,
             60, elapsed, f"{len(rep.points)} points, error {err:.1e}")


def test_criterion_10_conformal_type():
    t0 = time.perf_counter()
    from invertlab.model_surfaces import cylinder_mesh, \
        cylinder_boundary_loops, trumpet_mesh
    ok = True
    details = []
    cases = [
        ("cylinder", "parabolic",
         [(L, cylinder_mesh(L), oracles.cylinder_modulus(L))
          for L in (10.0, 20.0, 40.0)], cylinder_boundary_loops),
        ("annulus", "parabolic",
         [(R, punctured_plane_mesh(R), oracles.flat_annulus_modulus(R))
          for R in (10.0, 100.0, 1000.0)],
         lambda m: annulus_boundary_loops(m, n_t=96)),
        ("trumpet", "hyperbolic",
         [(S, trumpet_mesh(S), oracles.trumpet_modulus(S))
          for S in (3.0, 5.0, 8.0)], cylinder_boundary_loops),
    ]
    for name, want, items, loops_of in cases:
        meshes = [m for _, m, _ in items]
        loops = [loops_of(m) for m in meshes]
        rep = harmonic.conformal_type(
            meshes, [l[0] for l in loops], [l[1] for l in loops],
            [p for p, _, _ in items])
        mod_err = max(abs(g - e) / e for g, (_, _, e) in
                      zip(rep.moduli, items))
        details.append(f"{name}:{rep.verdict},mod_err={mod_err:.1%}")
        ok = ok and rep.verdict == want and mod_err <= 0.05
    elapsed = time.perf_counter() - t0
    _verdict(10, "conformal type classifier", ok, 120, elapsed,
             " ".join(details))


def test_criterion_11_log_normalized():
    t0 = time.perf_counter()
    meshes, inners, outers, bases, radii = [], [], [], [], []
    for k in (2, 3, 4):
        R = float(np.exp(k))
        mesh = punctured_plane_mesh(R)
        inner, outer = annulus_boundary_loops(mesh, n_t=96)
        meshes.append(mesh); inners.append(inner); outers.append(outer)
        bases.append(nearest_vertex(mesh, [np.e, 0.0, 0.0]))
        radii.append(R)
    res = harmonic.solve_log_normalized(meshes, inners, outers, bases, radii)
    v2 = nearest_vertex(meshes[-1], [np.e ** 2, 0.0, 0.0])
    val_err = abs(res.field.values[v2] - 2.0)
    grad_err = abs(np.linalg.norm(res.gradient_at_base) - 1.0 / np.e)
    elapsed = time.perf_counter() - t0
    _verdict(11, "log-normalized exhaustion",
             val_err <= 5e-2 and grad_err <= 5e-2, 60, elapsed,
             f"value at e^2 off by {val_err:.3f}, gradient off by "
             f"{grad_err:.3f}")


def test_criterion_12_end_to_end_section(tmp_path):
    t0 = time.perf_counter()
    args = ["section", "--map", "braun3d", "--q", "2,1,0",
            "--box", "-10:10,-10:10,-10:10", "--level", "1", "--seed", "0"]
    outs = []
    for k in (1, 2):
        out = str(tmp_path / f"run{k}")
        assert cli_main(args + ["--out", out]) == 0
        outs.append(out)
    with open(os.path.join(outs[0], "section.json")) as fh:
        doc = json.load(fh)
    terminal = {"ok", "trace-failed", "ends-not-disc", "solver-failed"}
    statuses = [s["status"] for s in doc["samples"]]
    all_terminal = all(s in terminal for s in statuses)
    with open(os.path.join(outs[0], "report.json")) as fh:
        report = json.load(fh)
    full_report = all(key in report for key in
                      ("version", "config", "stages", "wall_clock_s",
                       "artifacts", "meta"))
    identical = True
    for name in report["artifacts"]:
        b1 = open(os.path.join(outs[0], name), "rb").read()
        b2 = open(os.path.join(outs[1], name), "rb").read()
        identical = identical and b1 == b2
    n_ok = statuses.count("ok")
    elapsed = time.perf_counter() - t0
    _verdict(12, "end-to-end deterministic section run",
             all_terminal and full_report and identical, 900, elapsed,
             f"{len(statuses)} samples ({n_ok} ok), artifacts byte-identical "
             f"across two seeded runs: {identical}")


def test_criterion_13_property_suites():
    t0 = time.perf_counter()
    import test_harmonic
    import test_tracing
    import test_fibers
    import test_sections

    props = [
        ("maximum principle", test_harmonic.test_max_principle_and_constant_data),
        ("linearity", test_harmonic.test_linearity),
        ("energy minimality", test_harmonic.test_energy_minimality),
        ("condenser symmetry", test_harmonic.test_condenser_symmetry),
        ("topology stability under refine",
         test_tracing.test_refine_stability_on_traced_mesh),
        ("trace determinism", test_tracing.test_trace_determinism),
        ("fiber determinism", test_fibers.test_fiber_determinism),
        ("monotone recall", test_fibers.test_fiber_monotone_recall),
        ("solver determinism", test_harmonic.test_solver_determinism),
        ("tangency", test_sections.test_condenser_section_direct_annulus),
    ]
    failed = []
    for name, fn in props:
        try:
            fn()
        except AssertionError:
            failed.append(name)
    elapsed = time.perf_counter() - t0
    _verdict(13, "property suites", not failed, 300, elapsed,
             "all green" if not failed else f"failed: {failed}")
