"""Realification of complex polynomial maps and the spectral identities
relating DG and its realified counterpart, plus the certificates built
on them (nilpotency of homogeneous parts, singleton-fiber Euler relation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .maps import MapSpec, PolyMap
from .polynomials import (
    poly_diff,
    poly_eval,
    poly_imag,
    poly_mul,
    poly_nvars,
    poly_pow,
    poly_real,
)

SPECTRUM_TOL = 1e-8


def interleave(z):
    """C^n -> R^{2n} under z_i -> (Re z_i, Im z_i)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * len(z))
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def complexify(x):
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


class ComplexPolyMap:
    """Polynomial self-map of C^n given by per-component monomial lists."""

    kind = "polynomial-complex"

    def __init__(self, name, components):
        dims = {poly_nvars(c) for c in components if c}
        if len(dims) > 1:
            raise ValueError("components disagree on variable count")
        self.name = name
        self.dim = len(components)
        self.components = [
            {e: complex(c) for e, c in comp.items()} for comp in components
        ]
        self._jac_polys = [
            [poly_diff(c, j) for j in range(self.dim)] for c in self.components
        ]

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        return np.array([poly_eval(c, z) for c in self.components], dtype=complex)

    def jacobian_matrix(self, z):
        z = np.asarray(z, dtype=complex)
        return np.array(
            [[poly_eval(p, z) for p in row] for row in self._jac_polys],
            dtype=complex,
        )

    def homogeneous_split(self):
        """Write the map as I + H with H homogeneous of degree k > 1.

        Returns (H_components, k); raises if the map has no such shape.
        """
        n = self.dim
        h_comps = []
        degrees = set()
        for i, comp in enumerate(self.components):
            lin = tuple(1 if j == i else 0 for j in range(n))
            rest = {}
            for exps, coeff in comp.items():
                if exps == lin:
                    if abs(coeff - 1.0) > 1e-14:
                        raise ValueError("linear part is not the identity")
                    continue
                if sum(exps) <= 1 and coeff != 0:
                    raise ValueError("linear part is not the identity")
                rest[exps] = coeff
                degrees.add(sum(exps))
            h_comps.append(rest)
        if len(degrees) > 1:
            raise ValueError(f"higher-order part is not homogeneous: degrees {degrees}")
        k = degrees.pop() if degrees else 0
        return h_comps, k

    def homogeneous_part(self):
        h_comps, _ = self.homogeneous_split()
        return ComplexPolyMap(self.name + "_hpart", h_comps)

    def realify(self) -> MapSpec:
        """The induced real map on R^{2n}, coordinates (x1, y1, ..., xn, yn)."""
        n = self.dim
        n2 = 2 * n
        zero = (0,) * n2

        def unit(j):
            e = [0] * n2
            e[j] = 1
            return tuple(e)

        real_components = [None] * n2
        for i, comp in enumerate(self.components):
            expanded = {}
            for exps, coeff in comp.items():
                term = {zero: complex(coeff)}
                for j, e in enumerate(exps):
                    if e:
                        zj = {unit(2 * j): 1.0, unit(2 * j + 1): 1j}
                        term = poly_mul(term, poly_pow(zj, e, n2))
                for key, c in term.items():
                    expanded[key] = expanded.get(key, 0) + c
            real_components[2 * i] = poly_real(expanded)
            real_components[2 * i + 1] = poly_imag(expanded)
        return PolyMap(
            self.name + "_realified",
            real_components,
            kind="polynomial-complex-realified",
        )


@dataclass
class SpectrumReport:
    point: np.ndarray
    spectrum_complex: np.ndarray
    spectrum_realified: np.ndarray
    max_pairing_distance: float
    match: bool


def _match_multisets(a, b):
    """Max distance of an optimal pairing between equal-size eigenvalue multisets."""
    if len(a) != len(b):
        raise ValueError("multisets differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def det_identity_check(cmap: ComplexPolyMap, z0):
    """Compare det DG-hat(x0) with |det DG(z0)|^2 at the realified point."""
    z0 = np.asarray(z0, dtype=complex)
    det_c = np.linalg.det(cmap.jacobian_matrix(z0))
    rmap = cmap.realify()
    det_r = np.linalg.det(rmap.jacobian_matrix(interleave(z0)))
    lhs = abs(det_c) ** 2
    rel = abs(det_r - lhs) / max(1.0, abs(lhs))
    return {
        "abs_det_complex_sq": float(lhs),
        "det_realified": float(det_r.real),
        "rel_error": float(rel),
    }


def spectrum_identity_check(cmap: ComplexPolyMap, z0, tol=SPECTRUM_TOL):
    """Spec DG-hat must equal Spec DG union its conjugates, with multiplicity."""
    z0 = np.asarray(z0, dtype=complex)
    spec_c = np.linalg.eigvals(cmap.jacobian_matrix(z0))
    rmap = cmap.realify()
    spec_r = np.linalg.eigvals(rmap.jacobian_matrix(interleave(z0)))
    expected = np.concatenate([spec_c, np.conj(spec_c)])
    dist = _match_multisets(expected, spec_r)
    return SpectrumReport(
        point=z0,
        spectrum_complex=np.sort_complex(spec_c),
        spectrum_realified=np.sort_complex(spec_r),
        max_pairing_distance=dist,
        match=bool(dist <= tol),
    )


def _verify_homogeneous(hmap, degree, rng, rel_tol=1e-10, n_checks=8):
    """Numerical guard: H(t x) = t^k H(x) at random t, x."""
    n = hmap.dim
    is_complex = isinstance(hmap, ComplexPolyMap)
    for _ in range(n_checks):
        if is_complex:
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        else:
            x = rng.standard_normal(n)
        t = rng.uniform(0.3, 2.0)
        lhs = hmap.evaluate(t * x)
        rhs = t**degree * hmap.evaluate(x)
        scale = 1.0 + np.max(np.abs(rhs))
        if np.max(np.abs(lhs - rhs)) > rel_tol * scale:
            return False
    return True


def nilpotent_homogeneous_check(hmap, degree, n_samples=100, seed=0, tol=SPECTRUM_TOL):
    """Max |eigenvalue| of DH over random samples; PASS iff spectra vanish.

    hmap must be the homogeneous part itself (degree > 1), real or complex.
    """
    if degree <= 1:
        raise ValueError("degree must exceed 1")
    rng = np.random.default_rng(seed)
    if not _verify_homogeneous(hmap, degree, rng):
        raise ValueError(f"{hmap.name!r} is not homogeneous of degree {degree}")
    is_complex = isinstance(hmap, ComplexPolyMap)
    worst = 0.0
    for _ in range(n_samples):
        if is_complex:
            x = rng.standard_normal(hmap.dim) + 1j * rng.standard_normal(hmap.dim)
        else:
            x = rng.standard_normal(hmap.dim)
        eigs = np.linalg.eigvals(hmap.jacobian_matrix(x))
        worst = max(worst, float(np.max(np.abs(eigs))))
    return {
        "map": hmap.name,
        "degree": degree,
        "n_samples": n_samples,
        "max_abs_eigenvalue": worst,
        "pass": worst <= tol,
    }


def _cubic_part_real(pmap: PolyMap):
    """Split a real polynomial map as I + H, H cubic homogeneous."""
    n = pmap.dim
    h_comps = []
    for i, comp in enumerate(pmap.components):
        lin = tuple(1 if j == i else 0 for j in range(n))
        rest = {}
        for exps, coeff in comp.items():
            if exps == lin:
                if abs(coeff - 1.0) > 1e-14:
                    raise ValueError("linear part is not the identity")
                continue
            if sum(exps) != 3 and coeff != 0:
                raise ValueError("higher-order part is not cubic homogeneous")
            rest[exps] = coeff
        h_comps.append(rest)
    return h_comps


def euler_relation_certificate(pmap: PolyMap, n_samples=100, box_halfwidth=2.0, seed=0):
    """Certificate that 0 is covered once by F = I + H, H cubic homogeneous.

    Checks (a) the identity DF(x)x = 3F(x) - 2x at samples and (b) that -2
    never appears in Spec DF(x); together these preclude a nonzero root of F.
    """
    _cubic_part_real(pmap)  # raises if the decomposition is missing
    rng = np.random.default_rng(seed)
    n = pmap.dim
    max_residual = 0.0
    min_gap_to_minus_two = np.inf
    for _ in range(n_samples):
        x = rng.uniform(-box_halfwidth, box_halfwidth, size=n)
        J = pmap.jacobian_matrix(x)
        residual = np.linalg.norm(J @ x - 3 * pmap.evaluate(x) + 2 * x)
        max_residual = max(max_residual, float(residual))
        eigs = np.linalg.eigvals(J)
        min_gap_to_minus_two = min(
            min_gap_to_minus_two, float(np.min(np.abs(eigs + 2.0)))
        )
    passed = max_residual <= 1e-10 and min_gap_to_minus_two > SPECTRUM_TOL
    return {
        "map": pmap.name,
        "n_samples": n_samples,
        "max_euler_residual": max_residual,
        "min_gap_to_minus_two": min_gap_to_minus_two,
        "pass": passed,
    }


def random_cubic_cmap(n, rng, scale=0.7):
    """A random complex polynomial map with terms of degree <= 3.

    Coefficients are kept modest so eigen-solves stay well conditioned;
    used by the identity-check suites and the verify-identities command.
    """
    from itertools import combinations_with_replacement

    exps = []
    for deg in range(4):
        for combo in combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            exps.append(tuple(e))
    components = []
    for _ in range(n):
        comp = {}
        for e in exps:
            c = scale * (rng.standard_normal() + 1j * rng.standard_normal())
            comp[e] = c / (1.0 + sum(e) ** 2)
        components.append(comp)
    return ComplexPolyMap("random_cubic", components)
