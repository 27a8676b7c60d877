"""Sparse multivariate polynomials as exponent-tuple -> coefficient dicts.

Coefficients may be real or complex.  These are deliberately minimal:
the maps in the catalog have few monomials and small degree, so dict
arithmetic is more than fast enough and keeps derivatives exact.
"""

from __future__ import annotations

import numpy as np

# A polynomial is dict[tuple[int, ...], float | complex]; all exponent
# tuples in one polynomial must have the same length (the variable count).


def poly_eval(poly, x):
    total = 0.0
    for exps, coeff in poly.items():
        term = coeff
        for xi, e in zip(x, exps):
            if e:
                term = term * xi**e
        total = total + term
    return total


def poly_diff(poly, i):
    """Partial derivative with respect to variable i."""
    out = {}
    for exps, coeff in poly.items():
        e = exps[i]
        if e == 0:
            continue
        new = list(exps)
        new[i] = e - 1
        key = tuple(new)
        out[key] = out.get(key, 0) + e * coeff
    return out


def poly_add(p, q):
    out = dict(p)
    for exps, coeff in q.items():
        out[exps] = out.get(exps, 0) + coeff
    return {e: c for e, c in out.items() if c != 0}


def poly_scale(p, s):
    return {e: s * c for e, c in p.items()}


def poly_mul(p, q):
    out = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            key = tuple(a + b for a, b in zip(e1, e2))
            out[key] = out.get(key, 0) + c1 * c2
    return {e: c for e, c in out.items() if c != 0}


def poly_degree(poly):
    if not poly:
        return 0
    return max(sum(e) for e in poly)


def poly_nvars(poly):
    for exps in poly:
        return len(exps)
    return 0


def poly_real(poly):
    return {e: np.real(c) for e, c in poly.items() if np.real(c) != 0}


def poly_imag(poly):
    return {e: np.imag(c) for e, c in poly.items() if np.imag(c) != 0}


def poly_pow(p, k, nvars):
    out = {(0,) * nvars: 1.0}
    for _ in range(k):
        out = poly_mul(out, p)
    return out
