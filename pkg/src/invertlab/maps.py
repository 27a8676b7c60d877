"""Catalog of the maps under study, with exact Jacobians.

Maps come in three kinds: hand-coded transcendental builtins, real
polynomial maps, and realifications of complex polynomial maps.  All
catalog maps are entire, so evaluate/jacobian are defined everywhere.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .polynomials import poly_diff, poly_eval, poly_nvars


class MapSpec:
    """A differentiable map R^n -> R^n with exact Jacobian evaluation.

    Immutable after construction; evaluate/jacobian are pure.
    """

    name: str
    dim: int
    kind: str

    def evaluate(self, x):
        raise NotImplementedError

    def jacobian_matrix(self, x):
        raise NotImplementedError

    def _check_dim(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(
                f"map {self.name!r} has dimension {self.dim}, got point of shape {x.shape}"
            )
        return x


@dataclass(frozen=True)
class JacobianSample:
    point: np.ndarray
    matrix: np.ndarray
    det: float


class BuiltinMap(MapSpec):
    kind = "builtin"

    def __init__(self, name, dim, f, jac):
        self.name = name
        self.dim = dim
        self._f = f
        self._jac = jac

    def evaluate(self, x):
        return self._f(self._check_dim(x))

    def jacobian_matrix(self, x):
        return self._jac(self._check_dim(x))


class PolyMap(MapSpec):
    """Real polynomial map given by per-component monomial lists.

    The Jacobian polynomials are derived symbolically once at
    construction, so downstream Newton solves see exact derivatives.
    """

    kind = "polynomial-real"

    def __init__(self, name, components, kind=None):
        dims = {poly_nvars(c) for c in components if c}
        if len(dims) > 1:
            raise ValueError("components disagree on variable count")
        self.name = name
        self.dim = len(components)
        self.components = [dict(c) for c in components]
        self._jac_polys = [
            [poly_diff(c, j) for j in range(self.dim)] for c in self.components
        ]
        if kind is not None:
            self.kind = kind

    def evaluate(self, x):
        x = self._check_dim(x)
        return np.array([poly_eval(c, x) for c in self.components], dtype=float)

    def jacobian_matrix(self, x):
        x = self._check_dim(x)
        return np.array(
            [[poly_eval(p, x) for p in row] for row in self._jac_polys], dtype=float
        )


def evaluate(mapspec: MapSpec, x) -> np.ndarray:
    return mapspec.evaluate(x)


def jacobian(mapspec: MapSpec, x) -> JacobianSample:
    x = np.asarray(x, dtype=float)
    J = mapspec.jacobian_matrix(x)
    return JacobianSample(point=x, matrix=J, det=float(np.linalg.det(J)))


def finite_difference_jacobian(mapspec: MapSpec, x, h=1e-5):
    """Central finite differences; used only to validate exact Jacobians."""
    x = np.asarray(x, dtype=float)
    n = mapspec.dim
    J = np.empty((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        J[:, j] = (mapspec.evaluate(x + step) - mapspec.evaluate(x - step)) / (2 * h)
    return J


@dataclass
class DiffeoScanReport:
    map_name: str
    n_samples: int
    seed: int
    min_abs_det: float
    argmin_point: np.ndarray
    sign_change: bool
    flagged: int
    tolerance: float


def local_diffeo_scan(mapspec: MapSpec, box, n_samples, seed=0, tol=1e-12):
    """Sample |det DF| over a box; flag zeros/sign changes.

    A hypothesis check for "local diffeomorphism", not a proof: a clean
    scan only says no singular point was sampled.
    """
    box = np.asarray(box, dtype=float)
    if box.shape != (mapspec.dim, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be (n, 2) with low < high per axis")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(n_samples, mapspec.dim))
    dets = np.array([np.linalg.det(mapspec.jacobian_matrix(p)) for p in pts])
    abs_dets = np.abs(dets)
    k = int(np.argmin(abs_dets))
    return DiffeoScanReport(
        map_name=mapspec.name,
        n_samples=n_samples,
        seed=seed,
        min_abs_det=float(abs_dets[k]),
        argmin_point=pts[k],
        sign_change=bool(dets.min() < 0 < dets.max()),
        flagged=int(np.sum(abs_dets <= tol)),
        tolerance=tol,
    )


# --- builtin maps -----------------------------------------------------------


def _braun_f(x):
    a, b, c = x
    e = np.exp(a)
    return np.array([c**5 + e * np.cos(b), c**3 + e * np.sin(b), c])


def _braun_jac(x):
    a, b, c = x
    e = np.exp(a)
    return np.array(
        [
            [e * np.cos(b), -e * np.sin(b), 5 * c**4],
            [e * np.sin(b), e * np.cos(b), 3 * c**2],
            [0.0, 0.0, 1.0],
        ]
    )


def _exp_c2_f(x):
    # (e^{z1}, z2 e^{-z1}) realified, coordinates (x1, y1, x2, y2).
    x1, y1, x2, y2 = x
    ep, em = np.exp(x1), np.exp(-x1)
    c, s = np.cos(y1), np.sin(y1)
    return np.array(
        [ep * c, ep * s, em * (x2 * c + y2 * s), em * (y2 * c - x2 * s)]
    )


def _exp_c2_jac(x):
    x1, y1, x2, y2 = x
    ep, em = np.exp(x1), np.exp(-x1)
    c, s = np.cos(y1), np.sin(y1)
    w3 = em * (x2 * c + y2 * s)
    w4 = em * (y2 * c - x2 * s)
    return np.array(
        [
            [ep * c, -ep * s, 0.0, 0.0],
            [ep * s, ep * c, 0.0, 0.0],
            [-w3, w4, em * c, em * s],
            [-w4, -w3, -em * s, em * c],
        ]
    )


def _identity(n):
    eye = np.eye(n)
    return BuiltinMap(f"identity{n}", n, lambda x: x.copy(), lambda x: eye.copy())


def cubic_shear():
    """F(x, y) = (x + y^3, y): identity plus a cubic-homogeneous shear."""
    return PolyMap(
        "cubic_shear", [{(1, 0): 1.0, (0, 3): 1.0}, {(0, 1): 1.0}]
    )


_BUILTIN_FACTORIES = {
    "braun3d": lambda: BuiltinMap("braun3d", 3, _braun_f, _braun_jac),
    "exp_c2": lambda: BuiltinMap("exp_c2", 4, _exp_c2_f, _exp_c2_jac),
    "cubic_shear": cubic_shear,
}


def get_map(name: str) -> MapSpec:
    """Look up a builtin map by name (`braun3d`, `exp_c2`, `cubic_shear`, `identity<n>`)."""
    if name in _BUILTIN_FACTORIES:
        return _BUILTIN_FACTORIES[name]()
    if name.startswith("identity"):
        try:
            n = int(name[len("identity"):])
        except ValueError:
            raise KeyError(f"unknown map {name!r}") from None
        if n < 1:
            raise KeyError(f"identity dimension must be >= 1, got {n}")
        return _identity(n)
    raise KeyError(f"unknown map {name!r}")


def _parse_coeff(text):
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        return complex(text.replace(" ", ""))


def load_map_config(path) -> MapSpec:
    """Load a polynomial map from a key=value config file.

    Layout: a [map] section with name/kind/dimension, then one
    [component.k] section per output component whose entries map an
    exponent tuple ("2 0 1") to a coefficient ("3.5" or "1+2j").
    Complex-kind configs describe a ComplexPolyMap and are realified.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(path)
    if "map" not in cp:
        raise ValueError(f"{path}: missing [map] section")
    head = cp["map"]
    name = head.get("name", "config-map")
    kind = head.get("kind", "polynomial-real")
    try:
        dim = int(head["dimension"])
    except KeyError:
        raise ValueError(f"{path}: [map] needs a dimension") from None

    components = []
    for k in range(1, dim + 1):
        section = f"component.{k}"
        if section not in cp:
            raise ValueError(f"{path}: missing [{section}]")
        poly = {}
        for key, value in cp[section].items():
            exps = tuple(int(t) for t in key.split())
            if len(exps) != dim:
                raise ValueError(
                    f"{path}: [{section}] exponent tuple {key!r} has wrong length"
                )
            poly[exps] = _parse_coeff(value)
        components.append(poly)

    if kind == "polynomial-real":
        return PolyMap(name, components)
    if kind == "polynomial-complex-realified":
        from .spectral import ComplexPolyMap

        return ComplexPolyMap(name, components).realify()
    raise ValueError(f"{path}: unknown kind {kind!r}")
