import numpy as np
import pytest

from invertlab.maps import cubic_shear, PolyMap
from invertlab.spectral import (
    ComplexPolyMap,
    complexify,
    interleave,
    det_identity_check,
    spectrum_identity_check,
    nilpotent_homogeneous_check,
    euler_relation_certificate,
    random_cubic_cmap,
)


def test_realify_z2():
    mp = ComplexPolyMap("z2", [{(2,): 1.0}]).realify()
    rng = np.random.default_rng(0)
    for x, y in rng.uniform(-2, 2, size=(25, 2)):
        out = mp.evaluate(np.array([x, y]))
        assert np.allclose(out, [x * x - y * y, 2 * x * y], atol=1e-12)


def test_realify_iz():
    mp = ComplexPolyMap("iz", [{(1,): 1j}]).realify()
    x = np.array([0.3, -1.2])
    assert np.allclose(mp.evaluate(x), [1.2, 0.3], atol=1e-14)


def test_interleave_complexify_inverse():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(complexify(interleave(z)), z)


def test_spectrum_of_iz_realified():
    # Dz(iz) = {i}; the realified derivative has spectrum {i, -i}
    cmap = ComplexPolyMap("iz", [{(1,): 1j}])
    rep = spectrum_identity_check(cmap, np.array([0.4 + 0.1j]))
    assert rep.match
    got = sorted(rep.spectrum_realified, key=lambda w: w.imag)
    assert np.allclose(got, [-1j, 1j], atol=1e-12)


def test_det_identity_random_maps():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        cmap = random_cubic_cmap(n, rng)
        z0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        chk = det_identity_check(cmap, z0)
        assert chk["rel_error"] <= 1e-10


def test_spectrum_identity_random_maps():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        cmap = random_cubic_cmap(n, rng)
        z0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        rep = spectrum_identity_check(cmap, z0)
        assert rep.match
        assert rep.max_pairing_distance <= 1e-8
        # realified spectrum is closed under conjugation
        eigs = np.sort_complex(rep.spectrum_realified)
        conj = np.sort_complex(np.conj(rep.spectrum_realified))
        assert np.allclose(eigs, conj, atol=1e-8)


def test_nilpotent_cubic_part():
    h = ComplexPolyMap("h", [{(0, 3): 1.0}, {}])
    rep = nilpotent_homogeneous_check(h, 3, n_samples=50)
    assert rep["pass"]
    assert rep["max_abs_eigenvalue"] <= 1e-12


def test_nilpotent_check_rejects_inhomogeneous():
    bad = ComplexPolyMap("bad", [{(0, 3): 1.0, (0, 1): 1.0}, {}])
    with pytest.raises(ValueError):
        nilpotent_homogeneous_check(bad, 3)


def test_homogeneous_split():
    cmap = ComplexPolyMap(
        "shear", [{(1, 0): 1.0, (0, 3): 2.0}, {(0, 1): 1.0}]
    )
    h, k = cmap.homogeneous_split()
    assert k == 3
    assert h[0] == {(0, 3): 2.0}
    assert h[1] == {}


def test_euler_relation_cubic_shear():
    rep = euler_relation_certificate(cubic_shear())
    assert rep["pass"]
    assert rep["max_euler_residual"] <= 1e-12


def test_euler_relation_rejects_quadratic():
    bad = PolyMap("quad", [{(1, 0): 1.0, (0, 2): 1.0}, {(0, 1): 1.0}])
    with pytest.raises(ValueError):
        euler_relation_certificate(bad)
