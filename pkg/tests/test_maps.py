import numpy as np
import pytest

from invertlab.maps import (
    get_map,
    finite_difference_jacobian,
    local_diffeo_scan,
    load_map_config,
    cubic_shear,
)
from invertlab.spectral import ComplexPolyMap

BUILTINS = ["identity3", "braun3d", "exp_c2", "cubic_shear"]


def z2_real():
    return ComplexPolyMap("z2", [{(2,): 1.0}]).realify()


def iz_real():
    return ComplexPolyMap("iz", [{(1,): 1j}]).realify()


@pytest.mark.parametrize("name", BUILTINS)
def test_jacobian_matches_finite_differences(name):
    mp = get_map(name)
    rng = np.random.default_rng(7)
    for x in rng.uniform(-2, 2, size=(100, mp.dim)):
        J = mp.jacobian_matrix(x)
        Jfd = finite_difference_jacobian(mp, x)
        scale = 1.0 + np.abs(J).max()
        assert np.abs(J - Jfd).max() <= 1e-6 * scale


def test_braun3d_determinant_closed_form():
    mp = get_map("braun3d")
    rng = np.random.default_rng(3)
    for x in rng.uniform(-3, 3, size=(100, 3)):
        det = np.linalg.det(mp.jacobian_matrix(x))
        exact = np.exp(2.0 * x[0])
        assert abs(det - exact) <= 1e-12 * abs(exact)


def test_realified_maps_have_nonnegative_determinant():
    # realified holomorphic maps: det DF = |f'(z)|^2 >= 0
    rng = np.random.default_rng(11)
    for mp in (z2_real(), iz_real(), get_map("exp_c2")):
        for x in rng.uniform(-2, 2, size=(50, mp.dim)):
            det = np.linalg.det(mp.jacobian_matrix(x))
            assert det >= -1e-12


def test_local_diffeo_scan_braun3d():
    mp = get_map("braun3d")
    box = np.array([[-3, 3], [-3, 3], [-3, 3]], dtype=float)
    rep = local_diffeo_scan(mp, box, n_samples=10000, seed=0)
    assert rep.flagged == 0
    assert not rep.sign_change
    # det = e^{2x} >= e^{-6} on the box
    assert rep.min_abs_det >= np.exp(-6.0) * (1 - 1e-9)


def test_local_diffeo_scan_flags_z2_near_origin():
    mp = z2_real()
    box = np.array([[-0.1, 0.1], [-0.1, 0.1]], dtype=float)
    rep = local_diffeo_scan(mp, box, n_samples=2000, seed=0, tol=1e-3)
    assert rep.flagged > 0


def test_scan_determinism():
    mp = get_map("braun3d")
    box = np.array([[-3, 3]] * 3, dtype=float)
    r1 = local_diffeo_scan(mp, box, n_samples=500, seed=5)
    r2 = local_diffeo_scan(mp, box, n_samples=500, seed=5)
    assert r1.min_abs_det == r2.min_abs_det
    assert np.array_equal(r1.argmin_point, r2.argmin_point)


def test_cubic_shear_values():
    mp = cubic_shear()
    x = np.array([1.5, -0.7])
    assert np.allclose(mp.evaluate(x), [x[0] + x[1] ** 3, x[1]], atol=1e-14)
    assert abs(np.linalg.det(mp.jacobian_matrix(x)) - 1.0) <= 1e-14


def test_load_map_config_roundtrip(tmp_path):
    ref = cubic_shear()
    path = tmp_path / "shear.ini"
    path.write_text(
        "[map]\n"
        "name = shear_from_file\n"
        "kind = polynomial-real\n"
        "dimension = 2\n"
        "[component.1]\n"
        "1 0 = 1.0\n"
        "0 3 = 1.0\n"
        "[component.2]\n"
        "0 1 = 1.0\n"
    )
    mp = load_map_config(path)
    assert mp.name == "shear_from_file"
    rng = np.random.default_rng(0)
    for x in rng.uniform(-2, 2, size=(20, 2)):
        assert np.allclose(mp.evaluate(x), ref.evaluate(x), atol=1e-13)


def test_load_map_config_errors(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[map]\nname = x\nkind = polynomial-real\n")
    with pytest.raises(ValueError):
        load_map_config(p)
    with pytest.raises(FileNotFoundError):
        load_map_config(tmp_path / "missing.ini")
