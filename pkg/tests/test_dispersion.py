import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfqm import dispersion as disp

P = disp.default_cavity_params()


def _mp_lower(k, p=P):
    # independent high-precision lower branch
    k = mp.mpf(k)
    ec = mp.mpf(p.cavity_offset) + k**2 / (2 * mp.mpf(p.photon_mass))
    ex = mp.mpf(p.exciton_energy) + k**2 / (2 * mp.mpf(p.exciton_mass))
    return (ec + ex) / 2 - mp.sqrt((ex - ec) ** 2 + 4 * mp.mpf(p.rabi) ** 2) / 2


def _mp_curvature(k, p=P):
    with mp.workdps(40):
        return float(mp.diff(lambda q: _mp_lower(q, p), k, 2))


@pytest.mark.parametrize("k", [0.0, 0.3, 1.0, 1.3952, 2.0, 2.84, 5.0, 10.38])
def test_curvature_matches_high_precision_derivative(k):
    got = float(disp.lower_branch_curvature(k, P))
    want = _mp_curvature(k)
    assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_branch_sum_and_splitting():
    k = np.linspace(0, 8, 101)
    e_l, e_u = disp.branch_energies(k, P)
    ec, ex = disp.cavity_energy(k, P), disp.exciton_energy(k, P)
    np.testing.assert_allclose(e_l + e_u, ec + ex, rtol=1e-14)
    np.testing.assert_allclose(e_u - e_l, np.sqrt((ex - ec) ** 2 + 4 * P.rabi**2), rtol=1e-9)
    assert np.all(e_l <= np.minimum(ec, ex)) and np.all(e_u >= np.maximum(ec, ex))


def test_zero_detuning_rabi_gap():
    e_l, e_u = disp.branch_energies(0.0, P)
    assert e_u - e_l == pytest.approx(2 * P.rabi, rel=1e-12)


def test_inflection_default_and_root():
    k_inf = disp.find_inflection(P)
    assert abs(k_inf - 1.3952) < 1e-3
    assert abs(disp.lower_branch_curvature(k_inf, P)) < 1e-9
    # a genuine sign change
    assert disp.lower_branch_curvature(k_inf - 1e-4, P) > 0 > disp.lower_branch_curvature(k_inf + 1e-4, P)


def test_calibrate_reproduces_default_rabi():
    assert disp.calibrate_rabi() == pytest.approx(disp.DEFAULT_RABI, rel=1e-10)


def test_bracket_without_sign_change():
    with pytest.raises(disp.BracketError):
        disp.find_inflection(P, bracket=(0.01, 1.0))


def test_negative_k_rejected():
    with pytest.raises(disp.DispersionError):
        disp.branch_energies(-1.0, P)


@pytest.mark.parametrize("field", ["photon_mass", "exciton_mass", "rabi", "exciton_energy"])
def test_nonpositive_params_rejected(field):
    with pytest.raises(disp.DispersionError):
        disp.default_cavity_params(**{field: 0.0})


def test_exact_cavity_matches_parabola_at_small_k():
    exact = disp.default_cavity_params(exact_cavity=True)
    k = np.array([0.0, 1e-3, 1e-2])
    np.testing.assert_allclose(disp.cavity_energy(k, exact), disp.cavity_energy(k, P), rtol=0, atol=1e-9)
    # the square-root photon bends down relative to the parabola
    assert disp.cavity_energy(50.0, exact) < disp.cavity_energy(50.0, P)


def test_exact_cavity_curvature_against_finite_difference():
    exact = disp.default_cavity_params(exact_cavity=True)
    k, h = 3.0, 1e-3
    e = lambda q: disp.branch_energies(q, exact)[0]  # noqa: E731
    fd = (e(k + h) - 2 * e(k) + e(k - h)) / h**2
    assert disp.lower_branch_curvature(k, exact) == pytest.approx(fd, rel=1e-4)


def test_upper_branch_curvature_finite_difference():
    k, h = 2.0, 1e-3
    e = lambda q: disp.branch_energies(q, P)[1]  # noqa: E731
    fd = (e(k + h) - 2 * e(k) + e(k - h)) / h**2
    assert disp.upper_branch_curvature(k, P) == pytest.approx(fd, rel=1e-4)


def test_mass_unit_round_trip():
    assert disp.mass_to_electron_masses(disp.mass_from_electron_masses(0.37)) == pytest.approx(0.37, rel=1e-15)
    # hbar^2 / (2 m_e) = 38.0998 meV nm^2 = 3.80998e-5 meV um^2
    assert 1 / (2 * disp.ELECTRON_MASS) == pytest.approx(3.809982110968584e-05, rel=1e-12)


def test_band_bottom_mass_near_two_ten_thousandths():
    # mixing halves the photon mass share at zero detuning: m ~ 2 m_c
    m = disp.mass_to_electron_masses(disp.band_bottom_mass(P))
    assert m == pytest.approx(2e-4, rel=1e-3)


# Kinetic symbols ---------------------------------------------------------------


def test_constant_mass_symbol():
    spec = disp.ConstantMass(2.0)
    assert disp.kinetic_prefactor_g(3.0, spec) == pytest.approx(9.0 / 4.0)
    assert disp.kinetic_prefactor_g(3.0, disp.ConstantMass(2.0, prefactor_half=False)) == pytest.approx(4.5)


def test_curvature_symbol_is_k2_times_curvature():
    spec = disp.LowerBranchCurvature(P)
    k = np.linspace(0, 10, 41)
    np.testing.assert_allclose(disp.kinetic_prefactor_g(k, spec), 0.5 * k * k * disp.lower_branch_curvature(k, P))


def test_curvature_symbol_sign_change_at_inflection():
    spec = disp.LowerBranchCurvature(P)
    k_inf = disp.find_inflection(P)
    assert disp.kinetic_prefactor_g(0.9 * k_inf, spec) > 0 > disp.kinetic_prefactor_g(1.1 * k_inf, spec)


def test_curvature_and_band_bottom_mass_agree_at_small_k():
    curv = disp.LowerBranchCurvature(P)
    const = disp.ConstantMass(disp.band_bottom_mass(P))
    k = 1e-3
    assert disp.kinetic_prefactor_g(k, curv) == pytest.approx(disp.kinetic_prefactor_g(k, const), rel=1e-5)


def test_fractional_slope():
    spec = disp.FractionalPower(5 / 6)
    k = np.geomspace(0.1, 3.0, 50)
    slope = np.polyfit(np.log(k), np.log(disp.kinetic_prefactor_g(k, spec)), 1)[0]
    assert slope == pytest.approx(5 / 3, abs=1e-12)


@pytest.mark.parametrize("s", [0.0, -0.5, 1.5])
def test_fractional_power_domain(s):
    with pytest.raises(disp.DispersionError):
        disp.FractionalPower(s)


def test_tabulated_reproduces_nodes_and_rejects_outside():
    k = np.linspace(0, 4, 17)
    g = np.sin(k) * k
    spec = disp.Tabulated(k, g, prefactor_half=False)
    np.testing.assert_allclose(disp.kinetic_prefactor_g(k, spec), g, atol=1e-14)
    with pytest.raises(disp.OutOfDomainError):
        disp.kinetic_prefactor_g(4.5, spec)


def test_tabulated_validation():
    with pytest.raises(disp.DispersionError):
        disp.Tabulated(np.array([0.0, 1.0, 0.5]), np.zeros(3))
    with pytest.raises(disp.DispersionError):
        disp.Tabulated(np.array([0.0]), np.zeros(1))


def test_fit_power_law_pointwise_and_normwise():
    k = np.linspace(0.1, 1, 20)
    c, err = disp.fit_power_law(k, 3.0 * k**2, 2.0, "pointwise")
    assert c == pytest.approx(3.0) and err < 1e-12
    c, err = disp.fit_power_law(k, 3.0 * k**2, 2.0, "normwise")
    assert c == pytest.approx(3.0, rel=1e-6) and err < 1e-6


@settings(max_examples=50, deadline=None)
@given(
    rabi=st.floats(0.3, 5.0),
    mc=st.floats(2e-5, 5e-4),
    detuning=st.floats(-2.0, 2.0),
    k=st.floats(0.0, 12.0),
)
def test_curvature_against_mpmath_random_params(rabi, mc, detuning, k):
    p = disp.default_cavity_params(
        rabi=rabi, photon_mass=disp.mass_from_electron_masses(mc), cavity_offset=1557.0 + detuning
    )
    want = _mp_curvature(k, p)
    assert abs(float(disp.lower_branch_curvature(k, p)) - want) <= 1e-9 * max(1.0, abs(want))
