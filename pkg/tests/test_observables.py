import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfqm import observables as ob
from pfqm.dispersion import LowerBranchCurvature
from pfqm.dynamics import Gaussian, ModelParams, PumpSpec, SimState
from pfqm.spectral import Grid, SpectralField

SQUARE = Grid.square(40.0, 128)


def _ring(r0, width=1.0, grid=SQUARE, center=(0.0, 0.0)):
    r = grid.radius(center)
    return np.exp(-((r - r0) ** 2) / width**2)


def test_total_mass_of_gaussian():
    xx, yy = SQUARE.mesh()
    f = SpectralField(SQUARE, np.exp(-(xx**2 + yy**2) / 2))
    # integral of exp(-r^2) over the plane is pi
    assert ob.total_mass(f) == pytest.approx(np.pi, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(sx=st.integers(0, 127), sy=st.integers(0, 127))
def test_total_mass_translation_invariant(sx, sy):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(SQUARE.shape) + 1j * rng.standard_normal(SQUARE.shape)
    a = ob.total_mass(SpectralField(SQUARE, v))
    b = ob.total_mass(SpectralField(SQUARE, np.roll(v, (sy, sx), axis=(0, 1))))
    assert b == pytest.approx(a, rel=1e-13)


def test_density_phase_convention_and_mask():
    g = Grid.line(10.0, 8)
    v = np.array([1, -1, 1j, -1j, 1e-20, 0, -1 - 1e-300j, 2], dtype=complex)
    rho, ph = ob.density_phase(SpectralField(g, v))
    np.testing.assert_allclose(rho[:4], 1.0)
    assert ph[1] == pytest.approx(np.pi)
    # -pi folds onto pi
    assert ph[6] == pytest.approx(np.pi)
    assert np.isnan(ph[4]) and np.isnan(ph[5])
    assert np.all((ph[np.isfinite(ph)] > -np.pi) & (ph[np.isfinite(ph)] <= np.pi))


@pytest.mark.parametrize("r0", [3.0, 7.5, 12.2])
def test_ring_radius_synthetic(r0):
    prof = ob.radial_profile(_ring(r0), SQUARE, n_bins=80)
    est = ob.ring_radius(prof)
    assert est.ring
    assert est.radius == pytest.approx(r0, abs=0.1)
    assert est.diameter == pytest.approx(2 * est.radius)


def test_ring_radius_off_centre():
    c = (2.0, -3.0)
    est = ob.ring_radius(ob.radial_profile(_ring(6.0, center=c), SQUARE, center=c, n_bins=80))
    assert est.radius == pytest.approx(6.0, abs=0.1)


def test_centred_blob_is_not_a_ring():
    xx, yy = SQUARE.mesh()
    est = ob.ring_radius(ob.radial_profile(np.exp(-(xx**2 + yy**2)), SQUARE))
    assert not est.ring and est.radius == 0.0


def test_radial_profile_mass_consistency():
    rng = np.random.default_rng(5)
    for _ in range(20):
        d = rng.random(SQUARE.shape) * _ring(rng.uniform(2, 12), rng.uniform(1, 4))
        prof = ob.radial_profile(d, SQUARE, n_bins=64)
        inside = SQUARE.radius() < 20.0
        direct = d[inside].sum() * SQUARE.cell_area
        binned = np.nansum(prof.mean * prof.bin_areas())
        assert binned == pytest.approx(direct, rel=0.02)


def test_radial_profile_counts_and_empty_bins():
    prof = ob.radial_profile(np.ones(SQUARE.shape), SQUARE, n_bins=400)
    assert prof.counts[0] >= 1
    assert np.isnan(prof.mean[prof.counts == 0]).all()
    assert np.allclose(prof.mean[prof.counts > 0], 1.0)


def test_radial_profile_errors():
    with pytest.raises(ob.ObservableError):
        ob.radial_profile(np.ones(8), Grid.line(10.0, 8))
    with pytest.raises(ob.ObservableError):
        ob.radial_profile(np.ones(SQUARE.shape), SQUARE, n_bins=3)
    with pytest.raises(ob.ObservableError):
        ob.radial_profile(np.ones(SQUARE.shape), SQUARE, center=(30.0, 0.0))


def test_second_moment_gaussian():
    xx, yy = SQUARE.mesh()
    d = np.exp(-(xx**2 + yy**2))
    # <r^2> for exp(-r^2) is 1
    assert ob.second_moment(d, SQUARE) == pytest.approx(1.0, rel=1e-10)
    assert ob.second_moment(np.zeros(SQUARE.shape), SQUARE) == 0.0


def test_mass_balance_residual_second_order():
    grid = Grid.line(30.0, 128)
    params = ModelParams(
        kinetic=LowerBranchCurvature(), alpha=0.3, gamma=0.4, eta=0.05,
        pump=PumpSpec(Gaussian(0.8, 3.0), (0.7,), 0.1),
    )
    state = SimState(SpectralField(grid, np.exp(-grid.x**2 / 3) * (1 + 0.3j)), 0.5)
    r = [ob.mass_balance_residual(state, params, dt) for dt in (4e-3, 2e-3, 1e-3)]
    p = np.polyfit(np.log([4e-3, 2e-3, 1e-3]), np.log(r), 1)[0]
    assert p >= 1.8


def test_timeseries_validation():
    with pytest.raises(ob.ObservableError):
        ob.TimeSeries([0.0, 1.0, 1.0], {"M": [1, 2, 3]})
    with pytest.raises(ob.ObservableError):
        ob.TimeSeries([0.0, 1.0], {"M": [1, 2, 3]})


def test_csv_writers(tmp_path):
    ts = ob.TimeSeries([0.0, 0.5, 1.0], {"M": [1.0, 0.9, 0.8], "max_abs": [1.0, 1.0, 0.9]})
    ob.write_timeseries_csv(tmp_path / "ts.csv", ts)
    data = np.genfromtxt(tmp_path / "ts.csv", delimiter=",", names=True)
    np.testing.assert_array_equal(data["t_ps"], ts.times)
    np.testing.assert_array_equal(data["M"], ts["M"])

    prof = ob.radial_profile(_ring(5.0), SQUARE, n_bins=16)
    ob.write_profile_csv(tmp_path / "p.csv", prof)
    back = np.genfromtxt(tmp_path / "p.csv", delimiter=",", names=True)
    np.testing.assert_array_equal(back["r_um"], prof.radii)
    np.testing.assert_array_equal(back["count"], prof.counts)

    grid_vals = np.arange(12.0).reshape(3, 4) / 7
    ob.write_grid_csv(tmp_path / "g.csv", grid_vals)
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "g.csv", delimiter=","), grid_vals)


def test_png_writer(tmp_path):
    pytest.importorskip("matplotlib")
    d = _ring(5.0)
    d[0, 0] = np.nan
    ob.write_png(tmp_path / "d.png", d)
    assert (tmp_path / "d.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
