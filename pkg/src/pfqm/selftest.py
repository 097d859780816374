"""Quick invariant suite behind ``pfqm selftest``.

Each check returns the measured number next to its threshold so a failing
report says how far off it was.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytic, dispersion as disp, spectral
from .dynamics import Gaussian, Harmonic, ModelParams, PumpSpec, SimState, SplitStepper, evolve
from .observables import mass_balance_residual


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} ({self.threshold})"


def _rng():
    return np.random.default_rng(20240611)


def check_parseval() -> CheckResult:
    rng = _rng()
    worst = 0.0
    for grid in (spectral.Grid.line(20.0, 256), spectral.Grid.square(20.0, 64)):
        f = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        lhs = np.sum(np.abs(f) ** 2)
        rhs = np.sum(np.abs(spectral.fft(f)) ** 2) / grid.size
        worst = max(worst, abs(lhs - rhs) / lhs)
    return CheckResult("Parseval relative error", worst, "< 1e-12", worst < 1e-12)


def check_eigenfunctions() -> CheckResult:
    grid = spectral.Grid.square(20.0, 64)
    worst = 0.0
    for jx, jy in ((1, 0), (3, -2), (-7, 5), (31, 0)):
        e = grid.plane_wave(jx, jy)
        k = np.hypot(2 * np.pi * jx / grid.lx, 2 * np.pi * jy / grid.ly)
        out = spectral.fractional_laplacian(spectral.SpectralField(grid, e), 5.0 / 6.0).values
        worst = max(worst, np.max(np.abs(out - k ** (5.0 / 3.0) * e)) / max(k ** (5.0 / 3.0), 1e-300))
    return CheckResult("plane-wave eigenfunction error", worst, "< 1e-12", worst < 1e-12)


def _order_problem():
    grid = spectral.Grid.line(40.0, 256)
    params = ModelParams(
        kinetic=disp.LowerBranchCurvature(),
        alpha=0.5,
        gamma=0.5,
        eta=0.05,
        pump=PumpSpec(Gaussian(1.0, 4.0), (0.5,), 0.2),
        potential=Harmonic(0.01),
    )
    psi0 = np.exp(-grid.x**2 / 4) + 0j
    return grid, params, psi0


def strang_errors(dts=(4e-3, 2e-3, 1e-3), t_final=0.4, ref_dt=2.5e-4):
    grid, params, psi0 = _order_problem()

    def run(dt):
        state, _ = evolve(SimState(spectral.SpectralField(grid, psi0), 0.0), params, t_final, dt, stride=10**9)
        return state.values

    ref = run(ref_dt)
    errs = np.array([np.linalg.norm(run(dt) - ref) / np.linalg.norm(ref) for dt in dts])
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    return errs, float(slope)


def check_strang_order() -> CheckResult:
    _, slope = strang_errors()
    return CheckResult("Strang order estimate", slope, "in [1.9, 2.1]", 1.9 <= slope <= 2.1)


def check_cubic_residuals(n: int = 200) -> CheckResult:
    rng = _rng()
    worst = 0.0
    for _ in range(n):
        prob = analytic.PlaneWaveProblem(
            kappa=0.0,
            omega_i=rng.uniform(-2, 2),
            p0=rng.uniform(0, 2),
            alpha=rng.uniform(0.01, 2),
            gamma=rng.uniform(0.01, 1),
            g_at_kappa=rng.uniform(-1, 1),
        )
        for rho in analytic.density_cubic_roots(prob):
            worst = max(worst, analytic.cubic_residual(prob, rho))
    return CheckResult("density cubic residual", worst, "< 1e-10", worst < 1e-10)


def check_bogoliubov(n: int = 200) -> CheckResult:
    rng = _rng()
    kin = disp.LowerBranchCurvature()
    worst = 0.0
    for _ in range(n):
        q = analytic.ResponseQuery(
            k=tuple(rng.uniform(-4, 4, 2)),
            v=tuple(rng.uniform(-2, 2, 2)),
            mu=rng.uniform(0.1, 2),
            gamma=rng.uniform(0.1, 2),
            pump_ft=complex(*rng.standard_normal(2)),
            kinetic=kin,
        )
        a, b = analytic.bogoliubov_response(q), analytic.bogoliubov_response_linear(q)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return CheckResult("Bogoliubov closed form vs 2x2 solve", worst, "< 1e-12", worst < 1e-12)


def balance_exponent(dts=(4e-3, 2e-3, 1e-3)):
    grid, params, psi0 = _order_problem()
    # start from a developed state so every term of the balance law contributes
    state = SimState(spectral.SpectralField(grid, psi0), 0.0)
    stepper = SplitStepper(grid, params, 0.01)
    values = state.values
    for n in range(20):
        values = stepper.advance(values, n * 0.01)
    state = SimState(spectral.SpectralField(grid, values), 0.2)
    res = np.array([mass_balance_residual(state, params, dt) for dt in dts])
    return res, float(np.polyfit(np.log(dts), np.log(res), 1)[0])


def check_balance_law() -> CheckResult:
    _, p = balance_exponent()
    return CheckResult("mass-balance residual exponent", p, ">= 1.8", p >= 1.8)


def check_inflection() -> CheckResult:
    k = disp.find_inflection(disp.default_cavity_params())
    err = abs(k - disp.K_INFLECTION_TARGET)
    return CheckResult("inflection point offset from 1.3952", err, "< 1e-3", err < 1e-3)


CHECKS = (
    check_parseval,
    check_eigenfunctions,
    check_strang_order,
    check_cubic_residuals,
    check_bogoliubov,
    check_balance_law,
    check_inflection,
)


def run_selftest() -> list:
    return [check() for check in CHECKS]
