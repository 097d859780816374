"""Time-splitting Fourier pseudospectral integrator for the driven polariton GPE.

The field obeys

    i d(psi)/dt = (1 - i eta) K psi / hbar + (alpha |psi|^2 + V + omega) psi / hbar
                  - i (gamma / 2) psi + i P(r, t) / hbar

where ``K`` is the kinetic Fourier multiplier g(|k|), energies are in meV and
``P = P0(r) exp(i k_i . r - i omega_i t / hbar)`` carries meV times field units.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .dispersion import HBAR, KineticSpec, kinetic_prefactor_g
from .spectral import REAL, Grid, SpectralField, fft, ifft, multiplier_table

try:
    from ._kernels import pumped_rk4 as _pumped_rk4
except ImportError:  # pragma: no cover - numba missing
    _pumped_rk4 = None

log = logging.getLogger(__name__)


class SimulationFault(RuntimeError):
    """Non-finite field or watchdog trip during an evolution."""

    def __init__(self, message, t=None, max_abs=None, step=None, node=None):
        super().__init__(message)
        self.t = t
        self.max_abs = max_abs
        self.step = step
        self.node = node


# Pump and potential -------------------------------------------------------


@dataclass(frozen=True)
class Homogeneous:
    amplitude: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("pump amplitude must be nonnegative")


@dataclass(frozen=True)
class Gaussian:
    """``A exp(-|r - d|^2 / sigma^2)``."""

    amplitude: float
    width: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("pump amplitude must be nonnegative")
        if not self.width > 0:
            raise ValueError("pump width must be positive")


@dataclass(frozen=True)
class PumpSpec:
    profile: Union[Homogeneous, Gaussian] = Homogeneous(0.0)
    k_i: tuple = (0.0, 0.0)
    omega_i: float = 0.0  # meV

    @property
    def is_off(self) -> bool:
        return self.profile.amplitude == 0

    def spatial(self, grid: Grid) -> np.ndarray:
        """Time-independent factor ``P0(r) exp(i k_i . r)``."""
        coords = grid.mesh()
        kvec = tuple(self.k_i) + (0.0,) * (2 - len(self.k_i))
        phase = sum(k * c for k, c in zip(kvec, coords))
        p = self.profile
        if isinstance(p, Homogeneous):
            amp = np.full(grid.shape, p.amplitude, dtype=float)
        else:
            center = tuple(p.center) + (0.0,) * (2 - len(p.center))
            r2 = sum((c - d) ** 2 for c, d in zip(coords, center))
            amp = p.amplitude * np.exp(-r2 / p.width**2)
        return amp * np.exp(1j * phase)

    def time_factor(self, t):
        return np.exp(-1j * self.omega_i * t / HBAR)


@dataclass(frozen=True)
class NoPotential:
    def values(self, grid: Grid) -> np.ndarray:
        return np.zeros(grid.shape)


@dataclass(frozen=True)
class Harmonic:
    """``V = strength * r^2`` in meV, strength in meV/um^2."""

    strength: float

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("trap strength must be nonnegative")

    def values(self, grid: Grid) -> np.ndarray:
        return self.strength * grid.radius() ** 2


@dataclass(frozen=True)
class MexicanHat:
    """Harmonic trap plus a narrow repulsive Gaussian at the origin."""

    strength: float
    hat_amplitude: float
    hat_width: float

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("trap strength must be nonnegative")
        if not self.hat_width > 0:
            raise ValueError("hat width must be positive")

    def values(self, grid: Grid) -> np.ndarray:
        r = grid.radius()
        return self.strength * r**2 + self.hat_amplitude * np.exp(-(r**2) / self.hat_width**2)


@dataclass(frozen=True, eq=False)
class TabulatedPotential:
    table: np.ndarray

    def values(self, grid: Grid) -> np.ndarray:
        v = np.asarray(self.table, dtype=float)
        if v.shape != grid.shape:
            raise ValueError(f"potential table shape {v.shape} != grid shape {grid.shape}")
        return v


PotentialSpec = Union[NoPotential, Harmonic, MexicanHat, TabulatedPotential]


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the driven GPE.

    alpha in meV um^d, gamma in 1/ps, eta dimensionless, omega in meV.
    """

    kinetic: KineticSpec
    alpha: float = 0.0
    gamma: float = 0.0
    eta: float = 0.0
    omega: float = 0.0
    pump: PumpSpec = PumpSpec()
    potential: PotentialSpec = NoPotential()

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


@dataclass
class SimState:
    field: SpectralField
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


# Kinetic and local sub-steps ----------------------------------------------


def kinetic_symbol(grid: Grid, params: ModelParams) -> np.ndarray:
    """Table of g(|k|) in meV over the k-lattice."""
    return multiplier_table(grid, lambda k: kinetic_prefactor_g(k, params.kinetic))


def kinetic_phase_table(grid: Grid, params: ModelParams, dt: float) -> np.ndarray:
    """Per-node factor ``exp(-i (1 - i eta) K dt / hbar)``.

    For eta > 0 nodes with negative K have modulus above one.
    """
    k_sym = kinetic_symbol(grid, params)
    return np.exp(-1j * (1 - 1j * params.eta) * k_sym * (dt / HBAR))


class LocalStep:
    """Pointwise integrator for the potential, nonlinearity, loss and pump.

    Without pump the step is exact. With pump it is ``substeps`` classical RK4
    steps per node, run by a compiled kernel unless ``compiled`` is False.
    """

    def __init__(self, grid: Grid, params: ModelParams, substeps: int = 4, compiled: bool = True):
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        self.params = params
        self.substeps = substeps
        self.compiled = compiled and _pumped_rk4 is not None
        self.potential = np.ascontiguousarray(params.potential.values(grid) + params.omega, dtype=float)
        self.pump = None if params.pump.is_off else np.ascontiguousarray(params.pump.spatial(grid))

    def rhs(self, psi, t):
        p = self.params
        energy = p.alpha * (psi.real**2 + psi.imag**2) + self.potential
        out = (-1j / HBAR) * energy * psi - (0.5 * p.gamma) * psi
        if self.pump is not None:
            out += self.pump * (p.pump.time_factor(t) / HBAR)
        return out

    def __call__(self, psi: np.ndarray, t: float, dt: float) -> np.ndarray:
        p = self.params
        if self.pump is None:
            density = psi.real**2 + psi.imag**2
            if p.gamma == 0:
                accumulated = density * dt
            else:
                accumulated = density * (-np.expm1(-p.gamma * dt) / p.gamma)
            phase = (self.potential * dt + p.alpha * accumulated) / HBAR
            return psi * (np.exp(-0.5 * p.gamma * dt) * np.exp(-1j * phase))
        if self.compiled:
            shape = psi.shape
            out = _pumped_rk4(
                np.ascontiguousarray(psi, dtype=complex).ravel(),
                self.potential.ravel(),
                self.pump.ravel(),
                float(p.alpha),
                float(p.gamma),
                HBAR,
                float(p.pump.omega_i),
                float(t),
                float(dt),
                self.substeps,
            )
            return out.reshape(shape)
        h = dt / self.substeps
        y = psi
        for n in range(self.substeps):
            s = t + n * h
            k1 = self.rhs(y, s)
            k2 = self.rhs(y + 0.5 * h * k1, s + 0.5 * h)
            k3 = self.rhs(y + 0.5 * h * k2, s + 0.5 * h)
            k4 = self.rhs(y + h * k3, s + h)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return y


def local_step(values: np.ndarray, grid: Grid, params: ModelParams, t: float, dt: float, substeps: int = 4):
    """Integrate the pointwise part of the equation over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = LocalStep(grid, params, substeps)(values, t, dt)
    _check_finite(out, t + dt)
    return out


def _check_finite(values, t, step=None):
    bad = ~np.isfinite(values)
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SimulationFault(f"non-finite field at node {node}, t={t:.6g} ps", t=t, node=node, step=step)


class SplitStepper:
    """Strang splitting with cached operator tables for a fixed ``dt``.

    ``order="LKL"`` (default) brackets the kinetic step with two local half
    steps; ``"KLK"`` does the reverse.
    """

    def __init__(self, grid: Grid, params: ModelParams, dt: float, order: str = "LKL", substeps: int = 4):
        if order not in ("LKL", "KLK"):
            raise ValueError(f"unknown splitting order {order!r}")
        self.grid = grid
        self.params = params
        self.dt = dt
        self.order = order
        self.local = LocalStep(grid, params, substeps)
        self.k_symbol = kinetic_symbol(grid, params)
        half = dt / 2 if order == "KLK" else dt
        self.k_phase = np.exp(-1j * (1 - 1j * params.eta) * self.k_symbol * (half / HBAR))

    def kinetic(self, psi):
        return ifft(self.k_phase * fft(psi))

    def advance(self, psi: np.ndarray, t: float) -> np.ndarray:
        dt = self.dt
        if self.order == "LKL":
            psi = self.local(psi, t, dt / 2)
            psi = self.kinetic(psi)
            return self.local(psi, t + dt / 2, dt / 2)
        psi = self.kinetic(psi)
        psi = self.local(psi, t, dt)
        return self.kinetic(psi)

    def step(self, state: SimState) -> SimState:
        values = self.advance(state.values, state.t)
        _check_finite(values, state.t + self.dt)
        return SimState(SpectralField(self.grid, values, REAL), state.t + self.dt)


def step_strang(state: SimState, params: ModelParams, dt: float, order: str = "LKL", substeps: int = 4) -> SimState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return SplitStepper(state.grid, params, dt, order, substeps).step(state)


# Diagnostics used during evolution ----------------------------------------


def kinetic_expectation(psi: np.ndarray, grid: Grid, k_symbol: np.ndarray) -> float:
    """``<psi, K psi>`` in meV times mass units, via Parseval."""
    psi_hat = fft(psi)
    return float(np.sum(k_symbol * np.abs(psi_hat) ** 2).real * grid.cell_area / grid.size)


def mass_balance_rhs(psi: np.ndarray, grid: Grid, params: ModelParams, t: float, k_symbol=None) -> float:
    """Analytic dM/dt = -(2/hbar) eta <psi, K psi> + (2/hbar) Re<psi, P> - gamma M."""
    if k_symbol is None:
        k_symbol = kinetic_symbol(grid, params)
    mass = float(np.sum(np.abs(psi) ** 2) * grid.cell_area)
    rate = -params.gamma * mass
    if params.eta:
        rate -= 2 * params.eta * kinetic_expectation(psi, grid, k_symbol) / HBAR
    if not params.pump.is_off:
        drive = params.pump.spatial(grid) * params.pump.time_factor(t)
        rate += 2 * np.vdot(psi, drive).real * grid.cell_area / HBAR
    return float(rate)


@dataclass
class Record:
    """Time series gathered by :func:`evolve`."""

    times: list = field(default_factory=list)
    channels: dict = field(
        default_factory=lambda: {"M": [], "max_abs": [], "kinetic": [], "balance_residual": []}
    )


Observer = Callable[[int, SimState], None]


def evolve(
    initial: SimState,
    params: ModelParams,
    t_final: float,
    dt: float,
    stride: int = 1,
    observers: Sequence[Observer] = (),
    watchdog: Optional[float] = 1e6,
    order: str = "LKL",
    substeps: int = 4,
):
    """Repeated Strang steps from ``initial.t`` to ``t_final``.

    Every ``stride`` steps the mass, max |psi|, kinetic expectation and the
    mass-balance residual are recorded and each observer is called with
    ``(step, state)``. The residual compares the centred difference of M over
    the neighbouring steps with the analytic rate, so it is reported one step
    after the sample it belongs to. Returns ``(final_state, Record)``.
    """
    if not t_final > initial.t:
        raise ValueError("t_final must exceed the initial time")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    grid = initial.grid
    stepper = SplitStepper(grid, params, dt, order, substeps)
    n_steps = int(round((t_final - initial.t) / dt))
    record = Record()
    area = grid.cell_area
    psi = initial.values.copy()
    t0 = initial.t

    def mass_of(values):
        return float(np.sum(values.real**2 + values.imag**2) * area)

    prev_mass = None
    pending = None  # (index into record, analytic rate, M at previous step)
    for n in range(n_steps + 1):
        t = t0 + n * dt
        mass = mass_of(psi)
        if pending is not None:
            idx, rate, m_before = pending
            record.channels["balance_residual"][idx] = abs((mass - m_before) / (2 * dt) - rate)
            pending = None
        if n % stride == 0 or n == n_steps:
            max_abs = float(np.sqrt(np.max(psi.real**2 + psi.imag**2)))
            record.times.append(t)
            record.channels["M"].append(mass)
            record.channels["max_abs"].append(max_abs)
            record.channels["kinetic"].append(kinetic_expectation(psi, grid, stepper.k_symbol))
            record.channels["balance_residual"].append(float("nan"))
            if prev_mass is not None and n < n_steps:
                rate = mass_balance_rhs(psi, grid, params, t, stepper.k_symbol)
                pending = (len(record.times) - 1, rate, prev_mass)
            state = SimState(SpectralField(grid, psi, REAL), t)
            for obs in observers:
                obs(n, state)
        if n == n_steps:
            break
        prev_mass = mass
        psi = stepper.advance(psi, t)
        if not np.all(np.isfinite(psi)):
            _check_finite(psi, t + dt, step=n + 1)
        if watchdog is not None:
            peak = float(np.sqrt(np.max(psi.real**2 + psi.imag**2)))
            if peak > watchdog:
                raise SimulationFault(
                    f"watchdog: max|psi|={peak:.3g} exceeds {watchdog:.3g} at t={t + dt:.6g} ps (step {n + 1})",
                    t=t + dt,
                    max_abs=peak,
                    step=n + 1,
                )
    final = SimState(SpectralField(grid, psi, REAL), t0 + n_steps * dt)
    return final, record
