"""Closed-form plane-wave states and Bogoliubov linear response."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dispersion import HBAR, KineticSpec, kinetic_prefactor_g
from .spectral import Grid


class AnalyticError(ValueError):
    pass


class DegenerateRootError(AnalyticError):
    pass


class ResonanceError(AnalyticError):
    pass


# Plane waves --------------------------------------------------------------


@dataclass(frozen=True)
class PlaneWaveProblem:
    """Homogeneous coherent drive of a single plane wave ``exp(i kappa x)``.

    Stationary states satisfy ``(a + i b - alpha rho) psi0 = i P0`` with
    ``a = omega_i - omega - g(kappa)`` and ``b = hbar gamma / 2 + eta g(kappa)``
    (meV); the eta part is the kinetic damping of the pumped wave.
    """

    kappa: float
    omega_i: float
    p0: float
    alpha: float
    gamma: float
    g_at_kappa: float
    omega: float = 0.0
    eta: float = 0.0

    @classmethod
    def from_kinetic(cls, kinetic: KineticSpec, kappa, omega_i, p0, alpha, gamma, omega=0.0, eta=0.0):
        g = float(kinetic_prefactor_g(abs(kappa), kinetic))
        return cls(kappa, omega_i, p0, alpha, gamma, g, omega, eta)

    @property
    def a(self) -> float:
        return self.omega_i - self.omega - self.g_at_kappa

    @property
    def b(self) -> float:
        return 0.5 * HBAR * self.gamma + self.eta * self.g_at_kappa

    def with_pump(self, p0: float) -> "PlaneWaveProblem":
        return replace(self, p0=p0)


def cubic_coefficients(prob: PlaneWaveProblem):
    """Coefficients (highest first) of ``((a - alpha rho)^2 + b^2) rho - P0^2``."""
    a, b, al = prob.a, prob.b, prob.alpha
    return np.array([al * al, -2 * a * al, a * a + b * b, -prob.p0**2])


def cubic_residual(prob: PlaneWaveProblem, rho: float) -> float:
    """Residual of the density cubic relative to the size of its terms."""
    c = cubic_coefficients(prob)
    terms = c * rho ** np.arange(3, -1, -1)
    scale = np.sum(np.abs(terms))
    return float(abs(terms.sum()) / scale) if scale else 0.0


def cubic_discriminant(prob: PlaneWaveProblem) -> float:
    a3, a2, a1, a0 = cubic_coefficients(prob)
    return float(
        18 * a3 * a2 * a1 * a0 - 4 * a2**3 * a0 + a2**2 * a1**2 - 4 * a3 * a1**3 - 27 * a3**2 * a0**2
    )


def _polish(coeffs, rho):
    dcoeffs = np.polyder(coeffs)
    for _ in range(8):
        f = np.polyval(coeffs, rho)
        df = np.polyval(dcoeffs, rho)
        if df == 0:
            break
        step = f / df
        rho -= step
        if abs(step) <= 1e-16 * max(abs(rho), 1e-300):
            break
    return rho


def density_cubic_roots(prob: PlaneWaveProblem) -> np.ndarray:
    """Nonnegative real densities rho = |psi0|^2 of the stationary states, ascending."""
    if prob.p0 < 0:
        raise AnalyticError("pump amplitude must be nonnegative")
    if prob.alpha == 0:
        return np.array([prob.p0**2 / (prob.a**2 + prob.b**2)])
    if prob.p0 == 0:
        return np.array([0.0])
    coeffs = cubic_coefficients(prob)
    roots = np.roots(coeffs)
    if cubic_discriminant(prob) > 0:
        candidates = roots.real
    else:
        candidates = roots[np.argsort(np.abs(roots.imag))[:1]].real
    polished = sorted(_polish(coeffs, float(r)) for r in candidates)
    return np.array([r for r in polished if r >= 0])


def plane_wave_state(prob: PlaneWaveProblem, rho: float) -> complex:
    """Back-substituted amplitude ``psi0 = i P0 / (a + i b - alpha rho)``."""
    denom = complex(prob.a - prob.alpha * rho, prob.b)
    if abs(denom) == 0:
        raise DegenerateRootError("a + i b - alpha rho vanishes")
    return 1j * prob.p0 / denom


def stationary_residual(prob: PlaneWaveProblem, psi0: complex) -> float:
    return abs((prob.a + 1j * prob.b - prob.alpha * abs(psi0) ** 2) * psi0 - 1j * prob.p0)


def radical_form_roots(prob: PlaneWaveProblem) -> np.ndarray:
    """Cardano roots of the holomorphic cubic ``alpha psi^3 - (a + i b) psi + i P0 = 0``.

    The first entry uses principal cube roots, the others the two remaining
    cube roots of unity. Because ``|psi|^2 psi`` is replaced by ``psi^3`` these
    coincide with the stationary states only when psi0 is real.
    """
    a, b, al, p0 = prob.a, prob.b, prob.alpha, prob.p0
    if al == 0:
        raise AnalyticError("radical form requires alpha != 0")
    c = -(a + 1j * b)
    inner = np.sqrt(complex(4 * (3 * al * c) ** 3 - 729 * al**4 * p0**2))
    out = []
    for w in (1.0, np.exp(2j * np.pi / 3), np.exp(-2j * np.pi / 3)):
        cube = w * (-27j * al**2 * p0 + inner) ** (1 / 3)
        first = (1 + 1j * np.sqrt(3)) * c / (2 ** (2 / 3) * cube)
        second = (1 - 1j * np.sqrt(3)) * cube / (6 * 2 ** (1 / 3) * al)
        out.append(first - second)
    return np.array(out)


@dataclass
class BranchCurve:
    """Density branch continued from zero pump.

    ``multistable`` lists ``(P0_lo, P0_hi)`` grid intervals with three real
    roots; ``fold`` is the grid interval where the followed branch ended and
    the curve jumped to the remaining root, or None.
    """

    p0: np.ndarray
    rho: np.ndarray
    psi: np.ndarray
    n_roots: np.ndarray
    multistable: list = field(default_factory=list)
    fold: Optional[tuple] = None


def physical_branch(prob: PlaneWaveProblem, p0_grid) -> BranchCurve:
    p0_grid = np.asarray(p0_grid, dtype=float)
    if np.any(np.diff(p0_grid) <= 0) or p0_grid[0] < 0:
        raise AnalyticError("pump grid must be nonnegative and strictly ascending")
    rho = np.empty_like(p0_grid)
    psi = np.empty(p0_grid.shape, dtype=complex)
    counts = np.empty(p0_grid.shape, dtype=int)
    fold = None
    for i, p0 in enumerate(p0_grid):
        sub = prob.with_pump(p0)
        roots = density_cubic_roots(sub)
        counts[i] = roots.size
        # the lowest root is the continuation of rho = 0 until it folds away
        rho[i] = roots[0]
        if i > 0 and fold is None and counts[i - 1] == 3 and roots.size == 1:
            fold = (float(p0_grid[i - 1]), float(p0))
        psi[i] = plane_wave_state(sub, rho[i])
    multistable = []
    start = None
    for i, n in enumerate(counts):
        if n == 3 and start is None:
            start = i
        if n != 3 and start is not None:
            multistable.append((float(p0_grid[max(start - 1, 0)]), float(p0_grid[i])))
            start = None
    if start is not None:
        multistable.append((float(p0_grid[max(start - 1, 0)]), float(p0_grid[-1])))
    return BranchCurve(p0_grid, rho, psi, counts, multistable, fold)


# Bogoliubov response ------------------------------------------------------

_RESONANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ResponseQuery:
    """One linear-wave query in the frame co-moving with velocity ``v``.

    ``mu`` in meV, ``gamma`` in 1/ps, ``k`` in 1/um, ``v`` in um/ps. ``pump_ft``
    is the (dimensionless) Fourier weight of the effective drive.
    """

    k: tuple
    v: tuple
    mu: float
    gamma: float
    pump_ft: complex
    kinetic: KineticSpec


def response_formula(g, kv, mu, gamma, pump_ft):
    """Closed-form delta psi*_{-k}; all rates in 1/ps."""
    num = pump_ft * mu + np.conj(pump_ft) * (1j * gamma + kv - g - mu)
    den = gamma**2 + 2 * mu * g + g**2 - 2j * gamma * kv - kv**2
    return num, den


def _rates(q: ResponseQuery):
    k = np.asarray(q.k, dtype=float)
    v = np.asarray(q.v, dtype=float)
    kabs = float(np.linalg.norm(k))
    g = float(kinetic_prefactor_g(kabs, q.kinetic)) / HBAR
    return g, float(k @ v), q.mu / HBAR


def bogoliubov_response(q: ResponseQuery) -> complex:
    g, kv, mu = _rates(q)
    num, den = response_formula(g, kv, mu, q.gamma, q.pump_ft)
    if abs(den) <= _RESONANCE_FLOOR:
        raise ResonanceError(f"response denominator vanishes at k={tuple(q.k)}")
    return complex(num / den)


def bogoliubov_matrix(g: float, kv: float, mu: float, gamma: float) -> np.ndarray:
    """Linearized mode equations for ``(delta psi_k, delta psi*_{-k})`` at frequency k.v."""
    return np.array(
        [[kv - g - mu + 1j * gamma, -mu], [mu, kv + g + mu + 1j * gamma]],
        dtype=complex,
    )


def bogoliubov_response_linear(q: ResponseQuery) -> complex:
    """Solve the 2x2 linearized system directly; second component is delta psi*_{-k}."""
    g, kv, mu = _rates(q)
    rhs = np.array([q.pump_ft, -np.conj(q.pump_ft)], dtype=complex)
    sol = np.linalg.solve(bogoliubov_matrix(g, kv, mu, q.gamma), rhs)
    return complex(sol[1])


@dataclass
class ResponseMap:
    kx: np.ndarray
    ky: np.ndarray
    magnitude: np.ndarray  # |delta psi_{-k}|, NaN at masked nodes, shape (ny, nx)
    masked: np.ndarray

    @property
    def n_masked(self) -> int:
        return int(self.masked.sum())


def response_map(
    grid: Grid, kinetic: KineticSpec, v=(0.0, 1.0), mu=1.0, gamma=1.0, pump_ft=1.0
) -> ResponseMap:
    """|delta psi_{-k}| over the grid's k-lattice, axes sorted ascending."""
    kx = np.fft.fftshift(grid.kx)
    ky = np.fft.fftshift(grid.ky) if grid.dim == 2 else np.zeros(1)
    kyy, kxx = np.meshgrid(ky, kx, indexing="ij")
    kabs = np.hypot(kxx, kyy)
    g = kinetic_prefactor_g(kabs, kinetic) / HBAR
    vx, vy = (tuple(v) + (0.0,))[:2]
    kv = kxx * vx + kyy * vy
    num, den = response_formula(g, kv, mu / HBAR, gamma, pump_ft)
    masked = np.abs(den) <= _RESONANCE_FLOOR
    mag = np.full(kabs.shape, np.nan)
    mag[~masked] = np.abs(num[~masked] / den[~masked])
    if grid.dim == 1:
        mag = mag[0]
        masked = masked[0]
    return ResponseMap(kx, ky, mag, masked)
