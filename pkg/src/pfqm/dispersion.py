"""Microcavity polariton dispersion and kinetic Fourier multipliers.

Units used throughout the package: lengths in um, times in ps, energies in meV.
Masses are stored in units of hbar**2 / (meV um**2), so a parabola with mass
``m`` reads ``E = k**2 / (2 m)`` in meV with ``k`` in 1/um.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize_scalar

#: Reduced Planck constant in meV ps.
HBAR = 0.6582119569

#: hbar**2 / (2 m_e) in meV um**2.
_HBAR2_OVER_2ME = 3.809982110968584e-05

#: Free electron mass expressed in hbar**2 / (meV um**2).
ELECTRON_MASS = 1.0 / (2.0 * _HBAR2_OVER_2ME)

#: Lower-branch inflection point the default parameters are calibrated to (1/um).
K_INFLECTION_TARGET = 1.3952


class DispersionError(ValueError):
    """Invalid dispersion parameters or query."""


class BracketError(DispersionError):
    """The search bracket does not enclose a sign change."""


class OutOfDomainError(DispersionError):
    """A tabulated multiplier was queried outside its node range."""


def mass_from_electron_masses(m_over_me: float) -> float:
    """Convert a mass given in electron masses into package units."""
    return m_over_me * ELECTRON_MASS


def mass_to_electron_masses(m: float) -> float:
    return m / ELECTRON_MASS


@dataclass(frozen=True)
class CavityParams:
    """Constants of the two-branch light-matter dispersion.

    ``cavity_offset`` is the photon energy at ``k = 0``. The photon dispersion
    is the paraxial parabola unless ``exact_cavity`` is set, in which case the
    square-root form ``sqrt(E0**2 + E0 k**2 / m_c)`` with the same offset and
    band-bottom mass is used.
    """

    exciton_energy: float
    cavity_offset: float
    photon_mass: float
    exciton_mass: float
    rabi: float
    exact_cavity: bool = False

    def __post_init__(self):
        for name in ("exciton_energy", "photon_mass", "exciton_mass", "rabi"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DispersionError(f"{name} must be positive, got {value!r}")
        if not np.isfinite(self.cavity_offset) or self.cavity_offset <= 0:
            raise DispersionError(f"cavity_offset must be positive, got {self.cavity_offset!r}")


# Rabi energy (meV) that puts the lower-branch inflection at K_INFLECTION_TARGET
# for m_c = 1e-4 m_e, m_x = 0.5 m_e and zero detuning. Reproduced by calibrate_rabi().
DEFAULT_RABI = 0.9420707147548595


def default_cavity_params(**overrides) -> CavityParams:
    values = dict(
        exciton_energy=1557.0,
        cavity_offset=1557.0,
        photon_mass=mass_from_electron_masses(1e-4),
        exciton_mass=mass_from_electron_masses(0.5),
        rabi=DEFAULT_RABI,
    )
    values.update(overrides)
    return CavityParams(**values)


def _check_k(k):
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DispersionError("wavenumbers must be nonnegative")
    return k


def _cavity_terms(k, p: CavityParams):
    """Photon energy relative to its offset and its first two k-derivatives."""
    if p.exact_cavity:
        e0 = p.cavity_offset
        c = e0 / p.photon_mass
        ec = np.sqrt(e0 * e0 + c * k * k)
        d1 = c * k / ec
        d2 = c / ec - (c * k) ** 2 / ec**3
        return ec - e0, d1, d2
    inv = 1.0 / p.photon_mass
    return 0.5 * inv * k * k, inv * k, inv + 0.0 * k


def _exciton_terms(k, p: CavityParams):
    inv = 1.0 / p.exciton_mass
    return 0.5 * inv * k * k, inv * k, inv + 0.0 * k


def cavity_energy(k, p: CavityParams):
    k = _check_k(k)
    return p.cavity_offset + _cavity_terms(k, p)[0]


def exciton_energy(k, p: CavityParams):
    k = _check_k(k)
    return p.exciton_energy + _exciton_terms(k, p)[0]


def _splitting(k, p: CavityParams):
    # detuning D = E_x - E_c, computed from the small k-dependent parts to keep precision
    ec, ec1, ec2 = _cavity_terms(k, p)
    ex, ex1, ex2 = _exciton_terms(k, p)
    d = (p.exciton_energy - p.cavity_offset) + ex - ec
    s = np.sqrt(d * d + 4.0 * p.rabi**2)
    return ec, ec1, ec2, ex, ex1, ex2, d, s


def branch_energies(k, p: CavityParams):
    """Lower and upper polariton energies ``(E_L, E_U)`` in meV."""
    k = _check_k(k)
    ec, _, _, ex, _, _, _, s = _splitting(k, p)
    mean = 0.5 * (p.cavity_offset + p.exciton_energy) + 0.5 * (ec + ex)
    return mean - 0.5 * s, mean + 0.5 * s


def lower_branch_curvature(k, p: CavityParams):
    """Analytic second derivative of the lower branch, in meV um**2."""
    k = _check_k(k)
    _, ec1, ec2, _, ex1, ex2, d, s = _splitting(k, p)
    d1 = ex1 - ec1
    d2 = ex2 - ec2
    s2 = (d1 * d1 + d * d2) / s - (d * d1) ** 2 / s**3
    return 0.5 * (ec2 + ex2) - 0.5 * s2


def upper_branch_curvature(k, p: CavityParams):
    k = _check_k(k)
    _, ec1, ec2, _, ex1, ex2, d, s = _splitting(k, p)
    d1 = ex1 - ec1
    d2 = ex2 - ec2
    s2 = (d1 * d1 + d * d2) / s - (d * d1) ** 2 / s**3
    return 0.5 * (ec2 + ex2) + 0.5 * s2


def inverse_effective_mass(k, p: CavityParams):
    """Signed inverse lower-branch mass, hbar**2 / m(k), in meV um**2.

    Finite everywhere; it crosses zero where the mass itself diverges.
    """
    return lower_branch_curvature(k, p)


def find_inflection(p: CavityParams, bracket=(0.01, 5.0), xtol: float = 1e-6) -> float:
    """Root of the lower-branch curvature inside ``bracket`` by bisection.

    Bisection continues past ``xtol`` down to floating-point resolution; ``xtol``
    is the guaranteed accuracy.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = float(lower_branch_curvature(lo, p))
    f_hi = float(lower_branch_curvature(hi, p))
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(f"curvature has no sign change on [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = float(lower_branch_curvature(mid, p))
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    k_inf = 0.5 * (lo + hi)
    assert hi - lo <= xtol
    return k_inf


def calibrate_rabi(k_target: float = K_INFLECTION_TARGET, bounds=(0.5, 3.0), **overrides) -> float:
    """Rabi energy placing the inflection point at ``k_target``."""

    def mismatch(rabi):
        return find_inflection(default_cavity_params(rabi=rabi, **overrides)) - k_target

    return brentq(mismatch, *bounds, xtol=1e-14, rtol=4 * np.finfo(float).eps)


# Kinetic multipliers ------------------------------------------------------


@dataclass(frozen=True)
class ConstantMass:
    """Parabolic symbol ``k**2 / m``."""

    mass: float
    prefactor_half: bool = True

    def __post_init__(self):
        if not self.mass > 0:
            raise DispersionError("mass must be positive")


@dataclass(frozen=True)
class FractionalPower:
    """Fractional symbol ``coefficient * k**(2 s)``; coefficient in meV um**(2s)."""

    s: float
    coefficient: float = 1.0
    prefactor_half: bool = True

    def __post_init__(self):
        if not 0 < self.s <= 1:
            raise DispersionError(f"fractional power requires 0 < s <= 1, got {self.s}")


@dataclass(frozen=True)
class LowerBranchCurvature:
    """Velocity-dependent-mass symbol ``k**2 d2E_L/dk2``."""

    params: CavityParams = field(default_factory=default_cavity_params)
    prefactor_half: bool = True


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Symbol given on nodes, interpolated monotone-cubically."""

    k_nodes: np.ndarray
    g_values: np.ndarray
    prefactor_half: bool = True

    def __post_init__(self):
        k = np.asarray(self.k_nodes, dtype=float)
        g = np.asarray(self.g_values, dtype=float)
        if k.ndim != 1 or k.size < 2 or k.shape != g.shape:
            raise DispersionError("tabulated multiplier needs >= 2 matching nodes and values")
        if np.any(np.diff(k) <= 0):
            raise DispersionError("tabulated nodes must be strictly increasing")
        object.__setattr__(self, "k_nodes", k)
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "_interp", PchipInterpolator(k, g, extrapolate=False))


KineticSpec = Union[ConstantMass, FractionalPower, LowerBranchCurvature, Tabulated]


def kinetic_prefactor_g(k, spec: KineticSpec):
    """Kinetic symbol g(k) in meV.

    With ``prefactor_half`` the symbol is halved so that the constant-mass case
    is the usual ``k**2 / (2 m)``.
    """
    k = _check_k(k)
    if isinstance(spec, ConstantMass):
        g = k * k / spec.mass
    elif isinstance(spec, FractionalPower):
        g = spec.coefficient * k ** (2.0 * spec.s)
    elif isinstance(spec, LowerBranchCurvature):
        g = k * k * lower_branch_curvature(k, spec.params)
    elif isinstance(spec, Tabulated):
        if np.any(k < spec.k_nodes[0]) or np.any(k > spec.k_nodes[-1]):
            raise OutOfDomainError(
                f"query outside tabulated range [{spec.k_nodes[0]}, {spec.k_nodes[-1]}]"
            )
        g = spec._interp(k)
    else:
        raise TypeError(f"unknown kinetic spec {spec!r}")
    return 0.5 * g if spec.prefactor_half else g


def fit_power_law(k, target, power: float, relative: str = "normwise"):
    """Best coefficient ``c`` for ``c k**power`` against ``target`` in the max norm.

    ``relative="normwise"`` minimises ``max|c k^p - t| / max|t|``;
    ``"pointwise"`` minimises ``max|c k^p / t - 1|`` (needs ``t`` of one sign).
    Returns ``(c, error)``.
    """
    k = np.asarray(k, dtype=float)
    t = np.asarray(target, dtype=float)
    basis = k**power
    if relative == "pointwise":
        ratio = basis / t
        if np.any(ratio <= 0):
            raise DispersionError("pointwise fit needs a target of the basis' sign")
        # max|c r - 1| is minimised where the extreme ratios balance
        c = 2.0 / (ratio.min() + ratio.max())
        return c, float(np.max(np.abs(c * ratio - 1.0)))
    if relative != "normwise":
        raise ValueError(f"unknown error measure {relative!r}")
    scale = np.max(np.abs(t))
    c0 = float(np.dot(basis, t) / np.dot(basis, basis))

    def err(c):
        return np.max(np.abs(c * basis - t)) / scale

    res = minimize_scalar(err, bracket=(0.5 * c0, c0, 1.5 * c0), tol=1e-12)
    return float(res.x), float(res.fun)


def band_bottom_mass(p: CavityParams) -> float:
    """Lower-branch mass at k = 0, the constant-mass model matched to the curvature model."""
    return 1.0 / float(lower_branch_curvature(0.0, p))
