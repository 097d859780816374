"""Diagnostics on condensate fields: mass, density/phase, radial profiles, rings."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams, SimState, SplitStepper, mass_balance_rhs
from .spectral import Grid, SpectralField


class ObservableError(ValueError):
    pass


def total_mass(field: SpectralField) -> float:
    """Squared discrete L2 norm, sum |psi|^2 dA."""
    v = field.values
    return float(np.sum(v.real**2 + v.imag**2) * field.grid.cell_area)


def density_phase(field: SpectralField, floor: float = 1e-12):
    """Density ``|psi|^2`` and phase in (-pi, pi].

    Phase is NaN where the density is below ``floor`` times its maximum.
    """
    v = field.values
    density = v.real**2 + v.imag**2
    phase = np.angle(v)
    # np.angle maps to [-pi, pi]; fold -pi onto pi
    phase = np.where(phase <= -np.pi, np.pi, phase)
    peak = density.max() if density.size else 0.0
    undefined = density <= floor * peak
    phase = np.where(undefined, np.nan, phase)
    return density, phase


def second_moment(density: np.ndarray, grid: Grid, center=(0.0, 0.0)) -> float:
    """Density-weighted mean of r^2."""
    r2 = grid.radius(center) ** 2
    total = density.sum()
    if total == 0:
        return 0.0
    return float((density * r2).sum() / total)


@dataclass
class RadialProfile:
    radii: np.ndarray
    mean: np.ndarray
    counts: np.ndarray
    edges: np.ndarray

    def bin_areas(self) -> np.ndarray:
        return np.pi * (self.edges[1:] ** 2 - self.edges[:-1] ** 2)


def radial_profile(density: np.ndarray, grid: Grid, center=(0.0, 0.0), n_bins: int = 64) -> RadialProfile:
    """Azimuthal average in equal-width annuli out to min(L_x, L_y) / 2.

    Empty bins carry count 0 and mean NaN.
    """
    if grid.dim != 2:
        raise ObservableError("radial profiles need a 2D grid")
    if n_bins < 4:
        raise ObservableError("n_bins must be >= 4")
    cx, cy = center
    if not (abs(cx) < grid.lx / 2 and abs(cy) < grid.ly / 2):
        raise ObservableError("center must lie inside the domain")
    r_max = 0.5 * min(grid.lx, grid.ly)
    edges = np.linspace(0.0, r_max, n_bins + 1)
    r = grid.radius(center).ravel()
    d = np.asarray(density, dtype=float).ravel()
    inside = r < r_max
    idx = np.digitize(r[inside], edges) - 1
    counts = np.bincount(idx, minlength=n_bins)[:n_bins]
    sums = np.bincount(idx, weights=d[inside], minlength=n_bins)[:n_bins]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    radii = 0.5 * (edges[1:] + edges[:-1])
    return RadialProfile(radii, mean, counts, edges)


@dataclass
class RingEstimate:
    radius: float
    ring: bool

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


def ring_radius(profile: RadialProfile) -> RingEstimate:
    """Peak of the radial density refined by a parabola through the peak bin and its neighbours."""
    mean = np.where(profile.counts > 0, profile.mean, -np.inf)
    i = int(np.argmax(mean))
    if i == 0:
        return RingEstimate(0.0, False)
    r = profile.radii
    if i == len(r) - 1 or not np.isfinite(mean[i + 1]):
        return RingEstimate(float(r[i]), True)
    y0, y1, y2 = mean[i - 1], mean[i], mean[i + 1]
    curv = y0 - 2 * y1 + y2
    shift = 0.0 if curv == 0 else 0.5 * (y0 - y2) / curv
    h = r[1] - r[0]
    return RingEstimate(float(r[i] + np.clip(shift, -0.5, 0.5) * h), True)


def mass_balance_residual(state: SimState, params: ModelParams, dt: float, substeps: int = 4) -> float:
    """|centred dM/dt from one Strang step either side - analytic rate|.

    The backward neighbour is reached with a step of ``-dt``; the symmetric
    splitting makes it the inverse of the forward step to the order used here.
    """
    grid = state.grid
    forward = SplitStepper(grid, params, dt, substeps=substeps)
    backward = SplitStepper(grid, params, -dt, substeps=substeps)
    ahead = forward.advance(state.values, state.t)
    behind = backward.advance(state.values, state.t)
    area = grid.cell_area
    m_plus = float(np.sum(np.abs(ahead) ** 2) * area)
    m_minus = float(np.sum(np.abs(behind) ** 2) * area)
    rate = mass_balance_rhs(state.values, grid, params, state.t, forward.k_symbol)
    return abs((m_plus - m_minus) / (2 * dt) - rate)


# Time series --------------------------------------------------------------


@dataclass
class TimeSeries:
    times: np.ndarray
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ObservableError("times must be strictly increasing")
        for name, values in self.channels.items():
            values = np.asarray(values, dtype=float)
            if values.shape != self.times.shape:
                raise ObservableError(f"channel {name!r} length mismatch")
            self.channels[name] = values

    @classmethod
    def from_record(cls, record) -> "TimeSeries":
        return cls(np.array(record.times), {k: np.array(v) for k, v in record.channels.items()})

    def __getitem__(self, name):
        return self.channels[name]


def write_timeseries_csv(path, series: TimeSeries) -> None:
    names = list(series.channels)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ps", *names])
        for i, t in enumerate(series.times):
            w.writerow([repr(float(t)), *(repr(float(series.channels[n][i])) for n in names)])


def write_profile_csv(path, profile: RadialProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_um", "mean_density", "count"])
        for r, m, c in zip(profile.radii, profile.mean, profile.counts):
            w.writerow([repr(float(r)), repr(float(m)), int(c)])


def write_grid_csv(path, values: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(values), delimiter=",", fmt="%.17g")


def write_png(path, values: np.ndarray, cmap: str = "jet") -> None:
    """Raster image of a 2D map; NaNs are drawn transparent."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.imsave(path, np.ma.masked_invalid(np.atleast_2d(values)), cmap=cmap, origin="lower")
