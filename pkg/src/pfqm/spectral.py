"""Periodic grids, discrete Fourier transforms and radial Fourier multipliers.

Transform convention: the forward transform is the unnormalized sum
``f_hat[j] = sum_n f[n] exp(-i k_j x_n)`` and the inverse carries ``1 / N``
(``N = N_x * N_y``). Wavenumbers follow the FFT ordering
``k_j = 2 pi j / L`` with ``j`` in ``0, 1, ..., N/2 - 1, -N/2, ..., -1``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
import scipy.fft

REAL = "real"
KSPACE = "k"

_MAGIC = b"PFQM"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIIddd")


class SpectralError(ValueError):
    """Contract violation in a spectral operation."""


class MultiplierDomainError(SpectralError):
    """A multiplier is undefined at some lattice wavenumber."""


@dataclass(frozen=True)
class Grid:
    """Periodic 1D or 2D lattice centred on the origin.

    Real-space nodes are ``x_n = -L/2 + n dx``. For ``dim == 1`` the y fields
    are ignored (kept at 1 point).
    """

    dim: int
    lx: float
    nx: int
    ly: float = 1.0
    ny: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise SpectralError(f"dim must be 1 or 2, got {self.dim}")
        counts = (self.nx,) if self.dim == 1 else (self.nx, self.ny)
        extents = (self.lx,) if self.dim == 1 else (self.lx, self.ly)
        for n in counts:
            if int(n) != n or n < 8 or n % 2:
                raise SpectralError(f"point counts must be even integers >= 8, got {n}")
        for length in extents:
            if not (np.isfinite(length) and length > 0):
                raise SpectralError(f"extents must be positive, got {length}")
        if self.dim == 1:
            object.__setattr__(self, "ny", 1)
            object.__setattr__(self, "ly", 1.0)

    @classmethod
    def line(cls, length: float, n: int) -> "Grid":
        return cls(1, float(length), int(n))

    @classmethod
    def square(cls, length: float, n: int) -> "Grid":
        return cls(2, float(length), int(n), float(length), int(n))

    @property
    def shape(self) -> tuple:
        return (self.nx,) if self.dim == 1 else (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        """Measure of one lattice cell (length in 1D, area in 2D)."""
        return self.dx if self.dim == 1 else self.dx * self.dy

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.lx + self.dx * np.arange(self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return -0.5 * self.ly + self.dy * np.arange(self.ny)

    @cached_property
    def kx(self) -> np.ndarray:
        return 2 * np.pi * scipy.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def ky(self) -> np.ndarray:
        return 2 * np.pi * scipy.fft.fftfreq(self.ny, d=self.dy)

    def mesh(self):
        """Real-space coordinate arrays broadcast to ``shape``."""
        if self.dim == 1:
            return (self.x,)
        yy, xx = np.meshgrid(self.y, self.x, indexing="ij")
        return xx, yy

    def kmesh(self):
        if self.dim == 1:
            return (self.kx,)
        kyy, kxx = np.meshgrid(self.ky, self.kx, indexing="ij")
        return kxx, kyy

    @cached_property
    def kabs(self) -> np.ndarray:
        """|k| at every k-lattice node, in transform ordering."""
        if self.dim == 1:
            return np.abs(self.kx)
        kxx, kyy = self.kmesh()
        return np.hypot(kxx, kyy)

    @property
    def kmax(self) -> float:
        return float(self.kabs.max())

    def radius(self, center=(0.0, 0.0)) -> np.ndarray:
        if self.dim == 1:
            return np.abs(self.x - center[0])
        xx, yy = self.mesh()
        return np.hypot(xx - center[0], yy - center[1])

    def plane_wave(self, jx: int, jy: int = 0) -> np.ndarray:
        """On-lattice plane wave exp(i k . r) for integer mode indices."""
        k = 2 * np.pi * jx / self.lx
        if self.dim == 1:
            return np.exp(1j * k * self.x)
        q = 2 * np.pi * jy / self.ly
        xx, yy = self.mesh()
        return np.exp(1j * (k * xx + q * yy))


@dataclass
class SpectralField:
    grid: Grid
    values: np.ndarray
    space: str = REAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise SpectralError(
                f"field shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )
        if self.space not in (REAL, KSPACE):
            raise SpectralError(f"unknown space tag {self.space!r}")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.values.copy(), self.space)


def _require(field: SpectralField, space: str):
    if field.space != space:
        raise SpectralError(f"expected a {space}-space field, got {field.space}-space")


_workers = -1


def set_workers(n: int) -> None:
    """Thread count for the FFTs; -1 uses every core."""
    global _workers
    if n == 0 or n < -1:
        raise ValueError("workers must be positive or -1")
    _workers = n


def fft(values: np.ndarray, workers: Optional[int] = None) -> np.ndarray:
    return scipy.fft.fftn(values, workers=_workers if workers is None else workers)


def ifft(values: np.ndarray, workers: Optional[int] = None) -> np.ndarray:
    return scipy.fft.ifftn(values, workers=_workers if workers is None else workers)


def forward(field: SpectralField) -> SpectralField:
    _require(field, REAL)
    return SpectralField(field.grid, fft(field.values), KSPACE)


def inverse(field: SpectralField) -> SpectralField:
    _require(field, KSPACE)
    return SpectralField(field.grid, ifft(field.values), REAL)


Multiplier = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def multiplier_table(grid: Grid, symbol: Multiplier) -> np.ndarray:
    """Evaluate a radial symbol at every k-lattice node.

    ``symbol`` is either a callable of |k| or a precomputed table of the grid's shape.
    """
    if callable(symbol):
        try:
            table = np.asarray(symbol(grid.kabs))
        except ValueError as exc:
            raise MultiplierDomainError(str(exc)) from exc
        table = np.broadcast_to(table, grid.shape)
    else:
        table = np.asarray(symbol)
        if table.shape != grid.shape:
            raise SpectralError(f"multiplier table shape {table.shape} != grid shape {grid.shape}")
    if not np.all(np.isfinite(table)):
        raise MultiplierDomainError("multiplier is not finite on the k-lattice")
    return table


def apply_multiplier(field: SpectralField, symbol: Multiplier) -> SpectralField:
    """Return ``F^-1(K(|k|) F f)``."""
    _require(field, REAL)
    table = multiplier_table(field.grid, symbol)
    return SpectralField(field.grid, ifft(table * fft(field.values)), REAL)


def fractional_laplacian(field: SpectralField, s: float) -> SpectralField:
    """(-Delta)^s with symbol |k|^(2s), 0 < s <= 1."""
    if not 0 < s <= 1:
        raise SpectralError(f"fractional order must satisfy 0 < s <= 1, got {s}")
    return apply_multiplier(field, lambda k: k ** (2.0 * s))


def inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> complex:
    """Discrete L2 inner product, conjugate-linear in the first slot."""
    return complex(np.vdot(f, g) * grid.cell_area)


# PFQM snapshot format -----------------------------------------------------


def write_snapshot(path, field: SpectralField, t: float) -> None:
    """Write a real-space field in the PFQM little-endian binary format.

    Layout: magic ``PFQM``, u16 version, u16 dim, u32 N_x, u32 N_y,
    f64 L_x, f64 L_y, f64 t, then (re, im) f64 pairs in row-major order.
    """
    _require(field, REAL)
    g = field.grid
    header = _HEADER.pack(_MAGIC, _VERSION, g.dim, g.nx, g.ny, g.lx, g.ly, float(t))
    data = np.empty(field.values.size * 2, dtype="<f8")
    flat = field.values.ravel()
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path):
    """Read a PFQM snapshot, returning ``(field, t)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SpectralError("truncated PFQM header")
    magic, version, dim, nx, ny, lx, ly, t = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise SpectralError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise SpectralError(f"unsupported PFQM version {version}")
    grid = Grid(dim, lx, nx, ly, ny) if dim == 2 else Grid(1, lx, nx)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * grid.size:
        raise SpectralError(f"expected {2 * grid.size} values, found {data.size}")
    values = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return SpectralField(grid, values), t
