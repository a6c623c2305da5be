"""Periodic grids, FFT transforms, spectral derivatives and norms.

Everything in the package computes on a uniform periodic grid in one or two
dimensions. The forward transform divides by the total number of points, so a
coefficient is the amplitude of its mode: ``cos(3x)`` has weight 1/2 at
``k = +3`` and ``k = -3``. Space integrals are Riemann sums, which are exact
for band-limited integrands on the torus.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.n) != self.n or self.n % 2:
            raise ValueError("n must be even")
        if self.n < 8:
            raise ValueError(f"n must be >= 8, got {self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @property
    def mode_spacing(self) -> float:
        return 2 * np.pi / self.length

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode indices in FFT order, covering -n/2 .. n/2-1."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        k = self.modes * self.mode_spacing
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.wavenumbers))

    @cached_property
    def derivative_symbols(self) -> tuple[np.ndarray, ...]:
        # Nyquist mode dropped: its derivative is not representable as a real field.
        out = []
        for k, m in zip(self.wavenumbers, np.meshgrid(*([self.modes] * self.dim), indexing="ij")):
            sym = 1j * k
            sym = np.where(m == -self.n // 2, 0.0, sym)
            out.append(sym)
        return tuple(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |m| < n/3 along every axis."""
        keep = np.abs(self.modes) < self.n / 3
        mask = keep
        if self.dim == 2:
            mask = keep[:, None] & keep[None, :]
        return mask

    def zeros(self) -> "RealField":
        return RealField(self, np.zeros(self.shape))

    def from_function(self, func) -> "RealField":
        return RealField(self, func(*self.coords))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "n": self.n, "length": self.length}


def make_grid(dim: int, n: int, length: float) -> Grid:
    return Grid(int(dim), int(n), float(length))


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"layout mismatch: values {vals.shape} vs grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "RealField":
        return RealField(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def mean(self) -> float:
        return float(self.values.mean())

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)


def _vals(other):
    return other.values if isinstance(other, RealField) else other


@dataclass(frozen=True)
class Spectrum:
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"layout mismatch: coeffs {c.shape} vs grid {self.grid.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def mode(self, *m: int) -> complex:
        idx = tuple(int(mi) % self.grid.n for mi in m)
        return complex(self.coeffs[idx])

    def energy(self) -> float:
        """Normalized coefficient sum; equals the squared L2 norm by Parseval."""
        return float(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2))


def fft(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values) / values.size


def ifft(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(coeffs * coeffs.size).real


def transform(f: RealField) -> Spectrum:
    return Spectrum(f.grid, fft(f.values))


def inverse(spec: Spectrum) -> RealField:
    return RealField(spec.grid, ifft(spec.coeffs))


def apply_multiplier(f: RealField, symbol: np.ndarray) -> RealField:
    return f.with_values(ifft(fft(f.values) * symbol))


def derivative(f: RealField, j: int, dealias: bool = False) -> RealField:
    if not 0 <= j < f.grid.dim:
        raise ValueError(f"axis {j} out of range for dim {f.grid.dim}")
    symbol = f.grid.derivative_symbols[j]
    if dealias:
        symbol = symbol * f.grid.dealias_mask
    return apply_multiplier(f, symbol)


def gradient(f: RealField, dealias: bool = False) -> tuple[RealField, ...]:
    return tuple(derivative(f, j, dealias) for j in range(f.grid.dim))


class Norms(NamedTuple):
    l2: float
    linf: float
    hhalf: float


def norms(f: RealField) -> Norms:
    grid = f.grid
    power = np.abs(fft(f.values)) ** 2
    l2 = np.sqrt(grid.volume * power.sum())
    hhalf = np.sqrt(grid.volume * np.sum(grid.kmag * power))
    linf = np.max(np.abs(f.values)) if f.values.size else 0.0
    return Norms(float(l2), float(linf), float(hhalf))


def inner(f: RealField, g: RealField) -> float:
    """Grid inner product, the Riemann sum of f*g."""
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def interpolate(f: RealField, factor: int) -> RealField:
    """Band-limited (zero-padded) interpolation onto a grid `factor` times finer."""
    if factor == 1:
        return f
    grid = f.grid
    fine = make_grid(grid.dim, grid.n * factor, grid.length)
    c = fft(f.values)
    for axis in range(grid.dim):
        c = _pad_axis(c, axis, fine.n)
    return RealField(fine, ifft(c))


def _pad_axis(c: np.ndarray, axis: int, new_n: int) -> np.ndarray:
    c = np.moveaxis(c, axis, 0)
    n = c.shape[0]
    h = n // 2
    out = np.zeros((new_n,) + c.shape[1:], dtype=complex)
    out[:h] = c[:h]
    out[new_n - h + 1:] = c[h + 1:]
    # split the Nyquist coefficient between +n/2 and -n/2 so the result stays real
    out[h] = c[h] / 2
    out[new_n - h] = c[h] / 2
    return np.moveaxis(out, 0, axis)


def sample_band_limited(grid: Grid, rng: np.random.Generator, kmax: int = 8,
                        amplitude: float = 1.0, zero_mean: bool = False) -> RealField:
    """Random real field with integer modes |m| <= kmax per axis and unit sup norm scale."""
    if kmax >= grid.n // 2:
        raise ValueError("kmax must lie below the Nyquist mode")
    coeffs = np.zeros(grid.shape, dtype=complex)
    m = np.meshgrid(*([grid.modes] * grid.dim), indexing="ij")
    band = np.ones(grid.shape, dtype=bool)
    for mi in m:
        band &= np.abs(mi) <= kmax
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs[band] = noise[band]
    if zero_mean:
        coeffs[(0,) * grid.dim] = 0.0
    vals = np.fft.ifftn(coeffs).real
    # ifftn of a non-Hermitian array then .real == Hermitian part, still band-limited
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals *= amplitude / peak
    return RealField(grid, vals)
