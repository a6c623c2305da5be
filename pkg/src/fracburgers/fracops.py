"""Fractional Laplacian, Poisson semigroup and harmonic extension on the torus.

All operators are Fourier multipliers: ``(-Δ)^α`` is ``|k|^{2α}`` and the
Poisson semigroup is ``exp(-z|k|)``. The harmonic extension of a field is the
stack of its Poisson-semigroup images over a list of heights. The Córdoba–Córdoba
check evaluates ``φ'(θ)Λθ - Λφ(θ)`` pointwise on a refined grid so that the
nonlinear composition is not aliased.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Grid, RealField, apply_multiplier, fft, ifft, interpolate


def frac_laplacian(f: RealField, alpha: float = 0.5) -> RealField:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return apply_multiplier(f, f.grid.kmag ** (2 * alpha))


def sqrt_laplacian(f: RealField) -> RealField:
    return apply_multiplier(f, f.grid.kmag)


def poisson_semigroup(f: RealField, z: float) -> RealField:
    if z < 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    return apply_multiplier(f, np.exp(-z * f.grid.kmag))


@dataclass(frozen=True)
class ExtendedField:
    """Samples of the harmonic extension θ*(x, z), first axis indexing z."""

    grid: Grid
    z_levels: np.ndarray
    values: np.ndarray = field(repr=False)

    def slice(self, i: int) -> RealField:
        return RealField(self.grid, self.values[i])

    @property
    def trace(self) -> RealField:
        return self.slice(0)

    def slice_sup(self) -> np.ndarray:
        axes = tuple(range(1, self.values.ndim))
        return np.max(np.abs(self.values), axis=axes)


def _check_levels(z_levels) -> np.ndarray:
    z = np.asarray(z_levels, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("z_levels must be a non-empty 1-D sequence")
    if z[0] != 0.0:
        raise ValueError("z_levels must start at 0")
    if np.any(np.diff(z) <= 0):
        raise ValueError("z_levels must be strictly increasing")
    if not np.all(np.isfinite(z)):
        raise ValueError("z_levels must be finite")
    return z


def harmonic_extension(f: RealField, z_levels) -> ExtendedField:
    z = _check_levels(z_levels)
    c = fft(f.values)
    kmag = f.grid.kmag
    values = np.empty((z.size,) + f.grid.shape)
    values[0] = f.values
    for i, zi in enumerate(z[1:], start=1):
        values[i] = ifft(c * np.exp(-zi * kmag))
    return ExtendedField(f.grid, z, values)


def extension_values(values: np.ndarray, grid: Grid, z_levels: np.ndarray) -> np.ndarray:
    """Vectorized extension of a raw value array; returns shape (len(z),) + grid.shape."""
    c = fft(values)
    kz = np.exp(-np.multiply.outer(z_levels, grid.kmag))
    return np.fft.ifftn(kz * c * c.size, axes=tuple(range(1, grid.dim + 1))).real


def harmonicity_residual(ext: ExtendedField) -> np.ndarray:
    """Centered-difference ∂²_z θ* + spectral Δ_x θ* on interior levels.

    Requires uniformly spaced z levels.
    """
    z = ext.z_levels
    if z.size < 3:
        raise ValueError("need at least three z levels")
    dz = np.diff(z)
    if not np.allclose(dz, dz[0], rtol=1e-12, atol=0):
        raise ValueError("harmonicity residual needs uniform z spacing")
    h = dz[0]
    v = ext.values
    d2z = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    k2 = ext.grid.kmag**2
    axes = tuple(range(1, ext.grid.dim + 1))
    lap = np.fft.ifftn(-k2 * np.fft.fftn(v[1:-1], axes=axes), axes=axes).real
    return d2z + lap


def normal_derivative_gap(f: RealField, dz: float) -> float:
    """sup |Λθ - (θ - P(dz)θ)/dz|, which vanishes at first order in dz."""
    lam = sqrt_laplacian(f).values
    diff = (f.values - poisson_semigroup(f, dz).values) / dz
    return float(np.max(np.abs(lam - diff)))


@dataclass(frozen=True)
class ConvexTestFunction:
    tag: str = "square"
    shift: float = 0.0
    width: float = 0.0

    TAGS = ("identity", "square", "shifted-positive-part-smoothed")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown convex test function {self.tag!r}")
        if self.tag == "shifted-positive-part-smoothed" and not self.width > 0:
            raise ValueError("smoothed positive part needs width > 0")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.tag == "identity":
            return lam.copy()
        if self.tag == "square":
            return lam**2
        s = (lam - self.shift) / self.width
        return self.width * np.logaddexp(0.0, s)

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.tag == "identity":
            return np.ones_like(lam)
        if self.tag == "square":
            return 2 * lam
        s = (lam - self.shift) / self.width
        return 0.5 * (1 + np.tanh(s / 2))

    def is_convex_on(self, lo: float, hi: float, samples: int = 2001) -> bool:
        if hi <= lo:
            hi = lo + 1.0
        lam = np.linspace(lo, hi, samples)
        h = lam[1] - lam[0]
        phi = self(lam)
        d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / h**2
        # round-off floor of a second difference quotient
        tol = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(phi)))) / h**2
        return bool(np.all(d2 >= -tol))


def smoothed_positive_part(f: RealField, shift: float, cells: float = 4.0) -> ConvexTestFunction:
    """Smoothed {λ - shift}_+ whose transition spans `cells` grid spacings of f."""
    from .fields import gradient

    slope = max(float(np.max(np.abs(g.values))) for g in gradient(f))
    width = cells * f.grid.dx * slope
    if width <= 0:
        width = cells * f.grid.dx
    return ConvexTestFunction("shifted-positive-part-smoothed", shift, width)


def cordoba_gap(f: RealField, phi: ConvexTestFunction, alpha: float = 0.5,
                refine: int = 2) -> RealField:
    """Pointwise φ'(θ)(-Δ)^α θ - (-Δ)^α φ(θ) at the grid points of f.

    The composition φ(θ) is formed on a grid `refine` times finer so that the
    quadratic case is free of aliasing; results are sampled back onto f's grid.
    """
    lo, hi = float(np.min(f.values)), float(np.max(f.values))
    if not phi.is_convex_on(lo, hi):
        raise ValueError("test function is not convex on the field range")
    fine = interpolate(f, refine)
    lam = frac_laplacian(fine, alpha).values
    lam_phi = frac_laplacian(fine.with_values(phi(fine.values)), alpha).values
    gap = phi.derivative(fine.values) * lam - lam_phi
    sl = (slice(None, None, refine),) * f.grid.dim
    return RealField(f.grid, gap[sl])
