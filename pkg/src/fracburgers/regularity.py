"""Long-time and small-scale measurements on trajectories.

decay_report     t^{N/2} ‖θ(t)‖∞ / ‖θ0‖₂ over a time window
oscillation_profile  sup - inf over nested parabolic cylinders and a Hölder fit
duhamel_reconstruct  mild-solution identity with the torus Poisson multiplier
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .diagnostic import DiagnosticReport
from .fields import RealField, fft, ifft, norms
from .fracops import extension_values
from .solver import SolverConfig, Trajectory, linear_symbol, nonlinear_term


@dataclass
class DecayReport:
    times: np.ndarray
    ratio_k: np.ndarray
    window: tuple[float, float]
    sup_ratio: float
    mean_zero: bool
    linf_nonincreasing: bool
    notes: str = ""

    def report(self) -> DiagnosticReport:
        finite = bool(np.all(np.isfinite(self.ratio_k)) and np.all(self.ratio_k >= 0))
        return DiagnosticReport(
            "decay",
            finite and self.linf_nonincreasing,
            {"sup_ratio": self.sup_ratio, "t_min": self.window[0], "t_max": self.window[1],
             "mean_zero": self.mean_zero, "linf_nonincreasing": self.linf_nonincreasing},
            notes=self.notes or "ratio t^(N/2) |theta(t)|_inf / |theta0|_2 over the window",
        )


def decay_report(traj: Trajectory, window: tuple[float, float] | None = None,
                 linf_tol: float = 1e-12) -> DecayReport:
    grid = traj.grid
    if window is None:
        window = (10 * traj.config.dt, grid.length / 4)
    t_lo, t_hi = window
    if not (traj.times[0] <= t_lo < t_hi <= traj.times[-1] + 1e-12):
        raise ValueError(f"window {window} outside trajectory span")
    l2_0 = norms(traj.initial).l2
    sel = (traj.times >= t_lo - 1e-12) & (traj.times <= t_hi + 1e-12)
    times = traj.times[sel]
    linf = np.array([np.max(np.abs(s.values)) for s, keep in zip(traj.snapshots, sel) if keep])
    notes = []
    if l2_0 == 0:
        ratio = np.zeros_like(times)
        notes.append("zero initial data")
    else:
        ratio = times ** (grid.dim / 2) * linf / l2_0
    mean_zero = abs(traj.initial.mean()) <= 1e-12 * max(norms(traj.initial).linf, 1e-300)
    if not mean_zero:
        notes.append("initial data not mean-zero: the torus mean does not decay")
    series = traj.series.get("linf", np.array([]))
    rises = np.diff(series)
    nonincreasing = bool(np.all(rises <= linf_tol * max(float(series[0]) if len(series) else 0.0, 1e-300)))
    return DecayReport(times, ratio, (t_lo, t_hi), float(np.max(ratio)) if ratio.size else 0.0,
                       bool(mean_zero), nonincreasing, "; ".join(notes))


@dataclass
class OscillationReport:
    center: tuple
    r: float
    osc_k: np.ndarray
    fitted_alpha: float
    fit_quality: float
    k_max_requested: int
    k_max_used: int
    warnings: list = field(default_factory=list)

    @property
    def reduced(self) -> bool:
        return self.k_max_used < self.k_max_requested

    def report(self, min_alpha: float | None = None, min_r2: float = 0.8) -> DiagnosticReport:
        if not math.isfinite(self.fitted_alpha) or self.fit_quality < min_r2:
            verdict = None
        elif min_alpha is None:
            verdict = True
        else:
            verdict = self.fitted_alpha >= min_alpha
        return DiagnosticReport(
            "oscillation",
            verdict,
            {"fitted_alpha": self.fitted_alpha, "r_squared": self.fit_quality,
             "osc_k": self.osc_k, "k_max_used": self.k_max_used},
            tolerance=min_r2,
            notes="; ".join(self.warnings) or "no verdict below the R^2 gate",
        )


def frozen_trajectory(f: RealField, t_end: float, dt: float) -> Trajectory:
    """A time-independent trajectory, for testing the cylinder estimator on fixed profiles."""
    cfg = SolverConfig(dt=dt, t_end=t_end, nonlinearity_scale=0.0)
    times = np.arange(cfg.n_steps + 1) * dt
    return Trajectory(cfg, f, times, tuple(f for _ in times))


def _ball_index(coords_1d: np.ndarray, c: float, rho: float, length: float) -> np.ndarray:
    d = (coords_1d - c + length / 2) % length - length / 2
    return np.nonzero(np.abs(d) <= rho + 1e-12)[0]


def oscillation_profile(traj: Trajectory, center, r: float = 0.5, k_max: int = 8,
                        use_extension: bool = False, z_levels: int = 5) -> OscillationReport:
    """osc_k = sup - inf of θ over Q_{r^k}(t0, x0) = [t0 - r^k, t0] x B_{r^k}(x0).

    With ``use_extension`` the samples are taken from θ* on [0, r^k] in z too.
    Hölder exponent: least-squares slope of log osc_k against k log r.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    t0, x0 = center[0], tuple(np.atleast_1d(center[1]))
    grid = traj.grid
    if len(x0) != grid.dim:
        raise ValueError("center dimension does not match the grid")
    x_axis = np.arange(grid.n) * grid.dx
    i0 = traj.index_of(t0)
    warnings = []

    def resolvable(k):
        rho = r**k
        n_t = np.sum((traj.times >= t0 - rho - 1e-12) & (traj.times <= t0 + 1e-12))
        n_x = min(len(_ball_index(x_axis, c, rho, grid.length)) for c in x0)
        return n_t >= 3 and n_x >= 4 and t0 - rho >= traj.times[0] - 1e-12

    used = -1
    for k in range(k_max + 1):
        if not resolvable(k):
            break
        used = k
    if used < k_max:
        warnings.append(f"k_max reduced from {k_max} to {used}: deepest cylinder unresolvable")
    if used < 0:
        return OscillationReport(tuple(center), r, np.array([]), math.nan, 0.0, k_max, used, warnings)

    osc = np.zeros(used + 1)
    for k in range(used + 1):
        rho = r**k
        sel = np.nonzero((traj.times >= t0 - rho - 1e-12) & (traj.times <= traj.times[i0] + 1e-12))[0]
        idx = np.ix_(*[_ball_index(x_axis, c, rho, grid.length) for c in x0])
        lo, hi = math.inf, -math.inf
        z = np.linspace(0.0, rho, z_levels)
        for i in sel:
            vals = traj.snapshots[i].values
            if use_extension:
                ext = extension_values(vals, grid, z)
                block = ext[(slice(None),) + idx]
            else:
                block = vals[idx]
            lo = min(lo, float(np.min(block)))
            hi = max(hi, float(np.max(block)))
        osc[k] = hi - lo

    alpha, r2 = _fit_holder(osc, r)
    if not math.isfinite(alpha):
        warnings.append("fitted alpha undefined: oscillation vanishes")
    return OscillationReport(tuple(center), r, osc, alpha, r2, k_max, used, warnings)


def _fit_holder(osc: np.ndarray, r: float) -> tuple[float, float]:
    k = np.arange(len(osc))
    pos = osc > 0
    if np.count_nonzero(pos) < 2:
        return math.nan, 0.0
    res = stats.linregress(k[pos] * math.log(r), np.log(osc[pos]))
    return float(res.slope), float(res.rvalue**2)


def holder_profile(grid, x0, power: float = 0.5, smoothing_cells: float = 0.1) -> RealField:
    """Smoothed |x - x0|^power, using the periodic distance in every axis."""
    s = smoothing_cells * grid.dx
    d2 = np.zeros(grid.shape)
    for axis, c in enumerate(np.atleast_1d(x0)):
        d = (grid.coords[axis] - c + grid.length / 2) % grid.length - grid.length / 2
        d2 = d2 + d**2
    return RealField(grid, (d2 + s * s) ** (power / 2))


def duhamel_reconstruct(traj: Trajectory, t: float, quad_steps: int) -> tuple[RealField, float]:
    """θ(t) = e^{-tA}θ0 + ∫_0^t e^{-(t-s)A} N(θ(s)) ds with trapezoid quadrature.

    A is the solver's linear symbol and N its (dealiased, truncated, scaled)
    nonlinear term. Quadrature nodes must be snapshot times.
    """
    if quad_steps < 2:
        raise ValueError("quad_steps must be >= 2")
    cfg, grid = traj.config, traj.grid
    i_t = traj.index_of(t)
    t = float(traj.times[i_t])
    sym = linear_symbol(grid, cfg)
    c0 = fft(traj.initial.values)
    out = np.exp(-t * sym) * c0
    if t > 0 and cfg.nonlinearity_scale != 0:
        nodes = np.linspace(0.0, t, quad_steps + 1)
        idx = [traj.index_of(s) for s in nodes]
        vals = np.stack([np.exp(-(t - s) * sym) * nonlinear_term(fft(traj.snapshots[i].values), grid, cfg)
                         for s, i in zip(nodes, idx)])
        out = out + trapezoid(vals, nodes, axis=0)
    field_ = RealField(grid, ifft(out))
    err = float(np.max(np.abs(field_.values - traj.snapshots[i_t].values)))
    return field_, err
