"""Finite-difference Dirichlet Laplace solves on boxes and strips.

The barrier functions are harmonic on a box in (x, z) with constant or sampled
data on each face. The last lattice axis is always z. Lattice points shared by
faces with different data take the smallest face value, which keeps the
discrete solution a sub-solution of the continuous problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .diagnostic import DiagnosticReport


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BarrierProblem:
    """Laplace problem on the box Π [lo_i, hi_i]; last axis is z.

    ``faces`` maps (axis, side) with side in {0, 1} to a constant or to a
    callable receiving the lattice coordinate arrays of that face.
    ``resolution`` is the number of intervals per unit length.
    """

    bounds: tuple[tuple[float, float], ...]
    faces: dict
    resolution: float

    def __post_init__(self):
        if not 2 <= len(self.bounds) <= 3:
            raise ValueError("box barriers are limited to 2-D and 3-D lattices (N = 1, 2)")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError("geometry must have positive measure")
        for key in self.faces:
            axis, side = key
            if not (0 <= axis < len(self.bounds) and side in (0, 1)):
                raise ValueError(f"bad face key {key}")
        for axis, n in enumerate(self.shape):
            if n < 17:
                raise ValueError(f"resolution gives {n} points on axis {axis}; need >= 17")

    @classmethod
    def box(cls, N: int, half_width: float, height: float, faces: dict, resolution: float):
        return cls(((-half_width, half_width),) * N + ((0.0, height),), faces, resolution)

    @classmethod
    def strip(cls, X: float, faces: dict, resolution: float):
        return cls(((0.0, X), (0.0, 1.0)), faces, resolution)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(round(self.resolution * (hi - lo))) + 1 for lo, hi in self.bounds)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(a[1] - a[0] for a in self.axes)

    def boundary_array(self) -> tuple[np.ndarray, np.ndarray]:
        """Full lattice with face data filled in (face-minimum at shared points) and the boundary mask."""
        coords = np.meshgrid(*self.axes, indexing="ij")
        data = np.full(self.shape, np.inf)
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(len(self.shape)):
            for side in (0, 1):
                sl = [slice(None)] * len(self.shape)
                sl[axis] = 0 if side == 0 else -1
                sl = tuple(sl)
                value = self.faces.get((axis, side), 0.0)
                if callable(value):
                    v = np.broadcast_to(np.asarray(value(*(c[sl] for c in coords)), dtype=float), data[sl].shape)
                else:
                    v = np.full(data[sl].shape, float(value))
                if not np.all(np.isfinite(v)):
                    raise ValueError(f"boundary data on face {(axis, side)} is not finite")
                data[sl] = np.minimum(data[sl], v)
                mask[sl] = True
        data[~mask] = 0.0
        return data, mask


@dataclass
class BarrierResult:
    problem: BarrierProblem
    solution: np.ndarray = field(repr=False)
    residual: float
    max_principle: bool
    max_on_subregion: float = math.nan
    lambda_estimate: float = math.nan
    refinement_history: list = field(default_factory=list)

    def max_over(self, bounds) -> float:
        sel = np.ix_(*[(a >= lo - 1e-12) & (a <= hi + 1e-12) for a, (lo, hi) in zip(self.problem.axes, bounds)])
        return float(np.max(self.solution[sel]))


def _laplacian(u: np.ndarray, spacing) -> np.ndarray:
    """Second-order FD Laplacian at interior points."""
    inner = tuple(slice(1, -1) for _ in u.shape)
    out = np.zeros(tuple(n - 2 for n in u.shape))
    for axis, h in enumerate(spacing):
        lo = list(inner)
        hi = list(inner)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out += (u[tuple(lo)] - 2 * u[inner] + u[tuple(hi)]) / h**2
    return out


def _residual(u, spacing, scale) -> float:
    """Max stencil residual in units of the data: |Δ_h u|·h²/‖data‖∞."""
    return float(np.max(np.abs(_laplacian(u, spacing)))) * min(spacing) ** 2 / max(scale, 1e-300)


def _solve_direct(data, mask, spacing):
    interior = tuple(n - 2 for n in data.shape)
    ops = []
    for axis, (n, h) in enumerate(zip(interior, spacing)):
        d = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)) / h**2
        mats = [sp.identity(m) for m in interior]
        mats[axis] = d
        op = mats[0]
        for m in mats[1:]:
            op = sp.kron(op, m)
        ops.append(op)
    A = sum(ops).tocsc()
    # the boundary contributes through the stencil applied to the boundary-only lattice
    rhs = -_laplacian(np.where(mask, data, 0.0), spacing).ravel()
    u = data.copy()
    u[tuple(slice(1, -1) for _ in data.shape)] = splu(A).solve(rhs).reshape(interior)
    return u


def _solve_sor(data, mask, spacing, tol, max_iter):
    u = data.copy()
    inner = tuple(slice(1, -1) for _ in u.shape)
    u[inner] = float(np.mean(data[mask]))
    w = np.array([1 / h**2 for h in spacing])
    diag = 2 * w.sum()
    n_max = max(u.shape)
    omega = 2 / (1 + math.sin(math.pi / n_max))
    idx = np.indices(tuple(n - 2 for n in u.shape)).sum(axis=0)
    colors = [(idx % 2) == c for c in (0, 1)]
    scale = float(np.max(np.abs(data[mask])))
    for it in range(max_iter):
        for color in colors:
            lap = _laplacian(u, spacing)
            view = u[inner]
            view[color] += omega * lap[color] / diag
        if it % 10 == 0 and _residual(u, spacing, scale) < tol:
            return u
    raise ConvergenceError(f"SOR did not reach residual {tol} in {max_iter} sweeps")


def solve_barrier(problem: BarrierProblem, method: str = "direct", tol: float = 1e-10,
                  max_iter: int = 200_000) -> BarrierResult:
    data, mask = problem.boundary_array()
    spacing = problem.spacing
    if method == "direct":
        u = _solve_direct(data, mask, spacing)
    elif method == "sor":
        u = _solve_sor(data, mask, spacing, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    scale = float(np.max(np.abs(data[mask])))
    res = _residual(u, spacing, scale)
    if res >= tol:
        raise ConvergenceError(f"residual {res:.3e} above {tol:.1e}")
    lo, hi = float(np.min(data[mask])), float(np.max(data[mask]))
    slack = 1e-10 * max(scale, 1.0)
    ok = bool(np.min(u) >= lo - slack and np.max(u) <= hi + slack)
    return BarrierResult(problem, u, res, ok)


def b1_problem(N: int, resolution: float) -> BarrierProblem:
    """Harmonic on B4* = [-4,4]^N x [0,4]; 2 on every face except z = 0, where it is 0."""
    faces = {(a, s): 2.0 for a in range(N) for s in (0, 1)}
    faces[(N, 0)] = 0.0
    faces[(N, 1)] = 2.0
    return BarrierProblem.box(N, 4.0, 4.0, faces, resolution)


def barrier_lambda(N: int = 1, resolution: float = 4, method: str = "direct") -> BarrierResult:
    """λ = (2 - max over B2* of b1)/4."""
    result = solve_barrier(b1_problem(N, resolution), method)
    top = result.max_over(((-2.0, 2.0),) * N + ((0.0, 2.0),))
    result.max_on_subregion = top
    result.lambda_estimate = (2 - top) / 4
    return result


def lambda_refinement(N: int = 1, resolutions=(4, 8, 16), method: str = "direct") -> DiagnosticReport:
    """λ on dyadic resolutions with Richardson extrapolation of the last pair."""
    history = []
    for r in resolutions:
        history.append((r, barrier_lambda(N, r, method).lambda_estimate))
    lams = [lam for _, lam in history]
    rel = [abs(b - a) / abs(b) for a, b in zip(lams, lams[1:])]
    extrap = lams[-1] + (lams[-1] - lams[-2]) / 3 if len(lams) > 1 else lams[-1]
    inside = all(0 < lam < 0.5 for lam in lams)
    return DiagnosticReport(
        "barrier_lambda",
        inside and bool(rel) and rel[-1] < 0.05,
        {"lambda": lams[-1], "lambda_richardson": extrap, "relative_changes": rel,
         "history": [list(h) for h in history]},
        tolerance=0.05,
        notes="lambda must lie in (0, 1/2); last dyadic change below tolerance",
    )


def lambda_star_estimate(k0: int, lam: float, resolution: float = 256, N: int = 1,
                         method: str = "direct") -> float:
    """λ* = 2 - max over B*_{1/32} of the harmonic function on B*_{1/16}.

    Data: 2 on every face except z = 0, where it is 2 - λ/2^{k0+1}.
    """
    if not 0 <= lam < 0.5:
        raise ValueError("lambda must lie in [0, 1/2)")
    if k0 < 0:
        raise ValueError("k0 must be >= 0")
    faces = {(a, s): 2.0 for a in range(N) for s in (0, 1)}
    faces[(N, 0)] = 2 - lam / 2 ** (k0 + 1)
    faces[(N, 1)] = 2.0
    result = solve_barrier(BarrierProblem.box(N, 1 / 16, 1 / 16, faces, resolution), method)
    top = result.max_over(((-1 / 32, 1 / 32),) * N + ((0.0, 1 / 32),))
    return 2 - top


def strip_problem(X: float, resolution: float) -> BarrierProblem:
    faces = {(0, 0): 2.0, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.0}
    return BarrierProblem.strip(X, faces, resolution)


def strip_bound_check(X: float = 8.0, resolution: float = 32, method: str = "direct",
                      tol: float = 1e-6) -> DiagnosticReport:
    """Check b2 <= 2√2 e^{-x/2} on [0,X]x[0,1] and fit the decay rate of max_z b2."""
    if X < 5:
        raise ValueError("X must be >= 5")
    result = solve_barrier(strip_problem(X, resolution), method)
    x, _ = result.problem.axes
    bound = 2 * math.sqrt(2) * np.exp(-x / 2)
    gap = float(np.max(result.solution - bound[:, None]))
    profile = np.max(result.solution, axis=1)
    # away from the inflow face (higher modes) and the clamped far edge
    window = (x >= 1.0) & (x <= X - 1.5) & (profile > 0)
    slope = float(np.polyfit(x[window], np.log(profile[window]), 1)[0])
    return DiagnosticReport(
        "strip_bound",
        gap <= tol,
        {"max_gap": gap, "decay_rate": slope, "residual": result.residual,
         "max_principle": result.max_principle},
        tolerance=tol,
        notes="gap = max(b2 - 2*sqrt(2)*exp(-x/2)); slowest strip mode decays like exp(-pi x)",
    )
