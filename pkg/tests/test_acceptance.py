"""The fifteen acceptance criteria, each at its stated tolerance.

Every test appends one "[PASS]/[FAIL] criterion N: ..." line, printed in the
terminal summary, and then asserts.
"""
import json
import math

import jsonschema
import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fracburgers.barriers import lambda_refinement, lambda_star_estimate, strip_bound_check
from fracburgers.cli import main
from fracburgers.degiorgi import (TruncationConfig, degiorgi_constants, fit_recurrence,
                                  isoperimetric_ratio, truncation_energies, vanishing_check)
from fracburgers.diagnostic import REPORT_SCHEMA
from fracburgers.fields import fft, ifft, make_grid, sample_band_limited
from fracburgers.fracops import (ConvexTestFunction, cordoba_gap, harmonic_extension,
                                 harmonicity_residual, normal_derivative_gap, poisson_semigroup,
                                 sqrt_laplacian)
from fracburgers.regularity import (decay_report, duhamel_reconstruct, frozen_trajectory,
                                    holder_profile, oscillation_profile)
from fracburgers.runner import lei_survey
from fracburgers.solver import SolverConfig, run, scaling_check


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def bump_1d(n, length, amp=1.0, width=1.0, mean_zero=False):
    g = make_grid(1, n, length)
    v = amp * np.exp(-(g.coords[0] - length / 2) ** 2 / (2 * width**2))
    if mean_zero:
        v = v - v.mean()
    return g.from_function(lambda x: v)


def test_criterion_01_operator_exactness():
    g = make_grid(1, 64, 2 * math.pi)
    f = g.from_function(lambda x: np.cos(3 * x))
    e_lap = float(np.max(np.abs(sqrt_laplacian(f).values - 3 * f.values)))

    r = sample_band_limited(g, philox(1), kmax=12)
    e_semi = 0.0
    for z1, z2 in [(0.1, 0.3), (0.5, 1.25), (0.0, 2.0)]:
        lhs = poisson_semigroup(poisson_semigroup(r, z1), z2).values
        e_semi = max(e_semi, float(np.max(np.abs(lhs - poisson_semigroup(r, z1 + z2).values))))

    smooth = [g.from_function(lambda x: np.cos(x) + 0.5 * np.sin(2 * x)),
              make_grid(2, 64, 2 * math.pi).from_function(lambda x, y: np.cos(x) * np.cos(y) + 0.3 * np.sin(y))]
    e_trace, e_harm = 0.0, 0.0
    for s in smooth:
        ext = harmonic_extension(s, np.arange(0, 1.0 + 5e-3, 1e-2))
        sup = float(np.max(np.abs(s.values)))
        e_trace = max(e_trace, float(np.max(np.abs(ext.trace.values - s.values))) / sup)
        e_harm = max(e_harm, float(np.max(np.abs(harmonicity_residual(ext)))) / sup)

    ok = e_lap < 1e-10 and e_semi < 1e-12 and e_trace < 1e-4 and e_harm < 1e-4
    record(1, ok, f"sqrt-laplacian err={e_lap:.2e} semigroup err={e_semi:.2e} "
                  f"trace={e_trace:.2e} harmonicity={e_harm:.2e} (x|theta|_inf)")


def test_criterion_02_normal_derivative_first_order():
    g = make_grid(1, 128, 2 * math.pi)
    worst = (math.inf, -math.inf)
    for seed in range(10):
        f = sample_band_limited(g, philox(100 + seed), kmax=6)
        gaps = [normal_derivative_gap(f, dz) for dz in (4e-2, 2e-2, 1e-2, 5e-3)]
        ratios = [a / b for a, b in zip(gaps, gaps[1:])]
        worst = (min(worst[0], min(ratios)), max(worst[1], max(ratios)))
    ok = 1.8 <= worst[0] and worst[1] <= 2.2
    record(2, ok, f"gap ratios under dz halving in [{worst[0]:.3f}, {worst[1]:.3f}] over 10 seeds (first order: 2)")


def test_criterion_03_cordoba():
    phi = ConvexTestFunction("square")
    worst = math.inf
    rng = philox(3)
    for dim, n in ((1, 128), (2, 32)):
        g = make_grid(dim, n, 2 * math.pi)
        for _ in range(100):
            f = sample_band_limited(g, rng, kmax=n // 4)
            gap = cordoba_gap(f, phi).values
            worst = min(worst, float(np.min(gap)) / float(np.max(np.abs(f.values))) ** 2)
    record(3, worst >= -1e-8, f"min gap / |theta|_inf^2 = {worst:.3e} over 100 fields each for N=1, N=2 (bound -1e-8)")


def test_criterion_04_conservation():
    g1 = make_grid(1, 256, 32.0)
    f1 = bump_1d(256, 32.0, 1.5)
    g2 = make_grid(2, 64, 16.0)
    f2 = g2.from_function(lambda x, y: np.exp(-((x - 8) ** 2 + (y - 8) ** 2) / 2) + 0.3 * np.sin(x * 2 * math.pi / 16))
    cases = {
        "critical": (f1, SolverConfig(dt=1e-2, t_end=2.0)),
        "modified": (f1, SolverConfig(dt=1e-2, t_end=2.0, epsilon=0.1, R=0.8)),
        "2d": (f2, SolverConfig(dt=1e-2, t_end=1.0)),
    }
    worst_mean, worst_l2, ok = 0.0, -math.inf, True
    for name, (f, cfg) in cases.items():
        s = run(f, cfg).series
        drift = float(np.max(np.abs(s["mean"] - s["mean"][0])))
        rise = float(np.max(np.diff(s["l2"]))) / float(s["l2"][0])
        worst_mean, worst_l2 = max(worst_mean, drift), max(worst_l2, rise)
        ok &= drift <= 1e-10 and rise <= 1e-10
    record(4, ok, f"mean drift={worst_mean:.2e} (<=1e-10), max per-step l2 rise={worst_l2:.2e} x|theta0|_2 "
                  f"(<=1e-10) over critical/modified/2D")


def test_criterion_05_scaling():
    f = bump_1d(256, 32.0, 1.5)
    crit = scaling_check(run(f, SolverConfig(dt=1e-2, t_end=1.0)), 2.0).measured["relative_sup_difference"]
    ctrl = scaling_check(run(f, SolverConfig(alpha=0.75, dt=1e-2, t_end=1.0)), 2.0).measured["relative_sup_difference"]
    record(5, crit < 1e-8 and ctrl >= 1e-3,
           f"critical rescale rel sup err={crit:.2e} (<1e-8); alpha=0.75 control={ctrl:.2e} (>=1e-3)")


def test_criterion_06_vanishing():
    worst = 0.0
    rng = philox(6)
    for dim, n in ((1, 256), (2, 64)):
        g = make_grid(dim, n, 2 * math.pi)
        for _ in range(4):
            f = sample_band_limited(g, rng, kmax=n // 3)
            f = f.with_values(ifft(fft(f.values) * g.dealias_mask))
            sup = float(np.max(np.abs(f.values)))
            for R in (0.1 * sup, 0.3 * sup, 0.6 * sup, sup, math.inf):
                for frac in (-0.8, -0.4, 0.0, 0.4, 0.8):
                    v = vanishing_check(f, R, frac * sup)
                    worst = max(worst, v / (sup**3 * g.volume))
    record(6, worst <= 1e-8, f"max |int psi_R d_j theta (theta-L)_+| / (|theta|^3 |torus|) = {worst:.2e} "
                             f"over 5x5 (R, L), N=1,2")


def test_criterion_07_local_energy(critical_run):
    rep = lei_survey(critical_run, samples=20, seed=7)
    m = rep.measured
    record(7, bool(rep.passed), f"min residual/max(lhs,rhs) = {m['min_normalized_residual']:.3e} (>= -1e-6), "
                                f"{m['nontrivial']}/20 draws nontrivial")


def _recurrence_case(f, cfg, N):
    traj = run(f, cfg)
    t0 = 1.0
    seq = truncation_energies(traj, TruncationConfig(M=t0 ** (-N / 2), t0=t0, k_max=25))
    fit = fit_recurrence(seq, N)
    monotone = bool(np.all(np.diff(seq.U) <= 0))
    return seq.U, fit, monotone


def test_criterion_08_recurrence():
    cases = {
        1: (bump_1d(1024, 64.0, 1.9), SolverConfig(dt=5e-3, t_end=2.0)),
        2: (make_grid(2, 256, 32.0).from_function(lambda x, y: 3.0 * np.exp(-((x - 16) ** 2 + (y - 16) ** 2) / 2)),
            SolverConfig(dt=1e-2, t_end=2.0)),
    }
    ok, parts = True, []
    for N, (f, cfg) in cases.items():
        U, fit, monotone = _recurrence_case(f, cfg, N)
        target = 1 + 1 / N - 0.1
        good = monotone and U[25] < 1e-12 and not fit.vacuous and fit.exponent >= target
        ok &= good
        parts.append(f"N={N}: nonincreasing={monotone} U_25={U[25]:.1e} exponent={fit.exponent:.3f} "
                     f"(>= {target:.1f}, levels={len(fit.levels_used)})")
    record(8, ok, "; ".join(parts))


def test_criterion_09_decay():
    sups, nonincreasing = [], True
    for n in (512, 1024):
        traj = run(bump_1d(n, 64.0, 1.0, mean_zero=True), SolverConfig(dt=1e-2, t_end=16.0, snapshot_every=5))
        rep = decay_report(traj, (0.1, 16.0))
        sups.append(rep.sup_ratio)
        nonincreasing &= rep.linf_nonincreasing
    change = abs(sups[1] - sups[0]) / sups[1]
    ok = all(math.isfinite(s) for s in sups) and change <= 0.1 and nonincreasing
    record(9, ok, f"sup t^(1/2)|theta|_inf/|theta0|_2 = {sups[0]:.5f} (n=512), {sups[1]:.5f} (n=1024), "
                  f"change {change:.1e} (<=10%), linf nonincreasing={nonincreasing}")


def test_criterion_10_holder(critical_run):
    g = make_grid(1, 1024, 2 * math.pi)
    syn = oscillation_profile(frozen_trajectory(holder_profile(g, math.pi, 0.5), 1.0, 1e-3), (1.0, math.pi), 0.5, 6)
    smooth = oscillation_profile(critical_run, (1.0, 16.0), 0.5, 5)
    ok = abs(syn.fitted_alpha - 0.5) <= 0.1 and syn.fit_quality >= 0.9 and smooth.fitted_alpha >= 0.9
    record(10, ok, f"synthetic alpha={syn.fitted_alpha:.3f} R^2={syn.fit_quality:.4f}; "
                   f"critical run alpha={smooth.fitted_alpha:.3f} (>=0.9)")


def test_criterion_11_barriers():
    lam_rep = lambda_refinement(1, (4, 8, 16))
    lam = lam_rep.measured["lambda"]
    change = lam_rep.measured["relative_changes"][-1]
    k0 = 1
    lam_star = lambda_star_estimate(k0, lam, resolution=256)
    upper = min(1.0, lam) / 2 ** (k0 + 1)
    strip = strip_bound_check(8.0, 32, tol=1e-6)
    ok = 0 < lam < 0.5 and change < 0.05 and 0 < lam_star < upper and bool(strip.passed)
    record(11, ok, f"lambda={lam:.6f} dyadic change={change:.1e}; lambda*={lam_star:.6f} in (0, {upper:.6f}); "
                   f"b2 max gap={strip.measured['max_gap']:.3e} (<=1e-6)")


def _independent_checks(c):
    """Re-evaluate the three conditions at 60 digits, without the library's log forms."""
    mpmath.mp.dps = 60
    N, lam, delta, M, C0 = c.N, mpmath.mpf(c.lam), mpmath.mpf(c.delta), mpmath.mpf(c.M_rec), mpmath.mpf(c.C0)
    cN = mpmath.gamma(mpmath.mpf(N + 1) / 2) / mpmath.pi ** (mpmath.mpf(N + 1) / 2)
    sphere = 2 * mpmath.pi ** (mpmath.mpf(N) / 2) / mpmath.gamma(mpmath.mpf(N) / 2)
    P1 = mpmath.sqrt(cN**2 * sphere * mpmath.quad(lambda r: r ** (N - 1) * (1 + r * r) ** (-(N + 1)), [0, mpmath.inf]))
    ok5 = ok7 = okc = True
    for k in range(1, c.K_verify + 1):
        rhs = lam / mpmath.mpf(2) ** (k + 2)
        ok5 &= 2 * N * 2 * mpmath.sqrt(2) * mpmath.exp(-1 / (4 * (mpmath.sqrt(2) + 1) * (2 * delta) ** k)) <= rhs
        ok7 &= P1 / (M ** (mpmath.mpf(k) / 2) * delta ** (mpmath.mpf(N * (k + 1)) / 2)) <= rhs
        if k >= 12 * N:
            okc &= 1 / M**k >= C0**k * (1 / M ** (k - 3)) ** (1 + mpmath.mpf(1) / N)
    return bool(ok5), bool(ok7), bool(okc), float(P1)


def test_criterion_12_constants():
    parts, ok = [], True
    for lam, N, C0, Phi in [(0.18, 1, 2.0, 10.0), (0.25, 1, 5.0, 1.0), (0.14, 2, 2.0, 10.0)]:
        c = degiorgi_constants(lam, N, C0, Phi, K_verify=64, C_N_sobolev=1.0)
        c5, c7, cc, P1 = _independent_checks(c)
        good = c5 and c7 and cc and abs(P1 - c.P1_l2) <= 1e-10 * P1
        ok &= good
        parts.append(f"(lam={lam}, N={N}, C0={C0}): delta={c.delta:.3e} M=2^{int(round(math.log2(c.M_rec)))} "
                     f"checks={'ok' if good else 'FAILED'}")
    record(12, ok, "; ".join(parts) + " (k=1..64)")


def _smooth_node_field(rng, dim, n):
    x = np.linspace(-1, 1, n)
    X = np.meshgrid(*([x] * dim), indexing="ij")
    w = np.zeros((n,) * dim)
    for _ in range(6):
        freq = rng.uniform(-3, 3, dim)
        w += rng.standard_normal() * np.cos(sum(f * xi for f, xi in zip(freq, X)) + rng.uniform(0, 2 * math.pi))
    # spread the values so that A, B and C are all present
    return 0.5 + 1.5 * w / max(float(np.max(np.abs(w))), 1e-12)


def test_criterion_13_isoperimetric():
    rng = philox(13)
    ratios = []
    for i in range(50):
        ratios.append(isoperimetric_ratio(_smooth_node_field(rng, 1 + i % 2, 129)).measured["ratio"])
    finite = all(math.isfinite(r) for r in ratios)
    # clipped ramp: |A| = |B| = 1/2, |C| = 1, |w'| = 1 on C, so the continuum ratio is exactly 1/4
    ramp = []
    for n in (101, 201, 401, 801, 1601):
        x = np.linspace(-1, 1, n)
        ramp.append(isoperimetric_ratio(np.clip(x + 0.5, 0, 1)).measured["ratio"])
    steps = np.abs(np.diff(ramp))
    converging = bool(np.all(steps[1:] < steps[:-1]) and abs(ramp[-1] - 0.25) < 1e-2)
    record(13, finite and converging,
           f"50 random fields finite={finite} (max {max(ratios):.3f}); ramp ratios "
           + ", ".join(f"{r:.4f}" for r in ramp) + f" -> 0.25 (last step {steps[-1]:.1e})")


def test_criterion_14_duhamel():
    f = bump_1d(256, 32.0, 1.5)
    lin = run(f, SolverConfig(dt=1e-2, t_end=0.5, nonlinearity_scale=0.0))
    _, e_lin = duhamel_reconstruct(lin, 0.5, 50)
    errs = []
    for lev in range(4):
        dt = 0.02 / 2**lev
        traj = run(f, SolverConfig(dt=dt, t_end=0.5))
        errs.append(duhamel_reconstruct(traj, 0.5, int(round(0.5 / dt)))[1])
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = e_lin < 1e-12 and all(1.8 <= r <= 2.2 for r in ratios)
    record(14, ok, f"linear err={e_lin:.1e} (<1e-12); full-run errs " + ", ".join(f"{e:.2e}" for e in errs)
                   + " ratios " + ", ".join(f"{r:.3f}" for r in ratios))


def test_criterion_15_determinism_and_formats(tmp_path):
    cfg = {"grid": {"n": 128, "length": 16.0}, "solver": {"dt": 0.01, "t_end": 0.3},
           "initial": {"kind": "random-band-limited", "kmax": 6}, "seed": 42,
           "diagnostics": [{"name": "conservation"}, {"name": "vanishing"}]}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    codes = {}
    codes["solve_a"] = main(["solve", str(path), "--out", str(tmp_path / "a"), "--no-figures"])
    codes["solve_b"] = main(["solve", str(path), "--out", str(tmp_path / "b"), "--no-figures"])
    (ra,), (rb,) = list((tmp_path / "a").iterdir()), list((tmp_path / "b").iterdir())
    identical = (ra / "scalars.csv").read_bytes() == (rb / "scalars.csv").read_bytes()
    try:
        jsonschema.validate(json.loads((ra / "diagnostics.json").read_text()), REPORT_SCHEMA)
        schema_ok = True
    except jsonschema.ValidationError:
        schema_ok = False

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**cfg, "solver": {"alpha": 2.0}}))
    blow = tmp_path / "blow.json"
    blow.write_text(json.dumps({"grid": {"n": 256, "length": 6.283},
                                "solver": {"alpha": 0.3, "dt": 0.05, "t_end": 5},
                                "initial": {"kind": "gaussian-bump", "amplitude": 50, "width": 0.2}}))
    codes["validation"] = main(["solve", str(bad)])
    codes["numerical"] = main(["solve", str(blow), "--out", str(tmp_path / "c"), "--no-figures"])
    codes["io"] = main(["list", str(tmp_path / "missing")])
    expected = {"solve_a": 0, "solve_b": 0, "validation": 2, "numerical": 3, "io": 4}
    ok = identical and schema_ok and codes == expected
    record(15, ok, f"scalars.csv byte-identical={identical}, diagnostics.json schema-valid={schema_ok}, "
                   f"exit codes {codes}")
