"""Experiment execution: solve, run the requested diagnostics, persist."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, build_initial
from .degiorgi import (AffineRescale, BoxCutoff, TruncationConfig, fit_recurrence,
                       local_energy_residual, sobolev_constant, truncation_energies,
                       vanishing_check)
from .diagnostic import DiagnosticReport
from .fields import fft, ifft
from .records import RunRecord, now_iso, run_id_for
from .regularity import decay_report, duhamel_reconstruct, oscillation_profile
from .solver import BlowUpError, conservation_report, run, scaling_check

OUT_ENV = "FRACBURGERS_OUT"


def output_root(config: ExperimentConfig | None = None, override: str | None = None) -> Path:
    if override:
        return Path(override)
    if config is not None and config.output_dir:
        return Path(config.output_dir)
    return Path(os.environ.get(OUT_ENV, "runs"))


def _conservation(traj, p):
    return conservation_report(traj, **p)


def _scaling(traj, p):
    return scaling_check(traj, float(p.get("lambda", 2.0)), float(p.get("tol", 1e-8)))


def _decay(traj, p):
    window = tuple(p["window"]) if "window" in p else None
    return decay_report(traj, window).report()


def _oscillation(traj, p):
    center = (float(p.get("t0", traj.times[-1])), p.get("x0", traj.grid.length / 2))
    rep = oscillation_profile(traj, center, float(p.get("r", 0.5)), int(p.get("k_max", 8)),
                              bool(p.get("use_extension", False)))
    return rep.report(p.get("min_alpha"), float(p.get("min_r2", 0.8)))


def _duhamel(traj, p):
    t = float(p.get("t", traj.times[-1]))
    steps = int(p.get("quad_steps", len(traj.times) - 1))
    tol = p.get("tol")
    _, err = duhamel_reconstruct(traj, t, steps)
    return DiagnosticReport("duhamel", None if tol is None else err <= tol,
                            {"sup_error": err, "t": t, "quad_steps": steps}, tol,
                            notes="sup difference between the mild-solution quadrature and the stored snapshot")


def _recurrence(traj, p):
    N = traj.grid.dim
    t0 = float(p.get("t0", traj.times[-1] / 2))
    M = float(p.get("M", t0 ** (-N / 2)))
    cfg = TruncationConfig(M, t0, int(p.get("k_max", 25)), int(p.get("sign", 1)))
    seq = truncation_energies(traj, cfg)
    fit = fit_recurrence(seq, N)
    rep = fit.report(N)
    monotone = bool(np.all(np.diff(seq.U) <= 1e-12 * max(float(seq.U[0]), 1e-300)))
    rep.measured.update({"U": seq.U, "U_last": float(seq.U[-1]), "nonincreasing": monotone})
    rep.passed = bool(rep.passed) and monotone
    return rep


def _lei(traj, p):
    return lei_survey(traj, int(p.get("samples", 20)), int(p.get("seed", 0)),
                      float(p.get("z_step", 0.02)), float(p.get("rel_tol", 1e-6)))


def _vanishing(traj, p):
    grid = traj.grid
    idx = p.get("snapshots", [0, -1])
    R_vals = [math.inf if r is None else float(r) for r in p.get("R", [0.1, 0.3, 0.5, 1.0, None])]
    L_fracs = p.get("L", [-0.8, -0.4, 0.0, 0.4, 0.8])
    tol = float(p.get("tol", 1e-8))
    worst = 0.0
    for i in idx:
        f = traj.snapshots[i]
        f = f.with_values(ifft(fft(f.values) * grid.dealias_mask))
        sup = float(np.max(np.abs(f.values)))
        if sup == 0:
            continue
        for R in R_vals:
            for frac in L_fracs:
                v = vanishing_check(f, R, frac * sup, traj.config.literal_psi)
                worst = max(worst, v / (sup**3 * grid.volume))
    return DiagnosticReport("vanishing", worst <= tol, {"max_relative": worst}, tol,
                            notes="|int psi_R(theta) d_j theta (theta-L)_+| / (|theta|_inf^3 |torus|)")


def lei_survey(traj, samples: int = 20, seed: int = 0, z_step: float = 0.02,
               rel_tol: float = 1e-6) -> DiagnosticReport:
    """Local energy inequality over randomly drawn cutoffs, windows and affine rescalings.

    |β| is drawn from [1/C_θ, 3/C_θ] with random sign, |L| <= 6 C_θ, C_θ = sup|θ|.
    """
    grid = traj.grid
    rng = np.random.Generator(np.random.Philox(seed))
    C_theta = traj.sup_norm()
    if C_theta == 0:
        return DiagnosticReport("lei", True, {"min_normalized_residual": 0.0, "nontrivial": 0},
                                rel_tol, notes="zero trajectory")
    C_N = sobolev_constant(grid.dim)
    z = np.arange(0.0, 4.0 + z_step / 2, z_step)
    worst, nontrivial, rows = math.inf, 0, []
    times = traj.times
    for _ in range(samples):
        beta = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 3.0) / C_theta
        L = rng.uniform(-6.0, 6.0) * C_theta
        r_in = rng.uniform(0.5, 2.0)
        r_out = rng.uniform(r_in + 0.5, 4.0)
        z_in = rng.uniform(0.5, 2.0)
        z_out = rng.uniform(z_in + 0.5, 4.0)
        center = tuple(rng.uniform(0, grid.length, grid.dim))
        i, j = sorted(rng.choice(len(times), size=2, replace=False))
        rep = local_energy_residual(traj, AffineRescale(beta, L), BoxCutoff(center, r_in, r_out, z_in, z_out),
                                    (times[i], times[j]), z, C_N_sobolev=C_N, theta_sup=C_theta)
        scale = max(rep.lhs, rep.rhs, 1e-300)
        norm_res = rep.residual / scale if rep.rhs > 0 or rep.lhs > 0 else 0.0
        nontrivial += rep.lhs > 0
        worst = min(worst, norm_res)
        rows.append([beta, L, float(times[i]), float(times[j]), rep.lhs, rep.rhs])
    return DiagnosticReport(
        "lei",
        worst >= -rel_tol,
        {"min_normalized_residual": worst, "nontrivial": nontrivial, "samples": samples,
         "C_theta": C_theta, "C_N_sobolev": C_N, "draws": rows},
        rel_tol,
        notes="residual = rhs - lhs normalized by max(lhs, rhs); draws are [beta, L, sigma, t, lhs, rhs]",
    )


DIAGNOSTICS = {
    "conservation": _conservation,
    "scaling": _scaling,
    "decay": _decay,
    "oscillation": _oscillation,
    "duhamel": _duhamel,
    "recurrence": _recurrence,
    "lei": _lei,
    "vanishing": _vanishing,
}


def run_diagnostic(traj, name: str, params: dict | None = None) -> DiagnosticReport:
    if name not in DIAGNOSTICS:
        raise ValueError(f"unknown diagnostic {name!r}; choose from {sorted(DIAGNOSTICS)}")
    try:
        return DIAGNOSTICS[name](traj, dict(params or {}))
    except (ValueError, KeyError) as exc:
        return DiagnosticReport(name, False, {}, notes=f"error: {exc}")


def run_experiment(config: ExperimentConfig, out_root=None, figures: bool = True,
                   gnuplot: bool = False) -> RunRecord:
    from .report import emit_report

    content = config.content_dict()
    rid = run_id_for(content)
    base = Path(config.source).parent if config.source else None
    initial = build_initial(config, base)
    status, blowup_t = "completed", None
    try:
        traj = run(initial, config.solver)
    except BlowUpError as exc:
        traj, status, blowup_t = exc.partial, f"aborted: {exc.reason}", exc.t

    reports = []
    if status == "completed" and config.diagnostics:
        jobs = [(d["name"], d.get("params", {})) for d in config.diagnostics]
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            reports = list(pool.map(lambda job: run_diagnostic(traj, *job), jobs))
    elif config.diagnostics:
        reports = [DiagnosticReport(d["name"], None, {}, notes=f"skipped: run {status}")
                   for d in config.diagnostics]

    record = RunRecord(rid, config.to_dict(), status, now_iso(), blowup_time=blowup_t,
                       series={k: np.asarray(v) for k, v in traj.series.items()},
                       snapshot_times=[float(t) for t in traj.times], diagnostics=reports,
                       trajectory=traj)
    run_dir = output_root(config, out_root) / rid
    emit_report(record, run_dir, figures=figures, gnuplot=gnuplot)
    return record
