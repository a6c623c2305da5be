"""Report emission: CSV/JSON artifacts, summary text, figures, gnuplot script."""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .diagnostic import REPORT_SCHEMA
from .records import RunRecord, save_record


def diagnostics_document(record: RunRecord) -> dict:
    doc = {"schema_version": 1, "run_id": record.run_id,
           "reports": [r.to_dict() for r in record.diagnostics]}
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


def summary_text(record: RunRecord) -> str:
    s = record.series
    lines = [f"run {record.run_id}  status: {record.status}"]
    if record.blowup_time is not None:
        lines.append(f"aborted at t={record.blowup_time:.6g}")
    cfg = record.config
    g, sv = cfg["grid"], cfg["solver"]
    lines.append(f"grid dim={g['dim']} n={g['n']} length={g['length']:.6g}")
    lines.append(f"solver alpha={sv['alpha']} epsilon={sv['epsilon']} R={sv['R']} dt={sv['dt']} "
                 f"t_end={sv['t_end']} scheme={sv['scheme']}")
    if len(s.get("t", [])):
        lines.append(f"steps recorded: {len(s['t'])}  final t={s['t'][-1]:.6g}")
        lines.append(f"l2: {s['l2'][0]:.6e} -> {s['l2'][-1]:.6e}   linf: {s['linf'][0]:.6e} -> {s['linf'][-1]:.6e}")
    for rep in record.diagnostics:
        lines.append(rep.line())
    return "\n".join(lines) + "\n"


def gnuplot_script(record: RunRecord) -> str:
    return "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 't'",
        "set logscale y",
        f"set title 'run {record.run_id}'",
        "plot 'scalars.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:5 with lines",
        "",
    ])


def render_figures(record: RunRecord, run_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = []
    s = record.series
    if len(s.get("t", [])):
        fig, ax = plt.subplots(figsize=(6, 4))
        for key in ("l2", "linf", "hhalf"):
            vals = np.asarray(s[key])
            if np.all(vals > 0):
                ax.semilogy(s["t"], vals, label=key)
            else:
                ax.plot(s["t"], vals, label=key)
        ax.set_xlabel("t")
        ax.legend()
        ax.set_title(f"norms, run {record.run_id}")
        fig.tight_layout()
        path = run_dir / "scalars.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        out.append(path)
    traj = record.trajectory
    if traj is not None and len(traj.snapshots):
        grid = traj.grid
        fig, ax = plt.subplots(figsize=(6, 4))
        if grid.dim == 1:
            x = grid.coords[0]
            picks = sorted(set(np.linspace(0, len(traj.snapshots) - 1, 5).astype(int)))
            for i in picks:
                ax.plot(x, traj.snapshots[i].values, label=f"t={traj.times[i]:.3g}")
            ax.set_xlabel("x")
            ax.legend(fontsize="small")
        else:
            im = ax.imshow(traj.snapshots[-1].values.T, origin="lower",
                           extent=(0, grid.length, 0, grid.length))
            fig.colorbar(im, ax=ax)
            ax.set_title(f"t={traj.times[-1]:.3g}")
        fig.tight_layout()
        path = run_dir / "snapshots.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        out.append(path)
    return out


def emit_report(record: RunRecord, run_dir, figures: bool = True, gnuplot: bool = False) -> dict:
    """Write every artifact of a record; returns the written paths by kind."""
    run_dir = Path(run_dir)
    save_record(record, run_dir)
    paths = {"scalars": run_dir / "scalars.csv", "record": run_dir / "record.json"}
    if record.trajectory is not None:
        paths["snapshots"] = run_dir / "snapshots.bin"
    diag = run_dir / "diagnostics.json"
    diag.write_text(json.dumps(diagnostics_document(record), indent=2))
    paths["diagnostics"] = diag
    summary = run_dir / "summary.txt"
    summary.write_text(summary_text(record))
    paths["summary"] = summary
    if figures:
        paths["figures"] = render_figures(record, run_dir)
    if gnuplot:
        gp = run_dir / "plot.gp"
        gp.write_text(gnuplot_script(record))
        paths["gnuplot"] = gp
    return paths
