"""Run records on disk.

A run directory holds

    record.json      id, creation time, config snapshot, status
    scalars.csv      one row per step: t,l2,linf,mean,hhalf
    snapshots.bin    stacked little-endian float64 fields
    snapshots.json   header for snapshots.bin (grid, times, shape, dtype)
    diagnostics.json every DiagnosticReport, schema-valid
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostic import DiagnosticReport
from .fields import RealField, make_grid
from .solver import SolverConfig, Trajectory

SCALAR_COLUMNS = ("t", "l2", "linf", "mean", "hhalf")
SNAPSHOT_FORMAT = "fracburgers-snapshots"


def config_digest(content: dict) -> str:
    blob = json.dumps(content, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def run_id_for(content: dict, version: str = __version__) -> str:
    return config_digest({"config": content, "version": version})[:16]


@dataclass
class RunRecord:
    run_id: str
    config: dict
    status: str
    created: str
    version: str = __version__
    blowup_time: float | None = None
    series: dict = field(default_factory=dict, repr=False)
    snapshot_times: list = field(default_factory=list, repr=False)
    diagnostics: list = field(default_factory=list)
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "completed"

    def meta(self) -> dict:
        return {
            "run_id": self.run_id,
            "version": self.version,
            "created": self.created,
            "status": self.status,
            "blowup_time": self.blowup_time,
            "config_digest": config_digest(self.config),
            "config": self.config,
            "n_steps_recorded": len(self.series.get("t", [])),
            "n_snapshots": len(self.snapshot_times),
        }


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def scalars_csv(series: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCALAR_COLUMNS)
    cols = [np.asarray(series[c], dtype=float) for c in SCALAR_COLUMNS]
    for row in zip(*cols):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def read_scalars(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SCALAR_COLUMNS:
        raise ValueError(f"{path}: unexpected scalars header {rows[:1]}")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(SCALAR_COLUMNS))
    return {c: data[:, i] for i, c in enumerate(SCALAR_COLUMNS)}


def write_snapshots(path_bin, grid, times, stack: np.ndarray) -> None:
    path_bin = Path(path_bin)
    stack = np.ascontiguousarray(stack, dtype="<f8")
    header = {
        "format": SNAPSHOT_FORMAT,
        "version": 1,
        "dtype": "<f8",
        "endianness": "little",
        "order": "C",
        "grid": grid.to_dict(),
        "shape": list(stack.shape),
        "times": [float(t) for t in times],
        "data_file": path_bin.name,
    }
    path_bin.write_bytes(stack.tobytes())
    path_bin.with_suffix(".json").write_text(json.dumps(header, indent=2))


def read_snapshots(path):
    """Load (header, stack, grid) from either the .bin or its .json header."""
    path = Path(path)
    header_path = path.with_suffix(".json")
    header = json.loads(header_path.read_text())
    if header.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{header_path}: not a snapshot header")
    raw = (header_path.parent / header["data_file"]).read_bytes()
    stack = np.frombuffer(raw, dtype=np.dtype(header["dtype"])).reshape(header["shape"])
    g = header["grid"]
    return header, stack.astype(float), make_grid(g["dim"], g["n"], g["length"])


def save_record(record: RunRecord, run_dir) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "record.json").write_text(json.dumps(record.meta(), indent=2, sort_keys=True))
    (run_dir / "scalars.csv").write_text(scalars_csv(record.series))
    if record.trajectory is not None:
        traj = record.trajectory
        write_snapshots(run_dir / "snapshots.bin", traj.grid, traj.times, traj.values())
    return run_dir


def load_record(run_dir, with_trajectory: bool = False) -> RunRecord:
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "record.json").read_text())
    series = read_scalars(run_dir / "scalars.csv")
    diags = []
    diag_path = run_dir / "diagnostics.json"
    if diag_path.exists():
        diags = [DiagnosticReport.from_dict(d) for d in json.loads(diag_path.read_text())["reports"]]
    rec = RunRecord(meta["run_id"], meta["config"], meta["status"], meta["created"],
                    meta.get("version", __version__), meta.get("blowup_time"), series,
                    diagnostics=diags)
    snap = run_dir / "snapshots.json"
    if snap.exists():
        header, stack, grid = read_snapshots(snap)
        rec.snapshot_times = header["times"]
        if with_trajectory:
            rec.trajectory = trajectory_from(rec, header, stack, grid)
    return rec


def trajectory_from(rec: RunRecord, header: dict, stack: np.ndarray, grid) -> Trajectory:
    cfg = SolverConfig.from_dict(rec.config["solver"])
    snaps = tuple(RealField(grid, v) for v in stack)
    return Trajectory(cfg, snaps[0], np.array(header["times"], dtype=float), snaps,
                      {k: np.asarray(v) for k, v in rec.series.items()})


def list_runs(root) -> list[dict]:
    """One row per run directory: id, date, config digest, status; unreadable records are flagged."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    rows = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            meta = json.loads((d / "record.json").read_text())
            rows.append({"id": meta["run_id"], "date": meta["created"],
                         "digest": meta["config_digest"][:12], "status": meta["status"]})
        except (OSError, ValueError, KeyError, TypeError):
            rows.append({"id": d.name, "date": "", "digest": "", "status": "unreadable"})
    rows.sort(key=lambda r: (r["date"] == "", r["date"], r["id"]))
    return rows
