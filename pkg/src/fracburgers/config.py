"""Experiment configuration: JSON schema, parsing and initial-data generators."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .fields import Grid, RealField, make_grid, sample_band_limited
from .solver import SolverConfig

CONFIG_VERSION = 1

DIAGNOSTIC_NAMES = ("conservation", "scaling", "decay", "oscillation", "duhamel",
                    "recurrence", "lei", "vanishing")

_number = {"type": "number"}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fracburgers experiment",
    "type": "object",
    "required": ["grid", "initial"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "grid": {
            "type": "object",
            "required": ["n"],
            "additionalProperties": False,
            "properties": {
                "dim": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 8},
                "length": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _number,
                "epsilon": _number,
                "R": {"type": ["number", "null"]},
                "dt": _number,
                "t_end": _number,
                "dealias": {"type": "boolean"},
                "nonlinearity_scale": _number,
                "scheme": {"enum": ["euler", "heun"]},
                "snapshot_every": {"type": "integer", "minimum": 1},
                "literal_psi": {"type": "boolean"},
                "blowup_factor": {"type": "number", "exclusiveMinimum": 1},
            },
        },
        "initial": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "gaussian-bump"},
                        "amplitude": _number,
                        "width": {"type": "number", "exclusiveMinimum": 0},
                        "center": {"type": ["number", "array", "null"], "items": _number},
                        "mean_zero": {"type": "boolean"},
                    },
                },
                {
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "random-band-limited"},
                        "kmax": {"type": "integer", "minimum": 1},
                        "amplitude": _number,
                        "zero_mean": {"type": "boolean"},
                    },
                },
                {
                    "additionalProperties": False,
                    "required": ["terms"],
                    "properties": {
                        "kind": {"const": "sine-sum"},
                        "terms": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["mode"],
                                "additionalProperties": False,
                                "properties": {
                                    "amplitude": _number,
                                    "mode": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                                    "phase": _number,
                                },
                            },
                        },
                    },
                },
                {
                    "additionalProperties": False,
                    "required": ["path"],
                    "properties": {
                        "kind": {"const": "file-load"},
                        "path": {"type": "string"},
                        "index": {"type": "integer"},
                    },
                },
            ],
        },
        "diagnostics": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"enum": list(DIAGNOSTIC_NAMES)},
                    "params": {"type": "object"},
                },
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
    },
}

_GRID_DEFAULTS = {"dim": 1, "length": 2 * math.pi}
_INITIAL_DEFAULTS = {
    "gaussian-bump": {"amplitude": 1.0, "width": 1.0, "center": None, "mean_zero": False},
    "random-band-limited": {"kmax": 8, "amplitude": 1.0, "zero_mean": False},
    "sine-sum": {},
    "file-load": {"index": -1},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the offending key path."""


@dataclass
class ExperimentConfig:
    grid: dict
    solver: SolverConfig
    initial: dict
    diagnostics: list = field(default_factory=list)
    seed: int = 0
    threads: int = 1
    output_dir: str | None = None
    source: str | None = field(default=None, compare=False)

    def make_grid(self) -> Grid:
        return make_grid(self.grid["dim"], self.grid["n"], self.grid["length"])

    def to_dict(self) -> dict:
        d = {
            "version": CONFIG_VERSION,
            "grid": dict(self.grid),
            "solver": self.solver.to_dict(),
            "initial": copy.deepcopy(self.initial),
            "diagnostics": copy.deepcopy(self.diagnostics),
            "seed": self.seed,
            "threads": self.threads,
        }
        if self.output_dir is not None:
            d["output_dir"] = self.output_dir
        return d

    def content_dict(self) -> dict:
        """The part of the config that determines results (no threads, no output location)."""
        d = self.to_dict()
        d.pop("threads")
        d.pop("output_dir", None)
        return d


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def config_from_dict(raw: dict, source: str | None = None) -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        if err.validator == "oneOf" and isinstance(err.instance, dict):
            # report the branch matching the declared kind rather than the union failure
            kind = err.instance.get("kind")
            for sub in err.context:
                branch = CONFIG_SCHEMA["properties"]["initial"]["oneOf"][sub.schema_path[0]]
                if branch["properties"]["kind"].get("const") == kind:
                    err = sub
                    break
        raise ConfigError(f"{_path(err)}: {err.message}")

    grid = {**_GRID_DEFAULTS, **raw["grid"]}
    try:
        make_grid(grid["dim"], grid["n"], grid["length"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    try:
        solver = SolverConfig.from_dict(raw.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    initial = {**_INITIAL_DEFAULTS[raw["initial"]["kind"]], **raw["initial"]}
    diagnostics = [{"name": d["name"], "params": dict(d.get("params", {}))}
                   for d in raw.get("diagnostics", [])]
    return ExperimentConfig(grid, solver, initial, diagnostics, int(raw.get("seed", 0)),
                            int(raw.get("threads", 1)), raw.get("output_dir"), source)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>: config must be a JSON object")
    return config_from_dict(raw, str(path))


def emit_config(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


def build_initial(config: ExperimentConfig, base_dir: Path | None = None) -> RealField:
    grid = config.make_grid()
    init = config.initial
    kind = init["kind"]
    if kind == "gaussian-bump":
        center = init["center"]
        if center is None:
            center = [grid.length / 2] * grid.dim
        center = np.broadcast_to(np.atleast_1d(np.asarray(center, dtype=float)), (grid.dim,))
        d2 = np.zeros(grid.shape)
        for axis, c in enumerate(center):
            d = (grid.coords[axis] - c + grid.length / 2) % grid.length - grid.length / 2
            d2 = d2 + d**2
        vals = init["amplitude"] * np.exp(-d2 / (2 * init["width"] ** 2))
        if init["mean_zero"]:
            vals = vals - vals.mean()
        return RealField(grid, vals)
    if kind == "random-band-limited":
        rng = np.random.Generator(np.random.Philox(config.seed))
        return sample_band_limited(grid, rng, kmax=init["kmax"], amplitude=init["amplitude"],
                                   zero_mean=init["zero_mean"])
    if kind == "sine-sum":
        vals = np.zeros(grid.shape)
        for term in init["terms"]:
            mode = term["mode"]
            if len(mode) != grid.dim:
                raise ConfigError("initial.terms.mode: length must equal grid.dim")
            phase = sum(m * grid.mode_spacing * x for m, x in zip(mode, grid.coords))
            vals = vals + term.get("amplitude", 1.0) * np.sin(phase + term.get("phase", 0.0))
        return RealField(grid, vals)
    if kind == "file-load":
        from .records import read_snapshots

        path = Path(init["path"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if path.suffix == ".npy":
            vals = np.load(path)
        else:
            _, stack, _ = read_snapshots(path)
            vals = stack[init["index"]]
        if vals.shape != grid.shape:
            raise ConfigError(f"initial.path: stored shape {vals.shape} does not match grid {grid.shape}")
        return RealField(grid, vals)
    raise ConfigError(f"initial.kind: unknown generator {kind!r}")
