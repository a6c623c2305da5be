"""Structured pass/fail record shared by every diagnostic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fracburgers diagnostics",
    "type": "object",
    "required": ["schema_version", "run_id", "reports"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "run_id": {"type": "string"},
        "reports": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed", "measured", "tolerance", "notes"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "passed": {"type": ["boolean", "null"]},
                    "measured": {
                        "type": "object",
                        "additionalProperties": {
                            "type": ["number", "string", "boolean", "null", "array"],
                        },
                    },
                    "tolerance": {"type": ["number", "null"]},
                    "notes": {"type": "string"},
                },
            },
        },
    },
}


@dataclass
class DiagnosticReport:
    name: str
    passed: bool | None
    measured: dict = field(default_factory=dict)
    tolerance: float | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": None if self.passed is None else bool(self.passed),
            "measured": {k: _jsonable(v) for k, v in self.measured.items()},
            "tolerance": _jsonable(self.tolerance),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticReport":
        return cls(d["name"], d["passed"], dict(d["measured"]), d["tolerance"], d["notes"])

    def line(self) -> str:
        verdict = {True: "PASS", False: "FAIL", None: "N/A "}[self.passed]
        key = next(iter(self.measured), None)
        detail = f" {key}={self.measured[key]:.3e}" if key and isinstance(self.measured[key], float) else ""
        return f"[{verdict}] {self.name}{detail}"


def _jsonable(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    if isinstance(v, int):
        return v
    v = float(v)
    # JSON has no inf/nan
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v
