"""Experiment report: model and controller tables in text, CSV and JSON.

Formatting is deterministic. Floats are written with ``repr`` so the CSV
and JSON forms parse back to the identical report. Wall-clock timings are
hardware dependent and live in a separate timing file so that reports stay
byte-identical across re-runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

CSV_COLUMNS = ("record", "name", "scenario", "kind", "seed", "mae", "mae_true", "heater_total", "fan_total",
               "memory_bytes", "status", "source")


@dataclass(frozen=True)
class ModelResult:
    """Open-loop rollout MAE of one model on one scenario (vs noise-free plant temperature)."""

    model: str
    scenario: str
    kind: str
    mae: float
    memory_bytes: int
    status: str = "ok"
    source: str = ""


@dataclass(frozen=True)
class ControllerResult:
    """Tracking MAE (measured and true) and actuation totals of one closed-loop episode."""

    controller: str
    reference: str
    penalty: bool
    seed: int
    mae: float
    mae_true: float
    heater_total: float
    fan_total: int
    status: str = "ok"
    source: str = ""

    @property
    def actuation(self) -> float:
        return self.heater_total + self.fan_total


@dataclass
class ExperimentReport:
    meta: dict[str, str] = field(default_factory=dict)
    models: list[ModelResult] = field(default_factory=list)
    controllers: list[ControllerResult] = field(default_factory=list)

    # ------------------------------------------------------------------ aggregates
    def aggregate(self, model: str, kind: str) -> float:
        """Mean MAE of ``model`` over its successful scenarios of ``kind``; NaN if none."""
        vals = [r.mae for r in self.models if r.model == model and r.kind == kind and r.status == "ok"]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def model_names(self) -> list[str]:
        return list(dict.fromkeys(r.model for r in self.models))

    def controller(self, name: str, penalty: bool) -> list[ControllerResult]:
        return [r for r in self.controllers if r.controller == name and r.penalty == penalty]

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_json() == other.to_json()

    # ------------------------------------------------------------------ text
    def to_text(self) -> str:
        out = ["# thermotwin experiment report"]
        out += [f"{k}: {v}" for k, v in sorted(self.meta.items())]
        out.append("")
        if self.models:
            out.append("## model rollout MAE (K) by scenario")
            out.append(f"{'model':<8}{'scenario':<14}{'kind':<15}{'mae':>10}{'memory_B':>11}  status")
            for r in self.models:
                out.append(f"{r.model:<8}{r.scenario:<14}{r.kind:<15}{_fmt(r.mae):>10}{r.memory_bytes:>11}  {r.status}")
            out.append("")
            out.append("## aggregates")
            out.append(f"{'model':<8}{'interpolation':>15}{'extrapolation':>15}")
            for m in self.model_names:
                out.append(f"{m:<8}{_fmt(self.aggregate(m, 'interpolation')):>15}"
                           f"{_fmt(self.aggregate(m, 'extrapolation')):>15}")
            out.append("")
        if self.controllers:
            out.append("## controller tracking")
            out.append(f"{'controller':<26}{'reference':<11}{'penalty':<9}{'seed':>5}{'mae':>9}{'mae_true':>10}"
                       f"{'heater':>9}{'fan':>6}  status")
            for r in self.controllers:
                out.append(f"{r.controller:<26}{r.reference:<11}{('yes' if r.penalty else 'no'):<9}{r.seed:>5}"
                           f"{_fmt(r.mae):>9}{_fmt(r.mae_true):>10}{r.heater_total:>9.2f}{r.fan_total:>6}  {r.status}")
        return "\n".join(out) + "\n"

    # ------------------------------------------------------------------ csv
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for k, v in sorted(self.meta.items()):
            w.writerow(["meta", k, "", "", "", "", "", "", "", "", v, ""])
        for r in self.models:
            w.writerow(["model", r.model, r.scenario, r.kind, "", repr(float(r.mae)), "", "", "",
                        str(r.memory_bytes), r.status, r.source])
        for r in self.controllers:
            w.writerow(["controller", r.controller, r.reference, "penalty" if r.penalty else "no-penalty",
                        str(r.seed), repr(float(r.mae)), repr(float(r.mae_true)), repr(float(r.heater_total)),
                        str(r.fan_total), "", r.status, r.source])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        rep = cls()
        for row in csv.DictReader(io.StringIO(text)):
            rec = row["record"]
            if rec == "meta":
                rep.meta[row["name"]] = row["status"]
            elif rec == "model":
                rep.models.append(ModelResult(row["name"], row["scenario"], row["kind"], float(row["mae"]),
                                              int(row["memory_bytes"]), row["status"], row["source"]))
            elif rec == "controller":
                rep.controllers.append(ControllerResult(
                    row["name"], row["scenario"], row["kind"] == "penalty", int(row["seed"]), float(row["mae"]),
                    float(row["mae_true"]), float(row["heater_total"]), int(row["fan_total"]), row["status"],
                    row["source"]))
            else:
                raise ValueError(f"unknown record type {rec!r}")
        return rep

    # ------------------------------------------------------------------ json
    def to_json(self) -> str:
        doc = {
            "meta": dict(sorted(self.meta.items())),
            "models": [_jsonable(asdict(r)) for r in self.models],
            "aggregates": {m: {"interpolation": _num(self.aggregate(m, "interpolation")),
                               "extrapolation": _num(self.aggregate(m, "extrapolation"))}
                           for m in self.model_names},
            "controllers": [_jsonable(asdict(r)) for r in self.controllers],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        doc = json.loads(text)
        return cls(dict(doc["meta"]), [ModelResult(**_unjson(ModelResult, r)) for r in doc["models"]],
                   [ControllerResult(**_unjson(ControllerResult, r)) for r in doc["controllers"]])


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.4f}"


def _num(x: float):
    return None if math.isnan(x) else x


def _jsonable(d: dict) -> dict:
    return {k: _num(v) if isinstance(v, float) else v for k, v in d.items()}


def _unjson(cls, d: dict) -> dict:
    out = {}
    for f in fields(cls):
        v = d[f.name]
        out[f.name] = math.nan if v is None and f.type == "float" else v
    return out
