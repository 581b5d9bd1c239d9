"""Scenario files: JSON in, validated dataclasses out, and back.

A scenario bundles a network, the nominal and minimum voltages, controller
gains, load-switching events and simulation settings.  Loads list their
initial power ``p``; the rated power used for certification is the largest
value a load ever takes (initial or through an event).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import controllers as ctl
from .dynamics import Event, SimConfig
from .network import LineParams, LoadParams, NetworkGraph, SourceParams, validate

SCHEMA_VERSION = 1
DEFAULT_V_MIN_FRACTION = 0.95

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "v_ref", "buses", "lines"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "v_ref": _pos,
        "v_min": _pos,
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["kind", "r"],
                        "additionalProperties": False,
                        "properties": {"kind": {"const": "source"}, "r": _pos, "u0": _num, "label": {"type": "string"}},
                    },
                    {
                        "type": "object",
                        "required": ["kind", "p", "C"],
                        "additionalProperties": False,
                        "properties": {"kind": {"const": "load"}, "p": _nonneg, "C": _pos, "label": {"type": "string"}},
                    },
                ]
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "R"],
                "additionalProperties": False,
                "properties": {
                    "from": {"type": "integer", "minimum": 0},
                    "to": {"type": "integer", "minimum": 0},
                    "R": _pos,
                    "L": _pos,
                    "tau": _pos,
                },
                "oneOf": [{"required": ["L"]}, {"required": ["tau"]}],
            },
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["droop", "uncoordinated", "standard", "multipurpose"]},
                "k_p": _nonneg,
                "k_i": _pos,
                "k_v": _pos,
                "k_lambda": _pos,
                "lambda": {"type": "array", "items": _pos},
                "c_u": _pos,
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["time", "bus", "power"],
                "additionalProperties": False,
                "properties": {"time": _nonneg, "bus": {"type": "integer", "minimum": 0}, "power": _nonneg},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": _pos,
                "max_step": _pos,
                "rel_tol": _pos,
                "abs_tol": _pos,
                "sample_interval": _pos,
                "initial": {"enum": ["loadflow", "cold"]},
            },
        },
        "loadflow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tolerance": {"type": ["number", "null"]}, "max_iter": {"type": "integer", "minimum": 1}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"plots": {"type": "boolean"}, "metrics_window": _pos},
        },
    },
}

DEFAULT_GAINS = {"k_p": 0.0, "k_i": 18.02, "k_v": 36.04, "k_lambda": 0.7508, "c_u": 1.0}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    graph: NetworkGraph
    v_ref: float
    v_min: float
    controller: str
    gains: dict
    events: tuple[Event, ...]
    sim: SimConfig
    lf_tolerance: float | None = None
    lf_max_iter: int = 50
    plots: bool = True
    metrics_window: float = 0.005
    description: str = ""
    notes: tuple[str, ...] = ()
    labels: tuple[str | None, ...] = field(default=(), compare=False)

    def __hash__(self):
        return hash((self.name, self.graph))

    def kind(self, override: str | None = None):
        return ctl.from_name(override or self.controller, self.gains)

    @property
    def lam(self) -> np.ndarray:
        lam = self.gains.get("lambda") or [1.0] * self.graph.n_s
        return np.asarray(lam, dtype=float)

    def rated_powers(self) -> np.ndarray:
        """Largest power each load ever draws (ordered as ``graph.load_idx``)."""
        p = self.graph.p.copy()
        pos = {int(k): j for j, k in enumerate(self.graph.load_idx)}
        for e in self.events:
            p[pos[e.bus]] = max(p[pos[e.bus]], e.power)
        return p

    def to_dict(self) -> dict:
        buses = []
        for k, b in enumerate(self.graph.buses):
            if isinstance(b, SourceParams):
                d = {"kind": "source", "r": b.r}
                if b.u0 is not None:
                    d["u0"] = b.u0
            else:
                d = {"kind": "load", "p": b.p, "C": b.C}
            if k < len(self.labels) and self.labels[k]:
                d["label"] = self.labels[k]
            buses.append(d)
        out = {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "notes": list(self.notes),
            "v_ref": self.v_ref,
            "v_min": self.v_min,
            "buses": buses,
            "lines": [{"from": ln.source, "to": ln.target, "R": ln.R, "L": ln.L} for ln in self.graph.lines],
            "controller": {"kind": self.controller, **self.gains},
            "events": [asdict(e) for e in self.events],
            "sim": asdict(self.sim),
            "loadflow": {"tolerance": self.lf_tolerance, "max_iter": self.lf_max_iter},
            "output": {"plots": self.plots, "metrics_window": self.metrics_window},
        }
        return out


def _format_path(error) -> str:
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def scenario_from_dict(data: dict, name: str = "scenario") -> ScenarioFile:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_format_path(e)}: {e.message}" for e in errors]
        raise ScenarioError("schema violation:\n  " + "\n  ".join(lines))

    buses, labels = [], []
    for b in data["buses"]:
        if b["kind"] == "source":
            buses.append(SourceParams(r=float(b["r"]), u0=None if "u0" not in b else float(b["u0"])))
        else:
            buses.append(LoadParams(p=float(b["p"]), C=float(b["C"])))
        labels.append(b.get("label"))
    lines = []
    for ln in data["lines"]:
        R = float(ln["R"])
        L = float(ln["L"]) if "L" in ln else float(ln["tau"]) * R
        lines.append(LineParams(R=R, L=L, source=int(ln["from"]), target=int(ln["to"])))
    graph = NetworkGraph(tuple(buses), tuple(lines))
    report = validate(graph)
    if not report.ok:
        raise ScenarioError("invalid network: " + "; ".join(report.failures))

    v_ref = float(data["v_ref"])
    v_min = float(data.get("v_min", DEFAULT_V_MIN_FRACTION * v_ref))
    if not v_min < v_ref:
        raise ScenarioError(f"v_min ({v_min}) must be below v_ref ({v_ref})")

    cdata = dict(data.get("controller", {}))
    kind_name = cdata.pop("kind", "multipurpose")
    gains = {**DEFAULT_GAINS, **{k: (list(map(float, v)) if k == "lambda" else float(v)) for k, v in cdata.items()}}
    if "lambda" in gains and len(gains["lambda"]) != graph.n_s:
        raise ScenarioError(f"controller/lambda: expected {graph.n_s} entries, got {len(gains['lambda'])}")

    try:
        sim = SimConfig(**data.get("sim", {}))
    except ValueError as exc:
        raise ScenarioError(f"sim: {exc}") from None

    load_set = {int(k) for k in graph.load_idx}
    events = []
    for j, e in enumerate(data.get("events", [])):
        if e["bus"] >= graph.n:
            raise ScenarioError(f"events/{j}: bus {e['bus']} does not exist")
        if e["bus"] not in load_set:
            raise ScenarioError(f"events/{j}: event target is not a load (bus {e['bus']})")
        if not e["time"] < sim.t_end:
            raise ScenarioError(f"events/{j}: event time {e['time']} is not before t_end {sim.t_end}")
        events.append(Event(float(e["time"]), int(e["bus"]), float(e["power"])))

    lf = data.get("loadflow", {})
    out = data.get("output", {})
    return ScenarioFile(
        name=data.get("name", name),
        graph=graph,
        v_ref=v_ref,
        v_min=v_min,
        controller=kind_name,
        gains=gains,
        events=tuple(sorted(events, key=lambda e: e.time)),
        sim=sim,
        lf_tolerance=lf.get("tolerance"),
        lf_max_iter=int(lf.get("max_iter", 50)),
        plots=bool(out.get("plots", True)),
        metrics_window=float(out.get("metrics_window", 0.005)),
        description=data.get("description", ""),
        notes=tuple(data.get("notes", ())),
        labels=tuple(labels),
    )


def bundled_path(name: str) -> Path:
    fname = name if name.endswith(".json") else name + ".json"
    return Path(str(resources.files("adhocgrid") / "scenarios" / fname))


def bundled_names() -> list[str]:
    return sorted(p.stem for p in Path(str(resources.files("adhocgrid") / "scenarios")).glob("*.json"))


def parse_scenario(path) -> ScenarioFile:
    """Read a scenario from a path, or by bundled name (e.g. ``"paper_fig3"``)."""
    p = Path(path)
    if not p.exists() and str(path) in bundled_names():
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data, name=p.stem)


def dump_scenario(sc: ScenarioFile, path) -> None:
    Path(path).write_text(json.dumps(sc.to_dict(), indent=2) + "\n")
