"""Trajectory CSV and the power / voltage / load SVG plots."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .network import NetworkGraph
from .svg import line_chart


def _fmt(x) -> str:
    return f"{x:.9g}"


def csv_header(graph: NetworkGraph) -> list[str]:
    cols = ["t (s)"]
    cols += [f"i_{a} (A)" for a in range(graph.m)]
    cols += [f"v_{k} (V)" for k in range(graph.n)]
    cols += [f"u_{k} (V)" for k in graph.source_idx]
    cols += [f"P_{k} (W)" for k in graph.source_idx]
    cols += ["v_bar (V)", "P_bar (W)", "V_lyapunov (arb)", "P_potential (W)"]
    return cols


def write_trajectory_csv(traj: Trajectory, graph: NetworkGraph, path) -> Path:
    path = Path(path)
    rows = np.column_stack([traj.t, traj.i, traj.v, traj.u, traj.P, traj.v_bar, traj.P_bar, traj.V, traj.P_potential])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(graph))
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    return header, data


def _label(graph, labels, k):
    return labels[k] if k < len(labels) and labels[k] else f"bus {k}"


def write_plots(traj: Trajectory, graph: NetworkGraph, out_dir, labels=(), prefix: str = "") -> list[Path]:
    out_dir = Path(out_dir)
    t_ms = traj.t * 1e3
    srcs = list(graph.source_idx)
    power = [(_label(graph, labels, k), t_ms, traj.P[:, j]) for j, k in enumerate(srcs)]
    volts = [(_label(graph, labels, k), t_ms, traj.v[:, k]) for k in srcs]
    total = [("total load", t_ms, traj.p_load.sum(axis=1))]
    kind = getattr(traj.kind, "name", "")
    files = {
        "power.svg": line_chart(power, f"Source power ({kind})", "time (ms)", "power (W)"),
        "source_voltages.svg": line_chart(volts, f"Source node voltage ({kind})", "time (ms)", "voltage (V)"),
        "total_load.svg": line_chart(total, "Total power drawn by loads", "time (ms)", "power (W)"),
    }
    paths = []
    for name, text in files.items():
        p = out_dir / f"{prefix}{name}"
        p.write_text(text)
        paths.append(p)
    return paths
