"""Electrical graph of an ad hoc DC microgrid.

Buses carry either a droop-controlled source or a constant-power load; lines
are series RL branches oriented from ``source`` bus to ``target`` bus.  The
incidence structure is kept as two endpoint arrays and only ever applied as
an operator (``incidence_apply`` / ``incidence_transpose_apply``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class BusKind(enum.Enum):
    SOURCE = "source"
    LOAD = "load"


@dataclass(frozen=True)
class LineParams:
    R: float
    L: float
    source: int
    target: int

    @property
    def tau(self) -> float:
        return self.L / self.R


@dataclass(frozen=True)
class LoadParams:
    p: float
    C: float

    kind = BusKind.LOAD


@dataclass(frozen=True)
class SourceParams:
    r: float
    u0: float | None = None

    kind = BusKind.SOURCE


BusParams = Union[LoadParams, SourceParams]


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)
    p_sigma: float = 0.0
    R_sigma: float = 0.0
    n_sources: int = 0
    n_loads: int = 0
    connected: bool = False


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Buses and lines, in user order.  Immutable after construction."""

    buses: tuple[BusParams, ...]
    lines: tuple[LineParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))

    def __eq__(self, other):
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return self.buses == other.buses and self.lines == other.lines

    def __hash__(self):
        return hash((self.buses, self.lines))

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def m(self) -> int:
        return len(self.lines)

    @cached_property
    def kinds(self) -> tuple[BusKind, ...]:
        return tuple(b.kind for b in self.buses)

    @cached_property
    def source_idx(self) -> np.ndarray:
        return np.array([k for k, b in enumerate(self.buses) if b.kind is BusKind.SOURCE], dtype=int)

    @cached_property
    def load_idx(self) -> np.ndarray:
        return np.array([k for k, b in enumerate(self.buses) if b.kind is BusKind.LOAD], dtype=int)

    @property
    def n_s(self) -> int:
        return len(self.source_idx)

    @property
    def n_l(self) -> int:
        return len(self.load_idx)

    @cached_property
    def s(self) -> np.ndarray:
        return np.array([ln.source for ln in self.lines], dtype=int)

    @cached_property
    def t(self) -> np.ndarray:
        return np.array([ln.target for ln in self.lines], dtype=int)

    @cached_property
    def R(self) -> np.ndarray:
        return np.array([ln.R for ln in self.lines], dtype=float)

    @cached_property
    def L(self) -> np.ndarray:
        return np.array([ln.L for ln in self.lines], dtype=float)

    @cached_property
    def p(self) -> np.ndarray:
        """Load powers on load buses (length n_l, ordered as ``load_idx``)."""
        return np.array([self.buses[k].p for k in self.load_idx], dtype=float)

    @cached_property
    def C(self) -> np.ndarray:
        return np.array([self.buses[k].C for k in self.load_idx], dtype=float)

    @cached_property
    def r(self) -> np.ndarray:
        """Droop resistances on source buses (length n_s, ordered as ``source_idx``)."""
        return np.array([self.buses[k].r for k in self.source_idx], dtype=float)

    @property
    def p_sigma(self) -> float:
        return float(self.p.sum())

    @property
    def R_sigma(self) -> float:
        return float(self.R.sum())

    def incidence_matrix(self) -> np.ndarray:
        """Dense m x n incidence matrix, built on demand."""
        A = np.zeros((self.m, self.n))
        rows = np.arange(self.m)
        A[rows, self.s] += 1.0
        A[rows, self.t] -= 1.0
        return A

    def laplacian(self) -> np.ndarray:
        """Weighted Laplacian ∇ᵀR⁻¹∇, assembled edge by edge (exactly symmetric)."""
        G = np.zeros((self.n, self.n))
        g = 1.0 / self.R
        np.add.at(G, (self.s, self.s), g)
        np.add.at(G, (self.t, self.t), g)
        np.add.at(G, (self.s, self.t), -g)
        np.add.at(G, (self.t, self.s), -g)
        return G

    def with_load_powers(self, p: Sequence[float]) -> NetworkGraph:
        """Copy with load powers replaced (``p`` ordered as ``load_idx``)."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_l,):
            raise ValueError(f"expected {self.n_l} load powers, got shape {p.shape}")
        buses = list(self.buses)
        for k, pk in zip(self.load_idx, p):
            buses[k] = replace(buses[k], p=float(pk))
        return NetworkGraph(tuple(buses), self.lines)


def validate(graph: NetworkGraph) -> ValidationReport:
    """Collect every structural and parameter problem; never stops at the first."""
    failures = []
    n, m = graph.n, graph.m
    n_s = n_l = 0
    for k, bus in enumerate(graph.buses):
        if isinstance(bus, SourceParams):
            n_s += 1
            if not bus.r > 0:
                failures.append(f"nonpositive droop resistance r at bus {k}")
        elif isinstance(bus, LoadParams):
            n_l += 1
            if not bus.p >= 0:
                failures.append(f"negative load power p at bus {k}")
            if not bus.C > 0:
                failures.append(f"nonpositive load capacitance C at bus {k}")
        else:
            failures.append(f"bus {k} is neither source nor load")
    if n_s == 0:
        failures.append("no source")

    edges_ok = []
    for a, ln in enumerate(graph.lines):
        ok = True
        if not (0 <= ln.source < n and 0 <= ln.target < n):
            failures.append(f"line {a} references a bus out of range")
            ok = False
        elif ln.source == ln.target:
            failures.append(f"line {a} is a self-loop")
            ok = False
        if not ln.R > 0:
            failures.append(f"nonpositive resistance R on line {a}")
        if not ln.L > 0:
            failures.append(f"nonpositive inductance L on line {a}")
        if ok:
            edges_ok.append((ln.source, ln.target))

    connected = False
    if n > 0:
        if edges_ok:
            rows, cols = zip(*edges_ok)
            adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
            n_comp, _ = connected_components(adj, directed=True, connection="weak")
        else:
            n_comp = n
        connected = n_comp == 1
    if not connected:
        failures.append("not connected")

    p_sigma = sum(b.p for b in graph.buses if isinstance(b, LoadParams))
    R_sigma = sum(ln.R for ln in graph.lines)
    return ValidationReport(
        ok=not failures,
        failures=failures,
        p_sigma=float(p_sigma),
        R_sigma=float(R_sigma),
        n_sources=n_s,
        n_loads=n_l,
        connected=connected,
    )


def incidence_apply(graph: NetworkGraph, v) -> np.ndarray:
    """Potential drop across every line: ``v[s] - v[t]``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (graph.n,):
        raise ValueError(f"node vector must have length {graph.n}, got shape {v.shape}")
    return v[graph.s] - v[graph.t]


def incidence_transpose_apply(graph: NetworkGraph, i) -> np.ndarray:
    """Net current leaving every bus through the lines."""
    i = np.asarray(i, dtype=float)
    if i.shape != (graph.m,):
        raise ValueError(f"edge vector must have length {graph.m}, got shape {i.shape}")
    return np.bincount(graph.s, i, graph.n) - np.bincount(graph.t, i, graph.n)


def tau_max(graph: NetworkGraph) -> float:
    if graph.m == 0:
        raise ValueError("tau_max of a graph without lines")
    return float(np.max(graph.L / graph.R))
