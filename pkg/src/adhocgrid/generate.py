"""Random connected networks whose aggregate parameters pass the design rules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import certificates as cert
from . import loadflow
from .network import LineParams, LoadParams, NetworkGraph, SourceParams, tau_max


@dataclass
class RandomCase:
    graph: NetworkGraph
    v_ref: float
    v_min: float


def random_topology(rng: np.random.Generator, n: int, m: int) -> list[tuple[int, int]]:
    """Random spanning tree plus ``m - n + 1`` extra edges, random orientations."""
    order = rng.permutation(n)
    edges = []
    for j in range(1, n):
        a, b = int(order[j]), int(order[rng.integers(0, j)])
        edges.append((a, b) if rng.random() < 0.5 else (b, a))
    while len(edges) < m:
        a, b = rng.choice(n, size=2, replace=False)
        edges.append((int(a), int(b)))
    return edges


def random_certified_network(rng: np.random.Generator, n_max: int = 12, m_max: int = 20) -> RandomCase:
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(n - 1, max(n - 1, m_max) + 1))
    n_s = int(rng.integers(1, n))
    is_source = np.zeros(n, dtype=bool)
    is_source[rng.choice(n, size=n_s, replace=False)] = True

    lines = []
    for a, b in random_topology(rng, n, m):
        R = float(rng.uniform(0.01, 0.5))
        lines.append(LineParams(R=R, L=R * float(rng.uniform(5e-6, 120e-6)), source=a, target=b))
    v_ref = float(rng.choice([24.0, 48.0, 380.0]))
    v_min = v_ref * float(rng.uniform(0.55, 0.97))

    buses = [SourceParams(r=float(rng.uniform(0.02, 2.0))) if s else LoadParams(p=0.0, C=1.0) for s in is_source]
    draft = NetworkGraph(tuple(buses), tuple(lines))
    env = cert.DesignEnvelope.from_graph(draft, v_ref, v_min)
    budget = min(cert.check_existence(env).rhs, cert.check_feasibility(env).rhs, cert.check_bm_convexity(env).rhs)
    p_sigma = budget * float(rng.uniform(0.02, 0.999))

    n_l = n - n_s
    w = rng.uniform(0.0, 1.0, size=n_l) * (rng.random(n_l) > 0.15)
    if w.sum() == 0:
        w[rng.integers(0, n_l)] = 1.0
    p = p_sigma * w / w.sum()
    tau = tau_max(draft)
    c_min = p * tau / v_min**2
    C = np.where(p > 0, c_min * rng.uniform(1.001, 4.0, size=n_l), rng.uniform(1e-6, 1e-3, size=n_l))

    it = iter(zip(p, C))
    final = []
    for b in buses:
        if isinstance(b, LoadParams):
            pk, ck = next(it)
            final.append(LoadParams(p=float(pk), C=float(ck)))
        else:
            final.append(b)
    return RandomCase(NetworkGraph(tuple(final), tuple(lines)), v_ref, v_min)


def check_implication(case: RandomCase) -> tuple[bool, str]:
    """Design rules pass  =>  high-voltage load flow exists above v_min and is locally stable."""
    g, v_ref, v_min = case.graph, case.v_ref, case.v_min
    rules = cert.check_design_rules(cert.DesignEnvelope.from_graph(g, v_ref, v_min))
    if not rules.passed:
        return False, "generator produced a case that fails the design rules: " + ", ".join(
            r.rule for r in rules.failed())
    sol = loadflow.solve_equilibrium(g, v_ref)
    if not sol.converged:
        return False, f"load flow did not converge: {sol.message}"
    ok, bus, v_worst = loadflow.check_min_voltage(g, sol, v_min)
    if not ok:
        return False, f"load voltage {v_worst:.6g} V at bus {bus} is not above v_min {v_min:.6g} V"
    failed = [r.rule for r in cert.check_topology_aware(g, sol.v_star) if not r.passed]
    if failed:
        return False, "topology-aware checks failed: " + ", ".join(failed)
    return True, "ok"
