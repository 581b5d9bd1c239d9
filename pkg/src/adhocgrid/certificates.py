"""Stability certificates.

Topology-free design rules act on a ``DesignEnvelope`` (aggregate bounds that
any interconnection of the units must respect).  Topology-aware checks act on
a solved equilibrium of a concrete network.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import loadflow
from .network import NetworkGraph, tau_max as graph_tau_max

PD_RELATIVE_THRESHOLD = 1e-9


@dataclass(frozen=True)
class DesignEnvelope:
    p_sigma: float
    R_sigma: float
    v_ref: float
    v_min: float
    r_max: float
    tau_max: float
    loads: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not 0 < self.v_min < self.v_ref:
            raise ValueError(f"need 0 < v_min < v_ref, got v_min={self.v_min}, v_ref={self.v_ref}")

    @classmethod
    def from_graph(cls, graph: NetworkGraph, v_ref: float, v_min: float, p=None) -> DesignEnvelope:
        """Envelope of a concrete network; ``p`` overrides the load powers (e.g. rated values)."""
        p = graph.p if p is None else np.asarray(p, dtype=float)
        return cls(
            p_sigma=float(np.sum(p)),
            R_sigma=graph.R_sigma,
            v_ref=float(v_ref),
            v_min=float(v_min),
            r_max=float(np.max(graph.r)),
            tau_max=graph_tau_max(graph),
            loads=tuple((float(pk), float(ck)) for pk, ck in zip(p, graph.C)),
        )


@dataclass
class RuleResult:
    rule: str
    passed: bool
    lhs: float
    rhs: float
    margin: float
    detail: str = ""


@dataclass
class CertificateReport:
    rules: list[RuleResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rules)

    def failed(self) -> list[RuleResult]:
        return [r for r in self.rules if not r.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "rules": [
                {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in asdict(r).items()}
                for r in self.rules
            ],
        }


def _rule(name, lhs, rhs, strict=False, detail=""):
    passed = lhs < rhs if strict else lhs <= rhs
    return RuleResult(name, bool(passed), float(lhs), float(rhs), float(rhs - lhs), detail)


def check_existence(env: DesignEnvelope) -> RuleResult:
    rhs = env.v_ref**2 / (4.0 * env.R_sigma) if env.R_sigma > 0 else np.inf
    return _rule("existence", env.p_sigma, rhs, detail="p_sigma <= v_ref^2 / (4 R_sigma)")


def check_feasibility(env: DesignEnvelope) -> RuleResult:
    num = env.v_min * (env.v_ref - env.v_min)
    rhs = num / env.R_sigma if env.R_sigma > 0 else np.inf
    return _rule("feasibility", env.p_sigma, rhs, detail="p_sigma <= v_min (v_ref - v_min) / R_sigma")


def check_bm_convexity(env: DesignEnvelope) -> RuleResult:
    # worst case over the unknown anchor source: largest droop resistance
    rhs = env.v_min**2 / (env.R_sigma + env.r_max)
    return _rule("bm_convexity", env.p_sigma, rhs, detail="p_sigma <= v_min^2 / (R_sigma + r_max)")


def check_load_capacitances(env: DesignEnvelope) -> list[RuleResult]:
    return [
        _rule(
            f"load_capacitance[{k}]",
            pk,
            ck * env.v_min**2 / env.tau_max,
            strict=True,
            detail="p_k < C_k v_min^2 / tau_max",
        )
        for k, (pk, ck) in enumerate(env.loads)
    ]


def check_design_rules(env: DesignEnvelope) -> CertificateReport:
    return CertificateReport(
        [check_existence(env), check_feasibility(env), check_bm_convexity(env), *check_load_capacitances(env)]
    )


def hessian_co_content(graph: NetworkGraph, v_star) -> np.ndarray:
    """Hessian of the co-content 𝒢 at ``v_star``: Laplacian + 1/r on sources - p/v*² on loads."""
    v_star = np.asarray(v_star, dtype=float)
    vl = v_star[graph.load_idx]
    if np.any(vl == 0):
        raise ZeroDivisionError("zero equilibrium voltage on a load bus")
    H = graph.laplacian()
    H[graph.source_idx, graph.source_idx] += 1.0 / graph.r
    H[graph.load_idx, graph.load_idx] -= graph.p / vl**2
    return H


def check_topology_aware(graph: NetworkGraph, v_star, tau_max: float | None = None) -> list[RuleResult]:
    tau = graph_tau_max(graph) if tau_max is None else tau_max
    eig = np.linalg.eigvalsh(hessian_co_content(graph, v_star))
    thr = PD_RELATIVE_THRESHOLD * max(float(eig[-1]), 0.0)
    out = [RuleResult("hessian_pd", bool(eig[0] > thr), float(eig[0]), thr, float(eig[0] - thr),
                      "lambda_min(H*) > 1e-9 lambda_max(H*)")]
    vl = np.asarray(v_star, dtype=float)[graph.load_idx]
    for k, pk, ck, vk in zip(graph.load_idx, graph.p, graph.C, vl):
        out.append(_rule(f"q_load[{k}]", tau * pk / vk**2, ck, strict=True,
                         detail="tau_max p_k / v_k*^2 < C_k"))
    return out


def certify(
    graph: NetworkGraph,
    v_ref: float,
    v_min: float,
    p_rated=None,
    tolerance: float | None = None,
) -> tuple[CertificateReport, loadflow.EquilibriumSolution]:
    """Design rules on the envelope plus topology-aware checks at the solved equilibrium.

    ``p_rated`` (per load) sets the envelope and the loading at which the
    equilibrium is solved; it defaults to the graph's current load powers.
    """
    if p_rated is not None:
        graph = graph.with_load_powers(p_rated)
    env = DesignEnvelope.from_graph(graph, v_ref, v_min)
    report = check_design_rules(env)
    sol = loadflow.solve_equilibrium(graph, v_ref, tolerance=tolerance)
    if not sol.converged:
        report.rules.append(RuleResult("load_flow", False, sol.residual_norm, sol.tolerance,
                                       sol.tolerance - sol.residual_norm, sol.message))
        return report, sol
    ok, worst, v_worst = loadflow.check_min_voltage(graph, sol, v_min)
    if worst is not None:
        report.rules.append(RuleResult("min_voltage", ok, float(v_min), v_worst, v_worst - v_min,
                                       f"min load voltage at bus {worst}"))
    report.rules.extend(check_topology_aware(graph, sol.v_star, env.tau_max))
    return report, sol
