"""Brayton-Moser potentials, the mixed-potential matrix and the Lyapunov function.

Source buses carry no capacitor state: their voltage rate is always the
algebraic limit ``dv_k = du_k - r_k (∇ᵀ di)_k``.  The values returned here are
diagnostics; only sign and monotonicity of ``lyapunov_v`` carry meaning.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkGraph, incidence_apply, incidence_transpose_apply


@dataclass
class SystemState:
    i: np.ndarray
    v: np.ndarray
    u: np.ndarray


@dataclass
class StateDerivative:
    di: np.ndarray
    dv: np.ndarray
    du: np.ndarray

    def scaled(self, c: float) -> StateDerivative:
        return StateDerivative(c * self.di, c * self.dv, c * self.du)


def source_voltage_rate(graph: NetworkGraph, di, du) -> np.ndarray:
    return du - graph.r * incidence_transpose_apply(graph, di)[graph.source_idx]


def resistive_content(graph: NetworkGraph, i) -> float:
    i = np.asarray(i, dtype=float)
    return 0.5 * float(np.sum(graph.R * i * i))


def resistive_co_content(graph: NetworkGraph, v, u, v_ref: float) -> float:
    v = np.asarray(v, dtype=float)
    vl = v[graph.load_idx]
    if np.any(vl <= 0):
        raise ValueError("co-content needs positive load voltages")
    vs = v[graph.source_idx]
    load_part = float(np.sum(graph.p * np.log(vl)))
    src_part = float(np.sum((0.5 * vs**2 + (v_ref - vs) * np.asarray(u, dtype=float)) / graph.r))
    return load_part + src_part


def bm_potential_p0(graph: NetworkGraph, state: SystemState, v_ref: float) -> float:
    i = np.asarray(state.i, dtype=float)
    return (resistive_co_content(graph, state.v, state.u, v_ref)
            - resistive_content(graph, i)
            + float(i @ incidence_apply(graph, state.v)))


def p0_gradient(graph: NetworkGraph, state: SystemState, v_ref: float):
    """Analytic ``(∂𝒫₀/∂i, ∂𝒫₀/∂v)``; these are ``L di`` and ``-C dv`` of the circuit."""
    i = np.asarray(state.i, dtype=float)
    v = np.asarray(state.v, dtype=float)
    gi = -graph.R * i + incidence_apply(graph, v)
    gv = incidence_transpose_apply(graph, i)
    gv[graph.load_idx] += graph.p / v[graph.load_idx]
    gv[graph.source_idx] += (v[graph.source_idx] - np.asarray(state.u, dtype=float)) / graph.r
    return gi, gv


def co_content_g(graph: NetworkGraph, v, u, v_ref: float) -> float:
    drop = incidence_apply(graph, v)
    return 0.5 * float(np.sum(drop**2 / graph.R)) + resistive_co_content(graph, v, u, v_ref)


def co_content_hessian_diag(graph: NetworkGraph, v) -> np.ndarray:
    """Diagonal of ∂vv𝒢₀: -p/v² on loads, 1/r on sources."""
    v = np.asarray(v, dtype=float)
    d = np.empty(graph.n)
    d[graph.load_idx] = -graph.p / v[graph.load_idx] ** 2
    d[graph.source_idx] = 1.0 / graph.r
    return d


def bm_potential_p(graph: NetworkGraph, state: SystemState, deriv: StateDerivative,
                   v_ref: float, tau_max: float) -> float:
    di = np.asarray(deriv.di, dtype=float)
    kinetic_i = 0.5 * float(np.sum(graph.L * (tau_max - graph.L / graph.R) * di * di))
    dvl = np.asarray(deriv.dv, dtype=float)[graph.load_idx]
    kinetic_v = 0.5 * tau_max * float(np.sum(graph.C * dvl * dvl))
    return kinetic_i + kinetic_v + co_content_g(graph, state.v, state.u, v_ref)


def capacitance_vector(graph: NetworkGraph) -> np.ndarray:
    c = np.zeros(graph.n)
    c[graph.load_idx] = graph.C
    return c


def q_matrix(graph: NetworkGraph, v, tau_max: float) -> np.ndarray:
    m, n = graph.m, graph.n
    A = graph.incidence_matrix()
    Q = np.zeros((m + n, m + n))
    Q[:m, :m] = np.diag(tau_max * graph.R - graph.L)
    Q[:m, m:] = -tau_max * A
    Q[m:, :m] = tau_max * A.T
    Q[m:, m:] = np.diag(tau_max * co_content_hessian_diag(graph, v) + capacitance_vector(graph))
    return Q


def _xdot(graph, deriv):
    dv = np.array(deriv.dv, dtype=float)
    dv[graph.source_idx] = source_voltage_rate(graph, deriv.di, deriv.du)
    return np.concatenate([np.asarray(deriv.di, dtype=float), dv])


def lyapunov_v(graph: NetworkGraph, state: SystemState, deriv: StateDerivative,
               tau_max: float, c_u: float) -> float:
    """ẋᵀ𝒬ẋ + C_u u̇ᵀu̇, through the assembled 𝒬."""
    x = _xdot(graph, deriv)
    du = np.asarray(deriv.du, dtype=float)
    return float(x @ q_matrix(graph, state.v, tau_max) @ x) + c_u * float(du @ du)


def lyapunov_v_symmetric(graph: NetworkGraph, state: SystemState, deriv: StateDerivative,
                         tau_max: float, c_u: float) -> float:
    """Same value through the diagonal symmetric part of 𝒬 (the skew blocks drop out)."""
    di = np.asarray(deriv.di, dtype=float)
    dv = _xdot(graph, deriv)[graph.m:]
    du = np.asarray(deriv.du, dtype=float)
    wi = tau_max * graph.R - graph.L
    wv = tau_max * co_content_hessian_diag(graph, state.v) + capacitance_vector(graph)
    return float(np.sum(wi * di * di) + np.sum(wv * dv * dv) + c_u * np.sum(du * du))
