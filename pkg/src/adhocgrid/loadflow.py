"""Equilibrium (load-flow) solver and effective-impedance quantities.

Two variants share one damped Newton iteration:

* ``solve_equilibrium`` pins every source bus to a reference voltage (the
  state reached once secondary control has settled);
* ``solve_droop_equilibrium`` keeps the source setpoints ``u`` fixed and lets
  source voltages sag through the droop resistance, ``v = u - r * (∇ᵀi)``.

Newton starts from the flat profile, which lands on the high-voltage branch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .network import NetworkGraph, incidence_apply

DEFAULT_MAX_ITER = 50
_MIN_VOLTAGE_FRACTION = 0.01
_MAX_HALVINGS = 60


@dataclass
class EquilibriumSolution:
    v_star: np.ndarray
    i_star: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    tolerance: float
    message: str = ""
    injected_power: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "residual_norm_W": float(self.residual_norm),
            "tolerance_W": float(self.tolerance),
            "message": self.message,
            "v_star_V": [float(x) for x in self.v_star],
            "i_star_A": [float(x) for x in self.i_star],
            "injected_power_W": [float(x) for x in self.injected_power],
        }


@dataclass
class EffectiveImpedance:
    Z: np.ndarray
    z_inf_star: float
    z_row_sum: float
    load_idx: np.ndarray


def default_tolerance(graph: NetworkGraph) -> float:
    return max(1e-10 * graph.p_sigma, 1e-9)


def _newton(graph, free, v0, residual, jacobian, v_floor, tolerance, max_iter):
    v = v0.copy()
    f = residual(v)
    res = float(np.max(np.abs(f))) if f.size else 0.0
    it = 0
    load_mask = np.isin(free, graph.load_idx)
    while res > tolerance and it < max_iter:
        it += 1
        try:
            dx = np.linalg.solve(jacobian(v), -f)
        except np.linalg.LinAlgError:
            return v, False, it, res, "singular Jacobian"
        step = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = v[free] + step * dx
            if np.all(trial[load_mask] >= v_floor):
                break
            step *= 0.5
        v = v.copy()
        v[free] = trial
        f = residual(v)
        if not np.all(np.isfinite(f)):
            return v, False, it, float("inf"), "non-finite residual"
        res = float(np.max(np.abs(f))) if f.size else 0.0
    if res <= tolerance:
        return v, True, it, res, "converged"
    return v, False, it, res, f"no convergence after {it} iterations"


def _finish(graph, v, ok, it, res, tol, msg, v_source):
    drop = incidence_apply(graph, v)
    i = drop / graph.R
    inj = v * (graph.laplacian() @ v)
    if not ok:
        bound = existence_bound(graph, v_source)
        if graph.p_sigma > bound:
            msg = f"no equilibrium: existence bound exceeded ({graph.p_sigma:.6g} W > {bound:.6g} W); {msg}"
    return EquilibriumSolution(v, i, ok, it, res, tol, msg, injected_power=inj)


def existence_bound(graph: NetworkGraph, v_source) -> float:
    """Network-specific sufficient load bound ``v_ref² / (4 max_k Z_kk)``."""
    if graph.n_l == 0:
        return float("inf")
    v_low = float(np.min(np.broadcast_to(np.asarray(v_source, dtype=float), (graph.n_s,))))
    return v_low**2 / (4.0 * effective_impedance(graph).z_inf_star)


def solve_equilibrium(
    graph: NetworkGraph,
    v_ref,
    tolerance: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EquilibriumSolution:
    """High-voltage load flow with source buses pinned to ``v_ref``.

    ``v_ref`` may be a scalar or one voltage per source (ordered as
    ``graph.source_idx``).  Non-convergence is reported, never raised.
    """
    tol = default_tolerance(graph) if tolerance is None else tolerance
    v_src = np.broadcast_to(np.asarray(v_ref, dtype=float), (graph.n_s,))
    G = graph.laplacian()
    loads = graph.load_idx
    p = graph.p

    v0 = np.empty(graph.n)
    v0[graph.source_idx] = v_src
    v0[loads] = float(np.max(v_src))

    def residual(v):
        return v[loads] * (G[loads] @ v) + p

    def jacobian(v):
        J = v[loads, None] * G[np.ix_(loads, loads)]
        J[np.diag_indices_from(J)] += G[loads] @ v
        return J

    floor = _MIN_VOLTAGE_FRACTION * float(np.max(v_src))
    v, ok, it, res, msg = _newton(graph, loads, v0, residual, jacobian, floor, tol, max_iter)
    return _finish(graph, v, ok, it, res, tol, msg, v_src)


def solve_droop_equilibrium(
    graph: NetworkGraph,
    u,
    tolerance: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EquilibriumSolution:
    """Load flow with fixed source setpoints ``u`` behind droop resistances."""
    tol = default_tolerance(graph) if tolerance is None else tolerance
    u = np.broadcast_to(np.asarray(u, dtype=float), (graph.n_s,)).copy()
    G = graph.laplacian()
    loads, srcs = graph.load_idx, graph.source_idx
    p, r = graph.p, graph.r
    free = np.arange(graph.n)
    is_load = np.zeros(graph.n, dtype=bool)
    is_load[loads] = True

    def residual(v):
        Gv = G @ v
        f = np.empty(graph.n)
        f[loads] = v[loads] * Gv[loads] + p
        # source rows scaled by u so every entry is in watts
        f[srcs] = u * (Gv[srcs] - (u - v[srcs]) / r)
        return f

    def jacobian(v):
        Gv = G @ v
        J = np.empty((graph.n, graph.n))
        J[loads] = v[loads, None] * G[loads]
        J[loads, loads] += Gv[loads]
        J[srcs] = u[:, None] * G[srcs]
        J[srcs, srcs] += u / r
        return J

    v0 = np.full(graph.n, float(np.max(u)))
    v0[srcs] = u
    floor = _MIN_VOLTAGE_FRACTION * float(np.max(u))
    v, ok, it, res, msg = _newton(graph, free, v0, residual, jacobian, floor, tol, max_iter)
    return _finish(graph, v, ok, it, res, tol, msg, u)


def solve_standard_equilibrium(
    graph: NetworkGraph,
    v_ref: float,
    tolerance: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[float, EquilibriumSolution]:
    """Fixed point of standard secondary control: one common setpoint, mean source voltage at ``v_ref``.

    Returns ``(u, solution)``.  Individual source voltages still differ by
    their droop drops, so this coincides with ``solve_equilibrium`` only when
    those drops are equal (one source, or a symmetric network).
    """
    def mean_gap(u):
        sol = solve_droop_equilibrium(graph, u, tolerance, max_iter)
        if not sol.converged:
            raise ValueError(f"droop load flow failed at u={u:.9g}: {sol.message}")
        return float(np.mean(sol.v_star[graph.source_idx])) - v_ref

    lo, width = float(v_ref), 0.01 * float(v_ref)
    if mean_gap(lo) >= 0:
        return lo, solve_droop_equilibrium(graph, lo, tolerance, max_iter)
    hi = lo + width
    while mean_gap(hi) < 0:
        width *= 2.0
        hi = lo + width
        if width > 10 * v_ref:
            raise ValueError("no setpoint restores the mean source voltage")
    u = brentq(mean_gap, lo, hi, xtol=1e-14 * v_ref, rtol=4 * np.finfo(float).eps)
    return u, solve_droop_equilibrium(graph, u, tolerance, max_iter)


def effective_impedance(graph: NetworkGraph) -> EffectiveImpedance:
    loads = graph.load_idx
    if len(loads) == 0:
        raise ValueError("effective impedance needs at least one load bus")
    G = graph.laplacian()
    Z = np.linalg.inv(G[np.ix_(loads, loads)])
    Z = 0.5 * (Z + Z.T)
    return EffectiveImpedance(
        Z=Z,
        z_inf_star=float(np.max(np.diag(Z))),
        z_row_sum=float(np.max(np.sum(np.abs(Z), axis=1))),
        load_idx=loads,
    )


def check_min_voltage(graph: NetworkGraph, sol: EquilibriumSolution, v_min: float):
    """Return ``(passed, worst_bus, worst_voltage)`` over the load buses."""
    if graph.n_l == 0:
        return True, None, None
    vl = sol.v_star[graph.load_idx]
    j = int(np.argmin(vl))
    return bool(np.all(vl > v_min)), int(graph.load_idx[j]), float(vl[j])
