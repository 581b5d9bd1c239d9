"""Transient simulation of the reduced microgrid model.

Source buses have no capacitor, so their voltage follows algebraically from
the setpoint and the line currents, ``v_k = u_k - r_k (∇ᵀi)_k``.  After that
substitution the model is an explicit ODE in

    line currents i | load voltages v_l | setpoints u (differential control)
                    | integral of (v_ref - v̄) (standard secondary control)

integrated with RKF45 between sample and event times.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controllers as ctl
from . import loadflow
from .network import NetworkGraph, tau_max as graph_tau_max, validate
from .potentials import StateDerivative, SystemState, bm_potential_p, lyapunov_v_symmetric
from .rkf45 import RKF45, StepUnderflow


COLLAPSE_FRACTION = 0.1


class CPLCollapse(ValueError):
    """A load voltage reached zero: constant-power loads collapsed the bus."""


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    bus: int
    power: float


@dataclass(frozen=True)
class SimConfig:
    t_end: float = 0.05
    max_step: float = 1e-6
    rel_tol: float = 1e-8
    abs_tol: float = 1e-9
    sample_interval: float = 1e-5
    initial: str = "loadflow"

    def __post_init__(self):
        for name in ("t_end", "max_step", "rel_tol", "abs_tol", "sample_interval"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_step > self.sample_interval:
            raise ValueError("max_step must not exceed sample_interval")
        if self.initial not in ("loadflow", "cold"):
            raise ValueError("initial must be 'loadflow' or 'cold'")


class ReducedModel:
    """Right-hand side of the reduced ODE for one network and controller."""

    def __init__(self, graph: NetworkGraph, kind, v_ref: float):
        self.graph = graph
        self.kind = kind
        self.v_ref = float(v_ref)
        m, n_l, n_s = graph.m, graph.n_l, graph.n_s
        self.A = graph.incidence_matrix()
        self.AT = np.ascontiguousarray(self.A.T)
        self.loads = graph.load_idx
        self.srcs = graph.source_idx
        self.R, self.L, self.C, self.r = graph.R, graph.L, graph.C, graph.r
        self.differential = isinstance(kind, ctl.DIFFERENTIAL)
        self.has_integral = isinstance(kind, ctl.StandardSecondary)
        self.sl_i = slice(0, m)
        self.sl_v = slice(m, m + n_l)
        end = m + n_l
        if self.differential:
            self.sl_u = slice(end, end + n_s)
            end += n_s
        if self.has_integral:
            self.iz = end
            end += 1
        self.size = end
        if isinstance(kind, ctl.Multipurpose):
            self.lam = kind.lam_vector(n_s)
        self._build_affine()

    def pack(self, i, v_load, u=None, z=0.0) -> np.ndarray:
        y = np.empty(self.size)
        y[self.sl_i] = i
        y[self.sl_v] = v_load
        if self.differential:
            y[self.sl_u] = u
        if self.has_integral:
            y[self.iz] = z
        return y

    def setpoint(self, y, inj_src) -> np.ndarray:
        if self.differential:
            return y[self.sl_u]
        if self.has_integral:
            drop = float(np.mean(self.r * inj_src))
            u = ctl.standard_setpoint_closed_form(self.kind, drop, y[self.iz], self.v_ref)
            return np.full(len(self.srcs), u)
        return np.full(len(self.srcs), self.v_ref)

    def node_voltages(self, y):
        inj = self.AT @ y[self.sl_i]
        inj_src = inj[self.srcs]
        u = self.setpoint(y, inj_src)
        v = np.empty(len(inj))
        v[self.loads] = y[self.sl_v]
        v[self.srcs] = u - self.r * inj_src
        return v, u, inj

    def _build_affine(self):
        """Assemble the node-voltage map ``v = Vmap y + v0`` (source rows carry the droop)."""
        g, size = self.graph, self.size
        n = g.n
        inj = np.zeros((n, size))
        inj[:, self.sl_i] = self.AT
        Vmap = np.zeros((n, size))
        v0 = np.zeros(n)
        Vmap[self.loads, np.arange(self.sl_v.start, self.sl_v.stop)] = 1.0
        drop = self.r[:, None] * inj[self.srcs]
        if self.differential:
            Vmap[self.srcs, np.arange(self.sl_u.start, self.sl_u.stop)] = 1.0
        elif self.has_integral:
            k = self.kind
            u_row = k.k_p * drop.mean(axis=0) / (1.0 + k.k_p)
            u_row[self.iz] += k.k_i / (1.0 + k.k_p)
            Vmap[self.srcs] += u_row
            v0[self.srcs] = self.v_ref
        else:
            v0[self.srcs] = self.v_ref
        Vmap[self.srcs] -= drop
        self._Vmap, self._v0 = Vmap, v0
        self._invL = 1.0 / self.L
        self._invC = 1.0 / self.C
        self._inv_ns = 1.0 / g.n_s
        self._mode = 0
        if isinstance(self.kind, ctl.Uncoordinated):
            self._u_gain = 1.0 / (self.kind.c_u * self.r)
            self._mode = 1
        elif isinstance(self.kind, ctl.Multipurpose):
            self._mode = 2
        elif self.has_integral:
            self._mode = 3

    def rhs(self, y, p) -> np.ndarray:
        vl = y[self.sl_v]
        if vl.size and vl.min() <= 0:
            raise CPLCollapse("CPL collapse: load voltage reached zero")
        i = y[self.sl_i]
        v = self._Vmap @ y + self._v0
        inj = self.AT @ i
        dy = np.empty(self.size)
        dy[self.sl_i] = (self.A @ v - self.R * i) * self._invL
        dy[self.sl_v] = -(inj[self.loads] + p / vl) * self._invC
        vs = v[self.srcs]
        mode = self._mode
        if mode == 1:
            dy[self.sl_u] = (self.v_ref - vs) * self._u_gain
        elif mode == 2:
            k = self.kind
            P = vs * inj[self.srcs]
            dy[self.sl_u] = (k.k_v * (self.v_ref - vs.sum() * self._inv_ns)
                             + k.k_lambda * (self.lam * (P.sum() * self._inv_ns) - P))
        elif mode == 3:
            dy[self.iz] = self.v_ref - vs.sum() * self._inv_ns
        return dy

    def state(self, y) -> SystemState:
        v, u, _ = self.node_voltages(y)
        return SystemState(y[self.sl_i].copy(), v, np.array(u, dtype=float))

    def derivative(self, y, p) -> StateDerivative:
        """Full-state rates; source voltage rates follow the algebraic limit."""
        dy = self.rhs(y, p)
        di = dy[self.sl_i]
        if self.differential:
            du = dy[self.sl_u].copy()
        elif self.has_integral:
            d_drop = float(np.mean(self.r * (self.AT @ di)[self.srcs]))
            k = self.kind
            du = np.full(len(self.srcs), (k.k_p * d_drop + k.k_i * dy[self.iz]) / (1.0 + k.k_p))
        else:
            du = np.zeros(len(self.srcs))
        dv = np.empty(self.graph.n)
        dv[self.loads] = dy[self.sl_v]
        dv[self.srcs] = du - self.r * (self.AT @ di)[self.srcs]
        return StateDerivative(di.copy(), dv, du)


def reduced_rhs(graph: NetworkGraph, kind, i, v_load, u, p_current, v_ref: float):
    """``(di, dv_load, du)`` at the given currents, load voltages and setpoints.

    For algebraic controller kinds ``u`` is taken as given and ``du`` is zero.
    """
    model = ReducedModel(graph, kind, v_ref)
    y = np.concatenate([np.asarray(i, float), np.asarray(v_load, float)])
    if model.differential:
        y = np.concatenate([y, np.asarray(u, float)])
        dy = model.rhs(y, np.asarray(p_current, float))
        return dy[model.sl_i], dy[model.sl_v], dy[model.sl_u]
    # evaluate with the supplied setpoint instead of the controller's own
    fixed = ReducedModel(graph, ctl.DroopOnly(), v_ref)
    fixed.setpoint = lambda y_, inj_src: np.asarray(u, float)
    dy = fixed.rhs(y, np.asarray(p_current, float))
    return dy[fixed.sl_i], dy[fixed.sl_v], np.zeros(graph.n_s)


@dataclass
class Trajectory:
    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    u: np.ndarray
    p_load: np.ndarray
    P: np.ndarray
    v_bar: np.ndarray
    P_bar: np.ndarray
    V: np.ndarray
    P_potential: np.ndarray
    z: np.ndarray | None
    v_ref: float
    kind: object
    source_idx: np.ndarray
    load_idx: np.ndarray
    steps: int = 0
    rejections: int = 0
    status: str = "ok"
    message: str = ""
    y_final: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def __len__(self):
        return len(self.t)


def _initial_state(graph, model, kind, v_ref, config, p0):
    g0 = graph.with_load_powers(p0)
    u0 = np.array([graph.buses[k].u0 if graph.buses[k].u0 is not None else v_ref
                   for k in graph.source_idx], dtype=float)
    if config.initial == "cold":
        return model.pack(np.zeros(graph.m), np.full(graph.n_l, v_ref), u0, 0.0)
    if isinstance(kind, ctl.StandardSecondary) and kind.k_p > 0:
        u_lf = v_ref  # closed-form setpoint differs from v_ref only through the proportional term
    else:
        u_lf = u0 if model.differential else np.full(graph.n_s, v_ref)
    sol = loadflow.solve_droop_equilibrium(g0, u_lf)
    if not sol.converged:
        raise SimulationError(f"initial load flow failed: {sol.message}")
    return model.pack(sol.i_star, sol.v_star[graph.load_idx], u0, 0.0)


def simulate(
    graph: NetworkGraph,
    kind,
    v_ref: float,
    events=(),
    config: SimConfig = SimConfig(),
    initial: np.ndarray | None = None,
    c_u: float = 1.0,
) -> Trajectory:
    """Integrate the network from ``initial`` (packed state) or the configured default.

    Integration stops exactly at every event time; the state is continuous
    across events and only the load power jumps.  Failures (CPL collapse,
    step-size underflow) end the run early with ``status`` set and the last
    valid state appended.
    """
    report = validate(graph)
    if not report.ok:
        raise ValueError("invalid network: " + "; ".join(report.failures))
    model = ReducedModel(graph, kind, v_ref)
    load_pos = {int(k): j for j, k in enumerate(graph.load_idx)}
    events = sorted(events, key=lambda e: e.time)
    for e in events:
        if e.bus not in load_pos:
            raise ValueError(f"event target is not a load: bus {e.bus}")
        if not 0 <= e.time < config.t_end:
            raise ValueError(f"event time {e.time} outside [0, t_end)")
        if e.power < 0:
            raise ValueError("event power must be nonnegative")

    p = graph.p.copy()
    pending = list(events)
    while pending and pending[0].time == 0.0:
        e = pending.pop(0)
        p[load_pos[e.bus]] = e.power

    y = _initial_state(graph, model, kind, v_ref, config, p) if initial is None else np.array(initial, float)
    if y.shape != (model.size,):
        raise ValueError(f"initial state must have length {model.size}")

    dt = config.sample_interval
    n_samples = int(round(config.t_end / dt))
    grid = [j * dt for j in range(n_samples + 1)]
    stops = sorted(set(grid) | {e.time for e in pending})
    sample_set = set(grid)

    ts, ys, ps = [0.0], [y.copy()], [p.copy()]
    stepper = RKF45(lambda yy: model.rhs(yy, p), config.rel_tol, config.abs_tol, config.max_step)
    h = float(np.min(graph.L / graph.R)) / 100.0
    t = 0.0
    status, message = "ok", ""
    for t_stop in stops[1:]:
        try:
            y, h = stepper.advance(t, y, t_stop, h)
        except CPLCollapse as exc:
            status, message = "cpl_collapse", str(exc)
        except StepUnderflow as exc:
            status, message = "step_underflow", str(exc)
            vl = np.asarray(stepper.y)[model.sl_v]
            if vl.size and vl.min() < COLLAPSE_FRACTION * v_ref:
                # the load voltage is racing to zero faster than any step can follow
                status = "cpl_collapse"
                message = f"CPL collapse: load voltage {vl.min():.3g} V at t={stepper.t:.9g} s ({exc})"
        if status != "ok":
            if stepper.t > ts[-1]:
                ts.append(stepper.t)
                ys.append(np.array(stepper.y))
                ps.append(p.copy())
            break
        t = t_stop
        while pending and pending[0].time == t:
            e = pending.pop(0)
            p[load_pos[e.bus]] = e.power
        if t in sample_set:
            ts.append(t)
            ys.append(y.copy())
            ps.append(p.copy())

    return _assemble(graph, model, kind, v_ref, np.array(ts), ys, ps, c_u,
                     stepper.steps, stepper.rejections, status, message)


def _assemble(graph, model, kind, v_ref, t, ys, ps, c_u, steps, rejections, status, message):
    N = len(t)
    tau = graph_tau_max(graph)
    i = np.empty((N, graph.m))
    v = np.empty((N, graph.n))
    u = np.empty((N, graph.n_s))
    P = np.empty((N, graph.n_s))
    V = np.full(N, np.nan)
    Pp = np.full(N, np.nan)
    for j, (y, p) in enumerate(zip(ys, ps)):
        st = model.state(y)
        i[j], v[j], u[j] = st.i, st.v, st.u
        P[j] = ctl.source_power(graph, st)
        if np.all(st.v[graph.load_idx] > 0):
            g = graph.with_load_powers(p)
            d = model.derivative(y, p)
            V[j] = lyapunov_v_symmetric(g, st, d, tau, c_u)
            Pp[j] = bm_potential_p(g, st, d, v_ref, tau)
    z = np.array([y[model.iz] for y in ys]) if model.has_integral else None
    return Trajectory(
        t=t, i=i, v=v, u=u, p_load=np.array(ps), P=P,
        v_bar=v[:, graph.source_idx].mean(axis=1), P_bar=P.mean(axis=1),
        V=V, P_potential=Pp, z=z, v_ref=float(v_ref), kind=kind,
        source_idx=graph.source_idx, load_idx=graph.load_idx,
        steps=steps, rejections=rejections, status=status, message=message,
        y_final=np.array(ys[-1]),
    )


def steady_state_metrics(traj: Trajectory, window: float, lam=None) -> dict:
    """Window-averaged sharing and voltage errors over the trailing ``window`` seconds."""
    duration = traj.t[-1] - traj.t[0]
    if window > duration * (1 + 1e-12):
        raise ValueError("window longer than the trajectory")
    sel = traj.t >= traj.t[-1] - window * (1 + 1e-12)
    n_s = traj.P.shape[1]
    if lam is None:
        lam = traj.kind.lam_vector(n_s) if isinstance(traj.kind, ctl.Multipurpose) else np.ones(n_s)
    lam = np.asarray(lam, dtype=float)
    P, P_bar = traj.P[sel], traj.P_bar[sel]
    if np.any(P_bar <= 0):
        raise ValueError("mean source power is not positive in the window; sharing error undefined")
    sharing = np.max(np.abs(P - lam * P_bar[:, None]), axis=1) / P_bar
    voltage = np.abs(traj.v_bar[sel] - traj.v_ref)
    return {"sharing_error": float(np.mean(sharing)), "voltage_error": float(np.mean(voltage))}


def terminal_derivative(graph: NetworkGraph, traj: Trajectory) -> StateDerivative:
    model = ReducedModel(graph, traj.kind, traj.v_ref)
    return model.derivative(traj.y_final, traj.p_load[-1])


def equilibrium_consistency(graph: NetworkGraph, traj: Trajectory, settle_tol: float = 1e-3) -> dict:
    """Compare the terminal state with the load flow it should have settled to.

    ``settle_tol`` bounds the circuit-scaled terminal rates: ``L di`` in volts,
    ``C dv`` on loads in amperes and ``du`` in V/s.  Raw ``di`` is dominated
    by integration noise divided by the tiny line inductances, so it is not
    used.  A run that has not settled raises ``SimulationError``.
    """
    d = terminal_derivative(graph, traj)
    rate = max(float(np.max(np.abs(graph.L * d.di), initial=0.0)),
               float(np.max(np.abs(graph.C * d.dv[graph.load_idx]), initial=0.0)),
               float(np.max(np.abs(d.du), initial=0.0)))
    if rate > settle_tol:
        raise SimulationError(f"trajectory not settled: scaled terminal rate {rate:.3g} > {settle_tol:g}")
    g = graph.with_load_powers(traj.p_load[-1])
    v_end = traj.v[-1]
    out = {"terminal_rate": rate, "kind": traj.kind.name}
    if isinstance(traj.kind, ctl.StandardSecondary):
        pinned = loadflow.solve_equilibrium(g, traj.v_ref)
        u_star, sol = loadflow.solve_standard_equilibrium(g, traj.v_ref)
        out["source_error_V"] = float(np.max(np.abs(v_end[graph.source_idx] - traj.v_ref)))
        out["setpoint_error_V"] = float(np.max(np.abs(traj.u[-1] - u_star)))
        out["pinned_load_flow_converged"] = bool(pinned.converged)
        vl_pin = pinned.v_star[graph.load_idx]
        out["pinned_load_voltage_rel_error"] = (float(np.max(np.abs(v_end[graph.load_idx] - vl_pin) / vl_pin))
                                                if graph.n_l else 0.0)
    elif isinstance(traj.kind, ctl.Multipurpose):
        sol = loadflow.solve_equilibrium(g, v_end[graph.source_idx])
        out["v_bar_error_V"] = float(abs(traj.v_bar[-1] - traj.v_ref))
        lam = traj.kind.lam_vector(graph.n_s)
        out["sharing_ratio_error"] = float(np.max(np.abs(traj.P[-1] / traj.P_bar[-1] - lam)))
    else:
        sol = loadflow.solve_droop_equilibrium(g, traj.u[-1])
    vl_lf = sol.v_star[graph.load_idx]
    out["load_flow_converged"] = bool(sol.converged)
    out["load_voltage_rel_error"] = (float(np.max(np.abs(v_end[graph.load_idx] - vl_lf) / vl_lf))
                                     if graph.n_l else 0.0)
    out["load_flow_v_star"] = sol.v_star
    return out
