import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adhocgrid import controllers as ctl
from adhocgrid.dynamics import (
    Event, SimConfig, Trajectory, equilibrium_consistency, reduced_rhs, simulate, steady_state_metrics,
)
from adhocgrid.loadflow import solve_droop_equilibrium, solve_equilibrium
from adhocgrid.network import incidence_apply, incidence_transpose_apply
from adhocgrid.rkf45 import RKF45
from adhocgrid.scenario import parse_scenario

from conftest import V_REF, four_bus, triangle, two_bus, two_bus_root


def test_rhs_zero_at_droop_equilibrium():
    g = four_bus()
    sol = solve_droop_equilibrium(g, V_REF)
    di, dv, du = reduced_rhs(g, ctl.DroopOnly(), sol.i_star, sol.v_star[g.load_idx], np.full(2, V_REF), g.p, V_REF)
    assert np.max(np.abs(g.L * di)) <= 1e-9
    assert np.max(np.abs(g.C * dv)) <= 1e-9
    assert np.all(du == 0)


def test_rhs_zero_at_uncoordinated_fixed_point():
    g = four_bus()
    sol = solve_equilibrium(g, V_REF)
    inj = incidence_transpose_apply(g, sol.i_star)[g.source_idx]
    u = V_REF + g.r * inj
    di, dv, du = reduced_rhs(g, ctl.Uncoordinated(), sol.i_star, sol.v_star[g.load_idx], u, g.p, V_REF)
    assert np.max(np.abs(g.L * di)) <= 1e-9
    assert np.max(np.abs(g.C * dv)) <= 1e-9
    assert np.max(np.abs(du)) <= 1e-9


def test_rhs_zero_load_trivial():
    g = triangle()
    di, dv, du = reduced_rhs(g, ctl.Multipurpose(lam=(1.0,)), np.zeros(3), np.full(2, V_REF), [V_REF], g.p, V_REF)
    assert not np.any(di) and not np.any(dv) and not np.any(du)


def test_current_perturbation_oracle():
    # the source node sags by r δ, so the line sees R + r
    g = two_bus()
    sol = solve_droop_equilibrium(g, V_REF)
    delta = 1e-3
    di, _, _ = reduced_rhs(g, ctl.DroopOnly(), sol.i_star + delta, sol.v_star[1:], [V_REF], g.p, V_REF)
    assert di[0] == pytest.approx(-(g.R[0] + g.r[0]) / g.L[0] * delta, rel=1e-6)


def test_collapse_is_reported():
    g = two_bus()
    with pytest.raises(ValueError, match="CPL collapse"):
        reduced_rhs(g, ctl.DroopOnly(), [0.0], [0.0], [V_REF], g.p, V_REF)
    cfg = SimConfig(t_end=0.01, max_step=1e-5, sample_interval=1e-4)
    traj = simulate(g, ctl.DroopOnly(), V_REF, [Event(0.001, 1, 8000.0)], cfg)
    assert traj.status == "cpl_collapse" and not traj.ok
    assert traj.t[-1] < 0.01 and np.all(np.isfinite(traj.v))


def test_zero_load_stays_flat():
    cfg = SimConfig(t_end=0.05, max_step=1e-4, sample_interval=1e-3)
    traj = simulate(triangle(), ctl.Multipurpose(), V_REF, config=cfg)
    assert traj.ok
    assert np.max(np.abs(traj.v - V_REF)) <= 1e-8
    assert np.all(traj.P == 0.0)


def test_two_bus_standard_reaches_quadratic_root():
    cfg = SimConfig(t_end=0.6, max_step=1e-4, sample_interval=1e-3)
    traj = simulate(two_bus(), ctl.StandardSecondary(), V_REF, [Event(0.005, 1, 60.0)], cfg)
    assert traj.ok
    assert traj.v[-1, 1] == pytest.approx(two_bus_root(p=60.0), rel=1e-6)
    rep = equilibrium_consistency(two_bus(), traj)
    assert rep["load_voltage_rel_error"] < 1e-6 and rep["pinned_load_voltage_rel_error"] < 1e-6


def test_events_are_validated():
    cfg = SimConfig(t_end=0.01)
    with pytest.raises(ValueError, match="not a load"):
        simulate(two_bus(), ctl.DroopOnly(), V_REF, [Event(0.001, 0, 10.0)], cfg)
    with pytest.raises(ValueError):
        simulate(two_bus(), ctl.DroopOnly(), V_REF, [Event(0.02, 1, 10.0)], cfg)


def test_event_sample_records_new_power():
    cfg = SimConfig(t_end=0.002, max_step=1e-5, sample_interval=5e-4)
    traj = simulate(two_bus(), ctl.DroopOnly(), V_REF, [Event(0.001, 1, 50.0)], cfg)
    j = int(np.argmin(np.abs(traj.t - 0.001)))
    assert traj.t[j] == 0.001 and traj.p_load[j, 0] == 50.0 and traj.p_load[j - 1, 0] == 35.11


def _synthetic(P, v):
    P = np.asarray(P, float)
    n = len(P)
    t = np.linspace(0, 1, n)
    return Trajectory(t=t, i=np.zeros((n, 1)), v=np.zeros((n, 1)), u=np.zeros((n, P.shape[1])),
                      p_load=np.zeros((n, 1)), P=P, v_bar=np.asarray(v, float), P_bar=P.mean(axis=1),
                      V=np.zeros(n), P_potential=np.zeros(n), z=None, v_ref=V_REF, kind=ctl.DroopOnly(),
                      source_idx=np.arange(P.shape[1]), load_idx=np.array([0]))


def test_metrics_examples():
    flat = _synthetic([[5, 5, 5]] * 4, [V_REF] * 4)
    assert steady_state_metrics(flat, 0.5) == {"sharing_error": 0.0, "voltage_error": 0.0}
    uneven = _synthetic([[10, 20, 30]] * 4, [V_REF + 0.1] * 4)
    m = steady_state_metrics(uneven, 0.5)
    assert m["sharing_error"] == pytest.approx(0.5) and m["voltage_error"] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        steady_state_metrics(uneven, 2.0)
    with pytest.raises(ValueError):
        steady_state_metrics(_synthetic([[0, 0]] * 3, [V_REF] * 3), 0.5)


def test_rkf45_exponential():
    solver = RKF45(lambda y: -y, 1e-10, 1e-12, 0.1)
    y, _ = solver.advance(0.0, np.array([1.0]), 2.0, 1e-3)
    assert y[0] == pytest.approx(np.exp(-2.0), rel=1e-8)
    assert solver.t == 2.0


def test_rkf45_fourth_order():
    # global error of the propagated 4th-order solution scales like h^4
    def err(h):
        s = RKF45(lambda y: np.array([y[1], -y[0]]), 1.0, 1.0, h)
        y, _ = s.advance(0.0, np.array([0.0, 1.0]), 1.0, h)
        return abs(y[0] - np.sin(1.0))
    assert 12 < err(0.1) / err(0.05) < 20


def test_power_identity_any_state():
    # Σ P_sources = Σ v_load (-inj_load) + Σ (∇v)_α i_α holds at every state
    rng = np.random.default_rng(5)
    g = four_bus()
    for _ in range(20):
        i, v = rng.normal(size=g.m), rng.uniform(40, 50, g.n)
        inj = incidence_transpose_apply(g, i)
        P_src = np.sum(v[g.source_idx] * inj[g.source_idx])
        rhs = np.sum(v[g.load_idx] * -inj[g.load_idx]) + incidence_apply(g, v) @ i
        assert P_src == pytest.approx(rhs, rel=1e-12)


@pytest.mark.slow
def test_lambda_ratio_on_bundled_network():
    sc = parse_scenario("paper_fig3")
    k = ctl.Multipurpose(lam=(1.5, 0.75, 0.75))
    cfg = SimConfig(t_end=0.3, max_step=1e-4, sample_interval=1e-3)
    traj = simulate(sc.graph, k, sc.v_ref, sc.events, cfg)
    ratios = traj.P[-1] / traj.P[-1, 1:].mean()
    assert np.allclose(ratios, [2.0, 1.0, 1.0], atol=1e-3)
    std = simulate(sc.graph, ctl.StandardSecondary(), sc.v_ref, sc.events, cfg)
    assert not np.allclose(std.P[-1] / std.P[-1, 1:].mean(), [2.0, 1.0, 1.0], atol=0.1)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 200.0), st.floats(0.0, 200.0))
def test_droop_runs_settle_to_droop_load_flow(p1, p2):
    g = four_bus(p=(p1, p2))
    cfg = SimConfig(t_end=0.01, max_step=1e-5, sample_interval=1e-3)
    traj = simulate(g, ctl.DroopOnly(), V_REF, [Event(0.0005, 1, 120.0)], cfg)
    assert traj.ok
    sol = solve_droop_equilibrium(g.with_load_powers([120.0, p2]), V_REF)
    assert np.allclose(traj.v[-1], sol.v_star, rtol=1e-6)
