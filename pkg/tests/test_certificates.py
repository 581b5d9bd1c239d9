import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adhocgrid import certificates as cert
from adhocgrid.generate import check_implication, random_certified_network
from adhocgrid.loadflow import solve_equilibrium

from conftest import C_LOAD, P_LOAD, TAU, V_REF, triangle, two_bus


def env(p_sigma=7 * P_LOAD, R_sigma=0.111, v_min=45.6, r_max=0.5, loads=()):
    return cert.DesignEnvelope(p_sigma, R_sigma, V_REF, v_min, r_max, TAU, loads)


def test_existence_examples():
    r = cert.check_existence(env())
    assert r.passed and r.rhs == pytest.approx(5189.19, abs=0.01)
    assert cert.check_existence(env(p_sigma=r.rhs)).passed
    assert not cert.check_existence(env(p_sigma=r.rhs + 1.0)).passed


def test_feasibility_examples():
    r = cert.check_feasibility(env())
    assert r.passed and r.rhs == pytest.approx(45.6 * 2.4 / 0.111)
    assert r.rhs == pytest.approx(985.95, abs=0.01)
    half = cert.check_feasibility(env(v_min=V_REF / 2)).rhs
    assert half == pytest.approx(cert.check_existence(env()).rhs)
    assert not cert.check_feasibility(env(v_min=V_REF * (1 - 1e-12), p_sigma=1.0)).passed


def test_convexity_examples():
    r = cert.check_bm_convexity(env())
    assert r.passed and r.rhs == pytest.approx(45.6**2 / 0.611)
    assert cert.check_bm_convexity(env(r_max=1e12)).rhs < 1e-8
    p = 100.0
    assert cert.check_bm_convexity(env(p_sigma=p, R_sigma=0.0, r_max=45.6**2 / p)).passed


def test_convexity_reference_value():
    # 45.6^2 / (0.111 + 0.5)
    assert cert.check_bm_convexity(env()).rhs == pytest.approx(3403.2, abs=0.1)


def test_capacitance_threshold():
    c_min = P_LOAD * TAU / 45.6**2
    assert c_min == pytest.approx(0.936e-6, rel=1e-3)
    ok = cert.check_load_capacitances(env(loads=((P_LOAD, 1.01 * c_min), (0.0, 1e-12))))
    assert all(r.passed for r in ok)
    edge = cert.check_load_capacitances(env(loads=((P_LOAD, c_min),)))
    # boundary value computed the same way as the rule; strict inequality excludes it
    assert not edge[0].passed


def test_envelope_rejects_bad_voltages():
    with pytest.raises(ValueError):
        env(v_min=50.0)


def test_zero_load_hessian_is_pd():
    g = triangle()
    H = cert.hessian_co_content(g, np.full(3, V_REF))
    expect = g.laplacian() + np.diag([2.0, 0.0, 0.0])
    assert np.allclose(H, expect)
    assert np.linalg.eigvalsh(H).min() > 0
    assert all(r.passed for r in cert.check_topology_aware(g, np.full(3, V_REF)))


def test_undersized_capacitor_fails_load_check():
    v_min = 45.6
    c_small = 0.5 * P_LOAD * TAU / v_min**2
    g = two_bus(C=c_small)
    rules = cert.check_topology_aware(g, np.array([V_REF, v_min]))
    by_name = {r.rule: r for r in rules}
    assert by_name["hessian_pd"].passed
    assert not by_name["q_load[1]"].passed


def test_hessian_needs_positive_voltage():
    with pytest.raises(ZeroDivisionError):
        cert.hessian_co_content(two_bus(), np.array([V_REF, 0.0]))


def test_certify_two_bus_passes():
    report, sol = cert.certify(two_bus(), V_REF, 45.6)
    assert report.passed and sol.converged
    names = [r.rule for r in report.rules]
    assert names[:3] == ["existence", "feasibility", "bm_convexity"]
    assert "hessian_pd" in names and "min_voltage" in names


def test_certify_over_bound_marks_load_flow():
    report, sol = cert.certify(two_bus(p=6000.0), V_REF, 20.0)
    assert not report.passed
    assert report.failed()[0].rule == "existence"
    assert any(r.rule == "load_flow" for r in report.failed())


def test_two_bus_rules_are_tight():
    # single source and load: the existence rule is exactly the solvability limit
    R = 0.111
    bound = cert.check_existence(cert.DesignEnvelope.from_graph(two_bus(), V_REF, 24.0)).rhs
    assert solve_equilibrium(two_bus(p=0.999 * bound, R=R), V_REF).converged
    assert not solve_equilibrium(two_bus(p=1.001 * bound, R=R), V_REF).converged


def test_reference_two_bus_q_matrix_definiteness():
    from adhocgrid.potentials import q_matrix
    v_star = solve_equilibrium(two_bus(), V_REF).v_star
    c_thr = P_LOAD * TAU / v_star[1] ** 2
    for C, psd in ((2 * c_thr, True), (0.5 * c_thr, False)):
        Q = q_matrix(two_bus(C=C), v_star, TAU)
        eig = np.linalg.eigvalsh(0.5 * (Q + Q.T))
        assert (eig.min() >= -1e-12) == psd


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_design_rules_imply_topology_conditions(seed):
    case = random_certified_network(np.random.default_rng(seed))
    ok, msg = check_implication(case)
    assert ok, msg


def test_report_serializes():
    report, _ = cert.certify(two_bus(C=C_LOAD), V_REF, 45.6)
    d = report.to_dict()
    assert d["passed"] is True and all(isinstance(r["lhs"], float) for r in d["rules"])
