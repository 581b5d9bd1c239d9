import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adhocgrid import controllers as ctl
from adhocgrid.potentials import SystemState

from conftest import V_REF, two_bus


def meas(P, v=(V_REF, V_REF, V_REF)):
    return ctl.SourceMeasurements(np.array(v, float), np.array(P, float))


def test_source_power_zero_current():
    s = SystemState(np.zeros(1), np.array([48.0, 47.9]), np.array([48.0]))
    assert np.all(ctl.source_power(two_bus(), s) == 0.0)


def test_source_power_single_line():
    s = SystemState(np.array([0.75]), np.array([48.0, 47.9]), np.array([48.0]))
    assert ctl.source_power(two_bus(), s)[0] == pytest.approx(48.0 * 0.75)


def test_multipurpose_reference_rates():
    du = ctl.control_derivative(ctl.Multipurpose(), meas([10, 20, 30]), V_REF)
    assert np.allclose(du, [7.508, 0.0, -7.508])


def test_multipurpose_objective_point_is_fixed():
    k = ctl.Multipurpose(lam=(1.5, 0.75, 0.75))
    assert np.allclose(ctl.control_derivative(k, meas([30, 15, 15]), V_REF), 0.0)


def test_uncoordinated_fixed_point():
    du = ctl.control_derivative(ctl.Uncoordinated(), meas([1, 2, 3]), V_REF, droop=[0.5, 0.5, 0.5])
    assert np.all(du == 0.0)
    with pytest.raises(ValueError):
        ctl.control_derivative(ctl.Uncoordinated(), meas([1, 2, 3]), V_REF)


def test_setpoints():
    m = meas([1, 2, 3])
    assert np.all(ctl.control_setpoint(ctl.StandardSecondary(), m, 0.0, V_REF) == V_REF)
    assert np.all(ctl.control_setpoint(ctl.DroopOnly(), meas([1, 2, 3], v=(40, 41, 42)), 5.0, V_REF) == V_REF)
    u = ctl.control_setpoint(ctl.StandardSecondary(k_p=0.0, k_i=18.02), m, 0.1, V_REF)
    assert np.allclose(u, 49.802)


def test_kind_mismatch_raises():
    with pytest.raises(TypeError):
        ctl.control_derivative(ctl.DroopOnly(), meas([1, 2, 3]), V_REF)
    with pytest.raises(TypeError):
        ctl.control_setpoint(ctl.Multipurpose(), meas([1, 2, 3]), 0.0, V_REF)


@pytest.mark.parametrize("kind, expected", [
    (ctl.Multipurpose(), {"sharing": "exact", "voltage": "exact"}),
    (ctl.StandardSecondary(), {"sharing": "approximate", "voltage": "exact"}),
    (ctl.DroopOnly(), {"sharing": "approximate", "voltage": "approximate"}),
])
def test_steady_state_targets(kind, expected):
    assert ctl.steady_state_targets(kind) == expected


def test_lambda_warning():
    assert ctl.lambda_warning(ctl.Multipurpose(lam=(1.5, 0.75, 0.75)), 3) is None
    assert "sum" in ctl.lambda_warning(ctl.Multipurpose(lam=(2.0, 1.0, 1.0)), 3)


def test_from_name_and_gain_validation():
    k = ctl.from_name("standard", {"k_i": 5.0})
    assert isinstance(k, ctl.StandardSecondary) and k.k_i == 5.0
    with pytest.raises(ValueError):
        ctl.from_name("pid", {})
    with pytest.raises(ValueError):
        ctl.Multipurpose(lam=(1.0, -1.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 500), min_size=2, max_size=6), st.floats(-0.5, 0.5))
def test_sharing_term_sums_to_zero(P, dv):
    # with λ = 1 the sharing correction redistributes without moving the mean setpoint
    v = np.full(len(P), V_REF + dv)
    k = ctl.Multipurpose()
    du = ctl.control_derivative(k, ctl.SourceMeasurements(v, np.array(P)), V_REF)
    assert np.mean(du) == pytest.approx(k.k_v * (-dv), abs=1e-9 * (1 + max(P)))


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(-1, 1), st.floats(-2, 2))
def test_standard_closed_form_solves_pi_loop(k_p, integral, drop):
    k = ctl.StandardSecondary(k_p=k_p, k_i=18.02)
    u = ctl.standard_setpoint_closed_form(k, drop, integral, V_REF)
    v_bar = u - drop
    assert u == pytest.approx(V_REF + k_p * (V_REF - v_bar) + k.k_i * integral, abs=1e-9)
