import numpy as np
import pytest

from adhocgrid.network import LineParams, LoadParams, NetworkGraph, SourceParams

V_REF = 48.0
R_LINE = 0.111
TAU = 55.45e-6
P_LOAD = 35.11
C_LOAD = 845.7e-6


def two_bus(p=P_LOAD, R=R_LINE, C=C_LOAD, r=0.5):
    return NetworkGraph(
        (SourceParams(r=r), LoadParams(p=p, C=C)),
        (LineParams(R=R, L=R * TAU, source=0, target=1),),
    )


def two_bus_root(p=P_LOAD, R=R_LINE, v_ref=V_REF):
    """Larger root of v^2 - v_ref v + p R = 0."""
    return 0.5 * (v_ref + np.sqrt(v_ref**2 - 4 * p * R))


def triangle():
    lines = tuple(LineParams(R=1.0, L=1e-5, source=a, target=b) for a, b in ((0, 1), (1, 2), (0, 2)))
    return NetworkGraph((SourceParams(r=0.5), LoadParams(p=0.0, C=1e-3), LoadParams(p=0.0, C=1e-3)), lines)


def four_bus(p=(100.0, 60.0)):
    buses = (SourceParams(r=0.5), LoadParams(p=p[0], C=C_LOAD), SourceParams(r=0.4), LoadParams(p=p[1], C=C_LOAD))
    edges = [(0, 1, 0.111, 55.45e-6), (1, 2, 0.09, 30e-6), (2, 3, 0.111, 55.45e-6), (3, 0, 0.15, 40e-6)]
    return NetworkGraph(buses, tuple(LineParams(R=R, L=R * tau, source=a, target=b) for a, b, R, tau in edges))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "GATE_LINES", None)
    if lines:
        terminalreporter.section("acceptance gate")
        for line in lines:
            terminalreporter.write_line(line)
