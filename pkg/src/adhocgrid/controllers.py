"""Source control laws.

Four strategies are modelled:

``DroopOnly``           fixed setpoint ``u = v_ref`` behind the droop resistance
``Uncoordinated``       ``C_u du_k = (v_ref - v_k) / r_k``
``StandardSecondary``   common PI setpoint driven by the mean source voltage
``Multipurpose``        per-source integral law on voltage and power-sharing errors

Measurement sharing is ideal: every evaluation sees the exact, current
voltage and power of every source.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkGraph, incidence_transpose_apply
from .potentials import SystemState


@dataclass(frozen=True)
class DroopOnly:
    name = "droop"


@dataclass(frozen=True)
class Uncoordinated:
    c_u: float = 1.0
    name = "uncoordinated"

    def __post_init__(self):
        if not self.c_u > 0:
            raise ValueError("c_u must be positive")


@dataclass(frozen=True)
class StandardSecondary:
    k_p: float = 0.0
    k_i: float = 18.02
    name = "standard"

    def __post_init__(self):
        if self.k_p < 0 or not self.k_i > 0:
            raise ValueError("need k_p >= 0 and k_i > 0")


@dataclass(frozen=True)
class Multipurpose:
    k_v: float = 36.04
    k_lambda: float = 0.7508
    lam: tuple[float, ...] = field(default=())
    name = "multipurpose"

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        if not (self.k_v > 0 and self.k_lambda > 0):
            raise ValueError("need k_v > 0 and k_lambda > 0")
        if any(not x > 0 for x in self.lam):
            raise ValueError("participation factors must be positive")

    def lam_vector(self, n_s: int) -> np.ndarray:
        if not self.lam:
            return np.ones(n_s)
        if len(self.lam) != n_s:
            raise ValueError(f"expected {n_s} participation factors, got {len(self.lam)}")
        return np.array(self.lam)


ControllerKind = DroopOnly | Uncoordinated | StandardSecondary | Multipurpose
DIFFERENTIAL = (Uncoordinated, Multipurpose)
ALGEBRAIC = (DroopOnly, StandardSecondary)


@dataclass
class SourceMeasurements:
    v: np.ndarray
    P: np.ndarray

    @property
    def v_bar(self) -> float:
        return float(np.mean(self.v))

    @property
    def P_bar(self) -> float:
        return float(np.mean(self.P))


def source_power(graph: NetworkGraph, state: SystemState) -> np.ndarray:
    """Power each source injects at its node, ``v_k (∇ᵀi)_k``."""
    inj = incidence_transpose_apply(graph, state.i)[graph.source_idx]
    return np.asarray(state.v, dtype=float)[graph.source_idx] * inj


def measure(graph: NetworkGraph, state: SystemState) -> SourceMeasurements:
    return SourceMeasurements(np.asarray(state.v, dtype=float)[graph.source_idx], source_power(graph, state))


def control_derivative(kind, meas: SourceMeasurements, v_ref: float, droop=None) -> np.ndarray:
    """Setpoint rate ``du`` of a differential controller.

    ``droop`` (the source r vector) is needed by ``Uncoordinated`` only.
    """
    if isinstance(kind, Uncoordinated):
        if droop is None:
            raise ValueError("Uncoordinated control needs the droop resistances")
        return (v_ref - meas.v) / (kind.c_u * np.asarray(droop, dtype=float))
    if isinstance(kind, Multipurpose):
        lam = kind.lam_vector(len(meas.v))
        return kind.k_v * (v_ref - meas.v_bar) + kind.k_lambda * (lam * meas.P_bar - meas.P)
    raise TypeError(f"{type(kind).__name__} is not a differential controller")


def control_setpoint(kind, meas: SourceMeasurements, integral: float, v_ref: float) -> np.ndarray:
    """Setpoint ``u`` of an algebraic controller; identical on every source."""
    n_s = len(meas.v)
    if isinstance(kind, DroopOnly):
        return np.full(n_s, float(v_ref))
    if isinstance(kind, StandardSecondary):
        err = v_ref - meas.v_bar
        return np.full(n_s, v_ref + kind.k_p * err + kind.k_i * integral)
    raise TypeError(f"{type(kind).__name__} is not an algebraic controller")


def standard_setpoint_closed_form(kind: StandardSecondary, droop_drop_mean: float,
                                  integral: float, v_ref: float) -> float:
    """Common setpoint with the proportional loop solved.

    With ``v̄ = u - mean(r_k (∇ᵀi)_k)`` the PI law is linear in ``u``:
    ``u = v_ref + (k_p * mean_drop + k_i * integral) / (1 + k_p)``.
    """
    return v_ref + (kind.k_p * droop_drop_mean + kind.k_i * integral) / (1.0 + kind.k_p)


def steady_state_targets(kind) -> dict:
    if isinstance(kind, Multipurpose):
        return {"sharing": "exact", "voltage": "exact"}
    if isinstance(kind, StandardSecondary):
        return {"sharing": "approximate", "voltage": "exact"}
    if isinstance(kind, DroopOnly):
        return {"sharing": "approximate", "voltage": "approximate"}
    # the uncoordinated law drives every source node to v_ref individually; sharing is set by the network
    return {"sharing": "approximate", "voltage": "exact"}


def lambda_warning(kind, n_s: int) -> str | None:
    if isinstance(kind, Multipurpose):
        total = float(np.sum(kind.lam_vector(n_s)))
        if not np.isclose(total, n_s):
            return (f"participation factors sum to {total:g}, not n_s = {n_s}; "
                    "voltage and sharing objectives may be jointly unsatisfiable")
    return None


def from_name(name: str, gains: dict):
    name = name.lower()
    if name in ("droop", "droop_only", "drooponly"):
        return DroopOnly()
    if name == "uncoordinated":
        return Uncoordinated(c_u=gains.get("c_u", 1.0))
    if name in ("standard", "standard_secondary", "standardsecondary"):
        return StandardSecondary(k_p=gains.get("k_p", 0.0), k_i=gains.get("k_i", 18.02))
    if name == "multipurpose":
        return Multipurpose(k_v=gains.get("k_v", 36.04), k_lambda=gains.get("k_lambda", 0.7508),
                            lam=tuple(gains.get("lambda", ())))
    raise ValueError(f"unknown controller kind {name!r}")
