"""Stability certificates and transient simulation for ad hoc DC microgrids."""
from .network import (
    BusKind,
    LineParams,
    LoadParams,
    NetworkGraph,
    SourceParams,
    incidence_apply,
    incidence_transpose_apply,
    tau_max,
    validate,
)

__version__ = "0.1.0"
