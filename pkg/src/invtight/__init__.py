"""Workbench for a cyclic impulse-ordering inventory policy whose long-run
average cost stays finite while its ordering measures send mass to infinity.

Two engines share one set of domain types: an exact closed-form engine for
the constant-demand model and a Monte Carlo engine for the drifted noise
model, both checked against the closed-form oracle.
"""

__version__ = "0.1.0"

from .model import (
    CostModel,
    CycleAddress,
    CycleRecord,
    OrderEvent,
    Trace,
    address_from_index,
    holding_rate,
    linear_index,
    order_cost,
)
from .sde import RngStream, SimConfig

__all__ = [
    "CostModel",
    "CycleAddress",
    "CycleRecord",
    "OrderEvent",
    "RngStream",
    "SimConfig",
    "Trace",
    "address_from_index",
    "holding_rate",
    "linear_index",
    "order_cost",
    "__version__",
]
