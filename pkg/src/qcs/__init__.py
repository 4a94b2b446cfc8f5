"""Queueing model of quantum circuit switching in star networks."""
from .errors import (
    InfeasibleWindow,
    InvalidConfig,
    InvalidParameter,
    NonConvergence,
    Overloaded,
    QCSError,
    SamplerOverrun,
    StateSpaceTooLarge,
    Unsupported,
)
from .model import (
    INF,
    AllPhotonic,
    FixedP,
    MomentPair,
    NetworkConfig,
    RequestModel,
    Scenario,
    Strategy,
    large_budget,
    small_budget,
    validate,
)

__version__ = "0.1.0"
