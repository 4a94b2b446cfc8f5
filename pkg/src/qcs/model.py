"""Parameter types for a quantum circuit switching star network.

Units: distances in km, times in microseconds, rates in 1/us. The request
window ``w`` counts *batches* (one batch leaves a station every ``t_fwd``),
not wall-clock time.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

from . import hardware
from .errors import InfeasibleWindow, InvalidParameter

INF = math.inf

# Defaults used throughout the examples of the original study.
T_FWD_US = 100.0
C_KM_PER_US = 0.2
N_PACKETS = 7
LAMBDA0_PER_US = 1e-4


@dataclass(frozen=True)
class FixedP:
    """Success probability independent of geometry."""

    p: float

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0) or math.isnan(self.p):
            raise InvalidParameter(f"fixed p must lie in (0, 1], got {self.p}")


@dataclass(frozen=True)
class AllPhotonic:
    """Success probability from the all-photonic loss model, ``p(L, N)``."""


PSource = Union[FixedP, AllPhotonic]


class Strategy(enum.Enum):
    SEQUENTIAL = "sequential"
    PARALLEL = "parallel"

    def batch_size(self, k: int) -> int:
        return 1 if self is Strategy.SEQUENTIAL else k

    def servers(self, k: int) -> int:
        return k if self is Strategy.SEQUENTIAL else 1

    @classmethod
    def parse(cls, value: "Strategy | str") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameter(f"unknown strategy {value!r}") from None


def _require_int(name: str, value: Any, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidParameter(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidParameter(f"{name} must be >= {minimum}, got {value}")


def _require_positive(name: str, value: float, allow_zero: bool = False) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidParameter(f"{name} must be a number, got {value!r}")
    ok = value >= 0 if allow_zero else value > 0
    if not ok or not math.isfinite(value):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidParameter(f"{name} must be finite and {bound}, got {value}")


@dataclass(frozen=True)
class NetworkConfig:
    u: int
    L: float
    N: int = 0
    k: int = 1
    t_fwd: float = T_FWD_US
    c: float = C_KM_PER_US
    t_control: float = 0.0
    p_source: PSource = FixedP(1.0)

    def __post_init__(self):
        _require_int("u", self.u, 2)
        _require_positive("L", self.L)
        _require_int("N", self.N, 0)
        _require_int("k", self.k, 1)
        _require_positive("t_fwd", self.t_fwd)
        _require_positive("c", self.c)
        _require_positive("t_control", self.t_control, allow_zero=True)
        if not isinstance(self.p_source, (FixedP, AllPhotonic)):
            raise InvalidParameter(f"unknown p source {self.p_source!r}")

    @property
    def L0(self) -> float:
        """Spacing between adjacent nodes along one arm."""
        return self.L / (self.N + 1)

    @property
    def p(self) -> float:
        if isinstance(self.p_source, FixedP):
            return self.p_source.p
        return hardware.p_success(self.L, self.N)


@dataclass(frozen=True)
class RequestModel:
    n: int = N_PACKETS
    w: float = INF
    lambda0: float = LAMBDA0_PER_US

    def __post_init__(self):
        _require_int("n", self.n, 1)
        if self.w != INF:
            _require_int("w", self.w, 1)
        _require_positive("lambda0", self.lambda0)

    def aggregate_rate(self, u: int) -> float:
        """Total submission rate over all ``u(u-1)/2`` user pairs."""
        return u * (u - 1) / 2 * self.lambda0


@dataclass(frozen=True)
class MomentPair:
    """First two raw moments, with optional Monte Carlo standard errors.

    ``cov`` is the covariance between the two moment *estimates*.
    """

    m1: float
    m2: float
    se1: float = 0.0
    se2: float = 0.0
    cov: float = 0.0

    @property
    def variance(self) -> float:
        return max(0.0, self.m2 - self.m1 * self.m1)

    @property
    def c2(self) -> float:
        """Squared coefficient of variation."""
        return self.variance / (self.m1 * self.m1)

    @property
    def is_exact(self) -> bool:
        return self.se1 == 0.0 and self.se2 == 0.0


@dataclass(frozen=True)
class Scenario:
    """A validated bundle of network, request and strategy."""

    network: NetworkConfig
    request: RequestModel
    strategy: Strategy

    @property
    def lam(self) -> float:
        return self.request.aggregate_rate(self.network.u)

    @property
    def m(self) -> int:
        return self.strategy.batch_size(self.network.k)

    @property
    def s(self) -> int:
        return self.strategy.servers(self.network.k)

    @property
    def L0(self) -> float:
        return self.network.L0

    @property
    def p(self) -> float:
        return self.network.p

    def window_spec(self):
        from .window import WindowSpec

        return WindowSpec(n=self.request.n, w=self.request.w, p=self.p, m=self.m)

    def replace(self, **changes) -> "Scenario":
        """Copy with fields changed; keys may name network or request fields."""
        net, req, strat = {}, {}, self.strategy
        net_fields = {f.name for f in dataclasses.fields(NetworkConfig)}
        req_fields = {f.name for f in dataclasses.fields(RequestModel)}
        for key, value in changes.items():
            if key == "strategy":
                strat = Strategy.parse(value)
            elif key in net_fields:
                net[key] = value
            elif key in req_fields:
                req[key] = value
            else:
                raise InvalidParameter(f"unknown scenario field {key!r}")
        return validate(
            dataclasses.replace(self.network, **net),
            dataclasses.replace(self.request, **req),
            strat,
        )


def validate(config: NetworkConfig, req: RequestModel, strat: Strategy | str) -> Scenario:
    """Check a configuration and bundle it into a :class:`Scenario`.

    Raises :class:`InfeasibleWindow` when a finite window cannot hold ``n``
    packets at batch size ``m``.
    """
    strat = Strategy.parse(strat)
    m = strat.batch_size(config.k)
    if req.w != INF and req.w * m < req.n:
        raise InfeasibleWindow(
            f"window of {req.w} batches x {m} packets cannot hold n={req.n} successes"
        )
    return Scenario(config, req, strat)


def small_budget(
    k: int,
    u: int,
    strategy: Strategy | str = Strategy.SEQUENTIAL,
    *,
    w: float = 10,
    n: int = N_PACKETS,
    lambda0: float = LAMBDA0_PER_US,
) -> Scenario:
    """Deterministic delivery over a 1 km star with a single hub repeater."""
    net = NetworkConfig(u=u, L=1.0, N=0, k=k, p_source=FixedP(1.0))
    return validate(net, RequestModel(n=n, w=w, lambda0=lambda0), strategy)


def large_budget(
    k: int,
    u: int,
    strategy: Strategy | str = Strategy.SEQUENTIAL,
    *,
    L: float = 7.5,
    N: int = 0,
    w: float = 8,
    n: int = N_PACKETS,
    lambda0: float = LAMBDA0_PER_US,
) -> Scenario:
    """All-photonic repeaters; ``p`` follows from ``(L, N)``."""
    net = NetworkConfig(u=u, L=L, N=N, k=k, p_source=AllPhotonic())
    return validate(net, RequestModel(n=n, w=w, lambda0=lambda0), strategy)


# --- JSON scenario schema -------------------------------------------------

SCENARIO_KEYS = (
    "u", "L_km", "N", "k", "t_fwd_us", "c_km_per_us", "t_control_us",
    "p", "n", "w", "lambda0_per_us", "strategy",
)
_OPTIONAL_KEYS = {"t_control_us": 0.0}


def _parse_p(value: Any) -> PSource:
    if not isinstance(value, dict) or len(value) != 1:
        raise InvalidParameter(f'"p" must be {{"fixed": x}} or {{"all_photonic": true}}, got {value!r}')
    if "fixed" in value:
        return FixedP(value["fixed"])
    if value.get("all_photonic") is True:
        return AllPhotonic()
    raise InvalidParameter(f"unrecognised p source {value!r}")


def _parse_w(value: Any) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return INF
    return value


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from the JSON schema (see ``SCENARIO_KEYS``)."""
    if not isinstance(data, dict):
        raise InvalidParameter("scenario must be a JSON object")
    unknown = set(data) - set(SCENARIO_KEYS)
    if unknown:
        raise InvalidParameter(f"unknown scenario keys: {sorted(unknown)}")
    merged = {**_OPTIONAL_KEYS, **data}
    missing = [key for key in SCENARIO_KEYS if key not in merged]
    if missing:
        raise InvalidParameter(f"missing scenario keys: {missing}")
    net = NetworkConfig(
        u=merged["u"],
        L=merged["L_km"],
        N=merged["N"],
        k=merged["k"],
        t_fwd=merged["t_fwd_us"],
        c=merged["c_km_per_us"],
        t_control=merged["t_control_us"],
        p_source=_parse_p(merged["p"]),
    )
    req = RequestModel(n=merged["n"], w=_parse_w(merged["w"]), lambda0=merged["lambda0_per_us"])
    return validate(net, req, merged["strategy"])


def scenario_to_dict(sc: Scenario) -> dict:
    net, req = sc.network, sc.request
    if isinstance(net.p_source, FixedP):
        p = {"fixed": net.p_source.p}
    else:
        p = {"all_photonic": True}
    return {
        "u": net.u,
        "L_km": net.L,
        "N": net.N,
        "k": net.k,
        "t_fwd_us": net.t_fwd,
        "c_km_per_us": net.c,
        "t_control_us": net.t_control,
        "p": p,
        "n": req.n,
        "w": "inf" if req.w == INF else req.w,
        "lambda0_per_us": req.lambda0,
        "strategy": sc.strategy.value,
    }


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
