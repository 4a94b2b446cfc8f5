"""Load, waiting times and mean sojourn time of the M/G/s request queue.

Sequential distribution gives ``s = k`` servers with batch size 1;
parallel distribution gives one server with batch size ``k``. Waiting time
is exact (Pollaczek-Khinchine) for one server and uses the Lee-Longton
scaling of the M/M/s wait otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidParameter, Overloaded
from .model import MomentPair, Scenario
from .service import ServiceMoments, c2_service, service_moments
from .window import window_moments

EXACT_MG1 = "exact_mg1"
EXACT_MMS = "exact_mms"
LEE_LONGTON = "lee_longton"
SIMULATED = "simulated"


@dataclass(frozen=True)
class WaitEstimate:
    mean_wait: float  # math.inf when unstable; check ``stable`` before arithmetic
    method: str
    stable: bool

    @classmethod
    def unbounded(cls, method: str) -> "WaitEstimate":
        return cls(math.inf, method, False)


@dataclass(frozen=True)
class QueueInputs:
    lam: float
    s: int
    service: ServiceMoments | MomentPair

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidParameter(f"arrival rate must be nonnegative, got {self.lam}")
        if self.s < 1:
            raise InvalidParameter(f"need at least one server, got {self.s}")


def load(scenario: Scenario, service: ServiceMoments) -> float:
    """``rho = lambda0 u (u-1) m / (2k) * E[T_service]``."""
    net, req = scenario.network, scenario.request
    return req.lambda0 * net.u * (net.u - 1) * scenario.m / (2 * net.k) * service.m1


def wait_mg1(lam: float, service) -> WaitEstimate:
    """Mean wait in an M/G/1 queue; ``service`` supplies ``m1`` and ``m2``."""
    busy = lam * service.m1
    if busy >= 1.0:
        return WaitEstimate.unbounded(EXACT_MG1)
    return WaitEstimate(lam * service.m2 / (2.0 * (1.0 - busy)), EXACT_MG1, True)


def wait_mms(lam: float, mu: float, s: int) -> WaitEstimate:
    """Mean wait in an M/M/s queue with per-server rate ``mu``.

    Factorials are handled in log space so large ``s`` does not overflow.
    """
    if mu <= 0:
        raise InvalidParameter(f"service rate must be positive, got {mu}")
    if s < 1:
        raise InvalidParameter(f"need at least one server, got {s}")
    if lam == 0:
        return WaitEstimate(0.0, EXACT_MMS, True)
    z = 1.0 - lam / (s * mu)
    if z <= 0:
        return WaitEstimate.unbounded(EXACT_MMS)
    log_a = math.log(lam / mu)
    i = np.arange(s)
    log_top = s * log_a - gammaln(s + 1)
    terms = np.append(i * log_a - gammaln(i + 1), log_top - math.log(z))
    log_w = log_top - math.log(s) - math.log(mu) - 2 * math.log(z) - logsumexp(terms)
    return WaitEstimate(float(math.exp(log_w)), EXACT_MMS, True)


def wait_mgs_approx(inputs: QueueInputs) -> WaitEstimate:
    """``(C^2 + 1)/2`` times the M/M/s wait; one server falls back to M/G/1."""
    if inputs.s == 1:
        return wait_mg1(inputs.lam, inputs.service)
    m1, m2 = inputs.service.m1, inputs.service.m2
    c2 = max(0.0, m2 / (m1 * m1) - 1.0)
    base = wait_mms(inputs.lam, 1.0 / m1, inputs.s)
    if not base.stable:
        return WaitEstimate.unbounded(LEE_LONGTON)
    return WaitEstimate((c2 + 1.0) / 2.0 * base.mean_wait, LEE_LONGTON, True)


def wait_for(scenario: Scenario, service: ServiceMoments) -> WaitEstimate:
    """Waiting time by the routing of the strategy: exact for one server."""
    return wait_mgs_approx(QueueInputs(scenario.lam, scenario.s, service))


@dataclass(frozen=True)
class Evaluation:
    """Everything the analytic pipeline derives for one scenario."""

    scenario: Scenario
    window: MomentPair
    window_method: str
    service: ServiceMoments
    rho: float
    wait: WaitEstimate
    mean_sojourn: float  # math.inf when unstable
    mean_sojourn_se: float

    @property
    def stable(self) -> bool:
        return self.wait.stable and self.rho < 1.0

    @property
    def c2_service(self) -> float:
        return c2_service(self.service)


def _sojourn(scenario: Scenario, b: MomentPair) -> tuple[ServiceMoments, float, WaitEstimate, float]:
    sm = service_moments(scenario, b)
    rho = load(scenario, sm)
    wait = wait_for(scenario, sm)
    if rho >= 1.0 or not wait.stable:
        wait = WaitEstimate.unbounded(wait.method)
        return sm, rho, wait, math.inf
    return sm, rho, wait, scenario.network.t_control + wait.mean_wait + sm.m1


def _sojourn_se(scenario: Scenario, b: MomentPair) -> float:
    """First-order propagation of the window-moment standard errors."""
    if b.is_exact:
        return 0.0
    h1 = max(1e-7 * b.m1, 1e-9)
    h2 = max(1e-7 * b.m2, 1e-9)
    grads = []
    for d1, d2, h in ((h1, 0.0, h1), (0.0, h2, h2)):
        hi = _sojourn(scenario, replace(b, m1=b.m1 + d1, m2=b.m2 + d2))[3]
        lo = _sojourn(scenario, replace(b, m1=b.m1 - d1, m2=b.m2 - d2))[3]
        if not (math.isfinite(hi) and math.isfinite(lo)):
            return math.inf
        grads.append((hi - lo) / (2 * h))
    g1, g2 = grads
    var = g1 * g1 * b.se1**2 + g2 * g2 * b.se2**2 + 2 * g1 * g2 * b.cov
    return math.sqrt(max(var, 0.0))


def evaluate(
    scenario: Scenario,
    window: MomentPair | None = None,
    *,
    window_method: str = "given",
    samples: int = 100_000,
    seed: int | np.random.Generator | None = 0,
    prefer_exact: bool = False,
) -> Evaluation:
    """Load, wait and mean sojourn time; never raises on overload."""
    if window is None:
        window, window_method = window_moments(
            scenario.window_spec(), samples=samples, rng=seed, prefer_exact=prefer_exact
        )
    sm, rho, wait, mst = _sojourn(scenario, window)
    se = _sojourn_se(scenario, window) if math.isfinite(mst) else math.inf
    return Evaluation(scenario, window, window_method, sm, rho, wait, mst, se)


def mean_sojourn(scenario: Scenario, **kwargs) -> float:
    """``t_control + E[T_wait] + E[T_service]``; raises :class:`Overloaded`."""
    ev = evaluate(scenario, **kwargs)
    if not ev.stable:
        raise Overloaded(ev.rho)
    return ev.mean_sojourn
