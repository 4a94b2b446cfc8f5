"""Service-time moments from window-problem moments.

A request holding its stations needs ``2L/c`` of flight time, ``t_fwd`` at
each of the ``2N + 1`` repeaters on the path for the first batch, and one
more ``t_fwd`` for each of the remaining ``B - 1`` batches. So
``T = x + y B`` with ``x = 2L/c + 2 t_fwd N`` and ``y = t_fwd``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import MomentPair, Scenario


@dataclass(frozen=True)
class ServiceMoments:
    m1: float
    m2: float
    x: float
    y: float
    # Window moments the service law was built from, kept for error propagation.
    window: MomentPair | None = None

    @property
    def c2(self) -> float:
        return c2_service(self)

    def service_time(self, B):
        """Service duration for ``B`` batches (scalar or array)."""
        return self.x + self.y * B


def service_moments(scenario: Scenario, b: MomentPair) -> ServiceMoments:
    net = scenario.network
    L, c, t, N = net.L, net.c, net.t_fwd, net.N
    m1 = 2 * L / c + t * (2 * N + b.m1)
    m2 = (
        (4 * L * L / (c * c) + 8 * L / c * t * N + 4 * t * t * N * N)
        + (4 * L / c * t + 4 * t * t * N) * b.m1
        + t * t * b.m2
    )
    return ServiceMoments(m1=m1, m2=m2, x=2 * L / c + 2 * t * N, y=t, window=b)


def affine_moments(x: float, y: float, b: MomentPair) -> ServiceMoments:
    """Moments of ``x + y B`` for arbitrary nonnegative ``x``, ``y``."""
    return ServiceMoments(
        m1=x + y * b.m1,
        m2=x * x + 2 * x * y * b.m1 + y * y * b.m2,
        x=x,
        y=y,
        window=b,
    )


def c2_service(sm: ServiceMoments) -> float:
    """Squared coefficient of variation, clipped at zero against round-off."""
    return max(0.0, sm.m2 / (sm.m1 * sm.m1) - 1.0)
