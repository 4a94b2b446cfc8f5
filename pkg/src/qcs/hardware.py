"""All-photonic repeater loss model.

The effective attenuation is a fourth-order polynomial fit valid for
forwarding stations with efficiency ``ETA_R`` running the [[48,6,8]]
generalized bicycle code. Only the fit enters the model.
"""
from __future__ import annotations

import math

ETA_R = 0.9
ALPHA_COEFFS = (277e-6, 29e-6)  # dB/km per km^2, per km^4
P_FLOOR = 1e-300
DEFAULT_N_MAX = 50


def alpha_eff(L0: float) -> float:
    """Effective attenuation coefficient in dB/km for hop length ``L0`` (km)."""
    if L0 < 0:
        raise ValueError(f"hop length must be nonnegative, got {L0}")
    a2, a4 = ALPHA_COEFFS
    L0sq = L0 * L0
    return a2 * L0sq + a4 * L0sq * L0sq


def p_success(L: float, N: int) -> float:
    """End-to-end packet success probability across a path of length ``2L``.

    ``N`` repeaters sit between each user and the hub, so hops are
    ``L / (N + 1)`` long. The result is clamped to ``[P_FLOOR, 1]``.
    """
    if L < 0:
        raise ValueError(f"distance must be nonnegative, got {L}")
    if N < 0:
        raise ValueError(f"repeater count must be nonnegative, got {N}")
    loss_db = alpha_eff(L / (N + 1)) * 2.0 * L
    p = 10.0 ** (-loss_db / 10.0)
    return min(1.0, max(P_FLOOR, p))


def repeater_cost(L: float, N: int) -> float:
    """Repeaters per kilometre divided by success probability, ``(2N+1)/(L p)``."""
    return (2 * N + 1) / (L * p_success(L, N))


def optimize_N(L: float, N_max: int = DEFAULT_N_MAX) -> int:
    """Repeater count in ``[0, N_max]`` minimising :func:`repeater_cost`.

    Scans exhaustively; ties go to the smaller ``N``.
    """
    if L <= 0:
        raise ValueError(f"distance must be positive, got {L}")
    if N_max < 0:
        raise ValueError(f"N_max must be nonnegative, got {N_max}")
    best_N, best_cost = 0, math.inf
    for N in range(N_max + 1):
        cost = repeater_cost(L, N)
        if cost < best_cost:
            best_N, best_cost = N, cost
    return best_N
