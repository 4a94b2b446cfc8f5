"""Critical number of users and critical arm length.

Both follow from the stability condition ``rho < 1``. The user bound has a
closed form because the service time does not depend on ``u``; the length
bound is transcendental when ``p`` depends on ``L`` and is solved by
bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence
from .model import AllPhotonic, FixedP, MomentPair, Scenario
from .queueing import load
from .service import service_moments
from .window import WindowSpec, window_moments

CLOSED_FORM = "closed_form"
BISECTION = "bisection"

MAX_BISECTION_STEPS = 200
L_TOL_KM = 1e-6
RHO_TOL = 1e-6


@dataclass(frozen=True)
class CapacityResult:
    value: float
    residual_load: float
    method: str
    note: str = ""


def u_crit(
    scenario: Scenario,
    window: MomentPair | None = None,
    *,
    samples: int = 100_000,
    seed: int | None = 0,
    prefer_exact: bool = False,
) -> CapacityResult:
    """Largest ``u`` with ``rho <= 1``; the scenario's own ``u`` is ignored.

    ``window`` supplies precomputed moments of ``B``; otherwise they come
    from :func:`qcs.window.window_moments`.
    """
    if window is None:
        b, method = window_moments(scenario.window_spec(), samples, seed, prefer_exact)
    else:
        b, method = window, "given"
    sm = service_moments(scenario, b)
    k, lam0, m = scenario.network.k, scenario.request.lambda0, scenario.m
    u = math.floor(0.5 + 0.5 * math.sqrt(1.0 + 8.0 * k / (lam0 * m * sm.m1)))
    residual = math.nan
    if u >= 2:
        residual = abs(load(scenario.replace(u=u), sm) - 1.0)
    note = "" if b.is_exact else f"window moments: {method}"
    return CapacityResult(float(u), residual, CLOSED_FORM, note)


def l_crit_bound(scenario: Scenario, u: int | None = None) -> float:
    """Upper bound ``c k / (lambda0 u (u-1) m)`` on the critical length."""
    u = scenario.network.u if u is None else u
    net, req = scenario.network, scenario.request
    return net.c * net.k / (req.lambda0 * u * (u - 1) * scenario.m)


def l_crit(
    scenario: Scenario,
    u: int | None = None,
    *,
    samples: int = 100_000,
    seed: int | None = 0,
    prefer_exact: bool = False,
) -> CapacityResult:
    """Arm length at which the load reaches one (zero if no length works).

    The scenario's ``L`` is ignored. With a fixed ``p`` the answer is
    explicit. With all-photonic repeaters the load ``rho(L)`` is increasing
    in ``L`` and is bisected on ``(0, U]`` with ``U`` from
    :func:`l_crit_bound`, where the flight time alone already gives
    ``rho = 1``. Monte Carlo window moments reuse one seed at every step so
    that the sampled ``rho(L)`` stays monotone.
    """
    net, req = scenario.network, scenario.request
    u = net.u if u is None else u
    m, n = scenario.m, req.n
    upper = l_crit_bound(scenario, u)
    coef = req.lambda0 * u * (u - 1) * m / (2 * net.k)
    half_ct = net.c * net.t_fwd / 2

    if isinstance(net.p_source, FixedP):
        b, _ = window_moments(scenario.window_spec(), samples, seed, prefer_exact)
        L = max(0.0, upper - half_ct * (2 * net.N + b.m1))
        residual = abs(coef * (2 * L / net.c + net.t_fwd * (2 * net.N + b.m1)) - 1.0)
        return CapacityResult(L, residual, CLOSED_FORM)

    assert isinstance(net.p_source, AllPhotonic)
    min_batches = -(-n // m)
    cache: dict[float, float] = {}

    def g(L: float) -> float:
        """``rho(L) - 1``; skips the window solve when a lower bound already overloads."""
        if L in cache:
            return cache[L]
        sc = scenario.replace(L=L, u=u)
        p = sc.p
        # B >= ceil(n/m) always, and E[B] >= n/(m p) by Wald's identity.
        eb_low = max(min_batches, n / (m * p))
        rho_low = coef * (2 * L / net.c + net.t_fwd * (2 * net.N + eb_low))
        if rho_low >= 1.0:
            val = rho_low - 1.0
        else:
            spec = WindowSpec(n=n, w=req.w, p=p, m=m)
            b, _ = window_moments(spec, samples, seed, prefer_exact)
            val = load(sc, service_moments(sc, b)) - 1.0
        cache[L] = val
        return val

    lo = min(L_TOL_KM, upper) * 1e-3
    if g(lo) >= 0.0:
        return CapacityResult(0.0, abs(g(lo)), BISECTION, "overloaded at L -> 0")
    hi = upper
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        val = g(mid)
        if abs(val) < RHO_TOL or hi - lo < L_TOL_KM:
            _check_monotone(cache)
            return CapacityResult(mid, abs(val), BISECTION)
        if val < 0.0:
            lo = mid
        else:
            hi = mid
    raise NonConvergence(f"bisection did not converge in {MAX_BISECTION_STEPS} steps")


def _check_monotone(cache: dict[float, float]) -> None:
    """Bracketing needs every sampled underloaded point left of every overloaded one.

    Values from the cheap lower bound are not comparable in magnitude with
    exact ones, so only signs are checked.
    """
    signs = np.array([v >= 0.0 for _, v in sorted(cache.items())])
    if signs.size and np.any(signs[:-1] & ~signs[1:]):
        raise NonConvergence("load is not monotone in L on the bisection samples")
