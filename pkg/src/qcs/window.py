"""Batches until ``n`` successes land inside a sliding window of ``w`` batches.

Each batch carries ``m`` packets; each packet succeeds independently with
probability ``p``, so the per-batch success count is Binomial(m, p). The
stopping index ``B`` is the first ``x`` with
``S[x-w+1] + ... + S[x] >= n`` (with ``w = inf`` the sum runs over every
batch so far).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.special import gammaln

from .errors import (
    InfeasibleWindow,
    InvalidParameter,
    NonConvergence,
    SamplerOverrun,
    StateSpaceTooLarge,
    Unsupported,
)
from .model import INF, MomentPair

MAX_BATCHES = 10**9
MAX_DP_STATES = 5_000_000
DEFAULT_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class WindowSpec:
    n: int
    w: float
    p: float
    m: int = 1

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidParameter(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise InvalidParameter(f"m must be a positive integer, got {self.m!r}")
        if self.w != INF and (int(self.w) != self.w or self.w < 1):
            raise InvalidParameter(f"w must be a positive integer or inf, got {self.w!r}")
        if not (0.0 < self.p <= 1.0):
            raise InvalidParameter(f"p must lie in (0, 1], got {self.p}")
        if self.w != INF and self.w * self.m < self.n:
            raise InfeasibleWindow(f"w*m = {self.w * self.m} < n = {self.n}")

    @property
    def infinite(self) -> bool:
        return self.w == INF


def binom_pmf(m: int, p: float) -> np.ndarray:
    """Binomial(m, p) probabilities for 0..m, coefficients via log-gamma."""
    s = np.arange(m + 1)
    if p == 1.0:
        out = np.zeros(m + 1)
        out[m] = 1.0
        return out
    log_coef = gammaln(m + 1) - gammaln(s + 1) - gammaln(m - s + 1)
    return np.exp(log_coef + s * math.log(p) + (m - s) * math.log1p(-p))


# --- closed forms ----------------------------------------------------------

def exact_moments(spec: WindowSpec) -> MomentPair:
    """Closed-form or series moments of ``B``.

    Raises :class:`Unsupported` for a finite window with ``p < 1``.
    """
    n, p, m = spec.n, spec.p, spec.m
    if p == 1.0:
        b = -(-n // m)
        return MomentPair(float(b), float(b * b))
    if spec.infinite and m == 1:
        return MomentPair(n / p, (n * (1 - p) + n * n) / (p * p))
    if spec.infinite:
        return survival_inf_multi(spec).moments()
    raise Unsupported(f"no closed form for finite window with p<1 ({spec})")


@dataclass(frozen=True)
class SurvivalCurve:
    """``values[b] = Pr[B > b]`` for ``b = 0 .. len(values) - 1``.

    ``truncation_tail`` bounds the neglected first-moment mass
    ``sum_{b >= len(values)} Pr[B > b]``.
    """

    values: np.ndarray
    truncation_tail: float

    def moments(self) -> MomentPair:
        b = np.arange(len(self.values), dtype=float)
        m1 = math.fsum(self.values)
        # E[B^2] = sum_b (2b + 1) Pr[B > b] for a positive integer variable
        m2 = math.fsum((2.0 * b + 1.0) * self.values)
        return MomentPair(m1, m2)


def survival_inf_multi(spec: WindowSpec, tail_tol: float = DEFAULT_TAIL_TOL) -> SurvivalCurve:
    """Survival function of ``B`` for an infinite window.

    Propagates the distribution of the running success total (restricted
    to totals below ``n``) one batch at a time; the mass still below ``n``
    after ``b`` batches is ``Pr[B > b]``. Stops once a geometric bound on
    the neglected mass drops below ``tail_tol``.
    """
    if not spec.infinite:
        raise InvalidParameter("survival_inf_multi needs w = inf")
    n, p, m = spec.n, spec.p, spec.m
    if not (0.0 < p < 1.0):
        raise InvalidParameter(f"survival_inf_multi needs 0 < p < 1, got {p}")
    pmf = binom_pmf(m, p)[:n]
    # Any n consecutive batches with >= 1 success each finish the request.
    log_all_hit = n * math.log(-math.expm1(m * math.log1p(-p)))
    tail_factor = n / math.exp(log_all_hit) if log_all_hit > -700 else math.inf

    dist = np.zeros(n)
    dist[0] = 1.0
    values = [1.0]
    surv = 1.0
    while True:
        dist = np.convolve(dist, pmf)[:n]
        surv = math.fsum(dist)
        values.append(surv)
        bound = surv * tail_factor
        if bound < tail_tol or surv == 0.0:
            break
        if len(values) > MAX_BATCHES:
            raise SamplerOverrun("survival series did not converge")
    return SurvivalCurve(np.array(values), bound)


# --- samplers ----------------------------------------------------------------

def sample_B(spec: WindowSpec, rng: np.random.Generator, max_batches: int = MAX_BATCHES) -> int:
    """Draw one ``B`` by stepping batch by batch."""
    n, w, p, m = spec.n, spec.w, spec.p, spec.m
    window: deque[int] = deque()
    total = 0
    x = 0
    while x < max_batches:
        x += 1
        s = int(rng.binomial(m, p))
        total += s
        if w != INF:
            window.append(s)
            if len(window) > w:
                total -= window.popleft()
        if total >= n:
            return x
    raise SamplerOverrun(f"no completion within {max_batches} batches for {spec}")


def sample_B_array(
    spec: WindowSpec,
    size: int,
    rng: np.random.Generator,
    max_batches: int = MAX_BATCHES,
) -> np.ndarray:
    """Draw ``size`` independent copies of ``B`` (vectorised in blocks)."""
    n, w, p, m = spec.n, spec.w, spec.p, spec.m
    out = np.empty(size, dtype=np.int64)
    if p == 1.0:
        out.fill(-(-n // m))
        return out
    H = 0 if spec.infinite else int(w) - 1
    block = int(min(4096, max(16, 2 * math.ceil(n / (m * p)), H + 1)))
    active = np.arange(size)
    hist = np.zeros((size, H), dtype=np.int64)
    total = np.zeros(size, dtype=np.int64)
    offset = 0
    while active.size:
        if offset >= max_batches:
            raise SamplerOverrun(f"no completion within {max_batches} batches for {spec}")
        S = rng.binomial(m, p, size=(active.size, block))
        if spec.infinite:
            csum = total[:, None] + np.cumsum(S, axis=1)
            hit = csum >= n
        else:
            P = np.concatenate([hist, S], axis=1)
            C = np.zeros((active.size, H + block + 1), dtype=np.int64)
            np.cumsum(P, axis=1, out=C[:, 1:])
            hit = (C[:, H + 1:] - C[:, :block]) >= n
        done = hit.any(axis=1)
        first = hit.argmax(axis=1)
        out[active[done]] = offset + first[done] + 1
        keep = ~done
        active = active[keep]
        if spec.infinite:
            total = csum[keep, -1]
        else:
            hist = P[keep, block:]
        offset += block
    return out


def sample_moments(spec: WindowSpec, samples: int, rng: np.random.Generator) -> MomentPair:
    """Monte Carlo estimates of ``E[B]`` and ``E[B^2]`` with standard errors."""
    if samples < 2:
        raise InvalidParameter("need at least two samples")
    b = sample_B_array(spec, samples, rng).astype(float)
    return moments_from_draws(b)


def moments_from_draws(b: np.ndarray) -> MomentPair:
    b = np.asarray(b, dtype=float)
    b2 = b * b
    k = b.size
    cov = np.cov(b, b2, ddof=1)
    return MomentPair(
        m1=float(b.mean()),
        m2=float(b2.mean()),
        se1=math.sqrt(cov[0, 0] / k),
        se2=math.sqrt(cov[1, 1] / k),
        cov=float(cov[0, 1] / k),
    )


# --- Markov chain oracle ----------------------------------------------------

def dp_state_bound(spec: WindowSpec) -> float:
    if spec.infinite:
        return float(spec.n)
    return float(min(spec.m, spec.n) + 1) ** (int(spec.w) - 1)


def dp_oracle(spec: WindowSpec, max_states: int = MAX_DP_STATES) -> MomentPair:
    """Exact moments via expected hitting times of an absorbing chain.

    For a finite window the state is the tuple of the last ``w - 1`` batch
    success counts; for ``w = inf`` it is the running total. With
    ``t = (I - Q)^{-1} 1`` and ``t2 = (I - Q)^{-1} (1 + 2 Q t)`` the
    moments are read off at the empty start state.
    """
    if dp_state_bound(spec) > max_states:
        raise StateSpaceTooLarge(
            f"(min(m,n)+1)^(w-1) = {dp_state_bound(spec):.3g} exceeds {max_states}"
        )
    n, w, p, m = spec.n, spec.w, spec.p, spec.m
    pmf = binom_pmf(m, p)
    H = None if spec.infinite else int(w) - 1

    start = 0 if H is None else (0,) * H
    index = {start: 0}
    order = [start]
    rows, cols, vals = [], [], []
    i = 0
    while i < len(order):
        state = order[i]
        held = state if H is None else sum(state)
        for s in range(min(m, n - 1 - held) + 1):
            if held + s >= n:
                break
            if H is None:
                nxt = held + s
            elif H == 0:
                nxt = ()
            else:
                nxt = state[1:] + (s,)
            j = index.get(nxt)
            if j is None:
                j = index[nxt] = len(order)
                order.append(nxt)
            rows.append(i)
            cols.append(j)
            vals.append(pmf[s])
        i += 1

    K = len(order)
    Q = sparse.csc_matrix((vals, (rows, cols)), shape=(K, K))
    try:
        lu = splu((sparse.identity(K, format="csc") - Q).tocsc())
    except RuntimeError as exc:  # p so small that I - Q is singular in floating point
        raise NonConvergence(f"absorbing-chain solve failed for {spec}: {exc}") from exc
    ones = np.ones(K)
    t = lu.solve(ones)
    t2 = lu.solve(ones + 2.0 * (Q @ t))
    m1, m2 = float(t[0]), float(t2[0])
    # cancellation in I - Q for tiny p can return nonsense without an error
    if not (math.isfinite(m2) and m1 >= -(-n // m) * (1 - 1e-9) and m2 >= m1 * m1 * (1 - 1e-6)):
        raise NonConvergence(f"absorbing-chain solve is ill-conditioned for {spec}")
    return MomentPair(m1, m2)


# --- routing -----------------------------------------------------------------

CLOSED_FORM = "closed_form"
SERIES = "series"
MONTE_CARLO = "monte_carlo"
MARKOV = "markov_chain"


def window_moments(
    spec: WindowSpec,
    samples: int = 100_000,
    rng: np.random.Generator | int | None = None,
    prefer_exact: bool = False,
) -> tuple[MomentPair, str]:
    """Moments of ``B`` using the cheapest available method.

    Order: deterministic/negative-binomial closed form, infinite-window
    series, then Monte Carlo. With ``prefer_exact`` the Markov-chain
    oracle replaces Monte Carlo whenever its state space fits.
    """
    if spec.p == 1.0 or (spec.infinite and spec.m == 1):
        return exact_moments(spec), CLOSED_FORM
    if spec.infinite:
        return survival_inf_multi(spec).moments(), SERIES
    if prefer_exact and dp_state_bound(spec) <= MAX_DP_STATES:
        try:
            return dp_oracle(spec), MARKOV
        except NonConvergence:
            pass
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return sample_moments(spec, samples, rng), MONTE_CARLO
