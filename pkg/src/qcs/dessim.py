"""Discrete-event simulation of the FIFO M/G/s request queue.

Requests arrive as a Poisson stream at the aggregate rate, wait in one
infinite FIFO queue, and occupy one of ``s`` servers for
``2L/c + t_fwd (2N + 1) + t_fwd (B - 1)`` where ``B`` is a window-problem
draw.

Seeding: ``SeedSequence(master_seed).spawn(replications)`` gives one child
per replication (in index order); each child spawns two streams, the first
for inter-arrival times and the second for ``B`` draws. Replication
results are reduced in index order, so reports do not depend on how many
workers ran them.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, Overloaded
from .model import Scenario
from .queueing import load
from .service import service_moments
from .window import window_moments, sample_B_array

MIN_MEASURED = 1000
MIN_REPLICATIONS = 5
WARMUP_CAP = 100_000

_ARRIVAL = 0
_DEPARTURE = 1


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    measured_requests: int = 10_000
    replications: int = 10
    master_seed: int = 0
    warmup_requests: int | None = None  # None: derived from the load
    workers: int = 1

    def __post_init__(self):
        if self.measured_requests < MIN_MEASURED:
            raise InvalidConfig(f"measured_requests must be >= {MIN_MEASURED}")
        if self.replications < MIN_REPLICATIONS:
            raise InvalidConfig(f"replications must be >= {MIN_REPLICATIONS}")
        if self.warmup_requests is not None and self.warmup_requests < 0:
            raise InvalidConfig("warmup_requests must be nonnegative")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidConfig("master_seed must be a 64-bit unsigned value")


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    def __str__(self) -> str:
        return f"{self.mean:.6g} +/- {self.se:.2g}"


@dataclass(frozen=True)
class ReplicationStats:
    mean_wait: float
    mean_service: float
    mean_sojourn: float
    mean_in_system: float
    throughput: float
    utilization: float
    completed: int


@dataclass(frozen=True)
class SimReport:
    mean_sojourn: Estimate
    mean_wait: Estimate
    mean_service: Estimate
    mean_in_system: Estimate
    throughput: Estimate
    utilization: Estimate
    requests_completed: int
    replications: int
    warmup_requests: int
    arrival_rate: float
    rho: float
    per_replication: list[ReplicationStats] = field(repr=False)

    def little_residual(self) -> Estimate:
        """``L - lambda W`` across replications; zero in expectation."""
        diffs = [r.mean_in_system - self.arrival_rate * r.mean_sojourn for r in self.per_replication]
        return _estimate(diffs)

    def to_dict(self) -> dict:
        out = {}
        for name in ("mean_sojourn", "mean_wait", "mean_service", "mean_in_system",
                     "throughput", "utilization"):
            est = getattr(self, name)
            out[name] = est.mean
            out[name + "_se"] = est.se
        out.update(
            requests_completed=self.requests_completed,
            replications=self.replications,
            warmup_requests=self.warmup_requests,
            arrival_rate=self.arrival_rate,
            rho=self.rho,
            per_replication_sojourn=[r.mean_sojourn for r in self.per_replication],
        )
        return out


def _estimate(values) -> Estimate:
    arr = np.asarray(values, dtype=float)
    return Estimate(float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size)))


def default_warmup(rho: float, s: int) -> int:
    # the small offset keeps exact ratios such as 0.9/0.1 from rounding up
    return int(min(WARMUP_CAP, 10 * s * math.ceil(rho / (1.0 - rho) - 1e-9)))


def simulate_queue(
    arrivals: np.ndarray,
    durations: np.ndarray,
    s: int,
    warmup: int,
    t_control: float = 0.0,
) -> ReplicationStats:
    """Event loop over given arrival instants and service durations.

    ``durations[i]`` is consumed by the ``i``-th request to start service.
    Statistics cover requests ``warmup..`` and the time interval between
    the first and last measured arrival.
    """
    total = arrivals.size
    events: list[tuple[float, int, int, int]] = []
    seq = 0
    heapq.heappush(events, (float(arrivals[0]), seq, _ARRIVAL, 0))
    queue: deque[int] = deque()
    busy = 0
    started = 0
    in_system = 0
    start_time = np.empty(total)
    service = np.empty(total)
    finish = np.empty(total)

    t0 = float(arrivals[warmup])
    t1 = float(arrivals[-1])
    last_t = t0
    area_n = 0.0
    area_busy = 0.0
    departures_in_window = 0
    completed = 0

    def start(i: int, now: float) -> None:
        nonlocal seq, started, busy
        d = float(durations[started])
        started += 1
        busy += 1
        start_time[i] = now
        service[i] = d
        seq += 1
        heapq.heappush(events, (now + d, seq, _DEPARTURE, i))

    while events:
        now, _, kind, i = heapq.heappop(events)
        if now > t0:
            span = min(now, t1) - last_t
            if span > 0:
                area_n += in_system * span
                area_busy += busy * span
                last_t = min(now, t1)
        if kind == _ARRIVAL:
            in_system += 1
            if i + 1 < total:
                seq += 1
                heapq.heappush(events, (float(arrivals[i + 1]), seq, _ARRIVAL, i + 1))
            if busy < s:
                start(i, now)
            else:
                queue.append(i)
        else:
            in_system -= 1
            busy -= 1
            finish[i] = now
            completed += 1
            if t0 <= now <= t1:
                departures_in_window += 1
            if queue:
                start(queue.popleft(), now)

    sl = slice(warmup, total)
    wait = start_time[sl] - arrivals[sl]
    svc = service[sl]
    soj = finish[sl] - arrivals[sl] + t_control
    span = t1 - t0
    return ReplicationStats(
        mean_wait=float(wait.mean()),
        mean_service=float(svc.mean()),
        mean_sojourn=float(soj.mean()),
        mean_in_system=area_n / span,
        throughput=departures_in_window / span,
        utilization=area_busy / (s * span),
        completed=total - warmup,
    )


def _replicate(args) -> ReplicationStats:
    scenario, seed_seq, warmup, measured, x, y = args
    arr_ss, svc_ss = seed_seq.spawn(2)
    arr_rng = np.random.default_rng(arr_ss)
    svc_rng = np.random.default_rng(svc_ss)
    total = warmup + measured
    arrivals = np.cumsum(arr_rng.exponential(1.0 / scenario.lam, size=total))
    B = sample_B_array(scenario.window_spec(), total, svc_rng)
    durations = x + y * B  # equals 2L/c + t_fwd(2N+1) + t_fwd(B-1)
    return simulate_queue(arrivals, durations, scenario.s, warmup, scenario.network.t_control)


def run(sim: SimConfig, rho: float | None = None) -> SimReport:
    """Simulate ``sim.replications`` independent runs and aggregate them.

    ``rho`` may be supplied when the caller already knows the load;
    otherwise it is computed from the analytic window moments (Monte Carlo
    when needed, seeded from ``master_seed``). Raises :class:`Overloaded`
    when ``rho >= 1``.
    """
    sc = sim.scenario
    spec = sc.window_spec()
    b, _ = window_moments(spec, 100_000, np.random.default_rng([sim.master_seed, 0xB]), prefer_exact=True)
    sm = service_moments(sc, b)
    if rho is None:
        rho = load(sc, sm)
    if rho >= 1.0:
        raise Overloaded(rho, f"cannot simulate an overloaded queue (rho={rho:.6g})")
    warmup = default_warmup(rho, sc.s) if sim.warmup_requests is None else sim.warmup_requests
    children = np.random.SeedSequence(sim.master_seed).spawn(sim.replications)
    jobs = [(sc, child, warmup, sim.measured_requests, sm.x, sm.y) for child in children]
    if sim.workers > 1:
        with ProcessPoolExecutor(max_workers=sim.workers) as pool:
            reps = list(pool.map(_replicate, jobs))
    else:
        reps = [_replicate(job) for job in jobs]

    return SimReport(
        mean_sojourn=_estimate([r.mean_sojourn for r in reps]),
        mean_wait=_estimate([r.mean_wait for r in reps]),
        mean_service=_estimate([r.mean_service for r in reps]),
        mean_in_system=_estimate([r.mean_in_system for r in reps]),
        throughput=_estimate([r.throughput for r in reps]),
        utilization=_estimate([r.utilization for r in reps]),
        requests_completed=sum(r.completed for r in reps),
        replications=sim.replications,
        warmup_requests=warmup,
        arrival_rate=sc.lam,
        rho=rho,
        per_replication=reps,
    )
