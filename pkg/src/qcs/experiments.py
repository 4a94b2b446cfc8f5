"""Tabular experiment drivers: single rows, Cartesian sweeps, figure grids.

Every table is a list of dicts with a fixed column order; :func:`write_csv`
renders unbounded values as ``inf`` so the output stays byte-stable.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import capacity, dessim, hardware
from .errors import InvalidConfig, Overloaded, QCSError
from .model import (
    INF,
    AllPhotonic,
    MomentPair,
    NetworkConfig,
    RequestModel,
    SCENARIO_KEYS,
    Scenario,
    Strategy,
    large_budget,
    scenario_from_dict,
    scenario_to_dict,
    small_budget,
    validate,
)
from .queueing import Evaluation, evaluate
from .window import WindowSpec, moments_from_draws, sample_B_array, window_moments

MAX_GRID_POINTS = 1_000_000
METHODS = ("auto", "analytic", "simulate")

ROW_COLUMNS = [
    "u", "L_km", "N", "k", "n", "w", "lambda0_per_us", "strategy",
    "p", "lambda_per_us", "m", "s",
    "EB", "EB_se", "EB2", "window_method", "c2_service",
    "ET_service_us", "rho", "EW_us", "wait_method", "MST_us", "MST_se_us",
    "method", "error",
]


@dataclass
class RunOptions:
    samples: int = 100_000
    seed: int = 0
    method: str = "auto"
    replications: int = 10
    measured: int = 10_000
    workers: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def spec_rng(self, spec: WindowSpec) -> np.random.Generator:
        """Stream keyed on the window spec: identical specs share draws."""
        w_code = 0 if spec.w == INF else int(spec.w)
        return np.random.default_rng([self.seed, spec.n, w_code, spec.m, int(round(spec.p * 2**52))])

    def window(self, spec: WindowSpec) -> tuple[MomentPair, str]:
        key = (spec, self.samples, self.seed)
        if key not in self._cache:
            self._cache[key] = window_moments(spec, self.samples, self.spec_rng(spec))
        return self._cache[key]

    def evaluate(self, sc: Scenario) -> Evaluation:
        b, method = self.window(sc.window_spec())
        return evaluate(sc, b, window_method=method)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("QCS_THREADS", "1")))
    except ValueError:
        return 1


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return f"{float(value):.10g}"
    return str(value)


def write_csv(rows: Sequence[dict], columns: Sequence[str], out=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(col)) for col in columns])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


# --- single scenario --------------------------------------------------------

def scenario_row(sc: Scenario, opts: RunOptions) -> dict:
    """One report row; overload is recorded in ``error`` rather than raised."""
    d = scenario_to_dict(sc)
    row = {key: d[key] for key in ("u", "L_km", "N", "k", "n", "w", "lambda0_per_us", "strategy")}
    row["w"] = "inf" if sc.request.w == INF else sc.request.w
    ev = opts.evaluate(sc)
    row.update(
        p=sc.p,
        lambda_per_us=sc.lam,
        m=sc.m,
        s=sc.s,
        EB=ev.window.m1,
        EB_se=ev.window.se1,
        EB2=ev.window.m2,
        window_method=ev.window_method,
        c2_service=ev.c2_service,
        ET_service_us=ev.service.m1,
        rho=ev.rho,
        EW_us=ev.wait.mean_wait,
        wait_method=ev.wait.method,
        MST_us=ev.mean_sojourn,
        MST_se_us=ev.mean_sojourn_se,
        method="analytic",
        error="",
    )
    if not ev.stable:
        row["error"] = "overloaded"
        return row
    if opts.method == "simulate":
        report = dessim.run(
            dessim.SimConfig(sc, opts.measured, opts.replications, opts.seed), rho=ev.rho
        )
        row.update(
            EW_us=report.mean_wait.mean,
            wait_method="simulated",
            MST_us=report.mean_sojourn.mean,
            MST_se_us=report.mean_sojourn.se,
            method="simulate",
        )
    return row


# --- sweeps --------------------------------------------------------------------

AXIS_ALIASES = {"L": "L_km", "lambda0": "lambda0_per_us", "t_fwd": "t_fwd_us"}


def parse_axis_values(values: Any) -> list:
    """A list, or a string ``"a..b"`` for an inclusive integer range."""
    if isinstance(values, str):
        if ".." not in values:
            raise InvalidConfig(f"axis range must look like 'a..b', got {values!r}")
        lo, hi = values.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    if isinstance(values, list) and values:
        return values
    raise InvalidConfig(f"axis values must be a nonempty list or 'a..b' range, got {values!r}")


def sweep_points(base: dict, axes: dict) -> tuple[list[str], list[dict]]:
    names = []
    value_lists = []
    for raw, values in axes.items():
        name = AXIS_ALIASES.get(raw, raw)
        if name not in SCENARIO_KEYS or name == "p":
            raise InvalidConfig(f"unknown sweep axis {raw!r}")
        names.append(name)
        value_lists.append(parse_axis_values(values))
    size = math.prod(len(v) for v in value_lists)
    if size > MAX_GRID_POINTS:
        raise InvalidConfig(f"grid has {size} points (limit {MAX_GRID_POINTS})")
    points = [{**base, **dict(zip(names, combo))} for combo in itertools.product(*value_lists)]
    return names, points


def _sweep_one(args) -> dict:
    point, opts = args
    try:
        sc = scenario_from_dict(point)
    except QCSError as exc:
        row = {key: point.get(key) for key in ROW_COLUMNS if key in point}
        row["error"] = f"invalid: {exc}"
        return row
    try:
        return scenario_row(sc, opts)
    except QCSError as exc:
        row = {key: point.get(key) for key in ROW_COLUMNS if key in point}
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row


def run_sweep(base: dict, axes: dict, opts: RunOptions) -> list[dict]:
    """Evaluate the Cartesian grid; rows come back in grid order."""
    if opts.method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}")
    _, points = sweep_points(base, axes)
    jobs = [(p, opts) for p in points]
    if opts.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            return list(pool.map(_sweep_one, jobs, chunksize=8))
    return [_sweep_one(job) for job in jobs]


# --- figure grids ----------------------------------------------------------------

REGIONS = ("seq_better", "par_better", "tie", "s_only", "p_only", "none")


def region_label(mst_seq: float, mst_par: float) -> str:
    seq_ok, par_ok = math.isfinite(mst_seq), math.isfinite(mst_par)
    if seq_ok and par_ok:
        if mst_seq < mst_par:
            return "seq_better"
        if mst_par < mst_seq:
            return "par_better"
        return "tie"
    if seq_ok:
        return "s_only"
    if par_ok:
        return "p_only"
    return "none"


def relative_difference(mst_seq: float, mst_par: float) -> float:
    """``(MST_seq - MST_par) / MST_par``; positive when parallel is faster."""
    if math.isfinite(mst_seq) and math.isfinite(mst_par):
        return (mst_seq - mst_par) / mst_par
    return math.nan


def _rel_diff_se(a: Evaluation, b: Evaluation) -> float:
    if not (a.stable and b.stable):
        return math.nan
    r = a.mean_sojourn / b.mean_sojourn
    rel = math.hypot(a.mean_sojourn_se / a.mean_sojourn, b.mean_sojourn_se / b.mean_sojourn)
    return r * rel


def _feasible(make: Callable[[], Scenario]) -> Scenario | None:
    try:
        return make()
    except QCSError:
        return None


def _mst_pair(make_seq, make_par, opts: RunOptions) -> dict:
    out = {}
    evs = {}
    for name, make in (("sequential", make_seq), ("parallel", make_par)):
        sc = _feasible(make)
        if sc is None:
            out[f"mst_{name}"] = math.inf
            out[f"mst_se_{name}"] = math.nan
            out[f"rho_{name}"] = math.nan
            continue
        ev = opts.evaluate(sc)
        evs[name] = ev
        out[f"mst_{name}"] = ev.mean_sojourn
        out[f"mst_se_{name}"] = ev.mean_sojourn_se
        out[f"rho_{name}"] = ev.rho
    out["rel_diff"] = relative_difference(out["mst_sequential"], out["mst_parallel"])
    out["rel_diff_se"] = (
        _rel_diff_se(evs["sequential"], evs["parallel"]) if len(evs) == 2 else math.nan
    )
    out["region"] = region_label(out["mst_sequential"], out["mst_parallel"])
    return out


HEATMAP_COLUMNS = [
    "u", "k", "mst_sequential", "mst_se_sequential", "mst_parallel", "mst_se_parallel",
    "rho_sequential", "rho_parallel", "rel_diff", "rel_diff_se", "region",
]


def fig3(opts: RunOptions, ks: Iterable[int] = range(1, 16)):
    rows = []
    for k in ks:
        for strat in Strategy:
            sc = small_budget(k, 2, strat)
            res = capacity.u_crit(sc, opts.window(sc.window_spec())[0])
            rows.append({"k": k, "strategy": strat.value, "u_crit": int(res.value)})
    return ["k", "strategy", "u_crit"], rows


def _heatmap(make, opts, us, ks):
    rows = []
    for u in us:
        for k in ks:
            row = {"u": u, "k": k}
            row.update(_mst_pair(lambda: make(k, u, Strategy.SEQUENTIAL), lambda: make(k, u, Strategy.PARALLEL), opts))
            rows.append(row)
    return rows


def fig4a(opts: RunOptions, us=range(2, 21), ks=range(1, 16)):
    rows = _heatmap(lambda k, u, st: small_budget(k, u, st, w=10), opts, us, ks)
    return HEATMAP_COLUMNS, rows


def fig4b(opts: RunOptions, us=range(2, 21), ks=range(1, 16)):
    rows = _heatmap(lambda k, u, st: large_budget(k, u, st, L=7.5, N=0, w=8), opts, us, ks)
    return HEATMAP_COLUMNS, rows


def fig5(opts: RunOptions, Ns=(0, 1, 2, 5, 10), us=range(2, 21), k: int = 12,
         strategy: Strategy = Strategy.SEQUENTIAL):
    rows = []
    for N in Ns:
        for u in us:
            net = NetworkConfig(u=u, L=1.0, N=N, k=k, p_source=AllPhotonic())
            sc = validate(net, RequestModel(w=INF), strategy)
            res = capacity.l_crit(sc, samples=opts.samples, seed=opts.seed)
            rows.append({
                "strategy": strategy.value, "N": N, "u": u, "L_crit": res.value,
                "bound": capacity.l_crit_bound(sc), "residual_load": res.residual_load,
            })
    return ["strategy", "N", "u", "L_crit", "bound", "residual_load"], rows


def fig11(opts: RunOptions, Ns=(0, 1, 2, 5, 10), us=range(2, 21), k: int = 12):
    cols, rows = fig5(opts, Ns, us, k, Strategy.SEQUENTIAL)
    rows += fig5(opts, Ns, us, k, Strategy.PARALLEL)[1]
    return cols, rows


P_GRID = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)


def fig7_points(n_fixed: int = 7):
    """(panel, n, w, p, m) tuples for the C^2 grid; windows are n, n+1, n+3, inf."""
    def windows(n):
        return (n, n + 1, n + 3, INF)

    pts = []
    for p in P_GRID:                      # (a) n=7, m=3
        for w in windows(n_fixed):
            pts.append(("a", n_fixed, w, p, 3))
    for m in range(1, 7):                 # (b) n=7, p=0.7
        for w in windows(n_fixed):
            pts.append(("b", n_fixed, w, 0.7, m))
    for n in range(1, 11):                # (c) p=0.7, m=3
        for w in windows(n):
            pts.append(("c", n, w, 0.7, 3))
    for p in P_GRID:                      # (d) m=1
        for w in windows(n_fixed):
            pts.append(("d", n_fixed, w, p, 1))
    return pts


def c2_estimate(spec: WindowSpec, samples: int, rng: np.random.Generator, groups: int = 10):
    """C^2 of ``B`` from ``samples`` draws; SE from ``groups`` equal batches."""
    draws = sample_B_array(spec, samples, rng).astype(float)
    c2 = moments_from_draws(draws).c2
    parts = [moments_from_draws(chunk).c2 for chunk in np.array_split(draws, groups)]
    se = float(np.std(parts, ddof=1) / math.sqrt(groups))
    return c2, se


def fig7(opts: RunOptions):
    rows = []
    for panel, n, w, p, m in fig7_points():
        spec = WindowSpec(n=n, w=w, p=p, m=m)
        c2, se = c2_estimate(spec, opts.samples, opts.spec_rng(spec))
        rows.append({"panel": panel, "n": n, "w": "inf" if w == INF else w, "p": p, "m": m,
                     "c2": c2, "c2_se": se})
    return ["panel", "n", "w", "p", "m", "c2", "c2_se"], rows


LARGE_BUDGET_GEOMETRIES = ((7.5, 0), (13.0, 1), (30.0, 5))
LARGE_BUDGET_WINDOWS = (INF, 10, 8, 7)


def fig8(opts: RunOptions, ks=range(1, 16)):
    rows = []
    for L, N in LARGE_BUDGET_GEOMETRIES:
        for w in LARGE_BUDGET_WINDOWS:
            for k in ks:
                for strat in Strategy:
                    sc = _feasible(lambda: large_budget(k, 2, strat, L=L, N=N, w=w))
                    if sc is None:
                        continue
                    b, method = opts.window(sc.window_spec())
                    u = int(capacity.u_crit(sc, b).value)
                    rows.append({"L_km": L, "N": N, "p": sc.p, "w": "inf" if w == INF else w,
                                 "k": k, "strategy": strat.value, "u_crit": u,
                                 "window_method": method})
    return ["L_km", "N", "p", "w", "k", "strategy", "u_crit", "window_method"], rows


def fig9(opts: RunOptions, us_a=range(2, 16), us_b=range(2, 8)):
    """MST vs users: (a) small budget k=7, analytic; (b) L=7.5 km, w=8, k=2, simulated."""
    rows = []
    panels = (
        ("a", us_a, lambda u, st: small_budget(7, u, st, w=10), False),
        ("b", us_b, lambda u, st: large_budget(2, u, st, L=7.5, N=0, w=8), True),
    )
    for panel, us, make, simulate in panels:
        for u in us:
            for strat in Strategy:
                sc = make(u, strat)
                ev = opts.evaluate(sc)
                row = {"panel": panel, "u": u, "strategy": strat.value,
                       "mst_analytic": ev.mean_sojourn, "mst_analytic_se": ev.mean_sojourn_se,
                       "mst_sim": math.nan, "mst_sim_se": math.nan}
                if simulate and ev.stable:
                    try:
                        rep = dessim.run(dessim.SimConfig(sc, opts.measured, opts.replications, opts.seed))
                        row["mst_sim"], row["mst_sim_se"] = rep.mean_sojourn.mean, rep.mean_sojourn.se
                    except Overloaded:
                        row["mst_sim"] = math.inf
                elif simulate:
                    row["mst_sim"] = math.inf
                rows.append(row)
    return ["panel", "u", "strategy", "mst_analytic", "mst_analytic_se", "mst_sim", "mst_sim_se"], rows


def fig10(opts: RunOptions, us=range(2, 21), ks=range(1, 16)):
    rows = []
    for L, N in LARGE_BUDGET_GEOMETRIES:
        for w in LARGE_BUDGET_WINDOWS:
            make = lambda k, u, st, L=L, N=N, w=w: large_budget(k, u, st, L=L, N=N, w=w)
            for row in _heatmap(make, opts, us, ks):
                rows.append({"L_km": L, "N": N, "w": "inf" if w == INF else w, **row})
    return ["L_km", "N", "w"] + HEATMAP_COLUMNS, rows


def fig_alpha(opts: RunOptions, L0s=None):
    L0s = np.round(np.arange(0.5, 12.01, 0.5), 3) if L0s is None else L0s
    rows = [{"L0_km": float(L0), "alpha_eff_db_per_km": hardware.alpha_eff(float(L0)),
             "fiber_db_per_km": 0.2} for L0 in L0s]
    return ["L0_km", "alpha_eff_db_per_km", "fiber_db_per_km"], rows


FIGURES: dict[str, Callable] = {
    "fig3": fig3,
    "fig4a": fig4a,
    "fig4b": fig4b,
    "fig5": fig5,
    "fig7": fig7,
    "fig8": fig8,
    "fig9": fig9,
    "fig10": fig10,
    "fig11": fig11,
    "alpha": fig_alpha,
}
