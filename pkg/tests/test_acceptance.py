"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (also repeated in the terminal
summary) and then asserts the same condition.
"""
import math
import time

import numpy as np
import pytest

import conftest
from oracles import window_moments_forward
from qcs import INF, MomentPair, Strategy, large_budget, small_budget
from qcs.capacity import l_crit, l_crit_bound, u_crit
from qcs.dessim import SimConfig, run
from qcs.experiments import RunOptions, fig4b, fig5, fig7_points
from qcs.hardware import optimize_N, p_success
from qcs.queueing import QueueInputs, evaluate, wait_mg1, wait_mgs_approx, wait_mms
from qcs.service import affine_moments, c2_service, service_moments
from qcs.window import WindowSpec, dp_oracle, exact_moments, sample_moments, survival_inf_multi

pytestmark = pytest.mark.acceptance


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_u_crit_small_budget():
    t0 = time.perf_counter()
    seq = u_crit(small_budget(7, 2, Strategy.SEQUENTIAL)).value
    par = u_crit(small_budget(7, 2, Strategy.PARALLEL)).value
    dt = time.perf_counter() - t0
    ok = seq == 14 and par == 13 and dt < 1.0
    report(1, ok, f"k=7 sequential u_crit={seq:g} (want 14), parallel={par:g} (want 13), {dt:.3f}s")


def test_criterion_02_fig3_shape():
    t0 = time.perf_counter()
    par = {k: u_crit(small_budget(k, 2, Strategy.PARALLEL)).value for k in range(8, 41)}
    seq = {k: u_crit(small_budget(k, 2, Strategy.SEQUENTIAL)).value for k in (4, 16, 64, 256)}
    ratios = [seq[4 * k] / seq[k] for k in (4, 16, 64)]
    dt = time.perf_counter() - t0
    constant = len(set(par.values())) == 1
    ok = constant and all(1.8 <= r <= 2.2 for r in ratios) and dt < 1.0
    report(2, ok, f"parallel u_crit for k=8..40: {sorted(set(par.values()))}; "
                  f"sequential ratios {[round(r, 3) for r in ratios]}, {dt:.3f}s")


def test_criterion_03_hardware():
    t0 = time.perf_counter()
    cases = ((7.5, 0), (13.0, 1), (18.0, 2), (30.0, 5))
    got_N = [optimize_N(L) for L, _ in cases]
    ps = [p_success(L, N) for L, N in zip((c[0] for c in cases), got_N)]
    dt = time.perf_counter() - t0
    n_ok = got_N == [c[1] for c in cases]
    p_ok = all(0.68 <= p <= 0.72 for p in ps)
    report(3, n_ok and p_ok and dt < 1.0,
           f"N={got_N} ({'ok' if n_ok else 'mismatch'}); p={[round(p, 4) for p in ps]} "
           f"in [0.68, 0.72]: {'ok' if p_ok else 'no'}, {dt:.3f}s")


def test_criterion_04_window_triangle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    specs = []
    while len(specs) < 60:
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        w = INF if rng.random() < 0.2 else int(rng.integers(1, 6))
        p = 1.0 if rng.random() < 0.15 else float(rng.uniform(0.2, 0.95))
        if w != INF and w * m < n:
            continue
        specs.append(WindowSpec(n, w, p, m))
    closed_err = 0.0
    closed_count = 0
    covered = 0
    mc_rng = np.random.default_rng(7)
    for spec in specs:
        exact = dp_oracle(spec)
        if spec.p == 1.0 or spec.infinite:
            cf = exact_moments(spec)
            closed_err = max(closed_err, rel(exact.m1, cf.m1), rel(exact.m2, cf.m2))
            closed_count += 1
        mc = sample_moments(spec, 100_000, mc_rng)
        if mc.se1 == 0.0:
            hit = mc.m1 == pytest.approx(exact.m1, rel=1e-12) and mc.m2 == pytest.approx(exact.m2, rel=1e-12)
        else:
            hit = abs(mc.m1 - exact.m1) <= 3 * mc.se1 and abs(mc.m2 - exact.m2) <= 3 * mc.se2
        covered += hit
    frac = covered / len(specs)
    dt = time.perf_counter() - t0
    ok = closed_err <= 1e-10 and frac >= 0.95 and dt < 120
    report(4, ok, f"{len(specs)} specs; closed-form vs DP max rel err {closed_err:.1e} on {closed_count}; "
                  f"MC within 3 SE on {frac:.1%}, {dt:.1f}s")


def test_criterion_05_infinite_series():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(1, 5):
        for m in range(1, 5):
            for p in (0.3, 0.5, 0.7, 0.9):
                spec = WindowSpec(n, INF, p, m)
                a = survival_inf_multi(spec).moments()
                b = dp_oracle(spec)
                worst = max(worst, rel(a.m1, b.m1), rel(a.m2, b.m2))
    curve_err = 0.0
    for m in range(1, 5):
        for p in (0.3, 0.5, 0.7, 0.9):
            vals = survival_inf_multi(WindowSpec(1, INF, p, m)).values
            b = np.arange(vals.size)
            ref = (1 - p) ** (m * b)
            # repeated products lose about one ulp per batch
            err = np.abs(vals - ref) / (ref * (b + 1) * np.finfo(float).eps)
            curve_err = max(curve_err, float(err.max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and curve_err <= 4.0 and dt < 30
    report(5, ok, f"series vs DP max rel err {worst:.1e}; n=1 curve err {curve_err:.2f} x (b+1) eps, {dt:.2f}s")


def test_criterion_06_queueing_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst_mm1 = 0.0
    worst_ll = 0.0
    for _ in range(100):
        mu = float(rng.uniform(1e-3, 10.0))
        lam = float(rng.uniform(0.01, 0.99)) * mu
        expo = affine_moments(0.0, 1.0, MomentPair(1 / mu, 2 / mu**2))
        worst_mm1 = max(worst_mm1, rel(wait_mms(lam, mu, 1).mean_wait, wait_mg1(lam, expo).mean_wait))
        s = int(rng.integers(1, 40))
        lam_s = float(rng.uniform(0.01, 0.99)) * s * mu
        ll = wait_mgs_approx(QueueInputs(lam_s, s, expo)).mean_wait
        worst_ll = max(worst_ll, rel(ll, wait_mms(lam_s, mu, s).mean_wait))
    md1 = wait_mg1(1e-3, affine_moments(110.0, 0.0, MomentPair(1.0, 1.0))).mean_wait
    dt = time.perf_counter() - t0
    ok = worst_mm1 <= 1e-12 and worst_ll <= 1e-12 and round(md1, 3) == 6.798 and dt < 1.0
    report(6, ok, f"M/M/1 vs M/G/1 {worst_mm1:.1e}; Lee-Longton C2=1 vs M/M/s {worst_ll:.1e}; "
                  f"M/D/1 wait {md1:.4f}, {dt:.3f}s")


def test_criterion_07_des_vs_analytics():
    t0 = time.perf_counter()
    sc = small_budget(7, 5, Strategy.PARALLEL)
    rep = run(SimConfig(sc, measured_requests=10_000, replications=10, master_seed=0))
    ev = evaluate(sc)
    wait_ok = abs(rep.mean_wait.mean - ev.wait.mean_wait) <= 3 * rep.mean_wait.se
    soj_ok = abs(rep.mean_sojourn.mean - ev.mean_sojourn) <= 3 * rep.mean_sojourn.se
    little = rep.little_residual()
    little_ok = abs(little.mean) <= 3 * little.se
    dt = time.perf_counter() - t0
    ok = wait_ok and soj_ok and little_ok and dt < 120
    report(7, ok, f"wait {rep.mean_wait} vs {ev.wait.mean_wait:.3f}; sojourn {rep.mean_sojourn} vs "
                  f"{ev.mean_sojourn:.2f}; L - lambda W = {little}, {dt:.1f}s")


def test_criterion_08_approximation_quality():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for k in (2, 3):
        for u in range(2, 40):
            sc = small_budget(k, u, Strategy.SEQUENTIAL)
            ev = evaluate(sc)
            if not 0.4 <= ev.rho <= 0.8:
                continue
            rep = run(SimConfig(sc, measured_requests=200_000, replications=30, master_seed=0))
            gap = (ev.wait.mean_wait - rep.mean_wait.mean) / rep.mean_wait.mean
            ok &= abs(gap) <= 0.10
            parts.append(f"k={k},u={u},rho={ev.rho:.3f}: {gap:+.1%}")
    dt = time.perf_counter() - t0
    ok = ok and len(parts) >= 2 and dt < 300
    report(8, ok, "; ".join(parts) + f", {dt:.0f}s")


def test_criterion_09_variability_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = -math.inf
    done = 0
    while done < 100:
        k = int(rng.integers(1, 8))
        strat = Strategy.SEQUENTIAL if rng.random() < 0.5 else Strategy.PARALLEL
        n = int(rng.integers(1, 8))
        m = strat.batch_size(k)
        w = INF if rng.random() < 0.3 else int(rng.integers(-(-n // m), 10))
        N = int(rng.integers(0, 6))
        L0 = float(rng.uniform(1, 12))  # hop lengths beyond ~12 km leave p near zero
        sc = large_budget(k, 3, strat, L=L0 * (N + 1), N=N, w=w, n=n)
        if sc.p < 0.05:
            continue
        done += 1
        b = dp_oracle(sc.window_spec())
        worst = max(worst, c2_service(service_moments(sc, b)) - b.c2)
    grid = [(n, w, p, m) for _, n, w, p, m in fig7_points()]
    for n in range(1, 11):
        for m in range(1, 7):
            for p in (0.5, 0.75, 0.95):
                for w in (n, n + 2, INF):
                    grid.append((n, w, p, m))
    mc_rng = np.random.default_rng(10)
    c2_max = 0.0
    for n, w, p, m in grid:
        c2_max = max(c2_max, sample_moments(WindowSpec(n, w, p, m), 10_000, mc_rng).c2)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and c2_max < 1.0 and dt < 300
    report(9, ok, f"max c2_service - C2_B = {worst:.2e} over 100 scenarios; "
                  f"max C2_B = {c2_max:.3f} over {len(grid)} grid points, {dt:.1f}s")


def test_criterion_10_critical_distance():
    t0 = time.perf_counter()
    opts = RunOptions(samples=100_000, seed=0)
    _, rows = fig5(opts, strategy=Strategy.SEQUENTIAL)
    bound_ok = all(r["L_crit"] <= r["bound"] for r in rows)
    table = {(r["N"], r["u"]): r["L_crit"] for r in rows}
    Ns = sorted({r["N"] for r in rows})
    us = sorted({r["u"] for r in rows})
    decreasing = True
    for N in Ns:
        vals = [table[(N, u)] for u in us]
        for a, b in zip(vals, vals[1:]):
            if a > 0 and not a > b:
                decreasing = False
            if a == 0 and b != 0:
                decreasing = False
    at10 = table[(5, 10)] > table[(10, 10)]
    at2 = [table[(N, 2)] for N in (0, 1, 2, 5)]
    increasing = all(a < b for a, b in zip(at2, at2[1:]))
    dt = time.perf_counter() - t0
    ok = bound_ok and decreasing and at10 and increasing and dt < 60
    report(10, ok, f"bound held: {bound_ok}; decreasing in u: {decreasing}; "
                   f"u=10 N=5 {table[(5, 10)]:.2f} > N=10 {table[(10, 10)]:.2f}: {at10}; "
                   f"u=2 over N=0,1,2,5 {[round(v, 2) for v in at2]}, {dt:.1f}s")


def test_criterion_11_fig4b_regimes():
    t0 = time.perf_counter()
    opts = RunOptions(samples=100_000, seed=0)
    _, rows = fig4b(opts, us=range(2, 11), ks=[2])
    labels = {r["u"]: r["region"] for r in rows}
    want = {u: "par_better" for u in range(2, 6)}
    want[6] = "p_only"
    want.update({u: "none" for u in range(7, 11)})
    dt = time.perf_counter() - t0
    ok = labels == want and dt < 300
    report(11, ok, f"k=2 regions {[labels[u] for u in sorted(labels)]} for u=2..10, {dt:.1f}s")
