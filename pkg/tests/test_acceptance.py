"""
Exit criteria.  Each test prints one PASS/FAIL line; the lines are repeated
in the "acceptance criteria" section of the pytest summary.

    pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest

from conftest import record
from ncdelay.bounds import ServerSpec, classic_bound, drr_service_curve, improved_bound
from ncdelay.curves import (
    ConcaveArrivalCurve,
    CumulativeFunction,
    RateLatencyCurve,
    min_plus_convolve,
    sup_deviation,
)
from ncdelay.simulator import (
    POLICIES,
    SchedulerPolicy,
    Trace,
    check_delay_bounds,
    random_conforming_trace,
    result_from_schedule,
    simulate,
    verify_arrival_conformance,
    verify_start_witness,
    verify_service_curve,
)
from ncdelay.tightness import TightnessScenario, build_worst_case
from strategies import GRID, brute_convolve, brute_sup_deviation, concave_pieces, random_curve

# Published per-hop improvements at c = 1 Gbps, microseconds.
CBS_1G = {"A": (0.60, 11992.0, 8.0), "B": (0.15, 11504.0, 66.0)}
CBS_100M_INFORMATIONAL = {"A": 98.0, "B": 736.0}


def rel_err(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_drr_closed_forms():
    start = time.perf_counter()
    c, L = 1e6, 1000.0
    worst = 0.0
    for n in (2, 4, 8, 16, 100):
        server = drr_service_curve(n, c, L, L)
        alpha = ConcaveArrivalCurve.token_bucket(L, server.R)
        delta = classic_bound(alpha, server)
        imp = delta - improved_bound(alpha, server, L)
        worst = max(worst, rel_err(delta, (4 * n - 3) * L / c), rel_err(imp, (n - 1) * L / c),
                    rel_err(imp / delta, (n - 1) / (4 * n - 3)))
        if n == 100:
            ratio_100 = imp / delta
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and 0.244 <= ratio_100 <= 0.250 and elapsed < 1.0
    record(1, ok, f"DRR max rel err {worst:.2e} (<=1e-12), ratio n=100 {ratio_100:.4f} "
                  f"in [0.244,0.250], {elapsed * 1e3:.1f} ms")
    assert ok


def test_criterion_2_cbs_improvements():
    lines, ok = [], True
    for cls, (slope, l, target_us) in CBS_1G.items():
        server = ServerSpec(RateLatencyCurve(slope * 1e9, 0.0), 1e9)
        alpha = ConcaveArrivalCurve.token_bucket(l, 0.0)
        imp_us = (classic_bound(alpha, server) - improved_bound(alpha, server, l)) * 1e6
        ok &= abs(imp_us - target_us) <= 0.02 * target_us
        lines.append(f"{cls}: {imp_us:.2f} us vs {target_us} us")
    info = []
    for cls, (slope, l, _) in CBS_1G.items():
        server = ServerSpec(RateLatencyCurve(slope * 1e8, 0.0), 1e8)
        imp_us = l * server.length_gain * 1e6
        info.append(f"{cls}@100Mbps {imp_us:.1f} us (published {CBS_100M_INFORMATIONAL[cls]}, "
                    f"informational)")
    record(2, ok, "; ".join(lines) + " (+-2%); " + "; ".join(info))
    assert ok


def random_tightness_scenario(rng):
    alpha = random_curve(rng)
    R = alpha.long_run_rate * rng.uniform(1.0, 3.0) + rng.uniform(0.1, 10)
    c = R if rng.random() < 0.1 else R * rng.uniform(1.0, 20.0)
    server = ServerSpec.from_params(R, rng.uniform(0.0, 2.0), c)
    L_max = alpha.burst * rng.uniform(0.05, 1.0)
    l = L_max * rng.uniform(0.01, 1.0)
    return TightnessScenario(alpha, server, l, L_max)


def test_criterion_3_tightness_attainment():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures = []
    for i in range(200):
        sc = random_tightness_scenario(rng)
        wc = build_worst_case(sc)
        bound = improved_bound(sc.alpha, sc.server, sc.l)
        trace = Trace.from_arrays(wc.arrivals, wc.lengths.lengths, sc.L_max)
        res = result_from_schedule(trace, wc.starts, sc.server)
        if not (math.isclose(wc.response_time, bound, rel_tol=1e-9)
                and verify_arrival_conformance(trace, sc.alpha)
                and verify_service_curve(res, sc.server.beta)):
            failures.append(i)
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 10.0
    record(3, ok, f"200 worst-case traces, {len(failures)} failures, {elapsed:.2f} s (<10 s)")
    assert ok


@pytest.fixture(scope="module")
def sweep():
    """10^3 seeded (trace, policy) executions, gated on both verifiers."""
    start = time.perf_counter()
    runs = []
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        alpha = random_curve(rng)
        R = alpha.long_run_rate * rng.uniform(1.0, 2.5) + rng.uniform(0.1, 10)
        c = R if rng.random() < 0.1 else R * rng.uniform(1.0, 10.0)
        server = ServerSpec.from_params(R, rng.uniform(0.0, 1.5), c)
        L_max = alpha.burst * rng.uniform(0.2, 1.0)
        trace = random_conforming_trace(alpha, L_max, horizon=20.0, seed=seed, max_packets=60)
        policy = SchedulerPolicy(POLICIES[seed % 3], seed)
        res = simulate(trace, policy, server)
        gated = bool(verify_arrival_conformance(trace, alpha)) and bool(
            verify_service_curve(res, server.beta))
        runs.append((alpha, server, res, gated))
    return runs, time.perf_counter() - start


def test_criterion_4_soundness_sweep(sweep):
    runs, setup = sweep
    start = time.perf_counter()
    violations = gated = packets = 0
    not_improving = 0
    for alpha, server, res, ok in runs:
        if not ok:
            continue
        gated += 1
        check = check_delay_bounds(res, alpha, server)
        violations += len(check.violations)
        packets += len(check.responses)
        delta = check.delta
        if server.c > server.R:
            not_improving += sum(1 for p, b in zip(res.trace.packets, check.bounds)
                                 if p.length > 0 and not b < delta)
    elapsed = setup + time.perf_counter() - start
    ok = violations == 0 and not_improving == 0 and gated > 0 and elapsed < 60.0
    record(4, ok, f"{gated}/1000 runs passed the gate, {packets} packets, {violations} "
                  f"violations, {not_improving} non-improving bounds, {elapsed:.1f} s (<60 s)")
    assert ok


def test_criterion_5_oracles(sweep):
    rng = np.random.default_rng(55)
    worst_sup = 0.0
    for _ in range(100):
        pieces = concave_pieces(rng, grid=GRID)
        alpha = ConcaveArrivalCurve(tuple(pieces))
        R = max(alpha.long_run_rate * rng.uniform(1.0, 3.0), 1.0)
        dev = sup_deviation(alpha, R)
        for right in (True, False):
            oracle = brute_sup_deviation(pieces, R, 400 * GRID + 1, right)
            worst_sup = max(worst_sup, rel_err(dev.value, oracle))

    worst_conv = 0.0
    s_grid = np.arange(0, 100_000) * GRID / 16
    for _ in range(100):
        n = int(rng.integers(1, 6))
        times = np.concatenate(([0.0], np.sort(rng.choice(np.arange(1, 200), n - 1,
                                                          replace=False)) * GRID))
        events = [(float(t), float(rng.integers(0, 3000)), float(rng.integers(0, 4000)))
                  for t in times]
        events[-1] = (events[-1][0], events[-1][1], 0.0)
        f = CumulativeFunction.build(events)
        beta = RateLatencyCurve(float(rng.integers(100, 3000)), float(rng.integers(0, 64)) * GRID)
        ts = np.unique(rng.integers(0, 100_000, 8)) * GRID / 16
        got = min_plus_convolve(f, beta).eval_many(ts)
        oracle = brute_convolve(events, beta.rate, beta.latency, ts, s_grid)
        err = np.abs(got - oracle) / np.maximum(np.abs(oracle), 1.0)
        worst_conv = max(worst_conv, float(err.max()))

    runs, _ = sweep
    witness_missing = sum(1 for _, server, res, ok in runs
                        if ok and not verify_start_witness(res, server.beta))
    gated = sum(1 for *_, ok in runs if ok)
    ok = worst_sup <= 1e-9 and worst_conv <= 1e-9 and witness_missing == 0
    record(5, ok, f"right-limit sup max rel err {worst_sup:.1e}, convolution max rel err "
                  f"{worst_conv:.1e} (<=1e-9), start witness missing in {witness_missing}/{gated} runs")
    assert ok


def test_criterion_6_consistency_identities():
    rng = np.random.default_rng(606)
    mismatches = 0
    for _ in range(1000):
        alpha = random_curve(rng)
        R = alpha.long_run_rate * rng.uniform(0.5, 3.0) + 1.0
        T = rng.uniform(0, 3)
        server = ServerSpec.from_params(R, T, R * rng.uniform(1.0, 50.0))
        same = ServerSpec.from_params(R, T, R)
        l = alpha.burst * rng.random()
        delta = classic_bound(alpha, server)
        a = improved_bound(alpha, server, 0.0)
        b = improved_bound(alpha, same, l)
        for got, want in ((a, delta), (b, classic_bound(alpha, same))):
            if math.isinf(want):
                mismatches += not math.isinf(got)
            elif abs(got - want) > 1e-9 * (1 + abs(want)):
                mismatches += 1
    ok = mismatches == 0
    record(6, ok, f"improved(l=0)==classic and improved(c=R)==classic on 1000 random inputs, "
                  f"{mismatches} mismatches")
    assert ok
