import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdelay.curves import (
    AffinePiece,
    ConcaveArrivalCurve,
    CumulativeFunction,
    DomainError,
    RateLatencyCurve,
    min_plus_convolve,
    sup_deviation,
    upper_pseudo_inverse,
)
from strategies import (
    GRID,
    brute_alpha,
    brute_convolve,
    brute_sup_deviation,
    concave_pieces,
    latencies,
    rates,
)

bucket = ConcaveArrivalCurve.token_bucket


# -- eval / right_limit -----------------------------------------------------

def test_alpha_is_zero_at_origin():
    assert bucket(4000, 1000).eval(0) == 0


def test_rate_latency_knee_and_ramp():
    beta = RateLatencyCurve(2000, 0.01)
    assert beta.eval(0.01) == 0
    assert beta.eval(1.01) == pytest.approx(2000, rel=1e-12)


@pytest.mark.parametrize("curve", [bucket(1, 1), RateLatencyCurve(1, 0), CumulativeFunction.zero()])
def test_negative_time_rejected(curve):
    with pytest.raises(DomainError):
        curve.eval(-1e-3)


def test_right_limit_of_token_bucket():
    a = bucket(4000, 1000)
    assert a.right_limit(0) == 4000
    assert a.right_limit(2) == 6000
    assert a.eval(2) == 6000


def test_right_limit_adds_jump():
    f = CumulativeFunction([(0, 0, 0, 0), (3, 0, 1500, 0)])
    assert f.eval(3) == 0
    assert f.right_limit(3) == 1500
    assert f.eval(3.5) == 1500


def test_cumulative_rejects_undeclared_discontinuity():
    with pytest.raises(DomainError):
        CumulativeFunction([(0, 0, 0, 0), (1, 5, 0, 0)])


def test_cumulative_rejects_unsorted_times():
    with pytest.raises(DomainError):
        CumulativeFunction([(0, 0, 0, 0), (2, 0, 1, 0), (1, 1, 0, 0)])


# -- normalization ----------------------------------------------------------

def test_dominated_pieces_removed():
    a = ConcaveArrivalCurve.from_pairs([(100, 5), (200, 10), (50, 20), (1000, 1)])
    assert [(p.burst, p.rate) for p in a.pieces] == [(50, 20), (100, 5), (1000, 1)]


def test_negative_burst_rejected():
    with pytest.raises(DomainError):
        AffinePiece(-1, 3)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), extra=st.integers(0, 3))
def test_normalization_idempotent_and_pointwise_identity(seed, extra):
    rng = np.random.default_rng(seed)
    raw = concave_pieces(rng)
    # throw in pieces that are dominated everywhere
    raw += [AffinePiece(p.burst + 10, p.rate + 1) for p in raw[:extra]]
    curve = ConcaveArrivalCurve(tuple(raw))
    assert curve.normalized() == curve
    ts = np.concatenate(([0.0], rng.uniform(0, 50, 200)))
    got = np.array([curve.eval(t) for t in ts])
    np.testing.assert_allclose(got, brute_alpha(raw, ts), rtol=1e-12)


# -- pseudo-inverse ---------------------------------------------------------

def test_pseudo_inverse_examples():
    beta = RateLatencyCurve(2000, 0.01)
    assert upper_pseudo_inverse(beta, 0) == 0.01
    assert upper_pseudo_inverse(beta, 2000) == pytest.approx(1.01, rel=1e-12)
    assert upper_pseudo_inverse(RateLatencyCurve(1, 0), 5) == 5
    with pytest.raises(DomainError):
        upper_pseudo_inverse(beta, -1)


@settings(max_examples=100, deadline=None)
@given(R=rates, T=latencies, x=st.floats(0, 1e5))
def test_pseudo_inverse_characterization(R, T, x):
    beta = RateLatencyCurve(R, T)
    inv = upper_pseudo_inverse(beta, x)
    for s in np.linspace(0, 2 * inv + 1, 257):
        if math.isclose(s, inv, rel_tol=1e-9, abs_tol=1e-12):
            continue
        assert (beta.eval(s) <= x) == (s <= inv)


# -- sup_deviation ----------------------------------------------------------

def test_sup_deviation_examples():
    assert sup_deviation(bucket(4000, 1000), 2000) == (4000, 0.0)
    assert sup_deviation(bucket(0, 2000), 2000) == (0, 0.0)
    dev = sup_deviation(bucket(4000, 1000), 500)
    assert not dev.bounded and math.isinf(dev.value)


def test_sup_deviation_two_pieces_breakpoint():
    a = ConcaveArrivalCurve.from_pairs([(1000, 1500), (4000, 500)])
    dev = sup_deviation(a, 1000)
    assert dev.t_star == pytest.approx(3.0)
    assert dev.value == pytest.approx(5500 - 3000)


def test_sup_deviation_plateau_picks_smallest_maximizer():
    # rate equals R after t=2: every t >= 2 attains the supremum
    a = ConcaveArrivalCurve.from_pairs([(100, 300), (300, 200)])
    dev = sup_deviation(a, 200)
    assert dev.t_star == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), slack=st.floats(1.0, 3.0))
def test_right_limit_sup_equals_plain_sup(seed, slack):
    """sup(alpha+(t) - Rt) == sup(alpha(t) - Rt) == sup_deviation, on a grid
    holding every breakpoint."""
    rng = np.random.default_rng(seed)
    pieces = concave_pieces(rng, grid=GRID)
    curve = ConcaveArrivalCurve(tuple(pieces))
    R = max(curve.long_run_rate * slack, 1.0)
    t_max = 400 * GRID + 1
    dev = sup_deviation(curve, R)
    for right in (True, False):
        oracle = brute_sup_deviation(pieces, R, t_max, right)
        assert math.isclose(dev.value, oracle, rel_tol=1e-9)


# -- min-plus convolution ---------------------------------------------------

def test_convolve_single_jump():
    f = CumulativeFunction.staircase([0], [3000])
    F = min_plus_convolve(f, RateLatencyCurve(2000, 0.01))
    assert F.eval(0.005) == 0
    assert F.eval(0.01) == 0
    assert F.eval(0.51) == pytest.approx(1000)
    assert F.eval(1.51) == pytest.approx(3000)
    assert F.eval(10) == pytest.approx(3000)
    assert F.times == pytest.approx((0, 0.01, 1.51))


def test_convolve_zero_input():
    F = min_plus_convolve(CumulativeFunction.zero(), RateLatencyCurve(5, 1))
    assert F.total == 0 and F.eval(100) == 0


def test_convolve_two_jumps_matches_grid():
    events = [(0.0, 1000.0, 0.0), (5.0, 1000.0, 0.0)]
    f = CumulativeFunction.build(events)
    F = min_plus_convolve(f, RateLatencyCurve(1000, 0))
    assert [(b.time, b.slope) for b in F.breakpoints] == [(0, 1000), (1, 0), (5, 1000), (6, 0)]
    ts = np.arange(0, 8 * 1024 + 1) / 1024
    s_grid = np.arange(0, 8 * 1024 + 1) / 1024
    oracle = brute_convolve(events, 1000, 0, ts[::64], s_grid)
    np.testing.assert_allclose(F.eval_many(ts[::64]), oracle, rtol=1e-9, atol=1e-9)


def test_convolve_rejects_nonzero_start():
    f = CumulativeFunction([(0, 5, 0, 0)])
    with pytest.raises(DomainError):
        min_plus_convolve(f, RateLatencyCurve(1, 0))


def random_events(rng, n_max=5):
    """(time, jump, slope) on a dyadic grid so the brute-force grid is exact."""
    n = int(rng.integers(1, n_max + 1))
    times = np.sort(rng.choice(np.arange(1, 200), size=n - 1, replace=False)) * GRID
    times = np.concatenate(([0.0], times))
    events = []
    for t in times:
        jump = float(rng.choice([0.0, rng.integers(1, 3000)]))
        slope = float(rng.choice([0.0, rng.integers(1, 4000)]))
        events.append((float(t), jump, slope))
    events[-1] = (events[-1][0], events[-1][1], 0.0)
    return events


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_convolution_properties(seed):
    rng = np.random.default_rng(seed)
    f = CumulativeFunction.build(random_events(rng))
    beta = RateLatencyCurve(float(rng.integers(1, 3000)), float(rng.integers(0, 64)) * GRID)
    F = min_plus_convolve(f, beta)
    ts = np.sort(rng.uniform(0, 20, 300))
    vals = F.eval_many(ts)
    assert np.all(np.diff(vals) >= -1e-9)
    assert all(F.eval(t) <= f.right_limit(t) + 1e-9 for t in ts)
    assert all(F.eval(t) <= beta.eval(t) + f.values[0] + 1e-9 for t in ts)


def test_convolution_vs_brute_force_small_instances():
    rng = np.random.default_rng(7)
    s_grid = np.arange(0, 100_000) * GRID / 16
    for _ in range(20):
        events = random_events(rng)
        f = CumulativeFunction.build(events)
        beta = RateLatencyCurve(float(rng.integers(100, 3000)), float(rng.integers(0, 64)) * GRID)
        F = min_plus_convolve(f, beta)
        ts = np.unique(rng.integers(0, 100_000, 12)) * GRID / 16
        oracle = brute_convolve(events, beta.rate, beta.latency, ts, s_grid)
        np.testing.assert_allclose(F.eval_many(ts), oracle, rtol=1e-9, atol=1e-9)


def test_first_reach_snaps_and_inverts_ramp():
    f = CumulativeFunction([(0, 0, 0, 2000), (1, 2000, 0, 0)])
    assert f.first_reach(1000) == pytest.approx(0.5)
    assert f.first_reach(2000) == 1.0
    g = CumulativeFunction([(0, 0, 4000, 0)])
    assert g.first_reach(4000) == 0.0
    with pytest.raises(DomainError):
        g.first_reach(5000)


def test_line_output_back_to_back():
    O = CumulativeFunction.line_output([0.0, 0.1], [1000, 1000], 10000)
    assert O.eval(0.05) == pytest.approx(500)
    assert O.eval(0.2) == pytest.approx(2000)
    assert O.total == pytest.approx(2000)
    with pytest.raises(DomainError):
        CumulativeFunction.line_output([0.0, 0.05], [1000, 1000], 10000)
