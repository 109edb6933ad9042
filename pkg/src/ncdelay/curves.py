"""
Piecewise-linear curves for network calculus.

Units are bits and seconds throughout, rates in bits/second.  Three curve
families are provided:

* ``ConcaveArrivalCurve``: alpha(t) = min_i (b_i + r_i t) for t > 0, alpha(0) = 0
* ``RateLatencyCurve``: beta(t) = max(0, R (t - T))
* ``CumulativeFunction``: left-continuous, wide-sense increasing, piecewise
  linear with jumps (input/output processes of a server)

plus the min-plus convolution of a cumulative function with a rate-latency
curve and the horizontal-deviation supremum used by the delay bounds.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

REL_TOL = 1e-9
UNBOUNDED = math.inf


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


def tol(value: float) -> float:
    """Hybrid absolute/relative slack used by every inequality check."""
    return REL_TOL * (1.0 + abs(value))


def approx_le(a: float, b: float) -> bool:
    return a <= b + tol(b)


def approx_eq(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * (1.0 + max(abs(a), abs(b)))


def is_unbounded(x: float) -> bool:
    return math.isinf(x)


def _check_time(t: float) -> None:
    if t < 0 or math.isnan(t):
        raise DomainError(f"time must be >= 0, got {t!r}")


# ---------------------------------------------------------------------------
# Arrival curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffinePiece:
    burst: float
    rate: float

    def __post_init__(self):
        if not (self.burst >= 0 and math.isfinite(self.burst)):
            raise DomainError(f"burst must be finite and >= 0, got {self.burst!r}")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise DomainError(f"rate must be finite and >= 0, got {self.rate!r}")

    def __call__(self, t: float) -> float:
        return self.burst + self.rate * t


def _lower_envelope(pieces: Iterable[AffinePiece]) -> tuple:
    """Keep only the pieces that are the minimum somewhere on t >= 0.

    Result is sorted by rate descending, so bursts come out increasing.
    """
    by_rate = {}
    for p in pieces:
        if p.rate not in by_rate or p.burst < by_rate[p.rate].burst:
            by_rate[p.rate] = p
    ordered = sorted(by_rate.values(), key=lambda p: -p.rate)

    hull: list = []
    for p in ordered:
        # steeper pieces with no smaller intercept never win on t >= 0
        while hull and p.burst <= hull[-1].burst:
            hull.pop()
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            x_ab = (b.burst - a.burst) / (a.rate - b.rate)
            x_ap = (p.burst - a.burst) / (a.rate - p.rate)
            if x_ap <= x_ab:
                hull.pop()
            else:
                break
        hull.append(p)
    return tuple(hull)


@dataclass(frozen=True)
class ConcaveArrivalCurve:
    """Concave arrival curve as the minimum of affine pieces.

    The pieces are normalized on construction: dominated pieces are dropped
    and the survivors sorted by decreasing rate.
    """

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise DomainError("an arrival curve needs at least one affine piece")
        pieces = tuple(p if isinstance(p, AffinePiece) else AffinePiece(*p) for p in pieces)
        object.__setattr__(self, "pieces", _lower_envelope(pieces))

    @classmethod
    def token_bucket(cls, burst: float, rate: float) -> "ConcaveArrivalCurve":
        return cls((AffinePiece(burst, rate),))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "ConcaveArrivalCurve":
        return cls(tuple(AffinePiece(float(b), float(r)) for b, r in pairs))

    def normalized(self) -> "ConcaveArrivalCurve":
        return ConcaveArrivalCurve(self.pieces)

    @property
    def burst(self) -> float:
        """alpha+(0), the instantaneous burst allowance."""
        return self.pieces[0].burst

    @property
    def long_run_rate(self) -> float:
        return self.pieces[-1].rate

    @property
    def breakpoints(self) -> tuple:
        """Times t > 0 where the active piece changes."""
        return tuple(
            (b.burst - a.burst) / (a.rate - b.rate)
            for a, b in zip(self.pieces, self.pieces[1:])
        )

    def eval(self, t: float) -> float:
        _check_time(t)
        if t == 0:
            return 0.0
        return min(p(t) for p in self.pieces)

    def right_limit(self, t: float) -> float:
        _check_time(t)
        return min(p(t) for p in self.pieces)

    def right_limit_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        b = np.array([p.burst for p in self.pieces])
        r = np.array([p.rate for p in self.pieces])
        return np.min(b[:, None] + r[:, None] * ts.ravel()[None, :], axis=0).reshape(ts.shape)

    def min_window(self, bits: float) -> float:
        """Smallest u >= 0 with alpha+(u) >= bits (inf if never reached)."""
        u = 0.0
        for p in self.pieces:
            if p.burst < bits:
                if p.rate == 0:
                    return math.inf
                u = max(u, (bits - p.burst) / p.rate)
        return u


    def min_window_many(self, bits) -> np.ndarray:
        y = np.asarray(bits, dtype=float)
        out = np.zeros(y.shape)
        for p in self.pieces:
            need = y > p.burst
            if p.rate == 0:
                out = np.where(need, np.inf, out)
            else:
                out = np.where(need, np.maximum(out, (y - p.burst) / p.rate), out)
        return out

# ---------------------------------------------------------------------------
# Service curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateLatencyCurve:
    rate: float
    latency: float = 0.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise DomainError(f"service rate must be > 0, got {self.rate!r}")
        if not (self.latency >= 0 and math.isfinite(self.latency)):
            raise DomainError(f"latency must be >= 0, got {self.latency!r}")

    @property
    def R(self) -> float:
        return self.rate

    @property
    def T(self) -> float:
        return self.latency

    def eval(self, t: float) -> float:
        _check_time(t)
        return max(0.0, self.rate * (t - self.latency))

    right_limit = eval

    def upper_pseudo_inverse(self, y: float) -> float:
        """sup{s >= 0 : beta(s) <= y}, which is y/R + T."""
        if y < 0 or math.isnan(y):
            raise DomainError(f"pseudo-inverse argument must be >= 0, got {y!r}")
        return y / self.rate + self.latency


def upper_pseudo_inverse(beta: RateLatencyCurve, y: float) -> float:
    return beta.upper_pseudo_inverse(y)


# ---------------------------------------------------------------------------
# Cumulative functions
# ---------------------------------------------------------------------------

class Breakpoint(NamedTuple):
    time: float
    value: float  # left limit, i.e. excludes the jump at `time`
    jump: float
    slope: float


class CumulativeFunction:
    """Left-continuous, wide-sense increasing piecewise-linear function.

    ``value`` at a breakpoint is the left limit: bits counted strictly
    before that instant.  The jump is added right after it.
    """

    __slots__ = ("times", "values", "jumps", "slopes")

    def __init__(self, breakpoints: Iterable[Sequence[float]]):
        bps = [Breakpoint(*map(float, bp)) for bp in breakpoints]
        if not bps:
            raise DomainError("a cumulative function needs at least one breakpoint")
        if bps[0].time != 0:
            raise DomainError("the first breakpoint must be at t=0")
        for a, b in zip(bps, bps[1:]):
            if not b.time > a.time:
                raise DomainError(f"breakpoint times must increase strictly ({a.time} then {b.time})")
            expected = a.value + a.jump + a.slope * (b.time - a.time)
            if not approx_eq(expected, b.value):
                raise DomainError(
                    f"discontinuity not declared as a jump at t={b.time}: "
                    f"{expected} vs {b.value}")
        for bp in bps:
            if bp.jump < 0 or bp.slope < 0:
                raise DomainError(f"jumps and slopes must be >= 0 (at t={bp.time})")
        self.times = tuple(bp.time for bp in bps)
        self.values = tuple(bp.value for bp in bps)
        self.jumps = tuple(bp.jump for bp in bps)
        self.slopes = tuple(bp.slope for bp in bps)

    @classmethod
    def build(cls, events: Iterable[Sequence[float]], start: float = 0.0) -> "CumulativeFunction":
        """Build from sorted ``(time, jump, slope_after)`` events.

        Events at the same instant are merged (jumps add up, the last slope
        wins); values are obtained by integration.
        """
        merged: list = []
        for t, jump, slope in events:
            if merged and t < merged[-1][0]:
                raise DomainError("events must be sorted by time")
            if merged and t == merged[-1][0]:
                merged[-1][1] += jump
                merged[-1][2] = slope
            else:
                merged.append([t, jump, slope])
        if not merged or merged[0][0] > 0:
            merged.insert(0, [0.0, 0.0, 0.0])
        bps = []
        value = start
        prev = None
        for t, jump, slope in merged:
            if prev is not None:
                value = value + prev[1] + prev[2] * (t - prev[0])
            bps.append((t, value, jump, slope))
            prev = (t, jump, slope)
        return cls(bps)

    @classmethod
    def zero(cls) -> "CumulativeFunction":
        return cls([(0.0, 0.0, 0.0, 0.0)])

    @classmethod
    def staircase(cls, times: Sequence[float], sizes: Sequence[float]) -> "CumulativeFunction":
        """Packetized input: ``sizes[k]`` bits arrive at once at ``times[k]``."""
        return cls.build((t, s, 0.0) for t, s in zip(times, sizes))

    @classmethod
    def line_output(cls, starts: Sequence[float], lengths: Sequence[float], c: float) -> "CumulativeFunction":
        """Output process for non-preemptive transmission at line rate ``c``.

        Bits leave progressively while a packet is on the line, so the
        output rises with slope ``c`` on every [Q_n, Q_n + l_n / c].
        """
        events = []
        prev_end = None
        for q, l in zip(starts, lengths):
            if prev_end is not None:
                if q < prev_end - tol(prev_end):
                    raise DomainError(f"transmissions overlap at t={q}")
                if q <= prev_end:
                    # back-to-back; keep the line busy
                    events.pop()
                    prev_end = q + l / c
                    events.append((max(prev_end, events[-1][0]), 0.0, 0.0))
                    continue
            events.append((q, 0.0, c))
            prev_end = q + l / c
            events.append((prev_end, 0.0, 0.0))
        return cls.build(events)

    @property
    def breakpoints(self) -> tuple:
        return tuple(Breakpoint(*bp) for bp in zip(self.times, self.values, self.jumps, self.slopes))

    @property
    def total(self) -> float:
        if self.slopes[-1] > 0:
            return math.inf
        return self.values[-1] + self.jumps[-1]

    def eval(self, t: float) -> float:
        _check_time(t)
        k = bisect.bisect_left(self.times, t)
        if k < len(self.times) and self.times[k] == t:
            return self.values[k]
        k -= 1
        return self.values[k] + self.jumps[k] + self.slopes[k] * (t - self.times[k])

    def right_limit(self, t: float) -> float:
        _check_time(t)
        k = bisect.bisect_right(self.times, t) - 1
        return self.values[k] + self.jumps[k] + self.slopes[k] * (t - self.times[k])

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        times = np.asarray(self.times)
        values = np.asarray(self.values)
        idx = np.searchsorted(times, ts, side="left")
        k = np.clip(idx - 1, 0, None)
        out = values[k] + np.asarray(self.jumps)[k] + np.asarray(self.slopes)[k] * (ts - times[k])
        hit = (idx < len(times)) & (times[np.clip(idx, 0, len(times) - 1)] == ts)
        out[hit] = values[idx[hit]]
        return out

    def first_reach(self, y: float) -> float:
        """inf{t >= 0 : right_limit(t) >= y}; values within tolerance of a
        breakpoint snap onto it."""
        n = len(self.times)
        for k in range(n):
            b = self.times[k]
            w = self.values[k] + self.jumps[k]
            if w >= y - tol(y):
                return b
            s = self.slopes[k]
            if s <= 0:
                continue
            if k + 1 < n:
                end_value = self.values[k + 1]
                if approx_eq(end_value, y):
                    return self.times[k + 1]
                if end_value < y:
                    continue
            return b + (y - w) / s
        raise DomainError(f"cumulative function never reaches {y} bits")

    def simplified(self) -> "CumulativeFunction":
        """Drop breakpoints that neither jump nor change the slope."""
        keep = [0]
        for k in range(1, len(self.times)):
            if self.jumps[k] == 0 and self.slopes[k] == self.slopes[keep[-1]]:
                continue
            keep.append(k)
        return CumulativeFunction(
            [(self.times[k], self.values[k], self.jumps[k], self.slopes[k]) for k in keep])

    def __repr__(self):
        return f"CumulativeFunction({list(self.breakpoints)!r})"

    def __eq__(self, other):
        if not isinstance(other, CumulativeFunction):
            return NotImplemented
        return (self.times, self.values, self.jumps, self.slopes) == (
            other.times, other.values, other.jumps, other.slopes)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def eval(curve, t: float) -> float:  # noqa: A001 - mirrors the curve method
    return curve.eval(t)


def right_limit(curve, t: float) -> float:
    return curve.right_limit(t)


class Deviation(NamedTuple):
    """sup_{t>=0} (alpha+(t) - R t) and its smallest maximizer.

    ``value`` is ``inf`` and ``t_star`` ``None`` when the supremum diverges.
    """

    value: float
    t_star: Optional[float]

    @property
    def bounded(self) -> bool:
        return self.t_star is not None


def sup_deviation(alpha: ConcaveArrivalCurve, rate: float) -> Deviation:
    if not rate > 0:
        raise DomainError(f"rate must be > 0, got {rate!r}")
    if alpha.long_run_rate > rate:
        return Deviation(UNBOUNDED, None)
    candidates = [(0.0, alpha.burst)]
    for t in alpha.breakpoints:
        candidates.append((t, alpha.right_limit(t) - rate * t))
    best = max(v for _, v in candidates)
    # ties resolved toward 0
    t_star = next(t for t, v in candidates if v >= best - tol(best))
    return Deviation(best, t_star)


def _rate_envelope(f: CumulativeFunction, rate: float) -> list:
    """Breakpoints (time, value, slope) of f convolved with the pure-rate curve."""
    out = []
    n = len(f.times)
    g = f.values[0]
    for k in range(n):
        b, v, j, s = f.times[k], f.values[k], f.jumps[k], f.slopes[k]
        end = f.times[k + 1] if k + 1 < n else math.inf
        g = min(g, v)
        w = v + j
        if s >= rate:
            pieces = [(b, g, rate)]
        elif g >= w:
            pieces = [(b, g, s)]
        else:
            cross = b + (w - g) / (rate - s)
            if cross < end:
                pieces = [(b, g, rate), (cross, w + s * (cross - b), s)]
            else:
                pieces = [(b, g, rate)]
        out.extend(pieces)
        if end < math.inf:
            t0, g0, s0 = pieces[-1]
            g = g0 + s0 * (end - t0)
    return out


def min_plus_convolve(f: CumulativeFunction, beta: RateLatencyCurve) -> CumulativeFunction:
    """inf_{0<=s<=t} f(s) + beta(t-s) for a cumulative f with f(0) = 0."""
    if not isinstance(f, CumulativeFunction):
        raise DomainError("min_plus_convolve expects a CumulativeFunction")
    if not approx_eq(f.values[0], 0.0):
        raise DomainError("input must be 0 at t=0")
    env = _rate_envelope(f, beta.rate)
    shift = beta.latency
    if shift > 0:
        pts = [(0.0, f.values[0], 0.0)] + [(t + shift, v, s) for t, v, s in env]
    else:
        pts = env
    # collapse equal times produced by floating rounding
    clean = []
    for t, v, s in pts:
        if clean and t <= clean[-1][0]:
            clean[-1] = (clean[-1][0], clean[-1][1], s)
            continue
        if clean and clean[-1][2] == s:
            continue
        clean.append((t, v, s))
    # recompute values by integration to keep the function exactly continuous
    bps = []
    value = clean[0][1]
    for i, (t, _, s) in enumerate(clean):
        if i:
            pt, _, ps = clean[i - 1]
            value = value + ps * (t - pt)
        bps.append((t, value, 0.0, s))
    return CumulativeFunction(bps)


class Domination(NamedTuple):
    ok: bool
    time: Optional[float] = None
    upper: Optional[float] = None
    lower: Optional[float] = None


def check_dominates(upper: CumulativeFunction, lower: CumulativeFunction,
                    extra_times: Iterable[float] = ()) -> Domination:
    """Check upper(t) >= lower(t) at every breakpoint of either function.

    Both are piecewise linear, so checking left values and right limits at
    the union of breakpoints is exhaustive.
    """
    times = sorted(set(upper.times) | set(lower.times) | {t for t in extra_times if t >= 0})
    ts = np.asarray(times)
    for getter in ("eval", "right_limit"):
        if getter == "eval":
            u, lo = upper.eval_many(ts), lower.eval_many(ts)
        else:
            u = np.array([upper.right_limit(t) for t in times])
            lo = np.array([lower.right_limit(t) for t in times])
        bad = np.nonzero(u < lo - REL_TOL * (1.0 + np.abs(lo)))[0]
        if bad.size:
            i = int(bad[0])
            return Domination(False, times[i], float(u[i]), float(lo[i]))
    return Domination(True)
