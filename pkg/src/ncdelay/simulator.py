"""
FIFO queue with non-preemptive transmission at line rate.

The simulator produces start (Q_n) and departure (D_n) times for a packet
trace under a scheduling policy; the verifiers check the executions against
the arrival curve, the service-curve guarantee and the per-packet bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence

import numpy as np

from .bounds import ServerSpec, classic_bound, improved_bound
from .curves import (
    REL_TOL,
    ConcaveArrivalCurve,
    CumulativeFunction,
    DomainError,
    RateLatencyCurve,
    check_dominates,
    min_plus_convolve,
)

POLICIES = ("greedy", "max_lazy", "jittered")


@dataclass(frozen=True)
class Packet:
    index: int
    arrival: float
    length: float


@dataclass(frozen=True)
class Trace:
    packets: tuple
    L_max: float

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        prev = -math.inf
        for i, p in enumerate(self.packets, start=1):
            if p.index != i:
                raise DomainError(f"packet indices must be 1..N in order, got {p.index} at {i}")
            if not p.length > 0:
                raise DomainError(f"packet {i}: length must be > 0")
            if p.length > self.L_max * (1 + REL_TOL):
                raise DomainError(f"packet {i}: length {p.length} exceeds L_max={self.L_max}")
            if p.arrival < 0 or p.arrival < prev:
                raise DomainError(f"packet {i}: arrivals must be >= 0 and nondecreasing")
            prev = p.arrival

    @classmethod
    def from_arrays(cls, arrivals: Sequence[float], lengths: Sequence[float],
                    L_max: Optional[float] = None) -> "Trace":
        if len(arrivals) != len(lengths):
            raise DomainError("arrivals and lengths differ in size")
        if L_max is None:
            L_max = max(lengths, default=0.0)
        packets = tuple(Packet(i + 1, float(a), float(l))
                        for i, (a, l) in enumerate(zip(arrivals, lengths)))
        return cls(packets, float(L_max))

    def __len__(self):
        return len(self.packets)

    @property
    def arrivals(self) -> np.ndarray:
        return np.array([p.arrival for p in self.packets], dtype=float)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([p.length for p in self.packets], dtype=float)

    def input_function(self) -> CumulativeFunction:
        return CumulativeFunction.staircase(
            [p.arrival for p in self.packets], [p.length for p in self.packets])


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: str = "greedy"
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise DomainError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")


@dataclass(frozen=True)
class SimResult:
    trace: Trace
    starts: tuple
    departures: tuple
    input: CumulativeFunction
    output: CumulativeFunction
    policy: Optional[SchedulerPolicy] = None

    @property
    def responses(self) -> tuple:
        return tuple(d - p.arrival for d, p in zip(self.departures, self.trace.packets))


@dataclass(frozen=True)
class Verdict:
    ok: bool
    witness: Any = None

    def __bool__(self):
        return self.ok


def result_from_schedule(trace: Trace, starts: Sequence[float], server: ServerSpec,
                         policy: Optional[SchedulerPolicy] = None) -> SimResult:
    """Wrap explicit start times into a SimResult (D_n = Q_n + l_n / c)."""
    c = server.c
    starts = tuple(float(q) for q in starts)
    if len(starts) != len(trace):
        raise DomainError("one start time per packet is required")
    departures = tuple(q + p.length / c for q, p in zip(starts, trace.packets))
    for n in range(1, len(starts)):
        if starts[n] < starts[n - 1]:
            raise DomainError(f"FIFO violated: Q_{n + 1} < Q_{n}")
    for q, p in zip(starts, trace.packets):
        if q < p.arrival:
            raise DomainError(f"packet {p.index} starts before it arrives")
    lengths = [p.length for p in trace.packets]
    return SimResult(
        trace=trace,
        starts=starts,
        departures=departures,
        input=trace.input_function(),
        output=CumulativeFunction.line_output(starts, lengths, c),
        policy=policy,
    )


def simulate(trace: Trace, policy: SchedulerPolicy, server: ServerSpec) -> SimResult:
    """Run the FIFO queue.

    greedy starts a packet as soon as it is at the head and the line is
    free; max_lazy waits until the service curve forces it
    (T + bits_before / R); jittered picks uniformly in between.
    """
    R, T, c = server.R, server.T, server.c
    rng = np.random.default_rng(policy.seed) if policy.kind == "jittered" else None
    starts = []
    prev_end = 0.0
    before = 0.0
    for p in trace.packets:
        earliest = max(p.arrival, prev_end)
        if policy.kind == "greedy":
            q = earliest
        else:
            latest = max(earliest, T + before / R)
            if policy.kind == "max_lazy":
                q = latest
            else:
                q = earliest + rng.random() * (latest - earliest)
        starts.append(q)
        prev_end = q + p.length / c
        before += p.length
    return result_from_schedule(trace, starts, server, policy)


def verify_arrival_conformance(trace: Trace, alpha: ConcaveArrivalCurve) -> Verdict:
    """Check sum_{k=m}^{n} l_k <= alpha+(A_n - A_m) for every m <= n."""
    if len(trace) == 0:
        return Verdict(True)
    a = trace.arrivals
    cum = np.concatenate(([0.0], np.cumsum(trace.lengths)))
    m_idx, n_idx = np.triu_indices(len(a))
    lhs = cum[n_idx + 1] - cum[m_idx]
    rhs = alpha.right_limit_many(a[n_idx] - a[m_idx])
    bad = np.nonzero(lhs > rhs + REL_TOL * (1.0 + np.abs(rhs)))[0]
    if bad.size:
        i = bad[np.lexsort((m_idx[bad], n_idx[bad]))[0]]
        return Verdict(False, {"m": int(m_idx[i]) + 1, "n": int(n_idx[i]) + 1,
                               "lhs": float(lhs[i]), "rhs": float(rhs[i])})
    return Verdict(True)


def verify_service_curve(result: SimResult, beta: RateLatencyCurve) -> Verdict:
    """Check O(t) >= (I conv beta)(t) for all t."""
    fluid = min_plus_convolve(result.input, beta)
    extra = [p.arrival for p in result.trace.packets] + list(result.starts) + list(result.departures)
    dom = check_dominates(result.output, fluid, extra)
    if dom.ok:
        return Verdict(True)
    return Verdict(False, {"t": dom.time, "output": dom.upper, "fluid_output": dom.lower})


def verify_start_witness(result: SimResult, beta: RateLatencyCurve) -> Verdict:
    """For every packet n find m <= n with beta(Q_n - A_m) <= sum_{k=m}^{n-1} l_k.

    The witness is the tuple of smallest such m (1-based), ``None`` where
    no m exists.
    """
    n_pk = len(result.trace)
    if n_pk == 0:
        return Verdict(True, ())
    a = result.trace.arrivals
    q = np.asarray(result.starts)
    cum = np.concatenate(([0.0], np.cumsum(result.trace.lengths)))
    witnesses: List[Optional[int]] = []
    for n in range(n_pk):
        m = np.arange(n + 1)
        service = np.maximum(0.0, beta.rate * (q[n] - a[m] - beta.latency))
        backlog = cum[n] - cum[m]
        ok = np.nonzero(service <= backlog + REL_TOL * (1.0 + np.abs(backlog)))[0]
        witnesses.append(int(ok[0]) + 1 if ok.size else None)
    return Verdict(all(w is not None for w in witnesses), tuple(witnesses))


@dataclass
class DelayCheck:
    delta: float
    max_response: Optional[float]
    responses: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    slack: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def attained_fraction(self) -> Optional[float]:
        fr = [r / b for r, b in zip(self.responses, self.bounds) if b > 0 and math.isfinite(b)]
        return max(fr) if fr else None


def check_delay_bounds(result: SimResult, alpha: ConcaveArrivalCurve,
                       server: ServerSpec) -> DelayCheck:
    delta = classic_bound(alpha, server)
    check = DelayCheck(delta=delta, max_response=None)
    for p, r in zip(result.trace.packets, result.responses):
        bound = improved_bound(alpha, server, p.length)
        check.responses.append(r)
        check.bounds.append(bound)
        check.slack.append(bound - r)
        if bound - r < -REL_TOL * delta:
            check.violations.append({"n": p.index, "length": p.length,
                                     "response": r, "bound": bound})
    if check.responses:
        check.max_response = max(check.responses)
    return check


def random_conforming_trace(alpha: ConcaveArrivalCurve, L_max: float, horizon: float,
                            seed: int, max_packets: int = 200) -> Trace:
    """Randomized packet stream that conforms to ``alpha`` by construction.

    Each packet is admitted at the earliest instant at or after its
    candidate time that keeps every window constraint satisfied.
    """
    if alpha.burst < L_max * (1 - REL_TOL):
        raise DomainError(f"need alpha+(0) >= L_max, got {alpha.burst} < {L_max}")
    rng = np.random.default_rng(seed)
    rho = alpha.long_run_rate
    mean_gap = L_max / rho if rho > 0 else max(horizon, 1.0) / 10
    arrivals: List[float] = []
    lengths: List[float] = []
    t = 0.0
    while len(arrivals) < max_packets:
        if rng.random() < 0.5:
            l = L_max
        else:
            l = L_max * (1.0 - rng.random())  # (0, L_max]
        if arrivals and rng.random() < 0.3:
            t += rng.exponential(mean_gap)
        # earliest time respecting all windows ending with this packet
        if arrivals:
            windows = l + np.cumsum(lengths[::-1])[::-1]
            t = max(t, float(np.max(np.asarray(arrivals) + alpha.min_window_many(windows))))
        t = max(t, alpha.min_window(l))
        if not t < horizon:
            break
        arrivals.append(t)
        lengths.append(l)
    return Trace.from_arrays(arrivals, lengths, L_max)
