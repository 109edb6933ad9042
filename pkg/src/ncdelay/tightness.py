"""
Worst-case execution trace attaining the per-packet delay bound.

The construction: pick the smallest window t' maximizing alpha+(t) - R t,
feed a fluid input min(alpha, alpha+(t')) through a packetizer so that the
packet of interest is the last one and arrives at t', then serve packet i
from Q_i = T + L(i-1)/R at line rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

from .bounds import ServerSpec, improved_bound
from .curves import (
    REL_TOL,
    ConcaveArrivalCurve,
    CumulativeFunction,
    DomainError,
    approx_eq,
    approx_le,
    check_dominates,
    min_plus_convolve,
    sup_deviation,
    tol,
)


class InfeasibleScenario(DomainError):
    """The scenario violates a hypothesis of the tightness construction."""


class ConstructionError(RuntimeError):
    """An internal invariant of the worst-case construction failed."""


@dataclass(frozen=True)
class PacketLengthSequence:
    lengths: tuple
    L_max: float

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(l) for l in self.lengths))
        for l in self.lengths:
            if not 0 < l <= self.L_max * (1 + REL_TOL):
                raise DomainError(f"packet length {l} not in (0, L_max={self.L_max}]")

    def __len__(self):
        return len(self.lengths)

    def __iter__(self):
        return iter(self.lengths)

    @property
    def cumulative(self) -> tuple:
        """L(j) = l_1 + ... + l_j."""
        out, acc = [], 0.0
        for l in self.lengths:
            acc += l
            out.append(acc)
        return tuple(out)

    @property
    def total(self) -> float:
        return math.fsum(self.lengths)


@dataclass(frozen=True)
class TightnessScenario:
    alpha: ConcaveArrivalCurve
    server: ServerSpec
    l: float
    L_max: float

    def validate(self) -> None:
        if self.alpha.burst < self.L_max * (1 - REL_TOL):
            raise InfeasibleScenario(
                f"hypothesis alpha+(0) >= L_max violated: alpha+(0)={self.alpha.burst}, "
                f"L_max={self.L_max}")
        if not 0 < self.l <= self.L_max:
            raise InfeasibleScenario(
                f"packet of interest must satisfy 0 < l <= L_max, got l={self.l}")
        if not sup_deviation(self.alpha, self.server.R).bounded:
            raise InfeasibleScenario(
                "delay bound is unbounded: long-run arrival rate exceeds R")


@dataclass(frozen=True)
class WorstCaseTrace:
    arrivals: tuple
    lengths: PacketLengthSequence
    t_prime: float
    starts: tuple
    departures: tuple
    fluid_input: CumulativeFunction
    packetized_input: CumulativeFunction
    output: CumulativeFunction
    fluid_output: CumulativeFunction
    bound: float

    @property
    def packets(self) -> List[Tuple[float, float]]:
        return list(zip(self.arrivals, self.lengths))

    @property
    def schedule(self) -> List[Tuple[float, float]]:
        return list(zip(self.starts, self.departures))

    @property
    def response_time(self) -> float:
        """Response time of the packet of interest (the last one)."""
        return self.departures[-1] - self.arrivals[-1]


def critical_time(alpha: ConcaveArrivalCurve, server: ServerSpec) -> float:
    dev = sup_deviation(alpha, server.R)
    if not dev.bounded:
        raise InfeasibleScenario("delay bound is unbounded: long-run arrival rate exceeds R")
    return dev.t_star


def fluid_input(alpha: ConcaveArrivalCurve, t_prime: float) -> CumulativeFunction:
    """min(alpha(t), alpha+(t')) as a cumulative function."""
    cap = alpha.right_limit(t_prime)
    if cap <= 0:
        return CumulativeFunction.zero()
    b0 = alpha.burst
    if b0 >= cap:
        return CumulativeFunction([(0.0, 0.0, cap, 0.0)])

    starts = (0.0,) + alpha.breakpoints
    bps = []
    for k, piece in enumerate(alpha.pieces):
        t0 = starts[k]
        v0 = alpha.right_limit(t0)
        end = starts[k + 1] if k + 1 < len(starts) else math.inf
        value_left = 0.0 if k == 0 else v0
        jump = b0 if k == 0 else 0.0
        reach = t0 + (cap - v0) / piece.rate if piece.rate > 0 else math.inf
        # alpha increases strictly before t', so the cap is hit at t' itself
        if t_prime > 0 and approx_eq(reach, t_prime):
            reach = t_prime
        if reach <= end or approx_eq(reach, end):
            reach = min(reach, end)
            if reach > t0:
                bps.append((t0, value_left, jump, piece.rate))
                bps.append((reach, cap, 0.0, 0.0))
            else:
                bps.append((t0, value_left, cap - value_left, 0.0))
            return CumulativeFunction(bps)
        bps.append((t0, value_left, jump, piece.rate))
    raise ConstructionError("fluid input never reaches alpha+(t')")


def packet_lengths(total: float, l: float, L_max: float) -> PacketLengthSequence:
    """Lengths summing to ``total`` with the packet of interest ``l`` last and
    every other packet at L_max except the one right before it."""
    if not 0 < l <= L_max:
        raise DomainError(f"need 0 < l <= L_max, got l={l}, L_max={L_max}")
    if not approx_le(L_max, total):
        raise DomainError(f"need L_max <= total, got L_max={L_max}, total={total}")
    rest = total - l
    if rest <= tol(total):
        return PacketLengthSequence((l,), L_max)
    q = rest / L_max
    k = round(q)
    if not abs(q - k) <= REL_TOL * max(1.0, q):
        k = math.ceil(q)
    n = k + 1
    lengths = [L_max] * (n - 2)
    second_last = total - (n - 2) * L_max - l
    second_last = min(second_last, L_max)
    lengths += [second_last, l]
    return PacketLengthSequence(tuple(lengths), L_max)


def packetize(fluid: CumulativeFunction, lengths: PacketLengthSequence) -> tuple:
    """Arrival instants of the packetized input: packet j arrives when the
    fluid right-limit first reaches L(j)."""
    total = fluid.total
    if not approx_eq(total, lengths.total):
        raise DomainError(f"mass mismatch: fluid carries {total} bits, packets {lengths.total}")
    cum = lengths.cumulative
    arrivals = [fluid.first_reach(min(y, total)) for y in cum]
    for a, b in zip(arrivals, arrivals[1:]):
        if b < a:
            raise ConstructionError("packetizer produced decreasing arrival times")
    return tuple(arrivals)


def worst_case_schedule(lengths: PacketLengthSequence, server: ServerSpec) -> Tuple[tuple, tuple]:
    """Start Q_i = T + L(i-1)/R, finish D_i = Q_i + l_i/c."""
    R, T, c = server.R, server.T, server.c
    starts, ends = [], []
    before = 0.0
    for l in lengths:
        starts.append(T + before / R)
        ends.append(starts[-1] + l / c)
        before += l
    for i in range(len(starts) - 1):
        if ends[i] > starts[i + 1]:
            if ends[i] - starts[i + 1] > tol(starts[i + 1]):
                raise ConstructionError("line transmissions overlap")
            ends[i] = starts[i + 1]
    return tuple(starts), tuple(ends)


def build_worst_case(scenario: TightnessScenario) -> WorstCaseTrace:
    scenario.validate()
    alpha, server, l = scenario.alpha, scenario.server, scenario.l

    t_prime = critical_time(alpha, server)
    fluid = fluid_input(alpha, t_prime)
    lengths = packet_lengths(alpha.right_limit(t_prime), l, scenario.L_max)
    arrivals = list(packetize(fluid, lengths))
    if not approx_eq(arrivals[-1], t_prime):
        raise ConstructionError(
            f"packet of interest arrives at {arrivals[-1]}, expected t'={t_prime}")
    arrivals[-1] = t_prime
    arrivals = tuple(arrivals)

    starts, ends = worst_case_schedule(lengths, server)
    for a, q in zip(arrivals, starts):
        if q < a - tol(a):
            raise ConstructionError(f"non-causal schedule: start {q} before arrival {a}")

    packetized = CumulativeFunction.staircase(arrivals, lengths.lengths)
    output = CumulativeFunction.line_output(starts, lengths.lengths, server.c)
    fluid_out = min_plus_convolve(packetized, server.beta)
    dom = check_dominates(output, fluid_out, arrivals + starts + ends)
    if not dom.ok:
        raise ConstructionError(
            f"output below fluid output at t={dom.time}: {dom.upper} < {dom.lower}")

    bound = improved_bound(alpha, server, l)
    achieved = ends[-1] - arrivals[-1]
    if not math.isclose(achieved, bound, rel_tol=REL_TOL, abs_tol=0.0):
        raise ConstructionError(f"achieved response {achieved} differs from bound {bound}")

    return WorstCaseTrace(
        arrivals=arrivals,
        lengths=lengths,
        t_prime=t_prime,
        starts=starts,
        departures=ends,
        fluid_input=fluid,
        packetized_input=packetized,
        output=output,
        fluid_output=fluid_out,
        bound=bound,
    )
