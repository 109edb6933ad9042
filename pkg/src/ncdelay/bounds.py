"""Delay bounds for a FIFO rate-latency element with a known line rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .curves import (
    REL_TOL,
    UNBOUNDED,
    ConcaveArrivalCurve,
    DomainError,
    RateLatencyCurve,
    sup_deviation,
)


@dataclass(frozen=True)
class ServerSpec:
    """Rate-latency service guarantee plus the physical line rate ``c``."""

    beta: RateLatencyCurve
    line_rate: float

    def __post_init__(self):
        if not (self.line_rate > 0 and math.isfinite(self.line_rate)):
            raise DomainError(f"line rate must be > 0, got {self.line_rate!r}")
        if self.line_rate < self.beta.rate * (1 - REL_TOL):
            raise DomainError(
                f"line rate c={self.line_rate} is below the service rate R={self.beta.rate}")

    @classmethod
    def from_params(cls, R: float, T: float, c: float) -> "ServerSpec":
        return cls(RateLatencyCurve(R, T), c)

    @property
    def R(self) -> float:
        return self.beta.rate

    @property
    def T(self) -> float:
        return self.beta.latency

    @property
    def c(self) -> float:
        return self.line_rate

    @property
    def length_gain(self) -> float:
        """1/R - 1/c: seconds saved per bit of the packet of interest."""
        if self.line_rate == self.beta.rate:
            return 0.0
        return 1.0 / self.beta.rate - 1.0 / self.line_rate


@dataclass(frozen=True)
class FlowSpec:
    name: str
    min_packet_length: float
    max_packet_length: float

    def __post_init__(self):
        if not 0 < self.min_packet_length <= self.max_packet_length:
            raise DomainError(
                f"flow {self.name!r}: need 0 < L_min <= L_max, got "
                f"{self.min_packet_length}, {self.max_packet_length}")


@dataclass
class BoundReport:
    delta: float
    t_prime: Optional[float]
    delta_l: dict = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return not math.isinf(self.delta)

    def improvement(self, length: float) -> float:
        return self.delta - self.delta_l[length]


def classic_bound(alpha: ConcaveArrivalCurve, server: ServerSpec) -> float:
    """Horizontal deviation T + sup_t (alpha(t)/R - t); ``inf`` if unbounded."""
    dev = sup_deviation(alpha, server.R)
    if not dev.bounded:
        return UNBOUNDED
    return server.T + dev.value / server.R


def improved_bound(alpha: ConcaveArrivalCurve, server: ServerSpec, length: float) -> float:
    """Per-packet bound for a packet of ``length`` bits.

    The classic bound shrinks by l (1/R - 1/c) because the last l bits are
    pushed at line rate instead of at the guaranteed rate.
    """
    if not (length >= 0 and length <= alpha.burst * (1 + REL_TOL)):
        raise DomainError(
            f"packet length {length} outside [0, alpha+(0)={alpha.burst}]")
    delta = classic_bound(alpha, server)
    if math.isinf(delta):
        return UNBOUNDED
    return delta - length * server.length_gain


def bound_report(alpha: ConcaveArrivalCurve, server: ServerSpec,
                 lengths: Iterable[float] = ()) -> BoundReport:
    dev = sup_deviation(alpha, server.R)
    report = BoundReport(classic_bound(alpha, server), dev.t_star)
    for l in lengths:
        report.delta_l[l] = improved_bound(alpha, server, l)
    return report


def per_flow_bounds(alpha_aggregate: ConcaveArrivalCurve, server: ServerSpec,
                    flows: Iterable[FlowSpec]) -> dict:
    # the bound decreases with the length, so the shortest packet is the worst case
    return {f.name: improved_bound(alpha_aggregate, server, f.min_packet_length) for f in flows}


def drr_service_curve(n_flows: int, c: float, L: float, Q: float) -> ServerSpec:
    """Rate-latency curve offered to one of ``n_flows`` DRR flows with equal
    maximum packet length ``L`` and quantum ``Q``.

    R = Q c / sum(Q) and T = sum_{j != i}(L + Q)/c + L (1/R - 1/c).
    """
    if int(n_flows) != n_flows or n_flows < 1:
        raise DomainError(f"n_flows must be a positive integer, got {n_flows!r}")
    for name, v in (("c", c), ("L", L), ("Q", Q)):
        if not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{name} must be > 0, got {v!r}")
    n = int(n_flows)
    R = Q * c / (n * Q)
    if n == 1:
        return ServerSpec(RateLatencyCurve(c, 0.0), c)
    T = (n - 1) * (L + Q) / c + L * (1.0 / R - 1.0 / c)
    return ServerSpec(RateLatencyCurve(R, T), c)
