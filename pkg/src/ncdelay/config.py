"""
Scenario and trace files.

Both are UTF-8 JSON.  Scenario values are given in the units declared in
their ``units`` block and normalized to bits / seconds / bits-per-second on
load.  1 KB is 1000 bytes (8000 bits); Mbps and Gbps are decimal.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .bounds import FlowSpec, ServerSpec, drr_service_curve
from .curves import AffinePiece, ConcaveArrivalCurve, DomainError, RateLatencyCurve
from .simulator import POLICIES, Trace

DATA_UNITS = {"bits": 1.0, "bytes": 8.0, "KB": 8000.0, "MB": 8e6}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
RATE_UNITS = {"bps": 1.0, "Kbps": 1e3, "kbps": 1e3, "Mbps": 1e6, "Gbps": 1e9}

TOP_KEYS = {"name", "alpha", "server", "lengths", "flows", "sim", "units", "L_max", "l"}
SIM_KEYS = {"policy", "seeds", "horizon", "L_max", "max_packets", "include_worst_case"}


class ConfigError(ValueError):
    """Invalid scenario or trace file; ``key`` locates the offending entry."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class Units:
    data: str = "bits"
    time: str = "s"
    rate: str = "bps"

    def __post_init__(self):
        for value, table, what in ((self.data, DATA_UNITS, "data"),
                                   (self.time, TIME_UNITS, "time"),
                                   (self.rate, RATE_UNITS, "rate")):
            if value not in table:
                raise ConfigError(f"unknown {what} unit {value!r}; expected one of {sorted(table)}",
                                  key=what)

    def bits(self, x: float) -> float:
        return float(x) * DATA_UNITS[self.data]

    def seconds(self, x: float) -> float:
        return float(x) * TIME_UNITS[self.time]

    def bps(self, x: float) -> float:
        return float(x) * RATE_UNITS[self.rate]

    def to_data(self, bits: float) -> float:
        return bits / DATA_UNITS[self.data]

    def to_time(self, seconds: float) -> float:
        return seconds / TIME_UNITS[self.time]

    def to_rate(self, bps: float) -> float:
        return bps / RATE_UNITS[self.rate]


@dataclass
class SimConfig:
    policies: tuple = ("greedy",)
    seeds: int = 0
    horizon: float = 0.0
    L_max: Optional[float] = None
    max_packets: int = 200
    include_worst_case: bool = False


@dataclass
class ScenarioConfig:
    name: str
    alpha: ConcaveArrivalCurve
    server: ServerSpec
    lengths: list = field(default_factory=list)
    flows: list = field(default_factory=list)
    sim: Optional[SimConfig] = None
    units: Units = field(default_factory=Units)
    L_max: Optional[float] = None
    l: Optional[float] = None
    source: Optional[str] = None


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key=key.split(".")[-1])
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite", key=key.split(".")[-1])
    return float(value)


def _object(value: Any, key: str, allowed: set) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected an object", key=key.split(".")[-1])
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ConfigError(f"{key}: unknown key {unknown[0]!r}", key=unknown[0])
    return value


def _require(d: dict, name: str, where: str):
    if name not in d:
        raise ConfigError(f"{where}: missing required key {name!r}", key=where.split(".")[-1])
    return d[name]


def _parse_server(raw: Any, units: Units) -> ServerSpec:
    raw = _object(raw, "server", {"R", "T", "c", "drr", "cbs"})
    kinds = [k for k in ("drr", "cbs") if k in raw]
    if len(kinds) > 1 or (kinds and set(raw) - set(kinds)):
        raise ConfigError("server: give either R/T/c, a drr block or a cbs block", key="server")
    if "drr" in raw:
        d = _object(raw["drr"], "server.drr", {"n", "c", "L", "Q"})
        n = _require(d, "n", "server.drr")
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError("server.drr.n: expected an integer", key="n")
        L = units.bits(_number(_require(d, "L", "server.drr"), "server.drr.L"))
        Q = units.bits(_number(d["Q"], "server.drr.Q")) if "Q" in d else L
        c = units.bps(_number(_require(d, "c", "server.drr"), "server.drr.c"))
        return drr_service_curve(n, c, L, Q)
    if "cbs" in raw:
        d = _object(raw["cbs"], "server.cbs", {"idle_slope", "T", "c"})
        c = units.bps(_number(_require(d, "c", "server.cbs"), "server.cbs.c"))
        slope = _number(_require(d, "idle_slope", "server.cbs"), "server.cbs.idle_slope")
        if not 0 < slope <= 1:
            raise ConfigError("server.cbs.idle_slope: fraction of c in (0, 1]", key="idle_slope")
        T = units.seconds(_number(d.get("T", 0.0), "server.cbs.T"))
        return ServerSpec(RateLatencyCurve(slope * c, T), c)
    R = units.bps(_number(_require(raw, "R", "server"), "server.R"))
    T = units.seconds(_number(_require(raw, "T", "server"), "server.T"))
    c = units.bps(_number(_require(raw, "c", "server"), "server.c"))
    return ServerSpec(RateLatencyCurve(R, T), c)


def _parse_sim(raw: Any, units: Units) -> SimConfig:
    raw = _object(raw, "sim", SIM_KEYS)
    policy = raw.get("policy", "greedy")
    policies = (policy,) if isinstance(policy, str) else tuple(policy)
    for p in policies:
        if p not in POLICIES:
            raise ConfigError(f"sim.policy: unknown policy {p!r}", key="policy")
    seeds = raw.get("seeds", 0)
    if isinstance(seeds, bool) or not isinstance(seeds, int) or seeds < 0:
        raise ConfigError("sim.seeds: expected a non-negative integer", key="seeds")
    max_packets = raw.get("max_packets", 200)
    if isinstance(max_packets, bool) or not isinstance(max_packets, int) or max_packets < 1:
        raise ConfigError("sim.max_packets: expected a positive integer", key="max_packets")
    horizon = units.seconds(_number(raw.get("horizon", 0.0), "sim.horizon"))
    L_max = units.bits(_number(raw["L_max"], "sim.L_max")) if "L_max" in raw else None
    return SimConfig(policies, seeds, horizon, L_max, max_packets,
                     bool(raw.get("include_worst_case", False)))


def parse_config(doc: Any, name: str = "scenario") -> ScenarioConfig:
    doc = _object(doc, "config", TOP_KEYS)
    units_raw = _object(doc.get("units", {}), "units", {"data", "time", "rate"})
    units = Units(**units_raw)

    alpha_raw = _object(_require(doc, "alpha", "config"), "alpha", {"pieces"})
    pieces_raw = _require(alpha_raw, "pieces", "alpha")
    if not isinstance(pieces_raw, list) or not pieces_raw:
        raise ConfigError("alpha.pieces: expected a non-empty list", key="pieces")
    pieces = []
    for i, p in enumerate(pieces_raw):
        p = _object(p, f"alpha.pieces[{i}]", {"burst", "rate"})
        b = units.bits(_number(_require(p, "burst", "alpha.pieces"), "alpha.pieces.burst"))
        r = units.bps(_number(_require(p, "rate", "alpha.pieces"), "alpha.pieces.rate"))
        pieces.append(AffinePiece(b, r))

    try:
        alpha = ConcaveArrivalCurve(tuple(pieces))
        server = _parse_server(_require(doc, "server", "config"), units)
    except DomainError as exc:
        raise ConfigError(str(exc), key="server") from exc

    lengths = [units.bits(_number(l, "lengths")) for l in doc.get("lengths", [])]
    flows = []
    for i, f in enumerate(doc.get("flows", [])):
        f = _object(f, f"flows[{i}]", {"name", "L_min", "L_max"})
        try:
            flows.append(FlowSpec(
                str(f.get("name", f"flow{i + 1}")),
                units.bits(_number(_require(f, "L_min", "flows"), "flows.L_min")),
                units.bits(_number(_require(f, "L_max", "flows"), "flows.L_max"))))
        except DomainError as exc:
            raise ConfigError(str(exc), key="L_min") from exc

    return ScenarioConfig(
        name=str(doc.get("name", name)),
        alpha=alpha,
        server=server,
        lengths=lengths,
        flows=flows,
        sim=_parse_sim(doc["sim"], units) if "sim" in doc else None,
        units=units,
        L_max=units.bits(_number(doc["L_max"], "L_max")) if "L_max" in doc else None,
        l=units.bits(_number(doc["l"], "l")) if "l" in doc else None,
    )


def _key_line(text: str, key: Optional[str]) -> Optional[int]:
    if not key:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if not m:
        return None
    return text.count("\n", 0, m.start()) + 1


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    try:
        cfg = parse_config(doc, name=path.stem)
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _key_line(text, exc.key)
        raise
    cfg.source = str(path)
    return cfg


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

def trace_to_dict(trace: Trace, schedule=None) -> dict:
    doc = {
        "L_max": trace.L_max,
        "packets": [{"A": p.arrival, "l": p.length} for p in trace.packets],
    }
    if schedule is not None:
        doc["schedule"] = [{"Q": q, "D": d} for q, d in schedule]
    return doc


def write_trace(path, trace: Trace, schedule=None) -> None:
    Path(path).write_text(json.dumps(trace_to_dict(trace, schedule), indent=2) + "\n",
                          encoding="utf-8")


def trace_from_dict(doc: Any):
    """Return ``(trace, schedule_or_None)``."""
    doc = _object(doc, "trace", {"L_max", "packets", "schedule"})
    packets = _require(doc, "packets", "trace")
    if not isinstance(packets, list):
        raise ConfigError("trace.packets: expected a list", key="packets")
    arrivals, lengths = [], []
    for p in packets:
        p = _object(p, "trace.packets", {"A", "l"})
        arrivals.append(_number(_require(p, "A", "trace.packets"), "trace.packets.A"))
        lengths.append(_number(_require(p, "l", "trace.packets"), "trace.packets.l"))
    L_max = _number(doc["L_max"], "trace.L_max") if "L_max" in doc else None
    try:
        trace = Trace.from_arrays(arrivals, lengths, L_max)
    except DomainError as exc:
        raise ConfigError(f"trace: {exc}", key="packets") from exc
    schedule = None
    if "schedule" in doc:
        sched = doc["schedule"]
        if not isinstance(sched, list) or len(sched) != len(trace):
            raise ConfigError("trace.schedule: one {Q, D} entry per packet", key="schedule")
        schedule = [(_number(s["Q"], "schedule.Q"), _number(s["D"], "schedule.D"))
                    for s in (_object(s, "trace.schedule", {"Q", "D"}) for s in sched)]
    return trace, schedule


def read_trace(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    try:
        return trace_from_dict(doc)
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _key_line(text, exc.key)
        raise
