"""Scenario runs behind the ``ncdelay`` subcommands."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

from .bounds import BoundReport, ServerSpec, bound_report, drr_service_curve, per_flow_bounds
from .config import ScenarioConfig
from .curves import ConcaveArrivalCurve, RateLatencyCurve
from .simulator import (
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
from .tightness import TightnessScenario, build_worst_case

BOUND_COLUMNS = ("scenario", "length_bits", "delta_s", "delta_l_s", "improvement_s", "improvement_pct")
SIM_COLUMNS = ("scenario", "seed", "policy", "packets", "conforming", "service_curve",
               "start_witness", "max_response_s", "max_fraction")
LENGTH_CLASSES = 4
SLACK_BINS = 10


class BoundViolation(RuntimeError):
    """A verified execution exceeded its bound; carries the witnesses."""

    def __init__(self, message, witnesses):
        super().__init__(message)
        self.witnesses = witnesses


class GateFailure(RuntimeError):
    """A user-supplied trace or schedule failed a verifier."""

    def __init__(self, message, verdicts):
        super().__init__(message)
        self.verdicts = verdicts


@dataclass
class RunReport:
    scenario: str
    bounds: BoundReport
    flows: dict = field(default_factory=dict)
    trace_summary: Optional[dict] = None
    sim_stats: Optional[dict] = None
    verdicts: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    columns: tuple = BOUND_COLUMNS


def fmt(x) -> str:
    """Locale-free, round-trippable number formatting for CSV cells."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isinf(x):
            return "unbounded"
        return repr(x)
    return str(x)


def to_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _bound_rows(name: str, rep: BoundReport) -> list:
    rows = []
    for l, dl in rep.delta_l.items():
        if rep.bounded:
            imp = rep.delta - dl
            pct = 100.0 * imp / rep.delta if rep.delta > 0 else 0.0
        else:
            imp = pct = None
        rows.append((name, float(l), rep.delta, dl, imp, pct))
    return rows


def _lengths_of_interest(cfg: ScenarioConfig) -> list:
    out = []
    for l in list(cfg.lengths) + [f.min_packet_length for f in cfg.flows]:
        if l not in out:
            out.append(l)
    return out


def run_bound(cfg: ScenarioConfig) -> RunReport:
    rep = bound_report(cfg.alpha, cfg.server, _lengths_of_interest(cfg))
    flows = per_flow_bounds(cfg.alpha, cfg.server, cfg.flows) if cfg.flows else {}
    return RunReport(cfg.name, rep, flows=flows, rows=_bound_rows(cfg.name, rep))


def _tightness_scenario(cfg: ScenarioConfig) -> TightnessScenario:
    L_max = cfg.L_max if cfg.L_max is not None else cfg.alpha.burst
    l = cfg.l if cfg.l is not None else (cfg.lengths[0] if cfg.lengths else L_max)
    return TightnessScenario(cfg.alpha, cfg.server, l, L_max)


def run_tightness(cfg: ScenarioConfig):
    """Return ``(report, worst_case_trace, trace)``; raises InfeasibleScenario."""
    scenario = _tightness_scenario(cfg)
    wc = build_worst_case(scenario)
    trace = Trace.from_arrays(wc.arrivals, wc.lengths.lengths, scenario.L_max)
    result = result_from_schedule(trace, wc.starts, cfg.server)
    verdicts = {
        "arrival_conformance": verify_arrival_conformance(trace, cfg.alpha),
        "service_curve": verify_service_curve(result, cfg.server.beta),
        "start_witness": verify_start_witness(result, cfg.server.beta),
    }
    check = check_delay_bounds(result, cfg.alpha, cfg.server)
    verdicts["delay_bounds"] = check.ok
    rep = bound_report(cfg.alpha, cfg.server, [scenario.l])
    summary = {
        "packets": len(trace),
        "t_prime": wc.t_prime,
        "l": scenario.l,
        "L_max": scenario.L_max,
        "achieved": wc.response_time,
        "bound": wc.bound,
        "attained": math.isclose(wc.response_time, wc.bound, rel_tol=1e-9),
    }
    report = RunReport(cfg.name, rep, trace_summary=summary, verdicts=verdicts,
                       rows=_bound_rows(cfg.name, rep))
    return report, wc, trace


def _length_class(length: float, L_max: float) -> int:
    k = math.ceil(length / L_max * LENGTH_CLASSES) - 1
    return min(max(k, 0), LENGTH_CLASSES - 1)


def run_simulate(cfg: ScenarioConfig, seeds: Optional[int] = None,
                 user_trace: Optional[Trace] = None, user_schedule=None) -> RunReport:
    """Run the verifier-gated simulation campaign.

    Raises GateFailure when a user-supplied trace/schedule fails a verifier
    and BoundViolation when a gated execution exceeds its bound.
    """
    sim = cfg.sim
    policies = sim.policies if sim else ("greedy",)
    n_seeds = seeds if seeds is not None else (sim.seeds if sim else 0)
    horizon = sim.horizon if sim else 0.0
    max_packets = sim.max_packets if sim else 200
    L_max = (sim.L_max if sim and sim.L_max is not None else
             cfg.L_max if cfg.L_max is not None else cfg.alpha.burst)
    alpha, server = cfg.alpha, cfg.server

    runs = []  # (seed, policy, result)
    verdicts = {}
    if user_trace is not None:
        conf = verify_arrival_conformance(user_trace, alpha)
        verdicts["arrival_conformance"] = conf
        if not conf:
            raise GateFailure("supplied trace does not conform to the arrival curve", verdicts)
        if user_schedule is not None:
            res = result_from_schedule(user_trace, [q for q, _ in user_schedule], server)
            sc = verify_service_curve(res, server.beta)
            verdicts["schedule_service_curve"] = sc
            if not sc:
                raise GateFailure("supplied schedule violates the service curve", verdicts)
            runs.append(("file", "file", res))
        for seed in range(max(n_seeds, 1)):
            for p in policies:
                if p != "jittered" and seed > 0:
                    continue
                runs.append((seed, p, simulate(user_trace, SchedulerPolicy(p, seed), server)))
    else:
        for seed in range(n_seeds):
            trace = random_conforming_trace(alpha, L_max, horizon, seed, max_packets)
            for p in policies:
                runs.append((seed, p, simulate(trace, SchedulerPolicy(p, seed), server)))
    if sim and sim.include_worst_case:
        _, wc, trace = run_tightness(cfg)
        runs.append(("worst_case", "max_lazy", simulate(trace, SchedulerPolicy("max_lazy"), server)))

    rep = bound_report(alpha, server, _lengths_of_interest(cfg))
    delta = rep.delta
    classes = [{"count": 0, "max_response": None, "max_fraction": None}
               for _ in range(LENGTH_CLASSES)]
    histogram = [0] * SLACK_BINS
    rows = []
    violations = []
    gated_out = 0
    witness_failures = 0
    best_fraction = None
    for seed, policy, res in runs:
        conforming = bool(verify_arrival_conformance(res.trace, alpha))
        compliant = bool(verify_service_curve(res, server.beta))
        if not (conforming and compliant):
            gated_out += 1
            rows.append((cfg.name, seed, policy, len(res.trace), conforming, compliant,
                         None, None, None))
            continue
        witness = verify_start_witness(res, server.beta)
        witness_failures += not witness.ok
        check = check_delay_bounds(res, alpha, server)
        for v in check.violations:
            violations.append(dict(v, seed=seed, policy=policy))
        for p, r, b, s in zip(res.trace.packets, check.responses, check.bounds, check.slack):
            cls = classes[_length_class(p.length, L_max)]
            cls["count"] += 1
            frac = r / b if b > 0 and math.isfinite(b) else None
            if cls["max_response"] is None or r > cls["max_response"]:
                cls["max_response"] = r
            if frac is not None and (cls["max_fraction"] is None or frac > cls["max_fraction"]):
                cls["max_fraction"] = frac
            if math.isfinite(delta) and delta > 0:
                k = min(max(int(s / delta * SLACK_BINS), 0), SLACK_BINS - 1)
                histogram[k] += 1
        frac = check.attained_fraction
        if frac is not None and (best_fraction is None or frac > best_fraction):
            best_fraction = frac
        rows.append((cfg.name, seed, policy, len(res.trace), conforming, compliant,
                     witness.ok, check.max_response, frac))

    stats = {
        "runs": len(runs),
        "gated_out": gated_out,
        "witness_failures": witness_failures,
        "max_fraction": best_fraction,
        "length_classes": [
            dict(c, upper_bits=L_max * (i + 1) / LENGTH_CLASSES) for i, c in enumerate(classes)],
        "slack_histogram": histogram,
        "violations": len(violations),
    }
    report = RunReport(cfg.name, rep, sim_stats=stats, verdicts=verdicts,
                       rows=rows, columns=SIM_COLUMNS)
    if violations:
        raise BoundViolation(f"{len(violations)} delay-bound violation(s) on verified executions",
                             violations)
    return report


def drr_case(n_values=(2, 4, 8, 16), c=1e6, L=1000.0, Q=None) -> RunReport:
    """Per-flow DRR queues fed by burst-L token buckets at the fair rate."""
    Q = L if Q is None else Q
    rows = []
    extra = []
    first = None
    for n in n_values:
        server = drr_service_curve(n, c, L, Q)
        alpha = ConcaveArrivalCurve.token_bucket(L, server.R)
        rep = bound_report(alpha, server, [L])
        rows.extend(_bound_rows(f"drr-n{n}", rep))
        extra.append({"n": n, "R": server.R, "T": server.T, "delta": rep.delta,
                      "improvement": rep.improvement(L),
                      "ratio": rep.improvement(L) / rep.delta})
        first = first or rep
    return RunReport("drr", first, rows=rows, sim_stats={"drr": extra})


CBS_CLASSES = (("A", 0.60, 11992.0), ("B", 0.15, 11504.0))


def cbs_case(c_values=(1e9, 1e8), T=0.0, classes=CBS_CLASSES) -> RunReport:
    """Credit-based shaper classes with R taken as the idle slope.

    Only the improvement l (1/R - 1/c) is meaningful here; it does not
    depend on T or on the arrival curve.
    """
    rows = []
    extra = []
    first = None
    for c in c_values:
        for name, slope, l in classes:
            server = ServerSpec(RateLatencyCurve(slope * c, T), c)
            alpha = ConcaveArrivalCurve.token_bucket(l, 0.0)
            rep = bound_report(alpha, server, [l])
            label = f"cbs-{name}-{c / 1e6:g}Mbps"
            rows.extend(_bound_rows(label, rep))
            extra.append({"class": name, "c": c, "R": server.R, "l": l,
                          "improvement": rep.improvement(l)})
            first = first or rep
    return RunReport("cbs", first, rows=rows, sim_stats={"cbs": extra})
