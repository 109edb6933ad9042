"""Network-calculus delay bounds for FIFO servers with a known line rate."""

from .bounds import (
    BoundReport,
    FlowSpec,
    ServerSpec,
    bound_report,
    classic_bound,
    drr_service_curve,
    improved_bound,
    per_flow_bounds,
)
from .curves import (
    UNBOUNDED,
    AffinePiece,
    ConcaveArrivalCurve,
    CumulativeFunction,
    DomainError,
    RateLatencyCurve,
    min_plus_convolve,
    sup_deviation,
    upper_pseudo_inverse,
)
from .simulator import (
    Packet,
    SchedulerPolicy,
    SimResult,
    Trace,
    check_delay_bounds,
    random_conforming_trace,
    simulate,
    verify_arrival_conformance,
    verify_start_witness,
    verify_service_curve,
)
from .tightness import TightnessScenario, WorstCaseTrace, build_worst_case

__version__ = "0.1.0"
