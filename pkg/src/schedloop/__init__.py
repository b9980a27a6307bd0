"""Deterministic round-based CPU scheduling simulator and benchmark kit."""

from .cascade import (BUDGET_CAP_FACTOR, CascadeGains, CascadeScheduler,
                      ControllerState, SetPoints, bcc_compute, integral_step,
                      make_controller_state, pi_step, psc_select)
from .config import RunConfig, load_config, parse_config
from .engine import (DEADLINE_MODES, IDLE_MODES, TAU_R_CONVENTIONS, PlantView,
                     SchedulerPolicy, advance_periods, run_simulation,
                     trace_from_csv, trace_to_csv)
from .hartstone import (BenchmarkResult, ITERATION_CAP,
                        REFERENCE_PERIOD_DURATIONS, TEST_KINDS,
                        apply_iteration, baseline_set, observation_window,
                        run_series)
from .metrics import (CostConstants, FairnessReport, OpCounter,
                      completions_per_round, complexity_estimate,
                      fairness_residual, miss_stats, operation_report)
from .model import (ConfigError, DisturbanceSpec, InvariantError, PolicyError,
                    RoundRecord, Schedule, SimulationTrace, TaskSpec,
                    TaskState, round_half_up)
from .policies import (EarliestDeadlineFirst, LeastLaxityFirst, RoundRobin,
                       SelfishRoundRobin, build_policy)

__version__ = "0.1.0"

__all__ = [
    "BUDGET_CAP_FACTOR", "BenchmarkResult", "CascadeGains", "CascadeScheduler",
    "ConfigError", "ControllerState", "CostConstants", "DEADLINE_MODES",
    "DisturbanceSpec", "EarliestDeadlineFirst", "FairnessReport",
    "IDLE_MODES", "ITERATION_CAP", "InvariantError", "LeastLaxityFirst",
    "OpCounter", "PlantView", "PolicyError", "REFERENCE_PERIOD_DURATIONS",
    "RoundRecord", "RoundRobin", "RunConfig", "Schedule", "SchedulerPolicy",
    "SelfishRoundRobin", "SetPoints", "SimulationTrace", "TAU_R_CONVENTIONS",
    "TEST_KINDS", "TaskSpec", "TaskState", "advance_periods",
    "apply_iteration", "baseline_set", "bcc_compute", "build_policy",
    "completions_per_round", "complexity_estimate", "fairness_residual",
    "integral_step", "load_config", "make_controller_state", "miss_stats",
    "observation_window", "operation_report", "parse_config", "pi_step",
    "psc_select", "round_half_up", "run_series", "run_simulation",
    "trace_from_csv", "trace_to_csv",
]
