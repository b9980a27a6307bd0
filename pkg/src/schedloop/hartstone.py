"""Periodic-workload benchmark series with four stress dimensions.

The baseline set holds five harmonic periodic tasks at 40% total load;
each test kind then tightens one dimension per iteration until the policy
under test drops a deadline inside the observation window:

  kind 1  the fastest task's frequency grows by 8 Hz per iteration
  kind 2  every frequency is scaled by (1 + i/10)
  kind 3  every task's per-period workload grows by 1 kilowhet
  kind 4  i extra clones of the midpoint task join the set

Frequencies map to integer periods at 20000 time units per Hz and
workloads to integer work at 25 units per kilowhet; kind 2 rounds the
scaled periods with exact rational arithmetic (ties up).  A series runs
iterations from 1 upward, each from a cold start over a window of
`observation` multiples of the largest period, and stops at the first
iteration whose run records any deadline miss.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .engine import run_simulation
from .model import ConfigError, DisturbanceSpec, TaskSpec

BASELINE_FREQUENCIES = (2, 4, 8, 16, 32)
BASELINE_KILOWHETS = (32, 16, 8, 4, 2)
TEST_KINDS = (1, 2, 3, 4)

# Nominal per-test period durations from the benchmark's reference setup.
# Kept as configuration for reporting; the simulation derives its own
# window from the task periods.
REFERENCE_PERIOD_DURATIONS = {1: 10000, 2: 4000, 3: 10000, 4: 10000}

ITERATION_CAP = 1000


def baseline_set() -> tuple[TaskSpec, ...]:
    """Five tasks, 2..32 Hz doubling, equal 64-kilowhet-per-second demand."""
    return tuple(
        TaskSpec.from_frequency(i + 1, f, kw)
        for i, (f, kw) in enumerate(zip(BASELINE_FREQUENCIES, BASELINE_KILOWHETS))
    )


def _spec_from_frequency(task_id: int, freq: Fraction, kilowhets: float) -> TaskSpec:
    period_exact = Fraction(20000) / freq
    period = (2 * period_exact.numerator + period_exact.denominator) // (
        2 * period_exact.denominator)
    if period < 1:
        raise ConfigError(
            f"task {task_id}: frequency {float(freq):g} Hz yields period "
            f"{float(period_exact):g} < 1 time unit; iteration out of range")
    return TaskSpec(id=task_id, period=period, workload=kilowhets)


def apply_iteration(kind: int, iteration: int) -> tuple[TaskSpec, ...]:
    """Task set for one benchmark iteration (iteration 0 is the baseline)."""
    if kind not in TEST_KINDS:
        raise ConfigError(f"unknown test kind {kind}; expected one of {TEST_KINDS}")
    if iteration < 0:
        raise ConfigError(f"iteration must be >= 0, got {iteration}")
    base = baseline_set()
    if iteration == 0:
        return base
    if kind == 1:
        freq = Fraction(BASELINE_FREQUENCIES[-1] + 8 * iteration)
        return base[:-1] + (
            _spec_from_frequency(5, freq, BASELINE_KILOWHETS[-1]),)
    if kind == 2:
        scale = 1 + Fraction(iteration, 10)
        return tuple(
            _spec_from_frequency(sp.id, f * scale, kw)
            for sp, f, kw in zip(base, BASELINE_FREQUENCIES, BASELINE_KILOWHETS))
    if kind == 3:
        return tuple(
            TaskSpec(id=sp.id, period=sp.period, workload=sp.workload + iteration)
            for sp in base)
    clone = base[2]
    clones = tuple(
        TaskSpec(id=6 + j, period=clone.period, workload=clone.workload)
        for j in range(iteration))
    return base + clones


def observation_window(specs: tuple[TaskSpec, ...], observation: int = 2) -> int:
    """Window length: `observation` multiples of the largest period."""
    if observation < 1:
        raise ConfigError(f"observation must be >= 1, got {observation}")
    return observation * max(sp.period for sp in specs)


@dataclass(frozen=True)
class BenchmarkResult:
    """Outcome of one policy on one test series."""

    policy: str
    kind: int
    first_miss: int | None
    switches_last_pass: int
    capped: bool = False

    @property
    def passes(self) -> int:
        """Iterations completed without a miss."""
        if self.first_miss is None:
            return ITERATION_CAP
        return self.first_miss - 1


def run_series(policy_factory, kind: int, *, policy_label: str | None = None,
               observation: int = 2, cap: int = ITERATION_CAP,
               convention: str = "delayed") -> BenchmarkResult:
    """Drive one policy through escalating iterations of one test kind.

    policy_factory(specs) must return a fresh policy configured for the
    given task set; the policy's own attributes select deadline accounting
    (bench_deadline_mode) and round padding.  Returns the first failing
    iteration and the context-switch total over the final largest-period
    span of the last passing iteration.
    """
    label = policy_label
    switches_last_pass = 0
    for iteration in range(1, cap + 1):
        specs = apply_iteration(kind, iteration)
        policy = policy_factory(specs)
        if label is None:
            label = policy.name
        window = observation_window(specs, observation)
        cutoff = window - max(sp.period for sp in specs)
        tally = {"switches": 0, "missed": False}

        def on_record(rec, _tally=tally, _cutoff=cutoff):
            if rec.start >= _cutoff:
                _tally["switches"] += rec.switches
            if rec.missed:
                _tally["missed"] = True

        trace = run_simulation(
            specs, policy, horizon=window,
            disturbance=DisturbanceSpec(mode="workload-limited"),
            deadline_mode=getattr(policy, "bench_deadline_mode", "exact"),
            convention=convention, idle_mode="jump",
            collect=False, on_record=on_record)
        missed = tally["missed"] or any(st.misses > 0 for st in trace.final_states)
        if missed:
            return BenchmarkResult(policy=label or "?", kind=kind,
                                   first_miss=iteration,
                                   switches_last_pass=switches_last_pass)
        switches_last_pass = tally["switches"]
    return BenchmarkResult(policy=label or "?", kind=kind, first_miss=None,
                           switches_last_pass=switches_last_pass, capped=True)
