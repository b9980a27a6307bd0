"""Core data types shared by the simulator, schedulers, and benchmark harness.

Time is a discrete integer axis ("time units").  Work is expressed in the
same units: one kilo-whetstone of benchmark workload equals 25 time units
of CPU time, and a task frequency of 1 Hz corresponds to a period of 20000
time units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

TIME_UNITS_PER_KILOWHET = 25
TIME_UNITS_PER_HERTZ = 20000


class ConfigError(ValueError):
    """Invalid configuration or malformed input (CLI exit code 2)."""


class PolicyError(RuntimeError):
    """A scheduler produced an unusable schedule (CLI exit code 3)."""


class InvariantError(RuntimeError):
    """Internal accounting broke an engine invariant (CLI exit code 3)."""


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero-ward ties upward."""
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class TaskSpec:
    """Static description of one periodic task.

    period    -- release interval in time units (> 0)
    workload  -- kilo-whetstones of work per period (>= 0)
    weight    -- fairness weight; defaults to the task's workload rate
                 (work units per time unit) when left at 0.
    """

    id: int
    period: int
    workload: float
    weight: float = 0.0

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ConfigError(f"task id must be >= 1, got {self.id}")
        if self.period <= 0:
            raise ConfigError(f"task {self.id}: period must be > 0, got {self.period}")
        if self.workload < 0:
            raise ConfigError(f"task {self.id}: workload must be >= 0")
        if self.weight < 0:
            raise ConfigError(f"task {self.id}: weight must be >= 0")

    @property
    def work_units(self) -> int:
        """CPU time units of work released at each period boundary."""
        return round_half_up(self.workload * TIME_UNITS_PER_KILOWHET)

    @property
    def utilization(self) -> float:
        return self.work_units / self.period

    def effective_weight(self) -> float:
        return self.weight if self.weight > 0 else self.utilization

    @classmethod
    def from_frequency(cls, id: int, frequency: float, workload: float,
                       weight: float = 0.0) -> "TaskSpec":
        """Build a spec from a frequency in Hz; the period is rounded to the
        nearest time unit (ties up)."""
        if frequency <= 0:
            raise ConfigError(f"task {id}: frequency must be > 0")
        period = round_half_up(TIME_UNITS_PER_HERTZ / frequency)
        return cls(id=id, period=period, workload=workload, weight=weight)


@dataclass
class TaskState:
    """Mutable per-task bookkeeping carried across rounds."""

    remaining_work: int = 0
    period_index: int = 0
    cumulative_cpu: int = 0
    deadline_missed: bool = False
    misses: int = 0
    first_miss_time: int | None = None
    ran_since_reload: int = 0

    def clone(self) -> "TaskState":
        return replace(self)


@dataclass(frozen=True)
class Schedule:
    """One round's allocation: ordered (task_id, budget) entries.

    Budgets are integer time units >= 0.  A task appears at most once;
    an empty entry list means the scheduler has nothing to run.
    """

    round_index: int
    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for task_id, budget in self.entries:
            if budget < 0:
                raise PolicyError(
                    f"round {self.round_index}: negative budget {budget} for task {task_id}")
            if not isinstance(budget, int):
                raise PolicyError(
                    f"round {self.round_index}: non-integer budget {budget!r} for task {task_id}")
            if task_id in seen:
                raise PolicyError(
                    f"round {self.round_index}: task {task_id} scheduled twice")
            seen.add(task_id)

    @property
    def total_budget(self) -> int:
        return sum(b for _, b in self.entries)

    @property
    def is_empty(self) -> bool:
        return all(b == 0 for _, b in self.entries) if self.entries else True


@dataclass(frozen=True)
class RoundRecord:
    """Observables for one executed round.

    The vector fields follow the plant recurrences.  With records indexed
    k = 1..K (k = 0 is the implicit all-zero initial condition):

        tau_p(k) = budgets(k) + delta_b(k)        (actual running times)
        tau_r(k) = sum_i tau_p_i(k-1) + idle(k-1) ("delayed" convention)
                 = sum_i tau_p_i(k)   + idle(k)   ("current" convention)
        t(k)     = t(k-1) + tau_r(k-1)

    where budgets(k) is the schedule the round executed and idle is the
    run time of the zero-weight slack entry (padding or forced idling).
    start/end give the physical wall-clock interval of the round, which the
    t column only tracks directly under the "current" convention.
    """

    k: int
    t: int
    tau_r: int
    tau_p: tuple[int, ...]
    delta_b: tuple[int, ...]
    budgets: tuple[int, ...]
    switches: int
    idle: int
    start: int
    end: int
    rho_after: tuple[int, ...]
    reloads: tuple[int, ...]
    post_reload_run: tuple[int, ...]
    missed: tuple[int, ...]
    empty: bool = False
    degenerate: bool = False
    controller: tuple[float, ...] | None = None

    @property
    def duration(self) -> int:
        """Physical length of the round including slack."""
        return self.end - self.start

    @property
    def executed(self) -> int:
        """CPU time spent running tasks this round (excludes slack)."""
        return sum(self.tau_p)


VALID_DISTURBANCE_MODES = ("workload-limited", "additive-noise", "step", "none")


@dataclass(frozen=True)
class DisturbanceSpec:
    """How actual run times deviate from budgets.

    workload-limited -- a task yields as soon as its released work is done;
                        delta_b <= 0.  This is the benchmark behaviour.
    additive-noise   -- tasks are CPU-bound; each scheduled entry runs
                        budget + U(-amplitude, +amplitude), clamped >= 0.
                        amplitude 0 gives an exact, noise-free plant.
    step             -- tasks are CPU-bound; one task gains a constant
                        extra run time from a given round onward.
    none             -- alias for additive-noise with amplitude 0.
    """

    mode: str = "workload-limited"
    amplitude: int = 0
    seed: int = 0
    step_round: int = 0
    step_task: int = 0
    step_magnitude: int = 0

    def __post_init__(self) -> None:
        if self.mode not in VALID_DISTURBANCE_MODES:
            raise ConfigError(
                f"unknown disturbance mode {self.mode!r}; expected one of {VALID_DISTURBANCE_MODES}")
        if self.amplitude < 0:
            raise ConfigError("disturbance amplitude must be >= 0")
        if self.mode == "step" and self.step_magnitude < 0:
            raise ConfigError("step magnitude must be >= 0")

    @property
    def greedy(self) -> bool:
        """True when tasks consume their full (possibly perturbed) budget
        regardless of remaining work."""
        return self.mode != "workload-limited"


@dataclass
class SimulationTrace:
    """Result of a run: per-round records plus final task states."""

    specs: tuple[TaskSpec, ...]
    records: list[RoundRecord] = field(default_factory=list)
    final_states: list[TaskState] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_tasks(self) -> int:
        return len(self.specs)

    @property
    def total_misses(self) -> int:
        return sum(s.misses for s in self.final_states)

    @property
    def total_switches(self) -> int:
        return sum(r.switches for r in self.records)
