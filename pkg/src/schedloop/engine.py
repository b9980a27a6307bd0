"""Discrete-time round simulator.

The engine alternates scheduler invocations with round execution.  Each
round runs the schedule's entries sequentially in entry order; wall time
advances only while a task runs or the slack entry idles.  Two deadline
accounting modes are supported:

exact -- period boundaries are processed at the exact time unit they
         occur, splitting work accounting across the boundary.  A reload
         replaces the task's remaining work; unfinished work at a boundary
         is a deadline miss.
round -- boundaries are batched at the end of the round that crosses them.
         Reloads accumulate (remaining work is a demand backlog) and a miss
         is flagged when the backlog of earlier periods survives the round.
         This suits schedulers whose planning interval deliberately spans
         several task periods.

Policies declare `padded`; a padded round lasts its full planned budget,
with the unused tail modelled as a zero-weight slack entry (the `idle`
field) so that CPU time is conserved round by round.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

from .model import (
    ConfigError,
    DisturbanceSpec,
    InvariantError,
    PolicyError,
    RoundRecord,
    Schedule,
    SimulationTrace,
    TaskSpec,
    TaskState,
)

DEADLINE_MODES = ("exact", "round")
TAU_R_CONVENTIONS = ("delayed", "current")
IDLE_MODES = ("unit", "jump")


class SchedulerPolicy(Protocol):
    """What the engine requires of a scheduler."""

    name: str
    padded: bool

    def reset(self, specs: tuple[TaskSpec, ...]) -> None: ...

    def schedule(self, k: int, view: "PlantView") -> Schedule: ...


@dataclass
class PlantView:
    """Read-only snapshot handed to policies each invocation."""

    k: int
    now: int
    specs: tuple[TaskSpec, ...]
    states: list[TaskState]
    prev: RoundRecord | None


@dataclass
class _RoundScratch:
    """Per-round accumulators, reset before each execution."""

    n: int
    actual: list[int] = field(default_factory=list)
    budget: list[int] = field(default_factory=list)
    reloads: list[int] = field(default_factory=list)
    missed: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.actual = [0] * self.n
        self.budget = [0] * self.n
        self.reloads = [0] * self.n


class Plant:
    """Mutable simulation state: task states, wall clock, boundary walker."""

    def __init__(self, specs: Iterable[TaskSpec],
                 disturbance: DisturbanceSpec | None = None,
                 deadline_mode: str = "exact") -> None:
        self.specs = tuple(specs)
        ids = [s.id for s in self.specs]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise PolicyError(f"task ids must be unique and ascending, got {ids}")
        self.index = {s.id: i for i, s in enumerate(self.specs)}
        self.disturbance = disturbance or DisturbanceSpec()
        if deadline_mode not in DEADLINE_MODES:
            raise PolicyError(f"unknown deadline mode {deadline_mode!r}")
        self.deadline_mode = deadline_mode
        self.rng = random.Random(self.disturbance.seed)
        self.now = 0
        self.idle_cpu = 0
        self.states = [TaskState(remaining_work=s.work_units) for s in self.specs]
        self._scratch: _RoundScratch | None = None

    # -- boundary handling ------------------------------------------------

    def _next_boundary(self) -> int:
        return min((st.period_index + 1) * sp.period
                   for sp, st in zip(self.specs, self.states))

    def _process_due_boundaries(self) -> None:
        """Exact mode: reload every task whose boundary is the current instant."""
        scratch = self._scratch
        for i, (sp, st) in enumerate(zip(self.specs, self.states)):
            boundary = (st.period_index + 1) * sp.period
            if boundary != self.now:
                continue
            if st.remaining_work > 0:
                st.deadline_missed = True
                st.misses += 1
                if st.first_miss_time is None:
                    st.first_miss_time = self.now
                if scratch is not None and i not in scratch.missed:
                    scratch.missed.append(i)
            st.remaining_work = sp.work_units
            st.period_index += 1
            st.ran_since_reload = 0
            if scratch is not None:
                scratch.reloads[i] += 1

    def _consume(self, i: int, dt: int) -> None:
        st = self.states[i]
        st.remaining_work = max(st.remaining_work - dt, 0)
        st.cumulative_cpu += dt
        st.ran_since_reload += dt
        self.now += dt

    def _run_slot_exact(self, i: int, budget: int) -> int:
        """Run task i for up to `budget` units, walking boundaries exactly.

        Under workload-limited disturbance the task yields when its released
        work is gone; a reload landing inside the slot lets it continue.
        Greedy modes burn the full (perturbed) allocation.
        """
        sp, st = self.specs[i], self.states[i]
        if self.disturbance.greedy:
            target = budget
            ran = 0
            while ran < target:
                step = min(target - ran, self._next_boundary() - self.now)
                if step < 0:
                    raise InvariantError("time walker moved backwards")
                self._consume(i, step)
                ran += step
                if self.now == self._next_boundary():
                    self._process_due_boundaries()
            return ran
        ran = 0
        while ran < budget:
            if st.remaining_work <= 0:
                break
            step = min(budget - ran, st.remaining_work,
                       self._next_boundary() - self.now)
            if step <= 0:
                # the current instant is a boundary; settle it and re-check
                self._process_due_boundaries()
                continue
            self._consume(i, step)
            ran += step
            if self.now == self._next_boundary():
                self._process_due_boundaries()
        return ran

    def _advance_idle_exact(self, dt: int) -> None:
        while dt > 0:
            step = min(dt, self._next_boundary() - self.now)
            if step <= 0:
                self._process_due_boundaries()
                continue
            self.now += step
            self.idle_cpu += step
            dt -= step
            if self.now == self._next_boundary():
                self._process_due_boundaries()

    def _settle_round_boundaries(self, start: int, end: int) -> None:
        """Round mode: count boundaries in (start, end], batch reloads.

        Because releases are only credited here, a task can never serve
        work released earlier in the same round; a strict remaining > 0
        miss test would therefore flag feasible sets whenever a period is
        out of phase with the round grid.  The miss rule grants one
        period of grace instead: a task misses when it is more than one
        full period of work behind at a settlement.
        """
        scratch = self._scratch
        for i, (sp, st) in enumerate(zip(self.specs, self.states)):
            crossed = end // sp.period - start // sp.period
            if crossed <= 0:
                continue
            if st.remaining_work > sp.work_units:
                st.deadline_missed = True
                st.misses += 1
                if st.first_miss_time is None:
                    st.first_miss_time = end
                if scratch is not None and i not in scratch.missed:
                    scratch.missed.append(i)
            st.remaining_work += crossed * sp.work_units
            st.period_index += crossed
            st.ran_since_reload = 0
            if scratch is not None:
                scratch.reloads[i] += crossed

    # -- disturbance ------------------------------------------------------

    def _greedy_delta(self, k: int, task_id: int) -> int:
        d = self.disturbance
        delta = 0
        if d.mode == "additive-noise" and d.amplitude > 0:
            delta = self.rng.randint(-d.amplitude, d.amplitude)
        if d.mode == "step" and task_id == d.step_task and k >= d.step_round:
            delta += d.step_magnitude
        return delta

    # -- round execution --------------------------------------------------

    def execute_round(self, schedule: Schedule, prev: RoundRecord | None,
                      convention: str = "delayed",
                      padded: bool = False,
                      idle_mode: str = "unit",
                      controller_dump: tuple[float, ...] | None = None) -> RoundRecord:
        n = len(self.specs)
        scratch = _RoundScratch(n)
        self._scratch = scratch
        start = self.now
        idle_before = self.idle_cpu
        switches = 0
        empty = schedule.is_empty

        for task_id, budget in schedule.entries:
            if task_id not in self.index:
                raise PolicyError(f"schedule names unknown task {task_id}")
            i = self.index[task_id]
            scratch.budget[i] = budget
            if budget == 0:
                continue
            if self.deadline_mode == "exact":
                if self.disturbance.greedy:
                    target = max(budget + self._greedy_delta(schedule.round_index, task_id), 0)
                    ran = self._run_slot_exact(i, target)
                else:
                    ran = self._run_slot_exact(i, budget)
            else:
                if self.disturbance.greedy:
                    ran = max(budget + self._greedy_delta(schedule.round_index, task_id), 0)
                else:
                    ran = min(budget, self.states[i].remaining_work)
                self._consume(i, ran)
            if ran < 0:
                raise InvariantError(f"negative run time for task {task_id}")
            scratch.actual[i] = ran
            if ran > 0:
                switches += 1

        executed_span = self.now - start
        target_span = schedule.total_budget if padded else 0
        if executed_span < target_span:
            pad = target_span - executed_span
            if self.deadline_mode == "exact":
                self._advance_idle_exact(pad)
            else:
                self.now += pad
                self.idle_cpu += pad
        if self.now == start and (empty or not schedule.entries):
            # nothing ran and nothing was planned: keep time flowing
            if idle_mode == "jump":
                gap = max(self._next_boundary() - self.now, 1)
            else:
                gap = 1
            if self.deadline_mode == "exact":
                self._advance_idle_exact(gap)
            else:
                self.now += gap
                self.idle_cpu += gap
        if self.now == start:
            # a non-empty schedule that executed nothing (all work exhausted)
            # must still advance time or the loop would spin forever
            if self.deadline_mode == "exact":
                self._advance_idle_exact(1)
            else:
                self.now += 1
                self.idle_cpu += 1

        if self.deadline_mode == "round":
            self._settle_round_boundaries(start, self.now)

        end = self.now
        idle = self.idle_cpu - idle_before
        tau_p = tuple(scratch.actual)
        budgets = tuple(scratch.budget)
        delta_b = tuple(a - b for a, b in zip(scratch.actual, scratch.budget))
        if convention == "current":
            tau_r = sum(tau_p) + idle
        elif convention == "delayed":
            tau_r = (sum(prev.tau_p) + prev.idle) if prev is not None else 0
        else:
            raise PolicyError(f"unknown tau_r convention {convention!r}")
        t = (prev.t + prev.tau_r) if prev is not None else 0
        record = RoundRecord(
            k=schedule.round_index + 1,
            t=t,
            tau_r=tau_r,
            tau_p=tau_p,
            delta_b=delta_b,
            budgets=budgets,
            switches=switches,
            idle=idle,
            start=start,
            end=end,
            rho_after=tuple(st.remaining_work for st in self.states),
            reloads=tuple(scratch.reloads),
            post_reload_run=tuple(st.ran_since_reload for st in self.states),
            missed=tuple(sorted(self.specs[i].id for i in scratch.missed)),
            empty=empty,
            degenerate=False,
            controller=controller_dump,
        )
        self._scratch = None
        self._check_conservation(record)
        return record

    def _check_conservation(self, record: RoundRecord) -> None:
        total = sum(st.cumulative_cpu for st in self.states) + self.idle_cpu
        if total != self.now:
            raise InvariantError(
                f"CPU conservation broke at round {record.k}: {total} != {self.now}")


def advance_periods(specs: Iterable[TaskSpec], states: list[TaskState],
                    elapsed: int, now: int = 0) -> list[int]:
    """Advance period bookkeeping by `elapsed` time units of pure waiting.

    Boundaries are processed at their exact instants: unfinished work at a
    boundary flags a miss and the period work is reloaded.  Returns the ids
    of tasks that missed.  `now` is the wall time the elapsed interval
    starts from.
    """
    specs = tuple(specs)
    missed: list[int] = []
    endpoint = now + elapsed
    for sp, st in zip(specs, states):
        boundary = (st.period_index + 1) * sp.period
        while boundary <= endpoint:
            if st.remaining_work > 0:
                st.deadline_missed = True
                st.misses += 1
                if st.first_miss_time is None:
                    st.first_miss_time = boundary
                if sp.id not in missed:
                    missed.append(sp.id)
            st.remaining_work = sp.work_units
            st.period_index += 1
            st.ran_since_reload = 0
            boundary += sp.period
    return missed


def run_simulation(specs: Iterable[TaskSpec], policy: SchedulerPolicy,
                   horizon: int,
                   disturbance: DisturbanceSpec | None = None,
                   *,
                   deadline_mode: str = "exact",
                   convention: str = "delayed",
                   idle_mode: str = "unit",
                   collect: bool = True,
                   on_record: Callable[[RoundRecord], None] | None = None,
                   max_rounds: int | None = None,
                   controller_dump: bool = False) -> SimulationTrace:
    """Run `policy` over the task set until wall time reaches `horizon`."""
    if horizon <= 0:
        raise PolicyError(f"horizon must be > 0, got {horizon}")
    if idle_mode not in IDLE_MODES:
        raise PolicyError(f"unknown idle mode {idle_mode!r}")
    if convention not in TAU_R_CONVENTIONS:
        raise PolicyError(f"unknown tau_r convention {convention!r}")
    plant = Plant(specs, disturbance, deadline_mode)
    policy.reset(plant.specs)
    cap = max_rounds if max_rounds is not None else max(100_000, 8 * horizon)
    trace = SimulationTrace(specs=plant.specs)
    trace.meta = {
        "policy": policy.name,
        "horizon": horizon,
        "deadline_mode": deadline_mode,
        "convention": convention,
        "idle_mode": idle_mode,
        "disturbance": plant.disturbance.mode,
    }
    prev: RoundRecord | None = None
    k = 0
    while plant.now < horizon:
        if k >= cap:
            raise InvariantError(
                f"round cap {cap} hit at wall time {plant.now} (horizon {horizon})")
        view = PlantView(k=k, now=plant.now, specs=plant.specs,
                         states=plant.states, prev=prev)
        schedule = policy.schedule(k, view)
        if schedule.round_index != k:
            raise PolicyError(
                f"policy returned round_index {schedule.round_index}, expected {k}")
        dump = getattr(policy, "dump_state", None) if controller_dump else None
        record = plant.execute_round(
            schedule, prev,
            convention=convention,
            padded=policy.padded,
            idle_mode=idle_mode,
            controller_dump=dump() if callable(dump) else None,
        )
        if getattr(policy, "last_round_degenerate", False):
            record = _mark_degenerate(record)
        if collect:
            trace.records.append(record)
        if on_record is not None:
            on_record(record)
        prev = record
        k += 1
    trace.final_states = plant.states
    trace.meta["rounds"] = k
    trace.meta["idle_cpu"] = plant.idle_cpu
    trace.meta["end_time"] = plant.now
    if not collect and prev is not None:
        trace.records.append(prev)
    return trace


def _mark_degenerate(record: RoundRecord) -> RoundRecord:
    from dataclasses import replace
    return replace(record, degenerate=True)


# -- trace CSV ------------------------------------------------------------

def trace_to_csv(trace: SimulationTrace) -> str:
    """Serialize per-round observables.

    Columns: k, t, tau_r, tau_p_1..N, delta_b_1..N, switches, idle, plus
    u_k and c_1..N when controller state was dumped.  All plant columns are
    integers, so the file round-trips exactly.
    """
    n = trace.n_tasks
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["k", "t", "tau_r"]
    header += [f"tau_p_{i + 1}" for i in range(n)]
    header += [f"delta_b_{i + 1}" for i in range(n)]
    header += ["switches", "idle"]
    with_controller = any(r.controller is not None for r in trace.records)
    if with_controller:
        header += ["u_k"] + [f"c_{i + 1}" for i in range(n)]
    writer.writerow(header)
    for r in trace.records:
        row: list = [r.k, r.t, r.tau_r, *r.tau_p, *r.delta_b, r.switches, r.idle]
        if with_controller:
            ctrl = r.controller if r.controller is not None else (float("nan"),) * (n + 1)
            row += [repr(v) for v in ctrl]
        writer.writerow(row)
    return out.getvalue()


def trace_from_csv(text: str) -> list[dict]:
    """Parse a trace CSV back into per-round dictionaries of integers
    (controller columns, when present, come back as floats)."""
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row: dict = {}
        for key, value in raw.items():
            if key is None or value is None:
                raise ConfigError(f"malformed trace row: {raw}")
            if key == "u_k" or key.startswith("c_"):
                row[key] = float(value)
            else:
                row[key] = int(value)
        rows.append(row)
    return rows
