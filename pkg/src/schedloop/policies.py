"""Reference scheduling policies: RR, Selfish RR, EDF, LLF.

All policies implement the same interface the engine expects: `reset(specs)`
then `schedule(k, view) -> Schedule` per round.  They are work-conserving
(padded = False): a round lasts exactly as long as its entries actually run,
and an empty schedule makes the engine idle until something is runnable.

EDF and LLF are event-driven within the round abstraction: each scheduler
invocation is one "round", so EDF rounds run until the next release or
completion and LLF rounds last one tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import ConfigError, Schedule, TaskSpec


def _active_ids(view) -> list[int]:
    return [sp.id for sp, st in zip(view.specs, view.states) if st.remaining_work > 0]


def _deadline(view, idx: int) -> int:
    sp, st = view.specs[idx], view.states[idx]
    return (st.period_index + 1) * sp.period


def _next_event(view) -> int:
    return min(_deadline(view, i) for i in range(len(view.specs)))


@dataclass
class RoundRobin:
    """Fixed-quantum rotation over every task that still has work.

    Each round grants the quantum to all active tasks in rotation order,
    so a full round spans (active count) * q; the rotation start advances
    by one task id per round."""

    quantum: int = 10

    name: str = field(default="rr", init=False)
    padded: bool = field(default=False, init=False)
    bench_deadline_mode: str = field(default="exact", init=False)

    def __post_init__(self) -> None:
        if self.quantum <= 0:
            raise ConfigError(f"quantum must be > 0, got {self.quantum}")
        self._cursor = 1
        self._n = 0
        self.op_counter = None

    def reset(self, specs: tuple[TaskSpec, ...]) -> None:
        self._cursor = 1
        self._n = len(specs)

    def schedule(self, k: int, view) -> Schedule:
        n = self._n
        order = list(range(self._cursor, n + 1)) + list(range(1, self._cursor))
        active = set(_active_ids(view))
        entries = tuple((tid, self.quantum) for tid in order if tid in active)
        self._cursor = self._cursor % n + 1
        if self.op_counter is not None and entries:
            self.op_counter.add(k, "shift", n)
            self.op_counter.add(k, "switch", len(entries))
        return Schedule(round_index=k, entries=entries)


@dataclass
class SelfishRoundRobin:
    """RR with an admission gate: newcomers age in a holding queue.

    Waiting priorities grow at rate b per round from 0; tasks already
    admitted grow at rate a.  A waiting task is admitted once its priority
    reaches the lowest admitted priority; an empty admitted set takes
    everyone at once.  With b = a every simultaneous cold-start arrival is
    admitted immediately (plain RR); with b = 0 newcomers sit out until the
    admitted queue drains.  Tasks leave on completing their released work
    and re-enter the holding queue when the next period reloads them.
    """

    a: float = 2.0
    b: float = 1.0
    quantum: int = 10

    name: str = field(default="srr", init=False)
    padded: bool = field(default=False, init=False)
    bench_deadline_mode: str = field(default="exact", init=False)

    def __post_init__(self) -> None:
        if not (self.a >= self.b >= 0):
            raise ConfigError(
                f"srr rates must satisfy a >= b >= 0, got a={self.a} b={self.b}")
        if self.quantum <= 0:
            raise ConfigError(f"quantum must be > 0, got {self.quantum}")
        self.active: list[int] = []
        self.active_prio: dict[int, float] = {}
        self.waiting: dict[int, float] = {}
        self.op_counter = None

    def reset(self, specs: tuple[TaskSpec, ...]) -> None:
        self.active = []
        self.active_prio = {}
        self.waiting = {}

    def _admit(self, tid: int) -> None:
        self.active.append(tid)
        self.active_prio[tid] = self.waiting.pop(tid)

    def schedule(self, k: int, view) -> Schedule:
        runnable = set(_active_ids(view))
        for tid in [t for t in self.active if t not in runnable]:
            self.active.remove(tid)
            del self.active_prio[tid]
        for tid in sorted(runnable):
            if tid not in self.active and tid not in self.waiting:
                self.waiting[tid] = 0.0
        for tid in self.waiting:
            self.waiting[tid] += self.b
        for tid in self.active_prio:
            self.active_prio[tid] += self.a
        while self.waiting:
            floor = min(self.active_prio.values()) if self.active else None
            candidates = sorted(self.waiting.items(), key=lambda kv: (-kv[1], kv[0]))
            tid, prio = candidates[0]
            if floor is None or prio >= floor:
                self._admit(tid)
            else:
                break
        entries = tuple((tid, self.quantum) for tid in self.active)
        if self.active:
            self.active = self.active[1:] + self.active[:1]
        if self.op_counter is not None and entries:
            n = len(view.specs)
            self.op_counter.add(k, "sub", n * n)
            self.op_counter.add(k, "mul", n * n)
            self.op_counter.add(k, "shift", n)
            self.op_counter.add(k, "switch", len(entries))
        return Schedule(round_index=k, entries=entries)


@dataclass
class EarliestDeadlineFirst:
    """Event-driven EDF: one entry per round, the unfinished task with the
    nearest current-period deadline (ties to the lowest id), budgeted to
    run until it completes or any task hits a period boundary."""

    name: str = field(default="edf", init=False)
    padded: bool = field(default=False, init=False)
    bench_deadline_mode: str = field(default="exact", init=False)

    def __post_init__(self) -> None:
        self.op_counter = None

    def reset(self, specs: tuple[TaskSpec, ...]) -> None:
        pass

    def schedule(self, k: int, view) -> Schedule:
        best = None
        for i, (sp, st) in enumerate(zip(view.specs, view.states)):
            if st.remaining_work <= 0:
                continue
            key = (_deadline(view, i), sp.id)
            if best is None or key < best[0]:
                best = (key, i)
        if best is None:
            return Schedule(round_index=k, entries=())
        i = best[1]
        budget = min(view.states[i].remaining_work, _next_event(view) - view.now)
        if self.op_counter is not None:
            self.op_counter.add(k, "sub", len(view.specs))
            self.op_counter.add(k, "switch", 1)
        return Schedule(round_index=k, entries=((view.specs[i].id, budget),))


@dataclass
class LeastLaxityFirst:
    """Tick-granular LLF: every round runs the minimum-laxity task for one
    tick (laxity = deadline - now - remaining work).  Ties keep the task
    that ran last round, then take the lowest id.  Tasks with negative
    laxity still run; the miss is recorded at their boundary."""

    tick: int = 1

    name: str = field(default="llf", init=False)
    padded: bool = field(default=False, init=False)
    bench_deadline_mode: str = field(default="exact", init=False)

    def __post_init__(self) -> None:
        if self.tick < 1:
            raise ConfigError(f"tick must be >= 1, got {self.tick}")
        self._incumbent: int | None = None
        self.op_counter = None

    def reset(self, specs: tuple[TaskSpec, ...]) -> None:
        self._incumbent = None

    def schedule(self, k: int, view) -> Schedule:
        best = None
        for i, (sp, st) in enumerate(zip(view.specs, view.states)):
            if st.remaining_work <= 0:
                continue
            laxity = _deadline(view, i) - view.now - st.remaining_work
            incumbent_rank = 0 if sp.id == self._incumbent else 1
            key = (laxity, incumbent_rank, sp.id)
            if best is None or key < best[0]:
                best = (key, i)
        if best is None:
            self._incumbent = None
            return Schedule(round_index=k, entries=())
        i = best[1]
        self._incumbent = view.specs[i].id
        budget = min(self.tick, view.states[i].remaining_work)
        if self.op_counter is not None:
            self.op_counter.add(k, "sub", 2 * len(view.specs))
            self.op_counter.add(k, "switch", 1)
        return Schedule(round_index=k, entries=((view.specs[i].id, budget),))


def build_policy(name: str, **params):
    """Policy factory used by the CLI and the benchmark runner.

    Known names: rr, srr, edf, llf, psc-bcc.  Cascade construction needs
    set_points (and optionally gains) in params."""
    from .cascade import CascadeGains, CascadeScheduler, SetPoints

    key = name.strip().lower()
    if key == "rr":
        return RoundRobin(**params)
    if key == "srr":
        return SelfishRoundRobin(**params)
    if key == "edf":
        if params:
            raise ConfigError(f"edf takes no parameters, got {sorted(params)}")
        return EarliestDeadlineFirst()
    if key == "llf":
        return LeastLaxityFirst(**params)
    if key in ("psc-bcc", "psc+bcc", "cascade"):
        if "set_points" not in params:
            raise ConfigError("psc-bcc needs set_points (tau_r_star and theta_star)")
        set_points = params.pop("set_points")
        gains = params.pop("gains", None) or CascadeGains()
        if params:
            raise ConfigError(f"unknown psc-bcc parameters: {sorted(params)}")
        if not isinstance(set_points, SetPoints):
            raise ConfigError("set_points must be a SetPoints instance")
        return CascadeScheduler(set_points=set_points, gains=gains)
    raise ConfigError(f"unknown policy {name!r}; known: rr, srr, edf, llf, psc-bcc")
