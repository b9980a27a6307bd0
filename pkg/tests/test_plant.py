"""Plant recurrences, period bookkeeping, disturbances, trace replay."""

from __future__ import annotations

import pytest

from schedloop import (
    DisturbanceSpec,
    PolicyError,
    Schedule,
    SetPoints,
    TaskSpec,
    TaskState,
    advance_periods,
    baseline_set,
    build_policy,
    run_simulation,
    trace_from_csv,
    trace_to_csv,
)
from oracles import replay_check


class Scripted:
    """Replays a fixed list of entry tuples, repeating the last one."""

    name = "scripted"
    padded = False
    bench_deadline_mode = "exact"

    def __init__(self, rounds, *, bump_index=0):
        self.rounds = [tuple(r) for r in rounds]
        self.bump_index = bump_index

    def reset(self, specs):
        self._i = 0

    def schedule(self, k, view):
        entries = self.rounds[min(self._i, len(self.rounds) - 1)]
        self._i += 1
        return Schedule(round_index=k + self.bump_index, entries=entries)


def two_big_tasks():
    return (
        TaskSpec(id=1, period=10000, workload=40.0),
        TaskSpec(id=2, period=10000, workload=40.0),
    )


# -- release-instant recurrence --------------------------------------------

def test_release_instants_current_convention():
    policy = Scripted([((1, 5), (2, 5))])
    trace = run_simulation(two_big_tasks(), policy, horizon=30,
                           convention="current")
    assert [r.t for r in trace.records] == [0, 10, 20]
    assert [r.tau_r for r in trace.records] == [10, 10, 10]


def test_release_instants_delayed_convention():
    policy = Scripted([((1, 5), (2, 5))])
    trace = run_simulation(two_big_tasks(), policy, horizon=30,
                           convention="delayed")
    assert [r.tau_r for r in trace.records] == [0, 10, 10]
    assert [r.t for r in trace.records] == [0, 0, 10]


def test_single_task_round_robin_trace():
    spec = TaskSpec(id=1, period=100, workload=4.0)
    policy = build_policy("rr", quantum=10)
    trace = run_simulation((spec,), policy, horizon=100, convention="current")
    assert len(trace.records) == 10
    assert all(r.tau_r == 10 for r in trace.records)
    assert trace.records[-1].end == 100


# -- disturbance shapes -----------------------------------------------------

def test_workload_limited_yield():
    spec = TaskSpec(id=1, period=10000, workload=1.2)
    policy = Scripted([((1, 50),)])
    trace = run_simulation(
        (spec,), policy, horizon=30,
        disturbance=DisturbanceSpec(mode="workload-limited"))
    first = trace.records[0]
    assert first.tau_p[0] == 30
    assert first.delta_b[0] == -20


def test_additive_noise_is_bounded():
    specs = two_big_tasks()
    policy = Scripted([((1, 10), (2, 10))])
    trace = run_simulation(
        specs, policy, horizon=400,
        disturbance=DisturbanceSpec(mode="additive-noise", amplitude=3, seed=11))
    deltas = [d for r in trace.records for d in r.delta_b]
    assert any(d != 0 for d in deltas)
    assert all(-3 <= d <= 3 for d in deltas)
    assert all(p >= 0 for r in trace.records for p in r.tau_p)


def test_step_disturbance_targets_one_task():
    specs = two_big_tasks()
    policy = Scripted([((1, 10), (2, 10))])
    trace = run_simulation(
        specs, policy, horizon=200,
        disturbance=DisturbanceSpec(mode="step", step_task=2,
                                    step_round=3, step_magnitude=4))
    for r in trace.records:
        assert r.delta_b[0] == 0
        assert r.delta_b[1] == (4 if r.k >= 4 else 0)


# -- period bookkeeping -----------------------------------------------------

def fast_task():
    return TaskSpec(id=5, period=625, workload=2.0)


def test_advance_periods_reloads_on_time():
    sp = fast_task()
    states = [TaskState(remaining_work=0)]
    missed = advance_periods((sp,), states, elapsed=625)
    assert missed == []
    assert states[0].remaining_work == 50
    assert states[0].period_index == 1


def test_advance_periods_flags_late_work():
    sp = fast_task()
    states = [TaskState(remaining_work=10)]
    missed = advance_periods((sp,), states, elapsed=625)
    assert missed == [5]
    assert states[0].misses == 1
    assert states[0].first_miss_time == 625
    assert states[0].remaining_work == 50


def test_advance_periods_walks_every_boundary():
    sp = fast_task()
    states = [TaskState(remaining_work=0)]
    advance_periods((sp,), states, elapsed=1875)
    assert states[0].period_index == 3
    assert states[0].remaining_work == 50
    # the reload at 625 was never served, so 1250 and 1875 both missed
    assert states[0].misses == 2


def test_exact_mode_miss_at_boundary_instant():
    specs = (TaskSpec(id=1, period=100, workload=2.0),
             TaskSpec(id=2, period=10000, workload=40.0))
    policy = Scripted([((2, 100),)])
    trace = run_simulation(specs, policy, horizon=200,
                           disturbance=DisturbanceSpec(mode="workload-limited"))
    assert 1 in trace.records[0].missed
    assert trace.final_states[0].first_miss_time == 100


def test_round_mode_grants_one_period_of_grace():
    specs = (TaskSpec(id=1, period=100, workload=2.0),
             TaskSpec(id=2, period=10000, workload=40.0))
    policy = Scripted([((2, 100),)])
    trace = run_simulation(specs, policy, horizon=200,
                           deadline_mode="round",
                           disturbance=DisturbanceSpec(mode="workload-limited"))
    assert trace.records[0].missed == ()
    assert 1 in trace.records[1].missed


# -- idle handling ----------------------------------------------------------

def test_idle_jump_skips_to_next_boundary():
    spec = TaskSpec(id=1, period=625, workload=0.2)
    wl = DisturbanceSpec(mode="workload-limited")
    jump = run_simulation((spec,), build_policy("edf"), horizon=1250,
                          disturbance=wl, idle_mode="jump")
    unit = run_simulation((spec,), build_policy("edf"), horizon=1250,
                          disturbance=wl, idle_mode="unit")
    assert len(jump.records) == 4
    assert len(unit.records) == 1242
    assert jump.meta["idle_cpu"] == unit.meta["idle_cpu"] == 1240


# -- policy contract errors -------------------------------------------------

def test_wrong_round_index_rejected():
    policy = Scripted([((1, 5),)], bump_index=1)
    with pytest.raises(PolicyError):
        run_simulation(two_big_tasks(), policy, horizon=30)


def test_unknown_task_rejected():
    policy = Scripted([((99, 5),)])
    with pytest.raises(PolicyError):
        run_simulation(two_big_tasks(), policy, horizon=30)


def test_nonpositive_horizon_rejected():
    with pytest.raises(PolicyError):
        run_simulation(two_big_tasks(), Scripted([((1, 5),)]), horizon=0)


# -- replay oracle over the policy zoo --------------------------------------

def _cascade(specs, tau_r_star=1000):
    points = SetPoints.from_utilization(specs, tau_r_star=tau_r_star)
    return build_policy("psc-bcc", set_points=points)


@pytest.mark.parametrize("convention", ["delayed", "current"])
@pytest.mark.parametrize("label, factory, deadline_mode, disturbance, horizon", [
    ("rr-none", lambda s: build_policy("rr", quantum=10),
     "exact", DisturbanceSpec(mode="none"), 10000),
    ("rr-wl-round", lambda s: build_policy("rr", quantum=10),
     "round", DisturbanceSpec(mode="workload-limited"), 10000),
    ("rr-noise", lambda s: build_policy("rr", quantum=10),
     "exact", DisturbanceSpec(mode="additive-noise", amplitude=4, seed=5), 6000),
    ("srr-wl", lambda s: build_policy("srr", a=2.0, b=1.0, quantum=10),
     "round", DisturbanceSpec(mode="workload-limited"), 10000),
    ("edf-wl", lambda s: build_policy("edf"),
     "exact", DisturbanceSpec(mode="workload-limited"), 10000),
    ("edf-step", lambda s: build_policy("edf"),
     "exact", DisturbanceSpec(mode="step", step_task=1, step_round=50,
                              step_magnitude=5), 6000),
    ("llf-wl", lambda s: build_policy("llf", tick=1),
     "exact", DisturbanceSpec(mode="workload-limited"), 4000),
    ("cascade-wl", _cascade,
     "round", DisturbanceSpec(mode="workload-limited"), 10000),
])
def test_replay_oracle(label, factory, deadline_mode, disturbance, horizon,
                       convention):
    specs = baseline_set()
    trace = run_simulation(specs, factory(specs), horizon=horizon,
                           disturbance=disturbance,
                           deadline_mode=deadline_mode,
                           convention=convention,
                           idle_mode="jump")
    violations = replay_check(trace, convention=convention,
                              deadline_mode=deadline_mode,
                              greedy=disturbance.greedy)
    assert violations == [], "\n".join(violations)
    assert len(trace.records) >= 10


# -- determinism and serialization ------------------------------------------

def _noisy_trace():
    return run_simulation(
        baseline_set(), build_policy("rr", quantum=10), horizon=5000,
        disturbance=DisturbanceSpec(mode="additive-noise", amplitude=5, seed=3))


def test_identical_runs_produce_identical_traces():
    assert trace_to_csv(_noisy_trace()) == trace_to_csv(_noisy_trace())


def test_trace_csv_round_trip():
    trace = _noisy_trace()
    rows = trace_from_csv(trace_to_csv(trace))
    assert len(rows) == len(trace.records)
    for row, rec in zip(rows, trace.records):
        assert row["k"] == rec.k
        assert row["t"] == rec.t
        assert row["tau_r"] == rec.tau_r
        assert row["switches"] == rec.switches
        assert row["idle"] == rec.idle
        n = trace.n_tasks
        assert tuple(row[f"tau_p_{i + 1}"] for i in range(n)) == rec.tau_p
        assert tuple(row[f"delta_b_{i + 1}"] for i in range(n)) == rec.delta_b
