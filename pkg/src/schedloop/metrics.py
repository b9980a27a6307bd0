"""Post-hoc analysis over simulation traces.

Provides the proportional-fairness residual, miss statistics, the analytic
per-round scheduler cost model, and an operation counter that policies can
be instrumented with so the analytic model can be cross-checked against
what the code actually computes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import ConfigError, SimulationTrace


@dataclass(frozen=True)
class CostConstants:
    """Abstract durations of the primitive scheduler operations."""

    t_sum: float = 1.0
    t_sub: float = 1.0
    t_mul: float = 1.0
    t_shift: float = 1.0
    t_cs: float = 1.0

    def __post_init__(self) -> None:
        for name in ("t_sum", "t_sub", "t_mul", "t_shift", "t_cs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class FairnessReport:
    """Worst-case deviation from weight-proportional CPU shares.

    Residuals are measured over every complete sliding window of the trace:
    window [k, k+H] covers H+1 consecutive rounds, and the residual of task
    i in it is |sum of tau_p,i - share_i * sum of tau_r| in time units.
    """

    window: int
    per_task: tuple[float, ...]
    max_residual: float
    windows_evaluated: int
    diagnostic: str = ""

    @property
    def empty(self) -> bool:
        return self.windows_evaluated == 0


def fairness_residual(trace: SimulationTrace, weights, horizon: int) -> FairnessReport:
    """Max per-task residual between granted CPU and its weighted share."""
    if horizon < 1:
        raise ConfigError(f"window must be >= 1 round, got {horizon}")
    n = trace.n_tasks
    if len(weights) != n:
        raise ConfigError(f"got {len(weights)} weights for {n} tasks")
    total_w = float(sum(weights))
    if total_w <= 0:
        raise ConfigError("weights must sum to a positive value")
    shares = [w / total_w for w in weights]
    records = trace.records
    if len(records) < horizon + 1:
        return FairnessReport(
            window=horizon, per_task=(0.0,) * n, max_residual=0.0,
            windows_evaluated=0,
            diagnostic=(f"trace has {len(records)} rounds; "
                        f"a window needs {horizon + 1}"))
    # Prefix sums over rounds: index j holds totals of records[:j].
    pre_r = [0] * (len(records) + 1)
    pre_p = [[0] * (len(records) + 1) for _ in range(n)]
    for j, rec in enumerate(records):
        pre_r[j + 1] = pre_r[j] + rec.tau_r
        for i in range(n):
            pre_p[i][j + 1] = pre_p[i][j] + rec.tau_p[i]
    worst = [0.0] * n
    count = 0
    for start in range(len(records) - horizon):
        end = start + horizon + 1
        win_r = pre_r[end] - pre_r[start]
        for i in range(n):
            win_p = pre_p[i][end] - pre_p[i][start]
            residual = abs(win_p - shares[i] * win_r)
            if residual > worst[i]:
                worst[i] = residual
        count += 1
    return FairnessReport(window=horizon, per_task=tuple(worst),
                          max_residual=max(worst), windows_evaluated=count)


def complexity_estimate(policy: str, n: int, constants: CostConstants | None = None,
                        *, quantum: int | None = None,
                        active: int | None = None,
                        tau_r_star: int | None = None) -> tuple[float, int]:
    """Analytic (scheduler cost, round length) for one round with n tasks.

    rr needs quantum; srr needs quantum and the admitted-queue size
    (active); psc-bcc needs its round set point.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    c = constants or CostConstants()
    key = policy.strip().lower()
    base = n * c.t_shift + n * c.t_cs
    if key == "rr":
        if quantum is None:
            raise ConfigError("rr complexity needs quantum")
        return base, n * quantum
    if key == "srr":
        if quantum is None or active is None:
            raise ConfigError("srr complexity needs quantum and active count")
        sigma = base + n * n * (c.t_sub + c.t_mul)
        return sigma, active * quantum
    if key in ("psc-bcc", "psc+bcc", "cascade"):
        if tau_r_star is None:
            raise ConfigError("psc-bcc complexity needs tau_r_star")
        sigma = (base + (n + 1) * c.t_sub + (2 * n + 1) * c.t_sum
                 + (2 * n + 2) * c.t_mul)
        return sigma, tau_r_star
    raise ConfigError(f"no complexity model for policy {policy!r}")


@dataclass
class OpCounter:
    """Per-round tally of the primitive operations a policy performs."""

    KINDS = ("sum", "sub", "mul", "shift", "switch")

    rounds: dict[int, dict[str, int]] = field(default_factory=dict)

    def add(self, k: int, kind: str, count: int) -> None:
        if kind not in self.KINDS:
            raise ConfigError(f"unknown operation kind {kind!r}")
        row = self.rounds.setdefault(k, {key: 0 for key in self.KINDS})
        row[kind] += count

    def per_round(self, k: int) -> dict[str, int]:
        return dict(self.rounds.get(k, {key: 0 for key in self.KINDS}))

    def totals(self) -> dict[str, int]:
        out = {key: 0 for key in self.KINDS}
        for row in self.rounds.values():
            for key, v in row.items():
                out[key] += v
        return out


def operation_report(counter: OpCounter, policy: str, n: int,
                     constants: CostConstants | None = None,
                     **model_params) -> dict:
    """Measured operation counts next to the analytic per-round model."""
    c = constants or CostConstants()
    rounds = len(counter.rounds)
    totals = counter.totals()
    measured_cost = (totals["sum"] * c.t_sum + totals["sub"] * c.t_sub
                     + totals["mul"] * c.t_mul + totals["shift"] * c.t_shift
                     + totals["switch"] * c.t_cs)
    report = {
        "policy": policy,
        "rounds": rounds,
        "totals": totals,
        "measured_cost": measured_cost,
    }
    try:
        sigma, round_len = complexity_estimate(policy, n, c, **model_params)
    except ConfigError:
        report["analytic"] = None
    else:
        report["analytic"] = {
            "sigma_per_round": sigma,
            "round_length": round_len,
            "sigma_times_rounds": sigma * rounds,
        }
    return report


def miss_stats(trace: SimulationTrace) -> dict:
    """Deadline accounting summary for one run."""
    per_task = {}
    for sp, st in zip(trace.specs, trace.final_states):
        per_task[sp.id] = {
            "misses": st.misses,
            "first_miss_time": st.first_miss_time,
        }
    first = [v["first_miss_time"] for v in per_task.values()
             if v["first_miss_time"] is not None]
    return {
        "total_misses": trace.total_misses,
        "first_miss_time": min(first) if first else None,
        "per_task": per_task,
    }


def completions_per_round(trace: SimulationTrace) -> list[int]:
    """How many tasks ended each round with no outstanding work."""
    return [sum(1 for rho in rec.rho_after if rho == 0) for rec in trace.records]
