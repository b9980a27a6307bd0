"""Feedback scheduler: cascade of a round-duration loop and per-task share loops.

Structure (two nested loops):

  outer   a PI regulator drives the measured round duration tau_r toward
          the target tau_r_star; its output v(k) is NOT a budget but the
          reference handed to the inner loop, split as theta_i * v(k);
  inner   one integral regulator per task drives that task's actual
          running time tau_p,i toward theta_i * v(k); the integrator
          state IS the task's (real-valued) budget, rounded half-up to
          integer time units at the plant boundary.

Wiring the outer PI output directly as the total round budget looks
simpler but is unstable with the stock gains: when the shares sum to one
the inner corrections cancel in the aggregate and the duration loop
reduces to z^2 + (k_rr - 1) z - k_rr z_rr = 0, which for (1.4, 0.88) has
a root at -1.33.  Routing the PI output through the inner integrators
(loop gain k_pi) keeps every closed-loop pole inside the unit circle for
both round-duration measurement conventions.

Anti-windup is conditional integration: an inner state is frozen on any
round where its tentative update leaves [0, 4*tau_r_star]; the outer PI
state is rewritten to its clamped output (back-calculation) so neither
loop accumulates unusable control action against a saturated budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import ConfigError, RoundRecord, Schedule, TaskSpec, round_half_up

BUDGET_CAP_FACTOR = 4


@dataclass(frozen=True)
class CascadeGains:
    """Regulator constants: PI gain/zero for the outer loop, integral
    gain for the inner loop."""

    k_rr: float = 1.4
    z_rr: float = 0.88
    k_pi: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 < self.z_rr < 1.0):
            raise ConfigError(f"z_rr must lie in (0, 1), got {self.z_rr}")
        if self.k_pi <= 0.0:
            raise ConfigError(f"k_pi must be > 0, got {self.k_pi}")


@dataclass(frozen=True)
class SetPoints:
    """Targets: round duration tau_r_star and CPU fractions theta_star.

    theta_star entries must be nonnegative and sum to 1 (a tolerance of
    1e-6 is accepted and normalized away)."""

    tau_r_star: int
    theta_star: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.tau_r_star <= 0:
            raise ConfigError(f"tau_r_star must be > 0, got {self.tau_r_star}")
        if not self.theta_star:
            raise ConfigError("theta_star must not be empty")
        if any(th < 0 for th in self.theta_star):
            raise ConfigError(f"theta_star entries must be >= 0, got {self.theta_star}")
        total = sum(self.theta_star)
        if abs(total - 1.0) > 1e-6:
            raise ConfigError(
                f"theta_star must sum to 1, got {total!r} for {self.theta_star}")
        if abs(total - 1.0) > 0.0:
            object.__setattr__(
                self, "theta_star", tuple(th / total for th in self.theta_star))

    @classmethod
    def from_utilization(cls, specs: list[TaskSpec] | tuple[TaskSpec, ...],
                         tau_r_star: int) -> "SetPoints":
        """Shares proportional to each task's demand rate (work per period)."""
        utils = [s.utilization for s in specs]
        total = sum(utils)
        if total <= 0:
            raise ConfigError("cannot derive shares: total utilization is 0")
        return cls(tau_r_star, tuple(u / total for u in utils))


@dataclass
class ControllerState:
    """Internal state of the cascade: outer PI memory, inner integrators,
    and the rotation cursor of the selection stage."""

    pi_output_prev: float
    pi_error_prev: float
    integrators: list[float]
    rr_cursor: int = 1


def make_controller_state(set_points: SetPoints) -> ControllerState:
    """Feedforward start: integrators preloaded with theta_i * tau_r_star
    so the very first round already executes the target split, and the PI
    memory starts at the set point (no cold-start transient)."""
    tau = float(set_points.tau_r_star)
    return ControllerState(
        pi_output_prev=tau,
        pi_error_prev=0.0,
        integrators=[th * tau for th in set_points.theta_star],
        rr_cursor=1,
    )


def pi_step(state: ControllerState, error: float,
            gains: CascadeGains) -> tuple[ControllerState, float]:
    """One step of u(k) = u(k-1) + k_rr * (e(k) - z_rr * e(k-1)).

    This is the exact time-domain form of a PI block with gain k_rr and
    zero z_rr; no clamping happens here (see bcc_compute for saturation
    handling)."""
    output = state.pi_output_prev + gains.k_rr * (error - gains.z_rr * state.pi_error_prev)
    state.pi_output_prev = output
    state.pi_error_prev = error
    return state, output


def integral_step(state_i: float, error: float, k_pi: float,
                  clamped: bool) -> float:
    """One step of a scalar integrator: state += k_pi * error, unless the
    caller reports the corresponding budget as clamped, in which case the
    state is held (anti-windup freeze)."""
    if clamped:
        return state_i
    return state_i + k_pi * error


def bcc_compute(state: ControllerState, set_points: SetPoints,
                gains: CascadeGains,
                last_round: RoundRecord | None) -> tuple[ControllerState, list[int], bool]:
    """Budget computation: run both loops once and emit integer budgets.

    Returns (state, budgets, degenerate).  With no completed round yet
    (last_round None), or a last round whose reported duration is zero
    (the delayed-measurement convention reports no duration for the very
    first round), there is no feedback signal: the preloaded integrators
    are emitted as-is and the loop states stay untouched.  If every
    computed budget rounds to zero the controller is degenerate for this
    round and falls back to the feedforward split theta_i * tau_r_star so
    that time keeps flowing; the flag reports it.
    """
    n = len(set_points.theta_star)
    tau_star = float(set_points.tau_r_star)
    cap = BUDGET_CAP_FACTOR * tau_star
    if last_round is None or last_round.tau_r <= 0:
        budgets = [max(round_half_up(x), 0) for x in state.integrators]
    else:
        if len(last_round.tau_p) != n:
            raise ConfigError(
                f"controller sized for {n} tasks, record has {len(last_round.tau_p)}")
        e_r = tau_star - last_round.tau_r
        state, u = pi_step(state, e_r, gains)
        v = min(max(u, 0.0), cap)
        if v != u:
            state.pi_output_prev = v
        budgets = []
        for i in range(n):
            e_i = set_points.theta_star[i] * v - last_round.tau_p[i]
            # Conditional integration, two cases.  A task that left budget
            # unused was starved of work, so raising its budget cannot
            # raise its run time: positive error there is pure windup.
            # And accumulation never pushes the state outside [0, cap].
            starved = (last_round.tau_p[i] < last_round.budgets[i]
                       and e_i > 0.0)
            tentative = (state.integrators[i] if starved
                         else state.integrators[i] + gains.k_pi * e_i)
            frozen = starved or not (0.0 <= tentative <= cap)
            state.integrators[i] = integral_step(
                state.integrators[i], e_i, gains.k_pi, frozen)
            budgets.append(round_half_up(min(max(tentative, 0.0), cap)))
    degenerate = sum(budgets) <= 0
    if degenerate:
        budgets = [max(round_half_up(th * tau_star), 0)
                   for th in set_points.theta_star]
    return state, budgets, degenerate


def psc_select(budgets: list[int], state: ControllerState,
               round_index: int) -> tuple[ControllerState, Schedule]:
    """Selection: activate every positive-budget task, ordered by a
    rotating cursor over task ids 1..N; the cursor advances one id per
    round.  All budgets zero yields an empty schedule (the simulator
    keeps time flowing with a flagged idle unit)."""
    n = len(budgets)
    order = list(range(state.rr_cursor, n + 1)) + list(range(1, state.rr_cursor))
    entries = tuple((tid, budgets[tid - 1]) for tid in order if budgets[tid - 1] > 0)
    state.rr_cursor = state.rr_cursor % n + 1
    return state, Schedule(round_index=round_index, entries=entries)


@dataclass
class CascadeScheduler:
    """The full scheduler: bcc_compute for budgets, psc_select for order.

    Runs with padded rounds (the plant stretches each round to its total
    budget, modelling unused allocation as slack) so that the measured
    round duration is the quantity the outer loop actually regulates."""

    set_points: SetPoints
    gains: CascadeGains = field(default_factory=CascadeGains)

    name: str = field(default="psc-bcc", init=False)
    padded: bool = field(default=True, init=False)
    bench_deadline_mode: str = field(default="round", init=False)

    def __post_init__(self) -> None:
        self.state = make_controller_state(self.set_points)
        self.last_round_degenerate = False
        self.op_counter = None

    def reset(self, specs: tuple[TaskSpec, ...]) -> None:
        if len(specs) != len(self.set_points.theta_star):
            raise ConfigError(
                f"set points define {len(self.set_points.theta_star)} shares "
                f"but the task set has {len(specs)} tasks")
        self.state = make_controller_state(self.set_points)
        self.last_round_degenerate = False

    def schedule(self, k: int, view) -> Schedule:
        self.state, budgets, degenerate = bcc_compute(
            self.state, self.set_points, self.gains, view.prev)
        self.last_round_degenerate = degenerate
        self.state, sched = psc_select(budgets, self.state, k)
        if self.op_counter is not None and sched.entries:
            n = len(budgets)
            self.op_counter.add(k, "mul", 2 * n + 2)
            self.op_counter.add(k, "sub", n + 2)
            self.op_counter.add(k, "sum", n + 1)
            self.op_counter.add(k, "shift", n)
            self.op_counter.add(k, "switch", len(sched.entries))
        return sched

    def dump_state(self) -> tuple[float, ...]:
        """Outer PI output followed by the inner integrator states
        (trace CSV columns u_k, c_1..c_N)."""
        return (self.state.pi_output_prev, *self.state.integrators)
