"""Run configuration: one JSON document, strictly validated.

Every problem found during validation is collected and reported in a
single aggregated error so a bad config file surfaces all its mistakes at
once.  CLI flags may override scalar fields after parsing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .cascade import CascadeGains, SetPoints
from .engine import DEADLINE_MODES, IDLE_MODES, TAU_R_CONVENTIONS
from .hartstone import baseline_set
from .model import (ConfigError, DisturbanceSpec, TaskSpec,
                    VALID_DISTURBANCE_MODES)
from .policies import build_policy

DEFAULT_SEED = 0


@dataclass
class RunConfig:
    """Everything one simulation run needs, already validated."""

    specs: tuple[TaskSpec, ...]
    policy_name: str
    policy_params: dict = field(default_factory=dict)
    horizon: int = 20000
    disturbance: DisturbanceSpec = field(
        default_factory=lambda: DisturbanceSpec(mode="workload-limited"))
    convention: str = "delayed"
    deadline_mode: str = "exact"
    idle_mode: str = "unit"
    seed: int = DEFAULT_SEED
    controller_dump: bool = False

    def build_policy(self):
        params = dict(self.policy_params)
        if self.policy_name in ("psc-bcc", "psc+bcc", "cascade"):
            tau = params.pop("tau_r_star", None)
            theta = params.pop("theta_star", None)
            if tau is None:
                raise ConfigError("policy: psc-bcc needs tau_r_star")
            if theta is None:
                set_points = SetPoints.from_utilization(self.specs, tau)
            else:
                set_points = SetPoints(tau_r_star=tau, theta_star=tuple(theta))
            gains_cfg = params.pop("gains", None)
            gains = CascadeGains(**gains_cfg) if gains_cfg else CascadeGains()
            return build_policy(self.policy_name, set_points=set_points,
                                gains=gains, **params)
        return build_policy(self.policy_name, **params)


def _parse_tasks(raw, errors: list[str]) -> tuple[TaskSpec, ...]:
    if raw is None:
        errors.append("tasks: field is missing (inline list or "
                      "\"hartstone-baseline\")")
        return ()
    if raw == "hartstone-baseline":
        return baseline_set()
    if not isinstance(raw, list) or not raw:
        errors.append("tasks: must be a non-empty list or "
                      "\"hartstone-baseline\"")
        return ()
    specs = []
    for pos, item in enumerate(raw):
        if not isinstance(item, dict):
            errors.append(f"tasks[{pos}]: must be an object")
            continue
        try:
            specs.append(TaskSpec(
                id=int(item["id"]), period=int(item["period"]),
                workload=float(item["workload"]),
                weight=float(item.get("weight", 0.0))))
        except KeyError as exc:
            errors.append(f"tasks[{pos}]: missing field {exc.args[0]!r}")
        except (TypeError, ValueError, ConfigError) as exc:
            errors.append(f"tasks[{pos}]: {exc}")
    return tuple(specs)


def _parse_disturbance(raw, seed: int, errors: list[str]) -> DisturbanceSpec:
    if raw is None:
        return DisturbanceSpec(mode="workload-limited", seed=seed)
    if not isinstance(raw, dict):
        errors.append("disturbance: must be an object")
        return DisturbanceSpec(mode="workload-limited", seed=seed)
    mode = raw.get("mode", "workload-limited")
    if mode not in VALID_DISTURBANCE_MODES:
        errors.append(f"disturbance.mode: unknown mode {mode!r}; "
                      f"expected one of {VALID_DISTURBANCE_MODES}")
        mode = "workload-limited"
    try:
        return DisturbanceSpec(
            mode=mode,
            amplitude=int(raw.get("amplitude", 0)),
            seed=int(raw.get("seed", seed)),
            step_round=int(raw.get("step_round", 0)),
            step_task=int(raw.get("step_task", 0)),
            step_magnitude=int(raw.get("step_magnitude", 0)))
    except (TypeError, ValueError, ConfigError) as exc:
        errors.append(f"disturbance: {exc}")
        return DisturbanceSpec(mode="workload-limited", seed=seed)


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig.

    Raises ConfigError listing every problem found, one per line."""
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    errors: list[str] = []
    known = {"tasks", "policy", "horizon", "disturbance", "convention",
             "deadline_mode", "idle_mode", "seed", "controller_dump"}
    for key in sorted(set(doc) - known):
        errors.append(f"{key}: unknown field")

    specs = _parse_tasks(doc.get("tasks"), errors)
    ids = [sp.id for sp in specs]
    if specs and (len(set(ids)) != len(ids) or ids != sorted(ids)):
        errors.append("tasks: ids must be unique and ascending")

    policy_raw = doc.get("policy")
    policy_name, policy_params = "", {}
    if policy_raw is None:
        errors.append("policy: field is missing")
    elif isinstance(policy_raw, str):
        policy_name = policy_raw
    elif isinstance(policy_raw, dict):
        if "name" not in policy_raw:
            errors.append("policy.name: field is missing")
        else:
            policy_name = str(policy_raw["name"])
            policy_params = {k: v for k, v in policy_raw.items() if k != "name"}
    else:
        errors.append("policy: must be a string or an object with a name")

    seed = doc.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or seed < 0:
        errors.append(f"seed: must be a nonnegative integer, got {seed!r}")
        seed = DEFAULT_SEED

    horizon = doc.get("horizon", 20000)
    if not isinstance(horizon, int) or horizon <= 0:
        errors.append(f"horizon: must be a positive integer, got {horizon!r}")
        horizon = 1

    convention = doc.get("convention", "delayed")
    if convention not in TAU_R_CONVENTIONS:
        errors.append(f"convention: expected one of {TAU_R_CONVENTIONS}, "
                      f"got {convention!r}")
        convention = "delayed"
    deadline_mode = doc.get("deadline_mode", "exact")
    if deadline_mode not in DEADLINE_MODES:
        errors.append(f"deadline_mode: expected one of {DEADLINE_MODES}, "
                      f"got {deadline_mode!r}")
        deadline_mode = "exact"
    idle_mode = doc.get("idle_mode", "unit")
    if idle_mode not in IDLE_MODES:
        errors.append(f"idle_mode: expected one of {IDLE_MODES}, "
                      f"got {idle_mode!r}")
        idle_mode = "unit"

    disturbance = _parse_disturbance(doc.get("disturbance"), seed, errors)
    controller_dump = bool(doc.get("controller_dump", False))

    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
    return RunConfig(specs=specs, policy_name=policy_name,
                     policy_params=policy_params, horizon=horizon,
                     disturbance=disturbance, convention=convention,
                     deadline_mode=deadline_mode, idle_mode=idle_mode,
                     seed=seed, controller_dump=controller_dump)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
