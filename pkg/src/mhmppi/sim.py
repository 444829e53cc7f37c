"""Closed-loop simulation: mission completion, abort injection, statistics.

A scenario couples a model, a mission set, obstacles, controller and
weight-law parameters with an initial state and termination settings.
The loop executes the controller's first input through the true dynamics
(no plant mismatch), records per-step telemetry, and stops on completion
of the active mission or after ``max_steps``.

An optional abort specification switches the true dynamics mode at a
given step, selects one backup mission (cheapest current branch average,
or nearest), and hands control to the plain single-horizon controller
toward that mission for the rest of the run -- the recorded weight row
becomes the one-hot of the chosen mission.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import controller as ctrl
from . import mppi
from .cost import MissionSet, ObstacleSet, cost_vector, distance
from .dynamics import DynamicsModel, step
from .errors import ConfigError
from .multi_horizon import expand
from .weights import WeightLawParams, desired_weights

ABORT_POLICIES = ("min_cost", "nearest")


@dataclass(frozen=True)
class AbortSpec:
    """Inject a primary-mission abort: at ``step``, switch the true
    dynamics to ``new_mode`` and continue toward one backup mission."""

    step: int
    new_mode: int = 0
    policy: str = "min_cost"

    def __post_init__(self):
        if self.step < 0:
            raise ConfigError(f"abort step must be >= 0, got {self.step}")
        if self.policy not in ABORT_POLICIES:
            raise ConfigError(f"abort policy must be one of {ABORT_POLICIES}")


@dataclass(frozen=True)
class Scenario:
    name: str
    model: DynamicsModel
    missions: MissionSet
    obstacles: ObstacleSet
    controller: ctrl.ControllerParams
    weight_law: WeightLawParams
    x0: np.ndarray
    max_steps: int = 400
    completion_tol: float = 0.5
    completion_metric: str = "position"
    abort: AbortSpec | None = None

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (self.model.n_x,):
            raise ConfigError(f"x0 must have dim {self.model.n_x}, got shape {x0.shape}")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.completion_tol <= 0.0:
            raise ConfigError(f"completion_tol must be > 0, got {self.completion_tol}")
        if self.missions.n_alternatives != self.controller.n_alternatives:
            raise ConfigError(
                f"{self.missions.n_alternatives} backup missions but controller "
                f"expects {self.controller.n_alternatives}"
            )
        for i, mission in enumerate(self.missions.missions):
            if mission.target.shape != (self.model.n_x,):
                raise ConfigError(
                    f"missions[{i}].target must have dim {self.model.n_x}"
                )
            self.model.mode_scale(mission.mode)  # validates the mode index
        if self.abort is not None:
            if self.abort.step >= self.max_steps:
                raise ConfigError(
                    f"abort step {self.abort.step} is beyond max_steps {self.max_steps}"
                )
            if self.missions.n_alternatives < 1:
                raise ConfigError("abort injection needs at least one backup mission")
            self.model.mode_scale(self.abort.new_mode)


@dataclass
class StepRecord:
    step: int
    state: np.ndarray
    inp: np.ndarray
    alpha: np.ndarray
    cost_mean: float
    cost_std: float
    seconds: float


@dataclass(frozen=True)
class Termination:
    kind: str  # "completed" | "aborted_completed" | "max_steps"
    mission: int | None
    steps: int

    def label(self) -> str:
        if self.mission is None:
            return self.kind
        return f"{self.kind}:{self.mission}"

    @property
    def reached_goal(self) -> bool:
        return self.kind in ("completed", "aborted_completed")

    @classmethod
    def from_label(cls, label: str, steps: int) -> "Termination":
        kind, _, mission = label.partition(":")
        return cls(kind, int(mission) if mission else None, steps)


@dataclass
class ClosedLoopTrace:
    records: list
    termination: Termination
    final_state: np.ndarray
    meta: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)  # in-memory only

    @property
    def states(self) -> np.ndarray:
        """All visited states including the final one; (T+1, n_x)."""
        rows = [r.state for r in self.records] + [self.final_state]
        return np.stack(rows)


def is_completed(x, target, metric: str = "position", tol: float = 0.5) -> bool:
    """Mission completion: within ``tol`` of the target (boundary counts)."""
    if tol <= 0.0:
        raise ConfigError(f"completion tolerance must be > 0, got {tol}")
    return bool(distance(x, target, metric) <= tol)


def _choose_backup(scenario: Scenario, x: np.ndarray, state: ctrl.ControllerState) -> int:
    """Backup mission for an abort at the current state."""
    missions = scenario.missions
    if scenario.abort.policy == "nearest":
        dists = [
            distance(x, mission.target, scenario.completion_metric)
            for mission in missions.missions[1:]
        ]
        return 1 + int(np.argmin(dists))
    shifted = state.inputs.shift()
    plan = expand(scenario.model, x, shifted, missions.modes)
    costs = cost_vector(plan, shifted, missions, scenario.obstacles)
    return 1 + int(np.argmin(costs[1:]))


def run_closed_loop(scenario: Scenario, seed: int | None = None) -> ClosedLoopTrace:
    """Run one scenario to completion, abort handover included."""
    params = scenario.controller if seed is None else scenario.controller.with_seed(seed)
    model, missions, obstacles = scenario.model, scenario.missions, scenario.obstacles
    n_missions = len(missions)

    x = scenario.x0.copy()
    mode = 0
    goal = 0
    state = ctrl.init_state(x, params, missions, scenario.weight_law)
    backup_state: mppi.MppiState | None = None

    records: list[StepRecord] = []
    diags = []
    termination = None
    for t in range(scenario.max_steps):
        if scenario.abort is not None and t == scenario.abort.step:
            goal = _choose_backup(scenario, x, state)
            mode = scenario.abort.new_mode
            # The stored branch plan for an abort right after the executed
            # input becomes the warm start of the single-horizon controller.
            warm = np.vstack([state.inputs.tail(goal, 0), np.zeros((1, params.n_u))])
            backup_state = mppi.init_mppi_state(params, warm, state.step_index)

        target = missions[goal].target
        if is_completed(x, target, scenario.completion_metric, scenario.completion_tol):
            kind = "completed" if backup_state is None else "aborted_completed"
            termination = Termination(kind, goal, t)
            break

        if backup_state is None:
            u, state, diag = ctrl.control_step(
                x, state, model, missions, obstacles, params, scenario.weight_law
            )
            alpha = diag.alpha
        else:
            u, backup_state, diag = mppi.mppi_step(
                x, backup_state, model, missions[goal], obstacles, params, mode
            )
            alpha = np.zeros(n_missions)
            alpha[goal] = 1.0
            diag.alpha = alpha

        records.append(
            StepRecord(t, x.copy(), u, alpha, diag.cost_mean, diag.cost_std, diag.seconds)
        )
        diags.append(diag)
        x = step(model, x, u, mode)
    else:
        termination = Termination("max_steps", None, scenario.max_steps)

    meta = {
        "scenario": scenario.name,
        "seed": int(params.seed),
        "n_missions": n_missions,
        "targets": [mission.target.tolist() for mission in missions.missions],
    }
    return ClosedLoopTrace(records, termination, x, meta, diags)


def _path_length(trace: ClosedLoopTrace) -> float:
    pos = trace.states[:, :2]
    return float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))


def _min_target_distances(trace: ClosedLoopTrace) -> np.ndarray:
    """Min-over-time position distance to each mission target."""
    targets = np.asarray(trace.meta["targets"], dtype=float)
    pos = trace.states[:, :2]
    d = np.linalg.norm(pos[:, None, :] - targets[None, :, :2], axis=-1)
    return d.min(axis=0)


def analyze(traces, group_key=None) -> list[dict]:
    """Aggregate per-group statistics of closed-loop runs.

    ``group_key`` maps a trace to its group label (default: the trace's
    ``meta['group']``, falling back to the scenario name).  Per-trace
    quantities are averaged within each group; the implied control
    frequency is the mean of per-trace frequencies.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("analyze() needs at least one trace")
    if group_key is None:
        group_key = lambda tr: tr.meta.get("group", tr.meta.get("scenario", "all"))

    groups: dict = {}
    for trace in traces:
        groups.setdefault(group_key(trace), []).append(trace)

    rows = []
    for label in sorted(groups, key=str):
        members = groups[label]
        cost_means, cost_stds, secs, freqs, lengths = [], [], [], [], []
        min_dists = []
        steps, completed = [], 0
        for trace in members:
            steps.append(len(trace.records))
            completed += int(trace.termination.reached_goal)
            lengths.append(_path_length(trace))
            min_dists.append(_min_target_distances(trace))
            if trace.records:
                cost_means.append(float(np.mean([r.cost_mean for r in trace.records])))
                cost_stds.append(float(np.mean([r.cost_std for r in trace.records])))
                mean_sec = float(np.mean([r.seconds for r in trace.records]))
                secs.append(mean_sec)
                freqs.append(1.0 / mean_sec if mean_sec > 0 else float("inf"))
        min_dists = np.stack(min_dists)  # (runs, n_missions)
        row = {
            "group": label,
            "n_runs": len(members),
            "completion_rate": completed / len(members),
            "mean_steps": float(np.mean(steps)),
            "mean_cost_mean": float(np.mean(cost_means)) if cost_means else float("nan"),
            "mean_cost_std": float(np.mean(cost_stds)) if cost_stds else float("nan"),
            "mean_step_seconds": float(np.mean(secs)) if secs else float("nan"),
            "mean_frequency_hz": float(np.mean(freqs)) if freqs else float("nan"),
            "mean_path_length": float(np.mean(lengths)),
        }
        n_missions = min_dists.shape[1]
        for i in range(1, n_missions):
            row[f"mean_min_dist_alt{i}"] = float(np.mean(min_dists[:, i]))
        if n_missions > 1:
            row["mean_min_dist_nearest_alt"] = float(
                np.mean(min_dists[:, 1:].min(axis=1))
            )
        rows.append(row)
    return rows
