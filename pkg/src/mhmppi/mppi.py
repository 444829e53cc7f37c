"""Plain single-horizon MPPI toward one mission.

Carries only the N primary inputs: shift, sample K noise perturbations,
simulate, softmax-average.  No branch plans, no weight scheduling.  It
shares the per-sample noise-substream convention of
:mod:`mhmppi.controller` (same key, same counter blocks, primary rows
first), so with the backup-weight gamma at zero the multi-horizon
controller must reproduce this controller's executed inputs bit for bit.

Also used by the closed-loop harness after a mission abort, when only the
chosen backup mission remains.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .controller import (
    ControllerParams,
    NoiseStream,
    StepDiagnostics,
    rollout_primary_batch,
    softmax_weights,
)
from .cost import Mission, ObstacleSet, mission_cost
from .dynamics import DynamicsModel


@dataclass
class MppiState:
    inputs: np.ndarray  # (N, n_u)
    step_index: int = 0


def init_mppi_state(params: ControllerParams, inputs: np.ndarray | None = None,
                    step_index: int = 0) -> MppiState:
    if inputs is None:
        inputs = np.zeros((params.horizon, params.n_u))
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (params.horizon, params.n_u):
        raise ValueError(
            f"warm-start inputs have shape {inputs.shape}, expected "
            f"({params.horizon}, {params.n_u})"
        )
    return MppiState(inputs, step_index)


def mppi_step(
    x: np.ndarray,
    state: MppiState,
    model: DynamicsModel,
    mission: Mission,
    obstacles: ObstacleSet,
    params: ControllerParams,
    mode: int = 0,
) -> tuple[np.ndarray, MppiState, StepDiagnostics]:
    """One single-horizon sampling step toward one mission."""
    t_start = time.perf_counter()
    x = np.asarray(x, dtype=float)
    horizon, n_u = params.horizon, params.n_u

    shifted = np.vstack([state.inputs[1:], np.zeros((1, n_u))])

    stream = NoiseStream(params.seed, state.step_index, params.noise_chol)
    noise = np.empty((params.n_samples, horizon, n_u))
    for q in range(params.n_samples):
        noise[q] = stream.rows(q, horizon)

    inputs = shifted[None] + noise
    states = rollout_primary_batch(model, x, inputs, model.mode_scale(mode))
    sample_costs = mission_cost(mission, states, inputs, obstacles)
    if params.control_cost:
        sample_costs = sample_costs + params.temperature * np.einsum(
            "qdc,dc->q",
            noise,
            np.linalg.solve(params.noise_cov, shifted.T).T,
            optimize=False,
        )

    weights = softmax_weights(sample_costs, params.temperature)
    new_inputs = shifted + np.einsum("q,qdc->dc", weights, noise, optimize=False)
    u_exec = new_inputs[0].copy()

    diag = StepDiagnostics(
        alpha=np.ones(1),  # single mission; the closed-loop harness re-labels
        alpha_desired=np.ones(1),
        cost_mean=float(sample_costs.mean()),
        cost_std=float(sample_costs.std()),
        seconds=time.perf_counter() - t_start,
        plan_costs=np.array([]),
        tail_costs=np.array([]),
        n_rollouts=params.n_samples,
        n_sim_steps=params.n_samples * horizon,
    )
    return u_exec, MppiState(new_inputs, state.step_index + 1), diag
