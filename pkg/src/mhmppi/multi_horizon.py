"""Triangular multi-horizon input structure and its trajectory family.

A plan over horizon N toward one primary target, together with m backup
targets, stores only the independent control inputs:

* the primary horizon ``u_0 .. u_{N-1}`` (N inputs), and
* for every backup mission i in 1..m and every branch-off step
  p in 0..N-2, the tail ``u^i_{p,p+1} .. u^i_{p,N-1}`` (N-1-p inputs)
  that completes an N-step plan should the primary be abandoned right
  after ``u_p``.

That is ``N + m*N*(N-1)/2`` input vectors in total; the simulated state
family holds ``N+1 + m*N*(N-1)/2`` independent states, because each branch
shares the first p+2 states with the primary trajectory.

Flat index convention (the contract shared with the noise sampler and the
sampling update): row d of :attr:`MultiHorizonInput.flat` is

* ``d in [0, N)``                      -- primary input ``u_d``;
* then mission-major, branch-step-major tails: for mission i (1-based) and
  branch step p, rows ``N + (i-1)*N*(N-1)/2 + offset(p) .. + (N-1-p)``,
  where ``offset(p) = sum_{r<p} (N-1-r)``, holding the tail inputs in
  time order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dynamics import DynamicsModel
from .errors import ConfigError


def dims(horizon: int, n_alternatives: int) -> tuple[int, int]:
    """Independent (input, state) element counts of the structure.

    Counts are in whole vectors, not scalars.  Requires horizon >= 2: with
    a shorter horizon there is no step after which a branch could begin.
    """
    if horizon < 2:
        raise ConfigError(f"horizon must be >= 2, got {horizon}")
    if n_alternatives < 0:
        raise ConfigError(f"n_alternatives must be >= 0, got {n_alternatives}")
    tri = horizon * (horizon - 1) // 2
    n_inputs = horizon + n_alternatives * tri
    return n_inputs, n_inputs + 1


@lru_cache(maxsize=None)
def _tail_offsets(horizon: int) -> tuple[int, ...]:
    """offset(p) of each branch tail within one mission's tail block."""
    offs = []
    total = 0
    for p in range(horizon - 1):
        offs.append(total)
        total += horizon - 1 - p
    return tuple(offs)


def tail_length(horizon: int, p: int) -> int:
    return horizon - 1 - p


def _check_branch(horizon: int, n_alternatives: int, i: int, p: int) -> None:
    if not 1 <= i <= n_alternatives:
        raise ValueError(f"mission index {i} out of range 1..{n_alternatives}")
    if not 0 <= p <= horizon - 2:
        raise ValueError(f"branch step {p} out of range 0..{horizon - 2}")


def tail_slice(horizon: int, i: int, p: int) -> slice:
    """Rows of the flat array holding tail (i, p)."""
    tri = horizon * (horizon - 1) // 2
    start = horizon + (i - 1) * tri + _tail_offsets(horizon)[p]
    return slice(start, start + tail_length(horizon, p))


@lru_cache(maxsize=None)
def _shift_source(horizon: int, n_alternatives: int) -> np.ndarray:
    """Row map realizing the receding-horizon shift on the flat storage.

    ``new_flat[d] = old_flat[src[d]]`` with ``src[d] == -1`` meaning a fresh
    zero row.  The map drops the executed first primary input and the whole
    p=0 tail family (their branch-off point has passed), re-indexes the
    surviving tails p -> p-1, appends one zero input to each, and opens a
    fresh all-zero length-1 tail at p = N-2.  Equivalently, every length-N
    plan view of the result equals the corresponding old view with its
    first input removed and a zero input appended.
    """
    n, _ = dims(horizon, n_alternatives)
    src = np.full(n, -1, dtype=np.intp)
    src[: horizon - 1] = np.arange(1, horizon)
    for i in range(1, n_alternatives + 1):
        for p in range(horizon - 2):
            dst = tail_slice(horizon, i, p)
            old = tail_slice(horizon, i, p + 1)
            src[dst.start : dst.stop - 1] = np.arange(old.start, old.stop)
    src.flags.writeable = False
    return src


def _readonly(a: np.ndarray) -> np.ndarray:
    view = a.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class MultiHorizonInput:
    """Immutable triangular input plan; see module docstring for layout."""

    horizon: int
    n_alternatives: int
    flat: np.ndarray  # (n_inputs, n_u)

    def __post_init__(self):
        n, _ = dims(self.horizon, self.n_alternatives)
        flat = np.asarray(self.flat, dtype=float)
        if flat.ndim != 2 or flat.shape[0] != n:
            raise ValueError(f"flat storage must have shape ({n}, n_u), got {flat.shape}")
        flat.flags.writeable = False
        object.__setattr__(self, "flat", flat)

    @classmethod
    def zeros(cls, horizon: int, n_alternatives: int, n_u: int) -> "MultiHorizonInput":
        n, _ = dims(horizon, n_alternatives)
        return cls(horizon, n_alternatives, np.zeros((n, n_u)))

    @classmethod
    def from_parts(cls, primary, tails=()) -> "MultiHorizonInput":
        """Build from an (N, n_u) primary and tails[i-1][p] input lists."""
        primary = np.asarray(primary, dtype=float)
        horizon = primary.shape[0]
        n_alternatives = len(tails)
        n, _ = dims(horizon, n_alternatives)
        flat = np.zeros((n, primary.shape[1]))
        flat[:horizon] = primary
        for i, mission_tails in enumerate(tails, start=1):
            if len(mission_tails) != horizon - 1:
                raise ValueError(f"mission {i}: expected {horizon - 1} tails")
            for p, tail in enumerate(mission_tails):
                tail = np.asarray(tail, dtype=float)
                if tail.shape[0] != tail_length(horizon, p):
                    raise ValueError(
                        f"tail ({i},{p}): expected {tail_length(horizon, p)} inputs"
                    )
                flat[tail_slice(horizon, i, p)] = tail
        return cls(horizon, n_alternatives, flat)

    @property
    def n_u(self) -> int:
        return self.flat.shape[1]

    @property
    def primary(self) -> np.ndarray:
        return self.flat[: self.horizon]

    def tail(self, i: int, p: int) -> np.ndarray:
        """Inputs of branch (i, p) after the shared prefix; read-only view."""
        _check_branch(self.horizon, self.n_alternatives, i, p)
        return self.flat[tail_slice(self.horizon, i, p)]

    def branch_view(self, i: int, p: int) -> np.ndarray:
        """The full N-input plan for aborting to mission i after input p.

        Entries 0..p are the shared primary inputs (same values, not
        independent storage); the array is read-only to keep it that way.
        """
        _check_branch(self.horizon, self.n_alternatives, i, p)
        return _readonly(np.concatenate([self.flat[: p + 1], self.tail(i, p)]))

    def shift(self) -> "MultiHorizonInput":
        """Receding-horizon shift: drop the executed input, pad with zeros."""
        src = _shift_source(self.horizon, self.n_alternatives)
        out = np.where((src >= 0)[:, None], self.flat[src], 0.0)
        return MultiHorizonInput(self.horizon, self.n_alternatives, out)

    def with_flat(self, flat: np.ndarray) -> "MultiHorizonInput":
        return MultiHorizonInput(self.horizon, self.n_alternatives, flat)


@dataclass(frozen=True)
class MultiHorizonTrajectory:
    """State family produced by simulating a MultiHorizonInput.

    ``primary_states`` has N+1 rows; ``tail_states[i-1][p]`` holds the
    N-1-p states strictly after the prefix shared with the primary
    trajectory (states 0..p+1).
    """

    horizon: int
    n_alternatives: int
    primary_states: np.ndarray
    tail_states: tuple

    @property
    def n_x(self) -> int:
        return self.primary_states.shape[1]

    def branch_states(self, i: int, p: int) -> np.ndarray:
        """Full N+1 state sequence of branch (i, p); prefix aliases primary."""
        _check_branch(self.horizon, self.n_alternatives, i, p)
        return _readonly(
            np.concatenate([self.primary_states[: p + 2], self.tail_states[i - 1][p]])
        )


def expand(
    model: DynamicsModel,
    x0: np.ndarray,
    inputs: MultiHorizonInput,
    mission_modes=None,
) -> MultiHorizonTrajectory:
    """Simulate every plan in the structure from the current state.

    ``mission_modes[i]`` is the dynamics mode used for mission i's inputs
    (default: mode 0 everywhere).  Shared prefixes are simulated once on
    the primary trajectory and never recomputed per branch.
    """
    horizon, m = inputs.horizon, inputs.n_alternatives
    if mission_modes is None:
        mission_modes = (0,) * (m + 1)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n_x,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({model.n_x},)")

    primary_states = np.empty((horizon + 1, model.n_x))
    primary_states[0] = x0
    scale0 = model.mode_scale(mission_modes[0])
    for k in range(horizon):
        primary_states[k + 1] = model.update(primary_states[k], scale0 * inputs.primary[k])

    tail_states = []
    for i in range(1, m + 1):
        scale = model.mode_scale(mission_modes[i])
        mission_states = []
        for p in range(horizon - 1):
            tail = inputs.tail(i, p)
            states = np.empty((len(tail), model.n_x))
            x = primary_states[p + 1]
            for k in range(len(tail)):
                x = model.update(x, scale * tail[k])
                states[k] = x
            states.flags.writeable = False
            mission_states.append(states)
        tail_states.append(tuple(mission_states))
    primary_states.flags.writeable = False
    return MultiHorizonTrajectory(horizon, m, primary_states, tuple(tail_states))
