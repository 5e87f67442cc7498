"""Trajectory drivers for deterministic and probabilistic one-step schemes.

Three schemes share one engine:

  det   y_{k+1} = Psi_h(y_k)                      fixed step
  rts   Y_{k+1} = Psi_{H_k}(Y_k)                  i.i.d. random steps H_k
  add   Y_{k+1} = Psi_h(Y_k) + xi_k,              xi_k ~ N(0, h^{2p+1} I)

The engine advances whole batches of trajectories at once; a trajectory
whose state goes non-finite is frozen at its last finite value and its
failure step recorded, so one blow-up cannot poison a batch.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional, Union

import numpy as np

from .problems import OdeSystem
from .randsteps import RngStream, StepDistribution

SCHEME_NAMES = ("det", "rts", "add")


class DivergenceError(RuntimeError):
    """A trajectory state became non-finite."""

    def __init__(self, step_index: int, last_state: np.ndarray):
        super().__init__(f"state became non-finite at step {step_index}")
        self.step_index = step_index
        self.last_state = last_state


@dataclasses.dataclass
class Trajectory:
    """A single discrete path with its realized step sizes."""

    states: np.ndarray        # (N + 1, d)
    realized_steps: np.ndarray  # (N,)
    nominal_h: float
    scheme: str
    seed: Optional[int] = None
    stream_id: Optional[int] = None

    def __post_init__(self):
        if self.states.shape[0] != self.realized_steps.shape[0] + 1:
            raise ValueError("states and steps have inconsistent lengths")

    @property
    def n_steps(self) -> int:
        return self.realized_steps.shape[0]

    @property
    def times_nominal(self) -> np.ndarray:
        return self.nominal_h * np.arange(self.n_steps + 1)

    @property
    def times_realized(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.realized_steps)])

    def state(self, k: int) -> np.ndarray:
        return self.states[k]


StepSource = Callable[[int, int], np.ndarray]
NoiseSource = Callable[[int, int], np.ndarray]


def _normalize_steps(steps, n_steps: int) -> StepSource:
    if callable(steps):
        return steps
    arr = np.asarray(steps, dtype=float)
    if arr.ndim == 0:
        shared = np.full(n_steps, float(arr))
        return lambda k0, k1: shared[k0:k1]
    if arr.ndim == 1:
        if arr.shape[0] != n_steps:
            raise ValueError("shared step array must have length n_steps")
        return lambda k0, k1: arr[k0:k1]
    if arr.ndim == 2:
        if arr.shape[1] != n_steps:
            raise ValueError("per-trajectory step array must be (M, n_steps)")
        return lambda k0, k1: arr[:, k0:k1]
    raise ValueError("steps must be scalar, (N,), (M, N) or a callable")


def run_batch(
    stepper,
    problem: OdeSystem,
    y0: np.ndarray,
    n_steps: int,
    steps,
    noise: Optional[NoiseSource] = None,
    record=None,
    observer=None,
    chunk: int = 8192,
):
    """Advance a batch of trajectories and collect recorded states.

    y0: (M, d) initial states.  steps: scalar, (N,), (M, N) or a callable
    (k0, k1) -> block of step sizes.  noise: optional callable
    (k0, k1) -> (M, k1 - k0, d) additive increments applied after the map.
    record: sorted state indices to keep (None keeps all of 0..N).
    observer(state_index, states, alive) runs after every step.

    Returns (recorded, failed_step): recorded has shape (M, len(record), d)
    and failed_step[i] is -1 for clean rows, else the state index at which
    row i first went non-finite (the row stays frozen from there on).
    """
    y = np.array(y0, dtype=float)
    if y.ndim != 2:
        raise ValueError("y0 must be (M, d)")
    m_rows = y.shape[0]
    step_source = _normalize_steps(steps, n_steps)

    if record is None:
        record_idx = np.arange(n_steps + 1)
    else:
        record_idx = np.asarray(record, dtype=int)
        if record_idx.size and (
            np.any(np.diff(record_idx) <= 0)
            or record_idx[0] < 0
            or record_idx[-1] > n_steps
        ):
            raise ValueError("record indices must be strictly increasing in [0, N]")
    recorded = np.empty((m_rows, record_idx.size, y.shape[1]))
    rec_pos = 0
    if rec_pos < record_idx.size and record_idx[rec_pos] == 0:
        recorded[:, rec_pos] = y
        rec_pos += 1

    failed_step = np.full(m_rows, -1, dtype=int)
    alive = np.ones(m_rows, dtype=bool)
    all_alive = True

    for k0 in range(0, n_steps, chunk):
        k1 = min(k0 + chunk, n_steps)
        h_block = np.asarray(step_source(k0, k1), dtype=float)
        per_row = h_block.ndim == 2
        xi_block = None if noise is None else np.asarray(noise(k0, k1), dtype=float)
        for j in range(k1 - k0):
            h_j = h_block[:, j] if per_row else float(h_block[j])
            # Divergence is handled via the finite mask below, so the IEEE
            # flags raised on the way to inf/nan are expected, not errors.
            with np.errstate(over="ignore", invalid="ignore"):
                y_new = stepper.step(problem, y, h_j)
                if xi_block is not None:
                    y_new = y_new + xi_block[:, j, :]
            if all_alive:
                if np.all(np.isfinite(y_new)):
                    y = y_new
                else:
                    all_alive = False
            if not all_alive:
                bad = ~np.all(np.isfinite(y_new), axis=-1)
                newly = alive & bad
                if np.any(newly):
                    failed_step[newly] = k0 + j + 1
                    alive = alive & ~bad
                y = np.where(alive[:, None], y_new, y)
            k = k0 + j + 1
            if rec_pos < record_idx.size and record_idx[rec_pos] == k:
                recorded[:, rec_pos] = y
                rec_pos += 1
            if observer is not None:
                observer(k, y, alive)
    return recorded, failed_step


def _finish_single(states, failed, steps, nominal_h, scheme, seed, stream_id):
    if failed[0] >= 0:
        k = int(failed[0])
        raise DivergenceError(k, states[0, max(k - 1, 0)].copy())
    return Trajectory(
        states=states[0],
        realized_steps=np.asarray(steps, dtype=float),
        nominal_h=nominal_h,
        scheme=scheme,
        seed=seed,
        stream_id=stream_id,
    )


def integrate_deterministic(
    stepper, problem: OdeSystem, h: float, n_steps: int, y0=None
) -> Trajectory:
    """Fixed-step trajectory y_{k+1} = Psi_h(y_k)."""
    if h <= 0 or n_steps < 0:
        raise ValueError("need h > 0 and n_steps >= 0")
    y0 = problem.default_y0 if y0 is None else np.asarray(y0, dtype=float)
    steps = np.full(n_steps, float(h))
    states, failed = run_batch(stepper, problem, y0[None, :], n_steps, steps)
    return _finish_single(states, failed, steps, float(h), "det", None, None)


def integrate_rts_rk(
    stepper,
    dist: StepDistribution,
    problem: OdeSystem,
    n_steps: int,
    stream: RngStream,
    y0=None,
) -> Trajectory:
    """Random time-step trajectory Y_{k+1} = Psi_{H_k}(Y_k), H_k i.i.d."""
    y0 = problem.default_y0 if y0 is None else np.asarray(y0, dtype=float)
    rng = stream.generator()
    steps = np.asarray(dist.sample(rng, n_steps), dtype=float)
    states, failed = run_batch(stepper, problem, y0[None, :], n_steps, steps)
    return _finish_single(
        states, failed, steps, dist.h, "rts", stream.seed, stream.stream_id
    )


def integrate_additive_noise(
    stepper,
    problem: OdeSystem,
    h: float,
    p: float,
    n_steps: int,
    stream: RngStream,
    y0=None,
) -> Trajectory:
    """Fixed-step trajectory plus additive N(0, h^{2p+1} I) increments."""
    if h <= 0:
        raise ValueError("need h > 0")
    if p < 1.0:
        raise ValueError("additive noise requires p >= 1")
    y0 = problem.default_y0 if y0 is None else np.asarray(y0, dtype=float)
    rng = stream.generator()
    sigma = h ** (p + 0.5)
    xi = sigma * rng.standard_normal((1, n_steps, y0.shape[0]))
    steps = np.full(n_steps, float(h))
    states, failed = run_batch(
        stepper, problem, y0[None, :], n_steps, steps, noise=lambda k0, k1: xi[:, k0:k1]
    )
    return _finish_single(states, failed, steps, float(h), "add", stream.seed, stream.stream_id)
