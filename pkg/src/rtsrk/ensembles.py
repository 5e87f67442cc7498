"""Monte Carlo ensembles of trajectories and the estimators built on them.

Each trajectory i of an ensemble draws from its own substream
(base_seed, stream_id = i), so results do not depend on execution order or
worker count, and any single trajectory can be reproduced in isolation.
Trajectories whose state blows up are recorded as failed and excluded from
every estimator; callers that require clean runs check failed_count.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional

import numpy as np

from .integrate import SCHEME_NAMES, Trajectory, run_batch
from .problems import OdeSystem
from .randsteps import RngStream, StepDistribution, derive_seed

# Keep per-trajectory steps only when the matrix stays this small.
_KEEP_STEPS_BUDGET = 4 << 20


@dataclasses.dataclass
class Ensemble:
    """M trajectories sharing one scheme, stepper, problem and grid."""

    states: np.ndarray          # (M, R, d) at the recorded indices
    record_idx: np.ndarray      # (R,) state indices in [0, N]
    failed_step: np.ndarray     # (M,) -1 when clean
    n_steps: int
    nominal_h: float
    scheme: str
    base_seed: Optional[int]
    realized_steps: Optional[np.ndarray] = None   # (M, N) when kept
    dist: Optional[StepDistribution] = None
    noise_p: Optional[float] = None

    @property
    def m_total(self) -> int:
        return self.states.shape[0]

    @property
    def alive(self) -> np.ndarray:
        return self.failed_step < 0

    @property
    def failed_count(self) -> int:
        return int(np.sum(~self.alive))

    def _position(self, k: Optional[int]) -> int:
        if k is None:
            return self.record_idx.size - 1
        hits = np.nonzero(self.record_idx == k)[0]
        if hits.size == 0:
            raise ValueError(f"state index {k} was not recorded")
        return int(hits[0])

    def states_at(self, k: Optional[int] = None) -> np.ndarray:
        """States of the surviving trajectories at index k (default: final)."""
        return self.states[self.alive, self._position(k), :]

    def trajectory(self, i: int) -> Trajectory:
        """Rebuild trajectory i; requires full recording and kept steps."""
        if self.record_idx.size != self.n_steps + 1:
            raise ValueError("ensemble was not recorded at every step")
        if self.realized_steps is None:
            raise ValueError("per-trajectory steps were not kept")
        return Trajectory(
            states=self.states[i],
            realized_steps=self.realized_steps[i],
            nominal_h=self.nominal_h,
            scheme=self.scheme,
            seed=self.base_seed,
            stream_id=i,
        )


def run_ensemble(
    scheme: str,
    stepper,
    problem: OdeSystem,
    n_steps: int,
    m_traj: int,
    base_seed: int = 0,
    h: Optional[float] = None,
    dist: Optional[StepDistribution] = None,
    p: Optional[float] = None,
    y0=None,
    record=None,
    keep_steps: Optional[bool] = None,
    observer=None,
    chunk: int = 8192,
) -> Ensemble:
    """Run M trajectories of one scheme.

    scheme "det" needs h; "rts" needs dist; "add" needs h and p >= 1.
    record follows run_batch (None keeps every state).  keep_steps defaults
    to keeping the (M, N) realized steps only when they fit a small budget.
    """
    if scheme not in SCHEME_NAMES:
        raise ValueError(f"unknown scheme {scheme!r}; available: {SCHEME_NAMES}")
    if m_traj < 1:
        raise ValueError("need at least one trajectory")
    y0 = problem.default_y0 if y0 is None else np.asarray(y0, dtype=float)
    y0_batch = np.tile(y0, (m_traj, 1))
    if keep_steps is None:
        keep_steps = m_traj * n_steps <= _KEEP_STEPS_BUDGET

    noise = None
    kept: Optional[np.ndarray] = None
    if scheme == "det":
        if h is None:
            raise ValueError("det scheme needs h")
        nominal_h = float(h)
        steps = nominal_h
        if keep_steps:
            kept = np.full((m_traj, n_steps), nominal_h)
    elif scheme == "rts":
        if dist is None:
            raise ValueError("rts scheme needs a step distribution")
        nominal_h = dist.h
        if dist.kind == "degenerate":
            # Shared fixed steps: reproduces the deterministic scheme bitwise.
            steps = nominal_h
            if keep_steps:
                kept = np.full((m_traj, n_steps), nominal_h)
        else:
            gens = [RngStream(base_seed, i).generator() for i in range(m_traj)]
            if keep_steps:
                kept = np.stack([dist.sample(g, n_steps) for g in gens])
                steps = kept
            else:
                def steps(k0, k1, _gens=gens):
                    return np.stack([dist.sample(g, k1 - k0) for g in _gens])
    else:  # add
        if h is None or p is None:
            raise ValueError("add scheme needs h and p")
        if p < 1.0:
            raise ValueError("additive noise requires p >= 1")
        nominal_h = float(h)
        steps = nominal_h
        sigma = nominal_h ** (p + 0.5)
        gens = [RngStream(base_seed, i).generator() for i in range(m_traj)]
        d = y0.shape[0]

        def noise(k0, k1, _gens=gens, _sigma=sigma, _d=d):
            return _sigma * np.stack(
                [g.standard_normal((k1 - k0, _d)) for g in _gens]
            )

        if keep_steps:
            kept = np.full((m_traj, n_steps), nominal_h)

    recorded, failed = run_batch(
        stepper, problem, y0_batch, n_steps, steps,
        noise=noise, record=record, observer=observer, chunk=chunk,
    )
    record_idx = (
        np.arange(n_steps + 1) if record is None else np.asarray(record, dtype=int)
    )
    return Ensemble(
        states=recorded,
        record_idx=record_idx,
        failed_step=failed,
        n_steps=n_steps,
        nominal_h=nominal_h,
        scheme=scheme,
        base_seed=base_seed,
        realized_steps=kept,
        dist=dist if scheme == "rts" else None,
        noise_p=p if scheme == "add" else None,
    )


def mc_functional(ens: Ensemble, phi: Callable, k: Optional[int] = None) -> float:
    """Plain Monte Carlo estimate of E phi(Y_k) over surviving trajectories."""
    y = ens.states_at(k)
    if y.shape[0] == 0:
        raise ValueError("no surviving trajectories")
    return float(np.mean(phi(y)))


def ms_error(ens: Ensemble, y_ref: np.ndarray, k: Optional[int] = None) -> float:
    """Root mean square distance to a reference state at index k."""
    y = ens.states_at(k)
    if y.shape[0] == 0:
        raise ValueError("no surviving trajectories")
    diff = y - np.asarray(y_ref, dtype=float)
    return float(np.sqrt(np.mean(np.sum(diff**2, axis=-1))))


def weak_error(
    ens: Ensemble, phi: Callable, phi_ref: float, k: Optional[int] = None
) -> tuple:
    """|E_M phi(Y_k) - phi_ref| together with the Monte Carlo standard error."""
    y = ens.states_at(k)
    if y.shape[0] == 0:
        raise ValueError("no surviving trajectories")
    vals = np.asarray(phi(y), dtype=float)
    err = abs(float(np.mean(vals)) - phi_ref)
    se = float(np.std(vals, ddof=1)) / math.sqrt(vals.shape[0]) if vals.shape[0] > 1 else math.inf
    return err, se


def std_indicator(ens: Ensemble, k: Optional[int] = None) -> float:
    """Spread indicator sqrt(trace Cov(Y_k)) over surviving trajectories."""
    y = ens.states_at(k)
    if y.shape[0] < 2:
        raise ValueError("spread needs at least two surviving trajectories")
    return float(np.sqrt(np.sum(np.var(y, axis=0, ddof=1))))


def estimator_mse(
    scheme: str,
    stepper,
    problem: OdeSystem,
    n_steps: int,
    m_traj: int,
    n_replicas: int,
    phi: Callable,
    z_true: float,
    base_seed: int = 0,
    require_clean: bool = True,
    **scheme_kwargs,
) -> tuple:
    """Mean squared error of the M-sample estimator over independent replicas.

    Returns (mse, stderr).  Each replica r reruns the full ensemble from the
    derived seed (base_seed, r).  n_replicas of at least 16 keeps the MSE
    estimate itself meaningful.
    """
    if n_replicas < 16:
        raise ValueError("need at least 16 replicas for a stable MSE estimate")
    devs = np.empty(n_replicas)
    for r in range(n_replicas):
        ens = run_ensemble(
            scheme, stepper, problem, n_steps, m_traj,
            base_seed=derive_seed(base_seed, r),
            record=np.array([0, n_steps]),
            keep_steps=False,
            **scheme_kwargs,
        )
        if require_clean and ens.failed_count:
            raise RuntimeError(f"replica {r} lost {ens.failed_count} trajectories")
        devs[r] = (mc_functional(ens, phi) - z_true) ** 2
    return float(np.mean(devs)), float(np.std(devs, ddof=1) / math.sqrt(n_replicas))
