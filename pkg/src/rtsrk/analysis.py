"""Convergence studies, conservation tracking and error-indicator reports.

The studies all share a pattern: sweep a step grid, estimate an error per
level from an ensemble, flag levels that Monte Carlo noise dominates, and
fit a log-log slope on the trustworthy levels.  Reference solutions come
from the exact flow when one exists and from a fine fourth-order run
otherwise.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from .ensembles import Ensemble, ms_error, run_ensemble, std_indicator, weak_error
from .integrate import Trajectory, integrate_deterministic, run_batch
from .problems import FirstIntegral, OdeSystem
from .randsteps import StepDistribution, derive_seed
from .steppers import ExplicitRungeKutta, RK4, step_embedded_euler_heun

# A reference run must be at least this much finer than the study grid.
REFERENCE_REFINEMENT = 64


@dataclasses.dataclass
class SeriesReport:
    """A labelled time series."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""


@dataclasses.dataclass
class ConvergenceStudy:
    """Errors over a step grid with the fitted and predicted orders."""

    h_grid: np.ndarray
    errors: np.ndarray
    stderrs: np.ndarray
    flagged: np.ndarray          # True where noise dominates the estimate
    fitted_order: float
    theory_order: float
    m_traj: int
    base_seed: int
    failed_counts: np.ndarray
    fit_includes_flagged: bool   # True when too few clean levels remained
    label: str = ""


def fit_order(h_grid, errors) -> float:
    """Least-squares slope of log error against log step."""
    h = np.asarray(h_grid, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1 or h.size < 2:
        raise ValueError("need matching 1-d grids with at least two points")
    if np.any(e < 0):
        raise ValueError("errors must be nonnegative")
    if np.any(e == 0):
        raise ValueError(
            "zero error level: the estimate hit the noise floor; "
            "increase the sample size or narrow the step grid"
        )
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def split_slopes(h_grid, values, min_points: int = 3) -> tuple:
    """Best two-segment log-log fit: (coarse slope, fine slope, split index).

    The split index is shared by both segments; it is chosen to minimize
    the total squared residual.  The grid is assumed ordered coarse to fine.
    """
    h = np.log(np.asarray(h_grid, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    n = h.size
    if n < 2 * min_points - 1:
        raise ValueError("not enough points for a two-segment fit")
    best = None
    for j in range(min_points - 1, n - min_points + 1):
        s1, i1 = np.polyfit(h[: j + 1], v[: j + 1], 1)
        s2, i2 = np.polyfit(h[j:], v[j:], 1)
        sse = float(
            np.sum((v[: j + 1] - (s1 * h[: j + 1] + i1)) ** 2)
            + np.sum((v[j:] - (s2 * h[j:] + i2)) ** 2)
        )
        if best is None or sse < best[0]:
            best = (sse, float(s1), float(s2), j)
    _, s_coarse, s_fine, j = best
    return s_coarse, s_fine, j


def reference_solution(
    problem: OdeSystem, t_final: float, h_ref: Optional[float] = None, y0=None
) -> np.ndarray:
    """State at t_final: the exact flow if known, else a fine rk4 run."""
    y0 = problem.default_y0 if y0 is None else np.asarray(y0, dtype=float)
    if problem.exact_flow is not None:
        return np.asarray(problem.exact_flow(t_final, y0), dtype=float)
    if h_ref is None:
        raise ValueError("problem has no exact flow; pass h_ref")
    n = int(round(t_final / h_ref))
    if abs(n * h_ref - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError("h_ref must divide the final time")
    states, failed = run_batch(
        ExplicitRungeKutta(RK4), problem, y0[None, :], n, float(h_ref),
        record=np.array([0, n]),
    )
    if failed[0] >= 0:
        raise RuntimeError("reference run diverged")
    return states[0, -1]


def _steps_for(h: float, t_final: float) -> int:
    n = int(round(t_final / h))
    if n < 1 or abs(n * h - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"step {h} does not divide the final time {t_final}")
    return n


def _parallel(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _strong_theory(dist: StepDistribution, q: float) -> float:
    g = dist.variance_decay_exponent
    return float(q) if math.isinf(g) else min((g - 1.0) / 2.0, float(q))


def _weak_theory(dist: StepDistribution, q: float) -> float:
    g = dist.variance_decay_exponent
    return float(q) if math.isinf(g) else min(g - 1.0, float(q))


def _finish_study(h_grid, errors, stderrs, flagged, failed, theory, m_traj,
                  base_seed, label) -> ConvergenceStudy:
    h_grid = np.asarray(h_grid, dtype=float)
    errors = np.asarray(errors, dtype=float)
    stderrs = np.asarray(stderrs, dtype=float)
    flagged = np.asarray(flagged, dtype=bool)
    clean = ~flagged
    includes_flagged = False
    if np.sum(clean) >= 3:
        fitted = fit_order(h_grid[clean], errors[clean])
    else:
        fitted = fit_order(h_grid, errors)
        includes_flagged = True
    return ConvergenceStudy(
        h_grid=h_grid,
        errors=errors,
        stderrs=stderrs,
        flagged=flagged,
        fitted_order=fitted,
        theory_order=theory,
        m_traj=m_traj,
        base_seed=base_seed,
        failed_counts=np.asarray(failed, dtype=int),
        fit_includes_flagged=includes_flagged,
        label=label,
    )


def study_mean_square(
    stepper,
    p: float,
    h_grid,
    m_traj: int,
    problem: OdeSystem,
    t_final: float,
    base_seed: int = 0,
    dist_kind: str = "uniform",
    half_width_exponent: Optional[float] = None,
    y0=None,
    y_ref=None,
    threads: int = 1,
) -> ConvergenceStudy:
    """Root mean square error at t_final over a step grid, with fitted order.

    Expected order is min(p, q): the step noise contributes like h^p and
    the deterministic map like h^q.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if y_ref is None:
        y_ref = reference_solution(
            problem, t_final,
            h_ref=float(np.min(h_grid)) / REFERENCE_REFINEMENT, y0=y0,
        )
    else:
        y_ref = np.asarray(y_ref, dtype=float)

    def make_dist(h):
        return StepDistribution(dist_kind, h=h, p=p,
                                half_width_exponent=half_width_exponent)

    def level(args):
        idx, h = args
        n = _steps_for(h, t_final)
        ens = run_ensemble(
            "rts", stepper, problem, n, m_traj,
            base_seed=derive_seed(base_seed, idx),
            dist=make_dist(h),
            y0=y0, record=np.array([0, n]), keep_steps=False,
        )
        y = ens.states_at()
        sq = np.sum((y - y_ref) ** 2, axis=-1)
        msq = float(np.mean(sq))
        se_msq = float(np.std(sq, ddof=1)) / math.sqrt(sq.shape[0])
        err = math.sqrt(msq)
        se = se_msq / (2.0 * err) if err > 0 else math.inf
        return err, se, se_msq > 0.5 * msq, ens.failed_count

    rows = _parallel(level, list(enumerate(h_grid)), threads)
    errors, stderrs, flagged, failed = zip(*rows)
    theory = _strong_theory(make_dist(float(h_grid[0])), stepper.order)
    return _finish_study(h_grid, errors, stderrs, flagged, failed, theory,
                         m_traj, base_seed, "mean-square error")


def study_weak(
    stepper,
    p: float,
    h_grid,
    m_traj: int,
    problem: OdeSystem,
    t_final: float,
    phi: Callable,
    base_seed: int = 0,
    dist_kind: str = "uniform",
    half_width_exponent: Optional[float] = None,
    y0=None,
    y_ref=None,
    threads: int = 1,
) -> ConvergenceStudy:
    """Error of E phi(Y_T) against the reference trajectory value.

    Levels whose measured error is within two standard errors of zero are
    flagged as noise-dominated and dropped from the fit whenever at least
    three clean levels remain.
    """
    if not callable(phi):
        raise ValueError("phi must be callable")
    h_grid = np.asarray(h_grid, dtype=float)
    if y_ref is None:
        y_ref = reference_solution(
            problem, t_final,
            h_ref=float(np.min(h_grid)) / REFERENCE_REFINEMENT, y0=y0,
        )
    else:
        y_ref = np.asarray(y_ref, dtype=float)
    phi_ref = float(np.asarray(phi(y_ref[None, :])).reshape(()))

    def make_dist(h):
        return StepDistribution(dist_kind, h=h, p=p,
                                half_width_exponent=half_width_exponent)

    def level(args):
        idx, h = args
        n = _steps_for(h, t_final)
        ens = run_ensemble(
            "rts", stepper, problem, n, m_traj,
            base_seed=derive_seed(base_seed, idx),
            dist=make_dist(h),
            y0=y0, record=np.array([0, n]), keep_steps=False,
        )
        err, se = weak_error(ens, phi, phi_ref)
        return err, se, err < 2.0 * se, ens.failed_count

    rows = _parallel(level, list(enumerate(h_grid)), threads)
    errors, stderrs, flagged, failed = zip(*rows)
    theory = _weak_theory(make_dist(float(h_grid[0])), stepper.order)
    return _finish_study(h_grid, errors, stderrs, flagged, failed, theory,
                         m_traj, base_seed, "weak error")


@dataclasses.dataclass
class MseStudy:
    """Estimator mean squared error over a step grid."""

    h_grid: np.ndarray
    mse: np.ndarray
    stderrs: np.ndarray
    m_traj: int
    n_replicas: int
    bias_exponent: float       # 2 min(2p, q)
    variance_exponent: float   # 2 min(p, q), carries the 1/M factor
    base_seed: int

    def theory_curve(self, scale: float = 1.0) -> np.ndarray:
        return scale * (
            self.h_grid**self.bias_exponent
            + self.h_grid**self.variance_exponent / self.m_traj
        )

    def crossover_index(self) -> int:
        """Grid index nearest the predicted bias/variance crossover."""
        gap = self.bias_exponent - self.variance_exponent
        if gap <= 0:
            raise ValueError("bias term never dominates on this configuration")
        h_star = self.m_traj ** (-1.0 / gap)
        return int(np.argmin(np.abs(np.log(self.h_grid) - math.log(h_star))))


def study_estimator_mse(
    stepper,
    p: float,
    h_grid,
    m_traj: int,
    n_replicas: int,
    problem: OdeSystem,
    t_final: float,
    phi: Callable,
    base_seed: int = 0,
    dist_kind: str = "uniform",
    half_width_exponent: Optional[float] = None,
    y0=None,
    y_ref=None,
    threads: int = 1,
) -> MseStudy:
    """MSE of the plain Monte Carlo estimator against the exact value.

    The reference value is phi at the reference solution; the expected
    decay is C (h^{2 min(2p,q)} + h^{2 min(p,q)} / M).
    """
    from .ensembles import estimator_mse  # local import to avoid cycle noise

    h_grid = np.asarray(h_grid, dtype=float)
    if y_ref is None:
        y_ref = reference_solution(
            problem, t_final,
            h_ref=float(np.min(h_grid)) / REFERENCE_REFINEMENT, y0=y0,
        )
    else:
        y_ref = np.asarray(y_ref, dtype=float)
    z_true = float(np.asarray(phi(y_ref[None, :])).reshape(()))

    def make_dist(h):
        return StepDistribution(dist_kind, h=h, p=p,
                                half_width_exponent=half_width_exponent)

    def level(args):
        idx, h = args
        n = _steps_for(h, t_final)
        return estimator_mse(
            "rts", stepper, problem, n, m_traj, n_replicas, phi, z_true,
            base_seed=derive_seed(base_seed, idx),
            dist=make_dist(h), y0=y0,
        )

    rows = _parallel(level, list(enumerate(h_grid)), threads)
    mse, stderrs = zip(*rows)
    q = float(stepper.order)
    probe = make_dist(float(h_grid[0]))
    return MseStudy(
        h_grid=h_grid,
        mse=np.asarray(mse),
        stderrs=np.asarray(stderrs),
        m_traj=m_traj,
        n_replicas=n_replicas,
        bias_exponent=2.0 * _weak_theory(probe, q),
        variance_exponent=2.0 * _strong_theory(probe, q),
        base_seed=base_seed,
    )


def integral_drift(source, integral: FirstIntegral) -> SeriesReport:
    """|I(Y_k) - I(Y_0)| along a trajectory, or its mean over an ensemble."""
    if isinstance(source, Trajectory):
        vals = integral(source.states)
        drift = np.abs(vals - vals[0])
        return SeriesReport(source.times_nominal, drift, integral.name)
    if isinstance(source, Ensemble):
        states = source.states[source.alive]
        if states.shape[0] == 0:
            raise ValueError("no surviving trajectories")
        vals = integral(states)
        drift = np.mean(np.abs(vals - vals[:, :1]), axis=0)
        times = source.record_idx * source.nominal_h
        return SeriesReport(times, drift, integral.name)
    raise TypeError("expected a Trajectory or an Ensemble")


def log_sample_indices(n_steps: int, per_decade: int = 128) -> np.ndarray:
    """Strictly increasing step indices, log-spaced with a per-decade cap."""
    if n_steps < 1:
        return np.array([], dtype=int)
    decades = math.log10(n_steps) if n_steps > 1 else 1.0
    count = max(int(math.ceil(decades * per_decade)), 1) + 1
    raw = np.round(10 ** np.linspace(0.0, math.log10(n_steps), count)).astype(int)
    return np.unique(np.clip(raw, 1, n_steps))


def plateau_level(report: SeriesReport, t_lo: float, t_hi: float) -> float:
    """Mean of a series over the sample times falling in [t_lo, t_hi]."""
    if t_lo >= t_hi:
        raise ValueError("need t_lo < t_hi")
    mask = (report.times >= t_lo) & (report.times <= t_hi)
    if not np.any(mask):
        raise ValueError("no samples in the requested window")
    return float(np.mean(report.values[mask]))


def hamiltonian_error_longtime(
    stepper,
    dist: StepDistribution,
    problem: OdeSystem,
    m_traj: int,
    t_final: float,
    base_seed: int = 0,
    per_decade: int = 128,
) -> SeriesReport:
    """Mean |Q(Y_k) - Q(y_0)| on a log-spaced time grid over M realizations."""
    if problem.hamiltonian is None:
        raise ValueError(f"problem {problem.name!r} has no Hamiltonian energy")
    n = _steps_for(dist.h, t_final)
    idx = log_sample_indices(n, per_decade)
    ens = run_ensemble(
        "rts", stepper, problem, n, m_traj,
        base_seed=base_seed, dist=dist,
        record=np.concatenate([[0], idx]), keep_steps=False,
    )
    if ens.failed_count:
        raise RuntimeError(f"{ens.failed_count} trajectories diverged")
    energy = problem.hamiltonian.energy
    q_vals = energy(ens.states)
    drift = np.mean(np.abs(q_vals[:, 1:] - q_vals[:, :1]), axis=0)
    return SeriesReport(idx * dist.h, drift, "energy error")


@dataclasses.dataclass
class EstimatorComparison:
    """Error indicators along one deterministic base trajectory."""

    times: np.ndarray
    true_error: np.ndarray
    embedded_estimate: np.ndarray   # accumulated local Euler/Heun gaps
    spread_indicator: np.ndarray    # ensemble spread of the random-step scheme


def error_estimator_comparison(
    stepper,
    problem: OdeSystem,
    h: float,
    m_traj: int,
    t_final: float,
    p: float = 1.0,
    base_seed: int = 0,
    y0=None,
) -> EstimatorComparison:
    """Compare the embedded local-error estimate with the ensemble spread.

    Runs the deterministic base scheme once, accumulates the embedded
    Euler/Heun local estimate along it, runs a random-step ensemble for the
    spread indicator, and measures the true error against a fine reference.
    """
    n = _steps_for(h, t_final)
    base = integrate_deterministic(stepper, problem, h, n, y0=y0)

    _, _, local = step_embedded_euler_heun(problem, base.states[:-1], h)
    embedded = np.concatenate([[0.0], np.cumsum(local)])

    ens = run_ensemble(
        "rts", stepper, problem, n, m_traj,
        base_seed=base_seed,
        dist=StepDistribution("uniform", h=h, p=p),
        y0=y0, keep_steps=False,
    )
    if ens.failed_count:
        raise RuntimeError(f"{ens.failed_count} trajectories diverged")
    alive_states = ens.states[ens.alive]
    spread = np.sqrt(np.sum(np.var(alive_states, axis=0, ddof=1), axis=-1))

    fine = REFERENCE_REFINEMENT
    y0_arr = problem.default_y0 if y0 is None else np.asarray(y0, dtype=float)
    ref_states, ref_failed = run_batch(
        ExplicitRungeKutta(RK4), problem, y0_arr[None, :], n * fine, h / fine,
        record=np.arange(0, n * fine + 1, fine),
    )
    if ref_failed[0] >= 0:
        raise RuntimeError("reference run diverged")
    true_err = np.sqrt(np.sum((base.states - ref_states[0]) ** 2, axis=-1))

    return EstimatorComparison(
        times=base.times_nominal,
        true_error=true_err,
        embedded_estimate=embedded,
        spread_indicator=spread,
    )
