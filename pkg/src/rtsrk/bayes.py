"""Bayesian inverse problems over ODE forward models.

An observation 𝒴 = G(ϑ) + ε with Gaussian noise ε turns an initial value
problem into an inference task for ϑ.  Replacing the exact flow inside G
with a fixed-step method gives the deterministic posterior, sampled here
by random-walk Metropolis-Hastings; replacing it with a random time-step
integrator gives a marginal posterior over the step noise, sampled by the
pseudo-marginal variant (fresh step draws per proposal, estimate carried
with the accepted state).

For the scalar problem y' = -y observed after a single Euler step all four
posteriors (exact flow, deterministic, additive noise, random time steps)
are available in closed form, which makes the samplers testable against
quadrature-normalized densities.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import warnings
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp, ndtr

from .integrate import run_batch
from .problems import OdeSystem, make_problem
from .randsteps import RngStream, StepDistribution, derive_seed

CHAIN_KINDS = ("rwmh", "pmmh")
TARGET_ACCEPT = 0.25
WARMUP_BLOCK = 50
DEFAULT_WARMUP = 1000
ZERO_ACCEPT_WINDOW = 500
DENSITY_GRID_POINTS = 4001

# Adaptation can only move the proposal scale within these bounds.
_SCALE_BOUNDS = (1e-6, 1e6)


def _chol_spd(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    if not np.allclose(mat, mat.T, rtol=1e-12, atol=0.0):
        raise ValueError(f"{what} must be symmetric")
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} must be positive definite") from None


def _half_mahalanobis(chol: np.ndarray, resid: np.ndarray) -> np.ndarray:
    """0.5 * r^T Sigma^{-1} r for a batch of residual rows."""
    resid = np.atleast_2d(np.asarray(resid, dtype=float))
    z = solve_triangular(chol, resid.T, lower=True)
    return 0.5 * np.sum(z**2, axis=0)


def _trapezoid(values: np.ndarray, dx: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(dx * (np.sum(values) - 0.5 * (values[0] + values[-1])))


@dataclasses.dataclass(frozen=True)
class GaussianPrior:
    """Gaussian prior with density evaluation and sampling."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        chol = _chol_spd(cov, "prior covariance")
        if cov.shape[0] != mean.shape[0]:
            raise ValueError("prior mean and covariance dimensions disagree")
        log_norm = -0.5 * mean.shape[0] * math.log(2.0 * math.pi) - float(
            np.sum(np.log(np.diag(chol)))
        )
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_log_norm", log_norm)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    def logpdf(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        quad = _half_mahalanobis(self._chol, theta - self.mean)
        out = self._log_norm - quad.reshape(theta.shape[:-1] or (1,))
        return out if theta.ndim > 1 else float(out[0])

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        z = rng.standard_normal(shape + (self.dim,))
        return self.mean + z @ self._chol.T


def _identity_observation(y: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float)


@dataclasses.dataclass(frozen=True)
class InverseProblem:
    """Inference setup: parameter-to-system map, prior, observation, data.

    system_for(theta) must return the OdeSystem integrated for parameter
    theta (with its default_y0 set accordingly).  observation_op maps
    (..., d) states at obs_time to (..., k) observables, vectorized over
    leading axes; the default observes the full state.
    """

    system_for: Callable[[np.ndarray], OdeSystem]
    prior: GaussianPrior
    obs_time: float
    noise_cov: np.ndarray
    data: np.ndarray
    observation_op: Callable[[np.ndarray], np.ndarray] = _identity_observation
    name: str = ""

    def __post_init__(self):
        noise_cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        data = np.atleast_1d(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "noise_cov", noise_cov)
        object.__setattr__(self, "data", data)
        chol = _chol_spd(noise_cov, "noise covariance")
        if data.shape[0] != noise_cov.shape[0]:
            raise ValueError("data and noise covariance dimensions disagree")
        if self.obs_time <= 0:
            raise ValueError("need obs_time > 0")
        object.__setattr__(self, "_noise_chol", chol)


def potential(g: np.ndarray, data: np.ndarray, noise_cov: np.ndarray) -> float:
    """Negative log-likelihood 0.5 (g - data)^T Sigma^{-1} (g - data)."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    data = np.atleast_1d(np.asarray(data, dtype=float))
    if g.shape != data.shape:
        raise ValueError("observable and data dimensions disagree")
    chol = _chol_spd(np.atleast_2d(np.asarray(noise_cov, dtype=float)), "noise covariance")
    if chol.shape[0] != g.shape[0]:
        raise ValueError("noise covariance and observable dimensions disagree")
    return float(_half_mahalanobis(chol, g - data)[0])


def _steps_to_time(t_final: float, h: float) -> int:
    n_steps = int(round(t_final / h))
    if n_steps < 1 or abs(n_steps * h - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"h = {h} does not divide the observation time {t_final}")
    return n_steps


def forward(
    ip: InverseProblem,
    theta: np.ndarray,
    scheme: str,
    h: float,
    stepper,
    dist: Optional[StepDistribution] = None,
    stream: Optional[RngStream] = None,
) -> np.ndarray:
    """Integrate the theta-parameterized system to obs_time and observe.

    The deterministic scheme is a pure function of theta.  The rts scheme
    draws its step sequence from dist using stream; a trajectory that goes
    non-finite surfaces as a DivergenceError (treated as infinite potential
    by the samplers).
    """
    if scheme not in ("det", "rts"):
        raise ValueError("scheme must be det or rts")
    if scheme == "rts":
        if dist is None or stream is None:
            raise ValueError("rts forward needs a step distribution and an rng stream")
        if abs(dist.h - h) > 1e-12:
            raise ValueError("dist.h and h disagree")
    n_steps = _steps_to_time(ip.obs_time, h)
    system = ip.system_for(np.atleast_1d(np.asarray(theta, dtype=float)))
    if scheme == "det":
        steps = np.full(n_steps, float(h))
    else:
        steps = np.asarray(dist.sample(stream.generator(), n_steps), dtype=float)
    states, failed = run_batch(
        stepper, system, system.default_y0[None, :], n_steps, steps, record=[n_steps]
    )
    if failed[0] >= 0:
        from .integrate import DivergenceError

        raise DivergenceError(int(failed[0]), states[0, 0])
    return np.atleast_1d(ip.observation_op(states[0, -1]))


@dataclasses.dataclass
class Chain:
    """MCMC output.  Row 0 of samples is the post-warm-up initial state.

    log_estimate_history carries the log-likelihood estimate attached to
    each recorded state (for pmmh the pseudo-marginal estimate, never
    recomputed on rejection).  A chain is a pure function of its seed.
    """

    samples: np.ndarray              # (n + 1, d)
    log_accept_history: np.ndarray   # (n,) log acceptance probabilities
    accepted: np.ndarray             # (n,) accept flags
    log_estimate_history: np.ndarray  # (n + 1,)
    acceptance_rate: float
    seed: int
    kind: str
    proposal_scale: float            # frozen scale used for the recorded part

    def __post_init__(self):
        if self.kind not in CHAIN_KINDS:
            raise ValueError(f"kind must be one of {CHAIN_KINDS}")
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError("acceptance_rate must be in [0, 1]")
        n = self.samples.shape[0] - 1
        if (
            self.log_accept_history.shape[0] != n
            or self.accepted.shape[0] != n
            or self.log_estimate_history.shape[0] != n + 1
        ):
            raise ValueError("chain history lengths disagree")

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0] - 1

    def to_csv(self, path) -> None:
        """Write iteration, parameter components, log-estimate, accept flag."""
        d = self.samples.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["iteration"]
                + [f"theta_{j}" for j in range(d)]
                + ["log_estimate", "accepted"]
            )
            for i in range(self.samples.shape[0]):
                flag = 1 if i == 0 or self.accepted[i - 1] else 0
                writer.writerow(
                    [i]
                    + [repr(float(v)) for v in self.samples[i]]
                    + [repr(float(self.log_estimate_history[i])), flag]
                )


def _make_log_likelihood(ip, stepper, h, dist, n_est):
    """Build log_like(theta, rng) for the MH kernels.

    dist=None gives the deterministic log-likelihood -V(theta); otherwise
    the log of the n_est-sample unbiased estimator of E exp(-V) with fresh
    step draws per call.  Diverged or non-finite rows contribute zero
    likelihood; the all-diverged case returns -inf.
    """
    n_steps = _steps_to_time(ip.obs_time, h)
    n_rows = 1 if dist is None else n_est

    def log_like(theta, rng):
        system = ip.system_for(theta)
        y0 = np.broadcast_to(system.default_y0, (n_rows, system.dim))
        if dist is None:
            steps = np.full(n_steps, float(h))
        else:
            steps = np.asarray(dist.sample(rng, (n_rows, n_steps)), dtype=float)
        states, failed = run_batch(stepper, system, y0, n_steps, steps, record=[n_steps])
        # Diverged rows carry huge or non-finite states; the IEEE flags they
        # raise here are expected and the bad mask below absorbs them.
        with np.errstate(over="ignore", invalid="ignore"):
            g = np.atleast_2d(ip.observation_op(states[:, -1, :]))
            pots = _half_mahalanobis(ip._noise_chol, g - ip.data)
        bad = (failed >= 0) | ~np.isfinite(pots)
        pots = np.where(bad, np.inf, pots)
        return float(logsumexp(-pots) - math.log(n_rows))

    return log_like


def _run_chain(ip, log_like, kind, n_steps, proposal_scale, seed, warmup, theta0):
    if proposal_scale <= 0:
        raise ValueError("proposal_scale must be positive")
    if n_steps < 1:
        raise ValueError("need n_steps >= 1")
    if warmup < 0:
        raise ValueError("need warmup >= 0")
    prior = ip.prior
    rng = RngStream(seed, 0).generator()
    theta = np.array(prior.mean if theta0 is None else theta0, dtype=float)
    if theta.shape != (prior.dim,):
        raise ValueError("theta0 dimension disagrees with the prior")
    log_l = log_like(theta, rng)
    log_post = log_l + float(prior.logpdf(theta))
    if not np.isfinite(log_post):
        raise ValueError("initial state has no posterior mass; pass a different theta0")
    scale = float(proposal_scale)
    tiny = np.finfo(float).tiny

    def mh_step(theta, log_l, log_post):
        prop = theta + scale * (prior.chol @ rng.standard_normal(prior.dim))
        log_l_prop = log_like(prop, rng)
        log_post_prop = log_l_prop + float(prior.logpdf(prop))
        gap = log_post_prop - log_post
        log_alpha = 0.0 if gap >= 0.0 else gap
        # The uniform is drawn unconditionally so every kernel consumes the
        # stream identically (degenerate pmmh must replay rwmh bitwise).
        u = rng.uniform()
        if log_alpha >= 0.0 or math.log(max(u, tiny)) < log_alpha:
            return prop, log_l_prop, log_post_prop, True, log_alpha
        return theta, log_l, log_post, False, log_alpha

    # Warm-up adapts the scale toward the target rate, then freezes it so
    # the recorded chain uses a fixed, valid kernel.
    block_hits = 0
    for k in range(warmup):
        theta, log_l, log_post, ok, _ = mh_step(theta, log_l, log_post)
        block_hits += ok
        if (k + 1) % WARMUP_BLOCK == 0:
            scale = scale * math.exp(block_hits / WARMUP_BLOCK - TARGET_ACCEPT)
            scale = float(np.clip(scale, *_SCALE_BOUNDS))
            block_hits = 0

    samples = np.empty((n_steps + 1, prior.dim))
    log_est = np.empty(n_steps + 1)
    log_acc = np.empty(n_steps)
    accepted = np.zeros(n_steps, dtype=bool)
    samples[0] = theta
    log_est[0] = log_l
    hits = 0
    dry = 0
    warned = False
    for k in range(n_steps):
        theta, log_l, log_post, ok, la = mh_step(theta, log_l, log_post)
        samples[k + 1] = theta
        log_est[k + 1] = log_l
        log_acc[k] = la
        accepted[k] = ok
        hits += ok
        dry = 0 if ok else dry + 1
        if dry == ZERO_ACCEPT_WINDOW and not warned:
            warnings.warn(
                f"no proposal accepted in {ZERO_ACCEPT_WINDOW} consecutive steps; "
                f"proposal scale {scale:.3g} may be too large",
                RuntimeWarning,
            )
            warned = True
    return Chain(
        samples=samples,
        log_accept_history=log_acc,
        accepted=accepted,
        log_estimate_history=log_est,
        acceptance_rate=hits / n_steps,
        seed=seed,
        kind=kind,
        proposal_scale=scale,
    )


def rwmh(
    ip: InverseProblem,
    stepper,
    h: float,
    n_steps: int,
    proposal_scale: float = 0.5,
    seed: int = 0,
    warmup: int = DEFAULT_WARMUP,
    theta0=None,
) -> Chain:
    """Random-walk MH targeting the deterministic posterior e^{-V^h} pi_0.

    The Gaussian proposal covariance is (scale * prior.chol) applied to a
    standard normal, i.e. a scalar multiple of the prior covariance.
    """
    log_like = _make_log_likelihood(ip, stepper, h, None, 1)
    return _run_chain(ip, log_like, "rwmh", n_steps, proposal_scale, seed, warmup, theta0)


def pmmh(
    ip: InverseProblem,
    stepper,
    dist: StepDistribution,
    n_steps: int,
    proposal_scale: float = 0.5,
    n_estimator: int = 1,
    seed: int = 0,
    warmup: int = DEFAULT_WARMUP,
    theta0=None,
) -> Chain:
    """Pseudo-marginal MH targeting the step-noise marginal posterior.

    The likelihood E^xi exp(-V^{h, xi}) is replaced by the n_estimator-
    sample unbiased average with fresh step draws per proposal; the
    estimate travels with the accepted state, which keeps the invariant
    distribution exact for any n_estimator >= 1.  With the degenerate
    step law the kernel replays rwmh bitwise for equal seeds.
    """
    if n_estimator < 1:
        raise ValueError("need n_estimator >= 1")
    log_like = _make_log_likelihood(ip, stepper, dist.h, dist, n_estimator)
    return _run_chain(ip, log_like, "pmmh", n_steps, proposal_scale, seed, warmup, theta0)


@dataclasses.dataclass(frozen=True)
class PosteriorDensity:
    """A normalized 1-d posterior density for the linear example."""

    kind: str
    pdf: Callable[[np.ndarray], np.ndarray]
    mean: Optional[float] = None       # Gaussian kinds only
    variance: Optional[float] = None   # Gaussian kinds only
    support: Optional[tuple] = None    # rts normalization interval

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return self.pdf(np.asarray(theta, dtype=float))


def _gaussian_density(kind: str, mean: float, variance: float) -> PosteriorDensity:
    def pdf(theta):
        return np.exp(-((theta - mean) ** 2) / (2.0 * variance)) / math.sqrt(
            2.0 * math.pi * variance
        )

    return PosteriorDensity(kind=kind, pdf=pdf, mean=mean, variance=variance)


def linear_analytic_posterior(
    kind: str, h: float, sigma: float, d: float, p: float = 1.0
) -> PosteriorDensity:
    """Closed-form posterior for y' = -y observed after one Euler step.

    The prior is N(0, 1) and the datum is d = y0* e^{-h} + noise.  Kinds:
    true (exact flow), det (Euler), add (Euler plus additive N(0, h^{2p+1})
    noise, which shifts sigma^2 by h^{2p+1}), rts (uniform random steps of
    half-width h^{p+1/2}; a Gaussian-CDF difference density, normalized by
    the trapezoid rule on positive support).
    """
    if not 0.0 < h < 1.0:
        raise ValueError("need h in (0, 1)")
    if sigma <= 0:
        raise ValueError("need sigma > 0 (the sigma -> 0 limits are separate)")
    c = 1.0 - h
    if kind == "true":
        denom = sigma**2 + math.exp(-2.0 * h)
        return _gaussian_density("true", d * math.exp(-h) / denom, sigma**2 / denom)
    if kind == "det":
        denom = sigma**2 + c**2
        return _gaussian_density("det", c * d / denom, sigma**2 / denom)
    if kind == "add":
        s2 = sigma**2 + h ** (2.0 * p + 1.0)
        denom = s2 + c**2
        return _gaussian_density("add", c * d / denom, s2 / denom)
    if kind != "rts":
        raise ValueError("kind must be one of true, det, add, rts")

    delta = h ** (p + 0.5)
    lo_slope, hi_slope = c - delta, c + delta
    if lo_slope <= 0:
        raise ValueError("step half-width reaches 1 - h; posterior support is unbounded")
    if d <= 0:
        raise ValueError("rts posterior normalization assumes a positive datum")

    def unnormalized(theta):
        theta = np.asarray(theta, dtype=float)
        safe = np.where(theta > 0, theta, 1.0)
        phi_gap = ndtr((hi_slope * safe - d) / sigma) - ndtr((lo_slope * safe - d) / sigma)
        vals = np.exp(-(safe**2) / 2.0) * phi_gap / safe
        return np.where(theta > 0, vals, 0.0)

    # Support consistent with the prior mass in the experiment regime: the
    # sigma -> 0 endpoints d/(c +- delta), padded on both sides.
    lo = max(d / hi_slope / 2.0, 1e-6)
    hi = 2.0 * d / lo_slope
    grid = np.linspace(lo, hi, DENSITY_GRID_POINTS)
    norm = _trapezoid(unnormalized(grid), grid[1] - grid[0])

    def pdf(theta):
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= lo) & (theta <= hi)
        return np.where(inside, unnormalized(theta) / norm, 0.0)

    return PosteriorDensity(kind="rts", pdf=pdf, support=(lo, hi))


@dataclasses.dataclass(frozen=True)
class LimitLaw:
    """sigma -> 0 limit of a linear-example posterior.

    Dirac limits (true, det) carry mean and zero variance; the additive
    limit is a Gaussian; the rts limit is a truncated density with hard
    support endpoints.
    """

    kind: str
    mean: Optional[float] = None
    variance: Optional[float] = None
    support: Optional[tuple] = None
    pdf: Optional[Callable[[np.ndarray], np.ndarray]] = None


def linear_limit_sigma_zero(
    kind: str, h: float, y0_star: float = 1.0, p: float = 1.0
) -> LimitLaw:
    """Closed-form sigma -> 0 limits of the linear-example posteriors."""
    if not 0.0 < h < 1.0:
        raise ValueError("need h in (0, 1)")
    c = 1.0 - h
    if kind == "true":
        return LimitLaw(kind="true", mean=y0_star, variance=0.0)
    if kind == "det":
        return LimitLaw(kind="det", mean=math.exp(-h) * y0_star / c, variance=0.0)
    if kind == "add":
        s2 = h ** (2.0 * p + 1.0)
        denom = s2 + c**2
        return LimitLaw(
            kind="add", mean=c * math.exp(-h) * y0_star / denom, variance=s2 / denom
        )
    if kind != "rts":
        raise ValueError("kind must be one of true, det, add, rts")
    delta = h ** (p + 0.5)
    if c - delta <= 0:
        raise ValueError("step half-width reaches 1 - h; posterior support is unbounded")
    y_min = math.exp(-h) * y0_star / (c + delta)
    y_max = math.exp(-h) * y0_star / (c - delta)
    grid = np.linspace(y_min, y_max, DENSITY_GRID_POINTS)
    norm = _trapezoid(np.exp(-(grid**2) / 2.0) / grid, grid[1] - grid[0])

    def pdf(theta):
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= y_min) & (theta <= y_max)
        safe = np.where(inside, theta, 1.0)
        return np.where(inside, np.exp(-(safe**2) / 2.0) / safe / norm, 0.0)

    return LimitLaw(kind="rts", support=(y_min, y_max), pdf=pdf)


def hellinger(p_grid: np.ndarray, q_grid: np.ndarray, dx: float) -> float:
    """Hellinger distance of two densities sampled on a shared uniform grid.

    Both inputs must be nonnegative and integrate to 1 within 1e-3 under
    the trapezoid rule; the distance is (0.5 int (sqrt p - sqrt q)^2)^{1/2}.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    if p_grid.shape != q_grid.shape or p_grid.ndim != 1:
        raise ValueError("densities must share one 1-d grid")
    if dx <= 0:
        raise ValueError("need dx > 0")
    if np.any(p_grid < 0) or np.any(q_grid < 0):
        raise ValueError("densities must be nonnegative")
    for name, grid in (("first", p_grid), ("second", q_grid)):
        mass = _trapezoid(grid, dx)
        if abs(mass - 1.0) > 1e-3:
            raise ValueError(f"{name} density integrates to {mass:.6f}, not 1")
    gap = np.sqrt(p_grid) - np.sqrt(q_grid)
    return math.sqrt(max(0.5 * _trapezoid(gap**2, dx), 0.0))


def build_linear_inverse_problem(
    h: float = 0.5, sigma: float = 0.1, y0_star: float = 1.0, z: float = 0.0
) -> InverseProblem:
    """Scalar decay problem: infer y0 from one noisy observation at t = h.

    The datum is y0* e^{-h} + sigma * z for a fixed standard normal
    realization z, so several noise levels can share one z.  The prior is
    N(0, 1); integrating with a single step of size h reproduces the
    closed-form posteriors of linear_analytic_posterior.
    """
    base = make_problem("linear_decay")

    def system_for(theta):
        return dataclasses.replace(base, default_y0=np.atleast_1d(theta))

    return InverseProblem(
        system_for=system_for,
        prior=GaussianPrior(mean=np.zeros(1), cov=np.eye(1)),
        obs_time=h,
        noise_cov=np.array([[sigma**2]]),
        data=np.array([y0_star * math.exp(-h) + sigma * z]),
        name="linear_decay",
    )


def build_henon_heiles_inverse_problem(
    seed: int = 0,
    sigma: float = 5e-4,
    t_obs: float = 10.0,
    prior_scale: float = 0.05,
    h_truth: float = 1e-3,
) -> InverseProblem:
    """Chaotic Hamiltonian problem: infer the initial state from one
    full-state observation at t_obs.

    The datum is a fine fixed-step reference solution plus N(0, sigma^2 I)
    noise.  The prior is Gaussian with covariance prior_scale^2 I centered
    at the true initial condition perturbed by one prior draw (the center
    and chain length are not prescribed by the source experiments; they
    are recorded in the experiment config).
    """
    from .steppers import make_stepper

    base = make_problem("henon_heiles")
    n_ref = _steps_to_time(t_obs, h_truth)
    states, failed = run_batch(
        make_stepper("rk4"),
        base,
        base.default_y0[None, :],
        n_ref,
        np.full(n_ref, h_truth),
        record=[n_ref],
    )
    if failed[0] >= 0:
        raise RuntimeError("reference solve for the observation diverged")
    truth = states[0, -1]
    rng = RngStream(derive_seed(seed, 91), 0).generator()
    data = truth + sigma * rng.standard_normal(base.dim)
    center = base.default_y0 + prior_scale * rng.standard_normal(base.dim)

    def system_for(theta):
        return dataclasses.replace(base, default_y0=np.asarray(theta, dtype=float))

    return InverseProblem(
        system_for=system_for,
        prior=GaussianPrior(mean=center, cov=prior_scale**2 * np.eye(base.dim)),
        obs_time=t_obs,
        noise_cov=sigma**2 * np.eye(base.dim),
        data=data,
        name="henon_heiles",
    )
