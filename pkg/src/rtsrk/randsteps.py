"""Random step-size laws H with mean h and noise scale tied to an order p.

The laws all satisfy: H > 0 almost surely, E H = h, and Var H proportional
to a power of h that shrinks as fast as the local accuracy of the
deterministic map (h^{2p+1} for the uniform and variance-matched lognormal
laws).  Streams are counter-based so trajectories can be reproduced
independently of scheduling.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
from scipy import integrate

DIST_NAMES = ("uniform", "lognormal", "degenerate")


@dataclasses.dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream: (seed, stream_id) fixes all draws."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Derive a child seed from a base seed and an index path, stably."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclasses.dataclass(frozen=True)
class StepDistribution:
    """Law of the random step H for a nominal step h and noise order p.

    kinds:
      uniform     U(h - h^a, h + h^a) with a = p + 1/2;   Var = h^{2p+1}/3
      lognormal   mean exactly h; variance h^{2p+2}, or h^{2p+1} when
                  matched_variance is set
      degenerate  H = h surely (recovers the deterministic method and
                  consumes no randomness when sampled)

    half_width_exponent overrides a, decoupling the noise width from p:
    the law then has standard deviation proportional to h^a.  The weak
    order table is generated with a = p; everything else uses the default.
    """

    kind: str
    h: float
    p: float = 1.0
    matched_variance: bool = False
    half_width_exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind not in DIST_NAMES:
            raise ValueError(
                f"unknown step law {self.kind!r}; available: {', '.join(DIST_NAMES)}"
            )
        if not self.h > 0.0:
            raise ValueError("nominal step h must be positive")
        if self.kind == "uniform":
            if not self.h < 1.0:
                raise ValueError("uniform law requires h < 1")
            if self.width_exponent < 1.0:
                raise ValueError(
                    "uniform law requires a half-width exponent >= 1 "
                    "(p >= 1/2 by default) so the support stays positive"
                )
        if self.kind == "lognormal" and self.width_exponent < 1.0:
            raise ValueError("lognormal law requires a width exponent >= 1")
        if self.matched_variance and self.kind != "lognormal":
            raise ValueError("matched_variance only applies to the lognormal law")
        if self.matched_variance and self.half_width_exponent is not None:
            raise ValueError(
                "half_width_exponent already fixes the variance; "
                "drop matched_variance"
            )

    @property
    def width_exponent(self) -> float:
        """Exponent a: the noise standard deviation scales like h^a."""
        if self.half_width_exponent is not None:
            return self.half_width_exponent
        return self.p + 0.5

    @property
    def half_width(self) -> float:
        return self.h**self.width_exponent

    def _lognormal_params(self) -> tuple:
        if self.half_width_exponent is not None:
            sigma2 = math.log1p(self.h ** (2.0 * self.width_exponent - 2.0))
        elif self.matched_variance:
            sigma2 = math.log1p(self.h ** (2.0 * self.p - 1.0))
        else:
            sigma2 = math.log1p(self.h ** (2.0 * self.p))
        mu = math.log(self.h) - 0.5 * sigma2
        return mu, math.sqrt(sigma2)

    @property
    def mean(self) -> float:
        return self.h

    @property
    def variance(self) -> float:
        if self.kind == "uniform":
            return self.half_width**2 / 3.0
        if self.kind == "lognormal":
            mu, sigma = self._lognormal_params()
            return (math.exp(sigma**2) - 1.0) * math.exp(2.0 * mu + sigma**2)
        return 0.0

    @property
    def variance_decay_exponent(self) -> float:
        """Exponent g with Var H = Theta(h^g); infinite for the sure step."""
        if self.kind == "degenerate":
            return math.inf
        if self.kind == "lognormal" and self.half_width_exponent is None:
            if self.matched_variance:
                return 2.0 * self.p + 1.0
            return 2.0 * self.p + 2.0
        return 2.0 * self.width_exponent

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw steps.  The degenerate law returns h without consuming rng."""
        if self.kind == "uniform":
            delta = self.half_width
            return rng.uniform(self.h - delta, self.h + delta, size)
        if self.kind == "lognormal":
            mu, sigma = self._lognormal_params()
            return rng.lognormal(mu, sigma, size)
        if size is None:
            return np.float64(self.h)
        return np.full(size, self.h)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "degenerate":
            raise ValueError("degenerate law has no density")
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            delta = self.half_width
            inside = (x >= self.h - delta) & (x <= self.h + delta)
            return np.where(inside, 0.5 / delta, 0.0)
        mu, sigma = self._lognormal_params()
        out = np.zeros_like(x)
        pos = x > 0
        xp = np.where(pos, x, 1.0)
        val = np.exp(-((np.log(xp) - mu) ** 2) / (2.0 * sigma**2)) / (
            xp * sigma * math.sqrt(2.0 * math.pi)
        )
        return np.where(pos, val, 0.0)

    def moment_quadrature(self, r: int) -> float:
        """E H^r computed by numerical quadrature over the density."""
        if self.kind == "degenerate":
            return self.h**r
        if self.kind == "uniform":
            delta = self.half_width
            lo, hi = self.h - delta, self.h + delta
        else:
            mu, sigma = self._lognormal_params()
            lo, hi = 0.0, math.exp(mu + 12.0 * sigma)
        val, _ = integrate.quad(lambda x: x**r * float(self.pdf(x)), lo, hi, limit=200)
        return val


def analytic_moments(dist: StepDistribution) -> tuple:
    """Closed-form (mean, variance) of the step law."""
    return dist.mean, dist.variance


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    """Outcome of the empirical step-law checks."""

    n: int
    min_sample: float
    mean_emp: float
    var_emp: float
    mean_ok: bool
    var_ok: bool
    positive_ok: bool
    moment_checks: tuple  # (r, empirical E(H^r - h^r), quadrature value, ok)

    @property
    def passed(self) -> bool:
        return (
            self.positive_ok
            and self.mean_ok
            and self.var_ok
            and all(ok for *_, ok in self.moment_checks)
        )


def validate_assumption1(
    dist: StepDistribution,
    n: int = 10**6,
    tol: float = 0.02,
    seed: int = 0,
) -> ValidationReport:
    """Check positivity, mean, variance and higher moments empirically.

    Moment references come from quadrature over the density, not from the
    sampling code, so a parametrization bug cannot validate itself.
    Statistical slack of three standard errors is added on top of tol.
    """
    rng = RngStream(seed, 0).generator()
    x = np.asarray(dist.sample(rng, n), dtype=float)
    mean_emp = float(np.mean(x))
    var_emp = float(np.var(x, ddof=1)) if n > 1 else 0.0
    min_sample = float(np.min(x))

    positive_ok = min_sample > 0.0
    se_mean = math.sqrt(var_emp / n) if n > 0 else 0.0
    mean_ok = abs(mean_emp - dist.mean) <= tol * dist.mean + 3.0 * se_mean

    var_ref = dist.variance
    if var_ref == 0.0:
        # The sure step still shows roundoff-level spread through np.mean.
        var_ok = var_emp <= (1e-13 * dist.h) ** 2
    else:
        centered = x - mean_emp
        m4 = float(np.mean(centered**4))
        se_var = math.sqrt(max(m4 - var_emp**2, 0.0) / n)
        var_ok = abs(var_emp - var_ref) <= tol * var_ref + 3.0 * se_var

    checks = []
    for r in (2, 3, 4):
        emp = float(np.mean(x**r)) - dist.h**r
        ref = dist.moment_quadrature(r) - dist.h**r
        se_r = float(np.std(x**r, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        if ref != 0.0:
            ok = abs(emp - ref) <= tol * abs(ref) + 3.0 * se_r
        else:
            ok = abs(emp) <= 1e-12 * dist.h**r
        checks.append((r, emp, ref, ok))

    return ValidationReport(
        n=n,
        min_sample=min_sample,
        mean_emp=mean_emp,
        var_emp=var_emp,
        mean_ok=mean_ok,
        var_ok=var_ok,
        positive_ok=positive_ok,
        moment_checks=tuple(checks),
    )
