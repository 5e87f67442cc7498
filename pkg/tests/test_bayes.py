"""Bayesian inversion: priors, potentials, samplers, analytic posteriors."""

import csv
import math

import numpy as np
import pytest
from scipy import stats

from rtsrk.bayes import (
    Chain,
    GaussianPrior,
    InverseProblem,
    build_henon_heiles_inverse_problem,
    build_linear_inverse_problem,
    forward,
    hellinger,
    linear_analytic_posterior,
    linear_limit_sigma_zero,
    pmmh,
    potential,
    rwmh,
)
from rtsrk.randsteps import RngStream, StepDistribution
from rtsrk.steppers import make_stepper

EXACT_TOL = 1e-12
CLOSED_FORM_TOL = 1e-10
KS_LEVEL = 0.05

EULER = make_stepper("euler")
D_OBS = math.exp(-0.5)


def test_gaussian_prior_matches_scipy():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 3))
    cov = a @ a.T + 3.0 * np.eye(3)
    mean = np.array([1.0, -2.0, 0.5])
    prior = GaussianPrior(mean, cov)
    pts = rng.standard_normal((20, 3))
    want = stats.multivariate_normal(mean, cov).logpdf(pts)
    assert np.allclose(prior.logpdf(pts), want, atol=1e-10)
    draws = prior.sample(RngStream(1, 0).generator(), 50_000)
    assert np.allclose(np.mean(draws, axis=0), mean, atol=0.05)
    assert np.allclose(np.cov(draws.T), cov, atol=0.15)


def test_gaussian_prior_rejects_bad_covariance():
    with pytest.raises(ValueError):
        GaussianPrior(np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        GaussianPrior(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_potential_values():
    eye = np.array([[1.0]])
    g, d = np.array([2.0]), np.array([2.0])
    assert potential(g, d, eye) == 0.0
    assert abs(potential(np.array([3.0]), d, eye) - 0.5) < EXACT_TOL
    # Quadrupling the noise variance quarters the quadratic form.
    assert abs(potential(np.array([3.0]), d, 4.0 * eye) - 0.125) < EXACT_TOL


def test_inverse_problem_validation():
    ip = build_linear_inverse_problem()
    assert ip.data.shape == (1,)
    with pytest.raises(ValueError):
        InverseProblem(
            system_for=ip.system_for, prior=ip.prior, obs_time=0.0,
            noise_cov=np.eye(1), data=np.zeros(1),
        )
    with pytest.raises(ValueError):
        InverseProblem(
            system_for=ip.system_for, prior=ip.prior, obs_time=0.5,
            noise_cov=np.eye(2), data=np.zeros(1),
        )


def test_linear_problem_construction():
    ip = build_linear_inverse_problem(h=0.5, sigma=0.1, y0_star=1.0, z=0.0)
    assert abs(ip.data[0] - D_OBS) < EXACT_TOL
    assert ip.obs_time == 0.5
    sys_theta = ip.system_for(np.array([2.5]))
    assert sys_theta.default_y0[0] == 2.5
    shifted = build_linear_inverse_problem(z=1.0)
    assert abs(shifted.data[0] - (D_OBS + 0.1)) < EXACT_TOL


def test_forward_deterministic_euler():
    ip = build_linear_inverse_problem(h=0.25)
    out = forward(ip, np.array([2.0]), "det", 0.25, EULER)
    assert abs(out[0] - 2.0 * 0.75) < EXACT_TOL  # one Euler step of y' = -y
    with pytest.raises(ValueError):
        forward(ip, np.array([2.0]), "rts", 0.25, EULER)  # missing dist/stream
    dist = StepDistribution("uniform", h=0.5, p=1.0)
    with pytest.raises(ValueError):
        forward(ip, np.array([2.0]), "rts", 0.25, EULER,
                dist=dist, stream=RngStream(0, 0))  # dist.h disagrees


def test_forward_rts_reproducible():
    ip = build_linear_inverse_problem(h=0.25)
    dist = StepDistribution("uniform", h=0.25, p=1.0)
    a = forward(ip, np.array([1.5]), "rts", 0.25, EULER,
                dist=dist, stream=RngStream(9, 4))
    b = forward(ip, np.array([1.5]), "rts", 0.25, EULER,
                dist=dist, stream=RngStream(9, 4))
    assert np.array_equal(a, b)


def test_analytic_posteriors_closed_forms():
    # Gaussian family at h = 0.5, sigma = 0.1, data at the exact-flow value.
    cases = {
        "true": (0.9735365333213165, 0.02646346667868349),
        "det": (1.1664051148319874, 0.03846153846153847),
        "add": (0.7877021554709525, 0.35064935064935066),
    }
    for kind, (mean, var) in cases.items():
        dens = linear_analytic_posterior(kind, h=0.5, sigma=0.1, d=D_OBS, p=1.0)
        assert abs(dens.mean - mean) < CLOSED_FORM_TOL
        assert abs(dens.variance - var) < CLOSED_FORM_TOL


def test_analytic_posteriors_normalized():
    for kind in ("true", "det", "add", "rts"):
        dens = linear_analytic_posterior(kind, h=0.5, sigma=0.1, d=D_OBS, p=1.0)
        if kind == "rts":
            lo, hi = dens.support
        else:
            lo, hi = dens.mean - 8 * math.sqrt(dens.variance), dens.mean + 8 * math.sqrt(dens.variance)
        grid = np.linspace(lo, hi, 20_001)
        mass = np.trapezoid(dens(grid), grid)
        assert abs(mass - 1.0) < 1e-4, kind


def test_analytic_posterior_guards():
    with pytest.raises(ValueError):
        linear_analytic_posterior("map", h=0.5, sigma=0.1, d=D_OBS)
    with pytest.raises(ValueError):
        linear_analytic_posterior("true", h=1.5, sigma=0.1, d=D_OBS)
    with pytest.raises(ValueError):
        linear_analytic_posterior("true", h=0.5, sigma=0.0, d=D_OBS)
    with pytest.raises(ValueError):
        linear_analytic_posterior("rts", h=0.5, sigma=0.1, d=-1.0)


def test_sigma_zero_limits_closed_forms():
    det = linear_limit_sigma_zero("det", h=0.5, y0_star=1.0, p=1.0)
    assert abs(det.mean - 1.2130613194252668) < CLOSED_FORM_TOL
    assert det.variance == 0.0

    add = linear_limit_sigma_zero("add", h=0.5, y0_star=1.0, p=1.0)
    assert abs(add.mean - 0.8087075462835113) < CLOSED_FORM_TOL
    assert abs(add.variance - 1.0 / 3.0) < CLOSED_FORM_TOL

    rts = linear_limit_sigma_zero("rts", h=0.5, y0_star=1.0, p=1.0)
    assert abs(rts.support[0] - 0.7105948689291202) < CLOSED_FORM_TOL
    assert abs(rts.support[1] - 4.141650408771948) < CLOSED_FORM_TOL
    grid = np.linspace(rts.support[0], rts.support[1], 20_001)
    mass = np.trapezoid(rts.pdf(grid), grid)
    assert abs(mass - 1.0) < 1e-4


def test_deterministic_posterior_approaches_truth_as_h_shrinks():
    gaps = []
    for h in (0.4, 0.2, 0.1, 0.05):
        true = linear_analytic_posterior("true", h=h, sigma=0.1, d=D_OBS)
        det = linear_analytic_posterior("det", h=h, sigma=0.1, d=D_OBS)
        lo = min(true.mean, det.mean) - 8 * math.sqrt(max(true.variance, det.variance))
        hi = max(true.mean, det.mean) + 8 * math.sqrt(max(true.variance, det.variance))
        grid = np.linspace(lo, hi, 4001)
        dx = grid[1] - grid[0]
        gaps.append(hellinger(true(grid), det(grid), dx))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.05


def test_hellinger_properties():
    grid = np.linspace(-8.0, 9.0, 8001)
    dx = grid[1] - grid[0]
    p = np.exp(-(grid**2) / 2.0) / math.sqrt(2 * math.pi)
    q = np.exp(-((grid - 1.0) ** 2) / 2.0) / math.sqrt(2 * math.pi)
    assert hellinger(p, p, dx) == 0.0
    want = math.sqrt(1.0 - math.exp(-0.125))
    assert abs(hellinger(p, q, dx) - want) < 1e-6
    with pytest.raises(ValueError):
        hellinger(p[:-1], q, dx)
    with pytest.raises(ValueError):
        hellinger(2.0 * p, q, dx)  # not a probability density


def test_rwmh_recovers_prior_when_data_is_uninformative():
    # sigma so large that the likelihood is flat: the posterior is the prior.
    ip = build_linear_inverse_problem(h=0.5, sigma=1e6)
    chain = rwmh(ip, EULER, 0.5, 10_000, seed=3, warmup=500)
    samples = chain.samples[::10, 0]
    ks = stats.kstest(samples, "norm")
    assert ks.pvalue > KS_LEVEL or ks.statistic < 0.05
    assert 0.1 < chain.acceptance_rate < 0.6


def test_degenerate_pmmh_is_rwmh_bitwise():
    ip = build_linear_inverse_problem()
    dist = StepDistribution("degenerate", h=0.5)
    base = rwmh(ip, EULER, 0.5, 400, seed=11, warmup=100)
    for n_est in (1, 3):
        pm = pmmh(ip, EULER, dist, 400, n_estimator=n_est, seed=11, warmup=100)
        assert np.array_equal(pm.samples, base.samples)
        assert np.array_equal(pm.accepted, base.accepted)
        assert pm.proposal_scale == base.proposal_scale


def test_chain_reproducible_and_seed_sensitive():
    ip = build_linear_inverse_problem()
    dist = StepDistribution("uniform", h=0.5, p=1.0)
    a = pmmh(ip, EULER, dist, 300, seed=5, warmup=50)
    b = pmmh(ip, EULER, dist, 300, seed=5, warmup=50)
    c = pmmh(ip, EULER, dist, 300, seed=6, warmup=50)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_pmmh_estimate_carried_on_rejection():
    ip = build_linear_inverse_problem()
    dist = StepDistribution("uniform", h=0.5, p=1.0)
    chain = pmmh(ip, EULER, dist, 500, seed=7, warmup=50)
    rejected = np.nonzero(chain.accepted == 0)[0]
    assert rejected.size > 0
    for i in rejected[:50]:
        assert chain.log_estimate_history[i + 1] == chain.log_estimate_history[i]
    assert abs(chain.acceptance_rate - np.mean(chain.accepted)) < EXACT_TOL


def test_chain_theta0_and_validation():
    ip = build_linear_inverse_problem()
    chain = rwmh(ip, EULER, 0.5, 20, seed=0, warmup=0, theta0=np.array([0.7]))
    assert chain.samples[0, 0] == 0.7
    with pytest.raises(ValueError):
        rwmh(ip, EULER, 0.5, 0)
    with pytest.raises(ValueError):
        rwmh(ip, EULER, 0.5, 10, proposal_scale=0.0)
    with pytest.raises(ValueError):
        pmmh(ip, EULER, StepDistribution("uniform", h=0.5, p=1.0), 10, n_estimator=0)


def test_divergent_start_raises():
    ip = build_henon_heiles_inverse_problem(seed=0)
    bad = np.array([0.0, 0.0, 50.0, 50.0])  # far outside the bounded region
    with pytest.raises(ValueError):
        rwmh(ip, make_stepper("verlet"), 0.1, 10, theta0=bad, warmup=0)


def test_zero_acceptance_warns():
    ip = build_linear_inverse_problem(sigma=1e-6)
    with pytest.warns(RuntimeWarning):
        rwmh(ip, EULER, 0.5, 600, proposal_scale=1e5, seed=2, warmup=0,
             theta0=np.array([1.2130613194252668]))


def test_chain_csv_round_trip(tmp_path):
    ip = build_linear_inverse_problem()
    chain = rwmh(ip, EULER, 0.5, 25, seed=1, warmup=10)
    path = tmp_path / "chain.csv"
    chain.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "theta_0", "log_estimate", "accepted"]
    assert len(rows) == 27  # header + n + 1 states
    assert rows[1][3] == "1"
    for i, row in enumerate(rows[1:]):
        assert int(row[0]) == i
        assert float(row[1]) == chain.samples[i, 0]


def test_chain_field_validation():
    with pytest.raises(ValueError):
        Chain(
            samples=np.zeros((3, 1)), log_accept_history=np.zeros(1),
            accepted=np.zeros(2), log_estimate_history=np.zeros(3),
            acceptance_rate=0.5, seed=0, kind="rwmh", proposal_scale=0.5,
        )
    with pytest.raises(ValueError):
        Chain(
            samples=np.zeros((3, 1)), log_accept_history=np.zeros(2),
            accepted=np.zeros(2), log_estimate_history=np.zeros(3),
            acceptance_rate=0.5, seed=0, kind="gibbs", proposal_scale=0.5,
        )


def test_henon_heiles_problem_construction():
    a = build_henon_heiles_inverse_problem(seed=4)
    b = build_henon_heiles_inverse_problem(seed=4)
    c = build_henon_heiles_inverse_problem(seed=5)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    assert a.data.shape == (4,)
    assert a.prior.dim == 4
    assert np.all(np.diag(a.noise_cov) == 5e-4**2)
