"""One-step maps: fixed-point values, batching, solver behavior."""

import numpy as np
import pytest

from rtsrk.problems import OdeSystem, make_problem
from rtsrk.steppers import (
    ButcherTableau,
    ChebyshevRkc,
    ImplicitMidpoint,
    NewtonConfig,
    NonConvergenceError,
    StormerVerlet,
    make_stepper,
    spectral_radius,
    step_embedded_euler_heun,
)

EXACT_TOL = 1e-14
BATCH_TOL = 1e-13

DECAY = make_problem("linear_decay")
ONE = np.array([1.0])


def test_tableau_validation():
    with pytest.raises(ValueError):
        ButcherTableau("bad", np.zeros((1, 1)), np.array([0.5]), np.array([0.0]), 1)
    with pytest.raises(ValueError):
        ButcherTableau(
            "bad", np.array([[0.0, 1.0], [0.0, 0.0]]),
            np.array([0.5, 0.5]), np.array([0.0, 1.0]), 2,
        )
    with pytest.raises(ValueError):
        ButcherTableau("bad", np.zeros((2, 2)), np.array([1.0]), np.array([0.0]), 1)


def test_one_step_values_on_linear_decay():
    # Stability functions at h = 0.5: truncated exponentials and (1-h/2)/(1+h/2).
    cases = {
        "euler": 0.5,
        "heun": 0.625,
        "rk4": 0.6067708333333333,
        "midpoint": 0.6,
    }
    for name, want in cases.items():
        out = make_stepper(name).step(DECAY, ONE, 0.5)
        assert abs(out[0] - want) < EXACT_TOL


def test_scalar_and_batch_steps_agree():
    rng = np.random.default_rng(5)
    prob = make_problem("fitzhugh_nagumo")
    ys = prob.default_y0 + 0.3 * rng.standard_normal((8, 2))
    hs = rng.uniform(0.01, 0.2, 8)
    for name in ("euler", "heun", "rk4", "midpoint"):
        stepper = make_stepper(name)
        batch = stepper.step(prob, ys, hs)
        rows = np.stack([stepper.step(prob, ys[i], hs[i]) for i in range(8)])
        assert np.allclose(batch, rows, atol=BATCH_TOL)


def test_step_shape_mismatch_raises():
    with pytest.raises(ValueError):
        make_stepper("euler").step(DECAY, np.ones((4, 1)), np.ones(3))


def test_verlet_matches_handwritten_splitting():
    prob = make_problem("pendulum")
    y = np.array([1.5, -np.pi])
    h = 0.1
    v_half = y[0] - 0.5 * h * np.sin(y[1])
    w_new = y[1] + h * v_half
    v_new = v_half - 0.5 * h * np.sin(w_new)
    out = StormerVerlet().step(prob, y, h)
    assert abs(out[0] - v_new) < EXACT_TOL
    assert abs(out[1] - w_new) < EXACT_TOL


def test_verlet_is_time_symmetric():
    prob = make_problem("henon_heiles")
    y = prob.default_y0
    there = StormerVerlet().step(prob, y, 0.05)
    back = StormerVerlet().step(prob, there, -0.05)
    assert np.allclose(back, y, atol=1e-12)


def test_verlet_requires_hamiltonian():
    with pytest.raises(ValueError):
        StormerVerlet().step(make_problem("lorenz"), np.zeros(3), 0.01)


def test_midpoint_nonconvergence_raises():
    stepper = ImplicitMidpoint(NewtonConfig(tol=1e-300, max_iter=2))
    prob = make_problem("pendulum")
    with pytest.raises(NonConvergenceError):
        stepper.step(prob, prob.default_y0, 0.3)


def test_rkc_single_stage_is_euler_bitwise():
    prob = make_problem("fitzhugh_nagumo")
    y = prob.default_y0 + 0.1
    a = ChebyshevRkc(stages=1).step(prob, y, 0.05)
    b = make_stepper("euler").step(prob, y, 0.05)
    assert np.array_equal(a, b)


def test_rkc_two_stage_matches_scalar_recurrence():
    # Damped Chebyshev update written out by hand for s=2 on y' = -y.
    h, y, damping = 0.5, 1.0, 0.05
    w0 = 1.0 + damping / 4.0
    t2 = 2.0 * w0 * w0 - 1.0
    u1 = 2.0 * w0
    w1 = t2 / (2.0 * u1)
    k0 = y
    k1 = y + h * (w1 / w0) * (-y)
    mu = 2.0 * w0 * w0 / t2
    nu = -1.0 / t2
    mu_t = 2.0 * w1 * w0 / t2
    want = mu * k1 + nu * k0 + h * mu_t * (-k1)
    out = ChebyshevRkc(stages=2, damping=damping).step(DECAY, ONE, h)
    assert abs(out[0] - want) < EXACT_TOL


def test_rkc_mixed_stage_batch_matches_per_row():
    # Rows with different stiffness get different stage counts under "auto";
    # each row must still equal the fixed-stage result for its own count.
    def rhs(y):
        return -np.asarray(y, dtype=float) ** 3

    prob = OdeSystem(name="cubic_decay", dim=1, rhs=rhs,
                     default_y0=np.ones(1), params={})
    y = np.array([[10.0], [1.0]])
    h = 0.1
    auto = ChebyshevRkc(stages="auto").step(prob, y, h)
    rho = spectral_radius(prob.rhs, y)
    stages = np.clip(np.ceil(np.sqrt(h * rho / 0.65)), 1, 200).astype(int)
    assert stages[0] > stages[1]
    for i, s in enumerate(stages):
        fixed = ChebyshevRkc(stages=int(s)).step(prob, y[i], h)
        assert np.allclose(auto[i], fixed, atol=BATCH_TOL)


def test_rkc_rejects_bad_stage_count():
    with pytest.raises(ValueError):
        ChebyshevRkc(stages=0)


def test_spectral_radius_on_linear_system():
    a_mat = np.diag([-50.0, -1.0])

    def rhs(y):
        return np.asarray(y, dtype=float) @ a_mat.T

    rho = spectral_radius(rhs, np.array([1.0, 1.0]))
    assert abs(rho - 50.0) < 1e-6


def test_embedded_pair_on_linear_decay():
    y_e, y_h, err = step_embedded_euler_heun(DECAY, ONE, 0.5)
    assert abs(y_e[0] - 0.5) < EXACT_TOL
    assert abs(y_h[0] - 0.625) < EXACT_TOL
    assert abs(err - 0.125) < EXACT_TOL


def test_make_stepper_errors():
    with pytest.raises(ValueError):
        make_stepper("exponential")
    with pytest.raises(ValueError):
        make_stepper("euler", tol=1e-8)


def test_make_stepper_passes_options():
    stepper = make_stepper("midpoint", tol=1e-6, max_iter=7)
    assert stepper.newton.tol == 1e-6
    assert stepper.newton.max_iter == 7
