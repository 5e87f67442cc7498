"""Monte Carlo ensembles and the estimators built on them."""

import math

import numpy as np
import pytest

from rtsrk.ensembles import (
    Ensemble,
    estimator_mse,
    mc_functional,
    ms_error,
    run_ensemble,
    std_indicator,
    weak_error,
)
from rtsrk.integrate import integrate_deterministic, integrate_rts_rk
from rtsrk.problems import OdeSystem, make_problem
from rtsrk.randsteps import RngStream, StepDistribution
from rtsrk.steppers import make_stepper

EXACT_TOL = 1e-14
MC_SIGMAS = 4.0

DECAY = make_problem("linear_decay")
EULER = make_stepper("euler")


def _frozen_problem(dim: int) -> OdeSystem:
    return OdeSystem(
        name="frozen", dim=dim,
        rhs=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        default_y0=np.zeros(dim), params={},
    )


def _tiny_ensemble(states, failed=None):
    """Two recorded indices (0 and n) around hand-picked final states."""
    states = np.asarray(states, dtype=float)
    m = states.shape[0]
    full = np.stack([np.zeros_like(states), states], axis=1)
    return Ensemble(
        states=full,
        record_idx=np.array([0, 3]),
        failed_step=np.full(m, -1) if failed is None else np.asarray(failed),
        n_steps=3,
        nominal_h=0.1,
        scheme="det",
        base_seed=0,
    )


def test_scheme_argument_guards():
    with pytest.raises(ValueError):
        run_ensemble("ml", EULER, DECAY, 2, 2)
    with pytest.raises(ValueError):
        run_ensemble("det", EULER, DECAY, 2, 2)  # missing h
    with pytest.raises(ValueError):
        run_ensemble("rts", EULER, DECAY, 2, 2)  # missing dist
    with pytest.raises(ValueError):
        run_ensemble("add", EULER, DECAY, 2, 2, h=0.1)  # missing p
    with pytest.raises(ValueError):
        run_ensemble("add", EULER, DECAY, 2, 2, h=0.1, p=0.5)
    with pytest.raises(ValueError):
        run_ensemble("det", EULER, DECAY, 2, 0, h=0.1)


def test_det_ensemble_matches_single_trajectory():
    ens = run_ensemble("det", EULER, DECAY, 6, 3, h=0.25)
    single = integrate_deterministic(EULER, DECAY, 0.25, 6)
    for i in range(3):
        assert np.array_equal(ens.states[i], single.states)


def test_rts_rows_reproduce_their_own_streams():
    dist = StepDistribution("uniform", h=0.1, p=1.0)
    ens = run_ensemble("rts", EULER, DECAY, 15, 4, base_seed=23, dist=dist)
    for i in range(4):
        solo = integrate_rts_rk(EULER, dist, DECAY, 15, RngStream(23, i))
        assert np.array_equal(ens.states[i], solo.states)
        assert np.array_equal(ens.realized_steps[i], solo.realized_steps)
        rebuilt = ens.trajectory(i)
        assert np.array_equal(rebuilt.states, solo.states)


def test_keep_steps_budget_drops_step_matrix():
    dist = StepDistribution("uniform", h=0.1, p=1.0)
    ens = run_ensemble(
        "rts", EULER, DECAY, 10, 3, dist=dist, keep_steps=False,
        record=np.array([0, 10]),
    )
    assert ens.realized_steps is None
    with pytest.raises(ValueError):
        ens.trajectory(0)


def test_states_at_and_alive_filtering():
    ens = _tiny_ensemble([[1.0], [3.0], [7.0]], failed=[-1, -1, 2])
    assert np.array_equal(ens.states_at(), [[1.0], [3.0]])
    assert np.array_equal(ens.states_at(0), [[0.0], [0.0]])
    assert ens.failed_count == 1
    with pytest.raises(ValueError):
        ens.states_at(1)  # index 1 was never recorded


def test_estimators_on_hand_built_ensemble():
    ens = _tiny_ensemble([[1.0], [3.0]])
    assert abs(mc_functional(ens, lambda y: y[:, 0]) - 2.0) < EXACT_TOL
    assert abs(ms_error(ens, np.array([0.0])) - math.sqrt(5.0)) < EXACT_TOL
    err, se = weak_error(ens, lambda y: y[:, 0], 1.5)
    assert abs(err - 0.5) < EXACT_TOL
    assert abs(se - 1.0) < EXACT_TOL
    assert abs(std_indicator(ens) - math.sqrt(2.0)) < EXACT_TOL


def test_estimators_require_survivors():
    dead = _tiny_ensemble([[1.0], [3.0]], failed=[0, 1])
    with pytest.raises(ValueError):
        mc_functional(dead, lambda y: y[:, 0])
    with pytest.raises(ValueError):
        ms_error(dead, np.array([0.0]))
    lone = _tiny_ensemble([[1.0], [3.0]], failed=[-1, 0])
    with pytest.raises(ValueError):
        std_indicator(lone)


def test_rts_one_step_mean_square_error_closed_form():
    # Euler on y' = -y: E (Y_1 - e^{-h})^2 = (1 - h - e^{-h})^2 + Var H.
    h, p, m = 0.25, 1.0, 50_000
    dist = StepDistribution("uniform", h=h, p=p)
    ens = run_ensemble("rts", EULER, DECAY, 1, m, base_seed=2, dist=dist)
    sq = (ens.states_at()[:, 0] - math.exp(-h)) ** 2
    want = (1.0 - h - math.exp(-h)) ** 2 + h ** (2 * p + 1) / 3.0
    se = np.std(sq, ddof=1) / math.sqrt(m)
    assert abs(np.mean(sq) - want) < MC_SIGMAS * se
    assert abs(ms_error(ens, np.array([math.exp(-h)])) - math.sqrt(np.mean(sq))) < 1e-12


def test_estimator_mse_closed_form_on_frozen_system():
    # phi = first coordinate; the estimator error is pure Monte Carlo noise
    # with variance N h^{2p+1} / M.
    h, p, n, m, r = 0.2, 1.0, 4, 64, 64
    prob = _frozen_problem(1)
    mse, stderr = estimator_mse(
        "add", EULER, prob, n, m, r, lambda y: y[:, 0], 0.0,
        base_seed=4, h=h, p=p,
    )
    want = n * h ** (2 * p + 1) / m
    assert abs(mse - want) < MC_SIGMAS * stderr
    assert stderr < want


def test_estimator_mse_guards():
    prob = _frozen_problem(1)
    with pytest.raises(ValueError):
        estimator_mse("det", EULER, prob, 2, 4, 8, lambda y: y[:, 0], 0.0, h=0.1)

    blowup = OdeSystem(
        name="blowup", dim=1,
        rhs=lambda y: np.asarray(y, dtype=float) ** 3,
        default_y0=np.array([50.0]), params={},
    )
    with pytest.raises(RuntimeError):
        estimator_mse(
            "det", EULER, blowup, 30, 2, 16, lambda y: y[:, 0], 0.0, h=0.5
        )


def test_observer_runs_on_ensembles():
    counts = []
    run_ensemble(
        "det", EULER, DECAY, 3, 5, h=0.1,
        observer=lambda k, y, alive: counts.append(int(alive.sum())),
    )
    assert counts == [5, 5, 5]
