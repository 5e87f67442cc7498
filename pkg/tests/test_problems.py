"""Problem catalogue: right-hand sides, invariants, Jacobians."""

import numpy as np
import pytest

from rtsrk.problems import (
    FirstIntegral,
    PROBLEM_NAMES,
    eval_energy,
    eval_integral,
    fd_jacobian,
    make_problem,
)

RHS_TOL = 1e-12
FD_TOL = 1e-6


def test_catalogue_names_and_dims():
    dims = {
        "fitzhugh_nagumo": 2,
        "henon_heiles": 4,
        "kepler_perturbed": 4,
        "linear_decay": 1,
        "lorenz": 3,
        "olsen_peroxide": 4,
        "pendulum": 2,
    }
    assert set(PROBLEM_NAMES) == set(dims)
    for name, dim in dims.items():
        prob = make_problem(name)
        assert prob.dim == dim
        assert prob.default_y0.shape == (dim,)
        assert np.all(np.isfinite(prob.rhs(prob.default_y0)))


def test_make_problem_rejects_unknown():
    with pytest.raises(ValueError):
        make_problem("van_der_pol")
    with pytest.raises(ValueError):
        make_problem("lorenz", gamma=1.0)


def test_make_problem_overrides_apply():
    prob = make_problem("linear_decay", lam=2.0)
    assert prob.rhs(np.array([3.0]))[0] == -6.0


def test_fitzhugh_nagumo_rhs_value():
    # By hand at (-1, 1) with a=b=0.2, c=3: (3(-1 + 1/3 + 1), 1/3).
    prob = make_problem("fitzhugh_nagumo")
    out = prob.rhs(np.array([-1.0, 1.0]))
    assert abs(out[0] - 1.0) < RHS_TOL
    assert abs(out[1] - 1.0 / 3.0) < RHS_TOL


def test_olsen_rhs_value_at_default_state():
    # a=6, b=58, x=z=0 kills every nonlinear term.
    prob = make_problem("olsen_peroxide")
    out = prob.rhs(prob.default_y0)
    assert abs(out[0] - 0.2) < RHS_TOL
    assert abs(out[1] - 0.825) < RHS_TOL
    assert abs(out[2] - 1e-5) < RHS_TOL
    assert abs(out[3]) < RHS_TOL


def test_linear_decay_flow_and_jacobian():
    prob = make_problem("linear_decay")
    y = np.array([2.0])
    assert abs(prob.exact_flow(1.0, y)[0] - 2.0 * np.exp(-1.0)) < RHS_TOL
    assert prob.jacobian(y)[0, 0] == -1.0


def test_kepler_angular_momentum_at_start():
    # e=0.6: y0 = (0, 2, 0.4, 0), so L = w1 v2 - w2 v1 = 0.8.
    prob = make_problem("kepler_perturbed")
    ang = prob.integrals[0]
    assert ang.name == "angular_momentum"
    assert abs(eval_integral(ang, prob.default_y0) - 0.8) < RHS_TOL


def test_kepler_energy_integral_matches_hamiltonian():
    prob = make_problem("kepler_perturbed")
    rng = np.random.default_rng(3)
    y = prob.default_y0 + 0.1 * rng.standard_normal((7, 4))
    energy = prob.integrals[1]
    assert np.allclose(eval_integral(energy, y), eval_energy(prob.hamiltonian, y))


def test_kepler_rejects_bad_eccentricity():
    with pytest.raises(ValueError):
        make_problem("kepler_perturbed", e=1.0)


def test_pendulum_energy_value():
    prob = make_problem("pendulum")
    # Q(1.5, -pi) = 1.125 + 1.
    assert abs(eval_energy(prob.hamiltonian, prob.default_y0) - 2.125) < RHS_TOL


def test_henon_heiles_start_hits_requested_energy():
    prob = make_problem("henon_heiles")
    assert abs(eval_energy(prob.hamiltonian, prob.default_y0) - 0.13) < RHS_TOL


def test_henon_heiles_rhs_consistent_with_gradients():
    prob = make_problem("henon_heiles")
    ham = prob.hamiltonian
    rng = np.random.default_rng(11)
    y = 0.2 * rng.standard_normal((5, 4))
    v, w = y[:, :2], y[:, 2:]
    out = prob.rhs(y)
    assert np.allclose(out[:, :2], -ham.grad_w(v, w), atol=RHS_TOL)
    assert np.allclose(out[:, 2:], ham.grad_v(v, w), atol=RHS_TOL)


def test_analytic_jacobians_match_finite_differences():
    rng = np.random.default_rng(7)
    for name in ("linear_decay", "pendulum", "kepler_perturbed"):
        prob = make_problem(name)
        y = prob.default_y0 + 0.05 * rng.standard_normal(prob.dim)
        jac_fd = fd_jacobian(prob.rhs)(y)
        assert np.allclose(prob.jacobian(y), jac_fd, atol=FD_TOL)


def test_rhs_vectorization_matches_rowwise():
    rng = np.random.default_rng(19)
    for name in PROBLEM_NAMES:
        prob = make_problem(name)
        base = np.abs(prob.default_y0) + 0.5
        batch = prob.default_y0 + 0.05 * base * rng.standard_normal((6, prob.dim))
        stacked = prob.rhs(batch)
        rows = np.stack([prob.rhs(batch[i]) for i in range(6)])
        assert np.allclose(stacked, rows, atol=RHS_TOL)


def test_first_integral_validation():
    with pytest.raises(ValueError):
        FirstIntegral("bad", "affine")
    with pytest.raises(ValueError):
        FirstIntegral("mass", "linear")
    with pytest.raises(ValueError):
        FirstIntegral("energy", "quadratic")
    with pytest.raises(ValueError):
        FirstIntegral("energy", "generic")


def test_first_integral_forms():
    lin = FirstIntegral("mass", "linear", vector=np.array([1.0, 2.0]))
    assert lin(np.array([3.0, 4.0])) == 11.0
    quad = FirstIntegral("norm", "quadratic", matrix=np.eye(2))
    assert quad(np.array([3.0, 4.0])) == 25.0
    with pytest.raises(ValueError):
        lin(np.zeros(3))
    with pytest.raises(ValueError):
        quad(np.zeros(3))
