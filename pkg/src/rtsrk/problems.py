"""Catalogue of benchmark initial value problems.

Every right-hand side is vectorized: it maps arrays of shape (..., d) to
arrays of the same shape, so batches of states can be advanced at once.
Systems carry optional extras used elsewhere in the library: an exact flow,
an analytic Jacobian, conserved quantities and a Hamiltonian splitting.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

FD_JACOBIAN_STEP = 1e-7


@dataclasses.dataclass(frozen=True)
class FirstIntegral:
    """A quantity I(y) conserved along exact trajectories.

    kind is one of "linear" (I = v.y), "quadratic" (I = y.C y) or
    "generic" (arbitrary callable).  Linear and quadratic integrals keep
    their defining data accessible because conservation properties of the
    integrators depend on the algebraic form.
    """

    name: str
    kind: str
    vector: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic", "generic"):
            raise ValueError(f"unknown integral kind {self.kind!r}")
        if self.kind == "linear" and self.vector is None:
            raise ValueError("linear integral needs a vector")
        if self.kind == "quadratic" and self.matrix is None:
            raise ValueError("quadratic integral needs a matrix")
        if self.kind == "generic" and self.func is None:
            raise ValueError("generic integral needs a callable")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "linear":
            if y.shape[-1] != self.vector.shape[0]:
                raise ValueError("state dimension does not match integral")
            return y @ self.vector
        if self.kind == "quadratic":
            if y.shape[-1] != self.matrix.shape[0]:
                raise ValueError("state dimension does not match integral")
            return np.einsum("...i,ij,...j->...", y, self.matrix, y)
        return self.func(y)


def eval_integral(integral: FirstIntegral, y: np.ndarray) -> np.ndarray:
    """Evaluate a first integral on a state or batch of states."""
    return integral(y)


@dataclasses.dataclass(frozen=True)
class HamiltonianStructure:
    """Canonical splitting y = (v, w) with energy Q(v, w).

    grad_v and grad_w take (v, w) with matching leading axes.  When
    separable is True, Q(v, w) = Q1(v) + Q2(w) and grad_v ignores w while
    grad_w ignores v; the one-step maps exploit this.
    """

    energy: Callable[[np.ndarray], np.ndarray]
    grad_v: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_w: Callable[[np.ndarray, np.ndarray], np.ndarray]
    separable: bool
    half_dim: int


def eval_energy(structure: HamiltonianStructure, y: np.ndarray) -> np.ndarray:
    """Evaluate the energy of a Hamiltonian system on full states."""
    return structure.energy(np.asarray(y, dtype=float))


@dataclasses.dataclass(frozen=True)
class OdeSystem:
    """An autonomous initial value problem y' = f(y), y(0) = y0."""

    name: str
    dim: int
    rhs: Callable[[np.ndarray], np.ndarray]
    default_y0: np.ndarray
    params: dict
    exact_flow: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    integrals: tuple = ()
    hamiltonian: Optional[HamiltonianStructure] = None

    def jacobian_or_fd(self) -> Callable[[np.ndarray], np.ndarray]:
        """Analytic Jacobian when available, else central differences."""
        if self.jacobian is not None:
            return self.jacobian
        return fd_jacobian(self.rhs)


def fd_jacobian(rhs: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    """Central-difference Jacobian of a vectorized right-hand side.

    The step in component i is FD_JACOBIAN_STEP * max(1, |y_i|).  Returns a
    callable mapping (..., d) states to (..., d, d) Jacobians.
    """

    def jac(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        d = y.shape[-1]
        steps = FD_JACOBIAN_STEP * np.maximum(1.0, np.abs(y))
        # Stack the 2d perturbed states in one rhs call per direction pair.
        eye = np.eye(d)
        plus = y[..., None, :] + steps[..., None, :] * eye
        minus = y[..., None, :] - steps[..., None, :] * eye
        fp = rhs(plus)  # (..., d, d): axis -2 indexes the perturbed component
        fm = rhs(minus)
        cols = (fp - fm) / (2.0 * steps[..., :, None])
        # cols[..., i, j] = df_j/dy_i, so transpose into J[..., j, i].
        return cols.swapaxes(-1, -2)

    return jac


def _lorenz(params: dict) -> OdeSystem:
    sigma, rho, beta = params["sigma"], params["rho"], params["beta"]

    def rhs(y):
        y = np.asarray(y, dtype=float)
        x1, x2, x3 = y[..., 0], y[..., 1], y[..., 2]
        return np.stack(
            [sigma * (x2 - x1), x1 * (rho - x3) - x2, x1 * x2 - beta * x3], axis=-1
        )

    return OdeSystem(
        name="lorenz",
        dim=3,
        rhs=rhs,
        default_y0=np.asarray(params["y0"], dtype=float),
        params=params,
    )


def _linear_decay(params: dict) -> OdeSystem:
    lam = params["lam"]

    def rhs(y):
        return -lam * np.asarray(y, dtype=float)

    def flow(t, y):
        return np.asarray(y, dtype=float) * np.exp(-lam * t)

    def jac(y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(
            np.array([[-lam]]), y.shape + (1,)
        ).copy()

    return OdeSystem(
        name="linear_decay",
        dim=1,
        rhs=rhs,
        default_y0=np.asarray(params["y0"], dtype=float),
        params=params,
        exact_flow=flow,
        jacobian=jac,
    )


def _fitzhugh_nagumo(params: dict) -> OdeSystem:
    a, b, c = params["a"], params["b"], params["c"]

    def rhs(y):
        y = np.asarray(y, dtype=float)
        y1, y2 = y[..., 0], y[..., 1]
        return np.stack(
            [c * (y1 - y1**3 / 3.0 + y2), -(y1 - a + b * y2) / c], axis=-1
        )

    return OdeSystem(
        name="fitzhugh_nagumo",
        dim=2,
        rhs=rhs,
        default_y0=np.asarray(params["y0"], dtype=float),
        params=params,
    )


def _olsen_peroxide(params: dict) -> OdeSystem:
    k1, k2, k3, k4 = params["k1"], params["k2"], params["k3"], params["k4"]
    k5, k6, k7, k8 = params["k5"], params["k6"], params["k7"], params["k8"]
    a0, b0, x0 = params["A0"], params["B0"], params["X0"]

    def rhs(y):
        y = np.asarray(y, dtype=float)
        a, b, x, z = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        aby = k3 * a * b * z
        bx = k1 * b * x
        xx = k2 * x**2
        return np.stack(
            [
                k7 * (a0 - a) - aby,
                k8 * b0 - bx - aby,
                bx - 2.0 * xx + 3.0 * aby - k4 * x + k6 * x0,
                2.0 * xx - k5 * z - aby,
            ],
            axis=-1,
        )

    return OdeSystem(
        name="olsen_peroxide",
        dim=4,
        rhs=rhs,
        default_y0=np.asarray(params["y0"], dtype=float),
        params=params,
    )


def _kepler_perturbed(params: dict) -> OdeSystem:
    delta, ecc = params["delta"], params["e"]
    if not 0.0 <= ecc < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {ecc}")

    # State layout (v1, v2, w1, w2): velocities first, then positions.
    def rhs(y):
        y = np.asarray(y, dtype=float)
        v, w = y[..., :2], y[..., 2:]
        r2 = np.sum(w**2, axis=-1, keepdims=True)
        r3 = r2 ** 1.5
        r5 = r2 ** 2.5
        acc = -w / r3 - delta * w / r5
        return np.concatenate([acc, v], axis=-1)

    def jacobian(y):
        y = np.asarray(y, dtype=float)
        w = y[..., 2:]
        r2 = np.sum(w**2, axis=-1)[..., None, None]
        eye = np.eye(2)
        outer = w[..., :, None] * w[..., None, :]
        dacc_dw = -(eye / r2**1.5 - 3.0 * outer / r2**2.5) - delta * (
            eye / r2**2.5 - 5.0 * outer / r2**3.5
        )
        jac = np.zeros(y.shape[:-1] + (4, 4))
        jac[..., :2, 2:] = dacc_dw
        jac[..., 2:, :2] = eye
        return jac

    def energy(y):
        y = np.asarray(y, dtype=float)
        v, w = y[..., :2], y[..., 2:]
        r = np.sqrt(np.sum(w**2, axis=-1))
        return 0.5 * np.sum(v**2, axis=-1) - 1.0 / r - delta / (3.0 * r**3)

    def grad_v(v, w):
        return np.asarray(v, dtype=float)

    def grad_w(v, w):
        w = np.asarray(w, dtype=float)
        r2 = np.sum(w**2, axis=-1, keepdims=True)
        return w / r2**1.5 + delta * w / r2**2.5

    # Angular momentum w1 v2 - w2 v1 as a symmetric quadratic form.
    c_mat = np.zeros((4, 4))
    c_mat[1, 2] = c_mat[2, 1] = 0.5
    c_mat[0, 3] = c_mat[3, 0] = -0.5

    y0 = np.array(
        [0.0, np.sqrt((1.0 + ecc) / (1.0 - ecc)), 1.0 - ecc, 0.0]
    )
    return OdeSystem(
        name="kepler_perturbed",
        dim=4,
        rhs=rhs,
        default_y0=y0,
        params=params,
        jacobian=jacobian,
        integrals=(
            FirstIntegral("angular_momentum", "quadratic", matrix=c_mat),
            FirstIntegral("energy", "generic", func=energy),
        ),
        hamiltonian=HamiltonianStructure(
            energy=energy, grad_v=grad_v, grad_w=grad_w, separable=True, half_dim=2
        ),
    )


def _pendulum(params: dict) -> OdeSystem:
    # State (v, w): velocity and angle; Q(v, w) = v^2/2 - cos(w).
    def rhs(y):
        y = np.asarray(y, dtype=float)
        v, w = y[..., 0], y[..., 1]
        return np.stack([-np.sin(w), v], axis=-1)

    def jac(y):
        y = np.asarray(y, dtype=float)
        w = y[..., 1]
        zeros = np.zeros_like(w)
        ones = np.ones_like(w)
        row1 = np.stack([zeros, -np.cos(w)], axis=-1)
        row2 = np.stack([ones, zeros], axis=-1)
        return np.stack([row1, row2], axis=-2)

    def energy(y):
        y = np.asarray(y, dtype=float)
        return 0.5 * y[..., 0] ** 2 - np.cos(y[..., 1])

    def grad_v(v, w):
        return np.asarray(v, dtype=float)

    def grad_w(v, w):
        return np.sin(np.asarray(w, dtype=float))

    return OdeSystem(
        name="pendulum",
        dim=2,
        rhs=rhs,
        default_y0=np.asarray(params["y0"], dtype=float),
        params=params,
        jacobian=jac,
        integrals=(FirstIntegral("energy", "generic", func=energy),),
        hamiltonian=HamiltonianStructure(
            energy=energy, grad_v=grad_v, grad_w=grad_w, separable=True, half_dim=1
        ),
    )


def _henon_heiles(params: dict) -> OdeSystem:
    # State (v1, v2, w1, w2); Q = |v|^2/2 + |w|^2/2 + w1^2 w2 - w2^3/3.
    def rhs(y):
        y = np.asarray(y, dtype=float)
        v, w = y[..., :2], y[..., 2:]
        w1, w2 = w[..., 0], w[..., 1]
        acc = np.stack([-(w1 + 2.0 * w1 * w2), -(w2 + w1**2 - w2**2)], axis=-1)
        return np.concatenate([acc, v], axis=-1)

    def energy(y):
        y = np.asarray(y, dtype=float)
        v, w = y[..., :2], y[..., 2:]
        w1, w2 = w[..., 0], w[..., 1]
        return (
            0.5 * np.sum(v**2, axis=-1)
            + 0.5 * np.sum(w**2, axis=-1)
            + w1**2 * w2
            - w2**3 / 3.0
        )

    def grad_v(v, w):
        return np.asarray(v, dtype=float)

    def grad_w(v, w):
        w = np.asarray(w, dtype=float)
        w1, w2 = w[..., 0], w[..., 1]
        return np.stack([w1 + 2.0 * w1 * w2, w2 + w1**2 - w2**2], axis=-1)

    energy_target = params["energy"]
    w0 = np.asarray(params["w0"], dtype=float)
    potential = 0.5 * np.sum(w0**2) + w0[0] ** 2 * w0[1] - w0[1] ** 3 / 3.0
    kinetic = energy_target - potential
    if kinetic < 0:
        raise ValueError("requested energy is below the potential at w0")
    y0 = np.array([0.0, np.sqrt(2.0 * kinetic), w0[0], w0[1]])

    return OdeSystem(
        name="henon_heiles",
        dim=4,
        rhs=rhs,
        default_y0=y0,
        params=params,
        integrals=(FirstIntegral("energy", "generic", func=energy),),
        hamiltonian=HamiltonianStructure(
            energy=energy, grad_v=grad_v, grad_w=grad_w, separable=True, half_dim=2
        ),
    )


_DEFAULTS = {
    "lorenz": {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0, "y0": (-10.0, -1.0, 40.0)},
    "linear_decay": {"lam": 1.0, "y0": (1.0,)},
    "fitzhugh_nagumo": {"a": 0.2, "b": 0.2, "c": 3.0, "y0": (-1.0, 1.0)},
    "olsen_peroxide": {
        "k1": 0.35, "k2": 250.0, "k3": 0.035, "k4": 20.0,
        "k5": 5.35, "k6": 1e-5, "k7": 0.1, "k8": 0.825,
        "A0": 8.0, "B0": 1.0, "X0": 1.0, "y0": (6.0, 58.0, 0.0, 0.0),
    },
    "kepler_perturbed": {"delta": 0.015, "e": 0.6},
    "pendulum": {"y0": (1.5, -np.pi)},
    "henon_heiles": {"energy": 0.13, "w0": (0.0, 0.1)},
}

_BUILDERS = {
    "lorenz": _lorenz,
    "linear_decay": _linear_decay,
    "fitzhugh_nagumo": _fitzhugh_nagumo,
    "olsen_peroxide": _olsen_peroxide,
    "kepler_perturbed": _kepler_perturbed,
    "pendulum": _pendulum,
    "henon_heiles": _henon_heiles,
}

PROBLEM_NAMES = tuple(sorted(_BUILDERS))


def make_problem(name: str, **overrides) -> OdeSystem:
    """Build a catalogue problem by name, overriding default parameters."""
    if name not in _BUILDERS:
        raise ValueError(
            f"unknown problem {name!r}; available: {', '.join(PROBLEM_NAMES)}"
        )
    params = dict(_DEFAULTS[name])
    unknown = set(overrides) - set(params)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    params.update(overrides)
    return _BUILDERS[name](params)
