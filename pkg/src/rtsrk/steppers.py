"""One-step maps Psi_h for autonomous systems.

All steppers advance batches: states have shape (..., d) and the step size
h may be a scalar or an array matching the leading axes, so every element
of a batch can move with its own step.  This is what makes ensembles with
per-trajectory random steps cheap.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Union

import numpy as np

from .problems import OdeSystem


class NonConvergenceError(RuntimeError):
    """An implicit solve failed to reach tolerance."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


@dataclasses.dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit Runge-Kutta method."""

    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.shape[0]
        if a.shape != (s, s) or c.shape != (s,):
            raise ValueError("inconsistent tableau shapes")
        if np.any(np.triu(a) != 0.0):
            raise ValueError("tableau must be strictly lower triangular")
        if not np.isclose(b.sum(), 1.0):
            raise ValueError("weights must sum to one")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.shape[0]


EULER = ButcherTableau("euler", np.zeros((1, 1)), np.array([1.0]), np.array([0.0]), 1)

HEUN = ButcherTableau(
    "heun",
    np.array([[0.0, 0.0], [1.0, 0.0]]),
    np.array([0.5, 0.5]),
    np.array([0.0, 1.0]),
    2,
)

RK4 = ButcherTableau(
    "rk4",
    np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    ),
    np.array([1.0, 2.0, 2.0, 1.0]) / 6.0,
    np.array([0.0, 0.5, 0.5, 1.0]),
    4,
)

TABLEAUS = {"euler": EULER, "heun": HEUN, "rk4": RK4}


@dataclasses.dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 50


def _h_col(h, like: np.ndarray) -> np.ndarray:
    """Broadcast a scalar or leading-axes step array against (..., d) states."""
    h = np.asarray(h, dtype=float)
    if h.ndim == 0:
        return h
    if h.shape != like.shape[:-1]:
        raise ValueError(f"step shape {h.shape} does not match batch {like.shape[:-1]}")
    return h[..., None]


class ExplicitRungeKutta:
    """Explicit Runge-Kutta map defined by a Butcher tableau."""

    def __init__(self, tableau: ButcherTableau):
        self.tableau = tableau
        self.order = tableau.order
        self.name = tableau.name

    def step(self, problem: OdeSystem, y: np.ndarray, h) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        hc = _h_col(h, y)
        a, b = self.tableau.a, self.tableau.b
        ks = []
        for i in range(self.tableau.stages):
            yi = y
            for j in range(i):
                if a[i, j] != 0.0:
                    yi = yi + (a[i, j] * hc) * ks[j]
            ks.append(problem.rhs(yi))
        incr = b[0] * ks[0]
        for i in range(1, len(ks)):
            incr = incr + b[i] * ks[i]
        return y + hc * incr


class ImplicitMidpoint:
    """One-stage Gauss map: solves m = y + (h/2) f(m), returns y + h f(m).

    The stage equation is solved by a damped-free Newton iteration on
    batches; the Jacobian comes from the problem when available and from
    central differences otherwise.
    """

    order = 2
    name = "midpoint"

    def __init__(self, newton: NewtonConfig = NewtonConfig()):
        self.newton = newton

    def step(self, problem: OdeSystem, y: np.ndarray, h) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        hc = _h_col(h, y)
        jac = problem.jacobian_or_fd()
        d = y.shape[-1]
        eye = np.eye(d)
        # Explicit predictor for the stage state.
        m = y + 0.5 * hc * problem.rhs(y)
        for _ in range(self.newton.max_iter):
            f_m = problem.rhs(m)
            res = m - y - 0.5 * hc * f_m
            res_norm = np.sqrt(np.sum(res**2, axis=-1))
            # Relative scale: large states (e.g. circulating angles) push
            # the attainable residual floor above any absolute tolerance.
            scale = 1.0 + np.sqrt(np.sum(m**2, axis=-1))
            finite = np.isfinite(res_norm)
            if not np.any(finite):
                return np.full_like(y, np.nan)
            worst = float(np.max(np.where(finite, res_norm / scale, 0.0)))
            if worst <= self.newton.tol:
                break
            jf = jac(m)
            newton_mat = eye - 0.5 * np.asarray(hc)[..., None] * jf
            # Column shape keeps solve batched over leading axes.
            delta = np.linalg.solve(
                np.where(finite[..., None, None], newton_mat, eye),
                np.where(finite[..., None], res, 0.0)[..., None],
            )[..., 0]
            m = m - delta
        else:
            raise NonConvergenceError(
                f"midpoint stage did not reach tol {self.newton.tol} "
                f"in {self.newton.max_iter} iterations (residual {worst:.3e})",
                residual=float(worst),
            )
        out = y + hc * problem.rhs(m)
        return np.where(finite[..., None], out, np.nan)


class StormerVerlet:
    """Symmetric splitting map for canonical systems y = (v, w).

    Separable energies use the explicit three-evaluation form; general
    energies fall back to the time-symmetric form with fixed-point solves
    for the implicit half steps.
    """

    order = 2
    name = "verlet"

    def __init__(self, tol: float = 1e-12, max_iter: int = 100):
        self.tol = tol
        self.max_iter = max_iter

    def step(self, problem: OdeSystem, y: np.ndarray, h) -> np.ndarray:
        ham = problem.hamiltonian
        if ham is None:
            raise ValueError(f"problem {problem.name!r} has no Hamiltonian splitting")
        y = np.asarray(y, dtype=float)
        hc = _h_col(h, y)
        half = ham.half_dim
        v, w = y[..., :half], y[..., half:]
        if ham.separable:
            v_half = v - 0.5 * hc * ham.grad_w(v, w)
            w_new = w + hc * ham.grad_v(v_half, w)
            v_new = v_half - 0.5 * hc * ham.grad_w(v_half, w_new)
        else:
            v_half = self._fixed_point(
                lambda x: v - 0.5 * hc * ham.grad_w(x, w), v
            )
            w_new = self._fixed_point(
                lambda x: w
                + 0.5 * hc * (ham.grad_v(v_half, w) + ham.grad_v(v_half, x)),
                w,
            )
            v_new = v_half - 0.5 * hc * ham.grad_w(v_half, w_new)
        return np.concatenate([v_new, w_new], axis=-1)

    def _fixed_point(self, g: Callable, x0: np.ndarray) -> np.ndarray:
        x = g(x0)
        for _ in range(self.max_iter):
            x_next = g(x)
            scale = 1.0 + float(np.max(np.abs(x_next)))
            gap = np.max(np.abs(x_next - x)) / scale
            x = x_next
            if not np.isfinite(gap) or gap <= self.tol:
                break
        else:
            raise NonConvergenceError(
                f"fixed-point half step stalled above tol {self.tol}",
                residual=float(gap),
            )
        return x


def spectral_radius(rhs: Callable, y: np.ndarray, iters: int = 20) -> np.ndarray:
    """Estimate the Jacobian spectral radius by nonlinear power iteration.

    Directional derivatives of the right-hand side replace Jacobian
    products, so only rhs evaluations are needed.  Deterministic: the
    starting direction is rhs(y) itself.
    """
    y = np.asarray(y, dtype=float)
    f0 = rhs(y)
    ynorm = np.sqrt(np.sum(y**2, axis=-1, keepdims=True))
    delta = np.sqrt(np.finfo(float).eps) * (1.0 + ynorm)
    v = np.where(np.abs(f0) > 0, f0, 1.0)
    rho = np.zeros(y.shape[:-1])
    for _ in range(iters):
        vnorm = np.sqrt(np.sum(v**2, axis=-1, keepdims=True))
        vnorm = np.where(vnorm > 0, vnorm, 1.0)
        v = v / vnorm
        fv = (rhs(y + delta * v) - f0) / delta
        rho = np.sqrt(np.sum(fv**2, axis=-1))
        v = fv
    return rho


class ChebyshevRkc:
    """First-order stabilized map built on damped Chebyshev recurrences.

    The stage count can be fixed or chosen per step from the rule
    s = ceil(sqrt(h * rho / safety)) with rho estimated at the current
    state; one stage reduces the map to the explicit Euler step exactly.
    """

    order = 1
    name = "rkc"

    def __init__(self, stages: Union[int, str] = "auto", damping: float = 0.05,
                 safety: float = 0.65, max_stages: int = 200):
        if isinstance(stages, int) and stages < 1:
            raise ValueError("stage count must be at least 1")
        self.stages = stages
        self.damping = damping
        self.safety = safety
        self.max_stages = max_stages

    def _select_stages(self, problem: OdeSystem, y: np.ndarray, h) -> np.ndarray:
        if self.stages != "auto":
            return np.broadcast_to(int(self.stages), y.shape[:-1]).copy()
        rho = spectral_radius(problem.rhs, y)
        h_arr = np.broadcast_to(np.asarray(h, dtype=float), y.shape[:-1])
        s = np.ceil(np.sqrt(h_arr * rho / self.safety))
        s = np.where(np.isfinite(s), s, 1.0)
        return np.clip(s, 1, self.max_stages).astype(int)

    def step(self, problem: OdeSystem, y: np.ndarray, h) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        hc = _h_col(h, y)
        s = self._select_stages(problem, y, h)
        s_max = int(np.max(s))
        # Chebyshev values T_j(w0) and U_j(w0) for all rows at once.
        w0 = 1.0 + self.damping / s.astype(float) ** 2
        t_vals = [np.ones_like(w0), w0]
        u_vals = [np.ones_like(w0), 2.0 * w0]
        for _ in range(2, s_max + 1):
            t_vals.append(2.0 * w0 * t_vals[-1] - t_vals[-2])
            u_vals.append(2.0 * w0 * u_vals[-1] - u_vals[-2])
        t_arr = np.stack(t_vals)  # (s_max + 1, ...)
        u_arr = np.stack(u_vals)
        sel = s[None, ...]
        t_s = np.take_along_axis(t_arr, sel, axis=0)[0]
        u_sm1 = np.take_along_axis(u_arr, sel - 1, axis=0)[0]
        w1 = t_s / (s.astype(float) * u_sm1)  # T_s(w0) / T_s'(w0)

        k_prev2 = y
        k_prev = y + hc * (w1 / w0)[..., None] * problem.rhs(y)
        done = s == 1
        out = np.where(done[..., None], k_prev, y)
        for j in range(2, s_max + 1):
            mu = 2.0 * w0 * t_vals[j - 1] / t_vals[j]
            nu = -t_vals[j - 2] / t_vals[j]
            mu_t = 2.0 * w1 * t_vals[j - 1] / t_vals[j]
            k_next = (
                mu[..., None] * k_prev
                + nu[..., None] * k_prev2
                + hc * mu_t[..., None] * problem.rhs(k_prev)
            )
            # Freeze rows that already produced their result.
            k_next = np.where(done[..., None], k_prev, k_next)
            hit = s == j
            out = np.where(hit[..., None], k_next, out)
            done = done | hit
            k_prev2, k_prev = k_prev, k_next
        return out


def step_embedded_euler_heun(problem: OdeSystem, y: np.ndarray, h):
    """Advance with Euler and Heun at once; their gap estimates local error.

    Returns (y_euler, y_heun, err) where err is the Euclidean distance
    between the two updates for each batch element.
    """
    y = np.asarray(y, dtype=float)
    hc = _h_col(h, y)
    k1 = problem.rhs(y)
    y_euler = y + hc * k1
    k2 = problem.rhs(y_euler)
    y_heun = y + 0.5 * hc * (k1 + k2)
    err = np.sqrt(np.sum((y_heun - y_euler) ** 2, axis=-1))
    return y_euler, y_heun, err


STEPPER_NAMES = ("euler", "heun", "rk4", "midpoint", "verlet", "rkc")


def make_stepper(name: str, **options):
    """Build a stepper by name: euler | heun | rk4 | midpoint | verlet | rkc."""
    if name in TABLEAUS:
        if options:
            raise ValueError(f"{name} takes no options")
        return ExplicitRungeKutta(TABLEAUS[name])
    if name == "midpoint":
        return ImplicitMidpoint(NewtonConfig(**options)) if options else ImplicitMidpoint()
    if name == "verlet":
        return StormerVerlet(**options)
    if name == "rkc":
        return ChebyshevRkc(**options)
    raise ValueError(f"unknown stepper {name!r}; available: {', '.join(STEPPER_NAMES)}")
