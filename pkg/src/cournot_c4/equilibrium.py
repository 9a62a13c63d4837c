"""Pure Nash equilibrium of the production game.

The solver is simultaneous projected gradient ascent: every creator moves
along its own utility gradient with step ``eta`` and is clipped to
``[x_min, inf)``. Two safeguards keep it usable at tight tolerances:

* each creator's step is capped at ``1 / curvature_i`` (the own-strategy
  curvature ``-d2u_i/dx_i^2``), which only binds for creators pushed to
  tiny volumes where ``c''(x)`` blows up;
* the stopping test uses the gradient projected onto the feasible set,
  so creators pinned at ``x_min`` with a negative gradient count as optimal.

If the gradient ever exceeds ``1e6`` or turns non-finite the run restarts
from ``x0`` with ``eta`` halved. The same happens when the projected norm
fails to halve over a window of ``STALL_WINDOW`` steps: simultaneous steps
can lock into a cycle near the floor that no iteration budget escapes. With ``polish=True`` a converged run is
refined by Newton steps on the first-order map, which drives the residual to
rounding level; finite-difference checks of the equilibrium need that.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .env import Environment
from .errors import NumericalError, ValidationError
from .game import X_MIN, BetaLike, as_beta, as_strategy, match_kernel, ratios, utility_gradient

log = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e6
MAX_HALVINGS = 40
STALL_WINDOW = 1000


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 10000
    eta: float = 0.1
    tol: float = 1e-2
    x0: float | tuple | None = None  # None means all-ones
    x_min: float = X_MIN
    polish: bool = False

    def validate(self) -> None:
        if int(self.max_iter) < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.eta > 0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if not self.x_min > 0:
            raise ValidationError(f"x_min must be > 0, got {self.x_min}")

    def initial(self, n: int) -> np.ndarray:
        if self.x0 is None:
            x0 = np.ones(n)
        else:
            x0 = np.asarray(self.x0, dtype=float)
            x0 = np.full(n, float(x0)) if x0.ndim == 0 else x0.reshape(-1)
        if x0.shape != (n,):
            raise ValidationError(f"x0 must have length {n}")
        if np.any(~np.isfinite(x0)) or np.any(x0 < self.x_min):
            raise ValidationError(f"x0 must be >= x_min={self.x_min} elementwise")
        return x0


@dataclass(frozen=True, eq=False)
class SolveResult:
    x_star: np.ndarray
    iterations: int
    final_grad_norm: float
    converged: bool

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class _Moments:
    """Row sums of powers of ``R = P / x`` via matrix-vector products.

    With ``K`` the shifted kernel and ``g = x @ K``, ``sum_j R_ij^p`` equals
    ``(K**p) @ g**-p``; the powers of ``K`` depend on beta only.
    """

    def __init__(self, kernel):
        self.K = kernel
        self.K2 = kernel * kernel
        self.K3 = self.K2 * kernel

    def grad_and_curvature(self, env, x):
        inv_g = 1.0 / (x @ self.K)
        inv_g2 = inv_g * inv_g
        s1 = self.K @ inv_g
        s2 = self.K2 @ inv_g2
        s3 = self.K3 @ (inv_g2 * inv_g)
        # sum_j R(1 - P) = s1 - x s2;  sum_j R^2 (1 - P) = s2 - x s3
        grad = s1 - x * s2 - env.cost_d1(x)
        curv = 2.0 * (s2 - x * s3) + env.cost_d2(x)
        return grad, curv


def _newton_polish(env, kernel, x, x_min, max_steps=20):
    """Newton refinement of a converged iterate; creators at the floor stay fixed."""

    def foc(x):
        R, P = ratios(kernel, x)
        return R, P, (R * (1.0 - P)).sum(axis=1) - env.cost_d1(x)

    R, P, F = foc(x)
    free = ~((x <= x_min) & (F < 0))
    norm = float(np.linalg.norm(F[free]))
    for _ in range(max_steps):
        if norm == 0.0:
            break
        # -dF/dx = diag(c'' + sum_j R^2) + (R (1 - 2P)) R^T
        A = (R * (1.0 - 2.0 * P)) @ R.T
        A[np.diag_indices_from(A)] += env.cost_d2(x) + (R * R).sum(axis=1)
        try:
            dx = np.linalg.solve(A[np.ix_(free, free)], F[free])
        except np.linalg.LinAlgError:
            break
        x_new = x.copy()
        x_new[free] = np.maximum(x_min, x[free] + dx)
        R_new, P_new, F_new = foc(x_new)
        new_norm = float(np.linalg.norm(F_new[free]))
        if not new_norm < norm:
            break
        x, R, P, F, norm = x_new, R_new, P_new, F_new, new_norm
    return x


def _projected_norm(grad, x, x_min):
    pg = np.where((x <= x_min) & (grad < 0), 0.0, grad)
    return float(np.sqrt(pg @ pg))


def _run(env, moments, x0, eta, tol, max_iter, x_min):
    """One attempt at fixed ``eta``. Returns ``(x, iters, norm, converged, failed)``."""
    x = x0.copy()
    checkpoint = np.inf
    for it in range(max_iter + 1):
        grad, curv = moments.grad_and_curvature(env, x)
        if not np.all(np.isfinite(grad)) or np.max(np.abs(grad)) > DIVERGENCE_THRESHOLD:
            return x, it, float("inf"), False, True
        norm = _projected_norm(grad, x, x_min)
        if norm < tol:
            return x, it, norm, True, False
        if it == max_iter:
            return x, it, norm, False, False
        if it % STALL_WINDOW == 0:
            if norm > 0.5 * checkpoint:
                return x, it, norm, False, True
            checkpoint = norm
        step = eta / np.maximum(1.0, eta * curv)
        x = np.maximum(x_min, x + step * grad)
    raise AssertionError("unreachable")


def solve_pne(
    env: Environment,
    beta: BetaLike,
    config: SolverConfig = SolverConfig(),
    warm_start=None,
) -> SolveResult:
    """Find the equilibrium production profile under ``beta``.

    Args:
        env: game instance.
        beta: exploration strengths (scalar, length-``m`` array or BetaPolicy).
        config: solver settings; ``config.x0`` is ignored when ``warm_start``
            is given.
        warm_start: optional starting profile, typically the equilibrium at a
            nearby beta.

    Returns:
        SolveResult. ``converged`` is False when ``max_iter`` ran out; the last
        iterate is returned either way.

    Raises:
        NumericalError: the gradient is non-finite at the starting point, or
            keeps diverging or stalling after repeated step halving.
    """
    config.validate()
    b = as_beta(beta, env.m)
    if warm_start is not None:
        x0 = np.maximum(as_strategy(warm_start, env.n), config.x_min)
    else:
        x0 = config.initial(env.n)
    moments = _Moments(match_kernel(env, b))

    eta = config.eta
    for _ in range(MAX_HALVINGS):
        x, it, norm, converged, failed = _run(env, moments, x0, eta, config.tol, int(config.max_iter), config.x_min)
        if not failed:
            if converged and config.polish:
                x = _newton_polish(env, moments.K, x, config.x_min)
                norm = _projected_norm(moments.grad_and_curvature(env, x)[0], x, config.x_min)
            return SolveResult(x_star=x, iterations=it, final_grad_norm=norm, converged=converged)
        if it == 0:
            raise NumericalError("utility gradient is not finite at the starting point")
        log.warning("iteration diverged or stalled at eta=%g; retrying with eta=%g", eta, eta / 2)
        eta /= 2
    raise NumericalError(f"equilibrium iteration diverged or stalled for every step size down to {eta:g}")


def residual(env: Environment, beta: BetaLike, x) -> float:
    """Euclidean norm of the own-strategy gradient at ``x`` (zero at an interior equilibrium)."""
    g = utility_gradient(env, x, beta)
    return float(np.sqrt(g @ g))


def projected_residual(env: Environment, beta: BetaLike, x, x_min: float = X_MIN) -> float:
    """Like :func:`residual`, but ignores creators held at ``x_min`` by a negative gradient."""
    x = as_strategy(x, env.n)
    g = utility_gradient(env, x, beta)
    return _projected_norm(g, x, x_min)


def dsc_hessian(env: Environment, beta: BetaLike, x, n_cap: int = 64) -> tuple[np.ndarray, float]:
    """Negated symmetrized game Hessian and its smallest eigenvalue.

    Entry ``(k, l)`` is ``-(d2u_k/dx_k dx_l + d2u_l/dx_l dx_k) / 2``. In terms of
    ``P`` this is ``sum_j (P_kj/x_k)(P_lj/x_l)(1 - P_kj - P_lj)`` off the
    diagonal and ``sum_j 2 (P_kj/x_k)^2 (1 - P_kj) + c_k''(x_k)`` on it.
    Positive definiteness everywhere makes the game strictly monotone, hence
    the equilibrium unique.
    """
    if env.n > n_cap:
        raise ValidationError(f"dsc_hessian is limited to n <= {n_cap}, got n={env.n}")
    x = as_strategy(x, env.n)
    b = as_beta(beta, env.m)
    R, P = ratios(match_kernel(env, b), x)
    # sum_j R_kj R_lj (1 - P_kj - P_lj)
    RR = R @ R.T
    H = RR - (R * P) @ R.T - R @ (R * P).T
    d = 2.0 * (R * R * (1.0 - P)).sum(axis=1) + env.cost_d2(x)
    np.fill_diagonal(H, d)
    H = 0.5 * (H + H.T)
    return H, float(np.linalg.eigvalsh(H)[0])
