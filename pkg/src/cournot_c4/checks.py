"""Numerical self-checks on small seeded instances.

Each check pits a production code path against an independent oracle
(finite differences, dense linear algebra, eigen-decomposition).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import implicit_grad
from .env import random_env
from .equilibrium import SolverConfig, dsc_hessian, solve_pne
from .game import creator_utilities, utility_gradient, welfare

CHECK_NAMES = ("grad", "welfare", "jacobian", "smw", "dsc")

TIGHT = SolverConfig(tol=1e-8, max_iter=200_000, polish=True)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    mask = np.abs(b) > floor
    if not mask.any():
        return float(np.max(np.abs(a - b)))
    return float(np.max(np.abs(a - b)[mask] / np.abs(b)[mask]))


def own_gradient_fd(env, x, beta, h=1e-6):
    """Central differences of ``u_i`` in ``x_i``."""
    out = np.empty(env.n)
    for i in range(env.n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (creator_utilities(env, xp, beta)[i] - creator_utilities(env, xm, beta)[i]) / (2 * h)
    return out


def resolve_fd(env, beta, x_star, fn, h=1e-4, solver=TIGHT):
    """Central differences of ``fn(x*(beta), beta)`` w.r.t. each ``beta_j``, re-solving the equilibrium."""
    cols = []
    for j in range(env.m):
        bp, bm = beta.copy(), beta.copy()
        bp[j] += h
        bm[j] -= h
        xp = solve_pne(env, bp, solver, warm_start=x_star).x_star
        xm = solve_pne(env, bm, solver, warm_start=x_star).x_star
        cols.append((np.asarray(fn(xp, bp)) - np.asarray(fn(xm, bm))) / (2 * h))
    return np.stack(cols, axis=-1)


def check_grad(seed):
    rng = np.random.default_rng(seed)
    env = random_env(5, 3, seed=seed)
    x = rng.uniform(0.2, 2.0, env.n)
    beta = rng.uniform(0.0, 5.0, env.m)
    err = _rel_err(utility_gradient(env, x, beta), own_gradient_fd(env, x, beta))
    return err <= 1e-5, f"max rel err {err:.2e} (limit 1e-5)"


def check_welfare(seed, lam=0.5):
    rng = np.random.default_rng(seed + 1)
    env = random_env(6, 4, seed=seed + 1)
    beta = rng.uniform(1.0, 5.0, env.m)
    x = solve_pne(env, beta, TIGHT).x_star
    g = implicit_grad.welfare_gradient(env, x, beta, lam, tol=1e-6)
    fd = resolve_fd(env, beta, x, lambda xs, b: welfare(env, xs, b, lam).W)
    err = _rel_err(g, fd)
    return err <= 1e-3, f"max rel err vs re-solve differences {err:.2e} (limit 1e-3)"


def check_jacobian(seed):
    rng = np.random.default_rng(seed + 2)
    env = random_env(6, 3, seed=seed + 2)
    beta = rng.uniform(1.0, 5.0, env.m)
    x = solve_pne(env, beta, TIGHT).x_star
    J = implicit_grad.jacobian_exact(implicit_grad.pne_partials(env, x, beta, tol=1e-6))
    fd = resolve_fd(env, beta, x, lambda xs, b: xs)
    err = _rel_err(J, fd)
    return err <= 1e-3, f"max rel err vs re-solve differences {err:.2e} (limit 1e-3)"


def check_smw(seed):
    rng = np.random.default_rng(seed + 3)
    n, m = 8, 3
    D = rng.uniform(0.5, 2.0, n)
    Y, Z = rng.standard_normal((n, m)), rng.standard_normal((n, m))
    rhs = rng.standard_normal((n, 2))
    dense = np.linalg.solve(np.diag(D) + Y @ Z.T, rhs)
    err_apply = _rel_err(implicit_grad.smw_apply(D, Y, Z, rhs), dense)

    env = random_env(12, 7, seed=seed + 3)
    beta = rng.uniform(0.5, 4.0, env.m)
    x = solve_pne(env, beta, TIGHT).x_star
    g_smw = implicit_grad.welfare_gradient(env, x, beta, 0.5, tol=1e-6)
    g_dense = implicit_grad.welfare_gradient(env, x, beta, 0.5, method="dense", tol=1e-6)
    err_grad = float(np.max(np.abs(g_smw - g_dense)) / np.max(np.abs(g_dense)))
    ok = err_apply <= 1e-10 and err_grad <= 1e-8
    return ok, f"apply rel err {err_apply:.2e} (limit 1e-10), gradient rel err {err_grad:.2e} (limit 1e-8)"


def check_dsc(seed, points=100):
    rng = np.random.default_rng(seed + 4)
    worst = np.inf
    for k in range(points):
        env = random_env(int(rng.integers(2, 17)), int(rng.integers(1, 6)), seed=seed * 1000 + k)
        x = rng.uniform(0.05, 3.0, env.n)
        beta = rng.uniform(0.0, 8.0, env.m)
        worst = min(worst, dsc_hessian(env, beta, x)[1])
    return worst > 0, f"smallest eigenvalue over {points} points {worst:.3e} (must be > 0)"


_CHECKS = {
    "grad": check_grad,
    "welfare": check_welfare,
    "jacobian": check_jacobian,
    "smw": check_smw,
    "dsc": check_dsc,
}


def run_checks(seed: int = 0, skip=frozenset()) -> list[CheckResult]:
    results = []
    for name in CHECK_NAMES:
        if name in skip:
            continue
        try:
            ok, detail = _CHECKS[name](seed)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return results
