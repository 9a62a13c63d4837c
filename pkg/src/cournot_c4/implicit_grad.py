"""Sensitivity of the equilibrium and of welfare to the exploration strengths.

At an interior equilibrium the first-order map ``F(x, beta) = 0`` holds, so
by the implicit function theorem

    dx*/dbeta = (D + Y Z^T)^{-1} B

with ``D`` diagonal and ``Y, Z, B`` of shape ``(n, m)`` (see
:class:`PnePartials`). The welfare gradient follows from the chain rule

    dW/dbeta = (dU/dx + lambda 1) dx*/dbeta + dU/dbeta.

The ``n x n`` system is never inverted: the Woodbury identity reduces it to
an inner system of size ``rank(Y Z^T)``, and sketching replaces the ``m``
user columns by resampled copies of ``ceil(delta m)`` sampled users so that
the inner system shrinks accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import Environment
from .equilibrium import projected_residual
from .errors import NumericalError, ValidationError
from .game import X_MIN, BetaLike, as_beta, as_strategy, match_kernel, ratios

COND_LIMIT = 1e12
INNER_RIDGE = 1e-12


@dataclass(frozen=True, eq=False)
class PnePartials:
    """Blocks of the linearized first-order condition at ``(x*, beta)``.

    ``-dF/dx = diag(D) + Y Z^T`` and ``dF/dbeta = B``, with

    * ``D_i = c_i''(x_i) + sum_j P_ij^2 / x_i^2``
    * ``Y_ij = P_ij (1 - 2 P_ij) / x_i``
    * ``Z_ij = P_ij / x_i``
    * ``B_ij = Y_ij (w_ij - T_j)``, ``T_j = sum_k w_kj P_kj``

    ``x``, ``P``, ``T`` and the centered relevance ``dev = w - T`` are kept for
    the welfare gradient.
    """

    D: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    B: np.ndarray
    x: np.ndarray
    P: np.ndarray
    T: np.ndarray
    dev: np.ndarray


@dataclass(frozen=True)
class SketchSpec:
    """User-column sketch: sample rate ``delta`` in ``(0, 1]`` and RNG seed.

    With ``sketch_diagonal`` the ``sum_j P_ij^2 / x_i^2`` part of ``D`` is
    summed over the same resampled columns as ``Y~ Z~^T``. Each user then
    contributes its whole block ``diag(Z_j^2) + Y_j Z_j^T`` or nothing, which
    keeps the sketched system positive definite when matching is nearly
    deterministic (``P_ij`` close to 1 makes ``Y_j`` close to ``-Z_j``).
    """

    delta: float = 1.0
    seed: int = 0
    sketch_diagonal: bool = False

    def validate(self) -> None:
        if not (0 < self.delta <= 1):
            raise ValidationError(f"sample rate delta must lie in (0, 1], got {self.delta}")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")

    def sample_size(self, m: int) -> int:
        return max(1, math.ceil(self.delta * m - 1e-9))


def pne_partials(
    env: Environment, x_star, beta: BetaLike, tol: float = 1e-2, x_min: float = X_MIN
) -> PnePartials:
    """Assemble ``D, Y, Z, B`` at an equilibrium.

    Raises:
        ValidationError: ``x_star`` is not an equilibrium to within ``tol``
            (projected gradient norm), so the implicit-function premise fails.
    """
    x = as_strategy(x_star, env.n)
    b = as_beta(beta, env.m)
    r = projected_residual(env, b, x, x_min)
    if not r < tol:
        raise ValidationError(f"x_star is not an equilibrium: residual {r:.3e} >= tol {tol:.3e}; re-solve first")
    Z, P = ratios(match_kernel(env, b), x)
    D = env.cost_d2(x) + (Z * Z).sum(axis=1)
    Y = Z * (1.0 - 2.0 * P)
    # center on the first row so a constant column gives dev == 0 exactly
    d = env.relevance - env.relevance[:1, :]
    shift = (d * P).sum(axis=0)
    dev = d - shift[None, :]
    T = env.relevance[0] + shift
    B = Y * dev
    return PnePartials(D=D, Y=Y, Z=Z, B=B, x=x, P=P, T=T, dev=dev)


def jacobian_exact(partials: PnePartials) -> np.ndarray:
    """``dx*/dbeta`` by a dense solve of ``(D + Y Z^T) J = B``. Reference path, O(n^3)."""
    A = np.diag(partials.D) + partials.Y @ partials.Z.T
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"equilibrium Jacobian system is ill-conditioned (cond={cond:.3e})")
    return np.linalg.solve(A, partials.B)


def sketch_matrices(partials: PnePartials, spec: SketchSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-resampled ``Y~, Z~`` and the column map ``j -> j'(j)``.

    A subset ``I`` of ``ceil(delta m)`` users is drawn without replacement;
    every column ``j`` then copies a column ``j'(j)`` drawn uniformly from
    ``I``. ``delta = 1`` uses the identity map, so the sketch is exact.
    """
    spec.validate()
    m = partials.Y.shape[1]
    if spec.delta == 1:
        col_map = np.arange(m)
    else:
        rng = np.random.default_rng(spec.seed)
        subset = rng.choice(m, size=spec.sample_size(m), replace=False)
        col_map = rng.choice(subset, size=m, replace=True)
    return partials.Y[:, col_map], partials.Z[:, col_map], col_map


def compress_sketch(Y: np.ndarray, Z: np.ndarray, col_map: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factors ``(Yc, Zc)`` over the distinct sampled columns with ``Yc Zc^T == Y~ Z~^T``.

    ``Y``, ``Z`` are the unsketched blocks; repeated columns are folded into
    a multiplicity weight on ``Yc``.
    """
    cols, counts = np.unique(col_map, return_counts=True)
    return Y[:, cols] * counts[None, :], Z[:, cols]


def smw_apply(D: np.ndarray, Y: np.ndarray, Z: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Apply ``(diag(D) + Y Z^T)^{-1}`` to ``rhs`` via the Woodbury identity.

    ``(D + Y Z^T)^{-1} = D^{-1} - D^{-1} Y (I + Z^T D^{-1} Y)^{-1} Z^T D^{-1}``.
    Only the ``r x r`` inner system is factorized (``r`` = columns of ``Y``).
    """
    D = np.asarray(D, dtype=float)
    if np.any(D <= 0) or not np.all(np.isfinite(D)):
        raise NumericalError("diagonal block must be positive and finite")
    rhs = np.asarray(rhs, dtype=float)
    vector = rhs.ndim == 1
    if vector:
        rhs = rhs[:, None]
    inv_d = 1.0 / D
    Drhs = inv_d[:, None] * rhs
    r = Y.shape[1]
    if r == 0:
        out = Drhs
    else:
        DY = inv_d[:, None] * Y
        inner = Z.T @ DY
        inner[np.diag_indices(r)] += 1.0 + INNER_RIDGE
        try:
            sol = np.linalg.solve(inner, Z.T @ Drhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular inner Woodbury system: {exc}") from exc
        out = Drhs - DY @ sol
    if not np.all(np.isfinite(out)):
        raise NumericalError("Woodbury solve produced non-finite values")
    return out[:, 0] if vector else out


def du_dx(partials: PnePartials) -> np.ndarray:
    """``dU/dx_i = sum_j (P_ij / x_i)(w_ij - T_j)``."""
    return (partials.Z * partials.dev).sum(axis=1)


def du_dbeta(partials: PnePartials) -> np.ndarray:
    """Direct ``dU/dbeta_j = sum_i w_ij^2 P_ij - T_j^2``.

    Evaluated as the variance ``sum_i P_ij (w_ij - T_j)^2``, so it is
    non-negative in floating point too.
    """
    return (partials.P * partials.dev**2).sum(axis=0)


def welfare_gradient(
    env: Environment,
    x_star,
    beta: BetaLike,
    lam: float = 0.5,
    spec: SketchSpec = SketchSpec(),
    *,
    method: str = "smw",
    tol: float = 1e-2,
) -> np.ndarray:
    """Gradient of ``W = U + lam V`` at the equilibrium, one entry per user.

    Args:
        env: game instance.
        x_star: equilibrium under ``beta``.
        beta: exploration strengths.
        lam: weight on total production volume.
        spec: sketch of the user columns used inside the inverse.
        method: ``"smw"`` (Woodbury on the sketched low-rank part) or
            ``"dense"`` (direct solve with the exact ``Y Z^T``; ignores ``spec``).
        tol: equilibrium tolerance forwarded to :func:`pne_partials`.
    """
    if not (np.isfinite(lam) and lam >= 0):
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    partials = pne_partials(env, x_star, beta, tol=tol)
    v = du_dx(partials) + lam
    if method == "dense":
        indirect = v @ jacobian_exact(partials)
    elif method == "smw":
        _, _, col_map = sketch_matrices(partials, spec)
        Yc, Zc = compress_sketch(partials.Y, partials.Z, col_map)
        D = partials.D
        if spec.sketch_diagonal and spec.delta < 1:
            cols, counts = np.unique(col_map, return_counts=True)
            D = env.cost_d2(partials.x) + (partials.Z[:, cols] ** 2 * counts[None, :]).sum(axis=1)
        # v^T (D + Yc Zc^T)^{-1} B = ((D + Zc Yc^T)^{-1} v)^T B: one vector solve
        indirect = smw_apply(D, Zc, Yc, v) @ partials.B
    else:
        raise ValidationError(f"unknown method {method!r}")
    return indirect + du_dbeta(partials)
