"""Matching probabilities, creator utilities and welfare at a fixed (x, beta).

User ``j`` is matched to creator ``i`` with probability

    P[i, j] = x_i exp(beta_j w_ij) / sum_k x_k exp(beta_j w_kj)

and creator ``i`` earns ``sum_j P[i, j] - c_i(x_i)``. Everything here is a pure
function of its inputs; exponentials are always shifted per user column so
that ``beta`` in the thousands stays finite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .env import Environment
from .errors import ValidationError

X_MIN = 1e-8

Mode = Literal["personalized", "homogeneous"]


@dataclass(frozen=True, eq=False)
class BetaPolicy:
    """Per-user exploration strengths. Homogeneous policies share one value."""

    beta: np.ndarray
    mode: Mode = "personalized"

    def __post_init__(self):
        b = np.array(self.beta, dtype=float).reshape(-1)
        if b.size == 0:
            raise ValidationError("beta must have at least one entry")
        if np.any(np.isnan(b)) or np.any(np.isinf(b)):
            raise ValidationError("beta must be finite")
        if np.any(b < 0):
            raise ValidationError(f"beta must be >= 0, got min {b.min()}")
        if self.mode not in ("personalized", "homogeneous"):
            raise ValidationError(f"unknown beta mode {self.mode!r}")
        if self.mode == "homogeneous" and np.any(b != b[0]):
            raise ValidationError("homogeneous beta must have equal entries")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @classmethod
    def homogeneous(cls, value: float, m: int) -> "BetaPolicy":
        return cls(np.full(m, float(value)), "homogeneous")

    def __eq__(self, other):
        if not isinstance(other, BetaPolicy):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.beta, other.beta)

    __hash__ = None


BetaLike = Union[BetaPolicy, np.ndarray, float, list]


def as_beta(beta: BetaLike, m: int) -> np.ndarray:
    """Validated length-``m`` beta vector; scalars broadcast."""
    if isinstance(beta, BetaPolicy):
        b = beta.beta
    else:
        b = np.asarray(beta, dtype=float)
        if b.ndim == 0:
            b = np.full(m, float(b))
    b = b.reshape(-1)
    if b.shape != (m,):
        raise ValidationError(f"beta must have length m={m}, got {b.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ValidationError("beta must be finite")
    if np.any(b < 0):
        raise ValidationError(f"beta must be >= 0, got min {b.min()}")
    return b


def as_strategy(x, n: int) -> np.ndarray:
    """Validated strictly positive length-``n`` strategy vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (n,):
        raise ValidationError(f"strategy must have length n={n}, got {x.shape[0]}")
    if np.any(np.isnan(x)):
        raise ValidationError("strategy contains NaN")
    if np.any(x <= 0):
        raise ValidationError(f"strategy must be strictly positive, got min {x.min()}")
    return x


def match_kernel(env: Environment, beta: np.ndarray) -> np.ndarray:
    """``exp(beta_j w_ij)`` shifted so every column has maximum exactly 1.

    The shift cancels in ``P``; the result depends on ``beta`` only, so
    solvers compute it once per beta.
    """
    s = env.relevance * beta[None, :]
    s -= s.max(axis=0, keepdims=True)
    return np.exp(s)


def ratios(kernel: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(R, P)`` with ``R[i, j] = P[i, j] / x_i`` (finite even at tiny ``x_i``)."""
    g = x @ kernel
    R = kernel / g[None, :]
    return R, x[:, None] * R


def match_probabilities(env: Environment, x, beta: BetaLike) -> np.ndarray:
    """The ``(n, m)`` column-stochastic match matrix ``P``.

    Computed in log space: per column subtract ``max_i(beta_j w_ij + ln x_i)``
    before exponentiating.
    """
    x = as_strategy(x, env.n)
    b = as_beta(beta, env.m)
    logits = env.relevance * b[None, :] + np.log(x)[:, None]
    logits -= logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=0, keepdims=True)


def creator_utilities(env: Environment, x, beta: BetaLike) -> np.ndarray:
    x = as_strategy(x, env.n)
    P = match_probabilities(env, x, beta)
    return P.sum(axis=1) - env.cost(x)


def utility_gradient(env: Environment, x, beta: BetaLike) -> np.ndarray:
    """Own-strategy derivatives ``du_i/dx_i = sum_j P_ij (1 - P_ij) / x_i - c_i'(x_i)``.

    This is the map whose zero is the equilibrium.
    """
    x = as_strategy(x, env.n)
    b = as_beta(beta, env.m)
    R, P = ratios(match_kernel(env, b), x)
    return (R * (1.0 - P)).sum(axis=1) - env.cost_d1(x)


@dataclass(frozen=True, eq=False)
class WelfareReport:
    """Per-user satisfaction and aggregates ``U``, ``V`` and ``W = U + lambda V``."""

    pi: np.ndarray
    x: np.ndarray
    U: float
    V: float
    lam: float
    W: float

    def to_dict(self) -> dict:
        return {
            "U": self.U,
            "V": self.V,
            "lambda": self.lam,
            "W": self.W,
            "pi": self.pi.tolist(),
            "x": self.x.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def welfare(env: Environment, x, beta: BetaLike, lam: float = 0.5) -> WelfareReport:
    """Evaluate user satisfaction ``pi_j = sum_i w_ij P_ij`` and the aggregates."""
    if not (np.isfinite(lam) and lam >= 0):
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    x = as_strategy(x, env.n)
    P = match_probabilities(env, x, beta)
    pi = (env.relevance * P).sum(axis=0)
    U = float(pi.sum())
    V = float(x.sum())
    return WelfareReport(pi=pi, x=x.copy(), U=U, V=V, lam=float(lam), W=U + lam * V)
