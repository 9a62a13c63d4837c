"""Game instances: relevance matrix plus per-creator power costs.

An :class:`Environment` holds the ``n x m`` relevance matrix ``w`` (creators by
users, entries in ``[0, 1]``) and one :class:`PowerCost` per creator. Instances
come from the clustered synthetic recipe, from precomputed embedding CSVs, or
from a JSON file written by :func:`save_env`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class PowerCost:
    """Production cost ``c * x**rho`` with ``c > 0`` and ``rho >= 1``."""

    c: float
    rho: float = 1.5

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValidationError(f"cost coefficient must be > 0, got {self.c}")
        if not (math.isfinite(self.rho) and self.rho >= 1):
            raise ValidationError(f"cost exponent rho must be >= 1, got {self.rho}")

    def value(self, x):
        return self.c * np.power(x, self.rho)

    def d1(self, x):
        return self.c * self.rho * np.power(x, self.rho - 1)

    def d2(self, x):
        if self.rho == 1:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.c * self.rho * (self.rho - 1) * np.power(x, self.rho - 2)


@dataclass(frozen=True, eq=False)
class Environment:
    """A game instance.

    Attributes:
        relevance: ``(n, m)`` array, ``relevance[i, j]`` is user ``j``'s
            preference for creator ``i``.
        costs: one :class:`PowerCost` per creator.
        meta: free-form provenance (seed, generator parameters, source files).
    """

    relevance: np.ndarray
    costs: tuple[PowerCost, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.relevance, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValidationError(f"relevance must be a non-empty 2-D matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("relevance contains non-finite entries")
        if w.min() < 0 or w.max() > 1:
            raise ValidationError(
                f"relevance entries must lie in [0, 1], found range [{w.min()}, {w.max()}]"
            )
        costs = tuple(self.costs)
        if len(costs) != w.shape[0]:
            raise ValidationError(f"expected {w.shape[0]} costs (one per creator), got {len(costs)}")
        for c in costs:
            if not isinstance(c, PowerCost):
                raise ValidationError(f"costs must be PowerCost records, got {type(c).__name__}")
        w.setflags(write=False)
        object.__setattr__(self, "relevance", w)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "_coef", np.array([c.c for c in costs]))
        object.__setattr__(self, "_rho", np.array([c.rho for c in costs]))

    @property
    def n(self) -> int:
        return self.relevance.shape[0]

    @property
    def m(self) -> int:
        return self.relevance.shape[1]

    def cost(self, x: np.ndarray) -> np.ndarray:
        return self._coef * np.power(x, self._rho)

    def cost_d1(self, x: np.ndarray) -> np.ndarray:
        return self._coef * self._rho * np.power(x, self._rho - 1)

    def cost_d2(self, x: np.ndarray) -> np.ndarray:
        # rho == 1 gives an exact zero rather than 0 * x**-1
        return np.where(
            self._rho == 1, 0.0, self._coef * self._rho * (self._rho - 1) * np.power(x, self._rho - 2)
        )

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.relevance.shape == other.relevance.shape
            and np.array_equal(self.relevance, other.relevance)
            and self.costs == other.costs
        )

    __hash__ = None


@dataclass(frozen=True)
class SyntheticParams:
    """Parameters of the clustered synthetic recipe (defaults give the full-scale n=200, m=1000 setup)."""

    d: int = 32
    clusters: int = 50
    spread: float = 0.5
    n: int = 200
    m: int = 1000
    rho: float = 1.5
    cost_lo: float = 0.1
    cost_hi: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        for name in ("d", "clusters", "n", "m"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.spread > 0:
            raise ValidationError(f"spread must be > 0, got {self.spread}")
        if not self.cost_lo > 0:
            raise ValidationError(f"cost_lo must be > 0, got {self.cost_lo}")
        if self.cost_lo > self.cost_hi:
            raise ValidationError(f"cost range is empty: lo={self.cost_lo} > hi={self.cost_hi}")
        if not self.rho >= 1:
            raise ValidationError(f"rho must be >= 1, got {self.rho}")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")


def minmax_normalize(raw: np.ndarray) -> np.ndarray:
    """Map ``raw`` affinely onto ``[0, 1]`` using its global min and max.

    Raises:
        ValidationError: if all entries are equal (the map is undefined).
    """
    lo, hi = float(raw.min()), float(raw.max())
    if not hi > lo:
        raise ValidationError("all raw relevance scores are equal; min-max normalization is undefined")
    w = (raw - lo) / (hi - lo)
    # pin the endpoints against rounding in (hi - lo)
    w[raw == lo] = 0.0
    w[raw == hi] = 1.0
    return np.clip(w, 0.0, 1.0)


def _cluster_points(rng, centers, count, spread):
    labels = rng.integers(len(centers), size=count)
    return centers[labels] + spread * rng.standard_normal((count, centers.shape[1]))


def generate_synthetic_env(params: SyntheticParams = SyntheticParams()) -> Environment:
    """Build a clustered synthetic environment.

    Cluster centers are drawn uniformly on the unit sphere. Users and creators
    pick a cluster uniformly at random and are scattered around its center
    with isotropic Gaussian noise of scale ``params.spread``. Relevance is the
    creator-user dot product, min-max normalized over the whole matrix. Cost
    coefficients are drawn from ``U[cost_lo, cost_hi]``.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    centers = rng.standard_normal((params.clusters, params.d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    users = _cluster_points(rng, centers, params.m, params.spread)
    creators = _cluster_points(rng, centers, params.n, params.spread)
    coef = rng.uniform(params.cost_lo, params.cost_hi, size=params.n)

    relevance = minmax_normalize(creators @ users.T)
    costs = tuple(PowerCost(float(c), float(params.rho)) for c in coef)
    meta = {"kind": "synthetic", **{k: getattr(params, k) for k in params.__dataclass_fields__}}
    return Environment(relevance, costs, meta)


def _read_embeddings(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read embedding file {path}: {exc}") from exc
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValidationError(f"embedding file {path} is empty")
    widths = {len(r.split(",")) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"embedding file {path} has rows of unequal dimension {sorted(widths)}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            arr = np.loadtxt(rows, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"embedding file {path} has a non-numeric cell: {exc}") from exc
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"embedding file {path} contains non-finite values")
    return arr


def build_costs(
    n: int,
    rho: float = 1.5,
    coefficients: Sequence[float] | None = None,
    cost_range: tuple[float, float] = (0.1, 0.5),
    seed: int = 0,
) -> tuple[PowerCost, ...]:
    """Explicit coefficient list, or ``n`` draws from ``U[cost_range]`` seeded by ``seed``."""
    if coefficients is not None:
        if len(coefficients) != n:
            raise ValidationError(f"expected {n} cost coefficients, got {len(coefficients)}")
        return tuple(PowerCost(float(c), float(rho)) for c in coefficients)
    lo, hi = cost_range
    if not (lo > 0 and lo <= hi):
        raise ValidationError(f"invalid cost range [{lo}, {hi}]")
    coef = np.random.default_rng(seed).uniform(lo, hi, size=n)
    return tuple(PowerCost(float(c), float(rho)) for c in coef)


def ingest_embeddings(
    user_file,
    creator_file,
    rho: float = 1.5,
    coefficients: Sequence[float] | None = None,
    cost_range: tuple[float, float] = (0.1, 0.5),
    seed: int = 0,
) -> Environment:
    """Environment from headerless CSV embeddings (one entity per row).

    Relevance is the creator-user dot product, globally min-max normalized.
    Costs come from ``coefficients`` if given, otherwise from seeded draws on
    ``cost_range``.
    """
    users = _read_embeddings(user_file)
    creators = _read_embeddings(creator_file)
    if users.shape[1] != creators.shape[1]:
        raise ValidationError(
            f"embedding dimension mismatch: users have {users.shape[1]}, creators have {creators.shape[1]}"
        )
    relevance = minmax_normalize(creators @ users.T)
    costs = build_costs(creators.shape[0], rho, coefficients, cost_range, seed)
    meta = {"kind": "ingest", "users": str(user_file), "creators": str(creator_file), "seed": seed}
    return Environment(relevance, costs, meta)


def env_to_dict(env: Environment) -> dict:
    return {
        "n": env.n,
        "m": env.m,
        "relevance": env.relevance.tolist(),
        "costs": [{"c": c.c, "rho": c.rho} for c in env.costs],
        "meta": env.meta,
    }


def env_from_dict(data: dict) -> Environment:
    try:
        n, m = int(data["n"]), int(data["m"])
        relevance = np.asarray(data["relevance"], dtype=float)
        costs = tuple(PowerCost(float(c["c"]), float(c["rho"])) for c in data["costs"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed environment record: {exc!r}") from exc
    if relevance.shape != (n, m):
        raise ValidationError(f"relevance has shape {relevance.shape}, header says ({n}, {m})")
    return Environment(relevance, costs, dict(data.get("meta") or {}))


def save_env(env: Environment, path) -> None:
    """Write ``env`` as JSON. Floats use repr, so the round trip is exact."""
    Path(path).write_text(json.dumps(env_to_dict(env), sort_keys=True) + "\n")


def load_env(path) -> Environment:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed environment JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise ValidationError(f"cannot read environment file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"environment JSON in {path} must be an object")
    return env_from_dict(data)


def random_env(n: int, m: int, rho: float = 1.5, seed: int = 0, cost_range=(0.1, 0.5)) -> Environment:
    """Small unstructured instance: ``w ~ U[0, 1]`` entrywise, costs ``U[cost_range]``."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=(n, m))
    coef = rng.uniform(*cost_range, size=n)
    return Environment(w, tuple(PowerCost(float(c), float(rho)) for c in coef), {"kind": "random", "seed": seed})
