"""Outer loop: projected gradient ascent on beta to maximize ``W = U + lam V``.

Each iteration re-solves the equilibrium (warm-started from the previous
one), draws a fresh user sketch, computes the approximate welfare gradient
and takes a step, clipping beta to ``[0, beta_max]``. Homogeneous mode keeps
one shared beta; its gradient is the sum of the per-user entries, and the
step divides that sum by ``m`` so both modes move beta on the same scale.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .env import Environment
from .equilibrium import SolverConfig, residual, solve_pne
from .errors import NumericalError, ValidationError
from .game import BetaPolicy, Mode, welfare
from .implicit_grad import SketchSpec, welfare_gradient

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "U", "V", "W", "residual", "solver_iters", "beta_mean", "beta_min", "beta_max")


def fmt(v) -> str:
    """17 significant digits: round-trips any double."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 100
    eta: float = 200.0
    delta: float = 0.1
    lam: float = 0.5
    beta0: float | Sequence[float] = 100.0
    mode: Mode = "personalized"
    beta_max: float = 1e4
    seed: int = 0
    warm_start: bool = True
    sketch_diagonal: bool = True

    def validate(self, m: int) -> np.ndarray:
        """Check invariants and return the initial beta vector."""
        if int(self.iterations) < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if not self.eta > 0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if not (0 < self.delta <= 1):
            raise ValidationError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.lam >= 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.mode not in ("personalized", "homogeneous"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if not self.beta_max > 0:
            raise ValidationError(f"beta_max must be > 0, got {self.beta_max}")
        b = np.asarray(self.beta0, dtype=float)
        b = np.full(m, float(b)) if b.ndim == 0 else b.reshape(-1).copy()
        if b.shape != (m,):
            raise ValidationError(f"beta0 must be a scalar or have length m={m}")
        if np.any(b < 0) or np.any(b > self.beta_max) or not np.all(np.isfinite(b)):
            raise ValidationError(f"beta0 must lie within [0, {self.beta_max}]")
        if self.mode == "homogeneous" and np.any(b != b[0]):
            raise ValidationError("homogeneous mode needs a single initial beta")
        return b


@dataclass(frozen=True, eq=False)
class IterRecord:
    iteration: int
    U: float
    V: float
    W: float
    residual: float
    solver_iters: int
    beta: np.ndarray

    def row(self) -> list[str]:
        b = self.beta
        return [fmt(v) for v in (self.iteration, self.U, self.V, self.W, self.residual,
                                 self.solver_iters, b.mean(), b.min(), b.max())]


@dataclass(eq=False)
class OptTrace:
    records: list[IterRecord] = field(default_factory=list)
    final_beta: BetaPolicy | None = None
    final_report: object = None
    error: str | None = None

    @property
    def W(self) -> np.ndarray:
        return np.array([r.W for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow(r.row())
        return buf.getvalue()

    def to_dict(self, full_beta: bool = False) -> dict:
        out = {
            "records": [
                {
                    "iter": r.iteration, "U": r.U, "V": r.V, "W": r.W, "residual": r.residual,
                    "solver_iters": r.solver_iters, "beta_mean": float(r.beta.mean()),
                    "beta_min": float(r.beta.min()), "beta_max": float(r.beta.max()),
                    **({"beta": r.beta.tolist()} if full_beta else {}),
                }
                for r in self.records
            ],
            "error": self.error,
        }
        if self.final_beta is not None:
            out["final_beta"] = {"mode": self.final_beta.mode, "beta": self.final_beta.beta.tolist()}
        if self.final_report is not None:
            out["final_report"] = self.final_report.to_dict()
        return out

    def to_json(self, full_beta: bool = False) -> str:
        return json.dumps(self.to_dict(full_beta))


def optimize_beta(
    env: Environment,
    config: OptimizerConfig = OptimizerConfig(),
    solver: SolverConfig = SolverConfig(),
) -> OptTrace:
    """Run the welfare ascent for ``config.iterations`` steps.

    The trace holds ``iterations + 1`` records (iteration 0 is the starting
    beta). If an equilibrium solve fails to converge the run stops there and
    ``trace.error`` describes the failure; earlier records are kept.
    """
    beta = config.validate(env.m)
    rng = np.random.default_rng(config.seed)
    trace = OptTrace()
    x_prev = None
    report = None

    for t in range(config.iterations + 1):
        try:
            res = solve_pne(env, beta, solver, warm_start=x_prev if config.warm_start else None)
        except NumericalError as exc:
            trace.error = f"iteration {t}: {exc}"
            break
        if not res.converged:
            trace.error = (
                f"iteration {t}: equilibrium solver did not converge "
                f"(grad norm {res.final_grad_norm:.3e} after {res.iterations} steps)"
            )
            break
        x_prev = res.x_star
        report = welfare(env, res.x_star, beta, config.lam)
        trace.records.append(
            IterRecord(t, report.U, report.V, report.W, residual(env, beta, res.x_star), res.iterations, beta.copy())
        )
        log.debug("iter %d W=%.6g beta_mean=%.4g", t, report.W, beta.mean())
        if t == config.iterations:
            break

        spec = SketchSpec(config.delta, int(rng.integers(2**63 - 1)), config.sketch_diagonal)
        try:
            grad = welfare_gradient(env, res.x_star, beta, config.lam, spec, tol=solver.tol)
        except (NumericalError, ValidationError) as exc:
            trace.error = f"iteration {t}: gradient failed: {exc}"
            break
        if config.mode == "homogeneous":
            step = config.eta * grad.sum() / env.m
            beta = np.full(env.m, np.clip(beta[0] + step, 0.0, config.beta_max))
        else:
            beta = np.clip(beta + config.eta * grad, 0.0, config.beta_max)

    if trace.records:
        last = trace.records[-1]
        trace.final_beta = BetaPolicy(last.beta, config.mode)
        trace.final_report = report
    return trace


@dataclass(frozen=True, eq=False)
class SweepRow:
    beta: float
    U: float
    V: float
    W: float
    x_star: np.ndarray
    pi: np.ndarray
    converged: bool
    error: str | None = None


def sweep_beta(
    env: Environment,
    grid: Sequence[float],
    lam: float = 0.5,
    solver: SolverConfig = SolverConfig(),
) -> list[SweepRow]:
    """Equilibrium welfare for each homogeneous beta in ``grid`` (in grid order).

    Solves are warm-started along the grid. A failing grid point yields a
    row with ``converged=False`` and NaN metrics; the sweep continues.
    """
    grid = [float(b) for b in grid]
    if any(not np.isfinite(b) or b < 0 for b in grid):
        raise ValidationError("sweep grid values must be finite and >= 0")
    rows = []
    x_prev = None
    nan_n, nan_m = np.full(env.n, np.nan), np.full(env.m, np.nan)
    for b in grid:
        try:
            res = solve_pne(env, b, solver, warm_start=x_prev)
        except NumericalError as exc:
            rows.append(SweepRow(b, np.nan, np.nan, np.nan, nan_n, nan_m, False, str(exc)))
            continue
        rep = welfare(env, res.x_star, b, lam)
        err = None if res.converged else f"not converged (grad norm {res.final_grad_norm:.3e})"
        rows.append(SweepRow(b, rep.U, rep.V, rep.W, res.x_star, rep.pi, res.converged, err))
        if res.converged:
            x_prev = res.x_star
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("beta", "U", "V", "W"))
    for r in rows:
        writer.writerow([fmt(r.beta), fmt(r.U), fmt(r.V), fmt(r.W)])
    return buf.getvalue()


def sweep_stats_to_csv(grid: Sequence[float], sweeps: Sequence[Sequence[SweepRow]]) -> str:
    """Per-beta mean and standard deviation across repeated sweeps."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("beta", "U_mean", "U_std", "V_mean", "V_std", "W_mean", "W_std"))
    for k, b in enumerate(grid):
        cols = [fmt(b)]
        for key in ("U", "V", "W"):
            vals = np.array([getattr(s[k], key) for s in sweeps])
            cols += [fmt(vals.mean()), fmt(vals.std())]
        writer.writerow(cols)
    return buf.getvalue()
