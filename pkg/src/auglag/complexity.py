"""Closed-form outer-iteration bounds, sweeps, and certification verdicts.

The two bound formulas give thresholds T such that the feasibility statistic
theta is guaranteed to reach eps/2 within T outer iterations, in the
bounded-penalty and growing-penalty regimes respectively.  Natural
logarithms are used throughout.  Certification replays a finished run
against the matching bound computed from observed inputs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import outer
from .problems import ProblemSpec

REGIME_BOUNDED = "BoundedSigma"
REGIME_GROWING = "GrowingSigma"

LOG_LINEAR = "LogLinear"
POWER_LAW = "PowerLaw"


@dataclass
class BoundInputs:
    mu0_norm_sq: float
    f0_gap: float
    gamma: float
    alpha: float
    eps: float
    sigma_max: float = 1.0

    def __post_init__(self) -> None:
        if self.f0_gap < 0.0:
            raise ValueError("f0_gap must be nonnegative")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0,1)")


def _log_term(inputs: BoundInputs) -> float:
    s = inputs.mu0_norm_sq + 4.0 * inputs.f0_gap
    return (0.5 * math.log(s) + math.log(2.0) + abs(math.log(inputs.eps))) / math.log(
        1.0 / inputs.gamma
    )


def bound_T_bounded(inputs: BoundInputs) -> float:
    """Outer-iteration threshold for the bounded-penalty regime.

    Any T strictly above this value has theta^(T) <= eps/2.
    """
    return inputs.sigma_max ** (1.0 / inputs.alpha) + 2.0 + _log_term(inputs)


def bound_T_unbounded(inputs: BoundInputs) -> float:
    """Outer-iteration threshold for the growing-penalty regime."""
    s4 = 4.0 * inputs.mu0_norm_sq + 16.0 * inputs.f0_gap
    power = s4 ** (1.0 / (inputs.alpha - 1.0)) * inputs.eps ** (-2.0 / (inputs.alpha - 1.0))
    return 4.0 + power + _log_term(inputs)


@dataclass
class Certification:
    bound_T: float
    certified: bool
    regime: str
    first_theta_ok: Optional[int]  # first k >= 1 with theta^(k) <= eps/2
    exceedance_prefix: int  # largest T with theta^(k) > eps/2 for all k = 1..T


def _bound_inputs_from(report: outer.RunReport, problem: ProblemSpec) -> BoundInputs:
    first = report.trace[0]
    return BoundInputs(
        mu0_norm_sq=first.mu_norm_sq,
        f0_gap=first.f - problem.objective.f_low,
        gamma=report.config.gamma,
        alpha=report.config.alpha,
        eps=report.config.eps,
        sigma_max=max(st.sigma for st in report.trace),
    )


def certify_run(report: outer.RunReport, problem: ProblemSpec, config: outer.SolverConfig) -> Certification:
    """Check a finished run against the matching outer-iteration bound."""
    if report.terminated != outer.TERMINATED_KKT:
        raise ValueError(f"cannot certify a run terminated {report.terminated!r}")
    inputs = _bound_inputs_from(report, problem)
    sigma0 = report.trace[0].sigma
    grew = any(st.sigma > sigma0 for st in report.trace[1:])
    regime = REGIME_GROWING if grew else REGIME_BOUNDED

    half = config.eps / 2.0
    first_ok: Optional[int] = None
    for st in report.trace[1:]:
        if st.theta is not None and st.theta <= half:
            first_ok = st.k
            break
    prefix = (first_ok - 1) if first_ok is not None else report.T_outer

    if regime == REGIME_BOUNDED:
        bound = bound_T_bounded(inputs)
        if first_ok is not None:
            certified = first_ok <= math.ceil(bound)
        else:
            certified = report.T_outer <= math.ceil(bound)
    else:
        bound = bound_T_unbounded(inputs)
        certified = prefix < bound
    return Certification(bound, certified, regime, first_ok, prefix)


@dataclass
class SweepRow:
    eps: float
    T_outer: int
    total_inner: int
    total_oracle_calls: int
    sigma_final: float
    bound_T: float
    certified: bool
    failed: bool = False
    error: str = ""


@dataclass
class SweepResult:
    problem: str
    rows: list[SweepRow]

    def successful(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.failed]

    CSV_COLUMNS = (
        "eps,T_outer,total_inner,total_oracle_calls,sigma_final,bound_T,certified"
    ).split(",")

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for r in self.rows:
                if r.failed:
                    continue
                writer.writerow(
                    [r.eps, r.T_outer, r.total_inner, r.total_oracle_calls,
                     r.sigma_final, r.bound_T, r.certified]
                )

    def save_json(self, path: str, fits: Optional[dict] = None) -> None:
        payload = {
            "problem": self.problem,
            "rows": [
                {
                    "eps": r.eps,
                    "T_outer": r.T_outer,
                    "total_inner": r.total_inner,
                    "total_oracle_calls": r.total_oracle_calls,
                    "sigma_final": r.sigma_final,
                    "bound_T": r.bound_T,
                    "certified": r.certified,
                    "failed": r.failed,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }
        if fits:
            payload["fits"] = fits
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _solve_row(problem: ProblemSpec, config: outer.SolverConfig) -> SweepRow:
    try:
        report = outer.solve(problem, config)
        cert = certify_run(report, problem, config)
        return SweepRow(
            eps=config.eps,
            T_outer=report.T_outer,
            total_inner=report.total_inner,
            total_oracle_calls=report.total_oracle_calls,
            sigma_final=report.trace[-1].sigma,
            bound_T=cert.bound_T,
            certified=cert.certified,
        )
    except Exception as exc:  # row-level isolation; the sweep continues
        return SweepRow(
            eps=config.eps, T_outer=0, total_inner=0, total_oracle_calls=0,
            sigma_final=float("nan"), bound_T=float("nan"), certified=False,
            failed=True, error=str(exc),
        )


def sweep(
    problem: ProblemSpec,
    base_config: outer.SolverConfig,
    eps_grid: Sequence[float],
    jobs: int = 1,
) -> SweepResult:
    """One certified solve per eps; rows are ordered by descending eps."""
    if len(eps_grid) == 0:
        raise ValueError("eps_grid must be nonempty")
    for e in eps_grid:
        if not (0.0 < e < 1.0):
            raise ValueError(f"eps values must lie in (0,1), got {e}")
    grid = sorted(eps_grid, reverse=True)
    from dataclasses import replace

    configs = [replace(base_config, eps=e) for e in grid]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda c: _solve_row(problem, c), configs))
    else:
        rows = [_solve_row(problem, c) for c in configs]
    return SweepResult(problem=problem.name, rows=rows)


def fit_growth(result: SweepResult, model: str, field: Optional[str] = None):
    """Least-squares growth-law fit over the successful sweep rows.

    LogLinear regresses T_outer on |log eps|; PowerLaw regresses the log of
    the chosen count (total_inner by default) on log(1/eps).  Returns
    (coefficient, exponent_or_slope, r_squared).
    """
    rows = result.successful()
    if len(rows) < 3:
        raise ValueError("need at least 3 successful rows to fit")
    if model == LOG_LINEAR:
        x = np.array([abs(math.log(r.eps)) for r in rows])
        y = np.array([float(r.T_outer) for r in rows])
    elif model == POWER_LAW:
        field = field or "total_inner"
        x = np.array([math.log(1.0 / r.eps) for r in rows])
        y = np.array([math.log(float(getattr(r, field))) for r in rows])
    else:
        raise ValueError(f"unknown fit model {model!r}")
    if np.ptp(x) == 0.0:
        raise ValueError("degenerate design: all eps values equal")
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    coeff = intercept if model == LOG_LINEAR else math.exp(intercept)
    return float(coeff), float(slope), float(r2)
