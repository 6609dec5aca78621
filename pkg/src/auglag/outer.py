"""Outer loop of the augmented Lagrangian method, with invariant monitors.

Each outer iteration minimizes P(., lambda, sigma) from a warm start until
the 2-norm of its gradient falls below eps (which implies the sup-norm
condition), computes the feasibility statistic theta, updates the penalty
parameter and the multipliers, and re-checks the eps-KKT conditions.  The
run-time monitors evaluate the per-iteration inequalities that the analysis
guarantees; any violation indicates an implementation bug, and in strict
mode aborts the run.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import core, inner
from .problems import ProblemSpec

TERMINATED_KKT = "EpsKKT"
TERMINATED_MAX_OUTER = "MaxOuter"
TERMINATED_INNER_FAILURE = "InnerFailure"
TERMINATED_SIGMA_OVERFLOW = "SigmaOverflow"

INNER_GD_FIXED = "gd-fixed"
INNER_GD_BACKTRACKING = "gd-backtracking"
INNER_CUBIC = "cubic-newton"

MONITOR_STRICT = "strict"
MONITOR_RECORD = "record"

_SIGMA_CAP = 1e16
_MONITOR_SLACK = 1e-9
_DUAL_IDENTITY_TOL = 1e-12


class MonitorViolation(RuntimeError):
    """A guaranteed per-iteration inequality failed in strict mode."""


class InnerFailure(RuntimeError):
    """The inner solver failed; wraps the underlying error."""


@dataclass
class SolverConfig:
    eps: float
    alpha: float = 3.0
    gamma: float = 0.5
    sigma0: float = 1.0
    penalty_policy: str = core.POLYNOMIAL_GROWTH
    inner: str = INNER_GD_FIXED
    max_outer: int = 10_000
    monitor: str = MONITOR_STRICT
    inner_eps: Optional[float] = None  # override; defaults to eps
    # When True, keep iterating until theta <= eps/2 as well as the direct
    # KKT test; certification of the outer-iteration bounds needs the first
    # theta-crossing, which the direct test alone can preempt.
    require_theta_half: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0,1)")
        if self.alpha <= 1.0:
            raise ValueError("alpha must exceed 1")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0,1)")
        if self.sigma0 <= 0.0:
            raise ValueError("sigma0 must be positive")
        if self.inner not in (INNER_GD_FIXED, INNER_GD_BACKTRACKING, INNER_CUBIC):
            raise ValueError(f"unknown inner solver {self.inner!r}")
        if self.monitor not in (MONITOR_STRICT, MONITOR_RECORD):
            raise ValueError(f"unknown monitor mode {self.monitor!r}")
        if self.max_outer < 0:
            raise ValueError("max_outer must be >= 0")


@dataclass
class OuterState:
    k: int
    x: np.ndarray
    mult: core.MultiplierState
    sigma: float
    theta: Optional[float]  # undefined at k = 0
    mu_norm_sq: float
    inner_stats: Optional[inner.InnerResult] = None
    f: float = float("nan")
    dual_inf: float = float("nan")
    primal_eq: float = float("nan")
    primal_ineq: float = float("nan")


@dataclass
class KKTReport:
    dual_inf: float
    primal_eq: float
    primal_ineq: float
    sign_ok: bool
    compl_ok: bool
    is_eps_kkt: bool

    def to_dict(self) -> dict:
        return {
            "dual_inf": self.dual_inf,
            "primal_eq": self.primal_eq,
            "primal_ineq": self.primal_ineq,
            "sign_ok": self.sign_ok,
            "compl_ok": self.compl_ok,
            "is_eps_kkt": self.is_eps_kkt,
        }


@dataclass
class MonitorEntry:
    iteration: int
    check: str
    lhs: float
    rhs: float
    passed: bool


@dataclass
class RunReport:
    problem: str
    config: SolverConfig
    trace: list[OuterState]
    monitor_log: list[MonitorEntry]
    kkt: KKTReport
    terminated: str
    T_outer: int
    total_inner: int
    total_oracle_calls: int

    @property
    def x_final(self) -> np.ndarray:
        return self.trace[-1].x

    @property
    def lambda_final(self) -> np.ndarray:
        return self.trace[-1].mult.lam

    def trace_rows(self) -> list[dict]:
        rows = []
        for st in self.trace:
            rows.append(
                {
                    "k": st.k,
                    "f": st.f,
                    "theta": st.theta,
                    "sigma": st.sigma,
                    "mu_norm_sq": st.mu_norm_sq,
                    "inner_iters": st.inner_stats.iterations if st.inner_stats else 0,
                    "oracle_calls": st.inner_stats.oracle_calls if st.inner_stats else 0,
                    "dual_inf": st.dual_inf,
                    "primal_eq": st.primal_eq,
                    "primal_ineq": st.primal_ineq,
                }
            )
        return rows

    def to_json_dict(self) -> dict:
        cfg = {
            "eps": self.config.eps,
            "alpha": self.config.alpha,
            "gamma": self.config.gamma,
            "sigma0": self.config.sigma0,
            "penalty_policy": self.config.penalty_policy,
            "inner": self.config.inner,
            "max_outer": self.config.max_outer,
            "monitor": self.config.monitor,
        }
        return {
            "problem": self.problem,
            "config": cfg,
            "terminated": self.terminated,
            "T_outer": self.T_outer,
            "total_inner": self.total_inner,
            "total_oracle_calls": self.total_oracle_calls,
            "x_final": [float(v) for v in self.x_final],
            "lambda_final": [float(v) for v in self.lambda_final],
            "kkt": self.kkt.to_dict(),
            "trace": self.trace_rows(),
            "monitor_log": [
                {
                    "iteration": e.iteration,
                    "check": e.check,
                    "lhs": e.lhs,
                    "rhs": e.rhs,
                    "pass": e.passed,
                }
                for e in self.monitor_log
            ],
        }

    def save_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    CSV_COLUMNS = (
        "k,f,theta,sigma,mu_norm_sq,inner_iters,oracle_calls,"
        "dual_inf,primal_eq,primal_ineq"
    ).split(",")

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.CSV_COLUMNS)
            writer.writeheader()
            for row in self.trace_rows():
                if row["theta"] is None:
                    row["theta"] = ""
                writer.writerow(row)


def kkt_check(problem: ProblemSpec, x: np.ndarray, mult: core.MultiplierState, eps: float) -> KKTReport:
    """Direct eps-KKT test: stationarity, feasibility, signs, complementarity."""
    lam = mult.lam
    cons = problem.constraints
    c = cons.c(x)
    me = cons.m_e
    dual = float(np.max(np.abs(core.lagrangian_grad(problem, x, mult))))
    primal_eq = float(np.max(np.abs(c[:me]))) if me > 0 else 0.0
    primal_ineq = (
        float(np.max(np.abs(np.minimum(c[me:], 0.0)))) if me < cons.m else 0.0
    )
    sign_ok = bool(np.all(lam[me:] >= 0.0))
    compl_ok = bool(np.all(lam[me:][c[me:] > eps] == 0.0))
    is_kkt = (
        dual <= eps and primal_eq <= eps and primal_ineq <= eps and sign_ok and compl_ok
    )
    return KKTReport(dual, primal_eq, primal_ineq, sign_ok, compl_ok, is_kkt)


def _slacked(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + _MONITOR_SLACK * max(1.0, abs(rhs))


def monitor_step(
    prev: OuterState,
    next_state: OuterState,
    problem: ProblemSpec,
    mu0_norm_sq: float,
    f0: float,
    f_low: float,
) -> list[MonitorEntry]:
    """Evaluate the guaranteed inequalities linking two consecutive states.

    ``prev`` is the state at index k (multipliers and penalty used by the
    inner solve), ``next_state`` the state at k+1 it produced.
    """
    k = prev.k
    gap = f0 - f_low
    entries: list[MonitorEntry] = []
    lam_k = prev.mult
    sigma_k = prev.sigma
    x_next = next_state.x

    # scaled-multiplier growth: ||mu^(k+1)||^2 <= ||mu^(0)||^2 + 2*gap*(k+1)
    lhs = next_state.mu_norm_sq
    rhs = mu0_norm_sq + 2.0 * gap * (k + 1)
    entries.append(MonitorEntry(k + 1, "mu_growth", lhs, rhs, _slacked(lhs, rhs)))

    c = problem.constraints.c(x_next)
    me = problem.constraints.m_e
    if k >= 1:
        eq_res = (
            float(np.max(np.abs(c[:me] - lam_k.lam[:me] / sigma_k))) if me > 0 else 0.0
        )
        ineq_res = (
            float(np.max(np.abs(np.minimum(c[me:], 0.0))))
            if me < problem.constraints.m
            else 0.0
        )
        rhs = k * (mu0_norm_sq + 4.0 * gap)
        lhs = sigma_k * max(eq_res, ineq_res) ** 2
        entries.append(MonitorEntry(k + 1, "penalized_residual", lhs, rhs, _slacked(lhs, rhs)))

        th = core.theta(problem, x_next, lam_k, sigma_k)
        lhs = sigma_k * th.value ** 2
        entries.append(MonitorEntry(k + 1, "penalized_theta", lhs, rhs, _slacked(lhs, rhs)))

    p_next = core.eval_P(problem, x_next, lam_k, sigma_k)
    p_prev = core.eval_P(problem, prev.x, lam_k, sigma_k)
    p_zero = core.eval_P(problem, np.asarray(problem.x0, dtype=float), lam_k, sigma_k)
    rhs = min(p_prev, p_zero)
    entries.append(MonitorEntry(k + 1, "inner_decrease", p_next, rhs, _slacked(p_next, rhs)))
    entries.append(MonitorEntry(k + 1, "feasible_upper_bound", p_zero, f0, _slacked(p_zero, f0)))

    # penalty lower bound: P(x) >= f(x) - 0.5*sum(lambda^2)/sigma
    lam_vec = lam_k.lam
    lhs = problem.objective.value(x_next) - 0.5 * float(np.sum(lam_vec * lam_vec)) / sigma_k
    entries.append(
        MonitorEntry(k + 1, "penalty_lower_bound", lhs, p_next, _slacked(lhs, p_next))
    )

    # dual-residual identity between the new Lagrangian gradient and grad P
    gl = core.lagrangian_grad(problem, x_next, next_state.mult)
    gp = core.grad_P(problem, x_next, lam_k, sigma_k)
    lhs = float(np.max(np.abs(gl - gp)))
    entries.append(
        MonitorEntry(k + 1, "dual_identity", lhs, _DUAL_IDENTITY_TOL, lhs <= _DUAL_IDENTITY_TOL)
    )
    return entries


def _build_inner_task(
    problem: ProblemSpec,
    mult: core.MultiplierState,
    sigma: float,
    start: np.ndarray,
    eps: float,
    kind: str,
    p_low: float,
) -> inner.InnerTask:
    objective = lambda x: core.eval_P(problem, x, mult, sigma)
    gradient = lambda x: core.grad_P(problem, x, mult, sigma)
    hessian = None
    known_L = None
    cons = problem.constraints
    if kind == INNER_GD_FIXED:
        known_L = core.lipschitz_bound_for(problem, sigma)
    elif kind == INNER_CUBIC:
        if not (cons.is_linear and cons.m_e == cons.m):
            raise core.UnsupportedSpecializationError(
                "cubic Newton requires equality-only linear constraints"
            )
        if not problem.objective.has_hessian:
            raise core.UnsupportedSpecializationError("cubic Newton requires a Hessian oracle")
        hessian = lambda x: core.hess_P(problem, x, sigma)
        known_L = problem.objective.L2
    return inner.InnerTask(
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        start=start,
        eps=eps,
        known_L=known_L,
        g_low=p_low,
    )


def default_inner_for(problem: ProblemSpec) -> str:
    """Pick the inner solver whose assumptions the problem certifies."""
    cons = problem.constraints
    obj = problem.objective
    if cons.is_linear and cons.m_e == cons.m and obj.has_hessian and obj.L2 is not None:
        return INNER_CUBIC
    if cons.is_linear and cons.nonneg_ineq_rows and obj.L1 is not None:
        return INNER_GD_FIXED
    return INNER_GD_BACKTRACKING


def _run_inner(task: inner.InnerTask, kind: str) -> inner.InnerResult:
    if kind == INNER_GD_FIXED:
        return inner.gd_solve(task, inner.FIXED_STEP)
    if kind == INNER_GD_BACKTRACKING:
        return inner.gd_solve(task, inner.BACKTRACKING)
    return inner.cubic_newton_solve(task)


def solve(problem: ProblemSpec, config: SolverConfig) -> RunReport:
    """Run the augmented Lagrangian outer loop until an eps-KKT point.

    Terminates at the first k >= 1 whose pair (x_k, lambda^(k)) passes the
    direct eps-KKT test; theta <= eps/2 is monitored as the sufficient
    condition the analysis counts.
    """
    problem.check_feasible_start()
    eps = config.eps
    inner_eps = config.inner_eps if config.inner_eps is not None else eps
    x0 = np.asarray(problem.x0, dtype=float)
    f_low = problem.objective.f_low
    f0 = problem.objective.value(x0)
    gap0 = f0 - f_low

    mult = core.MultiplierState(lam=np.zeros(problem.constraints.m))
    pen = core.PenaltyState(
        sigma=config.sigma0, alpha=config.alpha, gamma=config.gamma, policy=config.penalty_policy
    )
    mu0_sq = core.mu_norm(mult, pen.sigma) ** 2

    k0_kkt = kkt_check(problem, x0, mult, eps)
    state = OuterState(
        k=0,
        x=x0.copy(),
        mult=mult,
        sigma=pen.sigma,
        theta=None,
        mu_norm_sq=mu0_sq,
        f=f0,
        dual_inf=k0_kkt.dual_inf,
        primal_eq=k0_kkt.primal_eq,
        primal_ineq=k0_kkt.primal_ineq,
    )
    trace = [state]
    monitor_log: list[MonitorEntry] = []
    total_inner = 0
    total_calls = 0
    terminated = TERMINATED_MAX_OUTER
    kkt = k0_kkt
    theta_prev: Optional[float] = None

    for k in range(config.max_outer):
        if pen.sigma > _SIGMA_CAP:
            terminated = TERMINATED_SIGMA_OVERFLOW
            break
        start = inner.warm_start(problem, mult, pen.sigma, x0, state.x)
        total_calls += 2  # warm-start comparison evaluations
        p_low = f_low - 0.5 * mu0_sq - gap0 * k
        task = _build_inner_task(problem, mult, pen.sigma, start, inner_eps, config.inner, p_low)
        try:
            res = _run_inner(task, config.inner)
        except (inner.IterationCapExceeded, inner.NonFiniteValue, inner.EigendecompositionFailure) as exc:
            raise InnerFailure(f"inner solver failed at outer iteration {k}: {exc}") from exc
        total_inner += res.iterations
        total_calls += res.oracle_calls

        x_next = res.x_final
        th_next = core.theta(problem, x_next, mult, pen.sigma)
        pen_next = core.update_penalty(k, th_next.value, theta_prev, pen)
        mult_next = core.update_multipliers(problem, x_next, mult, pen.sigma)
        total_calls += 1  # theta/multiplier constraint evaluation

        kkt = kkt_check(problem, x_next, mult_next, eps)
        next_state = OuterState(
            k=k + 1,
            x=x_next,
            mult=mult_next,
            sigma=pen_next.sigma,
            theta=th_next.value,
            mu_norm_sq=core.mu_norm(mult_next, pen_next.sigma) ** 2,
            inner_stats=res,
            f=problem.objective.value(x_next),
            dual_inf=kkt.dual_inf,
            primal_eq=kkt.primal_eq,
            primal_ineq=kkt.primal_ineq,
        )

        entries = monitor_step(state, next_state, problem, mu0_sq, f0, f_low)
        if kkt.dual_inf > eps:
            entries.append(MonitorEntry(k + 1, "dual_residual", kkt.dual_inf, eps, False))
        if th_next.value <= eps / 2.0 and not kkt.is_eps_kkt:
            entries.append(MonitorEntry(k + 1, "theta_sufficiency", th_next.value, eps / 2.0, False))
        monitor_log.extend(entries)
        failed = [e for e in entries if not e.passed]
        if failed and config.monitor == MONITOR_STRICT:
            worst = failed[0]
            raise MonitorViolation(
                f"iteration {worst.iteration}: check {worst.check!r} failed "
                f"(lhs={worst.lhs!r}, rhs={worst.rhs!r})"
            )

        trace.append(next_state)
        state = next_state
        mult, pen, theta_prev = mult_next, pen_next, th_next.value
        if kkt.is_eps_kkt and (
            not config.require_theta_half or th_next.value <= eps / 2.0
        ):
            terminated = TERMINATED_KKT
            break

    return RunReport(
        problem=problem.name,
        config=config,
        trace=trace,
        monitor_log=monitor_log,
        kkt=kkt,
        terminated=terminated,
        T_outer=len(trace) - 1,
        total_inner=total_inner,
        total_oracle_calls=total_calls,
    )
