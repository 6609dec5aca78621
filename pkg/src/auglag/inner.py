"""Monotone unconstrained inner solvers with certified iteration counts.

Two families are provided:

* gradient descent, either with the fixed step 1/L (requires a certified
  Lipschitz constant) or with Armijo backtracking, for the first-order
  iteration budget C * L * (g(start) - g_low) / eps^2;
* adaptive cubic-regularized Newton for the second-order budget
  C * sqrt(L) * (g(start) - g_low) / eps^(3/2), with the cubic subproblem
  solved exactly through an eigendecomposition and a one-dimensional root
  find on the secular equation in r = ||s||.

One oracle call is one joint evaluation of value + gradient (+ Hessian where
requested); line-search trial points count as one call each.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import core
from .problems import ProblemSpec

FIXED_STEP = "fixed"
BACKTRACKING = "backtracking"

_BACKTRACK_CAP = 10_000_000
_CUBIC_CAP = 1_000_000
_ARMIJO_C1 = 1e-4
_STEP_FLOOR = 1e-16
_M_MIN = 1e-8
_SECULAR_TOL = 1e-12


class IterationCapExceeded(RuntimeError):
    """The inner solver exhausted its iteration budget (bad L or assumptions)."""


class NonFiniteValue(RuntimeError):
    """An oracle returned NaN or infinity."""


class EigendecompositionFailure(RuntimeError):
    """The Hessian could not be factorized (non-finite entries)."""


@dataclass
class InnerTask:
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    start: np.ndarray
    eps: float
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_L: Optional[float] = None
    g_low: float = float("-inf")

    def __post_init__(self) -> None:
        self.start = np.asarray(self.start, dtype=float).ravel()
        if not (self.eps > 0.0):
            raise ValueError("eps must be positive")
        if not np.all(np.isfinite(self.start)):
            raise ValueError("start must be finite")


@dataclass
class InnerResult:
    x_final: np.ndarray
    grad_norm2: float
    iterations: int
    oracle_calls: int
    decrease: float
    accepted: bool
    accepted_steps: int = 0
    objective_trace: list[float] = field(default_factory=list)


def _finite_scalar(v: float) -> float:
    v = float(v)
    if not math.isfinite(v):
        raise NonFiniteValue(f"oracle returned {v!r}")
    return v


def _finite_vec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("oracle returned a non-finite vector")
    return v


def gd_solve(task: InnerTask, variant: str = FIXED_STEP) -> InnerResult:
    """Monotone gradient descent to ||grad g||_2 <= eps."""
    if variant not in (FIXED_STEP, BACKTRACKING):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == FIXED_STEP and task.known_L is None:
        raise ValueError("fixed-step descent requires known_L")

    x = task.start.copy()
    f = _finite_scalar(task.objective(x))
    g = _finite_vec(task.gradient(x))
    calls = 1
    trace = [f]
    f_start = f

    if variant == FIXED_STEP:
        L = task.known_L
        decrease_bound = f_start - task.g_low if math.isfinite(task.g_low) else 1.0
        cap = math.ceil(4.0 * L * max(decrease_bound, 1.0) * task.eps ** -2) + 1000
    else:
        cap = _BACKTRACK_CAP
        t_prev = 1.0

    iters = 0
    while float(np.linalg.norm(g)) > task.eps:
        if iters >= cap:
            raise IterationCapExceeded(
                f"gradient descent exceeded its budget of {cap} iterations"
            )
        if variant == FIXED_STEP:
            x_new = x - g / L
            f_new = _finite_scalar(task.objective(x_new))
            g_new = _finite_vec(task.gradient(x_new))
            calls += 1
            if f_new > f + 1e-14 * max(1.0, abs(f)):
                raise IterationCapExceeded(
                    f"descent step increased the objective ({f} -> {f_new}); L is too small"
                )
        else:
            gn2 = float(g @ g)
            t = 2.0 * t_prev
            while True:
                x_new = x - t * g
                f_new = _finite_scalar(task.objective(x_new))
                calls += 1
                if f_new <= f - _ARMIJO_C1 * t * gn2:
                    break
                t *= 0.5
                if t < _STEP_FLOOR:
                    raise IterationCapExceeded("line search collapsed below the step floor")
            t_prev = t
            g_new = _finite_vec(task.gradient(x_new))
        x, f, g = x_new, min(f, f_new), g_new
        trace.append(f)
        iters += 1

    gnorm = float(np.linalg.norm(g))
    return InnerResult(
        x_final=x,
        grad_norm2=gnorm,
        iterations=iters,
        oracle_calls=calls,
        decrease=max(0.0, f_start - f),
        accepted=gnorm <= task.eps,
        accepted_steps=iters,
        objective_trace=trace,
    )


def cubic_model_value(g: np.ndarray, H: np.ndarray, M: float, s: np.ndarray):
    """<g,s> + 0.5<Hs,s> + (M/6)||s||^3."""
    return float(g @ s) + 0.5 * float(s @ (H @ s)) + (M / 6.0) * float(np.linalg.norm(s)) ** 3


def solve_cubic_model(g: np.ndarray, H: np.ndarray, M: float) -> np.ndarray:
    """Exact global minimizer of the cubic-regularized quadratic model.

    Eigendecompose H, then find r = ||s|| from the secular equation
    ||(H + (M/2) r I)^{-1} g||_2 = r by safeguarded Newton with bisection
    fallback, to residual tolerance 1e-12.  The degenerate case where the
    gradient has no component on the minimal eigenspace is handled by adding
    an eigenvector component of the right length.
    """
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise EigendecompositionFailure("non-finite Hessian or gradient")
    w, Q = np.linalg.eigh(0.5 * (H + H.T))
    ghat = Q.T @ g
    gnorm = float(np.linalg.norm(ghat))
    if gnorm == 0.0 and w[0] >= 0.0:
        return np.zeros_like(g)

    w_min = float(w[0])
    r_lb = max(0.0, -2.0 * w_min / M)

    def shifted_norm(r: float) -> float:
        denom = w + 0.5 * M * r
        return float(np.linalg.norm(ghat / denom))

    def residual(r: float) -> float:
        return shifted_norm(r) - r

    min_mask = (w - w_min) <= 1e-12 * max(1.0, abs(w_min))
    hard_candidate = r_lb > 0.0 and float(np.max(np.abs(ghat[min_mask]), initial=0.0)) <= 1e-13 * max(1.0, gnorm)
    if hard_candidate:
        denom = w + 0.5 * M * r_lb
        p = np.where(min_mask, 0.0, ghat / np.where(min_mask, 1.0, denom))
        pnorm = float(np.linalg.norm(p))
        if pnorm <= r_lb:
            tau = math.sqrt(max(0.0, r_lb * r_lb - pnorm * pnorm))
            e = np.zeros_like(ghat)
            e[0] = 1.0
            return Q @ (-p + tau * e)

    # bracket the root of the (decreasing) residual
    lo = r_lb
    hi = max(1.0, 2.0 * (r_lb + 1.0))
    for _ in range(200):
        if residual(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise EigendecompositionFailure("failed to bracket the secular-equation root")

    r = 0.5 * (lo + hi)
    for _ in range(500):
        F = residual(r)
        if abs(F) <= _SECULAR_TOL:
            break
        if F > 0.0:
            lo = r
        else:
            hi = r
        denom = w + 0.5 * M * r
        n2 = shifted_norm(r)
        dn2 = -(0.5 * M) * float(np.sum(ghat * ghat / denom ** 3)) / n2 if n2 > 0 else 0.0
        dF = dn2 - 1.0
        r_newton = r - F / dF if dF != 0.0 else r
        if lo < r_newton < hi:
            r = r_newton
        else:
            r = 0.5 * (lo + hi)
        if hi - lo <= 1e-17 * max(1.0, r):
            break
    denom = w + 0.5 * M * r
    return Q @ (-ghat / denom)


def cubic_newton_solve(task: InnerTask) -> InnerResult:
    """Adaptive cubic-regularized Newton to ||grad g||_2 <= eps.

    Steps are accepted when the actual decrease reaches a quarter of the
    model decrease; the regularization weight doubles on rejection and halves
    (down to a floor) on acceptance.  Only accepted steps move the iterate.
    """
    if task.hessian is None:
        raise ValueError("cubic Newton requires a Hessian oracle")
    x = task.start.copy()
    f = _finite_scalar(task.objective(x))
    g = _finite_vec(task.gradient(x))
    H = np.asarray(task.hessian(x), dtype=float)
    calls = 1
    trace = [f]
    f_start = f
    M = max(task.known_L, _M_MIN) if task.known_L is not None else 1.0

    iters = 0
    accepted_steps = 0
    while float(np.linalg.norm(g)) > task.eps:
        if iters >= _CUBIC_CAP:
            raise IterationCapExceeded("cubic Newton exceeded its iteration cap")
        s = solve_cubic_model(g, H, M)
        model_dec = -cubic_model_value(g, H, M, s)
        x_trial = x + s
        f_trial = _finite_scalar(task.objective(x_trial))
        calls += 1
        iters += 1
        if model_dec > 0.0 and f - f_trial >= 0.25 * model_dec:
            x, f = x_trial, f_trial
            g = _finite_vec(task.gradient(x))
            H = np.asarray(task.hessian(x), dtype=float)
            accepted_steps += 1
            M = max(0.5 * M, _M_MIN)
            trace.append(f)
        else:
            M *= 2.0

    gnorm = float(np.linalg.norm(g))
    return InnerResult(
        x_final=x,
        grad_norm2=gnorm,
        iterations=iters,
        oracle_calls=calls,
        decrease=max(0.0, f_start - f),
        accepted=gnorm <= task.eps,
        accepted_steps=accepted_steps,
        objective_trace=trace,
    )


def warm_start(
    problem: ProblemSpec,
    mult: core.MultiplierState,
    sigma: float,
    x0: np.ndarray,
    x_prev: np.ndarray,
) -> np.ndarray:
    """The better of {x0, x_prev} under the current augmented Lagrangian.

    Ties return x_prev.  Starting the monotone inner solver here makes the
    final inner iterate automatically no worse than both candidates.
    """
    p0 = core.eval_P(problem, np.asarray(x0, dtype=float), mult, sigma)
    pp = core.eval_P(problem, np.asarray(x_prev, dtype=float), mult, sigma)
    return np.asarray(x0 if p0 < pp else x_prev, dtype=float).copy()
