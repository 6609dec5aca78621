"""Problem definitions, validation, and the built-in nonconvex test corpus.

A problem bundles an objective oracle (value / gradient / optional Hessian,
plus a finite lower bound and Lipschitz metadata), a constraint set (linear
rows or general differentiable constraints, equalities first), and a feasible
starting point.  All oracles are pure functions of ``x`` and a problem may be
shared read-only across concurrent solver runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FEASIBILITY_TOL = 1e-10
GRAD_CHECK_TOL = 1e-6


class ValidationError(RuntimeError):
    """A problem failed a hard validation check (infeasible start, bad oracle)."""


class ObjectiveBelowBound(RuntimeError):
    """The objective returned a value below its declared lower bound."""


@dataclass
class ObjectiveOracle:
    """Smooth objective with value/gradient (and optional Hessian) oracles.

    ``f_low`` must be a valid lower bound for the objective over all of R^n;
    it enters the complexity bounds, so an optimistic value here invalidates
    certification.  ``L1``/``L2`` are global Lipschitz constants of the
    gradient / Hessian when known; ``local_lipschitz_only`` marks objectives
    whose derivatives are Lipschitz only on bounded sets (such problems are
    excluded from bound certification).
    """

    fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    f_low: float
    hess_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    L1: Optional[float] = None
    L2: Optional[float] = None
    local_lipschitz_only: bool = False

    def value(self, x: np.ndarray) -> float:
        v = float(self.fn(x))
        if not math.isfinite(v):
            raise ObjectiveBelowBound(f"objective returned non-finite value {v!r}")
        if v < self.f_low - 1e-12 * max(1.0, abs(self.f_low)):
            raise ObjectiveBelowBound(
                f"objective value {v} violates declared lower bound {self.f_low}"
            )
        return v

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.asarray(self.grad_fn(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise ObjectiveBelowBound("objective gradient is non-finite")
        return g

    def hessian(self, x: np.ndarray) -> np.ndarray:
        if self.hess_fn is None:
            raise ValueError("no Hessian oracle available for this objective")
        return np.asarray(self.hess_fn(x), dtype=float)

    @property
    def has_hessian(self) -> bool:
        return self.hess_fn is not None


@dataclass
class ConstraintSet:
    """Constraints c_i(x) = 0 for i < m_e, c_i(x) >= 0 for i >= m_e.

    Either an explicit linear form (A, b) with c(x) = A x - b, or general
    callables (c_fn, jac_fn).  The linear form enables the specializations
    that need a closed-form Lipschitz constant for the penalized gradient.
    """

    m: int
    m_e: int
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    c_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    norm_A_fro_sq: float = field(init=False, default=float("nan"))

    def __post_init__(self) -> None:
        if not (0 <= self.m_e <= self.m):
            raise ValueError(f"need 0 <= m_e <= m, got m_e={self.m_e}, m={self.m}")
        if self.A is not None:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.b = np.asarray(self.b, dtype=float).ravel()
            if self.A.shape[0] != self.m or self.b.shape[0] != self.m:
                raise ValueError("A/b shapes inconsistent with m")
            self.norm_A_fro_sq = float(np.sum(self.A * self.A))
        elif self.c_fn is None or self.jac_fn is None:
            raise ValueError("either (A, b) or (c_fn, jac_fn) must be given")

    @property
    def kind(self) -> str:
        return "linear" if self.A is not None else "general"

    @property
    def is_linear(self) -> bool:
        return self.A is not None

    @property
    def nonneg_ineq_rows(self) -> bool:
        """True iff every inequality-row coefficient is nonnegative.

        For general constraints this cannot be verified, so it is False.
        """
        if not self.is_linear:
            return False
        return bool(np.all(self.A[self.m_e:] >= 0.0))

    def c(self, x: np.ndarray) -> np.ndarray:
        if self.is_linear:
            return self.A @ x - self.b
        return np.asarray(self.c_fn(x), dtype=float)

    def jac(self, x: np.ndarray) -> np.ndarray:
        if self.is_linear:
            return self.A
        return np.atleast_2d(np.asarray(self.jac_fn(x), dtype=float))


@dataclass
class ProblemSpec:
    """A named problem: objective + constraints + feasible starting point."""

    name: str
    objective: ObjectiveOracle
    constraints: ConstraintSet
    x0: np.ndarray

    def __post_init__(self) -> None:
        self.x0 = np.asarray(self.x0, dtype=float).ravel()

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    def feasibility_violation(self, x: np.ndarray) -> float:
        """max of equality residual and inequality violation at x."""
        c = self.constraints.c(x)
        me = self.constraints.m_e
        eq = float(np.max(np.abs(c[:me]))) if me > 0 else 0.0
        ineq = float(np.max(np.maximum(-c[me:], 0.0))) if me < self.constraints.m else 0.0
        return max(eq, ineq)

    def check_feasible_start(self) -> None:
        viol = self.feasibility_violation(self.x0)
        if viol > FEASIBILITY_TOL:
            raise ValidationError(
                f"{self.name}: starting point infeasible (violation {viol:.3e})"
            )


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_error: float
    detail: str = ""


@dataclass
class ValidationReport:
    problem: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _sample_unit_ball(rng: np.random.Generator, center: np.ndarray) -> np.ndarray:
    n = center.shape[0]
    u = rng.standard_normal(n)
    u /= np.linalg.norm(u)
    r = rng.random() ** (1.0 / n)
    return center + r * u


def finite_difference_gradient(fn, x: np.ndarray) -> np.ndarray:
    """Central finite differences with per-coordinate step 1e-6*max(1,|x_j|)."""
    g = np.empty_like(x, dtype=float)
    for j in range(x.shape[0]):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g


def validate(problem: ProblemSpec, samples: int = 10, seed: int = 0) -> ValidationReport:
    """Check start feasibility, gradient consistency, and linear-form consistency.

    Gradient agreement is tested at ``samples`` random points in the unit ball
    around x0; each coordinate must match central finite differences with
    relative error at most 1e-6.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    checks: list[CheckResult] = []

    viol = problem.feasibility_violation(problem.x0)
    checks.append(
        CheckResult(
            "feasible_start",
            viol <= FEASIBILITY_TOL,
            viol,
            "" if viol <= FEASIBILITY_TOL else f"x0 violation {viol:.3e} > {FEASIBILITY_TOL}",
        )
    )

    worst = 0.0
    bad_detail = ""
    ok = True
    for _ in range(samples):
        x = _sample_unit_ball(rng, problem.x0)
        g = problem.objective.gradient(x)
        fd = finite_difference_gradient(problem.objective.fn, x)
        rel = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
        j = int(np.argmax(rel))
        if rel[j] > worst:
            worst = float(rel[j])
        if rel[j] > GRAD_CHECK_TOL and ok:
            ok = False
            bad_detail = f"gradient mismatch at coordinate {j}: rel error {rel[j]:.3e}"
    checks.append(CheckResult("gradient_finite_difference", ok, worst, bad_detail))

    if problem.constraints.is_linear:
        worst_lin = 0.0
        for _ in range(samples):
            x = _sample_unit_ball(rng, problem.x0)
            direct = problem.constraints.A @ x - problem.constraints.b
            err = float(np.max(np.abs(problem.constraints.c(x) - direct), initial=0.0))
            worst_lin = max(worst_lin, err)
        checks.append(CheckResult("linear_form_consistency", worst_lin <= 1e-12, worst_lin))

    return ValidationReport(problem.name, checks)


# ---------------------------------------------------------------------------
# Built-in corpus
# ---------------------------------------------------------------------------

_OMEGA = 4.0
_MIN_N, _MAX_N = 2, 64


def _check_n(n: int) -> None:
    if not (_MIN_N <= n <= _MAX_N):
        raise ValueError(f"corpus generators accept {_MIN_N} <= n <= {_MAX_N}, got {n}")


def _quadratic_cos_objective(n: int, omega: float = _OMEGA) -> ObjectiveOracle:
    # f(x) = 0.5*||x||^2 + sum_j cos(omega*x_j); nonconvex for omega^2 > 1.
    def fn(x):
        return 0.5 * float(x @ x) + float(np.sum(np.cos(omega * x)))

    def grad(x):
        return x - omega * np.sin(omega * x)

    def hess(x):
        return np.eye(n) - (omega * omega) * np.diag(np.cos(omega * x))

    return ObjectiveOracle(
        fn=fn,
        grad_fn=grad,
        hess_fn=hess,
        f_low=-float(n),
        L1=1.0 + omega * omega,
        L2=omega ** 3,
    )


def _rosenbrock_objective(n: int) -> ObjectiveOracle:
    # Chained Rosenbrock; derivatives are Lipschitz only on bounded sets.
    def fn(x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def grad(x):
        g = np.zeros_like(x)
        t = x[1:] - x[:-1] ** 2
        g[:-1] = -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * t
        return g

    def hess(x):
        H = np.zeros((n, n))
        d = np.zeros(n)
        d[:-1] += 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
        d[1:] += 200.0
        off = -400.0 * x[:-1]
        H[np.arange(n), np.arange(n)] = d
        H[np.arange(n - 1), np.arange(1, n)] = off
        H[np.arange(1, n), np.arange(n - 1)] = off
        return H

    return ObjectiveOracle(
        fn=fn, grad_fn=grad, hess_fn=hess, f_low=0.0, local_lipschitz_only=True
    )


def make_simplex_cos(n: int = 8) -> ProblemSpec:
    """Quadratic-plus-cosine objective on the unit simplex in standard form.

    Equality sum(x) = 1 followed by coordinate nonnegativity rows, so every
    inequality coefficient is nonnegative.
    """
    _check_n(n)
    A = np.vstack([np.ones((1, n)), np.eye(n)])
    b = np.concatenate([[1.0], np.zeros(n)])
    return ProblemSpec(
        name=f"simplex-cos-{n}",
        objective=_quadratic_cos_objective(n),
        constraints=ConstraintSet(m=n + 1, m_e=1, A=A, b=b),
        x0=np.full(n, 1.0 / n),
    )


def make_eq_cos(n: int = 8) -> ProblemSpec:
    """Quadratic-plus-cosine objective with the single equality sum(x) = 1."""
    _check_n(n)
    return ProblemSpec(
        name=f"eq-cos-{n}",
        objective=_quadratic_cos_objective(n),
        constraints=ConstraintSet(m=1, m_e=1, A=np.ones((1, n)), b=np.array([1.0])),
        x0=np.full(n, 1.0 / n),
    )


def make_eq_rosenbrock(n: int = 8) -> ProblemSpec:
    """Chained Rosenbrock with equality sum(x) = n; local-Lipschitz only."""
    _check_n(n)
    d = 0.2 * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    d -= d.mean()  # keep the start on the constraint hyperplane
    return ProblemSpec(
        name=f"eq-rosenbrock-{n}",
        objective=_rosenbrock_objective(n),
        constraints=ConstraintSet(m=1, m_e=1, A=np.ones((1, n)), b=np.array([float(n)])),
        x0=np.ones(n) + d,
    )


def make_dup_eq(n: int = 8) -> ProblemSpec:
    """simplex-cos with the equality row duplicated: degenerate multipliers."""
    _check_n(n)
    A = np.vstack([np.ones((1, n)), np.ones((1, n)), np.eye(n)])
    b = np.concatenate([[1.0, 1.0], np.zeros(n)])
    return ProblemSpec(
        name=f"dup-eq-{n}",
        objective=_quadratic_cos_objective(n),
        constraints=ConstraintSet(m=n + 2, m_e=2, A=A, b=b),
        x0=np.full(n, 1.0 / n),
    )


def make_eq_qp_analytic() -> ProblemSpec:
    """Quadratic objective on a hyperplane with a closed-form KKT pair.

    min 0.5*||x||^2 s.t. sum(x) = 1 with n = 4: solution x = (1/4)*ones,
    multiplier 1/4.
    """
    n = 4

    def fn(x):
        return 0.5 * float(x @ x)

    def grad(x):
        return x.copy()

    def hess(x):
        return np.eye(n)

    obj = ObjectiveOracle(fn=fn, grad_fn=grad, hess_fn=hess, f_low=0.0, L1=1.0, L2=0.0)
    return ProblemSpec(
        name="eq-qp-analytic",
        objective=obj,
        constraints=ConstraintSet(m=1, m_e=1, A=np.ones((1, n)), b=np.array([1.0])),
        x0=np.full(n, 1.0 / n),
    )


def corpus() -> list[ProblemSpec]:
    """The built-in test problems at the default dimension."""
    return [
        make_simplex_cos(8),
        make_eq_cos(8),
        make_eq_rosenbrock(8),
        make_dup_eq(8),
        make_eq_qp_analytic(),
    ]


def corpus_problem(name: str) -> ProblemSpec:
    for p in corpus():
        if p.name == name:
            return p
    # parametric names like simplex-cos-16
    for prefix, maker in (
        ("simplex-cos-", make_simplex_cos),
        ("eq-cos-", make_eq_cos),
        ("eq-rosenbrock-", make_eq_rosenbrock),
        ("dup-eq-", make_dup_eq),
    ):
        if name.startswith(prefix):
            try:
                n = int(name[len(prefix):])
            except ValueError:
                break
            return maker(n)
    raise KeyError(f"unknown corpus problem {name!r}")


def load_problem(path: str) -> ProblemSpec:
    """Load a problem from a JSON file.

    Schema: {name, n, objective: {kind: "quadratic+cos"|"rosenbrock",
    omega?}, A: row-major nested array, b, m_e, x0, f_low?, L1?, L2?}.
    Only the parametric objective kinds are loadable.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    n = int(data["n"])
    spec = data["objective"]
    kind = spec["kind"]
    if kind == "quadratic+cos":
        obj = _quadratic_cos_objective(n, omega=float(spec.get("omega", _OMEGA)))
    elif kind == "rosenbrock":
        obj = _rosenbrock_objective(n)
    else:
        raise ValidationError(f"unsupported objective kind {kind!r}")
    for key in ("f_low", "L1", "L2"):
        if key in data and data[key] is not None:
            setattr(obj, key, float(data[key]))
    A = np.asarray(data["A"], dtype=float).reshape(-1, n)
    b = np.asarray(data["b"], dtype=float).ravel()
    cons = ConstraintSet(m=A.shape[0], m_e=int(data["m_e"]), A=A, b=b)
    return ProblemSpec(
        name=str(data["name"]), objective=obj, constraints=cons,
        x0=np.asarray(data["x0"], dtype=float),
    )
