import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auglag import core
from auglag.core import (
    FormDisagreementError,
    MultiplierState,
    PenaltyState,
    UnsupportedSpecializationError,
    eval_P,
    grad_P,
    hess_P,
    lagrangian_grad,
    lipschitz_bound_linear,
    mu_norm,
    theta,
    update_multipliers,
    update_penalty,
)
from auglag.problems import corpus_problem, finite_difference_gradient

from conftest import make_tiny


def _mult(*vals):
    return MultiplierState(lam=np.array(vals, dtype=float))


class TestLagrangianGrad:
    def test_single_equality(self):
        # f = 0, c(x) = x - 1, lambda = 2 -> grad = -2 at any x
        p = make_tiny(1, lambda x: x - 1.0, lambda x: np.ones((1, 1)))
        g = lagrangian_grad(p, np.array([7.0]), _mult(2.0))
        np.testing.assert_allclose(g, [-2.0])

    def test_zero_multipliers(self):
        p = corpus_problem("simplex-cos-8")
        x = p.x0 + 0.1
        g = lagrangian_grad(p, x, MultiplierState(np.zeros(9)))
        np.testing.assert_allclose(g, p.objective.gradient(x))

    def test_matches_finite_differences(self):
        p = corpus_problem("simplex-cos-8")
        rng = np.random.default_rng(7)
        lam = rng.standard_normal(9)
        mult = MultiplierState(lam)
        x = np.asarray(p.x0, float)
        fn = lambda z: p.objective.fn(z) - float(lam @ p.constraints.c(z))
        fd = finite_difference_gradient(fn, x)
        g = lagrangian_grad(p, x, mult)
        rel = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
        assert float(np.max(rel)) <= 1e-6


class TestEvalP:
    def test_equality_zero_multiplier(self):
        p = make_tiny(1, lambda x: x.copy(), lambda x: np.ones((1, 1)))
        assert eval_P(p, np.array([3.0]), _mult(0.0), 2.0) == pytest.approx(9.0)

    def test_inactive_inequality_constant_branch(self):
        p = make_tiny(0, lambda x: x.copy(), lambda x: np.ones((1, 1)))
        assert eval_P(p, np.array([5.0]), _mult(2.0), 1.0) == pytest.approx(-2.0)

    def test_active_inequality_both_forms(self):
        p = make_tiny(0, lambda x: x.copy(), lambda x: np.ones((1, 1)))
        assert eval_P(p, np.array([1.0]), _mult(4.0), 2.0) == pytest.approx(-3.0)

    def test_sigma_must_be_positive(self):
        p = make_tiny(1, lambda x: x.copy(), lambda x: np.ones((1, 1)))
        with pytest.raises(ValueError):
            eval_P(p, np.array([1.0]), _mult(0.0), 0.0)

    def test_forms_agree_random(self):
        p = corpus_problem("simplex-cos-8")
        rng = np.random.default_rng(3)
        for _ in range(200):
            x = rng.uniform(-2.0, 2.0, 8)
            lam = np.concatenate([rng.normal(0, 2, 1), np.abs(rng.normal(0, 2, 8))])
            sigma = float(10.0 ** rng.uniform(-1, 3))
            eval_P(p, x, MultiplierState(lam), sigma)  # raises on disagreement

    @settings(max_examples=60, deadline=None)
    @given(
        x=st.floats(-5, 5),
        lam=st.floats(0, 5),
        sigma=st.floats(0.01, 100),
    )
    def test_forms_agree_property(self, x, lam, sigma):
        p = make_tiny(0, lambda z: z.copy(), lambda z: np.ones((1, 1)))
        eval_P(p, np.array([x]), _mult(lam), sigma)


class TestGradP:
    def test_equality_example(self):
        p = make_tiny(1, lambda x: x - 1.0, lambda x: np.ones((1, 1)))
        g = grad_P(p, np.array([2.0]), _mult(1.0), 2.0)
        np.testing.assert_allclose(g, [1.0])

    def test_inactive_inequality_contributes_zero(self):
        p = make_tiny(0, lambda x: x.copy(), lambda x: np.ones((1, 1)))
        g = grad_P(p, np.array([5.0]), _mult(1.0), 1.0)
        np.testing.assert_allclose(g, [0.0])

    def test_branch_boundary_takes_inactive_side(self):
        # at c == lambda/sigma exactly the inequality term is flat
        p = make_tiny(0, lambda x: x.copy(), lambda x: np.ones((1, 1)))
        g = grad_P(p, np.array([2.0]), _mult(4.0), 2.0)
        np.testing.assert_allclose(g, [0.0])

    def test_matches_finite_differences_away_from_seams(self):
        p = corpus_problem("simplex-cos-8")
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 50:
            x = rng.uniform(-1.5, 1.5, 8)
            lam = np.concatenate([rng.normal(0, 2, 1), np.abs(rng.normal(0, 2, 8))])
            sigma = float(10.0 ** rng.uniform(-0.5, 1.5))
            c = p.constraints.c(x)
            if np.min(np.abs(c[1:] - lam[1:] / sigma)) < 1e-3:
                continue
            mult = MultiplierState(lam)
            fd = finite_difference_gradient(lambda z: eval_P(p, z, mult, sigma), x)
            g = grad_P(p, x, mult, sigma)
            rel = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
            assert float(np.max(rel)) <= 1e-6
            checked += 1


class TestHessP:
    def test_equality_only_linear(self):
        p = corpus_problem("eq-cos-8")
        x = np.asarray(p.x0, float)
        H = hess_P(p, x, 3.0)
        expected = p.objective.hessian(x) + 3.0 * np.ones((8, 8))
        np.testing.assert_allclose(H, expected)

    def test_rejects_inequalities(self):
        p = corpus_problem("simplex-cos-8")
        with pytest.raises(UnsupportedSpecializationError):
            hess_P(p, p.x0, 1.0)


class TestTheta:
    def test_equality_only(self):
        p = make_tiny(1, lambda x: np.array([0.5]), lambda x: np.ones((1, 1)))
        th = theta(p, np.zeros(1), _mult(0.0), 1.0)
        assert th.value == pytest.approx(0.5)
        assert th.parts[2] == float("-inf")

    def test_inequality_only(self):
        p = make_tiny(0, lambda x: np.array([-0.3]), lambda x: np.ones((1, 1)))
        th = theta(p, np.zeros(1), _mult(0.0), 1.0)
        assert th.value == pytest.approx(0.3)
        assert th.parts[1] == float("-inf")

    def test_all_three_parts(self):
        p = make_tiny(
            1, lambda x: np.array([1.0, 0.2]), lambda x: np.ones((2, 1)), m=2
        )
        th = theta(p, np.zeros(1), _mult(4.0, 1.0), 2.0)
        assert th.parts == (2.0, 1.0, 0.0)
        assert th.value == pytest.approx(2.0)


class TestUpdatePenalty:
    def test_first_iteration_keeps_sigma(self):
        state = PenaltyState(sigma=5.0)
        assert update_penalty(0, 100.0, None, state).sigma == 5.0

    def test_growth_branch(self):
        state = PenaltyState(sigma=10.0, alpha=2.0, gamma=0.5)
        assert update_penalty(3, 1.0, 1.0, state).sigma == 16.0

    def test_decrease_branch(self):
        state = PenaltyState(sigma=10.0, gamma=0.5)
        assert update_penalty(3, 0.4, 1.0, state).sigma == 10.0

    def test_geometric_policy(self):
        state = PenaltyState(sigma=1.0, policy=core.GEOMETRIC_GROWTH)
        assert update_penalty(2, 1.0, 1.0, state).sigma == 64.0

    def test_never_shrinks(self):
        state = PenaltyState(sigma=1e6, alpha=3.0)
        assert update_penalty(3, 1.0, 1.0, state).sigma == 1e6

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            update_penalty(-1, 1.0, 1.0, PenaltyState(sigma=1.0))

    @settings(max_examples=60, deadline=None)
    @given(
        k=st.integers(1, 50),
        theta_next=st.floats(0, 10),
        theta_prev=st.floats(1e-6, 10),
        sigma=st.floats(0.1, 1e8),
    )
    def test_monotone_property(self, k, theta_next, theta_prev, sigma):
        state = PenaltyState(sigma=sigma)
        out = update_penalty(k, theta_next, theta_prev, state)
        assert out.sigma >= sigma
        if theta_next <= state.gamma * theta_prev:
            assert out.sigma == sigma


class TestUpdateMultipliers:
    def test_equality(self):
        p = make_tiny(1, lambda x: np.array([0.25]), lambda x: np.ones((1, 1)))
        out = update_multipliers(p, np.zeros(1), _mult(1.0), 2.0)
        np.testing.assert_allclose(out.lam, [0.5])

    def test_inequality_clamp(self):
        p = make_tiny(0, lambda x: np.array([3.0]), lambda x: np.ones((1, 1)))
        out = update_multipliers(p, np.zeros(1), _mult(1.0), 2.0)
        np.testing.assert_allclose(out.lam, [0.0])

    def test_scalar_loop_oracle(self):
        p = corpus_problem("simplex-cos-8")
        rng = np.random.default_rng(23)
        x = rng.uniform(-1.0, 1.0, 8)
        lam = np.concatenate([rng.normal(0, 2, 1), np.abs(rng.normal(0, 2, 8))])
        sigma = 3.0
        out = update_multipliers(p, x, MultiplierState(lam.copy()), sigma)
        c = p.constraints.c(x)
        expected = np.empty(9)
        for i in range(9):
            v = lam[i] - sigma * c[i]
            expected[i] = v if i < 1 else max(v, 0.0)
        np.testing.assert_allclose(out.lam, expected, atol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(
        lam=st.floats(-5, 5),
        c=st.floats(-5, 5),
        sigma=st.floats(0.01, 100),
    )
    def test_inequality_sign_property(self, lam, c, sigma):
        p = make_tiny(0, lambda x, c=c: np.array([c]), lambda x: np.ones((1, 1)))
        out = update_multipliers(p, np.zeros(1), _mult(max(lam, 0.0)), sigma)
        assert out.check_signs(0)


class TestMuNorm:
    def test_examples(self):
        assert mu_norm(_mult(3.0, 4.0), 25.0) == pytest.approx(1.0)
        assert mu_norm(_mult(0.0, 0.0), 7.0) == 0.0
        assert mu_norm(_mult(1.0, 2.0, 2.0), 4.0) == pytest.approx(1.5)

    def test_scaling(self):
        m = _mult(1.0, -2.0, 0.5)
        assert mu_norm(m, 4.0) == pytest.approx(mu_norm(m, 1.0) / 2.0)

    def test_sigma_positive(self):
        with pytest.raises(ValueError):
            mu_norm(_mult(1.0), 0.0)


class TestLipschitzBound:
    def test_identity_rows(self):
        got = lipschitz_bound_linear(1.0, 3.0, np.eye(2))
        assert got == pytest.approx(7.0 * math.sqrt(2.0))

    def test_sigma_zero_formula(self):
        got = lipschitz_bound_linear(5.0, 0.0, np.eye(3))
        assert got == pytest.approx(math.sqrt(3.0) * 5.0)

    def test_problem_wrapper(self):
        p = corpus_problem("simplex-cos-8")
        got = core.lipschitz_bound_for(p, 2.0)
        # ||A||_F^2 = 8 (ones row) + 8 (identity) = 16
        assert got == pytest.approx(math.sqrt(8.0) * (17.0 + 2.0 * 16.0))

    def test_wrapper_preconditions(self):
        p = corpus_problem("eq-rosenbrock-8")  # linear but no declared L1
        with pytest.raises(UnsupportedSpecializationError):
            core.lipschitz_bound_for(p, 1.0)
        q = make_tiny(
            0, lambda x: np.array([x[0] ** 2]), lambda x: np.array([[2 * x[0]]])
        )
        with pytest.raises(UnsupportedSpecializationError):
            core.lipschitz_bound_for(q, 1.0)

    def test_sampled_quotients_respect_bound(self):
        p = corpus_problem("simplex-cos-8")
        rng = np.random.default_rng(5)
        lam = np.concatenate([rng.normal(0, 2, 1), np.abs(rng.normal(0, 2, 8))])
        mult = MultiplierState(lam)
        sigma = 4.0
        bound = core.lipschitz_bound_for(p, sigma)
        for _ in range(200):
            x = rng.uniform(-2.0, 2.0, 8)
            y = rng.uniform(-2.0, 2.0, 8)
            num = float(np.linalg.norm(grad_P(p, x, mult, sigma) - grad_P(p, y, mult, sigma)))
            den = float(np.linalg.norm(x - y))
            assert num <= bound * den * (1.0 + 1e-12)


class TestStateValidation:
    def test_penalty_state_ranges(self):
        with pytest.raises(ValueError):
            PenaltyState(sigma=0.0)
        with pytest.raises(ValueError):
            PenaltyState(sigma=1.0, alpha=1.0)
        with pytest.raises(ValueError):
            PenaltyState(sigma=1.0, gamma=1.0)
        with pytest.raises(ValueError):
            PenaltyState(sigma=1.0, policy="linear")

    def test_multiplier_sign_check(self):
        assert _mult(-1.0, 2.0).check_signs(1)
        assert not _mult(2.0, -1.0).check_signs(1)
