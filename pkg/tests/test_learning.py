import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdrl.bellman import fixed_point, projected_bellman_eval, stochastic_target
from cdrl.experiments.generators import chain_mdp, generate_random_mdp, random_policy, random_rdf
from cdrl.learning import (
    KL_CONVERGENCE_GUARANTEED,
    KlLearnerState,
    LearnerState,
    StepSchedule,
    apply_kl_update,
    apply_mixture_update,
    kl_gradient,
    kl_update_step,
    mixture_update_step,
    projected_target,
    run_kl_policy_evaluation,
    run_policy_evaluation,
    run_q_learning,
    softmax,
)
from cdrl.mdp import Policy, Transition, make_rng, transition_outcomes, value_iteration
from cdrl.measures import ParameterError, ReturnDistributionFunction, SupportGrid
from cdrl.projection import project

G012 = SupportGrid([0.0, 1.0, 2.0])


class TestSchedule:
    def test_default_values(self):
        s = StepSchedule()
        assert s(0) == 1.0
        assert s(9) == pytest.approx(10**-0.7)
        assert s.robbins_monro()

    @pytest.mark.parametrize(
        "kwargs",
        [{"c": 0.0}, {"n0": 0.5}, {"omega": 0.5}, {"omega": 1.2}, {"c": 2.0, "n0": 1.0}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ParameterError):
            StepSchedule(**kwargs)

    @given(st.floats(0.51, 1.0), st.floats(1.0, 50.0), st.integers(0, 10**6))
    def test_steps_in_unit_interval(self, omega, n0, n):
        s = StepSchedule(c=n0**omega, n0=n0, omega=omega)
        assert 0.0 < s(n) <= 1.0 + 1e-12
        assert s(n + 1) <= s(n)


class TestMixtureUpdate:
    def setup_method(self):
        self.state = LearnerState.initial(_chain(), G012, Policy.uniform(2, 1))
        self.tr = Transition(1, 0, 1.0, 1, 0)

    def test_alpha_one_takes_target(self):
        out = apply_mixture_update(self.state, G012, self.tr, 0.5, 1.0)
        np.testing.assert_array_equal(out.probs[1, 0], [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(out.probs[0, 0], self.state.probs[0, 0])
        assert out.t == 1 and out.visits[1, 0] == 1

    def test_alpha_zero_keeps_row(self):
        out = apply_mixture_update(self.state, G012, self.tr, 0.5, 0.0)
        np.testing.assert_array_equal(out.probs, self.state.probs)
        assert out.visits[1, 0] == 1

    def test_alpha_half(self):
        out = apply_mixture_update(self.state, G012, self.tr, 0.5, 0.5)
        np.testing.assert_array_equal(out.probs[1, 0], [0.5, 0.5, 0.0])

    def test_does_not_mutate_input(self):
        before = self.state.probs.copy()
        apply_mixture_update(self.state, G012, self.tr, 0.5, 0.7)
        np.testing.assert_array_equal(self.state.probs, before)

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ParameterError):
            apply_mixture_update(self.state, G012, self.tr, 0.5, alpha)

    @pytest.mark.parametrize("seed", range(15))
    def test_expected_update_is_projected_bellman_mixture(self, seed):
        rng = make_rng(seed, "expected-update")
        mdp = generate_random_mdp(3, 2, [0.0, 0.5, 1.0], 3, seed, gamma=0.6)
        pol = random_policy(3, 2, rng)
        eta = random_rdf(G012, 3, 2, rng)
        state = LearnerState(eta.probs_array(), np.zeros((3, 2), dtype=np.int64), 0, pol)
        alpha = float(rng.uniform())
        bellman = projected_bellman_eval(mdp, pol, G012, eta).probs_array()
        for x, a in mdp.pairs():
            avg = sum(
                w * apply_mixture_update(state, G012, tr, mdp.gamma, alpha).probs[x, a]
                for w, tr in transition_outcomes(mdp, pol, x, a)
            )
            expected = (1 - alpha) * eta.probs_array()[x, a] + alpha * bellman[x, a]
            assert np.max(np.abs(avg - expected)) <= 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_target_matrix_route(self, seed):
        rng = make_rng(seed, "target")
        grid = SupportGrid(np.cumsum(rng.uniform(0.2, 1.0, 5)) - 1.5)
        eta = random_rdf(grid, 2, 2, rng)
        tr = Transition(0, 1, float(rng.uniform(-1, 1)), 1, int(rng.integers(2)))
        gamma = float(rng.uniform(0, 0.99))
        direct = project(grid, stochastic_target(tr, eta, gamma)).probs
        np.testing.assert_allclose(projected_target(eta.probs_array(), grid, tr, gamma), direct, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_rows_stay_distributions(self, seed):
        mdp = generate_random_mdp(3, 2, [-1.0, 0.0, 2.0], 2, seed, gamma=0.9)
        grid = SupportGrid.uniform(-3.0, 5.0, 7)
        rng = make_rng(seed, "rows")
        state = LearnerState.initial(mdp, grid, random_policy(3, 2, rng))
        for _ in range(300):
            state = mixture_update_step(state, mdp, grid, rng)
            assert np.all(state.probs >= 0)
            np.testing.assert_allclose(state.probs.sum(axis=-1), 1.0, atol=1e-12)
        assert state.t == 300 and state.visits.sum() == 300


class TestKl:
    def test_gradient_step_example(self):
        mdp = _chain(0.0)
        state = KlLearnerState.initial(mdp, SupportGrid([0.0, 2.0]), Policy.uniform(2, 1))
        out = apply_kl_update(state, SupportGrid([0.0, 2.0]), Transition(0, 0, 0.0, 1, 0), 0.0, 1.0)
        np.testing.assert_allclose(out.logits[0, 0], [0.5, -0.5])
        np.testing.assert_allclose(out.probs[0, 0], [0.7311, 0.2689], atol=1e-4)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6))
    def test_gradient_sums_to_zero(self, logits):
        theta = np.array(logits)
        target = softmax(-theta)
        assert abs(kl_gradient(theta, target).sum()) <= 1e-12

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_finite_difference(self, seed):
        rng = make_rng(seed, "kl-fd")
        k = int(rng.integers(2, 7))
        theta = rng.normal(size=k)
        target = rng.dirichlet(np.ones(k))

        def kl(t):
            p = softmax(t)
            return float(np.sum(target * (np.log(target) - np.log(p))))

        h = 1e-5
        numeric = np.array([(kl(theta + h * e) - kl(theta - h * e)) / (2 * h) for e in np.eye(k)])
        analytic = kl_gradient(theta, target)
        assert np.max(np.abs(numeric - analytic)) <= 1e-6 * max(1.0, np.max(np.abs(analytic)))

    def test_rejects_bad_lr(self):
        state = KlLearnerState.initial(_chain(), G012, Policy.uniform(2, 1))
        with pytest.raises(ParameterError):
            apply_kl_update(state, G012, Transition(0, 0, 0.0, 1, 0), 0.5, 0.0)

    def test_estimates_stay_positive(self):
        mdp = generate_random_mdp(2, 2, [0.0, 1.0], 2, 3, gamma=0.5)
        rng = make_rng(0)
        state = KlLearnerState.initial(mdp, G012, Policy.uniform(2, 2))
        for _ in range(200):
            state = kl_update_step(state, mdp, G012, rng, 0.5)
        assert np.all(state.probs > 0)
        np.testing.assert_allclose(state.probs.sum(axis=-1), 1.0, atol=1e-12)

    def test_no_guarantee_flag(self):
        assert KL_CONVERGENCE_GUARANTEED is False


def _chain(gamma=0.5):
    return chain_mdp(gamma)


def _chain_reference(chain, policy, grid=G012):
    return fixed_point("evaluation", chain, policy, grid, tol=1e-13).eta


class TestRuns:
    def test_zero_steps(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy)
        res = run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 0, 0, ref)
        assert len(res.trace) == 1 and res.trace[0][0] == 0
        assert res.final_distance == pytest.approx(math.sqrt(2.0))

    def test_deterministic_given_seed(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy)
        a = run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 500, 4, ref)
        b = run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 500, 4, ref)
        c = run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 500, 5, ref)
        assert a.trace == b.trace
        np.testing.assert_array_equal(a.state.probs, b.state.probs)
        assert a.trace != c.trace

    def test_trace_stride(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy)
        res = run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 105, 0, ref, stride=10)
        assert [t for t, _ in res.trace] == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 105]

    def test_chain_converges(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy)
        finals = [
            run_policy_evaluation(chain, chain_policy, G012, StepSchedule(1.0, 1.0, 0.7), 10**4, s, ref).final_distance
            for s in range(10)
        ]
        assert sum(d <= 0.05 for d in finals) >= 8

    def test_reference_must_share_grid(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy, SupportGrid([0.0, 2.0]))
        with pytest.raises(ParameterError):
            run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 10, 0, ref)

    def test_eta0_off_grid_rejected(self, chain, chain_policy):
        eta0 = ReturnDistributionFunction.from_probs(SupportGrid([0.0, 2.0]), np.full((2, 1, 2), 0.5))
        with pytest.raises(ParameterError):
            LearnerState.initial(chain, G012, chain_policy, eta0)

    def test_bandit_q_learning(self, bandit):
        res = run_q_learning(bandit, G012, StepSchedule(1.0, 1.0, 0.7), 10**4, 0)
        assert list(res.policy.actions()) == [1]
        np.testing.assert_allclose(res.eta.means(), value_iteration(bandit), atol=0.1)

    def test_single_action_control_equals_evaluation(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy)
        ev = run_policy_evaluation(chain, chain_policy, G012, StepSchedule(), 300, 9, ref)
        ctl = run_q_learning(chain, G012, StepSchedule(), 300, 9, ref)
        np.testing.assert_array_equal(ev.state.probs, ctl.state.probs)
        assert ev.trace == ctl.trace

    def test_kl_run_valid(self, chain, chain_policy):
        ref = _chain_reference(chain, chain_policy)
        res = run_kl_policy_evaluation(chain, chain_policy, G012, 0.5, 2000, 0, ref)
        assert all(np.isfinite(d) for _, d in res.trace)
        assert np.all(res.state.probs > 0)
