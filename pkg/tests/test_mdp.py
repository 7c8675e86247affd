import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdrl.mdp import (
    KernelEntry,
    Mdp,
    Policy,
    greedy_policy,
    load_mdp,
    make_rng,
    mdp_from_dict,
    mdp_to_dict,
    q_values,
    require_valid,
    sample_transition,
    transition_outcomes,
    validate,
    value_iteration,
)
from cdrl.measures import CategoricalDistribution, ParameterError, ReturnDistributionFunction, SupportGrid, dirac, pushforward_affine


def test_chain_is_valid(chain):
    assert validate(chain) == []


def test_row_sum_diagnostic():
    mdp = Mdp(1, 2, (((KernelEntry(1.0, 0.0, 0),), (KernelEntry(0.9, 0.0, 0),)),), 0.5)
    problems = validate(mdp)
    assert len(problems) == 1 and "(0, 1)" in problems[0]
    with pytest.raises(ParameterError, match=r"\(0, 1\)"):
        require_valid(mdp)


def test_next_state_diagnostic():
    mdp = Mdp(1, 1, (((KernelEntry(1.0, 0.0, 1),),),), 0.5)
    assert any("next state 1 out of range" in p for p in validate(mdp))


@pytest.mark.parametrize("gamma", [-0.1, 1.0])
def test_gamma_diagnostic(gamma):
    mdp = Mdp(1, 1, (((KernelEntry(1.0, 0.0, 0),),),), gamma)
    assert any("gamma" in p for p in validate(mdp))


def test_policy_validation():
    with pytest.raises(ParameterError):
        Policy(np.array([[0.5, 0.6]]))
    with pytest.raises(ParameterError):
        Policy(np.array([1.0, 0.0]))
    assert Policy.deterministic([1, 0], 2).actions() == [1, 0]
    assert Policy.uniform(2, 2).actions() is None


def test_sample_deterministic_entry(chain):
    rng = make_rng(0)
    assert all(sample_transition(chain, 0, 0, rng) == (0.0, 1) for _ in range(20))


def test_sample_frequency():
    mdp = Mdp(2, 1, (((KernelEntry(0.5, 0.0, 0), KernelEntry(0.5, 1.0, 1)),), ((KernelEntry(1.0, 0.0, 1),),)), 0.5)
    rng = make_rng(3, "freq")
    hits = sum(sample_transition(mdp, 0, 0, rng)[1] for _ in range(100_000))
    assert abs(hits / 100_000 - 0.5) <= 0.01


def test_sample_chi_square(three_state):
    rng = make_rng(5)
    n = 100_000
    entries = three_state.entries(1, 0)
    counts = {}
    for _ in range(n):
        out = sample_transition(three_state, 1, 0, rng)
        counts[out] = counts.get(out, 0) + 1
    expected = {(e.r, e.next): e.p * n for e in entries}
    chi2 = sum((counts.get(k, 0) - v) ** 2 / v for k, v in expected.items())
    # one degree of freedom; 10.83 is the 0.999 quantile
    assert chi2 < 10.83


def test_sample_deterministic_given_seed(three_state):
    a = [sample_transition(three_state, 0, 1, r) for r in [make_rng(9)] for _ in range(50)]
    b = [sample_transition(three_state, 0, 1, r) for r in [make_rng(9)] for _ in range(50)]
    assert a == b


def test_sample_invalid_pair(chain):
    with pytest.raises(ParameterError):
        sample_transition(chain, 5, 0, make_rng(0))


def test_rng_streams_independent():
    a = make_rng(1, "learning").random(5)
    b = make_rng(1, "mdp").random(5)
    c = make_rng(1, "learning").random(5)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def _rdf_with_means(means):
    g = SupportGrid([0.0, 1.0])
    return ReturnDistributionFunction([[CategoricalDistribution(g, [1 - m, m]) for m in row] for row in means])


@pytest.mark.parametrize("means, action", [([[0.0, 1.0]], 1), ([[1.0, 1.0]], 0), ([[0.7, 0.2]], 0)])
def test_greedy_policy(means, action):
    assert greedy_policy(_rdf_with_means(means)).actions() == [action]


def test_greedy_bandit(bandit):
    q = value_iteration(bandit)
    np.testing.assert_allclose(q, [[1.0, 2.0]], atol=1e-10)
    eta = ReturnDistributionFunction([[dirac(q[0, 0]), dirac(q[0, 1])]])
    assert greedy_policy(eta).actions() == [1]


@settings(max_examples=40)
@given(
    st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=2, max_size=2),
    st.floats(-5, 5),
    st.floats(0.1, 0.99),
)
def test_greedy_invariant_under_affine_rescaling(means, c, lam):
    eta = _rdf_with_means(means)
    shifted = eta.map(lambda d: pushforward_affine(d, c, lam))
    assert greedy_policy(shifted) == greedy_policy(eta)


def test_q_values_match_value_iteration_for_optimal(three_state):
    q_star = value_iteration(three_state, tol=1e-14)
    pi_star = Policy.deterministic(q_star.argmax(axis=1).tolist(), 2)
    np.testing.assert_allclose(q_values(three_state, pi_star), q_star, atol=1e-10)


def test_value_iteration_fixed_sweeps(chain):
    q = value_iteration(chain, n_iter=1)
    np.testing.assert_allclose(q, [[0.0], [1.0]])


def test_json_round_trip(three_state, tmp_path):
    policy = Policy.uniform(3, 2)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(mdp_to_dict(three_state, policy)))
    mdp, pol = load_mdp(path)
    assert mdp == three_state
    assert pol == policy


@pytest.mark.parametrize(
    "doc",
    [
        {"n_states": 1, "n_actions": 1, "gamma": 0.5, "kernel": [[[{"p": 1, "r": 0, "next": 0}]]], "extra": 1},
        {"n_states": 1, "n_actions": 1, "gamma": 0.5, "kernel": [[[{"p": 1, "r": 0, "next": 0, "q": 2}]]]},
        {"n_states": 1, "n_actions": 1, "kernel": [[[{"p": 1, "r": 0, "next": 0}]]]},
    ],
)
def test_json_rejects_bad_fields(doc):
    with pytest.raises(ParameterError):
        mdp_from_dict(doc)


def test_load_mdp_errors(tmp_path):
    with pytest.raises(ParameterError, match="cannot read"):
        load_mdp(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParameterError, match="not valid JSON"):
        load_mdp(bad)


def test_transition_outcomes_weights(three_state):
    policy = Policy(np.array([[0.25, 0.75], [1.0, 0.0], [0.5, 0.5]]))
    for x, a in three_state.pairs():
        outs = transition_outcomes(three_state, policy, x, a)
        assert abs(sum(w for w, _ in outs) - 1.0) <= 1e-12
        assert all(w > 0 for w, _ in outs)
