import numpy as np
import pytest

from conftest import brute_force_event, brute_force_posterior
from marginet.bn import (
    BayesianNetwork,
    Cpt,
    Node,
    evidence_state,
    log_joint,
    random_bn,
    unobserved_state,
)
from marginet.errors import ImpossibleEvidence, TooLarge
from marginet.exact import evidence_probability, exact_conditional, exact_posterior


def test_chain3_prior_marginals(chain3):
    p = exact_posterior(chain3, unobserved_state(3))
    assert p[0] == pytest.approx(0.3)
    assert p[1] == pytest.approx(0.3 * 0.8 + 0.7 * 0.1)        # 0.31
    assert p[2] == pytest.approx(0.31 * 0.9 + 0.69 * 0.2)      # 0.417


def test_chain3_posterior_given_c(chain3):
    p = exact_posterior(chain3, evidence_state(chain3, {"C": 1}))
    # P(A=1, C=1) = 0.3*(0.8*0.9 + 0.2*0.2) = 0.228; P(C=1) = 0.417
    assert p[0] == pytest.approx(0.228 / 0.417, abs=1e-12)
    assert p[2] == 1.0


def test_observed_nodes_pinned(chain3):
    p = exact_posterior(chain3, evidence_state(chain3, {"B": 1}))
    assert p[1] == 1.0
    p = exact_posterior(chain3, evidence_state(chain3, {"B": 0}))
    assert p[1] == 0.0


def test_matches_brute_force_random_networks():
    rng = np.random.default_rng(0)
    for seed in range(8):
        net = random_bn(int(rng.integers(3, 9)), 3, 0.5, seed)
        evidence = unobserved_state(net.n_nodes)
        for i in range(net.n_nodes):
            if rng.random() < 0.3:
                evidence[i] = int(rng.integers(0, 2))
        try:
            expected = brute_force_posterior(net, evidence)
        except ZeroDivisionError:
            continue
        got = exact_posterior(net, evidence)
        np.testing.assert_allclose(got, expected, atol=1e-12)


def test_evidence_probability_matches_brute_force():
    net = random_bn(7, 3, 0.5, seed=21)
    evidence = evidence_state(net, {1: 1, 4: 0})
    assert evidence_probability(net, evidence) == pytest.approx(
        brute_force_event(net, evidence), rel=1e-12
    )


def test_impossible_evidence():
    net = BayesianNetwork([
        Node(0, "cause", (), Cpt(np.array([0.5]))),
        Node(1, "effect", (0,), Cpt(np.array([0.0, 1.0]), deterministic=True)),
    ])
    with pytest.raises(ImpossibleEvidence):
        exact_posterior(net, evidence_state(net, {"cause": 0, "effect": 1}))


def test_too_large():
    net = random_bn(23, 3, 0.2, seed=0)
    with pytest.raises(TooLarge):
        exact_posterior(net, unobserved_state(23))
    # raising the limit lets it through
    exact_posterior(net, unobserved_state(23), limit=23)


def test_exact_conditional_markov(chain3):
    assert exact_conditional(chain3, 1, evidence_state(chain3, {"A": 1})) == pytest.approx(0.8)


def test_exact_conditional_diagnostic(chain3):
    got = exact_conditional(chain3, 0, evidence_state(chain3, {"C": 1}))
    assert got == pytest.approx(0.228 / 0.417, abs=1e-12)


def test_exact_conditional_already_assigned(chain3):
    state = evidence_state(chain3, {"B": 1})
    assert exact_conditional(chain3, 1, state) == 1.0
    state[1] = 0
    assert exact_conditional(chain3, 1, state) == 0.0


def test_prior_equals_log_joint_sum():
    import itertools

    net = random_bn(9, 3, 0.4, seed=4)
    marg = np.zeros(9)
    for bits in itertools.product((0, 1), repeat=9):
        p = np.exp(log_joint(net, np.array(bits)))
        marg += p * np.array(bits)
    got = exact_posterior(net, unobserved_state(9))
    np.testing.assert_allclose(got, marg, atol=1e-10)


def test_chain_rule_reproduces_joint():
    """Sequentially extending a state with exact conditionals telescopes to
    P(x) / P(evidence) for every completion."""
    net = random_bn(7, 3, 0.5, seed=11)
    evidence = evidence_state(net, {2: 1})
    z = evidence_probability(net, evidence)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = np.array([int(rng.integers(0, 2)) for _ in range(7)])
        x[2] = 1
        state = evidence.copy()
        log_q = 0.0
        for i in range(7):
            if state[i] >= 0:
                continue
            q1 = exact_conditional(net, i, state)
            log_q += np.log(q1 if x[i] else 1.0 - q1)
            state[i] = x[i]
        expected = log_joint(net, x) - np.log(z)
        assert log_q == pytest.approx(expected, rel=1e-9)


def test_marginalization_consistency():
    """p(i) equals the two-node joint summed over the other node's values."""
    net = random_bn(8, 3, 0.5, seed=17)
    evidence = evidence_state(net, {5: 1})
    p = exact_posterior(net, evidence)
    z = evidence_probability(net, evidence)
    i, j = 0, 3
    joint = np.zeros((2, 2))
    for a in (0, 1):
        for b in (0, 1):
            ev = evidence.copy()
            ev[i], ev[j] = a, b
            joint[a, b] = evidence_probability(net, ev) / z
    assert joint.sum() == pytest.approx(1.0, abs=1e-12)
    assert p[i] == pytest.approx(joint[1, :].sum(), abs=1e-12)
    assert p[j] == pytest.approx(joint[:, 1].sum(), abs=1e-12)


def test_barren_leaf_factoring_consistent():
    """Leaves with and without evidence agree with the full enumeration."""
    # node 6 has no children; posteriors must match brute force regardless
    net = random_bn(7, 3, 0.6, seed=29)
    evidence = evidence_state(net, {0: 1, 3: 0})
    got = exact_posterior(net, evidence)
    expected = brute_force_posterior(net, evidence)
    np.testing.assert_allclose(got, expected, atol=1e-12)
