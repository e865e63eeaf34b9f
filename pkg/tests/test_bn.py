import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import marginet.bn as bn_mod
from marginet.bn import (
    BayesianNetwork,
    Cpt,
    Node,
    ancestral_sample,
    ancestral_samples,
    conditional_prob,
    evidence_state,
    load_network,
    log_joint,
    random_bn,
    save_network,
    topological_order,
    unobserved_state,
)
from marginet.errors import (
    CycleDetected,
    InvalidConfig,
    NetworkFormatError,
    UnassignedParent,
    UnknownNode,
)

from conftest import brute_force_posterior


def _det_network(value: float, n: int = 4) -> BayesianNetwork:
    """Chain where every CPT entry equals `value` (deterministic flag set)."""
    nodes = [Node(0, "N0", (), Cpt(np.array([value]), deterministic=True))]
    for i in range(1, n):
        nodes.append(Node(i, f"N{i}", (i - 1,), Cpt(np.full(2, value), deterministic=True)))
    return BayesianNetwork(nodes)


# ---------------------------------------------------------------------------
# topological_order
# ---------------------------------------------------------------------------

def test_topo_chain(chain3):
    assert topological_order(chain3) == [0, 1, 2]


def test_topo_empty():
    assert topological_order(BayesianNetwork([])) == []


def test_topo_diamond_tie_break():
    nodes = [
        Node(0, "A", (), Cpt(np.array([0.5]))),
        Node(1, "B", (0,), Cpt(np.array([0.5, 0.5]))),
        Node(2, "C", (0,), Cpt(np.array([0.5, 0.5]))),
        Node(3, "D", (1, 2), Cpt(np.full(4, 0.5))),
    ]
    assert topological_order(BayesianNetwork(nodes)) == [0, 1, 2, 3]


def test_cycle_detected():
    nodes = [
        Node(0, "A", (1,), Cpt(np.array([0.5, 0.5]))),
        Node(1, "B", (0,), Cpt(np.array([0.5, 0.5]))),
    ]
    with pytest.raises(CycleDetected):
        BayesianNetwork(nodes)


def test_topo_idempotent_and_permutation():
    for seed in range(5):
        net = random_bn(12, 3, 0.4, seed)
        order = topological_order(net)
        assert sorted(order) == list(range(12))
        assert order == topological_order(net)
        pos = {node: k for k, node in enumerate(order)}
        for nd in net.nodes:
            assert all(pos[p] < pos[nd.id] for p in nd.parents)


# ---------------------------------------------------------------------------
# conditional_prob
# ---------------------------------------------------------------------------

def test_conditional_prob_lookup(chain3):
    values = np.array([1, -1, -1], dtype=np.int8)
    assert conditional_prob(chain3, 1, True, values) == pytest.approx(0.8)
    assert conditional_prob(chain3, 1, False, values) == pytest.approx(0.2)


def test_conditional_prob_root(chain3):
    assert conditional_prob(chain3, 0, True, unobserved_state(3)) == pytest.approx(0.3)


def test_conditional_prob_unassigned_parent(chain3):
    with pytest.raises(UnassignedParent):
        conditional_prob(chain3, 1, True, unobserved_state(3))


def test_conditional_prob_complement_sums_to_one():
    net = random_bn(10, 3, 0.5, seed=3)
    rng = np.random.default_rng(0)
    x = ancestral_sample(net, rng)
    for i in range(10):
        total = conditional_prob(net, i, True, x) + conditional_prob(net, i, False, x)
        assert total == 1.0  # exact complement, not approximate


# ---------------------------------------------------------------------------
# ancestral sampling
# ---------------------------------------------------------------------------

def test_ancestral_deterministic_cpts(rng):
    all_true = ancestral_sample(_det_network(1.0), rng)
    assert all_true.tolist() == [1, 1, 1, 1]
    all_false = ancestral_sample(_det_network(0.0), rng)
    assert all_false.tolist() == [0, 0, 0, 0]


def test_ancestral_chain3_frequency(chain3, rng):
    xs = ancestral_samples(chain3, 1_000_000, rng)
    p_b = 0.3 * 0.8 + 0.7 * 0.1  # law of total probability
    sigma = np.sqrt(p_b * (1 - p_b) / 1_000_000)
    assert abs(xs[:, 1].mean() - p_b) < 3 * sigma + 1e-12


def test_ancestral_matches_exact_priors():
    from marginet.exact import exact_posterior

    net = random_bn(12, 3, 0.4, seed=9)
    rng = np.random.default_rng(7)
    xs = ancestral_samples(net, 1_000_000, rng)
    truth = exact_posterior(net, unobserved_state(12))
    se = np.sqrt(truth * (1 - truth) / 1_000_000)
    assert np.all(np.abs(xs.mean(axis=0) - truth) < 4 * se)


# ---------------------------------------------------------------------------
# log_joint
# ---------------------------------------------------------------------------

def test_log_joint_deterministic_path(rng):
    net = _det_network(1.0)
    assert log_joint(net, np.ones(4, dtype=np.uint8)) == 0.0


def test_log_joint_chain3(chain3):
    assert log_joint(chain3, np.array([1, 1, 1])) == pytest.approx(np.log(0.3 * 0.8 * 0.9))


def test_log_joint_zero_factor():
    net = _det_network(1.0)
    assert log_joint(net, np.array([1, 0, 1, 1])) == float("-inf")


def test_log_joint_normalizes():
    import itertools

    for seed in (0, 1):
        net = random_bn(10, 3, 0.4, seed)
        total = sum(
            np.exp(log_joint(net, np.array(bits)))
            for bits in itertools.product((0, 1), repeat=10)
        )
        assert total == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# random_bn
# ---------------------------------------------------------------------------

def test_random_bn_single_root():
    net = random_bn(1, 0, 0.0, seed=0)
    assert net.n_nodes == 1 and net.nodes[0].parents == ()


def test_random_bn_deterministic():
    a, b = random_bn(20, 3, 0.3, seed=42), random_bn(20, 3, 0.3, seed=42)
    for na, nb in zip(a.nodes, b.nodes):
        assert na.parents == nb.parents
        np.testing.assert_array_equal(na.cpt.p_true, nb.cpt.p_true)


def test_random_bn_parent_cap():
    net = random_bn(20, 3, 0.9, seed=1)
    assert max(len(nd.parents) for nd in net.nodes) <= 3


def test_random_bn_rejects_bad_config():
    with pytest.raises(InvalidConfig):
        random_bn(0, 3, 0.3, seed=0)
    with pytest.raises(InvalidConfig):
        random_bn(5, -1, 0.3, seed=0)
    with pytest.raises(InvalidConfig):
        random_bn(5, 2, 1.5, seed=0)


@given(st.integers(min_value=1, max_value=18), st.integers(min_value=0, max_value=4),
       st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=0, max_value=10**6))
@settings(max_examples=25, deadline=None)
def test_random_bn_always_valid(n, k, p, seed):
    net = random_bn(n, k, p, seed)
    order = topological_order(net)
    assert sorted(order) == list(range(n))
    for nd in net.nodes:
        assert all(parent < nd.id for parent in nd.parents)


# ---------------------------------------------------------------------------
# states and evidence
# ---------------------------------------------------------------------------

def test_evidence_state_by_name_and_id(chain3):
    by_name = evidence_state(chain3, {"C": 1, "A": 0})
    by_id = evidence_state(chain3, {2: 1, 0: 0})
    np.testing.assert_array_equal(by_name, by_id)
    assert by_name.tolist() == [0, -1, 1]


def test_evidence_state_unknown_name(chain3):
    with pytest.raises(UnknownNode):
        evidence_state(chain3, {"Nope": 1})


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_network_round_trip(tmp_path, chain3):
    path = tmp_path / "net.json"
    save_network(chain3, path)
    loaded = load_network(path)
    assert loaded.names == chain3.names
    for a, b in zip(loaded.nodes, chain3.nodes):
        assert a.parents == b.parents
        np.testing.assert_array_equal(a.cpt.p_true, b.cpt.p_true)


def test_save_deterministic_bytes(tmp_path):
    net = random_bn(8, 3, 0.4, seed=5)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_network(net, p1)
    save_network(net, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_loader_rejects_bad_cpt_length(tmp_path):
    doc = {"nodes": [
        {"id": 0, "name": "A", "parents": [], "p_true": [0.5], "deterministic": False},
        {"id": 1, "name": "B", "parents": [0], "p_true": [0.5], "deterministic": False},
    ]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkFormatError, match=r"node 1 \(B\)"):
        load_network(path)


def test_loader_rejects_out_of_range_prob(tmp_path):
    doc = {"nodes": [{"id": 0, "name": "A", "parents": [], "p_true": [1.5]}]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkFormatError):
        load_network(path)


def test_loader_rejects_duplicate_parents(tmp_path):
    doc = {"nodes": [
        {"id": 0, "name": "A", "parents": [], "p_true": [0.5]},
        {"id": 1, "name": "B", "parents": [0, 0], "p_true": [0.1, 0.2, 0.3, 0.4]},
    ]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkFormatError, match="duplicate"):
        load_network(path)


def test_loader_rejects_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nodes: oops")
    with pytest.raises(NetworkFormatError, match="line"):
        load_network(path)


def test_clamp_applied_unless_deterministic():
    soft = BayesianNetwork([Node(0, "A", (), Cpt(np.array([0.0])))])
    assert soft.nodes[0].cpt.p_true[0] == bn_mod.CPT_CLAMP
    hard = BayesianNetwork([Node(0, "A", (), Cpt(np.array([0.0]), deterministic=True))])
    assert hard.nodes[0].cpt.p_true[0] == 0.0


def test_max_parents_enforced():
    nodes = [Node(i, f"N{i}", (), Cpt(np.array([0.5]))) for i in range(9)]
    nodes.append(Node(9, "sink", tuple(range(9)), Cpt(np.full(512, 0.5))))
    with pytest.raises(NetworkFormatError, match="exceeds max"):
        BayesianNetwork(nodes)


def test_empirical_vs_brute_force_small(rng):
    net = random_bn(6, 2, 0.5, seed=13)
    xs = ancestral_samples(net, 200_000, rng)
    truth = brute_force_posterior(net, unobserved_state(6))
    se = np.sqrt(truth * (1 - truth) / 200_000)
    assert np.all(np.abs(xs.mean(axis=0) - truth) < 4 * se + 1e-9)
