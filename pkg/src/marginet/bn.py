"""Binary Bayesian networks with dense conditional probability tables.

Conventions used throughout the package:

- Nodes carry integer ids ``0..n-1``; every per-node array is indexed by id.
- A *full assignment* is a uint8 array of 0/1 values, one entry per node.
- A *partial state* is an int8 array where ``UNOBSERVED`` (-1) marks an
  unobserved node and 0/1 are observed values.
- A CPT row index encodes the parent values as a bit pattern: the j-th
  parent in the node's parent list contributes bit j. ``p_true[k]`` is
  P(X=1 | parents decoded from k).
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    CycleDetected,
    InvalidConfig,
    NetworkFormatError,
    UnassignedParent,
    UnknownNode,
)
from .fileio import atomic_write_text

NodeId = int

UNOBSERVED = -1

MAX_PARENTS_DEFAULT = 8

# Probabilities are kept away from exact 0/1 unless a node is explicitly
# deterministic, so importance weights stay finite except where intended.
CPT_CLAMP = 1e-9


@dataclass(frozen=True)
class Cpt:
    """P(X=1) per parent-bit configuration; length is 2**parent_count."""

    p_true: np.ndarray
    deterministic: bool = False

    @property
    def parent_count(self) -> int:
        return int(self.p_true.shape[0]).bit_length() - 1


@dataclass(frozen=True)
class Node:
    id: NodeId
    name: str
    parents: tuple[NodeId, ...]
    cpt: Cpt


class BayesianNetwork:
    """A DAG of binary nodes. Immutable after construction, safe to share.

    Sampling and inference functions take the network plus a caller-owned
    ``numpy.random.Generator``; no global randomness is used anywhere.
    """

    def __init__(self, nodes: list[Node] | tuple[Node, ...], max_parents: int = MAX_PARENTS_DEFAULT):
        nodes = tuple(sorted(nodes, key=lambda nd: nd.id))
        ids = [nd.id for nd in nodes]
        if ids != list(range(len(nodes))):
            raise NetworkFormatError(f"node ids must be exactly 0..{len(nodes) - 1}, got {ids}")
        names = [nd.name for nd in nodes]
        if len(set(names)) != len(names):
            raise NetworkFormatError("node names must be unique")

        checked = []
        for nd in nodes:
            if len(set(nd.parents)) != len(nd.parents):
                raise NetworkFormatError(f"node {nd.id} ({nd.name}): duplicate parent ids")
            if any(p < 0 or p >= len(nodes) for p in nd.parents):
                raise NetworkFormatError(f"node {nd.id} ({nd.name}): parent id out of range")
            if nd.id in nd.parents:
                raise NetworkFormatError(f"node {nd.id} ({nd.name}): self-loop")
            if len(nd.parents) > max_parents:
                raise NetworkFormatError(
                    f"node {nd.id} ({nd.name}): {len(nd.parents)} parents exceeds max {max_parents}"
                )
            p = np.asarray(nd.cpt.p_true, dtype=np.float64).reshape(-1)
            if p.shape[0] != 1 << len(nd.parents):
                raise NetworkFormatError(
                    f"node {nd.id} ({nd.name}): p_true length {p.shape[0]} != 2^{len(nd.parents)}"
                )
            if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
                raise NetworkFormatError(f"node {nd.id} ({nd.name}): p_true entries outside [0, 1]")
            if not nd.cpt.deterministic:
                p = np.clip(p, CPT_CLAMP, 1.0 - CPT_CLAMP)
            p.setflags(write=False)
            checked.append(Node(nd.id, nd.name, tuple(nd.parents), Cpt(p, nd.cpt.deterministic)))

        self.nodes: tuple[Node, ...] = tuple(checked)
        self.n_nodes: int = len(checked)
        self.topo_order: tuple[NodeId, ...] = tuple(
            _kahn(self.n_nodes, [nd.parents for nd in checked])
        )
        self._name_to_id = {nd.name: nd.id for nd in checked}
        self._prior_cache: np.ndarray | None = None

    def node_id(self, name: str) -> NodeId:
        try:
            return self._name_to_id[name]
        except KeyError:
            raise UnknownNode(f"no node named {name!r}") from None

    @property
    def names(self) -> list[str]:
        return [nd.name for nd in self.nodes]

    def __repr__(self) -> str:
        return f"BayesianNetwork(n_nodes={self.n_nodes})"


def _kahn(n: int, parents: list[tuple[int, ...]]) -> list[int]:
    """Topological order with ties broken by ascending node id."""
    indeg = [len(ps) for ps in parents]
    children: list[list[int]] = [[] for _ in range(n)]
    for child, ps in enumerate(parents):
        for p in ps:
            children[p].append(child)
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    out: list[int] = []
    while heap:
        i = heapq.heappop(heap)
        out.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(out) != n:
        raise CycleDetected("graph has a directed cycle")
    return out


def topological_order(bn: BayesianNetwork) -> list[NodeId]:
    """Parents-before-children order, deterministic (ascending-id tie-break)."""
    return _kahn(bn.n_nodes, [nd.parents for nd in bn.nodes])


# ---------------------------------------------------------------------------
# Assignments and partial states
# ---------------------------------------------------------------------------

def unobserved_state(n: int) -> np.ndarray:
    return np.full(n, UNOBSERVED, dtype=np.int8)


def evidence_state(bn: BayesianNetwork, assignments: dict) -> np.ndarray:
    """Build a partial state from ``{name_or_id: 0/1}`` pairs."""
    state = unobserved_state(bn.n_nodes)
    for key, val in assignments.items():
        i = bn.node_id(key) if isinstance(key, str) else int(key)
        if not 0 <= i < bn.n_nodes:
            raise UnknownNode(f"node id {i} out of range")
        if val not in (0, 1, True, False):
            raise InvalidConfig(f"evidence value for node {key!r} must be 0 or 1, got {val!r}")
        state[i] = int(val)
    return state


def observed_mask(state: np.ndarray) -> np.ndarray:
    return state >= 0


# ---------------------------------------------------------------------------
# Conditional probabilities
# ---------------------------------------------------------------------------

def parent_config(bn: BayesianNetwork, node: NodeId, values: np.ndarray) -> np.ndarray | int:
    """CPT row index for ``node`` given values; works on (n,) or (m, n) arrays."""
    parents = bn.nodes[node].parents
    if values.ndim == 1:
        cfg = 0
        for j, p in enumerate(parents):
            cfg += int(values[p]) << j
        return cfg
    cfg = np.zeros(values.shape[0], dtype=np.int64)
    for j, p in enumerate(parents):
        cfg += values[:, p].astype(np.int64) << j
    return cfg


def prob_true_rows(bn: BayesianNetwork, node: NodeId, values: np.ndarray) -> np.ndarray:
    """Vectorized P(node=1 | parent rows); assumes parents are assigned 0/1."""
    return bn.nodes[node].cpt.p_true[parent_config(bn, node, values)]


def conditional_prob(bn: BayesianNetwork, node: NodeId, value: bool | int, values: np.ndarray) -> float:
    """P(node=value | parents read from ``values``).

    ``values`` may be a partial state; only the node's parents are read and
    each must be assigned.
    """
    values = np.asarray(values)
    for p in bn.nodes[node].parents:
        if values[p] < 0:
            raise UnassignedParent(f"parent {p} of node {node} is unobserved")
    p1 = float(bn.nodes[node].cpt.p_true[parent_config(bn, node, values)])
    return p1 if value else 1.0 - p1


def log_joint(bn: BayesianNetwork, x: np.ndarray) -> float:
    """log P(x) under the factorization over node conditionals; -inf if any factor is 0."""
    x = np.asarray(x)
    if x.shape != (bn.n_nodes,):
        raise InvalidConfig(f"expected a complete assignment of length {bn.n_nodes}")
    total = 0.0
    for i in range(bn.n_nodes):
        p1 = float(bn.nodes[i].cpt.p_true[parent_config(bn, i, x)])
        p = p1 if x[i] else 1.0 - p1
        if p <= 0.0:
            return float("-inf")
        total += float(np.log(p))
    return total


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def ancestral_sample(bn: BayesianNetwork, rng: np.random.Generator) -> np.ndarray:
    """One unbiased draw from the joint, nodes sampled in topological order."""
    return ancestral_samples(bn, 1, rng)[0]


def ancestral_samples(bn: BayesianNetwork, m: int, rng: np.random.Generator) -> np.ndarray:
    """(m, n) matrix of independent joint samples; one Bernoulli draw per node per row."""
    x = np.zeros((m, bn.n_nodes), dtype=np.uint8)
    for i in bn.topo_order:
        p1 = prob_true_rows(bn, i, x)
        x[:, i] = rng.random(m) < p1
    return x


# ---------------------------------------------------------------------------
# Generators and fixtures
# ---------------------------------------------------------------------------

def random_bn(n_nodes: int, max_parents: int, edge_prob: float, seed: int) -> BayesianNetwork:
    """Random acyclic network: parents drawn from earlier ids only.

    CPT entries are uniform in [0.05, 0.95], so no conditional is extreme.
    Deterministic per seed.
    """
    if n_nodes < 1:
        raise InvalidConfig("n_nodes must be >= 1")
    if max_parents < 0:
        raise InvalidConfig("max_parents must be >= 0")
    if not 0.0 <= edge_prob <= 1.0:
        raise InvalidConfig("edge_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(n_nodes):
        candidates = np.flatnonzero(rng.random(i) < edge_prob)
        if candidates.size > max_parents:
            candidates = rng.choice(candidates, size=max_parents, replace=False)
        parents = tuple(int(p) for p in sorted(candidates))
        p_true = rng.uniform(0.05, 0.95, size=1 << len(parents))
        nodes.append(Node(i, f"X{i}", parents, Cpt(p_true)))
    return BayesianNetwork(nodes, max_parents=max(max_parents, MAX_PARENTS_DEFAULT))


def chain3() -> BayesianNetwork:
    """Three-node chain A -> B -> C used as a worked example in the tests."""
    return BayesianNetwork(
        [
            Node(0, "A", (), Cpt(np.array([0.3]))),
            Node(1, "B", (0,), Cpt(np.array([0.1, 0.8]))),
            Node(2, "C", (1,), Cpt(np.array([0.2, 0.9]))),
        ]
    )


def pathology_network() -> BayesianNetwork:
    """Fixture where a naive marginal-product proposal has huge weight variance.

    ``effect`` is caused only and always by ``cause`` (a 0/1 CPT), and given
    evidence E=1 both have posterior probability 0.001. Sampling them
    independently from their posterior marginals then puts mass 1e-6 on the
    (1, 1) event, which carries a weight factor of 1/0.001 = 1000.
    """
    return BayesianNetwork(
        [
            Node(0, "E", (), Cpt(np.array([0.5]))),
            Node(1, "cause", (0,), Cpt(np.array([0.5, 0.001]))),
            Node(2, "effect", (1,), Cpt(np.array([0.0, 1.0]), deterministic=True)),
        ]
    )


FIXTURES = {"chain3": chain3, "pathology": pathology_network}


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def network_to_json(bn: BayesianNetwork) -> str:
    doc = {
        "nodes": [
            {
                "id": nd.id,
                "name": nd.name,
                "parents": list(nd.parents),
                "p_true": [float(p) for p in nd.cpt.p_true],
                "deterministic": nd.cpt.deterministic,
            }
            for nd in bn.nodes
        ]
    }
    return json.dumps(doc, indent=2) + "\n"


def save_network(bn: BayesianNetwork, path) -> None:
    atomic_write_text(path, network_to_json(bn))


def load_network(path, max_parents: int = MAX_PARENTS_DEFAULT) -> BayesianNetwork:
    """Load and validate a network file; errors name the offending entry."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from None

    if not isinstance(doc, dict) or "nodes" not in doc or not isinstance(doc["nodes"], list):
        raise NetworkFormatError(f"{path}: expected a top-level object with a 'nodes' list")
    nodes = []
    for k, entry in enumerate(doc["nodes"]):
        where = f"{path}: nodes[{k}]"
        if not isinstance(entry, dict):
            raise NetworkFormatError(f"{where}: expected an object")
        try:
            node_id = int(entry["id"])
            name = str(entry["name"])
            parents = tuple(int(p) for p in entry["parents"])
            p_true = np.asarray([float(p) for p in entry["p_true"]], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{where}: {exc!r}") from None
        deterministic = bool(entry.get("deterministic", False))
        nodes.append(Node(node_id, name, parents, Cpt(p_true, deterministic)))
    try:
        return BayesianNetwork(nodes, max_parents=max_parents)
    except NetworkFormatError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from None
