"""Ground-truth posteriors on small networks by explicit enumeration.

The estimator is deliberately plain: enumerate every joint assignment of
the unobserved nodes, accumulate the factorized joint probability, and
normalize. The only shortcut is factoring out *barren leaves* (unobserved
nodes with no children), which integrate to 1 inside the sum and whose
marginals follow from their parents' posterior.
"""

from __future__ import annotations

import numpy as np

from .bn import BayesianNetwork
from .errors import ImpossibleEvidence, InvalidConfig, TooLarge

EXACT_LIMIT_DEFAULT = 22

# Normalizer below this is treated as P(evidence) = 0.
_ZERO_NORMALIZER = 1e-300


def _check(bn: BayesianNetwork, evidence: np.ndarray, limit: int) -> None:
    if bn.n_nodes > limit:
        raise TooLarge(f"{bn.n_nodes} nodes exceeds the exact-inference limit of {limit}")
    if evidence.shape != (bn.n_nodes,):
        raise InvalidConfig(f"evidence must have length {bn.n_nodes}")


def exact_posterior(
    bn: BayesianNetwork, evidence: np.ndarray, limit: int = EXACT_LIMIT_DEFAULT
) -> np.ndarray:
    """All posterior marginals P(X_i=1 | evidence); observed entries pinned."""
    evidence = np.asarray(evidence, dtype=np.int8)
    _check(bn, evidence, limit)
    n = bn.n_nodes

    has_child = np.zeros(n, dtype=bool)
    for nd in bn.nodes:
        for p in nd.parents:
            has_child[p] = True
    barren = [i for i in range(n) if evidence[i] < 0 and not has_child[i]]
    core_unobs = [i for i in range(n) if evidence[i] < 0 and has_child[i]]

    u = len(core_unobs)
    bitpos = {node: j for j, node in enumerate(core_unobs)}
    idx = np.arange(1 << u, dtype=np.uint32)

    cols: dict[int, object] = {}

    def col(i: int):
        if i not in cols:
            if evidence[i] >= 0:
                cols[i] = int(evidence[i])
            else:
                cols[i] = ((idx >> bitpos[i]) & 1).astype(np.uint8)
        return cols[i]

    probs = np.ones(1 << u, dtype=np.float64)
    barren_set = set(barren)
    for i in range(n):
        if i in barren_set:
            continue
        nd = bn.nodes[i]
        cfg = 0
        for j, p in enumerate(nd.parents):
            cfg = cfg + (col(p) << j)
        p1 = nd.cpt.p_true[cfg]
        xi = col(i)
        if isinstance(xi, int):
            probs = probs * (p1 if xi else 1.0 - p1)
        else:
            probs = probs * np.where(xi == 1, p1, 1.0 - p1)

    z = float(probs.sum())
    if z < _ZERO_NORMALIZER:
        raise ImpossibleEvidence("evidence has probability zero under the network")

    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        if evidence[i] >= 0:
            out[i] = float(evidence[i])
    for i in core_unobs:
        out[i] = float(probs[col(i) == 1].sum()) / z
    for i in barren:
        nd = bn.nodes[i]
        cfg = 0
        for j, p in enumerate(nd.parents):
            cfg = cfg + (col(p) << j)
        p1 = nd.cpt.p_true[cfg]
        if np.isscalar(cfg) or np.ndim(cfg) == 0:
            out[i] = float(p1)
        else:
            out[i] = float(probs @ p1) / z
    return out


def evidence_probability(
    bn: BayesianNetwork, evidence: np.ndarray, limit: int = EXACT_LIMIT_DEFAULT
) -> float:
    """P(evidence), i.e. the normalizer of the enumeration."""
    evidence = np.asarray(evidence, dtype=np.int8)
    _check(bn, evidence, limit)
    n = bn.n_nodes
    unobs = [i for i in range(n) if evidence[i] < 0]

    # Barren leaves integrate to exactly 1; drop them from the sum.
    has_child = np.zeros(n, dtype=bool)
    for nd in bn.nodes:
        for p in nd.parents:
            has_child[p] = True
    skip = {i for i in unobs if not has_child[i]}

    bitpos = {node: j for j, node in enumerate(i for i in unobs if i not in skip)}
    u = len(bitpos)
    idx = np.arange(1 << u, dtype=np.uint32)

    def col(i: int):
        if evidence[i] >= 0:
            return int(evidence[i])
        return ((idx >> bitpos[i]) & 1).astype(np.uint8)

    probs = np.ones(1 << u, dtype=np.float64)
    for i in range(n):
        if i in skip:
            continue
        nd = bn.nodes[i]
        cfg = 0
        for j, p in enumerate(nd.parents):
            cfg = cfg + (col(p) << j)
        p1 = nd.cpt.p_true[cfg]
        xi = col(i)
        if isinstance(xi, int):
            probs = probs * (p1 if xi else 1.0 - p1)
        else:
            probs = probs * np.where(xi == 1, p1, 1.0 - p1)
    return float(probs.sum())


def exact_conditional(
    bn: BayesianNetwork, node: int, state: np.ndarray, limit: int = EXACT_LIMIT_DEFAULT
) -> float:
    """P(node=1 | every assigned entry of ``state``), by enumeration."""
    state = np.asarray(state, dtype=np.int8)
    if state[node] >= 0:
        return float(state[node])
    return float(exact_posterior(bn, state, limit=limit)[node])
