import itertools

import numpy as np
import pytest

from marginet.bn import chain3 as _chain3
from marginet.bn import pathology_network as _pathology


@pytest.fixture
def chain3():
    return _chain3()


@pytest.fixture
def pathology():
    return _pathology()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def joint_prob(bn, bits) -> float:
    """Factorized joint probability of one complete assignment, read off the CPTs."""
    p = 1.0
    for i in range(bn.n_nodes):
        cfg = 0
        for j, parent in enumerate(bn.nodes[i].parents):
            cfg += bits[parent] << j
        p1 = float(bn.nodes[i].cpt.p_true[cfg])
        p *= p1 if bits[i] else 1.0 - p1
    return p


def brute_force_posterior(bn, evidence):
    """Independent oracle: sum the factorized joint over all 2^n assignments.

    Enumerates with itertools and multiplies table entries directly, sharing
    no code with the enumeration module it cross-checks.
    """
    n = bn.n_nodes
    evidence = np.asarray(evidence)
    num = np.zeros(n)
    z = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        if any(evidence[i] >= 0 and evidence[i] != bits[i] for i in range(n)):
            continue
        p = joint_prob(bn, bits)
        z += p
        for i in range(n):
            if bits[i]:
                num[i] += p
    if z == 0.0:
        raise ZeroDivisionError("evidence impossible")
    return num / z


def brute_force_event(bn, evidence) -> float:
    """P(evidence) by exhaustive summation."""
    n = bn.n_nodes
    evidence = np.asarray(evidence)
    z = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        if any(evidence[i] >= 0 and evidence[i] != bits[i] for i in range(n)):
            continue
        z += joint_prob(bn, bits)
    return z
