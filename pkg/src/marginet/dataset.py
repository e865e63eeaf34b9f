"""Streaming training data: joint samples, random masking, input encodings.

Training pairs are generated on the fly (sample, mask, encode); nothing is
written to disk unless explicitly dumped for debugging. Masking draws one
hiding probability per sample, uniform on [0, 1], then hides each node
independently with that probability, which makes the number of observed
nodes uniform on {0..n}.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bn import UNOBSERVED, BayesianNetwork, ancestral_samples, unobserved_state
from .errors import InvalidConfig
from .exact import EXACT_LIMIT_DEFAULT, exact_posterior
from .fileio import atomic_write_text

# Fallback sample count (and internal seed) for prior estimation on networks
# too large to enumerate.
_PRIOR_SAMPLES = 1_000_000
_PRIOR_SEED = 0x5EED


class EncodingMode(str, Enum):
    """How a partial state maps onto the 2n network inputs.

    Node i occupies input positions (2i, 2i+1) = (observed flag, value).

    TWO_BIT: value bit is the observed value, 0 when unobserved.
    FLAG_PLUS_PRIOR: value is the observed value, or the node's prior
        marginal when unobserved.
    """

    TWO_BIT = "two_bit"
    FLAG_PLUS_PRIOR = "flag_plus_prior"


@dataclass
class TrainingBatch:
    inputs: np.ndarray   # (b, 2n) float64
    targets: np.ndarray  # (b, n) float64 in {0, 1}


def mask_assignment(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Hide each node with probability p ~ U[0,1] drawn once for this call."""
    x = np.asarray(x)
    state = x.astype(np.int8)
    p = rng.random()
    state[rng.random(x.shape[0]) < p] = UNOBSERVED
    return state


def mask_batch(xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise masking; each row gets its own hiding probability."""
    states = xs.astype(np.int8)
    p = rng.random((xs.shape[0], 1))
    states[rng.random(xs.shape) < p] = UNOBSERVED
    return states


def compute_priors(bn: BayesianNetwork, rng: np.random.Generator | None = None) -> np.ndarray:
    """Prior marginals P(X_i=1), exact when the network is small enough.

    Cached on the network; the Monte Carlo fallback uses a fixed internal
    seed unless a generator is supplied, so results stay reproducible.
    """
    if bn._prior_cache is not None:
        return bn._prior_cache
    if bn.n_nodes <= EXACT_LIMIT_DEFAULT:
        priors = exact_posterior(bn, unobserved_state(bn.n_nodes))
    else:
        if rng is None:
            rng = np.random.default_rng(_PRIOR_SEED)
        priors = ancestral_samples(bn, _PRIOR_SAMPLES, rng).mean(axis=0)
    priors.setflags(write=False)
    bn._prior_cache = priors
    return priors


def encode(state: np.ndarray, mode: EncodingMode, priors: np.ndarray | None = None) -> np.ndarray:
    return encode_batch(np.asarray(state, dtype=np.int8)[None, :], mode, priors)[0]


def encode_batch(
    states: np.ndarray, mode: EncodingMode, priors: np.ndarray | None = None
) -> np.ndarray:
    """(b, n) partial states -> (b, 2n) network inputs."""
    states = np.asarray(states, dtype=np.int8)
    b, n = states.shape
    flags = states >= 0
    out = np.zeros((b, 2 * n), dtype=np.float64)
    out[:, 0::2] = flags
    if mode == EncodingMode.TWO_BIT:
        out[:, 1::2] = states == 1
    elif mode == EncodingMode.FLAG_PLUS_PRIOR:
        if priors is None:
            raise InvalidConfig("flag_plus_prior encoding requires prior marginals")
        out[:, 1::2] = np.where(flags, states == 1, priors[None, :])
    else:
        raise InvalidConfig(f"unknown encoding mode {mode!r}")
    return out


def decode_flags(encoded: np.ndarray) -> np.ndarray:
    """Recover which nodes an encoded input marks as observed."""
    return np.asarray(encoded)[..., 0::2] > 0.5


def training_batch(
    bn: BayesianNetwork,
    batch_size: int,
    mode: EncodingMode,
    priors: np.ndarray | None,
    rng: np.random.Generator,
) -> TrainingBatch:
    """batch_size independent (sample -> mask -> encode) rows; targets are pre-mask."""
    if batch_size < 1:
        raise InvalidConfig("batch_size must be >= 1")
    xs = ancestral_samples(bn, batch_size, rng)
    states = mask_batch(xs, rng)
    inputs = encode_batch(states, mode, priors)
    return TrainingBatch(inputs=inputs, targets=xs.astype(np.float64))


def dump_csv(batch: TrainingBatch, bn: BayesianNetwork, path) -> None:
    """Debug dump: 2n input columns then n target columns."""
    header = []
    for name in bn.names:
        header += [f"obs_{name}", f"val_{name}"]
    header += [f"y_{name}" for name in bn.names]
    rows = np.hstack([batch.inputs, batch.targets])
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
