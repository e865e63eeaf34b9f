"""Importance-sampling engines over binary Bayesian networks.

Four proposal families share one vectorized sampling loop:

- ``prior``: each unobserved node from its graph conditional (classical
  likelihood weighting).
- ``marginal-product``: every unobserved node independently from the
  predicted posterior marginal given the evidence alone.
- ``sequential``: the predicted marginal is refreshed after every sampled
  node, so node i conditions on the evidence plus all earlier nodes. All
  samples advance node-by-node together, so each step is one batched
  prediction.
- ``hybrid``: per-node mixture q_i = beta * marginal + (1 - beta) * graph
  conditional. beta=0 reduces to ``prior`` and beta=1 to
  ``marginal-product``, sample for sample.

Evidence nodes are fixed, take proposal probability 1, and contribute
their likelihood to the weight, so the weight product runs over all nodes.
Marginals come either from a trained model (``marginal_source="model"``)
or from the exact oracle (``"exact"``), the latter existing to test the
samplers independently of model quality.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bn import BayesianNetwork, observed_mask, prob_true_rows
from .errors import AllZeroWeights, ImpossibleEvidence, InvalidConfig, ModelMissing, ShapeMismatch
from .exact import exact_posterior
from .mlp import MlpModel, predict_batch

VARIANTS = ("prior", "marginal-product", "sequential", "hybrid")
MARGINAL_SOURCES = ("model", "exact")


@dataclass(frozen=True)
class ProposalSpec:
    variant: str = "prior"
    beta: float = 0.0
    epsilon_clamp: float = 1e-6
    marginal_source: str = "model"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"unknown proposal variant {self.variant!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidConfig("beta must be in [0, 1]")
        if not 0.0 < self.epsilon_clamp < 0.5:
            raise InvalidConfig("epsilon_clamp must be in (0, 0.5)")
        if self.marginal_source not in MARGINAL_SOURCES:
            raise InvalidConfig(f"unknown marginal source {self.marginal_source!r}")


@dataclass
class WeightedSample:
    assignment: np.ndarray
    log_weight: float


@dataclass
class EstimateResult:
    """Self-normalized marginal estimates plus weight bookkeeping.

    ``sum_weights`` and ``sum_sq_weights`` are of weights rescaled by
    exp(-max_log_weight); multiply back to recover absolute sums.
    """

    marginals: np.ndarray
    ess: float
    n_samples: int
    sum_weights: float
    sum_sq_weights: float
    max_log_weight: float


def _marginal_fn(bn: BayesianNetwork, spec: ProposalSpec, model: MlpModel | None):
    """Batched partial-state -> per-node marginal probabilities callable."""
    if spec.variant == "prior":
        return None
    if spec.marginal_source == "exact":
        return lambda states: _oracle_rows(bn, states)
    if model is None:
        raise ModelMissing(f"variant {spec.variant!r} needs a trained model")
    if model.n_nodes != bn.n_nodes:
        raise ShapeMismatch(f"model has {model.n_nodes} nodes, network has {bn.n_nodes}")
    return lambda states: predict_batch(model, states)


def _oracle_rows(bn: BayesianNetwork, states: np.ndarray) -> np.ndarray:
    """Exact posterior marginals per row, deduplicating repeated states.

    A zero-probability state can only be reached through a clamp-lifted
    draw whose weight is already (or will become) -inf, so any valid
    probability works there; 0.5 keeps the sampler running.
    """
    uniq, inverse = np.unique(states, axis=0, return_inverse=True)
    out = np.empty((uniq.shape[0], bn.n_nodes))
    for k in range(uniq.shape[0]):
        try:
            out[k] = exact_posterior(bn, uniq[k])
        except ImpossibleEvidence:
            out[k] = 0.5
    return out[inverse]


def sample_batch(
    bn: BayesianNetwork,
    evidence: np.ndarray,
    spec: ProposalSpec,
    model: MlpModel | None,
    m: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw m weighted samples; returns ((m, n) assignments, (m,) log weights).

    One uniform vector is consumed per unobserved node in topological
    order, regardless of variant, so variants that coincide mathematically
    produce identical samples from identical streams.
    """
    evidence = np.asarray(evidence, dtype=np.int8)
    if evidence.shape != (bn.n_nodes,):
        raise InvalidConfig(f"evidence must have length {bn.n_nodes}")
    marginal = _marginal_fn(bn, spec, model)
    eps = spec.epsilon_clamp

    # Evidence-only marginals: one prediction serves every sample and node.
    ev_marg = None
    if spec.variant in ("marginal-product", "hybrid"):
        ev_marg = marginal(evidence[None, :])[0]

    states = None
    if spec.variant == "sequential":
        states = np.tile(evidence, (m, 1))

    x = np.zeros((m, bn.n_nodes), dtype=np.uint8)
    logw = np.zeros(m)
    with np.errstate(divide="ignore"):
        for i in bn.topo_order:
            p1 = prob_true_rows(bn, i, x)
            if evidence[i] >= 0:
                v = int(evidence[i])
                x[:, i] = v
                logw += np.log(p1 if v else 1.0 - p1)
                continue
            if spec.variant == "prior":
                q1 = p1
            elif spec.variant == "marginal-product":
                q1 = np.full(m, ev_marg[i])
            elif spec.variant == "sequential":
                q1 = marginal(states)[:, i]
            else:
                q1 = spec.beta * ev_marg[i] + (1.0 - spec.beta) * p1
            q1 = np.clip(q1, eps, 1.0 - eps)
            xi = rng.random(m) < q1
            x[:, i] = xi
            logw += np.log(np.where(xi, p1, 1.0 - p1)) - np.log(np.where(xi, q1, 1.0 - q1))
            if states is not None:
                states[:, i] = xi
    return x, logw


def draw_sample(
    bn: BayesianNetwork,
    evidence: np.ndarray,
    spec: ProposalSpec,
    model: MlpModel | None,
    rng: np.random.Generator,
) -> WeightedSample:
    x, logw = sample_batch(bn, evidence, spec, model, 1, rng)
    return WeightedSample(assignment=x[0], log_weight=float(logw[0]))


def summarize_weights(x: np.ndarray, logw: np.ndarray, evidence: np.ndarray) -> EstimateResult:
    """Reduce raw draws to estimates; stable under a constant log-weight shift."""
    evidence = np.asarray(evidence, dtype=np.int8)
    max_lw = float(np.max(logw))
    if not np.isfinite(max_lw):
        raise AllZeroWeights("every sample hit a zero-probability path")
    w = np.exp(logw - max_lw)
    sw = float(w.sum())
    sw2 = float((w * w).sum())
    marginals = (w @ x) / sw
    obs = observed_mask(evidence)
    marginals[obs] = evidence[obs]
    return EstimateResult(
        marginals=marginals,
        ess=sw * sw / sw2,
        n_samples=int(logw.shape[0]),
        sum_weights=sw,
        sum_sq_weights=sw2,
        max_log_weight=max_lw,
    )


def estimate(
    bn: BayesianNetwork,
    evidence: np.ndarray,
    spec: ProposalSpec,
    model: MlpModel | None,
    n_samples: int,
    rng: np.random.Generator,
    workers: int = 1,
    return_raw: bool = False,
):
    """Self-normalized posterior marginal estimate from n_samples draws.

    With ``workers > 1`` the draw budget is split into per-worker chunks,
    each on its own child stream, and merged in worker-index order;
    ``workers=1`` uses the same chunking code, so it is the reference
    output for determinism checks.
    """
    if n_samples < 1:
        raise InvalidConfig("n_samples must be >= 1")
    workers = max(1, int(workers))
    base, extra = divmod(n_samples, workers)
    chunks = [base + (1 if k < extra else 0) for k in range(workers)]
    chunks = [c for c in chunks if c > 0]
    streams = rng.spawn(len(chunks))

    def run(args):
        size, stream = args
        return sample_batch(bn, evidence, spec, model, size, stream)

    if len(chunks) == 1:
        parts = [run((chunks[0], streams[0]))]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run, zip(chunks, streams)))

    x = np.vstack([p[0] for p in parts])
    logw = np.concatenate([p[1] for p in parts])
    result = summarize_weights(x, logw, evidence)
    if return_raw:
        return result, x, logw
    return result


def kish_ess(weights) -> float:
    """(sum w)^2 / sum w^2 for nonnegative weights."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise InvalidConfig("weights must be nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise AllZeroWeights("at least one weight must be positive")
    return float(total * total / (w * w).sum())


def kish_ess_from_log(log_weights) -> float:
    """Kish ESS computed stably from unnormalized log weights."""
    lw = np.asarray(log_weights, dtype=np.float64)
    m = np.max(lw)
    if not np.isfinite(m):
        raise AllZeroWeights("at least one weight must be positive")
    w = np.exp(lw - m)
    total = w.sum()
    return float(total * total / (w * w).sum())
