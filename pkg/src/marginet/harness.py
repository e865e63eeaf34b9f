"""Evaluation: oracle test sets, error metrics, architecture and beta sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bn import BayesianNetwork, ancestral_sample, unobserved_state
from .dataset import EncodingMode
from .errors import DegenerateInput, EmptyInput, LengthMismatch
from .exact import exact_posterior
from .mlp import MlpModel, TrainConfig, predict_marginals, train
from .proposals import ProposalSpec, estimate


@dataclass
class EvidenceCase:
    evidence: np.ndarray  # partial state
    truth: np.ndarray     # exact posterior marginals


@dataclass
class SweepRow:
    label: str
    encoding: str = ""
    beta: float | None = None
    n_samples: int | None = None
    mae: float | None = None
    max_ae: float | None = None
    pearson: float | None = None
    ess: float | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]


def build_test_set(
    bn: BayesianNetwork,
    n_cases: int,
    rng: np.random.Generator,
    min_frac: float = 0.1,
    max_frac: float = 0.5,
) -> list[EvidenceCase]:
    """Evidence drawn from forward samples (so it always has positive
    probability), revealing a uniform fraction of nodes in [min_frac, max_frac].
    """
    cases = []
    for _ in range(n_cases):
        x = ancestral_sample(bn, rng)
        frac = rng.uniform(min_frac, max_frac)
        k = int(np.ceil(frac * bn.n_nodes))
        revealed = rng.choice(bn.n_nodes, size=k, replace=False)
        evidence = unobserved_state(bn.n_nodes)
        evidence[revealed] = x[revealed]
        cases.append(EvidenceCase(evidence=evidence, truth=exact_posterior(bn, evidence)))
    return cases


def _select(pred, truth, evidence, restrict_unobserved):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"shapes differ: {pred.shape} vs {truth.shape}")
    if restrict_unobserved and evidence is not None:
        keep = np.asarray(evidence) < 0
        return pred[keep], truth[keep]
    return pred, truth


def mae(pred, truth, evidence=None, restrict_unobserved: bool = True) -> float:
    """Mean absolute error, over unobserved nodes when evidence is given."""
    p, t = _select(pred, truth, evidence, restrict_unobserved)
    return float(np.mean(np.abs(p - t)))


def max_ae(preds, truths, evidences=None, restrict_unobserved: bool = True) -> float:
    """Per-case maximum absolute error, averaged across cases."""
    if len(preds) == 0:
        raise EmptyInput("need at least one case")
    if evidences is None:
        evidences = [None] * len(preds)
    maxes = []
    for pred, truth, ev in zip(preds, truths, evidences):
        p, t = _select(pred, truth, ev, restrict_unobserved)
        maxes.append(np.max(np.abs(p - t)))
    return float(np.mean(maxes))


def pearson(pred, truth, evidence=None, restrict_unobserved: bool = True) -> float:
    """Sample correlation of predicted vs true marginal vectors."""
    p, t = _select(pred, truth, evidence, restrict_unobserved)
    if p.size < 2 or p.std() == 0.0 or t.std() == 0.0:
        raise DegenerateInput("correlation needs two non-constant vectors")
    return float(np.corrcoef(p, t)[0, 1])


def evaluate_model(model: MlpModel, cases: list[EvidenceCase]) -> tuple[float, float, float]:
    """(mae, max_ae, mean pearson) of model predictions over a test set."""
    preds = [predict_marginals(model, c.evidence) for c in cases]
    truths = [c.truth for c in cases]
    evidences = [c.evidence for c in cases]
    rs = []
    for pred, c in zip(preds, cases):
        try:
            rs.append(pearson(pred, c.truth, c.evidence))
        except DegenerateInput:
            pass
    mean_r = float(np.mean(rs)) if rs else float("nan")
    mean_mae = float(np.mean([mae(p, t, e) for p, t, e in zip(preds, truths, evidences)]))
    return mean_mae, max_ae(preds, truths, evidences), mean_r


def architecture_sweep(
    bn: BayesianNetwork,
    test_set: list[EvidenceCase],
    configs: list[tuple[tuple[int, ...], str]],
    train_cfg: TrainConfig,
) -> SweepResult:
    """Train one model per (hidden sizes, encoding) pair and score it.

    Every row reuses ``train_cfg.seed``, so duplicate config rows give
    identical metrics.
    """
    rows = []
    for hidden, encoding in configs:
        mode = EncodingMode(encoding)
        cfg = TrainConfig(
            hidden=tuple(hidden),
            iterations=train_cfg.iterations,
            batch_size=train_cfg.batch_size,
            encoding=mode,
            seed=train_cfg.seed,
            lr=train_cfg.lr,
            dropout_rate=train_cfg.dropout_rate,
            heldout_size=0,
        )
        model, _ = train(bn, cfg)
        m, mx, r = evaluate_model(model, test_set)
        label = "x".join(str(h) for h in hidden)
        rows.append(SweepRow(label=f"h{label}", encoding=mode.value, mae=m, max_ae=mx, pearson=r))
    return SweepResult(rows)


def beta_sweep(
    bn: BayesianNetwork,
    model: MlpModel | None,
    test_set: list[EvidenceCase],
    betas: list[float],
    sample_counts: list[int],
    rng: np.random.Generator,
    workers: int = 1,
    epsilon_clamp: float = 1e-6,
    include_reference: bool = False,
    marginal_source: str = "model",
) -> SweepResult:
    """Hybrid-proposal grid: mean pearson and mean ESS per (beta, n_samples).

    With ``include_reference`` an extra row runs the sequential sampler with
    exact-oracle marginals at the largest sample count; it should sit at
    pearson ~ 1 with ESS = n_samples and anchors the sweep.
    """
    rows = []
    for beta in betas:
        spec = ProposalSpec(
            variant="hybrid", beta=beta, epsilon_clamp=epsilon_clamp, marginal_source=marginal_source
        )
        for n_samples in sample_counts:
            rs, esses = [], []
            for case in test_set:
                res = estimate(bn, case.evidence, spec, model, n_samples, rng.spawn(1)[0], workers)
                try:
                    rs.append(pearson(res.marginals, case.truth, case.evidence))
                except DegenerateInput:
                    pass
                esses.append(res.ess)
            rows.append(
                SweepRow(
                    label=f"hybrid(beta={beta:g})",
                    beta=beta,
                    n_samples=n_samples,
                    pearson=float(np.mean(rs)) if rs else float("nan"),
                    ess=float(np.mean(esses)),
                )
            )
    if include_reference:
        spec = ProposalSpec(variant="sequential", marginal_source="exact")
        n_samples = max(sample_counts)
        rs, esses = [], []
        for case in test_set:
            res = estimate(bn, case.evidence, spec, None, n_samples, rng.spawn(1)[0], workers)
            try:
                rs.append(pearson(res.marginals, case.truth, case.evidence))
            except DegenerateInput:
                pass
            esses.append(res.ess)
        rows.append(
            SweepRow(
                label="sequential-oracle",
                n_samples=n_samples,
                pearson=float(np.mean(rs)) if rs else float("nan"),
                ess=float(np.mean(esses)),
            )
        )
    return SweepResult(rows)
