"""Amortized posterior marginals and importance-sampling proposals for
binary Bayesian networks.

One feed-forward network, trained on masked joint samples, predicts every
node's posterior marginal under arbitrary partial evidence; those
predictions then drive sequential and hybrid importance-sampling
proposals, verified against an exact enumeration oracle on small
networks.
"""

__version__ = "0.1.0"

from .bn import (
    UNOBSERVED,
    BayesianNetwork,
    Cpt,
    Node,
    ancestral_sample,
    ancestral_samples,
    chain3,
    conditional_prob,
    evidence_state,
    load_network,
    log_joint,
    pathology_network,
    random_bn,
    save_network,
    topological_order,
    unobserved_state,
)
from .dataset import EncodingMode, TrainingBatch, compute_priors, encode, mask_assignment, training_batch
from .exact import exact_conditional, exact_posterior, evidence_probability
from .harness import (
    EvidenceCase,
    SweepResult,
    architecture_sweep,
    beta_sweep,
    build_test_set,
    evaluate_model,
    mae,
    max_ae,
    pearson,
)
from .mlp import (
    AdamState,
    MlpModel,
    TrainConfig,
    TrainReport,
    bce_loss,
    forward,
    init_adam,
    init_model,
    load_model,
    predict_batch,
    predict_marginals,
    save_model,
    train,
    train_step,
)
from .proposals import (
    EstimateResult,
    ProposalSpec,
    WeightedSample,
    draw_sample,
    estimate,
    kish_ess,
    kish_ess_from_log,
    sample_batch,
    summarize_weights,
)
