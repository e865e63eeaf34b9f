"""Feed-forward marginal predictor, trained from scratch with numpy.

The network maps an encoded partial state (2n inputs) to one sigmoid per
node, trained with mean binary cross entropy against the full pre-mask
assignment. Hidden layers are affine -> ReLU -> inverted dropout; training
uses Adam with bias correction. Everything is float64 and deterministic
given the seeds, which keeps gradient checks and reproducibility tests
exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .bn import BayesianNetwork
from .dataset import EncodingMode, TrainingBatch, compute_priors, encode_batch, training_batch
from .errors import (
    CorruptFile,
    InvalidArchitecture,
    InvalidConfig,
    NonFiniteGradient,
    ShapeMismatch,
    VersionMismatch,
)
from .fileio import atomic_write_bytes

BCE_CLAMP = 1e-7

MODEL_MAGIC = b"UMNN"
MODEL_VERSION = 1


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float
    encoding: EncodingMode
    priors: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.dropout_rate,
            self.encoding,
            None if self.priors is None else self.priors.copy(),
        )


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


@dataclass
class TrainConfig:
    hidden: tuple[int, ...] = (256,)
    iterations: int = 20_000
    batch_size: int = 128
    encoding: EncodingMode = EncodingMode.TWO_BIT
    seed: int = 0
    lr: float = 1e-3
    dropout_rate: float = 0.5
    record_every: int = 100
    heldout_size: int = 512
    gen_block: int = 64


@dataclass
class TrainReport:
    iterations: int
    loss_curve: list[tuple[int, float]]
    heldout_curve: list[tuple[int, float]]
    final_mae: float | None = None
    final_max_ae: float | None = None


def init_model(
    layer_sizes: list[int],
    seed: int | np.random.Generator,
    dropout_rate: float = 0.5,
    encoding: EncodingMode = EncodingMode.TWO_BIT,
    priors: np.ndarray | None = None,
) -> MlpModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise InvalidArchitecture(f"bad layer sizes {layer_sizes}")
    if layer_sizes[0] != 2 * layer_sizes[-1]:
        raise InvalidArchitecture(
            f"input width {layer_sizes[0]} must be twice the output width {layer_sizes[-1]}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes, weights, biases, dropout_rate, encoding, priors)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cached(
    model: MlpModel,
    inputs: np.ndarray,
    train_mode: bool,
    rng: np.random.Generator | None,
):
    """Returns (probs, activations, preacts, dropout_masks) for backprop."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != model.layer_sizes[0]:
        raise ShapeMismatch(
            f"expected inputs of width {model.layer_sizes[0]}, got shape {inputs.shape}"
        )
    n_layers = len(model.weights)
    acts = [inputs]
    preacts = []
    masks = []
    a = inputs
    for k in range(n_layers - 1):
        z = a @ model.weights[k] + model.biases[k]
        preacts.append(z)
        a = np.maximum(z, 0.0)
        if train_mode and model.dropout_rate > 0.0:
            if rng is None:
                raise InvalidConfig("train-mode forward with dropout needs a generator")
            keep = rng.random(a.shape) >= model.dropout_rate
            mask = keep / (1.0 - model.dropout_rate)
        else:
            mask = None
        if mask is not None:
            a = a * mask
        masks.append(mask)
        acts.append(a)
    z = a @ model.weights[-1] + model.biases[-1]
    preacts.append(z)
    probs = _sigmoid(z)
    return probs, acts, preacts, masks


def forward(
    model: MlpModel,
    inputs: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """(b, 2n) encoded inputs -> (b, n) probabilities. Eval mode is deterministic."""
    probs, _, _, _ = _forward_cached(model, inputs, train_mode, rng)
    return probs


def bce_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over batch and nodes of the binary cross entropy."""
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = np.asarray(target, dtype=np.float64)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def _backward(model: MlpModel, probs, acts, preacts, masks, targets):
    """Gradient of mean BCE w.r.t. every weight and bias.

    The sigmoid/BCE pair gives d loss / d z_out = (p - t) / (batch * n_out).
    """
    b, n_out = probs.shape
    delta = (probs - targets) / (b * n_out)
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        grads_w[k] = acts[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ model.weights[k].T
            if masks[k - 1] is not None:
                delta = delta * masks[k - 1]
            delta = delta * (preacts[k - 1] > 0.0)
    return grads_w, grads_b


def init_adam(model: MlpModel, lr: float = 1e-3) -> AdamState:
    adam = AdamState(lr=lr)
    for w, b in zip(model.weights, model.biases):
        adam.m += [np.zeros_like(w), np.zeros_like(b)]
        adam.v += [np.zeros_like(w), np.zeros_like(b)]
    return adam


def train_step(
    model: MlpModel,
    adam: AdamState,
    batch: TrainingBatch,
    rng: np.random.Generator | None = None,
) -> float:
    """One forward/backward/Adam update in place; returns the batch loss."""
    if batch.targets.shape[1] != model.n_nodes:
        raise ShapeMismatch(
            f"targets have {batch.targets.shape[1]} columns, model expects {model.n_nodes}"
        )
    probs, acts, preacts, masks = _forward_cached(model, batch.inputs, True, rng)
    loss = bce_loss(probs, batch.targets)
    grads_w, grads_b = _backward(model, probs, acts, preacts, masks, batch.targets)

    flat = []
    for gw, gb in zip(grads_w, grads_b):
        flat += [gw, gb]
    for k, g in enumerate(flat):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in parameter tensor {k} (loss={loss})")

    adam.step += 1
    params = []
    for w, b in zip(model.weights, model.biases):
        params += [w, b]
    bc1 = 1.0 - adam.beta1 ** adam.step
    bc2 = 1.0 - adam.beta2 ** adam.step
    for p, g, m, v in zip(params, flat, adam.m, adam.v):
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * g * g
        p -= adam.lr * (m / bc1) / (np.sqrt(v / bc2) + adam.eps)
    return loss


def train(
    bn: BayesianNetwork,
    config: TrainConfig,
    eval_cases=None,
) -> tuple[MlpModel, TrainReport]:
    """Train a fresh model on streamed batches from the network.

    ``eval_cases`` may be a list of harness EvidenceCase records; if given,
    the report carries the final test-set MAE / max AE.
    """
    n = bn.n_nodes
    layer_sizes = [2 * n, *config.hidden, n]
    priors = compute_priors(bn)
    init_rng, data_rng, drop_rng = np.random.default_rng(config.seed).spawn(3)
    model = init_model(
        layer_sizes,
        init_rng,
        dropout_rate=config.dropout_rate,
        encoding=config.encoding,
        priors=priors,
    )
    adam = init_adam(model, lr=config.lr)

    heldout = None
    if config.heldout_size > 0:
        heldout = training_batch(bn, config.heldout_size, config.encoding, priors, data_rng)

    loss_curve: list[tuple[int, float]] = []
    heldout_curve: list[tuple[int, float]] = []
    # Batches are generated in blocks to amortize sampling overhead; the
    # stream is still fully determined by (seed, config).
    block = max(1, config.gen_block)
    it = 0
    while it < config.iterations:
        k = min(block, config.iterations - it)
        big = training_batch(bn, k * config.batch_size, config.encoding, priors, data_rng)
        for j in range(k):
            it += 1
            sl = slice(j * config.batch_size, (j + 1) * config.batch_size)
            batch = TrainingBatch(big.inputs[sl], big.targets[sl])
            loss = train_step(model, adam, batch, drop_rng)
            if it % config.record_every == 0 or it == config.iterations:
                loss_curve.append((it, loss))
                if heldout is not None:
                    heldout_curve.append(
                        (it, bce_loss(forward(model, heldout.inputs), heldout.targets))
                    )

    report = TrainReport(config.iterations, loss_curve, heldout_curve)
    if eval_cases is not None:
        errs = []
        maxes = []
        for case in eval_cases:
            pred = predict_marginals(model, case.evidence)
            unobs = case.evidence < 0
            err = np.abs(pred[unobs] - case.truth[unobs])
            errs.append(err.mean())
            maxes.append(err.max())
        report.final_mae = float(np.mean(errs))
        report.final_max_ae = float(np.mean(maxes))
    return model, report


def predict_batch(model: MlpModel, states: np.ndarray) -> np.ndarray:
    """Marginal estimates for each partial-state row, observed entries pinned."""
    states = np.asarray(states, dtype=np.int8)
    if states.ndim != 2 or states.shape[1] != model.n_nodes:
        raise ShapeMismatch(f"expected (m, {model.n_nodes}) states, got {states.shape}")
    probs = forward(model, encode_batch(states, model.encoding, model.priors))
    observed = states >= 0
    return np.where(observed, states == 1, probs)


def predict_marginals(model: MlpModel, state: np.ndarray) -> np.ndarray:
    return predict_batch(model, np.asarray(state, dtype=np.int8)[None, :])[0]


# ---------------------------------------------------------------------------
# Model files: magic, version, JSON metadata block, raw float64 parameters
# ---------------------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    meta = {
        "layer_sizes": model.layer_sizes,
        "dropout_rate": model.dropout_rate,
        "encoding": model.encoding.value,
        "priors": None if model.priors is None else [float(p) for p in model.priors],
    }
    meta_bytes = json.dumps(meta).encode("utf-8")
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += struct.pack("<I", MODEL_VERSION)
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    for w, b in zip(model.weights, model.biases):
        blob += np.ascontiguousarray(w, dtype="<f8").tobytes()
        blob += np.ascontiguousarray(b, dtype="<f8").tobytes()
    atomic_write_bytes(path, bytes(blob))


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != MODEL_MAGIC:
        raise CorruptFile(f"{path}: not a model file")
    version = struct.unpack("<I", data[4:8])[0]
    if version != MODEL_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {MODEL_VERSION}")
    meta_len = struct.unpack("<I", data[8:12])[0]
    if len(data) < 12 + meta_len:
        raise CorruptFile(f"{path}: truncated metadata block")
    try:
        meta = json.loads(data[12 : 12 + meta_len].decode("utf-8"))
        layer_sizes = [int(s) for s in meta["layer_sizes"]]
        encoding = EncodingMode(meta["encoding"])
        dropout_rate = float(meta["dropout_rate"])
        priors = meta["priors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptFile(f"{path}: bad metadata ({exc!r})") from None

    weights, biases = [], []
    offset = 12 + meta_len
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w_bytes = fan_in * fan_out * 8
        if len(data) < offset + w_bytes + fan_out * 8:
            raise CorruptFile(f"{path}: truncated parameter block")
        weights.append(
            np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
            .reshape(fan_in, fan_out)
            .copy()
        )
        offset += w_bytes
        biases.append(np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset).copy())
        offset += fan_out * 8
    if offset != len(data):
        raise CorruptFile(f"{path}: {len(data) - offset} trailing bytes")
    return MlpModel(
        layer_sizes,
        weights,
        biases,
        dropout_rate,
        encoding,
        None if priors is None else np.asarray(priors, dtype=np.float64),
    )
