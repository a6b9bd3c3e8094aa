"""Training machinery: multi-label loss, optimizers, epoch loop, gradcheck.

A trained model is an encoder plus either a recurrent cell (sequence models)
or a direct per-image readout (the no-history baseline).  Everything is
deterministic given (seed, config, data): shuffling comes from dedicated rng
substreams, gradients are accumulated in a fixed order, and optimizer updates
walk parameter blocks in their canonical order.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cells import (
    CellKind,
    backward_sequence,
    forward_sequence,
    init_cell_parameters,
)
from .encoder import (
    encode_sequence,
    encode_sequence_backward,
    init_encoder_parameters,
)
from .linalg import sigmoid
from .metrics import confusion, ppv_npv_f
from .rng import substream

__all__ = [
    "MODEL_KINDS",
    "TrainConfig",
    "Model",
    "OptimizerState",
    "NonFiniteError",
    "bce_loss",
    "optimizer_step",
    "init_model",
    "train",
    "final_step_probabilities",
    "evaluate_model",
    "gradcheck",
    "GradcheckReport",
]

MODEL_KINDS = ("baseline", "lstm", "tlstmv1", "tlstmv2")

PROB_CLAMP = 1e-12


class NonFiniteError(ValueError):
    """A gradient or parameter block stopped being finite."""


@dataclass(frozen=True)
class TrainConfig:
    model: str = "tlstmv1"
    hidden: int = 64
    encoder_hidden: int = 128
    features: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 15
    batch_size: int = 4
    delta_max: float = 10.0  # 0 disables delta normalization
    supervision: str = "final"  # or "all"
    threshold: float = 0.5

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        for name in ("hidden", "encoder_hidden", "features", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be sgd or adam, got {self.optimizer!r}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("adam betas must be in [0, 1)")
        if self.eps <= 0:
            raise ValueError("adam eps must be > 0")
        if self.delta_max < 0:
            raise ValueError("delta_max must be >= 0")
        if self.supervision not in ("final", "all"):
            raise ValueError(f"supervision must be final or all, got {self.supervision!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")

    @property
    def delta_scale(self):
        return 1.0 / self.delta_max if self.delta_max > 0 else 1.0


def bce_loss(probs, targets):
    """Mean binary cross-entropy over labels and its gradient w.r.t. probs.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the log; the
    returned gradient is exact for the clamped objective.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape or probs.ndim != 1:
        raise ValueError(f"probs {probs.shape} and targets {targets.shape} must be equal 1-D")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    n = p.shape[0]
    loss = float(-np.mean(targets * np.log(p) + (1.0 - targets) * np.log1p(-p)))
    grad = np.where(
        (probs > PROB_CLAMP) & (probs < 1.0 - PROB_CLAMP),
        (p - targets) / (p * (1.0 - p) * n),
        0.0,  # clamped region: the clamped objective is flat in probs
    )
    return loss, grad


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_blocks(cls, blocks):
        return cls(
            step=0,
            m={k: np.zeros_like(a) for k, a in blocks.items()},
            v={k: np.zeros_like(a) for k, a in blocks.items()},
        )


def optimizer_step(blocks, grads, state, config):
    """Apply one SGD or Adam update in place, in canonical block order."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in block {name!r}")
        if blocks[name].shape != g.shape:
            raise ValueError(
                f"gradient for {name!r} has shape {g.shape}, parameters {blocks[name].shape}"
            )
    if config.optimizer == "sgd":
        for name, g in grads.items():
            blocks[name] -= config.lr * g
        return
    state.step += 1
    t = state.step
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        blocks[name] -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)


@dataclass
class Model:
    """A trainable/evaluable model: encoder plus cell or per-image head."""

    kind: str
    encoder: object  # EncoderParameters | None (None when data ships features)
    cell: object  # CellParameters | None (None for the baseline)
    head_w: np.ndarray | None
    head_b: np.ndarray | None
    delta_max: float
    threshold: float

    def blocks(self):
        merged = {}
        if self.encoder is not None:
            for k, a in self.encoder.blocks().items():
                merged[f"enc.{k}"] = a
        if self.cell is not None:
            for k, a in self.cell.blocks().items():
                merged[f"cell.{k}"] = a
        if self.head_w is not None:
            merged["head.w"] = self.head_w
            merged["head.b"] = self.head_b
        return merged

    def mark_updated(self):
        if self.cell is not None:
            self.cell.mark_updated()

    @property
    def delta_scale(self):
        return 1.0 / self.delta_max if self.delta_max > 0 else 1.0


def init_model(config, labels, rng, with_encoder=True):
    encoder = (
        init_encoder_parameters(config.encoder_hidden, config.features, rng)
        if with_encoder
        else None
    )
    if config.model == "baseline":
        head_w = rng.uniform(-1, 1, (labels, config.features)) / math.sqrt(config.features)
        head_b = np.zeros(labels)
        return Model(
            kind="baseline",
            encoder=encoder,
            cell=None,
            head_w=head_w,
            head_b=head_b,
            delta_max=config.delta_max,
            threshold=config.threshold,
        )
    cell = init_cell_parameters(
        CellKind(config.model), config.hidden, labels, config.features, rng
    )
    return Model(
        kind=config.model,
        encoder=encoder,
        cell=cell,
        head_w=None,
        head_b=None,
        delta_max=config.delta_max,
        threshold=config.threshold,
    )


def _sequence_features(model, sample):
    """(features, encoder cache) for one sample, encoding images if needed."""
    if all(s.features is not None for s in sample.steps):
        return np.stack([s.features for s in sample.steps]), None
    if model.encoder is None:
        raise ValueError(
            f"sequence {sample.sequence_id!r} stores pixels but the model has no encoder"
        )
    images = np.stack([s.image for s in sample.steps])
    return encode_sequence(model.encoder, images)


def _baseline_forward(model, sample):
    final = sample.steps[-1]
    if final.features is not None:
        feats, cache = final.features[None, :], None
    else:
        feats, cache = encode_sequence(model.encoder, final.image)
    probs = sigmoid(model.head_w @ feats[0] + model.head_b)
    return probs, feats, cache


def _sample_loss_and_grads(model, sample, config, want_grads=True):
    """Loss (and merged gradient blocks) for one sequence.

    The baseline always trains on the final image of the sequence (it is a
    single-image classifier by contract); the supervision mode applies to the
    sequence models only.
    """
    targets_final = np.asarray(sample.steps[-1].labels, dtype=np.float64)
    if model.kind == "baseline":
        probs, feats, cache = _baseline_forward(model, sample)
        loss, dprobs = bce_loss(probs, targets_final)
        if not want_grads:
            return loss, None
        dz = dprobs * probs * (1.0 - probs)
        grads = {
            "head.w": np.outer(dz, feats[0]),
            "head.b": dz,
        }
        if cache is not None:
            d_feat = (model.head_w.T @ dz)[None, :]
            enc_grads = encode_sequence_backward(model.encoder, cache, d_feat)
            for k in enc_grads.keys():
                grads[f"enc.{k}"] = enc_grads[k]
        return loss, grads

    feats, cache = _sequence_features(model, sample)
    traces = forward_sequence(model.cell, sample, feats, delta_scale=model.delta_scale)
    T = len(traces)
    d_readout = [None] * T
    if config.supervision == "final":
        loss, dp = bce_loss(traces[-1].probs, targets_final)
        d_readout[-1] = dp
    else:
        loss = 0.0
        for t, step in enumerate(sample.steps):
            step_loss, dp = bce_loss(traces[t].probs, np.asarray(step.labels, float))
            loss += step_loss / T
            d_readout[t] = dp / T
    if not want_grads:
        return loss, None
    cell_grads, dX = backward_sequence(model.cell, traces, d_readout, return_dx=True)
    grads = {f"cell.{k}": cell_grads[k] for k in cell_grads.keys()}
    if cache is not None:
        enc_grads = encode_sequence_backward(model.encoder, cache, dX)
        for k in enc_grads.keys():
            grads[f"enc.{k}"] = enc_grads[k]
    return loss, grads


def train(dataset, config, seed, log_every=0):
    """Train a model on a list of SequenceSample; returns (model, loss log).

    The loss log is a list of (epoch, split, mean_loss) rows.  Identical
    (dataset, config, seed) triples produce bit-identical models.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    labels = len(dataset[0].steps[0].labels)
    with_encoder = any(s.features is None for s in dataset[0].steps)
    model = init_model(config, labels, substream(seed, "init"), with_encoder=with_encoder)
    blocks = model.blocks()
    state = OptimizerState.for_blocks(blocks)
    log = []
    n = len(dataset)
    for epoch in range(config.epochs):
        order = substream(seed, "shuffle", epoch).permutation(n)
        total_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            accum = {k: np.zeros_like(a) for k, a in blocks.items()}
            for idx in batch:
                loss, grads = _sample_loss_and_grads(model, dataset[int(idx)], config)
                total_loss += loss
                for k, g in grads.items():
                    accum[k] += g
            scale = 1.0 / len(batch)
            for k in accum:
                accum[k] *= scale
            optimizer_step(blocks, accum, state, config)
            model.mark_updated()
        mean_loss = total_loss / n
        log.append((epoch, "train", mean_loss))
        if log_every and (epoch + 1) % log_every == 0:
            print(f"    epoch {epoch + 1}/{config.epochs}  mean loss {mean_loss:.4f}")
    return model, log


def final_step_probabilities(model, dataset):
    """Final-step label probabilities and targets for a dataset.

    Returns (probs, targets), each (n_sequences, n_labels).  Sequence models
    run teacher-forced over the full history; the baseline sees only the
    final image.
    """
    probs_rows = []
    target_rows = []
    for sample in dataset:
        if model.kind == "baseline":
            probs, _, _ = _baseline_forward(model, sample)
        else:
            feats, _ = _sequence_features(model, sample)
            traces = forward_sequence(model.cell, sample, feats, delta_scale=model.delta_scale)
            probs = traces[-1].probs
        probs_rows.append(probs)
        target_rows.append(np.asarray(sample.steps[-1].labels, dtype=np.float64))
    return np.stack(probs_rows), np.stack(target_rows)


def evaluate_model(model, dataset, threshold=None):
    """Confusion counts + metrics report of final-step predictions."""
    threshold = model.threshold if threshold is None else threshold
    probs, targets = final_step_probabilities(model, dataset)
    counts = confusion(probs, targets, threshold)
    return ppv_npv_f(counts), probs, targets


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradcheckReport:
    threshold: float
    fd_step: float
    errors: dict  # model kind -> {block name -> max relative error}

    @property
    def max_error(self):
        return max(max(blocks.values()) for blocks in self.errors.values())

    @property
    def passed(self):
        return self.max_error < self.threshold

    def lines(self):
        out = []
        for kind, blocks in self.errors.items():
            for name, err in blocks.items():
                flag = "ok" if err < self.threshold else "FAIL"
                out.append(f"{kind:10s} {name:12s} {err:.3e}  {flag}")
        return out


def _random_check_sample(rng, n_labels, min_len=3, max_len=6):
    """A tiny synthetic sequence (noise images, random labels/deltas)."""
    from .simulator import IMAGE_SIZE, SequenceSample, Step

    T = int(rng.integers(min_len, max_len + 1))
    steps = []
    for t in range(T):
        steps.append(
            Step(
                delta=0 if t == 0 else int(rng.integers(1, 11)),
                labels=rng.integers(0, 2, n_labels).astype(np.float64),
                image=rng.uniform(0.0, 1.0, (IMAGE_SIZE, IMAGE_SIZE)),
            )
        )
    return SequenceSample(sequence_id=f"check-{T}", steps=steps)


def gradcheck(seed=0, hidden=8, encoder_hidden=4, features=6, n_labels=5,
              n_sequences=3, fd_step=1e-5, threshold=1e-4):
    """Central-difference check of every parameter block of all three cells.

    Builds a small model per cell kind, evaluates the all-step training loss
    on ``n_sequences`` random short sequences, and compares analytic
    gradients against (L(w+h) - L(w-h)) / 2h elementwise.  The reported
    number per block is max |analytic - fd| / max(|analytic| + |fd|, 1e-6).
    All-step supervision is used so every gate receives readout gradient at
    every step.
    """
    errors = {}
    for kind in ("lstm", "tlstmv1", "tlstmv2"):
        config = TrainConfig(
            model=kind,
            hidden=hidden,
            encoder_hidden=encoder_hidden,
            features=features,
            supervision="all",
        )
        rng = substream(seed, "gradcheck", kind)
        model = init_model(config, n_labels, rng)
        samples = [_random_check_sample(rng, n_labels) for _ in range(n_sequences)]

        def total_loss():
            return sum(
                _sample_loss_and_grads(model, s, config, want_grads=False)[0]
                for s in samples
            )

        analytic = {}
        for s in samples:
            _, grads = _sample_loss_and_grads(model, s, config)
            for k, g in grads.items():
                analytic[k] = analytic.get(k, 0.0) + g

        blocks = model.blocks()
        kind_errors = {}
        for name, arr in blocks.items():
            a = analytic[name]
            fd = np.zeros_like(arr)
            flat = arr.reshape(-1)
            fd_flat = fd.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + fd_step
                model.mark_updated()
                up = total_loss()
                flat[j] = orig - fd_step
                model.mark_updated()
                down = total_loss()
                flat[j] = orig
                fd_flat[j] = (up - down) / (2.0 * fd_step)
            model.mark_updated()
            denom = np.maximum(np.abs(a) + np.abs(fd), 1e-6)
            kind_errors[name] = float(np.max(np.abs(a - fd) / denom))
        errors[kind] = kind_errors
    return GradcheckReport(threshold=threshold, fd_step=fd_step, errors=errors)
