"""Adam optimizer and the stateful-batch training loop.

Segments run in stream order with the LSTM state carried across them
and zeroed at each epoch start, so resuming from an epoch checkpoint
reproduces the remaining epochs exactly.  Dropout masks for epoch e
come from the substream "dropout-epoch-<e>" of the run seed, which
makes them a function of (seed, epoch) alone.
"""

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import BatchConfig, BatchSet, build_vocabulary, encode, load_corpus, make_batches
from .model import (
    ModelConfig,
    ModelParams,
    backward,
    empty_params,
    forward,
    init_params,
    loss_and_accuracy,
    loss_grad,
    zero_state,
)
from .numerics import Rng


class TrainingDiverged(Exception):
    """Raised when the loss goes non-finite mid-epoch."""


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 5.0  # max global L2 norm; 0 disables clipping

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in [0, 1)")
        if self.learning_rate <= 0.0 or self.eps <= 0.0:
            raise ValueError("learning_rate and eps must be positive")
        if self.grad_clip < 0.0:
            raise ValueError("grad_clip must be >= 0 (0 disables clipping)")


@dataclass
class AdamState:
    """Moment estimates stored in bias-corrected form.

    m and v hold m_hat and v_hat directly, via the equivalent recurrence
    m_hat += w_t*(g - m_hat) with w_t = (1-beta)/(1-beta^t).  At t=1 the
    weight is exactly 1.0, so m_hat == g and v_hat == g*g bitwise; the
    textbook divide-after-decay form misses that by an ulp.
    """

    m: ModelParams
    v: ModelParams
    t: int = 0


def init_adam_state(params: ModelParams) -> AdamState:
    return AdamState(m=empty_params(params.config), v=empty_params(params.config), t=0)


def global_grad_norm(grads: ModelParams) -> float:
    total = 0.0
    for _, g in grads.tensor_items():
        total += float(np.sum(g * g))
    return math.sqrt(total)


def clip_gradients(grads: ModelParams, max_norm: float) -> float:
    """Scale grads in place so the global L2 norm is at most max_norm.

    Returns the pre-clip norm.  max_norm 0 means no clipping.
    """
    norm = global_grad_norm(grads)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for _, g in grads.tensor_items():
            g *= scale
    return norm


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, cfg: AdamConfig):
    """One Adam update, in place.  Returns (params, state).

    theta -= lr * m_hat / (sqrt(v_hat) + eps), with m_hat/v_hat updated
    as described on AdamState.  Gradients are globally norm-clipped
    first (mutating grads) when cfg.grad_clip > 0.
    """
    if grads.config != params.config:
        raise ValueError("gradient shapes do not match parameters")
    clip_gradients(grads, cfg.grad_clip)
    t = state.t + 1
    wm = (1.0 - cfg.beta1) / (1.0 - cfg.beta1**t)
    wv = (1.0 - cfg.beta2) / (1.0 - cfg.beta2**t)
    for (_, p), (_, g), (_, m), (_, v) in zip(
        params.tensor_items(), grads.tensor_items(),
        state.m.tensor_items(), state.v.tensor_items(),
    ):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m += wm * (g - m)
        v += wv * (g * g - v)
        p -= cfg.learning_rate * m / (np.sqrt(v) + cfg.eps)
    state.t = t
    return params, state


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    accuracy: float
    wall_time: float


def train_epoch(params: ModelParams, batches: BatchSet, opt: AdamState,
                adam_cfg: AdamConfig, rng: Rng, epoch: int = 1,
                clock=time.perf_counter) -> EpochMetrics:
    """One pass over all segments in stream order; params/opt updated in place.

    Metrics are means weighted by supervised positions (every segment
    contributes B*L of them).
    """
    if batches.num_segments == 0:
        raise ValueError("batch set is empty")
    started = clock()
    bsz, seq_len = batches.segments[0].inputs.shape
    state = zero_state(params.config, bsz)
    loss_sum = 0.0
    hit_sum = 0.0
    positions = 0
    for k, seg in enumerate(batches.segments):
        probs, state, cache = forward(params, seg.inputs, state, mode="train", rng=rng)
        loss, acc = loss_and_accuracy(probs, seg.targets)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}, segment {k}")
        n = seg.targets.size
        loss_sum += loss * n
        hit_sum += acc * n
        positions += n
        grads = backward(params, cache, loss_grad(probs, seg.targets))
        adam_step(params, grads, opt, adam_cfg)
    return EpochMetrics(
        epoch=epoch,
        mean_loss=loss_sum / positions,
        accuracy=hit_sum / positions,
        wall_time=clock() - started,
    )


@dataclass
class RunConfig:
    """Everything one training run needs; mirrors the key=value config file."""

    corpus: tuple = ()
    out_dir: str = "runs/default"
    seed: int = 0
    epochs: int = 90
    hidden_size: int = 256
    num_layers: int = 3
    dropout: float = 0.2
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 5.0
    batch_size: int = 16
    seq_len: int = 64
    resume_from: str = ""

    def adam_config(self) -> AdamConfig:
        return AdamConfig(learning_rate=self.lr, beta1=self.beta1, beta2=self.beta2,
                          eps=self.eps, grad_clip=self.grad_clip)


_CONFIG_TYPES = {
    "corpus": lambda s: tuple(p.strip() for p in s.split(",") if p.strip()),
    "out_dir": str,
    "seed": int,
    "epochs": int,
    "hidden_size": int,
    "num_layers": int,
    "dropout": float,
    "lr": float,
    "beta1": float,
    "beta2": float,
    "eps": float,
    "grad_clip": float,
    "batch_size": int,
    "seq_len": int,
    "resume_from": str,
}


def parse_config_file(path: str) -> dict:
    """Flat key=value run config; '#' starts a comment, blank lines skipped."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_TYPES:
                raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_TYPES[key](value.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: bad value for {key}: {exc}") from exc
    return values


def make_run_config(file_values: dict = None, overrides: dict = None) -> RunConfig:
    """Merge config-file values with flag overrides (overrides win)."""
    merged = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(merged) - set(_CONFIG_TYPES)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**merged)


CSV_HEADER = "epoch,loss,accuracy,wall_time_s"


def _format_row(m: EpochMetrics) -> str:
    return "%d,%.6f,%.6f,%.3f" % (m.epoch, m.mean_loss, m.accuracy, m.wall_time)


def train(cfg: RunConfig, clock=time.perf_counter, progress=None) -> list:
    """Run the full training loop; returns the list of EpochMetrics.

    Writes, under cfg.out_dir: epoch_%04d.ckpt after every epoch,
    best.ckpt whenever the epoch loss is the lowest so far, and
    metrics.csv with one row per epoch.  On divergence the error
    propagates but files written so far are kept.

    With resume_from set, weights and Adam state come from that
    checkpoint and training continues at the epoch after the one it
    captured (recovered from the step counter), appending only the
    remaining rows.
    """
    if not cfg.corpus:
        raise ValueError("no corpus paths configured")
    corpus = load_corpus(cfg.corpus)
    vocab = build_vocabulary(corpus)
    ids = encode(corpus.text, vocab)
    batches = make_batches(ids, BatchConfig(batch_size=cfg.batch_size, seq_len=cfg.seq_len))
    model_cfg = ModelConfig(vocab_size=vocab.size, hidden_size=cfg.hidden_size,
                            num_layers=cfg.num_layers, dropout=cfg.dropout)
    root = Rng(cfg.seed)
    if cfg.resume_from:
        params, opt = load_checkpoint(cfg.resume_from, dropout=cfg.dropout)
        if params.config != model_cfg:
            raise ValueError(
                f"checkpoint model {params.config} does not match configured {model_cfg}"
            )
        if opt.t % batches.num_segments != 0:
            raise ValueError("checkpoint step count is not at an epoch boundary for this corpus")
        start_epoch = opt.t // batches.num_segments
    else:
        params = init_params(model_cfg, root.substream("init"))
        opt = init_adam_state(params)
        start_epoch = 0

    os.makedirs(cfg.out_dir, exist_ok=True)
    metrics_path = os.path.join(cfg.out_dir, "metrics.csv")
    fresh = start_epoch == 0 or not os.path.exists(metrics_path)
    best_loss = math.inf
    if fresh:
        with open(metrics_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
    else:
        with open(metrics_path, encoding="utf-8") as fh:
            losses = [float(row.split(",")[1]) for row in fh.read().splitlines()[1:] if row]
        if losses:
            best_loss = min(losses)

    history = []
    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        rng_epoch = root.substream(f"dropout-epoch-{epoch}")
        metrics = train_epoch(params, batches, opt, cfg.adam_config(), rng_epoch,
                              epoch=epoch, clock=clock)
        history.append(metrics)
        with open(metrics_path, "a", encoding="utf-8", newline="") as fh:
            fh.write(_format_row(metrics) + "\n")
        save_checkpoint(params, opt, os.path.join(cfg.out_dir, f"epoch_{epoch:04d}.ckpt"))
        if metrics.mean_loss < best_loss:
            best_loss = metrics.mean_loss
            save_checkpoint(params, opt, os.path.join(cfg.out_dir, "best.ckpt"))
        if progress is not None:
            progress(metrics, cfg.epochs)
    return history
