"""Stacked character LSTM: parameters, forward pass, and exact gradients.

The network is a stack of LSTM layers (3 by default) over one-hot
character inputs, with inverted dropout between layers and a single
dense projection applied at every timestep, softmaxed into next-char
probabilities.  `backward` implements full backpropagation through the
segment; gradients never flow into the state carried in from the
previous segment.

Gate order everywhere is [input i, forget f, output o, candidate g]:
rows [0:H], [H:2H], [2H:3H], [3H:4H] of each (4H, D) weight matrix.
"""

from dataclasses import dataclass

import numpy as np

from .corpus import one_hot
from .numerics import Rng, cross_entropy, sigmoid, softmax_rows, tanh


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    hidden_size: int = 256
    num_layers: int = 3
    dropout: float = 0.2

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.hidden_size < 1 or self.num_layers < 1:
            raise ValueError("hidden_size and num_layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class LayerParams:
    w: np.ndarray  # (4H, D) input weights
    u: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,)


@dataclass
class OutputParams:
    wy: np.ndarray  # (V, H) time-distributed projection
    by: np.ndarray  # (V,)


@dataclass
class ModelParams:
    layers: list
    out: OutputParams
    config: ModelConfig

    def tensor_items(self):
        """(name, array) pairs in fixed declaration order.

        This order is the contract for checkpoints and optimizer state.
        """
        items = []
        for k, layer in enumerate(self.layers):
            items.append((f"layers.{k}.w", layer.w))
            items.append((f"layers.{k}.u", layer.u))
            items.append((f"layers.{k}.b", layer.b))
        items.append(("out.wy", self.out.wy))
        items.append(("out.by", self.out.by))
        return items


@dataclass
class LstmState:
    """Per-layer hidden and memory vectors carried across segments."""

    h: np.ndarray  # (num_layers, B, H)
    c: np.ndarray  # (num_layers, B, H)

    @property
    def batch_size(self) -> int:
        return self.h.shape[1]


def zero_state(cfg: ModelConfig, batch_size: int) -> LstmState:
    shape = (cfg.num_layers, batch_size, cfg.hidden_size)
    return LstmState(h=np.zeros(shape), c=np.zeros(shape))


def layer_input_size(cfg: ModelConfig, layer: int) -> int:
    return cfg.vocab_size if layer == 0 else cfg.hidden_size


def init_params(cfg: ModelConfig, rng: Rng) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.

    The forget-gate bias slice starts at 1.0 so memory cells default to
    retaining their contents early in training.
    """
    h = cfg.hidden_size
    layers = []
    for k in range(cfg.num_layers):
        d = layer_input_size(cfg, k)
        sw = 1.0 / np.sqrt(d)
        su = 1.0 / np.sqrt(h)
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0
        layers.append(
            LayerParams(
                w=rng.uniform(-sw, sw, (4 * h, d)),
                u=rng.uniform(-su, su, (4 * h, h)),
                b=b,
            )
        )
    sy = 1.0 / np.sqrt(h)
    out = OutputParams(wy=rng.uniform(-sy, sy, (cfg.vocab_size, h)), by=np.zeros(cfg.vocab_size))
    return ModelParams(layers=layers, out=out, config=cfg)


def empty_params(cfg: ModelConfig) -> ModelParams:
    """All-zero parameter container with the shapes cfg implies."""
    h = cfg.hidden_size
    layers = [
        LayerParams(
            w=np.zeros((4 * h, layer_input_size(cfg, k))),
            u=np.zeros((4 * h, h)),
            b=np.zeros(4 * h),
        )
        for k in range(cfg.num_layers)
    ]
    out = OutputParams(wy=np.zeros((cfg.vocab_size, h)), by=np.zeros(cfg.vocab_size))
    return ModelParams(layers=layers, out=out, config=cfg)


def zeros_like_params(params: ModelParams) -> ModelParams:
    """A params-shaped container of zeros (used for gradients and moments)."""
    return empty_params(params.config)


def lstm_cell_forward(x, h_prev, c_prev, params: LayerParams):
    """One LSTM timestep for a batch of input vectors.

    i = sigmoid(Wi x + Ui h_prev + bi)     f = sigmoid(Wf x + Uf h_prev + bf)
    o = sigmoid(Wo x + Uo h_prev + bo)     g = tanh(Wg x + Ug h_prev + bg)
    c = f*c_prev + i*g                     h = o*tanh(c)

    Returns (h, c, cache) where cache holds every intermediate needed to
    run the backward pass for this step.
    """
    x = np.asarray(x, dtype=np.float64)
    hsize = params.u.shape[1]
    if x.ndim != 2 or x.shape[1] != params.w.shape[1]:
        raise ValueError(f"input shape {x.shape} does not match weights {params.w.shape}")
    if h_prev.shape != (x.shape[0], hsize) or c_prev.shape != h_prev.shape:
        raise ValueError("state shape does not match input batch / hidden size")
    z = x @ params.w.T + h_prev @ params.u.T + params.b
    i = sigmoid(z[:, :hsize])
    f = sigmoid(z[:, hsize : 2 * hsize])
    o = sigmoid(z[:, 2 * hsize : 3 * hsize])
    g = tanh(z[:, 3 * hsize :])
    c = f * c_prev + i * g
    tc = tanh(c)
    h = o * tc
    cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev, "i": i, "f": f, "o": o,
             "g": g, "c": c, "tanh_c": tc}
    return h, c, cache


@dataclass
class ForwardCache:
    """Every intermediate of a train-mode forward, laid out per layer."""

    config: ModelConfig
    layer_inputs: list   # num_layers+1 arrays; entry k feeds layer k, last feeds the projection
    i: np.ndarray        # (num_layers, B, L, H)
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h_raw: np.ndarray    # pre-dropout layer outputs
    h0: np.ndarray       # (num_layers, B, H) state the segment started from
    c0: np.ndarray
    masks: list          # per layer: (B, H) inverted-dropout mask, or None
    probs: np.ndarray    # (B, L, V)


def forward(params: ModelParams, inputs, state: LstmState, mode: str = "train",
            rng: Rng = None):
    """Run the stack over a (B, L) id matrix.

    Per timestep: one-hot -> layer 0 -> dropout -> ... -> top layer ->
    dropout -> dense projection -> softmax.  Dropout is inverted (masks
    scaled by 1/keep), one mask per layer per segment, and disabled in
    eval mode.  Returns (probs, new_state, cache); cache is None in eval
    mode.

    The incoming state is read, never written; the returned state holds
    the final h and c of every layer.
    """
    cfg = params.config
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    ids = np.asarray(inputs)
    if ids.ndim != 2:
        raise ValueError(f"inputs must be (B, L), got shape {ids.shape}")
    bsz, seq_len = ids.shape
    if state.h.shape != (cfg.num_layers, bsz, cfg.hidden_size):
        raise ValueError(
            f"state shape {state.h.shape} does not match (layers={cfg.num_layers}, "
            f"B={bsz}, H={cfg.hidden_size})"
        )
    train = mode == "train"
    use_dropout = train and cfg.dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("train-mode forward with dropout > 0 requires an rng")

    hsz = cfg.hidden_size
    x = one_hot(ids, cfg.vocab_size)  # validates id range
    shape = (cfg.num_layers, bsz, seq_len, hsz)
    gi, gf, go, gg = (np.empty(shape) for _ in range(4))
    cs, tcs, hs = (np.empty(shape) for _ in range(3))
    layer_inputs = [x]
    masks = []
    new_h = np.empty((cfg.num_layers, bsz, hsz))
    new_c = np.empty((cfg.num_layers, bsz, hsz))

    for k, layer in enumerate(params.layers):
        xin = layer_inputs[k]
        zin = xin.reshape(bsz * seq_len, -1) @ layer.w.T
        zin = zin.reshape(bsz, seq_len, 4 * hsz) + layer.b
        h = state.h[k]
        c = state.c[k]
        for t in range(seq_len):
            z = zin[:, t, :] + h @ layer.u.T
            sig = sigmoid(z[:, : 3 * hsz])
            i = sig[:, :hsz]
            f = sig[:, hsz : 2 * hsz]
            o = sig[:, 2 * hsz :]
            g = tanh(z[:, 3 * hsz :])
            c = f * c + i * g
            tc = tanh(c)
            h = o * tc
            gi[k, :, t] = i
            gf[k, :, t] = f
            go[k, :, t] = o
            gg[k, :, t] = g
            cs[k, :, t] = c
            tcs[k, :, t] = tc
            hs[k, :, t] = h
        new_h[k] = h
        new_c[k] = c
        if use_dropout:
            keep = 1.0 - cfg.dropout
            mask = (rng.random((bsz, hsz)) < keep) / keep
            masks.append(mask)
            layer_inputs.append(hs[k] * mask[:, None, :])
        else:
            masks.append(None)
            layer_inputs.append(hs[k].copy())

    proj_in = layer_inputs[-1]
    logits = proj_in.reshape(bsz * seq_len, hsz) @ params.out.wy.T + params.out.by
    probs = softmax_rows(logits).reshape(bsz, seq_len, cfg.vocab_size)
    new_state = LstmState(h=new_h, c=new_c)

    if not train:
        return probs, new_state, None
    cache = ForwardCache(
        config=cfg, layer_inputs=layer_inputs, i=gi, f=gf, o=go, g=gg,
        c=cs, tanh_c=tcs, h_raw=hs, h0=state.h.copy(), c0=state.c.copy(),
        masks=masks, probs=probs,
    )
    return probs, new_state, cache


def loss_grad(probs, targets) -> np.ndarray:
    """d(mean cross-entropy)/d(logits): (probs - onehot) / (B*L)."""
    probs = np.asarray(probs)
    targets = np.asarray(targets)
    bsz, seq_len, vocab = probs.shape
    d = probs.reshape(-1, vocab).copy()
    d[np.arange(bsz * seq_len), targets.ravel()] -= 1.0
    return d.reshape(bsz, seq_len, vocab) / (bsz * seq_len)


def backward(params: ModelParams, cache: ForwardCache, dlogits) -> ModelParams:
    """Exact BPTT gradients for every tensor in `params`.

    `dlogits` is the (B, L, V) loss gradient at the pre-softmax outputs
    (see loss_grad).  Truncation boundary is the segment boundary: no
    gradient flows into the state the forward started from.  Returns the
    gradients in a params-shaped container.
    """
    cfg = params.config
    if cache.config != cfg:
        raise ValueError("cache was produced by a model with a different config")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    bsz, seq_len, _ = cache.probs.shape
    if dlogits.shape != (bsz, seq_len, cfg.vocab_size):
        raise ValueError(
            f"dlogits shape {dlogits.shape} does not match forward output "
            f"({bsz}, {seq_len}, {cfg.vocab_size})"
        )
    hsz = cfg.hidden_size
    grads = zeros_like_params(params)

    dflat = dlogits.reshape(bsz * seq_len, cfg.vocab_size)
    proj_in = cache.layer_inputs[-1].reshape(bsz * seq_len, hsz)
    grads.out.wy[:] = dflat.T @ proj_in
    grads.out.by[:] = dflat.sum(axis=0)
    dx = (dflat @ params.out.wy).reshape(bsz, seq_len, hsz)

    for k in reversed(range(cfg.num_layers)):
        layer = params.layers[k]
        mask = cache.masks[k]
        dh_seq = dx * mask[:, None, :] if mask is not None else dx
        i, f, o, g = cache.i[k], cache.f[k], cache.o[k], cache.g[k]
        tc = cache.tanh_c[k]
        c_prev = np.concatenate([cache.c0[k][:, None, :], cache.c[k][:, :-1]], axis=1)
        h_prev = np.concatenate([cache.h0[k][:, None, :], cache.h_raw[k][:, :-1]], axis=1)

        dz_seq = np.empty((bsz, seq_len, 4 * hsz))
        dh_rec = np.zeros((bsz, hsz))
        dc_rec = np.zeros((bsz, hsz))
        for t in reversed(range(seq_len)):
            dh = dh_seq[:, t] + dh_rec
            it, ft, ot, gt, tct = i[:, t], f[:, t], o[:, t], g[:, t], tc[:, t]
            dc = dc_rec + dh * ot * (1.0 - tct * tct)
            dzt = dz_seq[:, t]
            dzt[:, :hsz] = dc * gt * it * (1.0 - it)
            dzt[:, hsz : 2 * hsz] = dc * c_prev[:, t] * ft * (1.0 - ft)
            dzt[:, 2 * hsz : 3 * hsz] = dh * tct * ot * (1.0 - ot)
            dzt[:, 3 * hsz :] = dc * it * (1.0 - gt * gt)
            dc_rec = dc * ft
            dh_rec = dzt @ layer.u
        dz_flat = dz_seq.reshape(bsz * seq_len, 4 * hsz)
        x_flat = cache.layer_inputs[k].reshape(bsz * seq_len, -1)
        grads.layers[k].w[:] = dz_flat.T @ x_flat
        grads.layers[k].u[:] = dz_flat.T @ h_prev.reshape(bsz * seq_len, hsz)
        grads.layers[k].b[:] = dz_flat.sum(axis=0)
        if k > 0:
            dx = (dz_flat @ layer.w).reshape(bsz, seq_len, hsz)
    return grads


def loss_and_accuracy(probs, targets):
    """Mean cross-entropy and fraction of argmax hits over all positions.

    Argmax ties resolve toward the lowest id (numpy takes the first
    maximum).
    """
    probs = np.asarray(probs)
    targets = np.asarray(targets)
    if probs.shape[:2] != targets.shape:
        raise ValueError(f"probs {probs.shape} and targets {targets.shape} do not match")
    flat = probs.reshape(-1, probs.shape[-1])
    loss = cross_entropy(flat, targets.ravel())
    accuracy = float((flat.argmax(axis=1) == targets.ravel()).mean())
    return loss, accuracy
