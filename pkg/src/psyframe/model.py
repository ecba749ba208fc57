"""From-scratch transformer classifier over per-channel feature tokens.

The network is small enough to train on a laptop in seconds: each of the 14
channels contributes one 13-dim token, a learned summary token is prepended,
and two pre-norm self-attention blocks feed a 5-way linear head read off the
summary position. Everything runs in float64 numpy with hand-written
backpropagation; gradients are exact, which the finite-difference tests
exploit.

Feature vectors are standardized inside the model using per-slot mean/scale
fitted at training time and stored with the weights, so a saved model is
self-contained.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import erf

from .features import FEATURE_LAYOUT_ID, FEATURES_PER_CHANNEL, assemble_features
from .fileio import decode_array, encode_array, read_manifest, write_ndjson
from .signal_core import N_CHANNELS, design_bandpass, preprocess
from .synth import N_CLASSES, Dataset, noise_window

_LN_EPS = 1e-5
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Pseudo-label for rest-state rows: the trainer drives their posterior toward
# uniform so background windows cannot build integrator charge.
REST_LABEL = -1


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_heads: int = 2
    n_layers: int = 2
    token_dim: int = FEATURES_PER_CHANNEL
    n_channel_tokens: int = N_CHANNELS
    n_classes: int = N_CLASSES
    d_ff: int = 128
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes must be {N_CLASSES}")
        if self.dropout != 0.0:
            raise ValueError("dropout is fixed at 0 at this scale")

    @property
    def n_tokens(self) -> int:
        # channel tokens plus the class-summary token
        return self.n_channel_tokens + 1

    @property
    def feature_dim(self) -> int:
        return self.n_channel_tokens * self.token_dim


def _array_specs(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Trainable array names and shapes, in canonical order."""
    d, f = cfg.d_model, cfg.d_ff
    specs: list[tuple[str, tuple[int, ...]]] = [
        ("proj_w", (cfg.token_dim, d)),
        ("proj_b", (d,)),
        ("summary", (d,)),
        ("token_bias", (cfg.n_channel_tokens, d)),
    ]
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        specs += [
            (p + "ln1_g", (d,)),
            (p + "ln1_b", (d,)),
            (p + "wq", (d, d)),
            (p + "bq", (d,)),
            (p + "wk", (d, d)),
            (p + "bk", (d,)),
            (p + "wv", (d, d)),
            (p + "bv", (d,)),
            (p + "wo", (d, d)),
            (p + "bo", (d,)),
            (p + "ln2_g", (d,)),
            (p + "ln2_b", (d,)),
            (p + "ff_w1", (d, f)),
            (p + "ff_b1", (f,)),
            (p + "ff_w2", (f, d)),
            (p + "ff_b2", (d,)),
        ]
    specs += [
        ("ln_f_g", (d,)),
        ("ln_f_b", (d,)),
        ("head_w", (d, cfg.n_classes)),
        ("head_b", (cfg.n_classes,)),
    ]
    return specs


def glorot_limit(shape: tuple[int, ...]) -> float:
    """Uniform init bound sqrt(6 / (fan_in + fan_out)); vectors count fan_in 1."""
    if len(shape) == 1:
        fan_in, fan_out = 1, shape[0]
    else:
        fan_in, fan_out = shape[0], shape[1]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


@dataclass(frozen=True)
class Weights:
    """Named parameter arrays plus the fitted feature standardization."""

    config: ModelConfig
    arrays: dict[str, np.ndarray]
    feat_mu: np.ndarray
    feat_sigma: np.ndarray
    layout_id: str = FEATURE_LAYOUT_ID
    seed: int = 0

    def __post_init__(self) -> None:
        expected = dict(_array_specs(self.config))
        if set(self.arrays) != set(expected):
            missing = set(expected) - set(self.arrays)
            extra = set(self.arrays) - set(expected)
            raise ValueError(f"weight arrays mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, a in self.arrays.items():
            if a.shape != expected[name]:
                raise ValueError(f"{name}: expected shape {expected[name]}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name}: contains non-finite values")
        for name, a in (("feat_mu", self.feat_mu), ("feat_sigma", self.feat_sigma)):
            if a.shape != (self.config.feature_dim,) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name}: bad shape or non-finite values")

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "Weights":
        return replace(self, arrays=arrays)

    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))


def init_weights(cfg: ModelConfig, seed: int) -> Weights:
    """Glorot-uniform matrices, zero biases, unit layer-norm gains.

    The summary embedding and per-channel token biases are initialized like
    matrices (not zeroed): they are what makes token positions distinguishable
    to the otherwise permutation-equivariant attention stack.
    """
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in _array_specs(cfg):
        base = name.split(".")[-1]
        if base.endswith("_g"):
            arrays[name] = np.ones(shape)
        elif base.startswith("b") or base.endswith("_b"):
            arrays[name] = np.zeros(shape)
        elif base == "summary":
            limit = glorot_limit((1, shape[0]))
            arrays[name] = rng.uniform(-limit, limit, size=shape)
        else:
            limit = glorot_limit(shape)
            arrays[name] = rng.uniform(-limit, limit, size=shape)
    return Weights(
        config=cfg,
        arrays=arrays,
        feat_mu=np.zeros(cfg.feature_dim),
        feat_sigma=np.ones(cfg.feature_dim),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _layernorm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_backward(dy: np.ndarray, cache, g: np.ndarray):
    xhat, inv = cache
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    axes = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(axis=axes), dy.sum(axis=axes)


def _gelu(u: np.ndarray) -> np.ndarray:
    return 0.5 * u * (1.0 + erf(u / np.sqrt(2.0)))


def _gelu_prime(u: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(u / np.sqrt(2.0))) + u * np.exp(-0.5 * u * u) * _INV_SQRT_2PI


def _linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x: (..., in) @ (in, out) + (out,)
    return x @ w + b


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _forward_tokens(w: Weights, x_feat: np.ndarray, want_cache: bool):
    """Run the full network. Returns (logits, cache or None)."""
    cfg = w.config
    a = w.arrays
    B = x_feat.shape[0]
    z = (x_feat - w.feat_mu) / w.feat_sigma
    tok_in = z.reshape(B, cfg.n_channel_tokens, cfg.token_dim)
    proj = _linear(tok_in, a["proj_w"], a["proj_b"]) + a["token_bias"]
    x = np.concatenate([np.broadcast_to(a["summary"], (B, 1, cfg.d_model)), proj], axis=1)

    scale = 1.0 / np.sqrt(cfg.d_model // cfg.n_heads)
    layer_caches = []
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        h1, c_ln1 = _layernorm(x, a[p + "ln1_g"], a[p + "ln1_b"])
        q = _linear(h1, a[p + "wq"], a[p + "bq"])
        k = _linear(h1, a[p + "wk"], a[p + "bk"])
        v = _linear(h1, a[p + "wv"], a[p + "bv"])
        qh, kh, vh = (_split_heads(m, cfg.n_heads) for m in (q, k, v))
        attn = softmax(np.matmul(qh, kh.transpose(0, 1, 3, 2)) * scale)
        oh = np.matmul(attn, vh)
        o = _merge_heads(oh)
        x1 = x + _linear(o, a[p + "wo"], a[p + "bo"])
        h2, c_ln2 = _layernorm(x1, a[p + "ln2_g"], a[p + "ln2_b"])
        u = _linear(h2, a[p + "ff_w1"], a[p + "ff_b1"])
        gelu_u = _gelu(u)
        x = x1 + _linear(gelu_u, a[p + "ff_w2"], a[p + "ff_b2"])
        if want_cache:
            layer_caches.append((h1, c_ln1, qh, kh, vh, attn, o, x1, h2, c_ln2, u, gelu_u))

    s, c_lnf = _layernorm(x[:, 0], a["ln_f_g"], a["ln_f_b"])
    logits = _linear(s, a["head_w"], a["head_b"])
    cache = (z, tok_in, layer_caches, x, s, c_lnf) if want_cache else None
    return logits, cache


def _check_features(f: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    squeeze = f.ndim == 1
    if squeeze:
        f = f[None, :]
    if f.ndim != 2 or f.shape[1] != cfg.feature_dim:
        raise ValueError(
            f"feature input must have {cfg.feature_dim} columns "
            f"(layout {FEATURE_LAYOUT_ID}), got shape {f.shape}"
        )
    if not np.all(np.isfinite(f)):
        raise ValueError("feature input contains non-finite values")
    return f


def forward(w: Weights, f: np.ndarray) -> np.ndarray:
    """Logits for one feature vector (5,) or a batch (B, 5)."""
    x = _check_features(f, w.config)
    logits, _ = _forward_tokens(w, x, want_cache=False)
    return logits[0] if np.asarray(f).ndim == 1 else logits


def posterior(w: Weights, f: np.ndarray) -> np.ndarray:
    """Softmax class probabilities; sums to 1 within float round-off."""
    return softmax(forward(w, f), axis=-1)


def loss_ce(logits: np.ndarray, label: int) -> float:
    """Cross-entropy of one sample, stabilized with log-sum-exp."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (N_CLASSES,) or not np.all(np.isfinite(logits)):
        raise ValueError(f"logits must be a finite ({N_CLASSES},) array")
    m = logits.max()
    lse = m + np.log(np.exp(logits - m).sum())
    return float(lse - logits[int(label)])


def _loss_and_grads(w: Weights, x_feat: np.ndarray, y: np.ndarray):
    # Rows with label REST_LABEL train against the uniform distribution
    # (rest-state regularization); ordinary rows use their one-hot target.
    cfg = w.config
    a = w.arrays
    B = x_feat.shape[0]
    logits, cache = _forward_tokens(w, x_feat, want_cache=True)
    z, tok_in, layer_caches, x_final, s, c_lnf = cache

    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    probs = np.exp(logits - lse)

    targets = np.full((B, N_CLASSES), 1.0 / N_CLASSES)
    hard = y != REST_LABEL
    targets[hard] = 0.0
    targets[np.flatnonzero(hard), y[hard]] = 1.0
    loss = float((lse[:, 0] - (targets * logits).sum(axis=1)).mean())
    dlogits = (probs - targets) / B

    g: dict[str, np.ndarray] = {}
    g["head_w"] = s.T @ dlogits
    g["head_b"] = dlogits.sum(axis=0)
    ds = dlogits @ a["head_w"].T
    dx0, g["ln_f_g"], g["ln_f_b"] = _layernorm_backward(ds, c_lnf, a["ln_f_g"])

    dx = np.zeros_like(x_final)
    dx[:, 0] = dx0

    scale = 1.0 / np.sqrt(cfg.d_model // cfg.n_heads)
    for i in reversed(range(cfg.n_layers)):
        p = f"layer{i}."
        h1, c_ln1, qh, kh, vh, attn, o, x1, h2, c_ln2, u, gelu_u = layer_caches[i]

        # feed-forward residual: x = x1 + gelu(h2 w1 + b1) w2 + b2
        df = dx
        flat_g = gelu_u.reshape(-1, cfg.d_ff)
        flat_df = df.reshape(-1, cfg.d_model)
        g[p + "ff_w2"] = flat_g.T @ flat_df
        g[p + "ff_b2"] = flat_df.sum(axis=0)
        dgelu = df @ a[p + "ff_w2"].T
        du = dgelu * _gelu_prime(u)
        flat_h2 = h2.reshape(-1, cfg.d_model)
        flat_du = du.reshape(-1, cfg.d_ff)
        g[p + "ff_w1"] = flat_h2.T @ flat_du
        g[p + "ff_b1"] = flat_du.sum(axis=0)
        dh2 = du @ a[p + "ff_w1"].T
        dln2, g[p + "ln2_g"], g[p + "ln2_b"] = _layernorm_backward(dh2, c_ln2, a[p + "ln2_g"])
        dx1 = dx + dln2

        # attention residual: x1 = x + (merge(attn @ vh) wo + bo)
        da = dx1
        flat_o = o.reshape(-1, cfg.d_model)
        flat_da = da.reshape(-1, cfg.d_model)
        g[p + "wo"] = flat_o.T @ flat_da
        g[p + "bo"] = flat_da.sum(axis=0)
        do = _split_heads(da @ a[p + "wo"].T, cfg.n_heads)
        dattn = np.matmul(do, vh.transpose(0, 1, 3, 2))
        dvh = np.matmul(attn.transpose(0, 1, 3, 2), do)
        dscores = (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * attn
        dqh = np.matmul(dscores, kh) * scale
        dkh = np.matmul(dscores.transpose(0, 1, 3, 2), qh) * scale
        dq, dk, dv = (_merge_heads(m) for m in (dqh, dkh, dvh))
        flat_h1 = h1.reshape(-1, cfg.d_model)
        dh1 = np.zeros_like(h1)
        for nm, dm in (("wq", dq), ("wk", dk), ("wv", dv)):
            flat_dm = dm.reshape(-1, cfg.d_model)
            g[p + nm] = flat_h1.T @ flat_dm
            g[p + "b" + nm[1]] = flat_dm.sum(axis=0)
            dh1 += dm @ a[p + nm].T
        dln1, g[p + "ln1_g"], g[p + "ln1_b"] = _layernorm_backward(dh1, c_ln1, a[p + "ln1_g"])
        dx = dx1 + dln1

    g["summary"] = dx[:, 0].sum(axis=0)
    dproj = dx[:, 1:]
    g["token_bias"] = dproj.sum(axis=0)
    flat_tok = tok_in.reshape(-1, cfg.token_dim)
    flat_dproj = dproj.reshape(-1, cfg.d_model)
    g["proj_w"] = flat_tok.T @ flat_dproj
    g["proj_b"] = flat_dproj.sum(axis=0)
    return loss, g


def gradients(w: Weights, batch: list[tuple[np.ndarray, int]]) -> dict[str, np.ndarray]:
    """Exact gradient of the mean batch cross-entropy for every weight array."""
    if not batch:
        raise ValueError("batch must be non-empty")
    x = np.stack([_check_features(f, w.config)[0] for f, _ in batch])
    y = np.asarray([int(label) for _, label in batch])
    _, g = _loss_and_grads(w, x, y)
    return g


def batch_loss(w: Weights, batch: list[tuple[np.ndarray, int]]) -> float:
    """Mean cross-entropy of a batch (forward only)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    x = np.stack([_check_features(f, w.config)[0] for f, _ in batch])
    y = np.asarray([int(label) for _, label in batch])
    logits, _ = _forward_tokens(w, x, want_cache=False)
    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    return float((lse[:, 0] - logits[np.arange(len(y)), y]).mean())


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros(cls, w: Weights) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(a) for k, a in w.arrays.items()},
            v={k: np.zeros_like(a) for k, a in w.arrays.items()},
        )


def adam_step(
    w: Weights,
    g: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[Weights, AdamState]:
    """One bias-corrected Adam update; purely functional."""
    if set(g) != set(w.arrays):
        raise ValueError("gradient keys do not match weight arrays")
    t = state.step + 1
    new_arrays: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for k, a in w.arrays.items():
        gk = g[k]
        mk = beta1 * state.m[k] + (1.0 - beta1) * gk
        vk = beta2 * state.v[k] + (1.0 - beta2) * gk * gk
        m_hat = mk / (1.0 - beta1**t)
        v_hat = vk / (1.0 - beta2**t)
        new_arrays[k] = a - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[k] = mk
        new_v[k] = vk
    return w.with_arrays(new_arrays), AdamState(step=t, m=new_m, v=new_v)


# ---------------------------------------------------------------------------
# Training / evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass(frozen=True)
class TrainReport:
    epochs: tuple[EpochStats, ...]
    n_train: int
    n_val: int
    n_rest: int
    seed: int
    layout_id: str
    config: ModelConfig

    @property
    def final_val_accuracy(self) -> float:
        return self.epochs[-1].val_accuracy if self.epochs else 0.0

    def to_dict(self) -> dict:
        return {
            "format": "psyframe-train-report",
            "v": 1,
            "layout_id": self.layout_id,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_rest": self.n_rest,
            "config": asdict(self.config),
            "final_val_accuracy": self.final_val_accuracy,
            "epochs": [asdict(e) for e in self.epochs],
        }


def dataset_features(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Band-pass + z-score every window, then extract features.

    Mirrors the online decode path so train-time and run-time inputs match.
    """
    filt = design_bandpass(1.0, 50.0, 128.0, 4)
    x = np.stack([assemble_features(preprocess(w, filt)) for w in d.windows])
    y = np.asarray(d.labels, dtype=np.int64)
    return x, y


def _accuracy(w: Weights, x: np.ndarray, y: np.ndarray) -> float:
    logits, _ = _forward_tokens(w, x, want_cache=False)
    return float((logits.argmax(axis=1) == y).mean())


def train(
    d_train: Dataset,
    d_val: Dataset,
    cfg: ModelConfig = ModelConfig(),
    epochs: int = 30,
    batch_size: int = 16,
    lr: float = 1e-3,
    seed: int = 0,
    rest_fraction: float = 0.2,
) -> tuple[Weights, TrainReport]:
    """Mini-batch Adam training; deterministic given (datasets, config, seed).

    rest_fraction controls how many extra background-only windows (relative
    to the training set size) are mixed in with uniform soft targets. This
    keeps the classifier noncommittal on rest-state input instead of
    hallucinating a confident class, which in turn keeps the downstream
    integrator quiet when nothing is being imagined.
    """
    if d_train.layout_id != d_val.layout_id or d_train.layout_id != FEATURE_LAYOUT_ID:
        raise ValueError(
            f"dataset layout ids {d_train.layout_id!r}/{d_val.layout_id!r} "
            f"do not match {FEATURE_LAYOUT_ID!r}"
        )
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if not 0.0 <= rest_fraction <= 1.0:
        raise ValueError("rest_fraction must be in [0, 1]")
    x_train, y_train = dataset_features(d_train)
    x_val, y_val = dataset_features(d_val)
    n_labeled = x_train.shape[0]

    n_rest = int(round(rest_fraction * x_train.shape[0]))
    if n_rest:
        filt = design_bandpass(1.0, 50.0, 128.0, 4)
        rest = np.stack(
            [
                assemble_features(preprocess(noise_window(seed * 1_000_003 + i), filt))
                for i in range(n_rest)
            ]
        )
        x_train = np.concatenate([x_train, rest])
        y_train = np.concatenate([y_train, np.full(n_rest, REST_LABEL, dtype=np.int64)])

    mu = x_train.mean(axis=0)
    sigma = x_train.std(axis=0)
    sigma = np.where(sigma < 1e-8, 1.0, sigma)
    w = replace(init_weights(cfg, seed), feat_mu=mu, feat_sigma=sigma)

    state = AdamState.zeros(w)
    n = x_train.shape[0]
    stats: list[EpochStats] = []
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng([seed, 7, epoch]).permutation(n)
        loss_sum = 0.0
        for lo_idx in range(0, n, batch_size):
            sel = order[lo_idx : lo_idx + batch_size]
            loss, g = _loss_and_grads(w, x_train[sel], y_train[sel])
            w, state = adam_step(w, g, state, lr=lr)
            loss_sum += loss * len(sel)
        stats.append(
            EpochStats(
                epoch=epoch,
                train_loss=loss_sum / n,
                val_accuracy=_accuracy(w, x_val, y_val),
            )
        )
    report = TrainReport(
        epochs=tuple(stats),
        n_train=n_labeled,
        n_val=x_val.shape[0],
        n_rest=n_rest,
        seed=seed,
        layout_id=d_train.layout_id,
        config=cfg,
    )
    return w, report


def evaluate(w: Weights, d: Dataset) -> tuple[float, np.ndarray]:
    """Accuracy and 5x5 confusion counts (row = true class, column = predicted)."""
    if len(d) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    if d.layout_id != w.layout_id:
        raise ValueError(f"dataset layout {d.layout_id!r} does not match weights {w.layout_id!r}")
    x, y = dataset_features(d)
    logits, _ = _forward_tokens(w, x, want_cache=False)
    pred = logits.argmax(axis=1)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for truth, guess in zip(y, pred):
        confusion[truth, guess] += 1
    return float(np.trace(confusion) / confusion.sum()), confusion


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

WEIGHTS_FORMAT = "psyframe-weights"


def save_weights(path, w: Weights) -> None:
    """Manifest line + one base64 array record per named array; bit-exact."""

    def lines():
        yield {
            "type": "manifest",
            "format": WEIGHTS_FORMAT,
            "v": 1,
            "layout_id": w.layout_id,
            "seed": w.seed,
            "config": asdict(w.config),
        }
        for name in sorted(w.arrays):
            yield encode_array(name, w.arrays[name])
        yield encode_array("feat_mu", w.feat_mu)
        yield encode_array("feat_sigma", w.feat_sigma)

    write_ndjson(path, lines())


def load_weights(path) -> Weights:
    manifest, records = read_manifest(path, WEIGHTS_FORMAT)
    cfg = ModelConfig(**manifest["config"])
    arrays: dict[str, np.ndarray] = {}
    for rec in records:
        if rec.get("type") != "array":
            raise ValueError(f"unexpected record type {rec.get('type')!r} in weights file")
        arrays[rec["name"]] = decode_array(rec)
    feat_mu = arrays.pop("feat_mu")
    feat_sigma = arrays.pop("feat_sigma")
    return Weights(
        config=cfg,
        arrays=arrays,
        feat_mu=feat_mu,
        feat_sigma=feat_sigma,
        layout_id=manifest["layout_id"],
        seed=int(manifest["seed"]),
    )
