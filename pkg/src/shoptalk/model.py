"""Miniature decoder-only transformer with exact manual gradients.

Forward pass: summed token + positional (+ optional segment) embeddings into
pre-layer-norm transformer blocks (causal self-attention, GELU feed-forward
of width 4d), a final layer norm, and a LM head tied to the token embedding.
Four small MLP classifier heads (d -> d/2 -> d/4 -> C with ReLU) read the
final hidden state at the belief terminator position.

Everything is plain numpy. Losses return float scalars; backward functions
return a gradient dict with exactly the parameter keys. Double precision is
used by the gradient checker; training may run in single precision.

All sequence operations accept a single sequence ``(T,)`` or a batch
``(B, T)``; results keep the batch layout internally. With end-padding,
causal attention and the loss masks make per-example results independent of
the padding, so batching is exactly equivalent to one-by-one processing.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import erf

N_SEGMENTS = 4
LN_EPS = 1e-5

# head name -> class count for the default domain manifests
DEFAULT_HEADS: tuple[tuple[str, int], ...] = (
    ("furniture_action", 7),
    ("furniture_attribute", 60),
    ("fashion_action", 5),
    ("fashion_attribute", 7),
)

# the fashion attribute head is multi-label; every other head is multi-class
MULTILABEL_HEADS = frozenset({"fashion_attribute"})


def head_kind(head_name: str) -> str:
    return "multilabel" if head_name in MULTILABEL_HEADS else "multiclass"


@dataclass(frozen=True)
class ModelConfig:
    """Shape configuration; immutable and JSON-serializable."""

    vocab_size: int
    model_dim: int = 64
    n_layers: int = 2
    n_heads: int = 2
    max_seq_len: int = 512
    use_segment_embedding: bool = True
    heads: tuple[tuple[str, int], ...] = DEFAULT_HEADS

    def __post_init__(self) -> None:
        if self.model_dim % self.n_heads:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by n_heads {self.n_heads}"
            )
        if self.model_dim % 4:
            raise ValueError(f"model_dim {self.model_dim} not divisible by 4")
        if self.vocab_size < 1 or self.max_seq_len < 1:
            raise ValueError("vocab_size and max_seq_len must be positive")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "model_dim": self.model_dim,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "max_seq_len": self.max_seq_len,
            "use_segment_embedding": self.use_segment_embedding,
            "heads": [list(h) for h in self.heads],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["heads"] = tuple((str(n), int(c)) for n, c in d["heads"])
        return cls(**d)


def init_params(cfg: ModelConfig, seed: int, dtype=np.float32) -> dict[str, np.ndarray]:
    """Fresh parameters: N(0, 0.02) weights, zero biases, unit layer-norm gains.

    The LM head is the token embedding itself (weight tying): there is no
    separate output matrix, so the tie holds by construction.
    """
    rng = np.random.default_rng(seed)
    d = cfg.model_dim

    def w(*shape):
        return rng.normal(0.0, 0.02, size=shape).astype(dtype)

    def zeros(*shape):
        return np.zeros(shape, dtype=dtype)

    def ones(*shape):
        return np.ones(shape, dtype=dtype)

    params: dict[str, np.ndarray] = {
        "wte": w(cfg.vocab_size, d),
        "wse": w(N_SEGMENTS, d),
        "wpe": w(cfg.max_seq_len, d),
    }
    for i in range(cfg.n_layers):
        p = f"h{i}."
        params[p + "ln1.g"] = ones(d)
        params[p + "ln1.b"] = zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[p + "attn." + name] = w(d, d)
        # no bias on the key projection: a per-key constant shifts every
        # score in a softmax row equally, so its gradient is identically zero
        for name in ("bq", "bv", "bo"):
            params[p + "attn." + name] = zeros(d)
        params[p + "ln2.g"] = ones(d)
        params[p + "ln2.b"] = zeros(d)
        params[p + "ff.w1"] = w(d, 4 * d)
        params[p + "ff.b1"] = zeros(4 * d)
        params[p + "ff.w2"] = w(4 * d, d)
        params[p + "ff.b2"] = zeros(d)
    params["ln_f.g"] = ones(d)
    params["ln_f.b"] = zeros(d)
    for name, n_classes in cfg.heads:
        p = f"head.{name}."
        params[p + "w1"] = w(d, d // 2)
        params[p + "b1"] = zeros(d // 2)
        params[p + "w2"] = w(d // 2, d // 4)
        params[p + "b2"] = zeros(d // 4)
        params[p + "w3"] = w(d // 4, n_classes)
        params[p + "b3"] = zeros(n_classes)
    return params


def zeros_like_params(params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(u: np.ndarray) -> np.ndarray:
    return 0.5 * u * (1.0 + erf(u * _INV_SQRT2))


def _gelu_grad(u: np.ndarray) -> np.ndarray:
    # d/du [u * Phi(u)] = Phi(u) + u * phi(u)
    phi = np.exp(-0.5 * u * u) * _INV_SQRT_2PI
    return 0.5 * (1.0 + erf(u * _INV_SQRT2)) + u * phi


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def _layer_norm_grad(dy: np.ndarray, cache):
    xhat, rstd, g = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = rstd * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def _linear_grads(x: np.ndarray, dy: np.ndarray, w: np.ndarray):
    """Gradients for y = x @ w + b with x: (..., i), dy: (..., o)."""
    xi = x.reshape(-1, x.shape[-1])
    dyo = dy.reshape(-1, dy.shape[-1])
    dw = xi.T @ dyo
    db = dyo.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------


@dataclass
class ForwardCache:
    """Everything the exact backward pass needs, plus H and the LM logits."""

    params: Mapping[str, np.ndarray] = field(repr=False)
    cfg: ModelConfig
    token_ids: np.ndarray  # (B, T) int
    segment_ids: np.ndarray  # (B, T) int
    layers: list[dict] = field(repr=False)
    hidden: np.ndarray  # (B, T, d) after the final layer norm
    ln_f_cache: tuple = field(repr=False)
    logits: np.ndarray  # (B, T, V)
    single: bool  # input was one sequence, not a batch

    def hidden_at(self, b: int, t: int) -> np.ndarray:
        return self.hidden[b, t]


def _as_batch(a, dtype) -> tuple[np.ndarray, bool]:
    arr = np.asarray(a, dtype=dtype)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected 1-D or 2-D sequence input, got shape {arr.shape}")


def forward(
    params: Mapping[str, np.ndarray],
    token_ids,
    segment_ids,
    cfg: ModelConfig,
) -> ForwardCache:
    """Run the transformer over ``(T,)`` or ``(B, T)`` token/segment ids."""
    ids, single = _as_batch(token_ids, np.int64)
    segs, _ = _as_batch(segment_ids, np.int64)
    if ids.shape != segs.shape:
        raise ValueError(f"token/segment shape mismatch: {ids.shape} vs {segs.shape}")
    B, T = ids.shape
    if T < 1 or T > cfg.max_seq_len:
        raise ValueError(f"sequence length {T} outside [1, {cfg.max_seq_len}]")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("token id out of range")
    if segs.min() < 0 or segs.max() >= N_SEGMENTS:
        raise ValueError("segment id out of range")

    wte, wpe = params["wte"], params["wpe"]
    x = wte[ids] + wpe[:T][None, :, :]
    if cfg.use_segment_embedding:
        x = x + params["wse"][segs]

    nh = cfg.n_heads
    dh = cfg.model_dim // nh
    scale = 1.0 / math.sqrt(dh)
    causal = np.tril(np.ones((T, T), dtype=bool))

    layers: list[dict] = []
    for i in range(cfg.n_layers):
        p = f"h{i}."
        x_in = x
        ln1_out, ln1_cache = _layer_norm(x_in, params[p + "ln1.g"], params[p + "ln1.b"])

        def heads_view(m):
            return m.reshape(B, T, nh, dh).transpose(0, 2, 1, 3)

        q = heads_view(ln1_out @ params[p + "attn.wq"] + params[p + "attn.bq"])
        k = heads_view(ln1_out @ params[p + "attn.wk"])
        v = heads_view(ln1_out @ params[p + "attn.wv"] + params[p + "attn.bv"])
        scores = np.where(causal, (q @ k.transpose(0, 1, 3, 2)) * scale, -np.inf)
        probs = _softmax(scores)
        ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(B, T, cfg.model_dim)
        att_out = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        x_mid = x_in + att_out

        ln2_out, ln2_cache = _layer_norm(x_mid, params[p + "ln2.g"], params[p + "ln2.b"])
        u = ln2_out @ params[p + "ff.w1"] + params[p + "ff.b1"]
        gu = _gelu(u)
        ff_out = gu @ params[p + "ff.w2"] + params[p + "ff.b2"]
        x = x_mid + ff_out

        layers.append(
            dict(
                ln1_out=ln1_out, ln1_cache=ln1_cache, q=q, k=k, v=v,
                probs=probs, ctx=ctx, x_mid=x_mid,
                ln2_out=ln2_out, ln2_cache=ln2_cache, u=u, gu=gu,
            )
        )

    hidden, ln_f_cache = _layer_norm(x, params["ln_f.g"], params["ln_f.b"])
    logits = hidden @ wte.T

    return ForwardCache(
        params=params, cfg=cfg, token_ids=ids, segment_ids=segs,
        layers=layers, hidden=hidden, ln_f_cache=ln_f_cache,
        logits=logits, single=single,
    )


def classifier_forward(
    params: Mapping[str, np.ndarray], head_name: str, hidden: np.ndarray
) -> np.ndarray:
    """MLP head logits for a ``(d,)`` or ``(B, d)`` hidden state."""
    p = f"head.{head_name}."
    a1 = np.maximum(hidden @ params[p + "w1"] + params[p + "b1"], 0.0)
    a2 = np.maximum(a1 @ params[p + "w2"] + params[p + "b2"], 0.0)
    return a2 @ params[p + "w3"] + params[p + "b3"]


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def lm_loss(logits, target_ids, loss_mask) -> float:
    """Masked next-token cross-entropy: mean of per-example masked means.

    ``logits[..., t, :]`` scores the token at target position t; callers align
    targets (inputs shifted left) and the mask before calling.
    """
    z, single = (logits[None], True) if np.asarray(logits).ndim == 2 else (logits, False)
    targets, _ = _as_batch(target_ids, np.int64)
    mask, _ = _as_batch(loss_mask, bool)
    z = np.asarray(z, dtype=np.float64)
    if mask.sum(axis=1).min() == 0:
        raise ValueError("an example has no unmasked target positions")
    logp = z - _log_sum_exp(z)
    B, T = targets.shape
    gold = logp[np.arange(B)[:, None], np.arange(T)[None, :], targets]
    per_example = -(gold * mask).sum(axis=1) / mask.sum(axis=1)
    return float(per_example.mean())


def _log_sum_exp(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def classification_loss(logits, label, kind: str = "multiclass") -> float:
    """Multi-class cross-entropy or multi-label mean binary cross-entropy."""
    z = np.asarray(logits, dtype=np.float64)
    if kind == "multiclass":
        zb = z[None] if z.ndim == 1 else z
        labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
        if labels.shape[0] != zb.shape[0]:
            raise ValueError(f"label count {labels.shape[0]} != batch {zb.shape[0]}")
        logp = zb - _log_sum_exp(zb)
        return float(-logp[np.arange(zb.shape[0]), labels].mean())
    if kind == "multilabel":
        zb = z[None] if z.ndim == 1 else z
        y = np.asarray(label, dtype=np.float64)
        y = y[None] if y.ndim == 1 else y
        if y.shape != zb.shape:
            raise ValueError(f"label shape {y.shape} != logits shape {zb.shape}")
        # softplus(z) - z*y, computed stably
        bce = np.maximum(zb, 0.0) - zb * y + np.log1p(np.exp(-np.abs(zb)))
        return float(bce.mean(axis=1).mean())
    raise ValueError(f"unknown head kind {kind!r}")


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------


def _body_backward(cache: ForwardCache, dH: np.ndarray) -> dict[str, np.ndarray]:
    """Backprop dLoss/dH (post final layer norm) down to all body parameters."""
    params, cfg = cache.params, cache.cfg
    ids, segs = cache.token_ids, cache.segment_ids
    B, T = ids.shape
    nh = cfg.n_heads
    dh_dim = cfg.model_dim // nh
    scale = 1.0 / math.sqrt(dh_dim)
    grads = zeros_like_params(params)

    dx, dg, db = _layer_norm_grad(dH, cache.ln_f_cache)
    grads["ln_f.g"] += dg
    grads["ln_f.b"] += db

    for i in reversed(range(cfg.n_layers)):
        p = f"h{i}."
        c = cache.layers[i]

        # x_out = x_mid + gelu(ln2(x_mid) @ w1 + b1) @ w2 + b2
        dgu, dw2, db2 = _linear_grads(c["gu"], dx, params[p + "ff.w2"])
        grads[p + "ff.w2"] += dw2
        grads[p + "ff.b2"] += db2
        du = dgu * _gelu_grad(c["u"])
        dln2, dw1, db1 = _linear_grads(c["ln2_out"], du, params[p + "ff.w1"])
        grads[p + "ff.w1"] += dw1
        grads[p + "ff.b1"] += db1
        dx_mid, dg2, db2n = _layer_norm_grad(dln2, c["ln2_cache"])
        grads[p + "ln2.g"] += dg2
        grads[p + "ln2.b"] += db2n
        dx_mid = dx_mid + dx

        # x_mid = x_in + (softmax(qk^T/sqrt(dh)) v, heads merged) @ wo + bo
        dctx, dwo, dbo = _linear_grads(c["ctx"], dx_mid, params[p + "attn.wo"])
        grads[p + "attn.wo"] += dwo
        grads[p + "attn.bo"] += dbo
        dctx = dctx.reshape(B, T, nh, dh_dim).transpose(0, 2, 1, 3)
        probs, q, k, v = c["probs"], c["q"], c["k"], c["v"]
        dprobs = dctx @ v.transpose(0, 1, 3, 2)
        dv = probs.transpose(0, 1, 3, 2) @ dctx
        dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
        dq = (dscores @ k) * scale
        dk = (dscores.transpose(0, 1, 3, 2) @ q) * scale

        def merge(m):
            return m.transpose(0, 2, 1, 3).reshape(B, T, cfg.model_dim)

        dln1 = np.zeros_like(c["ln1_out"])
        for name, dproj, bias in (("wq", dq, "bq"), ("wk", dk, None), ("wv", dv, "bv")):
            dxp, dw, dbv = _linear_grads(c["ln1_out"], merge(dproj), params[p + "attn." + name])
            grads[p + "attn." + name] += dw
            if bias is not None:
                grads[p + "attn." + bias] += dbv
            dln1 += dxp
        dx_in, dg1, db1n = _layer_norm_grad(dln1, c["ln1_cache"])
        grads[p + "ln1.g"] += dg1
        grads[p + "ln1.b"] += db1n
        dx = dx_in + dx_mid

    flat = dx.reshape(-1, cfg.model_dim)
    np.add.at(grads["wte"], ids.ravel(), flat)
    grads["wpe"][:T] += dx.sum(axis=0)
    if cfg.use_segment_embedding:
        np.add.at(grads["wse"], segs.ravel(), flat)
    return grads


def lm_backward(cache: ForwardCache, target_ids, loss_mask) -> tuple[float, dict]:
    """Loss and exact gradients for the masked LM objective."""
    targets, _ = _as_batch(target_ids, np.int64)
    mask, _ = _as_batch(loss_mask, bool)
    B, T = targets.shape
    if mask.sum(axis=1).min() == 0:
        raise ValueError("an example has no unmasked target positions")
    loss = lm_loss(cache.logits, targets, mask)

    probs = _softmax(np.asarray(cache.logits, dtype=np.float64))
    dlogits = probs
    dlogits[np.arange(B)[:, None], np.arange(T)[None, :], targets] -= 1.0
    weight = mask / mask.sum(axis=1, keepdims=True) / B
    dlogits *= weight[:, :, None]
    dlogits = dlogits.astype(cache.hidden.dtype)

    wte = cache.params["wte"]
    dH = dlogits @ wte
    grads = _body_backward(cache, dH)
    grads["wte"] += dlogits.reshape(-1, dlogits.shape[-1]).T @ cache.hidden.reshape(
        -1, cache.cfg.model_dim
    )
    return loss, grads


def classifier_backward(
    cache: ForwardCache, head_name: str, label, eob_index
) -> tuple[float, dict]:
    """Loss and exact gradients for one classifier head.

    ``eob_index`` is the belief-terminator position per example; the head
    reads the final hidden state there and its gradient flows through the
    whole transformer body.
    """
    params, cfg = cache.params, cache.cfg
    B = cache.token_ids.shape[0]
    eob = np.atleast_1d(np.asarray(eob_index, dtype=np.int64))
    if eob.shape[0] != B:
        raise ValueError(f"eob_index count {eob.shape[0]} != batch {B}")
    h = cache.hidden[np.arange(B), eob]  # (B, d)

    p = f"head.{head_name}."
    z1 = h @ params[p + "w1"] + params[p + "b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params[p + "w2"] + params[p + "b2"]
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ params[p + "w3"] + params[p + "b3"]

    kind = head_kind(head_name)
    loss = classification_loss(logits, label, kind)
    if kind == "multiclass":
        labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
        dz3 = _softmax(np.asarray(logits, dtype=np.float64))
        dz3[np.arange(B), labels] -= 1.0
        dz3 /= B
    else:
        y = np.asarray(label, dtype=np.float64)
        y = y[None] if y.ndim == 1 else y
        sig = 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))
        dz3 = (sig - y) / (y.shape[1] * B)
    dz3 = dz3.astype(h.dtype)

    grads = zeros_like_params(params)
    da2, dw3, db3 = _linear_grads(a2, dz3, params[p + "w3"])
    grads[p + "w3"] += dw3
    grads[p + "b3"] += db3
    dz2 = da2 * (z2 > 0)
    da1, dw2, db2 = _linear_grads(a1, dz2, params[p + "w2"])
    grads[p + "w2"] += dw2
    grads[p + "b2"] += db2
    dz1 = da1 * (z1 > 0)
    dh, dw1, db1 = _linear_grads(h, dz1, params[p + "w1"])
    grads[p + "w1"] += dw1
    grads[p + "b1"] += db1

    dH = np.zeros_like(cache.hidden)
    dH[np.arange(B), eob] = dh
    body = _body_backward(cache, dH)
    for key, g in body.items():
        grads[key] += g
    return loss, grads


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def grad_check(cfg: ModelConfig, seed: int, task: str = "lm", n_coords: int = 600) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``task`` is "lm" or a head name. Samples coordinates from every parameter
    tensor (at least ``n_coords`` total) in double precision with ε=1e-5;
    relative error is |g_a − g_fd| / max(1e-8, |g_a| + |g_fd|).

    The check evaluates at a widened random parameter point (weights around
    0.3) rather than the production init: at 0.02 scale a d=16 model's
    attention is near-uniform and the q/k gradients (~1e-7) fall below what
    ε=1e-5 central differences can resolve in double precision. Gradient
    correctness is a property of the code, not of the evaluation point.
    """
    rng = np.random.default_rng(seed)
    params = init_params(cfg, seed, dtype=np.float64)
    for name, tensor in params.items():
        if tensor.ndim >= 2 or name.endswith((".b", ".g")):
            noise = rng.normal(0.0, 0.3 if tensor.ndim >= 2 else 0.05, size=tensor.shape)
            params[name] = tensor + noise
        else:
            params[name] = tensor + rng.normal(0.0, 0.05, size=tensor.shape)
    T = min(cfg.max_seq_len, 12)
    ids = rng.integers(0, cfg.vocab_size, size=T)
    segs = rng.integers(0, N_SEGMENTS, size=T)

    if task == "lm":
        targets = rng.integers(0, cfg.vocab_size, size=T)
        mask = rng.random(T) < 0.7
        if not mask.any():
            mask[-1] = True

        def loss_of(p):
            return lm_loss(forward(p, ids, segs, cfg).logits[0], targets, mask)

        _, grads = lm_backward(forward(params, ids, segs, cfg), targets, mask)
    else:
        n_classes = dict(cfg.heads)[task]
        eob = T // 2
        if head_kind(task) == "multilabel":
            label = rng.integers(0, 2, size=n_classes).astype(np.float64)
        else:
            label = int(rng.integers(0, n_classes))

        def loss_of(p):
            cache = forward(p, ids, segs, cfg)
            logits = classifier_forward(p, task, cache.hidden[0, eob])
            return classification_loss(logits, label, head_kind(task))

        _, grads = classifier_backward(forward(params, ids, segs, cfg), task, label, eob)

    eps = 1e-5
    per_tensor = max(1, math.ceil(n_coords / len(params)))
    worst = 0.0
    for name in sorted(params):
        tensor = params[name]
        size = tensor.size
        picks = rng.choice(size, size=min(per_tensor, size), replace=False)
        for flat_idx in picks:
            idx = np.unravel_index(flat_idx, tensor.shape)
            keep = tensor[idx]
            tensor[idx] = keep + eps
            up = loss_of(params)
            tensor[idx] = keep - eps
            down = loss_of(params)
            tensor[idx] = keep
            g_fd = (up - down) / (2 * eps)
            g_a = float(grads[name][idx])
            rel = abs(g_a - g_fd) / max(1e-8, abs(g_a) + abs(g_fd))
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    params: Mapping[str, np.ndarray],
    cfg: ModelConfig,
    extra: dict | None = None,
) -> None:
    """Binary container: u64 header length, JSON header, raw LE payloads."""
    names = sorted(params)
    manifest = []
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(params[name])
        if not np.isfinite(arr).all():
            raise ValueError(f"non-finite values in parameter {name!r}")
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = le.tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": arr.dtype.newbyteorder("<").str,
                "offset": offset,
            }
        )
        offset += len(blob)
        blobs.append(blob)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": cfg.to_dict(),
        "tensors": manifest,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], ModelConfig, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise ValueError(f"checkpoint {path} is truncated")
    (header_len,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('format_version')}")
    cfg = ModelConfig.from_dict(header["model_config"])
    payload = raw[8 + header_len :]
    params: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        stop = start + count * dtype.itemsize
        arr = np.frombuffer(payload[start:stop], dtype=dtype).reshape(entry["shape"])
        params[entry["name"]] = arr.astype(dtype.newbyteorder("="), copy=True)
    return params, cfg, header.get("extra", {})
