"""Small randomly initialized encoder plus the keyword-attentive layer, with
manual float64 forward and backward passes.

The keyword-attentive layer is a standard transformer layer whose attention
mask restricts each sentence's tokens to the other sentence's keyword
positions; it runs in parallel to the encoder's last layer (its input is the
hidden state feeding that layer) unless configured to stack on top instead.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from kwmatch.kwattn.packing import PackedPair, build_cross_mask, build_keyword_mask

LN_EPS = 1e-5
NEG_INF = -1e9

MASK_MODES = ("keyword", "cross_all")

MODEL_MAGIC = b"KWAT"
MODEL_VERSION = 1

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d: int = 32
    heads: int = 4
    layers: int = 2
    max_len: int = 64
    ff_mult: int = 4
    parallel_kwattn: bool = True
    mask_mode: str = "keyword"

    def __post_init__(self):
        if self.d % self.heads:
            raise ValueError("hidden width must be divisible by head count")
        if self.layers < 1:
            raise ValueError("need at least one encoder layer")
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"unknown mask mode: {self.mask_mode!r}")


@dataclass
class LayerParams:
    """One transformer layer: per-head q/k/v projections packed into d x d
    matrices, output projection, feed-forward, and the two layer norms.

    The key projection has no bias: a shared key offset shifts every logit in
    an attention row equally, which the softmax cancels exactly, so such a
    bias could never receive gradient.
    """

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray


LAYER_FIELDS = tuple(f.name for f in fields(LayerParams))


@dataclass
class KwAttnModel:
    cfg: ModelConfig
    tok_emb: np.ndarray  # (vocab, d)
    pos_emb: np.ndarray  # (max_len, d)
    enc_layers: list[LayerParams]
    kw_layer: LayerParams
    head_w: np.ndarray  # (5d, 2)
    head_b: np.ndarray  # (2,)


def _init_layer(rng: np.random.Generator, d: int, ff: int, std: float) -> LayerParams:
    def w(*shape):
        return rng.normal(0.0, std, size=shape)

    return LayerParams(
        wq=w(d, d), bq=np.zeros(d), wk=w(d, d),
        wv=w(d, d), bv=np.zeros(d), wo=w(d, d), bo=np.zeros(d),
        w1=w(d, ff), b1=np.zeros(ff), w2=w(ff, d), b2=np.zeros(d),
        ln1_g=np.ones(d), ln1_b=np.zeros(d), ln2_g=np.ones(d), ln2_b=np.zeros(d),
    )


def init_model(cfg: ModelConfig, seed: int = 0, std: float = 0.02) -> KwAttnModel:
    """Normal(0, std) embeddings and projections, zero head.

    The 0.02 default suits loading pretrained-style weights; training from
    scratch on toy tasks converges better around 0.1-0.3.
    """
    rng = np.random.default_rng(seed)
    ff = cfg.ff_mult * cfg.d
    return KwAttnModel(
        cfg=cfg,
        tok_emb=rng.normal(0.0, std, size=(cfg.vocab_size, cfg.d)),
        pos_emb=rng.normal(0.0, std, size=(cfg.max_len, cfg.d)),
        enc_layers=[_init_layer(rng, cfg.d, ff, std) for _ in range(cfg.layers)],
        kw_layer=_init_layer(rng, cfg.d, ff, std),
        head_w=np.zeros((5 * cfg.d, 2)),
        head_b=np.zeros(2),
    )


def named_parameters(model: KwAttnModel) -> dict[str, np.ndarray]:
    """Live views of every parameter tensor, keyed by stable names."""
    params = {"tok_emb": model.tok_emb, "pos_emb": model.pos_emb}
    for i, layer in enumerate(model.enc_layers):
        for name in LAYER_FIELDS:
            params[f"enc{i}.{name}"] = getattr(layer, name)
    for name in LAYER_FIELDS:
        params[f"kw.{name}"] = getattr(model.kw_layer, name)
    params["head_w"] = model.head_w
    params["head_b"] = model.head_b
    return params


def _gelu(u):
    t = np.tanh(_GELU_C * (u + _GELU_K * u**3))
    return 0.5 * u * (1.0 + t)


def _gelu_grad(u):
    t = np.tanh(_GELU_C * (u + _GELU_K * u**3))
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t**2) * _GELU_C * (1.0 + 3.0 * _GELU_K * u**2)


def _layer_norm(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv
    return gain * xhat + bias, (xhat, inv)


def _layer_norm_backward(dy, gain, cache):
    xhat, inv = cache
    d_gain = (dy * xhat).sum(axis=0)
    d_bias = dy.sum(axis=0)
    dxhat = dy * gain
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, d_gain, d_bias


def _split_heads(x, heads):
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(xh):
    heads, n, dh = xh.shape
    return xh.transpose(1, 0, 2).reshape(n, heads * dh)


def _attention_forward(x, layer: LayerParams, mask, heads):
    """Multi-head attention with additive masking; weights on disallowed
    positions are forced to exactly zero after the softmax."""
    scale = 1.0 / math.sqrt(x.shape[1] // heads)
    q = x @ layer.wq + layer.bq
    k = x @ layer.wk
    v = x @ layer.wv + layer.bv
    qh, kh, vh = (_split_heads(m, heads) for m in (q, k, v))
    scores = qh @ kh.transpose(0, 2, 1) * scale
    scores = scores + np.where(mask, 0.0, NEG_INF)
    weights = np.exp(scores - scores.max(axis=-1, keepdims=True))
    weights /= weights.sum(axis=-1, keepdims=True)
    weights = weights * mask  # exact-zero post-check
    ctx = _merge_heads(weights @ vh)
    out = ctx @ layer.wo + layer.bo
    cache = (x, qh, kh, vh, weights, ctx, scale)
    return out, cache


def _attention_backward(d_out, layer: LayerParams, cache, heads, grads, prefix, internals=None):
    x, qh, kh, vh, weights, ctx, scale = cache
    grads[f"{prefix}wo"] = ctx.T @ d_out
    grads[f"{prefix}bo"] = d_out.sum(axis=0)
    d_ctx = _split_heads(d_out @ layer.wo.T, heads)
    d_weights = d_ctx @ vh.transpose(0, 2, 1)
    d_vh = weights.transpose(0, 2, 1) @ d_ctx
    # softmax rows: masked entries carry zero weight, so their grad is zero
    d_scores = weights * (d_weights - (d_weights * weights).sum(axis=-1, keepdims=True))
    d_qh = (d_scores @ kh) * scale
    d_kh = (d_scores.transpose(0, 2, 1) @ qh) * scale
    d_q, d_k, d_v = (_merge_heads(m) for m in (d_qh, d_kh, d_vh))
    if internals is not None:
        internals[f"{prefix}d_value_rows"] = _merge_heads(d_vh)
    grads[f"{prefix}wq"] = x.T @ d_q
    grads[f"{prefix}bq"] = d_q.sum(axis=0)
    grads[f"{prefix}wk"] = x.T @ d_k
    grads[f"{prefix}wv"] = x.T @ d_v
    grads[f"{prefix}bv"] = d_v.sum(axis=0)
    return d_q @ layer.wq.T + d_k @ layer.wk.T + d_v @ layer.wv.T


def _layer_forward(x, layer: LayerParams, mask, heads):
    attn_out, attn_cache = _attention_forward(x, layer, mask, heads)
    r1 = x + attn_out
    h1, ln1_cache = _layer_norm(r1, layer.ln1_g, layer.ln1_b)
    u = h1 @ layer.w1 + layer.b1
    act = _gelu(u)
    r2 = h1 + act @ layer.w2 + layer.b2
    out, ln2_cache = _layer_norm(r2, layer.ln2_g, layer.ln2_b)
    return out, (attn_cache, ln1_cache, h1, u, act, ln2_cache)


def _layer_backward(d_out, layer: LayerParams, cache, heads, grads, prefix, internals=None):
    attn_cache, ln1_cache, h1, u, act, ln2_cache = cache
    d_r2, grads[f"{prefix}ln2_g"], grads[f"{prefix}ln2_b"] = _layer_norm_backward(
        d_out, layer.ln2_g, ln2_cache
    )
    d_act = d_r2 @ layer.w2.T
    grads[f"{prefix}w2"] = act.T @ d_r2
    grads[f"{prefix}b2"] = d_r2.sum(axis=0)
    d_u = d_act * _gelu_grad(u)
    grads[f"{prefix}w1"] = h1.T @ d_u
    grads[f"{prefix}b1"] = d_u.sum(axis=0)
    d_h1 = d_u @ layer.w1.T + d_r2
    d_r1, grads[f"{prefix}ln1_g"], grads[f"{prefix}ln1_b"] = _layer_norm_backward(
        d_h1, layer.ln1_g, ln1_cache
    )
    d_x_attn = _attention_backward(d_r1, layer, attn_cache, heads, grads, prefix, internals)
    return d_r1 + d_x_attn


def build_mask(model: KwAttnModel, pp: PackedPair) -> np.ndarray:
    if model.cfg.mask_mode == "keyword":
        return build_keyword_mask(pp)
    return build_cross_mask(pp)


def kwattn_forward(last_hidden: np.ndarray, mask: np.ndarray, layer: LayerParams, heads: int) -> np.ndarray:
    """The keyword-attentive layer applied to encoder hidden states."""
    n, d = last_hidden.shape
    if mask.shape != (n, n):
        raise ValueError(f"mask shape {mask.shape} does not match {n} positions")
    if d % heads:
        raise ValueError("hidden width must be divisible by head count")
    out, _ = _layer_forward(last_hidden, layer, mask, heads)
    return out


def pool_sentences(hidden: np.ndarray, pp: PackedPair) -> tuple[np.ndarray, np.ndarray]:
    """Mean over each sentence's non-special positions."""
    pooled = []
    for side in (0, 1):
        sel = (pp.sent == side) & ~pp.special
        if not sel.any():
            raise ValueError("sentence has no non-special tokens to pool")
        pooled.append(hidden[sel].mean(axis=0))
    return pooled[0], pooled[1]


def compute_k_diff(h_kw_a: np.ndarray, h_kw_b: np.ndarray) -> np.ndarray:
    """Both directed differences of the pooled keyword views, concatenated."""
    if h_kw_a.shape != h_kw_b.shape:
        raise ValueError("pooled vectors must have equal width")
    return np.concatenate([h_kw_a - h_kw_b, h_kw_b - h_kw_a])


def assemble_h_kv(h_cls, h_kw_a, h_kw_b, k_diff) -> np.ndarray:
    """Pair representation: CLS view, both pooled views, difference vector."""
    d = h_cls.shape[0]
    if h_kw_a.shape != (d,) or h_kw_b.shape != (d,) or k_diff.shape != (2 * d,):
        raise ValueError("component widths must be d, d, d, 2d")
    return np.concatenate([h_cls, h_kw_a, h_kw_b, k_diff])


def classify(head_w: np.ndarray, head_b: np.ndarray, h_kv: np.ndarray) -> float:
    """Positive-class probability from the affine + softmax head."""
    z = h_kv @ head_w + head_b
    e = np.exp(z - z.max())
    return float(e[1] / e.sum())


def _forward_state(model: KwAttnModel, pp: PackedPair, mask: np.ndarray | None):
    cfg = model.cfg
    if mask is None:
        mask = build_mask(model, pp)
    n = pp.n
    hs = [model.tok_emb[pp.ids] + model.pos_emb[:n]]
    caches = []
    full = np.ones((n, n), dtype=bool)
    for layer in model.enc_layers:
        out, cache = _layer_forward(hs[-1], layer, full, cfg.heads)
        hs.append(out)
        caches.append(cache)
    kw_in = hs[-2] if cfg.parallel_kwattn else hs[-1]
    kw_out, kw_cache = _layer_forward(kw_in, model.kw_layer, mask, cfg.heads)
    h_kw_a, h_kw_b = pool_sentences(kw_out, pp)
    h_cls = hs[-1][0]
    k_diff = compute_k_diff(h_kw_a, h_kw_b)
    h_kv = assemble_h_kv(h_cls, h_kw_a, h_kw_b, k_diff)
    z = h_kv @ model.head_w + model.head_b
    e = np.exp(z - z.max())
    probs = e / e.sum()
    return {
        "mask": mask, "hs": hs, "caches": caches, "kw_cache": kw_cache,
        "kw_out": kw_out, "h_kv": h_kv, "probs": probs,
    }


def model_forward(model: KwAttnModel, pp: PackedPair, mask: np.ndarray | None = None) -> float:
    """Probability that the packed pair is a positive (similar) pair."""
    return float(_forward_state(model, pp, mask)["probs"][1])


def attention_weights(model: KwAttnModel, pp: PackedPair, mask: np.ndarray | None = None) -> np.ndarray:
    """Post-softmax keyword-attention weights, shape (heads, n, n)."""
    state = _forward_state(model, pp, mask)
    return state["kw_cache"][0][4]


def loss_only(model: KwAttnModel, pp: PackedPair, label: int, mask: np.ndarray | None = None) -> float:
    probs = _forward_state(model, pp, mask)["probs"]
    return -float(np.log(probs[label]))


def loss_and_grads(
    model: KwAttnModel,
    pp: PackedPair,
    label: int,
    mask: np.ndarray | None = None,
    internals: dict | None = None,
):
    """Cross-entropy loss, probability, and analytic gradients for every
    parameter tensor (same keys as :func:`named_parameters`)."""
    cfg = model.cfg
    state = _forward_state(model, pp, mask)
    probs, h_kv, hs = state["probs"], state["h_kv"], state["hs"]
    n, d = hs[0].shape
    loss = -float(np.log(probs[label]))

    grads: dict[str, np.ndarray] = {}
    dz = probs.copy()
    dz[label] -= 1.0
    grads["head_w"] = np.outer(h_kv, dz)
    grads["head_b"] = dz
    d_hkv = model.head_w @ dz

    g_cls = d_hkv[:d]
    g_a = d_hkv[d : 2 * d].copy()
    g_b = d_hkv[2 * d : 3 * d].copy()
    g_kd = d_hkv[3 * d :]
    g_a += g_kd[:d] - g_kd[d:]
    g_b += g_kd[d:] - g_kd[:d]

    d_kw_out = np.zeros((n, d))
    for side, g in ((0, g_a), (1, g_b)):
        sel = (pp.sent == side) & ~pp.special
        d_kw_out[sel] = g / sel.sum()

    d_kw_in = _layer_backward(
        d_kw_out, model.kw_layer, state["kw_cache"], cfg.heads, grads, "kw.", internals
    )

    d_hs = [np.zeros((n, d)) for _ in range(len(hs))]
    d_hs[-1][0] += g_cls
    if cfg.parallel_kwattn:
        d_hs[-2] += d_kw_in
    else:
        d_hs[-1] += d_kw_in
    for i in reversed(range(cfg.layers)):
        d_hs[i] += _layer_backward(
            d_hs[i + 1], model.enc_layers[i], state["caches"][i], cfg.heads, grads, f"enc{i}."
        )

    d_x0 = d_hs[0]
    d_tok = np.zeros_like(model.tok_emb)
    np.add.at(d_tok, pp.ids, d_x0)
    d_pos = np.zeros_like(model.pos_emb)
    d_pos[:n] += d_x0
    grads["tok_emb"] = d_tok
    grads["pos_emb"] = d_pos
    return loss, grads, float(probs[1])


def save_model(model: KwAttnModel, path) -> None:
    """Binary: magic, version, config ints, then named float64 tensor blocks;
    round-trips exactly."""
    cfg = model.cfg
    params = named_parameters(model)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(
            struct.pack(
                "<IIIIIIIBB",
                MODEL_VERSION, cfg.vocab_size, cfg.d, cfg.heads, cfg.layers,
                cfg.max_len, cfg.ff_mult, int(cfg.parallel_kwattn),
                MASK_MODES.index(cfg.mask_mode),
            )
        )
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_model(path) -> KwAttnModel:
    with open(path, "rb") as fh:
        if fh.read(4) != MODEL_MAGIC:
            raise ValueError(f"{path}: not a keyword-attention model file")
        (version, vocab_size, d, heads, layers, max_len, ff_mult, parallel, mask_idx) = (
            struct.unpack("<IIIIIIIBB", fh.read(30))
        )
        if version != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        cfg = ModelConfig(
            vocab_size=vocab_size, d=d, heads=heads, layers=layers, max_len=max_len,
            ff_mult=ff_mult, parallel_kwattn=bool(parallel), mask_mode=MASK_MODES[mask_idx],
        )
        model = init_model(cfg, seed=0)
        params = named_parameters(model)
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(size * 8), dtype=np.float64).reshape(shape)
            if name not in params or params[name].shape != data.shape:
                raise ValueError(f"{path}: unexpected tensor {name!r} with shape {shape}")
            params[name][...] = data
    return model
