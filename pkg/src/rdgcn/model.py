"""GCN sentiment classifier with hand-written reverse-mode gradients.

Pipeline per batch (shapes with B sentences padded to N tokens):

    E0  = dropout(embed[ids]) @ proj                  (B, N, D)
    A*  = A_dis* + topo * softmax(H q)[type_ids]      (B, N, N)
    E^l = relu(A* @ E^(l-1) @ W_l)                    l = 1..L
    f   = mean of E^L over the aspect rows            (B, D)
    y   = dropout(f) @ Z + b                          (B, C)

Padded rows and columns of A* are zero, so padding never reaches the pooled
aspect vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .importance import type_softmax

PAD_ID = 0
UNK_ID = 1


@dataclass
class ModelParams:
    embed: np.ndarray
    proj: np.ndarray
    gcn_w: list
    type_H: np.ndarray
    type_q: np.ndarray
    clf_Z: np.ndarray
    clf_b: np.ndarray

    @classmethod
    def init(cls, rng, vocab_size, d_in, d, n_layers, n_types, n_classes=3, scale=0.1):
        def u(*shape):
            return rng.uniform(-scale, scale, size=shape)

        return cls(
            embed=u(vocab_size, d_in),
            proj=u(d_in, d),
            gcn_w=[u(d, d) for _ in range(n_layers)],
            type_H=u(n_types, d),
            type_q=u(d),
            clf_Z=u(d, n_classes),
            clf_b=u(1, n_classes),
        )

    def named(self):
        yield "embed", self.embed
        yield "proj", self.proj
        for i, w in enumerate(self.gcn_w):
            yield f"gcn_w.{i}", w
        yield "type_H", self.type_H
        yield "type_q", self.type_q
        yield "clf_Z", self.clf_Z
        yield "clf_b", self.clf_b

    @classmethod
    def from_named(cls, items) -> "ModelParams":
        d = dict(items)
        layers = sorted((k for k in d if k.startswith("gcn_w.")), key=lambda k: int(k.split(".")[1]))
        return cls(d["embed"], d["proj"], [d[k] for k in layers], d["type_H"], d["type_q"], d["clf_Z"], d["clf_b"])

    def zeros_like(self) -> "ModelParams":
        return ModelParams.from_named((k, np.zeros_like(v)) for k, v in self.named())

    def copy(self) -> "ModelParams":
        return ModelParams.from_named((k, v.copy()) for k, v in self.named())


Gradients = ModelParams


@dataclass
class ModelConfig:
    dropout_in: float = 0.7
    dropout_out: float = 0.1
    use_type: bool = True
    row_norm: bool = False


@dataclass
class Batch:
    ids: np.ndarray          # (B, N) int
    a_dis: np.ndarray        # (B, N, N) float, zero on padding
    type_ids: np.ndarray     # (B, N, N) int
    topo: np.ndarray         # (B, N, N) float 0/1, zero on padding
    aspect: np.ndarray       # (B, N) float, 1/M on aspect rows
    labels: np.ndarray       # (B,) int
    version: int = 0         # K-cache version the a_dis slice was built from

    def __len__(self):
        return len(self.labels)


@dataclass
class Cache:
    batch: Batch
    x: np.ndarray
    mask_in: np.ndarray | None
    p: np.ndarray
    a_raw: np.ndarray
    row_sum: np.ndarray | None
    a: np.ndarray
    acts: list = field(default_factory=list)   # E^0 .. E^L
    pre: list = field(default_factory=list)    # A* E^(l-1), per layer
    f: np.ndarray | None = None
    mask_out: np.ndarray | None = None
    f_drop: np.ndarray | None = None
    logits: np.ndarray | None = None


def _dropout_mask(rng, shape, rate):
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def encode(ids, params: ModelParams, rng=None, rate=0.0):
    """Token embeddings projected to the GCN width; returns (E0, dropped inputs, mask)."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= params.embed.shape[0]):
        raise IndexError(f"token id out of range [0, {params.embed.shape[0]})")
    x = params.embed[ids]
    mask = None
    if rng is not None and rate > 0:
        mask = _dropout_mask(rng, x.shape, rate)
        x = x * mask
    return x @ params.proj, x, mask


def gcn_layer(a, e_in, w):
    out = np.maximum(a @ e_in @ w, 0.0)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite GCN layer output")
    return out


def induced_adjacency(batch: Batch, params: ModelParams, cfg: ModelConfig):
    p = type_softmax(params.type_H, params.type_q)
    a = batch.a_dis
    if cfg.use_type:
        a = a + batch.topo * p[batch.type_ids]
    return a, p


def forward(batch: Batch, params: ModelParams, cfg: ModelConfig, rng=None):
    """Logits for a batch. Dropout is applied only when ``rng`` is given."""
    e0, x, mask_in = encode(batch.ids, params, rng, cfg.dropout_in)
    a_raw, p = induced_adjacency(batch, params, cfg)
    row_sum = None
    a = a_raw
    if cfg.row_norm:
        row_sum = a_raw.sum(axis=-1, keepdims=True)
        row_sum = np.where(row_sum > 0, row_sum, 1.0)
        a = a_raw / row_sum
    cache = Cache(batch, x, mask_in, p, a_raw, row_sum, a, acts=[e0])
    e = e0
    for w in params.gcn_w:
        pre = a @ e
        cache.pre.append(pre)
        e = np.maximum(pre @ w, 0.0)
        cache.acts.append(e)
    f = np.einsum("bn,bnd->bd", batch.aspect, e)
    cache.f = f
    if rng is not None and cfg.dropout_out > 0:
        cache.mask_out = _dropout_mask(rng, f.shape, cfg.dropout_out)
        f = f * cache.mask_out
    cache.f_drop = f
    logits = f @ params.clf_Z + params.clf_b
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    cache.logits = logits
    return logits, cache


def log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def loss(logits, labels) -> float:
    """Mean cross-entropy over the batch."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    return float(-log_softmax(logits)[np.arange(len(labels)), labels].mean())


def backward(cache: Cache, params: ModelParams, cfg: ModelConfig) -> Gradients:
    """Gradients of the mean cross-entropy loss with respect to every parameter."""
    batch = cache.batch
    n_b = len(batch)
    probs = np.exp(log_softmax(cache.logits))
    d_logits = probs
    d_logits[np.arange(n_b), batch.labels] -= 1.0
    d_logits /= n_b

    g = params.zeros_like()
    g.clf_Z = cache.f_drop.T @ d_logits
    g.clf_b = d_logits.sum(axis=0, keepdims=True)
    d_f = d_logits @ params.clf_Z.T
    if cache.mask_out is not None:
        d_f = d_f * cache.mask_out
    d_e = batch.aspect[:, :, None] * d_f[:, None, :]

    a = cache.a
    d_a = np.zeros_like(a)
    for layer in range(len(params.gcn_w) - 1, -1, -1):
        w = params.gcn_w[layer]
        e_prev = cache.acts[layer]
        pre = cache.pre[layer]
        d_z = d_e * (cache.acts[layer + 1] > 0)
        g.gcn_w[layer] = np.einsum("bnd,bne->de", pre, d_z)
        d_pre = d_z @ w.T
        d_a += d_pre @ e_prev.transpose(0, 2, 1)
        d_e = a.transpose(0, 2, 1) @ d_pre

    if cfg.use_type:
        if cache.row_sum is not None:
            d_a = (d_a - (d_a * a).sum(axis=-1, keepdims=True)) / cache.row_sum
        d_p = np.bincount(batch.type_ids.ravel(), weights=(d_a * batch.topo).ravel(),
                          minlength=len(cache.p))
        p = cache.p
        d_s = p * (d_p - p @ d_p)
        g.type_H = np.outer(d_s, params.type_q)
        g.type_q = params.type_H.T @ d_s

    g.proj = np.einsum("bni,bnd->id", cache.x, d_e)
    d_x = d_e @ params.proj.T
    if cache.mask_in is not None:
        d_x = d_x * cache.mask_in
    np.add.at(g.embed, batch.ids, d_x)

    for name, arr in g.named():
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite gradient for {name}")
    return g


@dataclass
class AdamState:
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ModelParams, grads: Gradients, state: AdamState) -> ModelParams:
    """Bias-corrected Adam update, in place on ``params``."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    grad_map = dict(grads.named())
    for name, p in params.named():
        g = grad_map[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params
