"""Posterior network: token embeddings + time features -> MLP -> per-token logits.

The general mixture-path model outputs one distribution per token, per mixture
component and per vocabulary entry. With a two-delta path only the x1 branch
carries information (the source branch is the current token itself), so a
single posterior head over the vocabulary is enough; the sampler rebuilds the
generator from it.

Parameters live in an ordered ``dict`` of numpy arrays. Gradients are computed
by a hand-written reverse pass over this fixed architecture.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (GridSpec, InvalidArgument, NumericalFailure, ParseError,
                   RngStream, as_generator, atomic_write_bytes)

N_FREQ = 8
TIME_DIM = 2 * N_FREQ


@dataclass(frozen=True)
class NetDims:
    n_tokens: int
    vocab: int
    embed_dim: int = 128
    hidden_dim: int = 128
    n_layers: int = 4

    @property
    def input_dim(self) -> int:
        return self.n_tokens * self.embed_dim + TIME_DIM

    @property
    def output_dim(self) -> int:
        return self.n_tokens * self.vocab

    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim] + [self.hidden_dim] * (self.n_layers - 1) + [self.output_dim]
        return list(zip(sizes[:-1], sizes[1:]))

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {"embed": (self.vocab, self.embed_dim)}
        for l, (fan_in, fan_out) in enumerate(self.layer_shapes()):
            shapes[f"W{l}"] = (fan_in, fan_out)
            shapes[f"b{l}"] = (fan_out,)
        return shapes

    def to_dict(self) -> dict:
        return {"n_tokens": self.n_tokens, "vocab": self.vocab, "embed_dim": self.embed_dim,
                "hidden_dim": self.hidden_dim, "n_layers": self.n_layers}


@dataclass
class ModelParams:
    """Named parameter arrays, all views into one contiguous ``flat`` buffer."""

    dims: NetDims
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.dims.param_shapes()
        if list(self.arrays) != list(shapes):
            raise InvalidArgument(f"expected parameters {list(shapes)}")
        for k, v in self.arrays.items():
            if v.shape != shapes[k]:
                raise InvalidArgument(f"{k} has shape {v.shape}, expected {shapes[k]}")
        dtype = np.result_type(*self.arrays.values())
        self.flat = np.concatenate([v.ravel() for v in self.arrays.values()]).astype(dtype)
        views, offset = {}, 0
        for k, v in self.arrays.items():
            views[k] = self.flat[offset:offset + v.size].reshape(v.shape)
            offset += v.size
        self.arrays = views

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.dims.n_tokens, self.dims.vocab)

    @property
    def dtype(self):
        return self.arrays["embed"].dtype

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.arrays.items()},
                           json.loads(json.dumps(self.meta)))

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.dims, {k: v.astype(dtype) for k, v in self.arrays.items()},
                           dict(self.meta))

    def n_params(self) -> int:
        return self.flat.size


def init_params(dims: NetDims, rng: RngStream | np.random.Generator | int,
                dtype=np.float32, zero_head: bool = True) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) init; the output layer starts at zero unless told otherwise."""
    gen = as_generator(rng)
    arrays = {"embed": gen.uniform(-1.0, 1.0, size=(dims.vocab, dims.embed_dim))}
    n = len(dims.layer_shapes())
    for l, (fan_in, fan_out) in enumerate(dims.layer_shapes()):
        bound = 1.0 / math.sqrt(fan_in)
        if l == n - 1 and zero_head:
            arrays[f"W{l}"] = np.zeros((fan_in, fan_out))
            arrays[f"b{l}"] = np.zeros(fan_out)
        else:
            arrays[f"W{l}"] = gen.uniform(-bound, bound, size=(fan_in, fan_out))
            arrays[f"b{l}"] = gen.uniform(-bound, bound, size=fan_out)
    return ModelParams(dims, {k: v.astype(dtype) for k, v in arrays.items()})


def time_features(s, dtype=np.float64) -> np.ndarray:
    """Fourier features of local time: sin(pi k s) for k=1..8, then cos(pi k s).

    Half-period frequencies keep s=0 and s=1 apart; with full periods both ends
    of the path would map to the same feature vector.
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    ang = np.pi * s[:, None] * np.arange(1, N_FREQ + 1)
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1).astype(dtype)


def _inputs(params: ModelParams, s, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    d = params.dims
    if x.shape[1] != d.n_tokens:
        raise InvalidArgument(f"expected {d.n_tokens} tokens per sequence, got {x.shape[1]}")
    s = np.asarray(s, dtype=np.float64)
    if s.ndim == 0:
        s = np.full(x.shape[0], float(s))
    if s.shape != (x.shape[0],):
        raise InvalidArgument("need one time value per sequence")
    if np.any((s < 0.0) | (s > 1.0)):
        raise InvalidArgument("local time must lie in [0, 1]")
    emb = params.arrays["embed"][x].reshape(x.shape[0], -1)
    return x, np.concatenate([emb, time_features(s, params.dtype)], axis=1)


def forward(params: ModelParams, s, x) -> np.ndarray:
    """Logits of shape ``(batch, n_tokens, vocab)``; a 1-D ``x`` gives batch size 1."""
    x, h = _inputs(params, s, x)
    n = params.dims.n_layers
    a = params.arrays
    for l in range(n):
        h = h @ a[f"W{l}"] + a[f"b{l}"]
        if l < n - 1:
            np.maximum(h, 0, out=h)
    return h.reshape(x.shape[0], params.dims.n_tokens, params.dims.vocab)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


def posterior(params: ModelParams, s, x) -> np.ndarray:
    """Predicted distribution of the terminal token at every position (float64)."""
    return softmax(forward(params, s, x).astype(np.float64))


def loss_and_grads(params: ModelParams, s, x_s, x1, batch_index: int | None = None):
    """Mean cross-entropy toward ``x1`` over batch and positions, with exact gradients."""
    x_s, h0 = _inputs(params, s, x_s)
    x1 = np.asarray(x1)
    if x1.ndim == 1:
        x1 = x1[None, :]
    if x1.shape != x_s.shape:
        raise InvalidArgument("targets must match the input batch shape")
    if x_s.shape[0] == 0:
        raise InvalidArgument("batch must be non-empty")
    d = params.dims
    a = params.arrays
    n = d.n_layers
    acts = [h0]
    h = h0
    for l in range(n):
        h = h @ a[f"W{l}"] + a[f"b{l}"]
        if l < n - 1:
            h = np.maximum(h, 0)
            acts.append(h)
    bsz = x_s.shape[0]
    logits = h.reshape(bsz, d.n_tokens, d.vocab)
    z = logits - logits.max(axis=-1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, x1[..., None], axis=-1)[..., 0]
    count = bsz * d.n_tokens
    loss = float((logsum - picked).sum() / count)
    if not math.isfinite(loss):
        where = f" at batch {batch_index}" if batch_index is not None else ""
        raise NumericalFailure(f"non-finite loss{where}")

    probs = np.exp(z - logsum[..., None])
    rows = np.arange(bsz)[:, None]
    cols = np.arange(d.n_tokens)[None, :]
    probs[rows, cols, x1] -= 1.0
    dz = (probs / count).reshape(bsz, -1).astype(params.dtype, copy=False)

    grads = {}
    for l in range(n - 1, -1, -1):
        grads[f"W{l}"] = acts[l].T @ dz
        grads[f"b{l}"] = dz.sum(axis=0)
        dh = dz @ a[f"W{l}"].T
        if l > 0:
            dz = dh * (acts[l] > 0)
    demb = dh[:, :d.n_tokens * d.embed_dim].reshape(bsz * d.n_tokens, d.embed_dim)
    onehot = np.zeros((bsz * d.n_tokens, d.vocab), dtype=params.dtype)
    onehot[np.arange(bsz * d.n_tokens), x_s.ravel()] = 1.0
    grads["embed"] = onehot.T @ demb
    return loss, {k: grads[k] for k in a}


# ---------------------------------------------------------------------------
# AMSGrad


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    v_max: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "OptimizerState":
        z = lambda: np.zeros_like(params.flat)
        return cls(z(), z(), z())

    def view(self, params: ModelParams, which: str) -> dict[str, np.ndarray]:
        """Per-parameter views of one of the flat accumulators (``m``, ``v``, ``v_max``)."""
        buf = getattr(self, which)
        out, offset = {}, 0
        for k, p in params.arrays.items():
            out[k] = buf[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        return out


def amsgrad_step(params: ModelParams, grads: dict[str, np.ndarray],
                 state: OptimizerState, lr: float) -> tuple[ModelParams, OptimizerState]:
    """One AMSGrad update, applied in place to the single owner copy of ``params``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for k, p in params.arrays.items():
        if grads[k].shape != p.shape:
            raise InvalidArgument(f"gradient shape {grads[k].shape} does not match {k} {p.shape}")
    g = np.concatenate([grads[k].ravel() for k in params.arrays]).astype(params.dtype, copy=False)
    m, v, vmax = state.m, state.v, state.v_max
    m *= b1
    m += (1.0 - b1) * g
    g *= g
    v *= b2
    v += (1.0 - b2) * g
    np.maximum(vmax, v, out=vmax)
    denom = np.sqrt(vmax * (1.0 / bc2))
    denom += state.eps
    step = m * (lr / bc1)
    step /= denom
    params.flat -= step
    return params, state


# ---------------------------------------------------------------------------
# Checkpoints: one JSON header line, then little-endian float32 arrays


def save_checkpoint(path: str | os.PathLike, params: ModelParams, **header) -> None:
    head = dict(params.meta)
    head.update(header)
    head["spec"] = {"n_tokens": params.dims.n_tokens, "vocab": params.dims.vocab}
    head["dims"] = params.dims.to_dict()
    head["order"] = list(params.arrays)
    head.setdefault("iteration", 0)
    head.setdefault("t0", 0.0)
    head.setdefault("seed", 0)
    line = json.dumps(head, sort_keys=True).encode() + b"\n"
    body = b"".join(np.ascontiguousarray(v, dtype="<f4").tobytes() for v in params.arrays.values())
    atomic_write_bytes(path, line + body)


def load_checkpoint(path: str | os.PathLike) -> ModelParams:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ParseError("checkpoint has no header line", 1)
    try:
        head = json.loads(raw[:nl])
        dims = NetDims(**head["dims"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad checkpoint header: {exc}", 1) from None
    shapes = dims.param_shapes()
    order = head.get("order", list(shapes))
    body = memoryview(raw)[nl + 1:]
    arrays, offset = {}, 0
    for name in order:
        shape = shapes[name]
        size = int(np.prod(shape))
        chunk = body[offset:offset + 4 * size]
        if len(chunk) != 4 * size:
            raise ParseError(f"checkpoint truncated in {name}")
        arrays[name] = np.frombuffer(chunk, dtype="<f4").astype(np.float32).reshape(shape)
        offset += 4 * size
    if offset != len(body):
        raise ParseError("trailing bytes after checkpoint arrays")
    meta = {k: v for k, v in head.items() if k not in ("dims", "order", "spec")}
    return ModelParams(dims, arrays, meta)
