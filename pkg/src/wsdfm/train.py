"""Training loop for the warm-start posterior network.

Each step draws a batch of pairs, a local time s ~ U(0, 1) per example (the
same as global t ~ U(t0, 1)), a path sample x_s, and takes one AMSGrad step on
the cross-entropy toward the paired target. Vanilla (cold-start) training is
the same loop with uniform-noise sources and an independent coupling.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import net
from .core import (Dataset, InvalidArgument, RngStream, RunConfig, atomic_write_text)
from .coupling import PairedDataset, independent_pairs
from .drafts import uniform_noise
from .path import LINEAR, sample_xt

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    params: net.ModelParams
    losses: np.ndarray
    best_params: net.ModelParams | None = None
    best_iteration: int | None = None
    probes: list[tuple[int, float]] = field(default_factory=list)

    @property
    def selected(self) -> net.ModelParams:
        return self.best_params if self.best_params is not None else self.params


def dims_for(config: RunConfig) -> net.NetDims:
    return net.NetDims(config.n_tokens, config.vocab, config.embed_dim,
                       config.hidden_dim, config.n_layers)


def smoothed(losses, window: int) -> np.ndarray:
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size < window:
        return np.array([losses.mean()]) if losses.size else losses
    c = np.cumsum(np.concatenate([[0.0], losses]))
    return (c[window:] - c[:-window]) / window


def _run(params: net.ModelParams, config: RunConfig, pairs: PairedDataset, lr: float,
         rng: RngStream, checkpoint_dir: str | os.PathLike | None,
         probe: Callable[[net.ModelParams], float] | None) -> TrainResult:
    if len(pairs) == 0:
        raise InvalidArgument("no training pairs")
    if pairs.spec != params.spec:
        raise InvalidArgument(f"pairs grid {pairs.spec} does not match network {params.spec}")
    gen = rng.generator()
    state = net.OptimizerState.zeros_like(params)
    losses = np.empty(config.iterations, dtype=np.float64)
    result = TrainResult(params, losses)
    best = np.inf
    start = int(params.meta.get("iteration", 0))
    for it in range(config.iterations):
        idx = gen.integers(0, len(pairs), size=config.batch_size)
        s = gen.random(config.batch_size)
        x1 = pairs.dst[idx]
        x_s = sample_xt(s, pairs.src[idx], x1, LINEAR, gen)
        loss, grads = net.loss_and_grads(params, s, x_s, x1, batch_index=it)
        losses[it] = loss
        net.amsgrad_step(params, grads, state, lr)
        done = it + 1
        if done % config.checkpoint_every == 0 or done == config.iterations:
            params.meta["iteration"] = start + done
            if checkpoint_dir is not None:
                net.save_checkpoint(Path(checkpoint_dir) / f"ckpt_{start + done:07d}.bin", params)
            if probe is not None:
                score = float(probe(params))
                result.probes.append((done, score))
                log.info("iteration %d loss %.4f probe %.4f", done, loss, score)
                if score < best:
                    best = score
                    result.best_params = params.copy()
                    result.best_iteration = done
    params.meta["iteration"] = start + config.iterations
    if result.best_params is not None and checkpoint_dir is not None:
        net.save_checkpoint(Path(checkpoint_dir) / "best.bin", result.best_params)
    return result


def train(config: RunConfig, pairs: PairedDataset, *, checkpoint_dir=None,
          probe: Callable[[net.ModelParams], float] | None = None,
          dtype=np.float32) -> TrainResult:
    """Train a fresh network on ``pairs`` for ``config.iterations`` steps."""
    root = RngStream(config.seed, "train")
    params = net.init_params(dims_for(config), root.child("init"), dtype=dtype)
    params.meta.update({"seed": config.seed, "t0": config.t0, "iteration": 0,
                        "lineage": []})
    return _run(params, config, pairs, config.learning_rate, root.child("batches"),
                checkpoint_dir, probe)


def vanilla_pairs(config: RunConfig, data: Dataset) -> PairedDataset:
    """Independent coupling between uniform noise and data."""
    root = RngStream(config.seed, "vanilla")
    n = max(len(data), config.n_drafts * max(1, config.k + config.k_inject))
    noise = uniform_noise(data.spec, n, root.child("noise"))
    return independent_pairs(noise, data, n, root.child("pairs"))


def train_vanilla(config: RunConfig, data: Dataset, **kwargs) -> TrainResult:
    """Cold-start baseline: uniform-noise sources, independent pairs, t0 = 0."""
    return train(config.replace(t0=0.0), vanilla_pairs(config, data), **kwargs)


def finetune(base: net.ModelParams, config: RunConfig, pairs: PairedDataset, *,
             checkpoint_dir=None, probe=None) -> TrainResult:
    """Continue training ``base`` with the (small) finetuning learning rate."""
    want = dims_for(config)
    if base.dims != want:
        raise InvalidArgument(f"checkpoint dims {base.dims} do not match config {want}")
    params = base.copy()
    lineage = list(params.meta.get("lineage", []))
    lineage.append({k: params.meta.get(k) for k in ("seed", "t0", "iteration")})
    params.meta.update({"lineage": lineage, "seed": config.seed, "t0": config.t0})
    return _run(params, config, pairs, config.finetune_learning_rate,
                RngStream(config.seed, "finetune"), checkpoint_dir, probe)


def save_loss_curve(path, losses, start: int = 0) -> None:
    lines = ["iteration,loss"] + [f"{start + i},{float(v)!r}" for i, v in enumerate(losses)]
    atomic_write_text(path, "\n".join(lines) + "\n")
