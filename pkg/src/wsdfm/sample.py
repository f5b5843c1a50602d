"""Euler-discretized CTMC generation from t0 to 1.

At every step the posterior over terminal tokens is turned into generator
rows ``coef(s) * (posterior - delta_{x})``, converted to global time, and one
Euler kernel ``delta_x + h * rate`` is sampled per token. The last step draws
each token directly from the posterior instead of taking an Euler step whose
rate would blow up as s -> 1.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels, net
from .core import Dataset, InvalidArgument, NumericalFailure, RngStream, as_generator
from .path import EPS_CLOCK, LINEAR, KappaSchedule, WarmStartClock, to_global_rate

CHUNK = 8192

PosteriorFn = Callable[[float, np.ndarray], np.ndarray]


def nfe(t0: float, h: float) -> int:
    """Number of network evaluations for stepping from t0 to 1 with step h."""
    if not 0.0 <= t0 < 1.0:
        raise InvalidArgument(f"t0 must lie in [0, 1), got {t0}")
    if not 0.0 < h <= 1.0 - t0 + 1e-12:
        raise InvalidArgument(f"step size must lie in (0, 1 - t0], got {h}")
    # tolerance absorbs e.g. 0.65 / 0.05 = 13.000000000000002
    return max(1, math.ceil((1.0 - t0) / h - 1e-9))


def assemble_rate(post: np.ndarray, x_t: np.ndarray, s: float,
                  schedule: KappaSchedule = LINEAR) -> np.ndarray:
    """Generator rows on the local clock built from a terminal-token posterior."""
    post = np.asarray(post, dtype=np.float64)
    x_t = np.asarray(x_t)
    if post.shape[:-1] != x_t.shape:
        raise InvalidArgument(f"posterior shape {post.shape} does not match state {x_t.shape}")
    if np.any(np.abs(post.sum(axis=-1) - 1.0) > 1e-6):
        raise InvalidArgument("posterior rows must sum to 1")
    coef = float(schedule.coefficient(s))
    rate = coef * post
    np.put_along_axis(rate, x_t[..., None],
                      np.take_along_axis(rate, x_t[..., None], axis=-1) - coef, axis=-1)
    return rate


def euler_probs(x_t: np.ndarray, rate: np.ndarray, h_eff: float) -> np.ndarray:
    """Per-token kernel ``delta_x + h * rate``, clamped to a valid distribution.

    When the off-state mass exceeds one it is renormalized to one, so the token
    jumps with certainty, to destinations in proportion to the rate.
    """
    if h_eff <= 0:
        raise InvalidArgument("step size must be positive")
    probs = h_eff * np.asarray(rate, dtype=np.float64)
    x_t = np.asarray(x_t)[..., None]
    np.put_along_axis(probs, x_t, 0.0, axis=-1)
    np.maximum(probs, 0.0, out=probs)
    off = probs.sum(axis=-1, keepdims=True)
    over = off > 1.0
    if np.any(over):
        probs = np.where(over, probs / np.where(over, off, 1.0), probs)
        off = np.minimum(off, 1.0)
    np.put_along_axis(probs, x_t, 1.0 - off, axis=-1)
    return probs


def draw_categorical(probs: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """One draw per row of the trailing axis."""
    flat = probs.reshape(-1, probs.shape[-1])
    u = gen.random(flat.shape[0])
    return kernels.categorical_rows(flat, u).reshape(probs.shape[:-1])


def euler_step(x_t: np.ndarray, rate: np.ndarray, h_eff: float,
               rng: RngStream | np.random.Generator) -> np.ndarray:
    return draw_categorical(euler_probs(x_t, rate, h_eff), as_generator(rng))


@dataclass
class GenerateResult:
    samples: Dataset
    nfe: int
    wall_seconds: float  # per sample
    total_seconds: float


def _run_chunk(posterior_fn: PosteriorFn, x: np.ndarray, t0: float, h: float,
               steps: int, gen: np.random.Generator, schedule: KappaSchedule,
               local_clock: bool) -> np.ndarray:
    clock = WarmStartClock(t0)
    x = x.copy()
    for k in range(steps):
        t = t0 + k * h
        s = float(clock.local_time(t))
        post = posterior_fn(s, x)
        if not np.all(np.isfinite(post)):
            raise NumericalFailure(f"non-finite posterior at step {k}")
        if k == steps - 1 or s >= 1.0 - EPS_CLOCK:
            return draw_categorical(post, gen)
        rate = assemble_rate(post, x, s, schedule)
        if local_clock:
            x = euler_step(x, rate, h * clock.ds_dt, gen)
        else:
            x = euler_step(x, to_global_rate(rate, clock), h, gen)
    return x


def run_sampler(posterior_fn: PosteriorFn, init: Dataset, t0: float, h: float, n: int,
                rng: RngStream | int, *, schedule: KappaSchedule = LINEAR,
                local_clock: bool = False, workers: int = 1) -> GenerateResult:
    """Shared stepping loop; chunks use independent index-derived streams."""
    if n <= 0:
        raise InvalidArgument("n must be positive")
    if n > len(init):
        raise InvalidArgument(f"need {n} initial samples, got {len(init)}")
    steps = nfe(t0, h)
    root = rng if isinstance(rng, RngStream) else RngStream(int(rng), "generate")
    starts = list(range(0, n, CHUNK))

    def job(c):
        lo = starts[c]
        x0 = init.tokens[lo:lo + CHUNK][: n - lo]
        return _run_chunk(posterior_fn, x0, t0, h, steps,
                          root.child("chunk", c).generator(), schedule, local_clock)

    t_start = time.perf_counter()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(starts))))
    else:
        parts = [job(c) for c in range(len(starts))]
    total = time.perf_counter() - t_start
    out = Dataset(init.spec, np.concatenate(parts, axis=0))
    return GenerateResult(out, steps, total / n, total)


def generate(params: net.ModelParams, init: Dataset, t0: float, h: float, n: int,
             rng: RngStream | int, **kwargs) -> GenerateResult:
    """Generate ``n`` samples with the network posterior, starting from ``init`` at t0."""
    if init.spec != params.spec:
        raise InvalidArgument(f"initial samples {init.spec} do not match network {params.spec}")
    return run_sampler(lambda s, x: net.posterior(params, s, x), init, t0, h, n, rng, **kwargs)


def oracle_generate(pairs, init: Dataset, t0: float, h: float, n: int,
                    rng: RngStream | int, **kwargs) -> GenerateResult:
    """Same stepping as :func:`generate`, driven by the exact posterior of ``pairs``."""
    from .evaluate import exact_posterior_batch

    if init.spec != pairs.spec:
        raise InvalidArgument("initial samples and pairs use different grids")
    schedule = kwargs.get("schedule", LINEAR)

    def post(s, x):
        return exact_posterior_batch(s, x, pairs, schedule, unreachable="nearest")

    return run_sampler(post, init, t0, h, n, rng, **kwargs)
