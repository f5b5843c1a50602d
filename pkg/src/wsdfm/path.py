"""Two-component mixture paths, their generators and the warm-start clock.

Each token follows the pinned marginal

    P_s(x^i | src, x1) = (1 - kappa(s)) * delta_{src^i} + kappa(s) * delta_{x1^i}

on a local clock ``s`` in [0, 1]. Generators ("rates") are arrays whose last
axis runs over the vocabulary; one row per token position.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridSpec, InvalidArgument, RngStream, WSDFMError, as_generator

EPS_CLOCK = 1e-6


class ClockSaturated(WSDFMError):
    """Rate requested at s >= 1 - EPS_CLOCK, where kappa'/(1-kappa) diverges."""


@dataclass(frozen=True)
class KappaSchedule:
    kind: str = "linear"

    def __post_init__(self):
        if self.kind != "linear":
            raise InvalidArgument(f"unsupported schedule {self.kind!r}")

    def kappa(self, s):
        return np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)

    def kappa_dot(self, s):
        return np.ones_like(np.asarray(s, dtype=np.float64))

    def coefficient(self, s):
        """kappa'(s) / (1 - kappa(s)), the jump intensity toward the x1 branch."""
        s = np.asarray(s, dtype=np.float64)
        if np.any(s >= 1.0 - EPS_CLOCK):
            raise ClockSaturated(f"local time {float(np.max(s))} is past 1 - {EPS_CLOCK}")
        if np.any(s < 0.0):
            raise InvalidArgument("local time must be non-negative")
        return self.kappa_dot(s) / (1.0 - self.kappa(s))


LINEAR = KappaSchedule()


@dataclass(frozen=True)
class WarmStartClock:
    """Maps global time t in [t0, 1] onto local time s in [0, 1]."""

    t0: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.t0 < 1.0:
            raise InvalidArgument(f"t0 must lie in [0, 1), got {self.t0}")

    def local_time(self, t):
        return (np.asarray(t, dtype=np.float64) - self.t0) / (1.0 - self.t0)

    def global_time(self, s):
        return self.t0 + np.asarray(s, dtype=np.float64) * (1.0 - self.t0)

    @property
    def ds_dt(self) -> float:
        return 1.0 / (1.0 - self.t0)


def _pair_arrays(x_a, x_b):
    a = np.asarray(x_a)
    b = np.asarray(x_b)
    if a.shape != b.shape:
        raise InvalidArgument(f"mismatched sequences: {a.shape} vs {b.shape}")
    return a, b


def sample_xt(s, x_src, x1, schedule: KappaSchedule = LINEAR,
              rng: RngStream | np.random.Generator | int = 0) -> np.ndarray:
    """Draw x_s from the pinned marginal, independently per token.

    ``s`` may be a scalar or one value per leading-axis row of ``x_src``.
    """
    x_src, x1 = _pair_arrays(x_src, x1)
    s = np.asarray(s, dtype=np.float64)
    if np.any((s < 0.0) | (s > 1.0)):
        raise InvalidArgument("local time must lie in [0, 1]")
    kap = schedule.kappa(s)
    if kap.ndim:
        kap = kap.reshape(kap.shape + (1,) * (x_src.ndim - kap.ndim))
    u = as_generator(rng).random(x_src.shape)
    return np.where(u < kap, x1, x_src)


def conditional_rate(s, x_s, x1, schedule: KappaSchedule = LINEAR,
                     spec: GridSpec | None = None, vocab: int | None = None) -> np.ndarray:
    """Pinned generator rows ``coef(s) * (delta_{x1} - delta_{x_s})``."""
    x_s, x1 = _pair_arrays(x_s, x1)
    vocab = vocab if vocab is not None else (spec.vocab if spec is not None else None)
    if vocab is None:
        raise InvalidArgument("vocab size required")
    coef = schedule.coefficient(s)
    eye = np.eye(vocab)
    rate = eye[x1] - eye[x_s]
    coef = np.asarray(coef)
    if coef.ndim:
        coef = coef.reshape(coef.shape + (1,) * (rate.ndim - coef.ndim))
    return coef * rate


def to_global_rate(rate_local: np.ndarray, clock: WarmStartClock) -> np.ndarray:
    """Chain rule: a rate per unit local time becomes ``ds/dt`` times that per unit global time."""
    return np.asarray(rate_local) * clock.ds_dt


def check_rate(rate: np.ndarray, x: np.ndarray, atol: float = 1e-9) -> None:
    """Raise if ``rate`` is not a conservative generator row set at state ``x``."""
    rate = np.asarray(rate)
    x = np.asarray(x)
    vocab = rate.shape[-1]
    at_x = np.take_along_axis(rate, x[..., None], axis=-1)[..., 0]
    off = rate - np.eye(vocab)[x] * at_x[..., None]
    if np.any(at_x > atol) or np.any(off < -atol):
        raise ValueError("rate has a positive diagonal or negative off-diagonal entry")
    if np.any(np.abs(rate.sum(axis=-1)) > atol):
        raise ValueError("rate rows do not sum to zero")
