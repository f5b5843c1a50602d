"""Sample-quality metrics, the exact small-instance posterior, and t0 selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .core import Dataset, InvalidArgument, WSDFMError, atomic_write_text
from .path import LINEAR, KappaSchedule

DEFAULT_EPS = 1e-6


class UnreachableState(WSDFMError):
    """No pair of the coupling puts positive probability on the queried state."""


@dataclass(frozen=True)
class Histogram2D:
    counts: np.ndarray
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.counts.sum() <= 0:
            raise InvalidArgument("histogram is empty")
        if self.eps <= 0:
            raise InvalidArgument("smoothing eps must be positive")

    @classmethod
    def from_dataset(cls, data: Dataset, eps: float = DEFAULT_EPS) -> "Histogram2D":
        if data.spec.n_tokens != 2:
            raise InvalidArgument("2-D histograms need two-token sequences")
        return cls(kernels.histogram2d(data.tokens, data.spec.vocab), eps)

    def probabilities(self) -> np.ndarray:
        p = self.counts / self.counts.sum() + self.eps
        return p / p.sum()


def skl_from_probs(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p||q) + KL(q||p), written as one sum so that swapping arguments is exact."""
    return float(np.sum((p - q) * (np.log(p) - np.log(q))))


def skl(a: Dataset, b: Dataset, eps: float = DEFAULT_EPS) -> float:
    """Symmetric KL between eps-smoothed 2-D histograms of two sample sets."""
    if a.spec != b.spec:
        raise InvalidArgument(f"grid mismatch: {a.spec} vs {b.spec}")
    p = Histogram2D.from_dataset(a, eps).probabilities()
    q = Histogram2D.from_dataset(b, eps).probabilities()
    return skl_from_probs(p, q)


def exact_posterior_batch(s, x: np.ndarray, pairs, schedule: KappaSchedule = LINEAR,
                          unreachable: str = "raise") -> np.ndarray:
    """Bayes posterior over terminal tokens for each row of ``x`` at local time ``s``.

    Every pair is weighted by the pinned-path probability of the state; the
    posterior is the weighted mix of the pairs' terminal tokens. With
    ``unreachable="nearest"``, states that no pair can produce (possible after
    simultaneous jumps in a discrete step) are scored against the pairs with the
    fewest mismatching tokens instead of raising.
    """
    x = pairs.spec.check(x)
    kap = np.broadcast_to(np.asarray(schedule.kappa(s), dtype=np.float64), (x.shape[0],))
    post, mismatch = kernels.pair_posterior(x, pairs.src, pairs.dst,
                                            np.ascontiguousarray(kap), pairs.spec.vocab)
    if unreachable == "raise" and np.any(mismatch > 0):
        row = int(np.flatnonzero(mismatch > 0)[0])
        raise UnreachableState(f"state {x[row].tolist()} has zero probability at s={float(kap[row])}")
    if unreachable not in ("raise", "nearest"):
        raise InvalidArgument(f"unknown unreachable policy {unreachable!r}")
    return post


def exact_posterior(s: float, x_s, pairs, schedule: KappaSchedule = LINEAR) -> np.ndarray:
    """``(n_tokens, vocab)`` posterior for a single state."""
    return exact_posterior_batch(s, np.asarray(x_s)[None, :], pairs, schedule)[0]


def total_variation(samples: Dataset, target: np.ndarray) -> float:
    """TV distance between the empirical joint of ``samples`` and a joint pmf over V^N."""
    v, n = samples.spec.vocab, samples.spec.n_tokens
    flat = np.ravel_multi_index(tuple(samples.tokens.T), (v,) * n)
    emp = np.bincount(flat, minlength=v ** n) / len(samples)
    return 0.5 * float(np.abs(emp - np.asarray(target).ravel()).sum())


def joint_pmf(tokens: np.ndarray, vocab: int) -> np.ndarray:
    """Empirical joint distribution over ``V^N`` as an N-dimensional array."""
    tokens = np.asarray(tokens)
    n = tokens.shape[1]
    flat = np.ravel_multi_index(tuple(tokens.T), (vocab,) * n)
    return (np.bincount(flat, minlength=vocab ** n) / tokens.shape[0]).reshape((vocab,) * n)


# ---------------------------------------------------------------------------
# t0 selection


@dataclass
class SweepRow:
    t0: float
    skl: float
    nfe: int
    qualifies: bool
    label: str = ""


@dataclass
class SweepReport:
    selected: float | None
    rows: list[SweepRow] = field(default_factory=list)
    baseline_skl: float = math.inf

    @property
    def message(self) -> str:
        if self.selected is None:
            return "no t0 qualifies"
        return f"selected t0={self.selected:g}"


def t0_sweep(candidates: Iterable[float], train_and_eval: Callable[[float], tuple[float, int]],
             baseline_skl: float, label: str = "") -> SweepReport:
    """Evaluate each candidate t0 (largest first) and pick the largest that is no worse than baseline."""
    cands = [float(c) for c in candidates]
    if not cands:
        raise InvalidArgument("empty t0 grid")
    if cands != sorted(cands, reverse=True):
        raise InvalidArgument("t0 candidates must be sorted in descending order")
    report = SweepReport(None, baseline_skl=baseline_skl)
    for t0 in cands:
        value, n_eval = train_and_eval(t0)
        ok = bool(value <= baseline_skl)
        report.rows.append(SweepRow(t0, float(value), int(n_eval), ok, label))
        if ok and report.selected is None:
            report.selected = t0
    return report


METRICS_HEADER = "run_id,t0,nfe,skl,wall_seconds,eps,n_eval,seed"


def metrics_line(run_id: str, t0: float, nfe: int, value: float, wall_seconds: float,
                 eps: float, n_eval: int, seed: int) -> str:
    return f"{run_id},{t0!r},{nfe},{value!r},{wall_seconds!r},{eps!r},{n_eval},{seed}"


def write_metrics(path, lines: list[str]) -> None:
    atomic_write_text(path, "\n".join([METRICS_HEADER] + lines) + "\n")
