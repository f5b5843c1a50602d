"""Cheap draft-sample sources used as warm-start initial distributions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (Dataset, GridSpec, InvalidArgument, RngStream, ValidationError,
                   as_generator, load_dataset)

# corruption levels for the three contrived quality tiers
TIERS = {"pretty_good": 0.2, "fair": 0.3, "poor": 0.5}


@dataclass(frozen=True)
class DraftModel:
    kind: str = "corrupted_data"
    p_noise: float = 0.0
    path: str | None = None

    def __post_init__(self):
        if self.kind == "corrupted_data":
            if not 0.0 <= self.p_noise <= 1.0:
                raise InvalidArgument(f"p_noise must lie in [0, 1], got {self.p_noise}")
        elif self.kind == "file":
            if not self.path:
                raise InvalidArgument("file drafts need a path")
        else:
            raise InvalidArgument(f"unknown draft kind {self.kind!r}")

    @classmethod
    def tier(cls, name: str) -> "DraftModel":
        try:
            return cls("corrupted_data", TIERS[name])
        except KeyError:
            raise InvalidArgument(f"unknown tier {name!r}; choose from {sorted(TIERS)}") from None


def corrupt(tokens: np.ndarray, p_noise: float, vocab: int, gen: np.random.Generator) -> np.ndarray:
    """Replace each token by a uniform draw with probability ``p_noise``."""
    hit = gen.random(tokens.shape) < p_noise
    fresh = gen.integers(0, vocab, size=tokens.shape)
    return np.where(hit, fresh, tokens)


def sample_draft(model: DraftModel, data: Dataset | None, n: int,
                 rng: RngStream | np.random.Generator, vocab: int | None = None) -> Dataset:
    if n <= 0:
        raise InvalidArgument("n must be positive")
    if model.kind == "file":
        drafts = load_dataset(model.path, vocab if vocab is not None else
                              (data.spec.vocab if data is not None else 128))
        if data is not None and drafts.spec != data.spec:
            raise ValidationError(f"draft file grid {drafts.spec} does not match data {data.spec}")
        return drafts
    if data is None or len(data) == 0:
        raise InvalidArgument("corrupted_data drafts need a non-empty dataset")
    gen = as_generator(rng)
    base = data.tokens[gen.integers(0, len(data), size=n)]
    return Dataset(data.spec, corrupt(base, model.p_noise, data.spec.vocab, gen))


def uniform_noise(spec: GridSpec, n: int, rng: RngStream | np.random.Generator) -> Dataset:
    """Pure-noise source: every token uniform over the vocabulary."""
    if n <= 0:
        raise InvalidArgument("n must be positive")
    return Dataset(spec, as_generator(rng).integers(0, spec.vocab, size=(n, spec.n_tokens)))
