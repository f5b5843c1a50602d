"""Couplings between draft samples and data, realized as explicit pairs."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (Dataset, GridSpec, InvalidArgument, ParseError, RngStream,
                   as_generator, atomic_write_text, check_token_range, dequantize,
                   format_int_csv, parse_int_csv)

KINDS = ("independent", "knn", "knn_injected")


@dataclass(frozen=True, eq=False)
class PairedDataset:
    """Explicit samples of Q(x_src, x_dst); ``src`` and ``dst`` are ``(n, N)`` arrays."""

    spec: GridSpec
    src: np.ndarray
    dst: np.ndarray

    def __post_init__(self):
        src = self.spec.check(self.src)
        dst = self.spec.check(self.dst)
        if src.shape != dst.shape:
            raise InvalidArgument("src and dst must have the same shape")
        if src.shape[0] == 0:
            raise InvalidArgument("paired dataset must be non-empty")
        for name, arr in (("src", src), ("dst", dst)):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.src.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PairedDataset):
            return NotImplemented
        return (self.spec == other.spec and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst))

    @property
    def pairs(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        return [(tuple(map(int, a)), tuple(map(int, b))) for a, b in zip(self.src, self.dst)]


@dataclass(frozen=True)
class CouplingSpec:
    kind: str = "knn_injected"
    k: int = 5
    k_inject: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown coupling kind {self.kind!r}")
        if self.kind != "independent" and self.k < 1:
            raise InvalidArgument("k must be >= 1 for nearest-neighbour couplings")
        if self.k_inject < 0:
            raise InvalidArgument("k_inject must be >= 0")
        if self.kind == "knn" and self.k_inject:
            raise InvalidArgument("kind 'knn' takes no injected pairs; use 'knn_injected'")

    @property
    def pairs_per_draft(self) -> int:
        return self.k + self.k_inject


def _same_spec(a: Dataset, b: Dataset) -> None:
    if a.spec != b.spec:
        raise InvalidArgument(f"grid mismatch: {a.spec} vs {b.spec}")


def independent_pairs(srcs: Dataset, data: Dataset, n: int,
                      rng: RngStream | np.random.Generator) -> PairedDataset:
    _same_spec(srcs, data)
    if n <= 0:
        raise InvalidArgument("n must be positive")
    gen = as_generator(rng)
    i = gen.integers(0, len(srcs), size=n)
    j = gen.integers(0, len(data), size=n)
    return PairedDataset(data.spec, srcs.tokens[i], data.tokens[j])


def knn_indices(drafts: np.ndarray, data: Dataset, k: int) -> np.ndarray:
    """``(m, k)`` indices into ``data`` of each draft's nearest neighbours."""
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    if k > len(data):
        raise InvalidArgument(f"k={k} exceeds dataset size {len(data)}")
    drafts = data.spec.check(drafts)
    # integer squared distance orders cells exactly as the Euclidean distance
    # between cell centres does, without float ties being split by rounding
    return kernels.knn_indices(drafts, data.tokens, k)


def knn(draft, data: Dataset, k: int, return_distance: bool = False):
    """The ``k`` data samples nearest to ``draft``, closest first (lower index wins ties)."""
    idx = knn_indices(np.asarray(draft)[None, :], data, k)[0]
    neighbours = data.tokens[idx]
    if not return_distance:
        return neighbours
    diff = dequantize(neighbours, data.spec) - dequantize(np.asarray(draft), data.spec)
    return neighbours, np.sqrt((diff ** 2).sum(axis=1))


def build_coupling(drafts: Dataset, data: Dataset, spec: CouplingSpec,
                   rng: RngStream | np.random.Generator) -> PairedDataset:
    """Pair every draft with its k nearest neighbours and k_inject random data samples.

    Pairs are grouped per draft in draft order: neighbours first (closest
    first), then injected samples.
    """
    _same_spec(drafts, data)
    gen = as_generator(rng)
    m = len(drafts)
    if spec.kind == "independent":
        return independent_pairs(drafts, data, m * max(1, spec.pairs_per_draft), gen)
    nn = knn_indices(drafts.tokens, data, spec.k)
    inject = gen.integers(0, len(data), size=(m, spec.k_inject))
    dst_idx = np.concatenate([nn, inject], axis=1)
    src = np.repeat(drafts.tokens, spec.pairs_per_draft, axis=0)
    return PairedDataset(data.spec, src, data.tokens[dst_idx.ravel()])


def pairs_header(spec: GridSpec) -> list[str]:
    return ([f"src{i}" for i in range(spec.n_tokens)] +
            [f"dst{i}" for i in range(spec.n_tokens)])


def save_pairs(path: str | os.PathLike, pairs: PairedDataset) -> None:
    rows = np.concatenate([pairs.src, pairs.dst], axis=1)
    atomic_write_text(path, format_int_csv(pairs_header(pairs.spec), rows))


def load_pairs(path: str | os.PathLike, vocab: int = 128) -> PairedDataset:
    header, arr, lines = parse_int_csv(path)
    if len(header) % 2 or not header:
        raise ParseError("pairs header must list src0.. then dst0..", 1)
    spec = GridSpec(len(header) // 2, vocab)
    if header != pairs_header(spec):
        raise ParseError(f"expected header {','.join(pairs_header(spec))}", 1)
    if arr.shape[0] == 0:
        raise ParseError("no pairs in file")
    check_token_range(arr, lines, vocab)
    n = spec.n_tokens
    return PairedDataset(spec, arr[:, :n], arr[:, n:])
