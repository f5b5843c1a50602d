"""Domain types, grid datasets, run configuration and RNG streams.

A state is a fixed-length sequence of ``n_tokens`` categorical tokens, each in
``[0, vocab)``. Collections of states are stored as integer arrays of shape
``(n, n_tokens)`` rather than as lists of per-sample objects.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

TOKEN_DTYPE = np.int64


class WSDFMError(Exception):
    """Base class for library errors."""


class InvalidArgument(WSDFMError, ValueError):
    pass


class ValidationError(WSDFMError, ValueError):
    pass


class ParseError(WSDFMError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalFailure(WSDFMError, ArithmeticError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_tokens: int = 2
    vocab: int = 128

    def __post_init__(self):
        if int(self.n_tokens) < 1:
            raise InvalidArgument(f"n_tokens must be >= 1, got {self.n_tokens}")
        if int(self.vocab) < 2:
            raise InvalidArgument(f"vocab must be >= 2, got {self.vocab}")

    def check(self, tokens: np.ndarray) -> np.ndarray:
        """Coerce ``tokens`` to a 2-D token array conforming to this grid."""
        arr = np.asarray(tokens)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.n_tokens:
            raise ValidationError(
                f"expected sequences of length {self.n_tokens}, got shape {arr.shape}"
            )
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValidationError("tokens must be integers")
        arr = arr.astype(TOKEN_DTYPE, copy=False)
        if arr.size and (arr.min() < 0 or arr.max() >= self.vocab):
            raise ValidationError(f"token out of range [0, {self.vocab})")
        return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """An empirical sample set: ``tokens`` has shape ``(n, spec.n_tokens)``."""

    spec: GridSpec
    tokens: np.ndarray

    def __post_init__(self):
        arr = self.spec.check(self.tokens)
        if arr.shape[0] == 0:
            raise InvalidArgument("dataset must be non-empty")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "tokens", arr)

    def __len__(self) -> int:
        return self.tokens.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.tokens, other.tokens)

    @property
    def samples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.tokens]


# ---------------------------------------------------------------------------
# RNG streams


@dataclass(frozen=True)
class RngStream:
    """A named counter-based stream keyed by ``(seed, label, index)``.

    Streams are Philox generators whose 128-bit key is a hash of the triple,
    so any stream can be rebuilt independently of the order in which others
    were consumed.
    """

    seed: int
    label: str = "root"
    index: int = 0

    def key(self) -> int:
        payload = f"{int(self.seed) & (2**64 - 1)}/{self.label}/{int(self.index)}".encode()
        return int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "little")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))

    def child(self, label: str, index: int = 0) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}", index)


def as_generator(rng: RngStream | np.random.Generator | int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    """Flat run configuration; serialized as one JSON object per run."""

    seed: int = 0
    t0: float = 0.0
    step_size: float = 0.05
    batch_size: int = 256
    iterations: int = 50_000
    learning_rate: float = 3e-4
    finetune_learning_rate: float = 1e-5
    hidden_dim: int = 128
    n_layers: int = 4
    embed_dim: int = 128
    n_tokens: int = 2
    vocab: int = 128
    n_data: int = 100_000
    noise_std: float = 0.03
    n_drafts: int = 20_000
    k: int = 5
    k_inject: int = 5
    n_eval: int = 100_000
    eps: float = 1e-6
    checkpoint_every: int = 5_000
    probe_n: int = 10_000
    probe_t0: float = 0.8

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.t0 < 1.0:
            raise InvalidArgument(f"t0 must lie in [0, 1), got {self.t0}")
        if not 0.0 < self.step_size <= 1.0:
            raise InvalidArgument(f"step_size must lie in (0, 1], got {self.step_size}")
        if self.t0 + self.step_size > 1.0 + 1e-9:
            raise InvalidArgument("t0 + step_size must not exceed 1")
        for name in ("batch_size", "hidden_dim", "embed_dim", "n_tokens", "n_data",
                     "n_drafts", "n_eval", "checkpoint_every", "probe_n"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgument(f"{name} must be positive")
        if self.iterations < 0:
            raise InvalidArgument("iterations must be non-negative")
        if self.n_layers < 2:
            raise InvalidArgument("n_layers must be at least 2")
        if self.vocab < 2:
            raise InvalidArgument("vocab must be >= 2")
        if self.learning_rate <= 0 or self.finetune_learning_rate <= 0:
            raise InvalidArgument("learning rates must be positive")
        if self.k < 0 or self.k_inject < 0:
            raise InvalidArgument("k and k_inject must be non-negative")
        if self.eps <= 0:
            raise InvalidArgument("eps must be positive")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n_tokens, self.vocab)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(names)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            caster = type(getattr(cls(), key)) if key in names else None
            try:
                kwargs[key] = caster(value) if caster is not None else value
            except (TypeError, ValueError) as exc:
                raise InvalidArgument(f"bad value for {key}: {value!r}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON config: {exc.msg}", exc.lineno) from exc
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# Grid geometry


def quantize(point, spec: GridSpec) -> np.ndarray:
    """Map unit-interval coordinates to grid tokens (``floor(c * V)``, clamped)."""
    c = np.asarray(point, dtype=np.float64)
    idx = np.floor(c * spec.vocab).astype(TOKEN_DTYPE)
    return np.clip(idx, 0, spec.vocab - 1)


def dequantize(tokens, spec: GridSpec) -> np.ndarray:
    """Cell centres ``(v + 0.5) / V`` of the given tokens."""
    return (np.asarray(tokens, dtype=np.float64) + 0.5) / spec.vocab


MOON_RADIUS = 0.3
UPPER_CENTER = (0.35, 0.55)
LOWER_CENTER = (0.65, 0.45)


def moon_points(angles: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Noise-free two-moons coordinates for angles in ``[0, pi]``."""
    cx = np.where(lower, LOWER_CENTER[0], UPPER_CENTER[0])
    cy = np.where(lower, LOWER_CENTER[1], UPPER_CENTER[1])
    sign = np.where(lower, -1.0, 1.0)
    return np.stack([cx + MOON_RADIUS * np.cos(angles),
                     cy + sign * MOON_RADIUS * np.sin(angles)], axis=-1)


def two_moons_dataset(n: int, noise_std: float, spec: GridSpec,
                      rng: RngStream | np.random.Generator) -> Dataset:
    if n <= 0:
        raise InvalidArgument("n must be positive")
    if spec.n_tokens != 2:
        raise InvalidArgument("two-moons data needs n_tokens == 2")
    if noise_std < 0:
        raise InvalidArgument("noise_std must be non-negative")
    gen = as_generator(rng)
    lower = gen.random(n) < 0.5
    angles = gen.uniform(0.0, math.pi, size=n)
    pts = moon_points(angles, lower)
    if noise_std > 0:
        pts = pts + gen.normal(0.0, noise_std, size=pts.shape)
    return Dataset(spec, quantize(pts, spec))


# ---------------------------------------------------------------------------
# File formats


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_int_csv(header: Iterable[str], rows: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    if rows.size:
        np.savetxt(buf, rows, fmt="%d", delimiter=",")
    return buf.getvalue()


def parse_int_csv(path: str | os.PathLike, expected_header: list[str] | None = None,
                  n_cols: int | None = None) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read a headered CSV of decimal integers, reporting the offending line."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if expected_header is not None and header != expected_header:
            raise ParseError(f"expected header {','.join(expected_header)}", 1)
        width = n_cols if n_cols is not None else len(header)
        if len(header) != width:
            raise ParseError(f"expected {width} columns in header", 1)
        rows, lines = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ParseError(f"row has {len(row)} fields, expected {width}", line)
            try:
                rows.append([int(c) for c in row])
                lines.append(line)
            except ValueError:
                raise ParseError(f"non-integer field in row {row!r}", line) from None
    arr = np.array(rows, dtype=TOKEN_DTYPE).reshape(-1, width)
    return header, arr, np.array(lines, dtype=np.int64)


def check_token_range(arr: np.ndarray, lines: np.ndarray, vocab: int) -> None:
    bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= vocab).any(axis=1))
    if bad.size:
        raise ValidationError(f"line {int(lines[bad[0]])}: token out of range [0, {vocab})")


def dataset_header(spec: GridSpec) -> list[str]:
    return [f"tok{i}" for i in range(spec.n_tokens)]


def save_dataset(path: str | os.PathLike, data: Dataset) -> None:
    atomic_write_text(path, format_int_csv(dataset_header(data.spec), data.tokens))


def load_dataset(path: str | os.PathLike, vocab: int = 128) -> Dataset:
    header, arr, lines = parse_int_csv(path)
    if not header or any(h != f"tok{i}" for i, h in enumerate(header)):
        raise ParseError("header must be tok0,...,tok{N-1}", 1)
    spec = GridSpec(len(header), vocab)
    if arr.shape[0] == 0:
        raise ParseError("no samples in file")
    check_token_range(arr, lines, vocab)
    return Dataset(spec, arr)
