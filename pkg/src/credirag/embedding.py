"""Deterministic text embeddings via signed feature hashing.

Text is lowercased, split on anything that is not a letter or digit, expanded
into word n-grams, and each n-gram is hashed into one of ``dimension`` buckets
with a hash-derived sign. The vector is then scaled to unit length, so cosine
similarity and dot product coincide.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._io import read_jsonl
from .exceptions import ConfigError, DimensionMismatch, EmptyText, ZeroNorm

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EmbedderConfig:
    dimension: int = 256
    seed: int = 0
    ngram_range: tuple[int, int] = (1, 2)

    def __post_init__(self):
        if int(self.dimension) < 8:
            raise ConfigError(f"dimension must be >= 8, got {self.dimension}")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        lo, hi = self.ngram_range
        if lo < 1 or lo > hi:
            raise ConfigError(f"invalid ngram_range {self.ngram_range}")
        object.__setattr__(self, "ngram_range", (int(lo), int(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ngram_range"] = list(self.ngram_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedderConfig":
        return cls(int(d["dimension"]), int(d["seed"]), tuple(d["ngram_range"]))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def ngrams(tokens: list[str], ngram_range: tuple[int, int]) -> list[str]:
    lo, hi = ngram_range
    grams = []
    for n in range(lo, hi + 1):
        grams.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return grams


@lru_cache(maxsize=1 << 16)
def _bucket(gram: str, seed: int, dimension: int) -> tuple[int, float]:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8,
                             key=seed.to_bytes(8, "little")).digest()
    h = int.from_bytes(digest, "little")
    return h % dimension, (1.0 if (h >> 63) & 1 else -1.0)


def embed(text: str, cfg: EmbedderConfig = EmbedderConfig()) -> np.ndarray:
    """Embed ``text`` into a unit vector of length ``cfg.dimension``.

    Raises :class:`EmptyText` when the text has no tokens, or when every
    hashed count cancels out (the vector would have zero norm).
    """
    grams = ngrams(tokenize(text), cfg.ngram_range)
    if not grams:
        raise EmptyText(f"text has no tokens: {text[:40]!r}")
    vec = np.zeros(cfg.dimension)
    for g in grams:
        idx, sign = _bucket(g, cfg.seed, cfg.dimension)
        vec[idx] += sign
    norm = math.sqrt(float(vec @ vec))
    if norm == 0.0:
        raise EmptyText(f"hashed features cancel out for {text[:40]!r}")
    return vec / norm


def dot(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(a @ b)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine of a zero vector is undefined")
    # clip guards against 1 + ulp from rounding
    return float(min(1.0, max(-1.0, float(a @ b) / (na * nb))))


def load_embeddings(path, dimension: int | None = None) -> dict[str, np.ndarray]:
    """Read externally computed vectors from JSONL ``{"id": ..., "vector": [...]}``.

    Vectors are rescaled to unit norm so they can stand in for :func:`embed`.
    """
    out = {}
    for rec in read_jsonl(path):
        vec = np.asarray(rec["vector"], dtype=float)
        if dimension is not None and vec.shape != (dimension,):
            raise DimensionMismatch(f"{rec['id']}: expected {dimension} values, got {vec.size}")
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ZeroNorm(f"{rec['id']}: zero vector")
        out[str(rec["id"])] = vec / norm
    return out


class HashingEmbedder(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping an iterable of strings to unit vectors."""

    def __init__(self, dimension=256, seed=0, ngram_range=(1, 2)):
        self.dimension = dimension
        self.seed = seed
        self.ngram_range = ngram_range

    @property
    def config(self) -> EmbedderConfig:
        return EmbedderConfig(self.dimension, self.seed, tuple(self.ngram_range))

    def fit(self, X=None, y=None):
        self.n_features_out_ = self.config.dimension
        return self

    def transform(self, X) -> np.ndarray:
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        cfg = self.config
        rows = [embed(t, cfg) for t in X]
        if not rows:
            return np.zeros((0, cfg.dimension))
        return np.vstack(rows)

    def __sklearn_is_fitted__(self):
        return True
