"""Exact inner-product retrieval over a local news corpus and credibility labeling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ._io import format_timestamp, parse_timestamp, read_json, read_jsonl, write_json
from .embedding import EmbedderConfig, embed
from .exceptions import (ConfigError, DimensionMismatch, DuplicateId, EmptyText,
                         NoEvidence, OutOfRange, UnknownSource)
from .labels import Label

INDEX_FORMAT_VERSION = 1
MAX_RAW_SCORE = 64.0


@dataclass(frozen=True)
class NewsArticle:
    id: str
    title: str
    body: str
    source: str
    published_at: datetime

    @property
    def text(self) -> str:
        return f"{self.title} {self.body}".strip()

    @classmethod
    def from_dict(cls, d: Mapping) -> "NewsArticle":
        return cls(str(d["id"]), d.get("title", ""), d.get("body", ""), d["source"],
                   parse_timestamp(d["published_at"]))

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "body": self.body,
                "source": self.source, "published_at": format_timestamp(self.published_at)}


def normalize_credibility(raw: float) -> float:
    """Scale a 0-64 reliability rating onto [0, 1]."""
    raw = float(raw)
    if not 0.0 <= raw <= MAX_RAW_SCORE:
        raise OutOfRange(f"raw credibility {raw} outside [0, 64]")
    return raw / MAX_RAW_SCORE


class CredibilityTable(dict):
    """Mapping of source key to raw 0-64 reliability score."""

    def __init__(self, scores: Mapping[str, float] | Iterable = ()):
        super().__init__()
        for source, raw in dict(scores).items():
            self[source] = raw

    def __setitem__(self, source, raw):
        raw = float(raw)
        if not 0.0 <= raw <= MAX_RAW_SCORE:
            raise OutOfRange(f"{source}: raw credibility {raw} outside [0, 64]")
        if not source:
            raise ValueError("empty source key")
        super().__setitem__(str(source), raw)

    def normalized(self, source: str) -> float:
        return normalize_credibility(self[source])

    @classmethod
    def from_csv(cls, path) -> "CredibilityTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"source", "raw_score"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected header 'source,raw_score'")
            return cls({row["source"]: float(row["raw_score"]) for row in reader})

    def to_csv(self, path) -> None:
        from ._io import atomic_open
        with atomic_open(path) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["source", "raw_score"])
            for source in sorted(self):
                writer.writerow([source, repr(self[source])])


@dataclass
class RetrievalResult:
    entries: list[tuple[str, float]]
    y_hat: float | None = None

    @property
    def abstain(self) -> bool:
        return not self.entries


@dataclass(frozen=True)
class NewsIndex:
    """Immutable corpus index. Articles are held sorted by id so that a stable
    sort on score breaks ties by ascending id."""

    articles: tuple[NewsArticle, ...]
    embeddings: np.ndarray
    table: CredibilityTable
    config: EmbedderConfig = field(default_factory=EmbedderConfig)

    def __post_init__(self):
        self.embeddings.setflags(write=False)
        object.__setattr__(self, "_pos", {a.id: i for i, a in enumerate(self.articles)})

    def __len__(self):
        return len(self.articles)

    def article(self, article_id: str) -> NewsArticle:
        return self.articles[self._pos[article_id]]

    def save(self, path) -> None:
        write_json(path, {
            "format_version": INDEX_FORMAT_VERSION,
            "embedder": self.config.to_dict(),
            "articles": [a.to_dict() for a in self.articles],
            "embeddings": self.embeddings.tolist(),
            "credibility": dict(sorted(self.table.items())),
        })

    @classmethod
    def load(cls, path) -> "NewsIndex":
        doc = read_json(path)
        if doc.get("format_version") != INDEX_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported index format {doc.get('format_version')!r}")
        cfg = EmbedderConfig.from_dict(doc["embedder"])
        emb = np.asarray(doc["embeddings"], dtype=float).reshape(len(doc["articles"]), cfg.dimension)
        return cls(tuple(NewsArticle.from_dict(a) for a in doc["articles"]), emb,
                   CredibilityTable(doc["credibility"]), cfg)


def build_index(articles: Sequence[NewsArticle], table: Mapping[str, float],
                cfg: EmbedderConfig = EmbedderConfig(),
                vectors: Mapping[str, np.ndarray] | None = None) -> NewsIndex:
    """Embed ``title + body`` of each article and freeze the corpus.

    ``vectors`` optionally supplies precomputed unit embeddings by article id.
    """
    table = table if isinstance(table, CredibilityTable) else CredibilityTable(table)
    seen = set()
    dupes = sorted({a.id for a in articles if a.id in seen or seen.add(a.id)})
    if dupes:
        raise DuplicateId(f"duplicate article ids: {dupes}")
    unknown = sorted(a.id for a in articles if a.source not in table)
    if unknown:
        raise UnknownSource(unknown)
    ordered = tuple(sorted(articles, key=lambda a: a.id))
    rows = []
    for a in ordered:
        if vectors is not None:
            vec = np.asarray(vectors[a.id], dtype=float)
            if vec.shape != (cfg.dimension,):
                raise DimensionMismatch(f"{a.id}: vector has shape {vec.shape}")
        else:
            if not a.text:
                raise EmptyText(f"article {a.id} has empty title and body")
            vec = embed(a.text, cfg)
        rows.append(vec)
    emb = np.vstack(rows) if rows else np.zeros((0, cfg.dimension))
    return NewsIndex(ordered, emb, table, cfg)


def top_k(index: NewsIndex, query, k: int = 20, floor: float = 0.8) -> list[tuple[str, float]]:
    """Exact full-scan top-``k`` by dot product, dropping scores below ``floor``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=float)
    if q.shape != (index.config.dimension,):
        raise DimensionMismatch(f"query shape {q.shape}, index dimension {index.config.dimension}")
    if len(index) == 0:
        return []
    scores = index.embeddings @ q
    order = np.argsort(-scores, kind="stable")
    out = []
    for i in order:
        if scores[i] < floor:
            break
        out.append((index.articles[i].id, float(scores[i])))
        if len(out) == k:
            break
    return out


def credibility_estimate(index: NewsIndex, entries: Sequence[tuple[str, float]]) -> float:
    """Mean normalized source credibility of the retrieved articles."""
    if not entries:
        raise NoEvidence("no retrieved articles to score")
    vals = sorted(index.table.normalized(index.article(aid).source) for aid, _ in entries)
    return float(sum(vals) / len(vals))


def initial_label(y_hat: float, tau: float = 0.5) -> Label:
    if not 0.0 < tau < 1.0:
        raise OutOfRange(f"tau must lie in (0, 1), got {tau}")
    if not 0.0 <= y_hat <= 1.0:
        raise OutOfRange(f"y_hat must lie in [0, 1], got {y_hat}")
    return Label.REAL if y_hat >= tau else Label.FAKE


def retrieve(index: NewsIndex, query, k: int = 20, floor: float = 0.8) -> RetrievalResult:
    entries = top_k(index, query, k, floor)
    return RetrievalResult(entries, credibility_estimate(index, entries) if entries else None)


class RAGLabeler(BaseEstimator):
    """Assign Fake/Real labels from the credibility of retrieved evidence.

    ``fit`` builds the index from articles and a credibility table.
    ``predict`` returns label codes, with ``ABSTAIN`` where nothing clears the
    similarity floor.
    """

    ABSTAIN = -1

    def __init__(self, k=20, floor=0.8, tau=0.5, dimension=256, seed=0, ngram_range=(1, 2)):
        self.k = k
        self.floor = floor
        self.tau = tau
        self.dimension = dimension
        self.seed = seed
        self.ngram_range = ngram_range

    def fit(self, articles, table, vectors=None):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        cfg = EmbedderConfig(self.dimension, self.seed, tuple(self.ngram_range))
        self.index_ = build_index(articles, table, cfg, vectors)
        return self

    def retrieve(self, texts) -> list[RetrievalResult]:
        cfg = self.index_.config
        return [retrieve(self.index_, embed(t, cfg), self.k, self.floor) for t in texts]

    def score_samples(self, texts) -> np.ndarray:
        """Credibility estimate per text; NaN where retrieval abstained."""
        return np.array([np.nan if r.abstain else r.y_hat for r in self.retrieve(texts)])

    def predict(self, texts) -> np.ndarray:
        out = []
        for y in self.score_samples(texts):
            out.append(self.ABSTAIN if np.isnan(y) else int(initial_label(y, self.tau)))
        return np.array(out, dtype=int)


def load_articles(path) -> list[NewsArticle]:
    return [NewsArticle.from_dict(d) for d in read_jsonl(path)]
