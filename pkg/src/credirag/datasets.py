"""Ground-truth matching of posts to labeled articles, and labeled-dataset records."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from ._io import format_timestamp, parse_timestamp, read_jsonl, write_jsonl
from .embedding import EmbedderConfig, embed
from .exceptions import ConfigError, EmptyText
from .graph import Comment, Post
from .labels import Label


@dataclass(frozen=True)
class GroundTruthArticle:
    title: str
    label: Label
    published_at: datetime

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("ground-truth article title is empty")


def load_ground_truth_csv(path) -> list[GroundTruthArticle]:
    """Read ``title,label,published_at`` rows; labels are fake/real in any case."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"title", "label", "published_at"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'title,label,published_at'")
        return [GroundTruthArticle(row["title"], Label.parse(row["label"]),
                                   parse_timestamp(row["published_at"])) for row in reader]


@dataclass
class LabeledRecord:
    """One post's labels across stages; ``provenance`` names where each came from."""

    id: str
    ground_truth: Label | None = None
    initial_label: Label | None = None
    y_hat: float | None = None
    abstain: bool = False
    refined_label: Label | None = None
    p_real: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.refined_label is not None and self.initial_label is None and not self.abstain:
            raise ValueError(f"{self.id}: refined label without an initial label")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("ground_truth", "initial_label", "refined_label"):
            d[k] = None if d[k] is None else str(Label(d[k]))
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "LabeledRecord":
        d = dict(d)
        for k in ("ground_truth", "initial_label", "refined_label"):
            if d.get(k) is not None:
                d[k] = Label.parse(d[k])
        return cls(**d)


@dataclass
class LabeledDataset:
    records: list[LabeledRecord]
    unmatched: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def by_id(self) -> dict[str, LabeledRecord]:
        return {r.id: r for r in self.records}

    def save(self, path) -> None:
        write_jsonl(path, (r.to_dict() for r in self.records))

    @classmethod
    def load(cls, path) -> "LabeledDataset":
        return cls([LabeledRecord.from_dict(d) for d in read_jsonl(path)])


def match_posts(posts: Sequence[Post], articles: Sequence[GroundTruthArticle],
                window_days: float = 2, threshold: float = 0.7,
                cfg: EmbedderConfig = EmbedderConfig(),
                post_vectors: np.ndarray | None = None,
                article_vectors: np.ndarray | None = None) -> LabeledDataset:
    """Label each post with the most similar ground-truth article in its time window.

    A post matches an article when the absolute time difference is at most
    ``window_days`` days and the cosine of their title embeddings is at least
    ``threshold``. The best match wins; ties go to the earliest article.
    Posts without any match are listed in ``unmatched``.
    """
    if window_days < 0:
        raise ConfigError("window_days must be >= 0")
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    if article_vectors is None:
        article_vectors = (np.vstack([embed(a.title, cfg) for a in articles]) if articles
                           else np.zeros((0, cfg.dimension)))
    article_vectors = np.asarray(article_vectors, dtype=float)
    art_ts = np.array([a.published_at.timestamp() for a in articles])
    window_s = window_days * 86400.0

    records, unmatched = [], []
    for i, post in enumerate(posts):
        if post_vectors is not None:
            pv = np.asarray(post_vectors[i], dtype=float)
        else:
            try:
                pv = embed(post.title, cfg)
            except EmptyText:
                unmatched.append(post.id)
                continue
        if post.created_at is None or not len(articles):
            unmatched.append(post.id)
            continue
        delta = np.abs(art_ts - post.created_at.timestamp())
        norms = np.linalg.norm(article_vectors, axis=1) * np.linalg.norm(pv)
        sims = (article_vectors @ pv) / np.where(norms > 0, norms, np.inf)
        ok = np.flatnonzero((delta <= window_s) & (sims >= threshold))
        if not len(ok):
            unmatched.append(post.id)
            continue
        best = min(ok, key=lambda j: (-sims[j], art_ts[j], j))
        art = articles[best]
        records.append(LabeledRecord(
            post.id, ground_truth=art.label,
            provenance={"ground_truth": "match", "article_index": int(best),
                        "article_title": art.title,
                        "article_published_at": format_timestamp(art.published_at),
                        "similarity": float(sims[best]), "delta_days": float(delta[best] / 86400.0)}))
    return LabeledDataset(records, unmatched)


def filter_by_comments(posts: Sequence[Post], comments: Sequence[Comment], min_comments: int) -> list[Post]:
    """Keep posts with at least ``min_comments`` comments."""
    if min_comments <= 0:
        return list(posts)
    counts = Counter(c.post_id for c in comments)
    return [p for p in posts if counts[p.id] >= min_comments]


def load_labels(path) -> dict[str, Label]:
    """Ground-truth labels from JSONL ``{"id": ..., "label": "fake"|"real"}``."""
    out = {}
    for rec in read_jsonl(path):
        out[str(rec["id"])] = Label.parse(rec["label"])
    return out


def write_labels(path, labels: Mapping[str, Label]) -> None:
    write_jsonl(path, ({"id": k, "label": str(Label(v))} for k, v in labels.items()))
