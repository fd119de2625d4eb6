"""Seeded generator for small social networks with planted communities.

Posts are split into communities by label (fake posts first), so with two
communities and half the posts fake, community membership equals the label.
Each post draws commenters from its own community with probability
``homophily`` and from the others otherwise. A commenter's planted stance is
"agree" toward posts of their own community and "disagree" elsewhere,
replaced by one of the other two stances with probability
``1 - stance_fidelity``. Comment texts are sampled from phrase pools until the
stance detector reproduces the planted stance.

Titles use one vocabulary shared by all communities, so the text carries no
label signal; the label is visible only through cited sources and the graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources

import numpy as np

from ._io import format_timestamp, write_json, write_jsonl
from .embedding import EmbedderConfig, cosine, embed
from .exceptions import ConfigError, EmptyText
from .graph import Comment, Post, stance_from_similarity
from .labels import Label
from .retrieval import CredibilityTable, NewsArticle

MANIFEST_FORMAT_VERSION = 1
_EPOCH = datetime(2017, 1, 1, tzinfo=timezone.utc)
_MAX_TEXT_TRIES = 60


@dataclass(frozen=True)
class SynthConfig:
    n_posts: int = 400
    n_authors: int = 150
    n_communities: int = 2
    homophily: float = 0.9
    fake_fraction: float = 0.5
    comment_rate: float = 5.0
    stance_fidelity: float = 0.9
    seed: int = 42
    # probability a post's article comes from an outlet of the opposite credibility tier
    citation_noise: float = 0.15
    # probability a post has any matching article at all
    coverage: float = 0.9

    def __post_init__(self):
        if self.n_posts < 1:
            raise ConfigError("n_posts must be >= 1")
        if self.n_authors < 0:
            raise ConfigError("n_authors must be >= 0")
        if self.n_communities < 1:
            raise ConfigError("n_communities must be >= 1")
        if self.n_communities > self.n_posts:
            raise ConfigError("more communities than posts")
        for name in ("homophily", "fake_fraction", "stance_fidelity", "citation_noise", "coverage"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.comment_rate < 0:
            raise ConfigError("comment_rate must be >= 0")
        if self.comment_rate > 0 and self.n_authors < self.n_communities:
            raise ConfigError(f"comment_rate > 0 needs at least one author per community "
                              f"({self.n_authors} authors, {self.n_communities} communities)")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")

    @property
    def n_fake(self) -> int:
        return math.floor(self.fake_fraction * self.n_posts + 0.5)


@dataclass
class SyntheticData:
    posts: list[Post]
    comments: list[Comment]
    articles: list[NewsArticle]
    table: CredibilityTable
    labels: dict[str, Label]
    manifest: dict = field(default_factory=dict)

    def save(self, outdir) -> dict[str, str]:
        """Write every artifact under ``outdir``; returns name -> path."""
        from pathlib import Path
        out = Path(outdir)
        paths = {
            "posts": out / "posts.jsonl",
            "comments": out / "comments.jsonl",
            "articles": out / "articles.jsonl",
            "credibility": out / "credibility.csv",
            "labels": out / "labels.jsonl",
            "manifest": out / "synthetic_manifest.json",
        }
        write_jsonl(paths["posts"], (p.to_dict() for p in self.posts))
        write_jsonl(paths["comments"], (c.to_dict() for c in self.comments))
        write_jsonl(paths["articles"], (a.to_dict() for a in self.articles))
        self.table.to_csv(paths["credibility"])
        write_jsonl(paths["labels"], ({"id": k, "label": str(v)} for k, v in self.labels.items()))
        write_json(paths["manifest"], self.manifest)
        return {k: str(v) for k, v in paths.items()}


def load_phrases() -> dict:
    with resources.files("credirag").joinpath("data/synth_phrases.json").open(encoding="utf-8") as fh:
        return json.load(fh)


def _sources(rng) -> CredibilityTable:
    table = {}
    for i in range(5):
        table[f"lowcred-{i + 1:02d}"] = float(rng.integers(6, 27))
        table[f"highcred-{i + 1:02d}"] = float(rng.integers(38, 61))
    return CredibilityTable(table)


class _TextSampler:
    """Draws comment texts whose detected stance matches a target."""

    def __init__(self, phrases: dict, rng, cfg: EmbedderConfig):
        self.topic = phrases["topic_words"]
        self.offtopic = phrases["offtopic_words"]
        self.pools = phrases["community_pools"]
        self.rng = rng
        self.cfg = cfg

    def _pick(self, words, k):
        idx = self.rng.choice(len(words), size=min(k, len(words)), replace=False)
        return [words[i] for i in sorted(idx)]

    def headline(self) -> str:
        words = [self.topic[i] for i in self.rng.choice(len(self.topic), size=int(self.rng.integers(7, 11)), replace=False)]
        return " ".join(words).capitalize()

    def body(self) -> str:
        if self.rng.random() < 0.5:
            return ""
        return " ".join(self.topic[i] for i in self.rng.choice(len(self.topic), size=int(self.rng.integers(4, 8)), replace=False))

    def _draft(self, stance: int, post_tokens: list[str], community: int) -> str:
        pool = self.pools[community % len(self.pools)]
        if stance == 1:
            phrase = pool["agree"][self.rng.integers(len(pool["agree"]))]
            keep = self._pick(post_tokens, max(1, int(round(len(post_tokens) * self.rng.uniform(0.7, 1.0)))))
            return f"{phrase} {' '.join(keep)}"
        if stance == 0:
            phrase = pool["neutral"][self.rng.integers(len(pool["neutral"]))]
            keep = self._pick(post_tokens, int(self.rng.integers(2, 4)))
            filler = self._pick(self.offtopic, int(self.rng.integers(3, 7)))
            return f"{' '.join(keep)} {phrase} {' '.join(filler)}"
        phrase = pool["disagree"][self.rng.integers(len(pool["disagree"]))]
        filler = self._pick(self.offtopic, int(self.rng.integers(5, 10)))
        return f"{phrase} {' '.join(filler)}"

    def comment(self, stance: int, post_text: str, post_vec, community: int) -> tuple[str, int]:
        tokens = post_text.lower().split()
        detected = None
        for _ in range(_MAX_TEXT_TRIES):
            text = self._draft(stance, tokens, community)
            try:
                detected = stance_from_similarity(cosine(embed(text, self.cfg), post_vec))
            except EmptyText:
                continue
            if detected == stance:
                break
        return text, detected


def generate_synthetic(cfg: SynthConfig = SynthConfig(),
                       embedder: EmbedderConfig = EmbedderConfig()) -> SyntheticData:
    rng = np.random.default_rng(cfg.seed)
    sampler = _TextSampler(load_phrases(), rng, embedder)
    n = cfg.n_posts

    # labels sorted fake-first, then cut into contiguous communities
    sorted_labels = np.array([Label.FAKE] * cfg.n_fake + [Label.REAL] * (n - cfg.n_fake))
    sorted_comm = np.empty(n, dtype=int)
    for c, chunk in enumerate(np.array_split(np.arange(n), cfg.n_communities)):
        sorted_comm[chunk] = c
    perm = rng.permutation(n)
    labels = sorted_labels[perm]
    community = sorted_comm[perm]

    author_comm = np.arange(cfg.n_authors) % cfg.n_communities
    authors_in = [np.flatnonzero(author_comm == c) for c in range(cfg.n_communities)]
    authors_out = [np.flatnonzero(author_comm != c) for c in range(cfg.n_communities)]
    author_name = [f"u{i:04d}" for i in range(cfg.n_authors)]

    table = _sources(rng)
    low = sorted(s for s in table if s.startswith("lowcred"))
    high = sorted(s for s in table if s.startswith("highcred"))

    posts, articles, post_rows = [], [], []
    for i in range(n):
        pid = f"p{i:04d}"
        c = int(community[i])
        created = _EPOCH + timedelta(seconds=int(rng.integers(0, 365 * 86400)))
        if len(authors_in[c]):
            author = author_name[int(rng.choice(authors_in[c]))]
        else:
            author = "anonymous"
        post = Post(pid, sampler.headline(), sampler.body(), author, created, f"community{c}")
        posts.append(post)
        covered = bool(rng.random() < cfg.coverage)
        noisy = bool(rng.random() < cfg.citation_noise)
        source = None
        if covered:
            credible = (labels[i] == Label.REAL) != noisy
            tier = high if credible else low
            source = tier[int(rng.integers(len(tier)))]
            published = created - timedelta(seconds=int(rng.integers(0, 36 * 3600)))
            articles.append(NewsArticle(f"a{i:04d}", post.title, post.body, source, published))
        post_rows.append({"id": pid, "label": str(Label(labels[i])), "community": c,
                          "covered": covered, "noisy_citation": noisy if covered else False,
                          "source": source})

    for j in range(n // 4):
        published = _EPOCH + timedelta(seconds=int(rng.integers(0, 365 * 86400)))
        src_tier = high if rng.random() < 0.5 else low
        articles.append(NewsArticle(f"d{j:04d}", sampler.headline(), sampler.body(),
                                    src_tier[int(rng.integers(len(src_tier)))], published))

    comments, comment_rows = [], []
    for i, post in enumerate(posts):
        c = int(community[i])
        if cfg.comment_rate == 0:
            continue
        k = int(rng.poisson(cfg.comment_rate))
        chosen: list[int] = []
        for _ in range(k):
            for _attempt in range(10):
                pool = authors_in[c] if (rng.random() < cfg.homophily or not len(authors_out[c])) else authors_out[c]
                a = int(rng.choice(pool))
                if a not in chosen:
                    chosen.append(a)
                    break
        post_vec = embed(post.text, embedder)
        for a in chosen:
            planted = 1 if author_comm[a] == c else -1
            if rng.random() >= cfg.stance_fidelity:
                planted = [s for s in (-1, 0, 1) if s != planted][int(rng.integers(2))]
            text, detected = sampler.comment(planted, post.text, post_vec, int(author_comm[a]))
            cid = f"c{len(comments):05d}"
            comments.append(Comment(cid, post.id, author_name[a], text))
            comment_rows.append({"id": cid, "planted_stance": planted, "detected_stance": detected})

    recovered = sum(r["planted_stance"] == r["detected_stance"] for r in comment_rows)
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "config": asdict(cfg),
        "embedder": embedder.to_dict(),
        "posts": post_rows,
        "comments": comment_rows,
        "authors": {author_name[a]: int(author_comm[a]) for a in range(cfg.n_authors)},
        "stance_recovery": recovered / len(comment_rows) if comment_rows else 1.0,
        "counts": {"posts": n, "fake": cfg.n_fake, "real": n - cfg.n_fake,
                   "comments": len(comments), "articles": len(articles)},
    }
    return SyntheticData(posts, comments, articles, table,
                         {p.id: Label(labels[i]) for i, p in enumerate(posts)}, manifest)


def manifest_to_json(manifest: dict) -> str:
    return json.dumps(manifest, sort_keys=True, indent=1)


def manifest_from_json(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise ValueError("unsupported synthetic manifest version")
    return doc
