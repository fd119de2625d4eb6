"""Post-to-post network linking posts through shared commenters.

Each (commenter, post) pair gets a stance in {-1, 0, +1} from the cosine
between the commenter's text and the post text. Two posts are joined when at
least one author commented on both; the edge weight is the mean product of
that author's stances across all shared commenters.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import (atomic_open, dumps, format_timestamp, parse_timestamp, read_json,
                  read_jsonl, write_json)
from .embedding import EmbedderConfig, cosine, embed
from .exceptions import DanglingReference, DuplicateId, EmptyText, NoSharedCommenters

GRAPH_FORMAT_VERSION = 1
AGREE_ABOVE = 0.5
DISAGREE_BELOW = 0.1
DEFAULT_IGNORE_AUTHORS = ("[deleted]", "")


@dataclass(frozen=True)
class Post:
    id: str
    title: str
    body: str = ""
    author: str = ""
    created_at: datetime | None = None
    subreddit: str = ""

    @property
    def text(self) -> str:
        return f"{self.title} {self.body}".strip()

    @classmethod
    def from_dict(cls, d: Mapping) -> "Post":
        ts = d.get("created_at")
        return cls(str(d["id"]), d["title"], d.get("body") or "", d.get("author") or "",
                   parse_timestamp(ts) if ts is not None else None, d.get("subreddit") or "")

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "body": self.body, "author": self.author,
                "created_at": format_timestamp(self.created_at) if self.created_at else None,
                "subreddit": self.subreddit}


@dataclass(frozen=True)
class Comment:
    id: str
    post_id: str
    author: str
    text: str

    @classmethod
    def from_dict(cls, d: Mapping) -> "Comment":
        return cls(str(d["id"]), str(d["post_id"]), d.get("author") or "", d.get("text") or "")

    def to_dict(self) -> dict:
        return {"id": self.id, "post_id": self.post_id, "author": self.author, "text": self.text}


def stance_from_similarity(s: float) -> int:
    # 0.1 and 0.5 themselves are neutral
    if s > AGREE_ABOVE:
        return 1
    if s < DISAGREE_BELOW:
        return -1
    return 0


def stance(commenter_texts: Sequence[str], post: Post,
           cfg: EmbedderConfig = EmbedderConfig(), post_vector=None) -> int:
    """Stance of one author toward one post from all their comments on it."""
    if not commenter_texts:
        raise ValueError("stance needs at least one comment")
    joined = " ".join(t for t in commenter_texts if t)
    if not joined.strip():
        raise EmptyText(f"all comments on {post.id} are empty")
    pv = post_vector if post_vector is not None else embed(post.text, cfg)
    return stance_from_similarity(cosine(embed(joined, cfg), pv))


def _commenters(post_id: str, comments: Iterable[Comment], ignore=DEFAULT_IGNORE_AUTHORS) -> set[str]:
    ignore = set(ignore)
    return {c.author for c in comments if c.post_id == post_id and c.author not in ignore}


def shared_commenters(a: Post, b: Post, comments: Iterable[Comment],
                      ignore_authors=DEFAULT_IGNORE_AUTHORS) -> set[str]:
    if a.id == b.id:
        raise ValueError("shared_commenters needs two distinct posts")
    comments = list(comments)
    return _commenters(a.id, comments, ignore_authors) & _commenters(b.id, comments, ignore_authors)


def weight_edge(a: Post | str, b: Post | str, shared: Iterable[str],
                stances: Mapping[tuple[str, str], int]) -> float:
    """Mean of ``stance(c, a) * stance(c, b)`` over shared commenters ``c``.

    ``stances`` is keyed by ``(author, post_id)``.
    """
    aid = a.id if isinstance(a, Post) else a
    bid = b.id if isinstance(b, Post) else b
    shared = sorted(shared)
    if not shared:
        raise NoSharedCommenters(f"{aid} and {bid} share no commenters")
    total = sum(stances[(c, aid)] * stances[(c, bid)] for c in shared)
    return total / len(shared)


def _edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass
class PostGraph:
    """Undirected weighted graph; ``edges`` maps ``(a, b)`` with ``a < b`` to weight."""

    nodes: list[str]
    edges: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        edges = {}
        for (a, b), w in self.edges.items():
            if a == b:
                raise ValueError(f"self-loop on {a}")
            if not -1.0 <= w <= 1.0:
                raise ValueError(f"edge ({a}, {b}) weight {w} outside [-1, 1]")
            edges[_edge_key(a, b)] = float(w)
        self.edges = dict(sorted(edges.items()))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def weight(self, a: str, b: str) -> float:
        return self.edges[_edge_key(a, b)]

    def neighbors(self, node: str) -> dict[str, float]:
        out = {}
        for (a, b), w in self.edges.items():
            if a == node:
                out[b] = w
            elif b == node:
                out[a] = w
        return out

    def edge_arrays(self, order: Sequence[str] | None = None, self_loops: bool = True):
        """Directed edge list ``(center, neighbor, weight)`` sorted by center then neighbor.

        Both directions of every undirected edge are emitted. With
        ``self_loops`` each node also links to itself with weight +1.
        """
        order = list(self.nodes if order is None else order)
        pos = {n: i for i, n in enumerate(order)}
        if len(pos) != len(order) or set(pos) != set(self.nodes):
            raise ValueError("order must be a permutation of the graph nodes")
        m = len(self.edges)
        src = np.empty(2 * m, dtype=np.int64)
        dst = np.empty(2 * m, dtype=np.int64)
        w = np.empty(2 * m)
        for e, ((a, b), wt) in enumerate(self.edges.items()):
            src[2 * e], dst[2 * e] = pos[a], pos[b]
            src[2 * e + 1], dst[2 * e + 1] = pos[b], pos[a]
            w[2 * e] = w[2 * e + 1] = wt
        if self_loops:
            idx = np.arange(len(order), dtype=np.int64)
            src = np.concatenate([src, idx])
            dst = np.concatenate([dst, idx])
            w = np.concatenate([w, np.ones(len(order))])
        perm = np.lexsort((dst, src))
        return src[perm], dst[perm], w[perm]

    def save(self, edges_path, nodes_path) -> None:
        with atomic_open(edges_path) as fh:
            for (a, b), wt in self.edges.items():
                # %.17g keeps the float exact on reload
                fh.write('{"a":%s,"b":%s,"weight":%s}\n' % (dumps(a), dumps(b), format(wt, ".17g")))
        write_json(nodes_path, {"format_version": GRAPH_FORMAT_VERSION, "nodes": self.nodes,
                                "n_edges": self.n_edges})

    @classmethod
    def load(cls, edges_path, nodes_path) -> "PostGraph":
        manifest = read_json(nodes_path)
        if manifest.get("format_version") != GRAPH_FORMAT_VERSION:
            raise ValueError(f"{nodes_path}: unsupported graph format {manifest.get('format_version')!r}")
        edges = {(r["a"], r["b"]): float(r["weight"]) for r in read_jsonl(edges_path)}
        return cls(list(manifest["nodes"]), edges)


def compute_stances(posts: Sequence[Post], comments: Sequence[Comment],
                    cfg: EmbedderConfig = EmbedderConfig(),
                    ignore_authors=DEFAULT_IGNORE_AUTHORS,
                    post_vectors: Mapping[str, np.ndarray] | None = None) -> dict[tuple[str, str], int]:
    """Stance for every (author, post) pair with at least one comment, computed once."""
    by_id = {p.id: p for p in posts}
    texts: dict[tuple[str, str], list[str]] = defaultdict(list)
    ignore = set(ignore_authors)
    for c in comments:
        if c.post_id not in by_id:
            raise DanglingReference(f"comment {c.id} references unknown post {c.post_id}")
        if c.author in ignore:
            continue
        texts[(c.author, c.post_id)].append(c.text)
    pvecs = {}
    out = {}
    for key in sorted(texts):
        author, pid = key
        if pid not in pvecs:
            pvecs[pid] = (post_vectors[pid] if post_vectors is not None
                          else embed(by_id[pid].text, cfg))
        out[key] = stance(texts[key], by_id[pid], cfg, pvecs[pid])
    return out


def build_graph(posts: Sequence[Post], comments: Sequence[Comment],
                cfg: EmbedderConfig = EmbedderConfig(),
                ignore_authors=DEFAULT_IGNORE_AUTHORS,
                stances: Mapping[tuple[str, str], int] | None = None) -> PostGraph:
    """Build the post graph, enumerating only pairs reachable through some author."""
    ids = [p.id for p in posts]
    if len(set(ids)) != len(ids):
        raise DuplicateId("duplicate post ids")
    if stances is None:
        stances = compute_stances(posts, comments, cfg, ignore_authors)
    else:
        known = set(ids)
        for c in comments:
            if c.post_id not in known:
                raise DanglingReference(f"comment {c.id} references unknown post {c.post_id}")
    posts_of: dict[str, set[str]] = defaultdict(set)
    for author, pid in stances:
        posts_of[author].add(pid)
    shared: dict[tuple[str, str], list[str]] = defaultdict(list)
    for author in sorted(posts_of):
        for a, b in combinations(sorted(posts_of[author]), 2):
            shared[(a, b)].append(author)
    edges = {pair: weight_edge(pair[0], pair[1], authors, stances)
             for pair, authors in shared.items()}
    return PostGraph(ids, edges)


def load_posts(path) -> list[Post]:
    return [Post.from_dict(d) for d in read_jsonl(path)]


def load_comments(path) -> list[Comment]:
    return [Comment.from_dict(d) for d in read_jsonl(path)]
