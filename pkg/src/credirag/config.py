"""Pipeline configuration: an INI file whose every key is also a CLI flag."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import EmbedderConfig
from .exceptions import ConfigError
from .gat import TrainConfig
from .synthetic import SynthConfig


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _str_list(v) -> list[str]:
    if isinstance(v, (list, tuple)):
        return list(v)
    return [s.strip() for s in str(v).split(",") if s.strip()]


# key -> (section, parser, default, help). Keys are unique across sections so
# each one maps to exactly one ``--flag``.
SCHEMA: dict[str, tuple[str, object, object, str]] = {
    "seed": ("run", int, 42, "global seed; inherited by stages without their own seed"),
    "workdir": ("run", str, "work", "directory for all stage artifacts"),
    "posts": ("paths", str, "", "posts JSONL (default: WORKDIR/posts.jsonl)"),
    "comments": ("paths", str, "", "comments JSONL (default: WORKDIR/comments.jsonl)"),
    "articles": ("paths", str, "", "news articles JSONL (default: WORKDIR/articles.jsonl)"),
    "credibility": ("paths", str, "", "source credibility CSV (default: WORKDIR/credibility.csv)"),
    "ground_truth": ("paths", str, "", "ground-truth article CSV for `match`"),
    "labels": ("paths", str, "", "ground-truth post labels JSONL (default: WORKDIR/labels.jsonl)"),
    "post_embeddings": ("paths", str, "", "optional precomputed post vectors JSONL"),
    "article_embeddings": ("paths", str, "", "optional precomputed article vectors JSONL"),
    "dimension": ("embedder", int, 256, "hashed embedding dimension"),
    "embed_seed": ("embedder", int, 0, "hash seed of the text embedder"),
    "ngram_min": ("embedder", int, 1, "smallest word n-gram"),
    "ngram_max": ("embedder", int, 2, "largest word n-gram"),
    "k": ("retrieval", int, 20, "articles retrieved per post"),
    "floor": ("retrieval", float, 0.8, "minimum retrieval similarity"),
    "tau": ("retrieval", float, 0.5, "credibility threshold for a Real label"),
    "ignore_authors": ("graph", _str_list, ["[deleted]"], "comma-separated authors excluded from edges"),
    "r": ("train", float, 0.15, "fraction of training labels flipped per epoch"),
    "epochs": ("train", int, 200, "training epochs"),
    "learning_rate": ("train", float, 0.005, "Adam step size"),
    "hidden": ("train", int, 16, "hidden width of the first attention layer"),
    "train_seed": ("train", int, None, "training seed (default: --seed)"),
    "weighted": ("train", _bool, True, "feed edge weights to attention"),
    "train_fraction": ("train", float, 0.5, "share of labeled posts used for training; the rest are held out"),
    "window_days": ("matching", float, 2.0, "max days between post and article"),
    "threshold": ("matching", float, 0.7, "min title cosine for a match"),
    "min_comments": ("matching", int, 0, "drop posts with fewer comments before matching"),
    "n_posts": ("synth", int, 400, "synthetic posts"),
    "n_authors": ("synth", int, 150, "synthetic commenters"),
    "n_communities": ("synth", int, 2, "planted communities"),
    "homophily": ("synth", float, 0.9, "probability a commenter stays in-community"),
    "fake_fraction": ("synth", float, 0.5, "share of fake posts"),
    "comment_rate": ("synth", float, 5.0, "mean commenters per post"),
    "stance_fidelity": ("synth", float, 0.9, "probability a planted stance follows community"),
    "citation_noise": ("synth", float, 0.15, "probability a post cites the wrong credibility tier"),
    "coverage": ("synth", float, 0.9, "probability a post has a matching article"),
    "synth_seed": ("synth", int, None, "generator seed (default: --seed)"),
    "n_bins": ("eval", int, 10, "calibration bins"),
    "positive": ("eval", str, "fake", "positive class for F1"),
}

DEFAULT_FILES = {
    "posts": "posts.jsonl",
    "comments": "comments.jsonl",
    "articles": "articles.jsonl",
    "credibility": "credibility.csv",
    "ground_truth": "ground_truth.csv",
    "labels": "labels.jsonl",
}


@dataclass
class PipelineConfig:
    values: dict = field(default_factory=lambda: {k: v[2] for k, v in SCHEMA.items()})

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "PipelineConfig":
        cfg = cls()
        if path is not None:
            parser = configparser.ConfigParser(interpolation=None)
            if not parser.read(path, encoding="utf-8"):
                raise ConfigError(f"cannot read config file {path}")
            for section in parser.sections():
                for key, raw in parser.items(section):
                    if key not in SCHEMA:
                        raise ConfigError(f"{path}: unknown key [{section}] {key}")
                    if SCHEMA[key][0] != section:
                        raise ConfigError(f"{path}: key {key} belongs in [{SCHEMA[key][0]}]")
                    cfg.set(key, raw)
        for key, raw in (overrides or {}).items():
            if raw is not None:
                cfg.set(key, raw)
        return cfg

    def set(self, key: str, raw) -> None:
        parse = SCHEMA[key][1]
        try:
            self.values[key] = parse(raw) if raw != "" or parse is str else SCHEMA[key][2]
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None

    @property
    def workdir_path(self) -> Path:
        return Path(self.values["workdir"])

    def path(self, key: str) -> Path:
        given = self.values[key]
        if given:
            return Path(given)
        if key in DEFAULT_FILES:
            return self.workdir_path / DEFAULT_FILES[key]
        return Path()

    def optional_path(self, key: str) -> Path | None:
        return Path(self.values[key]) if self.values[key] else None

    def embedder(self) -> EmbedderConfig:
        return EmbedderConfig(self.dimension, self.embed_seed, (self.ngram_min, self.ngram_max))

    def train_config(self) -> TrainConfig:
        seed = self.train_seed if self.train_seed is not None else self.seed
        return TrainConfig(r=self.r, epochs=self.epochs, learning_rate=self.learning_rate,
                           seed=seed, hidden=self.hidden, weighted=self.weighted)

    def synth_config(self) -> SynthConfig:
        seed = self.synth_seed if self.synth_seed is not None else self.seed
        return SynthConfig(self.n_posts, self.n_authors, self.n_communities, self.homophily,
                           self.fake_fraction, self.comment_rate, self.stance_fidelity, seed,
                           self.citation_noise, self.coverage)

    def echo(self) -> dict:
        out: dict = {}
        for key, (section, *_rest) in SCHEMA.items():
            out.setdefault(section, {})[key] = self.values[key]
        return out

    def to_ini(self) -> str:
        lines = []
        for section, items in self.echo().items():
            lines.append(f"[{section}]")
            for k, v in items.items():
                if v is None:
                    continue
                if isinstance(v, list):
                    v = ",".join(v)
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)
