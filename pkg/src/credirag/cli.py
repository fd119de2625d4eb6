"""Command-line pipeline. Each subcommand reads earlier artifacts from the
working directory and writes its own, plus an entry in ``run_manifest.json``.

Exit codes: 0 success, 1 internal error, 2 usage error or missing input.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._io import read_json, read_jsonl, sha256_file, write_json, write_jsonl, atomic_open
from .config import SCHEMA, PipelineConfig
from .datasets import (LabeledDataset, LabeledRecord, filter_by_comments, load_ground_truth_csv,
                       load_labels, match_posts, write_labels)
from .embedding import embed, load_embeddings
from .exceptions import ConfigError, CrediRAGError, EmptyText, MissingArtifact
from .gat import (MODEL_FORMAT_VERSION, GATModel, build_features, load_model, refine,
                  save_model, train)
from .graph import (GRAPH_FORMAT_VERSION, PostGraph, build_graph, load_comments, load_posts)
from .labels import Label
from .metrics import metrics_report, write_calibration_csv, write_roc_csv
from .plotting import calibration_svg, roc_svg
from .retrieval import (INDEX_FORMAT_VERSION, CredibilityTable, NewsIndex, build_index,
                        initial_label, load_articles, retrieve)
from .synthetic import MANIFEST_FORMAT_VERSION, generate_synthetic

log = logging.getLogger("credirag")

MANIFEST = "run_manifest.json"
ARTIFACTS = {
    "index": "index.json",
    "matched": "matched.jsonl",
    "unmatched": "unmatched.jsonl",
    "initial": "initial_labels.jsonl",
    "graph_edges": "graph_edges.jsonl",
    "graph_nodes": "graph_nodes.json",
    "model": "model.json",
    "refined": "refined.jsonl",
    "metrics": "metrics.json",
    "roc_csv": "roc.csv",
    "calibration_csv": "calibration.csv",
    "roc_svg": "roc.svg",
    "calibration_svg": "calibration.svg",
}
VERSIONS = {"index": INDEX_FORMAT_VERSION, "graph": GRAPH_FORMAT_VERSION,
            "model": MODEL_FORMAT_VERSION, "synthetic_manifest": MANIFEST_FORMAT_VERSION}


def _artifact(cfg: PipelineConfig, name: str) -> Path:
    return cfg.workdir_path / ARTIFACTS[name]


def _require(paths: dict[str, Path]) -> None:
    for name, path in paths.items():
        if not path.is_file():
            raise MissingArtifact(f"missing {name}: {path}")


def _post_vectors(cfg: PipelineConfig, posts) -> np.ndarray:
    """Feature embeddings; posts with no tokens get an explicit zero row."""
    imported = load_embeddings(cfg.post_embeddings, cfg.dimension) if cfg.post_embeddings else None
    rows = []
    emb_cfg = cfg.embedder()
    for p in posts:
        if imported is not None:
            rows.append(imported[p.id])
            continue
        try:
            rows.append(embed(p.text, emb_cfg))
        except EmptyText:
            rows.append(np.zeros(cfg.dimension))
    return np.vstack(rows) if rows else np.zeros((0, cfg.dimension))


# -- stages -------------------------------------------------------------------

def cmd_generate(cfg: PipelineConfig):
    data = generate_synthetic(cfg.synth_config(), cfg.embedder())
    written = data.save(cfg.workdir_path)
    return {}, written


def cmd_match(cfg: PipelineConfig):
    inputs = {"posts": cfg.path("posts"), "ground_truth": cfg.path("ground_truth")}
    if cfg.min_comments > 0:
        inputs["comments"] = cfg.path("comments")
    _require(inputs)
    posts = load_posts(inputs["posts"])
    if cfg.min_comments > 0:
        posts = filter_by_comments(posts, load_comments(inputs["comments"]), cfg.min_comments)
    articles = load_ground_truth_csv(inputs["ground_truth"])
    ds = match_posts(posts, articles, cfg.window_days, cfg.threshold, cfg.embedder())
    out = {"matched": _artifact(cfg, "matched"), "unmatched": _artifact(cfg, "unmatched"),
           "labels": cfg.path("labels")}
    ds.save(out["matched"])
    write_jsonl(out["unmatched"], ({"id": pid} for pid in ds.unmatched))
    write_labels(out["labels"], {r.id: r.ground_truth for r in ds.records})
    log.info("matched %d posts, %d unmatched", len(ds), len(ds.unmatched))
    return inputs, out


def cmd_build_index(cfg: PipelineConfig):
    inputs = {"articles": cfg.path("articles"), "credibility": cfg.path("credibility")}
    if cfg.article_embeddings:
        inputs["article_embeddings"] = Path(cfg.article_embeddings)
    _require(inputs)
    vectors = load_embeddings(cfg.article_embeddings, cfg.dimension) if cfg.article_embeddings else None
    index = build_index(load_articles(inputs["articles"]), CredibilityTable.from_csv(inputs["credibility"]),
                        cfg.embedder(), vectors)
    out = {"index": _artifact(cfg, "index")}
    index.save(out["index"])
    log.info("indexed %d articles", len(index))
    return inputs, out


def cmd_rag_label(cfg: PipelineConfig):
    inputs = {"index": _artifact(cfg, "index"), "posts": cfg.path("posts")}
    if cfg.post_embeddings:
        inputs["post_embeddings"] = Path(cfg.post_embeddings)
    _require(inputs)
    index = NewsIndex.load(inputs["index"])
    posts = load_posts(inputs["posts"])
    vectors = _post_vectors(cfg, posts)
    records = []
    for post, vec in zip(posts, vectors):
        res = retrieve(index, vec, cfg.k, cfg.floor) if vec.any() else None
        if res is None or res.abstain:
            records.append({"id": post.id, "abstain": True, "y_hat": 0.5, "initial_label": None,
                            "entries": []})
        else:
            records.append({"id": post.id, "abstain": False, "y_hat": res.y_hat,
                            "initial_label": str(initial_label(res.y_hat, cfg.tau)),
                            "entries": [[aid, s] for aid, s in res.entries]})
    out = {"initial": _artifact(cfg, "initial")}
    write_jsonl(out["initial"], records)
    log.info("labeled %d posts (%d abstained)", len(records), sum(r["abstain"] for r in records))
    return inputs, out


def cmd_build_graph(cfg: PipelineConfig):
    inputs = {"posts": cfg.path("posts"), "comments": cfg.path("comments")}
    _require(inputs)
    graph = build_graph(load_posts(inputs["posts"]), load_comments(inputs["comments"]),
                        cfg.embedder(), ignore_authors=[*cfg.ignore_authors, ""])
    out = {"graph_edges": _artifact(cfg, "graph_edges"), "graph_nodes": _artifact(cfg, "graph_nodes")}
    graph.save(out["graph_edges"], out["graph_nodes"])
    log.info("graph: %d nodes, %d edges", graph.n_nodes, graph.n_edges)
    return inputs, out


def _node_features(cfg, graph: PostGraph, posts_path, initial_path):
    posts = {p.id: p for p in load_posts(posts_path)}
    missing = [n for n in graph.nodes if n not in posts]
    if missing:
        raise ConfigError(f"graph nodes missing from posts: {missing[:5]}")
    ordered = [posts[n] for n in graph.nodes]
    initial = {r["id"]: r for r in read_jsonl(initial_path)}
    y_hat, signs = [], []
    for n in graph.nodes:
        rec = initial.get(n)
        if rec is None or rec["abstain"]:
            y_hat.append(0.5)
            signs.append(0.0)
        else:
            y_hat.append(rec["y_hat"])
            signs.append(1.0 if Label.parse(rec["initial_label"]) == Label.REAL else -1.0)
    return build_features(_post_vectors(cfg, ordered), y_hat, signs), initial


def _graph_inputs(cfg):
    return {"graph_edges": _artifact(cfg, "graph_edges"), "graph_nodes": _artifact(cfg, "graph_nodes")}


def cmd_train(cfg: PipelineConfig):
    inputs = {**_graph_inputs(cfg), "posts": cfg.path("posts"), "initial": _artifact(cfg, "initial"),
              "labels": cfg.path("labels")}
    _require(inputs)
    if not 0.0 < cfg.train_fraction <= 1.0:
        raise ConfigError("train_fraction must lie in (0, 1]")
    graph = PostGraph.load(inputs["graph_edges"], inputs["graph_nodes"])
    X, _ = _node_features(cfg, graph, inputs["posts"], inputs["initial"])
    truth = load_labels(inputs["labels"])
    labeled = np.array([n in truth for n in graph.nodes])
    if not labeled.any():
        raise ConfigError("no graph node has a ground-truth label")
    tcfg = cfg.train_config()
    rng = np.random.default_rng([tcfg.seed, 2])
    lab_idx = np.flatnonzero(labeled)
    n_train = max(1, int(round(cfg.train_fraction * len(lab_idx))))
    train_idx = np.sort(rng.permutation(lab_idx)[:n_train])
    mask = np.zeros(graph.n_nodes, dtype=bool)
    mask[train_idx] = True
    # unlabeled nodes carry a placeholder label; the mask keeps them out of the loss
    y = np.array([int(truth.get(n, Label.FAKE)) for n in graph.nodes])
    model, losses = train(graph, X, y, tcfg, mask)
    out = {"model": _artifact(cfg, "model")}
    save_model(model, out["model"], seed=tcfg.seed, loss_trace=losses,
               train_nodes=[graph.nodes[i] for i in train_idx],
               shapes={"n_features": model.n_features, "hidden": tcfg.hidden, "n_classes": 2})
    log.info("trained %d epochs on %d nodes, final loss %s", tcfg.epochs, n_train,
             losses[-1] if losses else "n/a")
    return inputs, out


def cmd_refine(cfg: PipelineConfig):
    inputs = {**_graph_inputs(cfg), "posts": cfg.path("posts"), "initial": _artifact(cfg, "initial"),
              "model": _artifact(cfg, "model")}
    _require(inputs)
    labels_path = cfg.path("labels")
    truth = load_labels(labels_path) if labels_path.is_file() else {}
    if truth:
        inputs["labels"] = labels_path
    graph = PostGraph.load(inputs["graph_edges"], inputs["graph_nodes"])
    model, doc = load_model(inputs["model"])
    X, initial = _node_features(cfg, graph, inputs["posts"], inputs["initial"])
    refined, p_real = refine(model, graph, X)
    train_nodes = set(doc.get("train_nodes", []))
    records = []
    for i, n in enumerate(graph.nodes):
        rec = initial.get(n, {"abstain": True, "y_hat": 0.5, "initial_label": None})
        records.append(LabeledRecord(
            n, ground_truth=truth.get(n),
            initial_label=Label.parse(rec["initial_label"]) if rec["initial_label"] else None,
            y_hat=float(rec["y_hat"]), abstain=bool(rec["abstain"]),
            refined_label=Label(int(refined[i])), p_real=float(p_real[i]),
            provenance={"ground_truth": "labels" if n in truth else None, "initial": "retrieval",
                        "refined": "gat", "in_training": n in train_nodes}))
    out = {"refined": _artifact(cfg, "refined")}
    LabeledDataset(records).save(out["refined"])
    return inputs, out


def _initial_hard(rec: LabeledRecord, tau: float) -> int:
    # abstained posts fall back to the threshold rule on the neutral estimate
    return int(rec.initial_label if rec.initial_label is not None else initial_label(rec.y_hat, tau))


def _score_histogram(scores, n_bins):
    counts, _ = np.histogram(scores, bins=n_bins, range=(0.0, 1.0))
    return counts.tolist()


def cmd_evaluate(cfg: PipelineConfig):
    inputs = {"refined": _artifact(cfg, "refined")}
    _require(inputs)
    ds = LabeledDataset.load(inputs["refined"])
    positive = Label.parse(cfg.positive)
    report = {"n_posts": len(ds), "n_abstained": sum(r.abstain for r in ds.records),
              "score_histograms": {
                  "n_bins": cfg.n_bins,
                  "initial": _score_histogram([r.y_hat for r in ds.records], cfg.n_bins),
                  "refined": _score_histogram([r.p_real for r in ds.records], cfg.n_bins)}}
    groups = {"all": [r for r in ds.records if r.ground_truth is not None]}
    groups["heldout"] = [r for r in groups["all"] if not r.provenance.get("in_training")]
    report["metrics"] = {}
    for name, recs in groups.items():
        if not recs:
            continue
        truth = [int(r.ground_truth) for r in recs]
        report["metrics"][name] = {
            "initial": metrics_report(truth, [_initial_hard(r, cfg.tau) for r in recs],
                                      [r.y_hat for r in recs], positive, cfg.n_bins),
            "refined": metrics_report(truth, [int(r.refined_label) for r in recs],
                                      [r.p_real for r in recs], positive, cfg.n_bins),
        }
    out = {"metrics": _artifact(cfg, "metrics")}
    write_json(out["metrics"], report)
    primary = report["metrics"].get("heldout") or report["metrics"].get("all")
    if primary:
        out["roc_csv"] = _artifact(cfg, "roc_csv")
        out["calibration_csv"] = _artifact(cfg, "calibration_csv")
        roc_pts = primary["refined"]["roc"] or {"fpr": [], "tpr": []}
        write_roc_csv(out["roc_csv"], roc_pts["fpr"], roc_pts["tpr"])
        cal = primary["refined"]["calibration"]
        write_calibration_csv(out["calibration_csv"], cal["mean_predicted"], cal["frequency"], cal["count"])
        for stage in ("initial", "refined"):
            log.info("%s: accuracy %.4f f1 %.4f auc %s", stage, primary[stage]["accuracy"],
                     primary[stage]["f1"], primary[stage]["auc"])
    return inputs, out


def cmd_plot(cfg: PipelineConfig):
    inputs = {"metrics": _artifact(cfg, "metrics")}
    _require(inputs)
    report = read_json(inputs["metrics"])
    metrics = report["metrics"].get("heldout") or report["metrics"].get("all")
    if not metrics:
        raise MissingArtifact("metrics.json has no ground-truth metrics to plot")
    rocs = {s: (m["roc"]["fpr"], m["roc"]["tpr"]) for s, m in metrics.items() if m["roc"]}
    cals = {s: (m["calibration"]["mean_predicted"], m["calibration"]["frequency"])
            for s, m in metrics.items()}
    out = {"roc_svg": _artifact(cfg, "roc_svg"), "calibration_svg": _artifact(cfg, "calibration_svg")}
    with atomic_open(out["roc_svg"]) as fh:
        fh.write(roc_svg(rocs))
    with atomic_open(out["calibration_svg"]) as fh:
        fh.write(calibration_svg(cals))
    return inputs, out


COMMANDS = {
    "generate": (cmd_generate, "write a seeded synthetic corpus into the workdir"),
    "match": (cmd_match, "label posts by matching titles to ground-truth articles"),
    "build-index": (cmd_build_index, "embed and index the news corpus"),
    "rag-label": (cmd_rag_label, "assign initial labels from retrieved-source credibility"),
    "build-graph": (cmd_build_graph, "build the weighted post-to-post graph"),
    "train": (cmd_train, "adversarially train the graph attention network"),
    "refine": (cmd_refine, "refine initial labels with the trained network"),
    "evaluate": (cmd_evaluate, "compare initial and refined labels against ground truth"),
    "plot": (cmd_plot, "render ROC and calibration SVGs"),
}


def _record_stage(cfg: PipelineConfig, stage: str, inputs: dict, outputs: dict, seconds: float) -> None:
    path = cfg.workdir_path / MANIFEST
    manifest = read_json(path) if path.is_file() else {"format_version": 1, "stages": {}}
    manifest.update({"package_version": __version__, "seed": cfg.seed, "config": cfg.echo(),
                     "artifact_versions": VERSIONS})
    manifest["stages"][stage] = {
        "inputs": {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in sorted(inputs.items())},
        "outputs": {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in sorted(outputs.items())},
        "wall_time_s": round(seconds, 6),
        "seed": cfg.seed,
    }
    write_json(path, manifest)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=argparse.SUPPRESS, help="INI config file")
    for key, (section, _parse, default, help_text) in SCHEMA.items():
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=key, default=argparse.SUPPRESS, metavar="VALUE",
                            help=f"[{section}] {help_text} (default: {default})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_config_flags(common)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="credirag", parents=[common],
                                     description="Retrieval labeling with graph attention refinement.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_fn, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    verbose = args.pop("verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config_path = args.pop("config", None)
    try:
        if config_path is not None and not Path(config_path).is_file():
            raise MissingArtifact(f"missing config file: {config_path}")
        cfg = PipelineConfig.load(config_path, args)
        fn = COMMANDS[command][0]
        start = time.perf_counter()
        inputs, outputs = fn(cfg)
        _record_stage(cfg, command, inputs, {k: Path(v) for k, v in outputs.items()},
                      time.perf_counter() - start)
    except (MissingArtifact, ConfigError, FileNotFoundError) as exc:
        print(f"credirag {command}: {exc}", file=sys.stderr)
        return 2
    except CrediRAGError as exc:
        print(f"credirag {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and map to exit code 1
        log.exception("internal error")
        print(f"credirag {command}: internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
