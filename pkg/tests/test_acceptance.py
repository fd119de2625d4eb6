"""Acceptance gate. Each test records one PASS/FAIL line, printed in the
"acceptance criteria" section of the pytest summary."""

import hashlib
import time
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from conftest import random_features, random_graph, record_criterion
from reference import exhaustive_top_k, naive_graph
from credirag import gat
from credirag._io import read_json
from credirag.cli import main
from credirag.datasets import GroundTruthArticle, match_posts
from credirag.embedding import EmbedderConfig, embed
from credirag.gat import (GATModel, TrainConfig, build_features, corrupt_labels, gradient_check,
                          refine, train)
from credirag.graph import Comment, Post, build_graph
from credirag.labels import Label, to_sign
from credirag.metrics import auc, f1, f1_from_counts, roc
from credirag.retrieval import NewsArticle, build_index, credibility_estimate, top_k
from credirag.synthetic import SynthConfig, generate_synthetic

T0 = datetime(2017, 1, 1, tzinfo=timezone.utc)
pytestmark = pytest.mark.slow


def test_1_retrieval_matches_exhaustive_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    bad = 0
    for trial in range(50):
        n = int(rng.integers(1, 1001))
        V = rng.normal(size=(n, 256))
        # duplicate some rows so ties occur and must break by id
        dup = rng.integers(0, n, size=n // 10)
        V[rng.integers(0, n, size=dup.size)] = V[dup]
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        ids = [f"a{int(i):05d}" for i in rng.permutation(n)]
        arts = [NewsArticle(i, "t", "", "s", T0) for i in ids]
        index = build_index(arts, {"s": 32}, EmbedderConfig(256), {i: v for i, v in zip(ids, V)})
        q = V[rng.integers(n)] + rng.normal(scale=0.05, size=256)
        q /= np.linalg.norm(q)
        k = int(rng.integers(1, 40))
        floor = float(rng.choice([-1.0, 0.0, 0.05, 0.5, 0.8]))
        got = top_k(index, q, k, floor)
        want = exhaustive_top_k(V, ids, q, k, floor)
        same = [g[0] for g in got] == [w[0] for w in want] and all(
            abs(g[1] - w[1]) <= 1e-12 for g, w in zip(got, want))
        bad += not same
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 30
    record_criterion("1 retrieval oracle", ok, f"50 corpora, {bad} mismatches, {elapsed:.1f}s")
    assert ok


VOCAB = ["tax", "bill", "senate", "court", "ruling", "storm", "vote", "wall", "hoax", "fake",
         "true", "agree", "nonsense", "border", "budget", "cats"]


def random_corpus(rng):
    n_posts = int(rng.integers(2, 51))
    n_comments = int(rng.integers(0, 201))
    n_authors = int(rng.integers(1, 30))
    posts = [Post(f"p{i:02d}", " ".join(rng.choice(VOCAB, size=4))) for i in range(n_posts)]
    comments = []
    for j in range(n_comments):
        p = posts[rng.integers(n_posts)]
        words = list(rng.choice(VOCAB, size=3))
        if rng.random() < 0.5:
            words += p.title.split()[:int(rng.integers(1, 5))]
        author = "[deleted]" if rng.random() < 0.03 else f"u{rng.integers(n_authors)}"
        comments.append(Comment(f"c{j}", p.id, author, " ".join(words)))
    return posts, comments


def test_2_graph_matches_naive_reference():
    rng = np.random.default_rng(202)
    cfg = EmbedderConfig()
    start = time.perf_counter()
    bad, n_edges = 0, 0
    for _ in range(100):
        posts, comments = random_corpus(rng)
        g = build_graph(posts, comments, cfg)
        ref = naive_graph(posts, comments, cfg)
        n_edges += len(ref)
        if set(g.edges) != set(ref) or any(abs(g.edges[k] - w) > 1e-12 for k, w in ref.items()) \
                or any(not -1.0 <= w <= 1.0 for w in g.edges.values()):
            bad += 1
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 60 and n_edges > 0
    record_criterion("2 graph oracle", ok, f"100 instances, {n_edges} edges, {bad} mismatches, {elapsed:.1f}s")
    assert ok


def test_3_credibility_arithmetic():
    table = {"a": 32, "b": 48, "c": 64, "d": 0, "e": 16}
    arts = [NewsArticle(s, "t", "", s, T0) for s in table]
    index = build_index(arts, table, EmbedderConfig(8),
                        {s: np.eye(8)[i] for i, s in enumerate(table)})
    cases = [(["a", "b"], 0.625), (["c"], 1.0), (["d"], 0.0), (["a", "b", "c", "d", "e"], 0.5),
             (["c", "e"], 0.625), (["b", "e", "d"], 1 / 3)]
    worst = max(abs(credibility_estimate(index, [(s, 1.0) for s in ids]) - want) for ids, want in cases)
    ok = worst <= 1e-12
    record_criterion("3 credibility mean", ok, f"max abs error {worst:.1e}")
    assert ok


def test_4_gat_correctness(monkeypatch):
    start = time.perf_counter()
    worst_sum = [0.0]
    n_passes = [0]
    original = gat.layer_forward

    def checked(layer, g, H):
        cache = original(layer, g, H)
        sums = np.add.reduceat(cache.alpha, g.starts)
        worst_sum[0] = max(worst_sum[0], float(np.max(np.abs(sums - 1.0))))
        n_passes[0] += 1
        return cache

    monkeypatch.setattr(gat, "layer_forward", checked)
    worst_grad = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 12))
        graph = random_graph(n, 0.4, rng)
        X = random_features(n, 3, rng)
        y = rng.integers(0, 2, n)
        cfg = TrainConfig(hidden=4, seed=seed, epochs=5, weighted=bool(seed % 2 == 0))
        train(graph, X, y, cfg)
        model = GATModel.init(X.shape[1], cfg)
        worst_grad = max(worst_grad, gradient_check(model, graph, X, y))
    elapsed = time.perf_counter() - start
    ok = worst_sum[0] <= 1e-9 and worst_grad <= 1e-4 and elapsed < 120
    record_criterion("4 GAT correctness", ok,
                     f"{n_passes[0]} layer passes, max |row sum - 1| {worst_sum[0]:.1e}, "
                     f"max grad rel err {worst_grad:.1e}, {elapsed:.1f}s")
    assert ok


def refinement_experiment(seeds=range(10), weighted=True, data=None):
    graph, emb, y, initial, mask = data
    X = build_features(emb, np.full(len(y), 0.5), initial)
    held = ~mask
    scores = []
    for seed in seeds:
        model, _ = train(graph, X, y, TrainConfig(seed=seed, weighted=weighted), mask)
        labels, _ = refine(model, graph, X)
        scores.append(f1(y[held], labels[held]))
    return float(np.mean(scores))


@pytest.fixture(scope="module")
def refinement_fixture():
    cfg = SynthConfig(n_posts=400, n_communities=2, homophily=0.9, fake_fraction=0.5,
                      stance_fidelity=0.9, seed=42)
    data = generate_synthetic(cfg)
    graph = build_graph(data.posts, data.comments)
    posts = {p.id: p for p in data.posts}
    y = np.array([int(data.labels[n]) for n in graph.nodes])
    emb = np.vstack([embed(posts[n].text) for n in graph.nodes])
    initial, _ = corrupt_labels(to_sign(y), 0.15, 42)
    mask = np.zeros(len(y), dtype=bool)
    mask[np.random.default_rng(42).permutation(len(y))[: len(y) // 2]] = True
    return graph, emb, y, initial, mask


def test_5_refinement_effect(refinement_fixture):
    start = time.perf_counter()
    _, _, y, initial, mask = refinement_fixture
    held = ~mask
    initial_f1 = f1(y[held], (initial[held] > 0).astype(int))
    weighted = refinement_experiment(weighted=True, data=refinement_fixture)
    unweighted = refinement_experiment(weighted=False, data=refinement_fixture)
    elapsed = time.perf_counter() - start
    ok = weighted - initial_f1 >= 0.05 and weighted >= unweighted - 0.01 and elapsed < 600
    record_criterion("5 refinement effect", ok,
                     f"held-out F1 initial {initial_f1:.4f}, weighted {weighted:.4f}, "
                     f"unweighted {unweighted:.4f}, {elapsed:.1f}s")
    assert ok


def test_6_corruption_protocol():
    details, ok = [], True
    for n in (10, 100, 1000):
        labels = np.where(np.arange(n) % 2, 1.0, -1.0)
        out, flipped = corrupt_labels(labels, 0.15, 7)
        again, flipped_again = corrupt_labels(labels, 0.15, 7)
        n_changed = int(np.sum(out != labels))
        want = int(np.floor(0.15 * n))
        ok &= n_changed == want == len(flipped) and np.array_equal(out, again) \
            and np.array_equal(flipped, flipped_again)
        details.append(f"n={n}: {n_changed}/{want}")
    record_criterion("6 corruption protocol", ok, ", ".join(details))
    assert ok


def test_7_metrics():
    F, R = int(Label.FAKE), int(Label.REAL)
    checks = {
        "separating auc": auc([F, F, R, R], [0.1, 0.3, 0.6, 0.9]) == 1.0,
        "tied auc": auc([F, R, F, R, R], [0.5] * 5) == 0.5,
        "hand auc": auc([R, F, R, F], [0.9, 0.8, 0.7, 0.1]) == 0.75,
        "f1 counts": abs(f1_from_counts(2, 1, 1) - 2 / 3) <= 1e-12,
    }
    rng = np.random.default_rng(707)
    invariant = 0
    transforms = [lambda s: 3 * s - 1, np.exp, lambda s: s ** 3, lambda s: np.arctan(5 * s), lambda s: -1 / (s + 2)]
    for i in range(20):
        n = int(rng.integers(4, 60))
        y = rng.integers(0, 2, n)
        y[:2] = [F, R]
        s = np.round(rng.uniform(0, 1, n), 1)  # coarse so ties occur
        base = roc(y, s)
        t = roc(y, transforms[i % len(transforms)](s))
        invariant += base.auc == t.auc and np.array_equal(base.fpr, t.fpr) and np.array_equal(base.tpr, t.tpr)
    checks["monotone invariance"] = invariant == 20
    ok = all(checks.values())
    record_criterion("7 metrics", ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


def test_8_pipeline_determinism(tmp_path):
    stages = ["generate", "build-index", "rag-label", "build-graph", "train", "refine", "evaluate", "plot"]
    digests = []
    for run in ("a", "b"):
        wd = tmp_path / run
        for stage in stages:
            assert main([stage, "--workdir", str(wd), "--seed", "42"]) == 0, stage
        files = sorted(p.name for p in wd.iterdir() if p.name != "run_manifest.json")
        digests.append({name: hashlib.sha256((wd / name).read_bytes()).hexdigest() for name in files})
    hashes = []
    for run in ("a", "b"):
        m = read_json(tmp_path / run / "run_manifest.json")
        hashes.append({(s, io, k): v["sha256"] for s, st in m["stages"].items()
                       for io in ("inputs", "outputs") for k, v in st[io].items()})
    differing = [n for n in digests[0] if digests[0][n] != digests[1].get(n)]
    report = read_json(tmp_path / "a" / "metrics.json")["metrics"]["heldout"]
    gain = report["refined"]["f1"] > report["initial"]["f1"]
    ok = not differing and digests[0].keys() == digests[1].keys() and hashes[0] == hashes[1] and gain
    record_criterion("8 pipeline determinism", ok,
                     f"{len(digests[0])} artifacts, differing {differing or 'none'}, manifest hashes "
                     f"{'equal' if hashes[0] == hashes[1] else 'differ'}, held-out F1 "
                     f"{report['initial']['f1']:.3f} -> {report['refined']['f1']:.3f}")
    assert ok


def _vecs(c):
    return np.eye(8)[:1], np.array([[c, np.sqrt(1 - c * c), 0, 0, 0, 0, 0, 0]])


def test_9_matching_rules():
    checks = {}
    title = "Senate passes sweeping tax bill"
    p = lambda days=0.0: Post("p", title, created_at=T0 + timedelta(days=days))
    a = lambda days=0.0: GroundTruthArticle(title, Label.FAKE, T0 + timedelta(days=days))
    checks["same day"] = len(match_posts([p()], [a()]).records) == 1
    checks["10 days out"] = match_posts([p(10)], [a()], window_days=2).unmatched == ["p"]
    checks["window edge"] = len(match_posts([p(2)], [a()], window_days=2).records) == 1
    checks["just past window"] = not match_posts([p(2.001)], [a()], window_days=2).records
    for c, want in ((0.69, 0), (0.7, 1)):
        pv, av = _vecs(c)
        got = len(match_posts([p()], [a()], threshold=0.7, post_vectors=pv, article_vectors=av).records)
        checks[f"sim {c}"] = got == want

    rng = np.random.default_rng(909)
    cfg = EmbedderConfig()
    vocab = ["tax", "bill", "senate", "court", "ruling", "storm", "vote", "wall", "border", "budget", "hoax"]
    violations = 0
    for _ in range(50):
        posts = [Post(f"p{i}", " ".join(rng.choice(vocab, size=4)), created_at=T0 + timedelta(days=float(rng.uniform(0, 6))))
                 for i in range(int(rng.integers(5, 25)))]
        arts = [GroundTruthArticle(" ".join(rng.choice(vocab, size=4)), Label(int(rng.integers(2))),
                                   T0 + timedelta(days=float(rng.uniform(0, 6))))
                for _ in range(int(rng.integers(5, 25)))]
        window, thr = float(rng.uniform(0, 4)), float(rng.uniform(0.3, 0.9))
        base = {r.id for r in match_posts(posts, arts, window, thr, cfg).records}
        tighter_w = {r.id for r in match_posts(posts, arts, window * rng.uniform(0, 1), thr, cfg).records}
        tighter_t = {r.id for r in match_posts(posts, arts, window, min(1.0, thr + rng.uniform(0, 0.3)), cfg).records}
        violations += not (tighter_w <= base and tighter_t <= base)
    checks["monotone (50 instances)"] = violations == 0
    ok = all(checks.values())
    record_criterion("9 matching rules", ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok
