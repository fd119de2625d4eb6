import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from credirag.embedding import EmbedderConfig
from credirag.exceptions import DanglingReference, EmptyText, NoSharedCommenters
from credirag.graph import (Comment, Post, PostGraph, build_graph, compute_stances,
                            shared_commenters, stance, stance_from_similarity, weight_edge)

from reference import naive_graph

CFG = EmbedderConfig()
VOCAB = ["tax", "bill", "senate", "vote", "court", "ruling", "banana", "guitar", "kitten", "fraud"]


@pytest.mark.parametrize("s,expected", [(0.7, 1), (0.3, 0), (0.05, -1), (0.5, 0), (0.1, 0),
                                        (0.5000001, 1), (0.0999999, -1), (-0.4, -1)])
def test_stance_thresholds(s, expected):
    assert stance_from_similarity(s) == expected


def test_stance_from_texts():
    post = Post("p", "Senate passes the tax reform bill")
    assert stance(["senate passes the tax reform bill"], post, CFG) == 1
    assert stance(["banana guitar kitten"], post, CFG) == -1
    with pytest.raises(EmptyText):
        stance(["", "  "], post, CFG)


def test_multiple_comments_are_concatenated():
    post = Post("p", "Senate passes the tax reform bill")
    assert stance(["senate passes", "the tax reform bill"], post, CFG) == 1


def _post(pid):
    return Post(pid, f"title {pid}")


def test_shared_commenters():
    a, b = _post("A"), _post("B")
    comments = [Comment("1", "A", "x", "t"), Comment("2", "A", "y", "t"),
                Comment("3", "B", "y", "t"), Comment("4", "B", "z", "t")]
    assert shared_commenters(a, b, comments) == {"y"}
    assert shared_commenters(b, a, comments) == {"y"}
    assert shared_commenters(a, b, comments[:2]) == set()


def test_post_author_is_not_a_commenter_unless_they_comment():
    a = Post("A", "t", author="op")
    b = Post("B", "t", author="op")
    assert shared_commenters(a, b, [Comment("1", "A", "x", "t"), Comment("2", "B", "w", "t")]) == set()


def test_weight_edge_examples():
    st_ = {("c", "A"): 1, ("c", "B"): 1, ("d", "A"): 1, ("d", "B"): -1, ("e", "A"): 0, ("e", "B"): 1}
    assert weight_edge("A", "B", {"c"}, st_) == 1.0
    assert weight_edge("A", "B", {"c", "d"}, st_) == 0.0  # (1 + -1) / 2
    assert weight_edge("A", "B", {"e"}, st_) == 0.0
    with pytest.raises(NoSharedCommenters):
        weight_edge("A", "B", set(), st_)


def test_no_overlap_gives_no_edges():
    posts = [_post(p) for p in "ABC"]
    comments = [Comment(str(i), p, f"u{i}", "title") for i, p in enumerate("ABC")]
    g = build_graph(posts, comments, CFG)
    assert g.n_nodes == 3 and g.n_edges == 0


def test_chain_of_shared_authors():
    posts = [_post(p) for p in "ABC"]
    comments = [Comment("1", "A", "x", "title A"), Comment("2", "B", "x", "title B"),
                Comment("3", "B", "y", "title B"), Comment("4", "C", "y", "title C")]
    g = build_graph(posts, comments, CFG)
    assert set(g.edges) == {("A", "B"), ("B", "C")}


def test_one_agreeing_commenter_everywhere_gives_complete_graph():
    posts = [Post(f"p{i}", f"{VOCAB[i]} {VOCAB[i + 1]} headline") for i in range(6)]
    comments = [Comment(f"c{i}", p.id, "fan", p.title) for i, p in enumerate(posts)]
    g = build_graph(posts, comments, CFG)
    assert g.n_edges == 15
    assert set(g.edges.values()) == {1.0}


def test_dangling_comment():
    with pytest.raises(DanglingReference):
        build_graph([_post("A")], [Comment("1", "Z", "x", "t")], CFG)


def test_ignored_authors_do_not_link_posts():
    posts = [_post("A"), _post("B")]
    comments = [Comment("1", "A", "[deleted]", "title A"), Comment("2", "B", "[deleted]", "title B")]
    assert build_graph(posts, comments, CFG).n_edges == 0
    assert build_graph(posts, comments, CFG, ignore_authors=()).n_edges == 1


def random_instance(seed, n_posts=12, n_comments=40, n_authors=6):
    rng = np.random.default_rng(seed)
    posts = [Post(f"p{i:02d}", " ".join(rng.choice(VOCAB, size=4))) for i in range(n_posts)]
    comments = []
    for j in range(n_comments):
        p = posts[rng.integers(n_posts)]
        words = list(rng.choice(VOCAB, size=3))
        if rng.random() < 0.5:
            words += p.title.split()[:2]
        comments.append(Comment(f"c{j}", p.id, f"u{rng.integers(n_authors)}", " ".join(words)))
    return posts, comments


@given(st.integers(0, 100_000))
@settings(max_examples=25, deadline=None)
def test_matches_naive_reference(seed):
    posts, comments = random_instance(seed)
    g = build_graph(posts, comments, CFG)
    ref = naive_graph(posts, comments, CFG)
    assert set(g.edges) == set(ref)
    for k, w in ref.items():
        assert abs(g.edges[k] - w) <= 1e-12
        assert -1.0 <= g.edges[k] <= 1.0


@given(st.dictionaries(st.tuples(st.sampled_from("abcde"), st.sampled_from("PQ")),
                       st.sampled_from([-1, 0, 1]), min_size=1))
def test_weight_bounds_and_symmetry(stances):
    shared = {c for c in "abcde" if (c, "P") in stances and (c, "Q") in stances}
    if not shared:
        return
    w = weight_edge("P", "Q", shared, stances)
    assert -1.0 <= w <= 1.0
    assert w == weight_edge("Q", "P", shared, stances)


def test_fresh_author_on_one_post_changes_nothing():
    posts, comments = random_instance(3)
    before = build_graph(posts, comments, CFG)
    after = build_graph(posts, comments + [Comment("new", posts[0].id, "stranger", "kitten")], CFG)
    assert before.edges == after.edges


def test_inverted_index_matches_any_comment_order():
    posts, comments = random_instance(11)
    a = build_graph(posts, comments, CFG)
    b = build_graph(posts, list(reversed(comments)), CFG)
    assert a.edges == b.edges


def test_precomputed_stances_are_used():
    posts = [_post("A"), _post("B")]
    comments = [Comment("1", "A", "x", "whatever"), Comment("2", "B", "x", "whatever")]
    g = build_graph(posts, comments, stances={("x", "A"): 1, ("x", "B"): -1})
    assert g.edges == {("A", "B"): -1.0}
    assert compute_stances(posts, comments, CFG)[("x", "A")] in (-1, 0, 1)


def test_save_load_round_trip_is_byte_stable(tmp_path):
    posts, comments = random_instance(5)
    g = build_graph(posts, comments, CFG)
    g.save(tmp_path / "e.jsonl", tmp_path / "n.json")
    again = PostGraph.load(tmp_path / "e.jsonl", tmp_path / "n.json")
    assert again.edges == g.edges and again.nodes == g.nodes
    again.save(tmp_path / "e2.jsonl", tmp_path / "n2.json")
    assert (tmp_path / "e.jsonl").read_bytes() == (tmp_path / "e2.jsonl").read_bytes()


def test_graph_rejects_self_loops_and_bad_weights():
    with pytest.raises(ValueError):
        PostGraph(["a"], {("a", "a"): 1.0})
    with pytest.raises(ValueError):
        PostGraph(["a", "b"], {("a", "b"): 1.5})


def test_edge_arrays_are_symmetric_with_self_loops():
    g = PostGraph(["a", "b", "c"], {("b", "a"): -0.5})
    src, dst, w = g.edge_arrays()
    assert list(zip(src.tolist(), dst.tolist(), w.tolist())) == [
        (0, 0, 1.0), (0, 1, -0.5), (1, 0, -0.5), (1, 1, 1.0), (2, 2, 1.0)]
