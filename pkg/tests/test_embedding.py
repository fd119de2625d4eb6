import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from credirag.embedding import (EmbedderConfig, HashingEmbedder, cosine, dot, embed,
                                load_embeddings, ngrams, tokenize)
from credirag.exceptions import ConfigError, DimensionMismatch, EmptyText, ZeroNorm

CFG = EmbedderConfig()
words = st.text(alphabet="abcdefghij klmnop", min_size=1, max_size=60).filter(lambda t: tokenize(t))


def test_embed_is_deterministic():
    a = embed("Hello world", CFG)
    b = embed("Hello world", CFG)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (256,)


def test_self_similarity():
    v = embed("Senate passes the budget bill", CFG)
    assert cosine(v, v) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("text", ["", "   ", "!!! ...", "___"])
def test_empty_text_raises(text):
    with pytest.raises(EmptyText):
        embed(text, CFG)


def test_tokenization_lowercases_and_strips_punctuation():
    assert tokenize("Hello, World! It's 2017") == ["hello", "world", "it", "s", "2017"]
    assert ngrams(["a", "b", "c"], (1, 2)) == ["a", "b", "c", "a b", "b c"]
    assert embed("HELLO, world!", CFG).tobytes() == embed("hello world", CFG).tobytes()


def test_seed_and_dimension_change_the_vector():
    base = embed("budget vote", CFG)
    assert not np.array_equal(base, embed("budget vote", EmbedderConfig(seed=1)))
    assert embed("budget vote", EmbedderConfig(dimension=32)).shape == (32,)


def test_config_validation():
    with pytest.raises(ConfigError):
        EmbedderConfig(dimension=4)
    with pytest.raises(ConfigError):
        EmbedderConfig(ngram_range=(3, 2))


@given(words)
@settings(max_examples=100, deadline=None)
def test_embed_has_unit_norm(text):
    v = embed(text, CFG)
    assert abs(np.linalg.norm(v) - 1.0) <= 1e-9


@pytest.mark.parametrize("a,b,expected", [((1, 0), (1, 0), 1.0), ((1, 0), (0, 1), 0.0),
                                          ((1, 0), (-1, 0), -1.0)])
def test_cosine_examples(a, b, expected):
    assert cosine(a, b) == expected


def test_cosine_zero_norm():
    with pytest.raises(ZeroNorm):
        cosine((0, 0), (1, 1))


def test_dot_examples():
    assert dot((1, 2), (3, 4)) == 11
    assert dot((0, 0), (1, 1)) == 0
    a, b = embed("tax reform", CFG), embed("tax reform bill", CFG)
    assert abs(dot(a, b) - cosine(a, b)) <= 1e-12
    with pytest.raises(DimensionMismatch):
        dot((1, 2), (1, 2, 3))


vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3)


@given(vectors, vectors)
@settings(max_examples=200, deadline=None)
def test_cosine_symmetric_and_bounded(a, b):
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        return
    c = cosine(a, b)
    assert c == cosine(b, a)
    assert abs(c) <= 1 + 1e-12
    assert dot(a, b) == dot(b, a)


def test_hashing_embedder_is_an_estimator():
    est = HashingEmbedder(dimension=64, seed=3)
    assert est.get_params() == {"dimension": 64, "seed": 3, "ngram_range": (1, 2)}
    twin = clone(est)
    X = twin.fit_transform(["one two", "three four"])
    assert X.shape == (2, 64)
    assert np.array_equal(X[0], embed("one two", EmbedderConfig(64, 3)))
    with pytest.raises(TypeError):
        est.transform("a single string")


def test_load_embeddings_normalizes(tmp_path):
    path = tmp_path / "vecs.jsonl"
    path.write_text(json.dumps({"id": "x", "vector": [3.0, 4.0]}) + "\n")
    vecs = load_embeddings(path, dimension=2)
    assert np.allclose(vecs["x"], [0.6, 0.8])
    with pytest.raises(DimensionMismatch):
        load_embeddings(path, dimension=3)
