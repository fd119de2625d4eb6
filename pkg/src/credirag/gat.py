"""Two-layer graph attention network trained to undo random label flips.

Node features are ``[text embedding | credibility estimate | label sign]``.
During training the label column is overwritten every epoch with a freshly
corrupted copy of the ground truth, and the network is asked to predict the
uncorrupted labels. At inference the column holds the retrieval labels and
the network's argmax is the refined label.

Attention logits take the edge weight as one extra input,
``e_ij = LeakyReLU(a . [W h_i | W h_j | w_ij])``, so negative (disagreement)
edges stay visible to the model. Zeroing that input gives the unweighted
variant. Gradients are computed by a hand-written reverse pass.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._io import read_json, write_json
from .exceptions import ConfigError, NumericalError, ShapeError, TrainingDiverged
from .graph import PostGraph
from .labels import Label, to_sign
from .validation import check_features, check_labels, check_mask

MODEL_FORMAT_VERSION = 1
LABEL_COL = -1
YHAT_COL = -2


@dataclass
class TrainConfig:
    r: float = 0.15
    epochs: int = 200
    learning_rate: float = 0.005
    seed: int = 0
    hidden: int = 16
    weighted: bool = True
    leaky_slope: float = 0.2
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ConfigError(f"r must lie in [0, 1], got {self.r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.hidden < 1:
            raise ConfigError("hidden must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        self.adam_betas = tuple(float(b) for b in self.adam_betas)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["adam_betas"] = tuple(d.get("adam_betas", (0.9, 0.999)))
        return cls(**d)


@dataclass
class GATLayer:
    W: np.ndarray
    a: np.ndarray
    leaky_slope: float = 0.2

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.W.ndim != 2 or self.a.shape != (2 * self.W.shape[1] + 1,):
            raise ShapeError(f"W {self.W.shape} and a {self.a.shape} are inconsistent")

    @property
    def in_features(self) -> int:
        return self.W.shape[0]

    @property
    def out_features(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, f_in: int, f_out: int, rng: np.random.Generator, leaky_slope=0.2) -> "GATLayer":
        s = math.sqrt(6.0 / (f_in + f_out))
        W = rng.uniform(-s, s, size=(f_in, f_out))
        sa = math.sqrt(6.0 / (2 * f_out + 2))
        a = rng.uniform(-sa, sa, size=2 * f_out + 1)
        return cls(W, a, leaky_slope)


@dataclass
class GATModel:
    layer1: GATLayer
    layer2: GATLayer
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.layer1.out_features != self.layer2.in_features:
            raise ShapeError("layer1 output width must equal layer2 input width")
        if self.layer2.out_features != 2:
            raise ShapeError("layer2 must produce two class scores")

    @classmethod
    def init(cls, n_features: int, cfg: TrainConfig) -> "GATModel":
        rng = np.random.default_rng([cfg.seed, 0])
        l1 = GATLayer.init(n_features, cfg.hidden, rng, cfg.leaky_slope)
        l2 = GATLayer.init(cfg.hidden, 2, rng, cfg.leaky_slope)
        return cls(l1, l2, cfg)

    @property
    def n_features(self) -> int:
        return self.layer1.in_features

    def params(self) -> list[np.ndarray]:
        return [self.layer1.W, self.layer1.a, self.layer2.W, self.layer2.a]

    def copy(self) -> "GATModel":
        return GATModel(GATLayer(self.layer1.W.copy(), self.layer1.a.copy(), self.layer1.leaky_slope),
                        GATLayer(self.layer2.W.copy(), self.layer2.a.copy(), self.layer2.leaky_slope),
                        TrainConfig.from_dict(self.config.to_dict()))

    def to_dict(self) -> dict:
        def layer(l):
            return {"shape": list(l.W.shape), "W": l.W.ravel().tolist(), "a": l.a.tolist(),
                    "leaky_slope": l.leaky_slope}
        return {"format_version": MODEL_FORMAT_VERSION, "config": self.config.to_dict(),
                "layer1": layer(self.layer1), "layer2": layer(self.layer2)}

    @classmethod
    def from_dict(cls, d: dict) -> "GATModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")

        def layer(x):
            return GATLayer(np.asarray(x["W"], dtype=float).reshape(x["shape"]), x["a"], x["leaky_slope"])
        return cls(layer(d["layer1"]), layer(d["layer2"]), TrainConfig.from_dict(d["config"]))


@dataclass(frozen=True)
class GraphTensors:
    """Directed edges incl. self-loops, sorted by center node."""

    src: np.ndarray
    dst: np.ndarray
    w: np.ndarray
    n: int
    node_ids: tuple[str, ...]

    @classmethod
    def from_graph(cls, graph: PostGraph, weighted: bool = True) -> "GraphTensors":
        src, dst, w = graph.edge_arrays()
        if not weighted:
            w = np.zeros_like(w)
        return cls(src, dst, w, graph.n_nodes, tuple(graph.nodes))

    @property
    def starts(self) -> np.ndarray:
        return np.flatnonzero(np.r_[True, self.src[1:] != self.src[:-1]])


@dataclass
class _LayerCache:
    H: np.ndarray
    Z: np.ndarray
    e: np.ndarray
    alpha: np.ndarray
    M: np.ndarray


def attention_logits(layer: GATLayer, Z: np.ndarray, g: GraphTensors) -> np.ndarray:
    f = layer.out_features
    return Z[g.src] @ layer.a[:f] + Z[g.dst] @ layer.a[f:2 * f] + layer.a[2 * f] * g.w


def segment_softmax(logits: np.ndarray, g: GraphTensors) -> np.ndarray:
    starts = g.starts
    mx = np.maximum.reduceat(logits, starts)
    ex = np.exp(logits - mx[g.src])
    return ex / np.add.reduceat(ex, starts)[g.src]


def _leaky(e, slope):
    return np.where(e > 0, e, slope * e)


def layer_forward(layer: GATLayer, g: GraphTensors, H: np.ndarray) -> _LayerCache:
    """Attention-weighted neighbour aggregation, before the activation."""
    with np.errstate(over="ignore", invalid="ignore"):
        Z = H @ layer.W
        e = attention_logits(layer, Z, g)
    bad = ~np.isfinite(e)
    if bad.any():
        node = g.node_ids[g.src[np.argmax(bad)]]
        raise NumericalError(f"non-finite attention logit at node {node}", node=node)
    alpha = segment_softmax(_leaky(e, layer.leaky_slope), g)
    M = np.add.reduceat(alpha[:, None] * Z[g.dst], g.starts, axis=0)
    return _LayerCache(H, Z, e, alpha, M)


def layer_backward(layer: GATLayer, g: GraphTensors, cache: _LayerCache, dM: np.ndarray):
    """Return ``(dW, da, dH)`` given the gradient w.r.t. the aggregate."""
    f = layer.out_features
    Z, alpha, e = cache.Z, cache.alpha, cache.e
    A_T = sp.csr_matrix((alpha, (g.dst, g.src)), shape=(g.n, g.n))
    dZ = A_T @ dM
    dalpha = np.einsum("ij,ij->i", dM[g.src], Z[g.dst])
    seg = np.add.reduceat(alpha * dalpha, g.starts)
    dl = alpha * (dalpha - seg[g.src])
    de = dl * np.where(e > 0, 1.0, layer.leaky_slope)
    ds = np.bincount(g.src, weights=de, minlength=g.n)
    dt = np.bincount(g.dst, weights=de, minlength=g.n)
    da = np.concatenate([Z.T @ ds, Z.T @ dt, [de @ g.w]])
    dZ += np.outer(ds, layer.a[:f]) + np.outer(dt, layer.a[f:2 * f])
    return cache.H.T @ dZ, da, dZ @ layer.W.T


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _log_softmax(x):
    mx = x.max(axis=1, keepdims=True)
    return x - mx - np.log(np.exp(x - mx).sum(axis=1, keepdims=True))


def forward(model: GATModel, g: GraphTensors, X: np.ndarray, return_caches: bool = False):
    """Class log-probabilities, shape ``(n, 2)``."""
    c1 = layer_forward(model.layer1, g, X)
    H1 = _elu(c1.M)
    c2 = layer_forward(model.layer2, g, H1)
    logp = _log_softmax(c2.M)
    if return_caches:
        return logp, (c1, c2)
    return logp


def nll_loss(logp: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    idx = np.flatnonzero(mask)
    return float(-logp[idx, y[idx]].mean())


def loss_and_grads(model: GATModel, g: GraphTensors, X: np.ndarray, y: np.ndarray,
                   mask: np.ndarray) -> tuple[float, list[np.ndarray]]:
    logp, (c1, c2) = forward(model, g, X, return_caches=True)
    loss = nll_loss(logp, y, mask)
    idx = np.flatnonzero(mask)
    dM2 = np.zeros_like(logp)
    dM2[idx] = np.exp(logp[idx])
    dM2[idx, y[idx]] -= 1.0
    dM2 /= len(idx)
    dW2, da2, dH1 = layer_backward(model.layer2, g, c2, dM2)
    dM1 = dH1 * np.where(c1.M > 0, 1.0, np.exp(np.minimum(c1.M, 0.0)))
    dW1, da1, _ = layer_backward(model.layer1, g, c1, dM1)
    return loss, [dW1, da1, dW2, da2]


def corrupt_labels(labels, r: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Flip exactly ``floor(r * n)`` of the +/-1 ``labels`` chosen uniformly.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts. Returns the
    new labels and the sorted flipped indices.
    """
    if not 0.0 <= r <= 1.0:
        raise ConfigError(f"r must lie in [0, 1], got {r}")
    labels = np.asarray(labels, dtype=float)
    n = labels.shape[0]
    # round first so 0.29 * 100 floors to 29, not 28
    n_flip = math.floor(round(r * n, 9))
    rng = np.random.default_rng(seed)
    flipped = np.sort(rng.choice(n, size=n_flip, replace=False)) if n_flip else np.zeros(0, dtype=np.int64)
    out = labels.copy()
    out[flipped] = -out[flipped]
    return out, flipped


class Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def build_features(embeddings: np.ndarray, y_hat, label_signs) -> np.ndarray:
    """Stack ``[embedding | y_hat | label sign]`` per node."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=float))
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1, 1)
    signs = np.asarray(label_signs, dtype=float).reshape(-1, 1)
    if not (embeddings.shape[0] == y_hat.shape[0] == signs.shape[0]):
        raise ShapeError("embedding, y_hat and label arrays differ in length")
    if ((y_hat < 0) | (y_hat > 1)).any():
        raise ValueError("y_hat must lie in [0, 1]")
    return np.hstack([embeddings, y_hat, signs])


def train(graph: PostGraph, features: np.ndarray, ground_truth, cfg: TrainConfig = TrainConfig(),
          train_mask=None) -> tuple[GATModel, list[float]]:
    """Adversarial training loop.

    Each epoch flips ``floor(r * n_train)`` of the training labels with a
    fresh draw, writes them into the label column, and steps Adam on the NLL
    against the uncorrupted labels. Nodes outside ``train_mask`` keep the
    label column they were given and contribute no loss.
    """
    X = check_features(features, graph.n_nodes)
    y = check_labels(ground_truth, graph.n_nodes)
    mask = check_mask(train_mask, graph.n_nodes)
    g = GraphTensors.from_graph(graph, cfg.weighted)
    model = GATModel.init(X.shape[1], cfg)
    opt = Adam(model.params(), cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
    idx = np.flatnonzero(mask)
    clean = to_sign(y[idx])
    X_epoch = X.copy()
    losses = []
    for epoch in range(cfg.epochs):
        noisy, _ = corrupt_labels(clean, cfg.r, [cfg.seed, 1, epoch])
        X_epoch[idx, LABEL_COL] = noisy
        loss, grads = loss_and_grads(model, g, X_epoch, y, mask)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch, loss)
        opt.step(grads)
        losses.append(loss)
    return model, losses


def attention_weights(model: GATModel, graph: PostGraph, features, weighted: bool | None = None):
    """Per-layer attention coefficients aligned with ``GraphTensors.from_graph(graph)``."""
    X = check_features(features, graph.n_nodes, model.n_features)
    g = GraphTensors.from_graph(graph, model.config.weighted if weighted is None else weighted)
    _, (c1, c2) = forward(model, g, X, return_caches=True)
    return g, c1.alpha, c2.alpha


def predict_proba(model: GATModel, graph: PostGraph, features) -> np.ndarray:
    X = check_features(features, graph.n_nodes, model.n_features)
    g = GraphTensors.from_graph(graph, model.config.weighted)
    return np.exp(forward(model, g, X))


def refine(model: GATModel, graph: PostGraph, features) -> tuple[np.ndarray, np.ndarray]:
    """Refined label codes and P(real) per node."""
    proba = predict_proba(model, graph, features)
    return proba.argmax(axis=1), proba[:, Label.REAL]


def _rel_error(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def gradient_check(model: GATModel, graph: PostGraph, features, labels, epsilon: float = 1e-5,
                   wrt: str = "params", mask=None, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    The error is ``|g_a - g_fd| / max(|g_a|, |g_fd|, floor)`` so that entries
    that are zero up to rounding do not dominate. ``wrt="logits"`` checks the
    loss gradient w.r.t. the output scores only.
    """
    X = check_features(features, graph.n_nodes, model.n_features)
    y = check_labels(labels, graph.n_nodes)
    mask = check_mask(mask, graph.n_nodes)
    g = GraphTensors.from_graph(graph, model.config.weighted)
    if wrt == "logits":
        _, (_, c2) = forward(model, g, X, return_caches=True)
        logits = c2.M.copy()
        idx = np.flatnonzero(mask)
        analytic = np.zeros_like(logits)
        analytic[idx] = np.exp(_log_softmax(logits))[idx]
        analytic[idx, y[idx]] -= 1.0
        analytic /= len(idx)
        numeric = np.zeros_like(logits)
        for k in np.ndindex(*logits.shape):
            old = logits[k]
            logits[k] = old + epsilon
            up = nll_loss(_log_softmax(logits), y, mask)
            logits[k] = old - epsilon
            down = nll_loss(_log_softmax(logits), y, mask)
            logits[k] = old
            numeric[k] = (up - down) / (2 * epsilon)
        return _rel_error(analytic, numeric, floor)
    if wrt != "params":
        raise ValueError(f"wrt must be 'params' or 'logits', got {wrt!r}")
    probe = model.copy()
    _, grads = loss_and_grads(probe, g, X, y, mask)
    worst = 0.0
    for p, ga in zip(probe.params(), grads):
        numeric = np.zeros_like(p)
        for k in np.ndindex(*p.shape):
            old = p[k]
            p[k] = old + epsilon
            up = nll_loss(forward(probe, g, X), y, mask)
            p[k] = old - epsilon
            down = nll_loss(forward(probe, g, X), y, mask)
            p[k] = old
            numeric[k] = (up - down) / (2 * epsilon)
        worst = max(worst, _rel_error(ga, numeric, floor))
    return worst


def save_model(model: GATModel, path, **extra) -> None:
    doc = model.to_dict()
    doc.update(extra)
    write_json(path, doc)


def load_model(path) -> tuple[GATModel, dict]:
    doc = read_json(path)
    return GATModel.from_dict(doc), doc


class GATRefiner(ClassifierMixin, BaseEstimator):
    """Estimator wrapper: ``fit(X, y, graph=...)``, ``predict(X, graph=...)``.

    ``X`` rows follow ``graph.nodes``; the last column is the label sign slot.
    """

    def __init__(self, hidden=16, r=0.15, epochs=200, learning_rate=0.005, seed=0,
                 weighted=True, leaky_slope=0.2):
        self.hidden = hidden
        self.r = r
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.weighted = weighted
        self.leaky_slope = leaky_slope

    def _config(self) -> TrainConfig:
        return TrainConfig(r=self.r, epochs=self.epochs, learning_rate=self.learning_rate,
                           seed=self.seed, hidden=self.hidden, weighted=self.weighted,
                           leaky_slope=self.leaky_slope)

    def fit(self, X, y, graph: PostGraph, train_mask=None):
        self.model_, self.loss_curve_ = train(graph, X, y, self._config(), train_mask)
        self.classes_ = np.array([int(Label.FAKE), int(Label.REAL)])
        self.n_features_in_ = self.model_.n_features
        return self

    def predict_proba(self, X, graph: PostGraph) -> np.ndarray:
        check_is_fitted(self, "model_")
        return predict_proba(self.model_, graph, X)

    def predict(self, X, graph: PostGraph) -> np.ndarray:
        return self.predict_proba(X, graph).argmax(axis=1)

    def score(self, X, y, graph: PostGraph):
        return float(np.mean(self.predict(X, graph) == np.asarray(y)))
