"""Shallow multi-label classifiers built from one binary scorer per fault mode."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

MODEL_KINDS = ("logistic_regression", "decision_tree", "random_forest", "linear_svm")

DEFAULT_HYPERPARAMETERS: dict[str, dict[str, Any]] = {
    "logistic_regression": {"learning_rate": 0.5, "l2": 0.0, "epochs": 2000, "tol": 1e-6},
    "linear_svm": {"c_margin": 1.0, "learning_rate": None, "epochs": 2000, "tol": 1e-6},
    "decision_tree": {"max_depth": 8, "min_leaf": 1, "feature_subsample": 1.0},
    "random_forest": {
        "n_trees": 100,
        "max_depth": 8,
        "min_leaf": 1,
        "feature_subsample": "sqrt",
        "bootstrap": True,
    },
}

DEFAULT_THRESHOLDS = {
    "logistic_regression": 0.5,
    "linear_svm": 0.0,
    "decision_tree": 0.5,
    "random_forest": 0.5,
}

FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS[self.kind])
        if unknown:
            raise ModelError(f"{self.kind}: unknown hyperparameter(s) {sorted(unknown)}")
        hp = {**DEFAULT_HYPERPARAMETERS[self.kind], **self.hyperparameters}
        for key in ("learning_rate", "c_margin", "epochs", "max_depth", "min_leaf", "n_trees", "tol"):
            v = hp.get(key)
            if v is not None and v <= 0:
                raise ModelError(f"{self.kind}: {key} must be positive, got {v}")
        if hp.get("l2", 0) < 0:
            raise ModelError("l2 must be non-negative")
        fs = hp.get("feature_subsample")
        if fs is not None and fs != "sqrt" and not 0 < fs <= 1:
            raise ModelError("feature_subsample must be 'sqrt' or a fraction in (0, 1]")
        object.__setattr__(self, "hyperparameters", hp)

    @property
    def hp(self) -> Mapping[str, Any]:
        return self.hyperparameters

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(sorted(self.hyperparameters.items())), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(d["kind"], dict(d.get("hyperparameters", {})), int(d.get("seed", 0)))

    def complexity(self) -> tuple:
        """Ordering key used to break CVM ties in favour of simpler models."""
        hp = self.hyperparameters
        if self.kind == "logistic_regression":
            return (-hp["l2"],)
        if self.kind == "linear_svm":
            return (hp["c_margin"],)
        fs = hp["feature_subsample"]
        fs = 0.0 if fs == "sqrt" else fs
        if self.kind == "decision_tree":
            return (hp["max_depth"], -hp["min_leaf"], fs)
        return (hp["n_trees"] * hp["max_depth"], -hp["min_leaf"], fs)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# --------------------------------------------------------------------------- linear scorers


def logistic_loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss + l2/2 * ||w||^2 and its gradient w.r.t. (w, b)."""
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))
    r = sigmoid(z) - y
    return loss, X.T @ r / len(y) + l2 * w, float(np.mean(r))


def squared_hinge_loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float):
    """0.5 * ||w||^2 + C * mean(max(0, 1 - s*z)^2) with s = 2y - 1."""
    s = 2.0 * y - 1.0
    m = np.maximum(0.0, 1.0 - s * (X @ w + b))
    loss = float(0.5 * np.dot(w, w) + c * np.mean(m * m))
    g = -2.0 * c * m * s / len(y)
    return loss, w + X.T @ g, float(np.sum(g))


@dataclass
class LinearScorer:
    kind: str
    weights: np.ndarray
    bias: float
    n_iter: int = 0
    grad_norm: float = float("nan")

    def score(self, X: np.ndarray) -> np.ndarray:
        z = X @ self.weights + self.bias
        return sigmoid(z) if self.kind == "logistic_regression" else z

    def to_dict(self) -> dict:
        return {"type": "linear", "kind": self.kind, "weights": self.weights.tolist(), "bias": self.bias,
                "n_iter": self.n_iter, "grad_norm": self.grad_norm}


def fit_linear(kind: str, X: np.ndarray, y: np.ndarray, hp: Mapping[str, Any]) -> LinearScorer:
    """Full-batch gradient descent from zero until the gradient norm drops to ``tol`` or ``epochs`` run out.

    Without an explicit learning rate the step is 1/L with L an upper bound on
    the gradient's Lipschitz constant.
    """
    n, d = X.shape
    frob = float(np.sum(X * X) / n) + 1.0  # bias column included
    if kind == "logistic_regression":
        loss_grad, reg = logistic_loss_and_grad, hp["l2"]
        lipschitz = 0.25 * frob + reg
    else:
        loss_grad, reg = squared_hinge_loss_and_grad, hp["c_margin"]
        lipschitz = 1.0 + 2.0 * reg * frob
    lr = hp["learning_rate"] if hp.get("learning_rate") is not None else 1.0 / lipschitz
    w, b = np.zeros(d), 0.0
    gnorm = float("inf")
    it = 0
    for it in range(1, int(hp["epochs"]) + 1):
        _, gw, gb = loss_grad(w, b, X, y, reg)
        gnorm = math.sqrt(float(np.dot(gw, gw)) + gb * gb)
        if gnorm <= hp["tol"]:
            break
        w = w - lr * gw
        b = b - lr * gb
    return LinearScorer(kind, w, b, it, gnorm)


# --------------------------------------------------------------------------- trees


def _n_features(subsample, d: int) -> int:
    if subsample == "sqrt":
        return max(1, int(math.ceil(math.sqrt(d))))
    return max(1, int(math.ceil(subsample * d)))


@dataclass
class TreeScorer:
    """CART tree in flat arrays; leaves have ``feature == -1`` and score = positive fraction."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def score(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {"type": "tree", "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Lowest weighted Gini over midpoints of sorted unique values; first feature/position wins ties."""
    n = y.size
    sub = X[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order]
    cpos = np.cumsum(ys, axis=0)[:-1]  # positives left of cut i+1
    n_left = np.arange(1, n)[:, None].astype(np.float64)
    n_right = n - n_left
    pos_total = ys.sum(axis=0)
    p_left = cpos / n_left
    p_right = (pos_total - cpos) / n_right
    impurity = (n_left * 2 * p_left * (1 - p_left) + n_right * 2 * p_right * (1 - p_right)) / n
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        ok = (n_left[:, 0] >= min_leaf) & (n_right[:, 0] >= min_leaf)
        valid &= ok[:, None]
    impurity = np.where(valid, impurity, np.inf)
    flat = int(np.argmin(impurity.T))  # feature-major: earliest feature, then earliest cut
    j, i = divmod(flat, n - 1)
    if not np.isfinite(impurity[i, j]):
        return None
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(feats[j]), float(thr), float(impurity[i, j])


def fit_tree(X: np.ndarray, y: np.ndarray, hp: Mapping[str, Any], rng: np.random.Generator) -> TreeScorer:
    n, d = X.shape
    max_depth = int(hp["max_depth"])
    min_leaf = int(hp["min_leaf"])
    subsample = hp.get("feature_subsample", 1.0)
    k = _n_features(subsample, d)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if depth >= max_depth or idx.size < 2 * min_leaf or ys.min() == ys.max():
            continue
        feats = np.arange(d) if k >= d else np.sort(rng.choice(d, size=k, replace=False))
        best = _best_split(X[idx], ys, feats, min_leaf)
        if best is None:
            continue
        j, thr, _ = best
        mask = X[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = j, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # Right pushed first so the left subtree is numbered first.
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return TreeScorer(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
    )


@dataclass
class ForestScorer:
    trees: list[TreeScorer]

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.score(X) for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {"type": "forest", "trees": [t.to_dict() for t in self.trees]}


def fit_forest(X: np.ndarray, y: np.ndarray, hp: Mapping[str, Any], seed: int) -> ForestScorer:
    """Tree ``i`` draws its bootstrap sample and feature subsets from ``seed + i``."""
    trees = []
    n = y.size
    for i in range(int(hp["n_trees"])):
        rng = np.random.default_rng(seed + i)
        idx = rng.integers(0, n, size=n) if hp.get("bootstrap", True) else np.arange(n)
        trees.append(fit_tree(X[idx], y[idx], hp, rng))
    return ForestScorer(trees)


@dataclass
class ConstantScorer:
    value: float

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.value)

    def to_dict(self) -> dict:
        return {"type": "constant", "value": self.value}


# --------------------------------------------------------------------------- multi-label wrapper


@dataclass
class MultiLabelModel:
    spec: ModelSpec
    scorers: list
    fit_metadata: dict

    @property
    def n_modes(self) -> int:
        return len(self.scorers)

    def _prepare(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.fit_metadata["n_features"]:
            raise ModelError(
                f"expected {self.fit_metadata['n_features']} features, got shape {X.shape}"
            )
        std = self.fit_metadata.get("standardization")
        if std is not None:
            X = (X - np.asarray(std["mean"])) / np.asarray(std["scale"])
        return X

    def to_dict(self) -> dict:
        return {
            "format": "bearingleak-model",
            "version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "fit_metadata": self.fit_metadata,
            "scorers": [s.to_dict() for s in self.scorers],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MultiLabelModel":
        if d.get("format") != "bearingleak-model" or d.get("version") != FORMAT_VERSION:
            raise ModelError("not a supported model document")
        return cls(ModelSpec.from_dict(d["spec"]), [_scorer_from_dict(s) for s in d["scorers"]],
                   dict(d["fit_metadata"]))

    @classmethod
    def loads(cls, text: str) -> "MultiLabelModel":
        return cls.from_dict(json.loads(text))


def _tree_from_dict(d):
    return TreeScorer(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                      np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                      np.array(d["value"], dtype=float))


def _scorer_from_dict(d):
    t = d["type"]
    if t == "linear":
        return LinearScorer(d["kind"], np.array(d["weights"], dtype=float), float(d["bias"]),
                            d.get("n_iter", 0), d.get("grad_norm", float("nan")))
    if t == "tree":
        return _tree_from_dict(d)
    if t == "forest":
        return ForestScorer([_tree_from_dict(x) for x in d["trees"]])
    if t == "constant":
        return ConstantScorer(float(d["value"]))
    raise ModelError(f"unknown scorer type {t!r}")


def fit(spec: ModelSpec, X: np.ndarray, Y: np.ndarray) -> MultiLabelModel:
    """One-vs-rest: an independent binary scorer per column of ``Y``.

    A column with a single class yields a constant scorer listed in
    ``fit_metadata['degenerate']``. Linear models standardise features with
    statistics of ``X`` (the training rows) only.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise ModelError(f"bad training shapes X={X.shape} Y={Y.shape}")
    if not np.all(np.isfinite(X)):
        raise ModelError("training features contain non-finite values")
    meta: dict[str, Any] = {"n_train": int(X.shape[0]), "n_features": int(X.shape[1]), "degenerate": []}
    Xs = X
    if spec.kind in ("logistic_regression", "linear_svm"):
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        meta["standardization"] = {"mean": mean.tolist(), "scale": scale.tolist()}
        Xs = (X - mean) / scale
    scorers = []
    for m in range(Y.shape[1]):
        y = Y[:, m].astype(np.float64)
        if y.min() == y.max():
            meta["degenerate"].append(m)
            scorers.append(ConstantScorer(float(y[0])))
            continue
        if spec.kind in ("logistic_regression", "linear_svm"):
            scorers.append(fit_linear(spec.kind, Xs, y, spec.hp))
        elif spec.kind == "decision_tree":
            scorers.append(fit_tree(Xs, y, spec.hp, np.random.default_rng(spec.seed)))
        else:
            scorers.append(fit_forest(Xs, y, spec.hp, spec.seed))
    return MultiLabelModel(spec, scorers, meta)


def score(model: MultiLabelModel, X: np.ndarray) -> np.ndarray:
    Xs = model._prepare(X)
    return np.column_stack([s.score(Xs) for s in model.scorers])


def predict_binary(model: MultiLabelModel, X: np.ndarray, thresholds: Sequence[float] | None = None) -> np.ndarray:
    if thresholds is None:
        thresholds = [DEFAULT_THRESHOLDS[model.spec.kind]] * model.n_modes
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.shape != (model.n_modes,):
        raise ModelError(f"need {model.n_modes} thresholds")
    return (score(model, X) >= thresholds).astype(int)
