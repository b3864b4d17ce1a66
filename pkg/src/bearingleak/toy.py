"""Synthetic fault-detection problem with a closed-form accuracy ceiling.

Each sample has ``n_fault_features`` fault-predictive features (base ``a_f``
for faulty bearings, 0 for healthy ones) followed by one identity feature per
bearing (base ``a_b`` in the sample's own slot, 0 elsewhere), all with unit
Gaussian noise. Thresholding the mean fault feature at ``a_f / 2`` is the
Bayes-optimal rule for balanced classes, with accuracy ``Phi(a_f * sqrt(N) / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .models import ModelSpec, fit, score

TEST_MODES = ("valid", "leakage")

# Toy model defaults; the figure's hyperparameters were never published.
TOY_MODELS: dict[str, ModelSpec] = {
    "logistic_regression": ModelSpec("logistic_regression", {"learning_rate": 0.5, "epochs": 500}),
    "decision_tree": ModelSpec("decision_tree", {"max_depth": 8, "min_leaf": 1}),
}


@dataclass(frozen=True)
class ToyConfig:
    n_bearings: int = 48
    n_fault_features: int = 3
    a_f: float = 1.5
    a_b: float = 8.0
    samples_per_bearing: int = 40
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_bearings < 2 or self.n_bearings % 2:
            raise ValueError("n_bearings must be a positive even integer")
        if self.n_fault_features < 1 or self.samples_per_bearing < 1:
            raise ValueError("n_fault_features and samples_per_bearing must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_features(self) -> int:
        return self.n_fault_features + self.n_bearings

    def is_faulty(self, bearing: int) -> bool:
        """Bearings [0, B/2) are healthy, [B/2, B) faulty."""
        return bearing >= self.n_bearings // 2


class ToySample(NamedTuple):
    features: np.ndarray
    label: int
    bearing_id: int


@dataclass(frozen=True, eq=False)
class ToyDataset:
    X: np.ndarray
    y: np.ndarray
    bearing_ids: np.ndarray

    def __len__(self) -> int:
        return self.y.size

    def __getitem__(self, i: int) -> ToySample:
        return ToySample(self.X[i], int(self.y[i]), int(self.bearing_ids[i]))


def generate_toy_dataset(
    config: ToyConfig,
    bearings: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
    noise_std: float = 1.0,
    identity_slots: bool = True,
) -> ToyDataset:
    """Samples for ``bearings`` (all B by default), ``samples_per_bearing`` each.

    ``rng`` defaults to a generator seeded with ``config.seed``. ``noise_std=0``
    gives the noiseless base values. With ``identity_slots=False`` the samples
    come from bearings outside the modelled pool: all identity features have base 0.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if bearings is None:
        bearings = range(config.n_bearings)
    bearings = np.asarray(list(bearings), dtype=np.int64)
    if bearings.size and (bearings.min() < 0 or bearings.max() >= config.n_bearings):
        raise ValueError("bearing index out of range")
    ids = np.repeat(bearings, config.samples_per_bearing)
    y = (ids >= config.n_bearings // 2).astype(np.int64)
    n = ids.size
    N = config.n_fault_features
    X = np.zeros((n, config.n_features))
    X[:, :N] = config.a_f * y[:, None]
    if identity_slots:
        X[np.arange(n), N + ids] = config.a_b
    if noise_std:
        X += rng.normal(0.0, noise_std, size=X.shape)
    return ToyDataset(X, y, ids)


def map_threshold_classifier(sample: ToySample | np.ndarray, a_f: float, n_fault_features: int) -> int | np.ndarray:
    """1 iff the mean of the first ``n_fault_features`` features exceeds ``a_f / 2`` (strictly).

    Accepts a single sample / feature vector, or a 2-D feature matrix (vectorised).
    """
    x = sample.features if isinstance(sample, ToySample) else np.asarray(sample, dtype=np.float64)
    if x.shape[-1] < n_fault_features:
        raise ValueError("sample has fewer features than n_fault_features")
    decision = x[..., :n_fault_features].mean(axis=-1) > a_f / 2
    return int(decision) if x.ndim == 1 else decision.astype(np.int64)


def std_normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def theoretical_max_accuracy(a_f: float, n_fault_features: int) -> float:
    """Accuracy of the MAP rule: Phi(a_f * sqrt(N) / 2)."""
    if n_fault_features < 1:
        raise ValueError("n_fault_features must be at least 1")
    return std_normal_cdf(a_f * math.sqrt(n_fault_features) / 2.0)


def monte_carlo_map_accuracy(
    a_f: float, n_fault_features: int, n_samples: int, rng: np.random.Generator
) -> float:
    """Accuracy of the MAP rule on freshly drawn balanced-prior fault-feature vectors."""
    y = rng.integers(0, 2, size=n_samples)
    X = a_f * y[:, None] + rng.normal(size=(n_samples, n_fault_features))
    return float(np.mean(map_threshold_classifier(X, a_f, n_fault_features) == y))


class ToySummary(NamedTuple):
    mean: float
    std: float
    accuracies: tuple[float, ...]


class ToyRunError(RuntimeError):
    def __init__(self, seed_index: int, cause: Exception):
        self.seed_index = seed_index
        super().__init__(f"toy run failed at seed index {seed_index}: {cause}")


def toy_run(
    config: ToyConfig, n_train_bearings_per_class: int, model: ModelSpec, test_mode: str, seed_index: int
) -> float:
    """Accuracy of one training/test draw; the seed index selects an independent generator stream."""
    if test_mode not in TEST_MODES:
        raise ValueError(f"test_mode must be one of {TEST_MODES}")
    half = config.n_bearings // 2
    k = n_train_bearings_per_class
    if not 1 <= k <= half:
        raise ValueError(f"n_train_bearings_per_class must lie in [1, {half}]")
    rng = np.random.default_rng([config.seed, seed_index])
    healthy = rng.permutation(half)
    faulty = half + rng.permutation(half)
    train_b = np.concatenate([healthy[:k], faulty[:k]])
    train = generate_toy_dataset(config, train_b, rng)
    if test_mode == "leakage":
        test = generate_toy_dataset(config, train_b, rng)
    elif k < half:
        test = generate_toy_dataset(config, np.concatenate([healthy[k:], faulty[k:]]), rng)
    else:
        # Every pool bearing is in training: test on unseen bearings without an identity slot.
        test = generate_toy_dataset(config, np.concatenate([healthy, faulty]), rng, identity_slots=False)
    spec = ModelSpec(model.kind, dict(model.hyperparameters), model.seed + seed_index)
    fitted = fit(spec, train.X, train.y)
    s = score(fitted, test.X)[:, 0]
    pred = (s >= 0.5).astype(np.int64)
    return float(np.mean(pred == test.y))


def run_toy_experiment(
    config: ToyConfig,
    n_train_bearings_per_class: int,
    model: ModelSpec,
    test_mode: str,
    n_seeds: int,
) -> ToySummary:
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    accs = []
    for i in range(n_seeds):
        try:
            accs.append(toy_run(config, n_train_bearings_per_class, model, test_mode, i))
        except ValueError:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with the seed index
            raise ToyRunError(i, exc) from exc
    arr = np.array(accs)
    return ToySummary(float(arr.mean()), float(arr.std()), tuple(accs))
