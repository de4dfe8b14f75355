"""Trainable contribution classifier over before/after feature fingerprints.

The model judges whether a candidate construction helps: it consumes the
concatenation of the scene fingerprint before and after the construction
(12 raw counts, optionally plus their componentwise difference) and emits a
probability that the construction contributes to closing the goal.  The
binary contribution value is the probability thresholded at 0.5, inclusive.

The network is deliberately small: one softplus hidden layer and a sigmoid
output, trained with seeded mini-batch gradient descent on (optionally
class-weighted) binary cross-entropy.  Forward and backward passes are
written out explicitly so gradients can be checked against finite
differences.  The estimator follows scikit-learn conventions (``fit`` /
``predict`` / ``predict_proba`` / ``get_params``).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DegenerateDatasetError, ProblemFormatError
from .features import FeatureVector

MODEL_MAGIC = b"auxgeo-contribution-model/1\n"


@dataclass(frozen=True)
class TrainingExample:
    """One labelled (fingerprint before, fingerprint after) pair."""

    v_before: tuple[int, ...]
    v_after: tuple[int, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "v_before", _six(self.v_before))
        object.__setattr__(self, "v_after", _six(self.v_after))
        if self.label not in (0, 1):
            raise ProblemFormatError(f"label must be 0 or 1, got {self.label!r}")


def _six(v) -> tuple[float, ...]:
    if isinstance(v, FeatureVector):
        v = v.as_tuple()
    t = tuple(float(x) for x in v)
    if len(t) != 6:
        raise ProblemFormatError(f"feature vector must have 6 components, got {len(t)}")
    return t


@dataclass
class TrainConfig:
    """Knobs for the training loop; defaults are the repository constants."""

    learning_rate: float = 0.01
    batch_size: int = 16
    max_epochs: int = 200
    seed: int = 0
    patience: int = 50
    min_delta: float = 1e-9
    hidden_units: int = 32
    positive_weight: float = 1.0
    use_difference: bool = False
    validation_fraction: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    epochs_run: int = 0
    train_accuracy: float = 0.0
    validation_accuracy: float | None = None


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float


# ---------------------------------------------------------------------------
# functional core (kept separate so gradient checking stays simple)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_params(n_inputs: int, hidden: int, rng: np.random.Generator) -> dict:
    """Uniform init in +-1/sqrt(fan_in) per layer."""
    s1 = 1.0 / np.sqrt(n_inputs)
    s2 = 1.0 / np.sqrt(hidden)
    return {
        "W1": rng.uniform(-s1, s1, size=(n_inputs, hidden)),
        "b1": rng.uniform(-s1, s1, size=hidden),
        "W2": rng.uniform(-s2, s2, size=(hidden, 1)),
        "b2": rng.uniform(-s2, s2, size=1),
    }


def forward(params: dict, X: np.ndarray) -> np.ndarray:
    """Probabilities in (0, 1) for each row of X."""
    z1 = X @ params["W1"] + params["b1"]
    a1 = _softplus(z1)
    z2 = a1 @ params["W2"] + params["b2"]
    return _sigmoid(z2)[:, 0]


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray, pos_weight: float = 1.0):
    """Mean weighted binary cross-entropy and its analytic gradient."""
    m = X.shape[0]
    z1 = X @ params["W1"] + params["b1"]
    a1 = _softplus(z1)
    z2 = a1 @ params["W2"] + params["b2"]
    p = _sigmoid(z2)[:, 0]
    eps = 1e-12
    w = np.where(y == 1.0, pos_weight, 1.0)
    loss = -np.mean(w * (y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps)))

    dz2 = ((pos_weight * y * (p - 1.0) + (1.0 - y) * p) / m)[:, None]
    gW2 = a1.T @ dz2
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ params["W2"].T
    dz1 = da1 * _sigmoid(z1)  # d softplus = sigmoid
    gW1 = X.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def flatten_params(params: dict) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in ("W1", "b1", "W2", "b2")])


def unflatten_params(vec: np.ndarray, n_inputs: int, hidden: int) -> dict:
    shapes = [("W1", (n_inputs, hidden)), ("b1", (hidden,)),
              ("W2", (hidden, 1)), ("b2", (1,))]
    out, at = {}, 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        out[name] = vec[at:at + size].reshape(shape).copy()
        at += size
    return out


# ---------------------------------------------------------------------------
# estimator


class ContributionClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier for the contribution of one construction.

    Parameters mirror :class:`TrainConfig`; ``fit`` consumes a matrix whose
    rows are ``concat(v_before, v_after)`` (plus the difference channel when
    ``use_difference`` is on) and 0/1 targets.
    """

    def __init__(self, hidden_units=32, learning_rate=0.01, batch_size=16,
                 max_epochs=200, seed=0, patience=50, min_delta=1e-9,
                 positive_weight=1.0, use_difference=False):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.seed = seed
        self.patience = patience
        self.min_delta = min_delta
        self.positive_weight = positive_weight
        self.use_difference = use_difference

    @property
    def n_inputs_(self) -> int:
        return 18 if self.use_difference else 12

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("model is not fitted")

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[1] != self.n_inputs_:
            raise ValueError(f"expected {self.n_inputs_} input columns, got {X.shape}")
        if len(set(y.tolist())) < 2:
            raise DegenerateDatasetError("training data must contain both classes")
        rng = np.random.default_rng(self.seed)
        params = init_params(self.n_inputs_, self.hidden_units, rng)
        n = X.shape[0]
        best = np.inf
        stale = 0
        losses: list[float] = []
        for _ in range(self.max_epochs):
            order = rng.permutation(n)
            for at in range(0, n, self.batch_size):
                idx = order[at:at + self.batch_size]
                _, grads = loss_and_grad(params, X[idx], y[idx], self.positive_weight)
                for k in params:
                    params[k] = params[k] - self.learning_rate * grads[k]
            loss, _ = loss_and_grad(params, X, y, self.positive_weight)
            losses.append(float(loss))
            if loss < best - self.min_delta:
                best = loss
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        self.params_ = params
        self.classes_ = np.array([0, 1])
        self.epoch_losses_ = losses
        return self

    def decision_probabilities(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return forward(self.params_, X)

    def predict_proba(self, X) -> np.ndarray:
        p = self.decision_probabilities(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.decision_probabilities(X) >= 0.5).astype(int)

    # -- pair interface used by the search ---------------------------------

    def pair_row(self, v_before, v_after) -> np.ndarray:
        vb = np.asarray(_six(v_before))
        va = np.asarray(_six(v_after))
        if self.use_difference:
            return np.concatenate([vb, va, va - vb])
        return np.concatenate([vb, va])

    def predict_pair(self, v_before, v_after) -> tuple[float, int]:
        """Probability and thresholded contribution value for one pair."""
        p = float(self.decision_probabilities(self.pair_row(v_before, v_after))[0])
        return p, int(p >= 0.5)

    def contribution(self, v_before, v_after) -> int:
        return self.predict_pair(v_before, v_after)[1]


# ---------------------------------------------------------------------------
# module-level operations


def dataset_matrices(dataset, use_difference: bool = False):
    X, y = [], []
    for ex in dataset:
        vb = np.asarray(ex.v_before)
        va = np.asarray(ex.v_after)
        row = np.concatenate([vb, va, va - vb]) if use_difference else np.concatenate([vb, va])
        X.append(row)
        y.append(ex.label)
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def train(dataset, cfg: TrainConfig | None = None):
    """Fit a classifier on labelled pairs; returns (model, report)."""
    cfg = cfg or TrainConfig()
    dataset = list(dataset)
    if not dataset:
        raise DegenerateDatasetError("empty training set")
    labels = {ex.label for ex in dataset}
    if labels != {0, 1}:
        raise DegenerateDatasetError("training data must contain both classes")

    train_set = dataset
    val_set: list[TrainingExample] = []
    if cfg.validation_fraction > 0 and len(dataset) >= 10:
        rng = np.random.default_rng(cfg.seed)
        order = rng.permutation(len(dataset))
        n_val = max(1, int(round(cfg.validation_fraction * len(dataset))))
        val_idx = set(order[:n_val].tolist())
        candidate_train = [ex for i, ex in enumerate(dataset) if i not in val_idx]
        if {ex.label for ex in candidate_train} == {0, 1}:
            train_set = candidate_train
            val_set = [ex for i, ex in enumerate(dataset) if i in val_idx]

    model = ContributionClassifier(
        hidden_units=cfg.hidden_units, learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size, max_epochs=cfg.max_epochs, seed=cfg.seed,
        patience=cfg.patience, min_delta=cfg.min_delta,
        positive_weight=cfg.positive_weight, use_difference=cfg.use_difference,
    )
    X, y = dataset_matrices(train_set, cfg.use_difference)
    model.fit(X, y)
    report = TrainReport(
        epoch_losses=list(model.epoch_losses_),
        epochs_run=len(model.epoch_losses_),
        train_accuracy=evaluate(model, train_set).accuracy,
        validation_accuracy=evaluate(model, val_set).accuracy if val_set else None,
    )
    return model, report


def predict(model, v_before, v_after) -> tuple[float, int]:
    """Probability and 0/1 contribution for one before/after pair."""
    return model.predict_pair(v_before, v_after)


def evaluate(model, dataset) -> EvalReport:
    """Accuracy, precision and recall under the inclusive 0.5 threshold."""
    dataset = list(dataset)
    if not dataset:
        raise DegenerateDatasetError("empty evaluation set")
    use_diff = getattr(model, "use_difference", False)
    X, y = dataset_matrices(dataset, use_diff)
    pred = model.predict(X)
    y = y.astype(int)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    accuracy = float(np.mean(pred == y))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return EvalReport(accuracy, precision, recall)


def split_dataset(dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Shuffled train/valid/test split with the given proportions."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    data = list(dataset)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    n_train = int(round(fractions[0] * len(data)))
    n_valid = int(round(fractions[1] * len(data)))
    train_idx = order[:n_train]
    valid_idx = order[n_train:n_train + n_valid]
    test_idx = order[n_train + n_valid:]
    pick = lambda idx: [data[i] for i in idx]
    return pick(train_idx), pick(valid_idx), pick(test_idx)


# ---------------------------------------------------------------------------
# persistence: magic, layer sizes, then row-major little-endian float64


def save_model(model: ContributionClassifier, path) -> None:
    model._check_fitted()
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    header = f"{model.n_inputs_} {model.hidden_units} 1 {int(model.use_difference)}\n"
    buf.write(header.encode("ascii"))
    for key in ("W1", "b1", "W2", "b2"):
        buf.write(np.ascontiguousarray(model.params_[key], dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_model(path) -> ContributionClassifier:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MODEL_MAGIC):
        raise ProblemFormatError("bad model file magic", path=str(path))
    rest = blob[len(MODEL_MAGIC):]
    nl = rest.index(b"\n")
    try:
        n_in, hidden, n_out, use_diff = (int(t) for t in rest[:nl].split())
    except ValueError:
        raise ProblemFormatError("bad model header", path=str(path)) from None
    if n_out != 1:
        raise ProblemFormatError("unsupported output width", path=str(path))
    payload = rest[nl + 1:]
    expected = (n_in * hidden + hidden + hidden + 1) * 8
    if len(payload) != expected:
        raise ProblemFormatError(
            f"model payload has {len(payload)} bytes, expected {expected}",
            path=str(path),
        )
    vec = np.frombuffer(payload, dtype="<f8").astype(float)
    model = ContributionClassifier(hidden_units=hidden, use_difference=bool(use_diff))
    model.params_ = unflatten_params(vec, n_in, hidden)
    model.classes_ = np.array([0, 1])
    return model
