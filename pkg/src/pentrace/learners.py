"""From-scratch binary classifiers behind one train/predict interface.

Five model kinds: CART decision tree (Gini, midpoint thresholds), random
forest (bootstrap bagging + per-split feature subsets), SVM trained by
SMO-style dual optimization (linear or RBF kernel), one-hidden-layer MLP
(tanh hidden, logistic output, mini-batch gradient descent), and
gradient-boosted regression trees on the logistic loss (Newton leaf
values), which also serves as the wrapper model for feature selection.

Conventions shared by every kind:

* labels are 0 (HC) / 1 (AD); prediction ties break toward 0
* randomized learners are fully determined by their ``seed``
* SVM and MLP standardize features internally (mean/std fit on the
  training data only); tree models see raw values
* ``predict`` refuses vectors whose feature names differ from training
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

MODEL_KINDS = ("DT", "RF", "SVM", "MLP", "GBT")

# regularization constants for the boosted trees (xgboost-style Newton steps)
_GBT_REG_LAMBDA = 1.0
_GBT_MIN_LEAF = 2
_GBT_MAX_LEAF_VALUE = 4.0
# hard safety cap only; the solver normally stops at a clean full sweep
_SVM_MAX_SWEEPS = 5000


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus labels and grouping keys for one experiment cell."""

    features: np.ndarray  # (n, d) float
    names: tuple[str, ...]
    labels: np.ndarray  # (n,) int in {0, 1}
    groups: tuple[str, ...]  # participant id per sample
    task_ids: tuple[int, ...]

    def __post_init__(self):
        n, d = self.features.shape
        if d < 1:
            raise ValidationError("dataset needs at least one feature")
        if len(self.names) != d:
            raise ValidationError("names length does not match feature count")
        if not (len(self.labels) == len(self.groups) == len(self.task_ids) == n):
            raise ValidationError("dataset columns have inconsistent lengths")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset_rows(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.names, self.labels[idx],
                       tuple(self.groups[i] for i in idx),
                       tuple(self.task_ids[i] for i in idx))

    def subset_features(self, keep_names) -> "Dataset":
        keep = set(keep_names)
        cols = [j for j, name in enumerate(self.names) if name in keep]
        missing = keep - set(self.names)
        if missing:
            raise ValidationError(f"unknown feature names {sorted(missing)}")
        return Dataset(self.features[:, cols], tuple(self.names[j] for j in cols),
                       self.labels, self.groups, self.task_ids)


def dataset_from_vectors(vectors) -> Dataset:
    """Stack FeatureVectors (one set tag) into a Dataset; AD maps to 1."""
    if not vectors:
        raise ValidationError("no feature vectors")
    names = vectors[0].names
    for v in vectors:
        if v.names != names:
            raise ValidationError("feature vectors have inconsistent names")
    X = np.vstack([v.values for v in vectors])
    y = np.array([1 if v.label == "AD" else 0 for v in vectors], dtype=int)
    groups = tuple(v.participant_id for v in vectors)
    task_ids = tuple(v.task_id for v in vectors)
    return Dataset(X, names, y, groups, task_ids)


# ----------------------------------------------------------------------
# hyperparameters


@dataclass(frozen=True)
class DTParams:
    max_depth: int | None = None  # None = unlimited
    min_leaf: int = 1


@dataclass(frozen=True)
class RFParams:
    n_trees: int = 100
    features_per_split: int | None = None  # None = ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0


@dataclass(frozen=True)
class SVMParams:
    kernel: str = "rbf"  # 'linear' | 'rbf'
    C: float = 1.0
    gamma: float | None = None  # None = 1/d
    tol: float = 1e-3
    max_passes: int = 1  # consecutive clean full sweeps required to stop


@dataclass(frozen=True)
class MLPParams:
    hidden_units: int | None = None  # None = 2d
    learning_rate: float = 0.01
    epochs: int = 500
    batch_size: int = 16
    seed: int = 0


@dataclass(frozen=True)
class GBTParams:
    n_rounds: int = 200
    depth: int = 3
    shrinkage: float = 0.1


PARAM_TYPES = {"DT": DTParams, "RF": RFParams, "SVM": SVMParams,
               "MLP": MLPParams, "GBT": GBTParams}


def default_params(kind: str):
    try:
        return PARAM_TYPES[kind]()
    except KeyError:
        raise ValidationError(f"unknown model kind {kind!r}") from None


@dataclass
class TrainedModel:
    kind: str
    params: object
    feature_names: tuple[str, ...]
    state: dict


# ----------------------------------------------------------------------
# classification trees (CART, Gini)


def _best_gini_split(X, y, feature_ids, min_leaf):
    """Best (feature, threshold, weighted_child_gini) over the candidates.

    Splits sit at midpoints between consecutive distinct sorted values;
    ties keep the first (lowest feature id, lowest threshold) optimum.
    """
    n = len(y)
    best = (math.inf, -1, 0.0)
    nl = np.arange(1, n)
    nr = n - nl
    total_c1 = int(np.sum(y))
    for j in feature_ids:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        valid = xs[1:] != xs[:-1]
        if min_leaf > 1:
            valid &= (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        c1l = np.cumsum(y[order])[:-1]
        c1r = total_c1 - c1l
        gini_l = 1.0 - (c1l / nl) ** 2 - ((nl - c1l) / nl) ** 2
        gini_r = 1.0 - (c1r / nr) ** 2 - ((nr - c1r) / nr) ** 2
        w = (nl * gini_l + nr * gini_r) / n
        w[~valid] = math.inf
        k = int(np.argmin(w))
        if w[k] < best[0]:
            best = (float(w[k]), j, float((xs[k] + xs[k + 1]) / 2.0))
    return best


def _gini(y) -> float:
    n = len(y)
    if n == 0:
        return 0.0
    p1 = float(np.sum(y)) / n
    return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)


def _grow_cart(X, y, depth, max_depth, min_leaf, n_features_split, rng,
               n_total, importance):
    n = len(y)
    n1 = int(np.sum(y))
    counts = (n - n1, n1)
    make_leaf = (
        n1 == 0 or n1 == n or n < 2 * min_leaf or n < 2
        or (max_depth is not None and depth >= max_depth)
    )
    if not make_leaf:
        d = X.shape[1]
        if n_features_split is not None and n_features_split < d:
            feature_ids = np.sort(rng.choice(d, size=n_features_split, replace=False))
        else:
            feature_ids = range(d)
        w_best, j, threshold = _best_gini_split(X, y, feature_ids, min_leaf)
        parent = _gini(y)
        # zero-gain splits are allowed (XOR-style labels need them); only a
        # node with no valid split at all becomes an impure leaf
        if j < 0:
            make_leaf = True
    if make_leaf:
        return {"leaf": True, "counts": counts,
                "value": 1 if n1 * 2 > n else 0}
    importance[j] += (n * parent - n * w_best) / n_total
    mask = X[:, j] <= threshold
    left = _grow_cart(X[mask], y[mask], depth + 1, max_depth, min_leaf,
                      n_features_split, rng, n_total, importance)
    right = _grow_cart(X[~mask], y[~mask], depth + 1, max_depth, min_leaf,
                       n_features_split, rng, n_total, importance)
    return {"leaf": False, "feature": int(j), "threshold": threshold,
            "counts": counts, "left": left, "right": right}


def _tree_scores(node, X):
    """Class-1 leaf fraction per row."""
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd["leaf"]:
            n0, n1 = nd["counts"]
            out[idx] = n1 / (n0 + n1) if (n0 + n1) else 0.0
        else:
            mask = X[idx, nd["feature"]] <= nd["threshold"]
            stack.append((nd["left"], idx[mask]))
            stack.append((nd["right"], idx[~mask]))
    return out


def _tree_labels(node, X):
    out = np.empty(len(X), dtype=int)
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd["leaf"]:
            out[idx] = nd["value"]
        else:
            mask = X[idx, nd["feature"]] <= nd["threshold"]
            stack.append((nd["left"], idx[mask]))
            stack.append((nd["right"], idx[~mask]))
    return out


# ----------------------------------------------------------------------
# regression trees on (gradient, hessian) for the boosted model


def _best_newton_split(X, g, h, min_leaf, reg):
    n = len(g)
    best = (0.0, -1, 0.0)  # (gain, feature, threshold)
    nl = np.arange(1, n)
    nr = n - nl
    G, H = float(g.sum()), float(h.sum())
    parent = G * G / (H + reg)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        valid = (xs[1:] != xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        gl = np.cumsum(g[order])[:-1]
        hl = np.cumsum(h[order])[:-1]
        gain = gl * gl / (hl + reg) + (G - gl) ** 2 / (H - hl + reg) - parent
        gain[~valid] = -math.inf
        k = int(np.argmax(gain))
        if gain[k] > best[0]:
            best = (float(gain[k]), j, float((xs[k] + xs[k + 1]) / 2.0))
    return best


def _grow_newton(X, g, h, depth, max_depth, gain_totals):
    if depth < max_depth and len(g) >= 2 * _GBT_MIN_LEAF:
        gain, j, threshold = _best_newton_split(X, g, h, _GBT_MIN_LEAF, _GBT_REG_LAMBDA)
        if j >= 0 and gain > 1e-12:
            gain_totals[j] += gain
            mask = X[:, j] <= threshold
            return {"leaf": False, "feature": int(j), "threshold": threshold,
                    "left": _grow_newton(X[mask], g[mask], h[mask],
                                         depth + 1, max_depth, gain_totals),
                    "right": _grow_newton(X[~mask], g[~mask], h[~mask],
                                          depth + 1, max_depth, gain_totals)}
    value = -float(g.sum()) / (float(h.sum()) + _GBT_REG_LAMBDA)
    value = float(np.clip(value, -_GBT_MAX_LEAF_VALUE, _GBT_MAX_LEAF_VALUE))
    return {"leaf": True, "value": value}


def _newton_values(node, X):
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd["leaf"]:
            out[idx] = nd["value"]
        else:
            mask = X[idx, nd["feature"]] <= nd["threshold"]
            stack.append((nd["left"], idx[mask]))
            stack.append((nd["right"], idx[~mask]))
    return out


def _logistic_loss(raw, y):
    # mean of softplus(raw) - y*raw, the numerically stable binary cross-entropy
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


# ----------------------------------------------------------------------
# SVM via sequential minimal optimization


def _kernel_matrix(A, B, kernel, gamma):
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
              - 2.0 * (A @ B.T))
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValidationError(f"unknown kernel {kernel!r}")


def _smo_train(X, y_pm, C, K, tol, max_passes):
    """Dual optimization with the classic outer-loop structure: full sweeps
    alternate with sweeps over the non-bound multipliers until a full sweep
    changes nothing. Pair choice is deterministic: the second index is the
    non-bound point maximizing |Ei - Ej|, then sequential fallbacks.
    Returns (alpha, b)."""
    n = len(y_pm)
    alpha = np.zeros(n)
    b = 0.0
    # error cache: E_i = f(x_i) - y_i, maintained incrementally
    E = -y_pm.astype(float).copy()

    def take_step(i, j):
        nonlocal b, E
        if i == j:
            return False
        ai, aj = alpha[i], alpha[j]
        yi, yj = y_pm[i], y_pm[j]
        if yi != yj:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if L >= H:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0.0:
            return False
        aj_new = aj - yj * (E[i] - E[j]) / eta
        aj_new = min(max(aj_new, L), H)
        # snap to the box so zero/C multipliers are exact, not float dust
        if aj_new < 1e-10 * C:
            aj_new = 0.0
        elif aj_new > (1.0 - 1e-10) * C:
            aj_new = C
        if abs(aj_new - aj) < 1e-7 * (aj_new + aj + 1e-7):
            return False
        ai_new = ai + yi * yj * (aj - aj_new)
        if ai_new < 1e-10 * C:
            ai_new = 0.0
        elif ai_new > (1.0 - 1e-10) * C:
            ai_new = C
        b1 = b - E[i] - yi * (ai_new - ai) * K[i, i] - yj * (aj_new - aj) * K[i, j]
        b2 = b - E[j] - yi * (ai_new - ai) * K[i, j] - yj * (aj_new - aj) * K[j, j]
        if 0.0 < ai_new < C:
            b_new = b1
        elif 0.0 < aj_new < C:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0
        E += ((ai_new - ai) * yi * K[i] + (aj_new - aj) * yj * K[j]
              + (b_new - b))
        alpha[i], alpha[j] = ai_new, aj_new
        b = b_new
        return True

    def examine(i):
        r = E[i] * y_pm[i]
        if (r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0):
            non_bound = np.flatnonzero((alpha > 0) & (alpha < C))
            if len(non_bound) > 1:
                j = int(non_bound[np.argmax(np.abs(E[i] - E[non_bound]))])
                if take_step(i, j):
                    return True
            start = (i + 1) % n
            for j in np.roll(non_bound, -int(np.searchsorted(non_bound, start))):
                if take_step(i, int(j)):
                    return True
            for offset in range(n):
                if take_step(i, (start + offset) % n):
                    return True
        return False

    examine_all = True
    clean_full_passes = 0
    for _ in range(_SVM_MAX_SWEEPS):
        if examine_all:
            changed = sum(examine(i) for i in range(n))
            if changed == 0:
                clean_full_passes += 1
                if clean_full_passes >= max_passes:
                    break
            else:
                clean_full_passes = 0
            examine_all = False
        else:
            non_bound = np.flatnonzero((alpha > 0) & (alpha < C))
            changed = sum(examine(int(i)) for i in non_bound)
            if changed == 0:
                examine_all = True
    return alpha, b


def svm_kkt_residuals(model: TrainedModel) -> tuple[float, float]:
    """(worst margin shortfall where alpha < C, worst margin excess where
    alpha > 0) on the training set; both are <= tol at convergence."""
    st = model.state
    X = np.asarray(st["X_train"])
    y_pm = np.asarray(st["y_train_pm"], dtype=float)
    alpha = np.asarray(st["alpha_train"])
    params = model.params
    K = _kernel_matrix(X, X, params.kernel, st["gamma"])
    f = (alpha * y_pm) @ K + st["b"]
    margins = y_pm * f
    C = params.C
    lower = float(np.max((1.0 - margins)[alpha < C], initial=0.0))
    upper = float(np.max((margins - 1.0)[alpha > 0], initial=0.0))
    return lower, upper


# ----------------------------------------------------------------------
# multilayer perceptron


def mlp_init(d, hidden, rng):
    return {
        "W1": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, 1)),
        "b2": np.zeros(1),
    }


def mlp_loss_and_grads(weights, X, y):
    """Mean binary cross-entropy of the 1-hidden-layer net and its analytic
    gradients; the gradient-check tests difference this against central
    finite differences."""
    W1, b1, W2, b2 = weights["W1"], weights["b1"], weights["W2"], weights["b2"]
    n = len(X)
    z1 = X @ W1 + b1
    hdn = np.tanh(z1)
    z2 = (hdn @ W2 + b2).ravel()
    loss = float(np.mean(np.logaddexp(0.0, z2) - y * z2))
    p = 1.0 / (1.0 + np.exp(-z2))
    dz2 = ((p - y) / n)[:, None]
    grads = {
        "W2": hdn.T @ dz2,
        "b2": dz2.sum(axis=0),
    }
    dh = dz2 @ W2.T
    dz1 = dh * (1.0 - hdn ** 2)
    grads["W1"] = X.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


def _mlp_train(X, y, params: MLPParams):
    d = X.shape[1]
    hidden = params.hidden_units if params.hidden_units is not None else 2 * d
    rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    weights = mlp_init(d, hidden, rng)
    n = len(X)
    batch = max(1, min(params.batch_size, n))
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            _, grads = mlp_loss_and_grads(weights, X[idx], y[idx])
            for key in weights:
                weights[key] = weights[key] - params.learning_rate * grads[key]
    return weights


def _mlp_scores(weights, X):
    hdn = np.tanh(X @ np.asarray(weights["W1"]) + np.asarray(weights["b1"]))
    z2 = (hdn @ np.asarray(weights["W2"]) + np.asarray(weights["b2"])).ravel()
    return 1.0 / (1.0 + np.exp(-z2))


# ----------------------------------------------------------------------
# public interface


def _standardize_fit(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return mu, sd


def train(kind: str, dataset: Dataset, params=None) -> TrainedModel:
    """Fit one model kind on a dataset.

    Raises when the training labels are single-class or any feature value
    is non-finite. Randomized kinds (RF, MLP) are reproducible from the
    seed carried in their params.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}")
    if params is None:
        params = default_params(kind)
    X = np.asarray(dataset.features, dtype=float)
    y = np.asarray(dataset.labels, dtype=int)
    if not np.isfinite(X).all():
        raise ValidationError("non-finite feature value in training data")
    # trees degrade to a constant leaf on pure labels; the margin/gradient
    # learners have nothing to optimize there and refuse
    if len(np.unique(y)) < 2 and kind in ("SVM", "MLP", "GBT"):
        raise ValidationError("training set contains a single class")

    state: dict = {}
    if kind == "DT":
        importance = np.zeros(dataset.d)
        root = _grow_cart(X, y, 0, params.max_depth, params.min_leaf,
                          None, None, len(y), importance)
        state = {"root": root, "importance": importance.tolist()}
    elif kind == "RF":
        m = params.features_per_split
        if m is None:
            m = int(math.ceil(math.sqrt(dataset.d)))
        m = min(m, dataset.d)
        trees = []
        importance = np.zeros(dataset.d)
        for tree_idx in range(params.n_trees):
            rng = np.random.default_rng(
                np.random.SeedSequence(params.seed, spawn_key=(tree_idx,)))
            if params.bootstrap:
                idx = rng.integers(0, len(y), size=len(y))
                Xb, yb = X[idx], y[idx]
            else:
                Xb, yb = X, y
            tree_importance = np.zeros(dataset.d)
            if len(np.unique(yb)) < 2:
                root = {"leaf": True, "counts": (int(np.sum(yb == 0)), int(np.sum(yb))),
                        "value": int(yb[0])}
            else:
                root = _grow_cart(Xb, yb, 0, None, 1, m, rng, len(yb), tree_importance)
            importance += tree_importance
            trees.append(root)
        state = {"trees": trees, "importance": importance.tolist()}
    elif kind == "SVM":
        mu, sd = _standardize_fit(X)
        Xs = (X - mu) / sd
        gamma = params.gamma if params.gamma is not None else 1.0 / dataset.d
        y_pm = np.where(y == 1, 1.0, -1.0)
        K = _kernel_matrix(Xs, Xs, params.kernel, gamma)
        alpha, b = _smo_train(Xs, y_pm, params.C, K, params.tol, params.max_passes)
        support = alpha > 1e-12
        state = {
            "mu": mu.tolist(), "sd": sd.tolist(), "gamma": gamma, "b": float(b),
            "support_x": Xs[support].tolist(),
            "support_ay": (alpha[support] * y_pm[support]).tolist(),
            # full training-side state kept for KKT audits
            "X_train": Xs.tolist(), "y_train_pm": y_pm.tolist(),
            "alpha_train": alpha.tolist(),
        }
    elif kind == "MLP":
        mu, sd = _standardize_fit(X)
        Xs = (X - mu) / sd
        weights = _mlp_train(Xs, y.astype(float), params)
        state = {"mu": mu.tolist(), "sd": sd.tolist(),
                 "weights": {k: v.tolist() for k, v in weights.items()}}
    elif kind == "GBT":
        p0 = float(np.clip(np.mean(y), 1e-6, 1.0 - 1e-6))
        f0 = math.log(p0 / (1.0 - p0))
        raw = np.full(len(y), f0)
        yf = y.astype(float)
        loss = _logistic_loss(raw, yf)
        trees = []
        gain_totals = np.zeros(dataset.d)
        losses = [loss]
        for _ in range(params.n_rounds):
            p = 1.0 / (1.0 + np.exp(-raw))
            g = p - yf
            h = p * (1.0 - p)
            tree = _grow_newton(X, g, h, 0, params.depth, gain_totals)
            step = params.shrinkage * _newton_values(tree, X)
            scale = 1.0
            # step-halving keeps the training loss non-increasing
            for _ in range(10):
                candidate = _logistic_loss(raw + scale * step, yf)
                if candidate <= loss:
                    break
                scale *= 0.5
            else:
                trees.append({"tree": tree, "scale": 0.0})
                losses.append(loss)
                continue
            raw = raw + scale * step
            loss = candidate
            trees.append({"tree": tree, "scale": scale})
            losses.append(loss)
        state = {"f0": f0, "trees": trees, "losses": losses,
                 "importance": gain_totals.tolist()}

    return TrainedModel(kind=kind, params=params,
                        feature_names=dataset.names, state=state)


def _check_schema(model: TrainedModel, names):
    names = tuple(names)
    if names != model.feature_names:
        missing = set(model.feature_names) - set(names)
        extra = set(names) - set(model.feature_names)
        raise SchemaError(missing, extra)


def predict(model: TrainedModel, X, names=None):
    """Labels and class-1 scores for a feature matrix.

    ``names`` defaults to the training schema; passing them enables the
    schema check for externally assembled matrices.
    """
    if names is not None:
        _check_schema(model, names)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    st = model.state
    if model.kind == "DT":
        scores = _tree_scores(st["root"], X)
        labels = _tree_labels(st["root"], X)
    elif model.kind == "RF":
        votes = np.vstack([_tree_labels(tree, X) for tree in st["trees"]])
        scores = votes.mean(axis=0)
        labels = (scores > 0.5).astype(int)  # ties toward class 0
    elif model.kind == "SVM":
        Xs = (X - np.asarray(st["mu"])) / np.asarray(st["sd"])
        sup = np.asarray(st["support_x"], dtype=float)
        ay = np.asarray(st["support_ay"], dtype=float)
        if len(sup):
            Kx = _kernel_matrix(np.atleast_2d(sup), Xs, model.params.kernel, st["gamma"])
            margin = ay @ Kx + st["b"]
        else:
            margin = np.full(len(Xs), st["b"])
        scores = 1.0 / (1.0 + np.exp(-margin))
        labels = (margin > 0).astype(int)
    elif model.kind == "MLP":
        Xs = (X - np.asarray(st["mu"])) / np.asarray(st["sd"])
        scores = _mlp_scores(st["weights"], Xs)
        labels = (scores > 0.5).astype(int)
    elif model.kind == "GBT":
        raw = np.full(len(X), st["f0"])
        for entry in st["trees"]:
            if entry["scale"]:
                raw += model.params.shrinkage * entry["scale"] * _newton_values(entry["tree"], X)
        scores = 1.0 / (1.0 + np.exp(-raw))
        labels = (raw > 0).astype(int)
    else:
        raise ValidationError(f"unknown model kind {model.kind!r}")
    return labels, scores


def predict_vector(model: TrainedModel, vector):
    """Predict one FeatureVector, enforcing the schema."""
    labels, scores = predict(model, vector.values[None, :], names=vector.names)
    return int(labels[0]), float(scores[0])


def feature_importance(model: TrainedModel) -> dict[str, float]:
    """Impurity/gain-decrease totals per feature, normalized to sum 1."""
    if model.kind not in ("DT", "RF", "GBT"):
        raise ValidationError(f"feature_importance unsupported for {model.kind}")
    raw = np.asarray(model.state["importance"], dtype=float)
    total = raw.sum()
    if total > 0:
        raw = raw / total
    return {name: float(v) for name, v in zip(model.feature_names, raw)}


def gbt_training_losses(model: TrainedModel) -> list[float]:
    """Per-round training logistic loss (index 0 = before boosting)."""
    if model.kind != "GBT":
        raise ValidationError("training losses only recorded for GBT")
    return list(model.state["losses"])


# ----------------------------------------------------------------------
# serialization

_FORMAT = "pentrace-model"
_VERSION = 1


def save_model(model: TrainedModel, path) -> None:
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "params": asdict(model.params),
        "state": model.state,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path) -> TrainedModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != _FORMAT:
        raise ParseError(f"not a {_FORMAT} file")
    if payload.get("version") != _VERSION:
        raise ValidationError(f"unsupported model version {payload.get('version')}")
    kind = payload["kind"]
    params = PARAM_TYPES[kind](**payload["params"])
    return TrainedModel(kind=kind, params=params,
                        feature_names=tuple(payload["feature_names"]),
                        state=payload["state"])
