"""Gradient-boosted regression trees predicting operational profit from capacity.

Built from scratch so the model structure stays inspectable and the on-disk
format is fully specified: squared-error boosting, exact greedy split search
over sorted unique feature values, second-order split gain with L2 leaf
regularization and an optional gain floor.  Datasets here are small (<= 1e4
rows, a couple dozen features), so no histogram approximation is needed.

:class:`GbtRegressor` follows the scikit-learn estimator protocol
(``fit``/``predict``/``get_params``), which keeps it usable inside standard
pipelines and model-selection tooling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

#: denominator floor (one currency unit) so relative error stays finite at zero targets
ERROR_FLOOR = 1.0

FORMAT_TAG = "capexeq-gbt"
FORMAT_VERSION = 1

#: name of the derived system-total column added by :func:`with_total_feature`
TOTAL_FEATURE = "k_total"


class ModelFormatError(ValueError):
    """A model file is malformed, truncated, or of an unsupported version."""


@dataclass
class _Tree:
    """Flat preorder arrays; ``feature[i] < 0`` marks a leaf carrying ``value[i]``."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0) if self.feature else 0


def _tree_apply(tree: _Tree, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=float)

    def rec(node: int, rows: np.ndarray) -> None:
        if rows.size == 0:
            return
        f = tree.feature[node]
        if f < 0:
            out[rows] = tree.value[node]
            return
        go_left = X[rows, f] < tree.threshold[node]
        rec(tree.left[node], rows[go_left])
        rec(tree.right[node], rows[~go_left])

    rec(0, np.arange(X.shape[0]))
    return out


def _build_tree(
    X: np.ndarray,
    residual: np.ndarray,
    max_depth: int,
    l2: float,
    min_gain: float,
) -> _Tree:
    tree = _Tree([], [], [], [], [])

    def leaf(rows: np.ndarray) -> int:
        idx = len(tree.feature)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(idx)
        tree.right.append(idx)
        tree.value.append(float(residual[rows].sum() / (rows.size + l2)))
        return idx

    def score(s: np.ndarray, n) -> np.ndarray:
        return s * s / (n + l2)

    def grow(rows: np.ndarray, depth: int) -> int:
        if depth >= max_depth or rows.size < 2:
            return leaf(rows)
        r = residual[rows]
        total = r.sum()
        parent_score = float(score(total, rows.size))
        best = None  # (gain, feature, threshold, left_mask)
        for f in range(X.shape[1]):
            xs = X[rows, f]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            splits = np.nonzero(np.diff(xs_sorted) > 0)[0] + 1
            if splits.size == 0:
                continue
            csum = np.cumsum(r[order])
            left_sum = csum[splits - 1]
            gain = 0.5 * (
                score(left_sum, splits)
                + score(total - left_sum, rows.size - splits)
                - parent_score
            ) - min_gain
            k = int(np.argmax(gain))
            if gain[k] > 0.0 and (best is None or gain[k] > best[0]):
                pos = splits[k]
                thr = 0.5 * (xs_sorted[pos - 1] + xs_sorted[pos])
                best = (float(gain[k]), f, float(thr), None)
        if best is None:
            return leaf(rows)
        _, f, thr, _ = best
        go_left = X[rows, f] < thr
        idx = len(tree.feature)
        tree.feature.append(f)
        tree.threshold.append(thr)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(0.0)
        tree.left[idx] = grow(rows[go_left], depth + 1)
        tree.right[idx] = grow(rows[~go_left], depth + 1)
        return idx

    grow(np.arange(X.shape[0]), 0)
    return tree


class _PackedTrees:
    """Whole ensemble in contiguous arrays for vectorized prediction.

    Leaves point at themselves, so every row can be stepped the same number
    of times without masking.
    """

    def __init__(self, trees: Sequence[_Tree]):
        self.n_trees = len(trees)
        self.depth = max((t.depth() for t in trees), default=0)
        feat: list[int] = []
        thr: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        roots = []
        offset = 0
        for t in trees:
            roots.append(offset)
            for i in range(len(t.feature)):
                is_leaf = t.feature[i] < 0
                feat.append(0 if is_leaf else t.feature[i])
                thr.append(np.inf if is_leaf else t.threshold[i])
                left.append(offset + (i if is_leaf else t.left[i]))
                right.append(offset + (i if is_leaf else t.right[i]))
                value.append(t.value[i])
            offset += len(t.feature)
        self.feature = np.asarray(feat, dtype=np.int32)
        self.threshold = np.asarray(thr, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=float)
        self.roots = np.asarray(roots, dtype=np.int32)

    def leaf_sum(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        if self.n_trees == 0:
            return np.zeros(n)
        cur = np.repeat(self.roots[:, None], n, axis=1)
        rows = np.arange(n)[None, :]
        for _ in range(self.depth):
            xv = X[rows, self.feature[cur]]
            go_left = xv < self.threshold[cur]
            cur = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[cur].sum(axis=0)


class GbtRegressor(BaseEstimator, RegressorMixin):
    """Boosted-tree regressor: ``predict = base_score + lr * sum(leaf values)``.

    Parameters mirror the usual gradient-boosting knobs: ``n_rounds`` trees of
    depth ``max_depth`` fit to residuals, shrunk by ``learning_rate``, with
    ``l2_leaf_reg`` in every leaf and ``min_split_gain`` as a split floor.
    Training is exact and deterministic; ``seed`` is recorded with the model
    for bookkeeping.  Passing an ``eval_set`` to :meth:`fit` enables early
    stopping once held-out mean squared error has not improved for
    ``early_stopping_rounds`` consecutive rounds (the model keeps the best
    iteration).
    """

    def __init__(
        self,
        n_rounds: int = 300,
        max_depth: int = 5,
        learning_rate: float = 0.1,
        l2_leaf_reg: float = 1.0,
        min_split_gain: float = 0.0,
        early_stopping_rounds: int = 25,
        seed: int = 0,
    ):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.l2_leaf_reg = l2_leaf_reg
        self.min_split_gain = min_split_gain
        self.early_stopping_rounds = early_stopping_rounds
        self.seed = seed

    def _validate_params(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.l2_leaf_reg < 0.0:
            raise ValueError("l2_leaf_reg must be >= 0")
        if self.min_split_gain < 0.0:
            raise ValueError("min_split_gain must be >= 0")

    def fit(self, X, y, eval_set=None, feature_names: Sequence[str] | None = None):
        self._validate_params()
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X.shape[0] < 2:
            raise ValueError("training needs at least 2 rows")
        if feature_names is None:
            feature_names = [f"f{i}" for i in range(X.shape[1])]
        if len(feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match the input width")

        self.n_features_in_ = X.shape[1]
        self.feature_names_ = tuple(str(n) for n in feature_names)
        self.base_score_ = float(np.mean(y))
        self.trees_: list[_Tree] = []
        self.train_mse_path_: list[float] = []
        self.eval_error_path_: list[float] = []

        pred = np.full(X.shape[0], self.base_score_)
        if eval_set is not None:
            X_val = check_array(eval_set[0], dtype=float)
            y_val = np.asarray(eval_set[1], dtype=float)
            val_pred = np.full(X_val.shape[0], self.base_score_)
        best_err = np.inf
        best_round = -1

        for rnd in range(self.n_rounds):
            residual = y - pred
            if not np.any(residual):
                break  # targets reproduced exactly; nothing left to fit
            tree = _build_tree(X, residual, self.max_depth, self.l2_leaf_reg, self.min_split_gain)
            self.trees_.append(tree)
            pred = pred + self.learning_rate * _tree_apply(tree, X)
            self.train_mse_path_.append(float(np.mean((y - pred) ** 2)))
            if eval_set is not None:
                val_pred = val_pred + self.learning_rate * _tree_apply(tree, X_val)
                err = float(np.mean((y_val - val_pred) ** 2))
                self.eval_error_path_.append(err)
                if err < best_err:
                    best_err = err
                    best_round = rnd
                elif rnd - best_round >= self.early_stopping_rounds:
                    del self.trees_[best_round + 1 :]
                    break

        self.best_iteration_ = len(self.trees_)
        self._packed = _PackedTrees(self.trees_)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"input has {X.shape[1]} features, model was trained with {self.n_features_in_}"
            )
        return self.base_score_ + self.learning_rate * self._packed.leaf_sum(X)

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=float)[None, :])[0])


def with_total_feature(X, feature_names: Sequence[str] | None = None):
    """Append the row sum (system-wide installed MW) as an extra feature.

    Axis-aligned tree splits cannot represent the shortage boundary, which is
    a plane of constant *total* capacity; handing the total to the trees as
    its own column restores that structure.  Returns the augmented matrix,
    plus the augmented name list when ``feature_names`` is given.
    """
    X = np.asarray(X, dtype=float)
    X2 = np.column_stack([X, X.sum(axis=1)])
    if feature_names is None:
        return X2
    return X2, tuple(feature_names) + (TOTAL_FEATURE,)


def relative_error(y_true, y_pred, floor: float = ERROR_FLOOR) -> float:
    """Mean of |pred - y| / max(|y|, floor).

    Row-wise ratios: a few near-zero targets can dominate the mean, so also
    consider :func:`scale_normalized_error` when judging fit quality.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    return float(np.mean(np.abs(y_pred - y_true) / np.maximum(np.abs(y_true), floor)))


def scale_normalized_error(y_true, y_pred, floor: float = ERROR_FLOOR) -> float:
    """Mean absolute error divided by the mean absolute target.

    Insensitive to individual near-zero targets; the natural companion number
    when targets span several orders of magnitude.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    return float(np.mean(np.abs(y_pred - y_true)) / max(np.mean(np.abs(y_true)), floor))


def evaluate(model: GbtRegressor, inputs, targets) -> float:
    """Relative prediction error of ``model`` on the given rows."""
    return relative_error(targets, model.predict(inputs))


def save_model(model: GbtRegressor, path: str | Path) -> None:
    """Write a self-describing JSON model file; bytes are deterministic."""
    check_is_fitted(model, "trees_")
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "params": model.get_params(),
        "base_score": model.base_score_,
        "feature_names": list(model.feature_names_),
        "trees": [
            {
                "feature": t.feature,
                "threshold": t.threshold,
                "left": t.left,
                "right": t.right,
                "value": t.value,
            }
            for t in model.trees_
        ],
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_model(path: str | Path) -> GbtRegressor:
    """Reload a saved model; predictions are bit-identical to the original."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise ModelFormatError(f"{path}: missing '{FORMAT_TAG}' format tag")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model version {doc.get('version')!r} (expected {FORMAT_VERSION})"
        )
    try:
        model = GbtRegressor(**doc["params"])
        model.base_score_ = float(doc["base_score"])
        model.feature_names_ = tuple(doc["feature_names"])
        model.n_features_in_ = len(model.feature_names_)
        model.trees_ = [
            _Tree(
                feature=[int(v) for v in t["feature"]],
                threshold=[float(v) for v in t["threshold"]],
                left=[int(v) for v in t["left"]],
                right=[int(v) for v in t["right"]],
                value=[float(v) for v in t["value"]],
            )
            for t in doc["trees"]
        ]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: incomplete model file ({exc})") from exc
    model.best_iteration_ = len(model.trees_)
    model._packed = _PackedTrees(model.trees_)
    return model
