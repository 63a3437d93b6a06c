# -*- coding: utf-8 -*-
# models.py
# Learners written on numpy: logistic regression and squared-hinge linear SVM
# (L1 or L2 penalty), CART with Gini splits, random forest, Gaussian naive Bayes,
# plus the two feature-importance procedures and a line-oriented model format.
#
# Linear objectives (liblinear conventions, bias unpenalised):
#   logistic  P(w) + C * sum log(1 + exp(-y_i (w.x_i + b)))
#   svm       P(w) + C * sum max(0, 1 - y_i (w.x_i + b))^2
# with P(w) = 0.5 ||w||^2 (l2) or ||w||_1 (l1), y_i in {-1, +1}.
# L2 problems use damped Newton steps, L1 problems cyclic coordinate descent
# with one-variable Newton steps and soft-thresholding.
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError, DegenerateLabels, DimensionMismatch, ModelFormatError

LEARNERS: Tuple[str, ...] = (
    "naive-bayes", "cart", "forest", "svm-l1", "svm-l2", "logistic-l1", "logistic-l2",
)

FORMAT_HEADER = "mcua-model 1"


# ------------------------------
# Data
# ------------------------------

@dataclass
class TrainingSet:
    X: np.ndarray
    y: np.ndarray

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[Sequence[float], int]], width: int = 0) -> "TrainingSet":
        if not rows:
            return cls(np.zeros((0, width)), np.zeros(0, dtype=int))
        X = np.asarray([r[0] for r in rows], dtype=float)
        y = np.asarray([int(r[1]) for r in rows], dtype=int)
        return cls(X, y)

    @property
    def size(self) -> int:
        return int(self.X.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])

    @property
    def has_both_labels(self) -> bool:
        return self.size > 0 and 0 < int(self.y.sum()) < self.size

    def require_both_labels(self, what: str = "training set") -> None:
        if not self.has_both_labels:
            pos = int(self.y.sum())
            raise DegenerateLabels(f"{what} needs both labels (positives={pos}, negatives={self.size - pos})")

    def columns(self, idx: Optional[Sequence[int]]) -> "TrainingSet":
        if idx is None:
            return self
        return TrainingSet(self.X[:, list(idx)], self.y)


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    c: float = 1.0
    tol: float = 1e-6
    max_iter: int = 2000
    n_trees: int = 100
    mtry: Union[str, int] = "auto"
    max_depth: int = 0
    min_leaf: int = 1
    bootstrap: bool = True
    var_floor: float = 1e-9
    seed: int = 7

    def __post_init__(self):
        if self.family not in LEARNERS:
            raise ConfigError(f"unknown learner {self.family!r}; expected one of {', '.join(LEARNERS)}")
        if self.c <= 0:
            raise ConfigError("models.c must be positive")

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any], family: str, seed: Optional[int] = None) -> "LearnerSpec":
        mtry = str(settings.get("models.mtry", "auto")).strip().lower()
        return cls(
            family=family,
            c=float(settings.get("models.c", 1.0)),
            tol=float(settings.get("models.tol", 1e-6)),
            max_iter=int(settings.get("models.max_iter", 2000)),
            n_trees=int(settings.get("models.n_trees", 100)),
            mtry=mtry if mtry in ("auto", "all") else int(mtry),
            max_depth=int(settings.get("models.max_depth", 0)),
            min_leaf=int(settings.get("models.min_leaf", 1)),
            bootstrap=bool(settings.get("models.bootstrap", True)),
            var_floor=float(settings.get("models.var_floor", 1e-9)),
            seed=int(settings.get("run.seed", 7) if seed is None else seed),
        )

    def with_family(self, family: str) -> "LearnerSpec":
        return replace(self, family=family)

    def with_seed(self, seed: int) -> "LearnerSpec":
        return replace(self, seed=seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def _as_matrix(X: Any, n_features: int) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(X, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n_features:
        raise DimensionMismatch(f"model expects {n_features} features, got shape {np.shape(X)}")
    return arr, single


# ------------------------------
# Linear models
# ------------------------------

@dataclass
class LinearModel:
    family: str          # logistic | svm
    penalty: str         # l1 | l2
    c: float
    weights: np.ndarray
    bias: float
    trace: Tuple[float, ...] = field(default=(), compare=False, repr=False)

    kind = "linear"

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])

    def decision(self, X: Any) -> np.ndarray:
        arr, _ = _as_matrix(X, self.n_features)
        return arr @ self.weights + self.bias

    def predict_proba(self, X: Any) -> np.ndarray:
        # the svm margin goes through the same unit-scale sigmoid
        return _sigmoid(self.decision(X))

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, LinearModel) and self.family == other.family
                and self.penalty == other.penalty and self.c == other.c
                and np.array_equal(self.weights, other.weights) and self.bias == other.bias)


def _signed(y: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(y) > 0, 1.0, -1.0)


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float) -> float:
    m = _signed(y) * (X @ w + b)
    return float(c * np.logaddexp(0.0, -m).sum())


def squared_hinge_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float) -> float:
    r = np.maximum(0.0, 1.0 - _signed(y) * (X @ w + b))
    return float(c * (r * r).sum())


def _penalty(w: np.ndarray, penalty: str) -> float:
    return float(np.abs(w).sum()) if penalty == "l1" else float(0.5 * (w @ w))


def logistic_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float, penalty: str = "l2") -> float:
    return _penalty(w, penalty) + logistic_loss(w, b, X, y, c)


def squared_hinge_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float, penalty: str = "l2") -> float:
    return _penalty(w, penalty) + squared_hinge_loss(w, b, X, y, c)


def logistic_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float,
                      penalty: str = "l2") -> Tuple[np.ndarray, float]:
    """Gradient of the smooth part (loss, plus the ridge term under l2)."""
    ys = _signed(y)
    dz = -ys * _sigmoid(-ys * (X @ w + b)) * c
    gw = X.T @ dz
    if penalty == "l2":
        gw = gw + w
    return gw, float(dz.sum())


def squared_hinge_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, c: float,
                           penalty: str = "l2") -> Tuple[np.ndarray, float]:
    ys = _signed(y)
    r = np.maximum(0.0, 1.0 - ys * (X @ w + b))
    dz = -2.0 * c * ys * r
    gw = X.T @ dz
    if penalty == "l2":
        gw = gw + w
    return gw, float(dz.sum())


_LOSSES: Dict[str, Tuple[Callable, Callable]] = {
    "logistic": (logistic_loss, logistic_gradient),
    "svm": (squared_hinge_loss, squared_hinge_gradient),
}


def _hessian(family: str, theta: np.ndarray, Xa: np.ndarray, ys: np.ndarray, c: float) -> np.ndarray:
    z = Xa @ theta
    if family == "logistic":
        p = _sigmoid(z)
        d = c * p * (1.0 - p)
    else:
        d = 2.0 * c * ((1.0 - ys * z) > 0.0).astype(float)
    H = Xa.T @ (Xa * d[:, None])
    reg = np.ones(Xa.shape[1])
    reg[-1] = 1e-10
    H[np.diag_indices_from(H)] += reg
    return H


def _fit_l2(family: str, data: TrainingSet, c: float, tol: float, max_iter: int) -> Tuple[np.ndarray, List[float]]:
    loss_fn, grad_fn = _LOSSES[family]
    X, y = data.X, data.y
    d = data.n_features
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    ys = _signed(y)

    def objective(th: np.ndarray) -> float:
        return loss_fn(th[:-1], th[-1], X, y, c) + 0.5 * float(th[:-1] @ th[:-1])

    def gradient(th: np.ndarray) -> np.ndarray:
        gw, gb = grad_fn(th[:-1], th[-1], X, y, c, "l2")
        return np.append(gw, gb)

    theta = np.zeros(d + 1)
    f = objective(theta)
    trace = [f]
    g = gradient(theta)
    g0 = max(1.0, float(np.abs(g).max()))
    for _ in range(max_iter):
        if float(np.abs(g).max()) <= tol * g0:
            break
        H = _hessian(family, theta, Xa, ys, c)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -g, rcond=None)[0]
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -float(g @ g)
        t = 1.0
        while True:
            cand = theta + t * step
            fc = objective(cand)
            if fc <= f + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if fc > f:
            break
        theta, f = cand, fc
        trace.append(f)
        g = gradient(theta)
    return theta, trace


_CD_INNER = 30


def _loss_from_margin(family: str, z: np.ndarray, ys: np.ndarray, c: float) -> float:
    if family == "logistic":
        return float(c * np.logaddexp(0.0, -ys * z).sum())
    r = np.maximum(0.0, 1.0 - ys * z)
    return float(c * (r * r).sum())


def _margin_derivatives(family: str, z: np.ndarray, ys: np.ndarray, c: float) -> Tuple[np.ndarray, np.ndarray]:
    """First and second derivative of each row's loss with respect to its score."""
    if family == "logistic":
        s = _sigmoid(-ys * z)
        return -c * ys * s, c * s * (1.0 - s)
    r = np.maximum(0.0, 1.0 - ys * z)
    return -2.0 * c * ys * r, 2.0 * c * (r > 0.0)


def _l1_violation(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    at_zero = np.maximum(0.0, np.abs(g) - 1.0)
    return np.where(w > 0, np.abs(g + 1.0), np.where(w < 0, np.abs(g - 1.0), at_zero))


def _l1_newton_step(g: float, h: float, w: float) -> float:
    if g + 1.0 <= h * w:
        return -(g + 1.0) / h
    if g - 1.0 >= h * w:
        return -(g - 1.0) / h
    return -w


def _fit_l1(family: str, data: TrainingSet, c: float, tol: float, max_iter: int) -> Tuple[np.ndarray, List[float]]:
    # Cyclic coordinate descent, features in column order then the bias.
    # A coordinate at zero moves only when its gradient leaves [-1 - eps, 1 + eps],
    # so of two identical columns the later one stays exactly zero.
    X = data.X
    ys = _signed(data.y)
    n, d = X.shape
    theta = np.zeros(d + 1)
    z = np.zeros(n)
    cols = [X[:, j] for j in range(d)] + [np.ones(n)]
    sq = [col * col for col in cols]

    dl, _ = _margin_derivatives(family, z, ys, c)
    g_all = np.append(X.T @ dl, dl.sum())
    v_start = np.append(_l1_violation(g_all[:-1], theta[:-1]), abs(g_all[-1]))
    eps = tol * max(1.0, float(v_start.max()))

    trace = [_loss_from_margin(family, z, ys, c)]
    for _ in range(max_iter):
        worst = 0.0
        for j in range(d + 1):
            penalised = j < d
            for inner in range(_CD_INNER):
                dl, d2 = _margin_derivatives(family, z, ys, c)
                g = float(cols[j] @ dl)
                h = float(d2 @ sq[j]) + 1e-12
                w = float(theta[j])
                if penalised:
                    viol = float(_l1_violation(np.array([g]), np.array([w]))[0])
                else:
                    viol = abs(g)
                if inner == 0:
                    worst = max(worst, viol)
                if viol <= (eps if w == 0.0 and penalised else 0.5 * eps):
                    break
                step = _l1_newton_step(g, h, w) if penalised else -g / h
                if step == 0.0:
                    break
                base = _loss_from_margin(family, z, ys, c) + (abs(w) if penalised else 0.0)
                decrease = g * step + ((abs(w + step) - abs(w)) if penalised else 0.0)
                lam = 1.0
                while True:
                    zc = z + (lam * step) * cols[j]
                    new = _loss_from_margin(family, zc, ys, c) + (abs(w + lam * step) if penalised else 0.0)
                    if new - base <= 0.01 * lam * decrease or lam < 1e-12:
                        break
                    lam *= 0.5
                if new > base:
                    break
                theta[j] = w + lam * step
                z = zc
        trace.append(_loss_from_margin(family, z, ys, c) + float(np.abs(theta[:-1]).sum()))
        if worst <= eps:
            break
    return theta, trace


def _train_linear(family: str, data: TrainingSet, penalty: str, c: float, tol: float, max_iter: int) -> LinearModel:
    if penalty not in ("l1", "l2"):
        raise ConfigError(f"unknown penalty {penalty!r}")
    data.require_both_labels(f"{family}-{penalty}")
    fit = _fit_l1 if penalty == "l1" else _fit_l2
    theta, trace = fit(family, data, c, tol, max_iter)
    return LinearModel(family, penalty, float(c), theta[:-1].copy(), float(theta[-1]), tuple(trace))


def train_logistic(data: TrainingSet, penalty: str = "l1", c: float = 1.0,
                   tol: float = 1e-6, max_iter: int = 2000) -> LinearModel:
    return _train_linear("logistic", data, penalty, c, tol, max_iter)


def train_linear_svm(data: TrainingSet, penalty: str = "l2", c: float = 1.0,
                     tol: float = 1e-6, max_iter: int = 2000) -> LinearModel:
    return _train_linear("svm", data, penalty, c, tol, max_iter)


# ------------------------------
# Trees
# ------------------------------

@dataclass
class TreeModel:
    n_features: int
    feature: np.ndarray      # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray       # (nodes, 2) class counts reaching each node

    kind = "tree"

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def leaves(self) -> np.ndarray:
        return np.nonzero(self.feature < 0)[0]

    def apply(self, X: Any) -> np.ndarray:
        arr, _ = _as_matrix(X, self.n_features)
        node = np.zeros(arr.shape[0], dtype=int)
        while True:
            f = self.feature[node]
            inner = np.nonzero(f >= 0)[0]
            if inner.size == 0:
                return node
            cur = node[inner]
            go_left = arr[inner, f[inner]] <= self.threshold[cur]
            node[inner] = np.where(go_left, self.left[cur], self.right[cur])

    def leaf_positive_fraction(self, X: Any) -> np.ndarray:
        c = self.counts[self.apply(X)]
        return c[:, 1] / c.sum(axis=1)

    def predict_proba(self, X: Any) -> np.ndarray:
        return self.leaf_positive_fraction(X)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, TreeModel) and self.n_features == other.n_features
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("feature", "threshold", "left", "right", "counts")))


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    p = pos / total
    return 2.0 * p * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, feats: np.ndarray,
                min_leaf: int) -> Optional[Tuple[int, float]]:
    n = idx.shape[0]
    sub = X[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="mergesort")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[idx][order]
    pos_total = float(ys[:, 0].sum())
    left_pos = np.cumsum(ys, axis=0)[:-1].astype(float)
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    weighted = (nl * _gini(left_pos, nl) + nr * _gini(pos_total - left_pos, nr)) / n
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    weighted = np.where(valid, weighted, np.inf)
    # lowest impurity; ties go to the lower feature index, then the lower threshold
    per_feat = weighted.min(axis=0)
    j = int(np.argmin(per_feat))
    i = int(np.argmin(weighted[:, j]))
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = (lo + hi) / 2.0
    if not (lo <= thr < hi):
        thr = lo
    return int(feats[j]), float(thr)


def _grow_tree(X: np.ndarray, y: np.ndarray, rows: np.ndarray, max_depth: int, min_leaf: int,
               mtry: int, rng: Optional[np.random.Generator]) -> TreeModel:
    d = X.shape[1]
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    counts: List[Tuple[float, float]] = []
    all_feats = np.arange(d)

    def new_node(idx: np.ndarray) -> int:
        pos = float(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((idx.shape[0] - pos, pos))
        return len(feature) - 1

    root = new_node(rows)
    stack = [(root, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n0, n1 = counts[node]
        if n0 == 0 or n1 == 0 or idx.shape[0] < 2 * min_leaf:
            continue
        if max_depth > 0 and depth >= max_depth:
            continue
        if rng is not None and mtry < d:
            feats = np.sort(rng.choice(d, size=mtry, replace=False))
        else:
            feats = all_feats
        split = _best_split(X, y, idx, feats, min_leaf)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        ln = new_node(li)
        rn = new_node(ri)
        left[node], right[node] = ln, rn
        # right pushed first so the left subtree is numbered first
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))

    return TreeModel(
        n_features=d,
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        counts=np.asarray(counts, dtype=float).reshape(-1, 2),
    )


def train_cart(data: TrainingSet, max_depth: int = 0, min_leaf: int = 1) -> TreeModel:
    if data.size == 0:
        raise DegenerateLabels("cart: empty training set")
    return _grow_tree(data.X, data.y, np.arange(data.size), max_depth, max(1, min_leaf), data.n_features, None)


@dataclass
class ForestModel:
    n_features: int
    trees: List[TreeModel]
    seeds: Tuple[int, ...]
    mtry: int
    bootstrap: bool
    oob_score: float = float("nan")

    kind = "forest"

    def votes(self, X: Any) -> np.ndarray:
        arr, _ = _as_matrix(X, self.n_features)
        out = np.zeros(arr.shape[0])
        for tree in self.trees:
            out += tree.leaf_positive_fraction(arr) >= 0.5
        return out

    def predict_proba(self, X: Any) -> np.ndarray:
        return self.votes(X) / len(self.trees)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, ForestModel) and self.n_features == other.n_features
                and self.seeds == other.seeds and self.mtry == other.mtry
                and self.bootstrap == other.bootstrap and self.trees == other.trees)


def resolve_mtry(mtry: Union[str, int], d: int) -> int:
    if mtry == "auto":
        return max(1, math.ceil(math.sqrt(d)))
    if mtry == "all":
        return d
    return max(1, min(d, int(mtry)))


def train_random_forest(data: TrainingSet, n_trees: int = 100, max_depth: int = 0,
                        mtry: Union[str, int] = "auto", seed: int = 7,
                        min_leaf: int = 1, bootstrap: bool = True) -> ForestModel:
    if data.size == 0:
        raise DegenerateLabels("forest: empty training set")
    d = data.n_features
    m = resolve_mtry(mtry, d)
    master = np.random.default_rng(seed)
    seeds = tuple(int(s) for s in master.integers(0, 2**31 - 1, size=max(1, n_trees)))
    n = data.size
    trees: List[TreeModel] = []
    oob_votes = np.zeros(n)
    oob_seen = np.zeros(n)
    for s in seeds:
        rng = np.random.default_rng(s)
        rows = np.sort(rng.integers(0, n, size=n)) if bootstrap else np.arange(n)
        tree = _grow_tree(data.X, data.y, rows, max_depth, max(1, min_leaf), m, rng)
        trees.append(tree)
        if bootstrap:
            out = np.setdiff1d(np.arange(n), rows)
            if out.size:
                oob_votes[out] += tree.leaf_positive_fraction(data.X[out]) >= 0.5
                oob_seen[out] += 1
    oob = float("nan")
    seen = oob_seen > 0
    if seen.any():
        pred = (oob_votes[seen] / oob_seen[seen]) >= 0.5
        oob = float(np.mean(pred == (data.y[seen] == 1)))
    return ForestModel(d, trees, seeds, m, bool(bootstrap), oob)


# ------------------------------
# Naive Bayes
# ------------------------------

@dataclass
class GaussianNB:
    priors: np.ndarray       # (2,)
    means: np.ndarray        # (2, d)
    variances: np.ndarray    # (2, d)
    var_floor: float

    kind = "naive-bayes"

    @property
    def n_features(self) -> int:
        return int(self.means.shape[1])

    def _log_joint(self, arr: np.ndarray) -> np.ndarray:
        out = np.empty((arr.shape[0], 2))
        for k in (0, 1):
            var = self.variances[k]
            out[:, k] = (math.log(self.priors[k])
                         - 0.5 * np.log(2.0 * math.pi * var).sum()
                         - 0.5 * (((arr - self.means[k]) ** 2) / var).sum(axis=1))
        return out

    def predict_proba(self, X: Any) -> np.ndarray:
        arr, _ = _as_matrix(X, self.n_features)
        lj = self._log_joint(arr)
        return np.exp(lj[:, 1] - np.logaddexp(lj[:, 0], lj[:, 1]))

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, GaussianNB) and self.var_floor == other.var_floor
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("priors", "means", "variances")))


def train_naive_bayes(data: TrainingSet, var_floor: float = 1e-9) -> GaussianNB:
    data.require_both_labels("naive-bayes")
    means = np.zeros((2, data.n_features))
    variances = np.zeros((2, data.n_features))
    priors = np.zeros(2)
    for k in (0, 1):
        Xk = data.X[data.y == k]
        priors[k] = Xk.shape[0] / data.size
        means[k] = Xk.mean(axis=0)
        variances[k] = np.maximum(Xk.var(axis=0), var_floor)
    return GaussianNB(priors, means, variances, float(var_floor))


# ------------------------------
# Constant model (empty view partitions)
# ------------------------------

@dataclass
class ConstantModel:
    n_features: int
    value: float = 0.0

    kind = "constant"

    def predict_proba(self, X: Any) -> np.ndarray:
        arr, _ = _as_matrix(X, self.n_features)
        return np.full(arr.shape[0], self.value)


Model = Union[LinearModel, TreeModel, ForestModel, GaussianNB, ConstantModel]


def train_model(spec: LearnerSpec, data: TrainingSet) -> Model:
    fam = spec.family
    if fam in ("logistic-l1", "logistic-l2"):
        return train_logistic(data, fam[-2:], spec.c, spec.tol, spec.max_iter)
    if fam in ("svm-l1", "svm-l2"):
        return train_linear_svm(data, fam[-2:], spec.c, spec.tol, spec.max_iter)
    if fam == "cart":
        data.require_both_labels("cart")
        return train_cart(data, spec.max_depth, spec.min_leaf)
    if fam == "forest":
        data.require_both_labels("forest")
        return train_random_forest(data, spec.n_trees, spec.max_depth, spec.mtry, spec.seed,
                                   spec.min_leaf, spec.bootstrap)
    return train_naive_bayes(data, spec.var_floor)


def predict_proba(model: Model, x: Any) -> Union[float, np.ndarray]:
    """Probability of the positive class; a single vector gives a float."""
    arr, single = _as_matrix(x, model.n_features)
    p = np.clip(model.predict_proba(arr), 0.0, 1.0)
    return float(p[0]) if single else p


# ------------------------------
# Feature importance
# ------------------------------

@dataclass(frozen=True)
class FeatureRanking:
    scores: Tuple[float, ...]
    order: Tuple[int, ...]

    def top(self, k: int) -> Tuple[int, ...]:
        return self.order[:k]

    def rank_of(self, index: int) -> int:
        return self.order.index(index) + 1


def rank_scores(scores: Sequence[float]) -> FeatureRanking:
    vals = tuple(float(s) for s in scores)
    order = tuple(sorted(range(len(vals)), key=lambda i: (-vals[i], i)))
    return FeatureRanking(vals, order)


def standardize(data: TrainingSet) -> TrainingSet:
    mu = data.X.mean(axis=0)
    sd = data.X.std(axis=0)
    safe = np.where(sd > 0, sd, 1.0)
    Z = np.where(sd > 0, (data.X - mu) / safe, 0.0)
    return TrainingSet(Z, data.y)


def odds_ratios(model: LinearModel, data: Optional[TrainingSet] = None) -> FeatureRanking:
    """Rank by the odds ratio folded away from 1, exp(|w|); refit on z-scores when data is given."""
    if data is not None:
        model = _train_linear(model.family, standardize(data), model.penalty, model.c, 1e-6, 2000)
    return rank_scores(np.exp(np.abs(model.weights)))


def _tree_impurity_decrease(tree: TreeModel) -> np.ndarray:
    out = np.zeros(tree.n_features)
    totals = tree.counts.sum(axis=1)
    n_root = totals[0]
    gini = _gini(tree.counts[:, 1], totals)
    for node in np.nonzero(tree.feature >= 0)[0]:
        lft, rgt = tree.left[node], tree.right[node]
        dec = (totals[node] * gini[node] - totals[lft] * gini[lft] - totals[rgt] * gini[rgt]) / n_root
        out[tree.feature[node]] += dec
    return out


def mean_decrease_impurity(model: Union[ForestModel, TreeModel]) -> FeatureRanking:
    trees = model.trees if isinstance(model, ForestModel) else [model]
    total = np.zeros(model.n_features)
    for tree in trees:
        total += _tree_impurity_decrease(tree)
    s = total.sum()
    scores = total / s if s > 0 else np.full(model.n_features, 1.0 / model.n_features)
    return rank_scores(scores)


def feature_ranking(model: Model, data: TrainingSet) -> FeatureRanking:
    """Odds ratios for linear models, MDI for trees; other models use an l1-logistic refit."""
    if isinstance(model, LinearModel):
        return odds_ratios(model, data)
    if isinstance(model, (ForestModel, TreeModel)):
        return mean_decrease_impurity(model)
    proxy = LinearModel("logistic", "l1", 1.0, np.zeros(data.n_features), 0.0)
    return odds_ratios(proxy, data)


# ------------------------------
# Text serialization
# ------------------------------

def _hex(v: float) -> str:
    return float(v).hex()


def _hexes(arr: np.ndarray) -> str:
    return " ".join(_hex(v) for v in np.asarray(arr, dtype=float).ravel())


def _tree_lines(tree: TreeModel) -> List[str]:
    lines = [f"n_features {tree.n_features}", f"nodes {tree.node_count}"]
    for i in range(tree.node_count):
        lines.append(
            f"node {i} {int(tree.feature[i])} {_hex(tree.threshold[i])} {int(tree.left[i])} "
            f"{int(tree.right[i])} {_hex(tree.counts[i, 0])} {_hex(tree.counts[i, 1])}"
        )
    return lines


def dump_model(model: Model, schema: str = "") -> List[str]:
    lines = [FORMAT_HEADER, f"kind {model.kind}", f"schema {schema or '-'}"]
    if isinstance(model, LinearModel):
        lines += [f"family {model.family}", f"penalty {model.penalty}", f"c {_hex(model.c)}",
                  f"n_features {model.n_features}", f"weights {_hexes(model.weights)}",
                  f"bias {_hex(model.bias)}"]
    elif isinstance(model, TreeModel):
        lines += _tree_lines(model)
    elif isinstance(model, ForestModel):
        lines += [f"n_features {model.n_features}", f"mtry {model.mtry}",
                  f"bootstrap {int(model.bootstrap)}", f"oob {_hex(model.oob_score)}",
                  f"n_trees {len(model.trees)}"]
        for seed, tree in zip(model.seeds, model.trees):
            lines.append(f"tree {seed}")
            lines += _tree_lines(tree)
    elif isinstance(model, GaussianNB):
        d = model.n_features
        lines += [f"n_features {d}", f"var_floor {_hex(model.var_floor)}",
                  f"priors {_hexes(model.priors)}",
                  f"means {_hexes(model.means)}", f"variances {_hexes(model.variances)}"]
    elif isinstance(model, ConstantModel):
        lines += [f"n_features {model.n_features}", f"value {_hex(model.value)}"]
    else:
        raise ModelFormatError(f"cannot serialize {type(model).__name__}")
    lines.append("end")
    return lines


class _Reader:
    def __init__(self, lines: Sequence[str]):
        self.lines = [ln.rstrip("\n") for ln in lines]
        self.pos = 0

    def take(self, key: str) -> List[str]:
        if self.pos >= len(self.lines):
            raise ModelFormatError(f"unexpected end of model, expected {key!r}")
        parts = self.lines[self.pos].split(" ")
        if parts[0] != key:
            raise ModelFormatError(f"line {self.pos + 1}: expected {key!r}, got {parts[0]!r}")
        self.pos += 1
        return parts[1:]

    def one(self, key: str) -> str:
        vals = self.take(key)
        if len(vals) != 1:
            raise ModelFormatError(f"{key}: expected one value")
        return vals[0]

    def integer(self, key: str) -> int:
        return _int(self.one(key), key)

    def hexfloat(self, key: str) -> float:
        return _hexfloat(self.one(key), key)


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ModelFormatError(f"{what}: expected an integer, got {text!r}") from None


def _hexfloat(text: str, what: str) -> float:
    try:
        return float.fromhex(text)
    except ValueError:
        raise ModelFormatError(f"{what}: expected a hex float, got {text!r}") from None


def _floats(vals: Sequence[str]) -> np.ndarray:
    try:
        return np.asarray([float.fromhex(v) for v in vals if v != ""], dtype=float)
    except ValueError as ex:
        raise ModelFormatError(f"bad number: {ex}") from ex


def _read_tree(r: _Reader) -> TreeModel:
    d = r.integer("n_features")
    m = r.integer("nodes")
    feature, threshold, left, right, counts = [], [], [], [], []
    for i in range(m):
        parts = r.take("node")
        if len(parts) != 7 or _int(parts[0], "node") != i:
            raise ModelFormatError(f"bad node record {i}")
        feature.append(_int(parts[1], "node feature"))
        threshold.append(_hexfloat(parts[2], "node threshold"))
        left.append(_int(parts[3], "node left"))
        right.append(_int(parts[4], "node right"))
        counts.append((_hexfloat(parts[5], "node counts"), _hexfloat(parts[6], "node counts")))
    return TreeModel(d, np.asarray(feature, dtype=int), np.asarray(threshold, dtype=float),
                     np.asarray(left, dtype=int), np.asarray(right, dtype=int),
                     np.asarray(counts, dtype=float).reshape(-1, 2))


def load_model_lines(lines: Sequence[str]) -> Tuple[Model, str, int]:
    """Parses one model block; returns (model, schema id, lines consumed)."""
    r = _Reader(lines)
    header = r.lines[0] if r.lines else ""
    if header != FORMAT_HEADER:
        raise ModelFormatError(f"unsupported model header {header!r}")
    r.pos = 1
    kind = r.one("kind")
    schema = r.one("schema")
    schema = "" if schema == "-" else schema
    model: Model
    if kind == "linear":
        family = r.one("family")
        penalty = r.one("penalty")
        c = r.hexfloat("c")
        d = r.integer("n_features")
        w = _floats(r.take("weights"))
        if w.shape[0] != d:
            raise ModelFormatError("weights length does not match n_features")
        model = LinearModel(family, penalty, c, w, r.hexfloat("bias"))
    elif kind == "tree":
        model = _read_tree(r)
    elif kind == "forest":
        d = r.integer("n_features")
        mtry = r.integer("mtry")
        bootstrap = r.one("bootstrap") == "1"
        oob = r.hexfloat("oob")
        n_trees = r.integer("n_trees")
        seeds, trees = [], []
        for _ in range(n_trees):
            seeds.append(r.integer("tree"))
            trees.append(_read_tree(r))
        model = ForestModel(d, trees, tuple(seeds), mtry, bootstrap, oob)
    elif kind == "naive-bayes":
        d = r.integer("n_features")
        floor = r.hexfloat("var_floor")
        priors = _floats(r.take("priors"))
        means = _floats(r.take("means"))
        variances = _floats(r.take("variances"))
        if priors.shape[0] != 2 or means.shape[0] != 2 * d or variances.shape[0] != 2 * d:
            raise ModelFormatError("naive-bayes parameters do not match n_features")
        means, variances = means.reshape(2, d), variances.reshape(2, d)
        model = GaussianNB(priors, means, variances, floor)
    elif kind == "constant":
        d = r.integer("n_features")
        model = ConstantModel(d, r.hexfloat("value"))
    else:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    r.take("end")
    return model, schema, r.pos


def load_model(lines: Sequence[str]) -> Model:
    return load_model_lines(lines)[0]
