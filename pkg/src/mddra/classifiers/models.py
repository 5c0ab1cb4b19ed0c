"""From-scratch classifiers over per-frame feature vectors.

Every estimator works on integer class codes ``0..n_classes-1`` and exposes
``fit``, ``scores`` (one column per class, larger is better) and
``predict``. Prediction takes the first maximal score, so ties fall to the
lowest class code: safe, then careless, then dangerous.
"""
from __future__ import annotations

from typing import Any, Mapping

import numpy as np

from mddra import _kernels
from mddra.catalog import CLASS_LABELS, ValidationError

N_CLASSES = len(CLASS_LABELS)
_CHUNK = 64


def _check_fit(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("training data is empty")
    if y.shape != (X.shape[0],):
        raise ValidationError("one label per training row is required")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features must be finite")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValidationError("labels must be class codes in 0..2")
    if np.unique(y).size < 2:
        raise ValidationError("training data must contain at least 2 classes")
    return X, y


def _check_query(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValidationError(f"expected {n_features} features, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features must be finite")
    return X


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _absent_mask(present: np.ndarray) -> np.ndarray:
    mask = np.ones(N_CLASSES, dtype=bool)
    mask[present] = False
    return mask


class Estimator:
    kind = ""

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)

    def state(self) -> dict[str, Any]:
        raise NotImplementedError

    @classmethod
    def from_state(cls, state: Mapping[str, Any]) -> "Estimator":
        raise NotImplementedError


# ---------------------------------------------------------------- KNN

DISTANCES = ("euclidean", "cosine", "cubic")


def pairwise_distance(A: np.ndarray, B: np.ndarray, metric: str) -> np.ndarray:
    """Distances between rows of A and rows of B.

    Differences are formed explicitly so coincident points give exactly 0.
    Cosine distance of a zero vector is taken as 1.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if metric == "cosine":
        na = np.sqrt(np.einsum("ij,ij->i", A, A))
        nb = np.sqrt(np.einsum("ij,ij->i", B, B))
        denom = na[:, None] * nb[None, :]
        dot = A @ B.T
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(denom > 0, dot / denom, 0.0)
        d = 1.0 - np.clip(sim, -1.0, 1.0)
        # identical rows: exact zero regardless of rounding in the dot product
        same = np.all(A[:, None, :] == B[None, :, :], axis=2) & (na[:, None] > 0)
        d[same] = 0.0
        return d
    diff = np.abs(A[:, None, :] - B[None, :, :])
    if metric == "euclidean":
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric == "cubic":
        return np.cbrt(np.sum(diff * diff * diff, axis=2))
    raise ValidationError(f"unknown distance {metric!r}; expected one of {DISTANCES}")


def _nearest(D: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries per row, ordered by (distance, index).

    Ties at the k-th distance keep the lowest training indices, which is what
    a stable full sort would give, without sorting the whole row.
    """
    rows, n = D.shape
    if k < n:
        kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
        below = D < kth
        at = D == kth
        room = k - below.sum(axis=1, keepdims=True)
        sel = below | (at & (np.cumsum(at, axis=1) <= room))
        idx = np.nonzero(sel)[1].reshape(rows, k)
    else:
        idx = np.broadcast_to(np.arange(n), (rows, n))
    order = np.argsort(np.take_along_axis(D, idx, axis=1), axis=1, kind="stable")
    return np.take_along_axis(idx, order, axis=1)


class KNNClassifier(Estimator):
    kind = "knn"

    def __init__(self, k: int = 10, distance: str = "euclidean", weighted: bool = False):
        if k < 1:
            raise ValidationError("k must be >= 1")
        if distance not in DISTANCES:
            raise ValidationError(f"unknown distance {distance!r}")
        self.k = int(k)
        self.distance = distance
        self.weighted = bool(weighted)
        self.X = None
        self.y = None

    def fit(self, X, y):
        self.X, self.y = _check_fit(X, y)
        return self

    def scores(self, Xq) -> np.ndarray:
        Xq = _check_query(Xq, self.X.shape[1])
        n = self.X.shape[0]
        k = min(self.k, n)
        out = np.zeros((Xq.shape[0], N_CLASSES))
        for start in range(0, Xq.shape[0], _CHUNK):
            block = Xq[start : start + _CHUNK]
            D = pairwise_distance(block, self.X, self.distance)
            nn = _nearest(D, k)
            d = np.take_along_axis(D, nn, axis=1)
            labels = self.y[nn]
            if self.weighted:
                zero = d == 0.0
                with np.errstate(divide="ignore"):
                    w = np.where(zero.any(axis=1, keepdims=True), zero.astype(float), 1.0 / d)
            else:
                w = np.ones_like(d)
            rows = np.arange(block.shape[0])[:, None]
            np.add.at(out[start : start + block.shape[0]], (np.broadcast_to(rows, labels.shape), labels), w)
        return out / out.sum(axis=1, keepdims=True)

    def state(self):
        return {"k": self.k, "distance": self.distance, "weighted": self.weighted, "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_state(cls, s):
        m = cls(s["k"], s["distance"], s["weighted"])
        m.X = np.asarray(s["X"], dtype=np.float64)
        m.y = np.asarray(s["y"], dtype=np.int64)
        return m


# ---------------------------------------------------------------- discriminants


def _ridge_value(cov: np.ndarray, ridge: float) -> float:
    p = cov.shape[0]
    tr = float(np.trace(cov))
    return ridge * (tr / p if tr > 0 else 1.0)


def _regularized_cholesky(cov: np.ndarray, ridge: float) -> np.ndarray:
    c = cov + _ridge_value(cov, ridge) * np.eye(cov.shape[0]) if ridge > 0 else cov
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise ValidationError("covariance is singular; use a positive ridge") from None


def _chol_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.linalg.solve(L.T, np.linalg.solve(L, B))


class _ClassMoments:
    def _moments(self, X, y):
        self.present = np.unique(y)
        self.means = np.zeros((N_CLASSES, X.shape[1]))
        counts = np.bincount(y, minlength=N_CLASSES).astype(float)
        for c in self.present:
            self.means[c] = X[y == c].mean(axis=0)
        # absent classes are masked at prediction time; 0 keeps the state finite
        self.log_prior = np.zeros(N_CLASSES)
        self.log_prior[self.present] = np.log(counts[self.present] / counts.sum())
        return counts


class LinearDiscriminant(Estimator, _ClassMoments):
    """Gaussian classes sharing one pooled covariance."""

    kind = "linear_discriminant"

    def __init__(self, ridge: float = 1e-6):
        if ridge < 0:
            raise ValidationError("ridge must be >= 0")
        self.ridge = float(ridge)

    def fit(self, X, y):
        X, y = _check_fit(X, y)
        self._moments(X, y)
        centred = X - self.means[y]
        dof = max(X.shape[0] - self.present.size, 1)
        self.cov = centred.T @ centred / dof
        self._prepare()
        return self

    def _prepare(self):
        self.L = _regularized_cholesky(self.cov, self.ridge)
        self.coef = _chol_solve(self.L, self.means.T).T  # (classes, p)
        self.offset = -0.5 * np.einsum("ij,ij->i", self.coef, self.means) + self.log_prior

    def scores(self, Xq):
        Xq = _check_query(Xq, self.means.shape[1])
        logits = Xq @ self.coef.T + self.offset
        logits[:, _absent_mask(self.present)] = -np.inf
        return _softmax(logits)

    def state(self):
        return {
            "ridge": self.ridge,
            "means": self.means.tolist(),
            "cov": self.cov.tolist(),
            "log_prior": self.log_prior.tolist(),
            "present": self.present.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["ridge"])
        m.means = np.asarray(s["means"], dtype=np.float64)
        m.cov = np.asarray(s["cov"], dtype=np.float64)
        m.log_prior = np.asarray(s["log_prior"], dtype=np.float64)
        m.present = np.asarray(s["present"], dtype=np.int64)
        m._prepare()
        return m


class QuadraticDiscriminant(Estimator, _ClassMoments):
    """Gaussian classes with one covariance each."""

    kind = "quadratic_discriminant"

    def __init__(self, ridge: float = 1e-6):
        if ridge < 0:
            raise ValidationError("ridge must be >= 0")
        self.ridge = float(ridge)

    def fit(self, X, y):
        X, y = _check_fit(X, y)
        self._moments(X, y)
        p = X.shape[1]
        self.covs = np.zeros((N_CLASSES, p, p))
        for c in self.present:
            Z = X[y == c] - self.means[c]
            self.covs[c] = Z.T @ Z / max(Z.shape[0] - 1, 1)
        self._prepare()
        return self

    def _prepare(self):
        self.chols = {}
        self.logdet = np.zeros(N_CLASSES)
        for c in self.present:
            L = _regularized_cholesky(self.covs[c], self.ridge)
            self.chols[int(c)] = L
            self.logdet[c] = 2.0 * float(np.sum(np.log(np.diag(L))))

    def scores(self, Xq):
        Xq = _check_query(Xq, self.means.shape[1])
        logits = np.full((Xq.shape[0], N_CLASSES), -np.inf)
        for c, L in self.chols.items():
            z = np.linalg.solve(L, (Xq - self.means[c]).T)
            logits[:, c] = -0.5 * self.logdet[c] - 0.5 * np.einsum("ij,ij->j", z, z) + self.log_prior[c]
        return _softmax(logits)

    def state(self):
        return {
            "ridge": self.ridge,
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
            "log_prior": self.log_prior.tolist(),
            "present": self.present.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["ridge"])
        m.means = np.asarray(s["means"], dtype=np.float64)
        m.covs = np.asarray(s["covs"], dtype=np.float64)
        m.log_prior = np.asarray(s["log_prior"], dtype=np.float64)
        m.present = np.asarray(s["present"], dtype=np.int64)
        m._prepare()
        return m


class GaussianNaiveBayes(Estimator, _ClassMoments):
    """Independent per-feature Gaussians given the class.

    ``var_smoothing`` times the largest feature variance is added to every
    class variance so constant features stay usable.
    """

    kind = "gaussian_naive_bayes"

    def __init__(self, var_smoothing: float = 1e-9):
        if var_smoothing < 0:
            raise ValidationError("var_smoothing must be >= 0")
        self.var_smoothing = float(var_smoothing)

    def fit(self, X, y):
        X, y = _check_fit(X, y)
        self._moments(X, y)
        eps = self.var_smoothing * float(X.var(axis=0).max())
        self.vars = np.ones((N_CLASSES, X.shape[1]))
        for c in self.present:
            self.vars[c] = X[y == c].var(axis=0) + eps
        if np.any(self.vars[self.present] <= 0):
            raise ValidationError("zero feature variance within a class; use var_smoothing > 0")
        return self

    def scores(self, Xq):
        Xq = _check_query(Xq, self.means.shape[1])
        logits = np.full((Xq.shape[0], N_CLASSES), -np.inf)
        for c in self.present:
            v = self.vars[c]
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * v)) - 0.5 * np.sum((Xq - self.means[c]) ** 2 / v, axis=1)
            logits[:, c] = ll + self.log_prior[c]
        return _softmax(logits)

    def state(self):
        return {
            "var_smoothing": self.var_smoothing,
            "means": self.means.tolist(),
            "vars": self.vars.tolist(),
            "log_prior": self.log_prior.tolist(),
            "present": self.present.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["var_smoothing"])
        m.means = np.asarray(s["means"], dtype=np.float64)
        m.vars = np.asarray(s["vars"], dtype=np.float64)
        m.log_prior = np.asarray(s["log_prior"], dtype=np.float64)
        m.present = np.asarray(s["present"], dtype=np.int64)
        return m


# ---------------------------------------------------------------- trees


class DecisionTree(Estimator):
    """CART with Gini impurity, midpoint thresholds and ``x <= threshold`` going left."""

    kind = "decision_tree"

    def __init__(self, max_depth: int | None = None, min_leaf: int = 1):
        if max_depth is not None and max_depth < 0:
            raise ValidationError("max_depth must be >= 0")
        if min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)

    def fit(self, X, y, sample=None):
        X, y = _check_fit(X, y)
        idx = np.arange(X.shape[0]) if sample is None else np.asarray(sample, dtype=np.int64)
        self.n_features = X.shape[1]
        features = np.arange(self.n_features, dtype=np.int64)
        feat, thr, left, right, counts = [], [], [], [], []

        def new_node(rows):
            feat.append(-1)
            thr.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(np.bincount(y[rows], minlength=N_CLASSES).astype(float))
            return len(feat) - 1

        root = new_node(idx)
        stack = [(root, idx, 0)]
        while stack:
            node, rows, depth = stack.pop()
            if np.count_nonzero(counts[node]) < 2:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            f, t, _ = _kernels.gini_best_split(X, y, rows, features, N_CLASSES, self.min_leaf)
            if f < 0:
                continue
            go_left = X[rows, f] <= t
            lrows, rrows = rows[go_left], rows[~go_left]
            feat[node], thr[node] = int(f), float(t)
            left[node] = new_node(lrows)
            right[node] = new_node(rrows)
            stack.append((right[node], rrows, depth + 1))
            stack.append((left[node], lrows, depth + 1))
        self.feature = np.array(feat, dtype=np.int64)
        self.threshold = np.array(thr, dtype=np.float64)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.counts = np.array(counts, dtype=np.float64)
        return self

    def leaves(self, Xq) -> np.ndarray:
        Xq = _check_query(Xq, self.n_features)
        node = np.zeros(Xq.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = Xq[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def scores(self, Xq):
        c = self.counts[self.leaves(Xq)]
        return c / c.sum(axis=1, keepdims=True)

    def state(self):
        return {
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["max_depth"], s["min_leaf"])
        m.n_features = int(s["n_features"])
        m.feature = np.asarray(s["feature"], dtype=np.int64)
        m.threshold = np.asarray(s["threshold"], dtype=np.float64)
        m.left = np.asarray(s["left"], dtype=np.int64)
        m.right = np.asarray(s["right"], dtype=np.int64)
        m.counts = np.asarray(s["counts"], dtype=np.float64)
        return m


def member_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators for ensemble members, derived from one master seed.

    Member i's stream depends only on (seed, i), so members can be trained in
    any order or in parallel with identical results.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


class BaggedTrees(Estimator):
    """Majority vote of CART trees grown on bootstrap resamples."""

    kind = "bagged_trees"

    def __init__(self, tree_count: int = 50, max_depth: int | None = None, min_leaf: int = 1, bootstrap: bool = True, seed: int = 0):
        if tree_count < 1:
            raise ValidationError("tree_count must be >= 1")
        self.tree_count = int(tree_count)
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.bootstrap = bool(bootstrap)
        self.seed = int(seed)
        self.oob_accuracy = None

    def fit(self, X, y):
        X, y = _check_fit(X, y)
        n = X.shape[0]
        self.trees = []
        oob_votes = np.zeros((n, N_CLASSES))
        for rng in member_rngs(self.seed, self.tree_count):
            sample = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_leaf).fit(X, y, sample)
            self.trees.append(tree)
            if self.bootstrap:
                out = np.ones(n, dtype=bool)
                out[sample] = False
                if out.any():
                    pred = tree.predict(X[out])
                    oob_votes[np.flatnonzero(out), pred] += 1.0
        voted = oob_votes.sum(axis=1) > 0
        if voted.any():
            self.oob_accuracy = float(np.mean(np.argmax(oob_votes[voted], axis=1) == y[voted]))
        return self

    def scores(self, Xq):
        votes = None
        for tree in self.trees:
            pred = tree.predict(Xq)
            if votes is None:
                votes = np.zeros((pred.shape[0], N_CLASSES))
            votes[np.arange(pred.shape[0]), pred] += 1.0
        return votes / len(self.trees)

    def state(self):
        return {
            "tree_count": self.tree_count,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "oob_accuracy": self.oob_accuracy,
            "trees": [t.state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["tree_count"], s["max_depth"], s["min_leaf"], s["bootstrap"], s["seed"])
        m.oob_accuracy = s["oob_accuracy"]
        m.trees = [DecisionTree.from_state(t) for t in s["trees"]]
        return m


# ---------------------------------------------------------------- random subspace


class SubspaceEnsemble(Estimator):
    """Members trained on random feature subsets; class scores are averaged."""

    kind = "subspace"

    def __init__(self, learner: str = "knn", member_count: int = 30, subspace_dim: int | None = None, seed: int = 0, learner_params: Mapping[str, Any] | None = None):
        if learner not in ("knn", "discriminant"):
            raise ValidationError("subspace learner must be 'knn' or 'discriminant'")
        if member_count < 1:
            raise ValidationError("member_count must be >= 1")
        if subspace_dim is not None and subspace_dim < 1:
            raise ValidationError("subspace_dim must be >= 1")
        self.learner = learner
        self.member_count = int(member_count)
        self.subspace_dim = subspace_dim
        self.seed = int(seed)
        self.learner_params = dict(learner_params or {})

    def _make(self):
        if self.learner == "knn":
            return KNNClassifier(**{"k": 1, **self.learner_params})
        return LinearDiscriminant(**self.learner_params)

    def fit(self, X, y):
        X, y = _check_fit(X, y)
        p = X.shape[1]
        dim = self.subspace_dim if self.subspace_dim is not None else (p + 1) // 2
        if dim > p:
            raise ValidationError(f"subspace_dim {dim} exceeds the {p} available features")
        self.n_features = p
        self.members = []
        for rng in member_rngs(self.seed, self.member_count):
            cols = np.sort(rng.choice(p, size=dim, replace=False))
            self.members.append((cols, self._make().fit(X[:, cols], y)))
        return self

    def scores(self, Xq):
        Xq = _check_query(Xq, self.n_features)
        total = np.zeros((Xq.shape[0], N_CLASSES))
        for cols, member in self.members:
            total += member.scores(Xq[:, cols])
        return total / len(self.members)

    def state(self):
        return {
            "learner": self.learner,
            "member_count": self.member_count,
            "subspace_dim": self.subspace_dim,
            "seed": self.seed,
            "learner_params": self.learner_params,
            "n_features": self.n_features,
            "members": [{"columns": c.tolist(), "model": m.state()} for c, m in self.members],
        }

    @classmethod
    def from_state(cls, s):
        m = cls(s["learner"], s["member_count"], s["subspace_dim"], s["seed"], s["learner_params"])
        m.n_features = int(s["n_features"])
        member_cls = KNNClassifier if m.learner == "knn" else LinearDiscriminant
        m.members = [(np.asarray(e["columns"], dtype=np.int64), member_cls.from_state(e["model"])) for e in s["members"]]
        return m


ESTIMATORS = {
    cls.kind: cls
    for cls in (KNNClassifier, LinearDiscriminant, QuadraticDiscriminant, GaussianNaiveBayes, DecisionTree, BaggedTrees, SubspaceEnsemble)
}
