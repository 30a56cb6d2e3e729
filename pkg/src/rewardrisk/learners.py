"""From-scratch supervised learners sharing one fit/predict contract.

Regression trees are grown best-first: the frontier node whose best split
most reduces the summed squared deviation is expanded until the terminal
node cap is hit. The minimum-size fraction gates the *current* node: a node
holding fewer than `min_node_fraction * n` rows is never split.

Forest randomness is derived per tree from (seed, tree index), never from
execution order, so results are identical at any parallelism degree.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .errors import ConfigError, SchemaError, SingularityError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, target vector and column names for one fit."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a nonempty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("targets must align with feature rows")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("non-finite values in dataset")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"x{j}" for j in range(X.shape[1]))
            )

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_panel(cls, panel) -> "Dataset":
        return cls(
            features=panel.features.to_numpy(dtype=float),
            targets=panel.target,
            feature_names=tuple(panel.feature_names),
        )


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    m_try: int = 4
    min_node_fraction: float = 0.01
    max_terminal_nodes: int = 12
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if not 0.0 < self.min_node_fraction <= 1.0:
            raise ConfigError("min_node_fraction must be in (0, 1]")
        if self.max_terminal_nodes < 2:
            raise ConfigError("max_terminal_nodes must be >= 2")

    @classmethod
    def for_returns(cls, seed: int = 0, **overrides) -> "ForestConfig":
        base = dict(min_node_fraction=0.95, max_terminal_nodes=2,
                    n_trees=500, m_try=4, seed=seed)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_volatility(cls, seed: int = 0, **overrides) -> "ForestConfig":
        base = dict(min_node_fraction=0.01, max_terminal_nodes=12,
                    n_trees=500, m_try=4, seed=seed)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class ElasticNetConfig:
    lam: float = 0.07
    alpha: float = 0.1
    max_iterations: int = 10_000
    tolerance: float = 1e-10
    standardize: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")

    @classmethod
    def for_returns(cls, **overrides) -> "ElasticNetConfig":
        return cls(**{"lam": 0.07, "alpha": 0.1, **overrides})

    @classmethod
    def for_volatility(cls, **overrides) -> "ElasticNetConfig":
        return cls(**{"lam": 0.3, "alpha": 0.1, **overrides})


@dataclass(frozen=True)
class OLSConfig:
    ridge_jitter: bool = False


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "prevailing_mean"  # or "previous_volatility"
    column: str = "vol_lag1"
    sqrt_transform: bool = False  # lag column stores variances, target is sigma


class FittedModel:
    """Common predict contract; all fitted models are immutable."""

    kind: str = "model"

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_one(self, x: np.ndarray) -> float:
        return float(self.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])


class _TreeNode:
    __slots__ = ("prediction", "feature", "threshold", "left", "right")

    def __init__(self, prediction: float):
        self.prediction = prediction
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def _sum_sq_dev(prefix_sum, prefix_sumsq, lo, hi):
    # sum of squared deviations of y[lo:hi] from its own mean
    n = hi - lo
    s = prefix_sum[hi] - prefix_sum[lo]
    ss = prefix_sumsq[hi] - prefix_sumsq[lo]
    return ss - s * s / n


def _best_split(X, y, rows, candidate_features):
    """Best (gain, feature, threshold, left_rows, right_rows) over candidates.

    Ties go to the lowest feature index, then the smallest threshold, which
    the scan order guarantees by only accepting strictly larger gains.
    """
    y_node = y[rows]
    node_cost = float(np.sum((y_node - y_node.mean()) ** 2))
    best = None
    for j in candidate_features:
        x_col = X[rows, j]
        order = np.argsort(x_col, kind="stable")
        x_sorted = x_col[order]
        y_sorted = y_node[order]
        prefix_sum = np.concatenate(([0.0], np.cumsum(y_sorted)))
        prefix_sumsq = np.concatenate(([0.0], np.cumsum(y_sorted ** 2)))
        n = len(rows)
        for i in range(1, n):
            if x_sorted[i - 1] == x_sorted[i]:
                continue
            cost = (_sum_sq_dev(prefix_sum, prefix_sumsq, 0, i)
                    + _sum_sq_dev(prefix_sum, prefix_sumsq, i, n))
            gain = node_cost - cost
            if best is None or gain > best[0]:
                threshold = 0.5 * (x_sorted[i - 1] + x_sorted[i])
                best = (gain, j, threshold, rows[order[:i]], rows[order[i:]])
    return best


def fit_tree(data: Dataset, config: ForestConfig,
             rng: np.random.Generator | None = None,
             rows: np.ndarray | None = None,
             n_total: int | None = None):
    """Grow one regression tree best-first. Returns the root node.

    `rows` restricts the fit to a row subset (bootstrap sample); `n_total`
    is the full training size the min-size fraction is measured against.
    """
    X, y = data.features, data.targets
    if rows is None:
        rows = np.arange(data.n_rows)
    if n_total is None:
        n_total = data.n_rows
    if rng is None:
        rng = np.random.default_rng(config.seed)
    m = min(config.m_try, data.n_features)
    min_rows = config.min_node_fraction * n_total

    def evaluate(node_rows):
        # rng draws happen only for split-eligible nodes, in creation order
        if len(node_rows) < 2 or len(node_rows) < min_rows:
            return None
        if m < data.n_features:
            candidates = np.sort(rng.choice(data.n_features, size=m, replace=False))
        else:
            candidates = np.arange(data.n_features)
        return _best_split(X, y, node_rows, candidates)

    root = _TreeNode(float(y[rows].mean()))
    counter = 0
    frontier = []
    split0 = evaluate(rows)
    if split0 is not None and split0[0] > 0.0:
        heapq.heappush(frontier, (-split0[0], counter, root, split0))
        counter += 1
    n_leaves = 1
    while frontier and n_leaves < config.max_terminal_nodes:
        _, _, node, (gain, j, threshold, left_rows, right_rows) = heapq.heappop(frontier)
        node.feature = int(j)
        node.threshold = float(threshold)
        node.left = _TreeNode(float(y[left_rows].mean()))
        node.right = _TreeNode(float(y[right_rows].mean()))
        n_leaves += 1
        for child, child_rows in ((node.left, left_rows), (node.right, right_rows)):
            child_split = evaluate(child_rows)
            if child_split is not None and child_split[0] > 0.0:
                heapq.heappush(frontier, (-child_split[0], counter, child, child_split))
                counter += 1
    return root


def _predict_tree(root: _TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = root
        while not node.is_leaf:
            node = node.left if X[i, node.feature] <= node.threshold else node.right
        out[i] = node.prediction
    return out


def _tree_cost(root: _TreeNode, X: np.ndarray, y: np.ndarray) -> float:
    """Total summed squared deviation of targets from their leaf means."""
    return float(np.sum((y - _predict_tree(root, X)) ** 2))


class TreeModel(FittedModel):
    kind = "tree"

    def __init__(self, root: _TreeNode, feature_names: tuple[str, ...]):
        self.root = root
        self.feature_names = feature_names

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _predict_tree(self.root, np.asarray(X, dtype=float))

    def n_leaves(self) -> int:
        def count(node):
            return 1 if node.is_leaf else count(node.left) + count(node.right)
        return count(self.root)


class ForestModel(FittedModel):
    kind = "forest"

    def __init__(self, trees: list[_TreeNode], feature_names: tuple[str, ...],
                 config: ForestConfig):
        self.trees = trees
        self.feature_names = feature_names
        self.config = config

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        preds = np.stack([_predict_tree(t, X) for t in self.trees])
        return np.mean(preds, axis=0)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(tree_index,)))


def _grow_forest_tree(data: Dataset, config: ForestConfig, b: int) -> _TreeNode:
    rng = _tree_rng(config.seed, b)
    n = data.n_rows
    if config.bootstrap:
        rows = rng.integers(0, n, size=n)
    else:
        rows = np.arange(n)
    return fit_tree(data, config, rng=rng, rows=rows, n_total=n)


def fit_forest(data: Dataset, config: ForestConfig) -> ForestModel:
    """Fit a bagged ensemble of best-first trees; reproducible from seed."""
    if config.m_try > data.n_features:
        raise ConfigError(
            f"m_try={config.m_try} exceeds feature count {data.n_features}"
        )
    if config.n_jobs == 1:
        trees = [_grow_forest_tree(data, config, b) for b in range(config.n_trees)]
    else:
        trees = Parallel(n_jobs=config.n_jobs, prefer="threads")(
            delayed(_grow_forest_tree)(data, config, b) for b in range(config.n_trees)
        )
    return ForestModel(trees, data.feature_names, config)


class LinearModel(FittedModel):
    def __init__(self, kind: str, intercept: float, coefficients: np.ndarray,
                 feature_names: tuple[str, ...], converged: bool = True,
                 objective_path: np.ndarray | None = None):
        self.kind = kind
        self.intercept = float(intercept)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.feature_names = feature_names
        self.converged = converged
        self.objective_path = objective_path

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coefficients


def soft_threshold(value: float, threshold: float) -> float:
    return np.sign(value) * max(abs(value) - threshold, 0.0)


def elastic_net_objective(X, y, intercept, beta, lam, alpha) -> float:
    """(1/T) * SSE plus the blended l1/l2 penalty."""
    resid = y - intercept - X @ beta
    penalty = lam * (alpha * np.sum(np.abs(beta))
                     + 0.5 * (1 - alpha) * np.sum(beta ** 2))
    return float(np.mean(resid ** 2) + penalty)


def fit_elastic_net(data: Dataset, config: ElasticNetConfig) -> LinearModel:
    """Cyclic coordinate descent with soft thresholding; intercept unpenalized.

    The intercept is profiled out by centering, which is exact because it is
    not penalized. With `standardize`, slopes are fit on unit-variance
    columns and mapped back to original units.
    """
    X, y = data.features, data.targets
    T, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    if config.standardize:
        scale = Xc.std(axis=0)
        scale[scale == 0.0] = 1.0
    else:
        scale = np.ones(p)
    Xs = Xc / scale
    yc = y - y_mean

    col_sq = np.einsum("ij,ij->j", Xs, Xs)
    lam, alpha = config.lam, config.alpha
    # exact coordinate minimizer of (1/T)*SSE + lam*(alpha*l1 + (1-alpha)/2*l2)
    denom = 2.0 * col_sq / T + lam * (1 - alpha)
    beta = np.zeros(p)
    resid = yc.copy()
    objective = [elastic_net_objective(Xs, yc, 0.0, beta, lam, alpha)]
    converged = False
    for _ in range(config.max_iterations):
        max_delta = 0.0
        for j in range(p):
            if denom[j] == 0.0:
                continue
            b_old = beta[j]
            rho = 2.0 * ((Xs[:, j] @ resid) / T + b_old * col_sq[j] / T)
            b_new = soft_threshold(rho, lam * alpha) / denom[j]
            if b_new != b_old:
                resid += Xs[:, j] * (b_old - b_new)
                beta[j] = b_new
                max_delta = max(max_delta, abs(b_new - b_old))
        objective.append(elastic_net_objective(Xs, yc, 0.0, beta, lam, alpha))
        if max_delta < config.tolerance:
            converged = True
            break

    beta_orig = beta / scale
    intercept = y_mean - x_mean @ beta_orig
    return LinearModel("elastic_net", intercept, beta_orig, data.feature_names,
                       converged=converged, objective_path=np.array(objective))


def fit_ols(data: Dataset, config: OLSConfig = OLSConfig()) -> LinearModel:
    """Least squares with intercept via the normal equations."""
    X, y = data.features, data.targets
    n, p = X.shape
    if n <= p:
        raise SingularityError(f"need n > p, got n={n}, p={p}")
    A = np.column_stack([np.ones(n), X])
    rank = np.linalg.matrix_rank(A)
    if rank < p + 1:
        if not config.ridge_jitter:
            raise SingularityError("design matrix is rank deficient")
        G = A.T @ A + 1e-10 * np.eye(p + 1)
        coef = np.linalg.solve(G, A.T @ y)
    else:
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel("ols", coef[0], coef[1:], data.feature_names)


class PrevailingMeanModel(FittedModel):
    kind = "prevailing_mean"

    def __init__(self, mean: float):
        self.mean = float(mean)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.mean)


class PreviousVolatilityModel(FittedModel):
    kind = "previous_volatility"

    def __init__(self, column_index: int, sqrt_transform: bool):
        self.column_index = column_index
        self.sqrt_transform = sqrt_transform

    def predict(self, X: np.ndarray) -> np.ndarray:
        values = np.asarray(X, dtype=float)[:, self.column_index]
        return np.sqrt(values) if self.sqrt_transform else values.copy()


def fit_baseline(config: BaselineConfig, data: Dataset) -> FittedModel:
    if config.kind == "prevailing_mean":
        return PrevailingMeanModel(data.targets.mean())
    if config.kind == "previous_volatility":
        if config.column not in data.feature_names:
            raise SchemaError(
                f"previous_volatility baseline needs column {config.column!r}; "
                f"have {list(data.feature_names)}"
            )
        idx = data.feature_names.index(config.column)
        return PreviousVolatilityModel(idx, config.sqrt_transform)
    raise ConfigError(f"unknown baseline kind {config.kind!r}")


LearnerConfig = ForestConfig | ElasticNetConfig | OLSConfig | BaselineConfig


def fit_model(data: Dataset, config: LearnerConfig) -> FittedModel:
    """Single dispatch point shared by the walk-forward loop."""
    if isinstance(config, ForestConfig):
        return fit_forest(data, config)
    if isinstance(config, ElasticNetConfig):
        return fit_elastic_net(data, config)
    if isinstance(config, OLSConfig):
        return fit_ols(data, config)
    if isinstance(config, BaselineConfig):
        return fit_baseline(config, data)
    raise ConfigError(f"unknown learner config {type(config).__name__}")
