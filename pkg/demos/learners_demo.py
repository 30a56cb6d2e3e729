"""Tour of the from-scratch learners: regression tree, forest, elastic net.

Run with: python3 demos/learners_demo.py
"""

import numpy as np

from rewardrisk.learners import (
    Dataset,
    ElasticNetConfig,
    ForestConfig,
    TreeModel,
    fit_elastic_net,
    fit_forest,
    fit_ols,
    fit_tree,
)

rng = np.random.default_rng(0)
n, p = 300, 6
X = rng.normal(size=(n, p))
beta = np.array([1.5, -0.8, 0.0, 0.0, 0.4, 0.0])
y = 0.5 + X @ beta + np.sin(2 * X[:, 0]) + 0.3 * rng.normal(size=n)
data = Dataset(X, y)

print("=== best-first regression tree ===")
config = ForestConfig(min_node_fraction=0.02, max_terminal_nodes=8, m_try=p)
tree = TreeModel(fit_tree(data, config), data.feature_names)
pred = tree.predict(X)
print(f"leaves: {tree.n_leaves()}")
print(f"in-sample RMSE: {np.sqrt(np.mean((pred - y) ** 2)):.4f}")

print("\n=== bagged forest, deterministic under parallelism ===")
fc = ForestConfig(n_trees=100, m_try=3, min_node_fraction=0.02,
                  max_terminal_nodes=8, seed=7)
forest = fit_forest(data, fc)
serial = forest.predict(X)
import dataclasses
parallel = fit_forest(data, dataclasses.replace(fc, n_jobs=-1)).predict(X)
print(f"forest RMSE: {np.sqrt(np.mean((serial - y) ** 2)):.4f}")
print(f"serial and parallel predictions identical: {np.array_equal(serial, parallel)}")

print("\n=== elastic net coordinate descent ===")
for lam in (0.0, 0.05, 0.5):
    model = fit_elastic_net(data, ElasticNetConfig(lam=lam, alpha=0.5))
    nz = int(np.sum(model.coefficients != 0.0))
    print(f"lambda={lam:<5} nonzero coefficients: {nz}/{p}  "
          f"coefs: {np.round(model.coefficients, 3)}")

print("\nat lambda=0 the solution matches OLS:")
ols = fit_ols(data)
en = fit_elastic_net(data, ElasticNetConfig(lam=0.0, alpha=0.5))
print(f"max |difference|: {np.max(np.abs(ols.coefficients - en.coefficients)):.2e}")
