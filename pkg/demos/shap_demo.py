"""Kernel SHAP attributions for a forecasting model.

Fits a return model on a simulated market with one informative predictor
and shows that the attributions concentrate on it, with exact local
accuracy on every explanation.

Run with: python3 demos/shap_demo.py
"""

import numpy as np

from synthetic_data import make_market
from rewardrisk.explain import explain, mean_attributions
from rewardrisk.learners import Dataset, ForestConfig, fit_forest
from rewardrisk.market_data import RETURN_MODEL, build_panel

series, daily, months = make_market(300, seed=5, signal_coef=6.0)
panel = build_panel(series, daily, RETURN_MODEL)
training = panel.rows_before(months[250])
test = panel.window(months[250], months[-1])

config = ForestConfig(n_trees=60, m_try=4, min_node_fraction=0.05,
                      max_terminal_nodes=8, seed=1)
model = fit_forest(Dataset.from_panel(training), config)

references = training.features.to_numpy(dtype=float).mean(axis=0)
rows = test.features.to_numpy(dtype=float)

print("single-row explanation (local accuracy is exact by construction):")
expl = explain(model, rows[0], references, n_samples=500, seed=0)
print(f"  f(reference) = {expl.phi_0:+.5f}")
print(f"  f(query)     = {model.predict_one(rows[0]):+.5f}")
print(f"  phi_0 + sum(phi) = {expl.total:+.5f}")

print("\nmean attributions over the test rows (top 6 by |phi|):")
table = mean_attributions(model, rows, references, n_samples=500, seed=0)
top = table.sort_values("mean_abs_phi", ascending=False).head(6)
for _, row in top.iterrows():
    print(f"  {row['feature']:<10} mean_phi {row['mean_phi']:+.5f}  "
          f"mean_abs_phi {row['mean_abs_phi']:.5f}")
print("\nthe planted signal enters through last month's dp, so dp should "
      "rank first.")
