"""Drive the command-line pipeline end to end on generated files.

Writes synthetic monthly.csv and daily.csv in the documented file formats,
then runs ingest, backtest, explain, and report through the CLI entry
point, leaving all artifacts under demos/_cli_out.

Run with: python3 demos/cli_demo.py
"""

from pathlib import Path

import pandas as pd
import yaml

from synthetic_data import PREDICTORS, make_market
from rewardrisk.cli import main

root = Path(__file__).parent / "_cli_out"
root.mkdir(exist_ok=True)

series, daily, months = make_market(240, seed=3, signal_coef=6.0)

table = {"date": [m.yyyymm() for m in months]}
for name in ["mkt", "rf"] + PREDICTORS + ["npy"]:
    table[name] = series[name].values
pd.DataFrame(table).to_csv(root / "monthly.csv", index=False)

rows = []
for m in months:
    for day, r in enumerate(daily.group(m), start=1):
        rows.append({"date": m.yyyymm() * 100 + day, "mktrf": r})
pd.DataFrame(rows).to_csv(root / "daily.csv", index=False)

config = {
    "data": {"monthly": str(root / "monthly.csv"),
             "daily": str(root / "daily.csv")},
    "output_dir": str(root / "run"),
    "split": {"train_end": 198912, "validation_end": 199412,
              "test_end": 199912},
    "n_seeds": 2,
    "refit_frequency": 12,
    "shap_samples": 200,
    # shrink the forests so the demo finishes in seconds
    "learners": {
        "forest_return": {"n_trees": 20},
        "forest_volatility": {"n_trees": 20},
    },
}
config_path = root / "config.yaml"
config_path.write_text(yaml.safe_dump(config))

for command in (["ingest"], ["backtest"], ["explain", "--model", "linear_return"],
                ["report"]):
    print(f"\n$ rewardrisk --config {config_path.name} {' '.join(command)}")
    code = main(["--config", str(config_path)] + command)
    assert code == 0, f"command {command} exited {code}"
