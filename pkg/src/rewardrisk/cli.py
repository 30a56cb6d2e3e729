"""Command-line entry point: ingest, tune, backtest, explain, report.

Configuration lives in one YAML file; flags only override config keys.
Every emitted report embeds the config hash and seed list so a run can be
reproduced byte for byte from its manifest.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import allocation, analytics, learners, market_data, walkforward
from .explain import mean_attributions, write_attributions
from .errors import (
    AlignmentError,
    ConfigError,
    DependencyError,
    DomainError,
    GapError,
    InsufficientDataError,
    RangeError,
    RewardRiskError,
    SchemaError,
    SingularityError,
    UndefinedMetricError,
)
from .learners import BaselineConfig, ElasticNetConfig, ForestConfig, OLSConfig
from .market_data import (
    RETURN_MODEL,
    VOLATILITY_MODEL,
    MonthStamp,
    PredictorPanel,
    SplitSpec,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

OUTPUT_ROOT_ENV = "REWARDRISK_OUTPUT"

FAMILIES = ("forest", "elastic_net", "linear")


@dataclass
class RunConfig:
    monthly_path: str
    daily_path: str
    output_dir: str = "out"
    delimiter: str = ","
    split: SplitSpec = field(default_factory=SplitSpec)
    trim_quantile: float = 0.90
    gammas: list[float] = field(default_factory=lambda: [4.0, 6.0])
    bounds: list[tuple[float, float]] = field(default_factory=lambda: [(0.0, 1.5), (0.0, 1.0)])
    master_seed: int = 0
    n_seeds: int = 5
    cost_grid_bps: list[float] = field(default_factory=lambda: [1.0, 10.0, 14.0])
    benchmark: str = "expanding_mean"
    refit_frequency: int = 1
    n_jobs: int = 1
    vol_log_target: bool = False
    shap_samples: int = 1000
    learner_overrides: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    def seeds(self) -> list[int]:
        state = np.random.SeedSequence(self.master_seed).generate_state(self.n_seeds)
        return [int(s) for s in state]

    def resolved_output_dir(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV, "")
        return Path(root) / self.output_dir if root else Path(self.output_dir)

    def canonical_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["split"] = {
            "train_end": self.split.train_end.yyyymm(),
            "validation_end": self.split.validation_end.yyyymm(),
            "test_end": self.split.test_end.yyyymm(),
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if "data" not in raw or "monthly" not in raw.get("data", {}):
        raise ConfigError(f"config {path} must define data.monthly and data.daily")
    data = raw["data"]
    split_raw = raw.get("split", {})
    spec = SplitSpec(
        train_end=MonthStamp.from_yyyymm(split_raw.get("train_end", 195712)),
        validation_end=MonthStamp.from_yyyymm(split_raw.get("validation_end", 198812)),
        test_end=MonthStamp.from_yyyymm(split_raw.get("test_end", 201912)),
    )
    cfg = RunConfig(
        monthly_path=data["monthly"],
        daily_path=data.get("daily", ""),
        delimiter=data.get("delimiter", ","),
        output_dir=raw.get("output_dir", "out"),
        split=spec,
        trim_quantile=raw.get("trim_quantile", 0.90),
        gammas=[float(g) for g in raw.get("gammas", [4.0, 6.0])],
        bounds=[tuple(b) for b in raw.get("bounds", [[0.0, 1.5], [0.0, 1.0]])],
        master_seed=int(raw.get("master_seed", 0)),
        n_seeds=int(raw.get("n_seeds", 5)),
        cost_grid_bps=[float(c) for c in raw.get("cost_grid_bps", [1.0, 10.0, 14.0])],
        benchmark=raw.get("benchmark", "expanding_mean"),
        refit_frequency=int(raw.get("refit_frequency", 1)),
        n_jobs=int(raw.get("n_jobs", 1)),
        vol_log_target=bool(raw.get("vol_log_target", False)),
        shap_samples=int(raw.get("shap_samples", 1000)),
        learner_overrides=raw.get("learners", {}),
        grid=raw.get("grid", {}),
    )
    if cfg.benchmark not in ("expanding_mean", "full_mean"):
        raise ConfigError(f"unknown benchmark {cfg.benchmark!r}")
    if not cfg.daily_path:
        raise ConfigError("config must define data.daily")
    return cfg


def learner_config(cfg: RunConfig, family: str, target: str, seed: int = 0):
    """Default learner config for a family/target, with YAML overrides applied."""
    overrides = dict(cfg.learner_overrides.get(f"{family}_{target}", {}))
    if family == "forest":
        base = (ForestConfig.for_returns if target == "return" else
                ForestConfig.for_volatility)
        overrides.setdefault("n_jobs", cfg.n_jobs)
        return base(seed=seed, **overrides)
    if family == "elastic_net":
        base = (ElasticNetConfig.for_returns if target == "return" else
                ElasticNetConfig.for_volatility)
        return base(**overrides)
    if family == "linear":
        return OLSConfig(**overrides)
    raise ConfigError(f"unknown learner family {family!r}")


def build_panels(cfg: RunConfig) -> tuple[PredictorPanel, PredictorPanel]:
    series = market_data.load_monthly(cfg.monthly_path, delimiter=cfg.delimiter)
    daily = market_data.load_daily(cfg.daily_path, delimiter=cfg.delimiter)
    ret_panel = market_data.build_panel(series, daily, RETURN_MODEL)
    vol_panel = market_data.build_panel(series, daily, VOLATILITY_MODEL)
    if cfg.vol_log_target:
        vol_panel = PredictorPanel(
            target_kind=vol_panel.target_kind,
            features=vol_panel.features,
            target=np.log(vol_panel.target ** 2),
            aux=vol_panel.aux,
            feature_names=vol_panel.feature_names,
        )
    return ret_panel, vol_panel


def _vol_sigma(cfg: RunConfig, values: np.ndarray) -> np.ndarray:
    """Map raw volatility-model outputs to sigma units."""
    if cfg.vol_log_target:
        return np.sqrt(np.exp(values))
    return values


def _panel_frame(panel: PredictorPanel) -> pd.DataFrame:
    frame = panel.features.copy()
    frame.insert(0, "date", [m.yyyymm() for m in panel.months])
    frame["target"] = panel.target
    for col in panel.aux.columns:
        frame[f"aux_{col}"] = panel.aux[col]
    return frame


def cmd_ingest(cfg: RunConfig) -> int:
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    ret_panel, vol_panel = build_panels(cfg)
    _panel_frame(ret_panel).to_csv(out / "return_panel.csv", index=False)
    _panel_frame(vol_panel).to_csv(out / "volatility_panel.csv", index=False)
    manifest = {
        "config_hash": cfg.config_hash(),
        "return_panel": {"rows": len(ret_panel),
                         "start": str(ret_panel.start), "end": str(ret_panel.end)},
        "volatility_panel": {"rows": len(vol_panel),
                             "start": str(vol_panel.start), "end": str(vol_panel.end)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"ingested panels -> {out} ({len(ret_panel)} return rows, "
          f"{len(vol_panel)} volatility rows)")
    return EXIT_OK


def grid_candidates(cfg: RunConfig, family: str, target: str):
    """Candidate learner configs for tuning, from YAML grid or the defaults."""
    entries = cfg.grid.get(f"{family}_{target}")
    if not entries:
        return [learner_config(cfg, family, target, seed=cfg.seeds()[0])]
    out = []
    for entry in entries:
        if family == "forest":
            base = (ForestConfig.for_returns if target == "return"
                    else ForestConfig.for_volatility)
            out.append(base(seed=cfg.seeds()[0], n_jobs=cfg.n_jobs, **entry))
        elif family == "elastic_net":
            base = (ElasticNetConfig.for_returns if target == "return"
                    else ElasticNetConfig.for_volatility)
            out.append(base(**entry))
        elif family == "linear":
            out.append(OLSConfig(**entry))
        else:
            raise ConfigError(f"unknown learner family {family!r}")
    return out


def cmd_tune(cfg: RunConfig) -> int:
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    ret_panel, vol_panel = build_panels(cfg)
    window = (cfg.split.train_end.next(), cfg.split.validation_end)
    results = {}
    for target, panel, trim in (("return", ret_panel, cfg.trim_quantile),
                                ("volatility", vol_panel, None)):
        for family in FAMILIES:
            grid = walkforward.TuningGrid(
                {family: grid_candidates(cfg, family, target)},
                refit_frequency=cfg.refit_frequency,
            )
            best, r2 = walkforward.tune(panel, grid, window, trim=trim)[family]
            results[f"{family}_{target}"] = {
                "config": dataclasses.asdict(best),
                "validation_r2": r2,
            }
            print(f"{family}/{target}: validation R^2 {r2:+.4f}")
    payload = {"config_hash": cfg.config_hash(), "selected": results}
    (out / "tuned.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def _accuracy_row(cfg, label, target, forecast_sigma, actual, prior):
    r2 = walkforward.oos_r_squared(forecast_sigma, actual, cfg.benchmark,
                                   prior_actuals=prior)
    mode = "sign" if target == "return" else "vs_mean"
    da = walkforward.directional_accuracy(forecast_sigma, actual, mode,
                                          prior_actuals=prior)
    return {"target": target, "model": label, "r_squared_oos": r2,
            "directional_accuracy": da, "n_forecasts": len(actual)}


def run_backtest(cfg: RunConfig) -> tuple[dict, dict]:
    """Full test-period pipeline; returns the structured report document."""
    ret_panel, vol_panel = build_panels(cfg)
    window = (cfg.split.validation_end.next(), cfg.split.test_end)
    market_data.split(ret_panel, cfg.split)  # validates boundaries
    seeds = cfg.seeds()

    test_ret = ret_panel.window(*window)
    test_vol = vol_panel.window(*window)
    months = test_ret.months
    actual_ret = test_ret.target
    actual_sigma = np.sqrt(test_vol.aux["rv"].to_numpy())
    prior_ret = ret_panel.rows_before(window[0]).target
    prior_sigma = np.sqrt(vol_panel.rows_before(window[0]).aux["rv"].to_numpy())
    mkt = test_ret.aux["mkt"].to_numpy()
    rf = test_ret.aux["rf"].to_numpy()

    # --- forecasts per family -------------------------------------------------
    forecast_series: dict[str, list[walkforward.ForecastSeries]] = {}
    accuracy_rows = []

    baseline_ret = walkforward.walk_forecast(
        ret_panel, BaselineConfig("prevailing_mean"), window,
        refit_frequency=cfg.refit_frequency)
    accuracy_rows.append(_accuracy_row(cfg, "Prevailing Mean", "return",
                                       baseline_ret.values, actual_ret, prior_ret))
    baseline_vol = walkforward.walk_forecast(
        vol_panel, BaselineConfig("previous_volatility", column="vol_lag1",
                                  sqrt_transform=True),
        window, refit_frequency=cfg.refit_frequency)
    accuracy_rows.append(_accuracy_row(cfg, "Previous Realized Volatility",
                                       "volatility", baseline_vol.values,
                                       actual_sigma, prior_sigma))

    for family in FAMILIES:
        if family == "forest":
            series_list = []
            for seed in seeds:
                ret_wf = walkforward.walk_forecast(
                    ret_panel, learner_config(cfg, family, "return", seed),
                    window, trim=cfg.trim_quantile,
                    refit_frequency=cfg.refit_frequency)
                vol_wf = walkforward.walk_forecast(
                    vol_panel, learner_config(cfg, family, "volatility", seed),
                    window, refit_frequency=cfg.refit_frequency)
                vol_sigma = _vol_sigma(cfg, vol_wf.values)
                series_list.append(walkforward.ForecastSeries(
                    months, ret_wf.values, vol_sigma, model_tag=family, seed=seed))
                accuracy_rows.append(_accuracy_row(
                    cfg, f"Random Forest (seed {seed})", "return",
                    ret_wf.values, actual_ret, prior_ret))
                accuracy_rows.append(_accuracy_row(
                    cfg, f"Random Forest (seed {seed})", "volatility",
                    vol_sigma, actual_sigma, prior_sigma))
            mean_ret = np.mean([fs.return_forecast for fs in series_list], axis=0)
            mean_vol = np.mean([fs.volatility_forecast for fs in series_list], axis=0)
            accuracy_rows.append(_accuracy_row(cfg, "Random Forest", "return",
                                               mean_ret, actual_ret, prior_ret))
            accuracy_rows.append(_accuracy_row(cfg, "Random Forest", "volatility",
                                               mean_vol, actual_sigma, prior_sigma))
            forecast_series[family] = series_list
        else:
            label = {"elastic_net": "Elastic Net", "linear": "Linear Model"}[family]
            ret_wf = walkforward.walk_forecast(
                ret_panel, learner_config(cfg, family, "return"),
                window, trim=cfg.trim_quantile, refit_frequency=cfg.refit_frequency)
            vol_wf = walkforward.walk_forecast(
                vol_panel, learner_config(cfg, family, "volatility"),
                window, refit_frequency=cfg.refit_frequency)
            vol_sigma = _vol_sigma(cfg, vol_wf.values)
            forecast_series[family] = [walkforward.ForecastSeries(
                months, ret_wf.values, vol_sigma, model_tag=family)]
            accuracy_rows.append(_accuracy_row(cfg, label, "return",
                                               ret_wf.values, actual_ret, prior_ret))
            accuracy_rows.append(_accuracy_row(cfg, label, "volatility",
                                               vol_sigma, actual_sigma, prior_sigma))

    # --- weights, paths, metrics ---------------------------------------------
    sharpe_rows, utility_rows, alpha_rows, timing_rows, cost_rows = [], [], [], [], []
    weight_exports: list[allocation.WeightSeries] = []
    wealth_frames = {}

    for gamma in cfg.gammas:
        for bounds in cfg.bounds:
            tag = f"gamma={gamma:g},cap={bounds[1]:g}"
            paths: dict[str, analytics.PortfolioPath] = {}
            weight_map: dict[str, allocation.WeightSeries] = {}

            def add(label, ws_list):
                # forests carry one weight series per seed; metrics average
                ws_paths = [analytics.portfolio_path(ws, mkt, rf) for ws in ws_list]
                weight_map[label] = ws_list[0]
                paths[label] = ws_paths[0]
                stats = [analytics.sharpe(p) for p in ws_paths]
                mean_stats = np.mean(np.array(stats), axis=0)
                sharpe_rows.append({
                    "gamma": gamma, "cap": bounds[1], "strategy": label,
                    "annual_return": mean_stats[0], "annual_std": mean_stats[1],
                    "sharpe": mean_stats[2], "n_seeds": len(ws_paths),
                })
                utils = [analytics.utility_metrics(p, gamma) for p in ws_paths]
                mean_utils = np.mean(np.array(utils), axis=0)
                utility_rows.append({
                    "gamma": gamma, "cap": bounds[1], "strategy": label,
                    "mean_monthly_utility": mean_utils[0],
                    "ce_yield_annual": mean_utils[1],
                    "terminal_wealth": mean_utils[2],
                })
                return ws_paths

            buyhold = allocation.strategy_weights(allocation.BUY_HOLD, None,
                                                  ret_panel, gamma, bounds,
                                                  months=months)
            add("Mkt", [buyhold])
            base_ws = allocation.base_weights(ret_panel, months, gamma, bounds)
            add("Base", [base_ws])
            weight_exports.extend([buyhold, base_ws])

            for family in FAMILIES:
                for strat in (allocation.StrategyId("model", "model", family),
                              allocation.StrategyId("model", "previous_realized", family),
                              allocation.StrategyId("expanding_mean", "model", family)):
                    ws_list = [
                        allocation.strategy_weights(strat, fs, ret_panel, gamma, bounds)
                        for fs in forecast_series[family]
                    ]
                    add(strat.label, ws_list)
                    weight_exports.append(ws_list[0])

            market_excess = mkt - rf
            excess = {label: p.excess_return for label, p in paths.items()}
            pairs = [(label, "Mkt") for label in paths if label != "Mkt"]
            for a_label in ("Random Forest Optimal", "Elastic Net Optimal"):
                for b_label in ("Base", "Linear Model Optimal"):
                    pairs.append((a_label, b_label))
            pairs.append(("Random Forest Optimal", "Elastic Net Optimal"))
            for a_label, b_label in pairs:
                fit = analytics.alpha_regression(excess[a_label], excess[b_label])
                alpha_rows.append({
                    "gamma": gamma, "cap": bounds[1],
                    "f_a": a_label, "f_b": b_label,
                    "beta": fit.coef("beta"),
                    "alpha_annual": analytics.ANNUAL_FACTOR * fit.coef("alpha"),
                    "alpha_se_annual": analytics.ANNUAL_FACTOR * fit.se("alpha"),
                    "alpha_t": fit.tstat("alpha"),
                    "r_squared": fit.r_squared, "n_obs": fit.n_obs,
                })
            for label in paths:
                if label == "Mkt":
                    continue
                hm = analytics.hm_test(excess[label], market_excess)
                tm = analytics.tm_test(excess[label], market_excess)
                timing_rows.append({
                    "gamma": gamma, "cap": bounds[1], "strategy": label,
                    "hm_gamma": hm.coef("gamma"), "hm_t": hm.tstat("gamma"),
                    "tm_gamma": tm.coef("gamma"), "tm_t": tm.tstat("gamma"),
                })

            cost_strategies = [weight_map[l] for l in
                               ("Random Forest Optimal", "Elastic Net Optimal",
                                "Linear Model Optimal", "Base")]
            table = analytics.transaction_cost_table(
                cost_strategies, mkt, rf, tuple(cfg.cost_grid_bps))
            table.insert(0, "gamma", gamma)
            cost_rows.append(table)

            wealth = pd.DataFrame(
                {label: p.wealth for label, p in paths.items()},
                index=[m.yyyymm() for m in months])
            dd = pd.DataFrame(
                {label: analytics.drawdown(p)[0] for label, p in paths.items()},
                index=wealth.index)
            wealth_frames[tag] = (wealth, dd)

    report = {
        "config_hash": cfg.config_hash(),
        "seeds": seeds,
        "data_range": {"start": str(ret_panel.start), "end": str(ret_panel.end),
                       "test_start": str(window[0]), "test_end": str(window[1])},
        "accuracy": accuracy_rows,
        "sharpe": sharpe_rows,
        "utility": utility_rows,
        "alphas": alpha_rows,
        "timing_tests": timing_rows,
        "costs": pd.concat(cost_rows, ignore_index=True).to_dict("records"),
    }
    artifacts = {
        "forecasts": [fs for fam in FAMILIES for fs in forecast_series[fam]],
        "weights": weight_exports,
        "wealth": wealth_frames,
    }
    return report, artifacts


def cmd_backtest(cfg: RunConfig) -> int:
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    report, artifacts = run_backtest(cfg)
    walkforward.write_forecasts(artifacts["forecasts"], out / "forecasts.csv")
    allocation.write_weights(artifacts["weights"], out / "weights.csv")
    for name in ("accuracy", "sharpe", "utility", "alphas", "timing_tests", "costs"):
        pd.DataFrame(report[name]).to_csv(out / f"{name}.csv", index=False)
    for tag, (wealth, dd) in artifacts["wealth"].items():
        safe = tag.replace("=", "").replace(",", "_")
        wealth.to_csv(out / f"wealth_{safe}.csv", index_label="date")
        dd.to_csv(out / f"drawdown_{safe}.csv", index_label="date")
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(f"backtest complete -> {out} (config {report['config_hash']})")
    return EXIT_OK


def cmd_explain(cfg: RunConfig, model_ref: str) -> int:
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    ret_panel, vol_panel = build_panels(cfg)
    window = (cfg.split.validation_end.next(), cfg.split.test_end)

    known = {f"{family}_{target}" for family in FAMILIES
             for target in ("return", "volatility")}
    refs = sorted(known) if model_ref == "all" else [model_ref]
    unknown = [r for r in refs if r not in known]
    if unknown:
        raise ConfigError(f"unknown model ref(s) {unknown}; choose from {sorted(known)}")

    tables = {}
    for ref in refs:
        family, target = ref.rsplit("_", 1)
        panel = ret_panel if target == "return" else vol_panel
        training = panel.rows_before(window[0])
        if target == "return" and cfg.trim_quantile is not None:
            training = market_data.trim_outliers(training, cfg.trim_quantile)
        config = learner_config(cfg, family, target, seed=cfg.seeds()[0])
        model = learners.fit_model(learners.Dataset.from_panel(training), config)
        test_rows = panel.window(*window).features.to_numpy(dtype=float)
        references = training.features.to_numpy(dtype=float).mean(axis=0)
        table = mean_attributions(model, test_rows, references,
                                  n_samples=cfg.shap_samples,
                                  seed=cfg.master_seed)
        tables[ref] = table
        table.to_csv(out / f"attributions_{ref}.csv", index=False)
        print(f"{ref}: top positive contributor "
              f"{table.sort_values('mean_phi', ascending=False).iloc[0]['feature']}")
    write_attributions(tables, out / "attributions.csv")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    out = cfg.resolved_output_dir()
    path = out / "report.json"
    if not path.exists():
        raise RangeError(f"no report at {path}; run backtest first")
    report = json.loads(path.read_text())
    print(f"config hash: {report['config_hash']}  seeds: {report['seeds']}")
    print(f"data: {report['data_range']}")
    for name in ("accuracy", "sharpe", "utility", "alphas", "timing_tests", "costs"):
        print(f"\n== {name} ==")
        print(pd.DataFrame(report[name]).to_string(index=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewardrisk",
        description="Walk-forward reward-risk timing backtests",
    )
    parser.add_argument("--config", "-c", required=True, help="YAML run configuration")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", help="build and persist predictor panels")
    sub.add_parser("tune", help="select hyperparameters on the validation window")
    sub.add_parser("backtest", help="run the full test-period backtest")
    p_explain = sub.add_parser("explain", help="mean SHAP attributions per model")
    p_explain.add_argument("--model", default="all",
                           help="model ref like forest_return, or 'all'")
    sub.add_parser("report", help="print the tables from an existing report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "tune":
            return cmd_tune(cfg)
        if args.command == "backtest":
            return cmd_backtest(cfg)
        if args.command == "explain":
            return cmd_explain(cfg, args.model)
        if args.command == "report":
            return cmd_report(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GapError, InsufficientDataError, RangeError, AlignmentError,
            DependencyError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularityError, UndefinedMetricError, DomainError,
            FloatingPointError, RewardRiskError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
