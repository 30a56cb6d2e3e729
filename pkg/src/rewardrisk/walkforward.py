"""Expanding-window refit/forecast loop, validation tuning, accuracy metrics."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import learners
from .errors import ConfigError, RewardRiskError, UndefinedMetricError
from .learners import BaselineConfig, Dataset, ElasticNetConfig, ForestConfig, LearnerConfig, OLSConfig
from .market_data import RETURN_MODEL, MonthStamp, PredictorPanel, trim_outliers

VOL_FLOOR = 1e-6  # monthly sigma floor; weights divide by sigma squared


@dataclass(frozen=True)
class TuningGrid:
    """Candidate configs per learner family, e.g. {"forest": [...], ...}."""

    candidates: dict[str, list[LearnerConfig]]
    refit_frequency: int = 1

    def __post_init__(self):
        if not self.candidates or any(not v for v in self.candidates.values()):
            raise ConfigError("tuning grid must be nonempty for every family")
        if self.refit_frequency < 1:
            raise ConfigError("refit_frequency must be >= 1")


@dataclass(frozen=True)
class WalkForecast:
    """Out-of-sample predictions for one panel/model over one window."""

    months: list[MonthStamp]
    values: np.ndarray
    model_tag: str
    seed: int = 0
    n_fits: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class ForecastSeries:
    """Paired return and volatility forecasts, both strictly out-of-sample."""

    months: list[MonthStamp]
    return_forecast: np.ndarray
    volatility_forecast: np.ndarray  # sigma units, floored strictly positive
    model_tag: str = "model"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "return_forecast",
                           np.asarray(self.return_forecast, dtype=float))
        vol = np.maximum(np.asarray(self.volatility_forecast, dtype=float), VOL_FLOOR)
        object.__setattr__(self, "volatility_forecast", vol)


@dataclass(frozen=True)
class AccuracyReport:
    r_squared_oos: float
    directional_accuracy: float
    n_forecasts: int


def _model_tag(config: LearnerConfig) -> str:
    if isinstance(config, ForestConfig):
        return "forest"
    if isinstance(config, ElasticNetConfig):
        return "elastic_net"
    if isinstance(config, OLSConfig):
        return "linear"
    if isinstance(config, BaselineConfig):
        return config.kind
    return type(config).__name__


def walk_forecast(panel: PredictorPanel, config: LearnerConfig,
                  window: tuple[MonthStamp, MonthStamp],
                  trim: float | None = None,
                  refit_frequency: int = 1) -> WalkForecast:
    """Forecast each month in the window from a model fit on all prior rows.

    Trimming (return models only) recomputes its cutoff over the current
    expanding training window at every refit.
    """
    eval_panel = panel.window(*window)
    if len(eval_panel) == 0:
        raise RewardRiskError(f"no panel rows in window {window[0]}..{window[1]}")
    eval_months = eval_panel.months
    X_eval = eval_panel.features.to_numpy(dtype=float)

    values = np.empty(len(eval_months))
    model = None
    n_fits = 0
    for i, month in enumerate(eval_months):
        if model is None or i % refit_frequency == 0:
            training = panel.rows_before(month)
            if trim is not None and panel.target_kind == RETURN_MODEL:
                training = trim_outliers(training, trim)
            if len(training) == 0:
                raise RewardRiskError(f"empty training window before {month}")
            model = learners.fit_model(Dataset.from_panel(training), config)
            n_fits += 1
        values[i] = model.predict_one(X_eval[i])

    seed = config.seed if isinstance(config, ForestConfig) else 0
    return WalkForecast(eval_months, values, _model_tag(config), seed=seed, n_fits=n_fits)


def walk_forecast_seeds(panel: PredictorPanel, config: ForestConfig,
                        window: tuple[MonthStamp, MonthStamp],
                        seeds: list[int], trim: float | None = None,
                        refit_frequency: int = 1) -> list[WalkForecast]:
    """One walk-forward pass per seed (forests are seed sensitive)."""
    return [
        walk_forecast(panel, dataclasses.replace(config, seed=s), window,
                      trim=trim, refit_frequency=refit_frequency)
        for s in seeds
    ]


def make_forecast_series(return_wf: WalkForecast, vol_wf: WalkForecast,
                         model_tag: str | None = None, seed: int | None = None) -> ForecastSeries:
    if [m.ordinal for m in return_wf.months] != [m.ordinal for m in vol_wf.months]:
        raise RewardRiskError("return and volatility forecasts cover different months")
    return ForecastSeries(
        months=return_wf.months,
        return_forecast=return_wf.values,
        volatility_forecast=vol_wf.values,
        model_tag=model_tag if model_tag is not None else return_wf.model_tag,
        seed=seed if seed is not None else return_wf.seed,
    )


def _expanding_means(actuals: np.ndarray, prior: np.ndarray) -> np.ndarray:
    """Mean of all actuals strictly before each evaluation month."""
    if len(prior) == 0 and len(actuals) > 0:
        raise UndefinedMetricError("expanding benchmark needs history before the window")
    out = np.empty(len(actuals))
    for i in range(len(actuals)):
        out[i] = np.mean(np.concatenate((prior, actuals[:i])))
    return out


def oos_r_squared(forecasts: np.ndarray, actuals: np.ndarray,
                  benchmark: str = "expanding_mean",
                  prior_actuals: np.ndarray | None = None) -> float:
    """1 - SSE(model) / SSE(benchmark forecast).

    `expanding_mean` recomputes the competing mean forecast each month from
    all actuals before it (`prior_actuals` supplies pre-window history);
    `full_mean` uses the fixed evaluation-window mean.
    """
    f = np.asarray(forecasts, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if f.shape != a.shape:
        raise RewardRiskError("forecasts and actuals must align")
    prior = np.asarray(prior_actuals, dtype=float) if prior_actuals is not None else np.empty(0)
    if benchmark == "expanding_mean":
        bench = _expanding_means(a, prior)
    elif benchmark == "full_mean":
        bench = np.full(len(a), a.mean())
    else:
        raise ConfigError(f"unknown benchmark {benchmark!r}")
    sse_bench = np.sum((a - bench) ** 2)
    if sse_bench == 0.0:
        raise UndefinedMetricError("benchmark SSE is zero; R^2 undefined")
    return float(1.0 - np.sum((a - f) ** 2) / sse_bench)


def directional_accuracy(forecasts: np.ndarray, actuals: np.ndarray,
                         mode: str = "sign",
                         prior_actuals: np.ndarray | None = None) -> float:
    """Fraction of months with the correct direction.

    `sign`: sign agreement, zeros counted as positive. `vs_mean`: forecast
    and actual on the same side of the expanding mean of actuals.
    """
    f = np.asarray(forecasts, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if f.shape != a.shape:
        raise RewardRiskError("forecasts and actuals must align")
    if mode == "sign":
        hits = (f >= 0) == (a >= 0)
    elif mode == "vs_mean":
        prior = np.asarray(prior_actuals, dtype=float) if prior_actuals is not None else np.empty(0)
        means = _expanding_means(a, prior)
        hits = ((f - means) >= 0) == ((a - means) >= 0)
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    return float(np.mean(hits))


def _tie_key(config: LearnerConfig, index: int):
    # smaller model wins ties: fewer trees, then larger lambda, then lower index
    n_trees = config.n_trees if isinstance(config, ForestConfig) else 0
    lam = config.lam if isinstance(config, ElasticNetConfig) else 0.0
    return (n_trees, -lam, index)


def tune(panel: PredictorPanel, grid: TuningGrid,
         window: tuple[MonthStamp, MonthStamp],
         trim: float | None = None) -> dict[str, tuple[LearnerConfig, float]]:
    """Score every candidate by walk-forward validation R^2; return argmax.

    Returns {family: (best_config, validation_r2)}.
    """
    prior = panel.rows_before(window[0]).target
    results: dict[str, tuple[LearnerConfig, float]] = {}
    for family, configs in grid.candidates.items():
        scored = []
        failures = []
        for index, config in enumerate(configs):
            try:
                wf = walk_forecast(panel, config, window, trim=trim,
                                   refit_frequency=grid.refit_frequency)
                actual = panel.window(*window).target
                r2 = oos_r_squared(wf.values, actual, "expanding_mean",
                                   prior_actuals=prior)
            except RewardRiskError as exc:
                failures.append((config, exc))
                continue
            scored.append((-r2, _tie_key(config, index), config, r2))
        if not scored:
            raise RewardRiskError(
                f"all {len(configs)} candidates failed for family {family!r}: {failures}"
            )
        scored.sort(key=lambda item: (item[0], item[1]))
        _, _, best, r2 = scored[0]
        results[family] = (best, r2)
    return results


def write_forecasts(series_list: list[ForecastSeries], path) -> None:
    """Delimited export: date,return_forecast,vol_forecast,model,seed."""
    rows = []
    for fs in series_list:
        for m, r, v in zip(fs.months, fs.return_forecast, fs.volatility_forecast):
            rows.append({"date": m.yyyymm(), "return_forecast": r,
                         "vol_forecast": v, "model": fs.model_tag, "seed": fs.seed})
    pd.DataFrame(rows).to_csv(path, index=False)
