"""Forecasts to portfolio weights: reward / (gamma * variance), clipped."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import optimize

from .errors import DependencyError, DomainError, RewardRiskError
from .market_data import MonthStamp, PredictorPanel
from .walkforward import ForecastSeries

DEFAULT_BOUNDS = (0.0, 1.5)

MODEL = "model"
EXPANDING_MEAN = "expanding_mean"
PREVIOUS_REALIZED = "previous_realized"


@dataclass(frozen=True)
class StrategyId:
    """One cell of the strategy grid.

    reward_source: "model" or "expanding_mean"; risk_source: "model" or
    "previous_realized"; model_family labels the forecasting models used.
    """

    reward_source: str
    risk_source: str
    model_family: str = "none"
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        family = {"forest": "Random Forest", "elastic_net": "Elastic Net",
                  "linear": "Linear Model", "none": ""}.get(self.model_family,
                                                            self.model_family)
        if self.reward_source == MODEL and self.risk_source == MODEL:
            return f"{family} Optimal".strip()
        if self.reward_source == MODEL:
            return f"{family} Returns".strip()
        if self.risk_source == MODEL:
            return f"{family} Volatility".strip()
        return "Base"


BUY_HOLD = StrategyId(EXPANDING_MEAN, PREVIOUS_REALIZED, "none", label="BuyHold")
BASE = StrategyId(EXPANDING_MEAN, PREVIOUS_REALIZED, "none", label="Base")


def strategy_grid(families=("forest", "elastic_net", "linear")) -> list[StrategyId]:
    """Base, Optimal/Returns/Volatility per family, plus BuyHold."""
    out = [BUY_HOLD, BASE]
    for family in families:
        out.append(StrategyId(MODEL, MODEL, family))
        out.append(StrategyId(MODEL, PREVIOUS_REALIZED, family))
        out.append(StrategyId(EXPANDING_MEAN, MODEL, family))
    return out


@dataclass(frozen=True)
class WeightSeries:
    months: list[MonthStamp]
    weights: np.ndarray
    gamma: float
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    label: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        low, high = self.bounds
        if np.any(w < low - 1e-12) or np.any(w > high + 1e-12):
            raise RewardRiskError("weights violate bounds")
        object.__setattr__(self, "weights", w)


def optimal_weight(reward: float, variance: float, gamma: float,
                   bounds: tuple[float, float] = DEFAULT_BOUNDS) -> float:
    """clip(reward / (gamma * variance), low, high)."""
    if variance <= 0:
        raise DomainError(f"variance must be positive, got {variance}")
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    return float(np.clip(reward / (gamma * variance), *bounds))


def _aligned_history(panel: PredictorPanel, months: list[MonthStamp]):
    """Per-month expanding mean excess return and previous realized variance."""
    ords = panel.aux.index.to_numpy()
    excess = panel.aux["excess"].to_numpy()
    rv = panel.aux["rv"].to_numpy()
    mean_excess = np.empty(len(months))
    prev_rv = np.empty(len(months))
    for i, month in enumerate(months):
        before = ords < month.ordinal
        if not before.any():
            raise RewardRiskError(f"no history before {month}")
        mean_excess[i] = excess[before].mean()
        prev_pos = np.flatnonzero(before)[-1]
        if ords[prev_pos] != month.ordinal - 1:
            raise RewardRiskError(f"missing realized variance for month before {month}")
        prev_rv[i] = rv[prev_pos]
    return mean_excess, prev_rv


def base_weights(panel: PredictorPanel, months: list[MonthStamp], gamma: float,
                 bounds: tuple[float, float] = DEFAULT_BOUNDS) -> WeightSeries:
    """Expanding-mean reward over gamma times last month's realized variance."""
    mean_excess, prev_rv = _aligned_history(panel, months)
    weights = [optimal_weight(m, v, gamma, bounds) for m, v in zip(mean_excess, prev_rv)]
    return WeightSeries(months, np.array(weights), gamma, bounds, label="Base")


def _strategy_std(c: float, prev_rv: np.ndarray, excess: np.ndarray, rf: np.ndarray,
                  bounds: tuple[float, float]) -> float:
    w = np.clip(c / prev_rv, *bounds)
    returns = w * excess + rf
    return float(np.std(returns, ddof=1))


def vol_timing_constant_weights(panel: PredictorPanel, months: list[MonthStamp],
                                target_std: float,
                                bounds: tuple[float, float] = DEFAULT_BOUNDS,
                                gamma: float = 1.0) -> WeightSeries:
    """Reference strategy w = c / rv_{t-1} with c matching a full-sample std.

    Explicitly look-ahead: c is solved on the whole window so the strategy's
    standard deviation equals `target_std`.
    """
    _, prev_rv = _aligned_history(panel, months)
    window = panel.window(months[0], months[-1])
    excess = window.aux["excess"].to_numpy()
    rf = window.aux["rf"].to_numpy()

    def gap(c):
        return _strategy_std(c, prev_rv, excess, rf, bounds) - target_std

    hi = bounds[1] * float(np.max(prev_rv))  # beyond this every weight clips high
    if gap(hi) < 0:
        warnings.warn(
            "target std unreachable under weight bounds; using nearest achievable",
            stacklevel=2,
        )
        c = hi
    else:
        c = optimize.brentq(gap, 0.0, hi)
    weights = np.clip(c / prev_rv, *bounds)
    return WeightSeries(months, weights, gamma, bounds, label="VolTimingConstant")


def strategy_weights(strategy: StrategyId, forecasts: ForecastSeries | None,
                     panel: PredictorPanel, gamma: float,
                     bounds: tuple[float, float] = DEFAULT_BOUNDS,
                     months: list[MonthStamp] | None = None) -> WeightSeries:
    """Weights for one strategy id over the forecast months."""
    if months is None:
        if forecasts is None:
            raise DependencyError(f"strategy {strategy.label!r} needs months or forecasts")
        months = forecasts.months

    if strategy.label == "BuyHold":
        return WeightSeries(months, np.ones(len(months)), gamma,
                            (min(bounds[0], 1.0), max(bounds[1], 1.0)), label="BuyHold")

    needs_model = MODEL in (strategy.reward_source, strategy.risk_source)
    if needs_model and forecasts is None:
        raise DependencyError(
            f"strategy {strategy.label!r} needs model forecasts "
            f"(reward={strategy.reward_source}, risk={strategy.risk_source})"
        )
    if forecasts is not None and [m.ordinal for m in forecasts.months] != [m.ordinal for m in months]:
        raise DependencyError("forecast months do not match requested months")

    mean_excess, prev_rv = _aligned_history(panel, months)
    if strategy.reward_source == MODEL:
        reward = forecasts.return_forecast
    else:
        reward = mean_excess
    if strategy.risk_source == MODEL:
        risk = forecasts.volatility_forecast ** 2
    else:
        risk = prev_rv

    weights = [optimal_weight(r, v, gamma, bounds) for r, v in zip(reward, risk)]
    return WeightSeries(months, np.array(weights), gamma, bounds, label=strategy.label)


def write_weights(series_list: list[WeightSeries], path) -> None:
    """Delimited export: date,strategy,weight."""
    rows = []
    for ws in series_list:
        for m, w in zip(ws.months, ws.weights):
            rows.append({"date": m.yyyymm(), "strategy": ws.label, "weight": w})
    pd.DataFrame(rows).to_csv(path, index=False)
