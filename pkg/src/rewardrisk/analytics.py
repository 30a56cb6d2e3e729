"""Portfolio paths, Sharpe/utility metrics, robust regressions, trading costs.

Annualization convention: means and alphas scale by 12, standard deviations
by sqrt(12). Standard deviations use the n-1 divisor. Robust standard errors
are HC0 (plain White sandwich); HC1 is available as an option.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .allocation import WeightSeries
from .errors import (
    AlignmentError,
    DomainError,
    SingularityError,
    UndefinedMetricError,
)
from .market_data import MonthStamp, PredictorPanel

ANNUAL_FACTOR = 12


@dataclass(frozen=True)
class PortfolioPath:
    """Monthly strategy returns and the cumulative wealth path from 1.0."""

    months: list[MonthStamp]
    strategy_return: np.ndarray  # simple monthly returns
    weights: np.ndarray
    riskfree: np.ndarray

    def __post_init__(self):
        for name in ("strategy_return", "weights", "riskfree"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def wealth(self) -> np.ndarray:
        return np.cumprod(1.0 + self.strategy_return)

    @property
    def excess_return(self) -> np.ndarray:
        return self.strategy_return - self.riskfree

    @property
    def terminal_wealth(self) -> float:
        return float(self.wealth[-1])


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_statistics: np.ndarray
    r_squared: float
    n_obs: int
    names: tuple[str, ...] = ()

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.standard_errors[self.names.index(name)])

    def tstat(self, name: str) -> float:
        return float(self.t_statistics[self.names.index(name)])


@dataclass(frozen=True)
class CostScenario:
    cost_bps: float
    leverage_cap: float = 1.5

    def __post_init__(self):
        if self.cost_bps < 0:
            raise DomainError("cost_bps must be >= 0")


def portfolio_path(weights: WeightSeries, market: np.ndarray,
                   riskfree: np.ndarray) -> PortfolioPath:
    """Monthly return w*R + (1-w)*Rf and cumulative wealth from 1.0."""
    market = np.asarray(market, dtype=float)
    riskfree = np.asarray(riskfree, dtype=float)
    if len(market) != len(weights.weights) or len(riskfree) != len(weights.weights):
        raise AlignmentError("weights, market and riskfree must share months")
    w = weights.weights
    returns = w * market + (1.0 - w) * riskfree
    return PortfolioPath(weights.months, returns, w, riskfree)


def path_from_panel(weights: WeightSeries, panel: PredictorPanel) -> PortfolioPath:
    window = panel.window(weights.months[0], weights.months[-1])
    if len(window) != len(weights.weights):
        raise AlignmentError("panel does not cover the weight months")
    return portfolio_path(weights, window.aux["mkt"].to_numpy(),
                          window.aux["rf"].to_numpy())


def sharpe(path: PortfolioPath) -> tuple[float, float, float]:
    """(annual return, annual std, Sharpe on excess returns)."""
    r = path.strategy_return
    if len(r) < ANNUAL_FACTOR:
        raise UndefinedMetricError("need at least 12 months for annualized metrics")
    excess = path.excess_return
    # ptp, not std: summation error makes the std of a constant tiny nonzero
    if np.ptp(excess) == 0.0:
        raise UndefinedMetricError("zero excess-return volatility; Sharpe undefined")
    std_excess = np.std(excess, ddof=1)
    annual_return = ANNUAL_FACTOR * float(np.mean(r))
    annual_std = float(np.sqrt(ANNUAL_FACTOR) * np.std(r, ddof=1))
    ratio = float(ANNUAL_FACTOR * np.mean(excess) / (np.sqrt(ANNUAL_FACTOR) * std_excess))
    return annual_return, annual_std, ratio


def _power_utility(gross: np.ndarray, gamma: float) -> np.ndarray:
    if gamma == 1.0:
        return np.log(gross)
    return (gross ** (1.0 - gamma) - 1.0) / (1.0 - gamma)


def _inverse_power_utility(utility: float, gamma: float) -> float:
    if gamma == 1.0:
        return float(np.exp(utility))
    base = 1.0 + (1.0 - gamma) * utility
    if base <= 0:
        raise DomainError("mean utility outside the range of the utility function")
    return float(base ** (1.0 / (1.0 - gamma)))


def utility_metrics(path: PortfolioPath, gamma: float) -> tuple[float, float, float]:
    """(mean monthly utility, annual CE yield, terminal wealth).

    Each month's gross return is treated as the terminal wealth of a
    one-month problem; the CE is the inverse utility of the mean utility,
    annualized by geometric compounding.
    """
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    gross = 1.0 + path.strategy_return
    if np.any(gross <= 0):
        raise DomainError("nonpositive gross return; utility undefined")
    mean_utility = float(np.mean(_power_utility(gross, gamma)))
    ce_monthly = _inverse_power_utility(mean_utility, gamma) - 1.0
    ce_annual = (1.0 + ce_monthly) ** ANNUAL_FACTOR - 1.0
    return mean_utility, ce_annual, path.terminal_wealth


def drawdown(path: PortfolioPath) -> tuple[np.ndarray, float]:
    """Per-month drawdown (<= 0) from the running wealth maximum, and the max."""
    wealth = path.wealth
    dd = wealth / np.maximum.accumulate(wealth) - 1.0
    return dd, float(-dd.min())


def _ols_hc(y: np.ndarray, X: np.ndarray, names: tuple[str, ...],
            hc1: bool = False) -> RegressionFit:
    n, k = X.shape
    if n <= k:
        raise SingularityError(f"need n > {k} observations, got {n}")
    if np.linalg.matrix_rank(X) < k:
        raise SingularityError("regressors are collinear")
    xtx_inv = np.linalg.inv(X.T @ X)
    coef = xtx_inv @ (X.T @ y)
    resid = y - X @ coef
    meat = X.T @ (X * resid[:, None] ** 2)
    cov = xtx_inv @ meat @ xtx_inv
    if hc1:
        cov = cov * n / (n - k)
    se = np.sqrt(np.diag(cov))
    tss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / tss if tss > 0 else np.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0, coef / se, np.nan)
    return RegressionFit(coef, se, tstats, float(r2), n, names)


def alpha_regression(f_a: np.ndarray, f_b: np.ndarray, hc1: bool = False) -> RegressionFit:
    """OLS of strategy excess returns on benchmark excess returns, HC0 errors.

    The intercept and its error are monthly; annualize by multiplying by 12.
    """
    f_a = np.asarray(f_a, dtype=float)
    f_b = np.asarray(f_b, dtype=float)
    if f_a.shape != f_b.shape:
        raise AlignmentError("series must align")
    if np.std(f_b) == 0.0:
        raise SingularityError("benchmark excess return is constant")
    X = np.column_stack([np.ones(len(f_b)), f_b])
    return _ols_hc(f_a, X, ("alpha", "beta"), hc1=hc1)


def annualized_alpha(fit: RegressionFit) -> tuple[float, float]:
    """(alpha, SE) scaled to percent-free annual units (x12)."""
    return ANNUAL_FACTOR * fit.coef("alpha"), ANNUAL_FACTOR * fit.se("alpha")


def hm_test(f_a: np.ndarray, f_b: np.ndarray, hc1: bool = False) -> RegressionFit:
    """Timing test with an up-market term: f_a ~ 1 + f_b + max(0, f_b)."""
    f_a = np.asarray(f_a, dtype=float)
    f_b = np.asarray(f_b, dtype=float)
    if f_a.shape != f_b.shape:
        raise AlignmentError("series must align")
    up = np.maximum(0.0, f_b)
    X = np.column_stack([np.ones(len(f_b)), f_b, up])
    return _ols_hc(f_a, X, ("alpha", "beta", "gamma"), hc1=hc1)


def tm_test(f_a: np.ndarray, f_b: np.ndarray, hc1: bool = False) -> RegressionFit:
    """Timing test with a convexity term: f_a ~ 1 + f_b + f_b^2."""
    f_a = np.asarray(f_a, dtype=float)
    f_b = np.asarray(f_b, dtype=float)
    if f_a.shape != f_b.shape:
        raise AlignmentError("series must align")
    X = np.column_stack([np.ones(len(f_b)), f_b, f_b ** 2])
    return _ols_hc(f_a, X, ("alpha", "beta", "gamma"), hc1=hc1)


def turnover(weights: np.ndarray) -> np.ndarray:
    """Month-over-month absolute weight changes; the initial purchase is excluded."""
    w = np.asarray(weights, dtype=float)
    return np.abs(np.diff(w))


def post_cost_returns(strategy_return: np.ndarray, weights: np.ndarray,
                      cost_bps: float) -> np.ndarray:
    """Charge cost per unit turnover in the risky weight; month 1 trades free."""
    r = np.asarray(strategy_return, dtype=float).copy()
    r[1:] -= (cost_bps / 1e4) * turnover(weights)
    return r


def post_cost_alpha(path: PortfolioPath, market_excess: np.ndarray,
                    cost_bps: float) -> float:
    """Annualized alpha after charging the given per-unit-turnover cost."""
    net = post_cost_returns(path.strategy_return, path.weights, cost_bps)
    fit = alpha_regression(net - path.riskfree, market_excess)
    return ANNUAL_FACTOR * fit.coef("alpha")


def break_even_cost(path: PortfolioPath, market_excess: np.ndarray) -> float:
    """Cost (bps) at which the post-cost alpha is zero.

    Alpha is affine in the cost rate, so two evaluations pin the root
    exactly; returns inf when there is no turnover.
    """
    tw = turnover(path.weights)
    if np.all(tw == 0.0):
        return float("inf")
    a0 = post_cost_alpha(path, market_excess, 0.0)
    probe = 100.0
    a1 = post_cost_alpha(path, market_excess, probe)
    slope = (a1 - a0) / probe
    if slope == 0.0:
        return float("inf")
    return float(-a0 / slope)


def transaction_cost_table(weight_series: list[WeightSeries], market: np.ndarray,
                           riskfree: np.ndarray,
                           cost_grid_bps: tuple[float, ...] = (1.0, 10.0, 14.0)) -> pd.DataFrame:
    """Per strategy: mean turnover, gross E[R], alphas pre/post cost, break-even.

    E[R] is gross of costs. The break-even column makes the post-cost alpha
    exactly zero.
    """
    market = np.asarray(market, dtype=float)
    riskfree = np.asarray(riskfree, dtype=float)
    market_excess = market - riskfree
    rows = []
    for ws in weight_series:
        path = portfolio_path(ws, market, riskfree)
        tw = turnover(ws.weights)
        fit = alpha_regression(path.excess_return, market_excess)
        row = {
            "strategy": ws.label,
            "leverage_cap": ws.bounds[1],
            "mean_abs_dw": float(tw.mean()) if len(tw) else 0.0,
            "annual_return": ANNUAL_FACTOR * float(np.mean(path.strategy_return)),
            "alpha": ANNUAL_FACTOR * fit.coef("alpha"),
        }
        for cost in cost_grid_bps:
            row[f"alpha_{cost:g}bps"] = post_cost_alpha(path, market_excess, cost)
        row["break_even_bps"] = break_even_cost(path, market_excess)
        rows.append(row)
    return pd.DataFrame(rows)
