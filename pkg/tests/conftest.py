import numpy as np
import pytest

from rewardrisk.market_data import (
    RETURN_MODEL,
    VOLATILITY_MODEL,
    DailyReturns,
    MonthStamp,
    RawSeries,
    build_panel,
)

GW = ["dp", "ep", "bm", "ntis", "tbl", "tms", "dfy", "infl", "corpr", "ltr", "svar"]


def make_series(name, start, values):
    return RawSeries(name=name, start=start, values=np.asarray(values, dtype=float))


def synthetic_market(n_months, seed=0, start=MonthStamp(1990, 1),
                     signal_coef=0.0, days_per_month=21):
    """Random monthly series + clustered daily returns.

    With signal_coef != 0 the market excess return loads on last month's dp,
    planting a linear signal the return models can recover.
    """
    rng = np.random.default_rng(seed)
    months = [start]
    for _ in range(n_months - 1):
        months.append(months[-1].next())

    predictors = {name: rng.normal(0, 1, n_months) * 0.01 for name in GW}
    npy = rng.normal(0, 1, n_months) * 0.01

    # log-AR(1) volatility state gives realistic clustering
    log_var = np.empty(n_months)
    log_var[0] = np.log(0.0016)
    for t in range(1, n_months):
        log_var[t] = 0.9 * log_var[t - 1] + 0.1 * np.log(0.0016) + 0.4 * rng.normal()
    sigma = np.sqrt(np.exp(log_var))

    rf = np.full(n_months, 0.002)
    excess = np.empty(n_months)
    daily_groups = {}
    for t in range(n_months):
        mu = 0.004
        if signal_coef != 0.0 and t > 0:
            mu += signal_coef * predictors["dp"][t - 1]
        daily_sigma = sigma[t] / np.sqrt(days_per_month)
        daily = rng.normal(mu / days_per_month, daily_sigma, days_per_month)
        daily_groups[months[t]] = daily
        excess[t] = daily.sum()

    series = {name: make_series(name, start, values)
              for name, values in predictors.items()}
    series["npy"] = make_series("npy", start, npy)
    series["rf"] = make_series("rf", start, rf)
    series["mkt"] = make_series("mkt", start, excess + rf)
    return series, DailyReturns(daily_groups), months


@pytest.fixture
def small_panels():
    series, daily, months = synthetic_market(60, seed=7)
    return (build_panel(series, daily, RETURN_MODEL),
            build_panel(series, daily, VOLATILITY_MODEL),
            months)
