"""Shared synthetic market generator for the demo scripts.

Produces monthly predictor series and clustered daily returns in the same
shape the library ingests, with an optional planted linear signal linking
last month's dividend-price ratio to this month's excess return.
"""

import numpy as np

from rewardrisk.market_data import DailyReturns, MonthStamp, RawSeries

PREDICTORS = ["dp", "ep", "bm", "ntis", "tbl", "tms", "dfy", "infl",
              "corpr", "ltr", "svar"]


def make_market(n_months, seed=0, start=MonthStamp(1980, 1),
                signal_coef=0.0, days_per_month=21):
    rng = np.random.default_rng(seed)
    months = [start]
    for _ in range(n_months - 1):
        months.append(months[-1].next())

    predictors = {name: rng.normal(0, 0.01, n_months) for name in PREDICTORS}
    npy = rng.normal(0, 0.01, n_months)

    # log-AR(1) variance state gives persistent volatility clustering
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
        daily = rng.normal(mu / days_per_month,
                           sigma[t] / np.sqrt(days_per_month), days_per_month)
        daily_groups[months[t]] = daily
        excess[t] = daily.sum()

    series = {name: RawSeries(name, start, values)
              for name, values in predictors.items()}
    series["npy"] = RawSeries("npy", start, npy)
    series["rf"] = RawSeries("rf", start, rf)
    series["mkt"] = RawSeries("mkt", start, excess + rf)
    return series, DailyReturns(daily_groups), months
