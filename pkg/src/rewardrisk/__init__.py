"""Reward-risk market timing with walk-forward machine learning forecasts."""

from .market_data import (
    MonthStamp,
    PredictorPanel,
    RawSeries,
    SplitSpec,
    build_panel,
    load_daily,
    load_monthly,
    realized_variance,
    split,
    trim_outliers,
)
from .learners import (
    BaselineConfig,
    Dataset,
    ElasticNetConfig,
    ForestConfig,
    OLSConfig,
    fit_baseline,
    fit_elastic_net,
    fit_forest,
    fit_model,
    fit_ols,
    fit_tree,
)
from .walkforward import (
    AccuracyReport,
    ForecastSeries,
    TuningGrid,
    WalkForecast,
    directional_accuracy,
    make_forecast_series,
    oos_r_squared,
    tune,
    walk_forecast,
)
from .allocation import (
    StrategyId,
    WeightSeries,
    base_weights,
    optimal_weight,
    strategy_grid,
    strategy_weights,
    vol_timing_constant_weights,
)
from .analytics import (
    PortfolioPath,
    RegressionFit,
    alpha_regression,
    break_even_cost,
    drawdown,
    hm_test,
    portfolio_path,
    sharpe,
    tm_test,
    transaction_cost_table,
    utility_metrics,
)
from .explain import ShapExplanation, explain, mean_attributions, shap_kernel_weight

__version__ = "0.1.0"
