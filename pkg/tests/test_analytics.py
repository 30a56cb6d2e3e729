import numpy as np
import pytest

from rewardrisk.allocation import WeightSeries
from rewardrisk.analytics import (
    alpha_regression,
    annualized_alpha,
    break_even_cost,
    drawdown,
    hm_test,
    path_from_panel,
    portfolio_path,
    post_cost_alpha,
    post_cost_returns,
    sharpe,
    tm_test,
    transaction_cost_table,
    turnover,
    utility_metrics,
)
from rewardrisk.errors import (
    AlignmentError,
    DomainError,
    SingularityError,
    UndefinedMetricError,
)
from rewardrisk.market_data import MonthStamp


def months_from(start, n):
    out = [start]
    for _ in range(n - 1):
        out.append(out[-1].next())
    return out


def make_path(weights, market, riskfree, gamma=4.0, bounds=(0.0, 1.5)):
    w = np.asarray(weights, dtype=float)
    ws = WeightSeries(months_from(MonthStamp(2000, 1), len(w)), w, gamma, bounds)
    return portfolio_path(ws, np.asarray(market, dtype=float),
                          np.asarray(riskfree, dtype=float))


class TestPortfolioPath:
    def test_return_blend(self):
        path = make_path([0.5], [0.10], [0.02])
        assert path.strategy_return[0] == pytest.approx(0.06)

    def test_levered_blend(self):
        path = make_path([1.5], [0.10], [0.02])
        # 1.5 * 0.10 - 0.5 * 0.02
        assert path.strategy_return[0] == pytest.approx(0.14)

    def test_wealth_is_cumulative_product(self):
        path = make_path([1.0, 1.0], [0.10, -0.10], [0.0, 0.0])
        np.testing.assert_allclose(path.wealth, [1.1, 0.99])
        assert path.terminal_wealth == pytest.approx(0.99)

    def test_alignment_enforced(self):
        ws = WeightSeries(months_from(MonthStamp(2000, 1), 2),
                          np.array([1.0, 1.0]), 4.0)
        with pytest.raises(AlignmentError):
            portfolio_path(ws, np.array([0.1]), np.array([0.0]))

    def test_path_from_panel_matches_direct(self, small_panels):
        ret_panel, _, _ = small_panels
        months = ret_panel.months[5:20]
        ws = WeightSeries(months, np.full(15, 0.7), 4.0)
        path = path_from_panel(ws, ret_panel)
        window = ret_panel.window(months[0], months[-1])
        direct = 0.7 * window.aux["mkt"].to_numpy() + 0.3 * window.aux["rf"].to_numpy()
        np.testing.assert_allclose(path.strategy_return, direct)


class TestSharpe:
    def test_alternating_returns_hand_value(self):
        # excess returns +-0.01: mean 0, so the ratio is exactly zero
        r = np.array([0.01, -0.01] * 6)
        path = make_path(np.ones(12), r, np.zeros(12))
        annual_return, annual_std, ratio = sharpe(path)
        assert annual_return == pytest.approx(0.0)
        assert annual_std == pytest.approx(np.sqrt(12) * np.std(r, ddof=1))
        assert ratio == pytest.approx(0.0)

    def test_derived_value(self):
        rng = np.random.default_rng(0)
        r = 0.005 + 0.03 * rng.normal(size=120)
        rf = np.full(120, 0.002)
        path = make_path(np.ones(120), r, rf)
        _, _, ratio = sharpe(path)
        want = 12 * np.mean(r - rf) / (np.sqrt(12) * np.std(r - rf, ddof=1))
        assert ratio == pytest.approx(want)

    def test_needs_twelve_months(self):
        path = make_path(np.ones(11), np.linspace(0, 0.1, 11), np.zeros(11))
        with pytest.raises(UndefinedMetricError):
            sharpe(path)

    def test_constant_excess_is_undefined(self):
        path = make_path(np.ones(12), np.full(12, 0.01), np.zeros(12))
        with pytest.raises(UndefinedMetricError):
            sharpe(path)


class TestUtility:
    def test_constant_stream_certainty_equivalent(self):
        # a sure 0.5% per month has CE (1.005)^12 - 1 at any gamma
        path = make_path(np.ones(12), np.full(12, 0.005), np.zeros(12))
        for gamma in (2.0, 4.0, 6.0):
            _, ce, tw = utility_metrics(path, gamma)
            assert ce == pytest.approx(1.005 ** 12 - 1, abs=1e-12)
            assert tw == pytest.approx(1.005 ** 12)

    def test_gamma_one_is_log_and_continuous(self):
        rng = np.random.default_rng(1)
        r = 0.004 + 0.02 * rng.normal(size=60)
        path = make_path(np.ones(60), r, np.zeros(60))
        u_log, ce_log, _ = utility_metrics(path, 1.0)
        assert u_log == pytest.approx(np.mean(np.log(1 + r)))
        _, ce_near, _ = utility_metrics(path, 1.0 + 1e-9)
        assert ce_near == pytest.approx(ce_log, abs=1e-6)

    def test_risk_aversion_lowers_ce(self):
        rng = np.random.default_rng(2)
        r = 0.004 + 0.04 * rng.normal(size=120)
        path = make_path(np.ones(120), r, np.zeros(120))
        ces = [utility_metrics(path, g)[1] for g in (2.0, 4.0, 6.0)]
        assert ces[0] > ces[1] > ces[2]

    def test_nonpositive_gross_return_rejected(self):
        path = make_path(np.ones(2), np.array([0.01, -1.0]), np.zeros(2))
        with pytest.raises(DomainError):
            utility_metrics(path, 4.0)


class TestDrawdown:
    def test_hand_path(self):
        # wealth 1, 2, 1: drawdowns 0, 0, -0.5
        path = make_path(np.ones(3), np.array([0.0, 1.0, -0.5]), np.zeros(3))
        dd, max_dd = drawdown(path)
        np.testing.assert_allclose(dd, [0.0, 0.0, -0.5])
        assert max_dd == pytest.approx(0.5)

    def test_monotone_wealth_has_zero_drawdown(self):
        path = make_path(np.ones(5), np.full(5, 0.01), np.zeros(5))
        dd, max_dd = drawdown(path)
        np.testing.assert_array_equal(dd, np.zeros(5))
        assert max_dd == 0.0


class TestRegressions:
    def _benchmark(self, n=120, seed=3):
        return 0.005 + 0.04 * np.random.default_rng(seed).normal(size=n)

    def test_exact_affine_fit(self):
        f_b = self._benchmark()
        f_a = 0.002 + 0.8 * f_b
        fit = alpha_regression(f_a, f_b)
        assert fit.coef("alpha") == pytest.approx(0.002, abs=1e-12)
        assert fit.coef("beta") == pytest.approx(0.8, abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        alpha, _ = annualized_alpha(fit)
        assert alpha == pytest.approx(0.024, abs=1e-10)

    def test_hc0_matches_dense_oracle(self):
        rng = np.random.default_rng(4)
        f_b = self._benchmark(20)
        f_a = 0.001 + 0.5 * f_b + 0.01 * rng.normal(size=20)
        fit = alpha_regression(f_a, f_b)
        X = np.column_stack([np.ones(20), f_b])
        coef = np.linalg.lstsq(X, f_a, rcond=None)[0]
        u = f_a - X @ coef
        bread = np.linalg.inv(X.T @ X)
        cov = bread @ (X.T @ np.diag(u ** 2) @ X) @ bread
        np.testing.assert_allclose(fit.standard_errors, np.sqrt(np.diag(cov)),
                                   atol=1e-12)

    def test_hc1_scales_hc0(self):
        f_b = self._benchmark(30)
        f_a = 0.3 * f_b + 0.01 * np.random.default_rng(5).normal(size=30)
        se0 = alpha_regression(f_a, f_b).standard_errors
        se1 = alpha_regression(f_a, f_b, hc1=True).standard_errors
        np.testing.assert_allclose(se1, se0 * np.sqrt(30 / (30 - 2)))

    def test_hm_recovers_planted_timing(self):
        f_b = self._benchmark()
        f_a = 0.5 * np.maximum(0.0, f_b)
        fit = hm_test(f_a, f_b)
        assert fit.coef("alpha") == pytest.approx(0.0, abs=1e-12)
        assert fit.coef("beta") == pytest.approx(0.0, abs=1e-10)
        assert fit.coef("gamma") == pytest.approx(0.5, abs=1e-10)

    def test_tm_recovers_planted_convexity(self):
        f_b = self._benchmark()
        f_a = f_b ** 2
        fit = tm_test(f_a, f_b)
        assert fit.coef("alpha") == pytest.approx(0.0, abs=1e-12)
        assert fit.coef("beta") == pytest.approx(0.0, abs=1e-9)
        assert fit.coef("gamma") == pytest.approx(1.0, abs=1e-9)

    def test_constant_benchmark_rejected(self):
        with pytest.raises(SingularityError):
            alpha_regression(np.ones(20), np.full(20, 0.01))


class TestCosts:
    def test_turnover_excludes_first_month(self):
        np.testing.assert_allclose(turnover(np.array([1.0, 0.8, 1.1])),
                                   [0.2, 0.3])

    def test_post_cost_returns_charge(self):
        r = np.array([0.01, 0.01, 0.01])
        w = np.array([1.0, 0.5, 1.0])
        net = post_cost_returns(r, w, cost_bps=100.0)
        np.testing.assert_allclose(net, [0.01, 0.01 - 0.01 * 0.5, 0.01 - 0.01 * 0.5])

    def test_constant_weights_trade_free(self):
        r = np.array([0.02, -0.01, 0.03])
        net = post_cost_returns(r, np.full(3, 0.9), cost_bps=50.0)
        np.testing.assert_array_equal(net, r)

    def _timed_path(self, n=120, seed=6):
        rng = np.random.default_rng(seed)
        market = 0.006 + 0.04 * rng.normal(size=n)
        rf = np.full(n, 0.002)
        w = np.clip(0.8 + 0.4 * rng.normal(size=n), 0.0, 1.5)
        # plant alpha by adding a market-orthogonal premium
        path = make_path(w, market, rf)
        bumped = path.strategy_return + 0.002
        path = type(path)(path.months, bumped, path.weights, path.riskfree)
        return path, market - rf

    def test_post_cost_alpha_decreases_in_cost(self):
        path, mex = self._timed_path()
        alphas = [post_cost_alpha(path, mex, c) for c in (0.0, 1.0, 10.0, 14.0)]
        assert np.all(np.diff(alphas) < 0)

    def test_break_even_zeroes_alpha(self):
        path, mex = self._timed_path()
        be = break_even_cost(path, mex)
        assert be > 0
        assert post_cost_alpha(path, mex, be) == pytest.approx(0.0, abs=1e-9)

    def test_break_even_infinite_without_turnover(self):
        path = make_path(np.full(24, 1.0),
                         0.005 + 0.03 * np.random.default_rng(7).normal(size=24),
                         np.zeros(24))
        assert break_even_cost(path, path.strategy_return) == np.inf

    def test_cost_table_hand_case(self):
        # alternating weights with |dw| = 0.2 each month; the strategy earns
        # a constant 20 bps over a noisy market, so alpha is 2.4% per year
        rng = np.random.default_rng(8)
        n = 240
        market = 0.005 + 0.04 * rng.normal(size=n)
        rf = np.zeros(n)
        w = np.where(np.arange(n) % 2 == 0, 1.0, 0.8)
        months = months_from(MonthStamp(1990, 1), n)
        ws = WeightSeries(months, w, 4.0)
        table = transaction_cost_table([ws], market, rf,
                                       cost_grid_bps=(1.0, 10.0, 14.0))
        row = table.iloc[0]
        assert row["mean_abs_dw"] == pytest.approx(0.2)
        # alpha is affine in the cost rate; the slope is 12 times the
        # intercept of the per-month cost drag regressed on market excess
        drag = np.where(np.arange(n) >= 1, 0.2 * 1e-4, 0.0)
        X = np.column_stack([np.ones(n), market - rf])
        drop_per_bp = 12 * np.linalg.lstsq(X, drag, rcond=None)[0][0]
        assert row["alpha"] - row["alpha_10bps"] == pytest.approx(
            10 * drop_per_bp, rel=1e-9)
        assert row["break_even_bps"] == pytest.approx(
            row["alpha"] / drop_per_bp, rel=1e-9)


class TestCostTable:
    def test_columns_and_order(self, small_panels):
        ret_panel, _, _ = small_panels
        months = ret_panel.months[5:45]
        window = ret_panel.window(months[0], months[-1])
        market = window.aux["mkt"].to_numpy()
        rf = window.aux["rf"].to_numpy()
        rng = np.random.default_rng(9)
        series = [
            WeightSeries(months, np.clip(rng.normal(0.8, 0.3, 40), 0, 1.5),
                         4.0, label="A"),
            WeightSeries(months, np.clip(rng.normal(0.5, 0.2, 40), 0, 1.0),
                         4.0, bounds=(0.0, 1.0), label="B"),
        ]
        table = transaction_cost_table(series, market, rf)
        assert list(table["strategy"]) == ["A", "B"]
        assert list(table["leverage_cap"]) == [1.5, 1.0]
        for col in ("mean_abs_dw", "annual_return", "alpha", "alpha_1bps",
                    "alpha_10bps", "alpha_14bps", "break_even_bps"):
            assert col in table.columns
