"""Monthly/daily data ingestion, realized variance, lagged panels, trimming, splits.

All panel construction is pure: a feature row for month t only uses values
observed through the end of month t-1. Panels are immutable by convention
(consumers never mutate the underlying frames).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    GapError,
    InsufficientDataError,
    RangeError,
    SchemaError,
)

GOYAL_WELCH_COLUMNS = [
    "dp", "ep", "bm", "ntis", "tbl", "tms", "dfy", "infl", "corpr", "ltr", "svar",
]

RETURN_MODEL = "return_model"
VOLATILITY_MODEL = "volatility_model"

MIN_DAILY_OBS = 10


@functools.total_ordering
@dataclass(frozen=True)
class MonthStamp:
    """A calendar month. Totally ordered, with a one-month successor."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be 1-12, got {self.month}")

    @property
    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "MonthStamp":
        return cls(ordinal // 12, ordinal % 12 + 1)

    @classmethod
    def from_yyyymm(cls, value: int | str) -> "MonthStamp":
        value = int(value)
        return cls(value // 100, value % 100)

    def next(self) -> "MonthStamp":
        return MonthStamp.from_ordinal(self.ordinal + 1)

    def __lt__(self, other: "MonthStamp") -> bool:
        return self.ordinal < other.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    def yyyymm(self) -> int:
        return self.year * 100 + self.month


@dataclass(frozen=True)
class RawSeries:
    """One named monthly series with contiguous coverage."""

    name: str
    start: MonthStamp
    values: np.ndarray  # 1-D, one entry per month from `start`

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> MonthStamp:
        return MonthStamp.from_ordinal(self.start.ordinal + len(self.values) - 1)

    def to_pandas(self) -> pd.Series:
        idx = np.arange(self.start.ordinal, self.start.ordinal + len(self.values))
        return pd.Series(self.values, index=idx, name=self.name)


class DailyReturns:
    """Daily excess returns grouped by month."""

    def __init__(self, groups: dict[MonthStamp, np.ndarray]):
        self._groups = {m: np.asarray(v, dtype=float) for m, v in groups.items()}

    def months(self) -> list[MonthStamp]:
        return sorted(self._groups)

    def group(self, month: MonthStamp) -> np.ndarray:
        return self._groups[month]

    def __contains__(self, month: MonthStamp) -> bool:
        return month in self._groups


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test boundaries (all inclusive ends)."""

    train_end: MonthStamp = MonthStamp(1957, 12)
    validation_end: MonthStamp = MonthStamp(1988, 12)
    test_end: MonthStamp = MonthStamp(2019, 12)

    def __post_init__(self):
        if not self.train_end < self.validation_end < self.test_end:
            raise RangeError(
                "split boundaries must satisfy train_end < validation_end < test_end"
            )


@dataclass(frozen=True)
class PredictorPanel:
    """Aligned monthly features and targets with lags materialized.

    `features` rows at month t hold only values observed through t-1.
    `aux` carries per-month market return, risk-free return, excess return
    and realized variance (of month t itself) for allocation and analytics.
    Both frames share an integer index of month ordinals.
    """

    target_kind: str
    features: pd.DataFrame
    target: np.ndarray
    aux: pd.DataFrame
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        if not self.feature_names:
            object.__setattr__(self, "feature_names", list(self.features.columns))

    def __len__(self) -> int:
        return len(self.features)

    @property
    def months(self) -> list[MonthStamp]:
        return [MonthStamp.from_ordinal(int(o)) for o in self.features.index]

    @property
    def start(self) -> MonthStamp:
        return MonthStamp.from_ordinal(int(self.features.index[0]))

    @property
    def end(self) -> MonthStamp:
        return MonthStamp.from_ordinal(int(self.features.index[-1]))

    def _subset(self, mask: np.ndarray) -> "PredictorPanel":
        return PredictorPanel(
            target_kind=self.target_kind,
            features=self.features.loc[mask],
            target=self.target[mask],
            aux=self.aux.loc[mask],
            feature_names=self.feature_names,
        )

    def window(self, start: MonthStamp | None, end: MonthStamp | None) -> "PredictorPanel":
        idx = self.features.index.to_numpy()
        mask = np.ones(len(idx), dtype=bool)
        if start is not None:
            mask &= idx >= start.ordinal
        if end is not None:
            mask &= idx <= end.ordinal
        return self._subset(mask)

    def rows_before(self, month: MonthStamp) -> "PredictorPanel":
        return self._subset(self.features.index.to_numpy() < month.ordinal)


def _read_table(path, delimiter: str) -> pd.DataFrame:
    return pd.read_csv(path, sep=delimiter, header=0)


def load_monthly(path, schema: dict[str, str] | None = None,
                 date_column: str = "date", delimiter: str = ",") -> dict[str, RawSeries]:
    """Load a delimited monthly table into named RawSeries.

    `schema` maps series names to file column names; by default every
    non-date column is loaded under its own name. Dates must be yyyymm and
    contiguous.
    """
    frame = _read_table(path, delimiter)
    if date_column not in frame.columns:
        raise SchemaError(f"missing date column {date_column!r} in {path}")
    if schema is None:
        schema = {c: c for c in frame.columns if c != date_column}

    months = [MonthStamp.from_yyyymm(v) for v in frame[date_column]]
    ordinals = np.array([m.ordinal for m in months])
    if len(ordinals) == 0:
        raise SchemaError(f"empty table in {path}")
    steps = np.diff(ordinals)
    if np.any(steps <= 0):
        raise GapError(f"dates not strictly increasing in {path}")
    if np.any(steps > 1):
        i = int(np.argmax(steps > 1))
        missing = months[i].next()
        raise GapError(
            f"gap in monthly dates in {path}: first missing month {missing}",
            first_missing=missing,
        )

    out = {}
    for name, column in schema.items():
        if column not in frame.columns:
            raise SchemaError(f"missing column {column!r} (series {name!r}) in {path}")
        out[name] = RawSeries(name=name, start=months[0],
                              values=frame[column].to_numpy(dtype=float))
    return out


def load_daily(path, date_column: str = "date", return_column: str = "mktrf",
               delimiter: str = ",") -> DailyReturns:
    """Load daily excess returns (yyyymmdd dates) grouped by month."""
    frame = _read_table(path, delimiter)
    for col in (date_column, return_column):
        if col not in frame.columns:
            raise SchemaError(f"missing column {col!r} in {path}")
    dates = frame[date_column].astype(int)
    groups: dict[MonthStamp, np.ndarray] = {}
    key = dates // 100
    for yyyymm, chunk in frame.groupby(key, sort=True):
        days = chunk[date_column].astype(int) % 100
        if np.any(np.diff(days.to_numpy()) <= 0):
            raise GapError(f"day order not strictly increasing in month {yyyymm} of {path}")
        groups[MonthStamp.from_yyyymm(int(yyyymm))] = chunk[return_column].to_numpy(dtype=float)
    return DailyReturns(groups)


def realized_variance(daily_returns: np.ndarray) -> float:
    """Within-month sum of squared deviations of daily excess returns.

    Uses the actual number of trading days present; equals (n-1) times the
    sample variance of the daily returns.
    """
    r = np.asarray(daily_returns, dtype=float)
    if r.size < MIN_DAILY_OBS:
        raise InsufficientDataError(
            f"need at least {MIN_DAILY_OBS} daily observations, got {r.size}"
        )
    if np.ptp(r) == 0.0:
        return 0.0
    return float(np.sum((r - r.mean()) ** 2))


def monthly_realized_variances(daily: DailyReturns) -> pd.Series:
    """Realized variance per month, indexed by month ordinal."""
    months = daily.months()
    values = [realized_variance(daily.group(m)) for m in months]
    return pd.Series(values, index=[m.ordinal for m in months], dtype=float)


def build_panel(series: dict[str, RawSeries], daily: DailyReturns,
                target: str) -> PredictorPanel:
    """Assemble the lagged feature panel for one model family.

    Required series: `mkt`, `rf`, the eleven Goyal-Welch predictors, and
    `npy` for the return panel. Rows lacking lag-3 history are dropped from
    the front, never imputed.
    """
    if target not in (RETURN_MODEL, VOLATILITY_MODEL):
        raise SchemaError(f"unknown target kind {target!r}")

    required = ["mkt", "rf"] + GOYAL_WELCH_COLUMNS
    if target == RETURN_MODEL:
        required.append("npy")
    missing = [c for c in required if c not in series]
    if missing:
        raise SchemaError(f"missing required series: {missing}")

    # keep the full union of months here: a row at month t must only ever
    # require predictor values through t-1, so NaN filtering happens after
    # the shifts
    table = pd.DataFrame({name: series[name].to_pandas() for name in required})
    rv = monthly_realized_variances(daily)

    excess = table["mkt"] - table["rf"]
    features = pd.DataFrame(index=table.index)
    for col in GOYAL_WELCH_COLUMNS:
        features[col] = table[col].shift(1)
    features["ret_lag1"] = excess.shift(1)
    if target == RETURN_MODEL:
        for k in (1, 2, 3):
            features[f"npy_lag{k}"] = table["npy"].shift(k)
    else:
        for k in (1, 2, 3):
            features[f"vol_lag{k}"] = rv.reindex(table.index).shift(k)

    aux = pd.DataFrame({
        "mkt": table["mkt"],
        "rf": table["rf"],
        "excess": excess,
        "rv": rv.reindex(table.index),
    })

    keep = features.notna().all(axis=1) & aux.notna().all(axis=1)
    # lag warm-up must only ever remove a contiguous prefix
    features = features.loc[keep]
    aux = aux.loc[keep]

    if target == RETURN_MODEL:
        y = aux["excess"].to_numpy()
    else:
        y = np.sqrt(aux["rv"].to_numpy())

    return PredictorPanel(target_kind=target, features=features, target=y, aux=aux)


def trim_outliers(panel: PredictorPanel, quantile: float = 0.90) -> PredictorPanel:
    """Drop rows whose absolute excess return exceeds the given quantile.

    Only ever applied to a training window offered to the return model; ties
    at the cutoff are kept so the result is order independent.
    """
    if not 0.0 < quantile <= 1.0:
        raise ValueError(f"quantile must be in (0, 1], got {quantile}")
    if len(panel) == 0 or quantile == 1.0:
        return panel
    abs_excess = np.abs(panel.aux["excess"].to_numpy())
    cutoff = np.quantile(abs_excess, quantile)
    return panel._subset(abs_excess <= cutoff)


def split(panel: PredictorPanel, spec: SplitSpec) -> tuple[PredictorPanel, PredictorPanel, PredictorPanel]:
    """Chronological, disjoint, exhaustive partition at the spec boundaries."""
    if spec.train_end.ordinal < panel.start.ordinal or spec.test_end.ordinal > panel.end.ordinal:
        raise RangeError(
            f"split boundaries ({spec.train_end}..{spec.test_end}) outside panel "
            f"range ({panel.start}..{panel.end})"
        )
    train = panel.window(None, spec.train_end)
    validation = panel.window(spec.train_end.next(), spec.validation_end)
    test = panel.window(spec.validation_end.next(), spec.test_end)
    for name, part in (("train", train), ("validation", validation), ("test", test)):
        if len(part) == 0:
            raise RangeError(f"{name} partition is empty for spec {spec}")
    return train, validation, test
