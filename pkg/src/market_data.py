"""
    Price ingestion and per-asset return statistics.

    Prices come from a long-format CSV (`date,ticker,close`). Every series is
    validated at load time; a non-positive close is an error, never a silent drop,
    because dropping a row would shift every later return.
"""
import logging
import os
import typing as th
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import AlignmentError, DomainError, InsufficientData, PriceFileError

logger = logging.getLogger(__name__)

FREQUENCY = 252
CSV_COLUMNS = ["date", "ticker", "close"]


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    dates: th.Tuple[str, ...]
    closes: np.ndarray

    def __post_init__(self) -> None:
        closes = np.asarray(self.closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if closes.ndim != 1 or len(closes) != len(self.dates):
            raise AlignmentError(f"{self.ticker}: {len(self.dates)} dates but {closes.size} closes")
        if len(closes) < 2:
            raise InsufficientData(f"{self.ticker}: need at least 2 prices, got {len(closes)}")
        if not np.all(closes > 0):
            raise DomainError(f"{self.ticker}: closing prices must be positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DomainError(f"{self.ticker}: dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.closes)

    @property
    def latest(self) -> float:
        return float(self.closes[-1])

    def restrict(self, dates: th.Sequence[str]) -> "PriceSeries":
        keep = set(dates)
        idx = [i for i, d in enumerate(self.dates) if d in keep]
        return PriceSeries(self.ticker, tuple(self.dates[i] for i in idx), self.closes[idx])


@dataclass(frozen=True)
class ReturnSeries:
    ticker: str
    returns: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "returns", np.asarray(self.returns, dtype=float))

    def __len__(self) -> int:
        return len(self.returns)


def compute_returns(prices: PriceSeries) -> ReturnSeries:
    closes = prices.closes
    if len(closes) < 2:
        raise InsufficientData(f"{prices.ticker}: need at least 2 prices")
    return ReturnSeries(prices.ticker, (closes[1:] - closes[:-1]) / closes[:-1])


def arithmetic_mean(r: ReturnSeries, frequency: float = FREQUENCY) -> float:
    m = len(r)
    if m == 0:
        raise InsufficientData(f"{r.ticker}: empty return series")
    return float(frequency / m * np.sum(r.returns))


def geometric_mean(r: ReturnSeries, frequency: float = FREQUENCY) -> float:
    m = len(r)
    if m == 0:
        raise InsufficientData(f"{r.ticker}: empty return series")
    if np.any(r.returns <= -1):
        raise DomainError(f"{r.ticker}: a return of -100% or worse has no geometric mean")
    # (prod(1+r))^(f/m) - 1 evaluated in log space
    return float(np.expm1(frequency / m * np.sum(np.log1p(r.returns))))


def mean_return(r: ReturnSeries, frequency: float = FREQUENCY, method: str = "geometric") -> float:
    if method == "geometric":
        return geometric_mean(r, frequency)
    if method == "arithmetic":
        return arithmetic_mean(r, frequency)
    raise ValueError(f"unknown mean estimator {method!r}")


def align(series: th.Sequence[PriceSeries]) -> th.List[PriceSeries]:
    """Inner join on dates: keep only the dates every series has."""
    if not series:
        return []
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    dates = sorted(common)
    if len(dates) < 2:
        raise InsufficientData(f"only {len(dates)} common dates across {len(series)} series")
    dropped = max(len(s) for s in series) - len(dates)
    if dropped:
        logger.debug("alignment dropped %d dates", dropped)
    return [s.restrict(dates) for s in series]


def load_prices(path: str) -> th.List[PriceSeries]:
    if not os.path.exists(path):
        raise PriceFileError(f"price file {path} does not exist")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise PriceFileError(str(e)) from e
    except pd.errors.EmptyDataError as e:
        raise PriceFileError(f"{path} is empty") from e

    if list(df.columns) != CSV_COLUMNS:
        raise PriceFileError(f"header must be {','.join(CSV_COLUMNS)}, got {','.join(df.columns)}", line=1)
    if df.empty:
        raise PriceFileError(f"{path} has no price rows")

    # data rows start on line 2 of the file
    lines = df.index.to_numpy() + 2
    dates = pd.to_datetime(df["date"], format="%Y-%m-%d", errors="coerce")
    closes = pd.to_numeric(df["close"], errors="coerce")
    for mask, what in ((dates.isna(), "date is not YYYY-MM-DD"),
                       (closes.isna(), "close is not a number"),
                       (df["ticker"].str.strip() == "", "ticker is empty")):
        if mask.any():
            raise PriceFileError(what, line=int(lines[mask.to_numpy().argmax()]))
    bad = (closes <= 0).to_numpy()
    if bad.any():
        raise PriceFileError(f"non-positive close {closes[bad].iloc[0]}", line=int(lines[bad.argmax()]))

    frame = pd.DataFrame({
        "date": dates.dt.strftime("%Y-%m-%d"),
        "ticker": df["ticker"].str.strip(),
        "close": closes.astype(float),
        "line": lines,
    })
    dup = frame.duplicated(["date", "ticker"], keep="first").to_numpy()
    if dup.any():
        raise PriceFileError("duplicate (date, ticker) row", line=int(frame["line"][dup].iloc[0]))

    series = []
    for ticker, group in frame.groupby("ticker", sort=True):
        group = group.sort_values("date")
        try:
            series.append(PriceSeries(ticker, tuple(group["date"]), group["close"].to_numpy()))
        except InsufficientData as e:
            raise PriceFileError(str(e)) from e
    logger.info("loaded %d tickers from %s", len(series), path)
    return series


def write_prices(series: th.Sequence[PriceSeries], path: str) -> None:
    frame = pd.concat(
        [pd.DataFrame({"date": s.dates, "ticker": s.ticker, "close": s.closes}) for s in series],
        ignore_index=True,
    ).sort_values(["date", "ticker"], kind="mergesort")
    frame.to_csv(path, index=False)
    logger.info("saved %d tickers to %s", len(series), path)


def synthetic_universe(n_tickers: int = 30,
                       n_days: int = 756,
                       seed: int = 2015,
                       start: str = "2015-01-02") -> th.List[PriceSeries]:
    """
        Seeded geometric random walk with Poisson jumps.

        Jumps are skewed negative and fat tailed so that every series carries
        non-zero coskewness and excess cokurtosis. Price levels are spread
        log-uniformly over 20..600 to give a realistic range of share counts.
    """
    rng = np.random.default_rng(seed)
    dates = tuple(pd.bdate_range(start, periods=n_days + 1).strftime("%Y-%m-%d"))

    levels = np.exp(rng.uniform(np.log(20.0), np.log(600.0), n_tickers))
    drift = rng.normal(0.08, 0.10, n_tickers) / FREQUENCY
    vol = rng.uniform(0.15, 0.45, n_tickers) / np.sqrt(FREQUENCY)
    jump_rate = rng.uniform(0.005, 0.03, n_tickers)
    jump_mean = rng.normal(-0.02, 0.02, n_tickers)
    jump_std = rng.uniform(0.02, 0.06, n_tickers)

    # common market factor keeps the covariance matrix non-diagonal
    market = rng.standard_normal(n_days)
    beta = rng.uniform(0.3, 0.9, n_tickers)
    idio = rng.standard_normal((n_days, n_tickers))
    shocks = beta * market[:, None] + np.sqrt(1 - beta**2) * idio
    jumps = (rng.random((n_days, n_tickers)) < jump_rate) * rng.normal(jump_mean, jump_std, (n_days, n_tickers))

    log_returns = drift - vol**2 / 2 + vol * shocks + jumps
    paths = levels * np.exp(np.vstack([np.zeros(n_tickers), np.cumsum(log_returns, axis=0)]))
    paths = np.maximum(np.round(paths, 4), 0.01)

    return [PriceSeries(f"SYN{i:02d}", dates, paths[:, i]) for i in range(n_tickers)]
