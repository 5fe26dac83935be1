"""
    Moment structures of aligned return series: annualized mean vector and
    covariance, standardized coskewness and cokurtosis tensors.

    Higher moments use the expectation of the product of centred returns
    (1/m) over sigma products, sigma being the sample standard deviation with
    an (m - 1) denominator. They are dimensionless and never annualized.
"""
import itertools
import logging
import typing as th
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DegenerateAsset, InsufficientData, ShapeError
from .market_data import FREQUENCY, PriceSeries, ReturnSeries, align, compute_returns, mean_return

logger = logging.getLogger(__name__)

RAISE = "raise"
ZERO = "zero"


@dataclass(frozen=True)
class MomentSet:
    mu: np.ndarray
    cov: np.ndarray
    coskew: np.ndarray
    cokurt: np.ndarray
    sigma: np.ndarray
    tickers: th.Tuple[str, ...] = ()
    warnings: th.Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        for name in ("mu", "cov", "coskew", "cokurt", "sigma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.mu.shape[0]
        shapes = {
            "mu": (n,), "sigma": (n,), "cov": (n, n),
            "coskew": (n, n, n), "cokurt": (n, n, n, n),
        }
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.tickers and len(self.tickers) != n:
            raise ShapeError(f"{len(self.tickers)} tickers for {n} assets")
        object.__setattr__(self, "tickers", tuple(self.tickers))

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def subset(self, indices: th.Sequence[int]) -> "MomentSet":
        ix = list(indices)
        return MomentSet(
            mu=self.mu[ix],
            cov=self.cov[np.ix_(ix, ix)],
            coskew=self.coskew[np.ix_(ix, ix, ix)],
            cokurt=self.cokurt[np.ix_(ix, ix, ix, ix)],
            sigma=self.sigma[ix],
            tickers=tuple(self.tickers[i] for i in ix) if self.tickers else (),
        )

    def scaled(self, mu: float = 1., cov: float = 1., coskew: float = 1., cokurt: float = 1.) -> "MomentSet":
        return MomentSet(self.mu * mu, self.cov * cov, self.coskew * coskew, self.cokurt * cokurt,
                         self.sigma, self.tickers)

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "tickers": list(self.tickers),
            "mu": self.mu.tolist(),
            "cov": self.cov.tolist(),
            "coskew": self.coskew.tolist(),
            "cokurt": self.cokurt.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: th.Dict[str, th.Any]) -> "MomentSet":
        return cls(
            mu=d["mu"], cov=d["cov"], coskew=d["coskew"], cokurt=d["cokurt"],
            sigma=d["sigma"], tickers=tuple(d.get("tickers", ())),
        )


def _return_matrix(returns: th.Union[th.Sequence[ReturnSeries], np.ndarray]) -> np.ndarray:
    """Stack series as columns of an (m, n) matrix."""
    if isinstance(returns, np.ndarray):
        R = returns.astype(float)
        return R[:, None] if R.ndim == 1 else R
    if not returns:
        raise InsufficientData("no return series given")
    lengths = {len(r) for r in returns}
    if len(lengths) > 1:
        raise AlignmentError(f"return series have different lengths {sorted(lengths)}")
    return np.column_stack([r.returns for r in returns])


def _standardized(R: np.ndarray, on_degenerate: str) -> th.Tuple[np.ndarray, th.List[int]]:
    m = R.shape[0]
    if m < 3:
        raise InsufficientData(f"need at least 3 returns per series for co-moments, got {m}")
    X = R - R.mean(axis=0)
    sigma = R.std(axis=0, ddof=1)
    # constant columns are detected exactly; their float sigma can be a tiny non-zero
    live = np.ptp(R, axis=0) > 0
    degenerate = [int(i) for i in np.flatnonzero(~live)]
    if degenerate and on_degenerate == RAISE:
        raise DegenerateAsset(degenerate[0])
    U = np.zeros_like(X)
    U[:, live] = X[:, live] / sigma[live]
    return U, degenerate


def _symmetric_comoment(U: np.ndarray, order: int) -> np.ndarray:
    # one entry per multiset of indices, copied to every permutation, so the
    # tensor is exactly symmetric and each entry has a fixed summation order
    n = U.shape[1]
    T = np.zeros((n,) * order)
    for idx in itertools.combinations_with_replacement(range(n), order):
        value = np.mean(np.prod(U[:, list(idx)], axis=1))
        for perm in set(itertools.permutations(idx)):
            T[perm] = value
    return T


def covariance_matrix(returns: th.Union[th.Sequence[ReturnSeries], np.ndarray],
                      frequency: float = FREQUENCY) -> np.ndarray:
    R = _return_matrix(returns)
    m = R.shape[0]
    if m < 2:
        raise InsufficientData(f"need at least 2 returns per series, got {m}")
    X = R - R.mean(axis=0)
    c = frequency / (m - 1) * (X.T @ X)
    return (c + c.T) / 2


def coskewness_tensor(returns: th.Union[th.Sequence[ReturnSeries], np.ndarray],
                      on_degenerate: str = RAISE) -> np.ndarray:
    U, _ = _standardized(_return_matrix(returns), on_degenerate)
    return _symmetric_comoment(U, 3)


def cokurtosis_tensor(returns: th.Union[th.Sequence[ReturnSeries], np.ndarray],
                      on_degenerate: str = RAISE) -> np.ndarray:
    U, _ = _standardized(_return_matrix(returns), on_degenerate)
    return _symmetric_comoment(U, 4)


def moments_from_returns(returns: th.Sequence[ReturnSeries],
                         frequency: float = FREQUENCY,
                         mean: str = "geometric") -> MomentSet:
    R = _return_matrix(returns)
    tickers = tuple(r.ticker for r in returns)
    U, degenerate = _standardized(R, ZERO)
    warnings = []
    for i in degenerate:
        msg = f"{tickers[i]} has constant returns; its coskewness/cokurtosis entries are set to 0"
        logger.warning(msg)
        warnings.append(msg)
    return MomentSet(
        mu=np.array([mean_return(r, frequency, mean) for r in returns]),
        cov=covariance_matrix(R, frequency),
        coskew=_symmetric_comoment(U, 3),
        cokurt=_symmetric_comoment(U, 4),
        sigma=R.std(axis=0, ddof=1),
        tickers=tickers,
        warnings=tuple(warnings),
    )


def compute_moments(series: th.Sequence[PriceSeries],
                    frequency: float = FREQUENCY,
                    mean: str = "geometric") -> MomentSet:
    aligned = align(series)
    return moments_from_returns([compute_returns(s) for s in aligned], frequency, mean)
