"""
    Portfolio problem construction and compilation.

    The integer objective
        q2 K(z) - q1 S(z) + q0 z'cz - mu'z + lambda (z'p - C)^2
    is built over one integer variable per asset, substituted with the
    logarithmic binary encoding and mapped to spins. Assets whose price exceeds
    the capital get range 0 and no qubits.
"""
import itertools
import logging
import math
import typing as th
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import rng as rng_streams
from .baseline import Allocation, max_shares
from .errors import DomainError, GenerationError, InfeasibleProblem, ShapeError
from .market_data import FREQUENCY, PriceSeries, align, compute_returns
from .moments import MomentSet, moments_from_returns
from .polynomial import (IntegerEncoding, MultilinearPolynomial, VarKind, binary_expansion, binary_to_spin,
                         bits_needed, substitute_integer)

logger = logging.getLogger(__name__)

RISK_AVERSION = 3.
DEFAULT_LAMBDA = 1.
LAMBDA_SWEEP = (0.001, 0.01, 0.1, 0.9, 1.0, 10., 100., 1000.)
BUDGET_CAP = 6000
MAX_QUBITS = 15
QUBIT_RANGE = tuple(range(6, MAX_QUBITS + 1))

SLACK = -1


class Order(str, Enum):
    QUBO = "qubo"
    HUBO = "hubo"


def risk_weights(risk_aversion: float = RISK_AVERSION) -> th.Tuple[float, float, float]:
    """Edgeworth-expansion weights (q0, q1, q2) for variance, skewness and kurtosis."""
    return (risk_aversion / 2, risk_aversion / 6, risk_aversion / 24)


def share_ranges(prices: th.Sequence[float], capital: float) -> th.List[int]:
    return [max_shares(capital, p) for p in prices]


def qubit_count(prices: th.Sequence[float], capital: float) -> int:
    return sum(bits_needed(N) for N in share_ranges(prices, capital))


@dataclass(frozen=True)
class PortfolioProblem:
    tickers: th.Tuple[str, ...]
    prices: np.ndarray
    capital: float
    moments: MomentSet
    risk_aversion: float = RISK_AVERSION
    lam: float = DEFAULT_LAMBDA
    order: Order = Order.HUBO
    weights: th.Optional[th.Tuple[float, float, float]] = None
    problem_id: int = 0
    seed: th.Optional[int] = None
    slack: bool = False

    def __post_init__(self) -> None:
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "order", Order(self.order))
        if self.weights is None:
            object.__setattr__(self, "weights", risk_weights(self.risk_aversion))
        if prices.shape != (self.moments.n,) or len(self.tickers) != self.moments.n:
            raise ShapeError(f"{len(self.tickers)} tickers, {prices.size} prices, {self.moments.n} assets in moments")
        if not np.all(prices > 0):
            raise DomainError("latest prices must be positive")
        if not self.capital > 0:
            raise DomainError("capital must be positive")
        if not self.lam > 0:
            raise DomainError("lambda must be positive")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    @property
    def ranges(self) -> th.List[int]:
        return share_ranges(self.prices, self.capital)

    @property
    def n_qubits(self) -> int:
        """Asset qubits only; slack qubits are added at compile time."""
        return qubit_count(self.prices, self.capital)

    @property
    def active_weights(self) -> th.Tuple[float, float, float]:
        q0, q1, q2 = self.weights
        return (q0, 0., 0.) if self.order is Order.QUBO else (q0, q1, q2)

    def with_lambda(self, lam: float) -> "PortfolioProblem":
        return replace(self, lam=float(lam))

    def with_order(self, order: th.Union[Order, str]) -> "PortfolioProblem":
        return replace(self, order=Order(order))

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "id": self.problem_id,
            "tickers": list(self.tickers),
            "prices": self.prices.tolist(),
            "capital": self.capital,
            "risk_aversion": self.risk_aversion,
            "weights": list(self.weights),
            "lambda": self.lam,
            "order": self.order.value,
            "slack": self.slack,
            "seed": self.seed,
            "n_qubits": self.n_qubits,
            "moments": self.moments.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: th.Dict[str, th.Any]) -> "PortfolioProblem":
        return cls(
            tickers=tuple(d["tickers"]),
            prices=np.asarray(d["prices"], dtype=float),
            capital=float(d["capital"]),
            moments=MomentSet.from_dict(d["moments"]),
            risk_aversion=float(d.get("risk_aversion", RISK_AVERSION)),
            lam=float(d.get("lambda", DEFAULT_LAMBDA)),
            order=Order(d.get("order", Order.HUBO.value)),
            weights=tuple(d["weights"]) if d.get("weights") is not None else None,
            problem_id=int(d.get("id", 0)),
            seed=d.get("seed"),
            slack=bool(d.get("slack", False)),
        )

    @classmethod
    def from_series(cls,
                    series: th.Sequence[PriceSeries],
                    capital: float,
                    frequency: float = FREQUENCY,
                    mean: str = "geometric",
                    **kwargs: th.Any) -> "PortfolioProblem":
        aligned = align(series)
        moments = moments_from_returns([compute_returns(s) for s in aligned], frequency, mean)
        return cls(
            tickers=tuple(s.ticker for s in aligned),
            prices=np.array([s.latest for s in aligned]),
            capital=float(capital),
            moments=moments,
            **kwargs,
        )


@dataclass(frozen=True)
class CompiledProblem:
    problem: PortfolioProblem
    binary_poly: MultilinearPolynomial
    spin_poly: MultilinearPolynomial
    objective_poly: MultilinearPolynomial
    encoding: IntegerEncoding = field(compare=False)
    layout: th.Tuple[th.Tuple[int, int], ...]
    n_slack: int = 0

    @property
    def n_qubits(self) -> int:
        return len(self.layout)

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "problem": self.problem.to_dict(),
            "n_qubits": self.n_qubits,
            "layout": [list(slot) for slot in self.layout],
            "binary_poly": self.binary_poly.to_dict(),
            "spin_poly": self.spin_poly.to_dict(),
        }


def _integer_linear(coefs: th.Sequence[float], constant: float = 0., first_var: int = 0) -> MultilinearPolynomial:
    return MultilinearPolynomial(
        VarKind.INTEGER, {(first_var + i,): float(c) for i, c in enumerate(coefs)}, constant)


def build_objective(moments: MomentSet, q0: float, q1: float, q2: float) -> MultilinearPolynomial:
    """q2 K(z) - q1 S(z) + q0 z'cz - mu'z over integer variables z_0..z_{n-1}."""
    n = moments.n
    terms: th.Dict[th.Tuple[int, ...], float] = {}

    def accumulate(tensor: np.ndarray, weight: float, order: int) -> None:
        if weight == 0.:
            return
        if tensor.shape != (n,) * order:
            raise ShapeError(f"order-{order} tensor has shape {tensor.shape}, expected {(n,) * order}")
        for idx in itertools.product(range(n), repeat=order):
            coef = weight * tensor[idx]
            if coef != 0.:
                key = tuple(sorted(idx))
                terms[key] = terms.get(key, 0.) + coef

    accumulate(moments.cokurt, q2, 4)
    accumulate(moments.coskew, -q1, 3)
    accumulate(moments.cov, q0, 2)
    accumulate(moments.mu, -1., 1)
    return MultilinearPolynomial(VarKind.INTEGER, terms)


def add_budget_penalty(poly: MultilinearPolynomial,
                       prices: th.Sequence[float],
                       capital: float,
                       lam: float) -> MultilinearPolynomial:
    """poly + lambda (z'p - C)^2."""
    gap = _integer_linear(prices, -float(capital))
    return poly + lam * (gap * gap)


def add_slack_budget_penalty(poly: MultilinearPolynomial,
                             prices: th.Sequence[float],
                             capital: float,
                             lam: float) -> th.Tuple[MultilinearPolynomial, int]:
    """
        poly + lambda (z'p - sum_k c_k y_k)^2 where c = binary_expansion(floor C).

        Each slack bit y_k is an integer variable of range 1 placed after the
        asset variables, so the usual substitution turns it into one qubit.
    """
    if capital < 1:
        raise DomainError(f"slack encoding needs capital >= 1, got {capital}")
    n = len(prices)
    coefs = binary_expansion(int(math.floor(capital)))
    gap = _integer_linear(prices) - _integer_linear(coefs, first_var=n)
    return poly + lam * (gap * gap), len(coefs)


def compile(problem: PortfolioProblem) -> CompiledProblem:
    ranges = problem.ranges
    if not any(ranges):
        raise InfeasibleProblem(f"capital {problem.capital} buys no share of any asset")

    q0, q1, q2 = problem.active_weights
    objective = build_objective(problem.moments, q0, q1, q2)
    enc = IntegerEncoding.build(ranges)
    n_slack = 0
    if problem.slack:
        cost, n_slack = add_slack_budget_penalty(objective, problem.prices, problem.capital, problem.lam)
        enc.extend([1] * n_slack, offset=enc.n_bits, first_var=problem.n_assets)
    else:
        cost = add_budget_penalty(objective, problem.prices, problem.capital, problem.lam)

    binary = substitute_integer(cost, enc)
    layout = [None] * enc.n_bits
    for var, slots in enc.bits.items():
        for q, c in slots:
            layout[q] = (var if var < problem.n_assets else SLACK, c)

    logger.debug("compiled problem %d: %d qubits, %d binary terms",
                 problem.problem_id, enc.n_bits, len(binary))
    return CompiledProblem(
        problem=problem,
        binary_poly=binary,
        spin_poly=binary_to_spin(binary),
        objective_poly=substitute_integer(objective, enc),
        encoding=enc,
        layout=tuple(layout),
        n_slack=n_slack,
    )


def bits_of(bits: th.Union[str, int, th.Sequence[int]], n_qubits: int) -> np.ndarray:
    """
        Per-qubit 0/1 vector. A string is read Qiskit-style (rightmost
        character is qubit 0); an int is a basis-state index.
    """
    if isinstance(bits, str):
        if len(bits) != n_qubits or set(bits) - {"0", "1"}:
            raise DomainError(f"bitstring {bits!r} is not {n_qubits} binary digits")
        return np.array([int(ch) for ch in reversed(bits)], dtype=int)
    if isinstance(bits, (int, np.integer)):
        return (int(bits) >> np.arange(n_qubits)) & 1
    vec = np.asarray(bits, dtype=int)
    if vec.shape != (n_qubits,):
        raise DomainError(f"expected {n_qubits} bits, got {vec.shape}")
    return vec


def bitstring(index: int, n_qubits: int) -> str:
    return format(int(index), f"0{n_qubits}b") if n_qubits else ""


def decode(bits: th.Union[str, int, th.Sequence[int]], cp: CompiledProblem) -> Allocation:
    vec = bits_of(bits, cp.n_qubits)
    z = [0] * cp.problem.n_assets
    for q, (asset, coef) in enumerate(cp.layout):
        if asset != SLACK and vec[q]:
            z[asset] += coef
    return Allocation.from_shares(z, cp.problem.prices, cp.problem.capital)


def encode(z: th.Sequence[int], cp: CompiledProblem) -> str:
    """Bitstring whose decoded asset allocation is z (slack qubits left at 0)."""
    vec = np.zeros(cp.n_qubits, dtype=int)
    for asset, value in enumerate(z):
        slots = cp.encoding.bits.get(asset, [])
        N = cp.encoding.ranges.get(asset, 0)
        if not 0 <= value <= N:
            raise DomainError(f"asset {asset}: {value} shares outside range 0..{N}")
        if not slots:
            continue
        *powers, (last_q, last_c) = slots
        if value >= 2**len(powers):
            vec[last_q] = 1
            value -= last_c
        for k, (q, _) in enumerate(powers):
            vec[q] = (value >> k) & 1
    return bitstring(int(np.sum(vec << np.arange(cp.n_qubits))), cp.n_qubits)


@dataclass(frozen=True)
class GeneratorConfig:
    counts: th.Mapping[int, int] = field(default_factory=lambda: {q: 10 for q in QUBIT_RANGE})
    min_assets: int = 2
    max_assets: int = 10
    budget_cap: int = BUDGET_CAP
    max_qubits: int = MAX_QUBITS
    max_attempts: int = 2_000_000
    risk_aversion: float = RISK_AVERSION
    lam: float = DEFAULT_LAMBDA
    order: Order = Order.HUBO
    frequency: float = FREQUENCY
    mean: str = "geometric"


def generate_problems(universe: th.Sequence[PriceSeries],
                      seed: int,
                      counts: th.Optional[th.Mapping[int, int]] = None,
                      config: th.Optional[GeneratorConfig] = None) -> th.List[PortfolioProblem]:
    """
        Rejection sampling of random sub-portfolios and integer budgets until
        every requested qubit count has its quota. Problems are returned sorted
        by qubit count (then acceptance order) with ids 0..N-1.
    """
    config = config or GeneratorConfig()
    need = dict(counts if counts is not None else config.counts)
    if len(universe) < config.max_assets:
        raise GenerationError(f"universe has {len(universe)} tickers, need at least {config.max_assets}")

    aligned = align(universe)
    returns = [compute_returns(s) for s in aligned]
    latest = np.array([s.latest for s in aligned])
    gen = rng_streams.generator(seed, "generation")

    accepted: th.List[th.Tuple[int, th.List[int], int]] = []
    attempts = 0
    while any(v > 0 for v in need.values()):
        attempts += 1
        if attempts > config.max_attempts:
            missing = {q: v for q, v in need.items() if v > 0}
            raise GenerationError(f"sampling exhausted after {config.max_attempts} attempts, still missing {missing}")
        if attempts == config.max_attempts // 2:
            logger.warning("half the sampling budget used, still missing %s",
                           {q: v for q, v in need.items() if v > 0})
        k = int(gen.integers(config.min_assets, config.max_assets + 1))
        idx = sorted(int(i) for i in gen.choice(len(aligned), size=k, replace=False))
        low = int(math.ceil(latest[idx].min()))
        if low > config.budget_cap:
            continue
        budget = int(gen.integers(low, config.budget_cap + 1))
        q = qubit_count(latest[idx], budget)
        if q > config.max_qubits or need.get(q, 0) <= 0:
            continue
        need[q] -= 1
        accepted.append((q, idx, budget))
        logger.debug("accepted %d assets, budget %d, %d qubits (attempt %d)", k, budget, q, attempts)

    logger.info("generated %d problems in %d attempts", len(accepted), attempts)
    problems = []
    order = sorted(range(len(accepted)), key=lambda i: (accepted[i][0], i))
    for pid, i in enumerate(order):
        _, idx, budget = accepted[i]
        moments = moments_from_returns([returns[j] for j in idx], config.frequency, config.mean)
        problems.append(PortfolioProblem(
            tickers=tuple(aligned[j].ticker for j in idx),
            prices=latest[idx],
            capital=float(budget),
            moments=moments,
            risk_aversion=config.risk_aversion,
            lam=config.lam,
            order=config.order,
            problem_id=pid,
            seed=seed,
        ))
    return problems
