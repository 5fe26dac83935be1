import itertools
import os
import typing as th

import numpy as np
import pytest

from src.market_data import load_prices, synthetic_universe
from src.moments import MomentSet
from src.polynomial import IntegerEncoding, MultilinearPolynomial, VarKind, binary_to_spin
from src.problem import CompiledProblem, PortfolioProblem, compile, generate_problems

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data")
DIS_TRV = os.path.join(DATA_DIR, "dis_trv.csv")
EXAMPLE_CAPITAL = 723.


@pytest.fixture(scope="session")
def dis_trv_series():
    return load_prices(DIS_TRV)


@pytest.fixture(scope="session")
def dis_trv_problem(dis_trv_series) -> PortfolioProblem:
    return PortfolioProblem.from_series(dis_trv_series, EXAMPLE_CAPITAL)


@pytest.fixture(scope="session")
def dis_trv_compiled(dis_trv_problem) -> CompiledProblem:
    return compile(dis_trv_problem)


@pytest.fixture(scope="session")
def small_universe():
    return synthetic_universe(n_tickers=12, n_days=250, seed=11)


@pytest.fixture(scope="session")
def small_problems(small_universe) -> th.List[PortfolioProblem]:
    """Ten generated instances of 6 to 8 qubits."""
    return generate_problems(small_universe, seed=7, counts={6: 4, 7: 3, 8: 3})


@pytest.fixture
def make_compiled(dis_trv_problem):
    """CompiledProblem around an arbitrary binary cost polynomial."""

    def build(binary: MultilinearPolynomial, n_qubits: int) -> CompiledProblem:
        return CompiledProblem(
            problem=dis_trv_problem,
            binary_poly=binary,
            spin_poly=binary_to_spin(binary),
            objective_poly=binary,
            encoding=IntegerEncoding(),
            layout=tuple((0, 1) for _ in range(n_qubits)),
        )

    return build


def random_binary_poly(rng: np.random.Generator, n_vars: int, n_terms: int, max_degree: int = 4) -> MultilinearPolynomial:
    terms = {}
    for _ in range(n_terms):
        k = int(rng.integers(1, min(max_degree, n_vars) + 1))
        key = tuple(sorted(rng.choice(n_vars, size=k, replace=False).tolist()))
        terms[key] = float(rng.normal())
    return MultilinearPolynomial(VarKind.BINARY, terms, float(rng.normal()))


@pytest.fixture
def random_poly():
    return random_binary_poly


def zero_moments(n: int) -> MomentSet:
    return MomentSet(np.zeros(n), np.zeros((n, n)), np.zeros((n,) * 3), np.zeros((n,) * 4), np.ones(n))


@pytest.fixture
def make_problem():
    """PortfolioProblem over hand-picked prices; moments default to all zeros."""

    def build(prices: th.Sequence[float],
              capital: float,
              moments: th.Optional[MomentSet] = None,
              **kwargs: th.Any) -> PortfolioProblem:
        n = len(prices)
        return PortfolioProblem(
            tickers=tuple(f"T{i}" for i in range(n)),
            prices=np.asarray(prices, dtype=float),
            capital=float(capital),
            moments=moments if moments is not None else zero_moments(n),
            **kwargs,
        )

    return build


@pytest.fixture(scope="session")
def symmetric_moments() -> MomentSet:
    """Two interchangeable assets with a strictly convex objective on the simplex."""
    K = np.zeros((2,) * 4)
    for idx in itertools.product(range(2), repeat=4):
        counts = sorted(idx.count(i) for i in range(2))
        if counts == [0, 4]:
            K[idx] = 3.
        elif counts == [2, 2]:
            K[idx] = 1.
    return MomentSet(
        mu=np.array([0.1, 0.1]),
        cov=np.array([[0.04, 0.01], [0.01, 0.04]]),
        coskew=np.zeros((2, 2, 2)),
        cokurt=K,
        sigma=np.ones(2),
        tickers=("A", "B"),
    )
