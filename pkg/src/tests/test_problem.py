import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from src.errors import DomainError, GenerationError, InfeasibleProblem, ShapeError
from src.eval_report import objective_value, penalized_cost
from src.exact import energies
from src.market_data import synthetic_universe
from src.moments import MomentSet
from src.polynomial import MultilinearPolynomial, VarKind, binary_expansion
from src.problem import (SLACK, GeneratorConfig, Order, PortfolioProblem, add_budget_penalty, add_slack_budget_penalty,
                         bits_of, build_objective, compile, decode, encode, generate_problems, risk_weights,
                         share_ranges)


def test_risk_weights():
    assert risk_weights(3.) == pytest.approx((1.5, 0.5, 0.125))


def test_single_asset_objective():
    ones = MomentSet([1.], [[1.]], [[[1.]]], [[[[1.]]]], [1.])
    poly = build_objective(ones, 1., 1., 1.)
    expected = MultilinearPolynomial(VarKind.INTEGER, {(0, 0, 0, 0): 1., (0, 0, 0): -1., (0, 0): 1., (0,): -1.})
    assert poly.allclose(expected)


def test_cross_terms_collect_permutations(dis_trv_problem):
    m = dis_trv_problem.moments
    poly = build_objective(m, 0., 0., 1.)
    assert poly.terms[(0, 0, 1, 1)] == pytest.approx(6 * m.cokurt[0, 0, 1, 1])
    assert poly.terms.get((0, 1, 1, 1), 0.) == pytest.approx(4 * m.cokurt[0, 1, 1, 1], abs=1e-12)


def test_budget_penalty_expansion():
    poly = add_budget_penalty(MultilinearPolynomial.zero(VarKind.INTEGER), [1.], 2., 1.)
    # (z - 2)^2
    assert poly.allclose(MultilinearPolynomial(VarKind.INTEGER, {(0, 0): 1., (0,): -4.}, 4.))


@pytest.mark.parametrize("capital, coefs", [(723., binary_expansion(723)), (1., [1]), (10.5, [1, 2, 4, 3])])
def test_slack_coefficients(capital, coefs):
    poly, n_slack = add_slack_budget_penalty(MultilinearPolynomial.zero(VarKind.INTEGER), [5.], capital, 1.)
    assert n_slack == len(coefs)
    # the -2 p z y_k cross terms carry the slack coefficients
    assert [poly.terms[(0, 1 + k)] for k in range(n_slack)] == pytest.approx([-10. * c for c in coefs])


def test_slack_needs_capital_of_one():
    with pytest.raises(DomainError):
        add_slack_budget_penalty(MultilinearPolynomial.zero(VarKind.INTEGER), [0.5], 0.5, 1.)


def test_slack_penalty_vanishes_exactly_when_budget_holds(make_problem):
    cp = compile(make_problem([3., 5.], 10., slack=True))
    assert cp.n_slack == 4
    assert cp.n_qubits == 2 + 2 + 4
    assert [slot[0] for slot in cp.layout[-4:]] == [SLACK] * 4
    E = energies(cp.binary_poly, cp.n_qubits)
    best = {}
    for idx, e in enumerate(E):
        z = decode(idx, cp).z
        best[z] = min(best.get(z, np.inf), e)
    for z, e in best.items():
        spent = 3 * z[0] + 5 * z[1]
        if spent <= 10:
            assert e == pytest.approx(0., abs=1e-9), z
        else:
            assert e >= 1. - 1e-9, z


def test_compile_fixture(dis_trv_compiled):
    cp = dis_trv_compiled
    assert cp.problem.ranges == [6, 3]
    assert cp.n_qubits == 5
    assert cp.layout == ((0, 1), (0, 2), (0, 3), (1, 1), (1, 2))
    assert cp.n_slack == 0


def test_unaffordable_assets_get_no_qubits(make_problem):
    cp = compile(make_problem([50., 1000., 30.], 100.))
    assert cp.problem.ranges == [2, 0, 3]
    assert cp.n_qubits == 4
    assert all(asset != 1 for asset, _ in cp.layout)


def test_nothing_affordable(make_problem):
    with pytest.raises(InfeasibleProblem):
        compile(make_problem([1000.], 500.))


def test_problem_validation(make_problem):
    with pytest.raises(DomainError):
        make_problem([-1., 2.], 10.)
    with pytest.raises(DomainError):
        make_problem([1., 2.], 0.)
    with pytest.raises(DomainError):
        make_problem([1., 2.], 10., lam=0.)
    with pytest.raises(ShapeError):
        PortfolioProblem(("A",), np.array([1., 2.]), 10., make_problem([1., 2.], 10.).moments)


def test_decode_fixture(dis_trv_compiled):
    empty = decode("00000", dis_trv_compiled)
    assert empty.z == (0, 0)
    assert empty.leftover == pytest.approx(723.)
    alloc = decode(encode((0, 3), dis_trv_compiled), dis_trv_compiled)
    assert alloc.z == (0, 3)
    assert alloc.budget_used == pytest.approx(720.09)
    assert alloc.leftover == pytest.approx(2.91)


def test_bitstrings_read_qubit_zero_on_the_right(dis_trv_compiled):
    assert list(bits_of("00001", 5)) == [1, 0, 0, 0, 0]
    assert decode("00001", dis_trv_compiled).z == (1, 0)
    assert decode(1, dis_trv_compiled).z == (1, 0)
    assert decode("11000", dis_trv_compiled).z == (0, 3)
    with pytest.raises(DomainError):
        bits_of("0012", 4)


def test_every_allocation_encodes_and_decodes(dis_trv_compiled):
    for z in itertools.product(range(7), range(4)):
        assert decode(encode(z, dis_trv_compiled), dis_trv_compiled).z == z
    with pytest.raises(DomainError):
        encode((7, 0), dis_trv_compiled)


def test_compiled_cost_matches_penalized_objective(small_problems):
    for problem in small_problems:
        for order in Order:
            cp = compile(problem.with_order(order))
            E = energies(cp.binary_poly, cp.n_qubits)
            np.testing.assert_allclose(energies(cp.spin_poly, cp.n_qubits), E, rtol=1e-9, atol=1e-9)
            q0, q1, q2 = cp.problem.active_weights
            for idx in range(0, 2**cp.n_qubits, 7):
                z = decode(idx, cp).z
                assert E[idx] == pytest.approx(penalized_cost(z, cp.problem), rel=1e-9, abs=1e-9)
                assert energies(cp.objective_poly, cp.n_qubits, idx, idx + 1)[0] == \
                    pytest.approx(-objective_value(z, problem.moments, q0, q1, q2), rel=1e-9, abs=1e-9)


def test_qubo_drops_higher_moments(small_problems):
    for problem in small_problems:
        assert compile(problem.with_order(Order.QUBO)).binary_poly.degree <= 2
        assert compile(problem.with_order(Order.HUBO)).binary_poly.degree == 4


def test_problem_json(dis_trv_problem):
    back = PortfolioProblem.from_dict(json.loads(json.dumps(dis_trv_problem.to_dict())))
    assert back.tickers == ("DIS", "TRV")
    assert back.n_qubits == 5
    assert back.lam == dis_trv_problem.lam
    np.testing.assert_array_equal(back.moments.cokurt, dis_trv_problem.moments.cokurt)


def test_generated_suite(small_problems):
    assert [p.problem_id for p in small_problems] == list(range(10))
    assert [p.n_qubits for p in small_problems] == [6] * 4 + [7] * 3 + [8] * 3
    for p in small_problems:
        assert 2 <= p.n_assets <= 10
        assert p.capital == int(p.capital) and p.capital <= 6000
        assert p.capital >= p.prices.min()
        assert p.seed == 7


def test_generation_is_seeded(small_universe, small_problems):
    again = generate_problems(small_universe, seed=7, counts={6: 4, 7: 3, 8: 3})
    assert [(p.tickers, p.capital) for p in again] == [(p.tickers, p.capital) for p in small_problems]
    other = generate_problems(small_universe, seed=8, counts={6: 4, 7: 3, 8: 3})
    assert [(p.tickers, p.capital) for p in other] != [(p.tickers, p.capital) for p in small_problems]


def test_generation_failures(small_universe):
    with pytest.raises(GenerationError):
        generate_problems(synthetic_universe(n_tickers=5, n_days=30, seed=1), seed=0, counts={6: 1})
    with pytest.raises(GenerationError):
        generate_problems(small_universe, seed=0, config=GeneratorConfig(counts={15: 20}, max_attempts=10))


def test_share_ranges_never_overspend():
    # 0.3 / 0.1 evaluates to 2.9999999999999996, and 3 * 0.1 exceeds 0.3
    assert share_ranges([0.1], 0.3) == [2]
    assert share_ranges([111.39, 240.03, 5.], 723.) == [6, 3, 144]
    rng = np.random.default_rng(12)
    for _ in range(200):
        p, k = float(rng.uniform(0.01, 50.)), int(rng.integers(1, 40))
        capital = k * p
        (N,) = share_ranges([p], capital)
        assert Fraction(N) * Fraction(p) <= Fraction(capital) < Fraction(N + 1) * Fraction(p)
