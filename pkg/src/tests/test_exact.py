from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src import exact
from src.baseline import portfolio_objective
from src.errors import DomainError, ResourceLimit, ShapeError
from src.exact import (MAX_EXACT_QUBITS, check_qubits, energies, full_spectrum, ground_state, k_smallest,
                       spectrum_difference_variance)
from src.polynomial import MultilinearPolynomial, VarKind
from src.problem import LAMBDA_SWEEP, QUBIT_RANGE, Order, compile, decode, generate_problems


def test_zero_polynomial(make_compiled):
    cp = make_compiled(MultilinearPolynomial.zero(VarKind.BINARY), 2)
    spectrum = full_spectrum(cp)
    assert spectrum.argmin_bits == "00"
    assert [b for b, _ in spectrum.values] == ["00", "01", "10", "11"]
    # asking for more states than exist returns them all
    assert k_smallest(cp, 5).values == spectrum.values


def test_single_linear_term(make_compiled):
    cp = make_compiled(MultilinearPolynomial(VarKind.BINARY, {(0,): -1.}), 2)
    spectrum = full_spectrum(cp)
    assert spectrum.min_energy == -1.
    assert spectrum.argmin_bits == "01"
    assert [b for b, _ in spectrum.values[:2]] == ["01", "11"]


def test_fixture_ground_state(dis_trv_compiled):
    alloc, spectrum = ground_state(dis_trv_compiled)
    assert alloc.z == (0, 3)
    assert alloc.budget_used == pytest.approx(720.09)
    assert decode(spectrum.argmin_bits, dis_trv_compiled).z == (0, 3)


def test_k_smallest_matches_sorted_spectrum(make_compiled, random_poly, monkeypatch):
    monkeypatch.setattr(exact, "CHUNK", 16)
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        cp = make_compiled(random_poly(rng, n, 15), n)
        full = full_spectrum(cp)
        for k in (1, 3, 2**n):
            part = k_smallest(cp, k)
            np.testing.assert_array_equal(part.indices, full.indices[:k])
            np.testing.assert_allclose(part.energies, full.energies[:k])


def test_k_smallest_breaks_ties_by_index(make_compiled, monkeypatch):
    monkeypatch.setattr(exact, "CHUNK", 4)
    cp = make_compiled(MultilinearPolynomial(VarKind.BINARY, {(0,): 1.}), 5)
    spectrum = k_smallest(cp, 10)
    assert list(spectrum.indices) == list(range(0, 20, 2))
    assert np.all(spectrum.energies == 0.)


def test_k_must_be_positive(dis_trv_compiled):
    with pytest.raises(DomainError):
        k_smallest(dis_trv_compiled, 0)


def test_ground_state_on_generated_problems(small_problems):
    for problem in small_problems:
        cp = compile(problem)
        E = energies(cp.binary_poly, cp.n_qubits)
        alloc, spectrum = ground_state(cp)
        assert spectrum.min_energy == E.min()
        assert int(spectrum.indices[0]) == int(np.argmin(E))
        assert alloc.z == decode(int(np.argmin(E)), cp).z


@pytest.mark.slow
def test_ground_state_up_to_fifteen_qubits(small_universe):
    problems = generate_problems(small_universe, seed=3, counts={q: 2 for q in QUBIT_RANGE})
    assert max(p.n_qubits for p in problems) == 15
    for problem in problems:
        cp = compile(problem)
        assert k_smallest(cp, 1).min_energy == full_spectrum(cp).min_energy


def test_budget_deviation_shrinks_as_penalty_grows(small_problems):
    for problem in small_problems:
        deviation = []
        for lam in LAMBDA_SWEEP:
            alloc, _ = ground_state(compile(problem.with_lambda(lam)))
            deviation.append(abs(alloc.leftover))
        assert all(b <= a + 1e-6 for a, b in zip(deviation, deviation[1:])), deviation


def test_qubo_and_hubo_agree_without_higher_moments(small_problems):
    for problem in small_problems[:5]:
        flat = replace(problem, moments=problem.moments.scaled(coskew=0., cokurt=0.))
        qubo = compile(flat.with_order(Order.QUBO))
        hubo = compile(flat.with_order(Order.HUBO))
        np.testing.assert_array_equal(energies(qubo.binary_poly, qubo.n_qubits),
                                      energies(hubo.binary_poly, hubo.n_qubits))
        assert spectrum_difference_variance(qubo, hubo) == 0.


def test_qubo_and_hubo_differ_by_higher_order_terms(small_problems):
    problem = small_problems[0]
    _, q1, q2 = problem.weights
    qubo = compile(problem.with_order(Order.QUBO))
    hubo = compile(problem.with_order(Order.HUBO))
    diff = energies(hubo.binary_poly, hubo.n_qubits) - energies(qubo.binary_poly, qubo.n_qubits)
    m = problem.moments
    for idx in range(2**hubo.n_qubits):
        z = decode(idx, hubo).z
        higher = portfolio_objective(z, m, 0., q1, q2) - portfolio_objective(z, m, 0., 0., 0.)
        assert diff[idx] == pytest.approx(higher, rel=1e-9, abs=1e-6)
    assert spectrum_difference_variance(qubo, hubo) > 0.


def test_register_limits(make_compiled, dis_trv_compiled):
    with pytest.raises(ResourceLimit) as e:
        check_qubits(MAX_EXACT_QUBITS + 1)
    assert e.value.limit == MAX_EXACT_QUBITS
    with pytest.raises(ShapeError):
        energies(MultilinearPolynomial.variable(VarKind.BINARY, 4), 3)
    with pytest.raises(ShapeError):
        spectrum_difference_variance(dis_trv_compiled, make_compiled(MultilinearPolynomial.zero(VarKind.BINARY), 2))


def test_spectrum_csv(dis_trv_compiled, tmp_path):
    path = str(tmp_path / "spectrum.csv")
    k_smallest(dis_trv_compiled, 4).to_csv(path)
    frame = pd.read_csv(path, dtype={"bitstring": str})
    assert list(frame.columns) == ["bitstring", "energy"]
    assert len(frame) == 4
    assert decode(frame.bitstring[0], dis_trv_compiled).z == (0, 3)
    assert frame.energy.is_monotonic_increasing
