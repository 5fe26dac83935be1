"""
    Exact diagonal solver.

    Every term of the cost Hamiltonian is a product of Z operators, so the
    computational basis is its eigenbasis and the spectrum is the cost
    polynomial evaluated on all 2^n bitstrings.
"""
import heapq
import logging
import typing as th
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .baseline import Allocation
from .errors import DomainError, ResourceLimit, ShapeError
from .polynomial import MultilinearPolynomial, VarKind
from .problem import CompiledProblem, bitstring, decode

logger = logging.getLogger(__name__)

MAX_EXACT_QUBITS = 20
CHUNK = 1 << 14


def check_qubits(n_qubits: int, limit: int = MAX_EXACT_QUBITS) -> None:
    if n_qubits > limit:
        raise ResourceLimit(n_qubits, limit)


def energies(poly: MultilinearPolynomial,
             n_qubits: int,
             start: int = 0,
             stop: th.Optional[int] = None) -> np.ndarray:
    """Energies of basis states start..stop-1 (qubit q is bit q of the index)."""
    check_qubits(n_qubits)
    if poly.n_vars > n_qubits:
        raise ShapeError(f"polynomial uses {poly.n_vars} variables, register has {n_qubits}")
    if poly.kind is VarKind.INTEGER:
        raise DomainError("integer polynomials have no basis-state energies")
    stop = 2**n_qubits if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.full(idx.size, poly.constant)
    for key, coef in poly:
        if poly.kind is VarKind.BINARY:
            mask = sum(1 << q for q in key)
            out += coef * ((idx & mask) == mask)
        else:
            sign = np.ones(idx.size)
            for q in key:
                sign *= 1 - 2 * ((idx >> q) & 1)
            out += coef * sign
    return out


@dataclass(frozen=True)
class Spectrum:
    n_qubits: int
    indices: np.ndarray
    energies: np.ndarray

    def __len__(self) -> int:
        return self.indices.size

    @property
    def values(self) -> th.List[th.Tuple[str, float]]:
        return [(bitstring(i, self.n_qubits), float(e)) for i, e in zip(self.indices, self.energies)]

    @property
    def min_energy(self) -> float:
        return float(self.energies[0])

    @property
    def argmin_bits(self) -> str:
        return bitstring(int(self.indices[0]), self.n_qubits)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bitstring": [bitstring(i, self.n_qubits) for i in self.indices],
            "energy": self.energies,
        })

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g")


def _sorted_spectrum(n_qubits: int, E: np.ndarray) -> Spectrum:
    # stable sort keeps ascending index (= lexicographic bitstring) among equal energies
    order = np.argsort(E, kind="stable")
    return Spectrum(n_qubits, order.astype(np.int64), E[order])


def full_spectrum(cp: CompiledProblem) -> Spectrum:
    E = energies(cp.binary_poly, cp.n_qubits)
    logger.debug("enumerated %d states", E.size)
    return _sorted_spectrum(cp.n_qubits, E)


def k_smallest(cp: CompiledProblem, k: int) -> Spectrum:
    """Exact k lowest states by chunked enumeration and a bounded max-heap."""
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    n = cp.n_qubits
    check_qubits(n)
    total = 2**n
    heap: th.List[th.Tuple[float, int]] = []
    for start in range(0, total, CHUNK):
        stop = min(start + CHUNK, total)
        E = energies(cp.binary_poly, n, start, stop)
        take = min(k, E.size)
        # chunk-local candidates; ties at the cut are resolved by the heap order
        cand = np.argpartition(E, take - 1)[:take] if take < E.size else np.arange(E.size)
        cut = E[cand].max()
        cand = np.flatnonzero(E <= cut)
        for j in cand:
            item = (-float(E[j]), -(start + int(j)))
            if len(heap) < k:
                heapq.heappush(heap, item)
            elif item > heap[0]:
                heapq.heapreplace(heap, item)
    kept = sorted((-e, -i) for e, i in heap)
    return Spectrum(n, np.array([i for _, i in kept], dtype=np.int64), np.array([e for e, _ in kept]))


def ground_state(cp: CompiledProblem) -> th.Tuple[Allocation, Spectrum]:
    spectrum = k_smallest(cp, 1)
    return decode(spectrum.argmin_bits, cp), spectrum


def spectrum_difference_variance(a: CompiledProblem, b: CompiledProblem) -> float:
    """Variance over all basis states of E_a(b) - E_b(b)."""
    if a.n_qubits != b.n_qubits:
        raise ShapeError(f"registers differ: {a.n_qubits} vs {b.n_qubits} qubits")
    return float(np.var(energies(a.binary_poly, a.n_qubits) - energies(b.binary_poly, b.n_qubits)))
