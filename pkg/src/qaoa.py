"""
    QAOA statevector simulation for diagonal cost polynomials.

    Conventions:
        Rz(t) = exp(-i t Z / 2), Rx(t) = exp(-i t X / 2)
        phase layer  exp(-i gamma E), one Rz(2 gamma alpha_S) per spin term
        mixer layer  exp(-i beta X) on every qubit, i.e. Rx(2 beta)
    Parameters are laid out as (gamma_1..gamma_p, beta_1..beta_p). Basis index
    bit q is qubit q.
"""
import logging
import typing as th
from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_streams
from .circuit import CircuitMetrics, Gate, circuit_metrics
from .errors import DomainError, ResourceLimit
from .exact import check_qubits, energies
from .polynomial import MultilinearPolynomial, VarKind
from .problem import CompiledProblem, bitstring

logger = logging.getLogger(__name__)

MAX_GATE_QUBITS = 14
INIT_SCALE = 0.1


@dataclass(frozen=True)
class QaoaConfig:
    p: int = 1
    initial_params: th.Optional[th.Tuple[float, ...]] = None
    seed: int = 0
    shots: int = 0

    def __post_init__(self) -> None:
        if self.p < 0:
            raise DomainError(f"layer count must be non-negative, got {self.p}")
        if self.shots < 0:
            raise DomainError(f"shots must be non-negative, got {self.shots}")
        if self.initial_params is not None:
            object.__setattr__(self, "initial_params", tuple(float(x) for x in self.initial_params))
            if len(self.initial_params) != 2 * self.p:
                raise DomainError(f"{len(self.initial_params)} parameters for p={self.p}, need {2 * self.p}")

    def starting_point(self, problem_id: int = 0) -> np.ndarray:
        if self.initial_params is not None:
            return np.array(self.initial_params)
        gen = rng_streams.generator(self.seed, "initializer", problem_id)
        return gen.uniform(-INIT_SCALE, INIT_SCALE, 2 * self.p)


@dataclass(frozen=True)
class QaoaResult:
    n_qubits: int
    best_params: np.ndarray
    expectation: float
    probabilities: np.ndarray
    best_bitstring: str
    enhancement_factor: float
    counts: th.Optional[th.Dict[str, int]] = field(default=None, compare=False)
    trace: th.Any = field(default=None, compare=False, repr=False)

    def probability_map(self, cutoff: float = 0.) -> th.Dict[str, float]:
        return {bitstring(i, self.n_qubits): float(pr)
                for i, pr in enumerate(self.probabilities) if pr > cutoff}

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "best_params": self.best_params.tolist(),
            "expectation": self.expectation,
            "best_bitstring": self.best_bitstring,
            "best_probability": float(self.probabilities.max()),
            "enhancement_factor": self.enhancement_factor,
        }


def split_params(params: th.Sequence[float]) -> th.Tuple[np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.size % 2:
        raise DomainError(f"expected an even-length parameter vector, got shape {params.shape}")
    p = params.size // 2
    return params[:p], params[p:]


def phase_scale(spin_poly: MultilinearPolynomial) -> float:
    """Largest |alpha_S| over the non-constant spin terms, 1 for a constant polynomial."""
    return max((abs(coef) for _, coef in spin_poly), default=0.) or 1.


def angle_units(spin_poly: MultilinearPolynomial, p: int) -> np.ndarray:
    """Physical angles per search coordinate: gamma in units of 1 / max|alpha_S|, beta unchanged."""
    return np.concatenate([np.full(p, 1. / phase_scale(spin_poly)), np.ones(p)])


def diagonal_phases(cp: CompiledProblem) -> np.ndarray:
    return energies(cp.binary_poly, cp.n_qubits)


class QaoaSimulator:
    """Statevector kept as an n-axis tensor; axis n-1-q holds qubit q."""

    __slots__ = [
        '_n',
        '_energies',
        '_psi',
    ]

    def __init__(self, n_qubits: int, energies: np.ndarray) -> None:
        check_qubits(n_qubits)
        energies = np.asarray(energies, dtype=float)
        if energies.shape != (2**n_qubits,):
            raise DomainError(f"{energies.size} energies for {n_qubits} qubits")
        self._n = n_qubits
        self._energies = energies
        self.reset()

    @property
    def n_qubits(self) -> int:
        return self._n

    @n_qubits.setter
    def n_qubits(self, value: int) -> None:
        raise Exception("n_qubits is read-only.")

    @property
    def statevector(self) -> np.ndarray:
        return self._psi.reshape(-1).copy()

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self._psi.reshape(-1))**2

    def reset(self) -> None:
        dim = 2**self._n
        self._psi = np.full(dim, 1 / np.sqrt(dim), dtype=complex).reshape([2] * self._n or [1])

    def _axis(self, qubit: int) -> int:
        return self._n - 1 - qubit

    def apply_phase(self, gamma: float) -> None:
        self._psi = self._psi * np.exp(-1j * gamma * self._energies).reshape(self._psi.shape)

    def apply_rx(self, qubit: int, theta: float) -> None:
        c, s = np.cos(theta / 2), -1j * np.sin(theta / 2)
        self._psi = c * self._psi + s * np.flip(self._psi, self._axis(qubit))

    def apply_mixer(self, beta: float) -> None:
        for q in range(self._n):
            self.apply_rx(q, 2 * beta)

    def run(self, params: th.Sequence[float]) -> np.ndarray:
        gammas, betas = split_params(params)
        self.reset()
        for gamma, beta in zip(gammas, betas):
            self.apply_phase(gamma)
            self.apply_mixer(beta)
        return self.statevector

    def expectation(self) -> float:
        return float(self.probabilities @ self._energies)


def simulate(cp: CompiledProblem, config: th.Union[QaoaConfig, th.Sequence[float]]) -> np.ndarray:
    """Final statevector for explicit angles, or for the starting point a QaoaConfig describes."""
    if isinstance(config, QaoaConfig):
        params = config.starting_point(cp.problem.problem_id)
    else:
        params = config
    return QaoaSimulator(cp.n_qubits, diagonal_phases(cp)).run(params)


def sample_hits(probabilities: np.ndarray, shots: int, gen: np.random.Generator) -> np.ndarray:
    """Multinomial shot counts per basis state."""
    p = np.asarray(probabilities, dtype=float)
    return gen.multinomial(shots, p / p.sum())


def expectation(cp: CompiledProblem,
                params: th.Sequence[float],
                shots: int = 0,
                gen: th.Optional[np.random.Generator] = None) -> float:
    E = diagonal_phases(cp)
    sim = QaoaSimulator(cp.n_qubits, E)
    sim.run(params)
    if shots == 0:
        return sim.expectation()
    gen = gen if gen is not None else rng_streams.generator(0, "sampling")
    hits = sample_hits(sim.probabilities, shots, gen)
    return float(hits @ E / shots)


def enhancement_factor(probabilities: np.ndarray, n_qubits: int) -> float:
    """Largest basis-state probability over the uniform 2^-n."""
    return float(np.max(probabilities) * 2**n_qubits)


def best_bitstring(probabilities: np.ndarray, n_qubits: int) -> str:
    # argmax returns the lowest index among ties
    return bitstring(int(np.argmax(probabilities)), n_qubits)


def phase_terms(poly: MultilinearPolynomial) -> th.List[th.Tuple[th.Tuple[int, ...], float]]:
    if poly.kind is not VarKind.SPIN:
        raise DomainError("phase separation is built from a spin polynomial")
    return list(poly)


def synthesize_circuit(cp: CompiledProblem, params: th.Sequence[float]) -> th.Tuple[th.List[Gate], CircuitMetrics]:
    gates = synthesize_gates(cp.spin_poly, cp.n_qubits, params)
    return gates, circuit_metrics(gates, cp.n_qubits)


def synthesize_gates(spin_poly: MultilinearPolynomial, n_qubits: int, params: th.Sequence[float]) -> th.List[Gate]:
    gammas, betas = split_params(params)
    terms = phase_terms(spin_poly)
    gates = [Gate("H", [q]) for q in range(n_qubits)]
    for gamma, beta in zip(gammas, betas):
        for qubits, alpha in terms:
            ladder = [Gate("CNOT", [a, b]) for a, b in zip(qubits, qubits[1:])]
            gates.extend(ladder)
            gates.append(Gate("RZ", [qubits[-1]], 2 * gamma * alpha))
            gates.extend(reversed(ladder))
        gates.extend(Gate("RX", [q], 2 * beta) for q in range(n_qubits))
    return gates


def simulate_gates(gates: th.Iterable[Gate], n_qubits: int) -> np.ndarray:
    """Reference gate-by-gate simulation starting from |0...0>."""
    if n_qubits > MAX_GATE_QUBITS:
        raise ResourceLimit(n_qubits, MAX_GATE_QUBITS)
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.
    psi = psi.reshape([2] * n_qubits or [1])

    def axis(q: int) -> int:
        return n_qubits - 1 - q

    def at(ax: int, bit: int) -> th.Tuple[th.Any, ...]:
        return tuple(bit if i == ax else slice(None) for i in range(n_qubits))

    for g in gates:
        if g.kind == "H":
            ax = axis(g.qubits[0])
            a0, a1 = psi[at(ax, 0)].copy(), psi[at(ax, 1)].copy()
            psi[at(ax, 0)] = (a0 + a1) / np.sqrt(2)
            psi[at(ax, 1)] = (a0 - a1) / np.sqrt(2)
        elif g.kind == "RZ":
            ax = axis(g.qubits[0])
            psi[at(ax, 0)] *= np.exp(-0.5j * g.angle)
            psi[at(ax, 1)] *= np.exp(0.5j * g.angle)
        elif g.kind == "RX":
            c, s = np.cos(g.angle / 2), -1j * np.sin(g.angle / 2)
            psi = c * psi + s * np.flip(psi, axis(g.qubits[0]))
        else:
            ac, at_ = axis(g.qubits[0]), axis(g.qubits[1])
            block = psi[at(ac, 1)]
            # the control axis is gone from the slice
            flip_ax = at_ if at_ < ac else at_ - 1
            psi[at(ac, 1)] = np.flip(block, flip_ax).copy()
    return psi.reshape(-1)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(np.vdot(a, b))**2)


def result_from_params(cp: CompiledProblem,
                       params: th.Sequence[float],
                       shots: int = 0,
                       gen: th.Optional[np.random.Generator] = None) -> QaoaResult:
    """Final state at fixed parameters: exact probabilities, or a sampled histogram in shots mode."""
    E = diagonal_phases(cp)
    sim = QaoaSimulator(cp.n_qubits, E)
    sim.run(params)
    probs = sim.probabilities
    counts = None
    if shots:
        gen = gen if gen is not None else rng_streams.generator(0, "sampling")
        hits = sample_hits(probs, shots, gen)
        counts = {bitstring(i, cp.n_qubits): int(c) for i, c in enumerate(hits) if c}
        probs = hits / shots
        value = float(probs @ E)
    else:
        value = sim.expectation()
    return QaoaResult(
        n_qubits=cp.n_qubits,
        best_params=np.asarray(params, dtype=float),
        expectation=value,
        probabilities=probs,
        best_bitstring=best_bitstring(probs, cp.n_qubits),
        enhancement_factor=enhancement_factor(probs, cp.n_qubits),
        counts=counts,
    )
