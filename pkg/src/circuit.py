"""
    Gate lists and the gate dependency graph used for circuit metrics.

    Each gate is a vertex; an edge joins a gate to the next gate touching one
    of its qubits. Depth is the number of gates on the longest path, so gates
    on disjoint qubits count as parallel.
"""
import typing as th
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx

from .errors import DomainError

GATE_KINDS = ("H", "CNOT", "RZ", "RX")
_ARITY = {"H": 1, "CNOT": 2, "RZ": 1, "RX": 1}


class Gate:

    __slots__ = [
        '_kind',
        '_qubits',
        '_angle',
    ]

    def __init__(self,
                 kind: str,
                 qubits: th.Sequence[int],
                 angle: th.Optional[float] = None) -> None:
        kind = kind.upper()
        if kind not in _ARITY:
            raise DomainError(f"unknown gate {kind!r}")
        if len(qubits) != _ARITY[kind] or len(set(qubits)) != len(qubits):
            raise DomainError(f"{kind} needs {_ARITY[kind]} distinct qubits, got {list(qubits)}")
        if (angle is None) == (kind in ("RZ", "RX")):
            raise DomainError(f"{kind} {'needs' if angle is None else 'takes no'} angle")
        self._kind = kind
        self._qubits = tuple(int(q) for q in qubits)
        self._angle = None if angle is None else float(angle)

    @property
    def kind(self) -> str:
        return self._kind

    @kind.setter
    def kind(self, value: str) -> None:
        raise Exception("kind is read-only.")

    @property
    def qubits(self) -> th.Tuple[int, ...]:
        return self._qubits

    @qubits.setter
    def qubits(self, value: th.Tuple[int, ...]) -> None:
        raise Exception("qubits are read-only.")

    @property
    def angle(self) -> th.Optional[float]:
        return self._angle

    @angle.setter
    def angle(self, value: float) -> None:
        raise Exception("angle is read-only.")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Gate) and (self._kind, self._qubits, self._angle) == \
            (other.kind, other.qubits, other.angle)

    def __hash__(self) -> int:
        return hash((self._kind, self._qubits, self._angle))

    def __str__(self) -> str:
        text = f"{self._kind} " + " ".join(str(q) for q in self._qubits)
        return text if self._angle is None else f"{text} {self._angle!r}"

    __repr__ = __str__


class CircuitGraph:

    __slots__ = [
        'n_qubits',
        'gates',
        '_last',
        '_dag',
    ]

    def __init__(self, n_qubits: int) -> None:
        self.n_qubits = n_qubits
        self.gates: th.List[Gate] = []
        # last gate index seen on each qubit
        self._last: th.Dict[int, int] = {}
        self._dag = nx.DiGraph()

    def __iter__(self) -> th.Iterator[Gate]:
        return iter(self.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def add_gate(self, gate: Gate) -> int:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise DomainError(f"{gate} acts outside a {self.n_qubits}-qubit register")
        gid = len(self.gates)
        self.gates.append(gate)
        self._dag.add_node(gid)
        for q in gate.qubits:
            if q in self._last:
                self._dag.add_edge(self._last[q], gid)
            self._last[q] = gid
        return gid

    def extend(self, gates: th.Iterable[Gate]) -> None:
        for g in gates:
            self.add_gate(g)

    def counts(self) -> th.Dict[str, int]:
        c = Counter(g.kind for g in self.gates)
        return {k: c.get(k, 0) for k in GATE_KINDS}

    def depth(self) -> int:
        if not self.gates:
            return 0
        return len(nx.dag_longest_path(self._dag))


@dataclass(frozen=True)
class CircuitMetrics:
    counts: th.Dict[str, int] = field(default_factory=dict)
    depth: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {"counts": dict(self.counts), "total": self.total, "depth": self.depth}


def circuit_metrics(gates: th.Iterable[Gate], n_qubits: int) -> CircuitMetrics:
    graph = CircuitGraph(n_qubits)
    graph.extend(gates)
    return CircuitMetrics(graph.counts(), graph.depth())


def to_text(gates: th.Iterable[Gate]) -> str:
    return "".join(f"{g}\n" for g in gates)


def parse_gates(text: str) -> th.List[Gate]:
    gates = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        kind = parts[0].upper()
        try:
            if kind in ("RZ", "RX"):
                gates.append(Gate(kind, [int(parts[1])], float(parts[2])))
            else:
                gates.append(Gate(kind, [int(p) for p in parts[1:]]))
        except (IndexError, ValueError, DomainError) as e:
            raise DomainError(f"gate line {lineno}: {line.strip()!r}: {e}") from e
    return gates
