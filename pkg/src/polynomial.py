"""
    Pseudo-boolean polynomial algebra.

    One class covers three variable alphabets. Keys are sorted index tuples;
    how repeated indices collapse depends on the alphabet:
        binary   x*x = x      -> duplicates removed
        spin     s*s = 1      -> pairs cancel
        integer  z*z = z^2    -> kept as a multiset
"""
import itertools
import typing as th
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, EmptyEncoding, EncodingError

PRUNE_TOL = 1e-15

Key = th.Tuple[int, ...]


class VarKind(str, Enum):
    BINARY = "binary"
    SPIN = "spin"
    INTEGER = "integer"


def _canonical(kind: VarKind, key: th.Iterable[int]) -> Key:
    key = sorted(key)
    if kind is VarKind.BINARY:
        return tuple(sorted(set(key)))
    if kind is VarKind.SPIN:
        counts: th.Dict[int, int] = {}
        for i in key:
            counts[i] = counts.get(i, 0) + 1
        return tuple(i for i in sorted(counts) if counts[i] % 2)
    return tuple(key)


def _term_order(key: Key) -> th.Tuple[int, Key]:
    return (len(key), key)


class MultilinearPolynomial:

    __slots__ = [
        '_kind',
        '_terms',
        '_constant',
    ]

    def __init__(self,
                 kind: th.Union[VarKind, str],
                 terms: th.Optional[th.Mapping[th.Iterable[int], float]] = None,
                 constant: float = 0.,
                 prune: float = PRUNE_TOL) -> None:
        self._kind = VarKind(kind)
        acc: th.Dict[Key, float] = {}
        constant = float(constant)
        for key, coef in (terms or {}).items():
            k = _canonical(self._kind, key)
            if not k:
                constant += float(coef)
                continue
            acc[k] = acc.get(k, 0.) + float(coef)
        self._terms = {k: acc[k] for k in sorted(acc, key=_term_order) if abs(acc[k]) >= prune}
        self._constant = constant

    @classmethod
    def zero(cls, kind: th.Union[VarKind, str]) -> "MultilinearPolynomial":
        return cls(kind)

    @classmethod
    def variable(cls, kind: th.Union[VarKind, str], index: int, coef: float = 1.) -> "MultilinearPolynomial":
        return cls(kind, {(index,): coef})

    @property
    def kind(self) -> VarKind:
        return self._kind

    @kind.setter
    def kind(self, value: VarKind) -> None:
        raise Exception("kind is read-only.")

    @property
    def terms(self) -> th.Dict[Key, float]:
        return dict(self._terms)

    @terms.setter
    def terms(self, value: th.Dict[Key, float]) -> None:
        raise Exception("terms are read-only. Build a new polynomial instead.")

    @property
    def constant(self) -> float:
        return self._constant

    @constant.setter
    def constant(self, value: float) -> None:
        raise Exception("constant is read-only.")

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    @property
    def n_vars(self) -> int:
        """One more than the largest variable index used."""
        return max((k[-1] for k in self._terms), default=-1) + 1

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> th.Iterator[th.Tuple[Key, float]]:
        return iter(self._terms.items())

    def __str__(self) -> str:
        name = {VarKind.BINARY: "x", VarKind.SPIN: "s", VarKind.INTEGER: "z"}[self._kind]
        parts = [f"{self._constant:+g}"] if self._constant or not self._terms else []
        for key, coef in self:
            parts.append(f"{coef:+g}*" + "*".join(f"{name}{i}" for i in key))
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"MultilinearPolynomial({self._kind.value}, {len(self)} terms, degree {self.degree})"

    def _check_kind(self, other: "MultilinearPolynomial") -> None:
        if other.kind is not self._kind:
            raise DomainError(f"cannot combine {self._kind.value} and {other.kind.value} polynomials")

    def __add__(self, other: th.Union["MultilinearPolynomial", float]) -> "MultilinearPolynomial":
        if isinstance(other, MultilinearPolynomial):
            self._check_kind(other)
            terms = dict(self._terms)
            for key, coef in other:
                terms[key] = terms.get(key, 0.) + coef
            return MultilinearPolynomial(self._kind, terms, self._constant + other.constant)
        return MultilinearPolynomial(self._kind, self._terms, self._constant + float(other))

    __radd__ = __add__

    def __neg__(self) -> "MultilinearPolynomial":
        return self * -1.

    def __sub__(self, other: th.Union["MultilinearPolynomial", float]) -> "MultilinearPolynomial":
        return self + (-other)

    def __mul__(self, other: th.Union["MultilinearPolynomial", float]) -> "MultilinearPolynomial":
        if not isinstance(other, MultilinearPolynomial):
            s = float(other)
            return MultilinearPolynomial(self._kind, {k: c * s for k, c in self}, self._constant * s)
        self._check_kind(other)
        left = [((), self._constant)] + list(self)
        right = [((), other.constant)] + list(other)
        terms: th.Dict[Key, float] = {}
        for (ka, ca), (kb, cb) in itertools.product(left, right):
            if ca == 0. or cb == 0.:
                continue
            k = _canonical(self._kind, ka + kb)
            terms[k] = terms.get(k, 0.) + ca * cb
        constant = terms.pop((), 0.)
        return MultilinearPolynomial(self._kind, terms, constant)

    __rmul__ = __mul__

    def allclose(self, other: "MultilinearPolynomial", atol: float = 1e-12) -> bool:
        if other.kind is not self._kind or abs(self._constant - other.constant) > atol:
            return False
        keys = set(self._terms) | set(other.terms)
        theirs = other.terms
        return all(abs(self._terms.get(k, 0.) - theirs.get(k, 0.)) <= atol for k in keys)

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "kind": self._kind.value,
            "constant": self._constant,
            "terms": [{"vars": list(k), "coef": c} for k, c in self],
        }

    @classmethod
    def from_dict(cls, d: th.Dict[str, th.Any]) -> "MultilinearPolynomial":
        return cls(d["kind"], {tuple(t["vars"]): t["coef"] for t in d["terms"]}, d.get("constant", 0.))


def evaluate(poly: MultilinearPolynomial, assignment: th.Sequence[float]) -> float:
    values = np.asarray(assignment, dtype=float)
    if poly.kind is VarKind.BINARY and not np.all((values == 0) | (values == 1)):
        raise DomainError("binary polynomial needs an assignment over {0, 1}")
    if poly.kind is VarKind.SPIN and not np.all(np.abs(values) == 1):
        raise DomainError("spin polynomial needs an assignment over {-1, +1}")
    if values.size < poly.n_vars:
        raise DomainError(f"assignment has {values.size} values, polynomial uses {poly.n_vars}")
    total = poly.constant
    for key, coef in poly:
        total += coef * float(np.prod(values[list(key)]))
    return total


def binary_expansion(N: int) -> th.List[int]:
    """Coefficients 1, 2, ..., 2^(M-1), N + 1 - 2^M with M = floor(log2 N)."""
    if N < 0:
        raise DomainError(f"range must be non-negative, got {N}")
    if N == 0:
        raise EmptyEncoding("range 0: variable is fixed to zero")
    M = int(N).bit_length() - 1
    return [2**k for k in range(M)] + [N + 1 - 2**M]


def bits_needed(N: int) -> int:
    return 0 if N <= 0 else int(N).bit_length()


@dataclass
class IntegerEncoding:
    """Integer variable -> [(binary variable, coefficient), ...]."""
    bits: th.Dict[int, th.List[th.Tuple[int, int]]] = field(default_factory=dict)
    ranges: th.Dict[int, int] = field(default_factory=dict)

    @classmethod
    def build(cls, ranges: th.Sequence[int], offset: int = 0, first_var: int = 0) -> "IntegerEncoding":
        enc = cls()
        enc.extend(ranges, offset, first_var)
        return enc

    def extend(self, ranges: th.Sequence[int], offset: int, first_var: int) -> int:
        """Append variables first_var.. with qubits from `offset`; returns the next free qubit."""
        q = offset
        for i, N in enumerate(ranges):
            var = first_var + i
            self.ranges[var] = int(N)
            try:
                coefs = binary_expansion(int(N))
            except EmptyEncoding:
                coefs = []
            self.bits[var] = [(q + k, c) for k, c in enumerate(coefs)]
            q += len(coefs)
        return q

    @property
    def n_bits(self) -> int:
        return sum(len(b) for b in self.bits.values())


def substitute_integer(poly: MultilinearPolynomial, enc: IntegerEncoding) -> MultilinearPolynomial:
    if poly.kind is not VarKind.INTEGER:
        raise DomainError("substitute_integer expects an integer polynomial")
    terms: th.Dict[Key, float] = {}
    for key, coef in poly:
        factors = []
        for var in key:
            if var not in enc.bits:
                raise EncodingError(f"integer variable {var} has no encoding")
            factors.append(enc.bits[var])
        # a variable with an empty encoding is identically zero
        for choice in itertools.product(*factors):
            k = _canonical(VarKind.BINARY, (q for q, _ in choice))
            value = coef
            for _, c in choice:
                value *= c
            terms[k] = terms.get(k, 0.) + value
    constant = poly.constant + terms.pop((), 0.)
    return MultilinearPolynomial(VarKind.BINARY, terms, constant)


def binary_to_spin(poly: MultilinearPolynomial) -> MultilinearPolynomial:
    """x_i = (1 - s_i) / 2."""
    if poly.kind is not VarKind.BINARY:
        raise DomainError("binary_to_spin expects a binary polynomial")
    terms: th.Dict[Key, float] = {}
    constant = poly.constant
    for key, coef in poly:
        scale = coef / 2**len(key)
        for r in range(len(key) + 1):
            sign = -scale if r % 2 else scale
            for sub in itertools.combinations(key, r):
                if sub:
                    terms[sub] = terms.get(sub, 0.) + sign
                else:
                    constant += sign
    return MultilinearPolynomial(VarKind.SPIN, terms, constant)


def spin_to_binary(poly: MultilinearPolynomial) -> MultilinearPolynomial:
    """s_i = 1 - 2 x_i."""
    if poly.kind is not VarKind.SPIN:
        raise DomainError("spin_to_binary expects a spin polynomial")
    terms: th.Dict[Key, float] = {}
    constant = poly.constant
    for key, coef in poly:
        for r in range(len(key) + 1):
            weight = coef * (-2.)**r
            for sub in itertools.combinations(key, r):
                if sub:
                    terms[sub] = terms.get(sub, 0.) + weight
                else:
                    constant += weight
    return MultilinearPolynomial(VarKind.BINARY, terms, constant)
