"""
    Scoring and comparison of allocations across solution methods.

    The comparison objective f(z) = -q2 K(z) + q1 S(z) - q0 z'cz + mu'z is
    larger-is-better and always uses the full higher-order weights, whatever
    order the method was compiled with.
"""
import logging
import typing as th
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .baseline import Allocation, portfolio_objective
from .errors import DegenerateAllocation, JoinError, ShapeError
from .exact import ground_state, spectrum_difference_variance
from .moments import MomentSet
from .problem import Order, PortfolioProblem, compile
from .qaoa import synthesize_circuit

logger = logging.getLogger(__name__)

KL_EPSILON = 1e-12
BUDGET_WINDOW = (0.95, 1.05)
OBJECTIVE_THRESHOLD = 0.95

SUMMARY_ROWS = ("budget_window", "normalized_objective", "both")


class Method(str, Enum):
    CLASSICAL_CONSTRAINED = "classical_constrained"
    CLASSICAL_PENALTY = "classical_penalty"
    QAOA = "qaoa"
    HUBO_EXACT = "hubo_exact"


@dataclass(frozen=True)
class MethodResult:
    """One solved (problem, method, lambda) triple as written by `solve`."""
    problem_id: int
    method: Method
    allocation: Allocation
    lambda_used: th.Optional[float] = None
    enhancement_factor: th.Optional[float] = None
    status: str = "ok"
    extra: th.Dict[str, th.Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "id": self.problem_id,
            "method": Method(self.method).value,
            "status": self.status,
            "allocation": self.allocation.to_dict() if self.allocation else None,
            "lambda": self.lambda_used,
            "enhancement_factor": self.enhancement_factor,
            **self.extra,
        }

    @classmethod
    def from_dict(cls, d: th.Dict[str, th.Any]) -> "MethodResult":
        known = {"id", "method", "status", "allocation", "lambda", "enhancement_factor"}
        return cls(
            problem_id=int(d["id"]),
            method=Method(d["method"]),
            allocation=Allocation.from_dict(d["allocation"]) if d.get("allocation") else None,
            lambda_used=d.get("lambda"),
            enhancement_factor=d.get("enhancement_factor"),
            status=d.get("status", "ok"),
            extra={k: v for k, v in d.items() if k not in known},
        )


@dataclass(frozen=True)
class EvaluationRecord:
    problem_id: int
    method: Method
    allocation: Allocation
    objective: float
    normalized_objective: float
    budget_utilization: float
    lambda_used: th.Optional[float] = None
    enhancement_factor: th.Optional[float] = None
    n_qubits: int = 0

    @property
    def in_budget_window(self) -> bool:
        lo, hi = BUDGET_WINDOW
        return lo <= self.budget_utilization <= hi

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "id": self.problem_id,
            "method": self.method.value,
            "n_qubits": self.n_qubits,
            "z": list(self.allocation.z),
            "objective": self.objective,
            "normalized_objective": self.normalized_objective,
            "budget_utilization": self.budget_utilization,
            "lambda": self.lambda_used,
            "enhancement_factor": self.enhancement_factor,
        }


def objective_value(z: th.Sequence[int], moments: MomentSet, q0: float, q1: float, q2: float) -> float:
    z = np.asarray(z, dtype=float)
    if z.shape != (moments.n,):
        raise ShapeError(f"allocation of shape {z.shape} for {moments.n} assets")
    return -portfolio_objective(z, moments, q0, q1, q2)


def penalized_cost(z: th.Sequence[int], problem: PortfolioProblem) -> float:
    """Value of the compiled cost at z: -f(z) under the problem's order plus the budget penalty."""
    q0, q1, q2 = problem.active_weights
    gap = float(np.dot(z, problem.prices)) - problem.capital
    return -objective_value(z, problem.moments, q0, q1, q2) + problem.lam * gap**2


def min_max_normalize(values: th.Sequence[float]) -> th.List[float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return []
    lo, hi = v.min(), v.max()
    if hi == lo:
        return [1.] * v.size
    return list((v - lo) / (hi - lo))


def kl_vs_uniform(z: th.Sequence[int], prices: th.Sequence[float], epsilon: float = KL_EPSILON) -> float:
    """Relative entropy of the capital split z_i p_i / z'p against the uniform split."""
    spend = np.asarray(z, dtype=float) * np.asarray(prices, dtype=float)
    total = spend.sum()
    if total <= 0:
        raise DegenerateAllocation("allocation spends nothing; its capital split is undefined")
    q = spend / total + epsilon
    q /= q.sum()
    return float(np.sum(q * np.log(q * q.size)))


def _score(problem: PortfolioProblem, r: MethodResult) -> float:
    return objective_value(r.allocation.z, problem.moments, *problem.weights)


def select_lambda(problem: PortfolioProblem,
                  candidates: th.Sequence[MethodResult],
                  window: th.Tuple[float, float] = BUDGET_WINDOW) -> MethodResult:
    """Best candidate inside the budget window, else best overall; ties keep the smaller lambda."""
    lo, hi = window
    ordered = sorted(candidates, key=lambda r: (r.lambda_used is None, r.lambda_used or 0.))
    inside = [r for r in ordered if lo <= r.allocation.budget_utilization <= hi]
    pool = inside or ordered
    return max(pool, key=lambda r: _score(problem, r))


def compare_suite(problems: th.Sequence[PortfolioProblem],
                  results: th.Sequence[MethodResult],
                  window: th.Tuple[float, float] = BUDGET_WINDOW) -> th.Tuple[th.List[EvaluationRecord], pd.DataFrame]:
    by_id = {p.problem_id: p for p in problems}
    grouped: th.Dict[int, th.Dict[Method, th.List[MethodResult]]] = {}
    for r in results:
        if r.problem_id not in by_id:
            raise JoinError(f"result for unknown problem id {r.problem_id}")
        if r.status != "ok" or r.allocation is None:
            logger.info("problem %d: %s result absent (%s)", r.problem_id, r.method.value, r.status)
            continue
        grouped.setdefault(r.problem_id, {}).setdefault(r.method, []).append(r)

    methods = sorted({r.method for r in results}, key=list(Method).index)
    records: th.List[EvaluationRecord] = []
    for pid in sorted(grouped):
        problem = by_id[pid]
        chosen = [select_lambda(problem, grouped[pid][m], window) for m in methods if m in grouped[pid]]
        scores = [_score(problem, r) for r in chosen]
        for r, f, norm in zip(chosen, scores, min_max_normalize(scores)):
            records.append(EvaluationRecord(
                problem_id=pid,
                method=r.method,
                allocation=r.allocation,
                objective=f,
                normalized_objective=float(norm),
                budget_utilization=r.allocation.budget_utilization,
                lambda_used=r.lambda_used,
                enhancement_factor=r.enhancement_factor,
                n_qubits=problem.n_qubits,
            ))
    return records, summary_table(records, methods, window)


def summary_table(records: th.Sequence[EvaluationRecord],
                  methods: th.Optional[th.Sequence[Method]] = None,
                  window: th.Tuple[float, float] = BUDGET_WINDOW,
                  threshold: float = OBJECTIVE_THRESHOLD) -> pd.DataFrame:
    """Counts per method: budget utilization in window, normalized objective >= threshold, both."""
    methods = list(methods) if methods is not None else sorted({r.method for r in records}, key=list(Method).index)
    lo, hi = window
    table = pd.DataFrame(0, index=list(SUMMARY_ROWS), columns=[m.value for m in methods])
    for r in records:
        budget = lo <= r.budget_utilization <= hi
        good = r.normalized_objective >= threshold
        col = r.method.value
        table.loc["budget_window", col] += int(budget)
        table.loc["normalized_objective", col] += int(good)
        table.loc["both", col] += int(budget and good)
    return table


def records_frame(records: th.Sequence[EvaluationRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in records])


def qubo_hubo_report(problems: th.Sequence[PortfolioProblem],
                     params: th.Sequence[float] = (1., 1.)) -> th.Dict[str, pd.DataFrame]:
    """
        Per-problem QUBO vs HUBO comparison, averaged by qubit count:
        circuit size of one layer, capital-split KL of each exact optimum, and
        the variance of the pointwise spectra difference.
    """
    rows = []
    for problem in problems:
        qubo = compile(problem.with_order(Order.QUBO))
        hubo = compile(problem.with_order(Order.HUBO))
        row = {"id": problem.problem_id, "qubits": hubo.n_qubits}
        for name, cp in (("qubo", qubo), ("hubo", hubo)):
            _, metrics = synthesize_circuit(cp, params)
            row[f"gates_{name}"] = metrics.total
            row[f"depth_{name}"] = metrics.depth
            z = ground_state(cp)[0].z
            try:
                row[f"kl_{name}"] = kl_vs_uniform(z, problem.prices)
            except DegenerateAllocation:
                row[f"kl_{name}"] = np.nan
        row["spectra_variance"] = spectrum_difference_variance(qubo, hubo)
        rows.append(row)

    frame = pd.DataFrame(rows)
    by_q = frame.groupby("qubits", sort=True)
    kl = by_q[["kl_qubo", "kl_hubo"]].mean().rename(columns={"kl_qubo": "avg_kl_qubo", "kl_hubo": "avg_kl_hubo"})
    gates = by_q[["gates_qubo", "gates_hubo", "depth_qubo", "depth_hubo"]].mean()
    return {
        "kl": kl.reset_index(),
        "gates": gates.reset_index(),
        "spectra": frame[["id", "qubits", "spectra_variance"]],
    }
