"""
    Derivative-free optimizers for the QAOA parameter loop.

    CMA-ES is pycma's (mu/mu_w, lambda)-CMA-ES driven through ask/tell. Only
    sigma0 is set; the rest are pycma defaults, notably
        popsize  4 + floor(3 ln d)
        mu       popsize // 2, log-linear recombination weights
        cs, damps, cc, c1, cmu as in the canonical tutorial formulae
    Active covariance updates are turned off. Sampling draws from a numpy
    Generator passed as the 'randn' option, so numpy's global state is never
    touched and concurrent runs stay seed-deterministic.
"""
import logging
import typing as th
from dataclasses import dataclass, field, replace
from enum import Enum

import cma
import numpy as np
import pandas as pd
from scipy import optimize

from . import rng as rng_streams
from .errors import DomainError, ObjectiveError
from .problem import CompiledProblem
from .qaoa import QaoaConfig, QaoaResult, QaoaSimulator, angle_units, diagonal_phases, result_from_params

logger = logging.getLogger(__name__)

SIGMA0 = 0.1
MAX_EVALS = 500
TOLERANCE = 1e-8
STAGNATION_WINDOW = 20


class OptimizerKind(str, Enum):
    CMAES = "cmaes"
    NELDER_MEAD = "nelder_mead"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.CMAES
    sigma0: float = SIGMA0
    max_evals: int = MAX_EVALS
    seed: int = 0
    tolerance: float = TOLERANCE

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", OptimizerKind(self.kind))
        if not self.sigma0 > 0:
            raise DomainError(f"sigma0 must be positive, got {self.sigma0}")
        if self.max_evals < 1:
            raise DomainError(f"max_evals must be at least 1, got {self.max_evals}")


@dataclass
class OptimizationTrace:
    evaluations: th.List[th.Tuple[np.ndarray, float]] = field(default_factory=list)
    best_params: th.Optional[np.ndarray] = None
    best_value: float = np.inf
    stop_reason: str = ""

    @property
    def eval_count(self) -> int:
        return len(self.evaluations)

    def record(self, params: np.ndarray, value: float) -> None:
        params = np.array(params, dtype=float)
        self.evaluations.append((params, value))
        if value < self.best_value:
            self.best_value, self.best_params = value, params

    def to_frame(self) -> pd.DataFrame:
        values = np.array([v for _, v in self.evaluations])
        return pd.DataFrame({
            "eval_index": np.arange(values.size),
            "value": values,
            "best_so_far": np.minimum.accumulate(values) if values.size else values,
        })

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g")


class _BudgetExhausted(Exception):
    pass


class _Counted:
    """Objective wrapper that records every call and enforces the budget."""

    __slots__ = [
        '_fun',
        '_limit',
        'trace',
    ]

    def __init__(self, fun: th.Callable[[np.ndarray], float], limit: int) -> None:
        self._fun = fun
        self._limit = limit
        self.trace = OptimizationTrace()

    def __call__(self, x: np.ndarray) -> float:
        if self.trace.eval_count >= self._limit:
            raise _BudgetExhausted()
        value = float(self._fun(np.asarray(x, dtype=float)))
        if not np.isfinite(value):
            raise ObjectiveError(np.array(x, dtype=float), value)
        self.trace.record(x, value)
        return value


def _stagnated(history: th.List[float], tolerance: float) -> bool:
    return len(history) > STAGNATION_WINDOW and \
        history[-STAGNATION_WINDOW - 1] - history[-1] < tolerance


def minimize_cmaes(fun: th.Callable[[np.ndarray], float], x0: np.ndarray, config: OptimizerConfig) -> OptimizationTrace:
    gen = rng_streams.generator(config.seed, "optimizer")
    counted = _Counted(fun, config.max_evals)
    es = cma.CMAEvolutionStrategy(np.asarray(x0, dtype=float), config.sigma0, {
        "randn": lambda *shape: gen.standard_normal(shape),
        "seed": np.nan,
        "CMA_active": False,
        "verbose": -9,
        "maxfevals": config.max_evals,
    })
    counted(x0)
    history: th.List[float] = []
    while True:
        if counted.trace.eval_count + es.popsize > config.max_evals:
            counted.trace.stop_reason = "max_evals"
            break
        X = es.ask()
        es.tell(X, [counted(x) for x in X])
        history.append(counted.trace.best_value)
        if _stagnated(history, config.tolerance):
            counted.trace.stop_reason = "stagnation"
            break
        stop = es.stop()
        if stop:
            counted.trace.stop_reason = ",".join(sorted(stop))
            break
    return counted.trace


def minimize_nelder_mead(fun: th.Callable[[np.ndarray], float], x0: np.ndarray, config: OptimizerConfig) -> OptimizationTrace:
    x0 = np.asarray(x0, dtype=float)
    counted = _Counted(fun, config.max_evals)
    simplex = np.vstack([x0, x0 + config.sigma0 * np.eye(x0.size)])
    try:
        res = optimize.minimize(counted, x0, method="Nelder-Mead", options={
            "initial_simplex": simplex,
            "maxfev": config.max_evals,
            "xatol": config.tolerance,
            "fatol": config.tolerance,
        })
        if res.success:
            counted.trace.stop_reason = "converged"
        elif counted.trace.eval_count >= config.max_evals:
            counted.trace.stop_reason = "max_evals"
        else:
            counted.trace.stop_reason = res.message
    except _BudgetExhausted:
        counted.trace.stop_reason = "max_evals"
    return counted.trace


OPTIMIZERS: th.Dict[OptimizerKind, th.Callable[..., OptimizationTrace]] = {
    OptimizerKind.CMAES: minimize_cmaes,
    OptimizerKind.NELDER_MEAD: minimize_nelder_mead,
}


def minimize(fun: th.Callable[[np.ndarray], float],
             x0: th.Union[int, th.Sequence[float]],
             config: th.Optional[OptimizerConfig] = None) -> OptimizationTrace:
    """Minimize from x0 (or from the origin when given a dimension)."""
    config = config or OptimizerConfig()
    x0 = np.zeros(x0) if isinstance(x0, (int, np.integer)) else np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size < 1:
        raise DomainError(f"need at least one parameter, got shape {x0.shape}")
    trace = OPTIMIZERS[config.kind](fun, x0, config)
    logger.debug("%s stopped after %d evals (%s), best %.6g",
                 config.kind.value, trace.eval_count, trace.stop_reason, trace.best_value)
    return trace


def run_qaoa(cp: CompiledProblem,
             qcfg: th.Optional[QaoaConfig] = None,
             ocfg: th.Optional[OptimizerConfig] = None) -> QaoaResult:
    qcfg = qcfg or QaoaConfig()
    ocfg = ocfg or OptimizerConfig()
    pid = cp.problem.problem_id
    # gamma is searched in units of 1 / max|alpha_S|
    unit = angle_units(cp.spin_poly, qcfg.p)
    x0 = qcfg.starting_point(pid)
    if qcfg.initial_params is not None:
        x0 = x0 / unit
    sim = QaoaSimulator(cp.n_qubits, diagonal_phases(cp))

    def fun(u: np.ndarray) -> float:
        sim.run(u * unit)
        return sim.expectation()

    if len(cp.spin_poly) == 0 or qcfg.p == 0:
        # nothing to optimize: no layers or a constant energy
        trace = OptimizationTrace()
        trace.record(x0, fun(x0))
        trace.stop_reason = "constant"
    else:
        # per-problem optimizer stream
        trace = minimize(fun, x0, OptimizerConfig(ocfg.kind, ocfg.sigma0, ocfg.max_evals,
                                                  rng_streams.int_seed(ocfg.seed, "optimizer", pid),
                                                  ocfg.tolerance))
    gen = rng_streams.generator(qcfg.seed, "sampling", pid)
    result = result_from_params(cp, trace.best_params * unit, qcfg.shots, gen)
    logger.info("problem %d: %d qubits, <E>=%.6g, enhancement %.3g after %d evals",
                pid, cp.n_qubits, result.expectation, result.enhancement_factor, trace.eval_count)
    return replace(result, trace=trace)
