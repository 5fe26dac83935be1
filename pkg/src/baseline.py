"""
    Classical continuous baselines and the integer discretization step.

    Both continuous solvers minimize the smooth quartic
        f(w) = q2 K(w) - q1 S(w) + q0 w'cw - mu'w
    by projected gradient descent with an Armijo line search, restarted from
    uniform Dirichlet points. The constrained form projects onto the
    probability simplex; the penalty form adds lambda (sum w - 1)^2 and
    projects onto the box [0, 1]^n.
"""
import logging
import math
import typing as th
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng as rng_streams
from .errors import DomainError, InfeasibleProblem, ShapeError
from .moments import MomentSet

logger = logging.getLogger(__name__)

N_STARTS = 16
GRAD_TOL = 1e-8
PENALTY_WEIGHT = 100.
MAX_ITER = 10_000
ARMIJO = 1e-4
SIMPLEX_TOL = 1e-6
TIE_TOL = 1e-9

CONSTRAINED = "constrained"
PENALTY = "penalty"


@dataclass(frozen=True)
class Allocation:
    z: th.Tuple[int, ...]
    budget_used: float
    leftover: float
    objective: th.Optional[float] = None

    @classmethod
    def from_shares(cls,
                    z: th.Sequence[int],
                    prices: th.Sequence[float],
                    capital: float,
                    objective: th.Optional[float] = None) -> "Allocation":
        z = tuple(int(v) for v in z)
        if any(v < 0 for v in z):
            raise DomainError(f"share counts must be non-negative, got {z}")
        used = float(np.dot(z, np.asarray(prices, dtype=float)))
        return cls(z, used, float(capital) - used, objective)

    @property
    def capital(self) -> float:
        return self.budget_used + self.leftover

    @property
    def budget_utilization(self) -> float:
        return self.budget_used / self.capital

    def with_objective(self, objective: float) -> "Allocation":
        return Allocation(self.z, self.budget_used, self.leftover, float(objective))

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {"z": list(self.z), "budget_used": self.budget_used, "leftover": self.leftover,
                "objective": self.objective}

    @classmethod
    def from_dict(cls, d: th.Dict[str, th.Any]) -> "Allocation":
        return cls(tuple(d["z"]), float(d["budget_used"]), float(d["leftover"]), d.get("objective"))


@dataclass(frozen=True)
class ContinuousSolution:
    weights: np.ndarray
    objective_value: float
    converged: bool
    iterations: int
    start: int = 0

    def to_dict(self) -> th.Dict[str, th.Any]:
        return {
            "weights": self.weights.tolist(),
            "objective": self.objective_value,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _contractions(w: np.ndarray, moments: MomentSet) -> th.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # K w w w, S w w, c w: each one contraction short of the scalar form
    Kwww = ((moments.cokurt @ w) @ w) @ w
    Sww = (moments.coskew @ w) @ w
    cw = moments.cov @ w
    return Kwww, Sww, cw


def portfolio_objective(w: th.Sequence[float], moments: MomentSet, q0: float, q1: float, q2: float) -> float:
    """q2 K(w) - q1 S(w) + q0 w'cw - mu'w; works for real weights and integer shares alike."""
    w = np.asarray(w, dtype=float)
    if w.shape != (moments.n,):
        raise ShapeError(f"vector of shape {w.shape} for {moments.n} assets")
    Kwww, Sww, cw = _contractions(w, moments)
    return float(q2 * (Kwww @ w) - q1 * (Sww @ w) + q0 * (cw @ w) - moments.mu @ w)


def objective_gradient(w: np.ndarray, moments: MomentSet, q0: float, q1: float, q2: float) -> np.ndarray:
    # tensors are fully symmetric, so d/dw_i K(w) = 4 (K w w w)_i
    Kwww, Sww, cw = _contractions(np.asarray(w, dtype=float), moments)
    return 4 * q2 * Kwww - 3 * q1 * Sww + 2 * q0 * cw - moments.mu


def project_simplex(v: np.ndarray, z: float = 1.) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = z} by sorting."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - z
    ind = np.arange(1, v.size + 1)
    cond = u - cssv / ind > 0
    rho = ind[cond][-1]
    theta = cssv[cond][-1] / float(rho)
    return np.maximum(v - theta, 0.)


def project_box(v: np.ndarray, lower: float = 0., upper: float = 1.) -> np.ndarray:
    return np.clip(v, lower, upper)


def _descend(x: np.ndarray,
             fun: th.Callable[[np.ndarray], float],
             grad: th.Callable[[np.ndarray], np.ndarray],
             project: th.Callable[[np.ndarray], np.ndarray],
             tol: float,
             max_iter: int) -> th.Tuple[np.ndarray, float, bool, int]:
    """Projected gradient with Barzilai-Borwein trial steps and Armijo backtracking."""
    x = project(x)
    fx = fun(x)
    g = grad(x)
    step = 1.
    for it in range(max_iter):
        if np.linalg.norm(x - project(x - g)) < tol:
            return x, fx, True, it
        while True:
            x_new = project(x - step * g)
            f_new = fun(x_new)
            if f_new <= fx + ARMIJO * (g @ (x_new - x)):
                break
            step /= 2.
            if step < 1e-20:
                # no descent left at float precision
                return x, fx, False, it
        g_new = grad(x_new)
        s, y = x_new - x, g_new - g
        sy = s @ y
        step = min(max((s @ s) / sy, 1e-12), 1e6) if sy > 0 else 1e6
        x, fx, g = x_new, f_new, g_new
    return x, fx, bool(np.linalg.norm(x - project(x - g)) < tol), max_iter


def solve_continuous(moments: MomentSet,
                     q0: float,
                     q1: float,
                     q2: float,
                     mode: str = CONSTRAINED,
                     lam: float = PENALTY_WEIGHT,
                     n_starts: int = N_STARTS,
                     seed: int = 0,
                     tol: float = GRAD_TOL,
                     max_iter: int = MAX_ITER) -> ContinuousSolution:
    n = moments.n
    if n < 1:
        raise ShapeError("no assets")

    if mode == CONSTRAINED:
        def fun(w):
            return portfolio_objective(w, moments, q0, q1, q2)

        def grad(w):
            return objective_gradient(w, moments, q0, q1, q2)
        project = project_simplex
    elif mode == PENALTY:
        def fun(w):
            return portfolio_objective(w, moments, q0, q1, q2) + lam * (w.sum() - 1.)**2

        def grad(w):
            return objective_gradient(w, moments, q0, q1, q2) + 2. * lam * (w.sum() - 1.)
        project = project_box
    else:
        raise ValueError(f"unknown continuous mode {mode!r}")

    # children of one SeedSequence: the first k starts are the same for any n_starts >= k
    children = rng_streams.seed_sequence(seed, "multistart").spawn(n_starts)
    best: th.Optional[ContinuousSolution] = None
    for k, child in enumerate(children):
        x0 = np.random.default_rng(child).dirichlet(np.ones(n))
        x, fx, converged, iters = _descend(x0, fun, grad, project, tol, max_iter)
        if best is None or fx < best.objective_value:
            best = ContinuousSolution(np.maximum(x, 0.), float(fx), converged, iters, k)
    logger.debug("%s solve: best start %d, f=%.6g, converged=%s", mode, best.start,
                 best.objective_value, best.converged)
    return best


def solve_constrained(moments: MomentSet, q0: float, q1: float, q2: float, **kwargs: th.Any) -> ContinuousSolution:
    return solve_continuous(moments, q0, q1, q2, mode=CONSTRAINED, **kwargs)


def solve_penalty(moments: MomentSet, q0: float, q1: float, q2: float, **kwargs: th.Any) -> ContinuousSolution:
    return solve_continuous(moments, q0, q1, q2, mode=PENALTY, **kwargs)


def max_shares(budget: float, price: float) -> int:
    """floor(budget / price), exact for the given floats."""
    return math.floor(Fraction(float(budget)) / Fraction(float(price)))


def discretization_cost(z: th.Sequence[int], w: th.Sequence[float], prices: th.Sequence[float], capital: float) -> float:
    """C_extra + sum_i |C w_i - z_i p_i|; infinite when z overspends."""
    z = np.asarray(z, dtype=float)
    p = np.asarray(prices, dtype=float)
    spent = z @ p
    if spent > capital + 1e-9:
        return math.inf
    return float(capital - spent + np.abs(capital * np.asarray(w) - z * p).sum())


class _Incumbent:

    __slots__ = [
        'cost',
        'z',
        'spent',
    ]

    def __init__(self) -> None:
        self.cost = math.inf
        self.z: th.Optional[th.Tuple[int, ...]] = None
        self.spent = -math.inf

    def offer(self, cost: float, z: th.Tuple[int, ...], spent: float) -> None:
        if cost < self.cost - TIE_TOL:
            self.cost, self.z, self.spent = cost, z, spent
        elif cost <= self.cost + TIE_TOL and (-spent, z) < (-self.spent, self.z):
            self.cost, self.z, self.spent = cost, z, spent


def _centered(center: int, hi: int) -> th.Iterator[int]:
    """0..hi ordered by distance from center, lower value first on equal distance."""
    center = min(max(center, 0), hi)
    yield center
    for d in range(1, hi + 1):
        if center - d >= 0:
            yield center - d
        if center + d <= hi:
            yield center + d


def discretize(w: th.Sequence[float], prices: th.Sequence[float], capital: float) -> Allocation:
    """
        Exact minimizer of C_extra + sum_i |C w_i - z_i p_i| over integer
        0 <= z_i <= floor(C / p_i) with z'p <= C, by depth-first branch and
        bound. Ties go to the larger spend, then the lexicographically
        smaller z.
    """
    w = np.asarray(w, dtype=float)
    p = np.asarray(prices, dtype=float)
    if w.shape != p.shape:
        raise ShapeError(f"{w.size} weights for {p.size} prices")
    if np.any(w < -SIMPLEX_TOL) or abs(w.sum() - 1.) > SIMPLEX_TOL:
        raise DomainError("weights must lie on the probability simplex")
    if not np.all(p > 0):
        raise DomainError("prices must be positive")
    if np.all(p > capital):
        raise InfeasibleProblem(f"every price exceeds capital {capital}")

    n = p.size
    target = capital * w
    ranges = [max_shares(capital, pi) for pi in p]
    # min over z_i of |C w_i - z_i p_i| is at floor or ceil of the target share count
    nearest = []
    for i in range(n):
        lo = min(int(target[i] // p[i]), ranges[i])
        hi = min(lo + 1, ranges[i])
        nearest.append(min(abs(target[i] - lo * p[i]), abs(target[i] - hi * p[i])))
    rest_min = np.concatenate([np.cumsum(nearest[::-1])[::-1], [0.]])
    rest_target = np.concatenate([np.cumsum(target[::-1])[::-1], [0.]])

    best = _Incumbent()
    z = [0] * n

    def branch(i: int, spent: float, partial: float) -> None:
        if i == n:
            best.offer(partial + capital - spent, tuple(z), spent)
            return
        bound = partial + max(rest_min[i], capital - spent - rest_target[i])
        if bound > best.cost + TIE_TOL:
            return
        hi = min(ranges[i], max_shares(capital - spent, p[i]))
        for v in _centered(int(target[i] // p[i]), hi):
            z[i] = v
            branch(i + 1, spent + v * p[i], partial + abs(target[i] - v * p[i]))
        z[i] = 0

    branch(0, 0., 0.)
    return Allocation.from_shares(best.z, p, capital)
