import argparse
import json
import logging
import os
import sys
import typing as th
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from .baseline import N_STARTS, discretize, solve_constrained, solve_penalty
from .circuit import to_text
from .errors import DomainError, PortfolioError, ResourceLimit
from .eval_report import Method, MethodResult, compare_suite, objective_value, qubo_hubo_report, records_frame
from .exact import full_spectrum, ground_state, k_smallest
from .market_data import load_prices, synthetic_universe, write_prices
from .optim import OptimizerConfig, OptimizerKind, run_qaoa
from .problem import (LAMBDA_SWEEP, QUBIT_RANGE, GeneratorConfig, Order, PortfolioProblem, compile, decode,
                      generate_problems)
from .qaoa import QaoaConfig, synthesize_circuit

logger = logging.getLogger(__name__)

METHODS = {
    "classical": Method.CLASSICAL_CONSTRAINED,
    "classical-penalty": Method.CLASSICAL_PENALTY,
    "exact": Method.HUBO_EXACT,
    "qaoa": Method.QAOA,
}


@dataclass(frozen=True)
class RunManifest:
    command: str
    seed: int
    data: th.Optional[str] = None
    output: th.Optional[str] = None
    config: th.Dict[str, th.Any] = field(default_factory=dict)

    def write(self, path: str) -> str:
        dump_json(asdict(self), path)
        return path


def dump_json(payload: th.Any, path: str) -> None:
    # sorted keys and fixed separators: same run, same bytes
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True, allow_nan=True)
        f.write("\n")


def load_json(path: str) -> th.Any:
    if not os.path.exists(path):
        raise DomainError(f"{path} does not exist")
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise DomainError(f"{path}: {e}") from e


def load_problems(path: str) -> th.List[PortfolioProblem]:
    payload = load_json(path)
    problems = [PortfolioProblem.from_dict(d) for d in payload.get("problems", [])]
    if not problems:
        raise DomainError(f"{path} holds no problems")
    return problems


def _parse_counts(text: str) -> th.Dict[int, int]:
    counts = {}
    for item in text.split(","):
        q, _, n = item.partition(":")
        counts[int(q)] = int(n)
    return counts


def cmd_synthesize(args: argparse.Namespace) -> None:
    series = synthetic_universe(args.tickers, args.days, args.seed)
    write_prices(series, args.out)


def cmd_generate(args: argparse.Namespace) -> None:
    universe = load_prices(args.data)
    config = GeneratorConfig(
        counts=args.counts or {q: 10 for q in QUBIT_RANGE},
        max_attempts=args.max_attempts,
        order=Order(args.order),
    )
    problems = generate_problems(universe, args.seed, config=config)
    dump_json({"seed": args.seed, "problems": [p.to_dict() for p in problems]}, args.out)
    RunManifest("generate", args.seed, args.data, args.out, {
        "counts": {str(k): v for k, v in sorted(config.counts.items())},
        "max_attempts": config.max_attempts,
        "order": config.order.value,
    }).write(args.out + ".manifest.json")
    logger.info("wrote %d problems to %s", len(problems), args.out)


def _lambdas(args: argparse.Namespace, problem: PortfolioProblem) -> th.List[float]:
    if args.lambda_sweep:
        return list(LAMBDA_SWEEP)
    return [args.lam if args.lam is not None else problem.lam]


def _classical(problem: PortfolioProblem, method: Method, seed: int, n_starts: int) -> MethodResult:
    solver = solve_constrained if method is Method.CLASSICAL_CONSTRAINED else solve_penalty
    sol = solver(problem.moments, *problem.weights, seed=seed, n_starts=n_starts)
    w = sol.weights
    # the penalty form only approximately spends the budget; rescale onto the simplex
    w = w / w.sum() if w.sum() > 0 else np.full(w.size, 1. / w.size)
    alloc = discretize(w, problem.prices, problem.capital)
    alloc = alloc.with_objective(objective_value(alloc.z, problem.moments, *problem.weights))
    return MethodResult(problem.problem_id, method, alloc, extra={"continuous": sol.to_dict()})


def _solve_one(problem: PortfolioProblem, args: argparse.Namespace) -> th.List[MethodResult]:
    method = METHODS[args.method]
    if method in (Method.CLASSICAL_CONSTRAINED, Method.CLASSICAL_PENALTY):
        return [_classical(problem, method, args.seed, args.starts)]

    out = []
    for lam in _lambdas(args, problem):
        variant = problem.with_lambda(lam).with_order(args.order)
        if args.slack:
            variant = replace(variant, slack=True)
        try:
            cp = compile(variant)
            if method is Method.HUBO_EXACT:
                alloc, _ = ground_state(cp)
                ef = None
            else:
                qcfg = QaoaConfig(p=args.p, seed=args.seed, shots=args.shots)
                ocfg = OptimizerConfig(kind=args.optimizer, max_evals=args.max_evals, seed=args.seed)
                result = run_qaoa(cp, qcfg, ocfg)
                alloc = decode(result.best_bitstring, cp)
                ef = result.enhancement_factor
                if args.trace_dir:
                    result.trace.to_csv(os.path.join(args.trace_dir, f"trace_{problem.problem_id}_{lam:g}.csv"))
        except ResourceLimit as e:
            logger.warning("problem %d skipped: %s", problem.problem_id, e)
            out.append(MethodResult(problem.problem_id, method, None, lam, status="resource_limit"))
            continue
        alloc = alloc.with_objective(objective_value(alloc.z, problem.moments, *problem.weights))
        out.append(MethodResult(problem.problem_id, method, alloc, lam, ef))
    return out


def cmd_solve(args: argparse.Namespace) -> None:
    problems = sorted(load_problems(args.problems), key=lambda p: p.problem_id)
    if args.trace_dir:
        os.makedirs(args.trace_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        # map keeps input order, so output order is by problem id
        per_problem = list(pool.map(lambda p: _solve_one(p, args), problems))
    results = [r for rs in per_problem for r in rs]
    dump_json({"method": METHODS[args.method].value, "results": [r.to_dict() for r in results]}, args.out)
    RunManifest("solve", args.seed, args.problems, args.out, {
        "method": args.method,
        "lambdas": list(LAMBDA_SWEEP) if args.lambda_sweep else args.lam,
        "order": args.order,
        "slack": args.slack,
        "p": args.p,
        "optimizer": args.optimizer,
        "max_evals": args.max_evals,
        "shots": args.shots,
        "starts": args.starts,
    }).write(args.out + ".manifest.json")
    logger.info("wrote %d results to %s", len(results), args.out)


def cmd_compare(args: argparse.Namespace) -> None:
    problems = load_problems(args.problems)
    results = []
    for path in args.results:
        batch = [MethodResult.from_dict(d) for d in load_json(path).get("results", [])]
        if not batch:
            raise DomainError(f"{path} holds no results")
        results.extend(batch)
    records, summary = compare_suite(problems, results)
    os.makedirs(args.out, exist_ok=True)
    dump_json([r.to_dict() for r in records], os.path.join(args.out, "records.json"))
    records_frame(records).to_csv(os.path.join(args.out, "records.csv"), index=False)
    summary.to_csv(os.path.join(args.out, "summary.csv"), index_label="row")
    if args.qubo_hubo:
        for name, frame in qubo_hubo_report(problems).items():
            frame.to_csv(os.path.join(args.out, f"{name}.csv"), index=False, float_format="%.12g")
    RunManifest("compare", 0, args.problems, args.out, {
        "results": list(args.results),
        "qubo_hubo": args.qubo_hubo,
    }).write(os.path.join(args.out, "manifest.json"))
    print(summary.to_string())


def _pick(problems: th.Sequence[PortfolioProblem], pid: int) -> PortfolioProblem:
    for p in problems:
        if p.problem_id == pid:
            return p
    raise DomainError(f"no problem with id {pid}")


def cmd_spectrum(args: argparse.Namespace) -> None:
    problem = _pick(load_problems(args.problems), args.id)
    if args.lam is not None:
        problem = problem.with_lambda(args.lam)
    cp = compile(problem.with_order(args.order))
    spectrum = k_smallest(cp, args.k) if args.k else full_spectrum(cp)
    spectrum.to_csv(args.out)
    logger.info("ground state %s (E=%.6g) -> z=%s", spectrum.argmin_bits, spectrum.min_energy,
                decode(spectrum.argmin_bits, cp).z)


def cmd_circuit_metrics(args: argparse.Namespace) -> None:
    rows = []
    params = [1.] * (2 * args.p)
    for problem in load_problems(args.problems):
        row = {"id": problem.problem_id}
        for order in (Order.QUBO, Order.HUBO):
            cp = compile(problem.with_order(order))
            gates, metrics = synthesize_circuit(cp, params)
            row["qubits"] = cp.n_qubits
            row[f"gates_{order.value}"] = metrics.total
            row[f"depth_{order.value}"] = metrics.depth
            row[f"cnot_{order.value}"] = metrics.counts["CNOT"]
            if args.gates_dir:
                os.makedirs(args.gates_dir, exist_ok=True)
                with open(os.path.join(args.gates_dir, f"{problem.problem_id}_{order.value}.txt"), "w") as f:
                    f.write(to_text(gates))
        rows.append(row)
    pd.DataFrame(rows).to_csv(args.out, index=False)


def build_parser() -> argparse.ArgumentParser:
    arg_parser = argparse.ArgumentParser(prog="portfolio", description="Higher-order portfolio optimization toolkit")
    arg_parser.add_argument("--log-level", metavar="Level", type=str, default="INFO",
                            choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    arg_parser.add_argument("-v", "--verbose", action="store_true", help="Same as --log-level DEBUG")
    sub = arg_parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="Write the seeded synthetic price universe")
    p.add_argument("--out", metavar="File", type=str, required=True, help="Price CSV to write")
    p.add_argument("--tickers", metavar="Tickers", type=int, default=30, help="Number of tickers")
    p.add_argument("--days", metavar="Days", type=int, default=756, help="Number of daily returns")
    p.add_argument("--seed", metavar="Seed", type=int, default=2015, help="Random seed")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("generate", help="Sample random problems from a price universe")
    p.add_argument("--data", metavar="Prices", type=str, required=True, help="Price CSV (date,ticker,close)")
    p.add_argument("--seed", metavar="Seed", type=int, default=0, help="Random seed")
    p.add_argument("--out", metavar="File", type=str, required=True, help="Problem JSON to write")
    p.add_argument("--counts", metavar="Counts", type=_parse_counts, default=None,
                   help="Problems per qubit count, e.g. 6:10,7:10 (default 10 for each of 6..15)")
    p.add_argument("--max-attempts", metavar="Attempts", type=int, default=GeneratorConfig.max_attempts,
                   help="Sampling attempts before giving up")
    p.add_argument("--order", type=str, choices=[o.value for o in Order], default=Order.HUBO.value)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="Solve every problem with one method")
    p.add_argument("--problems", metavar="File", type=str, required=True, help="Problem JSON")
    p.add_argument("--method", type=str, choices=list(METHODS), required=True, help="Solution method")
    p.add_argument("--out", metavar="File", type=str, required=True, help="Result JSON to write")
    p.add_argument("--seed", metavar="Seed", type=int, default=0, help="Random seed")
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", metavar="Lambda", type=float, default=None, help="Budget penalty weight")
    lam.add_argument("--lambda-sweep", action="store_true", help="One result per lambda in the default sweep")
    p.add_argument("--order", type=str, choices=[o.value for o in Order], default=Order.HUBO.value)
    p.add_argument("--slack", action="store_true", help="Forbid overspending with slack qubits")
    p.add_argument("--p", metavar="Layers", type=int, default=1, help="QAOA layers")
    p.add_argument("--optimizer", type=str, choices=[k.value for k in OptimizerKind], default=OptimizerKind.CMAES.value)
    p.add_argument("--max-evals", metavar="Evals", type=int, default=OptimizerConfig.max_evals,
                   help="Objective evaluations per problem")
    p.add_argument("--shots", metavar="Shots", type=int, default=0, help="Measurement shots (0 = exact)")
    p.add_argument("--starts", metavar="Starts", type=int, default=N_STARTS, help="Multi-starts of the classical solvers")
    p.add_argument("--jobs", metavar="Jobs", type=int, default=1, help="Problems solved in parallel")
    p.add_argument("--trace-dir", metavar="Directory", type=str, default=None, help="Write optimizer traces here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="Score results and write the comparison report")
    p.add_argument("--problems", metavar="File", type=str, required=True, help="Problem JSON")
    p.add_argument("--results", metavar="File", type=str, nargs="+", required=True, help="Result JSON files")
    p.add_argument("--out", metavar="Directory", type=str, required=True, help="Report directory")
    p.add_argument("--qubo-hubo", action="store_true", help="Also write QUBO vs HUBO comparison tables")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spectrum", help="Write the energy spectrum of one problem")
    p.add_argument("--problems", metavar="File", type=str, required=True, help="Problem JSON")
    p.add_argument("--id", metavar="Id", type=int, default=0, help="Problem id")
    p.add_argument("--out", metavar="File", type=str, required=True, help="Spectrum CSV to write")
    p.add_argument("--k", metavar="K", type=int, default=0, help="Only the k lowest states (0 = all)")
    p.add_argument("--lambda", dest="lam", metavar="Lambda", type=float, default=None, help="Budget penalty weight")
    p.add_argument("--order", type=str, choices=[o.value for o in Order], default=Order.HUBO.value)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("circuit-metrics", help="Gate counts and depth of QUBO and HUBO circuits")
    p.add_argument("--problems", metavar="File", type=str, required=True, help="Problem JSON")
    p.add_argument("--out", metavar="File", type=str, required=True, help="Metrics CSV to write")
    p.add_argument("--p", metavar="Layers", type=int, default=1, help="QAOA layers")
    p.add_argument("--gates-dir", metavar="Directory", type=str, default=None, help="Write gate lists here")
    p.set_defaults(func=cmd_circuit_metrics)
    return arg_parser


def main(argv: th.Optional[th.Sequence[str]] = None) -> int:
    arg_parser = build_parser()
    args = arg_parser.parse_args(argv)
    level = "DEBUG" if args.verbose else args.log_level
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except PortfolioError as e:
        logger.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
