"""Command-line front end.

Exit codes: 0 success, 1 unsatisfied specification, 2 usage or input error, 3 internal error.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .bench import check_corpus, format_table, run_benchmarks
from .cassandra import determinize_observations, parse_cassandra
from .config import Settings, configure_logging
from .errors import InputError, PolsynthError
from .evaluation import evaluate_specification
from .milp.branch_and_bound import SolveParams
from .milp.encodings import stack_specifications
from .milp.lp_format import write_lp
from .models.policy import StationaryPolicy
from .models.pomdp_input import validate
from .models.run_record import RunRecord, input_digest
from .problem_file import load_problem, parse_explicit_model, serialize_problem
from .storage import configure_storage, deleting_run_record, get_all_run_records, saving_run_record
from .synthesis import SynthesisOptions, solve_once, synthesize
from .transforms import RandomizationMode, apply_randomization

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rand", choices=[mode.value for mode in RandomizationMode], default=None,
                        help="static randomization of the action set (default: problem option, else pure)")
    parser.add_argument("--timeout", type=float, default=None,
                        help="stop this many seconds after the first incumbent")
    parser.add_argument("--to-optimality", action="store_true", help="ignore any timeout and solve to optimality")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)


def _add_record_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", metavar="PATH", default=None, help="write the run record as JSON")
    parser.add_argument("--store", action="store_true", help="save the run record in the database")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polsynth", description="Stationary POMDP policy synthesis via MILP")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=f"polsynth {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="parse and validate a model or a problem")
    target = check.add_mutually_exclusive_group(required=True)
    target.add_argument("--model", type=Path)
    target.add_argument("--problem", type=Path)
    check.add_argument("--format", choices=["cassandra", "explicit"], default=None,
                       help="model format (default: cassandra for .pomdp files, else explicit)")

    solve = commands.add_parser("solve", help="one MILP over the given POMDP")
    solve.add_argument("--problem", type=Path, required=True)
    _add_solver_flags(solve)
    _add_record_flags(solve)

    synth = commands.add_parser("synthesize", help="splitting heuristic and lexicographic stages")
    synth.add_argument("--problem", type=Path, required=True)
    synth.add_argument("--max-iters", type=int, default=None)
    synth.add_argument("--no-split", action="store_true", help="solve without state splitting")
    synth.add_argument("--export-model", type=Path, default=None,
                       help="write the split model of the best iteration as a problem file")
    _add_solver_flags(synth)
    _add_record_flags(synth)

    evaluate = commands.add_parser("eval", help="evaluate a policy file on a problem")
    evaluate.add_argument("--problem", type=Path, required=True)
    evaluate.add_argument("--policy", type=Path, required=True)
    evaluate.add_argument("--rand", choices=[mode.value for mode in RandomizationMode], default=None)
    _add_record_flags(evaluate)

    export = commands.add_parser("export-lp", help="write the MILP of a problem in CPLEX LP format")
    export.add_argument("--problem", type=Path, required=True)
    export.add_argument("--out", type=Path, default=None, help="output path (default: stdout)")
    export.add_argument("--rand", choices=[mode.value for mode in RandomizationMode], default=None)

    bench = commands.add_parser("bench", help="run the bundled benchmarks")
    bench.add_argument("--only", nargs="+", default=None, metavar="NAME")
    bench.add_argument("--corpus", type=int, default=None, metavar="N",
                       help="check N random POMDPs against exhaustive enumeration instead")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--timeout", type=float, default=None)
    bench.add_argument("--max-iters", type=int, default=None)
    bench.add_argument("--json", metavar="PATH", default=None)

    history = commands.add_parser("history", help="list or delete stored run records")
    history.add_argument("--digest", default=None)
    history.add_argument("--delete", type=int, default=None, metavar="ID")
    return parser


def _randomization(args, problem) -> RandomizationMode:
    return RandomizationMode(args.rand or problem.options.get("randomization", "pure"))


def _solve_params(args, problem, settings: Settings) -> SolveParams:
    workers = args.workers if args.workers is not None else settings.workers
    if args.to_optimality:
        return SolveParams(seed=args.seed, workers=workers)
    timeout = args.timeout or problem.options.get("timeout") or settings.timeout
    if timeout:
        return SolveParams.time_limited(timeout, seed=args.seed, workers=workers)
    return SolveParams(seed=args.seed, workers=workers)


def synthesis_options(args, problem, settings: Settings) -> SynthesisOptions:
    """CLI flags first, then the problem's option lines, then the environment."""
    max_iters = getattr(args, "max_iters", None) or problem.options.get("max_iters") or settings.max_iters
    return SynthesisOptions(
        randomization=_randomization(args, problem),
        solve_params=_solve_params(args, problem, settings),
        max_iters=max_iters,
        growth_factor=settings.growth_factor,
        split=not getattr(args, "no_split", False),
    )


def _format_value(value) -> str:
    return "-" if value is None else f"{value:.9g}"


def _print_outcome(outcome) -> None:
    problem = outcome.problem
    if not outcome.satisfied:
        print("UNSAT" if outcome.unsatisfied_spec is None else f"UNSAT spec {outcome.unsatisfied_spec}")
    if outcome.objective is not None:
        print(f"objective {outcome.objective:.9g}")
    values = outcome.values or [None] * len(problem.specs)
    for spec, value in zip(problem.specs, values):
        print(f"value {_format_value(value)}  {spec.describe(problem.pomdp)}")
    for line in outcome.policy_lines():
        print(line)
    if outcome.stop_reason:
        print(f"stopped: {outcome.stop_reason} after {len(outcome.trace)} iteration(s)")


def _emit_record(args, record: RunRecord) -> None:
    if args.json:
        Path(args.json).write_text(json.dumps(record.to_dict(), indent=2), encoding="utf-8")
        logger.info("wrote run record to %s", args.json)
    if args.store:
        record_id = saving_run_record(record)
        if record_id is not None:
            print(f"stored run record {record_id}")


def _outcome_record(command: str, problem, opts: SynthesisOptions, outcome, seconds: float) -> RunRecord:
    results = outcome.to_dict()
    trace = results.pop("trace")
    return RunRecord(
        command=command,
        digest=input_digest(serialize_problem(problem)),
        options=opts.to_dict(),
        results=results,
        trace=trace,
        timings={"total": seconds, "iterations": [record.seconds for record in outcome.trace]},
    )


def _load_model(path: Path, kind: str = None):
    kind = kind or ("cassandra" if path.suffix == ".pomdp" else "explicit")
    text = path.read_text(encoding="utf-8")
    if kind == "cassandra":
        return determinize_observations(parse_cassandra(text))
    return parse_explicit_model(text)


def cmd_check(args, settings: Settings) -> int:
    if args.problem is not None:
        problem = load_problem(args.problem)
        pomdp = problem.pomdp
    else:
        problem = None
        pomdp = _load_model(args.model, args.format)
    report = validate(pomdp)
    if report:
        for error in report:
            print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE
    print(f"ok: {pomdp.num_states} states, {pomdp.num_actions} actions, {pomdp.num_observations} observations")
    if problem is not None:
        for spec in problem.specs:
            print(f"spec {spec.describe(pomdp)}")
    return EXIT_OK


def _run_pipeline(args, settings: Settings, command: str, pipeline) -> int:
    problem = load_problem(args.problem)
    opts = synthesis_options(args, problem, settings)
    started = time.monotonic()
    outcome = pipeline(problem, opts)
    seconds = time.monotonic() - started
    _print_outcome(outcome)
    _emit_record(args, _outcome_record(command, problem, opts, outcome, seconds))
    return EXIT_OK if outcome.satisfied else EXIT_UNSATISFIED


def cmd_solve(args, settings: Settings) -> int:
    return _run_pipeline(args, settings, "solve", solve_once)


def cmd_synthesize(args, settings: Settings) -> int:
    def pipeline(problem, opts):
        outcome = synthesize(problem, opts)
        if args.export_model is not None and outcome.base is not None:
            split = problem.with_pomdp(outcome.base, outcome.relation)
            args.export_model.write_text(serialize_problem(split), encoding="utf-8")
            logger.info("wrote split model with %d states to %s", outcome.base.num_states, args.export_model)
        return outcome

    return _run_pipeline(args, settings, "synthesize", pipeline)


def cmd_eval(args, settings: Settings) -> int:
    problem = load_problem(args.problem)
    mode = _randomization(args, problem)
    randomized, _ = apply_randomization(problem.pomdp, mode)
    policy = StationaryPolicy.from_text(args.policy.read_text(encoding="utf-8"), randomized)
    stage = problem.with_pomdp(randomized)
    values = [evaluate_specification(randomized, spec, policy) for spec in stage.specs]
    satisfied = all(spec.is_met_by(value) for spec, value in zip(stage.specs, values))
    if not satisfied:
        print("UNSAT")
    for spec, value in zip(stage.specs, values):
        print(f"value {_format_value(value)}  {spec.describe(randomized)}")

    record = RunRecord(
        command="eval",
        digest=input_digest(serialize_problem(problem), "\n".join(policy.to_lines(randomized))),
        options={"randomization": mode.value},
        results={"satisfied": satisfied, "values": values, "policy": policy.to_dict(randomized)},
    )
    _emit_record(args, record)
    return EXIT_OK if satisfied else EXIT_UNSATISFIED


def cmd_export_lp(args, settings: Settings) -> int:
    problem = load_problem(args.problem)
    randomized, _ = apply_randomization(problem.pomdp, _randomization(args, problem))
    model, _ = stack_specifications(problem.with_pomdp(randomized))
    text = write_lp(model)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
        print(f"wrote {model.num_variables} variables and {model.num_constraints} constraints to {args.out}")
    return EXIT_OK


def cmd_bench(args, settings: Settings) -> int:
    if args.corpus is not None:
        mismatches = check_corpus(args.corpus, args.seed)
        for mismatch in mismatches:
            print(f"mismatch: seed {mismatch['seed']} {mismatch['spec']} {mismatch['mode']}: "
                  f"milp {_format_value(mismatch['milp'])}, enumeration {mismatch['enumeration']:.9g}")
        print(f"{args.corpus} instance(s), {len(mismatches)} mismatch(es)")
        return EXIT_OK if not mismatches else EXIT_UNSATISFIED

    timeout = args.timeout or settings.timeout
    params = SolveParams.time_limited(timeout, seed=args.seed) if timeout else SolveParams(seed=args.seed)
    results = run_benchmarks(args.only, params, args.max_iters or settings.max_iters)
    print(format_table(results))
    if args.json:
        Path(args.json).write_text(json.dumps(results, indent=2), encoding="utf-8")
    return EXIT_OK if all(result["agrees"] is not False for result in results) else EXIT_UNSATISFIED


def cmd_history(args, settings: Settings) -> int:
    if args.delete is not None:
        if not deleting_run_record(args.delete):
            print(f"error: run record {args.delete} could not be deleted", file=sys.stderr)
            return EXIT_USAGE
        print(f"deleted run record {args.delete}")
        return EXIT_OK
    for row in get_all_run_records(args.digest):
        results = row["record"].get("results", {})
        print(f"{row['id']:>5}  {row['created_at']}  {row['command']:<10}  {row['input_digest'][:12]}  "
              f"satisfied={results.get('satisfied')}  values={results.get('values')}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "synthesize": cmd_synthesize,
    "eval": cmd_eval,
    "export-lp": cmd_export_lp,
    "bench": cmd_bench,
    "history": cmd_history,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    settings = Settings()
    configure_logging(settings, args.verbose)
    if args.command == "history" or getattr(args, "store", False):
        configure_storage(settings.database_url)

    try:
        return COMMANDS[args.command](args, settings)
    except (InputError, OSError) as e:
        logger.debug("input error in %s", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PolsynthError as e:
        logger.error("error in %s: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception("internal error in %s", args.command)
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
