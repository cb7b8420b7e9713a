"""Bundled benchmark runs and the random-corpus oracle check."""
import logging
import time
from pathlib import Path

from .corpus import random_corpus
from .evaluation import enumerate_policies_bruteforce
from .milp.branch_and_bound import SolveParams
from .models.specification import Specification, SpecKind, SynthesisProblem
from .problem_file import load_problem
from .synthesis import SynthesisOptions, solve_once, synthesize
from .transforms import RandomizationMode, apply_randomization

logger = logging.getLogger(__name__)

BENCHMARK_DIR = Path(__file__).parent / "benchmarks"

UNSAT = "UNSAT"


class BenchmarkRow:
    """One benchmark run: problem file, randomization, whether the heuristic runs.

    `expected` is what the bundled port must give: a number (within `tolerance`), UNSAT,
    or None. With `limit` the run must instead be satisfied with a value of at most
    `limit`. `reference` is the externally reported value, shown next to the result; it
    differs from `expected` where the port does (see the model file's port notes).
    """

    def __init__(self, name: str, problem: str, mode: RandomizationMode, heuristic: bool,
                 expected, tolerance: float = 0.0, reference=None, limit: float = None):
        self.name = name
        self.problem = problem
        self.mode = mode
        self.heuristic = heuristic
        self.expected = expected
        self.tolerance = tolerance
        self.reference = reference if reference is not None else expected
        self.limit = limit

    @property
    def label(self) -> str:
        return f"{self.name}/{self.mode.value}" + ("+H" if self.heuristic else "")

    @property
    def checked(self) -> bool:
        return self.expected is not None or self.limit is not None

    @property
    def expectation(self):
        """The expected column of the results table."""
        if self.limit is not None:
            return f"<={self.limit:g}"
        return self.expected

    def agrees(self, obtained, satisfied: bool = True):
        """Whether a result matches this row; None for rows without an expectation."""
        if self.limit is not None:
            return satisfied and not isinstance(obtained, str) and obtained <= self.limit + self.tolerance
        if self.expected is None:
            return None
        if isinstance(self.expected, str) or isinstance(obtained, str):
            return self.expected == obtained
        return abs(obtained - self.expected) <= self.tolerance


PURE, LIGHT, HEAVY = RandomizationMode.PURE, RandomizationMode.LIGHT, RandomizationMode.HEAVY

BENCHMARKS = [
    BenchmarkRow("mixing", "mixing.prob", PURE, False, 0.5, 1e-9),
    BenchmarkRow("mixing", "mixing.prob", LIGHT, False, 1.0, 1e-9),
    BenchmarkRow("4x4grid_avoid", "grid_avoid.prob", PURE, False, 0.21, 0.02),
    BenchmarkRow("4x4grid_avoid", "grid_avoid.prob", LIGHT, False, 0.30, 0.02),
    BenchmarkRow("4x4grid_avoid", "grid_avoid.prob", HEAVY, False, 0.85, 0.02),
    BenchmarkRow("4x4grid_avoid-cost", "grid_avoid_cost.prob", PURE, False, UNSAT),
    BenchmarkRow("4x4grid_avoid-cost", "grid_avoid_cost.prob", LIGHT, False, None, reference=13.63, limit=15.0),
    BenchmarkRow("1d", "1d.prob", PURE, False, 0.61, 0.01),
    BenchmarkRow("1d", "1d.prob", PURE, True, 0.83, 0.01),
    BenchmarkRow("4x4.95", "4x4.prob", PURE, False, 0.22, 0.05),
    BenchmarkRow("4x4.95", "4x4.prob", HEAVY, False, 3.0, 0.05),
    BenchmarkRow("cheese.95", "cheese.prob", PURE, False, 0.5298, 0.005, reference=0.62),
    BenchmarkRow("cheese.95-bad", "cheese_bad.prob", PURE, False, 0.5298, 0.005, reference=0.40),
    BenchmarkRow("shuttle.95", "shuttle.prob", PURE, False, 18.0, 0.1),
    BenchmarkRow("shuttle.95", "shuttle.prob", PURE, True, 31.25, 0.2),
]


def run_row(row: BenchmarkRow, solve_params: SolveParams = None, max_iters: int = 50) -> dict:
    problem = load_problem(BENCHMARK_DIR / row.problem)
    opts = SynthesisOptions(randomization=row.mode, solve_params=solve_params or SolveParams(),
                            max_iters=max_iters, split=row.heuristic)
    started = time.monotonic()
    if row.heuristic or len(problem.specs) > 1:
        outcome = synthesize(problem, opts)
    else:
        outcome = solve_once(problem, opts)
    seconds = time.monotonic() - started

    obtained = outcome.best_value if outcome.satisfied else UNSAT
    agrees = row.agrees(obtained, outcome.satisfied)
    logger.info("%s: expected %s, obtained %s (%.2fs)", row.label, row.expectation, obtained, seconds)
    return {
        "benchmark": row.label,
        "expected": row.expectation,
        "reference": row.reference,
        "obtained": obtained,
        "objective": outcome.objective,
        "agrees": agrees,
        "states": outcome.pomdp.num_states if outcome.pomdp is not None else None,
        "seconds": seconds,
    }


def run_benchmarks(names=None, solve_params: SolveParams = None, max_iters: int = 50) -> list:
    rows = [row for row in BENCHMARKS if not names or row.name in names]
    return [run_row(row, solve_params, max_iters) for row in rows]


def check_corpus(count: int, seed: int = 0, modes=tuple(RandomizationMode), tolerance: float = 1e-6) -> list:
    """MILP optimum against exhaustive enumeration on random POMDPs; returns the mismatches."""
    mismatches = []
    for instance_seed, pomdp, targets in random_corpus(count, seed):
        specs = [Specification(SpecKind.REACH_MAX, targets=targets),
                 Specification(SpecKind.DISC_REWARD_MAX, discount=0.9)]
        for spec in specs:
            for mode in modes:
                outcome = solve_once(SynthesisProblem(pomdp, [spec]), SynthesisOptions(randomization=mode))
                randomized, catalog = apply_randomization(pomdp, mode)
                expected, _ = enumerate_policies_bruteforce(randomized, spec)
                if outcome.objective is None or abs(outcome.objective - expected) > tolerance:
                    mismatches.append({
                        "seed": instance_seed,
                        "spec": spec.describe(),
                        "mode": mode.value,
                        "milp": outcome.objective,
                        "enumeration": expected,
                    })
    logger.info("corpus check: %d instance(s), %d mismatch(es)", count, len(mismatches))
    return mismatches


def format_table(results: list) -> str:
    lines = [f"{'benchmark':<28} {'expected':>10} {'reference':>10} {'obtained':>12} {'agrees':>7} {'time':>8}"]
    for result in results:
        expected = "-" if result["expected"] is None else str(result["expected"])
        reference = result.get("reference")
        reference = "-" if reference is None else str(reference)
        obtained = result["obtained"]
        shown = obtained if isinstance(obtained, str) else f"{obtained:.4f}"
        agrees = {True: "yes", False: "NO", None: "-"}[result["agrees"]]
        lines.append(f"{result['benchmark']:<28} {expected:>10} {reference:>10} {shown:>12} {agrees:>7} "
                     f"{result['seconds']:>7.2f}s")
    return "\n".join(lines)
