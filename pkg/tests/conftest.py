from pathlib import Path

import pytest

from polsynth.corpus import random_corpus
from polsynth.problem_file import load_problem, parse_explicit_model

BENCHMARKS = Path(__file__).resolve().parent.parent / "polsynth" / "benchmarks"


def benchmark_text(name: str) -> str:
    return (BENCHMARKS / name).read_text(encoding="utf-8")


@pytest.fixture
def mixing():
    """Four states; deterministic stationary policies reach s4 with probability 1/2 at most."""
    return parse_explicit_model(benchmark_text("mixing.model"))


@pytest.fixture
def shared_entry():
    return parse_explicit_model(benchmark_text("shared_entry.model"))


@pytest.fixture
def slow_exit():
    """s0 leaves for the goal with probability 1/100 per step at cost 1: expected total cost 100."""
    return parse_explicit_model("""
observation wait
observation done
action go
state start obs=wait
state s0 obs=wait
state goal obs=done
init start
trans start go s0 1
trans s0 go s0 99/100
trans s0 go goal 1/100
trans goal go goal 1
reward s0 go 1
""")


@pytest.fixture
def mixing_problem():
    return load_problem(BENCHMARKS / "mixing.prob")


@pytest.fixture
def small_corpus():
    return list(random_corpus(12, seed=3))


@pytest.fixture
def database(tmp_path):
    from polsynth.storage import configure_storage

    return configure_storage(f"sqlite:///{tmp_path / 'runs.db'}")
