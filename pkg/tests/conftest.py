import itertools
import os

import pytest
from hypothesis import HealthCheck, settings

from subtaskgen import dsl, fixtures
from subtaskgen.generate import GenConfig, random_corpus
from subtaskgen.metrics import KAPPA, code_complexity

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def eq1(complexities, kappa=KAPPA):
    """Worst jump written out term by term, with the empty program first."""
    seq = [kappa] + list(complexities)
    return max(min(seq[k] - seq[j] for j in range(k)) for k in range(1, len(seq)))


def brute_force_objective(candidates, k_prime, kappa=KAPPA):
    """Minimum worst jump over every order-preserving k'-subsequence that
    ends at the last candidate, plus the list of minimisers."""
    comp = [code_complexity(c, kappa) for _, c in candidates]
    last = len(candidates) - 1
    best, argmins = None, []
    for head in itertools.combinations(range(last), k_prime - 1):
        idx = head + (last,)
        v = eq1([comp[i] for i in idx], kappa)
        if best is None or v < best:
            best, argmins = v, [idx]
        elif v == best:
            argmins.append(idx)
    return best, argmins


@pytest.fixture(scope="session")
def h08():
    return fixtures.h08()


@pytest.fixture(scope="session")
def h16():
    return fixtures.h16()


@pytest.fixture(scope="session")
def sweep3():
    return fixtures.karel_sweep3()


@pytest.fixture(scope="session")
def sweep6():
    return fixtures.karel_sweep6()


@pytest.fixture(scope="session")
def small_karel():
    return random_corpus(12, 3, GenConfig(dialect=dsl.KAREL, n_grids=3), prefix="sk")


@pytest.fixture(scope="session")
def small_maze():
    return random_corpus(12, 3, GenConfig(dialect=dsl.MAZE, n_grids=3), prefix="sm")


@pytest.fixture(scope="session")
def single_grid_tasks():
    """Single-grid generated tasks of both dialects."""
    out = []
    for dialect in dsl.DIALECTS:
        out += random_corpus(10, 5, GenConfig(dialect=dialect, n_grids=1), prefix=f"s1{dialect[0]}")
    return out
