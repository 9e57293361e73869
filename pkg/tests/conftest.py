import itertools
import sys

import numpy as np
import pytest

from rrhmm.hmm import example1, example2, example3, polygon_hmm, random_rrhmm


def all_sequences(n, t):
    return list(itertools.product(range(n), repeat=t))


def brute_force_joint(params, seq):
    """Sum over every hidden path; independent of the forward recursion."""
    total = 0.0
    for path in itertools.product(range(params.m), repeat=len(seq)):
        p = params.pi[path[0]]
        for s, (h, x) in enumerate(zip(path, seq)):
            p *= params.O[x, h]
            if s + 1 < len(seq):
                p *= params.T[path[s + 1], h]
        total += p
    return total


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def ex2():
    return example2()


@pytest.fixture(scope="session")
def ex3():
    return example3()


@pytest.fixture(scope="session")
def poly10():
    return polygon_hmm(10)


# (name, params, window) for every model in the synthetic suite
SUITE = [("example1", example1, 1), ("example2", example2, 2),
         ("example3", example3, 2), ("polygon10", lambda: polygon_hmm(10), 1),
         ("random_m8_k3", lambda: random_rrhmm(8, 6, 3, seed=11), 1)]


@pytest.fixture(params=SUITE, ids=[s[0] for s in SUITE], scope="session")
def suite_model(request):
    name, factory, window = request.param
    return name, factory(), window


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
