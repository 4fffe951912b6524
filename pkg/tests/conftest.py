import numpy as np
import pytest

from gtsaga._accel import HAS_NUMBA
from gtsaga.problems import generate_logistic_problem, generate_quadratic_problem, solve_minimizer
from gtsaga.topology import Graph, build_complete, build_ring, metropolis_weights

BACKENDS = ["numba", "numpy"] if HAS_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def ring_problem():
    """8-node ring (sigma ~ 0.80), quadratic Q=10, m_i=32, p=10."""
    prob = generate_quadratic_problem(8, 32, 10, 10.0, seed=1)
    W = build_ring(8)
    return prob, W, solve_minimizer(prob)


@pytest.fixture(scope="session")
def small_problem():
    prob = generate_quadratic_problem(5, [3, 6, 4, 5, 2], 4, 5.0, seed=3)
    W = metropolis_weights(Graph.path(5))
    return prob, W, solve_minimizer(prob)


@pytest.fixture(scope="session")
def logistic_problem():
    prob = generate_logistic_problem(4, 12, 3, 0.1, seed=5)
    W = build_ring(4)
    return prob, W, solve_minimizer(prob)


def builtin_topologies(n=8):
    return {
        "complete": build_complete(n),
        "ring": build_ring(n),
        "metropolis_star": metropolis_weights(Graph.star(n)),
    }


def svd_sigma(W):
    A = np.asarray(W.entries if hasattr(W, "entries") else W)
    n = A.shape[0]
    return float(np.linalg.svd(A - 1.0 / n, compute_uv=False)[0])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
