"""Randomised invariants (hypothesis)."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gtsaga.algorithm import PickStream, advance, init, run
from gtsaga.analysis import (
    admissible_step_bound,
    rate_certificate,
    spectral_radius,
    theoretical_step_size,
    verify_nonneg_bound,
)
from gtsaga.problems import (
    component_gradient,
    component_value,
    generate_logistic_problem,
    generate_quadratic_problem,
    solve_minimizer,
)
from gtsaga.topology import build_ring, erdos_renyi, metropolis_weights

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

constants = st.tuples(
    st.floats(1e-2, 10.0),  # mu
    st.floats(1.0, 200.0),  # Q
    st.floats(0.0, 0.99),  # sigma
    st.integers(1, 64),  # m
    st.integers(0, 64),  # M - m
)


@FAST
@given(constants)
def test_prescribed_step_is_admissible(c):
    mu, Q, s, m, dM = c
    assert theoretical_step_size(mu, mu * Q, s, m, m + dM) < admissible_step_bound(mu, mu * Q, s, m, m + dM)


@FAST
@given(constants)
def test_certificate_sound_at_prescribed_step(c):
    mu, Q, s, m, dM = c
    L, M = mu * Q, m + dM
    cert = rate_certificate(theoretical_step_size(mu, L, s, m, M), mu, L, s, m, M)
    assert cert.rho <= cert.rate + 1e-9
    assert float(np.abs(np.linalg.eigvals(cert.J.entries)).max()) <= cert.rate + 1e-9


@FAST
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_nonneg_bound_holds(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((d, d)) * (rng.random((d, d)) < 0.6)
    x = rng.random(d) + 1e-3
    holds, beta = verify_nonneg_bound(A, x)
    assert holds
    assert spectral_radius(A) <= beta * (1 + 1e-12) + 1e-15


@FAST
@given(st.integers(2, 24), st.floats(0.2, 1.0), st.integers(0, 10_000))
def test_metropolis_is_doubly_stochastic_contraction(n, p, seed):
    W = metropolis_weights(erdos_renyi(n, p, seed, max_tries=1000))
    E = W.entries
    assert np.abs(E.sum(axis=0) - 1).max() <= 1e-12 and np.abs(E.sum(axis=1) - 1).max() <= 1e-12
    assert 0 <= W.sigma < 1
    x = np.random.default_rng(seed).standard_normal(n)
    assert np.linalg.norm(E @ x - x.mean()) <= W.sigma * np.linalg.norm(x - x.mean()) + 1e-10


@FAST
@given(st.sampled_from(["quadratic", "logistic"]), st.integers(0, 10_000))
def test_convexity_and_smoothness_probes(kind, seed):
    if kind == "quadratic":
        prob = generate_quadratic_problem(2, 3, 4, 6.0, seed=seed)
    else:
        prob = generate_logistic_problem(2, 3, 4, 0.3, seed=seed)
    rng = np.random.default_rng(seed)
    i, j = int(rng.integers(2)), int(rng.integers(3))
    x, y = 3 * rng.standard_normal(4), 3 * rng.standard_normal(4)
    fx, fy = component_value(prob, i, j, x), component_value(prob, i, j, y)
    gx, gy = component_gradient(prob, i, j, x), component_gradient(prob, i, j, y)
    assert fy >= fx + gx @ (y - x) + 0.5 * prob.mu * (x - y) @ (x - y) - 1e-9
    assert np.linalg.norm(gx - gy) <= prob.lip * np.linalg.norm(x - y) + 1e-9


@FAST
@given(st.lists(st.integers(1, 5000), min_size=1, max_size=6), st.integers(0, 1000), st.integers(1, 50))
def test_pick_stream_batching(chunks, seed, m):
    total = sum(chunks)
    whole = PickStream(seed, 3, m).take(total)
    s = PickStream(seed, 3, m)
    parts = np.concatenate([s.take(c) for c in chunks])
    np.testing.assert_array_equal(whole, parts)
    assert whole.min() >= 0 and whole.max() < m


@settings(max_examples=25, deadline=None)
@given(
    st.integers(3, 7),
    st.lists(st.integers(1, 6), min_size=7, max_size=7),
    st.floats(1e-3, 0.05),
    st.integers(0, 1000),
    st.sampled_from(["numba", "numpy"]),
)
def test_tracking_identity_random_instances(n, sizes, alpha, seed, backend):
    prob = generate_quadratic_problem(n, sizes[:n], 3, 5.0, seed=seed)
    W = build_ring(n, 0.5)
    state = init(prob, W, np.random.default_rng(seed).standard_normal((n, 3)), alpha, seed, backend=backend)
    for _ in range(20):
        advance(state, prob, W, 10)
        gbar = state.g_bar()
        assert np.linalg.norm(state.y_bar() - gbar) <= 1e-10 * (1 + np.linalg.norm(gbar))
    assert state.grad_evals == prob.total_components + 200 * n


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 40), st.integers(1, 200), st.integers(0, 100))
def test_trace_row_invariants(stride, iters, seed):
    prob = generate_quadratic_problem(3, 4, 2, 3.0, seed=1)
    W = build_ring(3, 0.5)
    tr = run(prob, W, alpha=0.02, max_iters=iters, metrics_every=stride, master_seed=seed, certificate=_CERT)
    assert tr.k[0] == 0 and tr.k[-1] == iters
    assert all(b > a for a, b in zip(tr.k, tr.k[1:]))
    assert tr.grad_evals == [12 + 3 * k for k in tr.k]
    for name in ("consensus_sq", "opt_gap_sq", "tracking_sq"):
        col = tr.column(name)
        assert np.all(np.isfinite(col)) and np.all(col >= 0)


_CERT = solve_minimizer(generate_quadratic_problem(3, 4, 2, 3.0, seed=1))
