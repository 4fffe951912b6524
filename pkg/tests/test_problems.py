import json

import numpy as np
import pytest

from gtsaga.errors import InconsistentConstants, InvalidArgument
from gtsaga.problems import (
    FiniteSumProblem,
    LocalObjective,
    LogisticRidge,
    Quadratic,
    component_gradient,
    component_value,
    declared_constants,
    generate_logistic_problem,
    generate_quadratic_problem,
    global_gradient,
    global_value,
    load_problem,
    local_full_gradient,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    solve_minimizer,
)


def quad_problem(parts, mu=1.0, lip=1.0):
    """``parts``: list (nodes) of lists of (A, b)."""
    p = len(parts[0][0][1])
    nodes = [LocalObjective(tuple(Quadratic(A, b) for A, b in node)) for node in parts]
    return FiniteSumProblem(p, tuple(nodes), mu, lip)


def central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        g[a] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestGradients:
    def test_identity_quadratic(self):
        prob = quad_problem([[(np.eye(2), [0, 0])]])
        np.testing.assert_array_equal(component_gradient(prob, 0, 0, [3, -1]), [3, -1])

    def test_diag_quadratic_at_origin(self):
        prob = quad_problem([[(np.diag([2.0, 5.0]), [1, 0])]], mu=2, lip=5)
        np.testing.assert_array_equal(component_gradient(prob, 0, 0, [0, 0]), [-1, 0])

    def test_logistic_at_origin_with_finite_differences(self):
        prob = FiniteSumProblem(2, (LocalObjective((LogisticRidge([1, 0], 1, 0.1),)),), 0.1, 0.35)
        g = component_gradient(prob, 0, 0, [0, 0])
        np.testing.assert_allclose(g, [-0.5, 0.0], atol=1e-15)
        fd = central_diff(lambda x: component_value(prob, 0, 0, x), np.zeros(2))
        np.testing.assert_allclose(fd, g, atol=1e-5)

    def test_logistic_extreme_margin_is_finite(self):
        prob = FiniteSumProblem(1, (LocalObjective((LogisticRidge([1.0], -1, 0.5),)),), 0.5, 0.75)
        for x in (-800.0, 800.0):
            g = component_gradient(prob, 0, 0, [x])
            assert np.all(np.isfinite(g))
            assert np.isfinite(component_value(prob, 0, 0, [x]))

    @pytest.mark.parametrize("kind", ["quadratic", "logistic"])
    def test_finite_differences_100_pairs(self, kind):
        if kind == "quadratic":
            prob = generate_quadratic_problem(3, 5, 4, 8.0, seed=2)
        else:
            prob = generate_logistic_problem(3, 5, 4, 0.2, seed=2)
        rng = np.random.default_rng(0)
        for _ in range(100):
            i = int(rng.integers(prob.n))
            j = int(rng.integers(prob.sizes[i]))
            x = rng.standard_normal(prob.dim)
            g = component_gradient(prob, i, j, x)
            fd = central_diff(lambda z: component_value(prob, i, j, z), x)
            assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))

    def test_index_errors(self):
        prob = generate_quadratic_problem(2, 3, 2, 2.0, seed=0)
        for i, j in [(2, 0), (-1, 0), (0, 3)]:
            with pytest.raises(InvalidArgument):
                component_gradient(prob, i, j, np.zeros(2))
        with pytest.raises(InvalidArgument):
            component_gradient(prob, 0, 0, [np.nan, 0])
        with pytest.raises(InvalidArgument):
            component_gradient(prob, 0, 0, [0, 0, 0])


class TestLocalAndGlobal:
    def test_single_component(self):
        prob = generate_quadratic_problem(2, [1, 3], 3, 4.0, seed=9)
        x = np.arange(3.0)
        np.testing.assert_allclose(local_full_gradient(prob, 0, x), component_gradient(prob, 0, 0, x), rtol=0, atol=1e-15)

    def test_two_scaled_identities(self):
        prob = quad_problem([[(np.eye(2), [0, 0]), (3 * np.eye(2), [0, 0])]], mu=1, lip=3)
        np.testing.assert_allclose(local_full_gradient(prob, 0, [1, 0]), [2, 0], atol=1e-15)

    def test_direct_summation_oracle(self):
        prob = generate_quadratic_problem(4, [3, 7, 2, 5], 6, 20.0, seed=4)
        rng = np.random.default_rng(1)
        for i in range(prob.n):
            x = rng.standard_normal(6)
            direct = sum(prob.nodes[i].components[j].A @ x - prob.nodes[i].components[j].b for j in range(prob.sizes[i]))
            np.testing.assert_allclose(local_full_gradient(prob, i, x), direct / prob.sizes[i], rtol=1e-14, atol=1e-14)

    def test_global_n1(self):
        prob = generate_quadratic_problem(1, 4, 3, 4.0, seed=1)
        x = np.ones(3)
        np.testing.assert_allclose(global_gradient(prob, x), local_full_gradient(prob, 0, x), atol=1e-15)

    def test_global_identical_nodes(self):
        comps = [(np.diag([1.0, 2.0]), [1.0, -1.0]), (np.diag([2.0, 1.0]), [0.0, 3.0])]
        prob = quad_problem([comps, comps, comps], mu=1, lip=2)
        x = np.array([0.3, -0.7])
        np.testing.assert_allclose(global_gradient(prob, x), local_full_gradient(prob, 0, x), atol=1e-15)

    def test_global_direct_summation(self):
        prob = generate_logistic_problem(3, [4, 2, 5], 3, 0.3, seed=8)
        x = np.array([0.5, -1.0, 2.0])
        per_node = [np.mean([component_gradient(prob, i, j, x) for j in range(prob.sizes[i])], axis=0) for i in range(3)]
        np.testing.assert_allclose(global_gradient(prob, x), np.mean(per_node, axis=0), rtol=1e-14, atol=1e-15)

    def test_global_value_matches_components(self):
        prob = generate_quadratic_problem(2, [2, 3], 2, 3.0, seed=0)
        x = np.array([1.0, 2.0])
        expect = 0.5 * (np.mean([component_value(prob, 0, j, x) for j in range(2)]) + np.mean([component_value(prob, 1, j, x) for j in range(3)]))
        assert global_value(prob, x) == pytest.approx(expect, rel=1e-14)


class TestMinimizer:
    def test_single_component(self):
        prob = quad_problem([[(2 * np.eye(2), [2, 4])]], mu=2, lip=2)
        np.testing.assert_allclose(solve_minimizer(prob).x_star, [1, 2], atol=1e-15)

    def test_two_nodes_by_hand(self):
        prob = quad_problem([[(np.eye(2), [0, 0])], [(3 * np.eye(2), [4, 0])]], mu=1, lip=3)
        np.testing.assert_allclose(solve_minimizer(prob).x_star, [1, 0], atol=1e-15)

    def test_logistic_certificate(self):
        prob = generate_logistic_problem(3, 20, 4, 0.05, seed=1)
        cert = solve_minimizer(prob)
        assert cert.grad_norm <= 1e-10
        assert abs(np.linalg.norm(global_gradient(prob, cert.x_star)) - cert.grad_norm) <= 1e-12

    def test_quadratic_certificate_reproducible(self):
        prob = generate_quadratic_problem(8, 32, 10, 10.0, seed=1)
        cert = solve_minimizer(prob)
        assert cert.grad_norm <= 1e-10 * max(1.0, prob.lip * np.linalg.norm(cert.x_star))
        assert abs(np.linalg.norm(global_gradient(prob, cert.x_star)) - cert.grad_norm) <= 1e-12

    def test_q1_closed_form(self):
        prob = generate_quadratic_problem(3, 4, 5, 1.0, seed=6)
        mean_b = np.mean([c.b for nd in prob.nodes for c in nd.components], axis=0)
        np.testing.assert_allclose(solve_minimizer(prob).x_star, mean_b, atol=1e-14)


class TestConstants:
    def spectrum_1_to_4(self, mu, lip):
        return quad_problem([[(np.diag([1.0, 4.0]), [0, 0])]], mu=mu, lip=lip)

    def test_accepted(self):
        mu, lip, Q, m, M = declared_constants(self.spectrum_1_to_4(1, 4))
        assert (mu, lip, Q) == (1, 4, 4)

    def test_rejected(self):
        with pytest.raises(InconsistentConstants):
            declared_constants(self.spectrum_1_to_4(2, 4))

    def test_upper_violation(self):
        with pytest.raises(InconsistentConstants):
            declared_constants(self.spectrum_1_to_4(1, 3.9))

    def test_m_and_M(self):
        prob = generate_quadratic_problem(3, [3, 5, 4], 2, 2.0, seed=0)
        assert declared_constants(prob)[3:] == (3, 5)

    def test_generated_quadratic_passes(self, ring_problem):
        prob, _, _ = ring_problem
        assert declared_constants(prob)[:3] == (1.0, 10.0, 10.0)
        ev = np.concatenate([np.linalg.eigvalsh(c.A) for nd in prob.nodes for c in nd.components])
        assert ev.min() == pytest.approx(1.0, abs=1e-12) and ev.max() == pytest.approx(10.0, abs=1e-12)

    def test_logistic_constants(self):
        prob = generate_logistic_problem(2, 10, 3, 0.25, seed=4)
        mu, lip, *_ = declared_constants(prob)
        assert mu == 0.25
        assert lip == pytest.approx(0.25 + 0.25 * max(float(c.feature @ c.feature) for nd in prob.nodes for c in nd.components))

    def test_logistic_lipschitz_probe(self):
        prob = generate_logistic_problem(2, 10, 3, 0.25, seed=4)
        rng = np.random.default_rng(5)
        for _ in range(100):
            i, j = int(rng.integers(2)), int(rng.integers(10))
            x, y = rng.standard_normal(3) * 3, rng.standard_normal(3) * 3
            d = np.linalg.norm(component_gradient(prob, i, j, x) - component_gradient(prob, i, j, y))
            assert d <= prob.lip * np.linalg.norm(x - y) + 1e-9


class TestGenerators:
    def test_quadratic_deterministic(self):
        a = problem_to_dict(generate_quadratic_problem(3, 4, 3, 5.0, seed=11))
        b = problem_to_dict(generate_quadratic_problem(3, 4, 3, 5.0, seed=11))
        assert a == b

    def test_logistic_deterministic(self):
        a = problem_to_dict(generate_logistic_problem(3, 4, 3, 0.1, seed=11))
        b = problem_to_dict(generate_logistic_problem(3, 4, 3, 0.1, seed=11))
        assert a == b

    def test_q1_identity(self):
        prob = generate_quadratic_problem(2, 3, 4, 1.0, seed=0)
        assert all(np.array_equal(c.A, np.eye(4)) for nd in prob.nodes for c in nd.components)

    def test_bad_q(self):
        with pytest.raises(InvalidArgument):
            generate_quadratic_problem(2, 3, 4, 0.5, seed=0)

    @pytest.mark.parametrize("reg", [0.0, -1.0])
    def test_bad_reg(self, reg):
        with pytest.raises(InvalidArgument):
            generate_logistic_problem(2, 3, 4, reg, seed=0)


class TestValidation:
    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidArgument):
            Quadratic([[1.0, 0.5], [0.0, 1.0]], [0, 0])

    def test_dim_mismatch(self):
        with pytest.raises(InvalidArgument):
            FiniteSumProblem(3, (LocalObjective((Quadratic(np.eye(2), [0, 0]),)),), 1, 1)

    def test_label(self):
        with pytest.raises(InvalidArgument):
            LogisticRidge([1.0], 0.5, 0.1)

    def test_empty_node(self):
        with pytest.raises(InvalidArgument):
            LocalObjective(())

    def test_bad_constants(self):
        node = LocalObjective((Quadratic(np.eye(1), [0]),))
        with pytest.raises(InvalidArgument):
            FiniteSumProblem(1, (node,), 0.0, 1.0)
        with pytest.raises(InvalidArgument):
            FiniteSumProblem(1, (node,), 2.0, 1.0)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        prob = generate_quadratic_problem(2, [2, 3], 3, 4.0, seed=1)
        path = tmp_path / "p.json"
        save_problem(prob, path)
        back = load_problem(path)
        assert problem_to_dict(back) == problem_to_dict(prob)
        doc = json.loads(path.read_text())
        assert set(doc) == {"dim", "constants", "nodes"}

    def test_mixed_round_trip(self):
        doc = {
            "dim": 2,
            "constants": {"mu": 0.1, "lip": 3.0},
            "nodes": [
                {"components": [{"type": "quadratic", "A": [[1, 0], [0, 2]], "b": [1, 1]}]},
                {"components": [{"type": "logistic_ridge", "feature": [1, 2], "label": -1, "reg": 0.1}]},
            ],
        }
        prob = problem_from_dict(doc)
        assert problem_to_dict(prob) == json.loads(json.dumps(problem_to_dict(problem_from_dict(problem_to_dict(prob)))))
        declared_constants(prob)

    def test_malformed(self):
        with pytest.raises(InvalidArgument):
            problem_from_dict({"dim": 2, "nodes": []})
        with pytest.raises(InvalidArgument):
            problem_from_dict({"dim": 1, "constants": {"mu": 1, "lip": 1}, "nodes": [{"components": [{"type": "huber"}]}]})


def test_gradient_descent_contraction():
    prob = generate_quadratic_problem(3, 6, 5, 12.0, seed=3)
    xs = solve_minimizer(prob).x_star
    rng = np.random.default_rng(2)
    for _ in range(50):
        alpha = rng.uniform(1e-3, 1.0) / prob.lip
        x = xs + 5 * rng.standard_normal(5)
        lhs = np.linalg.norm(x - alpha * global_gradient(prob, x) - xs)
        assert lhs <= (1 - prob.mu * alpha) * np.linalg.norm(x - xs) + 1e-9
