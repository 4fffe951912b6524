"""Finite-sum strongly convex objectives spread over the nodes of a network.

Two component families are supported:

* ``Quadratic``: ``f(x) = 0.5 x^T A x - b^T x`` with ``A`` symmetric positive definite;
* ``LogisticRidge``: ``f(x) = log(1 + exp(-label * a^T x)) + (reg / 2) ||x||^2``.

Problems are immutable once built.  :attr:`FiniteSumProblem.packed` exposes a
flat array layout consumed by the step kernels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import InconsistentConstants, InvalidArgument, OracleFailure

__all__ = [
    "Quadratic",
    "LogisticRidge",
    "LocalObjective",
    "FiniteSumProblem",
    "MinimizerCertificate",
    "PackedProblem",
    "component_value",
    "component_gradient",
    "local_full_gradient",
    "global_gradient",
    "global_value",
    "solve_minimizer",
    "declared_constants",
    "generate_quadratic_problem",
    "generate_logistic_problem",
    "problem_to_dict",
    "problem_from_dict",
    "save_problem",
    "load_problem",
]

CONSTANT_TOL = 1e-9
KIND_QUADRATIC = 0
KIND_LOGISTIC = 1


def _readonly(a, dtype=np.float64) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Quadratic:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A, b = _readonly(self.A), _readonly(self.b)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise InvalidArgument(f"quadratic component shapes A{A.shape}, b{b.shape} are inconsistent")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(A).max(initial=0.0)))):
            raise InvalidArgument("quadratic component matrix A must be symmetric")
        if not np.array_equal(A, A.T):
            A = _readonly(0.5 * (A + A.T))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True, eq=False)
class LogisticRidge:
    feature: np.ndarray
    label: float
    reg: float

    def __post_init__(self):
        a = _readonly(self.feature)
        if a.ndim != 1:
            raise InvalidArgument("logistic feature must be a vector")
        if self.label not in (1, -1, 1.0, -1.0):
            raise InvalidArgument(f"label must be +1 or -1, got {self.label!r}")
        if not self.reg > 0:
            raise InvalidArgument(f"ridge parameter must be > 0, got {self.reg!r}")
        object.__setattr__(self, "feature", a)
        object.__setattr__(self, "label", float(self.label))
        object.__setattr__(self, "reg", float(self.reg))

    @property
    def dim(self) -> int:
        return self.feature.shape[0]


Component = Union[Quadratic, LogisticRidge]


@dataclass(frozen=True)
class LocalObjective:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidArgument("a node needs at least one component")
        object.__setattr__(self, "components", comps)

    def __len__(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class MinimizerCertificate:
    x_star: np.ndarray
    grad_norm: float


@dataclass(frozen=True, eq=False)
class PackedProblem:
    """Flat component storage shared by both kernel backends.

    Component ``j`` of node ``i`` lives at flat index ``offsets[i] + j``.
    ``vec`` holds ``b`` for quadratics and the feature for logistic terms;
    ``mat_index`` points into ``mat`` (``-1`` for logistic terms).
    """

    offsets: np.ndarray
    sizes: np.ndarray
    kind: np.ndarray
    mat: np.ndarray
    mat_index: np.ndarray
    vec: np.ndarray
    label: np.ndarray
    reg: np.ndarray

    def gradients(self, flat: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Row ``r`` is the gradient of component ``flat[r]`` at ``X[r]``."""
        out = np.empty_like(X)
        kinds = self.kind[flat]
        q = kinds == KIND_QUADRATIC
        if q.any():
            cq = flat[q]
            out[q] = np.einsum("kab,kb->ka", self.mat[self.mat_index[cq]], X[q]) - self.vec[cq]
        lg = ~q
        if lg.any():
            cl = flat[lg]
            a = self.vec[cl]
            y = self.label[cl]
            t = -y * np.einsum("ka,ka->k", a, X[lg])
            coef = -y * _sigmoid(t)
            out[lg] = coef[:, None] * a + self.reg[cl, None] * X[lg]
        return out


def _sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True, eq=False)
class FiniteSumProblem:
    """``f(x) = (1/n) sum_i f_i(x)`` with ``f_i = (1/m_i) sum_j f_{i,j}``.

    ``mu`` and ``lip`` are *declared* per-component strong convexity and
    smoothness constants; :func:`declared_constants` verifies them.
    """

    dim: int
    nodes: tuple
    mu: float
    lip: float

    def __post_init__(self):
        nodes = tuple(nd if isinstance(nd, LocalObjective) else LocalObjective(tuple(nd)) for nd in self.nodes)
        if not nodes:
            raise InvalidArgument("problem needs at least one node")
        if not self.mu > 0:
            raise InvalidArgument(f"mu must be > 0, got {self.mu!r}")
        if not self.lip >= self.mu:
            raise InvalidArgument(f"L must be >= mu, got L={self.lip!r}, mu={self.mu!r}")
        for i, nd in enumerate(nodes):
            for j, c in enumerate(nd.components):
                if not isinstance(c, (Quadratic, LogisticRidge)):
                    raise InvalidArgument(f"node {i} component {j}: unsupported type {type(c).__name__}")
                if c.dim != self.dim:
                    raise InvalidArgument(f"node {i} component {j} has dimension {c.dim}, expected {self.dim}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "lip", float(self.lip))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def kappa(self) -> float:
        return self.lip / self.mu

    @property
    def sizes(self) -> tuple:
        return tuple(len(nd) for nd in self.nodes)

    @property
    def m(self) -> int:
        return min(self.sizes)

    @property
    def M(self) -> int:
        return max(self.sizes)

    @property
    def total_components(self) -> int:
        return sum(self.sizes)

    @cached_property
    def packed(self) -> PackedProblem:
        sizes = np.array(self.sizes, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        N, p = int(offsets[-1]), self.dim
        kind = np.zeros(N, dtype=np.int64)
        mat_index = np.full(N, -1, dtype=np.int64)
        vec = np.zeros((N, p))
        label = np.zeros(N)
        reg = np.zeros(N)
        mats = []
        c = 0
        for nd in self.nodes:
            for comp in nd.components:
                if isinstance(comp, Quadratic):
                    kind[c] = KIND_QUADRATIC
                    mat_index[c] = len(mats)
                    mats.append(comp.A)
                    vec[c] = comp.b
                else:
                    kind[c] = KIND_LOGISTIC
                    vec[c] = comp.feature
                    label[c] = comp.label
                    reg[c] = comp.reg
                c += 1
        mat = np.array(mats) if mats else np.zeros((0, p, p))
        return PackedProblem(offsets, sizes, kind, mat.reshape(len(mats), p, p), mat_index, vec, label, reg)

    def component(self, i: int, j: int) -> Component:
        if not 0 <= i < self.n:
            raise InvalidArgument(f"node index {i} outside [0, {self.n})")
        if not 0 <= j < len(self.nodes[i]):
            raise InvalidArgument(f"component index {j} outside [0, {len(self.nodes[i])}) at node {i}")
        return self.nodes[i].components[j]

    def is_quadratic(self) -> bool:
        return all(isinstance(c, Quadratic) for nd in self.nodes for c in nd.components)


def _vector(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p,):
        raise InvalidArgument(f"expected a vector of length {p}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("x has non-finite entries")
    return x


def _value(c: Component, x: np.ndarray) -> float:
    if isinstance(c, Quadratic):
        return float(0.5 * x @ c.A @ x - c.b @ x)
    return float(np.logaddexp(0.0, -c.label * (c.feature @ x)) + 0.5 * c.reg * (x @ x))


def _grad(c: Component, x: np.ndarray) -> np.ndarray:
    if isinstance(c, Quadratic):
        return c.A @ x - c.b
    s = _sigmoid(np.array([-c.label * (c.feature @ x)]))[0]
    return -c.label * s * c.feature + c.reg * x


def component_value(prob: FiniteSumProblem, i: int, j: int, x) -> float:
    return _value(prob.component(i, j), _vector(x, prob.dim))


def component_gradient(prob: FiniteSumProblem, i: int, j: int, x) -> np.ndarray:
    """Exact gradient of component ``j`` of node ``i`` at ``x``."""
    return _grad(prob.component(i, j), _vector(x, prob.dim))


def local_full_gradient(prob: FiniteSumProblem, i: int, x) -> np.ndarray:
    """Mean of the component gradients of node ``i``."""
    if not 0 <= i < prob.n:
        raise InvalidArgument(f"node index {i} outside [0, {prob.n})")
    x = _vector(x, prob.dim)
    pk = prob.packed
    flat = np.arange(pk.offsets[i], pk.offsets[i + 1])
    return pk.gradients(flat, np.broadcast_to(x, (flat.size, prob.dim))).mean(axis=0)


def local_full_gradients(prob: FiniteSumProblem, X: np.ndarray) -> np.ndarray:
    """Stacked ``grad f_i(X[i])`` for every node (no argument validation)."""
    pk = prob.packed
    flat = np.arange(pk.offsets[-1])
    G = pk.gradients(flat, np.repeat(X, pk.sizes, axis=0))
    return np.add.reduceat(G, pk.offsets[:-1], axis=0) / pk.sizes[:, None]


def global_gradient(prob: FiniteSumProblem, x) -> np.ndarray:
    x = _vector(x, prob.dim)
    return local_full_gradients(prob, np.broadcast_to(x, (prob.n, prob.dim))).mean(axis=0)


def global_value(prob: FiniteSumProblem, x) -> float:
    x = _vector(x, prob.dim)
    return float(np.mean([np.mean([_value(c, x) for c in nd.components]) for nd in prob.nodes]))


def solve_minimizer(prob: FiniteSumProblem, tol: float = 1e-12, max_iters: int = 1_000_000) -> MinimizerCertificate:
    """Centralized oracle for the unique minimizer ``x*``.

    All-quadratic problems solve ``(mean A) x = mean b`` directly (with one
    step of iterative refinement); anything else runs gradient descent with
    step ``1/L`` until ``||grad f|| <= tol``.
    """
    p = prob.dim
    if prob.is_quadratic():
        Abar = np.zeros((p, p))
        bbar = np.zeros(p)
        for nd in prob.nodes:
            Abar += np.mean([c.A for c in nd.components], axis=0)
            bbar += np.mean([c.b for c in nd.components], axis=0)
        Abar /= prob.n
        bbar /= prob.n
        x = np.linalg.solve(Abar, bbar)
        x = x - np.linalg.solve(Abar, global_gradient(prob, x))
    else:
        x = np.zeros(p)
        step = 1.0 / prob.lip
        for _ in range(max_iters):
            g = global_gradient(prob, x)
            if np.linalg.norm(g) <= tol:
                break
            x = x - step * g
        else:
            raise OracleFailure(f"gradient descent did not reach ||grad|| <= {tol} in {max_iters} iterations")
    gnorm = float(np.linalg.norm(global_gradient(prob, x)))
    if gnorm > 1e-10 * max(1.0, prob.lip * float(np.linalg.norm(x))):
        raise OracleFailure(f"minimizer certificate failed: ||grad f(x*)|| = {gnorm:.3e}")
    x.setflags(write=False)
    return MinimizerCertificate(x, gnorm)


def declared_constants(prob: FiniteSumProblem, tol: float = CONSTANT_TOL):
    """Return ``(mu, L, Q, m, M)`` after checking every component against them.

    Quadratic Hessian spectra must lie in ``[mu, L]``; logistic terms need
    ``mu <= reg`` and ``reg + ||a||^2 / 4 <= L``.
    """
    for i, nd in enumerate(prob.nodes):
        for j, c in enumerate(nd.components):
            if isinstance(c, Quadratic):
                ev = np.linalg.eigvalsh(c.A)
                lo, hi = ev[0], ev[-1]
            else:
                lo, hi = c.reg, c.reg + 0.25 * float(c.feature @ c.feature)
            if lo < prob.mu - tol or hi > prob.lip + tol:
                raise InconsistentConstants(
                    f"node {i} component {j}: curvature range [{lo:.6g}, {hi:.6g}] "
                    f"not inside declared [mu={prob.mu:.6g}, L={prob.lip:.6g}]"
                )
    return prob.mu, prob.lip, prob.kappa, prob.m, prob.M


def _rotation(rng: np.random.Generator, p: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


def generate_quadratic_problem(n: int, m_each, p: int, Q_target: float, seed: int) -> FiniteSumProblem:
    """Random heterogeneous quadratics with every Hessian spectrum in ``[1, Q_target]``.

    For ``p >= 2`` each Hessian attains both ends of the range, so the declared
    ``mu = 1`` and ``L = Q_target`` are tight.  ``m_each`` may be an int or a
    per-node sequence.  ``Q_target == 1`` gives identity Hessians exactly.
    """
    if not Q_target >= 1:
        raise InvalidArgument(f"Q_target must be >= 1, got {Q_target!r}")
    sizes = [int(m_each)] * n if np.isscalar(m_each) else [int(s) for s in m_each]
    if len(sizes) != n or min(sizes) < 1 or p < 1:
        raise InvalidArgument("need n per-node sizes >= 1 and p >= 1")
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(n):
        center = rng.standard_normal(p)
        comps = []
        for _ in range(sizes[i]):
            b = center + 0.5 * rng.standard_normal(p)
            if Q_target == 1:
                A = np.eye(p)
            else:
                ev = rng.uniform(1.0, Q_target, size=p)
                if p >= 2:
                    ev[0], ev[1] = 1.0, Q_target
                U = _rotation(rng, p)
                A = (U * ev) @ U.T
                A = 0.5 * (A + A.T)
            comps.append(Quadratic(A, b))
        nodes.append(LocalObjective(tuple(comps)))
    return FiniteSumProblem(p, tuple(nodes), mu=1.0, lip=float(Q_target))


def generate_logistic_problem(n: int, m_each, p: int, reg: float, seed: int, flip: float = 0.1) -> FiniteSumProblem:
    """Gaussian features, labels from a planted separator with ``flip`` label noise."""
    if not reg > 0:
        raise InvalidArgument(f"reg must be > 0, got {reg!r}")
    sizes = [int(m_each)] * n if np.isscalar(m_each) else [int(s) for s in m_each]
    if len(sizes) != n or min(sizes) < 1 or p < 1:
        raise InvalidArgument("need n per-node sizes >= 1 and p >= 1")
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(p)
    nodes = []
    max_sq = 0.0
    for i in range(n):
        comps = []
        for _ in range(sizes[i]):
            a = rng.standard_normal(p)
            y = 1.0 if a @ w_true >= 0 else -1.0
            if rng.random() < flip:
                y = -y
            max_sq = max(max_sq, float(a @ a))
            comps.append(LogisticRidge(a, y, reg))
        nodes.append(LocalObjective(tuple(comps)))
    return FiniteSumProblem(p, tuple(nodes), mu=float(reg), lip=float(reg + 0.25 * max_sq))


def problem_to_dict(prob: FiniteSumProblem) -> dict:
    nodes = []
    for nd in prob.nodes:
        comps = []
        for c in nd.components:
            if isinstance(c, Quadratic):
                comps.append({"type": "quadratic", "A": c.A.tolist(), "b": c.b.tolist()})
            else:
                comps.append({"type": "logistic_ridge", "feature": c.feature.tolist(), "label": c.label, "reg": c.reg})
        nodes.append({"components": comps})
    return {"dim": prob.dim, "constants": {"mu": prob.mu, "lip": prob.lip}, "nodes": nodes}


def problem_from_dict(doc: dict) -> FiniteSumProblem:
    try:
        nodes = []
        for nd in doc["nodes"]:
            comps = []
            for c in nd["components"]:
                if c["type"] == "quadratic":
                    comps.append(Quadratic(c["A"], c["b"]))
                elif c["type"] == "logistic_ridge":
                    comps.append(LogisticRidge(c["feature"], c["label"], c["reg"]))
                else:
                    raise InvalidArgument(f"unknown component type {c['type']!r}")
            nodes.append(LocalObjective(tuple(comps)))
        return FiniteSumProblem(int(doc["dim"]), tuple(nodes), doc["constants"]["mu"], doc["constants"]["lip"])
    except (KeyError, TypeError) as exc:
        raise InvalidArgument(f"malformed problem document: {exc!r}") from exc


def save_problem(prob: FiniteSumProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(prob), fh)


def load_problem(path) -> FiniteSumProblem:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
