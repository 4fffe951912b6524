"""Communication graphs and doubly stochastic mixing matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import GenerationFailure, InvalidArgument, NumericFailure

__all__ = [
    "Graph",
    "WeightMatrix",
    "build_complete",
    "build_ring",
    "metropolis_weights",
    "erdos_renyi",
    "second_largest_singular_value",
    "from_matrix",
]

STOCHASTIC_TOL = 1e-12
CUSTOM_STOCHASTIC_TOL = 1e-9
SIGMA_TOL = 1e-12
SIGMA_MAX_ITERS = 10_000


def _connected(n: int, adjacency: list[set[int]]) -> bool:
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for r in adjacency[i]:
            if r not in seen:
                seen.add(r)
                frontier.append(r)
    return len(seen) == n


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``; must be connected."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgument(f"node count must be a positive integer, got {self.n!r}")
        norm = set()
        for e in self.edges:
            i, r = (int(v) for v in e)
            if not (0 <= i < self.n and 0 <= r < self.n):
                raise InvalidArgument(f"edge {e!r} has an endpoint outside [0, {self.n})")
            if i == r:
                raise InvalidArgument(f"self-loop {e!r} not allowed")
            norm.add((min(i, r), max(i, r)))
        object.__setattr__(self, "edges", frozenset(norm))
        if not _connected(self.n, self.adjacency()):
            raise InvalidArgument("graph is disconnected")

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for i, r in self.edges:
            adj[i].add(r)
            adj[r].add(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, r in self.edges:
            deg[i] += 1
            deg[r] += 1
        return deg

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, frozenset((i, r) for i in range(n) for r in range(i + 1, n)))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def star(cls, n: int) -> "Graph":
        return cls(n, frozenset((0, r) for r in range(1, n)))

    @classmethod
    def ring(cls, n: int) -> "Graph":
        if n < 3:
            raise InvalidArgument(f"ring needs n >= 3, got {n}")
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)))


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Doubly stochastic mixing matrix with its connectivity parameter.

    ``sigma`` is the second largest singular value, i.e. the spectral norm of
    ``W - (1/n) 1 1^T``.  Build instances through the constructors in this
    module (or :func:`from_matrix`), which validate the invariants.
    """

    entries: np.ndarray
    sigma: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def averaging(self) -> np.ndarray:
        """The exact-average matrix ``(1/n) 1 1^T``."""
        return np.full((self.n, self.n), 1.0 / self.n)

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))


def _check_doubly_stochastic(W: np.ndarray, tol: float) -> None:
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] == 0:
        raise InvalidArgument(f"weight matrix must be square and non-empty, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise InvalidArgument("weight matrix has non-finite entries")
    if np.any(W < 0):
        raise InvalidArgument("weight matrix has negative entries")
    rows = np.abs(W.sum(axis=1) - 1.0).max()
    cols = np.abs(W.sum(axis=0) - 1.0).max()
    if rows > tol or cols > tol:
        raise InvalidArgument(
            f"weight matrix is not doubly stochastic (max row dev {rows:.2e}, col dev {cols:.2e}, tol {tol:.0e})"
        )


def _is_primitive(W: np.ndarray) -> bool:
    # Wielandt: a primitive n x n matrix has W^k > 0 for k = (n-1)^2 + 1.
    n = W.shape[0]
    pattern = (W > 0).astype(np.int64)
    target = (n - 1) ** 2 + 1
    result = np.eye(n, dtype=np.int64)
    base = pattern
    while target:
        if target & 1:
            result = np.minimum(result @ base, 1)
        base = np.minimum(base @ base, 1)
        target >>= 1
    return bool(result.all())


def _freeze(W: np.ndarray, sigma: float | None = None) -> WeightMatrix:
    W = np.array(W, dtype=np.float64)
    W.setflags(write=False)
    wm = WeightMatrix(W, 0.0)
    s = second_largest_singular_value(wm) if sigma is None else sigma
    if not s < 1.0:
        raise InvalidArgument(f"sigma = {s} is not < 1")
    object.__setattr__(wm, "sigma", float(s))
    return wm


def from_matrix(W, tol: float = CUSTOM_STOCHASTIC_TOL) -> WeightMatrix:
    """Validate an explicit matrix (possibly asymmetric) and wrap it."""
    W = np.asarray(W, dtype=np.float64)
    _check_doubly_stochastic(W, tol)
    if not _is_primitive(W):
        raise InvalidArgument("weight matrix is not primitive")
    return _freeze(W)


def build_complete(n: int) -> WeightMatrix:
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    return _freeze(np.full((n, n), 1.0 / n), sigma=0.0)


def build_ring(n: int, self_weight: float = 1.0 / 3.0) -> WeightMatrix:
    """Symmetric circulant ring: ``self_weight`` on the diagonal, the rest split evenly to both neighbours."""
    if int(n) != n or n < 3:
        raise InvalidArgument(f"ring needs n >= 3, got {n!r}")
    if not 0.0 < self_weight < 1.0:
        raise InvalidArgument(f"self_weight must lie in (0, 1), got {self_weight!r}")
    nb = (1.0 - self_weight) / 2.0
    W = np.zeros((n, n))
    for i in range(n):
        W[i, i] = self_weight
        W[i, (i + 1) % n] += nb
        W[i, (i - 1) % n] += nb
    _check_doubly_stochastic(W, STOCHASTIC_TOL)
    return _freeze(W)


def metropolis_weights(g: Graph) -> WeightMatrix:
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_r))`` on edges; the diagonal takes the remainder."""
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for i, r in g.edges:
        W[i, r] = W[r, i] = 1.0 / (1.0 + max(deg[i], deg[r]))
    W[np.diag_indices(g.n)] = 1.0 - W.sum(axis=1)
    _check_doubly_stochastic(W, STOCHASTIC_TOL)
    return _freeze(W)


def erdos_renyi(n: int, p: float, seed: int, max_tries: int = 100) -> Graph:
    """Sample G(n, p), resampling until connected (at most ``max_tries`` draws)."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    if not 0.0 < p <= 1.0:
        raise InvalidArgument(f"edge probability must lie in (0, 1], got {p!r}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        keep = rng.random(iu.size) < p
        try:
            return Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))
        except InvalidArgument:
            continue
    raise GenerationFailure(f"no connected G({n}, {p}) sample after {max_tries} tries")


def second_largest_singular_value(W: WeightMatrix | np.ndarray) -> float:
    """Spectral norm of ``W - W_inf`` by power iteration on its Gram matrix.

    Stops when the eigen-residual of the Gram matrix drops below 1e-12 (scaled),
    raising :class:`NumericFailure` after 10,000 iterations.
    """
    A = np.asarray(W.entries if isinstance(W, WeightMatrix) else W, dtype=np.float64)
    n = A.shape[0]
    D = A - 1.0 / n
    B = D.T @ D
    if not np.any(B):
        return 0.0
    v = np.random.default_rng(12345).standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(SIGMA_MAX_ITERS):
        w = B @ v
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        if np.linalg.norm(w - lam * v) <= SIGMA_TOL * max(1.0, lam):
            break
        v = w / nw
    else:
        raise NumericFailure(f"sigma power iteration did not converge in {SIGMA_MAX_ITERS} iterations")
    return float(np.sqrt(max(lam, 0.0)))
