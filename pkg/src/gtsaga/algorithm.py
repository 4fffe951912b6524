"""GT-SAGA: gradient tracking with SAGA local gradients, run as synchronous rounds.

One round, for every node ``i`` and with all neighbour reads taken from the
previous round::

    x_i  <- sum_r w_ir x_r - alpha * y_i
    s    ~  Uniform{0, ..., m_i - 1}
    g_i  <- grad f_{i,s}(x_i) - table_i[s] + mean(table_i)
    y_i  <- sum_r w_ir y_r + g_i - g_i(previous)
    table_i[s] <- grad f_{i,s}(x_i)

Also provided: the deterministic gradient-tracking baseline (``g_i`` is the
exact local gradient) and a standalone centralized SAGA used as an ``n = 1``
reference.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._accel import default_backend
from .errors import DivergenceDetected, InvalidArgument
from .problems import FiniteSumProblem, MinimizerCertificate, component_gradient, solve_minimizer
from .topology import WeightMatrix
from .trace import STOP_DIVERGED, STOP_MAX_ITERS, STOP_TARGET, Trace

__all__ = [
    "PickStream",
    "NodeState",
    "NetworkState",
    "RoundSample",
    "init",
    "step",
    "advance",
    "gt_full_step",
    "saga_estimator",
    "run",
    "centralized_saga_reference",
    "ALGORITHMS",
]

ALGORITHMS = ("gt-saga", "gt-full")
DIVERGENCE_LIMIT = 1e12
TABLE_REFRESH_EVERY = 10_000


class PickStream:
    """Uniform component picks for one node, keyed by ``(master_seed, node)``.

    Picks are drawn from the generator in fixed blocks, so the sequence does
    not depend on how many picks are requested at a time.
    """

    BLOCK = 4096

    def __init__(self, master_seed: int, node: int, m: int):
        if int(master_seed) != master_seed or master_seed < 0:
            raise InvalidArgument(f"master_seed must be a non-negative integer, got {master_seed!r}")
        self.m = int(m)
        self._rng = np.random.default_rng([int(master_seed), int(node)])
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    def take(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            if self._pos == self._buf.size:
                self._buf = self._rng.integers(0, self.m, size=self.BLOCK, dtype=np.int64)
                self._pos = 0
            k = min(count - filled, self._buf.size - self._pos)
            out[filled:filled + k] = self._buf[self._pos:self._pos + k]
            filled += k
            self._pos += k
        return out


@dataclass
class RoundSample:
    picks: np.ndarray


@dataclass
class NodeState:
    """Views into the network arrays for one node (writes go through)."""

    x: np.ndarray
    y: np.ndarray
    g_prev: np.ndarray
    table: np.ndarray | None
    table_mean: np.ndarray | None
    rng_stream: PickStream | None


@dataclass
class NetworkState:
    X: np.ndarray
    Y: np.ndarray
    G: np.ndarray
    table: np.ndarray | None
    tmean: np.ndarray | None
    offsets: np.ndarray
    streams: list
    alpha: float
    k: int = 0
    grad_evals: int = 0
    algorithm: str = "gt-saga"
    Z: np.ndarray | None = None
    last_slot: np.ndarray | None = None
    last_point: np.ndarray | None = None
    backend: str = "numba"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def tracks_staleness(self) -> bool:
        return self.Z is not None

    def node(self, i: int) -> NodeState:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return NodeState(
            self.X[i], self.Y[i], self.G[i],
            None if self.table is None else self.table[lo:hi],
            None if self.tmean is None else self.tmean[i],
            self.streams[i] if self.streams else None,
        )

    @property
    def nodes(self) -> list:
        return [self.node(i) for i in range(self.n)]

    def x_bar(self) -> np.ndarray:
        return self.X.mean(axis=0)

    def y_bar(self) -> np.ndarray:
        return self.Y.mean(axis=0)

    def g_bar(self) -> np.ndarray:
        return self.G.mean(axis=0)

    def tracking_residual(self) -> float:
        """``||ybar - gbar|| / (1 + ||gbar||)``; zero in exact arithmetic."""
        gb = self.g_bar()
        return float(np.linalg.norm(self.y_bar() - gb) / (1.0 + np.linalg.norm(gb)))

    def z_points(self) -> np.ndarray:
        """Table points before the latest replacement, i.e. the points defining the staleness at round k."""
        if self.Z is None:
            raise InvalidArgument("staleness tracking is disabled for this state")
        Z = self.Z.copy()
        moved = self.last_slot >= 0
        Z[self.last_slot[moved]] = self.last_point[moved]
        return Z

    def copy(self) -> "NetworkState":
        return copy.deepcopy(self)

    def _arrays_for_kernel(self):
        if self.Z is None:
            p = self.X.shape[1]
            return self.X, self.Y, self.G, self.table, self.tmean, np.zeros((0, p)), np.zeros(0, np.int64), np.zeros((0, p))
        return self.X, self.Y, self.G, self.table, self.tmean, self.Z, self.last_slot, self.last_point


def _start_points(x0, n: int, p: int) -> np.ndarray:
    if x0 is None:
        return np.zeros((n, p))
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape == (p,):
        return np.tile(x0, (n, 1))
    if x0.shape == (n, p):
        return x0.copy()
    raise InvalidArgument(f"x0 must have shape ({p},) or ({n}, {p}), got {x0.shape}")


def _check_pair(prob: FiniteSumProblem, W: WeightMatrix):
    if W.n != prob.n:
        raise InvalidArgument(f"weight matrix is {W.n}x{W.n} but the problem has {prob.n} nodes")


def init(
    prob: FiniteSumProblem,
    W: WeightMatrix,
    x0=None,
    alpha: float = 1e-3,
    master_seed: int = 0,
    *,
    algorithm: str = "gt-saga",
    track_staleness: bool = False,
    backend: str | None = None,
) -> NetworkState:
    """Round-0 state: tables filled at ``x_i^0`` and ``y_i^0 = g_i^0 = mean(table_i)``.

    ``x0`` is ``None`` (origin), a shared ``p``-vector, or an ``(n, p)`` array.
    """
    _check_pair(prob, W)
    if not alpha > 0 or not np.isfinite(alpha):
        raise InvalidArgument(f"alpha must be a positive finite number, got {alpha!r}")
    if algorithm not in ALGORITHMS:
        raise InvalidArgument(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    backend = backend or default_backend()
    if backend not in ("numba", "numpy"):
        raise InvalidArgument(f"unknown backend {backend!r}")
    n, p = prob.n, prob.dim
    X = _start_points(x0, n, p)
    if not np.all(np.isfinite(X)):
        raise InvalidArgument("x0 has non-finite entries")
    pk = prob.packed
    fresh = pk.gradients(np.arange(pk.offsets[-1]), np.repeat(X, pk.sizes, axis=0))
    tmean = np.add.reduceat(fresh, pk.offsets[:-1], axis=0) / pk.sizes[:, None]
    G = tmean.copy()
    saga = algorithm == "gt-saga"
    state = NetworkState(
        X=X,
        Y=G.copy(),
        G=G,
        table=fresh if saga else None,
        tmean=tmean if saga else None,
        offsets=pk.offsets,
        streams=[PickStream(master_seed, i, prob.sizes[i]) for i in range(n)] if saga else [],
        alpha=float(alpha),
        grad_evals=prob.total_components,
        algorithm=algorithm,
        backend=backend,
    )
    if saga and track_staleness:
        state.Z = np.repeat(X, pk.sizes, axis=0)
        state.last_slot = np.full(n, -1, dtype=np.int64)
        state.last_point = np.zeros((n, p))
    return state


def draw_round(state: NetworkState) -> RoundSample:
    return RoundSample(np.array([s.take(1)[0] for s in state.streams], dtype=np.int64))


def advance(state: NetworkState, prob: FiniteSumProblem, W: WeightMatrix, nsteps: int, picks=None) -> NetworkState:
    """Run ``nsteps`` rounds in place.  ``picks`` may fix the ``(n, nsteps)`` sample indices."""
    if nsteps <= 0:
        return state
    _check_pair(prob, W)
    pk = prob.packed
    if state.algorithm == "gt-full":
        done, bad = kernels.gt_full_steps(
            state.backend, state.X, state.Y, state.G, W.entries, state.alpha, nsteps, pk, DIVERGENCE_LIMIT
        )
        state.k += done
        state.grad_evals += done * prob.total_components
    else:
        if picks is None:
            picks = np.stack([s.take(nsteps) for s in state.streams])
        else:
            picks = np.ascontiguousarray(picks, dtype=np.int64)
            if picks.shape != (state.n, nsteps):
                raise InvalidArgument(f"picks must have shape ({state.n}, {nsteps}), got {picks.shape}")
            if np.any(picks < 0) or np.any(picks >= pk.sizes[:, None]):
                raise InvalidArgument("pick index out of range")
        done, bad = kernels.gtsaga_steps(
            state.backend, state._arrays_for_kernel(), W.entries, state.alpha, picks, pk, state.k,
            TABLE_REFRESH_EVERY, DIVERGENCE_LIMIT,
        )
        state.k += done
        state.grad_evals += done * state.n
    if done < nsteps:
        raise DivergenceDetected(state.k + 1, bad)
    return state


def step(state: NetworkState, prob: FiniteSumProblem, W: WeightMatrix) -> NetworkState:
    """One synchronous GT-SAGA round, in place; returns ``state``."""
    if state.algorithm != "gt-saga":
        raise InvalidArgument("step() drives gt-saga states; use gt_full_step() for gt-full")
    return advance(state, prob, W, 1)


def gt_full_step(state: NetworkState, prob: FiniteSumProblem, W: WeightMatrix) -> NetworkState:
    """One round of plain gradient tracking (exact local gradients, no sampling)."""
    if state.algorithm != "gt-full":
        raise InvalidArgument("gt_full_step() needs a state initialised with algorithm='gt-full'")
    return advance(state, prob, W, 1)


def saga_estimator(node: NodeState, prob: FiniteSumProblem, i: int, pick: int, x_new) -> np.ndarray:
    """``grad f_{i,pick}(x_new) - table[pick] + mean(table)``; the table is left untouched."""
    if node.table is None:
        raise InvalidArgument("node has no gradient table (gt-full state?)")
    if not 0 <= pick < node.table.shape[0]:
        raise InvalidArgument(f"pick {pick} outside [0, {node.table.shape[0]})")
    return component_gradient(prob, i, pick, x_new) - node.table[pick] + node.table_mean


def run(
    prob: FiniteSumProblem,
    W: WeightMatrix,
    *,
    alpha: float,
    max_iters: int,
    master_seed: int = 0,
    algorithm: str = "gt-saga",
    x0=None,
    metrics_every: int = 1,
    target_gap: float | None = None,
    certificate: MinimizerCertificate | None = None,
    track_staleness: bool = False,
    backend: str | None = None,
) -> Trace:
    """Iterate until ``max_iters`` or until ``||xbar - x*||^2 <= target_gap``.

    Metrics are recorded at k = 0, every ``metrics_every`` rounds and at the
    final round; the target is only tested at recorded rounds.  Divergence
    raises :class:`DivergenceDetected` with the partial trace attached.
    """
    from .analysis import measure_lyapunov

    if int(max_iters) != max_iters or max_iters < 1:
        raise InvalidArgument(f"max_iters must be >= 1, got {max_iters!r}")
    if int(metrics_every) != metrics_every or metrics_every < 1:
        raise InvalidArgument(f"metrics_every must be >= 1, got {metrics_every!r}")
    if target_gap is not None and not target_gap >= 0:
        raise InvalidArgument(f"target_gap must be non-negative, got {target_gap!r}")
    cert = certificate if certificate is not None else solve_minimizer(prob)
    t0 = time.perf_counter()
    state = init(prob, W, x0, alpha, master_seed, algorithm=algorithm, track_staleness=track_staleness, backend=backend)
    trace = Trace()

    def record() -> bool:
        sample = measure_lyapunov(state, cert, staleness=track_staleness)
        trace.append(state.k, sample, state.grad_evals)
        return target_gap is not None and sample.opt_gap_sq / state.n <= target_gap

    hit = record()
    while not hit and state.k < max_iters:
        chunk = min(metrics_every, max_iters - state.k)
        try:
            advance(state, prob, W, chunk)
        except DivergenceDetected as exc:
            trace.stop_reason = STOP_DIVERGED
            trace.wall_clock = time.perf_counter() - t0
            exc.trace = trace
            raise
        hit = record()
    trace.stop_reason = STOP_TARGET if hit else STOP_MAX_ITERS
    trace.wall_clock = time.perf_counter() - t0
    return trace


def centralized_saga_reference(prob_single_node: FiniteSumProblem, alpha: float, seed: int = 0, iters: int = 1000, x0=None, picks=None) -> np.ndarray:
    """Plain single-machine SAGA; returns the ``(iters + 1, p)`` iterate sequence.

    Uses the same sampling stream and table-mean convention as the network
    stepper for node 0, so with ``n = 1`` the two produce the same iterates.
    """
    prob = prob_single_node
    if prob.n != 1:
        raise InvalidArgument(f"reference SAGA needs a single-node problem, got n={prob.n}")
    if not alpha > 0:
        raise InvalidArgument(f"alpha must be > 0, got {alpha!r}")
    m, p = prob.sizes[0], prob.dim
    if picks is None:
        picks = PickStream(seed, 0, m).take(iters)
    picks = np.asarray(picks, dtype=np.int64).reshape(-1)
    if picks.size < iters:
        raise InvalidArgument(f"need {iters} picks, got {picks.size}")
    x = np.zeros(p) if x0 is None else np.array(x0, dtype=np.float64).reshape(p)
    table = np.array([component_gradient(prob, 0, j, x) for j in range(m)])
    mean = table.sum(axis=0) / m
    g = mean.copy()
    out = np.empty((iters + 1, p))
    out[0] = x
    for k in range(iters):
        x = x - alpha * g
        if not np.linalg.norm(x) <= DIVERGENCE_LIMIT:
            raise DivergenceDetected(k + 1, float(np.linalg.norm(x)))
        s = picks[k]
        fresh = component_gradient(prob, 0, s, x)
        g = fresh - table[s] + mean
        mean = mean + (fresh - table[s]) / m
        table[s] = fresh
        if (k + 1) % TABLE_REFRESH_EVERY == 0:
            mean = table.sum(axis=0) / m
        out[k + 1] = x
    return out

