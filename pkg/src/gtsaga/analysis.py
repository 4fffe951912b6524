"""Linear-rate machinery for GT-SAGA and per-iteration Lyapunov metrics.

The expected Lyapunov vector

    u^k = [ ||x - 1 xbar||^2,  n ||xbar - x*||^2,  n t^k,  ||y - 1 ybar||^2 ]

is dominated entrywise by ``J_alpha u^{k-1}``.  A positive vector ``eps``
with ``J_alpha eps <= (1 - 1/kappa) eps`` bounds ``rho(J_alpha)`` by
``1 - 1/kappa`` (weighted max-row-sum norm argument), which is what
:func:`rate_certificate` checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificateFailure, InvalidArgument, InvalidState, NumericFailure

__all__ = [
    "RateMatrix",
    "RateCertificate",
    "LyapunovSample",
    "theoretical_step_size",
    "admissible_step_bound",
    "build_rate_matrix",
    "spectral_radius",
    "spectral_radius_eig",
    "rate_certificate",
    "certificate_vector",
    "inverse_kappa",
    "verify_nonneg_bound",
    "measure_lyapunov",
    "iteration_complexity_bound",
    "predicted_iteration_complexity",
]

# Relative slack for floating-point rounding in the entrywise check; see rate_certificate.
ROUNDING_SLACK = 1e-12
RHO_TOL = 1e-12


def _check_constants(mu, lip, sigma, m, M):
    if not (mu > 0 and lip >= mu and math.isfinite(lip)):
        raise InvalidArgument(f"need L >= mu > 0, got mu={mu!r}, L={lip!r}")
    if not 0.0 <= sigma < 1.0:
        raise InvalidArgument(f"sigma must lie in [0, 1), got {sigma!r}")
    if int(m) != m or int(M) != M or not 1 <= m <= M:
        raise InvalidArgument(f"need integers 1 <= m <= M, got m={m!r}, M={M!r}")


def theoretical_step_size(mu: float, lip: float, sigma: float, m: int, M: int) -> float:
    """Prescribed step ``(m/M) (1 - sigma^2)^2 / (150 Q L)``."""
    _check_constants(mu, lip, sigma, m, M)
    Q = lip / mu
    return (m / M) * (1.0 - sigma**2) ** 2 / (150.0 * Q * lip)


def admissible_step_bound(mu: float, lip: float, sigma: float, m: int, M: int) -> float:
    """Open upper end ``(m/M) (1 - sigma^2)^2 / (140 Q L)`` of the linearly convergent range."""
    _check_constants(mu, lip, sigma, m, M)
    Q = lip / mu
    return (m / M) * (1.0 - sigma**2) ** 2 / (140.0 * Q * lip)


@dataclass(frozen=True, eq=False)
class RateMatrix:
    entries: np.ndarray
    alpha: float
    sigma: float
    mu: float
    lip: float
    m: int
    M: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "sigma": self.sigma, "mu": self.mu, "lip": self.lip,
            "m": self.m, "M": self.M, "entries": self.entries.tolist(),
        }


def build_rate_matrix(alpha: float, mu: float, lip: float, sigma: float, m: int, M: int) -> RateMatrix:
    _check_constants(mu, lip, sigma, m, M)
    if not alpha >= 0 or not math.isfinite(alpha):
        raise InvalidArgument(f"alpha must be a non-negative finite number, got {alpha!r}")
    L2, a, a2 = lip * lip, alpha, alpha * alpha
    gap = 1.0 - sigma**2
    half = (1.0 + sigma**2) / 2.0
    J = np.array(
        [
            [half, 0.0, 0.0, 2.0 * a2 / gap],
            [3.0 * L2 * a / (2.0 * mu), 1.0 - mu * a / 2.0, 4.0 * L2 * a2, 0.0],
            [2.0 / m, 2.0 / m, 1.0 - 1.0 / M, 0.0],
            [104.0 * L2 / gap, 74.0 * L2 / gap, 60.0 * L2 / gap, half + 40.0 * L2 * a2 / gap],
        ]
    )
    if np.any(J < 0):
        raise InvalidArgument("rate matrix has a negative entry (step size too large for the 1 - mu*alpha/2 term)")
    J.setflags(write=False)
    return RateMatrix(J, float(alpha), float(sigma), float(mu), float(lip), int(m), int(M))


def _nonneg_square(A) -> np.ndarray:
    A = np.asarray(A.entries if isinstance(A, RateMatrix) else A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {A.shape}")
    if np.any(A < 0) or not np.all(np.isfinite(A)):
        raise InvalidArgument("expected a finite non-negative matrix")
    return A


def _collatz_wielandt(A: np.ndarray, P: np.ndarray, tol: float, max_squarings: int) -> float:
    v = np.ones(A.shape[0])
    prev = math.inf
    floor = 1e-24 * float(A.max())
    for _ in range(max_squarings):
        v = P @ v
        top = v.max()
        if top == 0.0:
            return 0.0
        v /= top
        Av = A @ v
        pos = v > 0
        hi = float(np.max(Av[pos] / v[pos]))
        if abs(hi - prev) <= tol * hi + floor:
            return hi
        prev = hi
        P = P @ P
        top = P.max()
        if top == 0.0:
            return 0.0
        P /= top
    raise NumericFailure("power iteration for the spectral radius did not converge")


def spectral_radius(J, tol: float = RHO_TOL, max_squarings: int = 128) -> float:
    """Perron root of a non-negative matrix by power iteration.

    The iteration vector is pushed through ``B^(2^s)`` (normalised repeated
    squaring), so eigenvalue ratios close to one resolve in a few dozen
    products.  The estimate is the Collatz-Wielandt upper bound
    ``max_i (A v)_i / v_i`` over the support of ``v``, computed componentwise
    so badly scaled rows stay accurate.  A first pass with ``B = A`` gives an
    upper bound ``b``; the second pass uses ``B = A + 1e-3 b I``, which removes
    periodicity (imprimitive matrices) without changing the eigenvector.
    """
    A = _nonneg_square(J)
    if not A.any():
        return 0.0
    try:
        rough = _collatz_wielandt(A, A / A.max(), tol, max_squarings)
    except NumericFailure:
        rough = float(A.sum(axis=1).max())  # only a scale for the shift
    if rough == 0.0:
        return 0.0
    B = A + 1e-3 * rough * np.eye(A.shape[0])
    return _collatz_wielandt(A, B / B.max(), tol, max_squarings)


def spectral_radius_eig(J) -> float:
    """Reference value: largest root modulus of the characteristic polynomial (companion eigensolve)."""
    A = np.asarray(J.entries if isinstance(J, RateMatrix) else J, dtype=np.float64)
    roots = np.roots(np.poly(A))
    return float(np.abs(roots).max()) if roots.size else 0.0


def certificate_vector(mu: float, lip: float, sigma: float, m: int, M: int) -> np.ndarray:
    Q = lip / mu
    gap = 1.0 - sigma**2
    return np.array([1.0, 4.0 * Q**2, 12.0 * M * Q**2 / m, 2250.0 * M * lip**2 * Q**2 / (m * gap**2)])


def inverse_kappa(mu: float, lip: float, sigma: float, m: int, M: int) -> float:
    Q = lip / mu
    gap = 1.0 - sigma**2
    return min(3.0 * gap / 10.0, 3.0 / 10000.0 * (m / M) * gap**2 / Q**2, 1.0 / (6.0 * M), gap / 2250.0)


@dataclass(frozen=True, eq=False)
class RateCertificate:
    eps_vec: np.ndarray
    kappa: float
    rate: float
    rho: float
    margins: np.ndarray
    strict: bool
    J: RateMatrix

    def to_dict(self) -> dict:
        return {
            "constants": {k: getattr(self.J, k) for k in ("alpha", "sigma", "mu", "lip", "m", "M")},
            "J": self.J.entries.tolist(),
            "eps": self.eps_vec.tolist(),
            "kappa": self.kappa,
            "rate": self.rate,
            "rho": self.rho,
            "row_margins": self.margins.tolist(),
            "strict": self.strict,
        }


def rate_certificate(alpha: float, mu: float, lip: float, sigma: float, m: int, M: int) -> RateCertificate:
    """Check ``J_alpha eps <= (1 - 1/kappa) eps`` entrywise for the fixed ``eps`` and ``kappa``.

    ``margins[i] = 1 - 1/kappa - (J eps)_i / eps_i``.  At the prescribed step
    with ``sigma = 0``, ``Q = 1`` and ``m = M`` the last row holds with
    equality, so a row passes when its margin is ``>= -1e-12`` (rounding);
    ``strict`` reports whether every margin is positive.
    """
    J = build_rate_matrix(alpha, mu, lip, sigma, m, M)
    eps = certificate_vector(mu, lip, sigma, m, M)
    inv_k = inverse_kappa(mu, lip, sigma, m, M)
    rate = 1.0 - inv_k
    margins = rate - (J.entries @ eps) / eps
    bad = [i for i in range(4) if margins[i] < -ROUNDING_SLACK * rate]
    if bad:
        raise CertificateFailure(
            bad,
            f"entrywise check J eps <= (1 - 1/kappa) eps fails in row(s) {bad} "
            f"(margins {np.array2string(margins, precision=3)}, 1/kappa = {inv_k:.3e})",
        )
    margins.setflags(write=False)
    return RateCertificate(eps, 1.0 / inv_k, rate, spectral_radius(J), margins, bool(np.all(margins > 0)), J)


def verify_nonneg_bound(A, x):
    """``beta = max_i (A x)_i / x_i`` and whether an eigensolve confirms ``rho(A) <= beta`` (to 1e-9)."""
    A = _nonneg_square(A)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.shape[0],) or not np.all(x > 0):
        raise InvalidArgument("x must be a strictly positive vector matching A")
    beta = float(np.max((A @ x) / x))
    rho = float(np.abs(np.linalg.eigvals(A)).max())
    return rho <= beta + 1e-9, beta


@dataclass(frozen=True)
class LyapunovSample:
    consensus_sq: float
    opt_gap_sq: float
    staleness: float | None
    tracking_sq: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.consensus_sq, self.opt_gap_sq, np.nan if self.staleness is None else self.staleness, self.tracking_sq])


def measure_lyapunov(state, cert, staleness: bool = False) -> LyapunovSample:
    """Lyapunov components of ``state`` relative to ``cert.x_star``.

    ``staleness`` is ``n t^k = sum_i (1/m_i) sum_j ||z_ij - x*||^2`` and needs a
    state initialised with ``track_staleness=True``.
    """
    xs = np.asarray(cert.x_star)
    n = state.X.shape[0]
    xbar = state.X.mean(axis=0)
    dx = state.X - xbar
    dy = state.Y - state.Y.mean(axis=0)
    e = xbar - xs
    t = None
    if staleness:
        if state.Z is None:
            raise InvalidState("staleness requested but the state stores no table points")
        dz = state.z_points() - xs
        per = np.einsum("ca,ca->c", dz, dz)
        sizes = np.diff(state.offsets)
        t = float(np.sum(np.add.reduceat(per, state.offsets[:-1]) / sizes))
    return LyapunovSample(float(np.sum(dx * dx)), float(n * (e @ e)), t, float(np.sum(dy * dy)))


def iteration_complexity_bound(mu, lip, sigma, m, M, eps_target: float, u0_scale: float = 1.0) -> float:
    """``kappa * ln(u0_scale / eps_target)`` (unrounded, floored at 0)."""
    if not eps_target > 0:
        raise InvalidArgument(f"eps_target must be > 0, got {eps_target!r}")
    if not u0_scale > 0:
        raise InvalidArgument(f"u0_scale must be > 0, got {u0_scale!r}")
    cert = rate_certificate(theoretical_step_size(mu, lip, sigma, m, M), mu, lip, sigma, m, M)
    return max(0.0, cert.kappa * math.log(u0_scale / eps_target))


def predicted_iteration_complexity(mu, lip, sigma, m, M, eps_target: float, u0_scale: float = 1.0) -> int:
    """Rounds needed at rate ``1 - 1/kappa`` to shrink ``u0_scale`` to ``eps_target``."""
    return int(math.ceil(iteration_complexity_bound(mu, lip, sigma, m, M, eps_target, u0_scale)))
