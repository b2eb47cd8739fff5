"""Positive-definiteness kernel.

Deterministic linear algebra used everywhere else: Cholesky-based PD
tests, the admissible interval for perturbing one entry of a correlation
matrix while staying positive definite, assembly of a precision matrix
from (s, A, R) factors, and the multivariate normal log-density in
precision form.

All functions are pure and safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, PreconditionError

# A matrix counts as PD iff every Cholesky pivot exceeds this. Strictly
# positive so that near-singular proposals are treated as invalid.
PD_PIVOT_TOL = 1e-10

# Degenerate-quadratic guard for the admissible-interval root solve.
_QUAD_COEF_TOL = 1e-12


def _check_square_symmetric(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} contains non-finite entries")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise InputError(f"{name} is not symmetric")
    return m


def is_positive_definite(m):
    """True iff ``m`` is symmetric positive definite.

    Implemented as an attempted Cholesky factorization with a strict
    positivity tolerance on the pivots, so matrices that are singular to
    working precision are rejected.
    """
    m = _check_square_symmetric(m)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    piv = np.diagonal(chol)
    return bool(np.all(piv * piv > PD_PIVOT_TOL))


def _pd_with_entry(c, i, j, x):
    m = np.array(c, dtype=float, copy=True)
    m[i, j] = x
    m[j, i] = x
    return is_positive_definite(m)


def _bisect_boundary(c, i, j, inside, outside, iters=60):
    # Invariant: PD at `inside`, not PD at `outside`.
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if _pd_with_entry(c, i, j, mid):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def _interval_core(c, i, j):
    """Root solve behind admissible_interval; ``c`` is mutated at (i, j)
    during the determinant evaluations and restored before returning."""
    orig = c[i, j]
    det = np.linalg.det
    try:
        c[i, j] = c[j, i] = -1.0
        d_neg = float(det(c))
        c[i, j] = c[j, i] = 0.0
        d_zero = float(det(c))
        c[i, j] = c[j, i] = 1.0
        d_pos = float(det(c))
    finally:
        c[i, j] = c[j, i] = orig

    # det(x) = a2 x^2 + a1 x + a0 interpolated through x = -1, 0, 1.
    a2 = 0.5 * (d_pos + d_neg) - d_zero
    a1 = 0.5 * (d_pos - d_neg)
    a0 = d_zero

    if abs(a2) < _QUAD_COEF_TOL:
        return _interval_by_bisection(c, i, j, float(orig))

    disc = a1 * a1 - 4.0 * a2 * a0
    if disc <= 0.0:
        # Rounding can push the discriminant slightly negative when the
        # interval is tiny; the Cholesky bisection stays reliable there.
        return _interval_by_bisection(c, i, j, float(orig))

    sq = np.sqrt(disc)
    qq = -0.5 * (a1 + np.copysign(sq, a1))
    if qq == 0.0:
        roots = sorted((-sq / (2.0 * a2), sq / (2.0 * a2)))
    else:
        roots = sorted((qq / a2, a0 / qq))
    lower, upper = roots
    return max(lower, -1.0), min(upper, 1.0)


def admissible_interval(c, i, j):
    """Open interval of values for entry (i, j) of ``c`` preserving PD.

    Returns the maximal open interval (u, v) within (-1, 1) such that
    replacing c[i, j] (and c[j, i]) by any x in (u, v) keeps the matrix
    positive definite. The determinant of the perturbed matrix is a
    quadratic in x with negative leading coefficient; its roots are
    recovered from three determinant evaluations. Falls back to
    bisection against the Cholesky test when the quadratic is
    numerically degenerate.
    """
    c = np.array(_check_square_symmetric(c, "correlation matrix"), copy=True)
    if i == j:
        raise InputError("admissible_interval requires an off-diagonal entry")
    p = c.shape[0]
    if not (0 <= i < p and 0 <= j < p):
        raise InputError(f"indices ({i}, {j}) out of range for dim {p}")
    if not is_positive_definite(c):
        raise PreconditionError(
            "matrix must be positive definite at its current entry value"
        )
    return _interval_core(c, i, j)


def _interval_by_bisection(c, i, j, x0):
    if _pd_with_entry(c, i, j, -1.0):
        lower = -1.0
    else:
        lower = _bisect_boundary(c, i, j, inside=x0, outside=-1.0)
    if _pd_with_entry(c, i, j, 1.0):
        upper = 1.0
    else:
        upper = _bisect_boundary(c, i, j, inside=x0, outside=1.0)
    return lower, upper


@dataclass(frozen=True)
class PrecisionFactors:
    """Factors (s, A, R) of a precision matrix S (A o R) S.

    ``s`` holds the positive diagonal of S (inverse partial standard
    deviations), ``a`` is the binary symmetric selection matrix with unit
    diagonal and ``r`` the symmetric correlation-role matrix. The
    elementwise product a*r must be positive definite; that is checked
    on construction.
    """

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        a = _check_square_symmetric(self.a, "selection matrix")
        r = _check_square_symmetric(self.r, "correlation matrix")
        p = a.shape[0]
        if s.shape != (p,) or r.shape != (p, p):
            raise InputError("factor dimensions disagree")
        if not np.all(s > 0):
            raise InputError("s entries must be strictly positive")
        if not np.all((a == 0) | (a == 1)) or not np.all(np.diag(a) == 1):
            raise InputError("selection matrix must be binary with unit diagonal")
        if not np.all(np.diag(r) == 1.0) or np.any(np.abs(r) > 1.0):
            raise InputError("correlation matrix needs unit diagonal, entries in [-1, 1]")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", r)
        if not is_positive_definite(hadamard_correlation(a, r)):
            raise PreconditionError("a * r is not positive definite")


def hadamard_correlation(a, r):
    """Effective correlation matrix A o R with the diagonal pinned to 1."""
    c = np.asarray(a, dtype=float) * np.asarray(r, dtype=float)
    np.fill_diagonal(c, 1.0)
    return c


def assemble_precision(f: PrecisionFactors):
    """Precision matrix and its log-determinant from factors.

    omega[i, j] = s[i] s[j] a[i, j] r[i, j]; the log-determinant is
    2 sum(log s) + log det(a o r), computed from the Cholesky factor of
    the correlation part.
    """
    c = hadamard_correlation(f.a, f.r)
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise PreconditionError("a * r is not positive definite")
    piv = np.diagonal(chol)
    if not np.all(piv * piv > PD_PIVOT_TOL):
        raise PreconditionError("a * r is numerically singular")
    logdet_c = 2.0 * float(np.sum(np.log(piv)))
    omega = c * np.outer(f.s, f.s)
    log_det = 2.0 * float(np.sum(np.log(f.s))) + logdet_c
    return omega, log_det


def partial_correlations(omega):
    """Partial correlation matrix -omega_ij / sqrt(omega_ii omega_jj).

    Unit diagonal by convention. For a precision assembled from factors
    this recovers -(a o r) off the diagonal.
    """
    omega = _check_square_symmetric(omega, "precision matrix")
    if not is_positive_definite(omega):
        raise PreconditionError("precision matrix must be positive definite")
    d = np.sqrt(np.diag(omega))
    rho = -omega / np.outer(d, d)
    np.fill_diagonal(rho, 1.0)
    return rho


def mvn_logpdf(y, mu, omega, log_det):
    """Multivariate normal log-density in precision form.

    -(p/2) log(2 pi) + (1/2) log_det - (1/2) (y - mu)' omega (y - mu).
    ``log_det`` is the log-determinant of ``omega`` (passed in because
    callers cache it).
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    omega = np.asarray(omega, dtype=float)
    p = omega.shape[0]
    if y.shape != (p,) or mu.shape != (p,) or omega.shape != (p, p):
        raise InputError("dimension mismatch in mvn_logpdf")
    resid = y - mu
    quad = float(resid @ omega @ resid)
    return -0.5 * p * np.log(2.0 * np.pi) + 0.5 * log_det - 0.5 * quad


def mvn_logpdf_rows(y, mu, omega, log_det):
    """Row-wise mvn_logpdf for an (n, p) matrix of observations."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    mu = np.asarray(mu, dtype=float)
    p = omega.shape[0]
    if y.shape[1] != p or mu.shape != (p,):
        raise InputError("dimension mismatch in mvn_logpdf_rows")
    resid = y - mu
    quad = np.einsum("ni,ij,nj->n", resid, omega, resid)
    return -0.5 * p * np.log(2.0 * np.pi) + 0.5 * log_det - 0.5 * quad
