"""Dense symmetric linear algebra: extreme eigenpairs and shifted solves.

Thin wrappers around LAPACK (via numpy/scipy) that add the residual
guarantees the step-computation routines rely on.  Shifted solves use a
positive-definite factorization; indefiniteness raises instead of being
silently regularized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Eigenpair residual tolerance, relative to 1 + |H|.
EIG_TOL = 1e-10
# Relative residual demanded from shifted solves.
SOLVE_TOL = 1e-12
_MAX_REFINE = 5
_EPS = float(np.finfo(float).eps)


def _solve_tol(rhs_norm: float, mat_norm: float, sol_norm: float) -> float:
    # The 1e-12 relative target, floored at the double-precision
    # backward-stability level eps * |A| * |y| that no refinement can beat.
    return SOLVE_TOL * rhs_norm + 32.0 * _EPS * mat_norm * sol_norm


class NumericalError(RuntimeError):
    """A linear-algebra routine failed to reach its required accuracy."""


class ShiftTooSmallError(NumericalError):
    """The shifted matrix was not positive definite; the caller's shift is stale."""


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal matrix stored as its two bands."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        o = np.asarray(self.offdiag, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("diag must be a vector of length >= 1")
        if o.shape != (d.size - 1,):
            raise ValueError("offdiag must have length len(diag) - 1")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", o)

    @property
    def order(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        H = np.diag(self.diag)
        if self.offdiag.size:
            H += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return H

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        if self.offdiag.size:
            out[:-1] += self.offdiag * v[1:]
            out[1:] += self.offdiag * v[:-1]
        return out


def sym_eig_min(H: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector of a symmetric matrix.

    The eigenvector sign is arbitrary; callers canonicalize it.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    if not np.all(np.isfinite(H)):
        raise NumericalError("matrix contains non-finite entries")
    if H.shape[0] == 1:
        return float(H[0, 0]), np.ones(1)
    w, V = scipy.linalg.eigh(H, subset_by_index=[0, 0])
    lam = float(w[0])
    u = V[:, 0]
    u = u / np.linalg.norm(u)
    # Frobenius upper bound is enough for the residual scale.
    scale = 1.0 + float(np.linalg.norm(H, "fro"))
    if np.linalg.norm(H @ u - lam * u) > EIG_TOL * scale:
        raise NumericalError("eigen iteration did not reach the required accuracy")
    return lam, u


def solve_shifted(H: np.ndarray, tau: float, g: np.ndarray) -> np.ndarray:
    """Solve (H + tau I) s = -g for positive definite H + tau I.

    Iterative refinement brings the relative residual below ``SOLVE_TOL``;
    failure to do so raises :class:`NumericalError`.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.size
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return np.zeros(n)
    A = H + tau * np.eye(n)
    anorm = float(np.linalg.norm(A, "fro"))
    try:
        factor = scipy.linalg.cho_factor(A, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ShiftTooSmallError(f"H + {tau} I is not positive definite") from exc
    s = scipy.linalg.cho_solve(factor, -g, check_finite=False)
    for _ in range(_MAX_REFINE):
        r = A @ s + g
        if np.linalg.norm(r) <= _solve_tol(gnorm, anorm, float(np.linalg.norm(s))):
            return s
        s = s - scipy.linalg.cho_solve(factor, r, check_finite=False)
    if np.linalg.norm(A @ s + g) > _solve_tol(gnorm, anorm, float(np.linalg.norm(s))):
        raise NumericalError("shifted solve did not reach the required residual")
    return s


def tridiag_eig_min(T: SymTridiag) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of a symmetric tridiagonal matrix, O(p^2) worst case."""
    if T.order == 1:
        return float(T.diag[0]), np.ones(1)
    try:
        w, V = scipy.linalg.eigh_tridiagonal(
            T.diag, T.offdiag, select="i", select_range=(0, 0)
        )
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("tridiagonal eigen iteration failed") from exc
    lam = float(w[0])
    y = V[:, 0]
    y = y / np.linalg.norm(y)
    scale = 1.0 + float(np.max(np.abs(T.diag)) + 2.0 * np.max(np.abs(T.offdiag)))
    if np.linalg.norm(T.apply(y) - lam * y) > EIG_TOL * scale:
        raise NumericalError("tridiagonal eigen iteration did not converge")
    return lam, y


def solve_tridiag_shifted(T: SymTridiag, tau: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (T + tau I) y = rhs with a banded Cholesky factorization, O(p)."""
    rhs = np.asarray(rhs, dtype=float)
    p = T.order
    if rhs.shape != (p,):
        raise ValueError("rhs length must match the tridiagonal order")
    rnorm = np.linalg.norm(rhs)
    if rnorm == 0.0:
        return np.zeros(p)
    if p == 1:
        pivot = T.diag[0] + tau
        if pivot <= 0.0:
            raise ShiftTooSmallError(f"T + {tau} I is not positive definite")
        return rhs / pivot
    ab = np.zeros((2, p))
    ab[0, 1:] = T.offdiag
    ab[1, :] = T.diag + tau
    anorm = float(
        np.sqrt(np.sum((T.diag + tau) ** 2) + 2.0 * np.sum(T.offdiag**2))
    )
    try:
        y = scipy.linalg.solveh_banded(ab, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ShiftTooSmallError(f"T + {tau} I is not positive definite") from exc
    for _ in range(_MAX_REFINE):
        r = T.apply(y) + tau * y - rhs
        if np.linalg.norm(r) <= _solve_tol(rnorm, anorm, float(np.linalg.norm(y))):
            return y
        y = y - scipy.linalg.solveh_banded(ab, r, check_finite=False)
    if np.linalg.norm(T.apply(y) + tau * y - rhs) > _solve_tol(
        rnorm, anorm, float(np.linalg.norm(y))
    ):
        raise NumericalError("tridiagonal solve did not reach the required residual")
    return y
