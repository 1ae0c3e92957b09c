"""Matrix-free trial-step computation on nested Krylov subspaces.

A Lanczos process with full reorthogonalization builds an orthonormal basis
``V_p`` whose projected Hessian is the tridiagonal ``T_p``.  In each subspace
the same dichotomy as in the exact backend is applied: either the shifted
tridiagonal Newton system is solved and the step accepted once the linear
residual (which lives entirely in the next basis direction) is small enough,
or a unit subspace direction of sufficiently negative curvature is extracted.
The basis is stored explicitly; only Hessian-vector products touch the
ambient space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import (
    EIG_TOL,
    ShiftTooSmallError,
    SymTridiag,
    solve_tridiag_shifted,
    tridiag_eig_min,
)
from .stepcomp_exact import StepKind, StepOutcome

HessVec = Callable[[np.ndarray], np.ndarray]

# alpha below this multiple of (1 + |g|) is treated as exact breakdown.
BREAKDOWN_COEF = 1e-13
# Floor applied to diagonal preconditioner entries.
PRECOND_FLOOR = 1e-12


class SubspaceExhaustedError(RuntimeError):
    """max_dim was hit below the ambient dimension without an accepted step."""


@dataclass
class LanczosState:
    """Lanczos basis, tridiagonal projection and trailing residual.

    ``basis`` holds the orthonormal vectors built so far, ``residual`` the
    next (not yet normalized) direction with ``alpha_next`` its norm, and
    ``alpha1`` the initial gradient norm.  A state is confined to a single
    step computation.
    """

    alpha1: float
    residual: np.ndarray
    alpha_next: float
    basis: list = field(default_factory=list)
    diag: list = field(default_factory=list)
    offdiag: list = field(default_factory=list)

    @classmethod
    def start(cls, g: np.ndarray) -> "LanczosState":
        g = np.asarray(g, dtype=float)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= 0.0:
            raise ValueError("Lanczos requires a nonzero starting vector")
        return cls(alpha1=gnorm, residual=g.copy(), alpha_next=gnorm)

    @property
    def p(self) -> int:
        return len(self.basis)

    @property
    def tridiag(self) -> SymTridiag:
        return SymTridiag(np.array(self.diag), np.array(self.offdiag))


def lanczos_extend(state: LanczosState, hess_vec: HessVec) -> LanczosState:
    """Append the next Lanczos vector, reorthogonalizing twice against the basis.

    Requires a trailing residual above the breakdown tolerance (always true
    for the initial state).  Mutates and returns ``state``.
    """
    if state.p > 0 and state.alpha_next <= BREAKDOWN_COEF * (1.0 + state.alpha1):
        raise ValueError("cannot extend past a Lanczos breakdown")
    v = state.residual / state.alpha_next
    Hv = np.asarray(hess_vec(v), dtype=float)
    delta = float(v @ Hv)
    r = Hv - delta * v
    if state.basis:
        r = r - state.alpha_next * state.basis[-1]
        state.offdiag.append(state.alpha_next)
    state.basis.append(v)
    state.diag.append(delta)
    for _ in range(2):
        for w in state.basis:
            r -= (w @ r) * w
    state.residual = r
    state.alpha_next = float(np.linalg.norm(r))
    return state


def build_subspace_negcurv(
    y: Optional[np.ndarray],
    T: SymTridiag,
    theta: float,
    first_basis_sign: float = 1.0,
) -> np.ndarray:
    """Unit subspace direction of sufficiently negative curvature.

    Tries normalized combinations ``c * y/|y| + w`` of the current Newton
    solution and the sign-fixed minimum eigenvector ``w`` of ``T``, richest
    combination first, accepting the first candidate with ``e_1'u <= 0``,
    ``u'Tu <= theta lam_min`` and ``u'T^2u <= lam_min^2 / (2 theta^2)``;
    falls back to ``w`` when no combination qualifies.  Requires
    ``lam_min(T) < 0``.
    """
    lam, w = tridiag_eig_min(T)
    if lam >= 0.0:
        raise ValueError("negative-curvature direction requested but T is PSD")
    if first_basis_sign * w[0] > 0.0:
        w = -w

    ynorm = float(np.linalg.norm(y)) if y is not None else 0.0
    if ynorm > 0.0:
        yhat = y / ynorm
        quad_cap = lam * lam / (2.0 * theta * theta)
        for c in (1.0, 0.5, 0.25):
            cand = (c / (1.0 + ynorm)) * yhat + w
            nrm = float(np.linalg.norm(cand))
            if nrm == 0.0:
                continue
            u = cand / nrm
            if first_basis_sign * u[0] > 0.0:
                continue
            Tu = T.apply(u)
            if float(u @ Tu) > theta * lam:
                continue
            if float(Tu @ Tu) > quad_cap:
                continue
            return u
    return w


def stepcomp_krylov(
    g: np.ndarray,
    hess_vec: HessVec,
    sigma: float,
    kappa_C: float,
    kappa_theta: float,
    theta: float,
    max_dim: Optional[int] = None,
) -> StepOutcome:
    """Compute a trial step by expanding Krylov subspaces until acceptance.

    Per subspace dimension p: extend the Lanczos basis, set
    ``mu = max(0, -lam_min(T_p))`` and branch on ``mu`` versus
    ``kappa_C sqrt(sigma)|g|``.  The Newton branch solves the shifted
    tridiagonal system and accepts when the trailing-residual test passes;
    the curvature branch accepts when the off-subspace contamination of the
    candidate direction is small enough.  At ``p = n`` (or on exact
    breakdown) the loop terminates unconditionally.
    """
    g = np.asarray(g, dtype=float)
    n = g.size
    gnorm = float(np.linalg.norm(g))
    if gnorm <= 0.0:
        raise ValueError("stepcomp_krylov requires a nonzero gradient")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if kappa_theta < 0.0:
        raise ValueError("kappa_theta must be nonnegative")
    if max_dim is None:
        max_dim = n
    if not 1 <= max_dim <= n:
        raise ValueError("max_dim must lie in [1, n]")

    sqs = math.sqrt(sigma)
    curv_threshold = kappa_C * sqs * gnorm
    breakdown_tol = BREAKDOWN_COEF * (1.0 + gnorm)
    state = LanczosState.start(g)
    last_y: Optional[np.ndarray] = None

    while True:
        lanczos_extend(state, hess_vec)
        p = state.p
        T = state.tridiag
        lam, _ = tridiag_eig_min(T)
        mu = max(0.0, -lam)
        alpha = state.alpha_next
        forced = alpha <= breakdown_tol or p == n

        if mu > curv_threshold:
            y_pad = None
            if last_y is not None:
                y_pad = np.zeros(p)
                y_pad[: last_y.size] = last_y
            u = build_subspace_negcurv(y_pad, T, theta)
            contamination = (alpha * abs(float(u[-1]))) ** 2
            if forced or contamination <= lam * lam / (2.0 * theta * theta):
                coeff = theta * kappa_C / sqs
                s = coeff * _from_basis(state, u)
                return StepOutcome(
                    s_trial=s,
                    mu=mu,
                    kind=StepKind.NEGATIVE_CURVATURE,
                    residual_norm=_curv_residual_norm(state, T, u, coeff, sqs * gnorm + mu),
                    krylov_dim=p,
                )
        else:
            rhs = np.zeros(p)
            rhs[0] = -state.alpha1
            try:
                y = solve_tridiag_shifted(T, sqs * gnorm + mu, rhs)
            except ShiftTooSmallError:
                # mu from the tridiagonal eigensolver can be marginally stale
                # when the shift sqrt(sigma)|g| is below the eigen error.
                tscale = float(np.max(np.abs(T.diag)) + 2.0 * np.max(np.abs(T.offdiag), initial=0.0))
                mu = mu + 10.0 * EIG_TOL * (1.0 + tscale)
                y = solve_tridiag_shifted(T, sqs * gnorm + mu, rhs)
            last_y = y
            trailing = alpha * float(y[-1])
            ynorm = float(np.linalg.norm(y))
            if forced or abs(trailing) <= kappa_theta * min(sqs * gnorm * ynorm, gnorm):
                s = _from_basis(state, y)
                if alpha > 0.0:
                    resid_vec = (trailing / alpha) * state.residual
                else:
                    resid_vec = np.zeros(n)
                return StepOutcome(
                    s_trial=s,
                    mu=mu,
                    kind=StepKind.NEWTON,
                    residual_norm=abs(trailing),
                    krylov_dim=p,
                    residual_vector=resid_vec,
                )

        if p >= max_dim:
            # p == n is unreachable here (forced acceptance above).
            raise SubspaceExhaustedError(
                f"no acceptable step within max_dim={max_dim} < n={n}"
            )


def _from_basis(state: LanczosState, coeffs: np.ndarray) -> np.ndarray:
    out = coeffs[0] * state.basis[0]
    for c, v in zip(coeffs[1:], state.basis[1:]):
        out = out + c * v
    return out


def _curv_residual_norm(
    state: LanczosState, T: SymTridiag, u: np.ndarray, coeff: float, shift: float
) -> float:
    # |r| for r = (H + shift I)(coeff V u) + g, split into its component in
    # span(V) and the orthogonal trailing term.
    in_span = coeff * (T.apply(u) + shift * u)
    in_span[0] += state.alpha1
    trailing = coeff * state.alpha_next * float(u[-1])
    return math.hypot(float(np.linalg.norm(in_span)), trailing)


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """Identity or positive diagonal metric used as the primal norm."""

    kind: str = "identity"
    diagonal: Optional[np.ndarray] = None

    def __eq__(self, other):
        if not isinstance(other, Preconditioner):
            return NotImplemented
        if self.kind != other.kind:
            return False
        return self.kind == "identity" or np.array_equal(self.diagonal, other.diagonal)

    def __post_init__(self):
        if self.kind not in ("identity", "diagonal"):
            raise ValueError("preconditioner kind must be 'identity' or 'diagonal'")
        if self.kind == "diagonal":
            d = np.asarray(self.diagonal, dtype=float)
            if d.ndim != 1 or d.size == 0 or not np.all(np.isfinite(d)):
                raise ValueError("diagonal preconditioner needs a finite vector")
            object.__setattr__(self, "diagonal", np.maximum(d, PRECOND_FLOOR))
        elif self.diagonal is not None:
            raise ValueError("identity preconditioner takes no diagonal")

    @classmethod
    def identity(cls) -> "Preconditioner":
        return cls(kind="identity")

    @classmethod
    def diagonal_of(cls, entries: np.ndarray) -> "Preconditioner":
        return cls(kind="diagonal", diagonal=np.asarray(entries, dtype=float))

    def entries(self, n: int) -> np.ndarray:
        if self.kind == "identity":
            return np.ones(n)
        if self.diagonal.size != n:
            raise ValueError(
                f"preconditioner has {self.diagonal.size} entries, problem has {n}"
            )
        return self.diagonal


def stepcomp_krylov_preconditioned(
    g: np.ndarray,
    hess_vec: HessVec,
    sigma: float,
    kappa_C: float,
    kappa_theta: float,
    theta: float,
    max_dim: Optional[int] = None,
    M: Preconditioner = Preconditioner(),
) -> StepOutcome:
    """Krylov step computation in the metric induced by a diagonal ``M``.

    Implemented as the plain algorithm on the symmetrically scaled problem
    ``g -> M^(-1/2) g``, ``H -> M^(-1/2) H M^(-1/2)``, mapping the step back
    by ``M^(-1/2)``.  The returned ``residual_norm`` is measured in the
    ``M^(-1)`` norm, the natural dual norm.  With the identity metric every
    scaling factor is exactly 1.0, so results match the unpreconditioned
    path bit for bit.
    """
    g = np.asarray(g, dtype=float)
    sq = np.sqrt(M.entries(g.size))

    def scaled_hess_vec(v: np.ndarray) -> np.ndarray:
        return np.asarray(hess_vec(v / sq), dtype=float) / sq

    out = stepcomp_krylov(
        g / sq, scaled_hess_vec, sigma, kappa_C, kappa_theta, theta, max_dim
    )
    resid_vec = None
    if out.residual_vector is not None:
        resid_vec = out.residual_vector * sq
    return StepOutcome(
        s_trial=out.s_trial / sq,
        mu=out.mu,
        kind=out.kind,
        residual_norm=out.residual_norm,
        krylov_dim=out.krylov_dim,
        residual_vector=resid_vec,
    )
