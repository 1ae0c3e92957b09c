"""Exact trial-step computation for the doubly regularized Newton model.

The regularization mu is taken as the positive part of the smallest Hessian
eigenvalue.  A small mu yields an exact solve of the shifted Newton system
``(H + (mu + sqrt(sigma)|g|) I) s = -g``; a large mu (relative to
``kappa_C sqrt(sigma)|g|``) yields a unit negative-curvature direction of
prescribed length instead.  Outputs satisfy the step-quality contract checked
by :func:`verify_assumption0` with ``theta = 1`` and ``kappa_theta = 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .linalg import EIG_TOL, ShiftTooSmallError, solve_shifted, sym_eig_min

HessOperator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


class StepKind(enum.Enum):
    NEWTON = "newton"
    NEGATIVE_CURVATURE = "negative-curvature"
    SECOND_ORDER = "second-order"


@dataclass(frozen=True)
class StepOutcome:
    """Trial step produced by a step-computation backend.

    ``residual_norm`` is the norm of the doubly regularized Newton residual
    ``(H + (sqrt(sigma)|g| + mu) I) s + g`` for the returned step (for a
    negative-curvature step this is diagnostic only).  ``krylov_dim`` and
    ``residual_vector`` are populated by the Krylov backend.
    """

    s_trial: np.ndarray
    mu: float
    kind: StepKind
    residual_norm: float
    krylov_dim: Optional[int] = None
    residual_vector: Optional[np.ndarray] = None


def stepcomp_exact(
    g: np.ndarray, H: np.ndarray, sigma: float, kappa_C: float
) -> StepOutcome:
    """Compute the exact trial step from a dense Hessian.

    Requires ``|g| > 0`` (the driver terminates on small gradients first)
    and ``sigma > 0``.
    """
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= 0.0:
        raise ValueError("stepcomp_exact requires a nonzero gradient")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if kappa_C < 1.0:
        raise ValueError("kappa_C must be >= 1")

    lam, u = sym_eig_min(H)
    mu = max(0.0, -lam)
    sqs = math.sqrt(sigma)

    if mu <= kappa_C * sqs * gnorm:
        shift = mu + sqs * gnorm
        try:
            s = solve_shifted(H, shift, g)
        except ShiftTooSmallError:
            # The eigen error can leave the shifted matrix marginally
            # indefinite; inflate mu once by the eigen tolerance and retry.
            mu = mu + 10.0 * EIG_TOL * (1.0 + float(np.linalg.norm(H, "fro")))
            s = solve_shifted(H, mu + sqs * gnorm, g)
            shift = mu + sqs * gnorm
        residual = float(np.linalg.norm(H @ s + shift * s + g))
        return StepOutcome(s_trial=s, mu=mu, kind=StepKind.NEWTON, residual_norm=residual)

    if float(g @ u) > 0.0:
        u = -u
    s = (kappa_C / sqs) * u
    residual = float(np.linalg.norm(H @ s + (sqs * gnorm + mu) * s + g))
    return StepOutcome(
        s_trial=s, mu=mu, kind=StepKind.NEGATIVE_CURVATURE, residual_norm=residual
    )


@dataclass(frozen=True)
class Assumption0Report:
    """Outcome of the step-quality verification; one entry per condition.

    ``checks`` maps a condition label to ``(measured, bound, ok)`` where the
    condition passed iff ``measured <= bound``.
    """

    ok: bool
    kind: StepKind
    checks: dict = field(default_factory=dict)

    @property
    def violations(self) -> list[str]:
        return [name for name, (_, _, ok) in self.checks.items() if not ok]


def _as_operator(H: HessOperator) -> Callable[[np.ndarray], np.ndarray]:
    if callable(H):
        return H
    mat = np.asarray(H, dtype=float)
    return lambda v: mat @ v


def verify_assumption0(
    g: np.ndarray,
    H: HessOperator,
    sigma: float,
    outcome: StepOutcome,
    kappa_theta: float,
    theta: float,
    kappa_C: float = 1e3,
    tol: float = 1e-9,
) -> Assumption0Report:
    """Check a trial step against the step-quality contract, report-only.

    For a Newton step: nonnegative curvature of ``H + mu I`` along the step,
    the residual bound with factor ``kappa_theta``, and orthogonality of
    residual and step.  For a negative-curvature step the recovered unit
    direction ``u = s sqrt(sigma) / (theta kappa_C)`` must satisfy
    ``g'u <= 0``, ``|u| = 1``, ``u'Hu <= -theta mu`` and
    ``u'H^2u <= mu^2/theta^2``.  Bounds carry a slack of ``tol`` times the
    natural scale of each condition; ``kappa_C`` must match the value the
    step was computed with.
    """
    g = np.asarray(g, dtype=float)
    apply_h = _as_operator(H)
    s = outcome.s_trial
    mu = outcome.mu
    gnorm = float(np.linalg.norm(g))
    snorm = float(np.linalg.norm(s))
    sqs = math.sqrt(sigma)
    checks: dict = {}

    if outcome.kind == StepKind.NEWTON:
        Hs = apply_h(s)
        sHs = float(s @ Hs)
        curvature = sHs + mu * snorm**2
        checks["positive_curvature"] = (
            -curvature,
            tol * (abs(sHs) + mu * snorm**2 + 1.0),
            -curvature <= tol * (abs(sHs) + mu * snorm**2 + 1.0),
        )
        r = Hs + (sqs * gnorm + mu) * s + g
        rnorm = float(np.linalg.norm(r))
        bound = kappa_theta * min(sqs * gnorm * snorm, gnorm) + tol * gnorm
        checks["residual_bound"] = (rnorm, bound, rnorm <= bound)
        ortho = abs(float(r @ s))
        obound = tol * (rnorm + gnorm) * snorm
        checks["residual_orthogonality"] = (ortho, obound, ortho <= obound)
    elif outcome.kind == StepKind.NEGATIVE_CURVATURE:
        if theta <= 0.0:
            raise ValueError("theta must be positive")
        u = s * (sqs / (theta * kappa_C))
        unorm = float(np.linalg.norm(u))
        checks["unit_norm"] = (abs(unorm - 1.0), tol, abs(unorm - 1.0) <= tol)
        gu = float(g @ u)
        checks["descent_sign"] = (gu, tol * gnorm, gu <= tol * gnorm)
        Hu = apply_h(u)
        uHu = float(u @ Hu)
        cb = -theta * mu + tol * (1.0 + mu + abs(uHu))
        checks["curvature_bound"] = (uHu, cb, uHu <= cb)
        uH2u = float(Hu @ Hu)
        qb = mu**2 / theta**2
        qb_tol = qb + tol * (1.0 + qb + uH2u)
        checks["squared_curvature_bound"] = (uH2u, qb_tol, uH2u <= qb_tol)
    else:
        raise ValueError(f"cannot verify step of kind {outcome.kind}")

    return Assumption0Report(
        ok=all(ok for (_, _, ok) in checks.values()), kind=outcome.kind, checks=checks
    )
