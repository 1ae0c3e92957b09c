"""Second-order criticality driver (SOAN2CLS).

While the gradient is large the iteration is exactly the first-order driver
with tolerance ``eps1``.  Once ``|g| <= eps1`` the solver switches to pure
curvature steps ``u / sqrt(sigma)`` along the exact minimum eigenvector
(sign-fixed so ``g'u <= 0``) until the smallest Hessian eigenvalue clears
``-eps2``, at which point both termination tests hold.  Acceptance of a
curvature step uses the same ratio test plus an absolute cap
``kappa_hess`` on the gradient at the trial point, so the gradient stays
bounded when control returns to first-order stepping.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np

from .core import (
    _ABORT_ERRORS,
    ConfigError,
    SolveResult,
    SolveStatus,
    SolverConfig,
    _failed_result,
    _Run,
    compute_rho,
    default_config,
)
from .linalg import sym_eig_min
from .stepcomp_exact import StepKind


@dataclass(frozen=True)
class SOConfig:
    """Second-order configuration: a first-order config whose ``eps`` plays
    the role of the gradient tolerance ``eps1``, plus the curvature
    tolerance ``eps2``."""

    solver: SolverConfig
    eps2: float = 1e-3

    def __post_init__(self):
        if not 0 < self.eps2 <= 1:
            raise ConfigError("eps2 must lie in (0, 1]")
        if self.solver.backend != "exact":
            raise ConfigError("the second-order driver requires the exact backend")

    @property
    def eps1(self) -> float:
        return self.solver.eps

    def to_mapping(self) -> dict:
        out = self.solver.to_mapping()
        out["eps1"] = out.pop("eps")
        out["eps2"] = self.eps2
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_mapping())

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "SOConfig":
        data = dict(mapping)
        if "eps" in data:
            raise ConfigError("second-order configs use eps1/eps2, not eps")
        eps2 = float(data.pop("eps2", 1e-3))
        if "eps1" in data:
            data["eps"] = float(data.pop("eps1"))
        return cls(solver=SolverConfig.from_mapping(data), eps2=eps2)

    @classmethod
    def from_json(cls, text: str) -> "SOConfig":
        return cls.from_mapping(json.loads(text))


def default_so_config() -> SOConfig:
    return SOConfig(solver=default_config("exact"))


def so_step(
    g: np.ndarray, H: np.ndarray, sigma: float, config: SOConfig
) -> tuple[np.ndarray, float]:
    """Curvature step ``u / sqrt(sigma)`` along the exact minimum eigenvector.

    Requires ``lam_min(H) < -eps2`` (otherwise the caller should have
    terminated).  Returns the step together with its gradient cap
    ``kappa_hess``.
    """
    lam, u = sym_eig_min(np.asarray(H, dtype=float))
    if lam >= -config.eps2:
        raise ValueError(
            f"second-order step requested but lam_min={lam} >= -eps2={-config.eps2}"
        )
    g = np.asarray(g, dtype=float)
    if float(g @ u) > 0.0:
        u = -u
    s = u / math.sqrt(sigma)
    return s, _kappa_hess(lam, sigma, config)


def _kappa_hess(lam: float, sigma: float, config: SOConfig) -> float:
    cfg = config.solver
    return (
        3.0 * (1.0 - cfg.eta2) * abs(lam) / (2.0 * math.sqrt(cfg.sigma_min))
        + 1.0
        + abs(lam) / math.sqrt(sigma)
    )


class _SORun(_Run):
    def __init__(self, problem, config: SOConfig):
        super().__init__(problem, config.solver, eps=config.eps1)
        self.so_config = config
        self._eigpair: Optional[tuple[float, np.ndarray]] = None

    def min_eigpair(self) -> tuple[float, np.ndarray]:
        if self._eigpair is None:
            self._eigpair = sym_eig_min(self.hessian())
        return self._eigpair

    def _finish_iteration(self, *args, **kwargs) -> None:
        super()._finish_iteration(*args, **kwargs)
        if self.trace[-1].accepted:
            self._eigpair = None

    def so_iteration(self) -> None:
        cfg = self.config
        counters0 = (self.f_evals, self.g_evals, self.hess_evals, self.hess_vec_evals)
        lam, u = self.min_eigpair()
        if float(self.g @ u) > 0.0:
            u = -u
        s = u / math.sqrt(self.sigma)
        snorm = float(np.linalg.norm(s))
        kappa = _kappa_hess(lam, self.sigma, self.so_config)
        H = self.hessian()
        q = float(self.g @ s + 0.5 * (s @ (H @ s)))

        reject = False
        rho: Optional[float] = None
        g_trial: Optional[np.ndarray] = None
        f_trial = self._eval_f(self.x + s)
        if not np.isfinite(f_trial):
            reject, f_trial = True, None
        else:
            rho = compute_rho(self.f, f_trial, q)
            if rho < cfg.eta1:
                reject = True
            else:
                g_trial = self._eval_g(self.x + s)
                if not np.all(np.isfinite(g_trial)):
                    reject, g_trial = True, None
                elif float(np.linalg.norm(g_trial)) > kappa:
                    reject = True

        outcome = _SOOutcome(s_trial=s, mu=abs(lam))
        self._finish_iteration(
            outcome, snorm, q, kappa, rho, reject, f_trial, g_trial, counters0
        )


@dataclass(frozen=True)
class _SOOutcome:
    s_trial: np.ndarray
    mu: float
    kind: StepKind = StepKind.SECOND_ORDER
    krylov_dim: Optional[int] = None


def solve_so(problem, config: SOConfig) -> SolveResult:
    """Minimize to joint tolerance: ``|g| <= eps1`` and ``lam_min(H) >= -eps2``.

    On iterates with a large gradient this reproduces the first-order driver
    (with ``eps = eps1``) exactly; small-gradient iterates take second-order
    curvature steps until the Hessian test clears.
    """
    t0 = time.monotonic()
    try:
        run = _SORun(problem, config)
    except _ABORT_ERRORS as exc:
        return _failed_result(problem, t0, str(exc))

    cfg = config.solver
    while True:
        try:
            at_first_order_point = run.gnorm <= config.eps1
            if at_first_order_point:
                lam, _ = run.min_eigpair()
                if lam >= -config.eps2:
                    status = SolveStatus.CONVERGED
                    break
            if run.k >= cfg.max_iterations:
                status = SolveStatus.ITERATION_LIMIT
                break
            if time.monotonic() - t0 > cfg.time_limit_seconds:
                status = SolveStatus.TIME_LIMIT
                break
            if at_first_order_point:
                run.so_iteration()
            else:
                run.fo_iteration()
        except _ABORT_ERRORS as exc:
            return run.result(
                SolveStatus.NUMERICAL_FAILURE, time.monotonic() - t0, str(exc)
            )
    return run.result(status, time.monotonic() - t0)
