"""Adaptive Newton / negative-curvature driver (AN2CLS).

Each iteration asks a step-computation backend for a tentative
regularization ``mu`` and a trial step of the doubly regularized quadratic
model ``g's + 0.5 s'(H + (sqrt(sigma)|g| + mu) I)s``.  Newton-type trial
steps are screened first: a step that is both short (relative to
``1/(sqrt(sigma) kappa_slow)``) and fails to halve the gradient is rejected
outright.  Surviving steps are accepted when the actual-over-predicted
decrease ratio ``rho`` is large enough and the gradient at the trial point
has not blown up relative to ``kappa_k |g| / eps``.  The regularization
parameter ``sigma`` shrinks on very successful iterations and is inflated by
``gamma2`` on every rejection.

Gradient evaluations are reused: the gradient computed at a trial point
during the screening or acceptance tests becomes the current gradient when
the step is accepted, so only iterations that actually needed a fresh
gradient pay for one.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Union

import numpy as np

from .linalg import NumericalError
from .problems import EvaluationError, Problem
from .stepcomp_exact import StepKind, StepOutcome, stepcomp_exact
from .stepcomp_krylov import (
    Preconditioner,
    SubspaceExhaustedError,
    stepcomp_krylov,
    stepcomp_krylov_preconditioned,
)

SIGMA0_GRADIENT_RULE = "1/||g0||"

BACKENDS = ("exact", "krylov")


class ConfigError(ValueError):
    """Invalid solver configuration."""


class ModelDecreaseError(NumericalError):
    """The quadratic model predicted no decrease for a trial step."""


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration-limit"
    TIME_LIMIT = "time-limit"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class SolverConfig:
    """All hyperparameters of the first-order driver.

    ``sigma0`` is either a positive number or the rule ``"1/||g0||"``
    resolved against the initial gradient.  Parameter ranges are validated
    at construction; ``kappa_slow`` and ``kappa_upnewt`` are derived.
    """

    sigma0: Union[float, str] = SIGMA0_GRADIENT_RULE
    sigma_min: float = 1e-8
    kappa_C: float = 1e3
    kappa_theta: float = 0.0
    theta: float = 1.0
    vartheta: float = 1e4
    gamma1: float = 0.5
    gamma2: float = 10.0
    gamma3: float = 10.0
    eta1: float = 1e-4
    eta2: float = 0.95
    eps: float = 1e-6
    max_iterations: int = 5000
    time_limit_seconds: float = 3600.0
    backend: str = "exact"
    preconditioner: Preconditioner = field(default_factory=Preconditioner.identity)

    def __post_init__(self):
        if isinstance(self.sigma0, str):
            if self.sigma0 != SIGMA0_GRADIENT_RULE:
                raise ConfigError(
                    f"sigma0 must be positive or the rule {SIGMA0_GRADIENT_RULE!r}"
                )
        elif not self.sigma0 > 0:
            raise ConfigError("sigma0 must be positive")
        if not self.sigma_min > 0:
            raise ConfigError("sigma_min must be positive")
        if not self.kappa_C >= 1:
            raise ConfigError("kappa_C must be >= 1")
        if not self.kappa_theta >= 0:
            raise ConfigError("kappa_theta must be >= 0")
        if not 0 < self.theta <= 1:
            raise ConfigError("theta must lie in (0, 1]")
        if not self.vartheta >= 1:
            raise ConfigError("vartheta must be >= 1")
        if not 0 < self.gamma1 < 1 < self.gamma2 <= self.gamma3:
            raise ConfigError("need 0 < gamma1 < 1 < gamma2 <= gamma3")
        if not 0 < self.eta1 <= self.eta2 < 1:
            raise ConfigError("need 0 < eta1 <= eta2 < 1")
        if not 0 < self.eps <= 1:
            raise ConfigError("eps must lie in (0, 1]")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be nonnegative")
        if not self.time_limit_seconds > 0:
            raise ConfigError("time_limit_seconds must be positive")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.backend == "exact":
            if self.theta != 1.0 or self.kappa_theta != 0.0:
                raise ConfigError("the exact backend requires theta=1, kappa_theta=0")
            if self.preconditioner.kind != "identity":
                raise ConfigError("preconditioning is only supported by the krylov backend")

    @property
    def kappa_slow(self) -> float:
        base = 1.0 + self.kappa_theta + self.kappa_C
        return base + math.sqrt(base * base + self.vartheta)

    @property
    def kappa_upnewt(self) -> float:
        return 3.0 * (1.0 - self.eta2) + 1.0 + self.kappa_C + self.kappa_theta

    def resolve_sigma0(self, g0_norm: float) -> float:
        if isinstance(self.sigma0, str):
            if g0_norm <= 0 or not np.isfinite(g0_norm):
                return self.sigma_min
            return max(self.sigma_min, 1.0 / g0_norm)
        return float(self.sigma0)

    # -- serialization -----------------------------------------------------

    def to_mapping(self) -> dict:
        out = dataclasses.asdict(self)
        out["preconditioner"] = _precond_to_obj(self.preconditioner)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_mapping())

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "SolverConfig":
        return cls(**_parse_fields(cls, mapping))

    @classmethod
    def from_json(cls, text: str) -> "SolverConfig":
        return cls.from_mapping(json.loads(text))


def _precond_to_obj(M: Preconditioner):
    if M.kind == "identity":
        return "identity"
    return {"kind": "diagonal", "diagonal": [float(v) for v in M.diagonal]}


def _precond_from_obj(obj) -> Preconditioner:
    if isinstance(obj, Preconditioner):
        return obj
    if obj == "identity" or obj is None:
        return Preconditioner.identity()
    if isinstance(obj, Mapping) and obj.get("kind") == "diagonal":
        return Preconditioner.diagonal_of(np.asarray(obj["diagonal"], dtype=float))
    raise ConfigError(f"cannot parse preconditioner from {obj!r}")


_INT_FIELDS = {"max_iterations"}


def _parse_fields(cls, mapping: Mapping[str, Any]) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(mapping) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in mapping.items():
        if key == "preconditioner":
            kwargs[key] = _precond_from_obj(value)
        elif key == "backend":
            kwargs[key] = str(value)
        elif key == "sigma0" and isinstance(value, str) and value == SIGMA0_GRADIENT_RULE:
            kwargs[key] = value
        elif key in _INT_FIELDS:
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return kwargs


def default_config(backend: str) -> SolverConfig:
    """Reference hyperparameters for the given backend."""
    if backend == "exact":
        return SolverConfig(backend="exact", theta=1.0, kappa_theta=0.0)
    if backend == "krylov":
        return SolverConfig(backend="krylov", theta=0.5, kappa_theta=1.0)
    raise ConfigError(f"backend must be one of {BACKENDS}")


@dataclass(frozen=True)
class IterationRecord:
    """One row of the solve trace, all quantities at iteration start.

    ``model_value`` is the quadratic model value ``g's + 0.5 s'Hs`` of the
    trial step (negative whenever the step qualifies).  For second-order
    steps ``mu`` stores ``|lam_min(H)|``.  ``rho`` is absent when the
    screening test rejected the step before the acceptance ratio was
    evaluated.  The evaluation counters cover this iteration only.
    """

    k: int
    kind: StepKind
    sigma: float
    mu: float
    rho: Optional[float]
    gnorm: float
    f: float
    step_norm: float
    kappa: float
    accepted: bool
    model_value: float
    krylov_dim: Optional[int] = None
    f_evals: int = 0
    g_evals: int = 0
    hess_evals: int = 0
    hess_vec_evals: int = 0

    @property
    def rejected(self) -> bool:
        return not self.accepted


@dataclass
class SolveResult:
    x: np.ndarray
    gnorm: float
    f: float
    status: SolveStatus
    trace: list
    f_evals: int
    g_evals: int
    hess_evals: int
    hess_vec_evals: int
    wall_time: float
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def successful_iterations(self) -> int:
        return sum(1 for r in self.trace if r.accepted)


def compute_rho(f_current: float, f_trial: float, model_value: float) -> float:
    """Acceptance ratio (f - f_trial) / (-model value); model_value must be < 0."""
    if not model_value < 0.0:
        raise ModelDecreaseError(
            f"trial step predicts no model decrease (model value {model_value})"
        )
    return (f_current - f_trial) / (-model_value)


def update_sigma(
    sigma: float, rho: Optional[float], reject: bool, config: SolverConfig
) -> float:
    """Deterministic lower-endpoint regularization update.

    Very successful iterations shrink sigma by ``gamma1`` (floored at
    ``sigma_min``), plainly successful ones keep it, and every rejection
    inflates it by ``gamma2`` regardless of which test rejected.
    """
    if reject:
        return config.gamma2 * sigma
    if rho is not None and rho >= config.eta2:
        return max(config.sigma_min, config.gamma1 * sigma)
    return sigma


def kappa_k(kind: StepKind, mu: float, sigma: float, config: SolverConfig) -> float:
    """Gradient-growth cap for the trial-point test, per step kind."""
    if kind == StepKind.NEWTON:
        return config.kappa_upnewt
    if kind == StepKind.NEGATIVE_CURVATURE:
        return (
            1.5 * config.kappa_C**2 * config.theta**2 * (1.0 - config.eta2)
            + 1.0
            + config.kappa_C * mu / math.sqrt(sigma)
        )
    raise ValueError(f"no kappa for step kind {kind}")


class _Run:
    """Mutable state of one solve; the iteration body lives here."""

    def __init__(self, problem: Problem, config: SolverConfig, eps: float):
        if config.backend == "exact" and problem.hessian is None:
            raise ConfigError(
                f"problem {problem.name!r} has no dense Hessian; "
                "the exact backend refuses it"
            )
        if config.backend == "krylov":
            config.preconditioner.entries(problem.dimension)  # validates length
        self.problem = problem
        self.config = config
        self.eps = eps
        self.k = 0
        self.trace: list = []
        self.f_evals = 0
        self.g_evals = 0
        self.hess_evals = 0
        self.hess_vec_evals = 0
        self.x = problem.initial_point.copy()
        self.f = self._eval_f(self.x, strict=True)
        self.g = self._eval_g(self.x, strict=True)
        self.gnorm = float(np.linalg.norm(self.g))
        self.sigma = config.resolve_sigma0(self.gnorm)
        self._H: Optional[np.ndarray] = None

    # -- counted evaluations ------------------------------------------------

    def _eval_f(self, x, strict=False) -> float:
        self.f_evals += 1
        value = float(self.problem.objective(x))
        if strict and not np.isfinite(value):
            raise EvaluationError("objective non-finite at the current iterate", x)
        return value

    def _eval_g(self, x, strict=False) -> np.ndarray:
        self.g_evals += 1
        value = np.asarray(self.problem.gradient(x), dtype=float)
        if strict and not np.all(np.isfinite(value)):
            raise EvaluationError("gradient non-finite at the current iterate", x)
        return value

    def hessian(self) -> np.ndarray:
        if self._H is None:
            self.hess_evals += 1
            self._H = np.asarray(self.problem.hessian(self.x), dtype=float)
            if not np.all(np.isfinite(self._H)):
                raise EvaluationError("Hessian non-finite at the current iterate", self.x)
        return self._H

    def _hess_vec_fn(self):
        x = self.x

        def apply(v: np.ndarray) -> np.ndarray:
            self.hess_vec_evals += 1
            return np.asarray(self.problem.hessian_vector(x, v), dtype=float)

        return apply

    # -- one first-order iteration -------------------------------------------

    def _compute_step(self) -> tuple[StepOutcome, Any]:
        cfg = self.config
        if cfg.backend == "exact":
            H = self.hessian()
            return stepcomp_exact(self.g, H, self.sigma, cfg.kappa_C), H
        hv = self._hess_vec_fn()
        if cfg.preconditioner.kind == "identity":
            out = stepcomp_krylov(
                self.g, hv, self.sigma, cfg.kappa_C, cfg.kappa_theta, cfg.theta
            )
        else:
            out = stepcomp_krylov_preconditioned(
                self.g,
                hv,
                self.sigma,
                cfg.kappa_C,
                cfg.kappa_theta,
                cfg.theta,
                M=cfg.preconditioner,
            )
        return out, hv

    def fo_iteration(self) -> None:
        cfg = self.config
        counters0 = (self.f_evals, self.g_evals, self.hess_evals, self.hess_vec_evals)
        outcome, hess = self._compute_step()
        s = outcome.s_trial
        snorm = float(np.linalg.norm(s))
        Hs = hess @ s if isinstance(hess, np.ndarray) else hess(s)
        q = float(self.g @ s + 0.5 * (s @ Hs))

        reject = False
        rho: Optional[float] = None
        g_trial: Optional[np.ndarray] = None
        f_trial: Optional[float] = None
        kappa = kappa_k(outcome.kind, outcome.mu, self.sigma, cfg)

        if outcome.kind == StepKind.NEWTON:
            g_trial = self._eval_g(self.x + s)
            if not np.all(np.isfinite(g_trial)):
                reject, g_trial = True, None
            elif float(np.linalg.norm(g_trial)) > self.gnorm / 2.0 and snorm < 1.0 / (
                math.sqrt(self.sigma) * cfg.kappa_slow
            ):
                reject = True  # short step failed to tame the gradient

        if not reject:
            f_trial = self._eval_f(self.x + s)
            if not np.isfinite(f_trial):
                reject, f_trial = True, None
            else:
                rho = compute_rho(self.f, f_trial, q)
                if rho < cfg.eta1:
                    reject = True
                else:
                    if g_trial is None:
                        g_trial = self._eval_g(self.x + s)
                        if not np.all(np.isfinite(g_trial)):
                            reject, g_trial = True, None
                    if not reject and float(np.linalg.norm(g_trial)) > kappa * self.gnorm / self.eps:
                        reject = True

        self._finish_iteration(outcome, snorm, q, kappa, rho, reject, f_trial, g_trial, counters0)

    def _finish_iteration(
        self, outcome, snorm, q, kappa, rho, reject, f_trial, g_trial, counters0
    ) -> None:
        self.trace.append(
            IterationRecord(
                k=self.k,
                kind=outcome.kind,
                sigma=self.sigma,
                mu=outcome.mu,
                rho=rho,
                gnorm=self.gnorm,
                f=self.f,
                step_norm=snorm,
                kappa=kappa,
                accepted=not reject,
                model_value=q,
                krylov_dim=outcome.krylov_dim,
                f_evals=self.f_evals - counters0[0],
                g_evals=self.g_evals - counters0[1],
                hess_evals=self.hess_evals - counters0[2],
                hess_vec_evals=self.hess_vec_evals - counters0[3],
            )
        )
        if not reject:
            self.x = self.x + outcome.s_trial
            self.f = f_trial
            self.g = g_trial
            self.gnorm = float(np.linalg.norm(g_trial))
            self._H = None
        self.sigma = update_sigma(self.sigma, rho, reject, self.config)
        self.k += 1

    def result(self, status: SolveStatus, wall_time: float, message: str = "") -> SolveResult:
        return SolveResult(
            x=self.x,
            gnorm=self.gnorm,
            f=self.f,
            status=status,
            trace=self.trace,
            f_evals=self.f_evals,
            g_evals=self.g_evals,
            hess_evals=self.hess_evals,
            hess_vec_evals=self.hess_vec_evals,
            wall_time=wall_time,
            message=message,
        )


_ABORT_ERRORS = (NumericalError, EvaluationError, SubspaceExhaustedError, ModelDecreaseError)


def solve(problem: Problem, config: SolverConfig) -> SolveResult:
    """Minimize ``problem`` to first-order tolerance ``config.eps``.

    Returns a full per-iteration trace and evaluation counters.  Backend or
    evaluation failures terminate with status ``numerical-failure`` and a
    partial trace rather than raising.
    """
    t0 = time.monotonic()
    try:
        run = _Run(problem, config, eps=config.eps)
    except _ABORT_ERRORS as exc:
        return _failed_result(problem, t0, str(exc))

    while True:
        if run.gnorm <= config.eps:
            status = SolveStatus.CONVERGED
            break
        if run.k >= config.max_iterations:
            status = SolveStatus.ITERATION_LIMIT
            break
        if time.monotonic() - t0 > config.time_limit_seconds:
            status = SolveStatus.TIME_LIMIT
            break
        try:
            run.fo_iteration()
        except _ABORT_ERRORS as exc:
            return run.result(
                SolveStatus.NUMERICAL_FAILURE, time.monotonic() - t0, str(exc)
            )
    return run.result(status, time.monotonic() - t0)


def _failed_result(problem: Problem, t0: float, message: str) -> SolveResult:
    return SolveResult(
        x=problem.initial_point.copy(),
        gnorm=float("nan"),
        f=float("nan"),
        status=SolveStatus.NUMERICAL_FAILURE,
        trace=[],
        f_evals=0,
        g_evals=0,
        hess_evals=0,
        hess_vec_evals=0,
        wall_time=time.monotonic() - t0,
        message=message,
    )
