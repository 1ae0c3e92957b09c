"""Shared helpers: trace invariant checks used across test modules."""

from __future__ import annotations

import math

import numpy as np

from an2cls import SolveResult, SolverConfig, StepKind


def assert_step_lemmas(result: SolveResult, config: SolverConfig, rtol: float = 1e-9):
    """Step-length and model-decrease bounds for every trial step in a trace.

    Newton steps obey |s| <= 1/sqrt(sigma) and a model decrease of at least
    sqrt(sigma)|g||s|^2; curvature steps have exact length
    theta kappa_C / sqrt(sigma) and decrease at least 0.5 sigma |g||s|^3;
    second-order steps have length 1/sqrt(sigma) and decrease at least
    |lam_min| / (2 sigma).
    """
    for rec in result.trace:
        sq = math.sqrt(rec.sigma)
        decrease = -rec.model_value
        if rec.kind == StepKind.NEWTON:
            assert rec.step_norm <= (1.0 / sq) * (1.0 + rtol), rec
            floor = sq * rec.gnorm * rec.step_norm**2
            assert decrease >= floor * (1.0 - rtol), rec
        elif rec.kind == StepKind.NEGATIVE_CURVATURE:
            expected = config.theta * config.kappa_C / sq
            assert abs(rec.step_norm - expected) <= rtol * expected, rec
            floor = 0.5 * rec.sigma * rec.gnorm * rec.step_norm**3
            assert decrease >= floor * (1.0 - rtol), rec
        elif rec.kind == StepKind.SECOND_ORDER:
            expected = 1.0 / sq
            assert abs(rec.step_norm - expected) <= rtol * expected, rec
            floor = rec.mu / (2.0 * rec.sigma)
            assert decrease >= floor * (1.0 - rtol), rec


def assert_sigma_policy(result: SolveResult, config: SolverConfig):
    """sigma >= sigma_min throughout; gamma2 inflation on every rejection;
    decrease only on very successful iterations."""
    for rec in result.trace:
        assert rec.sigma >= config.sigma_min
    for prev, nxt in zip(result.trace, result.trace[1:]):
        if prev.rejected:
            assert nxt.sigma == config.gamma2 * prev.sigma
        elif prev.rho is not None and prev.rho >= config.eta2:
            assert nxt.sigma == max(config.sigma_min, config.gamma1 * prev.sigma)
        else:
            assert nxt.sigma == prev.sigma
        if nxt.sigma < prev.sigma:
            assert prev.accepted and prev.rho is not None and prev.rho >= config.eta2


def assert_monotone_objective(result: SolveResult, config: SolverConfig):
    """f non-increasing over accepted iterations with at least the eta1
    fraction of the predicted decrease."""
    fs = [rec.f for rec in result.trace] + [result.f]
    for i, rec in enumerate(result.trace):
        if rec.accepted:
            assert fs[i + 1] <= fs[i]
            predicted = -rec.model_value
            assert fs[i] - fs[i + 1] >= config.eta1 * predicted * (1.0 - 1e-12)
        else:
            assert fs[i + 1] == fs[i]


def assert_gradient_cap(result: SolveResult, config: SolverConfig, eps: float):
    """Accepted steps never grow the gradient past kappa_k |g_k| / eps
    (absolute cap kappa for second-order steps)."""
    gs = [rec.gnorm for rec in result.trace] + [result.gnorm]
    for i, rec in enumerate(result.trace):
        if not rec.accepted:
            assert gs[i + 1] == gs[i]
            continue
        if rec.kind == StepKind.SECOND_ORDER:
            assert gs[i + 1] <= rec.kappa * (1.0 + 1e-12)
        else:
            assert gs[i + 1] <= rec.kappa * gs[i] / eps * (1.0 + 1e-12)
        if rec.kind == StepKind.NEWTON:
            assert gs[i + 1] <= config.kappa_upnewt * gs[i] / eps * (1.0 + 1e-12)


def assert_gradient_reuse(result: SolveResult):
    """Gradient evaluations = Newton trials + accepted non-Newton steps + 1."""
    newton_trials = sum(1 for r in result.trace if r.kind == StepKind.NEWTON)
    accepted_other = sum(
        1 for r in result.trace if r.accepted and r.kind != StepKind.NEWTON
    )
    assert result.g_evals == newton_trials + accepted_other + 1, (
        result.g_evals,
        newton_trials,
        accepted_other,
    )


def assert_trace_clean(result: SolveResult, config: SolverConfig, eps: float = None):
    """All trace invariants at once."""
    if eps is None:
        eps = config.eps
    assert_step_lemmas(result, config)
    assert_sigma_policy(result, config)
    assert_monotone_objective(result, config)
    assert_gradient_cap(result, config, eps)
    assert_gradient_reuse(result)
    for rec in result.trace:
        if rec.kind == StepKind.NEGATIVE_CURVATURE:
            threshold = config.kappa_C * math.sqrt(rec.sigma) * rec.gnorm
            assert rec.mu > threshold


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((n, n))
    return scale * 0.5 * (A + A.T)
