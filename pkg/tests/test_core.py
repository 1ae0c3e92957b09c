"""Tests for the first-order driver: config, sigma policy, trace contracts."""

import math

import numpy as np
import pytest

from an2cls import (
    ConfigError,
    ModelDecreaseError,
    Preconditioner,
    Problem,
    SolveStatus,
    SolverConfig,
    StepKind,
    compute_rho,
    default_config,
    get_problem,
    kappa_k,
    solve,
    update_sigma,
)
from an2cls.problems import double_well, quadratic
from conftest import assert_trace_clean


class TestConfig:
    def test_defaults_exact(self):
        cfg = default_config("exact")
        assert cfg.kappa_C == 1e3
        assert cfg.vartheta == 1e4
        assert cfg.gamma1 == 0.5
        assert cfg.gamma2 == cfg.gamma3 == 10.0
        assert cfg.eta1 == 1e-4
        assert cfg.eta2 == 0.95
        assert cfg.sigma_min == 1e-8
        assert cfg.sigma0 == "1/||g0||"
        assert cfg.eps == 1e-6
        assert cfg.max_iterations == 5000
        assert cfg.time_limit_seconds == 3600.0
        assert cfg.theta == 1.0 and cfg.kappa_theta == 0.0

    def test_defaults_krylov(self):
        cfg = default_config("krylov")
        assert cfg.theta == 0.5 and cfg.kappa_theta == 1.0

    def test_derived_constants(self):
        cfg = default_config("exact")
        assert cfg.kappa_upnewt == pytest.approx(1001.15, abs=1e-12)
        assert cfg.kappa_slow == pytest.approx(1001 + math.sqrt(1001**2 + 1e4), rel=1e-15)
        assert cfg.kappa_slow == pytest.approx(2006.98, abs=0.01)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"sigma0": -1.0},
            {"sigma0": "half of g"},
            {"sigma_min": 0.0},
            {"kappa_C": 0.5},
            {"kappa_theta": -1.0, "backend": "krylov", "theta": 0.5},
            {"theta": 0.0},
            {"theta": 1.5},
            {"vartheta": 0.5},
            {"gamma1": 1.0},
            {"gamma2": 0.9},
            {"gamma3": 5.0},  # gamma3 < gamma2 = 10
            {"eta1": 0.0},
            {"eta2": 1.0},
            {"eps": 0.0},
            {"eps": 1.5},
            {"backend": "quasi"},
            {"theta": 0.5},  # exact backend demands theta = 1
        ],
    )
    def test_validation_rejects_bad_ranges(self, kwargs):
        with pytest.raises(ConfigError):
            SolverConfig(**kwargs)

    def test_exact_rejects_preconditioner(self):
        with pytest.raises(ConfigError):
            SolverConfig(preconditioner=Preconditioner.diagonal_of(np.ones(3)))

    def test_sigma0_rule_resolution(self):
        cfg = default_config("exact")
        assert cfg.resolve_sigma0(4.0) == 0.25
        assert cfg.resolve_sigma0(0.0) == cfg.sigma_min
        assert cfg.resolve_sigma0(1e12) == cfg.sigma_min  # rule falls below floor
        assert SolverConfig(sigma0=3.0).resolve_sigma0(4.0) == 3.0

    def test_mapping_round_trip(self):
        cfg = SolverConfig(
            backend="krylov",
            theta=0.5,
            kappa_theta=1.0,
            sigma0=2.0,
            preconditioner=Preconditioner.diagonal_of(np.array([1.0, 2.0])),
        )
        again = SolverConfig.from_mapping(cfg.to_mapping())
        assert again == cfg

    def test_json_round_trip_with_rule(self):
        cfg = default_config("krylov")
        again = SolverConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            SolverConfig.from_mapping({"epsilon": 1e-6})


class TestScalarOps:
    def test_kappa_newton(self):
        cfg = default_config("exact")
        assert kappa_k(StepKind.NEWTON, 0.0, 1.0, cfg) == pytest.approx(1001.15)

    def test_kappa_negative_curvature(self):
        cfg = default_config("exact")  # theta = 1
        value = kappa_k(StepKind.NEGATIVE_CURVATURE, 2.0, 1.0, cfg)
        assert value == pytest.approx(1.5e6 * 0.05 + 1.0 + 2000.0)  # 77001

    def test_compute_rho(self):
        assert compute_rho(1.0, 0.9, -0.2) == pytest.approx(0.5)
        assert compute_rho(1.0, 1.05, -0.1) == pytest.approx(-0.5)

    def test_compute_rho_rejects_bad_model(self):
        with pytest.raises(ModelDecreaseError):
            compute_rho(1.0, 0.9, 0.0)

    def test_update_sigma_branches(self):
        cfg = default_config("exact")
        assert update_sigma(1.0, 0.99, False, cfg) == 0.5
        assert update_sigma(1.0, 0.5, False, cfg) == 1.0
        assert update_sigma(1.0, None, True, cfg) == 10.0
        assert update_sigma(1.0, 0.99, True, cfg) == 10.0  # any rejection inflates
        assert update_sigma(1e-8, 0.99, False, cfg) == 1e-8  # floored at sigma_min


def _scalar_problem(name, f, g, h, x0):
    return Problem(
        name=name,
        dimension=1,
        initial_point=np.array([float(x0)]),
        objective=lambda x: float(f(x[0])),
        gradient=lambda x: np.array([g(x[0])]),
        hessian=lambda x: np.array([[h(x[0])]]),
        hessian_vector=lambda x, v: np.array([h(x[0]) * v[0]]),
    )


class TestSolve:
    @pytest.mark.parametrize("backend", ["exact", "krylov"])
    def test_convex_quadratic_clean_run(self, backend):
        problem = quadratic(2, name="q2")
        problem = Problem(
            **{**problem.__dict__, "initial_point": np.array([1.0, 0.0])}
        )
        cfg = default_config(backend)
        res = solve(problem, cfg)
        assert res.status == SolveStatus.CONVERGED
        assert all(r.kind == StepKind.NEWTON for r in res.trace)
        assert all(r.accepted for r in res.trace)
        assert all(r.rho is not None for r in res.trace)  # screening never fired
        # the quadratic model is exact here, so the ratio is 1 to roundoff
        assert all(abs(r.rho - 1.0) < 1e-10 for r in res.trace)
        assert_trace_clean(res, cfg)

    def test_start_at_minimizer(self):
        problem = quadratic(3)
        problem = Problem(**{**problem.__dict__, "initial_point": np.zeros(3)})
        res = solve(problem, default_config("exact"))
        assert res.status == SolveStatus.CONVERGED
        assert res.trace == []
        assert res.gnorm == 0.0

    def test_saddle_adjacent_start_uses_negative_curvature(self):
        problem = double_well(2, x0=np.array([1.0, 5e-7]))
        cfg = default_config("exact")
        res = solve(problem, cfg)
        assert res.status == SolveStatus.CONVERGED
        kinds = {r.kind for r in res.trace}
        assert StepKind.NEGATIVE_CURVATURE in kinds
        assert res.trace[0].mu > cfg.kappa_C * math.sqrt(res.trace[0].sigma) * res.trace[0].gnorm
        assert_trace_clean(res, cfg)

    def test_screening_rejection_skips_acceptance_ratio(self):
        # Violent third derivative: the first regularized Newton step is tiny
        # yet leaves the gradient large, so the screening test fires and the
        # iteration is rejected before f is evaluated at the trial point.
        B, A = 1e6, 1e12
        problem = _scalar_problem(
            "stiff_cubic",
            f=lambda x: x + 0.5 * B * x * x + A * x**3,
            g=lambda x: 1.0 + B * x + 3.0 * A * x * x,
            h=lambda x: B + 6.0 * A * x,
            x0=0.0,
        )
        cfg = default_config("exact")
        cfg = SolverConfig(**{**cfg.to_mapping(), "max_iterations": 3,
                              "preconditioner": Preconditioner.identity()})
        res = solve(problem, cfg)
        first = res.trace[0]
        assert first.kind == StepKind.NEWTON
        assert first.rejected
        assert first.rho is None
        assert first.f_evals == 0  # steps 4-5 skipped
        assert res.trace[1].sigma == cfg.gamma2 * first.sigma

    def test_nonfinite_trial_objective_rejects_and_inflates(self):
        problem = _scalar_problem(
            "wall",
            f=lambda x: float("inf") if x > 0.9 else -x,
            g=lambda x: -1.0,
            h=lambda x: 0.0,
            x0=0.5,
        )
        cfg = SolverConfig(max_iterations=5)
        res = solve(problem, cfg)
        rejected = [r for r in res.trace if r.rejected and r.rho is None and r.f_evals > 0]
        assert rejected, "expected a rejection caused by a non-finite trial value"
        assert res.status == SolveStatus.ITERATION_LIMIT

    def test_nonfinite_initial_point_fails(self):
        problem = _scalar_problem("nanstart", f=lambda x: float("nan"),
                                  g=lambda x: 1.0, h=lambda x: 1.0, x0=0.0)
        res = solve(problem, default_config("exact"))
        assert res.status == SolveStatus.NUMERICAL_FAILURE
        assert res.trace == []

    def test_iteration_limit(self):
        cfg = SolverConfig(max_iterations=3)
        res = solve(get_problem("rosenbrock_2"), cfg)
        assert res.status == SolveStatus.ITERATION_LIMIT
        assert res.iterations == 3

    def test_time_limit(self):
        cfg = SolverConfig(time_limit_seconds=1e-9)
        res = solve(get_problem("rosenbrock_2"), cfg)
        assert res.status == SolveStatus.TIME_LIMIT

    def test_exact_backend_refuses_matrix_free_problem(self):
        problem = get_problem("quartic_5000")
        with pytest.raises(ConfigError, match="dense Hessian"):
            solve(problem, default_config("exact"))

    @pytest.mark.parametrize("name", ["rosenbrock_2", "quartic_8", "expcomp_12",
                                      "beale_2", "extpowell_4", "broyden_30"])
    @pytest.mark.parametrize("backend", ["exact", "krylov"])
    def test_trace_invariants_across_problems(self, name, backend):
        cfg = default_config(backend)
        res = solve(get_problem(name), cfg)
        assert res.status == SolveStatus.CONVERGED
        assert_trace_clean(res, cfg)

    def test_saddle_adjacent_start_krylov(self):
        problem = double_well(2, x0=np.array([1.0, 5e-7]))
        cfg = default_config("krylov")
        res = solve(problem, cfg)
        assert res.status == SolveStatus.CONVERGED
        assert StepKind.NEGATIVE_CURVATURE in {r.kind for r in res.trace}
        assert_trace_clean(res, cfg)

    @pytest.mark.parametrize("backend", ["exact", "krylov"])
    def test_counters_reconcile_with_trace(self, backend):
        res = solve(get_problem("rosenbrock_2"), default_config(backend))
        # Initialization evaluates f and g once; everything else is recorded
        # per iteration.
        assert res.f_evals == 1 + sum(r.f_evals for r in res.trace)
        assert res.g_evals == 1 + sum(r.g_evals for r in res.trace)
        assert res.hess_evals == sum(r.hess_evals for r in res.trace)
        assert res.hess_vec_evals == sum(r.hess_vec_evals for r in res.trace)

    def test_preconditioned_solve_converges(self):
        cfg = SolverConfig(
            backend="krylov",
            theta=0.5,
            kappa_theta=1.0,
            preconditioner=Preconditioner.diagonal_of(np.full(8, 2.0)),
        )
        res = solve(get_problem("quartic_8"), cfg)
        assert res.status == SolveStatus.CONVERGED
