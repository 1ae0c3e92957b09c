"""Benchmark harness: solver-by-problem matrices, performance profiles, CLI.

``bench run`` executes a solver matrix over one of the bundled suites and
writes per-run rows, performance-profile curves and an SVG step plot;
``bench profile`` recomputes profiles from a saved rows file.  Profiles
follow the usual convention: per problem, each solver's cost is divided by
the best cost among converged solvers, unconverged runs count as infinite,
and the curve reports the fraction of problems solved within a factor tau.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .core import ConfigError, SolveResult, SolverConfig, default_config, solve
from .problems import Problem, builtin_suite
from .second_order import SOConfig, default_so_config, solve_so
from .stepcomp_exact import StepKind

COST_METRICS = ("iterations", "evaluations", "time")

# Sampled-mean convention for the profile-area statistic: the mean of the
# curve at integer abscissae 1..10.
PI_DEFINITION = "mean of rho(tau) at integer tau in [1, 10]"

AnyConfig = Union[SolverConfig, SOConfig]


@dataclass(frozen=True)
class BenchRow:
    """One (solver, problem) result; field order defines the CSV layout."""

    solver: str
    problem: str
    dimension: int
    status: str
    iterations: int
    successful_iterations: int
    f_evals: int
    g_evals: int
    hess_evals: int
    hess_vec_evals: int
    wall_time: float
    final_gnorm: float
    negcurv_steps: int
    avg_krylov_dim: Optional[float]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def cost(self, metric: str) -> float:
        if metric == "iterations":
            return float(self.iterations)
        if metric == "evaluations":
            return float(
                self.f_evals + self.g_evals + self.hess_evals + self.hess_vec_evals
            )
        if metric == "time":
            return self.wall_time
        raise ValueError(f"unknown cost metric {metric!r}")


def _row_from_result(solver: str, problem: Problem, result: SolveResult) -> BenchRow:
    dims = [r.krylov_dim for r in result.trace if r.krylov_dim is not None]
    return BenchRow(
        solver=solver,
        problem=problem.name,
        dimension=problem.dimension,
        status=result.status.value,
        iterations=result.iterations,
        successful_iterations=result.successful_iterations,
        f_evals=result.f_evals,
        g_evals=result.g_evals,
        hess_evals=result.hess_evals,
        hess_vec_evals=result.hess_vec_evals,
        wall_time=result.wall_time,
        final_gnorm=result.gnorm,
        negcurv_steps=sum(
            1 for r in result.trace if r.kind == StepKind.NEGATIVE_CURVATURE
        ),
        avg_krylov_dim=float(np.mean(dims)) if dims else None,
    )


def run_matrix(
    problems: Sequence[Problem],
    solvers: Mapping[str, AnyConfig],
    budget: Optional[Mapping[str, float]] = None,
    verbose: bool = False,
) -> list[BenchRow]:
    """Run every solver on every problem, one row per pair.

    ``budget`` may override ``max_iterations`` / ``time_limit_seconds`` on
    all configs.  Failures of any kind are recorded in the row's status and
    never abort the matrix.
    """
    if not problems or not solvers:
        raise ValueError("run_matrix needs at least one problem and one solver")
    rows = []
    for name, config in solvers.items():
        config = _apply_budget(config, budget)
        for problem in problems:
            t0 = time.monotonic()
            try:
                if isinstance(config, SOConfig):
                    result = solve_so(problem, config)
                else:
                    result = solve(problem, config)
                row = _row_from_result(name, problem, result)
            except Exception as exc:  # noqa: BLE001 - keep the matrix running
                row = BenchRow(
                    solver=name,
                    problem=problem.name,
                    dimension=problem.dimension,
                    status="numerical-failure",
                    iterations=0,
                    successful_iterations=0,
                    f_evals=0,
                    g_evals=0,
                    hess_evals=0,
                    hess_vec_evals=0,
                    wall_time=time.monotonic() - t0,
                    final_gnorm=float("nan"),
                    negcurv_steps=0,
                    avg_krylov_dim=None,
                )
                if verbose:
                    print(f"  {name} / {problem.name}: error: {exc}", file=sys.stderr)
            rows.append(row)
            if verbose:
                print(
                    f"  {name} / {problem.name}: {row.status} "
                    f"({row.iterations} its, {row.wall_time:.2f}s)"
                )
    return rows


def _apply_budget(config: AnyConfig, budget: Optional[Mapping[str, float]]) -> AnyConfig:
    if not budget:
        return config
    allowed = {"max_iterations", "time_limit_seconds"}
    unknown = set(budget) - allowed
    if unknown:
        raise ValueError(f"budget accepts {sorted(allowed)}, got {sorted(unknown)}")
    kwargs = {k: v for k, v in budget.items()}
    if "max_iterations" in kwargs:
        kwargs["max_iterations"] = int(kwargs["max_iterations"])
    if isinstance(config, SOConfig):
        return replace(config, solver=replace(config.solver, **kwargs))
    return replace(config, **kwargs)


@dataclass(frozen=True)
class ProfileCurve:
    """Step curve of the fraction of problems solved within ratio tau."""

    solver: str
    taus: np.ndarray
    values: np.ndarray

    def value_at(self, tau: float) -> float:
        idx = int(np.searchsorted(self.taus, tau, side="right")) - 1
        if idx < 0:
            return 0.0
        return float(self.values[idx])


def performance_profile(
    rows: Sequence[BenchRow], cost_metric: str = "iterations"
) -> list[ProfileCurve]:
    """Dolan-More profiles over all (solver, problem) rows.

    Ratios are cost over the best converged cost per problem; rows that did
    not converge get an infinite ratio.  Problems no solver converged on
    still count in the denominator.
    """
    if not rows:
        raise ValueError("performance_profile needs at least one row")
    if cost_metric not in COST_METRICS:
        raise ValueError(f"cost metric must be one of {COST_METRICS}")
    solvers = list(dict.fromkeys(r.solver for r in rows))
    problems = list(dict.fromkeys(r.problem for r in rows))

    cost = {}
    for r in rows:
        cost[(r.solver, r.problem)] = r.cost(cost_metric) if r.converged else np.inf

    ratios: dict[str, list[float]] = {s: [] for s in solvers}
    for p in problems:
        per_solver = [cost.get((s, p), np.inf) for s in solvers]
        best = min(per_solver)
        for s, c in zip(solvers, per_solver):
            if not np.isfinite(c):
                ratios[s].append(np.inf)
            elif c == best:
                ratios[s].append(1.0)
            elif best == 0.0:
                ratios[s].append(np.inf)
            else:
                ratios[s].append(c / best)

    finite_all = [r for rs in ratios.values() for r in rs if np.isfinite(r)]
    tau_max = max(10.0, max(finite_all) if finite_all else 1.0)
    curves = []
    n_problems = len(problems)
    for s in solvers:
        rr = np.asarray(ratios[s])
        finite = np.sort(rr[np.isfinite(rr)])
        taus = np.unique(np.concatenate([[1.0], finite, [tau_max]]))
        values = np.array([np.count_nonzero(rr <= t) / n_problems for t in taus])
        curves.append(ProfileCurve(solver=s, taus=taus, values=values))
    return curves


def efficiency_metrics(
    curve: ProfileCurve, rows: Sequence[BenchRow]
) -> tuple[float, float]:
    """Profile-area statistic over [1, 10] and reliability in percent."""
    pi = float(np.mean([curve.value_at(float(t)) for t in range(1, 11)]))
    mine = [r for r in rows if r.solver == curve.solver]
    if not mine:
        raise ValueError(f"no rows for solver {curve.solver!r}")
    reliability = 100.0 * sum(r.converged for r in mine) / len(mine)
    return pi, reliability


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_ROW_FIELDS = [f.name for f in fields(BenchRow)]


def emit_outputs(
    rows: Sequence[BenchRow],
    curves: Sequence[ProfileCurve],
    out_dir: Union[str, Path],
    cost_metric: str = "iterations",
) -> dict[str, Path]:
    """Write rows.csv, profiles.csv, profile.svg and metrics.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "rows": out / "rows.csv",
        "profiles": out / "profiles.csv",
        "plot": out / "profile.svg",
        "metrics": out / "metrics.json",
    }

    with paths["rows"].open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ROW_FIELDS)
        for r in rows:
            writer.writerow([_csv_cell(getattr(r, name)) for name in _ROW_FIELDS])

    with paths["profiles"].open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "tau", "rho"])
        for c in curves:
            for t, v in zip(c.taus, c.values):
                writer.writerow([c.solver, _csv_cell(float(t)), _csv_cell(float(v))])

    metrics = {
        "cost_metric": cost_metric,
        "pi_definition": PI_DEFINITION,
        "solvers": {},
    }
    for c in curves:
        pi, rel = efficiency_metrics(c, rows)
        metrics["solvers"][c.solver] = {"pi": pi, "reliability_percent": rel}
    paths["metrics"].write_text(json.dumps(metrics, indent=2))

    _plot_profiles(curves, paths["plot"], cost_metric)
    return paths


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_rows(path: Union[str, Path]) -> list[BenchRow]:
    """Read rows.csv back into BenchRow objects (inverse of emit_outputs)."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _ROW_FIELDS:
            raise ValueError(f"unexpected rows header {header}")
        for values in reader:
            data = dict(zip(_ROW_FIELDS, values))
            rows.append(
                BenchRow(
                    solver=data["solver"],
                    problem=data["problem"],
                    dimension=int(data["dimension"]),
                    status=data["status"],
                    iterations=int(data["iterations"]),
                    successful_iterations=int(data["successful_iterations"]),
                    f_evals=int(data["f_evals"]),
                    g_evals=int(data["g_evals"]),
                    hess_evals=int(data["hess_evals"]),
                    hess_vec_evals=int(data["hess_vec_evals"]),
                    wall_time=float(data["wall_time"]),
                    final_gnorm=float(data["final_gnorm"]),
                    negcurv_steps=int(data["negcurv_steps"]),
                    avg_krylov_dim=(
                        float(data["avg_krylov_dim"]) if data["avg_krylov_dim"] else None
                    ),
                )
            )
    return rows


def _plot_profiles(curves: Sequence[ProfileCurve], path: Path, cost_metric: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for c in curves:
        finite = np.isfinite(c.taus)
        ax.step(c.taus[finite], c.values[finite], where="post", label=c.solver)
    ax.set_xscale("log", base=2)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel(f"performance ratio tau ({cost_metric})")
    ax.set_ylabel("fraction of problems")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

KNOWN_SOLVERS = ("an2cls-e", "an2cls-k", "soan2cls")


def _solver_config(name: str, eps: float, eps2: float) -> AnyConfig:
    if name == "an2cls-e":
        return replace(default_config("exact"), eps=eps)
    if name == "an2cls-k":
        return replace(default_config("krylov"), eps=eps)
    if name == "soan2cls":
        base = default_so_config()
        return SOConfig(solver=replace(base.solver, eps=eps), eps2=eps2)
    raise ConfigError(f"unknown solver {name!r}; known: {', '.join(KNOWN_SOLVERS)}")


def _load_overrides(path: str) -> dict:
    """Parse a config-override file: JSON object or key=value lines."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        return data
    except json.JSONDecodeError:
        pass
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} is not key=value: {line!r}")
        key, _, value = line.partition("=")
        data[key.strip()] = _coerce(value.strip())
    return data


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(config: AnyConfig, overrides: Mapping) -> AnyConfig:
    if not overrides:
        return config
    merged = config.to_mapping()
    merged.update(overrides)
    if isinstance(config, SOConfig):
        return SOConfig.from_mapping(merged)
    return SolverConfig.from_mapping(merged)


def _cmd_run(args) -> int:
    names = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if not names:
        raise ConfigError("--solvers is empty")
    overrides = _load_overrides(args.config) if args.config else {}
    budget = {"max_iterations": args.max_iter, "time_limit_seconds": args.time_limit}
    solvers: dict[str, AnyConfig] = {}
    for name in names:
        config = _solver_config(name, args.eps, args.eps2)
        config = _apply_budget(config, budget)
        config = _apply_overrides(config, overrides)  # file wins over flags
        solvers[name] = config
    problems = builtin_suite(args.suite)
    print(f"running {len(names)} solver(s) x {len(problems)} problem(s) [{args.suite}]")
    rows = run_matrix(problems, solvers, verbose=True)
    curves = performance_profile(rows, args.cost)
    paths = emit_outputs(rows, curves, args.out, cost_metric=args.cost)
    print(f"\n{'solver':<12} {'pi':>8} {'reliability %':>14}")
    for c in curves:
        pi, rel = efficiency_metrics(c, rows)
        print(f"{c.solver:<12} {pi:>8.3f} {rel:>14.2f}")
    print(f"\nwrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_profile(args) -> int:
    rows = parse_rows(args.rows)
    curves = performance_profile(rows, args.cost)
    paths = emit_outputs(rows, curves, args.out, cost_metric=args.cost)
    for c in curves:
        pi, rel = efficiency_metrics(c, rows)
        print(f"{c.solver:<12} pi={pi:.3f} reliability={rel:.2f}%")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Benchmark the adaptive Newton / negative-curvature solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a solver x problem matrix")
    run_p.add_argument("--suite", choices=["small", "medium", "large"], required=True)
    run_p.add_argument(
        "--solvers",
        default="an2cls-e,an2cls-k",
        help=f"comma-separated subset of: {', '.join(KNOWN_SOLVERS)}",
    )
    run_p.add_argument("--eps", type=float, default=1e-6, help="gradient tolerance")
    run_p.add_argument(
        "--eps2", type=float, default=1e-3, help="curvature tolerance (soan2cls)"
    )
    run_p.add_argument("--max-iter", type=int, default=5000)
    run_p.add_argument("--time-limit", type=float, default=3600.0, help="seconds per run")
    run_p.add_argument("--cost", choices=list(COST_METRICS), default="iterations")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--config", default=None, help="JSON or key=value override file")
    run_p.set_defaults(func=_cmd_run)

    prof_p = sub.add_parser("profile", help="recompute profiles from saved rows")
    prof_p.add_argument("--rows", required=True, help="path to rows.csv")
    prof_p.add_argument("--out", required=True, help="output directory")
    prof_p.add_argument("--cost", choices=list(COST_METRICS), default="iterations")
    prof_p.set_defaults(func=_cmd_profile)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
