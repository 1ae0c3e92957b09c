"""Analytic unconstrained test problems with closed-form derivatives.

Each problem bundles an objective, its gradient, a dense symmetric Hessian
(materialized only below a size cap) and a Hessian-vector product that shares
the analytic code path with the dense Hessian.  The bundled families include
functions whose Hessians are not globally Lipschitz (quartics, exponentials),
a convex quadratic baseline, and a double-well problem whose default start
point is a strict saddle.  Finite-difference verification of all derivatives
is provided by :func:`check_derivatives`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Above this dimension no dense Hessian is materialized; only the
# Hessian-vector product is available and factorization-based solvers
# must refuse the problem.
DENSE_HESSIAN_CAP = 1000


class EvaluationError(RuntimeError):
    """An evaluator returned a non-finite value."""

    def __init__(self, message: str, x: np.ndarray):
        super().__init__(message)
        self.x = np.array(x, dtype=float)


@dataclass(frozen=True)
class ProblemMetadata:
    """Optional analysis-only constants consumed by test oracles.

    ``f_low`` is a valid global lower bound on the objective (not necessarily
    the infimum).  ``L0``, ``L1`` and ``delta`` describe the local Hessian
    smoothness model ``|H(y)-H(x)| <= (L0 + L1|g(x)|)|y-x|`` for
    ``|y-x| <= delta``; ``kappa_B`` bounds the negative curvature on the
    initial sublevel set.  All fields may be absent.
    """

    f_low: Optional[float] = None
    L0: Optional[float] = None
    L1: Optional[float] = None
    delta: Optional[float] = None
    kappa_B: Optional[float] = None


@dataclass(frozen=True)
class Problem:
    """A smooth unconstrained minimization problem.

    Evaluators are pure functions of the point and may be shared freely
    across concurrent solver runs.  ``hessian`` is ``None`` for dimensions
    above the dense cap, in which case only ``hessian_vector`` is available.
    """

    name: str
    dimension: int
    initial_point: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]]
    hessian_vector: Callable[[np.ndarray, np.ndarray], np.ndarray]
    metadata: ProblemMetadata = ProblemMetadata()

    def __post_init__(self):
        x0 = np.asarray(self.initial_point, dtype=float)
        if x0.shape != (self.dimension,):
            raise ValueError(
                f"initial point of {self.name!r} has shape {x0.shape}, "
                f"expected ({self.dimension},)"
            )
        object.__setattr__(self, "initial_point", x0)


def eval_all(problem: Problem, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Evaluate objective, gradient and dense Hessian at ``x``.

    Raises :class:`EvaluationError` when any value is non-finite, and
    ``ValueError`` when the problem does not materialize dense Hessians.
    """
    x = _check_point(problem, x)
    f = float(problem.objective(x))
    g = np.asarray(problem.gradient(x), dtype=float)
    if problem.hessian is None:
        raise ValueError(
            f"problem {problem.name!r} (n={problem.dimension}) does not "
            "materialize a dense Hessian"
        )
    H = np.asarray(problem.hessian(x), dtype=float)
    if not np.isfinite(f):
        raise EvaluationError(f"objective of {problem.name!r} is non-finite", x)
    if not np.all(np.isfinite(g)):
        raise EvaluationError(f"gradient of {problem.name!r} is non-finite", x)
    if not np.all(np.isfinite(H)):
        raise EvaluationError(f"Hessian of {problem.name!r} is non-finite", x)
    return f, g, H


def hess_vec(problem: Problem, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the Hessian at ``x`` to ``v`` without forming the matrix."""
    x = _check_point(problem, x)
    v = np.asarray(v, dtype=float)
    if v.shape != (problem.dimension,):
        raise ValueError(f"vector has shape {v.shape}, expected ({problem.dimension},)")
    out = np.asarray(problem.hessian_vector(x, v), dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(
            f"Hessian-vector product of {problem.name!r} is non-finite", x
        )
    return out


def _check_point(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise ValueError(f"point has shape {x.shape}, expected ({problem.dimension},)")
    if not np.all(np.isfinite(x)):
        raise EvaluationError(f"point passed to {problem.name!r} is non-finite", x)
    return x


@dataclass(frozen=True)
class DerivativeCheck:
    """Result of a finite-difference derivative verification."""

    gradient_error: float
    hessian_error: float
    gradient_ok: bool
    hessian_ok: bool
    h: float
    components: tuple[int, ...]
    seed: Optional[int] = None


def check_derivatives(
    problem: Problem,
    x: np.ndarray,
    h: float,
    max_components: Optional[int] = None,
    seed: int = 0,
) -> DerivativeCheck:
    """Compare analytic derivatives against central finite differences.

    The gradient is checked against central differences of the objective and
    the Hessian columns against central differences of the gradient; both
    errors are reported relative to ``max(1, scale)`` of the analytic
    quantity.  Pass/fail flags use tolerances ``10*h`` for the gradient and
    ``100*h`` for the Hessian.  For large problems a seeded random subset of
    ``max_components`` coordinates is probed; the probed coordinates and the
    seed are recorded in the report.
    """
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    x = _check_point(problem, x)
    n = problem.dimension
    if max_components is None or max_components >= n:
        idx = np.arange(n)
        used_seed = None
    else:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, size=max_components, replace=False))
        used_seed = seed

    g = np.asarray(problem.gradient(x), dtype=float)
    g_scale = max(1.0, float(np.max(np.abs(g))))
    H = np.asarray(problem.hessian(x), dtype=float) if problem.hessian else None
    grad_err = 0.0
    hess_err = 0.0
    hess_scale = 1.0
    for j in idx:
        e = np.zeros(n)
        e[j] = h
        fd_g = (problem.objective(x + e) - problem.objective(x - e)) / (2 * h)
        grad_err = max(grad_err, abs(g[j] - fd_g) / g_scale)

        if H is not None:
            col = H[:, j]
        else:
            unit = np.zeros(n)
            unit[j] = 1.0
            col = np.asarray(problem.hessian_vector(x, unit), dtype=float)
        fd_col = (
            np.asarray(problem.gradient(x + e), dtype=float)
            - np.asarray(problem.gradient(x - e), dtype=float)
        ) / (2 * h)
        hess_scale = max(hess_scale, float(np.max(np.abs(col))))
        hess_err = max(hess_err, float(np.max(np.abs(col - fd_col))))
    hess_err /= hess_scale

    return DerivativeCheck(
        gradient_error=float(grad_err),
        hessian_error=float(hess_err),
        gradient_ok=bool(grad_err <= 10 * h),
        hessian_ok=bool(hess_err <= 100 * h),
        h=h,
        components=tuple(int(j) for j in idx),
        seed=used_seed,
    )


# ---------------------------------------------------------------------------
# Problem families
# ---------------------------------------------------------------------------


def _maybe_dense(n: int, dense_cap: int, builder):
    return builder if n <= dense_cap else None


def _tridiag_dense(d: np.ndarray, o: np.ndarray) -> np.ndarray:
    H = np.diag(d)
    if o.size:
        H += np.diag(o, 1) + np.diag(o, -1)
    return H


def _tridiag_apply(d: np.ndarray, o: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = d * v
    if o.size:
        out[:-1] += o * v[1:]
        out[1:] += o * v[:-1]
    return out


def quadratic(
    n: int,
    condition: float = 1.0,
    name: Optional[str] = None,
    dense_cap: int = DENSE_HESSIAN_CAP,
) -> Problem:
    """Convex diagonal quadratic 0.5 * sum(c_i x_i^2) with spread ``condition``."""
    if condition < 1.0:
        raise ValueError("condition must be >= 1")
    c = np.logspace(0.0, np.log10(condition), n) if n > 1 else np.ones(1)
    c = c.copy()

    def f(x):
        return 0.5 * float(c @ (x * x))

    def grad(x):
        return c * x

    def hess(x):
        return np.diag(c)

    def hv(x, v):
        return c * v

    return Problem(
        name=name or f"quadratic_{n}",
        dimension=n,
        initial_point=np.ones(n),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0, L0=0.0, L1=0.0, kappa_B=0.0),
    )


def trid(n: int, dense_cap: int = DENSE_HESSIAN_CAP) -> Problem:
    """Convex coupled quadratic sum((x_i-1)^2) - sum(x_i x_{i-1})."""
    if n < 2:
        raise ValueError("trid needs n >= 2")

    def f(x):
        return float(np.sum((x - 1.0) ** 2) - np.sum(x[1:] * x[:-1]))

    def grad(x):
        g = 2.0 * (x - 1.0)
        g[:-1] -= x[1:]
        g[1:] -= x[:-1]
        return g

    def hess(x):
        return _tridiag_dense(np.full(n, 2.0), np.full(n - 1, -1.0))

    def hv(x, v):
        return _tridiag_apply(np.full(n, 2.0), np.full(n - 1, -1.0), v)

    f_low = -n * (n + 4) * (n - 1) / 6.0
    return Problem(
        name=f"trid_{n}",
        dimension=n,
        initial_point=np.zeros(n),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=f_low, L0=0.0, L1=0.0, kappa_B=0.0),
    )


def rosenbrock(
    n: int,
    x0: Optional[np.ndarray] = None,
    dense_cap: int = DENSE_HESSIAN_CAP,
) -> Problem:
    """Chained Rosenbrock, classic start (-1.2, 1, -1.2, 1, ...)."""
    if n < 2:
        raise ValueError("rosenbrock needs n >= 2")
    if x0 is None:
        x0 = np.tile([-1.2, 1.0], (n + 1) // 2)[:n]

    def f(x):
        t = x[1:] - x[:-1] ** 2
        return float(100.0 * np.sum(t * t) + np.sum((1.0 - x[:-1]) ** 2))

    def grad(x):
        t = x[1:] - x[:-1] ** 2
        g = np.zeros(n)
        g[:-1] = -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * t
        return g

    def _bands(x):
        d = np.zeros(n)
        d[:-1] = 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
        d[1:] += 200.0
        o = -400.0 * x[:-1]
        return d, o

    def hess(x):
        return _tridiag_dense(*_bands(x))

    def hv(x, v):
        return _tridiag_apply(*_bands(x), v)

    return Problem(
        name=f"rosenbrock_{n}",
        dimension=n,
        initial_point=np.asarray(x0, dtype=float),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0),
    )


def separable_quartic(
    n: int,
    x0: Optional[np.ndarray] = None,
    dense_cap: int = DENSE_HESSIAN_CAP,
) -> Problem:
    """Separable double well sum(x_i^4 - x_i^2); Hessian not globally Lipschitz."""
    if x0 is None:
        x0 = np.linspace(1.2, 2.0, n)

    def f(x):
        x2 = x * x
        return float(np.sum(x2 * x2 - x2))

    def grad(x):
        return 4.0 * x**3 - 2.0 * x

    def hess(x):
        return np.diag(12.0 * x * x - 2.0)

    def hv(x, v):
        return (12.0 * x * x - 2.0) * v

    return Problem(
        name=f"quartic_{n}",
        dimension=n,
        initial_point=np.asarray(x0, dtype=float),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=-n / 4.0),
    )


def exp_composite(
    n: int,
    x0: Optional[np.ndarray] = None,
    dense_cap: int = DENSE_HESSIAN_CAP,
) -> Problem:
    """Univariate-exponential composite sum(exp(x_i) - x_i), minimum n at 0."""
    if x0 is None:
        x0 = np.linspace(0.5, 2.0, n)

    def f(x):
        return float(np.sum(np.exp(x) - x))

    def grad(x):
        return np.exp(x) - 1.0

    def hess(x):
        return np.diag(np.exp(x))

    def hv(x, v):
        return np.exp(x) * v

    return Problem(
        name=f"expcomp_{n}",
        dimension=n,
        initial_point=np.asarray(x0, dtype=float),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=float(n)),
    )


def double_well(
    n: int,
    x0: Optional[np.ndarray] = None,
    dense_cap: int = DENSE_HESSIAN_CAP,
) -> Problem:
    """Separable sum((x_i^2-1)^2); the default start (1,0,1,0,...) is a strict
    saddle: zero gradient with indefinite Hessian diag(8,-4,...)."""
    if n < 2:
        raise ValueError("double_well needs n >= 2")
    if x0 is None:
        x0 = np.tile([1.0, 0.0], (n + 1) // 2)[:n]

    def f(x):
        w = x * x - 1.0
        return float(np.sum(w * w))

    def grad(x):
        return 4.0 * x * (x * x - 1.0)

    def hess(x):
        return np.diag(12.0 * x * x - 4.0)

    def hv(x, v):
        return (12.0 * x * x - 4.0) * v

    return Problem(
        name=f"doublewell_{n}",
        dimension=n,
        initial_point=np.asarray(x0, dtype=float),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0),
    )


def extended_powell(n: int, dense_cap: int = DENSE_HESSIAN_CAP) -> Problem:
    """Extended Powell singular function, n divisible by 4."""
    if n % 4 != 0 or n < 4:
        raise ValueError("extended_powell needs n divisible by 4")
    m = n // 4

    def _parts(x):
        b = x.reshape(m, 4)
        return b[:, 0], b[:, 1], b[:, 2], b[:, 3]

    def f(x):
        a, b, c, d = _parts(x)
        return float(
            np.sum((a + 10.0 * b) ** 2)
            + 5.0 * np.sum((c - d) ** 2)
            + np.sum((b - 2.0 * c) ** 4)
            + 10.0 * np.sum((a - d) ** 4)
        )

    def grad(x):
        a, b, c, d = _parts(x)
        g = np.empty((m, 4))
        g[:, 0] = 2.0 * (a + 10.0 * b) + 40.0 * (a - d) ** 3
        g[:, 1] = 20.0 * (a + 10.0 * b) + 4.0 * (b - 2.0 * c) ** 3
        g[:, 2] = 10.0 * (c - d) - 8.0 * (b - 2.0 * c) ** 3
        g[:, 3] = -10.0 * (c - d) - 40.0 * (a - d) ** 3
        return g.reshape(n)

    def _block(x):
        a, b, c, d = _parts(x)
        p2 = 120.0 * (a - d) ** 2
        q2 = 12.0 * (b - 2.0 * c) ** 2
        blk = np.zeros((m, 4, 4))
        blk[:, 0, 0] = 2.0 + p2
        blk[:, 0, 1] = blk[:, 1, 0] = 20.0
        blk[:, 0, 3] = blk[:, 3, 0] = -p2
        blk[:, 1, 1] = 200.0 + q2
        blk[:, 1, 2] = blk[:, 2, 1] = -2.0 * q2
        blk[:, 2, 2] = 10.0 + 4.0 * q2
        blk[:, 2, 3] = blk[:, 3, 2] = -10.0
        blk[:, 3, 3] = 10.0 + p2
        return blk

    def hess(x):
        H = np.zeros((n, n))
        blk = _block(x)
        for j in range(m):
            H[4 * j : 4 * j + 4, 4 * j : 4 * j + 4] = blk[j]
        return H

    def hv(x, v):
        blk = _block(x)
        return np.einsum("mij,mj->mi", blk, v.reshape(m, 4)).reshape(n)

    return Problem(
        name=f"extpowell_{n}",
        dimension=n,
        initial_point=np.tile([3.0, -1.0, 0.0, 1.0], m),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0),
    )


def beale(dense_cap: int = DENSE_HESSIAN_CAP) -> Problem:
    """Beale function in two variables."""
    coeff = (1.5, 2.25, 2.625)

    def f(x):
        u, w = x
        return float(sum((c - u * (1.0 - w**j)) ** 2 for j, c in enumerate(coeff, 1)))

    def grad(x):
        u, w = x
        g = np.zeros(2)
        for j, c in enumerate(coeff, 1):
            r = c - u * (1.0 - w**j)
            g[0] += 2.0 * r * -(1.0 - w**j)
            g[1] += 2.0 * r * (u * j * w ** (j - 1))
        return g

    def hess(x):
        u, w = x
        H = np.zeros((2, 2))
        for j, c in enumerate(coeff, 1):
            r = c - u * (1.0 - w**j)
            ru = -(1.0 - w**j)
            rw = u * j * w ** (j - 1)
            ruw = j * w ** (j - 1)
            rww = u * j * (j - 1) * (w ** (j - 2) if j >= 2 else 0.0)
            H[0, 0] += 2.0 * ru * ru
            H[0, 1] += 2.0 * (ru * rw + r * ruw)
            H[1, 1] += 2.0 * (rw * rw + r * rww)
        H[1, 0] = H[0, 1]
        return H

    def hv(x, v):
        return hess(x) @ v

    return Problem(
        name="beale_2",
        dimension=2,
        initial_point=np.array([1.0, 1.0]),
        objective=f,
        gradient=grad,
        hessian=hess,
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0),
    )


def dixon_price(n: int, dense_cap: int = DENSE_HESSIAN_CAP) -> Problem:
    """Dixon-Price function (x_1-1)^2 + sum_i i (2 x_i^2 - x_{i-1})^2."""
    if n < 2:
        raise ValueError("dixon_price needs n >= 2")
    iw = np.arange(2.0, n + 1)  # weights for terms i = 2..n

    def _w(x):
        return 2.0 * x[1:] ** 2 - x[:-1]

    def f(x):
        return float((x[0] - 1.0) ** 2 + np.sum(iw * _w(x) ** 2))

    def grad(x):
        w = _w(x)
        g = np.zeros(n)
        g[0] = 2.0 * (x[0] - 1.0)
        g[1:] += 8.0 * iw * x[1:] * w
        g[:-1] += -2.0 * iw * w
        return g

    def _bands(x):
        w = _w(x)
        d = np.zeros(n)
        d[0] = 2.0
        d[1:] += 8.0 * iw * w + 32.0 * iw * x[1:] ** 2
        d[:-1] += 2.0 * iw
        o = -8.0 * iw * x[1:]
        return d, o

    def hess(x):
        return _tridiag_dense(*_bands(x))

    def hv(x, v):
        return _tridiag_apply(*_bands(x), v)

    return Problem(
        name=f"dixonprice_{n}",
        dimension=n,
        initial_point=np.full(n, -2.0),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0),
    )


def broyden_tridiagonal(n: int, dense_cap: int = DENSE_HESSIAN_CAP) -> Problem:
    """Sum of squares of the Broyden tridiagonal equations."""
    if n < 2:
        raise ValueError("broyden_tridiagonal needs n >= 2")

    def _res(x):
        r = (3.0 - 2.0 * x) * x + 1.0
        r[1:] -= x[:-1]
        r[:-1] -= 2.0 * x[1:]
        return r

    def _jac_apply(x, v):
        out = (3.0 - 4.0 * x) * v
        out[1:] -= v[:-1]
        out[:-1] -= 2.0 * v[1:]
        return out

    def _jac_t_apply(x, w):
        out = (3.0 - 4.0 * x) * w
        out[:-1] -= w[1:]
        out[1:] -= 2.0 * w[:-1]
        return out

    def f(x):
        r = _res(x)
        return float(r @ r)

    def grad(x):
        return 2.0 * _jac_t_apply(x, _res(x))

    def hess(x):
        J = _tridiag_dense(3.0 - 4.0 * x, np.zeros(n - 1))
        J += np.diag(np.full(n - 1, -1.0), -1) + np.diag(np.full(n - 1, -2.0), 1)
        return 2.0 * J.T @ J - 8.0 * np.diag(_res(x))

    def hv(x, v):
        return 2.0 * _jac_t_apply(x, _jac_apply(x, v)) - 8.0 * _res(x) * v

    return Problem(
        name=f"broyden_{n}",
        dimension=n,
        initial_point=np.full(n, -1.0),
        objective=f,
        gradient=grad,
        hessian=_maybe_dense(n, dense_cap, hess),
        hessian_vector=hv,
        metadata=ProblemMetadata(f_low=0.0),
    )


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

SUITE_SCALES = ("small", "medium", "large")


def builtin_suite(scale: str) -> list[Problem]:
    """Return the bundled problem set for one of the three size brackets.

    ``small`` covers dimensions 2..49, ``medium`` 50..997 and ``large``
    1000..5000.  Problems above the dense cap expose Hessian-vector products
    only.
    """
    if scale == "small":
        return [
            rosenbrock(2),
            rosenbrock(10),
            quadratic(5),
            quadratic(20, condition=1e4, name="illquad_20"),
            trid(10),
            separable_quartic(8),
            exp_composite(12),
            double_well(2),
            extended_powell(4),
            extended_powell(48),
            beale(),
            dixon_price(25),
            broyden_tridiagonal(30),
        ]
    if scale == "medium":
        return [
            rosenbrock(100),
            separable_quartic(100),
            exp_composite(50),
            trid(200),
            double_well(60),
            quadratic(500, condition=1e4, name="illquad_500"),
            broyden_tridiagonal(300),
        ]
    if scale == "large":
        return [
            separable_quartic(5000),
            rosenbrock(1000),
            exp_composite(2000),
        ]
    raise ValueError(f"unknown suite scale {scale!r}; expected one of {SUITE_SCALES}")


def get_problem(name: str) -> Problem:
    """Look up a bundled problem by its name string."""
    for scale in SUITE_SCALES:
        for problem in builtin_suite(scale):
            if problem.name == name:
                return problem
    raise KeyError(f"no bundled problem named {name!r}")
