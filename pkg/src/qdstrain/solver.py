"""Damped Gauss-Newton (Levenberg-Marquardt style) least-squares solver.

This is the shared solver behind line-shape fits, exciton-phonon model
fits, and the initialization of the dual-axis regression.  It is
deliberately small: analytic Jacobians only, multiplicative damping, and
optional box bounds enforced by projection.  Accepted steps never
increase the cost, so the cost history is monotone non-increasing by
construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

_COST_FLOOR = 1e-300
_DAMPING_CEILING = 1e15


@dataclass(frozen=True)
class SolverConfig:
    """Termination and damping policy for :func:`nlls_solve`.

    convergence_tolerance is the relative change in cost between accepted
    iterations below which the solve stops.  parameter_bounds, when given,
    is a sequence of (min, max) pairs with None for an unbounded side.
    """

    max_iterations: int = 200
    convergence_tolerance: float = 1e-12
    initial_damping: float = 1e-3
    parameter_bounds: tuple | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if self.convergence_tolerance <= 0:
            raise InvalidInputError("convergence_tolerance must be > 0")
        if self.initial_damping <= 0:
            raise InvalidInputError("initial_damping must be > 0")


@dataclass
class NllsResult:
    """Solution of a nonlinear least-squares problem.

    covariance is the Gauss-Newton estimate at the optimum scaled by the
    residual variance cost/(m - n); gn_covariance is the unscaled
    (J^T J)^-1, appropriate when residuals are already sigma-normalized.
    """

    params: np.ndarray
    covariance: np.ndarray
    cost: float
    gn_covariance: np.ndarray = None
    n_iterations: int = 0
    converged: bool = True
    flags: tuple = ()
    cost_history: np.ndarray = field(default=None, repr=False)
    condition_number: float = np.inf


def _expand_bounds(bounds, n):
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    if bounds is None:
        return lower, upper
    if len(bounds) != n:
        raise InvalidInputError(
            f"parameter_bounds has {len(bounds)} entries for {n} parameters"
        )
    for i, pair in enumerate(bounds):
        if pair is None:
            continue
        lo, hi = pair
        if lo is not None:
            lower[i] = lo
        if hi is not None:
            upper[i] = hi
        if lower[i] > upper[i]:
            raise InvalidInputError(f"bound {i} has min > max")
    return lower, upper


def scaled_condition_number(jacobian_matrix):
    """Condition number of J^T J after scaling columns to unit norm.

    Columns that are identically zero make the system singular and the
    returned value is inf.
    """
    a = np.atleast_2d(np.asarray(jacobian_matrix, dtype=float))
    norms = np.sqrt((a * a).sum(axis=0))
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        return np.inf
    scaled = a / norms
    return float(np.linalg.cond(scaled.T @ scaled))


def nlls_solve(residuals, jacobian, initial, config=None):
    """Minimize sum(residuals(p)**2) starting from `initial`.

    Parameters
    ----------
    residuals : callable
        Maps a parameter vector to the residual vector.  Data enters
        through the closure.
    jacobian : callable
        Maps a parameter vector to the (n_residuals, n_params) matrix of
        analytic partial derivatives of the residuals.
    initial : array-like
        Starting parameter vector; projected onto the bounds if any.
    config : SolverConfig, optional

    Returns
    -------
    NllsResult

    Raises
    ------
    InvalidInputError
        On NaN/inf in the model output or on inconsistent Jacobian shape.
    """
    cfg = config or SolverConfig()
    p = np.asarray(initial, dtype=float).copy()
    n = p.size
    lower, upper = _expand_bounds(cfg.parameter_bounds, n)
    p = np.clip(p, lower, upper)

    r = np.asarray(residuals(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("model produced non-finite residuals at the start")
    m = r.size
    cost = float(r @ r)
    history = [cost]
    lam = cfg.initial_damping
    flags = []
    converged = False
    it = 0

    while it < cfg.max_iterations and not converged:
        it += 1
        jac = np.asarray(jacobian(p), dtype=float)
        if jac.shape != (m, n):
            raise InvalidInputError(
                f"jacobian shape {jac.shape} inconsistent with {m} residuals"
                f" and {n} parameters"
            )
        if not np.all(np.isfinite(jac)):
            raise InvalidInputError("model produced non-finite Jacobian")
        grad = jac.T @ r
        normal = jac.T @ jac
        diag = np.maximum(np.diag(normal), 1e-12)

        accepted = False
        while lam <= _DAMPING_CEILING:
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                # Singular normal equations: regularize harder, never abort.
                lam *= 10.0
                continue
            p_try = np.clip(p + step, lower, upper)
            r_try = np.asarray(residuals(p_try), dtype=float)
            if not np.all(np.isfinite(r_try)):
                raise InvalidInputError("model produced non-finite residuals")
            cost_try = float(r_try @ r_try)
            if cost_try < cost:
                rel_drop = (cost - cost_try) / max(cost, _COST_FLOOR)
                p, r, cost = p_try, r_try, cost_try
                history.append(cost)
                lam = max(lam * 0.3, 1e-15)
                accepted = True
                if rel_drop < cfg.convergence_tolerance or cost < _COST_FLOOR:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            # No direction improves the cost at maximum damping: the
            # iterate is a (numerical) stationary point.
            converged = True

    if not converged:
        flags.append("max_iterations")

    jac = np.asarray(jacobian(p), dtype=float)
    normal = jac.T @ jac
    gn_cov = np.linalg.pinv(normal)
    dof = max(m - n, 1)
    covariance = gn_cov * (cost / dof)
    return NllsResult(
        params=p,
        covariance=covariance,
        cost=cost,
        gn_covariance=gn_cov,
        n_iterations=it,
        converged=converged,
        flags=tuple(flags),
        cost_history=np.asarray(history),
        condition_number=scaled_condition_number(jac),
    )


def check_jacobian(residuals, jacobian, params, step=None):
    """Compare an analytic Jacobian against central finite differences.

    Returns the maximum scaled deviation max|J_a - J_fd| / (|entry| + 1%
    of the largest entry).  Entries of significant magnitude are therefore
    compared relatively; near-zero entries are compared against the
    matrix scale, where finite differences are dominated by roundoff.
    """
    p = np.asarray(params, dtype=float)
    jac = np.asarray(jacobian(p), dtype=float)
    num = np.empty_like(jac)
    for j in range(p.size):
        h = step if step is not None else 6e-6 * max(abs(p[j]), 1.0)
        dp = np.zeros_like(p)
        dp[j] = h
        num[:, j] = (np.asarray(residuals(p + dp)) - np.asarray(residuals(p - dp))) / (2 * h)
    jmax = max(np.abs(jac).max(), np.abs(num).max(), 1e-300)
    denom = np.maximum(np.abs(jac), np.abs(num)) + 0.01 * jmax
    return float(np.max(np.abs(jac - num) / denom))
