"""Regression quantiles by a primal-dual (Frisch-Newton) interior-point method.

The check-loss problem min_b sum rho_alpha(y_i - x_i'b) is solved through its
bounded dual

    max  y'a   s.t.  X'a = (1 - alpha) X'1,  0 <= a <= 1,

written as min c'x, Ax = b, 0 <= x <= u with A = X', c = -y, u = 1. The
coefficients are minus the dual multipliers of the equality constraints.
Each iteration takes a Mehrotra predictor-corrector step; the Newton system
reduces to a d x d normal-equation solve.
"""

import itertools
import logging
import math

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import ArrayLike

from . import config
from .errors import ConvergenceFailure, DomainError, QRWaldError
from .numerics import as_vector
from .schemas import Dataset, QuantileFit, QuantileProcess

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 30


def check_loss(u: ArrayLike, alpha: float):
    """rho_alpha(u) = u * (alpha - 1{u <= 0})."""
    arr = np.asarray(u, dtype=float)
    out = arr * (alpha - (arr <= 0.0))
    return float(out) if arr.ndim == 0 else out


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise DomainError(f"quantile level must lie in (0, 1), got {alpha}")


def zero_tolerance(y: np.ndarray) -> float:
    """Residuals within this distance of zero count as exact fits."""
    return 1e-9 * (1.0 + float(np.max(np.abs(y))))


def _objective(data: Dataset, beta: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    residuals = data.y - data.X @ beta
    return residuals, float(np.sum(check_loss(residuals, alpha)))


def _step_length(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    return min(1.0, config.SOLVER_STEP * float(np.min(-v[neg] / dv[neg])))


def _solve_normal(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, rhs, rcond=None)[0]


def _interior_point(
    X: np.ndarray, y: np.ndarray, alpha: float, max_iter: int, tol: float
) -> tuple[np.ndarray, int, bool]:
    n = X.shape[0]
    c = -y
    # X'x = (1 - alpha) X'1 holds at the start and every step keeps it.
    x = np.full(n, 1.0 - alpha)
    s = 1.0 - x

    dual = np.linalg.lstsq(X, c, rcond=None)[0]
    r = c - X @ dual
    # z - w = r keeps the start dual feasible; the shift keeps both interior
    shift = 1e-3 * (1.0 + float(np.mean(np.abs(r))))
    z = np.maximum(r, 0.0) + shift
    w = np.maximum(-r, 0.0) + shift

    for it in range(max_iter + 1):
        gap = float(z @ x + w @ s)
        if gap <= tol * (1.0 + abs(float(c @ x))):
            return -dual, it, True
        if it == max_iter:
            break

        # Affine (predictor) direction
        q = 1.0 / (z / x + w / s)
        r = z - w
        XQ = X.T * q
        M = XQ @ X
        dy = _solve_normal(M, XQ @ r)
        dx = q * (X @ dy - r)
        ds = -dx
        dz = -z * (dx / x + 1.0)
        dw = -w * (ds / s + 1.0)

        fp = min(_step_length(x, dx), _step_length(s, ds))
        fd = min(_step_length(w, dw), _step_length(z, dz))

        if min(fp, fd) < 1.0:
            # Corrector: centre towards mu with second-order terms
            mu = float(z @ x + w @ s)
            g = float((z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds))
            mu = mu * (g / mu) ** 3 / (2.0 * n)

            dxdz = dx * dz
            dsdw = ds * dw
            xinv = 1.0 / x
            sinv = 1.0 / s
            xi = mu * (xinv - sinv)
            v = r - xi + dxdz * xinv - dsdw * sinv
            dy = _solve_normal(M, XQ @ v)
            dx = q * (X @ dy - v)
            ds = -dx
            dz = mu * xinv - z - xinv * z * dx - dxdz * xinv
            dw = mu * sinv - w - sinv * w * ds - dsdw * sinv

            fp = min(_step_length(x, dx), _step_length(s, ds))
            fd = min(_step_length(w, dw), _step_length(z, dz))

        x = x + fp * dx
        s = s + fp * ds
        dual = dual + fd * dy
        w = w + fd * dw
        z = z + fd * dz

    return -dual, max_iter, False


def _polish(
    data: Dataset, alpha: float, beta: np.ndarray, residuals: np.ndarray, objective: float
) -> np.ndarray | None:
    """Exact fit through the d smallest residuals, if it is at least as good."""
    idx = np.argsort(np.abs(residuals), kind="stable")[: data.d]
    Xh = data.X[idx]
    if np.linalg.cond(Xh) > 1e12:
        return None
    candidate = np.linalg.solve(Xh, data.y[idx])
    _, cand_obj = _objective(data, candidate, alpha)
    if cand_obj <= objective * (1.0 + 1e-10) + 1e-12:
        return candidate
    return None


def fit_rq(
    data: Dataset,
    alpha: float,
    *,
    max_iter: int = config.SOLVER_MAX_ITER,
    tol: float = config.SOLVER_GAP_TOL,
) -> QuantileFit:
    """Regression alpha-quantile of y on X."""
    _check_alpha(alpha)
    beta, iterations, converged = _interior_point(data.X, data.y, alpha, max_iter, tol)
    if not converged:
        raise ConvergenceFailure(
            f"duality gap above {tol:g} after {max_iter} iterations", alpha=alpha
        )
    residuals, objective = _objective(data, beta, alpha)

    vertex = False
    polished = _polish(data, alpha, beta, residuals, objective)
    if polished is not None:
        beta = polished
        residuals, objective = _objective(data, beta, alpha)
        vertex = True

    return QuantileFit(
        alpha=alpha,
        beta=beta,
        residuals=residuals,
        objective=objective,
        iterations=iterations,
        converged=converged,
        vertex=vertex,
    )


def brute_force_rq(data: Dataset, alpha: float) -> QuantileFit:
    """Exhaustive search over exact-fit bases; the LP optimum is among them."""
    _check_alpha(alpha)
    if data.n > BRUTE_FORCE_MAX_N:
        raise DomainError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}")
    best_beta: np.ndarray | None = None
    best_obj = math.inf
    bases = 0
    for idx in itertools.combinations(range(data.n), data.d):
        Xh = data.X[list(idx)]
        if abs(np.linalg.det(Xh)) < 1e-12:
            continue
        bases += 1
        beta = np.linalg.solve(Xh, data.y[list(idx)])
        _, obj = _objective(data, beta, alpha)
        if obj < best_obj:
            best_obj, best_beta = obj, beta
    if best_beta is None:
        raise DomainError("no nonsingular basis found")
    residuals, objective = _objective(data, best_beta, alpha)
    return QuantileFit(
        alpha=alpha,
        beta=best_beta,
        residuals=residuals,
        objective=objective,
        iterations=bases,
        converged=True,
        vertex=True,
    )


def _fit_tagged(data: Dataset, level: float) -> QuantileFit:
    try:
        return fit_rq(data, level)
    except QRWaldError as e:
        if e.alpha is None:
            raise type(e)(str(e), alpha=level) from e
        raise


def fit_process(data: Dataset, levels: ArrayLike, *, n_jobs: int = 1) -> QuantileProcess:
    """Fit regression quantiles over a grid of levels (returned ascending)."""
    grid = as_vector(levels, "levels")
    if np.any((grid <= 0.0) | (grid >= 1.0)):
        raise DomainError("all quantile levels must lie in (0, 1)")
    clipped = np.clip(grid, config.LEVEL_FLOOR, config.LEVEL_CEIL)
    n_clipped = int(np.sum(clipped != grid))
    if n_clipped:
        logger.warning(
            f"Clipped {n_clipped} levels to [{config.LEVEL_FLOOR}, {config.LEVEL_CEIL}]"
        )
    ordered = np.sort(clipped)
    unique = np.unique(ordered)

    if n_jobs == 1:
        fits = [_fit_tagged(data, float(level)) for level in unique]
    else:
        fits = Parallel(n_jobs=n_jobs)(
            delayed(_fit_tagged)(data, float(level)) for level in unique
        )
    by_level = dict(zip(unique.tolist(), fits, strict=True))
    return QuantileProcess(
        levels=ordered, fits=[by_level[level] for level in ordered.tolist()]
    )
