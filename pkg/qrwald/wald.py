"""Wald tests of H0: R beta(alpha) = r at a single quantile or over a grid.

The statistic is n / (alpha (1 - alpha)) (R b - r)' W (R b - r) with
W = (R G^-1 H G^-1 R')^-1, formed from SPD solves only.
"""

import logging

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import ArrayLike

from . import config
from .density import compute_H, estimate_G
from .errors import DomainError, EmptyGrid, QRWaldError, SingularG, SingularMatrix, SingularW
from .numerics import as_vector, chi2_sf, solve_spd, symmetrize
from .qr_solver import fit_rq
from .schemas import Dataset, EGConfig, GEstimate, HMatrix, QuantileFit, Restriction, WaldResult

logger = logging.getLogger(__name__)


def compute_W(G: GEstimate, H: HMatrix, restr: Restriction) -> np.ndarray:
    try:
        GinvRt = solve_spd(symmetrize(G.G), restr.R.T)  # d x J
    except SingularMatrix as e:
        raise SingularG(str(e), alpha=G.alpha) from e
    core = symmetrize(GinvRt.T @ H.H @ GinvRt)
    try:
        W = solve_spd(core, np.eye(restr.J))
    except SingularMatrix as e:
        raise SingularW(str(e), alpha=G.alpha) from e
    return symmetrize(W)


def wald_test(
    fit: QuantileFit,
    G: GEstimate,
    H: HMatrix,
    restr: Restriction,
    n: int,
    *,
    taus: tuple[float, ...] = config.REJECT_LEVELS,
) -> WaldResult:
    if abs(fit.alpha - G.alpha) > 1e-12:
        raise DomainError(f"fit at {fit.alpha} but G at {G.alpha}")
    alpha = fit.alpha
    W = compute_W(G, H, restr)
    diff = restr.R @ fit.beta - restr.r
    statistic = max(0.0, float(n / (alpha * (1.0 - alpha)) * diff @ W @ diff))
    p_value = chi2_sf(statistic, restr.J)
    return WaldResult(
        alpha=alpha,
        statistic=statistic,
        J=restr.J,
        p_value=p_value,
        reject_at={tau: p_value < tau for tau in taus},
        method=G.method,
        diagnostics={"bandwidth": G.bandwidth, "m": G.m_used, **G.diagnostics},
    )


def run_test(
    data: Dataset,
    restr: Restriction,
    alpha: float,
    method: str = "weg",
    cfg: EGConfig | None = None,
    *,
    taus: tuple[float, ...] = config.REJECT_LEVELS,
    n_jobs: int = 1,
) -> WaldResult:
    """Fit, estimate G and H, and test at one level."""
    fit = fit_rq(data, alpha)
    G = estimate_G(data, alpha, method, cfg, fit=fit, n_jobs=n_jobs)
    return wald_test(fit, G, compute_H(data), restr, data.n, taus=taus)


def _curve_point(
    data: Dataset,
    restr: Restriction,
    alpha: float,
    method: str,
    cfg: EGConfig | None,
    taus: tuple[float, ...],
) -> WaldResult:
    try:
        return run_test(data, restr, alpha, method, cfg, taus=taus)
    except QRWaldError as e:
        logger.warning(f"{method} failed at alpha={alpha:.4f}: {e}")
        return WaldResult(
            alpha=alpha,
            statistic=None,
            J=restr.J,
            p_value=None,
            method=config.METHODS.get(method, method),
            status=type(e).__name__,
            diagnostics={"error": str(e)},
        )


def pvalue_curve(
    data: Dataset,
    restr: Restriction,
    alphas: ArrayLike,
    method: str = "weg",
    cfg: EGConfig | None = None,
    *,
    taus: tuple[float, ...] = config.REJECT_LEVELS,
    n_jobs: int = 1,
) -> list[WaldResult]:
    """One result per level, in input order; failures become status entries."""
    grid = as_vector(alphas, "alphas") if np.size(alphas) else np.empty(0)
    if grid.size == 0:
        raise EmptyGrid("the quantile grid is empty")
    cfg = cfg or EGConfig()
    if method == "weg" and np.any((grid <= cfg.a1) | (grid >= cfg.a2)):
        raise DomainError(f"grid must lie inside ({cfg.a1}, {cfg.a2}) for weg")
    if n_jobs == 1:
        return [_curve_point(data, restr, float(a), method, cfg, taus) for a in grid]
    return Parallel(n_jobs=n_jobs)(
        delayed(_curve_point)(data, restr, float(a), method, cfg, taus) for a in grid
    )
