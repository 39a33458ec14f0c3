"""Conditional density estimates f_i(x_i'beta(alpha)) and the matrix G(alpha).

The EG estimator smooths contrasts of the fitted quantile process over a grid
U_1..U_m in [a1, a2]:

    f_i = (a2 - a1) / (m h) * sum_j K(x_i'(b(U_j) - b(alpha)) / h)

and G = n^-1 sum_i f_i x_i x_i'. The Hendricks-Koenker difference quotient,
Powell's uniform-kernel estimator and the iid scalar sparsity are the
classical comparators.
"""

import logging
import math
from collections.abc import Callable

import numpy as np

from . import config
from .errors import DegenerateSparsity, DomainError, SingularG
from .numerics import eigen_ratio, normal_pdf, normal_quantile, symmetrize
from .qr_solver import fit_process, fit_rq
from .schemas import Dataset, EGConfig, GEstimate, HMatrix, QuantileFit, QuantileProcess

logger = logging.getLogger(__name__)

# Epanechnikov kernel rescaled to the support [-1/2, 1/2].
KERNEL_VARIANCE = 0.05


def kernel_epa(w):
    arr = np.asarray(w, dtype=float)
    out = np.where(np.abs(arr) <= 0.5, 1.5 * (1.0 - 4.0 * arr * arr), 0.0)
    return float(out) if arr.ndim == 0 else out


def kernel_epa_unit(w):
    """Standard Epanechnikov kernel 0.75 (1 - w^2) on [-1, 1]."""
    arr = np.asarray(w, dtype=float)
    out = np.where(np.abs(arr) <= 1.0, 0.75 * (1.0 - arr * arr), 0.0)
    return float(out) if arr.ndim == 0 else out


KERNELS: dict[str, Callable] = {
    "epanechnikov": kernel_epa_unit,
    "epanechnikov-half": kernel_epa,
}


def resolve_kernel(name: str) -> Callable:
    try:
        return KERNELS[name]
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; expected one of {sorted(KERNELS)}") from None


def grid_size_m(n: int, k: float = config.K) -> int:
    """m = floor((k n / (log n)^(11/5))^(5/4)), at least 2."""
    if n < 20 or not k > 0.0:
        raise DomainError(f"grid_size_m needs n >= 20 and k > 0 (n={n}, k={k})")
    m = math.floor((k * n / math.log(n) ** 2.2) ** 1.25)
    return max(m, 2)


def bandwidth_h(m: int, c: float = config.C) -> float:
    """h_m = c (log m / m)^(1/5)."""
    if m < 2 or not c > 0.0:
        raise DomainError(f"bandwidth_h needs m >= 2 and c > 0 (m={m}, c={c})")
    return c * (math.log(m) / m) ** 0.2


def draw_levels(cfg: EGConfig, m: int) -> np.ndarray:
    if m < 2:
        raise DomainError(f"need m >= 2 levels, got {m}")
    if cfg.level_mode == "equispaced":
        j = np.arange(1, m + 1)
        return cfg.a1 + (j - 0.5) * (cfg.a2 - cfg.a1) / m
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(cfg.a1, cfg.a2, size=m)


def _smoothed_contrasts(
    X: np.ndarray,
    betas: np.ndarray,
    beta_alpha: np.ndarray,
    h_m: float,
    a1: float,
    a2: float,
    kernel: str,
) -> np.ndarray:
    if not h_m > 0.0:
        raise DomainError(f"bandwidth must be positive, got {h_m}")
    K = resolve_kernel(kernel)
    m = betas.shape[0]
    contrasts = X @ (betas - beta_alpha).T  # n x m
    return (a2 - a1) / (m * h_m) * np.sum(K(contrasts / h_m), axis=1)


def eg_density(
    data: Dataset,
    process: QuantileProcess,
    fit_alpha: QuantileFit,
    h_m: float,
    *,
    a1: float = config.A1,
    a2: float = config.A2,
    kernel: str = config.KERNEL,
) -> np.ndarray:
    """Per-observation density estimates from the fitted quantile process."""
    if np.any((process.levels < a1) | (process.levels > a2)):
        raise DomainError(f"process levels must lie in [{a1}, {a2}]")
    return _smoothed_contrasts(data.X, process.betas, fit_alpha.beta, h_m, a1, a2, kernel)


def infeasible_density(
    data: Dataset,
    true_beta: Callable[[float], np.ndarray],
    alpha: float,
    levels: np.ndarray,
    h_m: float,
    *,
    a1: float = config.A1,
    a2: float = config.A2,
    kernel: str = config.KERNEL,
) -> np.ndarray:
    """The same kernel sum with the true coefficient function (simulation only)."""
    betas = np.vstack([true_beta(float(u)) for u in levels])
    return _smoothed_contrasts(data.X, betas, true_beta(alpha), h_m, a1, a2, kernel)


def compute_H(data: Dataset) -> HMatrix:
    return HMatrix(H=symmetrize(data.X.T @ data.X / data.n))


def weighted_gram(data: Dataset, f_hat: np.ndarray) -> np.ndarray:
    """n^-1 sum_i f_i x_i x_i'."""
    return symmetrize((data.X.T * f_hat) @ data.X / data.n)


def _check_nonsingular(G: np.ndarray, alpha: float, method: str) -> None:
    ratio = eigen_ratio(G)
    if ratio <= config.SINGULAR_RATIO:
        raise SingularG(f"{method} estimate is singular (eigen ratio {ratio:.3e})", alpha=alpha)


def _check_level(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {alpha}")


def estimate_G_eg(
    data: Dataset,
    alpha: float,
    cfg: EGConfig | None = None,
    *,
    fit: QuantileFit | None = None,
    n_jobs: int = 1,
) -> GEstimate:
    cfg = cfg or EGConfig()
    if not cfg.a1 < alpha < cfg.a2:
        raise DomainError(f"alpha must lie in ({cfg.a1}, {cfg.a2})", alpha=alpha)
    m = cfg.m_override or grid_size_m(data.n, cfg.k)
    h_m = cfg.h_override or bandwidth_h(m, cfg.c)
    levels = draw_levels(cfg, m)
    process = fit_process(data, levels, n_jobs=n_jobs)
    fit = fit or fit_rq(data, alpha)
    f_hat = eg_density(data, process, fit, h_m, a1=cfg.a1, a2=cfg.a2, kernel=cfg.kernel)
    G = weighted_gram(data, f_hat)
    _check_nonsingular(G, alpha, "EG")
    logger.debug(f"EG estimate at alpha={alpha:.3f}: m={m}, h={h_m:.4f}")
    return GEstimate(
        alpha=alpha,
        method="EG",
        G=G,
        f_hat=f_hat,
        bandwidth=h_m,
        m_used=m,
        diagnostics={"zero_densities": int(np.sum(f_hat == 0.0))},
    )


def hall_sheather_bandwidth(n: int, alpha: float, tau: float = 0.05) -> float:
    if n < 20 or not 0.0 < alpha < 1.0 or not 0.0 < tau < 1.0:
        raise DomainError(
            f"Hall-Sheather needs n >= 20, alpha and tau in (0, 1) "
            f"(n={n}, alpha={alpha}, tau={tau})"
        )
    x = normal_quantile(alpha)
    z = normal_quantile(1.0 - tau / 2.0)
    ratio = 1.5 * normal_pdf(x) ** 2 / (2.0 * x * x + 1.0)
    return n ** (-1.0 / 3.0) * z ** (2.0 / 3.0) * ratio ** (1.0 / 3.0)


def estimate_G_hk(data: Dataset, alpha: float) -> GEstimate:
    """Difference quotient of the quantile process at alpha +- h.

    Only the two flanking fits enter; the fit at alpha itself is not used.
    """
    _check_level(alpha)
    h = hall_sheather_bandwidth(data.n, alpha)
    h = min(h, alpha - config.LEVEL_FLOOR, config.LEVEL_CEIL - alpha)
    if not h > 0.0:
        raise DomainError("no room for the difference quotient", alpha=alpha)
    upper = fit_rq(data, alpha + h)
    lower = fit_rq(data, alpha - h)
    spread = data.X @ (upper.beta - lower.beta)
    positive = spread > 0.0
    f_hat = np.zeros(data.n)
    f_hat[positive] = 2.0 * h / spread[positive]
    floored = int(np.sum(~positive))
    if floored:
        logger.warning(f"HK at alpha={alpha:.3f}: floored {floored} non-positive quotients")
    G = weighted_gram(data, f_hat)
    _check_nonsingular(G, alpha, "HK")
    return GEstimate(
        alpha=alpha,
        method="HK",
        G=G,
        f_hat=f_hat,
        bandwidth=h,
        diagnostics={"floored": floored},
    )


def powell_window(n: int, alpha: float) -> float:
    h = hall_sheather_bandwidth(n, alpha)
    if h >= 0.5:
        raise DomainError(f"Hall-Sheather bandwidth {h:.3f} too wide for the window")
    return normal_quantile(0.5 + h) - normal_quantile(0.5 - h)


def estimate_G_powell(
    data: Dataset, alpha: float, *, fit: QuantileFit | None = None
) -> GEstimate:
    """Uniform kernel on [-1, 1] over the alpha-fit residuals."""
    _check_level(alpha)
    fit = fit or fit_rq(data, alpha)
    delta = powell_window(data.n, alpha)
    inside = np.abs(fit.residuals) <= delta
    if not np.any(inside):
        raise SingularG(f"no residual within the window {delta:.4f}", alpha=alpha)
    f_hat = inside / (2.0 * delta)
    G = weighted_gram(data, f_hat)
    _check_nonsingular(G, alpha, "Powell")
    return GEstimate(
        alpha=alpha,
        method="Powell",
        G=G,
        f_hat=f_hat,
        bandwidth=delta,
        diagnostics={"inside": int(np.sum(inside))},
    )


def residual_sparsity(residuals: np.ndarray, alpha: float, h: float) -> tuple[float, int, int]:
    """[Q(alpha + h) - Q(alpha - h)] / 2h from order statistics of the residuals."""
    n = residuals.shape[0]
    ordered = np.sort(residuals)
    hi = min(n, max(1, math.ceil(n * (alpha + h))))
    lo = min(n, max(1, math.ceil(n * (alpha - h))))
    return (ordered[hi - 1] - ordered[lo - 1]) / (2.0 * h), lo, hi


def estimate_G_iid(data: Dataset, alpha: float, *, fit: QuantileFit | None = None) -> GEstimate:
    _check_level(alpha)
    h = hall_sheather_bandwidth(data.n, alpha)
    h = min(h, alpha, 1.0 - alpha) * (1.0 - 1e-12)
    fit = fit or fit_rq(data, alpha)
    sparsity, lo, hi = residual_sparsity(fit.residuals, alpha, h)
    if not sparsity > 0.0:
        raise DegenerateSparsity(f"sparsity estimate {sparsity:.3e} is not positive", alpha=alpha)
    H = compute_H(data).H
    G = H / sparsity
    _check_nonsingular(G, alpha, "IIDSparsity")
    return GEstimate(
        alpha=alpha,
        method="IIDSparsity",
        G=G,
        f_hat=np.full(data.n, 1.0 / sparsity),
        bandwidth=h,
        diagnostics={"sparsity": sparsity, "order_lo": lo, "order_hi": hi},
    )


def estimate_G_oracle(
    data: Dataset,
    alpha: float,
    true_beta: Callable[[float], np.ndarray],
    cfg: EGConfig | None = None,
) -> GEstimate:
    """EG-shaped estimate with the true quantile process in place of the fit."""
    cfg = cfg or EGConfig()
    m = cfg.m_override or grid_size_m(data.n, cfg.k)
    h_m = cfg.h_override or bandwidth_h(m, cfg.c)
    levels = draw_levels(cfg, m)
    f_hat = infeasible_density(
        data, true_beta, alpha, levels, h_m, a1=cfg.a1, a2=cfg.a2, kernel=cfg.kernel
    )
    G = weighted_gram(data, f_hat)
    _check_nonsingular(G, alpha, "Oracle")
    return GEstimate(alpha=alpha, method="Oracle", G=G, f_hat=f_hat, bandwidth=h_m, m_used=m)


def estimate_G(
    data: Dataset,
    alpha: float,
    method: str,
    cfg: EGConfig | None = None,
    *,
    fit: QuantileFit | None = None,
    n_jobs: int = 1,
) -> GEstimate:
    """Dispatch on the test-method name (weg, wiid, wnid, wker)."""
    if method == "weg":
        return estimate_G_eg(data, alpha, cfg, fit=fit, n_jobs=n_jobs)
    if method == "wiid":
        return estimate_G_iid(data, alpha, fit=fit)
    if method == "wnid":
        return estimate_G_hk(data, alpha)
    if method == "wker":
        return estimate_G_powell(data, alpha, fit=fit)
    raise DomainError(f"unknown method {method!r}; expected one of {sorted(config.METHODS)}")
