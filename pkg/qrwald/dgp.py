"""Simulation designs: Y = 1 + X1 + .. + X4 + D + delta_a(U) D X1 + F^-1(U).

X_j are iid N(0, 1), D ~ Bernoulli(1/2) and a single U ~ U(0, 1) per
observation drives both the heterogeneity delta_a(U) and the error F^-1(U).
The tested coefficient is the one on D * X1.
"""

import logging
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError
from .numerics import beta_quantile_array, normal_quantile, student_t_quantile_array
from .schemas import Dataset, DGPSpec, Restriction

logger = logging.getLogger(__name__)

COLUMNS = ["intercept", "x1", "x2", "x3", "x4", "d", "d_x1"]
TESTED = "d_x1"

# Beta laws entering Models 3-5
_BETA_PARAMS = {3: (1.0, 4.0), 4: (0.5, 0.5), 5: (2.0, 2.0)}

_U_EPS = 1e-12


def error_quantile(U: ArrayLike, F: str = "normal") -> np.ndarray:
    arr = np.asarray(U, dtype=float)
    if F == "normal":
        return np.asarray(normal_quantile(arr), dtype=float)
    if F == "t3":
        return np.asarray(student_t_quantile_array(arr, 3.0), dtype=float)
    raise DomainError(f"unknown error distribution {F!r}")


def delta_a(
    model: int, a: float, U: ArrayLike, alpha_star: float = 0.5, F: str = "normal"
):
    """Heterogeneity function of the six designs."""
    arr = np.asarray(U, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise DomainError("U must lie in (0, 1)")
    if model == 1:
        out = np.full(arr.shape, float(a))
    elif model == 2:
        out = a * (1.0 + error_quantile(arr, F))
    elif model == 3:
        p, q = _BETA_PARAMS[3]
        g_star = float(beta_quantile_array(alpha_star, p, q))
        out = (1.0 - 5.0 * a) * beta_quantile_array(arr, p, q) - g_star
    elif model in (4, 5):
        p, q = _BETA_PARAMS[model]
        out = 2.0 * a * beta_quantile_array(arr, p, q) if a != 0.0 else np.zeros(arr.shape)
    elif model == 6:
        two_pi = 2.0 * np.pi
        out = (np.sin(two_pi * arr) - np.sin(two_pi * alpha_star) - two_pi * a) / two_pi
    else:
        raise DomainError(f"model must be one of 1..6, got {model}")
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def tested_restriction() -> Restriction:
    R = np.zeros((1, len(COLUMNS)))
    R[0, COLUMNS.index(TESTED)] = 1.0
    return Restriction(R=R, r=np.zeros(1), labels=[TESTED])


def generate_sample(spec: DGPSpec, rng: np.random.Generator) -> tuple[Dataset, Restriction]:
    n = spec.n
    X = rng.standard_normal((n, 4))
    D = (rng.random(n) < 0.5).astype(float)
    U = np.clip(rng.random(n), _U_EPS, 1.0 - _U_EPS)

    delta = delta_a(spec.model, spec.a, U, spec.alpha_star, spec.F)
    y = 1.0 + X.sum(axis=1) + D + delta * D * X[:, 0] + error_quantile(U, spec.F)

    design = np.column_stack([np.ones(n), X, D, D * X[:, 0]])
    return Dataset(y=y, X=design, column_names=list(COLUMNS)), tested_restriction()


def true_beta(spec: DGPSpec) -> Callable[[float], np.ndarray]:
    """u -> beta(u), the coefficients of the conditional u-quantile."""

    def beta(u: float) -> np.ndarray:
        intercept = 1.0 + float(error_quantile(u, spec.F))
        slope = float(delta_a(spec.model, spec.a, u, spec.alpha_star, spec.F))
        return np.array([intercept, 1.0, 1.0, 1.0, 1.0, 1.0, slope])

    return beta
