"""Dense linear algebra and special functions.

Nothing statistical lives here. Incomplete gamma and beta are evaluated by
series / continued fraction split at the usual reflection point (modified
Lentz), so the distribution functions have no dependency beyond numpy.
"""

import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import SINGULAR_RATIO
from .errors import ConvergenceFailure, DomainError, SingularMatrix

logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]

_EPS = 1e-15
_FPMIN = 1e-300
_MAX_CF_ITER = 10_000
_MAX_QUANTILE_ITER = 200
_QUANTILE_RTOL = 1e-13
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

_erfc = np.vectorize(math.erfc, otypes=[float])


def as_vector(values: ArrayLike, name: str = "vector") -> Vector:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def as_matrix(values: ArrayLike, name: str = "matrix") -> Matrix:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def symmetrize(A: Matrix) -> Matrix:
    return 0.5 * (A + A.T)


def eigen_ratio(A: Matrix) -> float:
    """Smallest over largest eigenvalue of a symmetric matrix (can be negative)."""
    eig = np.linalg.eigvalsh(symmetrize(A))
    top = float(np.max(np.abs(eig)))
    if top == 0.0:
        return 0.0
    return float(eig[0]) / top


# ---------------------------------------------------------------------------
# SPD solve
# ---------------------------------------------------------------------------


def cholesky(A: Matrix) -> Matrix:
    """Lower-triangular L with A = L L^T; pivots below the floor are refused."""
    A = as_matrix(A, "A")
    n, m = A.shape
    if n != m:
        raise DomainError(f"matrix must be square, got {A.shape}")
    scale = float(np.max(np.diag(A))) if n else 0.0
    if scale <= 0.0:
        raise SingularMatrix("matrix has no positive diagonal entry")
    floor = SINGULAR_RATIO * scale

    L = np.zeros_like(A)
    for k in range(n):
        pivot = A[k, k] - L[k, :k] @ L[k, :k]
        if pivot <= floor:
            raise SingularMatrix(
                f"pivot {pivot:.3e} at position {k} below floor {floor:.3e}"
            )
        L[k, k] = math.sqrt(pivot)
        L[k + 1 :, k] = (A[k + 1 :, k] - L[k + 1 :, :k] @ L[k, :k]) / L[k, k]
    return L


def solve_spd(A: Matrix, B: ArrayLike) -> Matrix:
    """Solve A X = B for symmetric positive definite A via Cholesky."""
    A = as_matrix(A, "A")
    tol = 1e-10 * (1.0 + float(np.max(np.abs(A))))
    if A.shape[0] == A.shape[1] and np.max(np.abs(A - A.T)) > tol:
        raise DomainError("matrix is not symmetric")
    B_arr = np.asarray(B, dtype=float)
    vector_rhs = B_arr.ndim == 1
    B_mat = as_matrix(B_arr, "B")
    if B_mat.shape[0] != A.shape[0]:
        raise DomainError(f"shape mismatch: A is {A.shape}, B is {B_arr.shape}")

    L = cholesky(A)
    n = A.shape[0]
    Y = np.empty_like(B_mat)
    for i in range(n):
        Y[i] = (B_mat[i] - L[i, :i] @ Y[:i]) / L[i, i]
    X = np.empty_like(B_mat)
    for i in range(n - 1, -1, -1):
        X[i] = (Y[i] - L[i + 1 :, i] @ X[i + 1 :]) / L[i, i]
    return X[:, 0] if vector_rhs else X


# ---------------------------------------------------------------------------
# Normal distribution
# ---------------------------------------------------------------------------

# Acklam's rational approximation, refined by one Halley step on erfc.
_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)
_P_LOW = 0.02425


def _scalar_or_array(x: np.ndarray, scalar: bool):
    return float(x) if scalar else x


def normal_pdf(x: ArrayLike):
    arr = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * arr * arr) / _SQRT2PI
    return _scalar_or_array(out, arr.ndim == 0)


def normal_cdf(x: ArrayLike):
    arr = np.asarray(x, dtype=float)
    out = 0.5 * _erfc(-arr / _SQRT2)
    return _scalar_or_array(out, arr.ndim == 0)


def normal_quantile(p: ArrayLike):
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any((arr <= 0.0) | (arr >= 1.0)):
        raise DomainError("normal_quantile requires p in (0, 1)")
    flat = arr.reshape(-1)
    x = np.empty_like(flat)

    low = flat < _P_LOW
    high = flat > 1.0 - _P_LOW
    mid = ~(low | high)

    if np.any(mid):
        q = flat[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    for mask, sign, tail in ((low, 1.0, flat), (high, -1.0, 1.0 - flat)):
        if np.any(mask):
            q = np.sqrt(-2.0 * np.log(tail[mask]))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
            x[mask] = sign * num / den

    e = 0.5 * _erfc(-x / _SQRT2) - flat
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return _scalar_or_array(x.reshape(arr.shape), arr.ndim == 0)


# ---------------------------------------------------------------------------
# Incomplete gamma and chi-square
# ---------------------------------------------------------------------------


def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series (x < a + 1)."""
    ap = a
    total = delta = 1.0 / a
    for _ in range(_MAX_CF_ITER):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceFailure(f"gamma series did not converge for a={a}, x={x}")


def _gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_CF_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ConvergenceFailure(f"gamma continued fraction did not converge for a={a}, x={x}")


def regularized_gamma_p(a: float, x: float) -> float:
    if a <= 0.0 or x < 0.0:
        raise DomainError(f"regularized gamma needs a > 0, x >= 0 (a={a}, x={x})")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    if a <= 0.0 or x < 0.0:
        raise DomainError(f"regularized gamma needs a > 0, x >= 0 (a={a}, x={x})")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _check_df(J) -> int:
    if isinstance(J, bool) or int(J) != J or J < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {J}")
    return int(J)


def chi2_sf(x: float, J: int) -> float:
    """Upper tail P(chi2_J > x)."""
    J = _check_df(J)
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"chi2_sf requires x >= 0, got {x}")
    if J == 2:
        return math.exp(-0.5 * x)
    return min(1.0, max(0.0, regularized_gamma_q(0.5 * J, 0.5 * x)))


def chi2_isf(tau: float, J: int) -> float:
    """Critical value x with chi2_sf(x, J) = tau."""
    J = _check_df(J)
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"chi2_isf requires tau in (0, 1], got {tau}")
    if tau == 1.0:
        return 0.0
    if J == 2:
        return -2.0 * math.log(tau)
    lo, hi = 0.0, float(max(J, 1))
    while chi2_sf(hi, J) > tau:
        lo, hi = hi, 2.0 * hi
    for _ in range(_MAX_QUANTILE_ITER):
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, J) > tau:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Incomplete beta, Student t, beta quantiles
# ---------------------------------------------------------------------------


def _beta_cf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ConvergenceFailure(f"beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def regularized_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"incomplete beta needs a, b > 0 (a={a}, b={b})")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"incomplete beta needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _check_open_unit(p: float, name: str = "p") -> None:
    if not (math.isfinite(p) and 0.0 < p < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {p}")


def _beta_root(p: float, a: float, b: float) -> float:
    # p <= 0.5 here, so the root sits where I_x(a, b) is resolved to relative precision
    log_beta = _log_beta(a, b)
    lo, hi = 0.0, 1.0
    x = a / (a + b)
    for _ in range(_MAX_QUANTILE_ITER):
        f = regularized_beta(x, a, b) - p
        if abs(f) <= _QUANTILE_RTOL * p:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4.0 * np.spacing(x):
            return x
        log_pdf = (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_beta
        step = f / math.exp(log_pdf) if log_pdf < 700.0 else 0.0
        candidate = x - step
        if not (lo < candidate < hi) or step == 0.0:
            candidate = 0.5 * (lo + hi)
        if candidate == x:
            return x
        x = candidate
    raise ConvergenceFailure(
        f"beta_quantile did not converge in {_MAX_QUANTILE_ITER} iterations "
        f"(p={p}, a={a}, b={b})"
    )


def beta_quantile(p: float, a: float, b: float) -> float:
    """Inverse of I_x(a, b) by bracketed Newton iteration.

    Upper-tail levels are solved on 1 - x ~ Beta(b, a), where the root is
    small and well resolved in floating point.
    """
    _check_open_unit(p)
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"beta parameters must be positive (a={a}, b={b})")
    if a == 1.0 and b == 1.0:
        return p
    if a == 1.0:
        return -math.expm1(math.log1p(-p) / b)
    if b == 1.0:
        return math.exp(math.log(p) / a)
    if a == 0.5 and b == 0.5:
        return math.sin(0.5 * math.pi * p) ** 2
    if p > 0.5:
        return 1.0 - _beta_root(1.0 - p, b, a)
    return _beta_root(p, a, b)


beta_quantile_array = np.vectorize(beta_quantile, otypes=[float])


def student_t_cdf(t: float, dof: float) -> float:
    if dof <= 0.0:
        raise DomainError(f"dof must be positive, got {dof}")
    x = dof / (dof + t * t)
    tail = 0.5 * regularized_beta(x, 0.5 * dof, 0.5)
    return 1.0 - tail if t > 0.0 else tail


def student_t_quantile(p: float, dof: float) -> float:
    _check_open_unit(p)
    if not (math.isfinite(dof) and dof > 0.0):
        raise DomainError(f"dof must be positive, got {dof}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -student_t_quantile(1.0 - p, dof)
    if p > 0.25:
        # near the centre solve for y = t^2 / (dof + t^2) = 1 - x directly
        y = beta_quantile(1.0 - 2.0 * p, 0.5, 0.5 * dof)
        return -math.sqrt(dof * y / (1.0 - y))
    x = beta_quantile(2.0 * p, 0.5 * dof, 0.5)
    return -math.sqrt(dof * (1.0 - x) / x)


student_t_quantile_array = np.vectorize(student_t_quantile, otypes=[float])
