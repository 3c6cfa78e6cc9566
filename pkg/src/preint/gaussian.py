"""Standard normal density, distribution function and quantile.

Scalar kernels (``_pdf``, ``_cdf``, ``_quantile``) are numba-compiled and
called from the other kernels; the public functions accept scalars or
arrays and use vectorised numpy/scipy code.

The quantile starts from Acklam's rational approximation (relative error
about 1.2e-9) and applies a single Newton step on the distribution function,
computed in the lower tail so that ``cdf(y) - u`` keeps relative accuracy.
"""

import math

import numpy as np
from scipy.special import erfc

from ._backend import njit

INV_SQRT_2PI = 0.3989422804014327
INV_SQRT2 = 0.7071067811865476

# Acklam's coefficients
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


@njit
def _pdf(y):
    return INV_SQRT_2PI * math.exp(-0.5 * y * y)


@njit
def _cdf(y):
    return 0.5 * math.erfc(-y * INV_SQRT2)


@njit
def _lower_quantile(p):
    # 0 < p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        y = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        y = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    return y - (_cdf(y) - p) / _pdf(y)


@njit
def _quantile(u):
    if u <= 0.5:
        return _lower_quantile(u)
    return -_lower_quantile(1.0 - u)


def pdf(y):
    """Standard normal density ``exp(-y**2/2)/sqrt(2*pi)``."""
    y = np.asarray(y, dtype=float)
    out = INV_SQRT_2PI * np.exp(-0.5 * y * y)
    return out[()] if out.ndim == 0 else out


def cdf(y):
    """Standard normal distribution function, ``erfc(-y/sqrt(2))/2``."""
    y = np.asarray(y, dtype=float)
    out = 0.5 * erfc(-y * INV_SQRT2)
    return out[()] if out.ndim == 0 else out


def _lower_quantile_vec(p):
    y = np.empty_like(p)
    tail = p < _P_LOW
    if tail.any():
        q = np.sqrt(-2.0 * np.log(p[tail]))
        y[tail] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    mid = ~tail
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        y[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    return y - (0.5 * erfc(-y * INV_SQRT2) - p) / (INV_SQRT_2PI * np.exp(-0.5 * y * y))


def quantile(u):
    """Inverse of :func:`cdf` on the open interval (0, 1).

    Raises
    ------
    ValueError
        If any ``u`` lies outside (0, 1) or is NaN.
    """
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("quantile argument must lie in the open interval (0, 1)")
    upper = u > 0.5
    p = np.where(upper, 1.0 - u, u)
    y = _lower_quantile_vec(np.atleast_1d(p)).reshape(p.shape)
    y = np.where(upper, -y, y)
    return y[()] if y.ndim == 0 else y
