"""Models ``X = phi(y0, y)`` that are increasing in the first variable.

The concrete models share one closed form,

    phi(y0, y) = c0*y0 + c.y + b + sum_i exp(A[i, 0]*y0 + A[i, 1:].y),

which covers the lognormal sum (``c = 0, b = 0``) and the linear Gaussian
test model (no exponential rows). Fixing ``y`` leaves a univariate *fiber*
whose evaluation costs O(rows) once the ``y``-dependent parts are cached.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gaussian


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------- covariance


def jacobi_eigh(a, rtol=1e-13, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm is at most
    ``rtol * ||a||_F``. Returns ``(eigenvalues, eigenvectors)`` unsorted,
    eigenvectors in the columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= rtol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ModelError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance of the correlated Gaussian vector ``W`` (dimension ``d+1``).

    ``kind`` is ``"equicorr"`` (``diag`` on the diagonal, ``offdiag``
    elsewhere), ``"recipmax"`` (entries ``1/max(i, j)``, 1-based) or
    ``"dense"`` (matrix read from ``path``).
    """

    kind: str
    dim: int = 0
    diag: float = 1.0
    offdiag: float = 0.5
    path: str = ""

    @classmethod
    def parse(cls, text):
        """Parse ``equicorr:<dim>:<diag>:<offdiag>``, ``recipmax:<dim>`` or a file path."""
        parts = text.split(":")
        try:
            if parts[0] == "equicorr" and len(parts) == 4:
                return cls("equicorr", int(parts[1]), float(parts[2]), float(parts[3]))
            if parts[0] == "recipmax" and len(parts) == 2:
                return cls("recipmax", int(parts[1]))
        except ValueError:
            raise ModelError(f"malformed covariance spec {text!r}") from None
        if parts[0] in ("equicorr", "recipmax"):
            raise ModelError(f"malformed covariance spec {text!r}")
        path = text[5:] if text.startswith("file:") else text
        return cls("dense", path=path)

    def matrix(self):
        if self.kind == "equicorr":
            s = np.full((self.dim, self.dim), float(self.offdiag))
            np.fill_diagonal(s, self.diag)
            return s
        if self.kind == "recipmax":
            i = np.arange(1, self.dim + 1)
            return 1.0 / np.maximum.outer(i, i)
        if self.kind == "dense":
            return load_covariance(self.path)
        raise ModelError(f"unknown covariance kind {self.kind!r}")

    def __str__(self):
        if self.kind == "equicorr":
            return f"equicorr:{self.dim}:{self.diag:g}:{self.offdiag:g}"
        if self.kind == "recipmax":
            return f"recipmax:{self.dim}"
        return f"file:{self.path}"


def load_covariance(path):
    """Read a dense covariance file: dimension on line 1, then ``n`` rows."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"covariance file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    try:
        n = int(lines[0])
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except (ValueError, IndexError):
        raise ModelError(f"{path}: malformed covariance file") from None
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ModelError(f"{path}: expected {n} rows of {n} numbers")
    return np.array(rows)


def pca_factorize(sigma, sym_tol=1e-12, psd_tol=1e-12):
    """PCA factor ``A = U diag(sqrt(lam))`` with ``A A^T = sigma``.

    Eigenvalues are sorted nonincreasing. Each eigenvector is signed so
    that its entries sum to a nonnegative number (ties broken by the first
    nonzero entry), which fixes the otherwise arbitrary sign of ``U``.
    """
    if isinstance(sigma, CovarianceSpec):
        sigma = sigma.matrix()
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ModelError("covariance must be a square matrix")
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > sym_tol * max(1.0, np.max(np.abs(sigma))):
        raise ModelError("covariance is not symmetric")
    lam, u = jacobi_eigh(0.5 * (sigma + sigma.T))
    order = np.argsort(-lam, kind="stable")
    lam, u = lam[order], u[:, order]
    if lam[-1] < -psd_tol:
        raise ModelError(f"covariance is not positive semidefinite (eigenvalue {lam[-1]:.3e})")
    for k in range(u.shape[1]):
        col = u[:, k]
        total = col.sum()
        if abs(total) <= 1e-14 * np.abs(col).sum():
            nz = col[np.abs(col) > 1e-14]
            flip = nz.size > 0 and nz[0] < 0
        else:
            flip = total < 0
        if flip:
            u[:, k] = -col
    return u * np.sqrt(np.clip(lam, 0.0, None))[None, :]


@dataclass(frozen=True)
class MonotoneCheck:
    ok: bool
    offending_rows: tuple = ()
    message: str = ""

    def __bool__(self):
        return self.ok


def check_monotone(a):
    """Sufficient condition for ``d/dy0 sum_i exp(A_i y) > 0``: column 0 of
    ``A`` is nonnegative with at least one positive entry."""
    col = np.asarray(a, dtype=float)[:, 0]
    neg = tuple(int(i) for i in np.flatnonzero(col < 0))
    if neg:
        return MonotoneCheck(False, neg, f"negative entries in column 0 at rows {list(neg)}")
    if not np.any(col > 0):
        return MonotoneCheck(False, (), "column 0 is zero: phi independent of y0")
    return MonotoneCheck(True)


# -------------------------------------------------------------------- models


class Model:
    """Interface for ``phi(y0, y)`` with ``D0 phi > 0`` and ``phi -> inf`` as ``y0 -> inf``.

    Subclasses provide ``phi``, ``dphi0`` and ``fiber``; ``dim`` is the
    number of remaining variables ``d``.
    """

    dim: int

    def phi(self, y0, y):
        raise NotImplementedError

    def dphi0(self, y0, y):
        raise NotImplementedError

    def fiber(self, y):
        raise NotImplementedError

    def phi_full(self, ys):
        """``phi`` on stacked ``(n, d+1)`` inputs, column 0 being ``y0``."""
        ys = np.atleast_2d(ys)
        return np.array([self.phi(row[0], row[1:]) for row in ys])


@dataclass
class ExpAffineFiber:
    """``y0 -> c0*y0 + offset + sum_i exp(a0[i]*y0 + s[i])`` for one fixed ``y``.

    ``n_exp`` counts exponentials evaluated, for cost accounting.
    """

    c0: float
    offset: float
    a0: np.ndarray
    s: np.ndarray
    n_exp: int = 0

    @property
    def lower_limit(self):
        if self.c0 > 0:
            return -math.inf
        flat = self.a0 == 0.0
        return self.offset + float(np.sum(np.exp(self.s[flat])))

    def eval(self, y0):
        self.n_exp += len(self.a0)
        return self.c0 * y0 + self.offset + float(np.sum(np.exp(self.a0 * y0 + self.s)))

    def deriv(self, y0):
        self.n_exp += len(self.a0)
        return self.c0 + float(np.sum(self.a0 * np.exp(self.a0 * y0 + self.s)))

    def eval_deriv(self, y0):
        self.n_exp += len(self.a0)
        e = np.exp(self.a0 * y0 + self.s)
        return self.c0 * y0 + self.offset + float(np.sum(e)), self.c0 + float(np.sum(self.a0 * e))


class ExpAffineModel(Model):
    """``phi(y0, y) = lin . (y0, y) + offset + sum_i exp(A[i] . (y0, y))``."""

    def __init__(self, lin, offset, exp_rows):
        lin = np.asarray(lin, dtype=float)
        exp_rows = np.asarray(exp_rows, dtype=float).reshape(-1, len(lin))
        if len(lin) == 1:
            # no remaining variables: carry one dummy variable with zero weight
            lin = np.append(lin, 0.0)
            exp_rows = np.hstack([exp_rows, np.zeros((exp_rows.shape[0], 1))])
        c0 = lin[0]
        a0 = exp_rows[:, 0]
        if c0 < 0 or np.any(a0 < 0) or not (c0 > 0 or np.any(a0 > 0)):
            raise ModelError("phi must be increasing in y0: need lin[0] >= 0, A[:, 0] >= 0, one positive")
        self.lin = lin
        self.offset = float(offset)
        self.exp_rows = exp_rows
        self.dim = len(lin) - 1

    def phi(self, y0, y):
        y = np.asarray(y, dtype=float)
        full = np.concatenate(([y0], y))
        return float(self.lin @ full + self.offset + np.sum(np.exp(self.exp_rows @ full)))

    def dphi0(self, y0, y):
        y = np.asarray(y, dtype=float)
        full = np.concatenate(([y0], y))
        return float(self.lin[0] + self.exp_rows[:, 0] @ np.exp(self.exp_rows @ full))

    def phi_full(self, ys):
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        return ys @ self.lin + self.offset + np.exp(ys @ self.exp_rows.T).sum(axis=1)

    def fiber(self, y):
        y = np.asarray(y, dtype=float)
        return ExpAffineFiber(
            c0=float(self.lin[0]),
            offset=float(self.lin[1:] @ y + self.offset),
            a0=self.exp_rows[:, 0].copy(),
            s=self.exp_rows[:, 1:] @ y,
        )

    def infimum(self):
        """Greatest lower bound of ``phi`` over all inputs."""
        if np.any(self.lin != 0.0):
            return -math.inf
        return 0.0


class LognormalSumModel(ExpAffineModel):
    """Sum of lognormals ``sum_i exp(A_i . Y)`` for a factor ``A`` of the covariance."""

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        chk = check_monotone(a)
        if not chk:
            raise ModelError(f"lognormal model not monotone in y0: {chk.message}")
        super().__init__(np.zeros(a.shape[1]), 0.0, a)
        self.factor = self.exp_rows


class LinearGaussianModel(ExpAffineModel):
    """``X = c . Y + b``; normal, so its cdf and pdf are known exactly."""

    def __init__(self, c, b=0.0):
        c = np.asarray(c, dtype=float)
        if c.ndim != 1 or len(c) < 1 or not c[0] > 0:
            raise ModelError("linear model needs c[0] > 0")
        super().__init__(c, b, np.empty((0, len(c))))
        self.c = self.lin
        self.b = float(b)
        self.scale = float(np.linalg.norm(c))

    def exact_cdf(self, t):
        return gaussian.cdf((np.asarray(t, dtype=float) - self.b) / self.scale)

    def exact_pdf(self, t):
        return gaussian.pdf((np.asarray(t, dtype=float) - self.b) / self.scale) / self.scale

    def xi(self, t, y):
        """Closed-form root of ``phi(., y) = t``."""
        return (t - self.b - self.c[1:] @ np.asarray(y, dtype=float)) / self.c[0]


def lognormal_sum_model(a):
    return LognormalSumModel(a)


def linear_gaussian_model(c, b=0.0):
    return LinearGaussianModel(c, b)


def lognormal_from_covariance(spec):
    """PCA-factorise ``spec`` and build the lognormal sum model on it."""
    if isinstance(spec, str):
        spec = CovarianceSpec.parse(spec)
    return LognormalSumModel(pca_factorize(spec))
