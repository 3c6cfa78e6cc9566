"""Polynomial interpolation on Chebyshev points of the second kind.

Nodes ``t_k = (a+b)/2 + (b-a)/2 cos(k pi / M)``, ``k = 0..M`` (so listed
from ``b`` down to ``a``), with the barycentric weights
``w_k = (-1)**k * delta_k``, ``delta_0 = delta_M = 1/2`` and 1 otherwise.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ChebyshevGrid:
    a: float
    b: float
    m: int
    nodes: np.ndarray = field(repr=False)
    bary_weights: np.ndarray = field(repr=False)


def chebyshev_grid(a, b, m):
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if m < 0:
        raise ValueError("degree must be nonnegative")
    if m == 0:
        return ChebyshevGrid(float(a), float(b), 0, np.array([0.5 * (a + b)]), np.array([1.0]))
    k = np.arange(m + 1)
    x = np.cos(k * math.pi / m)
    # exact values where cos rounding would break symmetry
    x[0], x[-1] = 1.0, -1.0
    if m % 2 == 0:
        x[m // 2] = 0.0
    x = np.where(np.arange(m + 1) > m // 2, -x[::-1], x)
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    nodes[0], nodes[-1] = b, a
    w = np.where(k % 2 == 0, 1.0, -1.0)
    w[0] *= 0.5
    w[-1] *= 0.5
    return ChebyshevGrid(float(a), float(b), int(m), nodes, w)


@dataclass(frozen=True)
class Interpolant:
    """Values ``g(t_k)`` on a Chebyshev grid, evaluable anywhere by the barycentric formula."""

    grid: ChebyshevGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(f"expected {len(self.grid.nodes)} values, got {values.shape}")
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        return evaluate(self, t)


def evaluate(interp, t, diagnostics=None):
    """Barycentric evaluation of the interpolant at ``t`` (scalar or array).

    Points outside ``[a, b]`` are evaluated by the same formula; if a dict
    is passed as ``diagnostics``, ``diagnostics["extrapolated"]`` is set.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.isnan(t_arr).any():
        raise ValueError("cannot evaluate an interpolant at NaN")
    flat = np.atleast_1d(t_arr).ravel()
    g = interp.grid
    if diagnostics is not None:
        diagnostics["extrapolated"] = bool(np.any((flat < g.a) | (flat > g.b)))
    diff = flat[:, None] - g.nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = g.bary_weights[None, :] / diff
        out = (c @ interp.values) / c.sum(axis=1)
    hit = exact.any(axis=1)
    if hit.any():
        out[hit] = interp.values[np.argmax(exact[hit], axis=1)]
    out = out.reshape(t_arr.shape)
    return out[()] if out.ndim == 0 else out


def lagrange_basis(nodes, m, t):
    """Product-form Lagrange basis polynomial ``chi_m`` at ``t``; O(M) per call, for checks."""
    others = np.delete(np.asarray(nodes, dtype=float), m)
    return float(np.prod((t - others) / (nodes[m] - others)))


def interp_error_bound(sigma, m, l1_norm):
    """``4 ||g^(sigma+1)||_L1 / (pi sigma (M - sigma)**sigma)`` for Chebyshev interpolation."""
    if sigma < 1 or m <= sigma:
        raise ValueError("need M > sigma >= 1")
    if l1_norm < 0:
        raise ValueError("norm must be nonnegative")
    return 4.0 * l1_norm / (math.pi * sigma * (m - sigma) ** sigma)
