"""Hot loops, in numba and numpy flavours.

Both flavours implement the same per-point arithmetic:

* ``unit_block``: shifted lattice points ``start..stop-1``;
* ``normal_block``: the same points mapped through the normal quantile;
* ``solve_block``: safeguarded Newton for the fibers
  ``y0 -> c0*y0 + off[n] + sum_i exp(a0[i]*y0 + s[n, i])`` at every node,
  accumulating the cdf or pdf contributions per node;
* ``indicator_block``: counts of ``phi <= t`` for the unsmoothed rule, given
  the linear part and the exponents of ``phi`` at each point.

Block sums are compensated: Neumaier in index order (numba) or ``math.fsum``
(numpy). The caller merges blocks in index order.
"""

import math

import numpy as np

from . import gaussian
from ._backend import njit
from .gaussian import _cdf, _pdf, _quantile

ROOT, NO_ROOT, FAIL_ITER, FAIL_BRACKET, FAIL_STALL, FAIL_DERIV = 0, 1, 2, 3, 4, 5
FAIL_REASONS = {
    FAIL_ITER: "Newton iteration limit reached",
    FAIL_BRACKET: "could not bracket the root",
    FAIL_STALL: "bracket collapsed before the tolerance was met",
    FAIL_DERIV: "nonpositive derivative at the root",
}
KIND_CDF, KIND_PDF = 0, 1
CLAMP_EPS = 2.0 ** -53


# ------------------------------------------------------------------ numba


@njit(nogil=True)
def _unit_block_nb(z, n, delta, start, stop):
    d = z.shape[0]
    out = np.empty((stop - start, d))
    for k in range(start, stop):
        for j in range(d):
            v = ((k * z[j]) % n) / n + delta[j]
            out[k - start, j] = v - math.floor(v)
    return out


@njit(nogil=True)
def _normal_block_nb(z, n, delta, start, stop):
    d = z.shape[0]
    out = np.empty((stop - start, d))
    for k in range(start, stop):
        for j in range(d):
            v = ((k * z[j]) % n) / n + delta[j]
            u = v - math.floor(v)
            if u <= 0.0:
                u = CLAMP_EPS
            out[k - start, j] = _quantile(u)
    return out


@njit(nogil=True)
def _fiber_eval(c0, off, a0, s_row, x):
    f = c0 * x + off
    g = c0
    for i in range(a0.shape[0]):
        e = math.exp(a0[i] * x + s_row[i])
        f += e
        g += a0[i] * e
    return f, g


@njit(nogil=True)
def _lower_limit(c0, off, a0, s_row):
    if c0 > 0.0:
        return -math.inf
    low = off
    for i in range(a0.shape[0]):
        if a0[i] == 0.0:
            low += math.exp(s_row[i])
    return low


@njit(nogil=True)
def _solve_one(c0, off, a0, s_row, t, tol, max_newton, max_expand, x0):
    """Returns ``(status, xi, iterations, derivative at xi)``."""
    lower = _lower_limit(c0, off, a0, s_row)
    if t <= lower + tol:
        return NO_ROOT, math.nan, 0, math.nan
    x = x0
    lo = -math.inf
    hi = math.inf
    cap = 1.0
    expansions = 0
    for it in range(max_newton + 1):
        f, g = _fiber_eval(c0, off, a0, s_row, x)
        f -= t
        if abs(f) <= tol:
            return ROOT, x, it, g
        if f < 0.0:
            lo = x
        else:
            hi = x
        if it == max_newton:
            break
        dx = -f / g if (g > 0.0 and math.isfinite(f)) else math.nan
        if f < 0.0 and hi == math.inf:
            if not dx <= cap:
                dx = cap
                cap *= 2.0
                expansions += 1
        elif f >= 0.0 and lo == -math.inf:
            if not dx >= -cap:
                dx = -cap
                cap *= 2.0
                expansions += 1
        if expansions > max_expand:
            return FAIL_BRACKET, x, it, g
        xn = x + dx
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
            if not (lo < xn < hi):
                return FAIL_STALL, x, it, g
        x = xn
    return FAIL_ITER, x, max_newton, math.nan


@njit(nogil=True)
def _solve_block_nb(c0, a0, off, s, nodes, kind, tol, max_newton, max_expand, x0, warm):
    npts = off.shape[0]
    nn = nodes.shape[0]
    sums = np.zeros(nn)
    comps = np.zeros(nn)
    # info: status, point, node, total iterations, roots, no-roots
    info = np.zeros(6, dtype=np.int64)
    for p in range(npts):
        guess = x0
        for m in range(nn):
            status, xi, its, g = _solve_one(c0, off[p], a0, s[p], nodes[m], tol, max_newton, max_expand, guess)
            info[3] += its
            if status == ROOT:
                info[4] += 1
                if kind == KIND_CDF:
                    v = _cdf(xi)
                else:
                    if not g > 0.0:
                        info[0] = FAIL_DERIV
                        info[1] = p
                        info[2] = m
                        return sums, comps, info
                    v = _pdf(xi) / g
                if warm:
                    guess = xi
            elif status == NO_ROOT:
                info[5] += 1
                v = 0.0
            else:
                info[0] = status
                info[1] = p
                info[2] = m
                return sums, comps, info
            # Neumaier
            tsum = sums[m] + v
            if abs(sums[m]) >= abs(v):
                comps[m] += (sums[m] - tsum) + v
            else:
                comps[m] += (v - tsum) + sums[m]
            sums[m] = tsum
    return sums, comps, info


@njit(nogil=True)
def _solve_points_nb(c0, a0, off, s, t, tol, max_newton, max_expand, x0):
    # t holds one target per point
    npts = off.shape[0]
    status = np.empty(npts, dtype=np.int64)
    xi = np.empty(npts)
    its = np.empty(npts, dtype=np.int64)
    deriv = np.empty(npts)
    for p in range(npts):
        status[p], xi[p], its[p], deriv[p] = _solve_one(c0, off[p], a0, s[p], t[p], tol, max_newton, max_expand,
                                                        x0)
    return status, xi, its, deriv


@njit(nogil=True)
def _fiber_eval_points_nb(c0, off, a0, s, x):
    f = np.empty(x.shape[0])
    g = np.empty(x.shape[0])
    for p in range(x.shape[0]):
        f[p], g[p] = _fiber_eval(c0, off[p], a0, s[p], x[p])
    return f, g


@njit(nogil=True)
def _indicator_block_nb(lin_part, s, t):
    count = 0
    for p in range(s.shape[0]):
        phi = lin_part[p]
        for i in range(s.shape[1]):
            phi += math.exp(s[p, i])
        if t - phi >= 0.0:
            count += 1
    return count


# ------------------------------------------------------------------ numpy


def _unit_block_np(z, n, delta, start, stop):
    idx = np.arange(start, stop, dtype=np.int64)
    v = ((idx[:, None] * z[None, :]) % n) / n + delta[None, :]
    return v - np.floor(v)


def _normal_block_np(z, n, delta, start, stop):
    u = _unit_block_np(z, n, delta, start, stop)
    u[u <= 0.0] = CLAMP_EPS
    return gaussian.quantile(u)


def _fiber_eval_np(c0, off, a0, s, x):
    e = np.exp(a0[None, :] * x[:, None] + s)
    return c0 * x + off + e.sum(axis=1), c0 + e @ a0


def _lower_limit_np(c0, off, a0, s):
    if c0 > 0.0:
        return np.full(off.shape, -np.inf)
    flat = a0 == 0.0
    return off + np.exp(s[:, flat]).sum(axis=1)


def _solve_points_np(c0, a0, off, s, t, tol, max_newton, max_expand, x0):
    """Vectorised twin of ``_solve_one`` over all points; ``x0`` may be an array."""
    npts = off.shape[0]
    status = np.full(npts, FAIL_ITER, dtype=np.int64)
    xi = np.full(npts, np.nan)
    its = np.full(npts, max_newton, dtype=np.int64)
    deriv = np.full(npts, np.nan)
    t = np.broadcast_to(np.asarray(t, dtype=float), (npts,))
    noroot = t <= _lower_limit_np(c0, off, a0, s) + tol
    status[noroot] = NO_ROOT
    its[noroot] = 0

    act = np.flatnonzero(~noroot)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (npts,))[act].copy()
    lo = np.full(act.size, -np.inf)
    hi = np.full(act.size, np.inf)
    cap = np.ones(act.size)
    expansions = np.zeros(act.size, dtype=np.int64)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(max_newton + 1):
            if act.size == 0:
                break
            f, g = _fiber_eval_np(c0, off[act], a0, s[act], x)
            f = f - t[act]
            done = np.abs(f) <= tol
            if done.any():
                status[act[done]] = ROOT
                xi[act[done]] = x[done]
                its[act[done]] = it
                deriv[act[done]] = g[done]
            neg = f < 0.0
            lo = np.where(neg, x, lo)
            hi = np.where(neg, hi, x)
            if it == max_newton:
                keep = ~done
                xi[act[keep]] = x[keep]
                break
            dx = np.where((g > 0.0) & np.isfinite(f), -f / g, np.nan)
            up = neg & (hi == np.inf) & ~(dx <= cap)
            down = ~neg & (lo == -np.inf) & ~(dx >= -cap)
            dx = np.where(up, cap, np.where(down, -cap, dx))
            grow = up | down
            cap = np.where(grow, 2.0 * cap, cap)
            expansions = expansions + grow
            failb = (expansions > max_expand) & ~done
            xn = x + dx
            out = ~((lo < xn) & (xn < hi))
            mid = 0.5 * (lo + hi)
            xn = np.where(out, mid, xn)
            stall = out & ~((lo < mid) & (mid < hi)) & ~done & ~failb
            for mask, code in ((failb, FAIL_BRACKET), (stall, FAIL_STALL)):
                if mask.any():
                    status[act[mask]] = code
                    xi[act[mask]] = x[mask]
                    its[act[mask]] = it
                    deriv[act[mask]] = g[mask]
            keep = ~(done | failb | stall)
            act, x, lo, hi, cap, expansions = act[keep], xn[keep], lo[keep], hi[keep], cap[keep], expansions[keep]
    return status, xi, its, deriv


def _solve_block_np(c0, a0, off, s, nodes, kind, tol, max_newton, max_expand, x0, warm):
    npts = off.shape[0]
    nn = nodes.shape[0]
    sums = np.zeros(nn)
    comps = np.zeros(nn)
    info = np.zeros(6, dtype=np.int64)
    guess = np.full(npts, float(x0))
    for m in range(nn):
        status, xi, its, g = _solve_points_np(c0, a0, off, s, nodes[m], tol, max_newton, max_expand, guess)
        info[3] += its.sum()
        root = status == ROOT
        info[4] += root.sum()
        info[5] += (status == NO_ROOT).sum()
        bad = np.flatnonzero((status != ROOT) & (status != NO_ROOT))
        if kind == KIND_PDF:
            badg = np.flatnonzero(root & ~(g > 0.0))
            if badg.size and (not bad.size or badg[0] < bad[0]):
                bad = np.concatenate(([badg[0]], bad))
                status[badg[0]] = FAIL_DERIV
        if bad.size:
            info[0], info[1], info[2] = status[bad[0]], bad[0], m
            return sums, comps, info
        v = np.zeros(npts)
        if kind == KIND_CDF:
            v[root] = gaussian.cdf(xi[root])
        else:
            v[root] = gaussian.pdf(xi[root]) / g[root]
        sums[m] = math.fsum(v)
        if warm:
            guess = np.where(root, xi, guess)
    return sums, comps, info


def _indicator_block_np(lin_part, s, t):
    phi = lin_part + np.exp(s).sum(axis=1)
    return int(np.count_nonzero(t - phi >= 0.0))


KERNELS = {
    "numba": {
        "unit_block": _unit_block_nb,
        "normal_block": _normal_block_nb,
        "solve_block": _solve_block_nb,
        "solve_points": _solve_points_nb,
        "fiber_eval": _fiber_eval_points_nb,
        "indicator_block": _indicator_block_nb,
    },
    "numpy": {
        "unit_block": _unit_block_np,
        "normal_block": _normal_block_np,
        "solve_block": _solve_block_np,
        "solve_points": _solve_points_np,
        "fiber_eval": _fiber_eval_np,
        "indicator_block": _indicator_block_np,
    },
}
