"""Preintegrated cdf and pdf estimators over a (transformed) QMC point set.

For each point ``tau_n`` the fiber ``phi(., tau_n)`` is built once, its
root ``xi(t, tau_n)`` of ``phi = t`` is found by safeguarded Newton, and the
point contributes ``Phi0(xi)`` (cdf) or ``rho0(xi) / D0phi(xi, tau_n)``
(pdf). Points whose fiber never reaches ``t`` contribute 0.

Work is split into fixed-size index blocks; block sums are merged in index
order, so results do not depend on the number of worker threads.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import gaussian
from ._backend import use_numba
from ._kernels import FAIL_REASONS, KERNELS, KIND_CDF, KIND_PDF, NO_ROOT, ROOT
from .lattice import UnitPointSet, transform_points
from .model import ExpAffineModel

#: Points per work block. Fixed so that summation order never depends on workers.
BLOCK_SIZE = 8192

KINDS = {"cdf": KIND_CDF, "pdf": KIND_PDF}


@dataclass(frozen=True)
class RootConfig:
    tol: float = 1e-10
    max_newton: int = 100
    max_bracket_expansions: int = 60
    initial_guess: float = 0.0
    warm_start: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")


@dataclass(frozen=True)
class RootResult:
    status: str  # "root", "noroot" or "failed"
    xi: float = math.nan
    iterations: int = 0
    reason: str = ""

    @property
    def is_root(self):
        return self.status == "root"


class RootFindingError(RuntimeError):
    def __init__(self, reason, point_index, node_index=0, t=None):
        self.reason = reason
        self.point_index = int(point_index)
        self.node_index = int(node_index)
        self.t = t
        super().__init__(f"root finding failed at point {self.point_index}, node {self.node_index}"
                         f"{'' if t is None else f' (t = {t!r})'}: {reason}")


class _Stats:
    """Instrumentation counters (fiber constructions, Newton iterations)."""

    def __init__(self):
        self._lock = threading.Lock()
        self.reset()

    def reset(self):
        self.fibers_built = 0
        self.newton_iterations = 0
        self.roots = 0
        self.no_roots = 0

    def add(self, fibers, iterations, roots, no_roots):
        with self._lock:
            self.fibers_built += int(fibers)
            self.newton_iterations += int(iterations)
            self.roots += int(roots)
            self.no_roots += int(no_roots)


stats = _Stats()


def find_xi(fiber, t, cfg=RootConfig()):
    """Solve ``fiber.eval(y0) = t`` for a monotone fiber.

    Newton steps are capped at a step length that doubles each time the cap
    binds, until the root is bracketed; afterwards any Newton step leaving
    the bracket is replaced by bisection. Returns a :class:`RootResult`.
    """
    lower = fiber.lower_limit
    if t <= lower + cfg.tol:
        return RootResult("noroot")
    if hasattr(fiber, "eval_deriv"):
        evald = fiber.eval_deriv
    else:
        def evald(x):
            return fiber.eval(x), fiber.deriv(x)
    x = float(cfg.initial_guess)
    lo, hi = -math.inf, math.inf
    cap = 1.0
    expansions = 0
    for it in range(cfg.max_newton + 1):
        f, g = evald(x)
        f -= t
        if abs(f) <= cfg.tol:
            return RootResult("root", x, it)
        if f < 0:
            lo = x
        else:
            hi = x
        if it == cfg.max_newton:
            break
        dx = -f / g if (g > 0 and math.isfinite(f)) else math.nan
        if f < 0 and hi == math.inf:
            if not dx <= cap:
                dx, cap, expansions = cap, 2 * cap, expansions + 1
        elif f >= 0 and lo == -math.inf:
            if not dx >= -cap:
                dx, cap, expansions = -cap, 2 * cap, expansions + 1
        if expansions > cfg.max_bracket_expansions:
            return RootResult("failed", x, it, FAIL_REASONS[3])
        xn = x + dx
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
            if not lo < xn < hi:
                return RootResult("failed", x, it, FAIL_REASONS[4])
        x = xn
    return RootResult("failed", x, cfg.max_newton, FAIL_REASONS[2])


# --------------------------------------------------------------- point sets


def _n_points(points):
    return len(points)


def _dim(points):
    return points.d if isinstance(points, UnitPointSet) else np.asarray(points).shape[1]


def _normal_block(points, start, stop, kern):
    if isinstance(points, UnitPointSet):
        return kern["normal_block"](points.z, points.n, points.delta, start, stop)
    return np.asarray(points[start:stop], dtype=float)


def _blocks(n):
    return [(s, min(s + BLOCK_SIZE, n)) for s in range(0, n, BLOCK_SIZE)]


def _map_blocks(fn, n, workers):
    blocks = _blocks(n)
    if workers is None or workers <= 1 or len(blocks) == 1:
        return [fn(s, e) for s, e in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _merge(partials):
    """Neumaier merge of ``(sum, compensation)`` pairs in the given order."""
    total = np.zeros_like(partials[0][0])
    comp = np.zeros_like(total)
    for s, c in partials:
        for v in (s, c):
            t = total + v
            big = np.abs(total) >= np.abs(v)
            comp += np.where(big, (total - t) + v, (v - t) + total)
            total = t
    return total + comp


# -------------------------------------------------------------- estimators


def _exp_affine_parts(model):
    lin, e = model.lin, model.exp_rows
    return float(lin[0]), np.ascontiguousarray(e[:, 0]), lin[1:], model.offset, np.ascontiguousarray(e[:, 1:].T)


def _run_nodes(model, kind, nodes, points, cfg, workers):
    """Sum of per-point contributions at every node, divided by N."""
    k = KINDS[kind]
    nodes = np.ascontiguousarray(nodes, dtype=float)
    n = _n_points(points)
    if _dim(points) != model.dim:
        raise ValueError(f"point set has dimension {_dim(points)}, model needs {model.dim}")
    if not isinstance(model, ExpAffineModel):
        return _run_nodes_generic(model, k, nodes, points, cfg)
    kern = KERNELS["numba" if use_numba() else "numpy"]
    c0, a0, lin_rest, offset, e_rest = _exp_affine_parts(model)

    def work(start, stop):
        y = _normal_block(points, start, stop, kern)
        off = y @ lin_rest + offset
        s = np.ascontiguousarray(y @ e_rest)
        sums, comps, info = kern["solve_block"](c0, a0, off, s, nodes, k, cfg.tol, cfg.max_newton,
                                                cfg.max_bracket_expansions, float(cfg.initial_guess),
                                                bool(cfg.warm_start))
        stats.add(stop - start, info[3], info[4], info[5])
        if info[0] != ROOT:
            m = int(info[2])
            raise RootFindingError(FAIL_REASONS[int(info[0])], start + info[1], m, float(nodes[m]))
        return sums, comps

    return _merge(_map_blocks(work, n, workers)) / n


def _run_nodes_generic(model, k, nodes, points, cfg):
    n = _n_points(points)
    acc = [[] for _ in nodes]
    for start, stop in _blocks(n):
        if isinstance(points, UnitPointSet):
            y = transform_points(points.block(start, stop))
        else:
            y = np.asarray(points[start:stop], dtype=float)
        for p in range(stop - start):
            fiber = model.fiber(y[p])
            stats.add(1, 0, 0, 0)
            guess = cfg.initial_guess
            for m, t in enumerate(nodes):
                res = find_xi(fiber, t, RootConfig(cfg.tol, cfg.max_newton, cfg.max_bracket_expansions, guess))
                if res.status == "failed":
                    raise RootFindingError(res.reason, start + p, m, float(t))
                if res.status == "noroot":
                    acc[m].append(0.0)
                    continue
                if k == KIND_CDF:
                    acc[m].append(float(gaussian.cdf(res.xi)))
                else:
                    g = fiber.deriv(res.xi)
                    if not g > 0:
                        raise RootFindingError(FAIL_REASONS[5], start + p, m, float(t))
                    acc[m].append(float(gaussian.pdf(res.xi)) / g)
                if cfg.warm_start:
                    guess = res.xi
    return np.array([math.fsum(a) for a in acc]) / n


def pointwise_cdf(model, t, points, cfg=RootConfig(), workers=1):
    """QMC estimate of ``P(phi(Y) <= t)`` with preintegration over ``y0``."""
    return float(_run_nodes(model, "cdf", [t], points, cfg, workers)[0])


def pointwise_pdf(model, t, points, cfg=RootConfig(), workers=1):
    """QMC estimate of the density of ``phi(Y)`` at ``t`` with preintegration over ``y0``."""
    return float(_run_nodes(model, "pdf", [t], points, cfg, workers)[0])


def batch_curve(model, kind, nodes, points, cfg=RootConfig(), workers=1):
    """Estimates at all ``nodes`` sharing one fiber construction per point.

    ``points`` may be a single point set (returns shape ``(M+1,)``) or a
    sequence of them, e.g. one per shift (returns ``(R, M+1)``). The root
    search at node ``m+1`` starts from the root found at node ``m``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be 'cdf' or 'pdf', not {kind!r}")
    if isinstance(points, (list, tuple)):
        return np.array([_run_nodes(model, kind, nodes, p, cfg, workers) for p in points])
    return _run_nodes(model, kind, nodes, points, cfg, workers)


def solve_fibers(model, y, t, cfg=RootConfig()):
    """Root-find on the fibers ``phi(., y[n])`` for many ``y`` at once.

    ``t`` is a scalar or one target per row of ``y``. Returns arrays ``(status, xi, iterations, residual)`` with status codes
    0 = root, 1 = no root, >= 2 failure (see ``FAIL_REASONS``).
    """
    kern = KERNELS["numba" if use_numba() else "numpy"]
    c0, a0, lin_rest, offset, e_rest = _exp_affine_parts(model)
    y = np.asarray(y, dtype=float)
    off = y @ lin_rest + offset
    s = np.ascontiguousarray(y @ e_rest)
    t = np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=float), off.shape))
    status, xi, its, _ = kern["solve_points"](c0, a0, off, s, t, cfg.tol, cfg.max_newton,
                                              cfg.max_bracket_expansions, float(cfg.initial_guess))
    resid = np.full(len(xi), np.nan)
    ok = status == ROOT
    # same evaluation order as the solver's own stopping test
    f, _ = kern["fiber_eval"](c0, off[ok], a0, np.ascontiguousarray(s[ok]), np.ascontiguousarray(xi[ok]))
    resid[ok] = np.abs(f - t[ok])
    return status, xi, its, resid


def plain_indicator_mean(model, t, points, workers=1):
    """Unsmoothed rule: mean of ``ind(t - phi(tau_n))`` over a ``(d+1)``-dimensional point set."""
    n = _n_points(points)
    if _dim(points) != model.dim + 1:
        raise ValueError(f"plain rule needs a {model.dim + 1}-dimensional point set")
    kern = KERNELS["numba" if use_numba() else "numpy"]
    if isinstance(model, ExpAffineModel):
        e_t = np.ascontiguousarray(model.exp_rows.T)

        def work(start, stop):
            y = _normal_block(points, start, stop, kern)
            return kern["indicator_block"](y @ model.lin + model.offset, np.ascontiguousarray(y @ e_t), float(t))
    else:
        def work(start, stop):
            y = _normal_block(points, start, stop, kern)
            return int(np.count_nonzero(t - model.phi_full(y) >= 0.0))

    return sum(_map_blocks(work, n, workers)) / n


__all__ = [
    "BLOCK_SIZE", "RootConfig", "RootResult", "RootFindingError", "find_xi", "pointwise_cdf",
    "pointwise_pdf", "batch_curve", "solve_fibers", "plain_indicator_mean", "stats", "NO_ROOT", "ROOT",
]
