"""Experiments: shift-averaged estimates, baselines, curves, RMISE and timing.

Plain Monte Carlo has no pointwise density estimator (the integrand is a
Dirac delta), so only cdf baselines are offered; pdf studies run the
preintegrated lattice rule alone.
"""

import csv
import hashlib
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import lattice
from ._backend import backend_name
from .interp import Interpolant, chebyshev_grid, evaluate
from .preintegration import (
    RootConfig, RootFindingError, batch_curve, plain_indicator_mean, pointwise_cdf, pointwise_pdf,
)

METHODS = ("mc", "qmc_plain", "qmc_preint")
MC_PDF_UNAVAILABLE = "plain Monte Carlo cannot estimate a density pointwise"


@dataclass
class PointEstimate:
    per_shift: np.ndarray
    mean: float
    stderr: float
    wall_time: float
    method: str = "qmc_preint"
    n: int = 0

    @property
    def rel_rmse(self):
        return self.stderr / abs(self.mean) if self.mean != 0 else math.nan


def _summarise(values, wall, method, n):
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    return PointEstimate(values, mean, stderr, wall, method, n)


def estimate_point(model, kind, t, z, n, r, seed, cfg=RootConfig(), workers=1):
    """Preintegrated lattice estimate of the cdf or pdf at ``t``, averaged over ``r`` shifts."""
    start = time.perf_counter()
    fn = {"cdf": pointwise_cdf, "pdf": pointwise_pdf}[kind]
    vals = [fn(model, t, lattice.lattice_points(z, n, model.dim, s), cfg, workers)
            for s in lattice.draw_shifts(r, model.dim, seed)]
    return _summarise(vals, time.perf_counter() - start, "qmc_preint", n)


def estimate_plain(model, t, z, n, r, seed, workers=1):
    """Lattice rule applied directly to ``ind(t - phi)`` in ``d+1`` dimensions."""
    start = time.perf_counter()
    d1 = model.dim + 1
    vals = [plain_indicator_mean(model, t, lattice.lattice_points(z, n, d1, s), workers)
            for s in lattice.draw_shifts(r, d1, seed)]
    return _summarise(vals, time.perf_counter() - start, "qmc_plain", n)


def mc_baseline(model, kind, t, total_samples, seed, chunk=1 << 16):
    """Plain Monte Carlo estimate of ``P(phi(Y) <= t)`` from ``total_samples`` draws."""
    if kind != "cdf":
        raise NotImplementedError(MC_PDF_UNAVAILABLE)
    if total_samples < 2:
        raise ValueError("need at least two samples")
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    hits = 0
    left = total_samples
    while left:
        k = min(chunk, left)
        y = rng.standard_normal((k, model.dim + 1))
        hits += int(np.count_nonzero(t - model.phi_full(y) >= 0.0))
        left -= k
    p = hits / total_samples
    # sample std of a 0/1 sample
    std = math.sqrt(max(p * (1 - p), 0.0) * total_samples / (total_samples - 1))
    est = PointEstimate(np.array([p]), p, std / math.sqrt(total_samples), 0.0, "mc", total_samples)
    est.wall_time = time.perf_counter() - start
    return est


def pilot_quantiles(model, probs, samples=1 << 17, seed=12345):
    """Empirical quantiles of ``phi(Y)`` from a Monte Carlo pilot run."""
    y = np.random.default_rng(seed).standard_normal((samples, model.dim + 1))
    return np.quantile(model.phi_full(y), probs)


# ------------------------------------------------------------------ curves


@dataclass
class CurveEstimate:
    interpolant: Interpolant
    per_shift_interpolants: list
    kind: str
    n: int
    m: int
    seed: int
    node_values: np.ndarray = field(repr=False)
    wall_time: float = 0.0

    @property
    def grid(self):
        return self.interpolant.grid

    def __call__(self, t):
        return evaluate(self.interpolant, t)


def estimate_curve(model, kind, a, b, m, z, n, r, seed, cfg=RootConfig(), workers=1):
    """Shift-averaged node estimates on a Chebyshev grid and their interpolants."""
    if m < 1:
        raise ValueError("interpolation degree must be at least 1")
    start = time.perf_counter()
    grid = chebyshev_grid(a, b, m)
    pts = [lattice.lattice_points(z, n, model.dim, s) for s in lattice.draw_shifts(r, model.dim, seed)]
    vals = batch_curve(model, kind, grid.nodes, pts, cfg, workers)
    mean = vals.mean(axis=0)
    return CurveEstimate(Interpolant(grid, mean), [Interpolant(grid, v) for v in vals], kind, n, m,
                         seed, vals, time.perf_counter() - start)


def _gauss_legendre(a, b, quad_points, order=16):
    panels = max(1, quad_points // order)
    order = max(1, quad_points // panels)
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def estimate_rmise(curve, reference, quad_points=256):
    """Root mean integrated square error of a curve estimate.

    For each shift ``r`` the squared L2 distance on ``[a, b]`` between the
    per-shift interpolant and the reference's mean interpolant is computed
    with composite Gauss-Legendre quadrature; the square root of the mean
    over shifts is returned. An estimate compared against itself has zero
    error by definition.
    """
    g, h = curve.grid, reference.grid
    if (g.a, g.b) != (h.a, h.b):
        raise ValueError(f"interval mismatch: [{g.a}, {g.b}] vs [{h.a}, {h.b}]")
    if curve is reference:
        return 0.0
    x, w = _gauss_legendre(g.a, g.b, quad_points)
    ref = evaluate(reference.interpolant, x)
    errs = [float(w @ (evaluate(p, x) - ref) ** 2) for p in curve.per_shift_interpolants]
    return math.sqrt(sum(errs) / len(errs))


def default_degree(n):
    """``ceil(N**(1/4)) + 10``: interpolation degree coupled to the rule size."""
    root = round(n ** 0.25)
    return (root if root ** 4 >= n else math.ceil(n ** 0.25)) + 10


# ----------------------------------------------------------------- studies


@dataclass
class StudyConfig:
    model: object
    kind: str = "cdf"
    t: float = None
    interval: tuple = None
    n_list: tuple = tuple(2 ** k for k in range(10, 17))
    r: int = 8
    seed: int = 0
    methods: tuple = ("mc", "qmc_plain", "qmc_preint")
    z: object = None
    cfg: RootConfig = RootConfig()
    reference: tuple = None  # (N, M, R) for curve studies
    quad_points: int = 256
    slope_min_n: int = 2 ** 12
    workers: int = 1
    description: str = ""

    def __post_init__(self):
        if (self.t is None) == (self.interval is None):
            raise ValueError("give exactly one of t (point study) or interval (curve study)")
        ns = list(self.n_list)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("N values must be strictly increasing")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.z is None:
            self.z = lattice.builtin_vector()


@dataclass
class ReportRow:
    method: str
    n: int
    m: int
    where: str
    estimate: float
    stderr: float
    rel_rmse: float
    rmise: float
    wall_time: float
    note: str = ""


def fit_slope(ns, errs):
    """Least-squares slope of ``log2(err)`` against ``log2(N)``; NaN if fewer than two usable rows."""
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = np.isfinite(errs) & (errs > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log2(ns[ok]), np.log2(errs[ok]), 1)[0])


@dataclass
class ConvergenceReport:
    rows: list
    slopes: dict  # method -> (slope or nan, window string, "exact" flag)
    meta: dict

    def rows_for(self, method):
        return [r for r in self.rows if r.method == method]

    def slope(self, method):
        return self.slopes[method][0]

    def to_csv(self, fh=None):
        """Write the report; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        out.write(_meta_line("convergence", self.meta))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["method", "N", "M", "t_or_interval", "estimate", "stderr", "rel_rmse", "rmise",
                    "slope_window", "wall_time_s"])
        for r in self.rows:
            w.writerow([r.method, r.n, r.m if r.m else "", r.where, _f(r.estimate), _f(r.stderr),
                        _f(r.rel_rmse), _f(r.rmise), self.slopes.get(r.method, (None, ""))[1], _f(r.wall_time)])
        for method, (slope, window, exact) in self.slopes.items():
            out.write(f"# slope,{method},{'exact' if exact else _f(slope)},{window}\n")
        for r in self.rows:
            if r.note:
                out.write(f"# note,{r.method},{r.n},{r.note}\n")
        return out.getvalue() if fh is None else None


def _f(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".17g")


def config_hash(meta):
    items = sorted((k, str(v)) for k, v in meta.items())
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]


def _meta_line(what, meta):
    body = ",".join(f"{k}={v}" for k, v in sorted(meta.items()))
    return f"# preint {what} config_hash={config_hash(meta)} {body}\n"


def _point_row(study, method, n):
    where = _f(study.t)
    try:
        if method == "mc":
            if study.kind != "cdf":
                return ReportRow(method, n, 0, where, math.nan, math.nan, math.nan, math.nan, 0.0,
                                 MC_PDF_UNAVAILABLE)
            est = mc_baseline(study.model, "cdf", study.t, study.r * n, study.seed + n)
        elif method == "qmc_plain":
            if study.kind != "cdf":
                return ReportRow(method, n, 0, where, math.nan, math.nan, math.nan, math.nan, 0.0,
                                 "unsmoothed rule has no density estimator")
            est = estimate_plain(study.model, study.t, study.z, n, study.r, study.seed, study.workers)
        else:
            est = estimate_point(study.model, study.kind, study.t, study.z, n, study.r, study.seed,
                                 study.cfg, study.workers)
    except RootFindingError as exc:
        return ReportRow(method, n, 0, where, math.nan, math.nan, math.nan, math.nan, 0.0, f"failed: {exc}")
    return ReportRow(method, n, 0, where, est.mean, est.stderr, est.rel_rmse, math.nan, est.wall_time)


def convergence_study(study):
    """One row per (method, N); log-log slopes fitted on rows with ``N >= slope_min_n``.

    Point studies (``t`` set) report relative RMSE estimated from the shift
    sample; curve studies (``interval`` set) report the RMISE against a
    reference curve with ``M = ceil(N**(1/4)) + 10``.
    """
    meta = {"kind": study.kind, "seed": study.seed, "R": study.r, "lattice": study.z.source,
            "model": study.description or type(study.model).__name__, "tol": study.cfg.tol}
    rows = []
    if study.interval is None:
        meta["t"] = study.t
        for method in study.methods:
            for n in study.n_list:
                rows.append(_point_row(study, method, n))
        err_of = lambda r: r.rel_rmse  # noqa: E731
    else:
        a, b = study.interval
        n_ref, m_ref, r_ref = study.reference or (4 * max(study.n_list), 42, 16)
        meta.update(interval=f"[{_f(a)};{_f(b)}]", reference=f"N={n_ref};M={m_ref};R={r_ref}")
        ref = estimate_curve(study.model, study.kind, a, b, m_ref, study.z, n_ref, r_ref,
                             study.seed + 7919, study.cfg, study.workers)
        where = f"[{_f(a)};{_f(b)}]"
        for method in study.methods:
            for n in study.n_list:
                m = default_degree(n)
                if method != "qmc_preint":
                    rows.append(ReportRow(method, n, m, where, math.nan, math.nan, math.nan, math.nan, 0.0,
                                          "curve estimates need the preintegrated rule"))
                    continue
                try:
                    cur = estimate_curve(study.model, study.kind, a, b, m, study.z, n, study.r,
                                         study.seed, study.cfg, study.workers)
                except RootFindingError as exc:
                    rows.append(ReportRow(method, n, m, where, math.nan, math.nan, math.nan, math.nan, 0.0,
                                          f"failed: {exc}"))
                    continue
                mid = 0.5 * (a + b)
                per = np.array([p(mid) for p in cur.per_shift_interpolants])
                stderr = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else math.nan
                val = float(cur(mid))
                rows.append(ReportRow(method, n, m, where, val, stderr,
                                      stderr / abs(val) if val else math.nan,
                                      estimate_rmise(cur, ref, study.quad_points), cur.wall_time))
        err_of = lambda r: r.rmise  # noqa: E731
    slopes = {}
    for method in study.methods:
        sel = [r for r in rows if r.method == method and r.n >= study.slope_min_n]
        errs = [err_of(r) for r in sel]
        window = f"{sel[0].n}-{sel[-1].n}" if sel else ""
        exact = bool(sel) and all(e == 0.0 for e in errs)
        slopes[method] = (fit_slope([r.n for r in sel], errs), window, exact)
    return ConvergenceReport(rows, slopes, meta)


# ------------------------------------------------------------------ timing


@dataclass
class TimingRow:
    n: int
    qmc_cdf: float
    preint_cdf: float
    preint_pdf: float

    @property
    def increase_factor(self):
        return self.preint_cdf / self.qmc_cdf


@dataclass
class TimingReport:
    rows: list
    meta: dict

    def to_csv(self, fh=None):
        out = io.StringIO() if fh is None else fh
        out.write(_meta_line("timing", self.meta))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["N", "qmc_cdf_s", "preint_cdf_s", "preint_pdf_s", "increase_factor"])
        for r in self.rows:
            w.writerow([r.n, _f(r.qmc_cdf), _f(r.preint_cdf), _f(r.preint_pdf), _f(r.increase_factor)])
        return out.getvalue() if fh is None else None


def timing_study(model, t, n_list, seed, z=None, cfg=RootConfig(), repeats=3):
    """Single-worker, single-shift wall times of the unsmoothed and preintegrated rules.

    Each entry is the best of ``repeats`` runs. Repeats are taken round-robin
    over every (N, method) pair, after a warm-up that triggers any JIT
    compilation, so slow drift in machine speed hits all rows alike.
    """
    z = z or lattice.builtin_vector()
    d = model.dim
    shift_pre = lattice.draw_shifts(1, d, seed)[0]
    shift_plain = lattice.draw_shifts(1, d + 1, seed)[0]

    def runs(n):
        pre = lattice.lattice_points(z, n, d, shift_pre)
        plain = lattice.lattice_points(z, n, d + 1, shift_plain)
        return (lambda: plain_indicator_mean(model, t, plain, 1),
                lambda: pointwise_cdf(model, t, pre, cfg, 1),
                lambda: pointwise_pdf(model, t, pre, cfg, 1))

    jobs = {n: runs(n) for n in n_list}
    for fn in jobs[min(n_list)]:
        fn()
    best = {n: [math.inf] * 3 for n in n_list}
    for _ in range(repeats):
        for n in n_list:
            for k, fn in enumerate(jobs[n]):
                start = time.perf_counter()
                fn()
                best[n][k] = min(best[n][k], time.perf_counter() - start)
    rows = [TimingRow(n, *best[n]) for n in n_list]
    meta = {"t": t, "seed": seed, "lattice": z.source, "backend": backend_name(), "workers": 1,
            "repeats": repeats, "dim": d + 1}
    return TimingReport(rows, meta)
