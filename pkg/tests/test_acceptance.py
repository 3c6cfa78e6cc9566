"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtime limits are the contractual ones; nothing here is
tuned to the outcome. Seeds are fixed up front (0 unless stated).
"""

import time

import numpy as np

from conftest import ACCEPTANCE
from oracles import two_lognormal_cdf, two_lognormal_pdf
from preint import gaussian, harness as H, lattice
from preint import preintegration as Q
from preint.interp import Interpolant, chebyshev_grid
from preint.model import CovarianceSpec, linear_gaussian_model, lognormal_from_covariance, lognormal_sum_model, \
    pca_factorize
from preint.preintegration import RootConfig

Z = lattice.builtin_vector()
EQUICORR16 = "equicorr:16:1:0.5"


def report(number, title, checks, elapsed, limit):
    """Record and print the verdict for one criterion, then assert it."""
    checks = list(checks) + [(f"runtime {elapsed:.1f}s < {limit}s", elapsed < limit)]
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{name} [{'ok' if c else 'FAILED'}]" for name, c in checks)
    line = f"criterion {number} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    ACCEPTANCE.append(line)
    print("\n" + line)
    assert ok, line


def test_criterion_1_exactness_oracle():
    start = time.perf_counter()
    m = linear_gaussian_model([2.0, 0.0], 1.0)
    target_pdf = gaussian.pdf(0.0) / 2.0
    worst_cdf = worst_pdf = 0.0
    for n in (1, 7, 64, 1024, 4096):
        for seed in range(3):
            pts = lattice.lattice_points(Z, n, 1, lattice.draw_shifts(1, 1, seed)[0])
            worst_cdf = max(worst_cdf, abs(Q.pointwise_cdf(m, 1.0, pts) - 0.5))
            worst_pdf = max(worst_pdf, abs(Q.pointwise_pdf(m, 1.0, pts) - target_pdf))
    elapsed = time.perf_counter() - start
    report(1, "linear model c=(2,0), b=1, t=1", [
        (f"|cdf - 0.5| = {worst_cdf:.1e} <= 1e-12", worst_cdf <= 1e-12),
        (f"|pdf - rho(0)/2| = {worst_pdf:.1e} <= 1e-12", worst_pdf <= 1e-12),
    ], elapsed, 1.0)


def test_criterion_2_convergence_rates():
    start = time.perf_counter()
    m = lognormal_from_covariance(EQUICORR16)
    t = float(H.pilot_quantiles(m, [0.9])[0])
    study = H.StudyConfig(model=m, t=t, n_list=tuple(2 ** k for k in range(10, 17)), r=8, seed=0,
                          methods=("mc", "qmc_preint"), z=Z)
    rep = H.convergence_study(study)
    elapsed = time.perf_counter() - start
    s_pre, s_mc = rep.slope("qmc_preint"), rep.slope("mc")
    mc_last = rep.rows_for("mc")[-1].stderr
    pre_last = rep.rows_for("qmc_preint")[-1].stderr
    gain = mc_last / pre_last
    report(2, f"equicorrelated d+1=16, t={t:.3f} (0.9 quantile), N=2^10..2^16, R=8", [
        (f"qmc_preint slope {s_pre:.3f} <= -0.80", s_pre <= -0.80),
        (f"mc slope {s_mc:.3f} in [-0.65, -0.35]", -0.65 <= s_mc <= -0.35),
        (f"RMSE ratio mc/qmc_preint at 2^16 = {gain:.1f} >= 10", gain >= 10),
    ], elapsed, 300)


def test_criterion_3_quadrature_oracle():
    start = time.perf_counter()
    m = lognormal_sum_model(np.eye(2))
    cdf = H.estimate_point(m, "cdf", 2.0, Z, 2 ** 14, 8, 0)
    pdf = H.estimate_point(m, "pdf", 2.0, Z, 2 ** 14, 8, 0)
    f_ref, p_ref = two_lognormal_cdf(2.0), two_lognormal_pdf(2.0)
    elapsed = time.perf_counter() - start
    dc, dp = abs(cdf.mean - f_ref), abs(pdf.mean - p_ref)
    report(3, "lognormal d+1=2, identity covariance, t=2, N=2^14", [
        (f"|cdf - oracle| = {dc:.2e} <= 3*stderr = {3 * cdf.stderr:.2e}", dc <= 3 * cdf.stderr),
        (f"|pdf - oracle| = {dp:.2e} <= 3*stderr = {3 * pdf.stderr:.2e}", dp <= 3 * pdf.stderr),
    ], elapsed, 30)


def test_criterion_4_derivative_relation():
    start = time.perf_counter()
    m = lognormal_from_covariance(EQUICORR16)
    pts = lattice.lattice_points(Z, 2 ** 12, m.dim, lattice.draw_shifts(1, m.dim, 0)[0])
    h = 1e-3
    worst = 0.0
    for t in H.pilot_quantiles(m, [0.05, 0.25, 0.5, 0.75, 0.9, 0.99]):
        fd = (Q.pointwise_cdf(m, t + h, pts) - Q.pointwise_cdf(m, t - h, pts)) / (2 * h)
        worst = max(worst, abs(fd - Q.pointwise_pdf(m, t, pts)))
    elapsed = time.perf_counter() - start
    report(4, "d+1=16 lognormal, h=1e-3, N=2^12, one shift, six t values", [
        (f"max |central difference - pdf| = {worst:.1e} <= 1e-3", worst <= 1e-3),
    ], elapsed, 30)


def test_criterion_5_rmise_coupling():
    start = time.perf_counter()
    m = lognormal_from_covariance(EQUICORR16)
    a, b = (float(x) for x in H.pilot_quantiles(m, [0.1, 0.9]))
    study = H.StudyConfig(model=m, interval=(a, b), n_list=tuple(2 ** k for k in range(10, 16)), r=8, seed=0,
                          methods=("qmc_preint",), z=Z, reference=(2 ** 17, 42, 8))
    rep = H.convergence_study(study)
    elapsed = time.perf_counter() - start
    slope = rep.slope("qmc_preint")
    rm = ", ".join(f"{r.rmise:.1e}" for r in rep.rows)
    report(5, f"cdf curve on [{a:.2f}, {b:.2f}], M=ceil(N^1/4)+10, reference (2^17, 42, 8)", [
        (f"RMISE slope {slope:.3f} <= -0.75 (RMISE {rm})", slope <= -0.75),
    ], elapsed, 600)


def test_criterion_6_timing():
    start = time.perf_counter()
    m = lognormal_from_covariance("equicorr:32:1:0.5")
    t = float(H.pilot_quantiles(m, [0.5])[0])
    rep = H.timing_study(m, t, [2 ** k for k in range(13, 17)], 0, Z, repeats=7)
    elapsed = time.perf_counter() - start
    factors = [r.increase_factor for r in rep.rows]
    checks = [(f"increase factors {', '.join(f'{f:.2f}' for f in factors)} in [1, 4]",
               all(1.0 <= f <= 4.0 for f in factors))]
    for col in ("qmc_cdf", "preint_cdf", "preint_pdf"):
        ratios = [getattr(b, col) / getattr(a, col) for a, b in zip(rep.rows, rep.rows[1:])]
        checks.append((f"{col} doubling ratios {', '.join(f'{x:.2f}' for x in ratios)} in [1.6, 2.6]",
                       all(1.6 <= x <= 2.6 for x in ratios)))
    report(6, "single worker, d+1=32, N=2^13..2^16", checks, elapsed, 300)


def test_criterion_7_root_finder():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    statuses, resids, iters = [], [], []
    for spec in ("equicorr:8:1:0.5", "equicorr:32:1:0.5", "recipmax:8", "recipmax:32"):
        m = lognormal_from_covariance(spec)
        lo, hi = H.pilot_quantiles(m, [0.01, 0.99])
        y = rng.standard_normal((10 ** 5, m.dim))
        t = rng.uniform(lo, hi, len(y))
        status, _, its, resid = Q.solve_fibers(m, y, t, RootConfig(tol=1e-10))
        statuses.append(status)
        resids.append(resid)
        iters.append(its)
    elapsed = time.perf_counter() - start
    status, resid, its = np.concatenate(statuses), np.concatenate(resids), np.concatenate(iters)
    frac = np.mean(status == 0)
    report(7, "4 x 10^5 lognormal fibers, d+1 in {8, 32}, t uniform on [q0.01, q0.99]", [
        (f"Root status {100 * frac:.3f}% == 100%", frac == 1.0),
        (f"max residual {np.nanmax(resid):.2e} <= 1e-10", np.nanmax(resid) <= 1e-10),
        (f"median Newton iterations {np.median(its):g} <= 8", np.median(its) <= 8),
    ], elapsed, 60)


def test_criterion_8_invariant_suites():
    start = time.perf_counter()
    checks = []
    rng = np.random.default_rng(8)

    # lattice: closure under addition mod 1 and full 1-D projections
    ok = True
    for n in (4, 8, 16):
        z = lattice.GeneratingVector(tuple(int(c) for c in rng.integers(1, n, 3)), n)
        pts = lattice.lattice_points(z, n, 3, np.zeros(3)).block(0, n)
        keys = {tuple(p) for p in pts}
        ok &= all(tuple((p + q) % 1.0) in keys for p in pts for q in pts)
    checks.append(("lattice group structure", ok))

    y = np.linspace(-6, 6, 10_000)
    err = np.max(np.abs(gaussian.quantile(gaussian.cdf(y)) - y))
    checks.append((f"Gaussian round trip {err:.1e} <= 1e-8", err <= 1e-8))

    worst = 0.0
    for spec in ("equicorr:16:1:0.5", "equicorr:64:1:0.5", "recipmax:16", "recipmax:64"):
        sigma = CovarianceSpec.parse(spec).matrix()
        a = pca_factorize(sigma)
        worst = max(worst, float(np.max(np.abs(a @ a.T - sigma))))
    checks.append((f"PCA residual {worst:.1e} <= 1e-10", worst <= 1e-10))

    worst = 0.0
    for m_deg in (5, 20, 50):
        g = chebyshev_grid(-3.0, 7.0, m_deg)
        coef = rng.standard_normal(m_deg + 1)
        poly = np.polynomial.Polynomial(coef, domain=[-3, 7])
        ts = rng.uniform(-3, 7, 1000)
        scale = np.max(np.abs(poly(np.linspace(-3, 7, 2001))))
        worst = max(worst, np.max(np.abs(Interpolant(g, poly(g.nodes))(ts) - poly(ts))) / scale)
    checks.append((f"polynomial reproduction {worst:.1e} <= 1e-11", worst <= 1e-11))

    m = lognormal_from_covariance(EQUICORR16)
    lo, hi = H.pilot_quantiles(m, [0.001, 0.999], samples=20_000)
    nodes = np.sort(chebyshev_grid(lo, hi, 40).nodes)
    pts = lattice.lattice_points(Z, 2 ** 12, m.dim, lattice.draw_shifts(1, m.dim, 0)[0])
    cdf = Q.batch_curve(m, "cdf", nodes, pts)
    pdf = Q.batch_curve(m, "pdf", nodes, pts)
    checks.append(("cdf monotone on node grid", bool(np.all(np.diff(cdf) >= 0))))
    checks.append(("cdf in [0, 1]", bool(np.all((cdf >= 0) & (cdf <= 1)))))
    checks.append(("pdf finite and >= 0", bool(np.all(np.isfinite(pdf)) and np.all(pdf >= 0))))

    big = lattice.UnitPointSet(Z.as_array(m.dim), 3 * Q.BLOCK_SIZE + 5, pts.delta)
    ref = Q.batch_curve(m, "pdf", nodes[::8], big, workers=1)
    same = all(np.array_equal(Q.batch_curve(m, "pdf", nodes[::8], big, workers=w), ref) for w in (2, 4))
    checks.append(("bitwise determinism under worker count 1/2/4", same))
    elapsed = time.perf_counter() - start
    report(8, "invariant suites", checks, elapsed, 120)
