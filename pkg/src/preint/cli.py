"""Command line front end.

    preint point    --t 60 --kind cdf ...        single estimate, one CSV row
    preint curve    --interval 40 100 --m 21 ...  node values and a sampled curve
    preint converge --n-list 1024,...,65536 ...   convergence table (CSV)
    preint time     --n-list 8192,...,65536 ...   timing table (CSV)
    preint check    ...                           invariant checks on a model

Options may also come from ``--config FILE`` (``key = value`` lines, keys as
the long option names); flags given on the command line win. ``PREINT_SEED``
replaces the seed from the config file or the default, but not ``--seed``.

Exit codes: 0 success, 1 failed checks, 2 configuration error, 3 numerical
failure.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import harness, lattice
from .interp import chebyshev_grid
from .lattice import LatticeError
from .model import CovarianceSpec, LinearGaussianModel, ModelError, lognormal_from_covariance, pca_factorize
from .preintegration import RootConfig, RootFindingError, batch_curve, solve_fibers

EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3


class ConfigError(Exception):
    pass


def _int_list(text):
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)


def _float_list(text):
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)


def _common(p):
    p.add_argument("--config", help="key = value file with defaults for any option")
    p.add_argument("--model", choices=["lognormal", "linear"], default="lognormal")
    p.add_argument("--cov", default="equicorr:16:1:0.5",
                   help="equicorr:<dim>:<diag>:<offdiag>, recipmax:<dim> or a covariance file")
    p.add_argument("--coeffs", type=_float_list, default=(1.0, 1.0), help="linear model coefficients c0,c1,...")
    p.add_argument("--offset", type=float, default=0.0, help="linear model offset b")
    p.add_argument("--kind", choices=["cdf", "pdf"], default="cdf")
    p.add_argument("--r", type=int, default=8, help="number of random shifts")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lattice", default=f"builtin:{lattice.DEFAULT_VECTOR}",
                   help="vector file path, builtin:<name> or korobov:<a>")
    p.add_argument("--tol", type=float, default=1e-10, help="root residual tolerance")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", "-o", default="-", help="output CSV path ('-' for stdout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="preint", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("point", help="pointwise estimate at t")
    _common(p)
    p.add_argument("--t", type=float, required=False)
    p.add_argument("--n", type=int, default=2 ** 14)

    p = sub.add_parser("curve", help="interpolated estimate on [a, b]")
    _common(p)
    p.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
    p.add_argument("--m", type=int, default=21, help="interpolation degree")
    p.add_argument("--n", type=int, default=2 ** 14)
    p.add_argument("--samples", type=int, default=201, help="equispaced sample points of the curve")

    p = sub.add_parser("converge", help="convergence study")
    _common(p)
    p.add_argument("--t", type=float, help="point study at t")
    p.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"), help="curve (RMISE) study on [a, b]")
    p.add_argument("--n-list", type=_int_list, default=tuple(2 ** k for k in range(10, 17)))
    p.add_argument("--methods", default="mc,qmc_plain,qmc_preint")
    p.add_argument("--reference", type=_int_list, default=None, help="reference N,M,R for curve studies")

    p = sub.add_parser("time", help="timing study (single worker)")
    _common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--n-list", type=_int_list, default=tuple(2 ** k for k in range(13, 17)))
    p.add_argument("--repeats", type=int, default=3)

    p = sub.add_parser("check", help="run invariant checks on a model")
    _common(p)
    p.add_argument("--t-range", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("--samples", type=int, default=2000)
    return ap


def _read_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    seed_flag = args.seed
    if args.config:
        values = _read_config(args.config)
        subs = ap._subparsers._group_actions[0].choices
        everywhere = {a.dest for p in subs.values() for a in p._actions}
        unknown = set(values) - everywhere
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        sub = subs[args.command]
        known = {a.dest: a for a in sub._actions}
        # one file may serve several subcommands; keys for the others are ignored
        values = {k: v for k, v in values.items() if k in known}
        for key, value in values.items():
            action = known[key]
            if action.nargs in (2, "+"):
                values[key] = value.split()
        sub.set_defaults(**values)
        args = ap.parse_args(argv)
        for key in values:
            v = getattr(args, key)
            if isinstance(v, list) and known[key].type is not None:
                setattr(args, key, [known[key].type(x) if isinstance(x, str) else x for x in v])
    env = os.environ.get("PREINT_SEED")
    if seed_flag is None and env:
        args.seed = int(env)
    elif args.seed is None:
        args.seed = 0
    else:
        args.seed = int(args.seed)
    return args


# ------------------------------------------------------------------ setup


def make_model(args):
    if args.model == "linear":
        return LinearGaussianModel(np.array(args.coeffs), args.offset), f"linear:{list(args.coeffs)}:{args.offset:g}"
    spec = CovarianceSpec.parse(args.cov)
    return lognormal_from_covariance(spec), f"lognormal:{spec}"


def make_vector(text):
    if text.startswith("builtin:"):
        return lattice.builtin_vector(text[8:])
    if text.startswith("korobov:"):
        a = int(text[8:])
        return lattice.korobov_vector(a, 2 ** 20, 256)
    return lattice.load_generating_vector(text)


def _check_pow2(ns):
    for n in ns:
        if n < 1 or n & (n - 1):
            raise ConfigError(f"N = {n} is not a power of two")


def _check_sizes(z, ns, dims):
    for n in ns:
        if n > z.n_max:
            raise ConfigError(f"N = {n} exceeds the lattice's n_max = {z.n_max} ({z.source})")
    if dims > z.d_max:
        raise ConfigError(f"model needs {dims} lattice dimensions, {z.source} has {z.d_max}")


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _f(x):
    return harness._f(x)


def _meta(args, model_desc, z, **extra):
    meta = {"model": model_desc, "kind": args.kind, "R": args.r, "seed": args.seed, "lattice": z.source,
            "tol": args.tol}
    meta.update(extra)
    return meta


# --------------------------------------------------------------- commands


def cmd_point(args):
    if args.t is None:
        raise ConfigError("--t is required")
    model, desc = make_model(args)
    z = make_vector(args.lattice)
    _check_pow2([args.n])
    _check_sizes(z, [args.n], model.dim)
    cfg = RootConfig(tol=args.tol)
    est = harness.estimate_point(model, args.kind, args.t, z, args.n, args.r, args.seed, cfg, args.workers)
    out, close = _open_out(args.output)
    try:
        out.write(harness._meta_line("point", _meta(args, desc, z, N=args.n, t=args.t)))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["kind", "t", "N", "R", "estimate", "stderr", "rel_rmse", "wall_time_s"])
        w.writerow([args.kind, _f(args.t), args.n, args.r, _f(est.mean), _f(est.stderr), _f(est.rel_rmse),
                    _f(est.wall_time)])
    finally:
        if close:
            out.close()
    return 0


def cmd_curve(args):
    if not args.interval:
        raise ConfigError("--interval A B is required")
    a, b = args.interval
    if not a < b:
        raise ConfigError("interval needs A < B")
    model, desc = make_model(args)
    z = make_vector(args.lattice)
    _check_pow2([args.n])
    _check_sizes(z, [args.n], model.dim)
    cfg = RootConfig(tol=args.tol)
    cur = harness.estimate_curve(model, args.kind, a, b, args.m, z, args.n, args.r, args.seed, cfg, args.workers)
    per_node = cur.node_values
    node_err = per_node.std(axis=0, ddof=1) / math.sqrt(args.r) if args.r > 1 else np.full(args.m + 1, np.nan)
    ts = np.linspace(a, b, args.samples)
    per_sample = np.array([p(ts) for p in cur.per_shift_interpolants])
    sample_err = per_sample.std(axis=0, ddof=1) / math.sqrt(args.r) if args.r > 1 else np.full(len(ts), np.nan)
    out, close = _open_out(args.output)
    try:
        out.write(harness._meta_line("curve", _meta(args, desc, z, N=args.n, M=args.m,
                                                    interval=f"[{_f(a)};{_f(b)}]")))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["section", "t", "value", "stderr"])
        for t, v, e in zip(cur.grid.nodes, cur.interpolant.values, node_err):
            w.writerow(["node", _f(t), _f(v), _f(e)])
        for t, v, e in zip(ts, cur(ts), sample_err):
            w.writerow(["sample", _f(t), _f(v), _f(e)])
        out.write(f"# wall_time_s,{_f(cur.wall_time)}\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_converge(args):
    model, desc = make_model(args)
    z = make_vector(args.lattice)
    _check_pow2(args.n_list)
    methods = tuple(m for m in args.methods.split(",") if m)
    bad = set(methods) - set(harness.METHODS)
    if bad:
        raise ConfigError(f"unknown methods {sorted(bad)}")
    need = model.dim + (1 if "qmc_plain" in methods else 0)
    ref = tuple(args.reference) if args.reference else None
    if ref is not None and len(ref) != 3:
        raise ConfigError("--reference needs N,M,R")
    _check_sizes(z, list(args.n_list) + ([ref[0]] if ref else []), need)
    if (args.t is None) == (args.interval is None):
        raise ConfigError("give exactly one of --t or --interval")
    study = harness.StudyConfig(
        model=model, kind=args.kind, t=args.t, interval=tuple(args.interval) if args.interval else None,
        n_list=tuple(args.n_list), r=args.r, seed=args.seed, methods=methods, z=z,
        cfg=RootConfig(tol=args.tol), reference=ref, workers=args.workers, description=desc)
    report = harness.convergence_study(study)
    out, close = _open_out(args.output)
    try:
        report.to_csv(out)
    finally:
        if close:
            out.close()
    return EXIT_NUMERIC if any(r.note.startswith("failed") for r in report.rows) else 0


def cmd_time(args):
    if args.t is None:
        raise ConfigError("--t is required")
    model, desc = make_model(args)
    z = make_vector(args.lattice)
    _check_pow2(args.n_list)
    _check_sizes(z, args.n_list, model.dim + 1)
    rep = harness.timing_study(model, args.t, args.n_list, args.seed, z, RootConfig(tol=args.tol), args.repeats)
    rep.meta["model"] = desc
    out, close = _open_out(args.output)
    try:
        rep.to_csv(out)
    finally:
        if close:
            out.close()
    return 0


def cmd_check(args):
    """Invariant checks on a model: factorisation, fibers, roots, estimator shape."""
    model, desc = make_model(args)
    rng = np.random.default_rng(args.seed)
    results = []

    def record(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    if args.model == "lognormal":
        sigma = CovarianceSpec.parse(args.cov).matrix()
        a = pca_factorize(sigma)
        resid = float(np.max(np.abs(a @ a.T - sigma)))
        record("pca_residual", resid <= 1e-10, f"max|AA^T - S| = {resid:.3e}")
    y = rng.standard_normal((args.samples, model.dim + 1))
    phi = model.phi_full(y)
    lo, hi = args.t_range if args.t_range else np.quantile(phi, [0.01, 0.99])
    h = 1e-6
    fd_ok, fib_ok, mono_ok = True, True, True
    for row in y[:200]:
        fib = model.fiber(row[1:])
        v, g = fib.eval(row[0]), fib.deriv(row[0])
        fib_ok &= math.isclose(v, model.phi(row[0], row[1:]), rel_tol=1e-12)
        fd = (model.phi(row[0] + h, row[1:]) - model.phi(row[0] - h, row[1:])) / (2 * h)
        fd_ok &= abs(fd - g) <= 1e-5 * (1 + abs(g))
        mono_ok &= g > 0 and fib.eval(row[0] + 0.1) > v
    record("fiber_consistency", fib_ok)
    record("derivative_fd", fd_ok)
    record("fiber_monotone", mono_ok)
    ts = rng.uniform(lo, hi, args.samples)
    cfg = RootConfig(tol=args.tol)
    worst, fails = 0.0, 0
    for t_val in np.unique(np.round(ts, 3))[:50]:
        status, xi, its, resid = solve_fibers(model, y[:, 1:], t_val, cfg)
        fails += int(np.count_nonzero(status >= 2))
        if np.any(status == 0):
            worst = max(worst, float(np.nanmax(resid)))
    record("root_residual", fails == 0 and worst <= args.tol, f"failures={fails}, worst residual={worst:.2e}")
    z = make_vector(args.lattice)
    grid = chebyshev_grid(lo, hi, 10).nodes[::-1]
    pts = lattice.lattice_points(z, 1024, model.dim, lattice.draw_shifts(1, model.dim, args.seed)[0])
    cdf = batch_curve(model, "cdf", grid, pts, cfg)
    pdf = batch_curve(model, "pdf", grid, pts, cfg)
    record("cdf_range", np.all((cdf >= 0) & (cdf <= 1)))
    record("cdf_monotone", np.all(np.diff(cdf) >= 0))
    record("pdf_nonnegative", np.all(pdf >= 0) and np.all(np.isfinite(pdf)))
    out, close = _open_out(args.output)
    try:
        out.write(harness._meta_line("check", {"model": desc, "seed": args.seed}))
        for name, ok, detail in results:
            out.write(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip() + "\n")
    finally:
        if close:
            out.close()
    return 0 if all(ok for _, ok, _ in results) else EXIT_CHECK


COMMANDS = {"point": cmd_point, "curve": cmd_curve, "converge": cmd_converge, "time": cmd_time,
            "check": cmd_check}


def main(argv=None):
    try:
        args = parse_args(argv)
        if args.r < 1:
            raise ConfigError("R must be at least 1")
        if args.workers < 1:
            raise ConfigError("workers must be at least 1")
        return COMMANDS[args.command](args)
    except (ConfigError, LatticeError, ModelError, FileNotFoundError, ValueError) as exc:
        print(f"preint: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RootFindingError as exc:
        print(f"preint: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
