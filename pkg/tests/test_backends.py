"""The numba kernels and their numpy twins must agree."""

import numpy as np
import pytest

from preint import _backend, harness, lattice
from preint import preintegration as Q
from preint._kernels import KERNELS
from preint.model import lognormal_from_covariance

NB, NP = KERNELS["numba"], KERNELS["numpy"]


def test_flag_read_at_call_time(monkeypatch):
    monkeypatch.delenv(_backend.ENV_FLAG, raising=False)
    assert _backend.backend_name() == "numba"
    monkeypatch.setenv(_backend.ENV_FLAG, "1")
    assert _backend.backend_name() == "numpy"
    monkeypatch.setenv(_backend.ENV_FLAG, "0")
    assert _backend.use_numba()


def test_normal_blocks_agree():
    z = lattice.builtin_vector().as_array(20)
    delta = lattice.draw_shifts(1, 20, 3)[0].delta
    a = NB["normal_block"](z, 4096, delta, 100, 2100)
    b = NP["normal_block"](z, 4096, delta, 100, 2100)
    assert np.max(np.abs(a - b)) <= 1e-13
    ua = NB["unit_block"](z, 4096, delta, 0, 4096)
    assert np.array_equal(ua, NP["unit_block"](z, 4096, delta, 0, 4096))


def test_zero_coordinate_is_clamped():
    z = np.array([1, 3], dtype=np.int64)
    for k in (NB, NP):
        y = k["normal_block"](z, 4, np.zeros(2), 0, 1)
        assert np.all(np.isfinite(y))


@pytest.mark.parametrize("spec", ["equicorr:16:1:0.5", "recipmax:32"])
def test_estimators_agree(spec, monkeypatch):
    m = lognormal_from_covariance(spec)
    lo, hi = harness.pilot_quantiles(m, [0.02, 0.98], samples=20_000)
    nodes = np.linspace(lo, hi, 7)
    pts = lattice.lattice_points(lattice.builtin_vector(), 10_000, m.dim, lattice.draw_shifts(1, m.dim, 1)[0])
    out = {}
    for name in ("numba", "numpy"):
        if name == "numpy":
            monkeypatch.setenv(_backend.ENV_FLAG, "1")
        else:
            monkeypatch.delenv(_backend.ENV_FLAG, raising=False)
        out[name] = (Q.batch_curve(m, "cdf", nodes, pts), Q.batch_curve(m, "pdf", nodes, pts))
    for a, b in zip(out["numba"], out["numpy"]):
        assert np.allclose(a, b, rtol=1e-11, atol=1e-14)


def test_root_solvers_agree():
    m = lognormal_from_covariance("equicorr:8:1:0.5")
    c0, a0, lin_rest, offset, e_rest = Q._exp_affine_parts(m)
    y = np.random.default_rng(0).standard_normal((5000, 7))
    off = y @ lin_rest + offset
    s = np.ascontiguousarray(y @ e_rest)
    t = np.linspace(-1, 80, 5000)
    ra = NB["solve_points"](c0, a0, off, s, t, 1e-10, 100, 60, 0.0)
    rb = NP["solve_points"](c0, a0, off, s, t, 1e-10, 100, 60, 0.0)
    assert np.array_equal(ra[0], rb[0])
    ok = ra[0] == 0
    assert np.allclose(ra[1][ok], rb[1][ok], rtol=0, atol=1e-9)
    assert np.mean(np.abs(ra[2] - rb[2])) < 0.05


def test_indicator_counts_agree():
    m = lognormal_from_covariance("equicorr:8:1:0.5")
    y = np.random.default_rng(1).standard_normal((20_000, 8))
    s = np.ascontiguousarray(y @ m.exp_rows.T)
    lin = y @ m.lin + m.offset
    for t in (3.0, 8.0, 20.0):
        assert NB["indicator_block"](lin, s, t) == NP["indicator_block"](lin, s, t)


def test_plain_rule_agrees(monkeypatch):
    m = lognormal_from_covariance("equicorr:8:1:0.5")
    pts = lattice.lattice_points(lattice.builtin_vector(), 2 ** 13, 8, lattice.draw_shifts(1, 8, 2)[0])
    a = Q.plain_indicator_mean(m, 8.0, pts)
    monkeypatch.setenv(_backend.ENV_FLAG, "1")
    assert Q.plain_indicator_mean(m, 8.0, pts) == a
