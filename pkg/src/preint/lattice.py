"""Randomly shifted rank-1 lattice rules.

Point ``n`` of an ``N``-point rule with generating vector ``z`` and shift
``delta`` is ``frac(n * z / N + delta)``. Points are produced on demand by
index range so that large rules are never materialised in full.
"""

from dataclasses import dataclass
from importlib import resources
from math import gcd
from pathlib import Path

import numpy as np

from . import gaussian

#: Coordinates that land exactly on 0 are moved here before the quantile map.
CLAMP_EPS = 2.0 ** -53

#: Korobov multiplier used when no vector file is given; odd, so coprime to 2**k.
DEFAULT_KOROBOV_A = 1571

BUILTIN_VECTORS = {
    "lattice-3600-20": "lattice-3600-20.txt",
    "lattice-33002-1024-1048576.9125": "lattice-33002-1024-1048576.9125.txt",
}
DEFAULT_VECTOR = "lattice-33002-1024-1048576.9125"


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratingVector:
    """Integer generating vector with the largest rule size it supports.

    ``source`` records provenance (file path, builtin name, or Korobov
    parameters) for reports.
    """

    components: tuple
    n_max: int
    source: str = ""

    def __post_init__(self):
        if not self.components:
            raise LatticeError("no components")
        for j, zj in enumerate(self.components):
            if not 1 <= zj < self.n_max:
                raise LatticeError(f"component out of range: z[{j}] = {zj} (n_max = {self.n_max})")

    @property
    def d_max(self):
        return len(self.components)

    def as_array(self, d=None):
        return np.asarray(self.components[: d if d is not None else self.d_max], dtype=np.int64)


def _parse_vector(lines, source):
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    body = [(i, ln) for i, ln in body if ln and not ln.startswith("#")]
    if not body:
        raise LatticeError(f"{source}: empty file")
    try:
        n_max = int(body[0][1])
    except ValueError:
        raise LatticeError(f"{source}: line {body[0][0]}: malformed header {body[0][1]!r}") from None
    if n_max < 2:
        raise LatticeError(f"{source}: n_max must be at least 2, got {n_max}")
    comps = []
    for lineno, text in body[1:]:
        try:
            comps.append(int(text))
        except ValueError:
            raise LatticeError(f"{source}: line {lineno}: malformed line {text!r}") from None
    return GeneratingVector(tuple(comps), n_max, source)


def load_generating_vector(path):
    """Read a generating vector file.

    The first non-comment line is ``n_max``; each following line holds one
    component, in dimension order. Lines starting with ``#`` are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"generating vector file not found: {path}")
    return _parse_vector(path.read_text(encoding="utf-8").splitlines(), str(path))


def builtin_vector(name=DEFAULT_VECTOR):
    """Load one of the generating vectors shipped with the package."""
    try:
        fname = BUILTIN_VECTORS[name]
    except KeyError:
        raise LatticeError(f"unknown builtin vector {name!r}; choose from {sorted(BUILTIN_VECTORS)}") from None
    text = resources.files("preint.data").joinpath(fname).read_text(encoding="utf-8")
    return _parse_vector(text.splitlines(), f"builtin:{name}")


def korobov_vector(a, n, d):
    """Korobov vector ``z_j = a**(j-1) mod n``, ``j = 1..d``.

    Inferior to CBC-constructed vectors; intended as a fallback and for tests.
    """
    if a < 1 or n < 2 or d < 1:
        raise LatticeError("korobov_vector needs a >= 1, n >= 2, d >= 1")
    if gcd(a, n) != 1:
        raise LatticeError(f"gcd({a}, {n}) = {gcd(a, n)} != 1")
    comps = []
    zj = 1
    for _ in range(d):
        comps.append(zj)
        zj = (zj * a) % n
    return GeneratingVector(tuple(comps), n, f"korobov:a={a}")


@dataclass(frozen=True)
class Shift:
    delta: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        if delta.ndim != 1 or np.any(delta < 0.0) or np.any(delta >= 1.0):
            raise LatticeError("shift components must lie in [0, 1)")
        object.__setattr__(self, "delta", delta)

    def __len__(self):
        return len(self.delta)


def draw_shifts(r, d, seed):
    """``r`` independent uniform shifts in ``[0, 1)**d``.

    Each shift comes from its own child of ``SeedSequence(seed)``, so shift
    ``k`` does not depend on ``r``.
    """
    if r < 1:
        raise ValueError("need at least one shift")
    children = np.random.SeedSequence(seed).spawn(r)
    return [Shift(np.random.default_rng(c).random(d)) for c in children]


@dataclass(frozen=True)
class UnitPointSet:
    """Lazily evaluated shifted lattice ``{frac(n z / N + delta)}``."""

    z: np.ndarray
    n: int
    delta: np.ndarray

    @property
    def d(self):
        return len(self.z)

    def __len__(self):
        return self.n

    def block(self, start, stop):
        """Points with indices ``start..stop-1`` as a ``(stop-start, d)`` array."""
        idx = np.arange(start, stop, dtype=np.int64)
        k = (idx[:, None] * self.z[None, :]) % self.n
        v = k / self.n + self.delta[None, :]
        return v - np.floor(v)

    def __getitem__(self, i):
        if not 0 <= i < self.n:
            raise IndexError(i)
        return self.block(i, i + 1)[0]


def lattice_points(z, n, d, shift):
    """Shifted ``n``-point rank-1 lattice in ``d`` dimensions built from ``z``."""
    if n < 1 or n > z.n_max:
        raise LatticeError(f"N = {n} exceeds the vector's n_max = {z.n_max}")
    if d < 1 or d > z.d_max:
        raise LatticeError(f"d = {d} exceeds the vector's dimension {z.d_max}")
    delta = shift.delta if isinstance(shift, Shift) else np.asarray(shift, dtype=float)
    if len(delta) != d:
        raise LatticeError(f"shift has length {len(delta)}, expected {d}")
    return UnitPointSet(z.as_array(d), int(n), np.asarray(delta, dtype=float))


def transform_points(points, quantile=gaussian.quantile, clamp=True):
    """Map unit-cube points to R^d by a componentwise quantile function.

    ``points`` is an array of shape ``(n, d)`` (use ``UnitPointSet.block``).
    Coordinates equal to 0 are moved to ``CLAMP_EPS`` when ``clamp`` is set.
    """
    u = np.asarray(points, dtype=float)
    bad = (u <= 0.0) | (u >= 1.0)
    if bad.any():
        if not clamp:
            raise LatticeError("coordinate on the boundary of the unit cube; quantile diverges")
        u = np.where(u <= 0.0, CLAMP_EPS, u)
        u = np.where(u >= 1.0, 1.0 - CLAMP_EPS, u)
    return quantile(u)
