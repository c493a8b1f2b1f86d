"""Dyadic geometry on the unit torus and the function/measure primitives.

Every function is piecewise constant on the ``N = 2**L`` finest cells
``[i/N, (i+1)/N)`` and is stored as a plain 1-D float array.  Cube sums are
served from dyadic pyramids (per-level sums) which are built once per
``(function, exponent, measure)`` triple and cached by content hash.
"""

from __future__ import annotations

import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "DyadicCube",
    "Measure",
    "SparseFamily",
    "grid_level",
    "sample",
    "indicator",
    "level_sums",
    "level_max",
    "level_masses",
    "level_averages",
    "level_means",
    "expand",
    "avg",
    "mean",
    "lp_norm",
    "weak_quasinorm",
    "lz_family_norm",
    "all_cubes",
]


def grid_level(n: int) -> int:
    """Return ``L`` with ``n == 2**L``; reject other lengths."""
    L = int(n).bit_length() - 1
    if n < 1 or (1 << L) != n:
        raise ValueError(f"grid length {n} is not a power of two")
    return L


@dataclass(frozen=True)
class GridSpec:
    """Finest level ``L`` plus an optional torus translation of the lattice.

    The shift is snapped to the nearest multiple of the cell width so that the
    shifted cubes stay unions of finest cells.
    """

    L: int
    shift: float = 0.0

    def __post_init__(self) -> None:
        if not (4 <= self.L <= 24):
            raise ValueError(f"L must lie in [4, 24], got {self.L}")
        if not (0.0 <= self.shift < 1.0):
            raise ValueError(f"shift must lie in [0, 1), got {self.shift}")

    @property
    def N(self) -> int:
        return 1 << self.L

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def offset(self) -> int:
        return int(round(self.shift * self.N)) % self.N

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) / self.N

    def to_lattice(self, values: np.ndarray) -> np.ndarray:
        """Reindex so that cell 0 is the first cell of the shifted root."""
        return np.roll(values, -self.offset) if self.offset else values

    def from_lattice(self, values: np.ndarray) -> np.ndarray:
        return np.roll(values, self.offset) if self.offset else values


def sample(func, L: int) -> np.ndarray:
    """Midpoint samples of ``func`` on the level-``L`` cells."""
    x = (np.arange(1 << L) + 0.5) / (1 << L)
    return np.asarray(func(x), dtype=float) * np.ones(1 << L)


def indicator(lo: float, hi: float, L: int) -> np.ndarray:
    """Characteristic function of ``[lo, hi)`` (cells whose midpoint lies inside)."""
    x = (np.arange(1 << L) + 0.5) / (1 << L)
    return ((x >= lo) & (x < hi)).astype(float)


class DyadicCube(NamedTuple):
    """Half-open dyadic interval ``[j 2^-k, (j+1) 2^-k)``."""

    level: int
    index: int

    def cells(self, L: int) -> tuple[int, int]:
        width = 1 << (L - self.level)
        return self.index * width, (self.index + 1) * width

    @property
    def length(self) -> float:
        return 2.0 ** (-self.level)

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        return (other.index >> (other.level - self.level)) == self.index

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("the root has no parent")
        return DyadicCube(self.level - 1, self.index >> 1)

    def children(self) -> tuple["DyadicCube", "DyadicCube"]:
        return (DyadicCube(self.level + 1, 2 * self.index),
                DyadicCube(self.level + 1, 2 * self.index + 1))

    def ancestors(self) -> Iterator["DyadicCube"]:
        for k in range(self.level - 1, -1, -1):
            yield DyadicCube(k, self.index >> (self.level - k))


ROOT = DyadicCube(0, 0)


def all_cubes(L: int) -> Iterator[DyadicCube]:
    for k in range(L + 1):
        for j in range(1 << k):
            yield DyadicCube(k, j)


def _digest(values: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(values, dtype=float)
    return hashlib.blake2b(arr.tobytes(), digest_size=16).digest()


@dataclass(frozen=True, eq=False)
class Measure:
    """Absolutely continuous measure ``w dx`` on the torus."""

    density: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.density, dtype=float)
        grid_level(w.size)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("measure density must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "density", w)

    @classmethod
    def lebesgue(cls, L: int) -> "Measure":
        return cls(np.ones(1 << L))

    @property
    def N(self) -> int:
        return self.density.size

    @property
    def L(self) -> int:
        return grid_level(self.N)

    @cached_property
    def cell_mass(self) -> np.ndarray:
        m = self.density / self.N
        m.setflags(write=False)
        return m

    @cached_property
    def key(self) -> bytes:
        return _digest(self.density)

    @cached_property
    def is_lebesgue(self) -> bool:
        return bool(np.all(self.density == 1.0))

    def total(self) -> float:
        return float(level_masses(self)[0][0])

    def of(self, Q: DyadicCube) -> float:
        return float(level_masses(self)[Q.level][Q.index])


def _measure(mu: Measure | None, n: int) -> Measure:
    if mu is None:
        return Measure.lebesgue(grid_level(n))
    if mu.N != n:
        raise ValueError(f"measure lives on {mu.N} cells, function on {n}")
    return mu


def level_sums(values: np.ndarray) -> list[np.ndarray]:
    """Per-level dyadic sums: entry ``k`` holds the ``2**k`` cube sums at level ``k``."""
    L = grid_level(values.size)
    out = [None] * (L + 1)
    cur = np.asarray(values, dtype=float)
    out[L] = cur
    for k in range(L, 0, -1):
        cur = cur.reshape(-1, 2).sum(axis=1)
        out[k - 1] = cur
    return out


def level_max(values: np.ndarray) -> list[np.ndarray]:
    L = grid_level(values.size)
    out = [None] * (L + 1)
    cur = np.asarray(values, dtype=float)
    out[L] = cur
    for k in range(L, 0, -1):
        cur = cur.reshape(-1, 2).max(axis=1)
        out[k - 1] = cur
    return out


class _TableCache:
    """Bounded write-once map; concurrent builders race to identical values."""

    def __init__(self, maxsize: int = 256) -> None:
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, key, build):
        with self._lock:
            hit = self._data.get(key)
            if hit is not None:
                self._data.move_to_end(key)
                return hit
        value = build()
        for arr in value:
            arr.setflags(write=False)
        with self._lock:
            self._data.setdefault(key, value)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return value

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


_tables = _TableCache()


def level_masses(mu: Measure) -> list[np.ndarray]:
    return _tables.get(("mass", mu.key), lambda: tuple(level_sums(mu.cell_mass)))


def _check_r(r: float) -> float:
    r = float(r)
    if not r >= 1:
        raise ValueError(f"average exponent must be >= 1 (or inf), got {r}")
    return r


def level_averages(f: np.ndarray, r: float, mu: Measure | None = None) -> list[np.ndarray]:
    """``<f>_{r,Q}`` for every dyadic cube, grouped by level."""
    f = np.asarray(f, dtype=float)
    mu = _measure(mu, f.size)
    r = _check_r(r)
    key = ("avg", _digest(f), r, mu.key)

    def build():
        a = np.abs(f)
        if math.isinf(r):
            return tuple(level_max(a))
        sums = level_sums((a if r == 1 else a ** r) * mu.cell_mass)
        masses = level_masses(mu)
        if r == 1:
            return tuple(s / m for s, m in zip(sums, masses))
        return tuple((s / m) ** (1.0 / r) for s, m in zip(sums, masses))

    return _tables.get(key, build)


def level_means(b: np.ndarray, mu: Measure | None = None) -> list[np.ndarray]:
    """Signed means ``b_Q`` for every dyadic cube, grouped by level."""
    b = np.asarray(b, dtype=float)
    mu = _measure(mu, b.size)
    key = ("mean", _digest(b), mu.key)

    def build():
        sums = level_sums(b * mu.cell_mass)
        return tuple(s / m for s, m in zip(sums, level_masses(mu)))

    return _tables.get(key, build)


def expand(level_values: np.ndarray, L: int) -> np.ndarray:
    """Broadcast per-cube values at one level onto the finest cells."""
    k = grid_level(level_values.size)
    return np.repeat(level_values, 1 << (L - k))


def avg(f: np.ndarray, r: float, Q: DyadicCube, mu: Measure | None = None) -> float:
    """The ``r``-average ``(mu(Q)^-1 int_Q |f|^r dmu)^(1/r)``; ``r = inf`` is the max."""
    return float(level_averages(f, r, mu)[Q.level][Q.index])


def mean(b: np.ndarray, Q: DyadicCube, mu: Measure | None = None) -> float:
    return float(level_means(b, mu)[Q.level][Q.index])


def lp_norm(f: np.ndarray, p: float, mu: Measure | None = None) -> float:
    """``(int |f|^p dmu)^(1/p)``; a quasi-norm for ``p < 1``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    f = np.asarray(f, dtype=float)
    mu = _measure(mu, f.size)
    if math.isinf(p):
        return float(np.max(np.abs(f)))
    return float(np.sum(np.abs(f) ** p * mu.cell_mass) ** (1.0 / p))


def weak_quasinorm(F: np.ndarray, p: float, mu: Measure | None = None) -> float:
    """``sup_t t * mu(|F| > t)^(1/p)``, exact over the finitely many cell values.

    The supremum is approached from below each distinct value ``v``, where the
    level set is ``{|F| >= v}``.
    """
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    F = np.abs(np.asarray(F, dtype=float))
    mu = _measure(mu, F.size)
    order = np.argsort(-F, kind="stable")
    vals = F[order]
    cum = np.cumsum(mu.cell_mass[order])
    # last position of each distinct value in descending order
    last = np.flatnonzero(np.r_[vals[1:] != vals[:-1], True])
    v = vals[last]
    m = cum[last]
    keep = v > 0
    if not np.any(keep):
        return 0.0
    return float(np.max(v[keep] * m[keep] ** (1.0 / p)))


def lz_family_norm(F: Sequence[np.ndarray], z: float) -> np.ndarray:
    """Pointwise ``l^z`` norm of a finite family of grid functions."""
    if len(F) == 0:
        raise ValueError("empty family")
    if not z >= 1:
        raise ValueError(f"z must be >= 1, got {z}")
    stack = np.abs(np.vstack([np.asarray(f, dtype=float) for f in F]))
    if math.isinf(z):
        return stack.max(axis=0)
    if z == 1:
        return stack.sum(axis=0)
    return (stack ** z).sum(axis=0) ** (1.0 / z)


@dataclass(frozen=True)
class SparseFamily:
    """Finite set of dyadic cubes plus the sparsity constant it is meant to have."""

    cubes: frozenset
    delta: float = 0.5

    def __post_init__(self) -> None:
        cubes = frozenset(DyadicCube(*c) for c in self.cubes)
        object.__setattr__(self, "cubes", cubes)
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")

    @classmethod
    def of(cls, cubes: Iterable, delta: float = 0.5) -> "SparseFamily":
        return cls(frozenset(cubes), delta)

    @classmethod
    def nested_chain(cls, J: int) -> "SparseFamily":
        """``{[0, 2^-j) : j = 0..J}``."""
        return cls(frozenset(DyadicCube(j, 0) for j in range(J + 1)), 0.5)

    @classmethod
    def full_levels(cls, top: int) -> "SparseFamily":
        return cls(frozenset(c for k in range(top + 1) for c in
                             (DyadicCube(k, j) for j in range(1 << k))), 0.5)

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self) -> Iterator[DyadicCube]:
        return iter(sorted(self.cubes))

    def __contains__(self, Q) -> bool:
        return Q in self.cubes

    @property
    def depth(self) -> int:
        return max((Q.level for Q in self.cubes), default=0)

    def by_level(self) -> dict[int, np.ndarray]:
        """Sorted cube indices per level, in increasing level order."""
        out: dict[int, list[int]] = {}
        for Q in self.cubes:
            out.setdefault(Q.level, []).append(Q.index)
        return {k: np.array(sorted(v), dtype=np.int64) for k, v in sorted(out.items())}

    def union(self, other: "SparseFamily") -> "SparseFamily":
        return SparseFamily(self.cubes | other.cubes, min(self.delta, other.delta))
