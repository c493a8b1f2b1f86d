"""Pointwise operators on grid functions.

Dyadic fractional maximal function, the discrete multilinear fractional
integral, sparse operators and iterated sparse averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exponents import ExponentConfig
from .lattice import (
    GridSpec,
    Measure,
    SparseFamily,
    grid_level,
    level_averages,
    level_masses,
    level_means,
)

__all__ = [
    "KernelSpec",
    "FracIntegral",
    "level_values",
    "dyadic_maximal",
    "maximal_two_grids",
    "frac_integral",
    "sparse_operator",
    "sparse_avg",
    "sparse_avg_iterate",
]

_MAX_CELLS_BILINEAR = 1 << 11


def _prepare(fs, mu):
    fs = [np.asarray(f, dtype=float) for f in fs]
    n = fs[0].size
    if any(f.size != n for f in fs):
        raise ValueError("all inputs must live on the same grid")
    if mu is None:
        mu = Measure.lebesgue(grid_level(n))
    elif mu.N != n:
        raise ValueError("measure and inputs live on different grids")
    return fs, mu


def _on_grid(fs, mu, grid):
    """Rotate inputs so that the shifted lattice becomes the standard one."""
    if grid is None or grid.offset == 0:
        return fs, mu
    return [grid.to_lattice(f) for f in fs], Measure(grid.to_lattice(mu.density))


def level_values(fs: Sequence[np.ndarray], r: Sequence[float], eta: float,
                 mu: Measure) -> list[np.ndarray]:
    """``mu(Q)^eta * prod_j <f_j>_{r_j,Q}`` for every cube, grouped by level."""
    masses = level_masses(mu)
    out = []
    tables = [level_averages(f, rj, mu) for f, rj in zip(fs, r)]
    for k, mk in enumerate(masses):
        v = mk ** eta if eta else np.ones_like(mk)
        for tab in tables:
            v = v * tab[k]
        out.append(v)
    return out


def dyadic_maximal(fs: Sequence[np.ndarray], cfg: ExponentConfig,
                   mu: Measure | None = None, grid: GridSpec | None = None) -> np.ndarray:
    """Dyadic ``m``-linear fractional maximal function.

    At every cell, the largest ``mu(Q)^eta prod_j <f_j>_{r_j,Q}`` over the
    ``L+1`` dyadic cubes that contain it.  One top-down pass.
    """
    fs, mu = _prepare(fs, mu)
    if len(fs) != cfg.m:
        raise ValueError(f"expected {cfg.m} inputs, got {len(fs)}")
    fs, mu = _on_grid(fs, mu, grid)
    vals = level_values(fs, cfg.r, cfg.eta, mu)
    cur = vals[0]
    for v in vals[1:]:
        cur = np.maximum(np.repeat(cur, 2), v)
    return grid.from_lattice(cur) if grid is not None else cur


def maximal_two_grids(fs, cfg: ExponentConfig, mu: Measure | None = None,
                      shift: float = 1.0 / 3.0) -> np.ndarray:
    """Pointwise max of the standard and the shifted dyadic maximal functions."""
    L = grid_level(np.asarray(fs[0]).size)
    return np.maximum(dyadic_maximal(fs, cfg, mu),
                      dyadic_maximal(fs, cfg, mu, GridSpec(L, shift)))


@dataclass(frozen=True)
class KernelSpec:
    """How to treat the kernel singularity when ``y`` shares the cell of ``x``.

    ``skip`` drops those terms; ``cap`` replaces the ball measure by the mass
    of the shared cell.
    """

    diagonal_policy: str = "skip"
    quadrature: str = "midpoint"

    def __post_init__(self) -> None:
        if self.diagonal_policy not in ("skip", "cap"):
            raise ValueError(f"unknown diagonal policy {self.diagonal_policy!r}")
        if self.quadrature != "midpoint":
            raise ValueError("only midpoint quadrature is implemented")


def _ball_measures(mu: Measure) -> np.ndarray:
    """``B[i, l] = mu(B(x_i, l/N))`` on the torus, ``l = 0..N/2``.

    The open ball of radius ``l`` cells around a midpoint covers the ``2l-1``
    central cells and half of the two boundary cells.  Column 0 is unused.
    """
    N = mu.N
    h = 1.0 / N
    w = mu.density
    ext = np.concatenate([w, w, w])
    csum = np.concatenate([[0.0], np.cumsum(ext)])
    i = np.arange(N)[:, None] + N
    l = np.arange(N // 2 + 1)[None, :]
    inner = csum[i + l] - csum[i - l + 1]
    inner[:, 0] = 0.0
    edge = 0.5 * (ext[i - l] + ext[i + l])
    B = (inner + edge) * h
    return np.minimum(B, float(w.sum()) * h)


def _torus_offsets(N: int) -> np.ndarray:
    a = np.arange(N)
    return np.minimum(a, N - a)


class FracIntegral:
    """The discrete multilinear fractional integral as a reusable operator.

    ``K(x, y) = (sum_i mu(B(x, d(x, y_i))))^(eta - m)``, midpoint rule in
    every ``y_i``.  Exact cost ``O(N^(m+1))``; arities above 2 are refused.
    """

    def __init__(self, m: int, eta: float, spec: KernelSpec | None = None,
                 mu: Measure | None = None):
        if m > 2:
            raise ValueError(
                f"fractional integral with m={m} costs O(N^{m + 1}); only m <= 2 is supported")
        if not (0 <= eta < m):
            raise ValueError(f"eta must lie in [0, {m}), got {eta}")
        self.m = m
        self.eta = float(eta)
        self.spec = spec or KernelSpec()
        self.mu = mu
        self._kernels: dict = {}

    def _mu(self, n: int) -> Measure:
        if self.mu is None:
            return Measure.lebesgue(grid_level(n))
        return self.mu

    def _ball_vector(self, N: int) -> np.ndarray:
        """Lebesgue ball measures by cell offset; entry 0 is the diagonal value."""
        d = _torus_offsets(N) / N
        beta = np.minimum(2.0 * d, 1.0)
        beta[0] = 1.0 / N if self.spec.diagonal_policy == "cap" else np.nan
        return beta

    def kernel_1d(self, N: int) -> np.ndarray:
        """Convolution kernel by offset for ``m = 1`` under Lebesgue measure."""
        key = ("k1", N)
        if key not in self._kernels:
            beta = self._ball_vector(N)
            with np.errstate(invalid="ignore"):
                k = beta ** (self.eta - 1.0)
            k[0] = 0.0 if self.spec.diagonal_policy == "skip" else k[0]
            self._kernels[key] = k
        return self._kernels[key]

    def kernel_2d(self, N: int) -> np.ndarray:
        key = ("k2", N)
        if key not in self._kernels:
            beta = self._ball_vector(N)
            with np.errstate(invalid="ignore"):
                K = (beta[:, None] + beta[None, :]) ** (self.eta - 2.0)
            if self.spec.diagonal_policy == "skip":
                K[0, :] = 0.0
                K[:, 0] = 0.0
            self._kernels[key] = K
        return self._kernels[key]

    def weighted_rows(self, mu: Measure) -> np.ndarray:
        """``R[i, l]``: ball measure at offset ``l`` (torus distance) from cell ``i``."""
        B = _ball_measures(mu)
        if self.spec.diagonal_policy == "cap":
            B[:, 0] = mu.cell_mass
        else:
            B[:, 0] = np.nan
        return B

    def __call__(self, fs: Sequence[np.ndarray]) -> np.ndarray:
        fs = [np.asarray(f, dtype=float) for f in fs]
        if len(fs) != self.m:
            raise ValueError(f"expected {self.m} inputs, got {len(fs)}")
        N = fs[0].size
        mu = self._mu(N)
        h = 1.0 / N
        if self.m == 1:
            f = fs[0] * mu.density
            if mu.is_lebesgue:
                k = self.kernel_1d(N)
                out = np.fft.irfft(np.fft.rfft(f) * np.fft.rfft(k), n=N)
                return out * h
            return self._weighted_1(f, mu) * h
        if N > _MAX_CELLS_BILINEAR:
            raise ValueError(f"bilinear fractional integral limited to N <= {_MAX_CELLS_BILINEAR}")
        f1 = fs[0] * mu.density
        f2 = fs[1] * mu.density
        idx = (np.arange(N)[:, None] + np.arange(N)[None, :]) % N
        F1 = f1[idx]
        F2 = f2[idx]
        if mu.is_lebesgue:
            K = self.kernel_2d(N)
            return np.einsum("ia,ia->i", F1 @ K, F2) * h * h
        return self._weighted_2(F1, F2, mu) * h * h

    def _weighted_1(self, f: np.ndarray, mu: Measure) -> np.ndarray:
        N = f.size
        B = self.weighted_rows(mu)
        off = _torus_offsets(N)
        out = np.empty(N)
        for i in range(N):
            dist = off[(np.arange(N) - i) % N]
            b = B[i, dist]
            with np.errstate(invalid="ignore"):
                k = b ** (self.eta - 1.0)
            if self.spec.diagonal_policy == "skip":
                k[i] = 0.0
            out[i] = np.dot(k, f)
        return out

    def _weighted_2(self, F1, F2, mu: Measure) -> np.ndarray:
        N = F1.shape[0]
        B = self.weighted_rows(mu)
        off = _torus_offsets(N)
        out = np.empty(N)
        for i in range(N):
            b = B[i, off]
            with np.errstate(invalid="ignore"):
                K = (b[:, None] + b[None, :]) ** (self.eta - 2.0)
            if self.spec.diagonal_policy == "skip":
                K[0, :] = 0.0
                K[:, 0] = 0.0
            out[i] = F1[i] @ K @ F2[i]
        return out

    def local_part(self, f: np.ndarray, lo: int, hi: int, cells: np.ndarray) -> np.ndarray:
        """``T(f chi_E)`` at ``cells`` for the cell range ``E = [lo, hi)`` (mod N), ``m = 1``.

        Used to truncate cheaply: ``T(f chi_{X \\ E}) = T(f) - T(f chi_E)``.
        """
        if self.m != 1:
            raise ValueError("local_part is implemented for m = 1 only")
        N = f.size
        mu = self._mu(N)
        ys = np.arange(lo, hi) % N
        fw = f[ys] * mu.density[ys]
        off = _torus_offsets(N)[(ys[None, :] - cells[:, None]) % N]
        if mu.is_lebesgue:
            k = self.kernel_1d(N)[off]
        else:
            B = self.weighted_rows(mu)
            with np.errstate(invalid="ignore"):
                k = B[cells[:, None], off] ** (self.eta - 1.0)
            if self.spec.diagonal_policy == "skip":
                k[off == 0] = 0.0
        return (k @ fw) / N


def frac_integral(fs: Sequence[np.ndarray], eta: float, spec: KernelSpec | None = None,
                  mu: Measure | None = None) -> np.ndarray:
    """Midpoint-rule multilinear fractional integral for ``m <= 2``."""
    return FracIntegral(len(fs), eta, spec, mu)(fs)


def _accumulate(contrib: list[np.ndarray]) -> np.ndarray:
    cur = contrib[0]
    for c in contrib[1:]:
        cur = np.repeat(cur, 2) + c
    return cur


def sparse_operator(S: SparseFamily, fs: Sequence[np.ndarray], cfg: ExponentConfig,
                    mu: Measure | None = None) -> np.ndarray:
    """``sum_{Q in S} mu(Q)^eta prod_j <f_j>_{r_j,Q} chi_Q``."""
    fs, mu = _prepare(fs, mu)
    if len(fs) != cfg.m:
        raise ValueError(f"expected {cfg.m} inputs, got {len(fs)}")
    L = mu.L
    vals = level_values(fs, cfg.r, cfg.eta, mu)
    contrib = [np.zeros(1 << k) for k in range(L + 1)]
    for k, idx in S.by_level().items():
        contrib[k][idx] = vals[k][idx]
    return _accumulate(contrib)


def sparse_avg(S: SparseFamily, phi: np.ndarray, mu: Measure | None = None) -> np.ndarray:
    """``A_S(phi) = sum_{Q in S} phi_Q chi_Q`` with signed means ``phi_Q``."""
    (phi,), mu = _prepare([phi], mu)
    means = level_means(phi, mu)
    contrib = [np.zeros(1 << k) for k in range(mu.L + 1)]
    for k, idx in S.by_level().items():
        contrib[k][idx] = means[k][idx]
    return _accumulate(contrib)


def sparse_avg_iterate(S: SparseFamily, phi: np.ndarray, v: np.ndarray, j: int,
                       mu: Measure | None = None) -> np.ndarray:
    """Apply ``phi -> A_S(phi) v`` ``j`` times."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    out = np.asarray(phi, dtype=float)
    v = np.asarray(v, dtype=float)
    for _ in range(j):
        out = sparse_avg(S, out, mu) * v
    return out
