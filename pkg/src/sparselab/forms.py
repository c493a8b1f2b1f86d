"""Sparse forms with symbol oscillations and the reduction inequality between them.

Per-cube terms are computed level by level on row-reshaped arrays and summed
with ``math.fsum`` in (level, index) order, so the result does not depend on
evaluation order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exponents import ExponentConfig
from .lattice import Measure, SparseFamily, grid_level, level_averages, level_masses

__all__ = ["FormInputs", "plain_form", "form_A", "form_B", "reduce_check", "cube_terms"]


@dataclass(frozen=True)
class FormInputs:
    fs: tuple
    g: np.ndarray
    cfg: ExponentConfig
    S: SparseFamily
    bs: tuple | None = None
    mu: Measure | None = None

    def __post_init__(self) -> None:
        fs = tuple(np.asarray(f, dtype=float) for f in self.fs)
        g = np.asarray(self.g, dtype=float)
        n = g.size
        grid_level(n)
        if len(fs) != self.cfg.m:
            raise ValueError(f"expected {self.cfg.m} functions, got {len(fs)}")
        if self.bs is None:
            bs = tuple(np.zeros(n) for _ in fs)
        else:
            bs = tuple(np.asarray(b, dtype=float) for b in self.bs)
        if len(bs) != self.cfg.m:
            raise ValueError(f"expected {self.cfg.m} symbols, got {len(bs)}")
        if any(a.size != n for a in fs + bs):
            raise ValueError("all inputs must share the grid")
        mu = Measure.lebesgue(grid_level(n)) if self.mu is None else self.mu
        if mu.N != n:
            raise ValueError("measure and inputs live on different grids")
        object.__setattr__(self, "fs", fs)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "bs", bs)
        object.__setattr__(self, "mu", mu)

    def with_(self, **kw) -> "FormInputs":
        d = dict(fs=self.fs, g=self.g, cfg=self.cfg, S=self.S, bs=self.bs, mu=self.mu)
        d.update(kw)
        return FormInputs(**d)


def _row_avg(X: np.ndarray, r: float, m: np.ndarray, msum: np.ndarray) -> np.ndarray:
    a = np.abs(X)
    if math.isinf(r):
        return a.max(axis=1)
    if r == 1:
        return (a * m).sum(axis=1) / msum
    return ((a ** r * m).sum(axis=1) / msum) ** (1.0 / r)


def cube_terms(inp: FormInputs, kind: str, tau_prime: frozenset | None = None,
               r_last: float | None = None):
    """Per-cube terms of a form, as ``(cubes, values)`` in (level, index) order.

    ``kind`` is ``"plain"``, ``"A"`` or ``"B"``.
    """
    cfg, mu = inp.cfg, inp.mu
    L = mu.L
    tau = cfg.tau
    if not tau <= set(range(cfg.m)):
        raise ValueError("tau must be a subset of the slots")
    if kind == "B":
        tp = cfg.tau_prime if tau_prime is None else frozenset(tau_prime)
        if tp is None or not tp <= tau:
            raise ValueError("tau' must be a subset of tau")
    masses = level_masses(mu)
    cubes: list = []
    vals: list = []
    for k, idx in inp.S.by_level().items():
        muQ = masses[k][idx]
        term = muQ ** (cfg.eta + 1.0)
        if kind == "plain":
            for f, rj in zip(inp.fs, cfg.r):
                term = term * level_averages(f, rj, mu)[k][idx]
            term = term * level_averages(inp.g, r_last, mu)[k][idx]
        else:
            rows = lambda a: a.reshape(1 << k, -1)[idx]
            cm = rows(mu.cell_mass)
            msum = cm.sum(axis=1)
            osc = {}
            for i in tau:
                b = rows(inp.bs[i])
                bQ = (b * cm).sum(axis=1) / msum
                osc[i] = np.abs(b - bQ[:, None])
            gfac = np.abs(rows(inp.g))
            for i in range(cfg.m):
                f = rows(inp.fs[i])
                if kind == "A" and i in tau:
                    term = term * _row_avg(f * osc[i] ** cfg.t[i], cfg.r[i], cm, msum)
                    gfac = gfac * osc[i] ** (cfg.k[i] - cfg.t[i])
                elif kind == "B" and i in tp:
                    term = term * _row_avg(f * osc[i] ** cfg.k[i], cfg.r[i], cm, msum)
                else:
                    if kind == "B" and i in tau:
                        gfac = gfac * osc[i] ** cfg.k[i]
                    term = term * level_averages(inp.fs[i], cfg.r[i], mu)[k][idx]
            term = term * _row_avg(gfac, cfg.s_prime, cm, msum)
        cubes.extend((k, int(j)) for j in idx)
        vals.append(np.asarray(term, dtype=float))
    values = np.concatenate(vals) if vals else np.zeros(0)
    return cubes, values


def plain_form(inp: FormInputs, r_last: float) -> float:
    """``sum_Q mu(Q)^(eta+1) prod_j <f_j>_{r_j,Q} <g>_{r_last,Q}``."""
    return math.fsum(cube_terms(inp, "plain", r_last=r_last)[1])


def form_A(inp: FormInputs) -> float:
    """Form with oscillation powers ``t_i`` on the ``f`` slots and ``k_i - t_i`` on ``g``."""
    if any(t > k for t, k in zip(inp.cfg.t, inp.cfg.k)):
        raise ValueError("t <= k violated")
    return math.fsum(cube_terms(inp, "A")[1])


def form_B(inp: FormInputs, tau_prime: frozenset | None = None) -> float:
    """Reduced form: full powers ``k_i`` on the slots in ``tau'``, the rest on ``g``."""
    return math.fsum(cube_terms(inp, "B", tau_prime=tau_prime)[1])


def _subsets(tau):
    items = sorted(tau)
    for n in range(len(items) + 1):
        for c in itertools.combinations(items, n):
            yield frozenset(c)


def reduce_check(inp: FormInputs, rtol: float = 1e-10) -> dict:
    """Compare ``form_A`` with the sum of reduced forms over all ``tau' in tau``.

    Also checks the inequality cube by cube.
    """
    cubes, lhs_q = cube_terms(inp, "A")
    rhs_q = np.zeros_like(lhs_q)
    parts = []
    for tp in _subsets(inp.cfg.tau):
        _, v = cube_terms(inp, "B", tau_prime=tp)
        rhs_q = rhs_q + v
        parts.append(math.fsum(v))
    lhs = math.fsum(lhs_q)
    rhs = math.fsum(parts)
    per_cube = bool(np.all(lhs_q <= rhs_q * (1 + rtol) + 1e-300))
    margin = (rhs - lhs) / rhs if rhs > 0 else (0.0 if lhs == 0 else -math.inf)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "holds": lhs <= rhs * (1 + rtol),
        "per_cube_holds": per_cube,
        "margin": margin,
    }
