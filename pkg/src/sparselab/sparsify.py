"""Sparse families: verification, stopping-time constructions and the domination algorithm."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exponents import ExponentConfig, ExponentError
from .forms import FormInputs, form_A
from .lattice import (
    DyadicCube,
    Measure,
    SparseFamily,
    grid_level,
    level_averages,
    level_masses,
    level_means,
    level_sums,
)
from .operators import dyadic_maximal, level_values, sparse_operator

__all__ = [
    "DominationConfig",
    "WeakTypeModulus",
    "MaximalOperator",
    "verify_sparse",
    "sparse_from_maximal",
    "augment_for_symbol",
    "oscillation",
    "grand_maximal_sharp",
    "commutator",
    "dominate",
    "weak_modulus",
]


def _mu(mu, n):
    return Measure.lebesgue(grid_level(n)) if mu is None else mu


def _heap_id(k: int, j) -> np.ndarray:
    return (1 << k) + np.asarray(j)


def verify_sparse(S: SparseFamily, mu: Measure | None = None, L: int | None = None) -> dict:
    """Sparsity of ``S`` with the canonical witness ``E_Q = Q minus its strict sub-cubes in S``.

    A cell belongs to ``E_Q`` exactly when ``Q`` is the smallest member of
    ``S`` that contains it.  ``witness`` holds that cube's heap id
    (``2^k + j``) per cell, or ``-1``.
    """
    if mu is None:
        if L is None:
            raise ValueError("pass a measure or the grid level")
        mu = Measure.lebesgue(L)
    L = mu.L
    N = mu.N
    owner = np.full(N, -1, dtype=np.int64)
    for k, idx in S.by_level().items():
        if k > L:
            raise ValueError(f"cube at level {k} is finer than the grid")
        mark = np.zeros(1 << k, dtype=bool)
        mark[idx] = True
        cells = np.repeat(mark, 1 << (L - k))
        owner[cells] = np.repeat(_heap_id(k, np.arange(1 << k)), 1 << (L - k))[cells]
    if len(S) == 0:
        return {"delta_actual": 1.0, "witness": owner, "ratios": {}}
    ids = np.array([int(_heap_id(Q.level, Q.index)) for Q in S])
    pos = np.searchsorted(ids, owner[owner >= 0])
    own_mass = np.zeros(ids.size)
    np.add.at(own_mass, pos, mu.cell_mass[owner >= 0])
    masses = level_masses(mu)
    tot = np.array([masses[Q.level][Q.index] for Q in S])
    ratios = own_mass / tot
    return {
        "delta_actual": float(ratios.min()),
        "witness": owner,
        "ratios": {Q: float(x) for Q, x in zip(S, ratios)},
    }


def sparse_from_maximal(fs: Sequence[np.ndarray], cfg: ExponentConfig,
                        mu: Measure | None = None, a: float | None = None) -> dict:
    """Stopping-time family realising the dyadic maximal function.

    A cube enters when its value ``mu(Q)^eta prod <f_j>_{r_j,Q}`` is strictly
    larger than ``a`` times the value of its nearest selected ancestor.  The
    root is always selected.  ``C_stop`` is the measured pointwise ratio
    between the maximal function and the sparse operator.
    """
    fs = [np.abs(np.asarray(f, dtype=float)) for f in fs]
    mu = _mu(mu, fs[0].size)
    rho = sum(1.0 / r for r in cfg.r)
    if a is None:
        a = 2.0 ** (rho + cfg.eta + 1.0)
    if not a > 1:
        raise ValueError("threshold a must exceed 1")
    vals = level_values(fs, cfg.r, cfg.eta, mu)
    cubes = [DyadicCube(0, 0)]
    anc = vals[0]
    for k in range(1, mu.L + 1):
        parent = np.repeat(anc, 2)
        sel = vals[k] > a * parent
        cubes.extend(DyadicCube(k, int(j)) for j in np.flatnonzero(sel))
        anc = np.where(sel, vals[k], parent)
    S = SparseFamily.of(cubes, 0.5)
    M = dyadic_maximal(fs, cfg, mu)
    A = sparse_operator(S, fs, cfg, mu)
    pos = A > 0
    if np.any(M[~pos] > 0):
        c_stop = math.inf
    else:
        c_stop = float(np.max(M[pos] / A[pos])) if np.any(pos) else 0.0
    return {"S": S, "C_stop": c_stop, "a": a}


def augment_for_symbol(S: SparseFamily, b: np.ndarray, mu: Measure | None = None) -> dict:
    """Add local-oscillation stopping cubes for the symbol ``b`` below every cube of ``S``.

    Inside a cube ``Q`` the maximal sub-cubes ``R`` with
    ``<|b - b_Q|>_R > 2 <|b - b_Q|>_Q`` are added and treated the same way.
    ``C_aug`` is the measured constant in
    ``|b(x) - b_Q| <= C sum_{R in S~, x in R in Q} <|b - b_R|>_R``.
    """
    b = np.asarray(b, dtype=float)
    mu = _mu(mu, b.size)
    L = mu.L
    cm = mu.cell_mass
    out = set(S.cubes)
    queue = sorted(S.cubes)
    seen = set()
    while queue:
        Q = queue.pop()
        if Q in seen:
            continue
        seen.add(Q)
        lo, hi = Q.cells(L)
        w = hi - lo
        if w == 1:
            continue
        bq = b[lo:hi]
        mq = cm[lo:hi]
        dev = np.abs(bq - np.dot(bq, mq) / mq.sum()) * mq
        base = dev.sum() / mq.sum()
        if base == 0:
            continue
        sums = level_sums(dev)
        msum = level_sums(mq)
        blocked = np.zeros(1, dtype=bool)
        for d in range(1, grid_level(w) + 1):
            blocked = np.repeat(blocked, 2)
            hit = (sums[d] / msum[d] > 2 * base) & ~blocked
            for j in np.flatnonzero(hit):
                R = DyadicCube(Q.level + d, (Q.index << d) + int(j))
                out.add(R)
                queue.append(R)
            blocked |= hit
    St = SparseFamily.of(out, S.delta)
    return {"S": St, "C_aug": _domination_constant(St, b, mu)}


def _domination_constant(S: SparseFamily, b: np.ndarray, mu: Measure) -> float:
    L = mu.L
    means = level_means(b, mu)
    coeff = [np.zeros(1 << k) for k in range(L + 1)]
    for k, idx in S.by_level().items():
        rows = b.reshape(1 << k, -1)[idx]
        cm = mu.cell_mass.reshape(1 << k, -1)[idx]
        coeff[k][idx] = (np.abs(rows - means[k][idx][:, None]) * cm).sum(axis=1) / cm.sum(axis=1)
    C = np.stack([np.repeat(c, 1 << (L - k)) for k, c in enumerate(coeff)], axis=1)
    tails = np.cumsum(C[:, ::-1], axis=1)[:, ::-1]
    worst = 0.0
    for k, idx in S.by_level().items():
        w = 1 << (L - k)
        cells = (idx[:, None] * w + np.arange(w)[None, :]).ravel()
        num = np.abs(b[cells] - np.repeat(means[k][idx], w))
        den = tails[cells, k]
        if np.any((den == 0) & (num > 0)):
            return math.inf
        ok = den > 0
        if np.any(ok):
            worst = max(worst, float(np.max(num[ok] / den[ok])))
    return worst


@dataclass(frozen=True)
class DominationConfig:
    beta: float = 3.0
    c1: float = 3.0
    c2: float = 2.0
    max_depth: int | None = None
    osc_pairs: int = 64
    s: float = math.inf
    seed: int = 0

    def __post_init__(self) -> None:
        bad = []
        if not self.beta >= 1:
            bad.append("beta must be >= 1")
        if not self.c1 >= 1:
            bad.append("c1 must be >= 1")
        if not self.c2 >= 2:
            bad.append("c2 must be >= 2")
        if self.osc_pairs < 1:
            bad.append("oscPairs must be >= 1")
        if not self.s >= 1:
            bad.append("oscillation exponent s must be >= 1")
        if bad:
            raise ExponentError(bad)

    def lambda0(self, cfg: ExponentConfig) -> float:
        """``1/(6 |tau| (|k| + 1) c1 c2)`` with ``|tau|`` read as at least 1."""
        tau = max(len(cfg.tau), 1)
        ksum = sum(cfg.k[i] for i in cfg.tau)
        return 1.0 / (6.0 * tau * (ksum + 1) * self.c1 * self.c2)


@dataclass
class WeakTypeModulus:
    samples: dict = field(default_factory=dict)

    def is_nonincreasing(self) -> bool:
        lam = sorted(self.samples)
        vals = [self.samples[x] for x in lam]
        return all(a >= b for a, b in zip(vals, vals[1:]))


class MaximalOperator:
    """The dyadic fractional maximal function as an operator handle."""

    def __init__(self, cfg: ExponentConfig, mu: Measure | None = None):
        self.cfg = cfg
        self.m = cfg.m
        self.mu = mu

    def __call__(self, fs):
        return dyadic_maximal(fs, self.cfg, self.mu)


def _dilate(Q: DyadicCube, beta: float, L: int) -> tuple[int, int] | None:
    """Cell range ``[lo, hi)`` (mod N) of the centred dilate; ``None`` for the whole torus."""
    lo, hi = Q.cells(L)
    w = hi - lo
    if beta * w >= (1 << L):
        return None
    e = int(round((beta - 1.0) * w / 2.0))
    if w + 2 * e >= (1 << L):
        return None
    return lo - e, hi + e


def _pairs(n: int, weights: np.ndarray, count: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index pairs and pair weights: exhaustive when ``n*n <= count``, else sampled."""
    if n * n <= count:
        i, j = np.divmod(np.arange(n * n), n)
        pw = weights[i] * weights[j]
        return i, j, pw / pw.sum()
    p = weights / weights.sum()
    i = rng.choice(n, size=count, p=p)
    j = rng.choice(n, size=count, p=p)
    return i, j, np.full(count, 1.0 / count)


def oscillation(F: np.ndarray, Q: DyadicCube, s: float, mu: Measure | None = None,
                pairs: int | None = None, seed: int = 0) -> float:
    """``osc_s(F; Q)``: normalised ``L^s`` mean of ``|F(x') - F(x'')|`` over ``Q x Q``."""
    F = np.asarray(F, dtype=float)
    mu = _mu(mu, F.size)
    lo, hi = Q.cells(mu.L)
    n = hi - lo
    count = n * n if pairs is None else pairs
    rng = np.random.default_rng([seed, Q.level, Q.index])
    i, j, pw = _pairs(n, mu.cell_mass[lo:hi], count, rng)
    d = np.abs(F[lo:hi][i] - F[lo:hi][j])
    return _lmean(d, pw, s)


def _lmean(d, pw, s):
    if math.isinf(s):
        return float(d.max()) if d.size else 0.0
    return float(np.dot(pw, d ** s) ** (1.0 / s))


def _truncated_eval(T, fs, rng_cells, cells, full=None):
    """``T(f chi_{X minus E})`` at ``cells``, where ``E`` is the cell range (or everything)."""
    N = fs[0].size
    if rng_cells is None:
        return np.zeros(cells.size)
    lo, hi = rng_cells
    if getattr(T, "m", None) == 1 and hasattr(T, "local_part"):
        base = T(fs) if full is None else full
        return base[cells] - T.local_part(fs[0], lo, hi, cells)
    keep = np.ones(N, dtype=bool)
    keep[np.arange(lo, hi) % N] = False
    return T([f * keep for f in fs])[cells]


def grand_maximal_sharp(T, fs: Sequence[np.ndarray], cfg: ExponentConfig,
                        dom: DominationConfig, mu: Measure | None = None,
                        within: DyadicCube | None = None) -> np.ndarray:
    """Sharp grand maximal truncation: ``sup_{Q containing x} osc_s(T(f chi_{X minus beta Q}); Q)``.

    ``within`` restricts the supremum to the sub-cubes of one cube (cells
    outside it get 0).  Pairs are enumerated when ``|Q|^2 <= oscPairs`` and
    sampled otherwise with a seed derived from ``(dom.seed, cube)``.
    """
    fs = [np.asarray(f, dtype=float) for f in fs]
    mu = _mu(mu, fs[0].size)
    L = mu.L
    top = within or DyadicCube(0, 0)
    out = np.zeros(mu.N)
    if not any(np.any(f) for f in fs):
        return out
    full = T(fs) if (getattr(T, "m", None) == 1 and hasattr(T, "local_part")) else None
    lo0, hi0 = top.cells(L)
    for d in range(0, L - top.level + 1):
        k = top.level + d
        w = 1 << (L - k)
        for jj in range(1 << d):
            Q = DyadicCube(k, (top.index << d) + jj)
            E = _dilate(Q, dom.beta, L)
            if E is None:
                continue
            lo, hi = Q.cells(L)
            rng = np.random.default_rng([dom.seed, k, Q.index])
            i, j, pw = _pairs(w, mu.cell_mass[lo:hi], dom.osc_pairs, rng)
            pts = np.unique(np.concatenate([i, j]))
            vals = np.zeros(w)
            vals[pts] = _truncated_eval(T, fs, E, lo + pts, full)
            osc = _lmean(np.abs(vals[i] - vals[j]), pw, dom.s)
            np.maximum(out[lo:hi], osc, out=out[lo:hi])
    return out


def commutator(T, fs: Sequence[np.ndarray], bs: Sequence[np.ndarray], cfg: ExponentConfig,
               mu: Measure | None = None) -> np.ndarray:
    """``T`` with kernel multiplied by ``prod_{i in tau} (b_i(x) - b_i(y_i))^{k_i}``.

    Expanded binomially around each symbol's mean, which is exact for a
    multilinear ``T``.
    """
    fs = [np.asarray(f, dtype=float) for f in fs]
    mu = _mu(mu, fs[0].size)
    tau = sorted(cfg.tau)
    centred = {i: np.asarray(bs[i], dtype=float) - float(np.dot(bs[i], mu.cell_mass) / mu.cell_mass.sum())
               for i in tau}
    total = np.zeros(mu.N)
    for ts in itertools.product(*(range(cfg.k[i] + 1) for i in tau)):
        coef = np.ones(mu.N)
        args = list(fs)
        for i, t in zip(tau, ts):
            kk = cfg.k[i]
            coef = coef * math.comb(kk, t) * (-1.0) ** t * centred[i] ** (kk - t)
            args[i] = fs[i] * centred[i] ** t
        total = total + coef * T(args)
    return total


def _threshold_set(values: np.ndarray, mass: np.ndarray, budget: float) -> np.ndarray:
    """Exceedance set ``{v > u}`` for the smallest cell value ``u`` leaving mass ``<= budget``."""
    order = np.argsort(-values, kind="stable")
    v = values[order]
    cum = np.cumsum(mass[order])
    # mass strictly above v[i] is the cumulative mass before the first index holding v[i]
    first = np.r_[0, np.flatnonzero(v[1:] != v[:-1]) + 1]
    above = np.where(first > 0, cum[first - 1], 0.0)
    ok = above <= budget * (1 + 1e-12)
    u = v[first[ok]].min() if np.any(ok) else v[0]
    return values > u


def _cz_select(omega: np.ndarray, mass: np.ndarray, P: DyadicCube, c2: float) -> list[DyadicCube]:
    """Maximal proper sub-cubes ``R`` of ``P`` with ``mu(R cap Omega) > mu(R) / c2``."""
    w = omega.size
    if w == 1 or not omega.any():
        return []
    hit_m = level_sums(mass * omega)
    tot_m = level_sums(mass)
    chosen = []
    blocked = np.zeros(1, dtype=bool)
    for d in range(1, grid_level(w) + 1):
        blocked = np.repeat(blocked, 2)
        hit = (hit_m[d] > tot_m[d] / c2) & ~blocked
        chosen.extend(DyadicCube(P.level + d, (P.index << d) + int(j)) for j in np.flatnonzero(hit))
        blocked |= hit
    return chosen


def _local_max(h: np.ndarray, r: float, lo: int, hi: int, mu: Measure) -> np.ndarray:
    """``M_r`` restricted to the sub-cubes of the cell range ``[lo, hi)``."""
    sub = Measure(mu.density[lo:hi])
    return dyadic_maximal([h[lo:hi]], ExponentConfig(m=1, r=(r,)), sub)


def dominate(T, fs: Sequence[np.ndarray], g: np.ndarray, bs: Sequence[np.ndarray] | None,
             cfg: ExponentConfig, dom: DominationConfig, mu: Measure | None = None) -> dict:
    """Stopping-time sparse domination of ``<|T^{b,k}(f)|, g>`` by the oscillation forms.

    Starting from the root, each selected cube ``P`` collects the exceedance
    sets of ``|T|``, its sharp grand maximal truncation and the local maximal
    functions, all evaluated on inputs localised to ``beta P`` and twisted by
    ``(b_i - b_{i,beta P})^{t_i}``.  Thresholds are the empirical quantiles
    leaving at most ``lambda mu(P)`` above them; the next generation is the
    Calderon-Zygmund selection of the union at height ``1/c2``.
    """
    fs = [np.asarray(f, dtype=float) for f in fs]
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValueError("g must be nonnegative")
    mu = _mu(mu, g.size)
    L, N = mu.L, mu.N
    if bs is None:
        bs = [np.zeros(N) for _ in fs]
    bs = [np.asarray(b, dtype=float) for b in bs]
    if any(r >= dom.s for r in cfg.r):
        raise ExponentError(["max_i r_i < s violated for the oscillation exponent"])
    tau = sorted(cfg.tau)
    t_grid = list(itertools.product(*(range(cfg.k[i] + 1) for i in tau)))
    n_sets = len(t_grid) * (2 + 2 * cfg.m)
    lam = min(dom.lambda0(cfg), 1.0 / (2.0 * dom.c2 * n_sets))
    depth_cap = L if dom.max_depth is None else min(dom.max_depth, L)
    cm = mu.cell_mass

    root = DyadicCube(0, 0)
    family = {root}
    frontier = [root]
    budgets = []
    while frontier:
        nxt = []
        for P in sorted(frontier):
            if P.level >= depth_cap:
                continue
            lo, hi = P.cells(L)
            E = _dilate(P, dom.beta, L)
            loc = np.ones(N, dtype=bool)
            if E is not None:
                loc = np.zeros(N, dtype=bool)
                loc[np.arange(E[0], E[1]) % N] = True
            wloc = cm * loc
            omega = np.zeros(hi - lo, dtype=bool)
            mass = cm[lo:hi]
            budget = lam * mass.sum()
            for ts in t_grid:
                args = []
                for i, f in enumerate(fs):
                    h = f * loc
                    if i in tau:
                        t = ts[tau.index(i)]
                        bP = float(np.dot(bs[i], wloc) / wloc.sum())
                        h = h * (bs[i] - bP) ** t
                    args.append(h)
                Tv = np.abs(T(args))[lo:hi]
                omega |= _threshold_set(Tv, mass, budget)
                G = grand_maximal_sharp(T, args, cfg, dom, mu, within=P)[lo:hi]
                omega |= _threshold_set(G, mass, budget)
                for i in range(cfg.m):
                    omega |= _threshold_set(_local_max(args[i], cfg.r[i], lo, hi, mu), mass, budget)
                    omega |= _threshold_set(_local_max(fs[i] * loc, cfg.r[i], lo, hi, mu), mass, budget)
            kids = _cz_select(omega, mass, P, dom.c2)
            masses = level_masses(mu)
            used = math.fsum(masses[R.level][R.index] for R in kids)
            budgets.append(used / mass.sum())
            if used > 0.5 * mass.sum() * (1 + 1e-12):
                raise AssertionError(f"children of {P} carry {used / mass.sum():.3f} of its measure")
            for R in kids:
                if R not in family:
                    family.add(R)
                    nxt.append(R)
        frontier = nxt
    F = SparseFamily.of(family, 0.5)

    lhs = float(np.sum(np.abs(commutator(T, fs, bs, cfg, mu)) * g * cm))
    rhs = 0.0
    parts = []
    for ts in t_grid:
        t_full = list(cfg.t)
        for i, t in zip(tau, ts):
            t_full[i] = t
        inp = FormInputs(tuple(fs), g, cfg.with_(t=tuple(t_full)), F, tuple(bs), mu)
        parts.append(form_A(inp))
    rhs = math.fsum(parts)
    if rhs == 0:
        if lhs > 0:
            raise RuntimeError("domination failed: form vanishes while the pairing does not")
        c_emp = 0.0
    else:
        c_emp = lhs / rhs
    return {"F": F, "C_emp": c_emp, "lhs": lhs, "rhs": rhs,
            "max_child_fraction": max(budgets, default=0.0), "lambda": lam}


def weak_modulus(G, cfg: ExponentConfig, Q: DyadicCube, fs: Sequence[np.ndarray],
                 lambdas: Sequence[float], mu: Measure | None = None) -> WeakTypeModulus:
    """Smallest ``Phi(lambda)`` with ``mu{x in Q : |G(f chi_Q)| > Phi mu(Q)^eta prod <f_j>_{r_j,Q}} <= lambda mu(Q)``."""
    fs = [np.asarray(f, dtype=float) for f in fs]
    mu = _mu(mu, fs[0].size)
    L = mu.L
    lo, hi = Q.cells(L)
    mask = np.zeros(mu.N)
    mask[lo:hi] = 1.0
    loc = [f * mask for f in fs]
    norm = mu.of(Q) ** cfg.eta
    for f, r in zip(loc, cfg.r):
        norm *= float(level_averages(f, r, mu)[Q.level][Q.index])
    vals = np.abs(G(loc))[lo:hi]
    ratio = vals / norm if norm > 0 else np.where(vals > 0, math.inf, 0.0)
    mass = mu.cell_mass[lo:hi]
    total = mass.sum()
    order = np.argsort(-ratio, kind="stable")
    v = ratio[order]
    cum = np.cumsum(mass[order])
    first = np.r_[0, np.flatnonzero(v[1:] != v[:-1]) + 1]
    above = np.where(first > 0, cum[first - 1], 0.0)
    out = WeakTypeModulus()
    for lam in lambdas:
        if not 0 < lam < 1:
            raise ValueError("lambda must lie in (0, 1)")
        ok = above <= lam * total * (1 + 1e-12)
        out.samples[float(lam)] = float(v[first[ok]].min())
    if not out.is_nonincreasing():
        raise AssertionError("weak-type modulus is not non-increasing")
    return out
