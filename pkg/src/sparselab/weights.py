"""Weight characteristics, BMO norms and the Bloom-weight bookkeeping.

Every supremum over cubes is an exhaustive scan of all ``2^(L+1) - 1``
dyadic cubes, one vectorised level at a time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exponents import ExponentConfig, ExponentError, dual, recip
from .lattice import (
    DyadicCube,
    GridSpec,
    Measure,
    SparseFamily,
    grid_level,
    level_averages,
    level_masses,
    level_means,
    level_sums,
)
from .operators import sparse_avg

__all__ = [
    "WeightTuple",
    "BloomReport",
    "ap_constant",
    "is_formal_index",
    "multiweight_constant",
    "multiweight_constant_lifted",
    "weighted_condition_ratio",
    "theta_exponent",
    "theta_from",
    "bmo_norm",
    "john_nirenberg_ratio",
    "bloom_constant",
    "bloom_derive",
    "sparse_sum",
    "cov_norm_ratio",
    "chain_power_check",
    "iterated_average_ratio",
]


@dataclass(frozen=True, eq=False)
class WeightTuple:
    """Positive weights ``w_1..w_m`` and their product."""

    components: tuple

    def __post_init__(self) -> None:
        comps = tuple(np.asarray(w, dtype=float) for w in self.components)
        if not comps:
            raise ValueError("need at least one weight")
        n = comps[0].size
        grid_level(n)
        for w in comps:
            if w.size != n or not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be finite, strictly positive and share the grid")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def product(self) -> np.ndarray:
        out = np.ones_like(self.components[0])
        for w in self.components:
            out = out * w
        return out

    def extended(self) -> tuple:
        """The ``(m+1)``-tuple with last entry ``w^{-1}``."""
        return self.components + (1.0 / self.product,)

    @classmethod
    def ones(cls, m: int, L: int) -> "WeightTuple":
        return cls(tuple(np.ones(1 << L) for _ in range(m)))


def _mu(mu, n):
    return Measure.lebesgue(grid_level(n)) if mu is None else mu


def _shifted(w, mu, grid):
    if grid is None or grid.offset == 0:
        return w, mu
    return grid.to_lattice(w), Measure(grid.to_lattice(mu.density))


def is_formal_index(p: float) -> bool:
    """True when ``A_p`` is evaluated outside its defining range ``(1, inf)``."""
    return not (1 < p < math.inf)


def ap_constant(w: np.ndarray, p: float, grid: GridSpec | None = None,
                mu: Measure | None = None) -> float:
    """``sup_Q <w>_Q <w^{1/(1-p)}>_Q^{p-1}`` over every dyadic cube.

    For ``p`` outside ``(1, inf)`` the same display is evaluated formally.
    """
    if p in (0, 1) or math.isinf(p) or math.isnan(p):
        raise ValueError(f"A_p index must not be 0, 1 or infinite, got {p}")
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weight must be strictly positive")
    mu = _mu(mu, w.size)
    w, mu = _shifted(w, mu, grid)
    a = level_means(w, mu)
    b = level_means(w ** (1.0 / (1.0 - p)), mu)
    val = max(float(np.max(ak * bk ** (p - 1.0))) for ak, bk in zip(a, b))
    if not is_formal_index(p) and val < 1 - 1e-9:
        raise AssertionError(f"A_{p} constant {val} < 1")
    return val


def _exp(r: float, p: float) -> float:
    """``1/(1/r - 1/p)``, infinite when ``r == p``."""
    d = recip(r) - recip(p)
    if d < -1e-14:
        raise ExponentError([f"averaging exponent needs r <= p (r={r}, p={p})"])
    return math.inf if abs(d) <= 1e-14 else 1.0 / d


def _sup_product(weights: Sequence[np.ndarray], exps: Sequence[float], mu: Measure):
    tables = [level_averages(w, e, mu) for w, e in zip(weights, exps)]
    best = 0.0
    per_level = []
    for k in range(mu.L + 1):
        v = np.ones(1 << k)
        for tab in tables:
            v = v * tab[k]
        per_level.append(v)
        best = max(best, float(v.max()))
    return best, per_level


def multiweight_constant(W: WeightTuple, cfg: ExponentConfig, mu: Measure | None = None,
                         check: bool = True) -> float:
    """``sup_Q prod_j <w_j^{-1}>_{1/(1/r_j-1/p_j),Q} <w>_{1/(1/q-1/s),Q}``.

    Requires ``r <= p`` and ``q <= s``; a vanishing denominator gives the
    max-average.  With ``check`` the rewriting with ``m+1`` slots is also
    evaluated and the two are required to agree.
    """
    if W.m != cfg.m:
        raise ValueError(f"expected {cfg.m} weights, got {W.m}")
    if not cfg.preceq_star():
        raise ExponentError(["(r, s) <= (p, q) ordering violated: need r_j <= p_j and q <= s"])
    mu = _mu(mu, W.components[0].size)
    ws = [1.0 / w for w in W.components] + [W.product]
    exps = [_exp(rj, pj) for rj, pj in zip(cfg.r, cfg.p)] + [_exp(cfg.q, cfg.s)]
    val, _ = _sup_product(ws, exps, mu)
    if check:
        alt = multiweight_constant_lifted(W, cfg, mu)
        if abs(alt - val) > 1e-10 * max(1.0, val):
            raise AssertionError(f"weight constant mismatch: {val} vs {alt}")
    return val


def multiweight_constant_lifted(W: WeightTuple, cfg: ExponentConfig,
                                mu: Measure | None = None) -> float:
    """Same constant via the ``m+1`` slots ``w_{m+1} = w^{-1}``, ``p_{m+1} = q'``, ``r_{m+1} = s'``."""
    mu = _mu(mu, W.components[0].size)
    ext = W.extended()
    inv_r = [recip(rj) for rj in cfg.r] + [recip(cfg.s_prime)]
    inv_p = [recip(pj) for pj in cfg.p] + [1.0 - recip(cfg.q)]
    exps = []
    for a, b in zip(inv_r, inv_p):
        d = a - b
        exps.append(math.inf if abs(d) <= 1e-14 else 1.0 / d)
    val, _ = _sup_product([1.0 / w for w in ext], exps, mu)
    return val


def weighted_condition_ratio(W: WeightTuple, cfg: ExponentConfig,
                             mu: Measure | None = None) -> float:
    """Largest ``LHS / (C * RHS)`` over cubes in the ``v_j`` form of the weight condition.

    With ``v_j = w_j^{-1/(1/r_j - 1/p_j)}`` (and the dual slot), the condition
    reads ``prod_j <v_j>_Q^{1/r_j} mu(Q)^{1+eta} <= C prod_j v_j(Q)^{1/p_j}``.
    Needs strict ``r < p`` and ``q < s`` so that every ``v_j`` is finite.
    """
    if not cfg.prec():
        raise ExponentError(["need (r, s) < (p, q) for the v_j form"])
    mu = _mu(mu, W.components[0].size)
    C = multiweight_constant(W, cfg, mu, check=False)
    ext = W.extended()
    inv_r = [recip(rj) for rj in cfg.r] + [recip(cfg.s_prime)]
    inv_p = [recip(pj) for pj in cfg.p] + [1.0 - recip(cfg.q)]
    vs = [w ** (-1.0 / (a - b)) for w, a, b in zip(ext, inv_r, inv_p)]
    masses = level_masses(mu)
    worst = 0.0
    for k in range(mu.L + 1):
        lhs = masses[k] ** (1.0 + cfg.eta)
        rhs = np.full(1 << k, C)
        for v, a, b in zip(vs, inv_r, inv_p):
            vQ = level_sums(v * mu.cell_mass)[k]
            lhs = lhs * (vQ / masses[k]) ** a
            rhs = rhs * vQ ** b
        worst = max(worst, float(np.max(lhs / rhs)))
    return worst


def theta_from(p: Sequence[float], r: Sequence[float], q_prime: float, s_prime: float) -> float:
    """``max(p_i/(p_i - r_i), q'/(q' - s'))``; needs ``r_i < p_i`` and ``s' < q'``."""
    bad = [f"r_{i + 1} < p_{i + 1} violated" for i, (ri, pi) in enumerate(zip(r, p))
           if not ri < pi]
    if not s_prime < q_prime:
        bad.append(f"s' < q' violated (s'={s_prime:g}, q'={q_prime:g})")
    if bad:
        raise ExponentError(bad)
    terms = [pi / (pi - ri) for ri, pi in zip(r, p)]
    terms.append(1.0 if math.isinf(q_prime) else q_prime / (q_prime - s_prime))
    return max(terms)


def theta_exponent(cfg: ExponentConfig) -> float:
    """Sharp power of the weight constant for the configuration's exponents."""
    return theta_from(cfg.p, cfg.r, cfg.q_prime, cfg.s_prime)


def _oscillation_levels(b, mu, power, L):
    """Per-level ``int_Q |b - b_Q|^power dmu``."""
    means = level_means(b, mu)
    out = []
    for k in range(L + 1):
        rows = b.reshape(1 << k, -1)
        cm = mu.cell_mass.reshape(1 << k, -1)
        dev = np.abs(rows - means[k][:, None])
        out.append(((dev if power == 1 else dev ** power) * cm).sum(axis=1))
    return out


def bmo_norm(b: np.ndarray, p: float = 1.0, nu: np.ndarray | None = None,
             mu: Measure | None = None, grid: GridSpec | None = None) -> float:
    """Dyadic BMO norm.

    Without ``nu``: ``sup_Q <|b - b_Q|>_{p,Q}``.  With ``nu`` (``p = 1``):
    ``sup_Q nu(Q)^{-1} int_Q |b - b_Q| dmu``.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if nu is not None and p != 1:
        raise ValueError("the weighted BMO norm is defined with p = 1 only")
    b = np.asarray(b, dtype=float)
    mu = _mu(mu, b.size)
    b, mu = _shifted(b, mu, grid)
    L = mu.L
    osc = _oscillation_levels(b, mu, p, L)
    if nu is None:
        denom = level_masses(mu)
        vals = [(o / d) ** (1.0 / p) for o, d in zip(osc, denom)]
    else:
        nu = np.asarray(nu, dtype=float)
        if grid is not None:
            nu = grid.to_lattice(nu)
        if np.any(nu <= 0):
            raise ValueError("nu must be strictly positive")
        denom = level_sums(nu * mu.cell_mass)
        vals = [o / d for o, d in zip(osc, denom)]
    return max(float(v.max()) for v in vals)


def john_nirenberg_ratio(b: np.ndarray, w: np.ndarray, s: float,
                         mu: Measure | None = None) -> float:
    """``sup_Q int_Q w |b - b_Q|^s dmu / (w(Q) ||b||_BMO^s)`` over cubes with ``w(Q) > 0``."""
    if not s > 0:
        raise ValueError("s must be positive")
    b = np.asarray(b, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("w must be nonnegative")
    mu = _mu(mu, b.size)
    norm = bmo_norm(b, 1, mu=mu)
    if norm == 0:
        warnings.warn("constant symbol: John-Nirenberg ratio set to 0", RuntimeWarning)
        return 0.0
    means = level_means(b, mu)
    wQ = level_sums(w * mu.cell_mass)
    best = 0.0
    for k in range(mu.L + 1):
        rows = b.reshape(1 << k, -1)
        wm = (w * mu.cell_mass).reshape(1 << k, -1)
        num = (np.abs(rows - means[k][:, None]) ** s * wm).sum(axis=1)
        ok = wQ[k] > 0
        if np.any(ok):
            best = max(best, float(np.max(num[ok] / wQ[k][ok])))
    return best / norm ** s


# Bloom bookkeeping

def bloom_constant(w1, w2, w3, x: Sequence[float], gamma: float,
                   mu: Measure | None = None) -> dict:
    """Composite constant built from four ``A_{x_2}`` characteristics.

    ``(A[w1^x3]^((x1-2)/2) A[w2^x4 w2^x5]^(x1/2))^e A[w2]^e A[w2^x3 w3^-|x2|]^((2-gamma) e)``
    with ``e = max(1, 1/(x2 - 1))``.  Indices outside ``(1, inf)`` are formal.
    """
    x1, x2, x3, x4, x5 = (float(v) for v in x)
    e = max(1.0, 1.0 / (x2 - 1.0)) if x2 != 1 else None
    if e is None:
        raise ValueError("x2 = 1 makes the exponent max(1, 1/(x2-1)) undefined")
    A = lambda w: ap_constant(w, x2, mu=mu)
    a1 = A(w1 ** x3)
    a2 = A(w2 ** x4 * w2 ** x5)
    a3 = A(w2)
    a4 = A(w2 ** x3 * w3 ** (-abs(x2)))
    value = (a1 ** ((x1 - 2) / 2) * a2 ** (x1 / 2)) ** e * a3 ** e * a4 ** ((2 - gamma) * e)
    return {"value": float(value), "index": x2, "formal": is_formal_index(x2),
            "A": [a1, a2, a3, a4]}


@dataclass
class BloomReport:
    variant: str
    a: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)
    nu: dict = field(default_factory=dict)
    bigL: int | None = None
    gamma_tail: float | None = None
    nu_tail: np.ndarray | None = None
    constants: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "a": {str(i + 1): v for i, v in self.a.items()},
            "gamma": {str(i + 1): v for i, v in self.gamma.items()},
            "L": self.bigL,
            "gamma_tail": self.gamma_tail,
            "constants": {k: {kk: vv for kk, vv in v.items() if kk != "A"}
                          for k, v in self.constants.items()},
        }


def _floor_split(x: float) -> tuple[int, float]:
    """``(n, gamma)`` with ``n = floor(x)`` and ``gamma = x - (n - 1)`` in ``[1, 2)``."""
    n = math.floor(x + 1e-12)
    return n, x - (n - 1)


def bloom_derive(cfg: ExponentConfig, us: WeightTuple, ws: WeightTuple,
                 variant: str = "maximal", i0: int | None = None,
                 mu: Measure | None = None) -> BloomReport:
    """Derived Bloom weights and the composite constants.

    ``variant="maximal"`` uses the total tail order ``s' * sum k_l`` over
    ``tau \\ tau'``; ``variant="holder"`` singles out slot ``i0`` with order
    ``2 k_{i0} s'``.
    """
    if variant not in ("maximal", "holder"):
        raise ValueError(f"unknown variant {variant!r}")
    tau = cfg.tau
    tp = cfg.tau_prime if cfg.tau_prime is not None else frozenset()
    mu = _mu(mu, us.components[0].size)
    rep = BloomReport(variant)
    omega = ws.product
    qp = cfg.q_prime
    sp = cfg.s_prime
    bad = []
    for i in sorted(tp):
        order = cfg.k[i] * cfg.r[i]
        if order <= 0:
            bad.append(f"k_{i + 1} r_{i + 1} must be positive for slot {i + 1} in tau'")
            continue
        a, g = _floor_split(order)
        rep.a[i], rep.gamma[i] = a, g
        rep.nu[i] = (us.components[i] / ws.components[i]) ** (-cfg.r[i] / (a + g - 1))
    v = us.product
    tail = sorted(tau - tp)
    if variant == "maximal":
        order = sp * sum(cfg.k[l] for l in tail)
        scale = 1.0
    else:
        if i0 is None or i0 not in tail:
            bad.append("the holder variant needs i0 in tau \\ tau'")
            order = 0.0
        else:
            order = 2.0 * cfg.k[i0] * sp
        scale = 2.0
    if order > 0:
        L_, g_ = _floor_split(order)
        rep.bigL, rep.gamma_tail = L_, g_
        rep.nu_tail = (v / omega ** (2 * g_ - 3)) ** (scale * sp / (g_ + L_ - 1))
    elif variant == "maximal" and tail:
        bad.append("s' * sum k_l over tau \\ tau' must be positive")
    if bad:
        raise ExponentError(bad)
    for i in sorted(tp):
        p, r, g = cfg.p[i], cfg.r[i], rep.gamma[i]
        rep.constants[f"slot{i + 1}"] = bloom_constant(
            us.components[i], ws.components[i], rep.nu[i],
            (rep.a[i], p / r, p, p, -g * p / r), g, mu)
    if rep.bigL is not None:
        g = rep.gamma_tail
        rep.constants["tail"] = bloom_constant(
            v, omega, rep.nu_tail,
            (rep.bigL, -qp / (scale * sp), -qp, qp * (3 - 2 * g), -g * qp / (scale * sp)), g, mu)
    return rep


# sums over sparse families of cube coefficients

def _level_coeffs(lams: Mapping, L: int) -> list[np.ndarray]:
    out = [np.zeros(1 << k) for k in range(L + 1)]
    for Q, lam in lams.items():
        Q = DyadicCube(*Q)
        out[Q.level][Q.index] += lam
    return out


def _chain_matrix(coeffs: list[np.ndarray], L: int) -> np.ndarray:
    """``C[x, k]``: coefficient of the level-``k`` cube that contains cell ``x``."""
    return np.stack([np.repeat(c, 1 << (L - k)) for k, c in enumerate(coeffs)], axis=1)


def sparse_sum(lams: Mapping, L: int) -> np.ndarray:
    """``sum_Q lambda_Q chi_Q`` on the level-``L`` grid."""
    return _chain_matrix(_level_coeffs(lams, L), L).sum(axis=1)


def chain_power_check(lams: Mapping, p: float, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of ``(sum lam_Q chi_Q)^p <= p sum lam_Q chi_Q (sum_{Q' in Q} lam_Q' chi_Q')^(p-1)``.

    At a cell the cubes containing it form a chain, so the inner sum is the
    tail of that chain from ``Q`` downwards.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    C = _chain_matrix(_level_coeffs(lams, L), L)
    total = C.sum(axis=1)
    tails = np.cumsum(C[:, ::-1], axis=1)[:, ::-1]
    rhs = p * (C * tails ** (p - 1.0)).sum(axis=1)
    return total ** p, rhs


def cov_norm_ratio(lams: Mapping, p: float, w: np.ndarray, mu: Measure | None = None) -> float:
    """``||sum lam_Q chi_Q||_{L^p(w)}`` divided by its dyadic-Carleson rewriting."""
    w = np.asarray(w, dtype=float)
    mu = _mu(mu, w.size)
    L = mu.L
    coeffs = _level_coeffs(lams, L)
    F = _chain_matrix(coeffs, L).sum(axis=1)
    lhs = float(np.sum(F ** p * w * mu.cell_mass)) ** (1.0 / p)
    wQ = level_sums(w * mu.cell_mass)
    # inner[k][j] = sum over sub-cubes Q' of lam_Q' w(Q'), bottom-up
    inner = [c * m for c, m in zip(coeffs, wQ)]
    for k in range(L - 1, -1, -1):
        inner[k] = inner[k] + inner[k + 1].reshape(-1, 2).sum(axis=1)
    rhs = math.fsum(float(x) for k in range(L + 1)
                    for x in coeffs[k] * (inner[k] / wQ[k]) ** (p - 1.0) * wQ[k])
    return lhs / rhs ** (1.0 / p) if rhs > 0 else (0.0 if lhs == 0 else math.inf)


def iterated_average_ratio(S: SparseFamily, f: np.ndarray, v: np.ndarray, r: float, m: int,
                           mu: Measure | None = None) -> float:
    """``sup_{Q in S}`` of the ratio between the local power integral and the iterated average.

    Left side: ``mu(Q)^{-1} int_Q (sum_{P in S, P in Q} v(P)/mu(P) chi_P)^{rm} |f|^r``.
    Right side: ``<A_{S,v}^{k-1}(h)>_Q`` with ``k = floor(rm)``, ``gamma = rm - (k-1)``
    and ``h = A_S(|f|^r)^{2-gamma} A_S(A_S(|f|^r) v)^{gamma-1} v``.
    """
    f = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    mu = _mu(mu, f.size)
    L = mu.L
    k, gamma = _floor_split(r * m)
    fr = np.abs(f) ** r
    Af = sparse_avg(S, fr, mu)
    h = Af ** (2 - gamma) * sparse_avg(S, Af * v, mu) ** (gamma - 1) * v
    it = h
    for _ in range(k - 1):
        it = sparse_avg(S, it, mu) * v
    vavg = level_means(v, mu)
    coeffs = [np.zeros(1 << j) for j in range(L + 1)]
    for Q in S.cubes:
        coeffs[Q.level][Q.index] = vavg[Q.level][Q.index]
    C = _chain_matrix(coeffs, L)
    masses = level_masses(mu)
    rhs_means = level_means(it, mu)
    worst = 0.0
    for Q in S:
        lo, hi = Q.cells(L)
        inner = C[lo:hi, Q.level:].sum(axis=1)
        lhs = float(np.sum(inner ** (r * m) * fr[lo:hi] * mu.cell_mass[lo:hi])) / masses[Q.level][Q.index]
        rhs = float(rhs_means[Q.level][Q.index])
        if rhs > 0:
            worst = max(worst, lhs / rhs)
        elif lhs > 0:
            return math.inf
    return worst
