"""Lower bounds for weighted operator norms by structured test-function search.

Estimates are running maxima over a deterministic candidate stream, so they
only grow as more trials are allowed.  Every new record is refined by
coordinate ascent over dyadic blocks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exponents import ExponentConfig, ExponentError, recip
from .forms import FormInputs, plain_form
from .lattice import DyadicCube, Measure, SparseFamily, grid_level, lp_norm, weak_quasinorm
from .operators import dyadic_maximal
from .sparsify import sparse_from_maximal
from .weights import WeightTuple, multiweight_constant

__all__ = [
    "SearchConfig",
    "SearchProblem",
    "strong_norm_search",
    "weak_norm_search",
    "extremal_candidates",
    "rescaling_gap",
    "maximal_equiv_report",
]

FAMILIES = ("indicators", "steps", "spikes", "extremals")


@dataclass(frozen=True)
class SearchConfig:
    families: tuple = FAMILIES
    trials: int = 32
    seed: int = 0
    block_level: int = 4
    max_sweeps: int = 12
    indicator_levels: int = 6

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown candidate families {sorted(unknown)}")


@dataclass
class SearchProblem:
    """What is being maximised: output norm over the product of weighted input norms.

    ``in_p[j]`` and ``weights[j]`` define ``||f_j||_{L^{p_j}(w_j^{p_j})}``.  The
    output is measured in ``L^{out_p}`` against the density ``out_density``
    (strong or weak); a scalar-valued evaluator is compared directly.
    ``r[j]`` feeds the extremal candidates.
    """

    evaluator: Callable
    in_p: tuple
    weights: tuple
    r: tuple
    out_p: float
    out_density: np.ndarray | None = None
    weak: bool = False

    def ratio(self, fs) -> float:
        num = self.measure_output(self.evaluator(fs))
        den = 1.0
        for f, p, w in zip(fs, self.in_p, self.weights):
            den *= lp_norm(f * w, p)
        if den == 0:
            return math.nan
        return num / den

    def measure_output(self, out) -> float:
        if np.ndim(out) == 0:
            return abs(float(out))
        out = np.asarray(out, dtype=float)
        mu = None if self.out_density is None else Measure(self.out_density)
        if self.weak:
            return weak_quasinorm(out, self.out_p, mu)
        return lp_norm(out, self.out_p, mu)


def _finite(x) -> bool:
    return isinstance(x, float) and math.isfinite(x)


def _v_weight(w: np.ndarray, r: float, p: float) -> tuple[np.ndarray | None, float]:
    """``v = w^{-1/(1/r - 1/p)}`` and the extremal power ``1/r``; ``None`` when ``r == p``."""
    d = recip(r) - recip(p)
    if d < -1e-14:
        raise ExponentError([f"extremal candidates need r <= p (r={r}, p={p})"])
    if abs(d) <= 1e-14:
        return None, 1.0 / r
    return w ** (-1.0 / d), 1.0 / r


def extremal_candidates(prob: SearchProblem, L: int):
    """``f_j = v_j^{1/r_j} chi_Q`` for every dyadic cube ``Q``.

    When ``r_j = p_j`` the corresponding average is a maximum, and the
    extremal concentrates on the cell of ``Q`` where ``w_j`` is smallest.
    """
    vs = [_v_weight(w, r, p) for w, r, p in zip(prob.weights, prob.r, prob.in_p)]
    N = 1 << L
    for k in range(L + 1):
        width = N >> k
        for j in range(1 << k):
            lo, hi = j * width, (j + 1) * width
            fs = []
            for (v, e), w in zip(vs, prob.weights):
                f = np.zeros(N)
                if v is None:
                    f[lo + int(np.argmin(w[lo:hi]))] = 1.0
                else:
                    f[lo:hi] = v[lo:hi] ** e
                fs.append(f)
            yield fs


def _structured(prob: SearchProblem, sc: SearchConfig, L: int):
    N = 1 << L
    m = len(prob.in_p)
    if "indicators" in sc.families:
        for k in range(min(L, sc.indicator_levels) + 1):
            width = N >> k
            for j in range(1 << k):
                f = np.zeros(N)
                f[j * width:(j + 1) * width] = 1.0
                yield [f] * m
    if "extremals" in sc.families or prob.weak:
        yield from extremal_candidates(prob, L)


def _random_candidate(rng, prob: SearchProblem, sc: SearchConfig, L: int):
    N = 1 << L
    x = (np.arange(N) + 0.5) / N
    fams = [f for f in ("steps", "spikes", "indicators") if f in sc.families] or ["steps"]
    out = []
    for p in prob.in_p:
        fam = fams[int(rng.integers(len(fams)))]
        if fam == "steps":
            lev = int(rng.integers(0, min(L, 6) + 1))
            vals = rng.lognormal(0.0, 1.0, 1 << lev) * (rng.random(1 << lev) < 0.7)
            if not vals.any():
                vals[0] = 1.0
            f = np.repeat(vals, N >> lev)
        elif fam == "spikes":
            a = float(rng.uniform(0.05, 0.95)) / p
            c = 2.0 ** -int(rng.integers(0, min(L, 8)))
            shift = float(rng.random())
            y = (x - shift) % 1.0
            f = np.where(y < c, y ** -a, 0.0)
        else:
            lev = int(rng.integers(0, L + 1))
            j = int(rng.integers(0, 1 << lev))
            f = np.zeros(N)
            f[j * (N >> lev):(j + 1) * (N >> lev)] = 1.0
        out.append(f)
    return out


def _ascend(prob: SearchProblem, fs, best: float, sc: SearchConfig, L: int):
    """Multiply one dyadic block of one slot by 1/2 or 2 while that helps."""
    lev = min(sc.block_level, L)
    width = (1 << L) >> lev
    fs = [f.copy() for f in fs]
    idle = 0
    sweeps = 0
    while idle < 2 and sweeps < sc.max_sweeps:
        improved = False
        for slot in range(len(fs)):
            for blk in range(1 << lev):
                sl = slice(blk * width, (blk + 1) * width)
                if not fs[slot][sl].any():
                    continue
                for fac in (0.5, 2.0):
                    trial = list(fs)
                    g = fs[slot].copy()
                    g[sl] *= fac
                    trial[slot] = g
                    val = prob.ratio(trial)
                    if _finite(val) and val > best * (1 + 1e-12):
                        best, fs = val, trial
                        improved = True
        sweeps += 1
        idle = 0 if improved else idle + 1
    return best, fs


def _spot_check_homogeneity(prob: SearchProblem, fs) -> None:
    base = prob.measure_output(prob.evaluator(fs))
    if base == 0 or not math.isfinite(base):
        return
    scaled = [2.0 * fs[0]] + list(fs[1:])
    val = prob.measure_output(prob.evaluator(scaled))
    if abs(val - 2.0 * base) > 1e-8 * abs(2.0 * base):
        raise AssertionError("evaluator is not homogeneous of degree 1 in the first slot")


def _search(prob: SearchProblem, sc: SearchConfig, L: int, on_record=None) -> dict:
    best = 0.0
    best_fs = None
    checked = False

    def consider(fs):
        nonlocal best, best_fs, checked
        val = prob.ratio(fs)
        if not _finite(val):
            if not (isinstance(val, float) and math.isnan(val)):
                warnings.warn("discarding candidate with non-finite ratio", RuntimeWarning)
            return
        if not checked:
            _spot_check_homogeneity(prob, fs)
            checked = True
        if val > best:
            best, best_fs = val, fs
            if on_record is not None:
                on_record(fs)

    for fs in _structured(prob, sc, L):
        consider(fs)
    if best_fs is not None:
        best, best_fs = _ascend(prob, best_fs, best, sc, L)
    rng = np.random.default_rng(sc.seed)
    for _ in range(sc.trials):
        fs = _random_candidate(rng, prob, sc, L)
        before = best
        consider(fs)
        if best > before:
            best, best_fs = _ascend(prob, best_fs, best, sc, L)
    return {"estimate": best, "argmax": best_fs}


def strong_norm_search(prob: SearchProblem, sc: SearchConfig, on_record=None) -> float:
    """Lower bound for ``sup ||T f|| / prod ||f_j||`` with the output in strong ``L^{out_p}``."""
    prob = SearchProblem(prob.evaluator, prob.in_p, prob.weights, prob.r, prob.out_p,
                         prob.out_density, weak=False)
    L = grid_level(prob.weights[0].size)
    return _search(prob, sc, L, on_record)["estimate"]


def weak_norm_search(prob: SearchProblem, sc: SearchConfig) -> float:
    """Lower bound with the output in weak ``L^{out_p}``; always tries every extremal."""
    prob = SearchProblem(prob.evaluator, prob.in_p, prob.weights, prob.r, prob.out_p,
                         prob.out_density, weak=True)
    L = grid_level(prob.weights[0].size)
    return _search(prob, sc, L)["estimate"]


def rescaling_gap(fs, cfg: ExponentConfig, mu: Measure | None = None) -> float:
    """Relative gap in the exact rescaling identity for the fractional maximal function.

    ``||M_{eta,r}(f)||_{1/(1+eta)} = ||M_{eta/(1+eta), r(1+eta)}(f^{1/(1+eta)})||_1^{1+eta}``.
    """
    e = cfg.eta
    lhs = lp_norm(dyadic_maximal(fs, cfg, mu), 1.0 / (1.0 + e), mu)
    cfg = ExponentConfig(m=cfg.m, eta=e, r=cfg.r)
    cfg2 = ExponentConfig(m=cfg.m, eta=e / (1.0 + e), r=tuple(r * (1.0 + e) for r in cfg.r))
    gs = [np.abs(f) ** (1.0 / (1.0 + e)) for f in fs]
    rhs = lp_norm(dyadic_maximal(gs, cfg2, mu), 1.0, mu) ** (1.0 + e)
    if lhs == rhs:
        return 0.0
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs))


def _lifted_problem(W: WeightTuple, cfg: ExponentConfig, evaluator, weak: bool) -> SearchProblem:
    lc = cfg.lifted()
    return SearchProblem(evaluator, lc.p, W.extended(), lc.r, lc.q, None, weak)


def maximal_equiv_report(W: WeightTuple, cfg: ExponentConfig, sc: SearchConfig) -> dict:
    """Weight constant against searched norms of the maximal function and the sparse forms.

    The searches run on the ``(m+1)``-slot formulation in which ``g`` pairs
    with ``L^{q'}(w^{-q'})``: the maximal function of ``(f, g)`` with exponents
    ``(r, s')`` into ``L^{1/(1+eta)}``, and the sparse form over the
    stopping family of ``(f, g)``.
    """
    if not cfg.preceq_star():
        raise ExponentError(["(r, s) <= (p, q) ordering violated"])
    char = multiweight_constant(W, cfg)
    lc = cfg.lifted()
    m = cfg.m
    L = grid_level(W.components[0].size)

    def lifted_max(fs):
        return dyadic_maximal(fs, lc)

    def form_eval(fs):
        S = sparse_from_maximal(fs, lc)["S"]
        inp = FormInputs(tuple(fs[:m]), fs[m], cfg, S)
        return plain_form(inp, cfg.s_prime)

    weak = weak_norm_search(_lifted_problem(W, cfg, lifted_max, True), sc)
    gaps = []

    def on_record(fs):
        gaps.append(rescaling_gap(fs[:m], cfg))

    strong = strong_norm_search(_lifted_problem(W, cfg, lifted_max, False), sc, on_record)
    form = strong_norm_search(_lifted_problem(W, cfg, form_eval, False), sc)
    if not char <= weak * (1 + 1e-6):
        raise AssertionError(f"weight constant {char} exceeds the weak-norm estimate {weak}")
    band = 2.0 ** (cfg.eta / (1.0 + cfg.eta) + 2.0)
    return {
        "charConst": char,
        "weakEst": weak,
        "strongEst": strong,
        "formEst": form,
        "ratios": {
            "weak_over_char": weak / char,
            "strong_over_form": strong / form if form else math.inf,
            "strong_over_form_pow": strong / form ** (1.0 + cfg.eta) if form else math.inf,
            "band": band,
        },
        "rescaling_max_gap": max(gaps, default=0.0),
        "L": L,
    }
