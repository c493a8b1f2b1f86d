import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparselab.exponents import ExponentConfig, ExponentError
from sparselab.normest import (SearchConfig, SearchProblem, extremal_candidates,
                               maximal_equiv_report, rescaling_gap, strong_norm_search,
                               weak_norm_search)
from sparselab.operators import dyadic_maximal
from sparselab.weights import WeightTuple, multiweight_constant

C1 = ExponentConfig()


def _problem(evaluator, L=6, p=2.0, w=None, weak=False):
    w = np.ones(1 << L) if w is None else w
    return SearchProblem(evaluator, (p,), (w,), (1.0,), p, None, weak)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(trials=0)
    with pytest.raises(ValueError):
        SearchConfig(families=("gaussians",))


def test_identity_evaluator_has_unit_norm():
    prob = _problem(lambda fs: fs[0])
    assert strong_norm_search(prob, SearchConfig(trials=8)) == pytest.approx(1.0, rel=1e-12)
    assert weak_norm_search(prob, SearchConfig(trials=8)) <= 1 + 1e-12


def test_ratio_edge_cases():
    prob = _problem(lambda fs: fs[0])
    assert math.isnan(prob.ratio([np.zeros(64)]))
    scalar = _problem(lambda fs: -float(np.mean(fs[0])))
    assert scalar.ratio([np.ones(64)]) == pytest.approx(1.0)


def test_non_homogeneous_evaluator_is_rejected():
    prob = _problem(lambda fs: fs[0] ** 2)
    with pytest.raises(AssertionError, match="homogeneous"):
        strong_norm_search(prob, SearchConfig(trials=1))


def test_extremal_candidates_shape(rng):
    L = 4
    w = np.exp(rng.normal(size=16))
    prob = SearchProblem(lambda fs: fs[0], (2.0,), (w,), (1.0,), 2.0)
    cands = list(extremal_candidates(prob, L))
    assert len(cands) == 2 ** (L + 1) - 1
    # r = 1, p = 2: v = w^-2, f = v on Q
    assert np.allclose(cands[0][0], w ** -2.0)
    flat = SearchProblem(lambda fs: fs[0], (2.0,), (w,), (2.0,), 2.0)
    root = next(iter(extremal_candidates(flat, L)))[0]
    assert root.sum() == 1.0 and root[np.argmin(w)] == 1.0
    with pytest.raises(ExponentError):
        list(extremal_candidates(SearchProblem(lambda fs: fs[0], (2.0,), (w,), (3.0,), 2.0), L))


def test_estimate_monotone_in_trials(rng):
    w = np.exp(0.5 * rng.normal(size=64))
    prob = _problem(lambda fs: dyadic_maximal(fs, C1), w=w)
    sc = lambda n: SearchConfig(trials=n, families=("steps", "spikes"))
    vals = [strong_norm_search(prob, sc(n)) for n in (1, 4, 16)]
    assert vals[0] <= vals[1] <= vals[2]


def test_search_is_deterministic(rng):
    w = np.exp(0.5 * rng.normal(size=64))
    prob = _problem(lambda fs: dyadic_maximal(fs, C1), w=w)
    sc = SearchConfig(trials=6, seed=4)
    assert strong_norm_search(prob, sc) == strong_norm_search(prob, sc)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_weak_estimate_dominates_weight_constant(seed):
    rng = np.random.default_rng(seed)
    L = 6
    cfg = ExponentConfig(m=1, r=(1,), p=(2,))
    W = WeightTuple((np.exp(0.7 * rng.normal(size=1 << L)),))
    lc = cfg.lifted()
    prob = SearchProblem(lambda fs: dyadic_maximal(fs, lc), lc.p, W.extended(), lc.r, lc.q)
    weak = weak_norm_search(prob, SearchConfig(trials=2))
    assert multiweight_constant(W, cfg) <= weak * (1 + 1e-6)


@given(st.integers(0, 10_000), st.sampled_from([0.25, 0.5, 1.0]))
def test_rescaling_gap_vanishes(seed, eta):
    rng = np.random.default_rng(seed)
    fs = [rng.exponential(size=64), rng.exponential(size=64)]
    assert rescaling_gap(fs, ExponentConfig(m=2, eta=eta, r=(1.0, 1.5))) <= 1e-10


def test_maximal_equiv_unit_weights():
    cfg = ExponentConfig(m=1, r=(1,), p=(2,))
    rep = maximal_equiv_report(WeightTuple.ones(1, 6), cfg, SearchConfig(trials=2))
    assert rep["charConst"] == pytest.approx(1.0)
    assert rep["ratios"]["weak_over_char"] >= 1 - 1e-6
    assert rep["strongEst"] >= rep["weakEst"] * (1 - 1e-12)
    assert rep["rescaling_max_gap"] <= 1e-10
    assert rep["formEst"] > 0 and rep["L"] == 6


def test_maximal_equiv_requires_ordering():
    with pytest.raises(ExponentError):
        maximal_equiv_report(WeightTuple.ones(1, 5), ExponentConfig(m=1, r=(3,), p=(2,)),
                             SearchConfig(trials=1))
