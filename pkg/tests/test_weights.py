import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sparselab.exponents import ExponentConfig, ExponentError
from sparselab.lattice import GridSpec, Measure, SparseFamily, indicator, sample
from sparselab.weights import (WeightTuple, ap_constant, bloom_constant, bloom_derive, bmo_norm,
                               chain_power_check, cov_norm_ratio, is_formal_index,
                               iterated_average_ratio, john_nirenberg_ratio,
                               multiweight_constant, multiweight_constant_lifted, sparse_sum,
                               theta_exponent, theta_from, weighted_condition_ratio)


def _weight(rng, n, spread=1.0):
    return np.exp(spread * rng.normal(size=n))


# A_p

def test_ap_constant_examples():
    L = 6
    assert ap_constant(np.full(1 << L, 7.0), 3) == pytest.approx(1.0)
    two = np.r_[np.ones(32), 4 * np.ones(32)]
    assert ap_constant(two, 2) == pytest.approx(25 / 16, rel=1e-14)


@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_ap_constant_matches_brute_force(seed, p):
    rng = np.random.default_rng(seed)
    w = _weight(rng, 32)
    got = ap_constant(w, p)
    assert got == pytest.approx(oracles.ap(w, p, 5), rel=1e-12)
    assert got >= 1 - 1e-12
    assert ap_constant(9.0 * w, p) == pytest.approx(got, rel=1e-12)


def test_ap_constant_shifted_grid(rng):
    w = _weight(rng, 64)
    g = GridSpec(6, 0.5)
    assert ap_constant(w, 2, grid=g) == pytest.approx(ap_constant(np.roll(w, -32), 2), rel=1e-14)


def test_ap_formal_indices():
    x = sample(lambda x: x, 8)
    assert is_formal_index(-1) and is_formal_index(0.5) and not is_formal_index(2)
    val = ap_constant(x, -1)
    assert math.isfinite(val)
    with pytest.raises(ValueError):
        ap_constant(x, 1)
    with pytest.raises(ValueError):
        ap_constant(-x, 2)


# multilinear weight constant

def test_multiweight_matches_brute_force(rng):
    L = 5
    cfg = ExponentConfig(m=2, eta=0.25, r=(1.0, 1.5), p=(3.0, 4.0), s_prime=1.2)
    W = WeightTuple((_weight(rng, 32), _weight(rng, 32)))
    e = [1 / (1 / r - 1 / p) for r, p in zip(cfg.r, cfg.p)] + [1 / (1 / cfg.q - 1 / cfg.s)]
    ws = [1 / W.components[0], 1 / W.components[1], W.product]
    want = max(math.prod(oracles.avg(w, x, k, j, L) for w, x in zip(ws, e))
               for k, j in oracles.cubes(L))
    got = multiweight_constant(W, cfg)
    assert got == pytest.approx(want, rel=1e-12)
    assert multiweight_constant_lifted(W, cfg) == pytest.approx(got, rel=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_multiweight_reduces_to_ap_of_power(seed, p):
    # m = 1, r = 1, s = inf: constant^p is the A_p constant of w^p
    rng = np.random.default_rng(seed)
    w = _weight(rng, 64, 0.5)
    cfg = ExponentConfig(m=1, r=(1,), p=(p,))
    got = multiweight_constant(WeightTuple((w,)), cfg)
    assert got ** p == pytest.approx(ap_constant(w ** p, p), rel=1e-10)


def test_multiweight_unit_weights_and_max_slot():
    W = WeightTuple.ones(2, 6)
    cfg = ExponentConfig(m=2, r=(1, 2), p=(2, 2), s_prime=1)
    assert multiweight_constant(W, cfg) == pytest.approx(1.0)


def test_multiweight_requires_ordering(rng):
    W = WeightTuple((_weight(rng, 16),))
    with pytest.raises(ExponentError):
        multiweight_constant(W, ExponentConfig(m=1, r=(3,), p=(2,)))
    with pytest.raises(ValueError):
        multiweight_constant(WeightTuple.ones(2, 4), ExponentConfig(m=1, r=(1,), p=(2,)))


def test_weight_tuple_validation():
    with pytest.raises(ValueError):
        WeightTuple((np.r_[np.ones(15), 0.0],))
    with pytest.raises(ValueError):
        WeightTuple((np.ones(16), np.ones(32)))
    W = WeightTuple((np.full(16, 2.0), np.full(16, 3.0)))
    assert np.allclose(W.product, 6) and np.allclose(W.extended()[-1], 1 / 6)


@given(st.integers(0, 10_000))
def test_weighted_condition_ratio_is_sharp(seed):
    rng = np.random.default_rng(seed)
    cfg = ExponentConfig(m=2, eta=0.2, r=(1.0, 1.2), p=(3.0, 3.0), s_prime=1.5)
    W = WeightTuple((_weight(rng, 32, 0.5), _weight(rng, 32, 0.5)))
    ratio = weighted_condition_ratio(W, cfg)
    assert ratio <= 1 + 1e-10
    assert ratio == pytest.approx(1.0, rel=1e-10)


# theta

def test_theta_examples():
    assert theta_from((4,), (2,), 4, 4 / 3) == pytest.approx(2.0)
    assert theta_from((2, 3), (1, 1), math.inf, 1) == pytest.approx(2.0)
    assert theta_from((3,), (1,), 4, 3) == pytest.approx(4.0)
    with pytest.raises(ExponentError):
        theta_from((2,), (2,), 4, 1)
    with pytest.raises(ExponentError):
        theta_from((4,), (2,), 4 / 3, 4 / 3)
    cfg = ExponentConfig(m=1, r=(1,), p=(2,))
    assert theta_exponent(cfg) == pytest.approx(2.0)


# BMO

def test_bmo_examples():
    L = 8
    assert bmo_norm(np.full(1 << L, 3.0)) == 0.0
    E = indicator(0, 0.5, L)
    assert bmo_norm(E) == pytest.approx(0.5)
    assert bmo_norm(E, 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bmo_norm(E, 0.5)
    with pytest.raises(ValueError):
        bmo_norm(E, 2, nu=np.ones(1 << L))


@given(st.integers(0, 10_000), st.floats(-5, 5), st.floats(0.1, 10))
def test_bmo_invariances_and_oracle(seed, c, lam):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=32)
    n1 = bmo_norm(b)
    assert n1 == pytest.approx(oracles.bmo(b, 1, 5), rel=1e-12)
    assert bmo_norm(b, 2) == pytest.approx(oracles.bmo(b, 2, 5), rel=1e-12)
    assert bmo_norm(lam * b + c) == pytest.approx(lam * n1, rel=1e-10)
    assert n1 <= bmo_norm(b, 2) * (1 + 1e-12)


def test_weighted_bmo_matches_oracle(rng):
    b = rng.normal(size=32)
    nu = _weight(rng, 32)
    assert bmo_norm(b, nu=nu) == pytest.approx(oracles.bmo(b, 1, 5, nu=nu), rel=1e-12)
    assert bmo_norm(b, nu=np.ones(32)) == pytest.approx(bmo_norm(b), rel=1e-14)


def test_john_nirenberg_examples(rng):
    L = 7
    E = indicator(0, 0.5, L)
    assert john_nirenberg_ratio(E, np.ones(1 << L), 1) == pytest.approx(1.0)
    with pytest.warns(RuntimeWarning):
        assert john_nirenberg_ratio(np.ones(1 << L), np.ones(1 << L), 2) == 0.0
    b = np.log(sample(lambda x: x, L))
    assert math.isfinite(john_nirenberg_ratio(b, _weight(rng, 1 << L), 2))


# Bloom bookkeeping

def _bloom_cfg():
    return ExponentConfig(m=2, r=(1, 1), p=(3, 3), k=(1, 2), tau={0, 1}, tau_prime={0},
                          s_prime=1.25)


def test_bloom_equal_weights_give_unit_nu(rng):
    u = _weight(rng, 64, 0.3)
    us = WeightTuple((u, _weight(rng, 64, 0.3)))
    rep = bloom_derive(_bloom_cfg(), us, WeightTuple((u, _weight(rng, 64, 0.3))))
    assert np.allclose(rep.nu[0], 1.0, rtol=1e-14)


def test_bloom_floor_split_and_tail():
    cfg = _bloom_cfg().with_(r=(2.5, 1))
    W = WeightTuple.ones(2, 6)
    rep = bloom_derive(cfg, W, W)
    assert (rep.a[0], rep.gamma[0]) == (2, pytest.approx(1.5))
    # tail order s' * k_2 = 2.5
    assert rep.bigL == 2 and rep.gamma_tail == pytest.approx(1.5)
    assert all(c["value"] == pytest.approx(1.0) for c in rep.constants.values())
    s = rep.summary()
    assert s["a"] == {"1": 2} and "A" not in s["constants"]["tail"]


def test_bloom_holder_variant_needs_slot():
    W = WeightTuple.ones(2, 5)
    with pytest.raises(ExponentError):
        bloom_derive(_bloom_cfg(), W, W, variant="holder")
    rep = bloom_derive(_bloom_cfg(), W, W, variant="holder", i0=1)
    # order 2 k_2 s' = 5
    assert rep.bigL == 5 and rep.gamma_tail == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bloom_derive(_bloom_cfg(), W, W, variant="other")


def test_bloom_constant_unit_weights():
    one = np.ones(32)
    res = bloom_constant(one, one, one, (3, 2, 1.5, 1, -0.5), 1.5)
    assert res["value"] == pytest.approx(1.0) and not res["formal"]
    with pytest.raises(ValueError):
        bloom_constant(one, one, one, (3, 1, 1, 1, 1), 1.5)


# sums over sparse families

def _random_lams(rng, L, p=0.3):
    return {(k, j): float(rng.exponential())
            for k in range(L + 1) for j in range(1 << k) if rng.random() < p}


def test_sparse_sum_example():
    lams = {(0, 0): 1.0, (1, 1): 2.0, (2, 0): 3.0}
    assert np.allclose(sparse_sum(lams, 2), [4, 1, 3, 3])


@given(st.integers(0, 10_000), st.floats(1.0, 4.0))
def test_chain_power_inequality(seed, p):
    rng = np.random.default_rng(seed)
    lhs, rhs = chain_power_check(_random_lams(rng, 5), p, 5)
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-300)


def test_chain_power_equality_at_one(rng):
    lhs, rhs = chain_power_check(_random_lams(rng, 5), 1.0, 5)
    assert np.allclose(lhs, rhs, rtol=1e-14)
    with pytest.raises(ValueError):
        chain_power_check({}, 0.5, 4)


@given(st.integers(0, 10_000))
def test_cov_norm_ratio_bounds(seed):
    rng = np.random.default_rng(seed)
    lams = _random_lams(rng, 5) or {(0, 0): 1.0}
    w = _weight(rng, 32)
    assert cov_norm_ratio(lams, 1.0, w) == pytest.approx(1.0, rel=1e-12)
    assert cov_norm_ratio(lams, 2.0, w) <= math.sqrt(2) * (1 + 1e-12)


def test_iterated_average_ratio_first_order(rng):
    L = 6
    S = SparseFamily.of({(k, int(j)) for k in range(L) for j in rng.integers(0, 1 << k, 2)})
    f = rng.normal(size=1 << L)
    assert iterated_average_ratio(S, f, np.ones(1 << L), 1.0, 1) <= 1 + 1e-12
    v = _weight(rng, 1 << L, 0.3)
    val = iterated_average_ratio(S, f, v, 1.5, 2, Measure(_weight(rng, 1 << L, 0.2)))
    assert math.isfinite(val) and val > 0
