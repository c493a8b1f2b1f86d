import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sparselab.experiments import (SHARP_K_CFG, random_reduce_instance, sharpness_k_closed_form,
                                   sharpness_k_value)
from sparselab.exponents import ExponentConfig, ExponentError
from sparselab.forms import FormInputs, cube_terms, form_A, form_B, plain_form, reduce_check
from sparselab.lattice import DyadicCube, Measure, SparseFamily, sample

ROOT = SparseFamily.of([DyadicCube(0, 0)])


def _random_family(rng, L, p=0.3):
    S = {(k, j) for k in range(L + 1) for j in range(1 << k) if rng.random() < p}
    return S or {(0, 0)}


def test_plain_form_examples():
    L = 8
    one = np.ones(1 << L)
    cfg = ExponentConfig(m=2, r=(1, 3))
    assert plain_form(FormInputs((one, one), one, cfg, ROOT), 2.0) == pytest.approx(1.0)
    J = 6
    inp = FormInputs((one,), one, ExponentConfig(eta=1.0), SparseFamily.nested_chain(J))
    assert plain_form(inp, 1.0) == pytest.approx((1 - 4.0 ** -(J + 1)) / 0.75, rel=1e-14)


def test_plain_form_matches_oracle(rng):
    L = 5
    S = _random_family(rng, L)
    fs = (rng.exponential(size=32), rng.exponential(size=32))
    g = rng.exponential(size=32)
    dens = rng.uniform(0.5, 2, 32)
    cfg = ExponentConfig(m=2, eta=0.3, r=(1.2, 2.0))
    got = plain_form(FormInputs(fs, g, cfg, SparseFamily.of(S), mu=Measure(dens)), 1.5)
    want = oracles.form_A(fs, g, [np.zeros(32)] * 2, cfg.r, 1.5, cfg.eta, (0, 0), (0, 0),
                          set(), S, L, dens)
    assert got == pytest.approx(want, rel=1e-12)


def test_form_A_without_symbols_is_plain(rng):
    L = 6
    fs = (rng.exponential(size=64),)
    g = rng.exponential(size=64)
    cfg = ExponentConfig(eta=0.5, r=(2,), s_prime=1.5)
    S = SparseFamily.of(_random_family(rng, L))
    inp = FormInputs(fs, g, cfg, S, (rng.normal(size=64),))
    assert form_A(inp) == pytest.approx(plain_form(inp, 1.5), rel=1e-14)


def test_form_A_sharpness_configuration():
    # frozen value: (1/12) sum_{j<=16} 2^-4j (1 - 4^(j-20)) = 0.0888888888888 (4/45 in the limit)
    v = sharpness_k_value(1.0, 20, 16)
    assert v == pytest.approx(0.08888888888878783, rel=1e-12)
    assert v == pytest.approx(sharpness_k_closed_form(1.0, 20, 16), rel=1e-12)
    assert abs(v - 4 / 45) < 1e-10


def test_form_A_sharpness_small_grid_matches_oracle():
    L, J = 7, 4
    x = sample(lambda x: x, L)
    one = np.ones(1 << L)
    got = form_A(FormInputs((one,), one, SHARP_K_CFG, SparseFamily.nested_chain(J), (x,)))
    S = {(j, 0) for j in range(J + 1)}
    want = oracles.form_A([one], one, [x], (2.0,), 2.0, 1.0, (2,), (1,), {0}, S, L)
    assert got == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("weighted", [False, True])
def test_form_A_matches_oracle(rng, weighted):
    L = 5
    S = _random_family(rng, L)
    fs = (rng.exponential(size=32), rng.exponential(size=32))
    g = rng.exponential(size=32)
    bs = (rng.normal(size=32), rng.normal(size=32))
    dens = rng.uniform(0.5, 2, 32) if weighted else None
    cfg = ExponentConfig(m=2, eta=0.7, r=(1.0, 2.5), s_prime=1.3, k=(3, 1), t=(1, 1), tau={0, 1})
    inp = FormInputs(fs, g, cfg, SparseFamily.of(S), bs, None if dens is None else Measure(dens))
    want = oracles.form_A(fs, g, bs, cfg.r, 1.3, 0.7, cfg.k, cfg.t, cfg.tau, S, L, dens)
    assert form_A(inp) == pytest.approx(want, rel=1e-12)


@given(st.integers(0, 10_000))
def test_form_A_symbol_homogeneity(seed):
    rng = np.random.default_rng(seed)
    inp = random_reduce_instance(rng, levels=(4, 6))
    lam = 3.0
    scaled = inp.with_(bs=tuple(lam * b for b in inp.bs))
    power = sum(inp.cfg.k[i] for i in inp.cfg.tau)
    a, b = form_A(scaled), form_A(inp)
    assert a == pytest.approx(lam ** power * b, rel=1e-12, abs=1e-300)


def test_form_B_examples(rng):
    L = 6
    fs = (rng.exponential(size=64), rng.exponential(size=64))
    g = rng.exponential(size=64)
    S = SparseFamily.of(_random_family(rng, L))
    cfg = ExponentConfig(m=2, eta=0.2, r=(1, 2), s_prime=2, tau={0, 1})
    inp = FormInputs(fs, g, cfg, S, (rng.normal(size=64), rng.normal(size=64)))
    plain = plain_form(inp, 2.0)
    assert form_B(inp, frozenset({0, 1})) == pytest.approx(plain, rel=1e-14)
    const = inp.with_(cfg=cfg.with_(k=(2, 3)), bs=(np.full(64, 4.0), np.full(64, -1.0)))
    # constant symbols have zero oscillation, so every positive power kills the form
    for tp in (frozenset(), frozenset({0}), frozenset({0, 1})):
        assert form_B(const, tp) == 0.0


def test_form_B_matches_oracle(rng):
    L = 5
    S = _random_family(rng, L)
    fs = (rng.exponential(size=32), rng.exponential(size=32))
    g = rng.exponential(size=32)
    bs = (rng.normal(size=32), rng.normal(size=32))
    cfg = ExponentConfig(m=2, eta=0.4, r=(1.5, 1.0), s_prime=2.2, k=(2, 1), tau={0, 1})
    got = form_B(FormInputs(fs, g, cfg, SparseFamily.of(S), bs), frozenset({0}))
    want = oracles.form_B(fs, g, bs, cfg.r, 2.2, 0.4, cfg.k, {0, 1}, {0}, S, L)
    assert got == pytest.approx(want, rel=1e-12)


def test_form_B_rejects_bad_tau_prime(rng):
    cfg = ExponentConfig(m=2, r=(1, 1), k=(1, 1), tau={0})
    inp = FormInputs((np.ones(16),) * 2, np.ones(16), cfg, ROOT)
    with pytest.raises((ValueError, ExponentError)):
        form_B(inp, frozenset({1}))


def test_tau_outside_slots_rejected():
    with pytest.raises(ExponentError):
        ExponentConfig(m=1, k=(1,), tau={1})


def test_reduce_check_constant_symbols(rng):
    L = 6
    fs = (rng.exponential(size=64), rng.exponential(size=64))
    g = rng.exponential(size=64)
    S = SparseFamily.of(_random_family(rng, L))
    cfg = ExponentConfig(m=2, eta=0.3, r=(1, 2), s_prime=1.5, k=(2, 1), t=(1, 0), tau={0, 1})
    inp = FormInputs(fs, g, cfg, S, (np.full(64, 2.0), np.full(64, 5.0)))
    res = reduce_check(inp)
    plain = plain_form(inp, 1.5)
    assert res["lhs"] == 0.0 and res["rhs"] == 0.0
    assert res["holds"] and res["margin"] == 0.0
    # no positive powers of the oscillation at all: every subset gives the plain form
    flat = inp.with_(cfg=cfg.with_(k=(0, 0), t=(0, 0)))
    res = reduce_check(flat)
    assert res["lhs"] == pytest.approx(plain, rel=1e-14)
    assert res["rhs"] == pytest.approx(4 * plain, rel=1e-14)


@given(st.integers(0, 2 ** 32 - 1))
def test_reduction_inequality_fuzz(seed):
    res = reduce_check(random_reduce_instance(np.random.default_rng(seed)))
    assert res["holds"] and res["per_cube_holds"]
    assert res["margin"] >= -1e-10


def test_reduction_per_cube_first_order(rng):
    L = 6
    cfg = ExponentConfig(m=1, eta=0.5, r=(1.5,), s_prime=2.0, k=(1,), t=(0,), tau={0})
    S = SparseFamily.full_levels(L)
    inp = FormInputs((rng.exponential(size=64),), rng.exponential(size=64), cfg, S,
                     (rng.normal(size=64),))
    _, a = cube_terms(inp, "A")
    _, b0 = cube_terms(inp, "B", tau_prime=frozenset())
    _, b1 = cube_terms(inp, "B", tau_prime=frozenset({0}))
    assert np.all(a <= (b0 + b1) * (1 + 1e-12))
    assert reduce_check(inp)["per_cube_holds"]


@given(st.integers(0, 10_000))
def test_forms_monotone(seed):
    rng = np.random.default_rng(seed)
    inp = random_reduce_instance(rng, levels=(4, 5))
    N = inp.g.size
    bigger = inp.with_(fs=tuple(f + rng.exponential(size=N) for f in inp.fs),
                       g=inp.g + rng.exponential(size=N))
    extra = {DyadicCube(k, int(rng.integers(0, 1 << k))) for k in range(inp.mu.L + 1)}
    wider = inp.with_(S=SparseFamily.of(set(inp.S.cubes) | extra))
    base = form_A(inp)
    assert base <= form_A(bigger) * (1 + 1e-12)
    assert base <= form_A(wider) * (1 + 1e-12)
    tp = frozenset(inp.cfg.tau)
    assert form_B(inp, tp) <= form_B(wider, tp) * (1 + 1e-12)


def test_summation_keeps_tiny_terms():
    # a long chain with eta = 3 spans terms from 1 down to 2^-80
    L = 20
    one = np.ones(1 << L)
    inp = FormInputs((one,), one, ExponentConfig(eta=3.0), SparseFamily.nested_chain(20))
    want = math.fsum(2.0 ** (-4 * j) for j in range(21))
    assert plain_form(inp, 1.0) == want
