import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparselab.exponents import ExponentConfig, ExponentError, dual, recip


def test_dual_and_recip():
    assert dual(2) == 2
    assert dual(1) == math.inf and dual(math.inf) == 1
    assert recip(math.inf) == 0
    assert dual(4 / 3) == pytest.approx(4)


def test_defaults():
    c = ExponentConfig()
    assert c.m == 1 and c.r == (1.0,) and c.k == (0,) and c.t == (0,)
    assert c.s == math.inf and c.s_prime == 1.0
    assert c.p is None and c.q is None


def test_q_derived_from_p_and_eta():
    c = ExponentConfig(m=2, eta=0.25, r=(1, 1), p=(2, 2))
    assert c.q == pytest.approx(4 / 3, rel=1e-12)


def test_q_mismatch_named():
    with pytest.raises(ExponentError) as e:
        ExponentConfig(m=1, p=(2,), q=3)
    assert any("1/q" in v for v in e.value.violations)


def test_s_and_s_prime_derived():
    assert ExponentConfig(s_prime=4 / 3).s == pytest.approx(4)
    assert ExponentConfig(s=3).s_prime == pytest.approx(1.5)
    with pytest.raises(ExponentError):
        ExponentConfig(s=3, s_prime=2)


def test_all_violations_collected():
    with pytest.raises(ExponentError) as e:
        ExponentConfig(m=2, eta=-1, r=(0.5, 1), k=(1, 0), t=(2, 0), tau={5})
    v = e.value.violations
    assert len(v) >= 4


def test_orderings():
    c = ExponentConfig(m=1, r=(2,), p=(4,), s_prime=4 / 3)
    assert c.q == 4 and c.s == pytest.approx(4)
    assert not c.prec() and not c.preceq() and c.preceq_star()
    c2 = ExponentConfig(m=1, r=(1,), p=(2,))
    assert c2.prec() and c2.preceq() and c2.preceq_star()
    c3 = ExponentConfig(m=1, r=(2,), p=(2,))
    assert not c3.prec() and c3.preceq()
    with pytest.raises(ExponentError):
        ExponentConfig().prec()


def test_lifted_configuration():
    c = ExponentConfig(m=2, eta=0.5, r=(1, 1.5), p=(3, 3), s_prime=1.2)
    lc = c.lifted()
    assert lc.m == 3 and lc.eta == 0
    assert lc.r == (1.0, 1.5, 1.2)
    assert lc.p[2] == pytest.approx(c.q_prime)
    assert 1 / lc.q == pytest.approx(1 + c.eta)


@given(st.lists(st.floats(1.1, 10), min_size=1, max_size=3), st.floats(0, 0.4))
def test_q_identity_property(ps, eta):
    inv = sum(1 / p for p in ps) - eta
    if inv <= 0:
        return
    c = ExponentConfig(m=len(ps), eta=eta, r=(1,) * len(ps), p=tuple(ps))
    assert abs(1 / c.q - inv) <= 1e-12


def test_with_resets_derived_values():
    c = ExponentConfig(m=1, p=(2,), s_prime=2)
    c2 = c.with_(p=(4,))
    assert c2.q == pytest.approx(4)
    c3 = c.with_(s=3)
    assert c3.s_prime == pytest.approx(1.5)


def test_describe_prints_slots_one_based():
    c = ExponentConfig(m=2, r=(1, 1), k=(1, 0), tau={0})
    assert c.describe()["tau"] == [1]
