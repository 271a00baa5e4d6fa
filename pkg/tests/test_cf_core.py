import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorlab import cf_core
from rotorlab.cf_core import (
    CfDigits,
    InsufficientDigits,
    OstrowskiRep,
    RationalInterval,
    UndecidableError,
    best_approx_classify,
    convergent_matrix,
    convergents,
    cylinder,
    denominators,
    det,
    enclosure,
    expand_rational,
    glue,
    ostrowski_decode,
    ostrowski_encode,
    ostrowski_valid,
)

GOLDEN = CfDigits((1,) * 40)
PHI = (1 + math.sqrt(5)) / 2
digit_lists = st.lists(st.integers(1, 30), min_size=1, max_size=25)


def test_expand_examples():
    assert expand_rational(5, 8).digits == (1, 1, 1, 2)
    assert expand_rational(1, 2).digits == (2,)
    assert expand_rational(0, 1).digits == ()
    with pytest.raises(ZeroDivisionError):
        expand_rational(1, 0)
    with pytest.raises(ValueError):
        expand_rational(3, 2)


@given(st.integers(0, 10**30), st.integers(1, 10**30))
def test_expand_roundtrip(num, den):
    num %= den
    d = expand_rational(num, den)
    assert d.value() == Fraction(num, den)
    assert d.finite_exact
    if len(d) > 1:
        assert d.digits[-1] >= 2


def test_trailing_one_is_canonicalized():
    assert CfDigits.from_any([1, 1, 1, 1, 1], finite_exact=True).digits == (1, 1, 1, 2)


def test_convergent_examples():
    conv = convergents(CfDigits((1,) * 5), 5)
    assert [c.q for c in conv] == [1, 1, 2, 3, 5, 8]
    last = convergents(CfDigits((2,)), 1)[1]
    assert (last.p, last.q) == (1, 2)
    with pytest.raises(InsufficientDigits):
        convergents(CfDigits((1, 2)), 3)


@given(digit_lists)
def test_determinant_and_fibonacci_bound(digits):
    d = CfDigits(tuple(digits))
    conv = convergents(d, len(d))
    for a, b in zip(conv, conv[1:]):
        assert abs(b.p * a.q - a.p * b.q) == 1
        assert math.gcd(b.p, b.q) == 1
    for k, c in enumerate(conv):
        assert c.q >= PHI**k / 3


def test_enclosure_examples():
    box = enclosure(GOLDEN, 3)
    assert (box.lo, box.hi) == (Fraction(3, 5), Fraction(2, 3))
    assert box.lo < (math.sqrt(5) - 1) / 2 < box.hi
    first = enclosure(CfDigits((3, 1)), 0)
    assert (first.lo, first.hi) == (0, Fraction(1, 3))


@given(digit_lists)
def test_enclosures_nested_and_narrow(digits):
    d = CfDigits(tuple(digits))
    qs = denominators(d)
    for k in range(len(d) - 1):
        outer, inner = enclosure(d, k), enclosure(d, k + 1)
        assert outer.contains_interval(inner)
        assert outer.measure <= Fraction(1, qs[k] * qs[k + 1])
    # every completion of the known prefix lies inside
    for tail in ((1,), (7, 2), (100,)):
        v = CfDigits(d.digits + tail).value()
        assert v in enclosure(d, len(d) - 1)


def test_ostrowski_examples():
    r = ostrowski_encode(10, CfDigits((1,) * 6))
    assert r.nonzero() == {5: 1, 2: 1}
    assert ostrowski_decode(r, CfDigits((1,) * 6)) == 10
    assert set(ostrowski_encode(0, GOLDEN).digits) == {0}
    qs = denominators(GOLDEN, 10)
    for j in range(10):
        basis = OstrowskiRep(tuple(1 if i == j else 0 for i in range(10)))
        if ostrowski_valid(basis, GOLDEN):
            assert ostrowski_decode(basis, GOLDEN) == qs[j]


def test_ostrowski_roundtrip_small():
    d = CfDigits((1, 2, 3, 1, 4, 1, 1, 5, 2, 1, 1, 1, 3))
    for n in range(10**4):
        assert ostrowski_decode(ostrowski_encode(n, d), d) == n


def test_ostrowski_bijection_on_range():
    d = CfDigits((2, 1, 3, 2, 1, 2))
    K = len(d)
    q_K = denominators(d)[K]
    reps = {ostrowski_encode(n, d).digits for n in range(q_K)}
    assert len(reps) == q_K
    # every valid digit vector is hit: count them independently
    caps = [a - (1 if j == 0 else 0) for j, a in enumerate(d.digits)]
    valid = [v for v in itertools.product(*(range(c + 1) for c in caps)) if ostrowski_valid(OstrowskiRep(v), d)]
    assert set(valid) == reps


def test_ostrowski_rejects():
    with pytest.raises(ValueError):
        ostrowski_encode(10**9, CfDigits((1,) * 5))
    with pytest.raises(ValueError):
        ostrowski_decode(OstrowskiRep((0, 1, 1)), GOLDEN)


def test_cylinder_examples():
    for prefix, lo, hi, m in (([1], Fraction(1, 2), 1, Fraction(1, 2)),
                              ([2], Fraction(1, 3), Fraction(1, 2), Fraction(1, 6)),
                              ([1, 1], Fraction(1, 2), Fraction(2, 3), Fraction(1, 6))):
        c = cylinder(prefix)
        assert (c.interval.lo, c.interval.hi, c.measure) == (lo, hi, m)
    empty = cylinder([])
    assert (empty.interval.lo, empty.interval.hi) == (0, 1)


@settings(max_examples=50)
@given(st.lists(st.integers(1, 9), min_size=1, max_size=8), st.lists(st.integers(1, 9), min_size=1, max_size=4))
def test_cylinder_contains_its_numbers(prefix, tail):
    c = cylinder(prefix)
    # a final digit >= 2 keeps the number off the endpoint [prefix, 1]
    assert CfDigits(tuple(prefix + tail + [2])).value() in c.interval
    assert c.measure == c.interval.measure


def test_glue_examples():
    g = glue(CfDigits((1,)), CfDigits((1, 1)))
    assert g.holds and g.direct == convergent_matrix([1, 1, 1])
    assert abs(det(g.product)) == 1
    empty = glue(CfDigits((3, 4)), CfDigits(()))
    assert empty.suffix_matrix == ((1, 0), (0, 1)) and empty.holds


@given(digit_lists, st.lists(st.integers(1, 30), max_size=10))
def test_glue_property(a, b):
    assert glue(CfDigits(tuple(a)), CfDigits(tuple(b))).holds


def test_best_approx_examples():
    assert best_approx_classify(5, 8, GOLDEN, 4) is None
    d = CfDigits((1, 1, 1, 1, 100) + (1,) * 30)
    assert best_approx_classify(3, 5, d, 50) == 4


def test_best_approx_against_brute_force():
    d = CfDigits((2, 1, 9, 1, 1, 30, 2, 1, 1, 60) + (1,) * 40)
    alpha_box = cf_core.alpha_enclosure(d)
    conv = {c.q: c for c in convergents(d, len(d) - 1)}
    L = 8
    found = []
    for q in range(1, 1001):
        p = round(q * (alpha_box.lo + alpha_box.hi) / 2)
        if math.gcd(p, q) != 1:
            continue
        try:
            k = best_approx_classify(p, q, d, L)
        except UndecidableError:
            continue
        if k is not None:
            assert conv[q].index == k and conv[q].p == p
            assert d.a(k + 1) >= L / 2
            found.append(q)
    assert len(found) >= 2


def test_interval_basics():
    a = RationalInterval.open(0, Fraction(1, 2))
    assert 0 not in a and Fraction(1, 4) in a
    assert a.intersect(RationalInterval.closed(Fraction(1, 2), 1)) is not None
    assert RationalInterval.open(1, 1).is_empty


def test_json_roundtrip():
    d = CfDigits((1, 10**40, 3))
    assert CfDigits.from_json(d.to_json()).digits == d.digits
