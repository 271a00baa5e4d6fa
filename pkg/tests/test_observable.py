import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorlab.observable import (
    EmptySyndeticSet,
    SawtoothCombo,
    d_value,
    d_value_gamma,
    d_value_quadrature,
    default_eps0,
    discontinuities,
    eval_combo,
    l2_norm_sq,
    l2_norm_sq_fourier,
    left_limit,
    syndetic_scan,
    variation,
)

H = SawtoothCombo.sawtooth()

combos = st.builds(
    lambda bs, shifts: SawtoothCombo(tuple(bs[: len(shifts)]), tuple(shifts)),
    st.lists(st.fractions(-3, 3).filter(lambda v: v != 0), min_size=4, max_size=4),
    st.lists(st.fractions(0, 1, max_denominator=12).filter(lambda v: v < 1), min_size=1, max_size=4, unique=True),
)


def test_eval_examples():
    assert eval_combo(H, Fraction(1, 4)) == Fraction(-1, 4)
    assert eval_combo(H, 0) == Fraction(-1, 2)
    f = SawtoothCombo((1, -1), (0, Fraction(3, 10)))
    assert eval_combo(f, Fraction(1, 2)) == Fraction(-3, 10)


def test_float_inputs_read_as_decimals():
    f = SawtoothCombo((1, -1), (0, 0.3))
    assert f.beta[1] == Fraction(3, 10)


def test_variation_examples():
    assert variation(H) == 2
    f = SawtoothCombo((1, -1), (0, Fraction(1, 3)))
    assert variation(f) == 4
    assert variation(f.scaled(Fraction(-5, 2))) == Fraction(5, 2) * variation(f)


def test_discontinuities_examples():
    assert discontinuities(H) == [0]
    assert discontinuities(SawtoothCombo((1, 2), (0, 0.3))) == [0, Fraction(7, 10)]


@given(combos)
def test_jumps_and_count(f):
    pts = discontinuities(f)
    assert len(pts) == f.d
    for bm, bt in zip(f.b, f.beta):
        x = (-bt) % 1
        assert eval_combo(f, x) - left_limit(f, x) == -bm


def test_d_value_examples():
    for n in (1, 2, 7, 100):
        assert d_value(H, n) == pytest.approx(0.5, abs=1e-15)
    assert d_value_gamma((1, 1), (0, Fraction(1, 2))) == pytest.approx(0, abs=1e-15)
    assert d_value_gamma((1, 1), (0, Fraction(1, 4))) == pytest.approx(1, abs=1e-12)
    assert d_value_quadrature((1, 1), (0, 0.25), 10_000) == pytest.approx(1, abs=1e-12)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0, 1)), min_size=1, max_size=5))
def test_d_value_matches_quadrature(pairs):
    b = [p[0] for p in pairs]
    g = [p[1] for p in pairs]
    assert d_value_gamma(b, g) >= 0
    assert abs(d_value_gamma(b, g) - d_value_quadrature(b, g)) <= 1e-8


@settings(max_examples=30)
@given(combos)
def test_norm_identity_with_tail_bound(f):
    exact = float(l2_norm_sq(f))
    N = 400
    partial = l2_norm_sq_fourier(f, N)
    assert partial <= exact + 1e-12
    assert exact - partial <= float(f.abs_sum) ** 2 / N


def test_norm_of_sawtooth():
    assert l2_norm_sq(H) == Fraction(1, 12)
    assert l2_norm_sq_fourier(H, 20000) == pytest.approx(1 / 12, abs=1e-4)


def test_norm_by_quadrature():
    f = SawtoothCombo((1, Fraction(-1, 2)), (0, Fraction(1, 3)))
    xs = (np.arange(200_000) + 0.5) / 200_000
    vals = np.zeros_like(xs)
    for bm, bt in zip(f.b, f.beta):
        vals += float(bm) * (np.mod(xs + float(bt), 1.0) - 0.5)
    assert float(np.mean(vals**2)) == pytest.approx(float(l2_norm_sq(f)), abs=1e-5)


def test_syndetic_examples():
    rep = syndetic_scan(H, 0.25, 200)
    assert rep.members == tuple(range(1, 201)) and rep.max_gap == 1 and rep.lower_density_estimate == 1
    # b=(1,1), beta=(0,1/2): D = (2 + 2cos(pi n))/2 vanishes at odd n, so only even n survive
    even = syndetic_scan(SawtoothCombo((1, 1), (0, Fraction(1, 2))), 0.1, 100)
    assert even.members == tuple(range(2, 101, 2)) and even.max_gap == 2
    # the antiphase combination keeps the odd n
    odd = syndetic_scan(SawtoothCombo((1, -1), (0, Fraction(1, 2))), 0.1, 100)
    assert odd.members == tuple(range(1, 101, 2)) and odd.max_gap == 2


def test_syndetic_density_monotone():
    f = SawtoothCombo((1, Fraction(1, 2), -1), (0, Fraction(1, 5), Fraction(2, 3)))
    top = max(d_value(f, n) for n in range(1, 200))
    dens = [syndetic_scan(f, e, 300).lower_density_estimate for e in np.linspace(0.01, top * 0.99, 12)]
    assert all(a >= b for a, b in zip(dens, dens[1:]))


def test_syndetic_errors_and_defaults():
    with pytest.raises(EmptySyndeticSet):
        syndetic_scan(H, 0.6)
    assert default_eps0(H) == pytest.approx(0.25)
    rep = syndetic_scan(H)
    assert rep.contains(10**12)
    assert rep.to_csv().splitlines()[0] == "n,D"


def test_combo_validation():
    with pytest.raises(ValueError):
        SawtoothCombo((1, 1), (0, 0))
    with pytest.raises(ValueError):
        SawtoothCombo((0,), (0,))
    with pytest.raises(ValueError):
        SawtoothCombo((1,), (0, Fraction(1, 2)))
    f = SawtoothCombo((1, Fraction(-1, 3)), (Fraction(1, 7), Fraction(5, 6)))
    assert SawtoothCombo.from_json(f.to_json()) == f
