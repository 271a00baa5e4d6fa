import random
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats

from rotorlab.alpha_builder import constant_digits
from rotorlab.birkhoff import make_context, sum_naive
from rotorlab.cf_core import CfDigits
from rotorlab.observable import SawtoothCombo, eval_combo
from rotorlab.temporal import (
    GAUSSIAN,
    LAWS,
    UNIFORM,
    UNIFORM_CONV,
    BadStartingPoint,
    decompose,
    ensemble,
    histogram_csv,
    ks_distance,
    ks_normalized,
    mid_block_horizon,
    normalize_star,
    parse_grid,
    percentile,
    scan_csv,
    scan_tdlt,
    schedule_thm_uniform,
)

H = SawtoothCombo.sawtooth()
GOLDEN = constant_digits(1, 150)
CTX = make_context(GOLDEN, 20_000)


def test_ensemble_examples():
    x = Fraction(2, 7)
    e1 = ensemble(H, CTX, x, 1)
    assert e1.values.tolist() == [float(eval_combo(H, x))]
    e = ensemble(H, CTX, 0, 8)
    assert e.values.tolist() == [float(sum_naive(H, CTX, 0, n).value) for n in range(1, 9)]
    assert e.mean == pytest.approx(sum(float(sum_naive(H, CTX, 0, n).value) for n in range(1, 9)) / 8)
    assert e.provenance["x"] == "0/1"


def test_percentile_examples():
    assert percentile(UNIFORM, Fraction(1, 3), "+") == Fraction(1, 3)
    assert percentile(UNIFORM, Fraction(1, 3), "-") == Fraction(1, 3)
    assert percentile([0.5] * 9, Fraction(1, 3), "-") == 0.5
    assert percentile([0.5] * 9, Fraction(1, 3), "+") == 0.5
    assert percentile([4, 1, 3, 2], Fraction(1, 2), "-") == 2
    assert percentile([4, 1, 3, 2], Fraction(1, 2), "+") == 3
    with pytest.raises(ValueError):
        percentile([1, 2], 0, "+")
    with pytest.raises(ValueError):
        percentile([1, 2], Fraction(1, 2), "x")


def test_percentile_inequalities():
    rng = random.Random(4)
    for _ in range(200):
        s = [rng.randrange(10) for _ in range(rng.randrange(1, 30))]
        t = Fraction(rng.randrange(1, 100), 100)
        n = len(s)
        hi, lo = percentile(s, t, "+"), percentile(s, t, "-")
        assert Fraction(sum(v <= hi for v in s), n) >= t
        assert Fraction(sum(v < lo for v in s), n) <= t
        # literal definitions: chi+ is the least value with P(X <= v) > t
        assert hi == min(v for v in s if Fraction(sum(w <= v for w in s), n) > t)
        below = [v for v in s if Fraction(sum(w <= v for w in s), n) < t]
        lower_candidates = [v for v in s if Fraction(sum(w < v for w in s), n) < t]
        assert lo == max(lower_candidates)
        assert all(v <= lo for v in below)


@pytest.mark.parametrize("law", list(LAWS.values()), ids=list(LAWS))
def test_percentile_lemma_continuous_laws(law):
    for t in (0.1, 1 / 3, 0.5, 2 / 3, 0.9):
        q = percentile(law, t, "+")
        assert float(law.cdf(q)) == pytest.approx(t, abs=1e-12)


def test_uniform_conv_cdf_matches_convolution():
    # density of U+U' is the triangle on [0, 2]
    for t in (0.2, 0.7, 1.0, 1.3, 1.9):
        val, _ = integrate.quad(lambda s: min(s, 2 - s), 0, t, points=[1.0] if t > 1 else None)
        assert float(UNIFORM_CONV.cdf(t)) == pytest.approx(val, abs=1e-10)
    assert float(UNIFORM_CONV.cdf(0.5)) == 0.125
    assert float(UNIFORM_CONV.cdf(1.5)) == 1 - 0.125


def test_star_recovery():
    rng = np.random.default_rng(20240601)
    s = 5 + 10 * rng.random(100_000)
    norm = normalize_star(s)
    assert abs(norm.A - 5) <= 0.5 and abs(norm.B - 10) <= 0.5
    assert normalize_star(np.ones(50)).degenerate
    assert np.isnan(ks_normalized(np.ones(50), UNIFORM))
    a, b = 3.0, 2.0
    n2 = normalize_star(a + b * s)
    assert n2.A == pytest.approx(a + b * norm.A, rel=1e-12)
    assert n2.B == pytest.approx(b * norm.B, rel=1e-12)


def test_star_consistency_growing_scale():
    rng = np.random.default_rng(9)
    for BN in (10.0, 1e3, 1e5):
        AN = 7 * BN
        s = AN + BN * rng.random(50_000)
        n = normalize_star(s)
        assert abs(n.A / BN - AN / BN) < 0.02
        assert abs(n.B / BN - 1) < 0.02


def test_ks_examples():
    N = 999
    grid = np.arange(1, N + 1) / (N + 1)
    assert ks_distance(grid, UNIFORM, 0, 1) <= 1 / (N + 1) + 1e-15
    g = np.array([GAUSSIAN.ppf(t) for t in grid])
    assert ks_distance(g, GAUSSIAN, 0, 1) <= 1 / (N + 1) + 1e-12
    assert ks_distance(np.full(10, 0.5), UNIFORM, 0, 1) == pytest.approx(0.5)
    u = np.random.default_rng(20240601).random(10_000)
    assert ks_distance(u, UNIFORM, 0, 1) <= 0.02
    assert ks_distance(u, UNIFORM, 0, 1) == pytest.approx(stats.kstest(u, "uniform").statistic, abs=1e-12)
    with pytest.raises(ValueError):
        ks_distance(u, UNIFORM, 0, 0)


def test_schedule_examples():
    d = CfDigits((1, 1, 1, 1, 4) + (1,) * 60)
    ctx = make_context(d, 1000)
    x = Fraction(1, 10)
    entry = schedule_thm_uniform(d, H, ctx, x, 1, 4, eps1=0)
    assert (entry.L_k, entry.q_nk, entry.N_k) == (4, 5, 20)
    if entry.mu_k > 0:
        assert entry.A_k == 0
    else:
        assert entry.A_k == -entry.B_k
    with pytest.raises(BadStartingPoint):
        schedule_thm_uniform(d, H, ctx, x, 1, 4, eps1=10)
    with pytest.raises(ValueError):
        schedule_thm_uniform(d, H, ctx, x, 0, 4)


def test_schedule_sign_formula():
    d = CfDigits((1, 1, 1, 1, 4) + (1,) * 60)
    ctx = make_context(d, 1000)
    signs = set()
    for i in range(1, 40):
        e = schedule_thm_uniform(d, H, ctx, Fraction(i, 40), 1, 4, eps1=0)
        signs.add(e.mu_k > 0)
        assert e.A_k == (0 if e.mu_k > 0 else -e.B_k)
    assert signs == {True, False}


def test_decompose_independence():
    q, lmax = 13, 20
    for n in range(0, 300):
        ell, r = decompose(n, q)
        assert n == ell * q + r and 0 <= r < q
    rng = np.random.default_rng(20240601)
    n = rng.integers(0, lmax * q, size=50_000)
    ell, r = np.divmod(n, q)
    table = np.zeros((lmax, q))
    np.add.at(table, (ell, r), 1)
    assert stats.chi2_contingency(table).pvalue > 0.01
    assert stats.chisquare(np.bincount(r, minlength=q)).pvalue > 0.01
    assert stats.chisquare(np.bincount(ell, minlength=lmax)).pvalue > 0.01


def test_mid_block_horizon():
    assert mid_block_horizon(10, 3.0, Fraction(1, 2)) == 60
    assert mid_block_horizon(10, 0.1, 1) == 10
    with pytest.raises(ValueError):
        mid_block_horizon(10, 1.0, 0)


def test_scan_and_grid():
    assert parse_grid("geometric:100:1600:2") == [100, 200, 400, 800, 1600]
    assert parse_grid("linear:10:30:10") == [10, 20, 30]
    assert parse_grid("300,100,200,100") == [100, 200, 300]
    with pytest.raises(ValueError):
        parse_grid("geometric:1:10:1")
    rows = scan_tdlt(H, CTX, Fraction(1, 3), [2000, 500, 1000])
    assert [r.N for r in rows] == [500, 1000, 2000]
    text = scan_csv(rows, "config_digest=abc")
    lines = text.splitlines()
    assert lines[0] == "# config_digest=abc"
    assert lines[1] == "N,A_star,B_star,ks_u01,ks_gauss,ks_conv"
    assert len(lines) == 5
    assert all(0 <= r.ks_u01 <= 1 for r in rows)
    assert histogram_csv(np.arange(10.0), bins=5).splitlines()[0] == "bin_lo,bin_hi,count"
