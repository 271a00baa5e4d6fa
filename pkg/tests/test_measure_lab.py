import math
import random
from fractions import Fraction

import numpy as np
import pytest

from rotorlab.alpha_builder import constant_digits
from rotorlab.birkhoff import PreconditionFailed, make_context
from rotorlab.cf_core import CfDigits, RationalInterval
from rotorlab.measure_lab import (
    PsiSpec,
    a_k_measure,
    claim_m,
    coprime_density,
    diamond_vaaler,
    gibbs_probe,
    mass_above,
    multiplicity_check,
    quasi_independence,
    sullivan_sim,
)
from rotorlab.observable import SawtoothCombo, syndetic_scan

H = SawtoothCombo.sawtooth()
NSET = syndetic_scan(H, Fraction(1, 4), 5000)
PSI = PsiSpec()
GOLDEN = constant_digits(1, 150)


def iv(lo, hi):
    return RationalInterval(Fraction(lo), Fraction(hi))


def test_psi():
    with pytest.raises(ValueError):
        PsiSpec(c=1.5)
    with pytest.raises(ValueError):
        PSI(1.0)
    assert PSI(10.0) == pytest.approx(math.log(10))
    vals = [PSI.at_level(k) for k in range(1, 30)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    sums = PSI.divergence_partial_sums(200)
    assert all(a < b for a, b in zip(sums, sums[1:]))
    assert sums[-1] > 2
    assert PSI.delta(5) == Fraction(1.0 / (math.exp(5) * PSI.at_level(5)))


def test_claim_m():
    assert claim_m(1.0) == 17
    assert claim_m(0.5) > claim_m(1.0)
    with pytest.raises(ValueError):
        claim_m(0)


def test_coprime_examples():
    assert coprime_density(2, RationalInterval.open(0, 1)).count == 1
    assert coprime_density(2, iv(0, 1)).count == 3
    big = coprime_density(2000, RationalInterval.open(0, 1))
    assert abs(big.count / 2000**2 - 3 / math.pi**2) <= 0.01
    assert coprime_density(50, RationalInterval.open(Fraction(1, 3), Fraction(1, 3))).count == 0


def test_coprime_brute_force():
    I = iv(Fraction(1, 5), Fraction(2, 3))
    N = 40
    brute = sum(1 for n in range(1, N + 1) for m in range(0, N + 1)
                if math.gcd(m, n) == 1 and I.lo <= Fraction(m, n) <= I.hi)
    assert coprime_density(N, I).count == brute


def test_a_k_empty_and_single():
    empty = iv(Fraction(1, 2) - Fraction(1, 10**9), Fraction(1, 2) + Fraction(1, 10**9))
    assert a_k_measure(NSET, PSI, 1, 3, empty).measure == 0
    assert a_k_measure(NSET, PSI, 1, 3, empty).card_omega == 0
    single = iv(Fraction(1, 20) - Fraction(1, 10**4), Fraction(1, 20) + Fraction(1, 10**4))
    for method in ("fast", "sweep"):
        res = a_k_measure(NSET, PSI, 1, 3, single, method=method)
        assert res.card_omega == 1
        assert res.measure == 2 * PSI.delta(3) / 20


@pytest.mark.parametrize("k", [3, 4, 5])
@pytest.mark.parametrize("clip", [False, True])
def test_a_k_fast_matches_sweep(k, clip):
    I = iv(Fraction(1, 10), Fraction(9, 10))
    for M in (1, 3):
        a = a_k_measure(NSET, PSI, M, k, I, clip=clip, method="fast")
        b = a_k_measure(NSET, PSI, M, k, I, clip=clip, method="sweep")
        assert a.measure == b.measure and a.card_omega == b.card_omega


def test_a_k_bounds_at_level_8():
    res = a_k_measure(NSET, PSI, claim_m(NSET.lower_density_estimate), 8, iv(Fraction(1, 10), Fraction(9, 10)))
    assert res.holds
    assert res.to_dict()["bounds_hold"] is True


def test_a_k_preconditions():
    with pytest.raises(PreconditionFailed):
        a_k_measure(syndetic_scan(H, Fraction(1, 4), 100), PSI, 1, 6, iv(0, 1))
    with pytest.raises(PreconditionFailed):
        a_k_measure(NSET, PSI, 1, 1, iv(0, 1), method="fast")
    with pytest.raises(ValueError):
        a_k_measure(NSET, PSI, 0, 3, iv(0, 1))


def test_quasi_independence():
    I = iv(Fraction(1, 20) - Fraction(1, 10**4), Fraction(1, 20) + Fraction(1, 10**4))
    with pytest.raises(PreconditionFailed):
        quasi_independence(NSET, PSI, 1, 4, 4, I)
    with pytest.raises(PreconditionFailed):
        quasi_independence(NSET, PSI, 17, 3, 6, I)
    res = quasi_independence(NSET, PSI, 1, 3, 6, I)
    assert res.joint == 0 and res.ratio == 0 and res.holds


def test_quasi_independence_small_levels():
    res = quasi_independence(NSET, PSI, 1, 4, 7, iv(Fraction(1, 10), Fraction(9, 10)))
    assert res.m1 > 0 and res.m2 > 0
    assert 0 <= res.joint <= min(res.m1, res.m2)
    assert res.holds


def test_diamond_vaaler():
    assert diamond_vaaler(GOLDEN, 100) == pytest.approx(100 / (100 * math.log(100)))
    assert diamond_vaaler(constant_digits(2, 150), 100) == pytest.approx(200 / (100 * math.log(100)))
    assert diamond_vaaler(GOLDEN, 100) == pytest.approx(0.217, abs=1e-3)
    with pytest.raises(ValueError):
        diamond_vaaler(GOLDEN, 2)


def test_sullivan():
    r = sullivan_sim(lambda k: min(0.5, 1 / k), 1.0, 10_000, 2000, seed=1)
    assert r.estimate.mean >= r.floor - 0.05
    z = sullivan_sim([0.0] * 100, 1.0, 100, 500, seed=1)
    assert z.estimate.mean == 0
    b = sullivan_sim(lambda k: min(0.25, 1 / k), 2.0, 10_000, 2000, seed=1, coupling="blockwise")
    assert b.estimate.mean >= b.floor - 0.05
    again = sullivan_sim(lambda k: min(0.25, 1 / k), 2.0, 10_000, 2000, seed=1, coupling="blockwise")
    assert again.estimate == b.estimate
    with pytest.raises(ValueError):
        sullivan_sim([1.5] * 10, 1.0, 10, 10, seed=0)
    with pytest.raises(ValueError):
        sullivan_sim([0.5] * 10, 0.5, 10, 10, seed=0)


def test_multiplicity_examples():
    dis = [iv(0, Fraction(1, 4)), iv(Fraction(1, 2), Fraction(3, 4))]
    rep = multiplicity_check(dis)
    assert rep.K == 1 and rep.union == rep.total == Fraction(1, 2)
    same = [iv(Fraction(1, 3), Fraction(1, 2))] * 5
    rep = multiplicity_check(same)
    assert rep.K == 5 and rep.union == rep.bound
    touching = [iv(0, Fraction(1, 2)), iv(Fraction(1, 2), 1)]
    assert multiplicity_check(touching).K == 1


def test_multiplicity_random():
    rng = random.Random(20240601)
    for _ in range(20):
        ivs = []
        for _ in range(100):
            a, b = sorted(Fraction(rng.randrange(1000), 1000) for _ in range(2))
            ivs.append(iv(a, b))
        rep = multiplicity_check(ivs)
        assert rep.holds
        # union by a fine grid of endpoints
        pts = sorted({p for v in ivs for p in (v.lo, v.hi)})
        union = sum((b - a for a, b in zip(pts, pts[1:]) if any(v.lo <= a and b <= v.hi for v in ivs)), Fraction(0))
        assert union == rep.union


def test_mass_above():
    ctx = make_context(GOLDEN, 10_000)
    est = mass_above(H, ctx, 6, Fraction(1, 10), 2000, seed=3, nset=NSET)
    assert est.mean > 0.05
    assert mass_above(H, ctx, 6, 0, 500, seed=3, nset=NSET).mean == 1
    assert mass_above(H, ctx, 6, 3, 500, seed=3, nset=NSET).mean == 0
    again = mass_above(H, ctx, 6, Fraction(1, 10), 2000, seed=3, nset=NSET)
    assert again == est
    odd = syndetic_scan(SawtoothCombo((1, -1), (0, Fraction(1, 2))), 0.1, 100)
    with pytest.raises(PreconditionFailed):
        # q_2 = 2 for golden digits and 2 is not odd
        mass_above(H, ctx, 2, 0, 10, seed=0, nset=odd)


def test_gibbs():
    rep = gibbs_probe(max_depth=2, max_digit=3)
    assert rep.holds and 1 <= rep.G <= 8
    assert list(rep.by_depth) == [1, 2]
    assert rep.by_depth[1] <= rep.by_depth[2]
