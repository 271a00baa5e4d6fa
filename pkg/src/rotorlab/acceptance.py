"""The acceptance battery: exact property checks and pinned-seed statistical checks.

Each check returns a CriterionResult; ``run_suite`` runs a subset and the
CLI ``verify`` command and the test-suite both go through it.
"""

from __future__ import annotations

import math
import random
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from rotorlab import cf_core
from rotorlab.alpha_builder import build_in_A, constant_digits, gauss_random
from rotorlab.birkhoff import make_context, mu, random_x, sum_fast, sum_naive
from rotorlab.cf_core import CfDigits, RationalInterval, cylinder, glue, ostrowski_decode, ostrowski_encode, ostrowski_valid
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
from rotorlab.observable import SawtoothCombo, d_value_gamma, d_value_quadrature, syndetic_scan, variation
from rotorlab.temporal import (
    UNIFORM,
    UNIFORM_CONV,
    BadStartingPoint,
    ensemble,
    ks_distance,
    ks_normalized,
    mid_block_horizon,
    normalize_star,
    percentile,
    schedule_thm_uniform,
)

SEED = 20240601
EXACT = "exact"
STATISTICAL = "statistical"


@dataclass
class CriterionResult:
    number: int
    title: str
    suite: str
    passed: bool
    detail: str
    seed: int | None = None
    seconds: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        seed = f" seed={self.seed}" if self.seed is not None else ""
        return f"[{tag}] {self.number:>2} {self.title}: {self.detail}{seed} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "suite": self.suite, "passed": self.passed,
                "detail": self.detail, "seed": self.seed, "seconds": round(self.seconds, 3)}


# --- fixtures ------------------------------------------------------------------


def golden(length: int = 150) -> CfDigits:
    return constant_digits(1, length)


def sawtooth() -> SawtoothCombo:
    return SawtoothCombo.sawtooth()


def pair_combo() -> SawtoothCombo:
    return SawtoothCombo((1, Fraction(-1, 2)), (0, Fraction(1, 3)))


def planted(growth: int = 5, tail: int = 150):
    """Three planted stages for f = h (whose set of good denominators is all of N)."""
    nset = syndetic_scan(sawtooth())
    return build_in_A(nset, 1, 3, tail=tail, growth=growth)


# --- exact suite ---------------------------------------------------------------


def c1_oracle_equivalence(seed: int = SEED, per_pair: int = 500, n_max: int = 10_000):
    rng = random.Random(seed)
    alphas = {"golden": golden(), "planted": planted()[0]}
    combos = {"h": sawtooth(), "pair": pair_combo()}
    bad = []
    total = 0
    for an, d in alphas.items():
        ctx = make_context(d, n_max)
        for fn, f in combos.items():
            for _ in range(per_pair):
                x, n = random_x(rng), rng.randint(0, n_max)
                fast, naive = sum_fast(f, ctx, x, n), sum_naive(f, ctx, x, n)
                total += 1
                if fast != naive:
                    bad.append((an, fn, x, n))
    return not bad, f"{total - len(bad)}/{total} exact matches", {"mismatches": bad[:5]}


def c2_denjoy_koksma(seed: int = SEED, j_max: int = 18, n_x: int = 100):
    rng = random.Random(seed)
    worst = Fraction(0)
    bad = []
    for d in (golden(), planted()[0]):
        ctx = make_context(d, cf_core.denominators(d, j_max)[j_max])
        for f in (sawtooth(), pair_combo()):
            V = variation(f)
            for _ in range(n_x):
                x = random_x(rng)
                for j in range(j_max + 1):
                    s = abs(mu(f, ctx, x, j).value)
                    worst = max(worst, s / V)
                    if s > V:
                        bad.append((j, x))
    return not bad, f"max |S_q|/V = {float(worst):.4f}, {len(bad)} violations", {}


def c3_cylinders(depth: int = 6, max_digit: int = 4):
    import itertools

    bad = []
    count = 0
    for n in range(1, depth + 1):
        for block in itertools.product(range(1, max_digit + 1), repeat=n):
            cyl = cylinder(block)
            count += 1
            if cyl.measure != cyl.interval.hi - cyl.interval.lo:
                bad.append(block)
    msg = f"{count - len(bad)}/{count} cylinders: measure 1/(q_l(q_l+q_(l-1))) equals endpoint difference"
    if bad:
        msg += f"; first violation at prefix {bad[0]}"
    return not bad, msg, {}


def c4_ostrowski(seed: int = SEED, n_sequences: int = 10, limit: int = 100_000):
    rng = random.Random(seed)
    seqs = [golden(60)] + [CfDigits(tuple(rng.randint(1, 6) for _ in range(60))) for _ in range(n_sequences - 1)]
    bad = []
    for d in seqs:
        qs = cf_core.denominators(d)
        K = next(k for k, q in enumerate(qs) if q > limit)
        for n in range(limit):
            r = ostrowski_encode(n, d, K)
            if not ostrowski_valid(r, d) or ostrowski_decode(r, d) != n:
                bad.append((d.digits[:6], n))
                break
    return not bad, f"round trip on [0, {limit}) for {len(seqs) - len(bad)}/{len(seqs)} sequences", {}


def c5_gluing(seed: int = SEED, pairs: int = 100):
    rng = random.Random(seed)
    bad = 0
    for _ in range(pairs):
        left = CfDigits(tuple(rng.randint(1, 50) for _ in range(rng.randint(1, 12))))
        right = CfDigits(tuple(rng.randint(1, 50) for _ in range(rng.randint(0, 12))))
        if not glue(left, right).holds:
            bad += 1
    return bad == 0, f"{pairs - bad}/{pairs} matrix identities hold", {}


def c6_d_function(seed: int = SEED, cases: int = 100, tol: float = 1e-8):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, 5))
        b = rng.uniform(-2, 2, size=d)
        gamma = rng.uniform(0, 1, size=d)
        worst = max(worst, abs(d_value_gamma(b, gamma) - d_value_quadrature(b, gamma, 10_000)))
    return worst <= tol, f"max |closed form - quadrature| = {worst:.2e} (tolerance {tol:g})", {}


def _percentile_ok(sample: list[Fraction], t: Fraction) -> bool:
    hi, lo = percentile(sample, t, "+"), percentile(sample, t, "-")
    n = len(sample)
    le_hi = Fraction(sum(v <= hi for v in sample), n)
    lt_hi = Fraction(sum(v < hi for v in sample), n)
    lt_lo = Fraction(sum(v < lo for v in sample), n)
    le_lo = Fraction(sum(v <= lo for v in sample), n)
    between = sum(lo < v < hi for v in sample)
    # P(X <= chi+) >= t and P(X < chi-) <= t, nothing strictly between, and both are extremal
    return le_hi > t >= lt_hi and lt_lo < t <= le_lo and between == 0 and lo <= hi


def c7_inequalities(seed: int = SEED, instances: int = 100):
    rng = random.Random(seed)
    bad_mult = bad_pct = 0
    for _ in range(instances):
        ivs = []
        for _ in range(rng.randint(1, 100)):
            a, b = Fraction(rng.randint(0, 200), 100), Fraction(rng.randint(0, 200), 100)
            ivs.append(RationalInterval.between(a, b))
        if not multiplicity_check(ivs).holds:
            bad_mult += 1
        sample = [Fraction(rng.randint(-20, 20), rng.randint(1, 4)) for _ in range(rng.randint(1, 60))]
        t = Fraction(rng.randint(1, 99), 100)
        if not _percentile_ok(sample, t):
            bad_pct += 1
    ok = bad_mult == 0 and bad_pct == 0
    return ok, f"multiplicity {instances - bad_mult}/{instances}, percentile {instances - bad_pct}/{instances}", {}


# --- statistical suite -----------------------------------------------------------


def c8_dirichlet(N: int = 2000, tol: float = 0.01):
    res = coprime_density(N, RationalInterval.open(0, 1))
    dev = abs(res.count / N**2 - 3 / math.pi**2)
    return dev <= tol, f"count/N^2 = {res.count / N**2:.5f}, |diff| = {dev:.5f} (tolerance {tol})", {}


def c9_recovery(seed: int = SEED, N: int = 100_000, tol: float = 0.5):
    rng = np.random.default_rng(seed)
    values = 5 + 10 * rng.random(N)
    norm = normalize_star(values, UNIFORM)
    ok = abs(norm.A - 5) <= tol and abs(norm.B - 10) <= tol
    return ok, f"A* = {norm.A:.4f}, B* = {norm.B:.4f}", {}


def _good_start(d, f, ctx, k, n_k, seed, eps1=Fraction(1, 10), attempts=200):
    rng = random.Random(seed)
    for _ in range(attempts):
        x = random_x(rng)
        try:
            return x, schedule_thm_uniform(d, f, ctx, x, k, n_k, eps1=eps1)
        except BadStartingPoint:
            continue
    raise RuntimeError("no starting point with |mu| >= eps1")


def _regime_run(seed: int):
    d, plan = planted()
    f = sawtooth()
    stage = plan.stages[-1]
    ctx = make_context(d, 10**7)
    x, entry = _good_start(d, f, ctx, stage.k, stage.n_k, seed)
    return d, f, ctx, x, entry


def c10_uniform_regime(seed: int = SEED, tol: float = 0.08):
    _, f, ctx, x, entry = _regime_run(seed)
    e = ensemble(f, ctx, x, entry.N_k)
    ks = ks_distance(e, UNIFORM, entry.A_k, entry.B_k)
    star = ks_normalized(e, UNIFORM)
    detail = f"KS = {ks:.4f} at N_3 = {entry.N_k} (percentile-normalized {star:.4f}), threshold {tol}"
    return ks <= tol, detail, {"x": str(x)}


def c11_conv_regime(seed: int = SEED, floor: float = 0.10):
    _, f, ctx, x, entry = _regime_run(seed)
    head = ensemble(f, ctx, x, entry.q_nk - 1).values
    spread = max(float(head.max()), 0.0) - min(float(head.min()), 0.0)
    N = mid_block_horizon(entry.q_nk, spread, entry.mu_k)
    e = ensemble(f, ctx, x, N)
    ks_u, ks_c = ks_normalized(e, UNIFORM), ks_normalized(e, UNIFORM_CONV)
    ok = ks_c < ks_u and ks_u >= floor
    return ok, f"N = {N}: KS to U[0,1] = {ks_u:.4f}, KS to uniform convolution = {ks_c:.4f}", {}


def c12_mass(seed: int = SEED, samples: int = 10_000, floor: float = 0.05):
    f = sawtooth()
    ctx = make_context(golden(), 10**4)
    est = mass_above(f, ctx, 6, Fraction(1, 10), samples, seed)
    return est.mean >= floor, f"estimate {est.mean:.4f} +/- {est.stderr:.4f} (floor {floor})", {}


def c13_sullivan(seed: int = SEED):
    res = sullivan_sim(lambda k: min(0.5, 1 / k), 1, 10_000, 1000, seed)
    target = res.floor - 0.05
    return res.estimate.mean >= target, f"frequency {res.estimate.mean:.3f} (floor {target:.2f})", {}


def c14_diamond_vaaler(seed: int = SEED, n_alpha: int = 100, k: int = 5000):
    stats = [diamond_vaaler(gauss_random(k + 1, seed + i), k) for i in range(n_alpha)]
    med = statistics.median(stats)
    return 1.2 <= med <= 1.7, f"median {med:.4f} over {n_alpha} draws (window [1.2, 1.7])", {}


def c15_gibbs():
    rep = gibbs_probe(4, 4)
    depths = ", ".join(f"{k}:{v:.4f}" for k, v in rep.by_depth.items())
    return rep.holds, f"G = {rep.G:.4f} <= {rep.bound:g}; by depth {depths}", {}


CRITERIA: dict[int, tuple[str, str, Callable, bool]] = {
    1: ("birkhoff oracle equivalence", EXACT, c1_oracle_equivalence, True),
    2: ("denjoy-koksma ceiling", EXACT, c2_denjoy_koksma, True),
    3: ("cylinder formula", EXACT, c3_cylinders, False),
    4: ("ostrowski round trip", EXACT, c4_ostrowski, True),
    5: ("convergent gluing", EXACT, c5_gluing, True),
    6: ("D-function quadrature", EXACT, c6_d_function, True),
    7: ("multiplicity and percentile inequalities", EXACT, c7_inequalities, True),
    8: ("coprime density", STATISTICAL, c8_dirichlet, False),
    9: ("percentile normalizer recovery", STATISTICAL, c9_recovery, True),
    10: ("uniform temporal regime", STATISTICAL, c10_uniform_regime, True),
    11: ("convolution temporal regime", STATISTICAL, c11_conv_regime, True),
    12: ("mass of large block sums", STATISTICAL, c12_mass, True),
    13: ("sullivan lower bound", STATISTICAL, c13_sullivan, True),
    14: ("diamond-vaaler statistic", STATISTICAL, c14_diamond_vaaler, True),
    15: ("gibbs ratio probe", STATISTICAL, c15_gibbs, False),
}


def run_criterion(number: int, seed: int = SEED) -> CriterionResult:
    title, suite, fn, seeded = CRITERIA[number]
    start = time.perf_counter()
    try:
        ok, detail, values = fn(seed) if seeded else fn()
    except Exception as exc:  # a crash is a failure of that criterion only
        ok, detail, values = False, f"raised {type(exc).__name__}: {exc}", {}
    return CriterionResult(number, title, suite, bool(ok), detail, seed if seeded else None,
                           time.perf_counter() - start, values)


def run_suite(suite: str = "all", seed: int = SEED, only: list[int] | None = None) -> list[CriterionResult]:
    if suite not in (EXACT, STATISTICAL, "all"):
        raise ValueError(f"unknown suite {suite!r}")
    numbers = [n for n, (_, s, _, _) in CRITERIA.items() if suite == "all" or s == suite]
    if only:
        numbers = [n for n in numbers if n in only]
    return [run_criterion(n, seed) for n in numbers]


# --- measure battery -------------------------------------------------------------


def measure_battery(seed: int = SEED) -> list[dict]:
    """One summary row per measure-lab operation at its reference parameters."""
    f = sawtooth()
    rows = []
    nset = syndetic_scan(f, n_max=70_000)
    psi = PsiSpec()
    M = claim_m(nset.lower_density_estimate)

    est = mass_above(f, make_context(golden(), 10**4), 6, Fraction(1, 10), 10_000, seed)
    rows.append(est.row("mass_above", {"alpha": "golden", "n_index": 6, "eps1": "1/10"}))
    cd = coprime_density(2000, RationalInterval.open(0, 1))
    rows.append({"op": "coprime_density", "params": {"N": 2000, "I": "(0, 1)"}, "mean": cd.count / 2000**2,
                 "stderr": None, "n": cd.count, "seed": None})
    ak = a_k_measure(nset, psi, M, 8, RationalInterval.open(Fraction(1, 10), Fraction(9, 10)))
    rows.append({"op": "a_k_measure", "params": {"k": 8, "M": M, "I": "(1/10, 9/10)", "lower": ak.lower,
                                                 "upper": ak.upper, "bounds_hold": ak.holds},
                 "mean": float(ak.measure), "stderr": None, "n": ak.card_omega, "seed": None})
    I = RationalInterval.open(Fraction(2, 5), Fraction(2, 5) + Fraction(1, 2000))
    qi = quasi_independence(nset, psi, M, 7, 11, I)
    rows.append({"op": "quasi_independence", "params": {"k1": 7, "k2": 11, "M": M, "I": str(I), "D": qi.D,
                                                        "holds": qi.holds},
                 "mean": qi.ratio, "stderr": None, "n": None, "seed": None})
    dv = [diamond_vaaler(gauss_random(5001, seed + i), 5000) for i in range(100)]
    rows.append({"op": "diamond_vaaler", "params": {"k": 5000, "statistic": "median"},
                 "mean": statistics.median(dv), "stderr": None, "n": len(dv), "seed": seed})
    for coupling, D in (("independent", 1), ("blockwise", 2)):
        res = sullivan_sim(lambda k: min(0.5, 1 / k), D, 10_000, 1000, seed, coupling)
        rows.append(res.estimate.row("sullivan_sim", {"D": D, "coupling": coupling, "horizon": 10_000,
                                                      "floor": res.floor}))
    g = gibbs_probe(4, 4)
    rows.append({"op": "gibbs_probe", "params": {"depth": 4, "max_digit": 4, "bound": g.bound},
                 "mean": g.G, "stderr": None, "n": None, "seed": None})
    return rows
