"""Certified Birkhoff sums S_n(alpha, x) = sum_{k<n} f(x + k alpha).

alpha is replaced by a convergent P/Q far beyond the summation horizon, so
every fractional part is exact rational arithmetic. The distance to the
true alpha is charged to an explicit error bound: a Lipschitz drift of
C*n^2*slack plus one jump for every surrogate orbit point that sits close
enough to a discontinuity to be pushed across it.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from rotorlab.cf_core import (
    CfDigits,
    Convergent,
    InsufficientDigits,
    convergents,
    denominators,
    enclosure,
    format_rational,
    parse_rational,
)
from rotorlab.floorsum import count_residues_below, floor_sum
from rotorlab.observable import SawtoothCombo, variation

DEFAULT_GUARD = 2**32
X_DENOMINATOR = 2**64


class HorizonExceeded(ValueError):
    pass


class PreconditionFailed(ValueError):
    pass


@dataclass(frozen=True)
class AlphaContext:
    digits: CfDigits
    K: int
    convergent: Convergent
    n_max: int
    guard: int
    slack: Fraction

    @property
    def P(self) -> int:
        return self.convergent.p

    @property
    def Q(self) -> int:
        return self.convergent.q

    @property
    def surrogate(self) -> Fraction:
        return Fraction(self.P, self.Q)

    def q(self, j: int) -> int:
        if j > self.K:
            raise HorizonExceeded(f"q_{j} is past the surrogate index K={self.K}")
        return denominators(self.digits, j)[j]


def make_context(d: CfDigits, n_max: int, guard: int = DEFAULT_GUARD) -> AlphaContext:
    """Pick the first convergent with q_K >= guard * n_max."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    target = guard * max(n_max, 1)
    qs = denominators(d)
    for K, q in enumerate(qs):
        if q >= target:
            break
    else:
        raise InsufficientDigits(f"digit horizon exhausted: q_{len(qs) - 1}={qs[-1]} < {target}")
    if d.finite_exact and K == len(d):
        slack = Fraction(0)
    else:
        if K + 1 > len(d):
            raise InsufficientDigits(f"a_{K + 1} needed to bound |alpha - p_K/q_K|")
        slack = enclosure(d, K).measure
    conv = convergents(d, K)[K]
    return AlphaContext(d, K, conv, n_max, guard, slack)


@dataclass(frozen=True)
class SumResult:
    value: Fraction
    error_bound: Fraction
    crossings_possible: int

    def to_dict(self) -> dict:
        return {
            "value": format_rational(self.value),
            "error_bound": format_rational(self.error_bound),
            "crossings_possible": self.crossings_possible,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class _Orbit:
    """Integer form of the surrogate orbit: residues (A_m + k*c) mod D."""

    D: int
    c: int
    starts: tuple[int, ...]


def _orbit(f: SawtoothCombo, ctx: AlphaContext, x: Fraction) -> _Orbit:
    D = lcm(x.denominator, ctx.Q, *(bt.denominator for bt in f.beta))
    c = (ctx.P * (D // ctx.Q)) % D
    starts = tuple(((x + bt) * D).numerator % D for bt in f.beta)
    return _Orbit(D, c, starts)


def _check(ctx: AlphaContext, n: int) -> None:
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > ctx.n_max:
        raise HorizonExceeded(f"n={n} exceeds the context horizon {ctx.n_max}")


def _near_threshold(ctx: AlphaContext, n: int, D: int) -> int:
    """Largest residue t with t/D <= n*slack."""
    delta = n * ctx.slack
    return (delta * D).numerator // (delta * D).denominator


def _result(f: SawtoothCombo, ctx: AlphaContext, n: int, value: Fraction, crossings: list[int]) -> SumResult:
    drift = f.abs_sum * n * n * ctx.slack
    jumps = sum((abs(bm) * cm for bm, cm in zip(f.b, crossings)), Fraction(0))
    return SumResult(value, drift + jumps, sum(crossings))


def sum_naive(f: SawtoothCombo, ctx: AlphaContext, x, n: int) -> SumResult:
    """Term-by-term evaluation along the surrogate orbit."""
    x = parse_rational(x)
    _check(ctx, n)
    orb = _orbit(f, ctx, x)
    D, c = orb.D, orb.c
    T = _near_threshold(ctx, n, D)
    value = Fraction(0)
    crossings = []
    for bm, r in zip(f.b, orb.starts):
        acc = 0
        near = 0
        for k in range(n):
            acc += r
            if k and (r <= T or r >= D - T):
                near += 1
            r += c
            if r >= D:
                r -= D
        value += bm * (Fraction(acc, D) - Fraction(n, 2))
        crossings.append(near)
    return _result(f, ctx, n, value, crossings)


def sum_fast(f: SawtoothCombo, ctx: AlphaContext, x, n: int) -> SumResult:
    """Closed-form evaluation through floor sums; O(d log Q) big-int steps."""
    x = parse_rational(x)
    _check(ctx, n)
    orb = _orbit(f, ctx, x)
    D, c = orb.D, orb.c
    T = _near_threshold(ctx, n, D)
    value = Fraction(0)
    crossings = []
    for bm, A in zip(f.b, orb.starts):
        # sum_k {(A + k c)/D} = (n A + c n(n-1)/2)/D - sum_k floor((A + k c)/D)
        fl = floor_sum(n, D, c, A)
        value += bm * (Fraction(n * A + c * (n * (n - 1) // 2), D) - fl - Fraction(n, 2))
        crossings.append(_count_near(n - 1, D, c, (A + c) % D, T))
    return _result(f, ctx, n, value, crossings)


def _count_near(count: int, D: int, c: int, start: int, T: int) -> int:
    """#{0 <= i < count : residue within T of 0 (mod D)}."""
    if count <= 0:
        return 0
    if 2 * T + 1 >= D:
        return count
    low = count_residues_below(count, D, c, start, T + 1)
    high = count - count_residues_below(count, D, c, start, D - T)
    return low + high


def mu(f: SawtoothCombo, ctx: AlphaContext, x, n_index: int) -> SumResult:
    """S_{q_n}(x) at the principal denominator q_{n_index}."""
    return sum_fast(f, ctx, x, ctx.q(n_index))


def random_x(rng: random.Random) -> Fraction:
    return Fraction(rng.getrandbits(64), X_DENOMINATOR)


def prefix_numerators(f: SawtoothCombo, ctx: AlphaContext, x, N: int) -> tuple[list[int], int]:
    """Integers s_0..s_N and a common denominator with S_n = s_n / denominator."""
    x = parse_rational(x)
    _check(ctx, N)
    orb = _orbit(f, ctx, x)
    D, c = orb.D, orb.c
    B = lcm(*(bm.denominator for bm in f.b))
    weights = [int(bm * B) for bm in f.b]
    residues = list(orb.starts)
    # h = (2r - D) / (2D) on residue r
    out = [0]
    total = 0
    for _ in range(N):
        for i, r in enumerate(residues):
            total += weights[i] * (2 * r - D)
            r += c
            residues[i] = r - D if r >= D else r
        out.append(total)
    return out, 2 * D * B


def prefix_sums(f: SawtoothCombo, ctx: AlphaContext, x, N: int) -> list[Fraction]:
    """Exact S_0, S_1, ..., S_N along the surrogate orbit."""
    nums, den = prefix_numerators(f, ctx, x, N)
    return [Fraction(s, den) for s in nums]


@dataclass(frozen=True)
class PrefixBound:
    empirical_max: Fraction
    theoretical_bound: Fraction

    @property
    def holds(self) -> bool:
        return self.empirical_max <= self.theoretical_bound


def max_prefix_bound(f: SawtoothCombo, ctx: AlphaContext, x, n_index: int, budget: int = 2_000_000) -> PrefixBound:
    """max_{0<=r<q_n} |S_r(x)| against V(f) * (a_1 + ... + a_n)."""
    q = ctx.q(n_index)
    if q > budget:
        raise PreconditionFailed(f"q_{n_index}={q} exceeds the enumeration budget {budget}")
    nums, den = prefix_numerators(f, ctx, x, q - 1)
    a_sum = sum(ctx.digits.a(j) for j in range(1, n_index + 1))
    return PrefixBound(Fraction(max(abs(s) for s in nums), den), variation(f) * a_sum)


@dataclass(frozen=True)
class DriftReport:
    holds: bool
    n_index: int
    k: int
    c: Fraction
    worst_ell: int
    worst_excess: Fraction


def block_drift_check(f: SawtoothCombo, ctx: AlphaContext, x, n_index: int, k: int, c) -> DriftReport:
    """Whether |S_{l q_n}(x) - l mu_n(x)| <= C_1 l^2 / c for every l <= k."""
    c = parse_rational(c)
    if c <= 1:
        raise PreconditionFailed("the block ratio c must exceed 1")
    q_n, q_next = ctx.q(n_index), ctx.q(n_index + 1)
    if not q_next > c * q_n:
        raise PreconditionFailed(f"q_{n_index + 1}={q_next} is not > c*q_{n_index}={c * q_n}")
    _check(ctx, k * q_n)
    c1 = f.abs_sum / 2
    mu_n = sum_fast(f, ctx, x, q_n).value
    holds, worst_ell, worst = True, 0, None
    for ell in range(k + 1):
        dev = abs(sum_fast(f, ctx, x, ell * q_n).value - ell * mu_n)
        excess = dev - c1 * ell * ell / c
        if worst is None or excess > worst:
            worst, worst_ell = excess, ell
        if excess > 0:
            holds = False
    return DriftReport(holds, n_index, k, c, worst_ell, worst)


def jump_points(f: SawtoothCombo, ctx: AlphaContext, n: int) -> list[Fraction]:
    """Points of [0, 1) where x -> S_n(x) jumps on the surrogate: x = -(beta_m + k P/Q) mod 1."""
    _check(ctx, n)
    pts = {(-(bt + k * ctx.surrogate)) % 1 for bt in f.beta for k in range(n)}
    return sorted(pts)
