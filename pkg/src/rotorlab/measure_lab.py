"""Exact and Monte-Carlo checks of the measure statements behind the construction.

Sets of rotation numbers here are finite unions of intervals around rationals
m/n, so their measures are computed exactly. Only the statements about random
x, random digits or random events are estimated by sampling; every estimate
records its seed.
"""

from __future__ import annotations

import bisect
import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import polygamma

from rotorlab.birkhoff import AlphaContext, PreconditionFailed, random_x, sum_fast
from rotorlab.cf_core import CfDigits, InsufficientDigits, RationalInterval, cylinder, format_rational, parse_rational
from rotorlab.observable import SawtoothCombo, SyndeticReport, syndetic_scan

GOLDEN_LOG = math.log((1 + math.sqrt(5)) / 2)


# --- psi ---------------------------------------------------------------------


@dataclass(frozen=True)
class PsiSpec:
    """psi(t) = ln t + c (ln t)(ln ln t)(ln ln ln t), the last term dropped below t = e^e.

    The added ln t keeps psi positive and increasing where the triple log is
    undefined or negative.
    """

    c: float = 2.1

    def __post_init__(self):
        if not self.c > 1 / GOLDEN_LOG:
            raise ValueError(f"c must exceed 1/ln(golden ratio) = {1 / GOLDEN_LOG:.6f}")

    def __call__(self, t: float) -> float:
        if t <= 1:
            raise ValueError("psi is defined for t > 1")
        lt = math.log(t)
        if t > math.e**math.e:
            return lt + self.c * lt * math.log(lt) * math.log(math.log(lt))
        return lt

    def at_level(self, k: int) -> float:
        return self(math.exp(k))

    def delta(self, k: int) -> Fraction:
        """Radius scale 1/(e^k psi(e^k)), fixed to the exact value of its double."""
        return Fraction(1.0 / (math.exp(k) * self.at_level(k)))

    def divergence_partial_sums(self, k_max: int) -> list[float]:
        """Partial sums of 1/psi(e^k), k = 1..k_max."""
        return list(itertools.accumulate(1.0 / self.at_level(k) for k in range(1, k_max + 1)))


def claim_m(density: float) -> int:
    """Smallest M with sum_{p >= M} p^-2 < density / 16."""
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    M = 1
    while polygamma(1, M) >= density / 16:
        M += 1
    return M


# --- estimates ---------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int | None

    @classmethod
    def from_samples(cls, samples, seed: int | None) -> "Estimate":
        s = np.asarray(samples, dtype=float)
        n = len(s)
        if n == 0:
            raise ValueError("no samples")
        stderr = float(np.std(s, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return cls(float(np.mean(s)), stderr, n, seed)

    def row(self, op: str, params: dict) -> dict:
        return {"op": op, "params": params, "mean": self.mean, "stderr": self.stderr, "n": self.n_samples,
                "seed": self.seed}

    def to_json(self, op: str, params: dict) -> str:
        return json.dumps(self.row(op, params))


def mass_above(f: SawtoothCombo, ctx: AlphaContext, n_index: int, eps1, n_samples: int, seed: int,
               nset: SyndeticReport | None = None, M: int = 1) -> Estimate:
    """Monte-Carlo estimate of mes{x : |S_{q_n}(x)| >= eps1}.

    Requires r q_n in the set for some r <= M.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if nset is None:
        nset = syndetic_scan(f)
    q = ctx.q(n_index)
    if not any(nset.contains(r * q) for r in range(1, M + 1)):
        raise PreconditionFailed(f"no r <= {M} with r*q_{n_index} = r*{q} in the set")
    eps1 = parse_rational(eps1)
    rng = random.Random(seed)
    hits = []
    for _ in range(n_samples):
        s = sum_fast(f, ctx, random_x(rng), q)
        # the certified value is exact for the surrogate; the error bound is far below any eps1 used here
        hits.append(1.0 if abs(s.value) >= eps1 else 0.0)
    return Estimate.from_samples(hits, seed)


# --- rational intervals ------------------------------------------------------


def _int_range(I: RationalInterval, n: int) -> tuple[int, int]:
    """Smallest and largest integer m with m/n in I (empty when first > last)."""
    lo, hi = I.lo * n, I.hi * n
    first = math.ceil(lo) if I.lo_closed else math.floor(lo) + 1
    last = math.floor(hi) if I.hi_closed else math.ceil(hi) - 1
    return first, last


@dataclass(frozen=True)
class CoprimeCount:
    count: int
    asymptotic: float
    ratio: float


def coprime_density(N: int, I: RationalInterval) -> CoprimeCount:
    """#{(m, n) in {0..N}^2 : n >= 1, gcd(m, n) = 1, m/n in I} against 3 mes(I) N^2 / pi^2."""
    if N < 1:
        raise ValueError("N must be >= 1")
    count = 0
    for n in range(1, N + 1):
        first, last = _int_range(I, n)
        first, last = max(first, 0), min(last, N)
        if first > last:
            continue
        m = np.arange(first, last + 1, dtype=np.int64)
        count += int(np.count_nonzero(np.gcd(m, n) == 1))
    asym = 3 * float(I.measure) * N * N / math.pi**2
    return CoprimeCount(count, asym, count / asym if asym > 0 else math.nan)


@dataclass(frozen=True)
class MultiplicityReport:
    K: int
    union: Fraction
    total: Fraction

    @property
    def bound(self) -> Fraction:
        return self.total / self.K if self.K else Fraction(0)

    @property
    def holds(self) -> bool:
        return self.union >= self.bound


def multiplicity_check(intervals: Sequence[RationalInterval]) -> MultiplicityReport:
    """Maximal overlap K, union measure and the bound sum/K.

    Multiplicity counts overlaps of positive length: at a shared endpoint the
    closing interval is retired before the opening one is counted, and
    degenerate intervals are ignored.
    """
    events = []
    total = Fraction(0)
    for iv in intervals:
        if iv.hi > iv.lo:
            events.append((iv.lo, 1))
            events.append((iv.hi, -1))
            total += iv.measure
    events.sort()  # -1 sorts before +1 at equal coordinates
    depth = K = 0
    union = Fraction(0)
    start = None
    for x, step in events:
        if step == 1:
            if depth == 0:
                start = x
            depth += 1
            K = max(K, depth)
        else:
            depth -= 1
            if depth == 0:
                union += x - start
    return MultiplicityReport(K, union, total)


def _merge(pieces: list[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, Fraction]]:
    out: list[list[Fraction]] = []
    for lo, hi in sorted(pieces):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def _on_circle(lo: Fraction, hi: Fraction) -> list[tuple[Fraction, Fraction]]:
    """Split an interval of length < 1 into pieces of [0, 1]."""
    shift = math.floor(lo)
    lo, hi = lo - shift, hi - shift
    if hi <= 1:
        return [(lo, hi)]
    return [(lo, Fraction(1)), (Fraction(0), hi - 1)]


# --- the sets A_k(I) ---------------------------------------------------------


def _level_range(k: int) -> tuple[int, int]:
    return math.ceil(math.exp(k - 1)), math.floor(math.exp(k))


def _check_horizon(nset: SyndeticReport, k: int) -> None:
    if _level_range(k)[1] > nset.n_max:
        raise PreconditionFailed(f"e^{k} is past the scanned horizon n_max={nset.n_max}")


def _min_multipliers(nset: SyndeticReport, M: int, k: int) -> dict[int, list[int]]:
    """n* -> sorted multipliers r <= M with r n* in the set and in [e^(k-1), e^k]."""
    n_lo, n_hi = _level_range(k)
    period = nset.combo.period
    member = [nset.contains(j) for j in range(1, period + 1)]
    out: dict[int, list[int]] = {}
    for n in range(n_lo, n_hi + 1):
        if not member[(n - 1) % period]:
            continue
        for r in range(1, M + 1):
            if n % r == 0:
                out.setdefault(n // r, []).append(r)
    return out


def _coprime_numerators(n: int, I: RationalInterval) -> np.ndarray:
    first, last = _int_range(I, n)
    first, last = max(first, 1), min(last, n - 1)
    if first > last:
        return np.empty(0, dtype=np.int64)
    m = np.arange(first, last + 1, dtype=np.int64)
    return m[np.gcd(m, n) == 1]


def _explicit_pieces(nset, psi, M, k, I, clip) -> list[tuple[Fraction, Fraction]]:
    """Every A_{m,n,k} with (m, n) in Omega_k(I), as pieces of [0, 1]."""
    delta = psi.delta(k)
    pieces = []
    for n_star, rs in _min_multipliers(nset, M, k).items():
        for m_star in _coprime_numerators(n_star, I):
            c = Fraction(int(m_star), n_star)
            for r in rs:
                rho = delta / (r * n_star)
                pieces.extend(_on_circle(c - rho, c + rho))
    if clip:
        pieces = [(max(lo, I.lo), min(hi, I.hi)) for lo, hi in pieces]
        pieces = [(lo, hi) for lo, hi in pieces if hi > lo]
    return pieces


@dataclass(frozen=True)
class AkMeasure:
    k: int
    measure: Fraction
    card_omega: int
    psi_k: float
    lower: float
    upper: float
    method: str

    @property
    def holds(self) -> bool:
        """Whether the asymptotic two-sided bound already holds at this k."""
        return self.lower <= float(self.measure) <= self.upper

    def to_dict(self) -> dict:
        return {"k": self.k, "measure": format_rational(self.measure), "measure_float": float(self.measure),
                "card_omega": self.card_omega, "psi": self.psi_k, "lower": self.lower, "upper": self.upper,
                "bounds_hold": self.holds, "method": self.method}


def a_k_measure(nset: SyndeticReport, psi: PsiSpec, M: int, k: int, I: RationalInterval,
                clip: bool = False, method: str = "auto") -> AkMeasure:
    """Exact measure of A_k(I), the union of |n alpha - m| <= 1/(e^k psi(e^k)) over Omega_k(I).

    When psi(e^k) > 2, intervals around distinct reduced fractions are
    disjoint and the intervals around one fraction are nested, so the union is
    a sum over reduced fractions m*/n* of the widest interval, the one with
    the least admissible multiplier r. ``method='sweep'`` lists every
    interval instead. ``clip`` intersects the union with I.
    """
    if M < 1 or k < 1:
        raise ValueError("need M >= 1 and k >= 1")
    _check_horizon(nset, k)
    if method not in ("auto", "fast", "sweep"):
        raise ValueError("method must be auto, fast or sweep")
    psi_k = psi.at_level(k)
    disjoint = psi_k > 2
    if method == "fast" and not disjoint:
        raise PreconditionFailed(f"psi(e^{k}) = {psi_k:.3f} <= 2; intervals may overlap")
    use_fast = disjoint if method == "auto" else method == "fast"
    delta = psi.delta(k)
    mults = _min_multipliers(nset, M, k)
    card = 0
    if use_fast:
        weights: dict[int, int] = {}
        excess = Fraction(0)
        for n_star, rs in mults.items():
            ms = _coprime_numerators(n_star, I)
            if not len(ms):
                continue
            card += len(ms) * len(rs)
            n = rs[0] * n_star
            weights[n] = weights.get(n, 0) + len(ms)
            if clip:
                rho = delta / n
                for m_star in {int(ms[0]), int(ms[-1])}:
                    c = Fraction(m_star, n_star)
                    excess += max(Fraction(0), I.lo - (c - rho)) + max(Fraction(0), (c + rho) - I.hi)
        if weights:
            L = math.lcm(*weights)
            total = sum(cnt * (L // n) for n, cnt in weights.items())
            measure = 2 * delta * Fraction(total, L) - excess
        else:
            measure = Fraction(0)
        used = "fast"
    else:
        for n_star, rs in mults.items():
            card += len(_coprime_numerators(n_star, I)) * len(rs)
        pieces = _explicit_pieces(nset, psi, M, k, I, clip)
        measure = multiplicity_check([RationalInterval(lo, hi) for lo, hi in pieces]).union
        used = "sweep"
    d_n = nset.lower_density_estimate
    lower = d_n * float(I.measure) / (4 * M * psi_k)
    upper = 6 * float(I.measure) / psi_k
    return AkMeasure(k, measure, card, psi_k, lower, upper, used)


@dataclass(frozen=True)
class QuasiIndependence:
    k1: int
    k2: int
    joint: Fraction
    m1: Fraction
    m2: Fraction
    ratio: float
    D: float

    @property
    def holds(self) -> bool:
        return self.ratio <= self.D

    def to_dict(self) -> dict:
        return {"k1": self.k1, "k2": self.k2, "joint": float(self.joint), "m1": float(self.m1),
                "m2": float(self.m2), "ratio": self.ratio, "D": self.D, "holds": self.holds}


def quasi_independence(nset: SyndeticReport, psi: PsiSpec, M: int, k1: int, k2: int, I: RationalInterval,
                       D: float = 50.0) -> QuasiIndependence:
    """mes(A_k1 & A_k2 | I) / (mes(A_k1 | I) mes(A_k2 | I)), computed exactly.

    Needs |k1 - k2| > ln M + 1. The coarser level is listed interval by
    interval; the finer level is scanned with floating-point prefilters and
    every overlap that survives is measured in exact arithmetic.
    """
    if abs(k1 - k2) <= math.log(M) + 1:
        raise PreconditionFailed(f"|k1 - k2| = {abs(k1 - k2)} must exceed ln M + 1 = {math.log(M) + 1:.3f}")
    if I.measure <= 0:
        raise ValueError("I must have positive length")
    k1, k2 = min(k1, k2), max(k1, k2)
    _check_horizon(nset, k2)
    coarse = _merge(_explicit_pieces(nset, psi, M, k1, I, clip=True))
    m1 = sum((hi - lo for lo, hi in coarse), Fraction(0))
    fine = a_k_measure(nset, psi, M, k2, I, clip=True)
    m2 = fine.measure
    joint = Fraction(0)
    if coarse and m2 > 0:
        lo1 = np.array([float(lo) for lo, _ in coarse])
        hi1 = np.array([float(hi) for _, hi in coarse])
        delta2 = psi.delta(k2)
        if psi.at_level(k2) <= 2:
            fine_pieces = _merge(_explicit_pieces(nset, psi, M, k2, I, clip=True))
            for a, b in fine_pieces:
                joint += _overlap_exact(coarse, a, b)
        else:
            tol = 1e-12
            for n_star, rs in _min_multipliers(nset, M, k2).items():
                ms = _coprime_numerators(n_star, I)
                if not len(ms):
                    continue
                rho_f = float(delta2) / (rs[0] * n_star)
                c = ms / n_star
                idx = np.searchsorted(hi1, c - rho_f - tol)
                idx_c = np.minimum(idx, len(lo1) - 1)
                hit = (idx < len(lo1)) & (lo1[idx_c] <= c + rho_f + tol)
                rho = delta2 / (rs[0] * n_star)
                for m_star in ms[hit]:
                    center = Fraction(int(m_star), n_star)
                    joint += _overlap_exact(coarse, center - rho, center + rho)
    if m1 == 0 or m2 == 0:
        ratio = 0.0
    else:
        ratio = float(joint * I.measure / (m1 * m2))
    return QuasiIndependence(k1, k2, joint, m1, m2, ratio, D)


def _overlap_exact(merged: list[tuple[Fraction, Fraction]], a: Fraction, b: Fraction) -> Fraction:
    """Measure of [a, b] intersected with a sorted disjoint union."""
    i = bisect.bisect_left(merged, (a, a))
    i = max(i - 1, 0)
    total = Fraction(0)
    while i < len(merged) and merged[i][0] < b:
        lo, hi = merged[i]
        total += max(Fraction(0), min(hi, b) - max(lo, a))
        i += 1
    return total


# --- digit statistics ----------------------------------------------------------


def diamond_vaaler(d: CfDigits, k: int) -> float:
    """((a_1 + ... + a_{k+1}) - max_{j <= k+1} a_j) / (k ln k)."""
    if k < 3:
        raise ValueError("k must be >= 3")
    if len(d) < k + 1:
        raise InsufficientDigits(f"need {k + 1} digits, have {len(d)}")
    head = d.digits[: k + 1]
    return (sum(head) - max(head)) / (k * math.log(k))


@dataclass(frozen=True)
class GibbsReport:
    G: float
    by_depth: dict[int, float]
    worst: tuple[tuple[int, ...], tuple[int, ...]]
    bound: float = 8.0

    @property
    def holds(self) -> bool:
        return math.isfinite(self.G) and self.G <= self.bound


def _cyl_measure(block: tuple[int, ...]) -> Fraction:
    return cylinder(block).measure


def gibbs_probe(max_depth: int = 4, max_digit: int = 4) -> GibbsReport:
    """G = max over blocks a, b of max(rho, 1/rho), rho = mes[a;b] / (mes[a] mes[b]).

    Since q_a q_b <= q_{ab} <= 2 q_a q_b, every ratio lies in [1/8, 4].
    ``by_depth`` records G over blocks of length <= depth.
    """
    blocks = [b for n in range(1, max_depth + 1) for b in itertools.product(range(1, max_digit + 1), repeat=n)]
    meas = {b: _cyl_measure(b) for b in blocks}
    by_depth: dict[int, float] = {}
    G, worst = 1.0, (blocks[0], blocks[0])
    for depth in range(1, max_depth + 1):
        for a in blocks:
            for b in blocks:
                if max(len(a), len(b)) != depth:
                    continue
                rho = _cyl_measure(a + b) / (meas[a] * meas[b])
                g = float(max(rho, 1 / rho))
                if g > G:
                    G, worst = g, (a, b)
        by_depth[depth] = G
    return GibbsReport(G, by_depth, worst)


# --- Borel-Cantelli ----------------------------------------------------------


def _schedule_array(p: Callable[[int], float] | Sequence[float], horizon: int) -> np.ndarray:
    if callable(p):
        arr = np.array([p(k) for k in range(1, horizon + 1)], dtype=float)
    else:
        arr = np.asarray(p, dtype=float)[:horizon]
        if len(arr) < horizon:
            raise ValueError("schedule shorter than the horizon")
    if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
        raise ValueError("degenerate schedule: probabilities must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class SullivanResult:
    estimate: Estimate
    tail_start: int
    tail_mass: float
    D: float

    @property
    def floor(self) -> float:
        return 1 / (2 * self.D)


def sullivan_sim(p, D: float, horizon: int, trials: int, seed: int, coupling: str = "independent") -> SullivanResult:
    """Frequency with which some event in the final block of the horizon occurs.

    The final block (N_J, horizon] is the shortest tail with total
    probability >= 1/D (the whole horizon if none is). ``coupling``:
    'independent' draws each event on its own; 'blockwise' intersects a
    shared event of probability 1/D with independent events of probability
    D p_k, so P(A_j A_k) = D P(A_j) P(A_k) exactly.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    if horizon < 1 or trials < 1:
        raise ValueError("horizon and trials must be >= 1")
    if coupling not in ("independent", "blockwise"):
        raise ValueError("coupling must be 'independent' or 'blockwise'")
    probs = _schedule_array(p, horizon)
    tail = np.cumsum(probs[::-1])
    reach = np.nonzero(tail >= 1 / D)[0]
    length = int(reach[0]) + 1 if len(reach) else horizon
    block = probs[horizon - length:]
    rng = np.random.default_rng(seed)
    occurred = np.zeros(trials, dtype=bool)
    if coupling == "blockwise":
        if np.any(block * D > 1):
            raise ValueError("blockwise coupling needs D p_k <= 1")
        shared = rng.random(trials) < 1 / D
        inner = block * D
    else:
        shared = np.ones(trials, dtype=bool)
        inner = block
    chunk = max(1, 2_000_000 // max(len(block), 1))
    for s in range(0, trials, chunk):
        e = min(trials, s + chunk)
        occurred[s:e] = np.any(rng.random((e - s, len(block))) < inner, axis=1)
    occurred &= shared
    return SullivanResult(Estimate.from_samples(occurred.astype(float), seed), horizon - length + 1,
                          float(block.sum()), D)
