"""Temporal distributions of ergodic sums along one orbit.

The time index n is drawn uniformly from {1, ..., N} with the starting
point fixed. Percentiles follow the literal inf/sup definitions, and the
affine normalizer (A*, B*) matches two percentiles of the empirical law to
those of a target law.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from rotorlab.birkhoff import (
    AlphaContext,
    HorizonExceeded,
    PreconditionFailed,
    _count_near,
    _near_threshold,
    _orbit,
    mu,
    prefix_numerators,
)
from rotorlab.cf_core import CfDigits, parse_rational
from rotorlab.observable import SawtoothCombo

RESOLUTION = Fraction(1, 2**40)
T1 = Fraction(1, 3)
T2 = Fraction(2, 3)


class CertificationError(ArithmeticError):
    pass


class DegenerateEnsemble(ValueError):
    pass


class BadStartingPoint(ValueError):
    """|mu_{n_k}(x)| fell below eps1; draw another x."""


@dataclass(frozen=True)
class TemporalEnsemble:
    values: np.ndarray = field(repr=False)
    N: int
    provenance: dict

    def __len__(self) -> int:
        return self.N

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def alpha_digest(d: CfDigits) -> str:
    return hashlib.sha256(",".join(map(str, d.digits)).encode()).hexdigest()[:16]


def ensemble(f: SawtoothCombo, ctx: AlphaContext, x, N: int, seed: int | None = None) -> TemporalEnsemble:
    """S_1, ..., S_N as doubles, each certified to within 2^-40 of the true value."""
    x = parse_rational(x)
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > ctx.n_max:
        raise HorizonExceeded(f"N={N} exceeds the context horizon {ctx.n_max}")
    # one certificate for the whole range: the bound is monotone in n
    orb = _orbit(f, ctx, x)
    T = _near_threshold(ctx, N, orb.D)
    crossings = [_count_near(N - 1, orb.D, orb.c, (A + orb.c) % orb.D, T) for A in orb.starts]
    bound = f.abs_sum * N * N * ctx.slack + sum((abs(bm) * cm for bm, cm in zip(f.b, crossings)), Fraction(0))
    if bound >= RESOLUTION:
        raise CertificationError(f"error bound {float(bound):.3g} exceeds the ensemble resolution 2^-40")
    nums, den = prefix_numerators(f, ctx, x, N)
    values = np.array([s / den for s in nums[1:]], dtype=np.float64)
    provenance = {
        "f": f.to_dict(),
        "alpha": alpha_digest(ctx.digits),
        "x": f"{x.numerator}/{x.denominator}",
        "seed": seed,
        "error_bound": float(bound),
    }
    return TemporalEnsemble(values, N, provenance)


# --- target laws ---------------------------------------------------------


@dataclass(frozen=True)
class TargetLaw:
    tag: str

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.tag == "Uniform01":
            return np.clip(x, 0.0, 1.0)
        if self.tag == "Gaussian":
            return ndtr(x)
        if self.tag == "UniformConv":
            y = np.clip(x, 0.0, 2.0)
            return np.where(y <= 1.0, y * y / 2, 1.0 - (2.0 - y) ** 2 / 2)
        raise ValueError(self.tag)

    def ppf(self, t):
        """Quantile; the laws here are continuous and strictly increasing on their support."""
        if self.tag == "Uniform01":
            return t
        t = float(t)
        if self.tag == "Gaussian":
            return float(ndtri(t))
        if self.tag == "UniformConv":
            return math.sqrt(2 * t) if t <= 0.5 else 2 - math.sqrt(2 * (1 - t))
        raise ValueError(self.tag)


UNIFORM = TargetLaw("Uniform01")
GAUSSIAN = TargetLaw("Gaussian")
UNIFORM_CONV = TargetLaw("UniformConv")
LAWS = {law.tag: law for law in (UNIFORM, GAUSSIAN, UNIFORM_CONV)}


def _as_fraction(t) -> Fraction:
    if isinstance(t, float):
        return Fraction(t).limit_denominator(10**9)
    return parse_rational(t)


def percentile(sample_or_law, t, side: str):
    """Upper ('+') or lower ('-') t-percentile.

    chi+ = inf{xi : P(X <= xi) > t} and chi- = sup{xi : P(X <= xi) < t}.
    For a sample of size N sorted as s_1 <= ... <= s_N these are
    s_{floor(tN)+1} and s_{ceil(tN)}.
    """
    t = _as_fraction(t)
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    if isinstance(sample_or_law, TargetLaw):
        return sample_or_law.ppf(t)
    if isinstance(sample_or_law, TemporalEnsemble):
        sample_or_law = sample_or_law.values
    s = sorted(sample_or_law)
    n = len(s)
    if n == 0:
        raise ValueError("empty sample")
    tn = t * n
    if side == "+":
        return s[math.floor(tn)]
    return s[math.ceil(tn) - 1]


@dataclass(frozen=True)
class Normalizer:
    A: float
    B: float
    degenerate: bool = False

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.A) / self.B


def normalize_star(e, law: TargetLaw = UNIFORM, t1=T1, t2=T2) -> Normalizer:
    """Solve A + B chi-(Y, t1) = chi-(S, t1), A + B chi+(Y, t2) = chi+(S, t2)."""
    values = e.values if isinstance(e, TemporalEnsemble) else e
    y1, y2 = percentile(law, t1, "-"), percentile(law, t2, "+")
    if y1 == y2:
        raise ValueError("target percentiles coincide; pick another (t1, t2)")
    s1, s2 = percentile(values, t1, "-"), percentile(values, t2, "+")
    if s1 == s2:
        return Normalizer(s1, 0, degenerate=True)
    B = (s2 - s1) / (y2 - y1)
    return Normalizer(s1 - B * y1, B)


def ks_distance(e, law: TargetLaw, A, B) -> float:
    """sup_x |F_N(x) - F(x)| for the empirical law of (S_n - A)/B."""
    if B <= 0:
        raise ValueError("B must be positive")
    values = e.values if isinstance(e, TemporalEnsemble) else e
    z = np.sort((np.asarray(values, dtype=float) - float(A)) / float(B))
    n = len(z)
    F = law.cdf(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_normalized(e, law: TargetLaw, t1=T1, t2=T2) -> float:
    """KS distance to ``law`` after that law's own percentile normalization."""
    norm = normalize_star(e, law, t1, t2)
    if norm.degenerate:
        return math.nan
    return ks_distance(e, law, norm.A, norm.B)


def histogram_csv(e, bins: int = 50) -> str:
    values = e.values if isinstance(e, TemporalEnsemble) else np.asarray(e)
    counts, edges = np.histogram(values, bins=bins)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "count"])
    for lo, hi, c in zip(edges, edges[1:], counts):
        w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    return buf.getvalue()


# --- schedules -------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleEntry:
    k: int
    n_k: int
    L_k: int
    q_nk: int
    N_k: int
    r_k: int
    mu_k: Fraction
    B_k: Fraction
    A_k: Fraction


def decompose(n: int, q: int) -> tuple[int, int]:
    """n = l*q + r with 0 <= r < q."""
    return divmod(n, q)


def schedule_thm_uniform(d: CfDigits, f: SawtoothCombo, ctx: AlphaContext, x, k: int, n_k: int,
                         r_k: int = 1, eps1=Fraction(1, 10)) -> ScheduleEntry:
    """Stage-k horizon N_k = k L_k q_{n_k} and scaling B_k = k L_k |mu_{n_k}(x)|."""
    if k < 1:
        raise ValueError("k must be >= 1")
    L_k = sum(d.a(j) for j in range(1, n_k + 1))
    q = ctx.q(n_k)
    N_k = k * L_k * q
    if N_k > ctx.n_max:
        raise HorizonExceeded(f"N_{k}={N_k} exceeds the context horizon {ctx.n_max}")
    mu_k = mu(f, ctx, x, n_k).value
    if abs(mu_k) < parse_rational(eps1):
        raise BadStartingPoint(f"|mu_{n_k}(x)|={float(abs(mu_k)):.3g} below eps1 at stage {k}")
    B_k = k * L_k * abs(mu_k)
    sgn = 1 if mu_k > 0 else -1
    A_k = Fraction(sgn - 1, 2) * B_k
    return ScheduleEntry(k, n_k, L_k, q, N_k, r_k, mu_k, B_k, A_k)


def mid_block_horizon(q: int, spread: float, mu_k) -> int:
    """N = q * floor(spread / |mu|): block count that matches the within-block spread."""
    mu_k = abs(float(mu_k))
    if mu_k == 0:
        raise PreconditionFailed("mu must be non-zero")
    return q * max(1, math.floor(spread / mu_k))


@dataclass(frozen=True)
class ScanRow:
    N: int
    A_star: float
    B_star: float
    ks_u01: float
    ks_gauss: float
    ks_conv: float
    degenerate: bool = False

    def as_list(self) -> list:
        return [self.N, repr(self.A_star), repr(self.B_star), repr(self.ks_u01), repr(self.ks_gauss),
                repr(self.ks_conv)]


SCAN_HEADER = ["N", "A_star", "B_star", "ks_u01", "ks_gauss", "ks_conv"]


def scan_row(values: np.ndarray, N: int) -> ScanRow:
    head = values[:N]
    norm = normalize_star(head, UNIFORM)
    if norm.degenerate:
        return ScanRow(N, float(norm.A), 0.0, math.nan, math.nan, math.nan, degenerate=True)
    return ScanRow(
        N,
        float(norm.A),
        float(norm.B),
        ks_distance(head, UNIFORM, norm.A, norm.B),
        ks_normalized(head, GAUSSIAN),
        ks_normalized(head, UNIFORM_CONV),
    )


def scan_tdlt(f: SawtoothCombo, ctx: AlphaContext, x, N_grid: Sequence[int]) -> list[ScanRow]:
    grid = sorted(set(int(N) for N in N_grid))
    if not grid:
        return []
    e = ensemble(f, ctx, x, grid[-1])
    return [scan_row(e.values, N) for N in grid]


def scan_csv(rows: Sequence[ScanRow], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_HEADER)
    for row in rows:
        w.writerow(row.as_list())
    return buf.getvalue()


def parse_grid(spec: str) -> list[int]:
    """``geometric:start:stop:ratio``, ``linear:start:stop:step`` or a comma list."""
    if spec.startswith("geometric:"):
        _, start, stop, ratio = spec.split(":")
        start, stop, ratio = float(start), float(stop), float(ratio)
        if ratio <= 1 or start < 1:
            raise ValueError("geometric grid needs start >= 1 and ratio > 1")
        out, v = [], start
        while v <= stop * (1 + 1e-12):
            out.append(int(round(v)))
            v *= ratio
        return sorted(set(out))
    if spec.startswith("linear:"):
        _, start, stop, step = spec.split(":")
        return list(range(int(float(start)), int(float(stop)) + 1, int(float(step))))
    return sorted(set(int(float(v)) for v in spec.split(",") if v.strip()))
