"""Sawtooth combinations f(x) = sum_m b_m h(x + beta_m) with h(x) = {x} - 1/2."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import floor, lcm
from typing import Sequence

import numpy as np

from rotorlab.cf_core import format_rational, parse_rational


class EmptySyndeticSet(ValueError):
    """No n in the scanned range has D(beta n) above the threshold."""


def frac(x: Fraction) -> Fraction:
    return x - floor(x)


def sawtooth(x: Fraction) -> Fraction:
    return frac(x) - Fraction(1, 2)


@dataclass(frozen=True)
class SawtoothCombo:
    b: tuple[Fraction, ...]
    beta: tuple[Fraction, ...]

    def __post_init__(self):
        b = tuple(parse_rational(v) for v in self.b)
        beta = tuple(frac(parse_rational(v)) for v in self.beta)
        if len(b) != len(beta) or not b:
            raise ValueError("b and beta must be non-empty and of equal length")
        if any(v == 0 for v in b):
            raise ValueError("coefficients b_m must be non-zero")
        if len(set(beta)) != len(beta):
            raise ValueError("shifts beta_m must be pairwise distinct mod 1")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "beta", beta)
        scale = float(sum(abs(v) for v in b)) ** 2
        if max(d_value(self, n) for n in range(1, self.period + 1)) <= 1e-12 * scale:
            raise ValueError("observable is identically zero")

    @classmethod
    def sawtooth(cls) -> "SawtoothCombo":
        return cls((Fraction(1),), (Fraction(0),))

    @property
    def d(self) -> int:
        return len(self.b)

    @property
    def period(self) -> int:
        """Period of n -> beta*n mod 1, hence of n -> D(beta n)."""
        return reduce(lcm, (v.denominator for v in self.beta), 1)

    @property
    def abs_sum(self) -> Fraction:
        """sum |b_m|, the Lipschitz constant used for error budgets."""
        return sum((abs(v) for v in self.b), Fraction(0))

    @property
    def slope(self) -> Fraction:
        return sum(self.b, Fraction(0))

    def scaled(self, c) -> "SawtoothCombo":
        c = parse_rational(c)
        return SawtoothCombo(tuple(c * v for v in self.b), self.beta)

    def to_dict(self) -> dict:
        return {"b": [format_rational(v) for v in self.b], "beta": [format_rational(v) for v in self.beta]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, raw: dict) -> "SawtoothCombo":
        return cls(tuple(raw["b"]), tuple(raw["beta"]))

    @classmethod
    def from_json(cls, text: str) -> "SawtoothCombo":
        return cls.from_dict(json.loads(text))


def eval_combo(f: SawtoothCombo, x) -> Fraction:
    """f(x), right-continuous at the jumps."""
    x = parse_rational(x)
    return sum((bm * sawtooth(x + bt) for bm, bt in zip(f.b, f.beta)), Fraction(0))


def left_limit(f: SawtoothCombo, x) -> Fraction:
    """lim_{y -> x-} f(y)."""
    x = parse_rational(x)
    total = Fraction(0)
    for bm, bt in zip(f.b, f.beta):
        y = frac(x + bt)
        total += bm * ((Fraction(1) if y == 0 else y) - Fraction(1, 2))
    return total


def variation(f: SawtoothCombo) -> Fraction:
    """The variation bound 2 * sum |b_m|."""
    return 2 * f.abs_sum


def discontinuities(f: SawtoothCombo) -> list[Fraction]:
    return sorted(frac(-bt) for bt in f.beta)


def d_value_gamma(b: Sequence, gamma: Sequence) -> float:
    """D(gamma) = 1/2 sum_{m,m'} b_m b_m' cos(2 pi (gamma_m - gamma_m'))."""
    total = 0.0
    for bm, gm in zip(b, gamma):
        for bn, gn in zip(b, gamma):
            diff = gm - gn
            if isinstance(diff, Fraction):
                diff = frac(diff)
            total += float(bm) * float(bn) * math.cos(2 * math.pi * float(diff))
    return max(0.5 * total, 0.0)


def d_value(f: SawtoothCombo, n: int) -> float:
    return d_value_gamma(f.b, [frac(bt * n) for bt in f.beta])


def d_value_quadrature(b: Sequence[float], gamma: Sequence[float], nodes: int = 10_000) -> float:
    """The defining integral of D evaluated on an equispaced grid."""
    y = np.arange(nodes) / nodes
    s = np.zeros(nodes)
    for bm, gm in zip(b, gamma):
        s += float(bm) * np.sin(2 * np.pi * (y + float(gm)))
    return float(np.mean(s * s))


def l2_norm_sq(f: SawtoothCombo) -> Fraction:
    """Exact integral of f^2 over [0, 1) (f is piecewise linear)."""
    cuts = sorted(set(discontinuities(f)) | {Fraction(0), Fraction(1)})
    total = Fraction(0)
    slope = f.slope
    for lo, hi in zip(cuts, cuts[1:]):
        v0 = eval_combo(f, lo)
        v1 = v0 + slope * (hi - lo)
        total += (hi - lo) * (v0 * v0 + v0 * v1 + v1 * v1) / 3
    return total


def l2_norm_sq_fourier(f: SawtoothCombo, N: int) -> float:
    """Partial sum (1/pi^2) sum_{n<=N} D(beta n)/n^2 of the Fourier energy."""
    return sum(d_value(f, n) / (n * n) for n in range(1, N + 1)) / math.pi**2


@dataclass(frozen=True)
class SyndeticReport:
    combo: SawtoothCombo
    eps0: float
    n_max: int
    members: tuple[int, ...]
    max_gap: int
    lower_density_estimate: float

    def contains(self, n: int) -> bool:
        """Membership of any n >= 1 (D(beta n) is periodic in n)."""
        return n >= 1 and d_value(self.combo, n) > self.eps0

    def to_dict(self) -> dict:
        return {
            "combo": self.combo.to_dict(),
            "eps0": self.eps0,
            "n_max": self.n_max,
            "members": list(self.members),
            "max_gap": self.max_gap,
            "lower_density_estimate": self.lower_density_estimate,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "D"])
        for n in range(1, self.n_max + 1):
            w.writerow([n, repr(d_value(self.combo, n))])
        return buf.getvalue()


def default_eps0(f: SawtoothCombo, probe: int = 1000) -> float:
    return 0.5 * max(d_value(f, n) for n in range(1, probe + 1))


def syndetic_scan(f: SawtoothCombo, eps0: float | None = None, n_max: int = 1000) -> SyndeticReport:
    if eps0 is None:
        eps0 = default_eps0(f)
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    # D(beta n) only depends on n mod period
    per_class = [d_value(f, n) for n in range(1, f.period + 1)]
    members = tuple(n for n in range(1, n_max + 1) if per_class[(n - 1) % f.period] > eps0)
    if not members:
        raise EmptySyndeticSet(f"no n <= {n_max} with D(beta n) > {eps0}")
    gaps = [members[0]] + [b - a for a, b in zip(members, members[1:])]
    return SyndeticReport(f, float(eps0), n_max, members, max(gaps), len(members) / n_max)
