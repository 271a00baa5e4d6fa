"""Continued fractions over exact integers.

Expansion of rationals, principal convergents, cylinder sets, Ostrowski
numeration and best-approximation classification. Nothing in this module
touches floating point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Iterator, Sequence


class InsufficientDigits(ValueError):
    """Raised when an operation needs more partial quotients than are known."""


class UndecidableError(ArithmeticError):
    """The available digits do not separate the question at hand."""


def parse_rational(value) -> Fraction:
    """Read ``"p/q"``, an int, a Fraction or a decimal literal as an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # decimal meaning of the literal, not its binary expansion
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(r: Fraction) -> str:
    return f"{r.numerator}/{r.denominator}"


@dataclass(frozen=True)
class CfDigits:
    """Partial quotients a_1, a_2, ... of a number in [0, 1).

    ``finite_exact`` marks a terminated expansion, i.e. the number is the
    rational whose expansion is exactly ``digits``. Otherwise ``digits`` is a
    known prefix of a longer (possibly infinite) expansion.
    """

    digits: tuple[int, ...]
    finite_exact: bool = False

    def __post_init__(self):
        digits = tuple(int(a) for a in self.digits)
        object.__setattr__(self, "digits", digits)
        for i, a in enumerate(digits, start=1):
            if a < 1:
                raise ValueError(f"digit a_{i}={a} must be >= 1")
        if self.finite_exact and len(digits) > 1 and digits[-1] < 2:
            raise ValueError("a terminated expansion must end with a digit >= 2")

    @classmethod
    def from_any(cls, digits: Iterable[int], finite_exact: bool = False) -> "CfDigits":
        """Accept either canonical form of a rational; emit the canonical one."""
        digits = [int(a) for a in digits]
        if finite_exact and len(digits) > 1 and digits[-1] == 1:
            tail = digits.pop()
            digits[-1] += tail
        return cls(tuple(digits), finite_exact)

    @classmethod
    def from_iterator(cls, source: Iterator[int], horizon: int) -> "CfDigits":
        """Materialize the first ``horizon`` digits of a lazy digit source."""
        digits = []
        for _ in range(horizon):
            try:
                digits.append(next(source))
            except StopIteration:
                break
        return cls(tuple(digits))

    def __len__(self) -> int:
        return len(self.digits)

    def __getitem__(self, i):
        return self.digits[i]

    def a(self, j: int) -> int:
        """The partial quotient a_j (1-based; a_0 = 0)."""
        if j == 0:
            return 0
        if j > len(self.digits):
            raise InsufficientDigits(f"a_{j} requested but only {len(self.digits)} digits known")
        return self.digits[j - 1]

    def require(self, k: int) -> None:
        if len(self.digits) < k:
            raise InsufficientDigits(f"need {k} digits, have {len(self.digits)}")

    def value(self) -> Fraction:
        """Exact value of the (truncated) expansion."""
        p, q = 0, 1
        for a in reversed(self.digits):
            p, q = q, a * q + p
        return Fraction(p, q)

    def to_json(self) -> str:
        return json.dumps([str(a) for a in self.digits])

    @classmethod
    def from_json(cls, text: str, finite_exact: bool = False) -> "CfDigits":
        raw = json.loads(text)
        if not isinstance(raw, list):
            raise ValueError("digit JSON must be an array")
        return cls.from_any((int(a) for a in raw), finite_exact=finite_exact)


@dataclass(frozen=True)
class Convergent:
    p: int
    q: int
    index: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)

    def __str__(self) -> str:
        return f"{self.p}/{self.q}"


@dataclass(frozen=True)
class RationalInterval:
    """Interval with exact rational endpoints; endpoints may be open or closed."""

    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", parse_rational(self.lo))
        object.__setattr__(self, "hi", parse_rational(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty orientation: lo={self.lo} > hi={self.hi}")

    @classmethod
    def open(cls, lo, hi) -> "RationalInterval":
        return cls(lo, hi, False, False)

    @classmethod
    def closed(cls, lo, hi) -> "RationalInterval":
        return cls(lo, hi, True, True)

    @classmethod
    def between(cls, x, y, closed: bool = True) -> "RationalInterval":
        x, y = parse_rational(x), parse_rational(y)
        return cls(min(x, y), max(x, y), closed, closed)

    @property
    def measure(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_empty(self) -> bool:
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def __contains__(self, x) -> bool:
        x = parse_rational(x)
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def contains_interval(self, other: "RationalInterval") -> bool:
        if other.is_empty:
            return True
        lo_ok = other.lo > self.lo or (other.lo == self.lo and (self.lo_closed or not other.lo_closed))
        hi_ok = other.hi < self.hi or (other.hi == self.hi and (self.hi_closed or not other.hi_closed))
        return lo_ok and hi_ok

    def intersect(self, other: "RationalInterval") -> "RationalInterval | None":
        if self.lo > other.lo:
            lo, lo_closed = self.lo, self.lo_closed
        elif other.lo > self.lo:
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif other.hi < self.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed
        if lo > hi:
            return None
        return RationalInterval(lo, hi, lo_closed, hi_closed)

    def to_dict(self) -> dict:
        return {
            "lo": format_rational(self.lo),
            "hi": format_rational(self.hi),
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{format_rational(self.lo)}, {format_rational(self.hi)}{right}"


def expand_rational(num: int, den: int) -> CfDigits:
    """Canonical continued fraction of num/den in [0, 1)."""
    if den == 0:
        raise ZeroDivisionError("denominator must be non-zero")
    if den < 0:
        num, den = -num, -den
    if not 0 <= num < den:
        raise ValueError(f"{num}/{den} is not in [0, 1)")
    digits = []
    while num:
        a, r = divmod(den, num)
        digits.append(a)
        den, num = num, r
    # Euclid already ends on a digit >= 2 unless the expansion is [1]
    return CfDigits(tuple(digits), finite_exact=True)


def _pq_table(d: CfDigits, upto: int) -> tuple[list[int], list[int]]:
    """p_{-1}..p_upto and q_{-1}..q_upto, shifted by one so index 0 is k=-1."""
    d.require(upto)
    ps, qs = [1, 0], [0, 1]
    for j in range(1, upto + 1):
        a = d.digits[j - 1]
        ps.append(a * ps[-1] + ps[-2])
        qs.append(a * qs[-1] + qs[-2])
    return ps, qs


def convergents(d: CfDigits, upto: int) -> list[Convergent]:
    """Principal convergents p_0/q_0 .. p_upto/q_upto, starting at 0/1."""
    if upto < 0:
        raise ValueError("upto must be >= 0")
    ps, qs = _pq_table(d, upto)
    return [Convergent(ps[k + 1], qs[k + 1], k) for k in range(upto + 1)]


def denominators(d: CfDigits, upto: int | None = None) -> list[int]:
    """q_0, ..., q_upto (all available digits by default)."""
    upto = len(d) if upto is None else upto
    _, qs = _pq_table(d, upto)
    return qs[1:]


def enclosure(d: CfDigits, k: int) -> RationalInterval:
    """Closed interval spanned by p_k/q_k and p_{k+1}/q_{k+1}.

    Every number whose expansion starts with the first k+1 digits of ``d``
    lies inside; the width is exactly 1/(q_k q_{k+1}).
    """
    cs = convergents(d, k + 1)
    return RationalInterval.between(cs[k].fraction, cs[k + 1].fraction)


def alpha_enclosure(d: CfDigits) -> RationalInterval:
    """Tightest enclosure of the number described by ``d``."""
    if d.finite_exact:
        v = d.value()
        return RationalInterval.closed(v, v)
    if len(d) == 0:
        return RationalInterval.closed(0, 1)
    return enclosure(d, len(d) - 1)


@dataclass(frozen=True)
class OstrowskiRep:
    """Digits b_0..b_{K-1} with n = sum b_j q_j."""

    digits: tuple[int, ...]

    def nonzero(self) -> dict[int, int]:
        return {j: b for j, b in enumerate(self.digits) if b}


@lru_cache(maxsize=64)
def _q_prefix(digits: tuple[int, ...]) -> tuple[int, ...]:
    """q_0..q_K for the block a_1..a_K (memoized: encoding loops reuse one block)."""
    qs = [0, 1]
    for a in digits:
        qs.append(a * qs[-1] + qs[-2])
    return tuple(qs[1:])


def _check_horizon(d: CfDigits, K: int | None) -> int:
    K = len(d) if K is None else K
    d.require(K)
    return K


def ostrowski_encode(n: int, d: CfDigits, K: int | None = None) -> OstrowskiRep:
    """Greedy expansion of 0 <= n < q_K over q_0, ..., q_{K-1}.

    The greedy digits satisfy 0 <= b_0 < a_1, 0 <= b_j <= a_{j+1}, and
    b_j = a_{j+1} forces b_{j-1} = 0.
    """
    K = _check_horizon(d, K)
    qs = _q_prefix(d.digits[:K])
    if not 0 <= n < qs[K]:
        raise ValueError(f"n={n} outside [0, q_{K}={qs[K]})")
    out = [0] * K
    for j in range(K - 1, -1, -1):
        if n >= qs[j]:
            out[j], n = divmod(n, qs[j])
    return OstrowskiRep(tuple(out))


def ostrowski_valid(r: OstrowskiRep, d: CfDigits) -> bool:
    K = len(r.digits)
    d.require(K)
    for j, b in enumerate(r.digits):
        cap = d.digits[j] - (1 if j == 0 else 0)
        if not 0 <= b <= cap:
            return False
        if j > 0 and b == d.digits[j] and r.digits[j - 1] != 0:
            return False
    return True


def ostrowski_decode(r: OstrowskiRep, d: CfDigits) -> int:
    if not ostrowski_valid(r, d):
        raise ValueError(f"{r.digits} violates the Ostrowski digit constraints for {d.digits[:len(r.digits)]}")
    qs = _q_prefix(d.digits[: len(r.digits)])
    return sum(b * q for b, q in zip(r.digits, qs))


def _cylinder_measure(prefix: Sequence[int]) -> Fraction:
    d = CfDigits(tuple(prefix))
    _, qs = _pq_table(d, len(prefix))
    q, q_prev = qs[-1], qs[-2]
    return Fraction(1, q * (q + q_prev))


@dataclass(frozen=True)
class Cylinder:
    interval: RationalInterval
    measure: Fraction


def cylinder(prefix: Sequence[int]) -> Cylinder:
    """The open interval of numbers whose expansion starts with ``prefix``."""
    d = CfDigits(tuple(prefix))
    ps, qs = _pq_table(d, len(prefix))
    p, q = ps[-1], qs[-1]
    p_prev, q_prev = ps[-2], qs[-2]
    a = Fraction(p, q)
    b = Fraction(p + p_prev, q + q_prev)
    return Cylinder(RationalInterval.open(min(a, b), max(a, b)), _cylinder_measure(prefix))


Matrix = tuple[tuple[int, int], tuple[int, int]]


def matmul(x: Matrix, y: Matrix) -> Matrix:
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


def convergent_matrix(digits: Sequence[int]) -> Matrix:
    """[[p_{l-1}, p_l], [q_{l-1}, q_l]] for the digit block of length l."""
    d = CfDigits(tuple(digits))
    ps, qs = _pq_table(d, len(digits))
    return ((ps[-2], ps[-1]), (qs[-2], qs[-1]))


def det(m: Matrix) -> int:
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


@dataclass(frozen=True)
class GlueResult:
    prefix_matrix: Matrix
    suffix_matrix: Matrix
    product: Matrix
    direct: Matrix
    convergents: tuple[Convergent, ...] = field(repr=False)

    @property
    def holds(self) -> bool:
        return self.product == self.direct


def glue(prefix: CfDigits, suffix: CfDigits) -> GlueResult:
    """Convergents of prefix+suffix from the two blocks' convergent matrices.

    With l = len(prefix) and lbar = len(suffix) - 1, the matrix of
    (p_{l+lbar}, p_{l+lbar+1}; q_{l+lbar}, q_{l+lbar+1}) of the concatenation
    is the product of the prefix and suffix matrices. An empty suffix
    contributes the identity (its seed p_{-1}, p_0, q_{-1}, q_0).
    """
    left = convergent_matrix(prefix.digits)
    right = convergent_matrix(suffix.digits)
    whole = CfDigits(prefix.digits + suffix.digits)
    return GlueResult(
        prefix_matrix=left,
        suffix_matrix=right,
        product=matmul(left, right),
        direct=convergent_matrix(whole.digits),
        convergents=tuple(convergents(whole, len(whole))),
    )


def best_approx_classify(p: int, q: int, d: CfDigits, L) -> int | None:
    """Index k with q = q_k and a_{k+1} >= L/2, when |q*alpha - p| <= 1/(qL).

    Returns None when the approximation hypothesis provably fails. Raises
    UndecidableError when the enclosure of alpha straddles the threshold or
    when the needed digit a_{k+1} lies past the known prefix.
    """
    L = parse_rational(L)
    if q <= 0:
        raise ValueError("q must be positive")
    if L < 4:
        raise ValueError("L must be >= 4")
    if gcd(p, q) != 1:
        raise ValueError(f"gcd({p}, {q}) != 1")
    box = alpha_enclosure(d)
    threshold = 1 / (q * L)
    lo_err, hi_err = q * box.lo - p, q * box.hi - p
    if lo_err <= 0 <= hi_err:
        best = Fraction(0)
    else:
        best = min(abs(lo_err), abs(hi_err))
    worst = max(abs(lo_err), abs(hi_err))
    if best > threshold:
        return None
    if worst > threshold:
        raise UndecidableError(f"|{q}*alpha - {p}| vs 1/({q}*{L}) not separated by the known digits")
    cs = convergents(d, len(d))
    for c in cs:
        if c.q == q and c.p == p:
            k = c.index
            if k + 1 > len(d):
                raise UndecidableError(f"a_{k + 1} is beyond the known digits")
            if d.a(k + 1) * 2 < L:
                raise AssertionError(f"a_{k + 1}={d.a(k + 1)} < L/2 contradicts the best-approximation classification")
            return k
    raise UndecidableError(f"{p}/{q} certified close but not among the known convergents")
