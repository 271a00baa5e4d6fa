"""Euclid-style summation of floor((a*i + b) / m)."""

from __future__ import annotations


def floor_sum(n: int, m: int, a: int, b: int) -> int:
    """sum_{i=0}^{n-1} floor((a*i + b) / m) for n >= 0, m >= 1, any integers a, b.

    O(log m) steps on arbitrary-precision integers.
    """
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    total = 0
    # normalize a, b into [0, m)
    qa, a = divmod(a, m)
    total += qa * (n * (n - 1) // 2)
    qb, b = divmod(b, m)
    total += qb * n
    while True:
        if a >= m:
            total += (n - 1) * n // 2 * (a // m)
            a %= m
        if b >= m:
            total += n * (b // m)
            b %= m
        y_max = a * n + b
        if y_max < m:
            return total
        n, b = divmod(y_max, m)
        m, a = a, m


def count_residues_below(n: int, m: int, a: int, b: int, t: int) -> int:
    """#{0 <= i < n : (a*i + b) mod m < t} for 0 <= t <= m."""
    if t <= 0 or n <= 0:
        return 0
    if t >= m:
        return n
    # floor(u/m) - floor((u - t)/m) is 1 exactly when u mod m < t
    return floor_sum(n, m, a, b) - floor_sum(n, m, a, b - t)
