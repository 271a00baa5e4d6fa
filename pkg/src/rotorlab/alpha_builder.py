"""Rotation numbers for experiments: constant digits, Gauss-random digits, and
numbers with planted giant partial quotients at denominators in a syndetic set."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from rotorlab.cf_core import CfDigits, expand_rational
from rotorlab.observable import SyndeticReport


class SearchBudgetExhausted(RuntimeError):
    def __init__(self, stage: int, q_trace: list[int]):
        self.stage = stage
        self.q_trace = q_trace
        super().__init__(f"stage {stage}: no r*q_n in the set within budget; q trace {q_trace[-8:]}")


def constant_digits(a: int, length: int) -> CfDigits:
    if a < 1:
        raise ValueError("digit must be >= 1")
    return CfDigits((a,) * length)


def gauss_random(length: int, seed: int, max_retries: int = 8) -> CfDigits:
    """First ``length`` digits of a uniform random rational in (0, 1).

    The denominator is 2^bits with bits = max(128, 4*length + 64), enough that
    the first ``length`` digits are digits of a typical point.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    bits = max(128, 4 * length + 64)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        words = rng.integers(0, 2**32, size=(bits + 31) // 32, dtype=np.uint64)
        num = 0
        for w in words:
            num = (num << 32) | int(w)
        num >>= 32 * len(words) - bits
        d = expand_rational(num, 1 << bits)
        if len(d) >= length:
            return CfDigits(d.digits[:length])
    raise RuntimeError(f"expansion shorter than {length} digits after {max_retries} draws")


def gauss_digit(rng: np.random.Generator) -> int:
    """One digit distributed as a_1 under the Gauss measure."""
    u = rng.random()
    x = 2.0**u - 1.0
    return max(1, int(1.0 / x)) if x > 0 else 1


@dataclass(frozen=True)
class Stage:
    k: int
    n_k: int
    r_k: int
    L_k: int
    a_planted: int


@dataclass(frozen=True)
class PlantingPlan:
    stages: tuple[Stage, ...]
    filler: str = "ones"
    seed: int | None = None
    growth: int = 3
    M: int = 1

    def to_dict(self) -> dict:
        return {
            "stages": [{"n_k": s.n_k, "r_k": s.r_k, "a_planted": str(s.a_planted)} for s in self.stages],
            "filler": self.filler,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_in_A(nset: SyndeticReport, M: int, n_stages: int, search_budget: int = 200, seed: int | None = None,
               filler: str = "ones", tail: int = 0, growth: int = 3,
               min_gap: int = 0) -> tuple[CfDigits, PlantingPlan]:
    """Digits whose stage-k denominator q_{n_k} has some r <= M with r q_{n_k} in the set,
    followed by a planted a_{n_k+1} = ceil(k^growth * L_k).

    ``min_gap`` forces that many filler digits between consecutive stages;
    ``tail`` appends filler digits after the last planted quotient.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if filler not in ("ones", "gauss"):
        raise ValueError("filler must be 'ones' or 'gauss'")
    rng = np.random.default_rng(seed)

    def fill() -> int:
        return 1 if filler == "ones" else gauss_digit(rng)

    digits: list[int] = []
    qs = [0, 1]  # q_{-1}, q_0
    stages = []

    def push(a: int):
        digits.append(a)
        qs.append(a * qs[-1] + qs[-2])

    for k in range(1, n_stages + 1):
        for _ in range(min_gap if stages else 0):
            push(fill())
        if not digits:
            push(fill())
        tried = 0
        trace = []
        while True:
            q = qs[-1]
            trace.append(q)
            r = next((r for r in range(1, M + 1) if nset.contains(r * q)), None)
            if r is not None:
                break
            tried += 1
            if tried > search_budget:
                raise SearchBudgetExhausted(k, trace)
            push(fill())
        n = len(digits)
        L = sum(digits)
        a_new = k**growth * L
        push(a_new)
        stages.append(Stage(k, n, r, L, a_new))
    for _ in range(tail):
        push(fill())
    return CfDigits(tuple(digits)), PlantingPlan(tuple(stages), filler, seed, growth, M)


def plan_checks(d: CfDigits, plan: PlantingPlan, nset: SyndeticReport) -> list[str]:
    """Violated plan invariants (empty when the plan is sound)."""
    problems = []
    qs = [0, 1]
    for a in d.digits:
        qs.append(a * qs[-1] + qs[-2])
    prev = 0
    for s in plan.stages:
        q_n, q_next = qs[s.n_k + 1], qs[s.n_k + 2]
        L = sum(d.digits[: s.n_k])
        if s.n_k <= prev:
            problems.append(f"stage {s.k}: n_k not increasing")
        prev = s.n_k
        if s.r_k > plan.M:
            problems.append(f"stage {s.k}: r_k > M")
        if not nset.contains(s.r_k * q_n):
            problems.append(f"stage {s.k}: r_k q_n not in the set")
        if d.a(s.n_k + 1) < s.k**plan.growth * L:
            problems.append(f"stage {s.k}: planted quotient below k^{plan.growth} L_k")
        if not q_next > s.k**plan.growth * L * q_n:
            problems.append(f"stage {s.k}: q_(n_k+1) <= k^{plan.growth} L_k q_n_k")
    return problems
