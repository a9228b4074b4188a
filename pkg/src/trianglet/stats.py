"""Mutual information between outcome bits and the win/lose p-value."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import ContractViolation, DomainError

MI_VARIABLES = ("A_B", "A_C", "B_A", "B_C", "C_A", "C_B")
_FIELD_OF = {"A_B": "a_B", "A_C": "a_C", "B_A": "b_A", "B_C": "b_C", "C_A": "c_A", "C_B": "c_B"}
_LN10 = math.log(10.0)


def _log_base(base) -> float:
    if base == "e" or base == math.e:
        return 1.0
    if base in (2, 10):
        return math.log(base)
    raise ContractViolation(f"log base must be 2, 10 or 'e', got {base!r}")


def mutual_information(joint_counts, base=10) -> float:
    """Plug-in mutual information of a 2x2 count table, with 0 log 0 = 0."""
    n = np.asarray(joint_counts, dtype=float)
    if n.shape != (2, 2):
        raise ContractViolation("joint counts must be a 2x2 table")
    if np.any(n < 0):
        raise DomainError("counts must be non-negative")
    total = n.sum()
    if total < 1:
        raise DomainError("need at least one count")
    p = n / total
    px, py = p.sum(axis=1), p.sum(axis=0)
    terms = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            if p[i, j] > 0:
                terms[i, j] = p[i, j] * math.log(p[i, j] / (px[i] * py[j]))
    # grouped so that transposing the table gives a bit-identical sum
    value = (terms[0, 0] + terms[1, 1]) + (terms[0, 1] + terms[1, 0])
    # the plug-in estimate is non-negative; clip rounding residue only
    return max(value, 0.0) / _log_base(base)


@dataclass(frozen=True)
class MutualInfoReport:
    x: str
    y: str
    joint_counts: np.ndarray
    I_value: float
    base: object = 10


def joint_counts(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.bincount(2 * np.asarray(x, dtype=np.int64) + y, minlength=4).reshape(2, 2)


def mutual_information_suite(events, base=10) -> list[MutualInfoReport]:
    """All 15 pairs of the six outcome variables, in upper-triangular order."""
    missing = [f for f in _FIELD_OF.values() if not events.has(f)]
    if missing:
        raise ContractViolation(f"events lack fields {missing}")
    out = []
    for x, y in combinations(MI_VARIABLES, 2):
        counts = joint_counts(events[_FIELD_OF[x]], events[_FIELD_OF[y]])
        out.append(MutualInfoReport(x, y, counts, mutual_information(counts, base), base))
    return out


def write_mi_csv(reports: Sequence[MutualInfoReport], path) -> None:
    """Upper-triangular matrix; the first column names the row variable."""
    table = {(r.x, r.y): r.I_value for r in reports}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", *MI_VARIABLES[1:]])
        for i, x in enumerate(MI_VARIABLES[:-1]):
            row = [x]
            for j, y in enumerate(MI_VARIABLES[1:], start=1):
                row.append(format(table[(x, y)], ".17g") if j > i else "")
            w.writerow(row)


def beta_win(xi1: float, xi2: float) -> float:
    """Best winning probability of a local model in the win/lose game."""
    if xi1 < 0 or xi2 < 0:
        raise DomainError("xi coefficients must be non-negative")
    if xi1 + xi2 <= 0:
        raise DomainError("xi1 + xi2 must be positive")
    return xi2 / (xi1 + xi2)


@dataclass(frozen=True)
class PValueInput:
    n: int
    c: int
    beta_win: float

    def __post_init__(self):
        if self.n < 1:
            raise ContractViolation("n must be at least 1")
        if not 0 <= self.c <= self.n:
            raise ContractViolation(f"need 0 <= c <= n, got c={self.c}, n={self.n}")
        if not 0.0 < self.beta_win < 1.0:
            raise ContractViolation(f"beta_win must lie in (0, 1), got {self.beta_win}")


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    if m == -math.inf:
        return m
    return m + math.log(float(np.sum(np.exp(values - m))))


@lru_cache(maxsize=8)
def _log_factorials(n: int) -> np.ndarray:
    out = np.array([math.lgamma(k + 1) for k in range(n + 1)])
    out.flags.writeable = False
    return out


def pvalue_exact_log10(inp: PValueInput) -> float:
    """log10 of P[Binomial(n, beta) >= c]."""
    n, c, b = inp.n, inp.c, inp.beta_win
    if c == 0:
        return 0.0
    i = np.arange(c, n + 1)
    lg = _log_factorials(n)
    terms = lg[n] - lg[i] - lg[n - i] + i * math.log(b) + (n - i) * math.log1p(-b)
    return min(_logsumexp(terms) / _LN10, 0.0)


def pvalue_analytic_bound_log10(inp: PValueInput) -> float:
    """log10 of the closed-form tail bound, valid for ``c > n beta``.

    ``sqrt(n / (2 pi c (n - c))) (n b / c)^c (n (1 - b) / (n - c))^(n - c)
    / (1 - b (n - c) / ((1 - b)(c + 1)))``. At ``c = n`` the prefactor
    diverges and the bound is vacuous (``+inf``).
    """
    n, c, b = inp.n, inp.c, inp.beta_win
    if c <= n * b:
        raise DomainError(f"bound needs c > n*beta ({c} <= {n * b:.6g})")
    if c == n:
        return math.inf
    log_pref = 0.5 * math.log(n / (2.0 * math.pi * c * (n - c)))
    log_main = c * math.log(n * b / c) + (n - c) * math.log(n * (1.0 - b) / (n - c))
    log_denom = math.log1p(-b * (n - c) / ((1.0 - b) * (c + 1)))
    return (log_pref + log_main - log_denom) / _LN10
