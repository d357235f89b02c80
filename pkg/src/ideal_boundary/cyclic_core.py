"""Total cyclic orders on finite samples of opaque integer ids.

A comparator is any callable ``theta(x, y, z) -> {-1, 0, +1}``.  The value
is +1 when ``x, y, z`` are met in that order when turning positively around
the circle, -1 for the opposite order and 0 when two arguments coincide.

Everything here decides order questions through ``theta`` alone, so the
same code serves synthetic orders and orders coming from plane geometry.
"""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

Comparator = Callable[[int, int, int], int]

DEFAULT_TRIPLE_BUDGET = 10**6


class TieError(ValueError):
    """Raised when a comparator returns 0 on three distinct ids."""

    def __init__(self, triple):
        super().__init__(f"comparator tie on distinct ids {triple}")
        self.triple = tuple(triple)


class DegenerateIntervalError(ValueError):
    pass


def linear_cyclic_sign(a, b, c) -> int:
    """Cyclic sign of three positions of a linear order (cut circle)."""
    if a == b or b == c or a == c:
        return 0
    if a < b < c or b < c < a or c < a < b:
        return 1
    return -1


def comparator_from_keys(keys: Mapping[int, Hashable]) -> Comparator:
    """Comparator induced by sortable keys, read as positions on a cut circle.

    Two ids with equal keys compare as a tie (0), which downstream code
    treats as a degenerate input rather than guessing an order.
    """

    def theta(x, y, z):
        a, b, c = keys[x], keys[y], keys[z]
        if a == b or b == c or a == c:
            return 0
        if a < b:
            return 1 if (b < c or c < a) else -1
        return 1 if (c < a and b < c) else -1

    return theta


@dataclass
class Violation:
    axiom: str
    triple: tuple
    detail: str = ""


@dataclass
class AxiomReport:
    violations: list = field(default_factory=list)
    triples_checked: int = 0
    exhaustive: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations


def cyclic_sort(theta: Comparator, ids: Sequence[int]) -> list:
    """Return ``ids`` in positive cyclic order, starting at ``ids[0]``.

    Raises TieError if theta cannot tell two distinct ids apart.
    """
    ids = list(dict.fromkeys(ids))
    if len(ids) <= 2:
        return ids
    base = ids[0]

    def cmp(y, z):
        if y == z:
            return 0
        s = theta(base, y, z)
        if s == 0:
            raise TieError((base, y, z))
        return -s

    rest = sorted(ids[1:], key=functools.cmp_to_key(cmp))
    return [base] + rest


def _basepoint_order(theta, base, others, report):
    """Order ``others`` by y < z iff theta(base, y, z) = +1, via out-degrees.

    A tournament is transitive exactly when its out-degrees are pairwise
    distinct, which costs n^2 calls instead of n^3.
    """
    wins = {y: 0 for y in others}
    for y, z in itertools.combinations(others, 2):
        s = theta(base, y, z)
        if s > 0:
            wins[y] += 1
        elif s < 0:
            wins[z] += 1
        else:
            report.violations.append(Violation("zero", (base, y, z), "theta=0 on distinct ids"))
    if len(set(wins.values())) != len(others):
        # locate one 3-cycle to report
        order = sorted(others, key=lambda y: -wins[y])
        for y, z, w in itertools.combinations(order, 3):
            a, b, c = theta(base, y, z), theta(base, z, w), theta(base, y, w)
            if a == b and c != a:
                report.violations.append(
                    Violation("total-order", (base, y, z, w), "basepoint relation is not transitive")
                )
                break
        return None
    return sorted(others, key=lambda y: -wins[y])


def check_cyclic_axioms(
    theta: Comparator,
    sample: Sequence[int],
    triple_budget: int = DEFAULT_TRIPLE_BUDGET,
    seed: int = 0,
) -> AxiomReport:
    """Check the three cyclic-order axioms of ``theta`` on ``sample``.

    Every unordered triple is evaluated under all six permutations while
    6 * C(n, 3) stays within ``triple_budget``; beyond that a seeded random
    subset of triples is used and the report is marked non-exhaustive.
    """
    ids = list(dict.fromkeys(sample))
    if len(ids) < 3:
        raise ValueError("need >=3 distinct ids")
    report = AxiomReport()

    for x, y in itertools.permutations(ids, 2):
        for t in ((x, x, y), (x, y, x), (y, x, x)):
            if theta(*t) != 0:
                report.violations.append(Violation("zero", t, "nonzero on repeated id"))
                break

    order = _basepoint_order(theta, ids[0], ids[1:], report)
    rank = None if order is None else {v: i for i, v in enumerate([ids[0]] + order)}

    n = len(ids)
    total = n * (n - 1) * (n - 2) // 6
    if 6 * total <= triple_budget:
        triples = itertools.combinations(ids, 3)
    else:
        report.exhaustive = False
        rng = random.Random(seed)
        triples = (tuple(rng.sample(ids, 3)) for _ in range(triple_budget // 6))

    for t in triples:
        report.triples_checked += 1
        s = theta(*t)
        if s == 0:
            report.violations.append(Violation("zero", t, "theta=0 on distinct ids"))
            continue
        a, b, c = t
        if theta(b, a, c) != -s or theta(a, c, b) != -s or theta(c, b, a) != -s:
            report.violations.append(Violation("antisymmetry", t))
            continue
        if theta(b, c, a) != s or theta(c, a, b) != s:
            report.violations.append(Violation("antisymmetry", t, "cyclic rotation changes sign"))
            continue
        if rank is not None and linear_cyclic_sign(rank[a], rank[b], rank[c]) != s:
            report.violations.append(Violation("total-order", t, "disagrees with basepoint order"))
    return report


def is_between(theta: Comparator, x: int, y: int, z: int) -> bool:
    """True iff y lies in the open interval (x, z)."""
    if x == z:
        raise DegenerateIntervalError(f"degenerate interval ({x}, {z})")
    return theta(x, y, z) == 1


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def contains(self, theta: Comparator, y: int) -> bool:
        return theta(self.lo, y, self.hi) == 1

    def members(self, theta: Comparator, sample: Iterable[int]) -> list:
        return [y for y in sample if theta(self.lo, y, self.hi) == 1]


@dataclass(frozen=True)
class SeparatingWitness:
    pair: tuple
    separator: int


def is_separating(theta: Comparator, E: Sequence[int], X: Sequence[int]):
    """Decide whether ``E`` separates the sample ``X``.

    Finite form used throughout the package: every two distinct ids of
    X outside E are separated by E on both sides, that is each of the open
    intervals (x, z) and (z, x) contains an element of E.  Equivalently
    each gap between cyclically consecutive E elements holds at most one
    id of X outside E.

    Returns ``(True, None)`` or ``(False, (x, z))`` where (x, z) is the first
    failing pair in cyclic order.
    """
    Eset = set(E)
    if not Eset <= set(X):
        raise ValueError("E must be a subset of X")
    rest = [x for x in dict.fromkeys(X) if x not in Eset]
    if len(rest) <= 1:
        return True, None
    if not Eset:
        return False, (rest[0], rest[1])
    ordered = cyclic_sort(theta, list(dict.fromkeys(list(E) + rest)))
    # rotate to start on an E element, then scan gaps
    k = next(i for i, v in enumerate(ordered) if v in Eset)
    ordered = ordered[k:] + ordered[:k]
    prev_free = None
    for v in ordered + [ordered[0]]:
        if v in Eset:
            prev_free = None
        elif prev_free is not None:
            return False, (prev_free, v)
        else:
            prev_free = v
    return True, None


def separating_witnesses(theta: Comparator, E: Sequence[int], X: Sequence[int]) -> list:
    """For a separating E, one SeparatingWitness per ordered pair of X \\ E."""
    Eset = set(E)
    rest = [x for x in X if x not in Eset]
    out = []
    for x, z in itertools.permutations(rest, 2):
        sep = next((e for e in E if theta(x, e, z) == 1), None)
        if sep is not None:
            out.append(SeparatingWitness((x, z), sep))
    return out
