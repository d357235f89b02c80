"""Charts of cyclically ordered samples on the circle R/Z.

The chart of a finite sample is built with a deterministic back-and-forth
against the dyadic rationals 0, 1/2, 1/4, 3/4, 1/8, ...; angles are exact
``Fraction`` values with power-of-two denominators so charts are
bit-reproducible.

Quotients and projections on finite samples need a way to tell "finitely
many" from "infinitely many".  The observable used here is refinement: an
interval between two sampled ids is finite for a family when a finer,
nested sample of that family puts nothing strictly inside it.  The finer
sample is passed explicitly as a *witness*.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .cyclic_core import Comparator, TieError, comparator_from_keys, cyclic_sort, is_separating

CHART_SCHEMA = "ideal-boundary.chart/1"


class NotSeparatingError(ValueError):
    def __init__(self, pair):
        super().__init__(f"subset is not separating; no separator for pair {pair}")
        self.pair = pair


class ChartTieError(ValueError):
    """theta returned 0 on distinct ids; the sample violates disjointness."""


class DyadicEnumeration:
    """The dyadics of [0, 1) listed level by level: 0, 1/2, 1/4, 3/4, 1/8, ..."""

    def __getitem__(self, k: int) -> Fraction:
        if k < 0:
            raise IndexError(k)
        if k == 0:
            return Fraction(0)
        j = k.bit_length()
        i = k - (1 << (j - 1))
        return Fraction(2 * i + 1, 1 << j)

    def index(self, d: Fraction) -> int:
        d = Fraction(d)
        if d == 0:
            return 0
        j = d.denominator.bit_length() - 1
        if d.denominator != 1 << j or not 0 < d < 1:
            raise ValueError(f"{d} is not a dyadic in [0, 1)")
        return (1 << (j - 1)) + (d.numerator - 1) // 2

    def prefix(self, n: int) -> list:
        return [self[k] for k in range(n)]

    def least_in(self, lo: Fraction | None, hi: Fraction | None) -> Fraction:
        """Least-index dyadic in the open positive arc from ``lo`` to ``hi``.

        ``lo is None`` means the whole circle; ``lo == hi`` means the circle
        minus that point.
        """
        if lo is None:
            return Fraction(0)
        if lo == hi:
            return Fraction(0) if lo != 0 else Fraction(1, 2)
        if lo > hi:
            if hi != 0:
                return Fraction(0)
            hi = Fraction(1)
        return _least_dyadic_linear(lo, hi)


def _least_dyadic_linear(a: Fraction, b: Fraction) -> Fraction:
    an, ad = a.numerator, a.denominator
    bn, bd = b.numerator, b.denominator
    j = 1
    while True:
        scale = 1 << j
        k = (an * scale) // ad + 1
        if k % 2 == 0:
            k += 1
        if k * bd < bn * scale:
            return Fraction(k, scale)
        j += 1


def bisection_order(seq: Sequence) -> list:
    """Reorder a cyclically sorted sequence middle-first, level by level.

    Feeding the back-and-forth in this order keeps the dyadic denominators
    near the sample size instead of exponential in it.
    """
    out, queue = [], [(0, len(seq))]
    while queue:
        nxt = []
        for lo, hi in queue:
            if lo >= hi:
                continue
            mid = (lo + hi) // 2
            out.append(seq[mid])
            nxt += [(lo, mid), (mid + 1, hi)]
        queue = nxt
    return out


DYADICS = DyadicEnumeration()


def angle_sign(a: Fraction, b: Fraction, c: Fraction) -> int:
    """Cyclic sign of three angles in [0, 1)."""
    if a == b or b == c or a == c:
        return 0
    if a < b < c or b < c < a or c < a < b:
        return 1
    return -1


@dataclass
class CircleChart:
    """Angles in [0, 1) per id plus the partition into collapse classes.

    ``classes`` maps id to class number; class numbers increase with angle.
    """

    angles: dict
    classes: dict
    provenance: dict = field(default_factory=dict)

    def ids(self) -> list:
        return sorted(self.angles, key=lambda i: (self.angles[i], i))

    def class_members(self) -> dict:
        out = {}
        for i in self.ids():
            out.setdefault(self.classes[i], []).append(i)
        return out

    def class_angles(self) -> dict:
        return {c: self.angles[m[0]] for c, m in self.class_members().items()}

    def theta(self) -> Comparator:
        return comparator_from_keys(self.angles)

    def order_permutation(self, ids: Sequence[int] | None = None) -> list:
        """Ids in positive cyclic order, rotated to start at the least id."""
        ids = list(self.angles) if ids is None else list(ids)
        ordered = sorted(ids, key=lambda i: (self.angles[i], i))
        k = ordered.index(min(ordered))
        return ordered[k:] + ordered[:k]

    def to_records(self) -> list:
        out = []
        for i in sorted(self.angles):
            a = self.angles[i]
            power = a.denominator.bit_length() - 1
            out.append({"id": i, "num": a.numerator, "pow": power, "class": self.classes[i]})
        return out

    def to_json(self) -> str:
        doc = {"schema": CHART_SCHEMA, "provenance": self.provenance, "records": self.to_records()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CircleChart":
        doc = json.loads(text)
        if doc.get("schema") != CHART_SCHEMA:
            raise ValueError(f"unsupported chart schema {doc.get('schema')!r}")
        angles, classes = {}, {}
        for r in doc["records"]:
            angles[r["id"]] = Fraction(r["num"], 1 << r["pow"])
            classes[r["id"]] = r["class"]
        return cls(angles, classes, doc.get("provenance", {}))


def _renumber_classes(angles: Mapping, groups: Mapping) -> dict:
    """Class numbers in increasing angle order."""
    firsts = {}
    for i, g in groups.items():
        a = angles[i]
        if g not in firsts or a < firsts[g]:
            firsts[g] = a
    order = {g: k for k, g in enumerate(sorted(firsts, key=lambda g: firsts[g]))}
    return {i: order[g] for i, g in groups.items()}


class _MinTree:
    """Segment tree of minima, used to find least-index unassigned ids by rank."""

    INF = float("inf")

    def __init__(self, values):
        n = 1
        while n < max(1, len(values)):
            n *= 2
        self.n = n
        self.t = [self.INF] * (2 * n)
        for i, v in enumerate(values):
            self.t[n + i] = v
        for i in range(n - 1, 0, -1):
            self.t[i] = min(self.t[2 * i], self.t[2 * i + 1])

    def clear(self, i):
        i += self.n
        self.t[i] = self.INF
        i //= 2
        while i:
            self.t[i] = min(self.t[2 * i], self.t[2 * i + 1])
            i //= 2

    def query(self, lo, hi):
        """Minimum over ranks lo..hi-1."""
        res = self.INF
        lo += self.n
        hi += self.n
        while lo < hi:
            if lo & 1:
                res = min(res, self.t[lo])
                lo += 1
            if hi & 1:
                hi -= 1
                res = min(res, self.t[hi])
            lo //= 2
            hi //= 2
        return res


def _cyclic_neighbours(sorted_vals, v):
    """Predecessor and successor of v in a sorted cyclic list (v not in it)."""
    k = bisect.bisect_left(sorted_vals, v)
    return sorted_vals[k - 1], sorted_vals[k % len(sorted_vals)]


def back_and_forth_embed(
    X: Sequence[int],
    theta: Comparator,
    E: Sequence[int] | None = None,
    D: DyadicEnumeration = DYADICS,
) -> CircleChart:
    """Strictly increasing chart of X built from the separating subset E.

    E is matched against the dyadics by alternating steps.  A forth step
    takes the least-index unassigned element of E and sends it to the
    least-index dyadic in the matching gap.  A back step takes the
    least-index dyadic not yet used and pulls back the least-index
    unassigned element of E in the matching gap; a dyadic whose gap holds
    no such element is discarded, which is what lets the finite loop
    stop once E is exhausted.  The remaining ids of X, at most one per gap
    of E, get the least-index dyadic of their gap.
    """
    X = list(dict.fromkeys(X))
    E = X if E is None else list(dict.fromkeys(E))
    ok, pair = is_separating(theta, E, X) if X else (True, None)
    if not ok:
        raise NotSeparatingError(pair)
    if not X:
        return CircleChart({}, {}, {"separating": []})
    try:
        order = cyclic_sort(theta, X)
    except TieError as exc:
        raise ChartTieError(f"cannot build chart: {exc}") from exc
    rank = {v: r for r, v in enumerate(order)}
    n = len(order)

    e_index = {e: i for i, e in enumerate(E)}
    tree = _MinTree([e_index.get(v, _MinTree.INF) for v in order])
    by_rank = {}  # rank -> dyadic
    ranks_sorted = []
    dyadics_sorted = []
    dyadic_rank = {}
    used = set()
    next_d = 0
    next_e = 0
    assigned = set()

    def assign(e, d):
        r = rank[e]
        by_rank[r] = d
        bisect.insort(ranks_sorted, r)
        bisect.insort(dyadics_sorted, d)
        dyadic_rank[d] = r
        used.add(d)
        assigned.add(e)
        tree.clear(r)

    step = 0
    while len(assigned) < len(E):
        forth = step < 2 or step % 2 == 0
        step += 1
        if forth:
            while E[next_e] in assigned:
                next_e += 1
            e = E[next_e]
            if not ranks_sorted:
                d = D.least_in(None, None)
            else:
                rp, rs = _cyclic_neighbours(ranks_sorted, rank[e])
                d = D.least_in(by_rank[rp], by_rank[rs])
            assign(e, d)
        else:
            while D[next_d] in used:
                next_d += 1
            d = D[next_d]
            dp, ds = _cyclic_neighbours(dyadics_sorted, d)
            rp, rs = dyadic_rank[dp], dyadic_rank[ds]
            if rp < rs:
                best = tree.query(rp + 1, rs)
            else:
                best = min(tree.query(rp + 1, n), tree.query(0, rs))
            used.add(d)
            if best != _MinTree.INF:
                assign(E[int(best)], d)

    angles = {order[r]: d for r, d in by_rank.items()}
    for v in X:
        if v in angles:
            continue
        if not ranks_sorted:
            angles[v] = D.least_in(None, None)
            continue
        rp, rs = _cyclic_neighbours(ranks_sorted, rank[v])
        angles[v] = D.least_in(by_rank[rp], by_rank[rs])
    classes = _renumber_classes(angles, {v: v for v in X})
    return CircleChart(angles, classes, {"separating": sorted(E)})


# ---------------------------------------------------------------------------
# monotone extension


class _CyclicCounter:
    """Counts members of a marked subset strictly between two positions."""

    def __init__(self, ordered: Sequence[int], marked):
        self.pos = {v: i for i, v in enumerate(ordered)}
        self.n = len(ordered)
        self.prefix = [0]
        for v in ordered:
            self.prefix.append(self.prefix[-1] + (1 if v in marked else 0))

    def between(self, u, v) -> int:
        """Marked elements strictly inside the positive arc (u, v)."""
        i, j = self.pos[u], self.pos[v]
        p = self.prefix
        if i < j:
            return p[j] - p[i + 1]
        if i > j:
            return p[self.n] - p[i + 1] + p[j]
        return p[self.n] - (p[i + 1] - p[i])


def extend_monotone(
    chart: CircleChart,
    Z: Sequence[int],
    theta: Comparator,
    witness: Sequence[int] | None = None,
    D: DyadicEnumeration = DYADICS,
) -> CircleChart:
    """Extend ``chart`` (on X) to Z by a non-strictly increasing map.

    Two ids collapse when the open arc between them holds at most one
    element of the witness sample (X itself when no finer sample is
    given).  Ids already charted never merge with each other; a run of new
    ids that would tie two charted neighbours together goes to the
    predecessor.  Uncollapsed new ids get fresh dyadics in order.
    """
    X = list(chart.angles)
    Xset = set(X)
    Z = list(dict.fromkeys(list(Z) + X))
    W = set(X) | set(witness or ())
    everything = list(dict.fromkeys(Z + sorted(W - set(Z))))
    ordered = cyclic_sort(theta, everything) if len(everything) > 2 else everything
    counter = _CyclicCounter(ordered, W)
    zorder = [v for v in ordered if v in set(Z)]

    angles = dict(chart.angles)
    groups = {v: ("old", chart.classes[v]) for v in X}
    new_ids = [v for v in zorder if v not in Xset]
    if not new_ids:
        return CircleChart(angles, dict(chart.classes), dict(chart.provenance))

    if not X:
        runs = [(None, zorder, None)]
    else:
        k = next(i for i, v in enumerate(zorder) if v in Xset)
        rot = zorder[k:] + zorder[:k]
        runs = []
        cur, prev = [], rot[0]
        for v in rot[1:] + [rot[0]]:
            if v in Xset:
                if cur:
                    runs.append((prev, cur, v))
                cur, prev = [], v
            else:
                cur.append(v)

    fresh = 0
    for p, run, s in runs:
        links = []
        seq = ([p] if p is not None else []) + run + ([s] if s is not None else [])
        for a, b in zip(seq, seq[1:]):
            links.append(counter.between(a, b) <= 1)
        # components of the run, with attachment flags
        comps = [[run[0]]]
        off = 1 if p is not None else 0
        for i in range(1, len(run)):
            if links[off + i - 1]:
                comps[-1].append(run[i])
            else:
                comps.append([run[i]])
        attach_first = p is not None and links[0]
        attach_last = s is not None and links[-1]
        if len(comps) == 1 and attach_first and attach_last:
            attach_last = False
        lo = chart.angles[p] if p is not None else None
        hi = chart.angles[s] if s is not None else None
        for ci, comp in enumerate(comps):
            if ci == 0 and attach_first:
                for v in comp:
                    angles[v] = chart.angles[p]
                    groups[v] = groups[p]
                continue
            if ci == len(comps) - 1 and attach_last:
                for v in comp:
                    angles[v] = chart.angles[s]
                    groups[v] = groups[s]
                continue
            a = D.least_in(lo, hi)
            for v in comp:
                angles[v] = a
                groups[v] = ("new", fresh)
            fresh += 1
            lo = a
    classes = _renumber_classes(angles, groups)
    prov = dict(chart.provenance)
    prov["extended"] = True
    return CircleChart(angles, classes, prov)


# ---------------------------------------------------------------------------
# union quotient


@dataclass
class Gap:
    """The arc between two cyclically consecutive classes."""

    before: int
    after: int
    inserted: dict
    unresolved: bool


@dataclass
class TildeClasses:
    classes: list  # lists of ids, in positive cyclic order
    class_of: dict
    gaps: list
    budgets: dict
    representatives: list
    separating: list
    stable: list
    conflicts: list = field(default_factory=list)
    gap_classes: list = field(default_factory=list)

    def quotient_theta(self, theta: Comparator) -> Comparator:
        reps = self.representatives

        def qtheta(a, b, c):
            return theta(reps[a], reps[b], reps[c])

        return qtheta

    def unresolved_classes(self) -> list:
        return [k for k, s in enumerate(self.stable) if not s]


def default_budget(n: int) -> int:
    return max(1, math.isqrt(max(n, 0) - 1) + 1) if n > 0 else 1


def _tilde_pass(families, witnesses, theta, budgets):
    coarse = list(dict.fromkeys(x for X, _E in families for x in X))
    wit_sets = [set(w) | set(E) for (X, E), w in zip(families, witnesses)]
    extra = sorted(set().union(*wit_sets) - set(coarse)) if wit_sets else []
    ordered = cyclic_sort(theta, coarse + extra)
    counters = [_CyclicCounter(ordered, ws) for ws in wit_sets]
    cset = set(coarse)
    corder = [v for v in ordered if v in cset]
    n = len(corder)
    merged = []
    inserted = []
    for k in range(n):
        u, v = corder[k], corder[(k + 1) % n]
        if n == 1:
            counts = {i: c.between(u, u) for i, c in enumerate(counters)}
        else:
            counts = {i: c.between(u, v) for i, c in enumerate(counters)}
        inserted.append(counts)
        merged.append(n > 1 and all(c == 0 for c in counts.values()))
    if n and all(merged):
        return [corder], [], corder
    # start at a non-merged link so classes do not wrap
    start = next(k for k in range(n) if not merged[k]) + 1 if n else 0
    classes, gaps = [], []
    cur = []
    for t in range(n):
        k = (start + t) % n
        cur.append(corder[k])
        if not merged[k]:
            classes.append(cur)
            cur = []
            counts = inserted[k]
            unresolved = any(counts[i] >= budgets[i] for i in counts)
            gaps.append((len(classes) - 1, counts, unresolved))
    return classes, gaps, corder


def quotient_union(
    families: Sequence[tuple],
    theta: Comparator,
    witnesses: Sequence[Sequence[int]] | None = None,
    budgets: Sequence[int] | None = None,
    refined: tuple | None = None,
) -> TildeClasses:
    """Quotient of the union of families X_i (with separating E_i).

    Two cyclically consecutive ids are identified when, for every family,
    the witness sample of E_i puts nothing strictly between them: the
    closed interval then meets each E_i in finitely many (at most two)
    points however far the sample is refined.  A gap between classes is
    *unresolved* when refinement drops at least m_i witnesses of some
    family into it (default m_i = ceil(sqrt |E_i|)), i.e. unboundedly many
    ends accumulate at a point that no sampled end reaches.

    ``refined`` may carry ``(families, witnesses)`` one level finer; coarse
    classes whose members do not form exactly one finer class are marked
    unstable.
    """
    families = [(list(X), list(E)) for X, E in families]
    if witnesses is None:
        witnesses = [E for _X, E in families]
    if budgets is None:
        budgets = [default_budget(len(set(E))) for _X, E in families]
    budgets = dict(enumerate(budgets))
    classes, raw_gaps, _ = _tilde_pass(families, witnesses, theta, budgets)
    class_of = {v: k for k, cls in enumerate(classes) for v in cls}

    index = {}
    for X, _E in families:
        for x in X:
            index.setdefault(x, len(index))
    all_E = set(e for _X, E in families for e in E)
    reps = []
    for cls in classes:
        pool = [v for v in cls if v in all_E] or list(cls)
        reps.append(min(pool, key=lambda v: index[v]))
    separating = [k for k, cls in enumerate(classes) if any(v in all_E for v in cls)]

    conflicts = []
    member_sets = [set(X) for X, _E in families]
    for k, cls in enumerate(classes):
        for i, ms in enumerate(member_sets):
            if sum(1 for v in cls if v in ms) > 1:
                conflicts.append((k, i))

    stable = [True] * len(classes)
    for k, _i in conflicts:
        stable[k] = False
    if refined is not None:
        rfam, rwit = refined
        rbud = dict(enumerate(default_budget(len(set(E))) for _X, E in rfam))
        rclasses, _rg, _ = _tilde_pass(rfam, rwit, theta, rbud)
        rclass_of = {v: k for k, cls in enumerate(rclasses) for v in cls}
        for k, cls in enumerate(classes):
            targets = {rclass_of.get(v) for v in cls}
            if len(targets) != 1 or None in targets or len(rclasses[targets.pop()]) != len(cls):
                stable[k] = False

    gaps = []
    nc = len(classes)
    for k, counts, unresolved in raw_gaps:
        gaps.append(Gap(k, (k + 1) % nc, counts, unresolved))

    tc = TildeClasses(classes, class_of, gaps, budgets, reps, separating, stable, conflicts)
    tc.gap_classes = _collect_gap_classes(tc)
    return tc


def _collect_gap_classes(tc: TildeClasses) -> list:
    """Group unresolved gaps with the unstable classes next to them.

    Tokens alternate class 0, gap 0, class 1, gap 1, ...; a segment is a
    maximal cyclic run of gaps and unstable classes.  Segments containing an
    unresolved gap are reported as ``{"gaps", "absorbed", "before", "after"}``
    with before/after the stable classes bounding them (None if all unstable).
    """
    nc = len(tc.classes)
    gap_after = {g.before: g for g in tc.gaps}
    if not gap_after:
        return []
    bad = [not s for s in tc.stable]
    good = [k for k in range(nc) if not bad[k]]
    out = []
    if not good:
        gaps = sorted(k for k, g in gap_after.items() if g.unresolved)
        if gaps:
            out.append({"gaps": gaps, "absorbed": list(range(nc)), "before": None, "after": None})
        return out
    for start in good:
        gaps, absorbed = [], []
        k = start
        while True:
            g = gap_after.get(k)
            if g is None:
                break
            if g.unresolved:
                gaps.append(k)
            nxt = g.after
            if bad[nxt]:
                absorbed.append(nxt)
                k = nxt
                continue
            break
        if gaps:
            out.append({"gaps": gaps, "absorbed": absorbed, "before": start, "after": (k + 1) % nc})
    return out


# ---------------------------------------------------------------------------
# projection


def project(chart: CircleChart, J: set, foliation_of: Mapping[int, object], D: DyadicEnumeration = DYADICS):
    """Projection of a family chart to the sub-family J.

    Classes carrying an end of some foliation of J survive; every maximal
    run of classes with no such end collapses to one point.  The new chart
    is re-embedded with the dyadic back-and-forth, surviving classes acting
    as the separating set.  Returns ``(chart_J, collapse)`` where collapse
    maps every id to its class number in chart_J.
    """
    J = set(J)
    if not J:
        raise ValueError("cannot project to an empty family")
    members = chart.class_members()
    order = sorted(members, key=lambda c: chart.angles[members[c][0]])
    is_j = {c: any(foliation_of[v] in J for v in members[c]) for c in order}
    if not any(is_j.values()):
        raise ValueError("no sampled end of the target family")
    k = next(i for i, c in enumerate(order) if is_j[c])
    order = order[k:] + order[:k]

    groups = []  # list of (is_j, [class numbers])
    for c in order:
        if is_j[c]:
            groups.append((True, [c]))
        elif groups and not groups[-1][0]:
            groups[-1][1].append(c)
        else:
            groups.append((False, [c]))

    reps, E = [], []
    for flag, cls in groups:
        ids = [v for c in cls for v in members[c]]
        pool = [v for v in ids if foliation_of[v] in J] if flag else ids
        rep = min(pool)
        reps.append(rep)
        if flag:
            E.append(rep)
    rep_theta = comparator_from_keys({r: chart.angles[r] for r in reps})
    small = back_and_forth_embed(reps, rep_theta, bisection_order(E), D)

    angles, groups_of = {}, {}
    for g, ((flag, cls), rep) in enumerate(zip(groups, reps)):
        for c in cls:
            for v in members[c]:
                angles[v] = small.angles[rep]
                groups_of[v] = g
    classes = _renumber_classes(angles, groups_of)
    prov = dict(chart.provenance)
    prov["projected_to"] = sorted(str(j) for j in J)
    out = CircleChart(angles, classes, prov)
    return out, dict(classes)


def partition_of(collapse: Mapping[int, int]) -> frozenset:
    """A collapse map as a partition (frozenset of frozensets of ids)."""
    groups = {}
    for v, c in collapse.items():
        groups.setdefault(c, set()).add(v)
    return frozenset(frozenset(g) for g in groups.values())


# ---------------------------------------------------------------------------
# the order-theoretic quotient for samples without a separating family


@dataclass
class ApproxClasses:
    classes: list
    class_of: dict
    stable: list


def _adjacent_chains(theta, X, W):
    everything = list(dict.fromkeys(list(X) + sorted(set(W) - set(X))))
    ordered = cyclic_sort(theta, everything)
    counter = _CyclicCounter(ordered, set(W) | set(X))
    xset = set(X)
    xo = [v for v in ordered if v in xset]
    n = len(xo)
    if n == 1:
        return [xo]
    links = [counter.between(xo[k], xo[(k + 1) % n]) == 0 for k in range(n)]
    if all(links):
        return [xo]
    start = next(k for k in range(n) if not links[k]) + 1
    classes, cur = [], []
    for t in range(n):
        k = (start + t) % n
        cur.append(xo[k])
        if not links[k]:
            classes.append(cur)
            cur = []
    return classes


def approx_quotient(
    X: Sequence[int],
    theta: Comparator,
    witness: Sequence[int] | None = None,
    witness2: Sequence[int] | None = None,
) -> ApproxClasses:
    """Classes of the relation "some side of [x, y] holds no self-separating set".

    At sample scale a pair of ids of X is separated by the witness sample
    when a witness point falls strictly between them; x and y are merged
    exactly when one of the two closed arcs they bound contains no such
    separated pair, which amounts to chaining witness-adjacent ids.  With no
    witness the sample itself plays that role.  ``witness2``, one level
    finer, decides the stability flags.
    """
    X = list(dict.fromkeys(X))
    if not X:
        return ApproxClasses([], {}, [])
    classes = _adjacent_chains(theta, X, witness or ())
    class_of = {v: k for k, c in enumerate(classes) for v in c}
    if witness2 is None:
        stable = [True] * len(classes)
    else:
        finer = _adjacent_chains(theta, X, witness2)
        fset = {frozenset(c) for c in finer}
        stable = [frozenset(c) in fset for c in classes]
    return ApproxClasses(classes, class_of, stable)
