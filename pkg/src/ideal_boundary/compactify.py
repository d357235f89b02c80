"""Circles at infinity for finite families of foliations.

A family chart is built from three nested samples of ends: the coarse
sample that gets charted, a witness one level finer deciding which coarse
ends are identified, and a sample one more level finer used for the
stability flags and the monotone extension.  The pipeline is

    union quotient -> back-and-forth chart of the representatives
    -> monotone extension to every coarse end -> per-foliation projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cyclic_core import comparator_from_keys
from .embedder import (
    DYADICS,
    _renumber_classes,
    CircleChart,
    back_and_forth_embed,
    bisection_order,
    extend_monotone,
    partition_of,
    project,
    quotient_union,
)
from .foliation_engine import (
    EndRecord,
    FoliationSpec,
    Leaf,
    SingularTerminus,
    TransverseSegment,
    UnknownTerminus,
    certify_transverse,
    detect_nonseparated,
    integrate_leaf,
)
from .ray_geometry import Ray, angular_keys, exit_angle, point_polyline_distance

MAX_FOLIATIONS = 32


@dataclass
class GapPoint:
    """An unresolved gap: a point of the circle that no sampled end reaches."""

    before: int  # chart class numbers of the neighbouring classes
    after: int
    angle: object
    inserted: dict


@dataclass
class Block:
    classes: list
    foliations: list
    sides: list


@dataclass
class FamilyChart:
    chart: CircleChart
    tilde: object
    per_foliation: dict  # foliation -> (chart, collapse)
    ends: list
    foliations: list
    gaps: list  # GapPoint, in cyclic order
    gap_classes: list  # groups of gaps with the unstable classes they absorb
    blocks: list
    theta: object
    keys: dict
    extension_agrees: bool = True

    @property
    def ends_by_id(self) -> dict:
        return {e.id: e for e in self.ends}

    def foliation_of(self) -> dict:
        return {e.id: e.foliation for e in self.ends}

    def class_of(self, end_id: int) -> int:
        return self.chart.classes[end_id]

    def class_order(self) -> list:
        return sorted(set(self.chart.classes.values()))

    def class_keys(self) -> dict:
        """Least key per chart class."""
        out = {}
        for e in self.ends:
            c = self.chart.classes[e.id]
            if c not in out or e.key < out[c]:
                out[c] = e.key
        return out


# ---------------------------------------------------------------------------
# samples of analytic examples


@dataclass
class EndSample:
    by_level: dict  # level -> list of EndRecord (ids shared across levels)
    levels: list


def sample_builtin(builtin, levels: Sequence[int]) -> EndSample:
    """EndRecords of an analytic example at several levels with shared ids.

    Ids are the ranks of the ends in the union of the samples, ordered by
    key, so one end keeps its id at every level.
    """
    raw = {L: builtin.ends(L) for L in levels}
    union = {}
    for L in levels:
        for e in raw[L]:
            union.setdefault((e.foliation, e.leaf, e.side), e)
    ordered = sorted(union.values(), key=lambda e: e.key)
    ids = {(e.foliation, e.leaf, e.side): i for i, e in enumerate(ordered)}
    by_level = {}
    for L in levels:
        by_level[L] = [EndRecord(ids[(e.foliation, e.leaf, e.side)], e.foliation, e.leaf, e.side, e.key, e.regular)
                       for e in raw[L]]
    return EndSample(by_level, list(levels))


def chart_for_builtin(builtin, level: int, budgets: Sequence[int] | None = None) -> FamilyChart:
    sample = sample_builtin(builtin, [level, level + 1, level + 2])
    s = sample.by_level
    return build_family_chart(s[level], s[level + 1], s[level + 2], list(builtin.foliations), budgets)


# ---------------------------------------------------------------------------
# the family chart


def build_family_chart(
    ends: Sequence[EndRecord],
    witness: Sequence[EndRecord],
    refined: Sequence[EndRecord] | None = None,
    foliations: Sequence[str] | None = None,
    budgets: Sequence[int] | None = None,
) -> FamilyChart:
    """Chart of all coarse ends of a finite family of foliations.

    ``witness`` is the next sample level (it decides the identifications),
    ``refined`` the one after (stability flags and monotone extension).
    Samples must be nested, ids shared, and keys of distinct ends distinct.
    """
    if foliations is None:
        foliations = sorted({e.foliation for e in ends})
    foliations = list(foliations)
    if not foliations:
        raise ValueError("empty family: no foliation to chart")
    if len(foliations) > MAX_FOLIATIONS:
        raise ValueError(f"families are limited to {MAX_FOLIATIONS} foliations")
    keys = {}
    for e in list(ends) + list(witness) + list(refined or ()):
        if e.id in keys and keys[e.id] != e.key:
            raise ValueError(f"end {e.id} has two different keys")
        keys[e.id] = e.key
    if len(set(keys.values())) != len(keys):
        raise ValueError("two distinct ends share a key (germs not disjoint)")
    theta = comparator_from_keys(keys)

    def fams(sample):
        out = []
        for f in foliations:
            X = [e.id for e in sample if e.foliation == f]
            E = [e.id for e in sample if e.foliation == f and e.regular == "Regular"]
            out.append((X, E))
        return out

    def wits(sample):
        return [[e.id for e in sample if e.foliation == f] for f in foliations]

    families = fams(ends)
    refined_arg = (fams(witness), wits(refined)) if refined is not None else None
    tc = quotient_union(families, theta, wits(witness), budgets, refined_arg)

    reps = tc.representatives
    E_reps = bisection_order([reps[k] for k in tc.separating])
    rep_chart = back_and_forth_embed(reps, theta, E_reps)
    coarse_ids = [e.id for e in ends]
    direct = _direct_extension(rep_chart, tc, reps)
    agrees = True
    if refined is not None:
        chart = extend_monotone(rep_chart, coarse_ids, theta, witness=[e.id for e in refined])
        if partition_of(chart.classes) != partition_of(direct.classes):
            agrees = False
            chart = direct
    else:
        chart = direct
    chart.provenance.update({"foliations": foliations, "ends": len(coarse_ids)})

    foliation_of = {e.id: e.foliation for e in ends}
    per = {f: project(chart, {f}, foliation_of) for f in foliations if any(v == f for v in foliation_of.values())}

    gaps = []
    tclass_to_chart = [chart.classes[reps[k]] for k in range(len(tc.classes))]
    angles = chart.class_angles()
    for g in tc.gaps:
        if not g.unresolved:
            continue
        a, b = tclass_to_chart[g.before], tclass_to_chart[g.after]
        ang = DYADICS.least_in(angles[a], angles[b]) if a != b else DYADICS.least_in(angles[a], angles[a])
        gaps.append(GapPoint(a, b, ang, dict(g.inserted)))
    gap_classes = []
    for gc in tc.gap_classes:
        gap_classes.append({
            "gaps": [tclass_to_chart[k] for k in gc["gaps"]],
            "absorbed": [tclass_to_chart[k] for k in gc["absorbed"]],
            "before": None if gc["before"] is None else tclass_to_chart[gc["before"]],
            "after": None if gc["after"] is None else tclass_to_chart[gc["after"]],
        })
    blocks = _blocks(chart, tc, tclass_to_chart, {e.id: e for e in ends})
    return FamilyChart(chart, tc, per, list(ends), foliations, gaps, gap_classes, blocks, theta, keys, agrees)


def _direct_extension(rep_chart: CircleChart, tc, reps) -> CircleChart:
    angles, groups = {}, {}
    for k, cls in enumerate(tc.classes):
        a = rep_chart.angles[reps[k]]
        for v in cls:
            angles[v] = a
            groups[v] = k
    return CircleChart(angles, _renumber_classes(angles, groups), dict(rep_chart.provenance))


def _blocks(chart, tc, tclass_to_chart, by_id) -> list:
    """Maximal runs of classes between consecutive unresolved gaps."""
    n = len(tc.classes)
    cut_after = {g.before for g in tc.gaps if g.unresolved}
    if not cut_after:
        runs = [list(range(n))]
    else:
        start = (min(cut_after) + 1) % n
        runs, cur = [], []
        for t in range(n):
            k = (start + t) % n
            cur.append(k)
            if k in cut_after:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
    out = []
    for run in runs:
        fols, sides = [], []
        for k in run:
            for v in tc.classes[k]:
                e = by_id[v]
                if e.foliation not in fols:
                    fols.append(e.foliation)
                if e.side not in sides:
                    sides.append(e.side)
        out.append(Block([tclass_to_chart[k] for k in run], fols, sides))
    return out


def block_monotone(fc: FamilyChart, block: Block, param) -> bool:
    """Is ``param(end)`` strictly monotone along the block's classes?"""
    members = fc.chart.class_members()
    by_id = fc.ends_by_id
    vals = []
    for c in block.classes:
        vals += [param(by_id[v]) for v in members[c]]
    inc = all(a < b for a, b in zip(vals, vals[1:]))
    dec = all(a > b for a, b in zip(vals, vals[1:]))
    return inc or dec


# ---------------------------------------------------------------------------
# center-like points


@dataclass
class CenterLikeReport:
    points: list  # dicts: angle, gap (before, after), witnesses [(end+, end-), ...] innermost first


def leaf_pairs(ends: Sequence[EndRecord]) -> list:
    """(id of + end, id of - end) for every leaf with both ends sampled."""
    by_leaf = {}
    for e in ends:
        by_leaf.setdefault((e.foliation, _leaf_label(e.seed)), {})[e.side] = e.id
    return [(d["+"], d["-"]) for d in by_leaf.values() if "+" in d and "-" in d]


def _leaf_label(seed):
    return tuple(seed) if isinstance(seed, (list, np.ndarray)) else seed


def center_like_scan(fc: FamilyChart, depth: int = 3, pairs: Sequence[tuple] | None = None) -> CenterLikeReport:
    """Unresolved gaps that are nested intersections of single-leaf intervals.

    For each leaf the two ends cut the circle into two arcs; the arcs
    holding a given gap are nested.  The gap is center-like at sample scale
    when the innermost one holds no sampled end besides its endpoints and
    at least ``depth`` leaves give strictly nested arcs around it.
    """
    pairs = leaf_pairs(fc.ends) if pairs is None else list(pairs)
    order = fc.class_order()
    pos = {c: i for i, c in enumerate(order)}
    n = len(order)
    arcs = []
    for p, m in pairs:
        a, b = pos[fc.chart.classes[p]], pos[fc.chart.classes[m]]
        if a == b:
            continue
        arcs.append(((a, b), (p, m)))
        arcs.append(((b, a), (m, p)))
    out = []
    for g in fc.gaps:
        gi = pos[g.before]
        holding = []
        for (a, b), ends in arcs:
            # gap after class gi lies in the closed arc a..b iff gi in a..b-1
            length = (b - a) % n
            if (gi - a) % n < length:
                holding.append((length, ends))
        holding.sort(key=lambda t: t[0])
        if not holding or holding[0][0] != 1:
            continue
        chain, last = [], None
        for length, ends in holding:
            if length != last:
                chain.append(ends)
                last = length
        if len(chain) >= depth:
            out.append({"angle": g.angle, "gap": (g.before, g.after), "witnesses": chain[:depth]})
    return CenterLikeReport(out)


# ---------------------------------------------------------------------------
# coincidence of compactifications


@dataclass
class CoincidenceResult:
    coincide: bool
    split_intervals: list = field(default_factory=list)  # (target, group of classes)


def chart_coincidence_test(fc: FamilyChart, A: str, B: str) -> CoincidenceResult:
    """Do the circles of {A, B}, of A and of B agree at sample scale?

    They coincide when no collapse group of the projection to A holds two
    or more classes carrying B ends, and symmetrically.
    """
    if A == B:
        return CoincidenceResult(True)
    fol = fc.foliation_of()
    members = fc.chart.class_members()
    carries = {c: {fol[v] for v in ids} for c, ids in members.items()}
    splits = []
    for target, other in ((A, B), (B, A)):
        _chart, collapse = fc.per_foliation[target]
        groups = {}
        for v, g in collapse.items():
            groups.setdefault(g, set()).add(fc.chart.classes[v])
        for g, cls in sorted(groups.items()):
            with_other = sorted(c for c in cls if other in carries[c])
            if len(with_other) >= 2:
                splits.append((target, with_other))
    return CoincidenceResult(not splits, splits)


def projection_chain_agrees(fc: FamilyChart, K: set, J: set) -> bool:
    """Does projecting to J and then to K give the direct projection to K?"""
    fol = fc.foliation_of()
    _cK, direct = project(fc.chart, K, fol)
    chart_J, _ = project(fc.chart, J, fol)
    _cJK, composed = project(chart_J, K, fol)
    return partition_of(direct) == partition_of(composed)


# ---------------------------------------------------------------------------
# integrated foliations


@dataclass
class HarvestResult:
    ends: list
    leaves: list  # (foliation, Leaf)
    excluded: list  # (reason, detail)
    separating: list  # ids of Regular ends


def seed_grid(window, n: int) -> list:
    xl, xh, yl, yh = window
    xs = np.linspace(xl, xh, n)
    ys = np.linspace(yl, yh, n)
    return [(float(x), float(y)) for y in ys for x in xs]


def boundary_seeds(window, n: int) -> list:
    """Seeds on the boundary of the window; every leaf meeting it crosses this square."""
    xl, xh, yl, yh = window
    ts = np.linspace(0.0, 1.0, n)
    pts = []
    for t in ts[:-1]:
        t = float(t)
        pts += [(xl + t * (xh - xl), yl), (xh, yl + t * (yh - yl)), (xh - t * (xh - xl), yh), (xl, yh - t * (yh - yl))]
    return pts


class LeafRegistry:
    """Integrated leaves of several foliations.

    A seed lying on the trace of a stored leaf is skipped.  Traces are
    polylines with long chords far out, so seeds on an existing leaf can be
    missed; ``mark_duplicates`` then catches leaves whose two ends agree
    with an earlier leaf's at the key radius.
    """

    def __init__(self, specs: Mapping[str, FoliationSpec], max_radius: float = 60.0, tube: float = 1e-6,
                 same_leaf_tol: float = 1e-6):
        self.specs = dict(specs)
        self.max_radius = max_radius
        self.key_radius = max_radius / 4.2  # keys are read on R, 2R and 4R
        self.tube = tube
        self.same_leaf_tol = same_leaf_tol
        self.leaves = {f: [] for f in self.specs}
        self.duplicates = set()
        self.excluded = []

    def add_seed(self, f: str, seed) -> bool:
        spec = self.specs[f]
        for leaf, tr in self.leaves[f]:
            lo, hi = tr.min(axis=0) - self.tube, tr.max(axis=0) + self.tube
            if lo[0] <= seed[0] <= hi[0] and lo[1] <= seed[1] <= hi[1]:
                if point_polyline_distance(seed, tr) <= self.tube * max(1.0, math.hypot(*seed)):
                    return False
        try:
            marks = (self.key_radius, 2 * self.key_radius, 4 * self.key_radius)
            plus = integrate_leaf(spec, seed, "+", max_radius=self.max_radius, mark_radii=marks)
            minus = integrate_leaf(spec, seed, "-", max_radius=self.max_radius, mark_radii=marks)
        except ValueError as exc:
            self.excluded.append(("seed", f"{f} {seed}: {exc}"))
            return False
        leaf = Leaf(tuple(seed), plus, minus)
        self.leaves[f].append((leaf, leaf.trace()))
        return True

    def _end_signature(self, end):
        if isinstance(end, Ray):
            if end.extent <= self.key_radius:
                return None
            return ("ray", exit_angle(end, self.key_radius))
        if isinstance(end, SingularTerminus):
            return ("singular", tuple(end.point), end.direction)
        return None

    def mark_duplicates(self) -> set:
        tol = self.same_leaf_tol

        def close(a, b):
            if a is None or b is None or a[0] != b[0]:
                return False
            if a[0] == "singular" and a[1] != b[1]:
                return False
            return abs((a[-1] - b[-1] + 0.5) % 1.0 - 0.5) <= tol

        for f, items in self.leaves.items():
            sigs = [(self._end_signature(l.plus), self._end_signature(l.minus)) for l, _t in items]
            for j in range(len(items)):
                if (f, j) in self.duplicates:
                    continue
                for i in range(j):
                    if (f, i) in self.duplicates:
                        continue
                    if close(sigs[i][0], sigs[j][0]) and close(sigs[i][1], sigs[j][1]):
                        self.duplicates.add((f, j))
                        break
        return self.duplicates


def harvest_ends(
    specs: Mapping[str, FoliationSpec],
    seeds: Sequence,
    registry: LeafRegistry | None = None,
    detect: bool = True,
    window=None,
    start_id: int = 0,
) -> HarvestResult:
    """Ends at infinity of the leaves through the seeds, with regularity tags.

    An end whose leaf runs into a saddle at its other end is a separatrix
    end and is tagged NonSeparated; so is any end found at a jump by the
    detector along certified grid-aligned transversals.  Each end carries
    the index of its leaf in the registry as ``seed`` companion: records
    are ordered by (foliation, leaf index, side).
    """
    registry = registry or LeafRegistry(specs)
    for f in specs:
        for s in seeds:
            registry.add_seed(f, s)
    registry.mark_duplicates()
    ends, excluded = [], list(registry.excluded)
    k = start_id
    sep_hits = set()
    if detect and window is not None:
        sep_hits = _detector_tags(specs, registry, window)
    for f in specs:
        for li, (leaf, _tr) in enumerate(registry.leaves[f]):
            if (f, li) in registry.duplicates:
                continue
            for side, end, other in (("+", leaf.plus, leaf.minus), ("-", leaf.minus, leaf.plus)):
                if isinstance(end, UnknownTerminus):
                    excluded.append(("unknown-end", f"{f} seed {leaf.seed} side {side}: {end.reason}"))
                    continue
                if not isinstance(end, Ray):
                    continue
                regular = "Regular"
                if isinstance(other, SingularTerminus) or (f, li, side) in sep_hits:
                    regular = "NonSeparated"
                ends.append(EndRecord(k, f, leaf.seed, side, None, regular, end))
                k += 1
    rays = {e.id: e.ray for e in ends}
    if rays:
        esc = max(r.escape_radius for r in rays.values())
        if esc >= registry.key_radius:
            raise ValueError(f"escape radius {esc:g} too large for max_radius {registry.max_radius:g}")
        ak = angular_keys(rays, registry.key_radius)
        bad = set(ak.undetermined)
        for e in ends:
            e.key = ak.keys[e.id]
        if bad:
            excluded += [("undetermined-germ", f"{e.foliation} seed {e.seed} side {e.side}")
                         for e in ends if e.id in bad]
            ends = [e for e in ends if e.id not in bad]
    return HarvestResult(ends, [(f, l) for f in specs for l, _ in registry.leaves[f]], excluded,
                         [e.id for e in ends if e.regular == "Regular"])


def _detector_tags(specs, registry, window) -> set:
    """(foliation, leaf index, side) of ends flagged at detector jumps."""
    xl, xh, yl, yh = window
    out = set()
    for f, spec in specs.items():
        segs = []
        for frac in (0.5, 0.25, 0.75):
            x = xl + frac * (xh - xl)
            y = yl + frac * (yh - yl)
            segs.append(TransverseSegment.straight((x, yl), (x, yh)))
            segs.append(TransverseSegment.straight((xl, y), (xh, y)))
        chosen = [seg for seg in segs if certify_transverse(spec, seg).ok][:2]
        for seg in chosen:
            for side in "+-":
                for entry in detect_nonseparated(spec, seg, side, window=window):
                    if entry.approach not in ("above", "below"):
                        continue
                    p = seg.at(entry.t_star)
                    for li, (_leaf, tr) in enumerate(registry.leaves[f]):
                        if point_polyline_distance(p, tr) < 1e-6:
                            out.add((f, li, side))
    return out


def spec_family_chart(specs: Mapping[str, FoliationSpec], window, n: int = 9, detect: bool = True,
                      max_radius: float = 60.0) -> tuple:
    """Harvest three nested samples of integrated leaves and chart them.

    The coarse sample uses the n x n seed grid.  Every leaf meeting the
    window crosses its boundary, so the witness sample adds seeds on that
    boundary at a quarter of the grid spacing (fine enough to put a leaf
    between any two grid leaves of a saddle), and at half spacing on the
    boundary of a window 1.5 times larger for leaves passing outside.  The
    refined sample halves both spacings again, the outer window twice as
    large as the original.  Returns (FamilyChart, HarvestResult)
    where the harvest lists the coarse ends and the exclusions.
    """
    registry = LeafRegistry(specs, max_radius=max_radius)
    coarse = harvest_ends(specs, seed_grid(window, n), registry, detect, window)
    coarse_leaves = {f: len(registry.leaves[f]) for f in specs}
    witness_leaves = {}
    for level, (scale, mult) in enumerate(((1.5, 2), (2.0, 4))):
        w = tuple(v * scale for v in window)
        seeds = boundary_seeds(window, 2 * mult * (n - 1) + 1) + boundary_seeds(w, mult * (n - 1) + 1)
        for s in seeds:
            for f in specs:
                registry.add_seed(f, s)
        if level == 0:
            witness_leaves = {f: len(registry.leaves[f]) for f in specs}
    everything = harvest_ends(specs, [], registry, False, None)
    tags = {(e.foliation, e.seed, e.side): e.regular for e in coarse.ends}
    index = {f: {l.seed: i for i, (l, _t) in enumerate(registry.leaves[f])} for f in specs}
    base, witness, refined = [], [], []
    for e in everything.ends:
        i = index[e.foliation][e.seed]
        if (e.foliation, e.seed, e.side) in tags:
            e.regular = tags[(e.foliation, e.seed, e.side)]
        refined.append(e)
        if i < witness_leaves[e.foliation]:
            witness.append(e)
        if i < coarse_leaves[e.foliation] and (e.foliation, e.seed, e.side) in tags:
            base.append(e)
    fc = build_family_chart(base, witness, refined, list(specs))
    coarse.ends = base
    coarse.excluded = everything.excluded
    return fc, coarse
