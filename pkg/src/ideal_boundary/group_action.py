"""Homeomorphisms preserving a family of foliations and their action at infinity.

Planar maps are affine with exact rational coefficients, so words in the
generators are composed exactly and never inverted numerically.  Circle
maps given directly (``CircleMap``) act on turns in [0, 1) and serve as a
test seam for the orbit probes.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .compactify import FamilyChart, leaf_pairs

GENERATOR_SCHEMA = "ideal-boundary.generators/1"
PROBE_SCHEMA = "ideal-boundary.probe/1"


def _frac(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(v)


class PlanarHomeo:
    """An affine map p -> A p + b with exact inverse and a foliation permutation."""

    def __init__(self, name: str, A, b, permutation: dict | None = None):
        self.name = name
        self.A = tuple(tuple(_frac(v) for v in row) for row in A)
        self.b = tuple(_frac(v) for v in b)
        if len(self.A) != 2 or any(len(r) != 2 for r in self.A) or len(self.b) != 2:
            raise ValueError("affine maps of the plane need a 2x2 matrix and a 2-vector")
        (a, b_), (c, d) = self.A
        self.det = a * d - b_ * c
        if self.det == 0:
            raise ValueError(f"{name}: singular matrix")
        k = self.det
        self.Ainv = ((d / k, -b_ / k), (-c / k, a / k))
        self.permutation = dict(permutation or {})

    @classmethod
    def affine(cls, name, A, b, permutation=None) -> "PlanarHomeo":
        return cls(name, A, b, permutation)

    @classmethod
    def identity(cls, name="id") -> "PlanarHomeo":
        return cls(name, [[1, 0], [0, 1]], [0, 0])

    def target(self, foliation):
        return self.permutation.get(foliation, foliation)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        A = np.array(self.A, dtype=float)
        return pts @ A.T + np.array(self.b, dtype=float)

    def apply_exact(self, p) -> tuple:
        x, y = (_frac(v) for v in p)
        (a, b), (c, d) = self.A
        return (a * x + b * y + self.b[0], c * x + d * y + self.b[1])

    def compose(self, other: "PlanarHomeo") -> "PlanarHomeo":
        """self after other."""
        (a, b), (c, d) = self.A
        (e, f), (g, h) = other.A
        A = ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h))
        bb = self.apply_exact(other.b)
        fols = set(self.permutation) | set(other.permutation)
        perm = {f: self.target(other.target(f)) for f in fols}
        perm = {f: t for f, t in perm.items() if f != t}
        return PlanarHomeo(f"{self.name} {other.name}", A, bb, perm)

    def inverse(self) -> "PlanarHomeo":
        Ai = self.Ainv
        bi = (-(Ai[0][0] * self.b[0] + Ai[0][1] * self.b[1]), -(Ai[1][0] * self.b[0] + Ai[1][1] * self.b[1]))
        name = self.name[:-3] if self.name.endswith("^-1") else self.name + "^-1"
        return PlanarHomeo(name, Ai, bi, {v: k for k, v in self.permutation.items()})

    def is_identity(self) -> bool:
        return self.A == ((1, 0), (0, 1)) and self.b == (0, 0)

    def signature(self) -> tuple:
        return self.A, self.b

    def to_record(self) -> dict:
        return {"name": self.name,
                "A": [[str(v) for v in row] for row in self.A],
                "b": [str(v) for v in self.b],
                "permutation": dict(sorted(self.permutation.items()))}

    @classmethod
    def from_record(cls, rec: dict) -> "PlanarHomeo":
        for k in ("name", "A", "b"):
            if k not in rec:
                raise ValueError(f"generator record lacks {k!r}")
        return cls(rec["name"], [[Fraction(v) for v in row] for row in rec["A"]],
                   [Fraction(v) for v in rec["b"]], rec.get("permutation"))

    def __repr__(self):
        return f"PlanarHomeo({self.name!r}, A={self.A}, b={self.b})"


def dump_generators(gens: Sequence[PlanarHomeo]) -> str:
    return json.dumps({"schema": GENERATOR_SCHEMA, "generators": [g.to_record() for g in gens]},
                      indent=2, sort_keys=True)


def load_generators(text: str) -> list:
    data = json.loads(text)
    if data.get("schema") != GENERATOR_SCHEMA:
        raise ValueError(f"expected schema {GENERATOR_SCHEMA!r}, got {data.get('schema')!r}")
    return [PlanarHomeo.from_record(r) for r in data.get("generators", [])]


# ---------------------------------------------------------------------------
# circle maps


@dataclass
class CircleMap:
    """A homeomorphism of the circle of turns; arcs are (centre, half-width)."""

    name: str
    f: Callable
    f_inv: Callable
    attracting: tuple | None = None
    repelling: tuple | None = None

    def __call__(self, x):
        return self.f(x)

    def inverse(self) -> "CircleMap":
        name = self.name[:-3] if self.name.endswith("^-1") else self.name + "^-1"
        return CircleMap(name, self.f_inv, self.f, self.repelling, self.attracting)


def hyperbolic_circle_map(name: str, multiplier: float, center_turn: float) -> CircleMap:
    """x -> x / multiplier in the coordinate x = tan(pi (theta - centre)).

    Attracting fixed point at the centre, repelling one opposite; the
    complement of the repelling arc maps into the attracting arc.
    """
    if multiplier <= 1:
        raise ValueError("multiplier must exceed 1")
    c = float(center_turn)

    def make(mu):
        def f(theta):
            phi = (np.asarray(theta, dtype=float) - c + 0.5) % 1.0 - 0.5
            out = np.arctan(np.tan(np.pi * phi) / mu) / np.pi
            # the repelling point itself stays put
            out = np.where(np.abs(np.abs(phi) - 0.5) < 1e-15, 0.5, out)
            res = (out + c) % 1.0
            return float(res) if np.ndim(res) == 0 else res

        return f

    half = math.atan(multiplier ** -0.5) / math.pi
    return CircleMap(name, make(multiplier), make(1.0 / multiplier), (c % 1.0, half), ((c + 0.5) % 1.0, half))


def rotation_circle_map(name: str, turn: float) -> CircleMap:
    return CircleMap(name, lambda x: (np.asarray(x, dtype=float) + turn) % 1.0,
                     lambda x: (np.asarray(x, dtype=float) - turn) % 1.0)


# ---------------------------------------------------------------------------
# words


def _letters(gens):
    out = []
    for g in gens:
        out.append(g)
        out.append(g.inverse())
    return out


def reduced_words(gens: Sequence, depth: int, compose=None, key=None):
    """Yield (word, map) for reduced words of length 1..depth, shortest first.

    A word is a tuple of letter indices (2i for generator i, 2i+1 for its
    inverse) read right to left as maps.  When ``key`` is given, words whose
    map was already produced are dropped along with their extensions.
    """
    letters = _letters(gens)
    if compose is None:
        def compose(a, b):
            return a.compose(b)
    frontier = [((i,), m) for i, m in enumerate(letters)]
    seen = set()
    for _ in range(depth):
        nxt = []
        for word, m in frontier:
            if key is not None:
                k = key(m)
                if k in seen:
                    continue
                seen.add(k)
            yield word, m
            nxt.append((word, m))
        frontier = []
        for word, m in nxt:
            last = word[0]
            for i, l in enumerate(letters):
                if i == last ^ 1:
                    continue
                frontier.append(((i,) + word, compose(l, m)))


def word_name(word, gens) -> str:
    names = []
    for i in word:
        g = gens[i // 2]
        names.append(g.name + ("^-1" if i % 2 else ""))
    return " ".join(names)


# ---------------------------------------------------------------------------
# keys on the circle


def _in_open_arc(lo, x, hi) -> bool:
    if lo == hi:
        return x != lo
    if lo < hi:
        return lo < x < hi
    return x > lo or x < hi


def _in_closed_arc(lo, x, hi) -> bool:
    return x == lo or x == hi or _in_open_arc(lo, x, hi)


def _in_half_open_arc(lo, x, hi) -> bool:
    return x == lo or _in_open_arc(lo, x, hi)


# ---------------------------------------------------------------------------
# foliation permutation and identity at infinity


def verify_permutation(h: PlanarHomeo, builtin, level: int, tol: float = 1e-9) -> list:
    """Sampled leaves whose image is not within ``tol`` of one leaf of the target foliation."""
    bad = []
    for leaf, shape in builtin.leaves(level).items():
        pts = _sample_trace(shape.trace)
        img = h.apply(pts)
        target = h.target(shape.foliation)
        if target not in builtin.foliations:
            bad.append((leaf, "target foliation not in the family"))
            continue
        c = builtin.leaf_param(target, img)
        scale = max(1.0, float(np.abs(img).max()))
        if float(c.max() - c.min()) > tol * scale:
            bad.append((leaf, f"image spreads over leaves ({c.max() - c.min():.3g})"))
    return bad


def _sample_trace(trace, n: int = 9) -> np.ndarray:
    idx = np.linspace(0, len(trace) - 1, n).round().astype(int)
    return np.asarray(trace, dtype=float)[idx]


@dataclass
class IdentityReport:
    identity: bool
    by_keys: bool
    by_leaves: bool | None
    moved: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.by_leaves is None or self.by_leaves == self.by_keys


def identity_at_infinity_test(h: PlanarHomeo, builtin, level: int, tol: float = 1e-9) -> IdentityReport:
    """Does h fix every sampled point at infinity?

    First route: the closed-form image of every sampled end has the same
    key.  Second route, independent of the first: h maps sample points of
    every sampled leaf back onto that leaf, preserving its orientation.
    """
    moved = []
    for e in builtin.ends(level):
        img = builtin.end_image(h, e)
        if img is None or img.key != e.key:
            moved.append(e.key)
    by_keys = not moved

    by_leaves = None
    if hasattr(builtin, "leaf_param"):
        by_leaves = True
        for leaf, shape in builtin.leaves(level).items():
            if h.target(shape.foliation) != shape.foliation:
                by_leaves = False
                break
            pts = _sample_trace(shape.trace)
            img = h.apply(pts)
            c = builtin.leaf_param(shape.foliation, img)
            c0 = float(leaf[1])
            scale = max(1.0, float(np.abs(img).max()))
            if float(np.abs(c - c0).max()) > tol * scale:
                by_leaves = False
                break
            u = np.array(builtin.leaf_direction(shape.foliation))
            if np.any(np.diff(img @ u) <= 0):
                by_leaves = False
                break
    return IdentityReport(by_keys, by_keys, by_leaves, moved)


# ---------------------------------------------------------------------------
# induced circle map on a chart


@dataclass
class InducedCircleMap:
    class_map: dict  # class -> ("class", c) or ("gap", before, after)
    angle_map: dict  # end id -> angle of its image
    holes: list  # end ids whose image could not be resolved
    monotone: bool

    def fixes_every_class(self) -> bool:
        return not self.holes and all(v == ("class", c) for c, v in self.class_map.items())


def induced_circle_map(h: PlanarHomeo, fc: FamilyChart, builtin=None, image_key=None) -> InducedCircleMap:
    """Circle map induced by h on the classes of a family chart.

    The image of each end is located among the chart's keys: it is either a
    sampled end (its class) or falls strictly between two consecutive
    classes.  ``image_key(end)`` overrides the closed form of a built-in, for
    instance with the key of an integrated image leaf.
    """
    if image_key is None:
        if builtin is None:
            raise ValueError("need a built-in or an image_key callback")

        def image_key(e):
            img = builtin.end_image(h, _analytic(e))
            return None if img is None else img.key

    by_key = sorted(fc.ends, key=lambda e: e.key)
    keys = [e.key for e in by_key]
    classes = fc.chart.classes
    angles = fc.chart.angles
    class_map, holes, raw = {}, [], {}
    for e in by_key:
        k = image_key(e)
        if k is None:
            holes.append(e.id)
            continue
        i = bisect.bisect_left(keys, k)
        if i < len(keys) and keys[i] == k:
            pos = ("class", classes[by_key[i].id])
        else:
            before = by_key[i - 1] if i > 0 else by_key[-1]
            after = by_key[i % len(keys)]
            pos = ("gap", classes[before.id], classes[after.id])
        raw[e.id] = (k, i, pos)
        c = classes[e.id]
        class_map.setdefault(c, pos)

    # image angles: exact where the image is sampled, spread evenly inside gaps
    angle_map = {}
    in_gap = {}
    for v, (k, i, pos) in raw.items():
        if pos[0] == "class":
            angle_map[v] = angles[by_key[i].id]
        else:
            in_gap.setdefault(i, []).append((k, v))
    n = len(keys)
    for i, items in in_gap.items():
        items.sort()
        a = float(angles[by_key[(i - 1) % n].id])
        b = float(angles[by_key[i % n].id])
        if b <= a:
            b += 1.0
        for r, (_k, v) in enumerate(items):
            angle_map[v] = (a + (b - a) * (r + 1) / (len(items) + 1)) % 1.0

    order = [raw[e.id][0] for e in by_key if e.id in raw]
    descents = sum(1 for x, y in zip(order, order[1:] + order[:1]) if not x < y)
    monotone = len(order) <= 2 or descents <= 1
    return InducedCircleMap(class_map, angle_map, holes, monotone)


def _analytic(e):
    from .gallery import AnalyticEnd

    return AnalyticEnd(e.foliation, e.seed, e.side, e.key, e.regular)


# ---------------------------------------------------------------------------
# the fixed point of a foliation without leaves non-separated from below


@dataclass
class NotApplicable:
    reason: str
    entries: list = field(default_factory=list)

    def __bool__(self):
        return False


@dataclass
class FixedPoint:
    angle: Fraction
    gap: tuple  # (class before, class after)
    gap_keys: tuple  # (key before, key after)
    chain: list  # (+ end id, - end id), outermost first


def certify_no_below(builtin, level: int) -> list:
    """Detector entries approached from below, over every transversal and both sides."""
    out = []
    for tr in builtin.transversals(level):
        for side in "+-":
            out += [e for e in builtin.detect(tr, side, level) if e.approach == "below"]
    return out


def fixed_point_OF(fc: FamilyChart, builtin=None, level: int | None = None, below_entries=None):
    """The point at infinity lying in every upper half-plane of a leaf.

    Requires a certificate that no leaves are non-separated from below:
    either a built-in and level to run the detectors on, or the list of
    "below" entries found by the caller.  Follows a greedy strictly
    decreasing chain of upper-half-plane arcs; the answer is the unique
    unresolved gap inside the last arc.
    """
    if below_entries is None:
        if builtin is None or level is None:
            return NotApplicable("no detector certification supplied")
        below_entries = certify_no_below(builtin, level)
    if below_entries:
        return NotApplicable("leaves non-separated from below were detected", list(below_entries))

    order = fc.class_order()
    pos = {c: i for i, c in enumerate(order)}
    n = len(order)
    arcs = []
    for p, m in leaf_pairs(fc.ends):
        a, b = pos[fc.chart.classes[p]], pos[fc.chart.classes[m]]
        if a != b:
            arcs.append((a, (b - a) % n, (p, m)))
    if not arcs:
        return NotApplicable("no sampled leaf with both ends")

    def inside(inner, outer):
        a, la, _ = inner
        b, lb, _ = outer
        off = (a - b) % n
        return la < lb and off + la <= lb

    arcs.sort(key=lambda t: (-t[1], t[2]))
    cur = arcs[0]
    chain = [cur[2]]
    while True:
        nxt = [t for t in arcs if inside(t, cur)]
        if not nxt:
            break
        cur = nxt[0]  # the largest strictly smaller arc
        chain.append(cur[2])
    start, length, _ = cur
    gaps = [g for g in fc.gaps if (pos[g.before] - start) % n < length]
    if len(gaps) != 1:
        return NotApplicable(f"{len(gaps)} unresolved gaps inside the innermost upper arc")
    g = gaps[0]
    members = fc.chart.class_members()
    kb = max(fc.keys[v] for v in members[g.before])
    ka = min(fc.keys[v] for v in members[g.after])
    return FixedPoint(g.angle, (g.before, g.after), (kb, ka), chain)


def fixed_point_preserved(fp: FixedPoint, h: PlanarHomeo, builtin, level: int) -> bool:
    """Does the fixed gap meet the upper arc of h(L) for every sampled leaf L?

    The image of the upper arc of L is the arc from h(L+) to h(L-).  The
    fixed point lies in every upper arc, so h(O) = O at sample scale means
    the gap meets every such image.  An image
    end falling inside the gap counts as meeting it.
    """
    kb, ka = fp.gap_keys
    ends = {}
    for e in builtin.ends(level):
        ends.setdefault(e.leaf, {})[e.side] = e
    for leaf, pair in ends.items():
        if set(pair) != {"+", "-"}:
            continue
        ip, im = builtin.end_image(h, pair["+"]), builtin.end_image(h, pair["-"])
        if ip is None or im is None:
            return False
        if h.det < 0:  # reverses the circle, so the upper arc runs the other way
            ip, im = im, ip
        meets = (_in_open_arc(kb, ip.key, ka) or _in_open_arc(kb, im.key, ka)
                 or (_in_half_open_arc(ip.key, kb, im.key) and kb != im.key))
        if not meets:
            return False
    return True


# ---------------------------------------------------------------------------
# nesting of half-planes


@dataclass
class NestingResult:
    found: bool
    word: tuple | None = None
    name: str | None = None
    fixed_point: float | None = None
    words_tested: int = 0


def _circle_diff(y, x):
    return (np.asarray(y) - np.asarray(x) + 0.5) % 1.0 - 0.5


def nesting_search(L, gens: Sequence, depth: int, builtin=None, level: int | None = None,
                   samples: int = 2001) -> NestingResult:
    """Shortest reduced word g with g(lower side of L) inside the open upper side.

    For planar generators ``L`` is a sampled leaf label of ``builtin``; the
    inclusion is tested on the keys of sampled ends and on planar sample
    points of the lower half-plane.  For circle maps ``L`` is the lower arc
    ``(lo, hi)`` in turns, its complement playing the upper side.
    """
    gens = list(gens)
    if gens and all(isinstance(g, CircleMap) for g in gens):
        return _nesting_circle(L, gens, depth, samples)
    if builtin is None or level is None:
        raise ValueError("planar nesting needs a built-in and a level")
    ends = {e.side: e for e in builtin.ends(level) if e.leaf == L}
    if set(ends) != {"+", "-"}:
        raise ValueError(f"leaf {L!r} is not sampled with both ends")
    kp, km = ends["+"].key, ends["-"].key
    lower = [e for e in builtin.ends(level) if _in_closed_arc(km, e.key, kp)]
    fol = ends["+"].foliation
    c0 = float(L[1])
    win = builtin.window(level)
    grid = np.array([(x, y) for x in np.linspace(win[0], win[1], 21) for y in np.linspace(win[2], win[3], 21)])
    lower_pts = grid[builtin.leaf_param(fol, grid) <= c0]
    tested = 0
    for word, g in reduced_words(gens, depth, key=PlanarHomeo.signature):
        tested += 1
        if g.target(fol) != fol:
            continue
        ok = True
        for e in lower:
            img = builtin.end_image(g, e)
            if img is None or not _in_open_arc(kp, img.key, km):
                ok = False
                break
        if ok and len(lower_pts):
            ok = bool(np.all(builtin.leaf_param(fol, g.apply(lower_pts)) > c0))
        if ok:
            return NestingResult(True, word, word_name(word, gens), None, tested)
    return NestingResult(False, words_tested=tested)


def _nesting_circle(arc, maps, depth, samples) -> NestingResult:
    lo, hi = arc
    span = (hi - lo) % 1.0
    xs = (lo + span * np.linspace(0.0, 1.0, samples)) % 1.0
    up_span = 1.0 - span

    def compose(a, b):
        return CircleMap(f"{a.name} {b.name}", lambda x, a=a, b=b: a.f(b.f(x)),
                         lambda x, a=a, b=b: b.f_inv(a.f_inv(x)))

    tested = 0
    for word, g in reduced_words(maps, depth, compose=compose):
        tested += 1
        ys = np.asarray(g.f(xs))
        off = (ys - hi) % 1.0
        if np.all((off > 0) & (off < up_span)):
            return NestingResult(True, word, word_name(word, maps), _fixed_in_arc(g, hi, up_span), tested)
    return NestingResult(False, words_tested=tested)


def _fixed_in_arc(g: CircleMap, start: float, span: float, n: int = 4001):
    """A fixed point of g in the arc, by sign change of g(x) - x; None if none is seen."""
    ts = start + span * np.linspace(0.0, 1.0, n)
    d = _circle_diff(g.f(ts % 1.0), ts % 1.0)
    for i in range(n - 1):
        if d[i] == 0:
            return float(ts[i] % 1.0)
        if d[i] * d[i + 1] < 0 and abs(d[i]) < 0.25 and abs(d[i + 1]) < 0.25:
            r = brentq(lambda t: float(_circle_diff(g.f(t % 1.0), t % 1.0)), ts[i], ts[i + 1], xtol=1e-14)
            return float(r % 1.0)
    return None


# ---------------------------------------------------------------------------
# orbit density


@dataclass
class ProbeResult:
    max_gap: list  # index = word length
    orbit_size: list
    start: object
    final_angles: list = field(default_factory=list, repr=False)

    def histogram(self, bins: int = 10) -> list:
        """Counts of the final orbit's cyclic gaps, on a log10 scale from 1e-bins to 1."""
        a = np.sort(np.unique(np.asarray(self.final_angles, dtype=float) % 1.0))
        if len(a) <= 1:
            return [0] * (bins - 1) + [len(a)]
        g = np.diff(np.concatenate([a, [a[0] + 1.0]]))
        counts, _ = np.histogram(np.log10(np.maximum(g, 10.0 ** -bins)), bins=bins, range=(-bins, 0))
        return [int(c) for c in counts]

    def to_dict(self) -> dict:
        return {"start": str(self.start), "max_gap": self.max_gap, "orbit_size": self.orbit_size,
                "gap_histogram_log10": self.histogram()}


def cyclic_max_gap(angles) -> float:
    a = np.sort(np.unique(np.asarray(angles, dtype=float) % 1.0))
    if len(a) <= 1:
        return 1.0
    gaps = np.diff(np.concatenate([a, [a[0] + 1.0]]))
    return float(gaps.max())


def orbit_density_probe(gens: Sequence, start, depth: int, builtin=None, decimals: int = 12) -> ProbeResult:
    """Largest gap left by the orbit of a start point under words of length <= d.

    With circle maps ``start`` is a turn; with planar generators it is an
    end of ``builtin`` and the orbit is read through the built-in's model
    angle.  States are (point, last letter) and repeated states are pruned.
    """
    gens = list(gens)
    letters = _letters(gens)
    circle = all(isinstance(g, CircleMap) for g in gens)
    if circle:
        def step(p, l):
            return float(l.f(p)) % 1.0

        def ident(p):
            return round(p, decimals)

        def angle(p):
            return p
    else:
        if builtin is None:
            raise ValueError("planar generators need the built-in that models their ends")

        def step(p, l):
            return builtin.end_image(l, p)

        def ident(p):
            # integer pairs hash far faster than Fractions
            if p is None:
                return None
            return tuple((v.numerator, v.denominator) if isinstance(v, Fraction) else v for v in p.key)

        def angle(p):
            return builtin.model_angle(p.key)

    orbit = {ident(start): start}
    gaps, sizes = [cyclic_max_gap([angle(start)])], [1]
    frontier = {(ident(start), None): start}
    memo = {}
    for _ in range(depth):
        nxt = {}
        for (pid, last), p in frontier.items():
            for i, l in enumerate(letters):
                if last is not None and i == last ^ 1:
                    continue
                if (pid, i) not in memo:
                    memo[(pid, i)] = step(p, l)
                q = memo[(pid, i)]
                qid = ident(q)
                if qid is None:
                    continue
                if (qid, i) not in nxt:
                    nxt[(qid, i)] = q
                orbit.setdefault(qid, q)
        frontier = nxt
        gaps.append(cyclic_max_gap([angle(p) for p in orbit.values()]))
        sizes.append(len(orbit))
    return ProbeResult(gaps, sizes, start if circle else getattr(start, "key", start),
                       [angle(p) for p in orbit.values()])


def probe_to_json(results: Sequence[ProbeResult], extra: dict | None = None) -> str:
    payload = {"schema": PROBE_SCHEMA, "probes": [r.to_dict() for r in results]}
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# minimality criterion


@dataclass
class MinimalityReport:
    above_witness: list
    below_witness: list
    dense_proxy: float
    dense_threshold: float
    dense: bool
    budgets: dict

    @property
    def criterion_met(self) -> bool:
        return bool(self.above_witness) and bool(self.below_witness) and self.dense

    def to_dict(self) -> dict:
        return {"criterion_met": self.criterion_met,
                "above_witness": [str(w) for w in self.above_witness],
                "below_witness": [str(w) for w in self.below_witness],
                "dense_proxy": self.dense_proxy, "dense_threshold": self.dense_threshold,
                "dense": self.dense, "budgets": self.budgets}


def minimality_certificate(builtin=None, gens: Sequence = (), level: int = 2, depth: int = 4,
                           eps: float = 0.25, circle_maps: Sequence | None = None,
                           witnesses: tuple | None = None) -> MinimalityReport:
    """Report whether the sufficient hypotheses for a minimal action hold at sample scale.

    (a) a pair of leaves non-separated from above, (b) one from below, (c)
    the images of one sampled leaf come within ``eps`` of every point of a
    grid on the unit square (or, for circle maps, the orbit of 0 leaves no
    gap above ``eps``).  Minimality itself is never decided here.
    """
    above, below = [], []
    if witnesses is not None:
        above, below = list(witnesses[0]), list(witnesses[1])
    elif builtin is not None:
        for tr in builtin.transversals(level):
            for side in "+-":
                for e in builtin.detect(tr, side, level):
                    pair = (tr.name, e.t_star, e.side, tuple(map(str, e.partners[:2])))
                    if e.approach == "above" and len(e.partners) >= 2:
                        above.append(pair)
                    elif e.approach == "below" and len(e.partners) >= 2:
                        below.append(pair)
    budgets = {"level": level, "depth": depth, "eps": eps}
    if circle_maps:
        probe = orbit_density_probe(circle_maps, 0.0, depth)
        proxy = probe.max_gap[-1]
    elif builtin is not None and builtin.leaves(level):
        proxy = _leaf_orbit_covering(builtin, list(gens), level, depth)
    else:
        proxy = math.inf
    return MinimalityReport(above, below, proxy, eps, proxy <= eps, budgets)


def _leaf_orbit_covering(builtin, gens, level, depth) -> float:
    """Covering radius of the unit square by the images of one sampled leaf."""
    leaves = sorted(builtin.leaves(level).items(), key=lambda kv: str(kv[0]))
    _leaf, shape = leaves[len(leaves) // 2]
    pts = np.asarray(shape.trace, dtype=float)
    clouds = [pts]
    if gens:
        for _word, g in reduced_words(gens, depth, key=PlanarHomeo.signature):
            clouds.append(g.apply(pts))
    cloud = np.concatenate(clouds)
    cloud = cloud[(np.abs(cloud) <= 2.0).all(axis=1)]
    grid = np.array([(x, y) for x in np.linspace(-1, 1, 21) for y in np.linspace(-1, 1, 21)])
    if not len(cloud):
        return math.inf
    best = np.full(len(grid), np.inf)
    for chunk in np.array_split(cloud, max(1, len(cloud) // 2000)):
        d = np.sqrt(((grid[:, None, :] - chunk[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
        best = np.minimum(best, d)
    return float(best.max())
