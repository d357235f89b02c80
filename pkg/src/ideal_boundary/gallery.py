"""Analytic example foliations with exact cyclic keys on their ends.

Each example knows, in closed form, where every end of every leaf lands on
its circle at infinity.  Landing points are encoded as tuples compared
lexicographically, cut at a fixed point of the circle, so the geometric
cyclic order is ``comparator_from_keys`` of the keys.

Samples come in grid levels: at level L the leaf parameters are the
multiples of h = 2**-L in [-W, W], W = L + 1.  Levels are nested, and the
next level both refines the spacing and widens the window, so refinement
puts many new ends into the gaps that correspond to points no end reaches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .foliation_engine import DetectorBudget, detect_jumps, _clip

SINGULAR = "singular"


def level_spacing(level: int) -> Fraction:
    return Fraction(1, 2**level)


def level_halfwidth(level: int) -> int:
    return level + 1


def level_params(level: int, positive: bool = False, nonnegative: bool = False) -> list:
    h = level_spacing(level)
    n = level_halfwidth(level) * 2**level
    lo = 1 if positive else (0 if nonnegative else -n)
    return [k * h for k in range(lo, n + 1)]


@dataclass(frozen=True)
class AnalyticEnd:
    foliation: str
    leaf: tuple
    side: str
    key: tuple
    regular: str = "Regular"


@dataclass
class LeafShape:
    leaf: tuple
    foliation: str
    ends: dict  # side -> key (sides with a singular end are absent)
    trace: np.ndarray = field(repr=False)


@dataclass
class Transversal:
    name: str
    foliation: str
    points: np.ndarray
    lam: Callable  # (t, side) -> key or SINGULAR
    leaf_at: Callable
    trace: Callable
    t_range: tuple = (-1.0, 1.0)


class Builtin:
    name = ""
    description = ""
    foliations: tuple = ()

    def __init__(self, only: Sequence[str] | None = None):
        if only is not None:
            unknown = set(only) - set(self.foliations)
            if unknown:
                raise KeyError(f"{self.name} has no foliation {sorted(unknown)}")
            self.foliations = tuple(f for f in type(self).foliations if f in set(only))

    # subclasses provide _ends(level), _leaves(level), _transversals(level)
    def ends(self, level: int) -> list:
        return [e for e in self._ends(level) if e.foliation in self.foliations]

    def leaves(self, level: int) -> dict:
        return {k: v for k, v in self._leaves(level).items() if v.foliation in self.foliations}

    def transversals(self, level: int) -> list:
        return [t for t in self._transversals(level) if t.foliation in self.foliations]

    def window(self, level: int) -> tuple:
        d = float(level_halfwidth(level) + 1)
        return (-d, d, -d, d)

    def generators(self) -> list:
        return []

    def circle_maps(self) -> list:
        return []

    def end_image(self, h, end: AnalyticEnd):
        raise NotImplementedError(f"{self.name} has no closed-form end images")

    def model_angle(self, key) -> float:
        raise NotImplementedError(f"{self.name} has no model angle")

    def detect(self, transversal: Transversal, side: str, level: int,
               budget: DetectorBudget = DetectorBudget()) -> list:
        """Non-separated ends along one of the example's transversals."""
        ref = [e.key for e in self.ends(level)]
        win = self.window(level)
        candidates = {}
        for leaf, shape in self.leaves(level).items():
            pts = _clip(shape.trace, win)
            if len(pts):
                candidates[leaf] = pts

        def tr(t):
            pts = _clip(transversal.trace(t), win)
            return pts if len(pts) >= 2 else None

        entries = detect_jumps(lambda t: transversal.lam(t, side), ref, side, transversal.t_range,
                               budget, tr, candidates)
        for e in entries:
            if e.approach in ("above", "below"):
                own = transversal.leaf_at(e.t_star)
                e.partners = [own] + [p for p in e.partners if p != own]
        return entries


def _line_points(p0, u, D, n=81) -> np.ndarray:
    s = np.linspace(-2.0 * D, 2.0 * D, n)
    return np.asarray(p0, dtype=float)[None, :] + s[:, None] * np.asarray(u, dtype=float)[None, :]


def _hseg(x0, x1, y, n=41) -> np.ndarray:
    xs = np.linspace(float(x0), float(x1), n)
    return np.column_stack([xs, np.full(n, float(y))])


def _vseg(x, y0, y1, n=41) -> np.ndarray:
    ys = np.linspace(float(y0), float(y1), n)
    return np.column_stack([np.full(n, float(x)), ys])


# ---------------------------------------------------------------------------
# families of parallel lines


class AffineFamily(Builtin):
    """Foliations by parallel lines.  Foliation j has direction ``turn_j``."""

    def __init__(self, name, directions, description="", only=None):
        # directions: list of (label, turn as Fraction in [0, 1/2), exact unit vector or None)
        self.name = name
        self.description = description
        self._dirs = [(lbl, Fraction(t), v) for lbl, t, v in directions]
        type_fols = tuple(lbl for lbl, _t, _v in self._dirs)
        self.foliations = type_fols
        self._all = type_fols
        if only is not None:
            unknown = set(only) - set(type_fols)
            if unknown:
                raise KeyError(f"{name} has no foliation {sorted(unknown)}")
            self.foliations = tuple(f for f in type_fols if f in set(only))
        blocks = sorted([t for _l, t, _v in self._dirs] + [t + Fraction(1, 2) for _l, t, _v in self._dirs])
        self._blocks = {t: i for i, t in enumerate(blocks)}

    def restrict(self, only):
        return AffineFamily(self.name, self._dirs, self.description, only)

    def _unit(self, j):
        t = float(self._dirs[j][1]) * 2 * math.pi
        return (math.cos(t), math.sin(t))

    def leaf_param(self, label, points) -> np.ndarray:
        """Parameter c of the leaf of ``label`` through each point."""
        u = self._unit(self.direction_index(label))
        pts = np.asarray(points, dtype=float)
        return -u[1] * pts[:, 0] + u[0] * pts[:, 1]

    def leaf_direction(self, label) -> tuple:
        return self._unit(self.direction_index(label))

    def direction_index(self, label) -> int:
        return next(j for j, (l, _t, _v) in enumerate(self._dirs) if l == label)

    def key(self, j: int, side: str, c) -> tuple:
        t = self._dirs[j][1]
        c = Fraction(c) if not isinstance(c, float) else c
        return (t, c) if side == "+" else (t + Fraction(1, 2), -c)

    def _ends(self, level):
        out = []
        for j, (lbl, _t, _v) in enumerate(self._dirs):
            for c in level_params(level):
                for side in "+-":
                    out.append(AnalyticEnd(lbl, (lbl, c), side, self.key(j, side, c)))
        return out

    def _leaves(self, level):
        D = level_halfwidth(level) + 1
        out = {}
        for j, (lbl, _t, _v) in enumerate(self._dirs):
            u = self._unit(j)
            n = (-u[1], u[0])
            for c in level_params(level):
                p0 = (float(c) * n[0], float(c) * n[1])
                out[(lbl, c)] = LeafShape((lbl, c), lbl, {s: self.key(j, s, c) for s in "+-"},
                                          _line_points(p0, u, D))
        return out

    def _transversals(self, level):
        D = level_halfwidth(level) + 1
        out = []
        for j, (lbl, _t, _v) in enumerate(self._dirs):
            u = self._unit(j)
            n = (-u[1], u[0])

            def lam(t, side, j=j):
                return self.key(j, side, t)

            def trace(t, u=u, n=n):
                return _line_points((t * n[0], t * n[1]), u, D)

            pts = np.array([[-n[0], -n[1]], [n[0], n[1]]])
            out.append(Transversal(f"{lbl}-normal", lbl, pts, lam, lambda t, lbl=lbl: (lbl, t), trace))
        return out

    def model_angle(self, key) -> float:
        b = self._blocks[key[0]]
        s = float(key[1])
        return (b + (1 + s / (1 + abs(s))) / 2) / len(self._blocks)

    def end_image(self, h, end: AnalyticEnd):
        """Image of an end under an affine map, in closed form.

        Returns an AnalyticEnd (possibly outside every sample) or None when
        the image line is not a leaf of the family.
        """
        cache = h.__dict__.setdefault("_line_images", {})
        ck = (self.name, tuple(self._dirs), end.foliation)
        if ck not in cache:
            cache[ck] = self._line_image(h, end.foliation)
        hit = cache[ck]
        if hit is None:
            return None
        lbl, k, mu, nu, shift = hit
        c2 = (end.leaf[1] + shift) / nu
        side = end.side if mu > 0 else ("-" if end.side == "+" else "+")
        return AnalyticEnd(lbl, (lbl, c2), side, self.key(k, side, c2), end.regular)

    def _line_image(self, h, foliation):
        """(target label, index, direction factor, normal factor, shift) for the
        image of the leaves of ``foliation`` under h, or None."""
        j = self.direction_index(foliation)
        u = self._dirs[j][2]
        if u is None:
            raise NotImplementedError("closed-form images need exact direction vectors")
        A, b = h.A, h.b
        Au = (A[0][0] * u[0] + A[0][1] * u[1], A[1][0] * u[0] + A[1][1] * u[1])
        n = (-u[1], u[0])
        Ainv = h.Ainv
        # A^{-T} n
        m = (Ainv[0][0] * n[0] + Ainv[1][0] * n[1], Ainv[0][1] * n[0] + Ainv[1][1] * n[1])
        for k, (lbl, _t, v) in enumerate(self._dirs):
            if v is None or Au[0] * v[1] - Au[1] * v[0] != 0:
                continue
            mu = Au[0] * v[0] + Au[1] * v[1]
            nk = (-v[1], v[0])
            nu = m[0] * nk[0] + m[1] * nk[1]
            return lbl, k, mu, nu, m[0] * b[0] + m[1] * b[1]
        return None


HV_DIRECTIONS = [("H", Fraction(0), (Fraction(1), Fraction(0))), ("V", Fraction(1, 4), (Fraction(0), Fraction(1)))]


def square_hv(only=None) -> AffineFamily:
    return AffineFamily("square_hv", HV_DIRECTIONS,
                        "horizontal and vertical foliations of the plane (closed disc is the square)", only)


def affine_k(k: int = 3, only=None) -> AffineFamily:
    dirs = []
    for j in range(k):
        t = Fraction(j, 2 * k)
        exact = {Fraction(0): (Fraction(1), Fraction(0)), Fraction(1, 4): (Fraction(0), Fraction(1))}.get(t)
        dirs.append((f"F{j}", t, exact))
    return AffineFamily(f"affine_k", dirs, f"{k} foliations by parallel lines in directions j*180/{k} degrees", only)


# ---------------------------------------------------------------------------
# the strip |x - y| < 1


class StripHV(Builtin):
    name = "strip_hv"
    description = "horizontal and vertical foliations of the strip |x - y| < 1"
    foliations = ("H", "V")

    def _ends(self, level):
        out = []
        for s in level_params(level):
            out.append(AnalyticEnd("H", ("H", s - 1), "+", (0, s, 0)))
            out.append(AnalyticEnd("V", ("V", s), "-", (0, s, 1)))
            out.append(AnalyticEnd("H", ("H", s + 1), "-", (2, -s, 0)))
            out.append(AnalyticEnd("V", ("V", s), "+", (2, -s, 1)))
        return out

    def _leaves(self, level):
        out = {}
        for c in level_params(level):
            out[("H", c)] = LeafShape(("H", c), "H", {"+": (0, c + 1, 0), "-": (2, -(c - 1), 0)},
                                      _hseg(c - 1, c + 1, c))
            out[("V", c)] = LeafShape(("V", c), "V", {"-": (0, c, 1), "+": (2, -c, 1)},
                                      _vseg(c, c - 1, c + 1))
        return out

    def _transversals(self, level):
        def lam_h(t, side):
            c = 0.9 * t
            return (0, c + 1, 0) if side == "+" else (2, -(c - 1), 0)

        def lam_v(t, side):
            d = 0.9 * t
            return (2, -d, 1) if side == "+" else (0, d, 1)

        return [
            Transversal("H-vertical", "H", np.array([[0, -0.9], [0, 0.9]]), lam_h,
                        lambda t: ("H", 0.9 * t), lambda t: _hseg(0.9 * t - 1, 0.9 * t + 1, 0.9 * t)),
            Transversal("V-horizontal", "V", np.array([[-0.9, 0], [0.9, 0]]), lam_v,
                        lambda t: ("V", 0.9 * t), lambda t: _vseg(0.9 * t, 0.9 * t - 1, 0.9 * t + 1)),
        ]


# ---------------------------------------------------------------------------
# the linear saddle (x, -y)


SADDLE_QUADRANTS = {
    # quadrant: (+ end key maker, - end key maker)
    "Q1": (lambda c: (1, c), lambda c: (2, -c)),
    "Q2": (lambda c: (5, -c), lambda c: (4, c)),
    "Q3": (lambda c: (7, c), lambda c: (8, -c)),
    "Q4": (lambda c: (11, -c), lambda c: (10, c)),
}
SADDLE_SEPARATRICES = {("+x",): ("+", (0,)), ("+y",): ("-", (3,)), ("-x",): ("+", (6,)), ("-y",): ("-", (9,))}
_QSIGN = {"Q1": (1, 1), "Q2": (-1, 1), "Q3": (-1, -1), "Q4": (1, -1)}


def _hyperbola(q, c, D, n=80) -> np.ndarray:
    sx, sy = _QSIGN[q]
    c = float(c)
    xs = np.geomspace(c / D, D, n)
    return np.column_stack([sx * xs, sy * c / xs])


class Saddle(Builtin):
    name = "saddle"
    description = "leaves of the linear saddle field (x, -y): hyperbolas xy = c and four separatrices"
    foliations = ("S",)

    def _ends(self, level):
        out = []
        for leaf, (side, key) in SADDLE_SEPARATRICES.items():
            out.append(AnalyticEnd("S", leaf, side, key, "NonSeparated"))
        for q, (kp, km) in SADDLE_QUADRANTS.items():
            for c in level_params(level, positive=True):
                out.append(AnalyticEnd("S", (q, c), "+", kp(c)))
                out.append(AnalyticEnd("S", (q, c), "-", km(c)))
        return out

    def _leaves(self, level):
        D = float(level_halfwidth(level) + 1)
        out = {}
        axis = {("+x",): _hseg(0, D, 0), ("-x",): _hseg(0, -D, 0), ("+y",): _vseg(0, 0, D), ("-y",): _vseg(0, 0, -D)}
        for leaf, (side, key) in SADDLE_SEPARATRICES.items():
            out[leaf] = LeafShape(leaf, "S", {side: key}, axis[leaf])
        for q, (kp, km) in SADDLE_QUADRANTS.items():
            for c in level_params(level, positive=True):
                out[(q, c)] = LeafShape((q, c), "S", {"+": kp(c), "-": km(c)}, _hyperbola(q, c, D))
        return out

    def _transversals(self, level):
        D = float(level_halfwidth(level) + 1)

        def leaf_at(t):
            if t > 0:
                return ("Q1", t)
            if t < 0:
                return ("Q4", -t)
            return ("+x",)

        def lam(t, side):
            if t > 0:
                return SADDLE_QUADRANTS["Q1"][0 if side == "+" else 1](t)
            if t < 0:
                return SADDLE_QUADRANTS["Q4"][0 if side == "+" else 1](-t)
            return (0,) if side == "+" else SINGULAR

        def trace(t):
            if t == 0:
                return _hseg(0, D, 0)
            return _hyperbola("Q1" if t > 0 else "Q4", abs(t), D)

        return [Transversal("x=1", "S", np.array([[1.0, -1.0], [1.0, 1.0]]), lam, leaf_at, trace)]


# ---------------------------------------------------------------------------
# the plane minus a Cantor comb


def cantor_gaps(depth: int) -> list:
    """Complementary intervals of the middle-thirds set up to ``depth``, ordered by midpoint."""
    gaps = []
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(depth):
        nxt = []
        for a, b in intervals:
            third = (b - a) / 3
            gaps.append((a + third, b - third))
            nxt += [(a, a + third), (b - third, b)]
        intervals = nxt
    return sorted(gaps)


class CantorNotch(Builtin):
    """Horizontal foliation of the plane minus K x [0, +inf), K the middle-thirds set.

    Circle keys: 0 right ends, 1 the right face of the wall x=1 (downwards),
    2 the channels above the gaps of K (right to left; in each channel its
    right wall upwards, then its left wall downwards), 3 the left face of
    the wall x=0 (upwards), 4 the left ends.  The leaves at height 0 are
    pairwise non-separated from below.
    """

    name = "cantor_notch"
    description = "horizontal foliation of the plane minus a middle-thirds Cantor comb"
    foliations = ("H",)

    def gap_depth(self, level: int) -> int:
        return max(2, level)

    def gaps(self, level):
        """Gaps whose channel leaves are sampled above height 0."""
        return cantor_gaps(self.gap_depth(level))

    def notch_gaps(self, level):
        """Gaps whose height-0 leaf is sampled: one depth coarser, so that
        two sampled height-0 ends always have a sampled channel between them."""
        return cantor_gaps(self.gap_depth(level) - 1)

    @staticmethod
    def _reg(y):
        return "NonSeparated" if y == 0 else "Regular"

    def _leaf_ends(self, level):
        out = {}
        gaps = self.gaps(level)
        notch = set(self.notch_gaps(level))
        for y in level_params(level):
            if y < 0:
                out[("line", y)] = {"+": (0, y), "-": (4, -y)}
                continue
            out[("right", y)] = {"+": (0, y), "-": (1, -y)}
            out[("left", y)] = {"+": (3, y), "-": (4, -y)}
            for a, b in gaps:
                if y == 0 and (a, b) not in notch:
                    continue
                mid = (a + b) / 2
                out[("gap", a, b, y)] = {"+": (2, -mid, 0, y), "-": (2, -mid, 1, -y)}
        return out

    def _ends(self, level):
        out = []
        for leaf, ends in self._leaf_ends(level).items():
            y = leaf[-1]
            for side, key in ends.items():
                out.append(AnalyticEnd("H", leaf, side, key, self._reg(y)))
        return out

    def _leaves(self, level):
        D = float(level_halfwidth(level) + 1)
        out = {}
        for leaf, ends in self._leaf_ends(level).items():
            kind, y = leaf[0], leaf[-1]
            if kind == "line":
                tr = _hseg(-D, D, y, 81)
            elif kind == "right":
                tr = _hseg(1, D, y)
            elif kind == "left":
                tr = _hseg(-D, 0, y)
            else:
                tr = _hseg(leaf[1], leaf[2], y)
            out[leaf] = LeafShape(leaf, "H", ends, tr)
        return out

    def _transversals(self, level):
        D = float(level_halfwidth(level) + 1)
        out = []

        def make(name, x, above):
            # above(t, side) gives the key for t >= 0, leaf label and trace
            def lam(t, side):
                if t < 0:
                    return (0, t) if side == "+" else (4, -t)
                return above[0](t, side)

            def leaf_at(t):
                return ("line", t) if t < 0 else above[1](t)

            def trace(t):
                return _hseg(-D, D, t, 81) if t < 0 else above[2](t)

            return Transversal(name, "H", np.array([[x, -1.0], [x, 1.0]]), lam, leaf_at, trace)

        out.append(make("x=-1/2", -0.5, (lambda t, s: (3, t) if s == "+" else (4, -t),
                                         lambda t: ("left", t), lambda t: _hseg(-D, 0, t))))
        for a, b in self.notch_gaps(level):
            mid = (a + b) / 2
            out.append(make(f"gap({a},{b})", float(mid), (
                lambda t, s, mid=mid: (2, -mid, 0, t) if s == "+" else (2, -mid, 1, -t),
                lambda t, a=a, b=b: ("gap", a, b, t),
                lambda t, a=a, b=b: _hseg(a, b, t))))
        out.append(make("x=3/2", 1.5, (lambda t, s: (0, t) if s == "+" else (1, -t),
                                       lambda t: ("right", t), lambda t: _hseg(1, D, t))))
        return out


# ---------------------------------------------------------------------------
# group actions


class SuspensionAction(AffineFamily):
    """H and V with the hyperbolic map (2x, y/2) and the integer translations."""

    def __init__(self, only=None):
        super().__init__("suspension_action", HV_DIRECTIONS,
                         "H and V with diag(2, 1/2) and integer translations (an R-covered model)", only)

    def restrict(self, only):
        return SuspensionAction(only)

    def generators(self) -> list:
        from .group_action import PlanarHomeo

        return [
            PlanarHomeo.affine("A", [[2, 0], [0, Fraction(1, 2)]], [0, 0]),
            PlanarHomeo.affine("Tx", [[1, 0], [0, 1]], [1, 0]),
            PlanarHomeo.affine("Ty", [[1, 0], [0, 1]], [0, 1]),
        ]


class SyntheticPingPong(Builtin):
    name = "synthetic_pingpong"
    description = "two hyperbolic circle maps with crossed axes (a direct circle action)"
    foliations = ()

    def __init__(self, multiplier: float = 4.0, only=None):
        self.multiplier = multiplier

    def _ends(self, level):
        return []

    def _leaves(self, level):
        return {}

    def _transversals(self, level):
        return []

    def circle_maps(self) -> list:
        from .group_action import hyperbolic_circle_map

        return [hyperbolic_circle_map("g1", self.multiplier, 0.0),
                hyperbolic_circle_map("g2", self.multiplier, 0.25)]


class _Named:
    def __init__(self, factory, description):
        self.factory = factory
        self.description = description


CATALOG = {
    "square_hv": _Named(square_hv, "horizontal and vertical foliations of the plane"),
    "strip_hv": _Named(StripHV, "horizontal and vertical foliations of the strip |x - y| < 1"),
    "saddle": _Named(Saddle, "leaves of the linear saddle field (x, -y)"),
    "cantor_notch": _Named(CantorNotch, "horizontal foliation of the plane minus a Cantor comb"),
    "affine_k": _Named(affine_k, "k foliations by parallel lines (default k = 3)"),
    "suspension_action": _Named(SuspensionAction, "H, V with diag(2, 1/2) and integer translations"),
    "synthetic_pingpong": _Named(SyntheticPingPong, "two crossed hyperbolic circle maps"),
}


def list_builtins() -> list:
    return [(name, entry.description) for name, entry in CATALOG.items()]


def load_builtin(name: str, **params) -> Builtin:
    try:
        entry = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown built-in {name!r}; known: {', '.join(CATALOG)}") from None
    return entry.factory(**params)
