"""Sampled rays in the plane and the cyclic order of their germs.

A ray is a polyline whose radius is strictly increasing after
``escape_index``.  The cyclic order of three disjoint germs is read from
the last points where the rays leave a large circle, and is only trusted
when it is the same on the circles of radius R, 2R and 4R.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

REL_SEP = 1e-3
REL_EQ = 1e-6
SIMPLE_TOL = 1e-9
RAY_HEADER_SCHEMA = "ideal-boundary.ray/1"


class ExtendRequired(ValueError):
    """The ray is too short for the requested radius."""


class UndeterminedOrder(ValueError):
    """order_triple gave different answers on the circles R, 2R, 4R."""


class GermTie(ValueError):
    """Two of the rays have equal germs, so the order has a tie."""


@dataclass(eq=False)
class Ray:
    points: np.ndarray
    escape_index: int = 0
    source_tag: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(self.points) < 2:
            raise ValueError("a ray needs at least two points")

    @property
    def radii(self) -> np.ndarray:
        r = self._cache.get("radii")
        if r is None:
            r = np.hypot(self.points[:, 0], self.points[:, 1])
            self._cache["radii"] = r
        return r

    @property
    def extent(self) -> float:
        return float(self.radii[-1])

    @property
    def escape_radius(self) -> float:
        return float(self.radii[self.escape_index])

    def has_escape_certificate(self) -> bool:
        tail = self.radii[self.escape_index :]
        return bool(np.all(np.diff(tail) > 0))

    def is_simple(self, tol: float = SIMPLE_TOL) -> bool:
        return not polyline_self_intersects(self.points, tol)


def radial_ray(angle: float, length: float = 1e4, start: float = 0.0, tag: str = "") -> Ray:
    """Straight ray from radius ``start`` outwards at ``angle`` (radians)."""
    u = np.array([math.cos(angle), math.sin(angle)])
    pts = np.array([start * u, length * u])
    return Ray(pts, 0, tag or f"radial:{angle!r}")


# ---------------------------------------------------------------------------
# segment predicates


def orient(a, b, c) -> float:
    """Twice the signed area of triangle abc."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segment_crossings(p, q, A, B, tol: float = 0.0):
    """Vectorised intersection test of segment pq against segments A[i]B[i].

    Returns ``(hits, near)``: proper or touching intersections, and
    near-misses where an endpoint lies within ``tol`` of the other line.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d1 = (q[0] - p[0]) * (A[:, 1] - p[1]) - (q[1] - p[1]) * (A[:, 0] - p[0])
    d2 = (q[0] - p[0]) * (B[:, 1] - p[1]) - (q[1] - p[1]) * (B[:, 0] - p[0])
    e = B - A
    d3 = e[:, 0] * (p[1] - A[:, 1]) - e[:, 1] * (p[0] - A[:, 0])
    d4 = e[:, 0] * (q[1] - A[:, 1]) - e[:, 1] * (q[0] - A[:, 0])
    hits = (d1 * d2 <= 0) & (d3 * d4 <= 0)
    lp = math.hypot(q[0] - p[0], q[1] - p[1])
    le = np.hypot(e[:, 0], e[:, 1])
    near = np.zeros_like(hits)
    if tol > 0:
        near = hits & (
            (np.abs(d1) <= tol * lp) | (np.abs(d2) <= tol * lp)
            | (np.abs(d3) <= tol * np.maximum(le, 1e-300)) | (np.abs(d4) <= tol * np.maximum(le, 1e-300))
        )
    return hits, near


def polyline_self_intersects(pts: np.ndarray, tol: float = SIMPLE_TOL) -> bool:
    pts = np.asarray(pts, dtype=float)
    A, B = pts[:-1], pts[1:]
    m = len(A)
    for i in range(m - 2):
        hits, _ = segment_crossings(A[i], B[i], A[i + 2 :], B[i + 2 :])
        if hits.any():
            return True
    return False


def point_polyline_distance(p, pts: np.ndarray) -> float:
    A, B = pts[:-1], pts[1:]
    e = B - A
    ll = np.einsum("ij,ij->i", e, e)
    t = np.einsum("ij,ij->i", np.asarray(p) - A, e) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = A + e * t[:, None]
    return float(np.min(np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])))


# ---------------------------------------------------------------------------
# last exit points and the cyclic order


def last_exit_point(ray: Ray, R: float) -> np.ndarray:
    """Last point where the polyline meets the circle of radius R."""
    key = ("exit", float(R))
    hit = ray._cache.get(key)
    if hit is not None:
        return hit
    if ray.extent <= R:
        raise ExtendRequired(f"ray {ray.source_tag!r} reaches radius {ray.extent:g} < {R:g}")
    P, Q = ray.points[:-1], ray.points[1:]
    d = Q - P
    a = np.einsum("ij,ij->i", d, d)
    b = 2 * np.einsum("ij,ij->i", P, d)
    c = np.einsum("ij,ij->i", P, P) - R * R
    disc = b * b - 4 * a * c
    ok = (disc >= 0) & (a > 0)
    s = np.full(len(P), -1.0)
    root = (-b[ok] + np.sqrt(disc[ok])) / (2 * a[ok])
    s[ok] = root
    # slack for vertices placed on the circle itself
    valid = (s >= -1e-9) & (s <= 1 + 1e-9)
    idx = np.nonzero(valid)[0]
    if len(idx) == 0:
        raise ExtendRequired(f"ray {ray.source_tag!r} never crosses radius {R:g}")
    i = idx[-1]
    pt = P[i] + min(max(s[i], 0.0), 1.0) * d[i]
    ray._cache[key] = pt
    return pt


def exit_angle(ray: Ray, R: float) -> float:
    """Angle in turns, in [0, 1), of the last exit point on radius R."""
    cache = ray._cache
    a = cache.get(R)
    if a is None:
        p = last_exit_point(ray, R)
        a = (math.atan2(p[1], p[0]) / (2 * math.pi)) % 1.0
        cache[R] = a
    return a


def default_radius(rays: Sequence[Ray]) -> float:
    base = max(max(r.escape_radius for r in rays), 1.0)
    return 2.0 * base


def _angles3(ray: Ray, R: float) -> tuple:
    key = ("a3", float(R))
    a = ray._cache.get(key)
    if a is None:
        a = (exit_angle(ray, R), exit_angle(ray, 2 * R), exit_angle(ray, 4 * R))
        ray._cache[key] = a
    return a


def _sign(a, b, c) -> int:
    if a == b or b == c or a == c:
        return 0
    return 1 if (a < b < c or b < c < a or c < a < b) else -1


def _stable_sign(ax, ay, az, R) -> int:
    s1 = _sign(ax[0], ay[0], az[0])
    if s1 and s1 == _sign(ax[1], ay[1], az[1]) == _sign(ax[2], ay[2], az[2]):
        return s1
    signs = [_sign(ax[k], ay[k], az[k]) for k in range(3)]
    if 0 in signs:
        raise GermTie("two exit points coincide; germs are not disjoint")
    raise UndeterminedOrder(f"order changes across radii {R:g}, {2 * R:g}, {4 * R:g}: {signs}")


def order_triple(r0: Ray, r1: Ray, r2: Ray, R: float | None = None) -> int:
    """Cyclic order of three germs, stable on the circles R, 2R and 4R."""
    if r0 is r1 or r1 is r2 or r0 is r2:
        raise GermTie("repeated ray")
    if R is None:
        R = default_radius((r0, r1, r2))
    return _stable_sign(_angles3(r0, R), _angles3(r1, R), _angles3(r2, R), R)


def _rotated(order: list) -> list:
    k = order.index(min(order))
    return order[k:] + order[:k]


def ray_comparator(rays, R: float | None = None):
    """Cyclic comparator on the ids of a mapping id -> Ray (0 on repeated ids).

    Same verdicts as order_triple at radius R.  When the whole sample has
    one cyclic arrangement on R, 2R and 4R with no tied exit points, every
    triple is stable and the comparator answers from ranks.
    """
    if R is None:
        R = default_radius(list(rays.values()))
    angles = {i: _angles3(r, R) for i, r in rays.items()}
    ids = list(angles)
    layers = [sorted(ids, key=lambda i, k=k: angles[i][k]) for k in range(3)]
    untied = all(len({angles[i][k] for i in ids}) == len(ids) for k in range(3))
    if ids and untied and _rotated(layers[0]) == _rotated(layers[1]) == _rotated(layers[2]):
        rank = {v: n for n, v in enumerate(layers[0])}

        def theta(x, y, z):
            a, b, c = rank[x], rank[y], rank[z]
            if a == b or b == c or a == c:
                return 0
            return 1 if (a < b < c or b < c < a or c < a < b) else -1

        return theta

    def theta(x, y, z):
        if x == y or y == z or x == z:
            return 0
        return _stable_sign(angles[x], angles[y], angles[z], R)

    return theta


@dataclass
class GermVerdict:
    relation: str  # "Disjoint" | "Equal" | "Undetermined"
    checked_radii: list
    max_gap: list = field(default_factory=list)
    min_gap: list = field(default_factory=list)


def _tail(ray: Ray, R: float) -> np.ndarray:
    """The polyline from its last exit point on radius R onwards."""
    r = ray.radii
    if r[0] >= R and np.all(np.diff(r) > 0):
        return ray.points
    inside = np.nonzero(r < R)[0]
    if not len(inside) or ray.extent <= R:
        return ray.points[-2:]
    i = int(inside[-1])
    return np.vstack([last_exit_point(ray, R), ray.points[i + 1:]])


def germ_relation(r1: Ray, r2: Ray, radii: Sequence[float] | None = None,
                  rel_sep: float = REL_SEP, rel_eq: float = REL_EQ) -> GermVerdict:
    """Compare the tails of two rays at the given radii.

    At each radius R the exit point of each ray is measured against the
    other ray's tail beyond R/2; the larger of the two distances must be
    below rel_eq*R for Equal, the smaller above rel_sep*R for Disjoint.
    """
    if radii is None:
        R = default_radius((r1, r2))
        radii = [R, 2 * R, 4 * R]
    radii = [float(R) for R in radii]
    big, small = [], []
    for R in radii:
        p1, p2 = last_exit_point(r1, R), last_exit_point(r2, R)
        d12 = point_polyline_distance(p1, _tail(r2, R / 2))
        d21 = point_polyline_distance(p2, _tail(r1, R / 2))
        big.append(max(d12, d21) / R)
        small.append(min(d12, d21) / R)
    if all(b < rel_eq for b in big):
        rel = "Equal"
    elif all(s > rel_sep for s in small):
        rel = "Disjoint"
    else:
        rel = "Undetermined"
    return GermVerdict(rel, radii, big, small)


def betweenness_via_line(r: Ray, line: tuple, R: float | None = None) -> str:
    """Side of an oriented line (right end ray, left end ray) holding r's tail.

    ``above`` is the half-plane to the left of the line's direction, which on
    the circle is the arc from the right end positively to the left end.
    """
    right, left = line
    if R is None:
        R = default_radius((r, right, left))
    for part in (right, left):
        tail = _tail(r, R)
        hits, _ = _polyline_hits(tail, _tail(part, R / 2))
        if hits:
            return "crosses"
    try:
        s = order_triple(right, r, left, R)
    except (UndeterminedOrder, GermTie):
        return "crosses"
    return "above" if s > 0 else "below"


def _polyline_hits(a: np.ndarray, b: np.ndarray):
    total = 0
    for i in range(len(a) - 1):
        hits, _ = segment_crossings(a[i], a[i + 1], b[:-1], b[1:])
        total += int(hits.sum())
    return total, None


# ---------------------------------------------------------------------------
# angular keys for many rays at once


@dataclass
class AngularKeys:
    keys: dict
    radius: float
    undetermined: list


def angular_keys(rays: dict, R: float | None = None) -> AngularKeys:
    """Exit angles (turns) at radius R for a dict id -> Ray.

    The cyclic arrangement is computed on R, 2R and 4R; ids whose position
    relative to their neighbours changes between radii are listed as
    undetermined.
    """
    ids = list(rays)
    if R is None:
        R = default_radius(list(rays.values()))
    layers = []
    for f in (1, 2, 4):
        ang = {i: exit_angle(rays[i], R * f) for i in ids}
        layers.append(ang)
    orders = [sorted(ids, key=lambda i, a=a: (a[i], i)) for a in layers]
    undetermined = []
    base = orders[0]
    n = len(base)
    for o in orders[1:]:
        k = o.index(base[0]) if n else 0
        rot = o[k:] + o[:k]
        for a, b in zip(base, rot):
            if a != b:
                undetermined.append(a)
    return AngularKeys(layers[-1], 4 * R, sorted(set(undetermined)))


# ---------------------------------------------------------------------------
# I/O


def ray_to_csv(ray: Ray) -> str:
    buf = io.StringIO()
    header = {"schema": RAY_HEADER_SCHEMA, "escapeIndex": ray.escape_index, "sourceTag": ray.source_tag}
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for x, y in ray.points:
        w.writerow([repr(float(x)), repr(float(y))])
    return buf.getvalue()


def ray_from_csv(text: str) -> Ray:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing JSON header line")
    header = json.loads(lines[0][2:])
    if header.get("schema") != RAY_HEADER_SCHEMA:
        raise ValueError(f"unsupported ray schema {header.get('schema')!r}")
    rows = list(csv.reader(lines[1:]))
    if rows and rows[0] == ["x", "y"]:
        rows = rows[1:]
    pts = np.array([[float(a), float(b)] for a, b in rows])
    return Ray(pts, int(header["escapeIndex"]), header.get("sourceTag", ""))
