"""Foliations of the plane given by polynomial vector fields.

A foliation is the family of integral curves of a field (P, Q) with exact
rational coefficients, oriented by the field (or its opposite).  Leaves are
integrated in arclength so that only their shape matters.  Singular points
must be declared; each must be a saddle (a hyperbolic one when it has four
prongs).

The detector for non-separated leaves and the sector scan are generic:
they work on any map from a transverse parameter to a cyclic sort key, so
the analytic built-in foliations use them as well.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .ray_geometry import Ray, exit_angle, point_polyline_distance, segment_crossings

SPEC_SCHEMA = "ideal-boundary.foliation/1"
BASIN_RADIUS = 1e-4
TRANSVERSE_EPS = 1e-6


class SpecError(ValueError):
    """Malformed foliation spec text."""


class SpecRejection(ValueError):
    """The field has zeros the package cannot handle, or undeclared zeros."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = list(points)


# ---------------------------------------------------------------------------
# polynomials with rational coefficients


class Poly:
    """Bivariate polynomial stored as {(i, j): Fraction} for x^i y^j."""

    def __init__(self, coeffs: Mapping | None = None):
        self.coeffs = {}
        for (i, j), c in (coeffs or {}).items():
            c = Fraction(c)
            if c:
                self.coeffs[(int(i), int(j))] = self.coeffs.get((int(i), int(j)), 0) + c
        self._terms = [(float(c), i, j) for (i, j), c in sorted(self.coeffs.items())]

    def __call__(self, x: float, y: float) -> float:
        s = 0.0
        for c, i, j in self._terms:
            s += c * x**i * y**j
        return s

    def grad(self, x: float, y: float) -> tuple:
        gx = gy = 0.0
        for c, i, j in self._terms:
            if i:
                gx += c * i * x ** (i - 1) * y**j
            if j:
                gy += c * j * x**i * y ** (j - 1)
        return gx, gy

    def degree(self) -> int:
        return max((i + j for i, j in self.coeffs), default=0)

    def interval(self, xl, xh, yl, yh) -> tuple:
        """Enclosure of the values over a box (naive interval arithmetic)."""
        lo = hi = 0.0
        for c, i, j in self._terms:
            a, b = _ipow(xl, xh, i)
            e, f = _ipow(yl, yh, j)
            prods = (a * e, a * f, b * e, b * f)
            m, M = min(prods), max(prods)
            if c >= 0:
                lo += c * m
                hi += c * M
            else:
                lo += c * M
                hi += c * m
        return lo, hi

    def along(self, p, d) -> np.polynomial.Polynomial:
        """The univariate polynomial s -> self(p + s d)."""
        X = np.polynomial.Polynomial([p[0], d[0]])
        Y = np.polynomial.Polynomial([p[1], d[1]])
        out = np.polynomial.Polynomial([0.0])
        for c, i, j in self._terms:
            out = out + c * X**i * Y**j
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"Poly({dict(sorted(self.coeffs.items()))})"


def _ipow(lo, hi, n):
    if n == 0:
        return 1.0, 1.0
    a, b = lo**n, hi**n
    if n % 2 == 0 and lo < 0 < hi:
        return 0.0, max(a, b)
    return min(a, b), max(a, b)


# ---------------------------------------------------------------------------
# specs


@dataclass
class FoliationSpec:
    P: Poly
    Q: Poly
    orientation: int = 1
    singularities: list = field(default_factory=list)  # [(x, y, k)]
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.P, Poly):
            self.P = Poly(self.P)
        if not isinstance(self.Q, Poly):
            self.Q = Poly(self.Q)
        if self.orientation not in (1, -1):
            raise SpecError("orientation must be +1 or -1")
        self.singularities = [(Fraction(x), Fraction(y), int(k)) for x, y, k in self.singularities]

    def field(self, x: float, y: float) -> tuple:
        s = self.orientation
        return s * self.P(x, y), s * self.Q(x, y)

    def jacobian(self, x: float, y: float) -> np.ndarray:
        s = self.orientation
        return s * np.array([self.P.grad(x, y), self.Q.grad(x, y)])

    def singular_points(self) -> list:
        return [(float(x), float(y)) for x, y, _k in self.singularities]


def _fmt_frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_spec(spec: FoliationSpec) -> str:
    """Text form: one ``P i j c`` / ``Q i j c`` line per monomial c x^i y^j."""
    lines = [f"schema {SPEC_SCHEMA}"]
    if spec.name:
        lines.append(f"name {spec.name}")
    lines.append(f"orientation {'+' if spec.orientation > 0 else '-'}")
    for tag, poly in (("P", spec.P), ("Q", spec.Q)):
        for (i, j), c in sorted(poly.coeffs.items()):
            lines.append(f"{tag} {i} {j} {_fmt_frac(c)}")
    for x, y, k in spec.singularities:
        lines.append(f"singularity {_fmt_frac(x)} {_fmt_frac(y)} {k}")
    return "\n".join(lines) + "\n"


def parse_spec(text: str) -> FoliationSpec:
    P, Q, sing = {}, {}, []
    orientation, name, schema = 1, "", None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "schema":
                schema = rest[0]
            elif head == "name":
                name = " ".join(rest)
            elif head == "orientation":
                if rest != ["+"] and rest != ["-"]:
                    raise SpecError(f"line {n}: orientation must be + or -")
                orientation = 1 if rest[0] == "+" else -1
            elif head in ("P", "Q"):
                i, j, c = rest
                target = P if head == "P" else Q
                key = (int(i), int(j))
                if int(i) < 0 or int(j) < 0:
                    raise SpecError(f"line {n}: negative exponent")
                target[key] = target.get(key, 0) + Fraction(c)
            elif head == "singularity":
                x, y, k = rest
                sing.append((Fraction(x), Fraction(y), int(k)))
            else:
                raise SpecError(f"line {n}: unknown directive {head!r}")
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"line {n}: {exc}") from exc
    if schema != SPEC_SCHEMA:
        raise SpecError(f"missing or unsupported schema line (want {SPEC_SCHEMA})")
    return FoliationSpec(Poly(P), Poly(Q), orientation, sing, name)


# ---------------------------------------------------------------------------
# singular points


@dataclass
class Singularity:
    point: tuple
    k: int
    eigenvalues: tuple
    eigenvectors: tuple  # unit vectors: (unstable, stable) for a hyperbolic saddle
    kind: str


def _find_zeros(spec: FoliationSpec, window, min_width: float, max_boxes: int = 200000) -> list:
    xl, xh, yl, yh = window
    boxes = [(xl, xh, yl, yh)]
    leaves = []
    seen = 0
    while boxes:
        b = boxes.pop()
        seen += 1
        if seen > max_boxes:
            raise SpecRejection("zero search exceeded its box budget")
        plo, phi = spec.P.interval(*b)
        qlo, qhi = spec.Q.interval(*b)
        if plo > 0 or phi < 0 or qlo > 0 or qhi < 0:
            continue
        if b[1] - b[0] <= min_width:
            leaves.append(b)
            continue
        mx, my = (b[0] + b[1]) / 2, (b[2] + b[3]) / 2
        boxes += [(b[0], mx, b[2], my), (mx, b[1], b[2], my), (b[0], mx, my, b[3]), (mx, b[1], my, b[3])]
    roots = []
    for b in leaves:
        z = _newton(spec, ((b[0] + b[1]) / 2, (b[2] + b[3]) / 2))
        if z is None:
            continue
        if not (xl - min_width <= z[0] <= xh + min_width and yl - min_width <= z[1] <= yh + min_width):
            continue
        if all(math.hypot(z[0] - r[0], z[1] - r[1]) > 1e-7 for r in roots):
            roots.append(z)
    return sorted(roots)


def _newton(spec, z, iters=60):
    x, y = z
    for _ in range(iters):
        p, q = spec.P(x, y), spec.Q(x, y)
        J = np.array([spec.P.grad(x, y), spec.Q.grad(x, y)])
        if abs(np.linalg.det(J)) < 1e-14:
            # degenerate Jacobian: accept if already small
            return (x, y) if math.hypot(p, q) < 1e-10 else None
        dx, dy = np.linalg.solve(J, [-p, -q])
        x, y = x + dx, y + dy
        if math.hypot(dx, dy) < 1e-14:
            break
    if math.hypot(spec.P(x, y), spec.Q(x, y)) > 1e-9:
        return None
    return (float(x), float(y))


def prong_count(spec: FoliationSpec, point, rho: float = 1e-3, samples: int = 720) -> int:
    """Directions on a small circle where the field is radial.

    A k-prong saddle has exactly k of them (one per separatrix).
    """
    ts = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    vals = []
    for t in ts:
        u = (math.cos(t), math.sin(t))
        fx, fy = spec.field(point[0] + rho * u[0], point[1] + rho * u[1])
        vals.append(u[0] * fy - u[1] * fx)
    vals = np.array(vals)
    return int(np.sum(np.sign(vals) != np.sign(np.roll(vals, -1))))


def classify_singularities(spec: FoliationSpec, window=(-4.0, 4.0, -4.0, 4.0), min_width: float = 1e-3) -> list:
    """Locate and classify the zeros of the field inside ``window``.

    Every zero must be a declared saddle.  Nodes, foci, centres, other
    non-hyperbolic zeros and undeclared zeros raise SpecRejection listing
    every offending point.
    """
    zeros = _find_zeros(spec, window, min_width)
    out, bad = [], []
    declared = spec.singularities
    matched = set()
    for z in zeros:
        J = spec.jacobian(*z)
        ev, vecs = np.linalg.eig(J)
        hit = next((k for k, (x, y, _p) in enumerate(declared)
                    if math.hypot(float(x) - z[0], float(y) - z[1]) < 1e-6), None)
        if np.all(np.abs(ev.imag) < 1e-12) and ev.real[0] * ev.real[1] < 0:
            order = np.argsort(-ev.real)
            vs = tuple(tuple(float(c) for c in vecs[:, i].real / np.linalg.norm(vecs[:, i].real)) for i in order)
            s = Singularity(z, 4, tuple(float(e) for e in ev.real[order]), vs, "hyperbolic-saddle")
        elif np.all(np.abs(ev) < 1e-12):
            k = prong_count(spec, z)
            s = Singularity(z, k, (0.0, 0.0), (), "degenerate")
            if k <= 4 or k % 2:
                bad.append((z, f"degenerate zero with {k} radial directions"))
                continue
        else:
            if np.any(np.abs(ev.imag) > 1e-12):
                why = "focus or centre"
            elif np.any(np.abs(ev.real) < 1e-12):
                why = "non-hyperbolic zero"
            else:
                why = "node"
            bad.append((z, why))
            continue
        if hit is None:
            bad.append((z, "undeclared saddle"))
            continue
        if declared[hit][2] != s.k:
            bad.append((z, f"declared with {declared[hit][2]} prongs, found {s.k}"))
            continue
        matched.add(hit)
        out.append(s)
    if bad:
        # also list the accepted saddles so the caller sees every zero
        pts = [p for p, _ in bad] + [s.point for s in out]
        detail = "; ".join(f"{p} {why}" for p, why in bad)
        raise SpecRejection(f"rejected zeros: {detail}", pts)
    for k, (x, y, _p) in enumerate(declared):
        if k not in matched and window[0] <= x <= window[1] and window[2] <= y <= window[3]:
            raise SpecRejection(f"declared singularity ({x}, {y}) is not a zero", [(float(x), float(y))])
    return out


# ---------------------------------------------------------------------------
# leaves


@dataclass
class SingularTerminus:
    point: tuple  # the saddle
    entry: tuple  # where the trace entered the basin ball
    direction: float  # angle (turns) of the entry point seen from the saddle
    trace: np.ndarray = field(repr=False, default=None)


@dataclass
class UnknownTerminus:
    reason: str
    trace: np.ndarray = field(repr=False, default=None)


@dataclass
class EndRecord:
    """One end of one leaf, with the sort key of its landing point."""

    id: int
    foliation: str
    seed: object  # seed point, or the leaf label of an analytic example
    side: str  # "+" or "-"
    key: object
    regular: str = "Regular"  # "Regular" | "NonSeparated" | "Unknown"
    ray: object = None
    partners: tuple = ()


@dataclass
class Leaf:
    seed: tuple
    plus: object
    minus: object

    def trace(self) -> np.ndarray:
        a = _end_points(self.minus)
        b = _end_points(self.plus)
        return np.vstack([a[::-1], b[1:]])


def _end_points(end) -> np.ndarray:
    if isinstance(end, Ray):
        return end.points
    return end.trace


def _escape_index(radii: np.ndarray) -> int:
    d = np.diff(radii)
    bad = np.nonzero(d <= 0)[0]
    return int(bad[-1] + 1) if len(bad) else 0


def integrate_leaf(
    spec: FoliationSpec,
    seed,
    side: str = "+",
    max_radius: float = 50.0,
    tol: float = 1e-9,
    basin: float = BASIN_RADIUS,
    max_length: float | None = None,
    mark_radii: Sequence[float] = (),
):
    """Follow the leaf through ``seed`` in the direction ``side``.

    Returns a Ray once the radius reaches ``max_radius``, a
    SingularTerminus when the trace enters the basin ball of a declared
    singular point, and an UnknownTerminus when the step size collapses,
    the length budget runs out or the trace closes up on itself.

    Outward crossings of the circles ``mark_radii`` are located on the
    integrator's dense output and inserted as vertices, so exit angles
    read there carry no chord error.
    """
    sign = 1.0 if side == "+" else -1.0
    sing = spec.singular_points()
    sx, sy = float(seed[0]), float(seed[1])
    for p in sing:
        if math.hypot(sx - p[0], sy - p[1]) <= basin:
            raise ValueError("seed lies in a singular basin")
    f0 = spec.field(sx, sy)
    if math.hypot(*f0) == 0.0:
        raise ValueError("seed is a zero of the field")
    if max_length is None:
        max_length = 40.0 * max_radius + 10.0

    def rhs(_s, z):
        fx, fy = spec.field(z[0], z[1])
        n = math.hypot(fx, fy)
        if n == 0.0:
            return [0.0, 0.0]
        return [sign * fx / n, sign * fy / n]

    def escape(_s, z):
        return math.hypot(z[0], z[1]) - max_radius

    escape.terminal = True
    escape.direction = 1
    events = [escape]
    for p in sing:
        def ball(_s, z, p=p):
            return math.hypot(z[0] - p[0], z[1] - p[1]) - basin

        ball.terminal = True
        ball.direction = -1
        events.append(ball)

    # crossings of the line through the seed normal to the leaf; one near the
    # seed means the trace has closed up
    u0 = (sign * f0[0] / math.hypot(*f0), sign * f0[1] / math.hypot(*f0))

    def closing(_s, z):
        return (z[0] - sx) * u0[0] + (z[1] - sy) * u0[1]

    closing.direction = 1
    events.append(closing)
    n_fixed = len(events)
    for r in mark_radii:
        def mark(_s, z, r=float(r)):
            return math.hypot(z[0], z[1]) - r

        mark.direction = 1
        events.append(mark)

    sol = solve_ivp(rhs, (0.0, max_length), [sx, sy], method="RK45", rtol=tol, atol=tol * 1e-2,
                    events=events, max_step=max(0.05, max_radius / 50.0))
    pts = sol.y.T.copy()
    close_at = next((t for t, y in zip(sol.t_events[n_fixed - 1], sol.y_events[n_fixed - 1])
                     if t > 1e-3 and math.hypot(y[0] - sx, y[1] - sy) < 1e-5), None)
    if close_at is not None:
        return UnknownTerminus("trace closes up on its seed", pts[sol.t <= close_at])
    marks = [(t, y) for k in range(n_fixed, len(events)) for t, y in zip(sol.t_events[k], sol.y_events[k])]
    if marks:
        ts = np.concatenate([sol.t, [t for t, _ in marks]])
        allp = np.vstack([pts] + [np.asarray(y)[None, :] for _, y in marks])
        pts = allp[np.argsort(ts, kind="stable")]
    if sol.status == -1:
        return UnknownTerminus(f"integrator failure: {sol.message}", pts)
    if sol.status == 0:
        return UnknownTerminus("length budget exhausted", pts)
    if len(sol.t_events[0]):
        pts[-1] = sol.y_events[0][0]
        radii = np.hypot(pts[:, 0], pts[:, 1])
        return Ray(pts, _escape_index(radii), f"leaf:{spec.name}:{sx!r},{sy!r}:{side}")
    for k, p in enumerate(sing):
        if len(sol.t_events[1 + k]):
            e = sol.y_events[1 + k][0]
            ang = (math.atan2(e[1] - p[1], e[0] - p[0]) / (2 * math.pi)) % 1.0
            return SingularTerminus(p, (float(e[0]), float(e[1])), ang, pts)
    return UnknownTerminus("integration stopped without a terminal event", pts)


def integrate_full_leaf(spec, seed, **params) -> Leaf:
    return Leaf(tuple(map(float, seed)), integrate_leaf(spec, seed, "+", **params),
                integrate_leaf(spec, seed, "-", **params))


def separatrix_ends(spec: FoliationSpec, saddle: Singularity, offset: float = 2 * BASIN_RADIUS, **params) -> list:
    """The separatrices of a saddle, integrated from a small offset.

    Returns ``(direction_vector, end)`` pairs.  For a hyperbolic saddle,
    the unstable directions are followed forwards and the stable ones
    backwards, so each entry is the end at infinity (or elsewhere) of one
    separatrix.
    """
    out = []
    if saddle.kind != "hyperbolic-saddle":
        return out
    u, s = saddle.eigenvectors
    for vec, side in ((u, "+"), (s, "-")):
        for sgn in (1, -1):
            v = (sgn * vec[0], sgn * vec[1])
            seed = (saddle.point[0] + offset * v[0], saddle.point[1] + offset * v[1])
            out.append((v, integrate_leaf(spec, seed, side, **params)))
    return out


def leaf_to_csv(leaf: Leaf) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for x, y in leaf.trace():
        w.writerow([repr(float(x)), repr(float(y))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# transversals


@dataclass
class TransverseSegment:
    points: np.ndarray
    orientation_sign: int = 1

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    @classmethod
    def straight(cls, a, b) -> "TransverseSegment":
        return cls(np.array([a, b], dtype=float))

    def lengths(self) -> np.ndarray:
        d = np.diff(self.points, axis=0)
        return np.hypot(d[:, 0], d[:, 1])

    def at(self, t: float) -> np.ndarray:
        """Point at parameter t in [-1, 1], proportional to arclength."""
        L = self.lengths()
        cum = np.concatenate([[0.0], np.cumsum(L)])
        s = (t + 1) / 2 * cum[-1]
        k = min(int(np.searchsorted(cum, s, side="right")) - 1, len(L) - 1)
        k = max(k, 0)
        frac = (s - cum[k]) / L[k] if L[k] > 0 else 0.0
        return self.points[k] + frac * (self.points[k + 1] - self.points[k])


@dataclass
class TransversalityCertificate:
    ok: bool
    sign: int
    margin: float
    reason: str = ""


def certify_transverse(spec: FoliationSpec, seg: TransverseSegment, eps: float = TRANSVERSE_EPS,
                       grid: int = 64) -> TransversalityCertificate:
    """Certify |F x u| >= eps along every piece of the polyline (u unit tangent).

    On a straight piece the cross product is a univariate polynomial in the
    piece parameter, so a grid minimum minus a derivative bound times half
    the grid spacing is a rigorous lower bound.
    """
    sign = 0
    margin = math.inf
    for p, q in zip(seg.points[:-1], seg.points[1:]):
        d = q - p
        L = math.hypot(*d)
        if L == 0:
            return TransversalityCertificate(False, 0, 0.0, "zero-length piece")
        g = (spec.P.along(p, d) * d[1] - spec.Q.along(p, d) * d[0]) * (spec.orientation / L)
        s = np.linspace(0.0, 1.0, grid + 1)
        vals = g(s)
        dg = g.deriv()
        lip = float(np.sum(np.abs(dg.coef))) if len(dg.coef) else 0.0
        lower = float(np.min(np.abs(vals))) - lip * 0.5 / grid
        sg = np.sign(vals)
        if not (np.all(sg > 0) or np.all(sg < 0)):
            return TransversalityCertificate(False, 0, lower, "field tangent to the segment")
        piece_sign = int(sg[0])
        if sign and piece_sign != sign:
            return TransversalityCertificate(False, 0, lower, "crossing direction flips")
        sign = piece_sign
        margin = min(margin, lower)
    for sp in spec.singular_points():
        if point_polyline_distance(sp, seg.points) <= BASIN_RADIUS:
            return TransversalityCertificate(False, sign, margin, "segment meets a singular basin")
    if margin < eps:
        return TransversalityCertificate(False, sign, margin, "margin below tolerance")
    return TransversalityCertificate(True, sign, margin)


@dataclass
class CrossingReport:
    count: int
    ambiguous: bool
    violation: bool
    points: list = field(default_factory=list)


def transverse_crossing_count(seg: TransverseSegment, leaf_trace: np.ndarray, tol: float = 1e-9) -> CrossingReport:
    """Intersections of a transverse segment with one leaf trace.

    A second crossing is flagged as a violation: a leaf meets a transverse
    segment at most once, so two crossings mean a bad spec or a bad trace.
    """
    A, B = leaf_trace[:-1], leaf_trace[1:]
    pts = []
    ambiguous = False
    for p, q in zip(seg.points[:-1], seg.points[1:]):
        hits, near = segment_crossings(p, q, A, B, tol)
        ambiguous = ambiguous or bool(near.any())
        for i in np.nonzero(hits)[0]:
            x = _intersection(p, q, A[i], B[i])
            if x is not None and all(math.hypot(x[0] - y[0], x[1] - y[1]) > 1e-12 for y in pts):
                pts.append(x)
    return CrossingReport(len(pts), ambiguous, len(pts) >= 2, pts)


def _intersection(p, q, a, b):
    r = q - p
    s = b - a
    den = r[0] * s[1] - r[1] * s[0]
    if den == 0:
        return None
    t = ((a[0] - p[0]) * s[1] - (a[1] - p[1]) * s[0]) / den
    return (float(p[0] + t * r[0]), float(p[1] + t * r[1]))


def crossing_counts(seg: TransverseSegment, traces: Sequence[np.ndarray], tol: float = 1e-9) -> list:
    """transverse_crossing_count for many leaves, with a bounding-box prefilter."""
    lo = seg.points.min(axis=0) - tol
    hi = seg.points.max(axis=0) + tol
    out = []
    for tr in traces:
        # edges whose bounding box meets the segment's
        a, b = tr[:-1], tr[1:]
        box = ((np.maximum(a[:, 0], b[:, 0]) >= lo[0]) & (np.minimum(a[:, 0], b[:, 0]) <= hi[0])
               & (np.maximum(a[:, 1], b[:, 1]) >= lo[1]) & (np.minimum(a[:, 1], b[:, 1]) <= hi[1]))
        if not box.any():
            out.append(CrossingReport(0, False, False))
            continue
        idx = np.nonzero(box)[0]
        out.append(transverse_crossing_count(seg, tr[idx[0]:idx[-1] + 2], tol))
    return out


# ---------------------------------------------------------------------------
# non-separated ends


@dataclass
class NonSeparatedEntry:
    t_star: float
    approach: str  # "above" (from larger t), "below", or "unknown"
    side: str  # "right" for the + end, "left" for the - end
    limit_key: object
    partners: list
    singular: bool = False


@dataclass
class DetectorBudget:
    grid: int = 33
    bisections: int = 40
    min_between: int = 2
    settle: int = 10


_SINGULAR = "singular"
_UNKNOWN = "unknown"


class _CyclicKeys:
    def __init__(self, keys):
        self.sorted = sorted(keys)

    def count_between(self, a, b) -> int:
        """Keys strictly inside the positive arc (a, b)."""
        s = self.sorted
        if a < b:
            return bisect.bisect_left(s, b) - bisect.bisect_right(s, a)
        return len(s) - bisect.bisect_right(s, a) + bisect.bisect_left(s, b)

    def jump(self, a, b, need: int) -> bool:
        if a == b:
            return False
        return min(self.count_between(a, b), self.count_between(b, a)) >= need


def _status(v):
    if isinstance(v, str) and v in (_SINGULAR, _UNKNOWN):
        return v
    return "key"


def detect_jumps(
    lam: Callable[[float], object],
    reference_keys: Sequence,
    side: str,
    t_range=(-1.0, 1.0),
    budget: DetectorBudget = DetectorBudget(),
    trace: Callable[[float], np.ndarray] | None = None,
    candidates: Mapping[object, np.ndarray] | None = None,
    partner_tol: float = 1e-2,
) -> list:
    """Jumps of the end-limit map t -> lam(t) along a transversal.

    ``lam`` returns a sort key on a cut circle, or the strings "singular"
    / "unknown".  Two keys are far apart when both arcs between them hold
    at least ``min_between`` reference keys; a bracket whose endpoints are
    far apart is bisected down to the point t* where lam jumps.

    The side of the jump is read from which bracket endpoint stops moving:
    a fixed upper endpoint means lam(t*) is the value from above and the
    jump is approached from below.  At a singular grid point both sides
    are reported.

    When ``trace`` (leaf trace at t) and ``candidates`` (label -> trace)
    are given, a candidate is a partner when its distance to the leaf at
    t shrinks by a factor >= 3 as t moves 100 times closer to t*, ending
    below ``partner_tol``.
    """
    ref = _CyclicKeys(list(reference_keys))
    lr = "right" if side == "+" else "left"
    lo_t, hi_t = t_range
    ts = [lo_t + (hi_t - lo_t) * k / (budget.grid - 1) for k in range(budget.grid)]
    vals = [lam(t) for t in ts]
    entries = []

    def partners_near(t_star, direction):
        if trace is None or not candidates:
            return []
        span = (hi_t - lo_t) / (budget.grid - 1)
        d1 = span * 1e-3
        d2 = d1 * 1e-2
        out = []
        L1, L2 = trace(t_star + direction * d1), trace(t_star + direction * d2)
        if L1 is None or L2 is None:
            return out
        lo1, hi1 = L1.min(axis=0), L1.max(axis=0)
        for label, pts in candidates.items():
            # cheap reject: a point of the candidate far outside the leaf's box
            far = np.maximum(lo1 - pts, pts - hi1).max()
            if far > 10 * partner_tol:
                continue
            a = _sup_distance(pts, L1)
            b = _sup_distance(pts, L2)
            if b < partner_tol and b * 3 <= a:
                out.append(label)
        return out

    def singular_entries(t):
        span = (hi_t - lo_t) / (budget.grid - 1)
        for direction, name in ((1, "above"), (-1, "below")):
            probe = t + direction * span * 1e-5
            if not lo_t <= probe <= hi_t:
                continue
            v = lam(probe)
            if _status(v) == "key":
                entries.append(NonSeparatedEntry(t, name, lr, v, partners_near(t, direction), True))

    for k, (t, v) in enumerate(zip(ts, vals)):
        if _status(v) == _SINGULAR:
            singular_entries(t)
        elif _status(v) == _UNKNOWN:
            entries.append(NonSeparatedEntry(t, "unknown", lr, None, [], False))
    for k in range(len(ts) - 1):
        a, b = vals[k], vals[k + 1]
        if _status(a) != "key" or _status(b) != "key" or not ref.jump(a, b, budget.min_between):
            continue
        lo, hi, vlo, vhi = ts[k], ts[k + 1], a, b
        lo_age = hi_age = 0
        found_singular = None
        for _ in range(budget.bisections):
            m = (lo + hi) / 2
            vm = lam(m)
            st = _status(vm)
            if st == _SINGULAR:
                found_singular = m
                break
            if st == _UNKNOWN:
                break
            if ref.jump(vlo, vm, budget.min_between):
                hi, vhi = m, vm
                hi_age, lo_age = 0, lo_age + 1
            else:
                lo, vlo = m, vm
                lo_age, hi_age = 0, hi_age + 1
        if found_singular is not None:
            singular_entries(found_singular)
            continue
        if not ref.jump(vlo, vhi, budget.min_between):
            continue
        if hi_age >= budget.settle:
            entries.append(NonSeparatedEntry(hi, "below", lr, vlo, partners_near(hi, -1)))
        elif lo_age >= budget.settle:
            entries.append(NonSeparatedEntry(lo, "above", lr, vhi, partners_near(lo, 1)))
        else:
            entries.append(NonSeparatedEntry((lo + hi) / 2, "unknown", lr, None, []))
    entries.sort(key=lambda e: (e.t_star, e.approach))
    return entries


def _sup_distance(pts: np.ndarray, trace: np.ndarray) -> float:
    return max(point_polyline_distance(p, trace) for p in pts)


def _subsample(pts: np.ndarray, n: int = 60) -> np.ndarray:
    if len(pts) <= n:
        return pts
    idx = np.linspace(0, len(pts) - 1, n).round().astype(int)
    return pts[idx]


def _clip(pts: np.ndarray, window) -> np.ndarray:
    xl, xh, yl, yh = window
    keep = (pts[:, 0] >= xl) & (pts[:, 0] <= xh) & (pts[:, 1] >= yl) & (pts[:, 1] <= yh)
    return pts[keep]


def detect_nonseparated(
    spec: FoliationSpec,
    seg: TransverseSegment,
    side: str,
    budget: DetectorBudget = DetectorBudget(),
    max_radius: float = 40.0,
    window=(-2.0, 2.0, -2.0, 2.0),
    reference: int = 256,
) -> list:
    """Non-separated ends met along a transversal of an integrated foliation.

    lam(t) is the exit angle (turns) on the circle of radius max_radius/4
    of the ``side`` end of the leaf through seg.at(t).  Partners are sought
    among the separatrices of the declared saddles and the leaf at t*.
    """
    R = max_radius / 4.0
    cache = {}

    def end_at(t):
        if t not in cache:
            cache[t] = integrate_leaf(spec, tuple(seg.at(t)), side, max_radius=max_radius)
        return cache[t]

    def lam(t):
        e = end_at(t)
        if isinstance(e, Ray):
            return exit_angle(e, R)
        return _SINGULAR if isinstance(e, SingularTerminus) else _UNKNOWN

    def trace(t):
        e = end_at(t)
        pts = e.points if isinstance(e, Ray) else e.trace
        return _clip(pts, window) if len(_clip(pts, window)) >= 2 else None

    candidates = {}
    try:
        saddles = classify_singularities(spec, window)
    except SpecRejection:
        saddles = []
    for s in saddles:
        for v, end in separatrix_ends(spec, s, max_radius=max_radius):
            pts = end.points if isinstance(end, Ray) else end.trace
            pts = _clip(pts, window)
            if len(pts):
                ang = round((math.atan2(v[1], v[0]) / (2 * math.pi)) % 1.0, 6)
                candidates[("separatrix", s.point, ang)] = _subsample(pts)
    ref_keys = [k / reference for k in range(reference)]
    entries = detect_jumps(lam, ref_keys, side, (-1.0, 1.0), budget, trace, candidates)
    for e in entries:
        if e.approach in ("above", "below"):
            e.partners = [("leaf", float(e.t_star))] + e.partners
    return entries


# ---------------------------------------------------------------------------
# hyperbolic sectors


@dataclass
class SectorReport:
    corner_class: int
    ordered_ends: list
    sectors: list
    per_foliation: dict = field(default_factory=dict)


class SectorConsistencyError(ValueError):
    pass


def sector_scan(ends: Sequence, chart, key_of: Callable | None = None) -> list:
    """Hyperbolic sectors at points of the circle reached by several ends.

    ``ends`` are EndRecord-like objects with ``id``, ``foliation``,
    ``regular`` and ``key``.  For every chart class holding two or more
    ends of one foliation the ends are listed in order; the list must be a
    contiguous run of the foliation's ends (no regular end of the same
    foliation from another class in between), and consecutive ends bound
    the sectors.
    """
    key_of = key_of or (lambda e: e.key)
    by_id = {e.id: e for e in ends}
    members = chart.class_members()
    out = []
    per_fol = {}
    for e in ends:
        per_fol.setdefault(e.foliation, []).append(e)
    sorted_keys = {f: sorted(key_of(e) for e in es) for f, es in per_fol.items()}
    for c, ids in members.items():
        group = [by_id[i] for i in ids if i in by_id]
        fols = {}
        for e in group:
            fols.setdefault(e.foliation, []).append(e)
        if not any(len(v) >= 2 for v in fols.values()):
            continue
        ordered = sorted(group, key=key_of)
        sectors = []
        for f, es in fols.items():
            es = sorted(es, key=key_of)
            if len(es) < 2:
                continue
            lo, hi = key_of(es[0]), key_of(es[-1])
            keys = sorted_keys[f]
            inside = bisect.bisect_left(keys, hi) - bisect.bisect_right(keys, lo)
            if inside != len(es) - 2:
                raise SectorConsistencyError(
                    f"class {c}: ends of {f} from another class lie between its ends")
            sectors += [(a.id, b.id) for a, b in zip(es, es[1:])]
        out.append(SectorReport(c, [e.id for e in ordered], sectors,
                                {f: [e.id for e in sorted(es, key=key_of)] for f, es in fols.items()}))
    return out


def interleaving_ok(report: SectorReport, ends_by_id: Mapping, foliation: str, other: str) -> bool:
    """Between successive ends of ``foliation`` in the class, exactly one end of ``other``."""
    seq = [ends_by_id[i].foliation for i in report.ordered_ends]
    idx = [k for k, f in enumerate(seq) if f == foliation]
    for a, b in zip(idx, idx[1:]):
        if sum(1 for f in seq[a + 1:b] if f == other) != 1:
            return False
    return True
