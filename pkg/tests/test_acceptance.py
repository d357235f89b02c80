"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import itertools
import math
import random
import time
from fractions import Fraction

import numpy as np

from ideal_boundary.compactify import (
    block_monotone,
    center_like_scan,
    chart_coincidence_test,
    chart_for_builtin,
    projection_chain_agrees,
)
from ideal_boundary.cyclic_core import check_cyclic_axioms, cyclic_sort, is_separating, linear_cyclic_sign
from ideal_boundary.embedder import back_and_forth_embed
from ideal_boundary.foliation_engine import (
    TransverseSegment,
    certify_transverse,
    crossing_counts,
    detect_nonseparated,
    integrate_full_leaf,
    parse_spec,
)
from ideal_boundary.gallery import (
    CantorNotch,
    Saddle,
    StripHV,
    SuspensionAction,
    SyntheticPingPong,
    affine_k,
    level_params,
    square_hv,
)
from ideal_boundary.group_action import (
    FixedPoint,
    PlanarHomeo,
    fixed_point_OF,
    fixed_point_preserved,
    identity_at_infinity_test,
    orbit_density_probe,
)
from ideal_boundary.ray_geometry import Ray, order_triple, radial_ray, ray_comparator

SADDLE_SPEC = "schema ideal-boundary.foliation/1\nname saddle\nP 1 0 1\nQ 0 1 -1\nsingularity 0 0 4\n"
TRIVIAL_H_SPEC = "schema ideal-boundary.foliation/1\nname horizontal\nP 0 0 1\n"


def _angle_sign(a, b, c):
    return linear_cyclic_sign(a % (2 * math.pi), b % (2 * math.pi), c % (2 * math.pi))


def test_c01_cyclic_axioms_on_radial_families(verdict):
    rng = random.Random(101)
    start = time.perf_counter()
    violations = mismatches = 0
    for _ in range(200):
        angles = [rng.uniform(0.0, 2 * math.pi) for _ in range(32)]
        rays = {i: radial_ray(a) for i, a in enumerate(angles)}
        theta = ray_comparator(rays)
        violations += len(check_cyclic_axioms(theta, list(rays)).violations)
        for i, j, k in itertools.combinations(range(32), 3):
            if order_triple(rays[i], rays[j], rays[k]) != _angle_sign(angles[i], angles[j], angles[k]):
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = violations == 0 and mismatches == 0 and elapsed < 10.0
    verdict(1, ok, f"200 families of 32 rays: {violations} axiom violations, "
                   f"{mismatches} oracle mismatches over C(32,3) triples, {elapsed:.1f} s")
    assert ok


def _bent_ray(rng, angle):
    """A ray that starts off-radial and turns radial at radius 3."""
    p0 = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1)])
    u = np.array([math.cos(angle), math.sin(angle)])
    return Ray(np.array([p0, 3 * u, 1e4 * u]), 1)


def test_c02_chart_uniqueness(verdict):
    rng = random.Random(202)
    bad = 0
    for _ in range(50):
        n = 2 * rng.randint(6, 20)
        angles = [rng.uniform(0.0, 2 * math.pi) for _ in range(n)]
        rays = {i: (radial_ray(a) if rng.random() < 0.5 else _bent_ray(rng, a)) for i, a in enumerate(angles)}
        theta = ray_comparator(rays)
        ordered = cyclic_sort(theta, list(rays))
        E1, E2 = ordered[0::2], ordered[1::2]
        rng.shuffle(E1)
        rng.shuffle(E2)
        assert is_separating(theta, E1, ordered)[0] and is_separating(theta, E2, ordered)[0]
        X = list(rays)
        rng.shuffle(X)
        p1 = back_and_forth_embed(X, theta, E1).order_permutation()
        p2 = back_and_forth_embed(X, theta, E2).order_permutation()
        oracle = sorted(range(n), key=lambda i: angles[i])
        k = oracle.index(0)
        if p1 != p2 or p1 != oracle[k:] + oracle[:k]:
            bad += 1
    verdict(2, bad == 0, f"50 families, charts from disjoint separating subsets: {bad} permutation mismatches")
    assert bad == 0


def _rotations(seq):
    return [seq[k:] + seq[:k] for k in range(len(seq))]


SQUARE_CCW = [("H", "+"), ("V", "+"), ("H", "-"), ("V", "-")]


def test_c03_square_model(verdict):
    details, ok = [], True
    for level in (4, 5, 6):
        fc = chart_for_builtin(square_hv(), level)
        labels = [(b.foliations[0], b.sides[0]) for b in fc.blocks
                  if len(b.foliations) == 1 and len(b.sides) == 1]
        blocks_ok = len(fc.blocks) == 4 and len(labels) == 4 and labels in _rotations(SQUARE_CCW)
        monotone = all(block_monotone(fc, b, lambda e: e.seed[1]) for b in fc.blocks)

        _c, collapse = fc.per_foliation["H"]
        groups = {}
        for v, g in collapse.items():
            groups.setdefault(g, set()).add(v)
        merged = [g for g in groups.values() if len({fc.class_of(v) for v in g}) > 1]
        members = fc.chart.class_members()
        v_blocks = [{v for c in b.classes for v in members[c]} for b in fc.blocks if b.foliations == ["V"]]
        collapse_ok = len(merged) == 2 and sorted(map(sorted, merged)) == sorted(map(sorted, v_blocks))

        fc_h = chart_for_builtin(square_hv(only=["H"]), level)
        centers = len(center_like_scan(fc_h).points)
        passed = blocks_ok and monotone and collapse_ok and centers == 2
        ok = ok and passed
        details.append(f"L{level}: {len(fc.blocks)} blocks {'ok' if blocks_ok else 'BAD'}, "
                       f"monotone={monotone}, V-blocks collapsed={collapse_ok}, H centre-like={centers}")
    verdict(3, ok, "; ".join(details))
    assert ok


def _gap_signature(fc):
    keys = fc.class_keys()
    return sorted((keys[g.before][0], keys[g.after][0]) for g in fc.gaps)


def test_c04_strip_model(verdict):
    details, sigs, ok = [], [], True
    for level in (3, 4):
        fc = chart_for_builtin(StripHV(), level)
        coincide = chart_coincidence_test(fc, "H", "V").coincide
        absorbed = {c for gc in fc.gap_classes for c in gc["absorbed"]}
        fol = fc.foliation_of()
        resolved = [ids for c, ids in fc.chart.class_members().items() if c not in absorbed]
        pairs_ok = all(sorted(fol[v] for v in ids) == ["H", "V"] for ids in resolved)
        sigs.append(_gap_signature(fc))
        passed = coincide and pairs_ok and len(fc.gap_classes) == 2 and len(fc.gaps) == 2
        ok = ok and passed
        details.append(f"L{level}: coincident={coincide}, {len(resolved)} classes each one H + one V={pairs_ok}, "
                       f"{len(fc.gap_classes)} gap classes")
    stable = sigs[0] == sigs[1]
    ok = ok and stable
    verdict(4, ok, "; ".join(details) + f"; gap classes stable across levels={stable}")
    assert ok


def test_c05_projection_functoriality(verdict):
    fc = chart_for_builtin(affine_k(4), 3)
    I = set(fc.foliations)
    proper = [set(s) for r in range(1, len(I)) for s in itertools.combinations(sorted(I), r)]
    chains = [(K, J) for J in proper for K in proper if K < J]
    bad = [(sorted(K), sorted(J)) for K, J in chains if not projection_chain_agrees(fc, K, J)]
    ok = len(proper) == 14 and len(chains) == 36 and not bad
    verdict(5, ok, f"{len(proper)} proper sub-families J, {len(chains)} chains K<J<I, {len(bad)} partition mismatches")
    assert ok


def test_c06_poincare_hopf_bound(verdict):
    spec = parse_spec(SADDLE_SPEC)
    rng = random.Random(606)
    traces = []
    while len(traces) < 100:
        s = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        if min(abs(s[0]), abs(s[1])) < 0.05:
            continue
        traces.append(integrate_full_leaf(spec, s, max_radius=8.0).trace())
    segs = []
    while len(segs) < 1000:
        a = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3)])
        t = rng.uniform(0, 2 * math.pi)
        b = a + rng.uniform(0.05, 1.0) * np.array([math.cos(t), math.sin(t)])
        seg = TransverseSegment.straight(a, b)
        if certify_transverse(spec, seg).ok:
            segs.append(seg)
    violations = crossings = 0
    for seg in segs:
        for r in crossing_counts(seg, traces):
            violations += r.violation
            crossings += r.count
    ok = violations == 0 and crossings > 0
    verdict(6, ok, f"1000 certified segments x 100 integrated saddle leaves: {crossings} crossings, "
                   f"{violations} violations")
    assert ok


def _saddle_oracle(t_sign):
    """Limit of the hyperbolas xy = t through (1, t) as t -> 0 from one side: the +x axis
    and the half y-axis on the side of t."""
    return {("+x",), ("+y",) if t_sign > 0 else ("-y",)}


def _as_fraction_label(label):
    return tuple(Fraction(v) if isinstance(v, (int, float, Fraction)) else v for v in label)


def test_c07_nonseparation_detection(verdict):
    level = 3
    saddle = Saddle()
    found = {}
    for tr in saddle.transversals(level):
        for side in "+-":
            for e in saddle.detect(tr, side, level):
                found.setdefault(side, []).append(e)
    minus = found.get("-", [])
    saddle_ok = ("+" not in found and len(minus) == 2
                 and all(abs(e.t_star) < 1e-9 for e in minus)
                 and {e.approach for e in minus} == {"above", "below"}
                 and all(set(e.partners) == _saddle_oracle(1 if e.approach == "above" else -1) for e in minus))

    cantor_ok = True
    for lv in (2, 3):
        cantor = CantorNotch()
        height0 = {_as_fraction_label(leaf) for leaf in cantor.leaves(lv) if leaf[-1] == 0}
        for tr in cantor.transversals(lv):
            entries = [e for side in "+-" for e in cantor.detect(tr, side, lv)]
            if any(abs(e.t_star) > 1e-9 or e.approach != "below" for e in entries):
                cantor_ok = False
            if tr.name.startswith("gap"):
                hit = [e for e in entries if {_as_fraction_label(p) for p in e.partners} == height0]
                cantor_ok = cantor_ok and len(hit) == 2
    n_gaps = len(CantorNotch().notch_gaps(3))

    trivial = square_hv(only=["H"])
    false_pos = sum(len(trivial.detect(tr, s, level)) for tr in trivial.transversals(level) for s in "+-")
    spec_h = parse_spec(TRIVIAL_H_SPEC)
    seg = TransverseSegment.straight((0.0, -1.0), (0.0, 1.0))
    false_pos += sum(len(detect_nonseparated(spec_h, seg, s)) for s in "+-")

    ok = saddle_ok and cantor_ok and false_pos == 0
    verdict(7, ok, f"saddle jump at t*=0 with oracle partners={saddle_ok}; cantor flags all "
                   f"{n_gaps} notch gaps from below={cantor_ok}; trivial H false positives={false_pos}")
    assert ok


def _random_fraction(rng, lo, hi, den=8):
    return Fraction(rng.randint(lo * den, hi * den), den)


def test_c08_faithfulness(verdict):
    rng = random.Random(808)
    level = 3
    h_only, hv = square_hv(only=["H"]), square_hv()
    bad = 0
    for k in range(10):
        if k < 5:
            a, s = Fraction(1), _random_fraction(rng, 1, 5)
        else:
            a, s = _random_fraction(rng, 1, 4) + Fraction(1, 8), _random_fraction(rng, -3, 3)
        h = PlanarHomeo.affine(f"h{k}", [[a, 0], [0, 1]], [s, 0])
        on_h = identity_at_infinity_test(h, h_only, level)
        on_hv = identity_at_infinity_test(h, hv, level)
        if not (on_h.identity and on_h.consistent and not on_hv.identity and on_hv.consistent):
            bad += 1
    verdict(8, bad == 0, f"10 horizontal translations/dilations: identity on H and not on H,V "
                         f"with both routes agreeing; {bad} failures")
    assert bad == 0


def test_c09_fixed_point(verdict):
    level = 3
    h_only = square_hv(only=["H"])
    fc = chart_for_builtin(h_only, level)
    fp = fixed_point_OF(fc, h_only, level)
    top = max(level_params(level))
    north = isinstance(fp, FixedPoint) and fp.gap_keys == ((Fraction(0), top), (Fraction(1, 2), -top))
    rng = random.Random(909)
    preserved = 0
    for k in range(10):
        A = [[_random_fraction(rng, 1, 3) + Fraction(1, 8), _random_fraction(rng, -2, 2)],
             [0, _random_fraction(rng, 1, 3) + Fraction(1, 8)]]
        b = [_random_fraction(rng, -3, 3), _random_fraction(rng, -3, 3)]
        preserved += fixed_point_preserved(fp, PlanarHomeo.affine(f"g{k}", A, b), h_only, level)
    flip = PlanarHomeo.affine("flip", [[1, 0], [0, -1]], [0, 0])
    control = not fixed_point_preserved(fp, flip, h_only, level)
    ok = north and preserved == 10 and control
    verdict(9, ok, f"fixed point is the north gap={north}; fixed by {preserved}/10 preserving maps; "
                   f"reflection y->-y rejected={control}")
    assert ok


def test_c10_orbit_density(verdict):
    b = SuspensionAction()
    fc = chart_for_builtin(b, 2)
    members = fc.chart.class_members()
    by_id = fc.ends_by_id
    gens = b.generators()
    worst = 1.0
    for c in fc.class_order():
        e = by_id[members[c][0]]
        start = next(x for x in b.ends(2) if x.key == e.key)
        probe = orbit_density_probe(gens, start, 8, b)
        worst = min(worst, min(probe.max_gap[1:]))
    ping = orbit_density_probe(SyntheticPingPong().circle_maps(), 0.1, 10)
    ok = worst >= 0.2 and ping.max_gap[10] < 0.02
    verdict(10, ok, f"suspension: min maxGap over {len(members)} start classes, depths 1-8 = {worst:.3f}; "
                    f"ping-pong maxGap at depth 10 = {ping.max_gap[10]:.2e}")
    assert ok
