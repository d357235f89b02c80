import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ideal_boundary.compactify import sample_builtin
from ideal_boundary.cyclic_core import comparator_from_keys, cyclic_sort, is_separating
from ideal_boundary.embedder import (
    DYADICS,
    CircleChart,
    DyadicEnumeration,
    NotSeparatingError,
    approx_quotient,
    back_and_forth_embed,
    bisection_order,
    default_budget,
    extend_monotone,
    partition_of,
    project,
    quotient_union,
)
from ideal_boundary.gallery import affine_k, square_hv
from ideal_boundary.ray_geometry import radial_ray, ray_comparator


def test_dyadic_enumeration_prefix_and_index():
    D = DyadicEnumeration()
    head = [Fraction(0), Fraction(1, 2), Fraction(1, 4), Fraction(3, 4)] + [Fraction(k, 8) for k in (1, 3, 5, 7)]
    assert D.prefix(8) == head
    assert len(set(D.prefix(200))) == 200
    assert all(D.index(D[k]) == k for k in range(200))
    assert D.least_in(Fraction(1, 4), Fraction(1, 2)) == Fraction(3, 8)
    # the gap through zero runs the long way round
    assert D.least_in(Fraction(3, 4), Fraction(1, 4)) == 0


def test_bisection_order_visits_middles_first():
    assert bisection_order(list(range(7))) == [3, 1, 5, 0, 2, 4, 6]


def test_embed_three_points_by_hand():
    # c lies in (a, b); the forth step sends a to 0, b to 1/2, then c to the least dyadic in (0, 1/2)
    theta = comparator_from_keys({"a": 0, "c": 1, "b": 2})
    chart = back_and_forth_embed(["a", "b", "c"], theta, ["a", "b", "c"])
    assert chart.angles == {"a": 0, "b": Fraction(1, 2), "c": Fraction(1, 4)}


def test_embed_single_point():
    chart = back_and_forth_embed(["a"], comparator_from_keys({"a": 0}))
    assert chart.angles == {"a": 0}


def test_embed_radial_rays_keeps_the_order():
    rng = random.Random(16)
    angles = [rng.uniform(0, 2 * math.pi) for _ in range(16)]
    rays = {i: radial_ray(a) for i, a in enumerate(angles)}
    chart = back_and_forth_embed(list(rays), ray_comparator(rays))
    oracle = sorted(rays, key=lambda i: angles[i])
    k = oracle.index(0)
    assert chart.order_permutation() == oracle[k:] + oracle[:k]
    assert sorted(chart.angles.values()) != sorted(a / (2 * math.pi) for a in angles)


def test_embed_rejects_non_separating_sets():
    theta = comparator_from_keys({i: i for i in range(6)})
    with pytest.raises(NotSeparatingError):
        back_and_forth_embed(list(range(6)), theta, [0, 3])


def test_extend_with_the_vertical_axis():
    sample = sample_builtin(square_hv(), [2, 3])
    keys = {e.id: e.key for L in (2, 3) for e in sample.by_level[L]}
    theta = comparator_from_keys(keys)
    H2 = [e.id for e in sample.by_level[2] if e.foliation == "H"]
    H3 = [e.id for e in sample.by_level[3] if e.foliation == "H"]
    axis = [e.id for e in sample.by_level[2] if e.foliation == "V" and e.seed[1] == 0]
    chart = extend_monotone(back_and_forth_embed(H2, theta), H2 + axis, theta, witness=H3)
    assert len(set(chart.classes.values())) == len(H2) + 2
    ctheta = chart.theta()
    plus = [v for v in H2 if keys[v][0] == 0]
    minus = [v for v in H2 if keys[v][0] == Fraction(1, 2)]
    north, south = sorted(axis, key=lambda v: keys[v])
    assert all(ctheta(p, north, m) == 1 for p in plus for m in minus)
    assert all(ctheta(m, south, p) == 1 for p in plus for m in minus)


def test_extend_to_the_same_set_is_the_identity():
    theta = comparator_from_keys({i: i for i in range(5)})
    chart = back_and_forth_embed(list(range(5)), theta)
    assert extend_monotone(chart, list(range(5)), theta).angles == chart.angles


def test_extend_collapses_an_unwitnessed_point():
    theta = comparator_from_keys({0: 0, 1: 1, 2: 2, 3: 3, "w": 1.5})
    chart = back_and_forth_embed([0, 1, 2, 3], theta)
    ext = extend_monotone(chart, [0, 1, 2, 3, "w"], theta)
    assert ext.angles["w"] == ext.angles[1] and ext.classes["w"] == ext.classes[1]
    # one witness on each side is still "at most one"; two on each side keep w apart
    near = {"x1": 1.2, "x2": 1.3, "y1": 1.7, "y2": 1.8}
    theta = comparator_from_keys({0: 0, 1: 1, 2: 2, 3: 3, "w": 1.5, **near})
    ext = extend_monotone(chart, [0, 1, 2, 3, "w"], theta, witness=["x1", "y1"])
    assert ext.classes["w"] == ext.classes[1]
    ext = extend_monotone(chart, [0, 1, 2, 3, "w"], theta, witness=list(near))
    assert ext.classes["w"] not in (ext.classes[1], ext.classes[2])


def _families(sample, level, fols):
    return [([e.id for e in sample.by_level[level] if e.foliation == f],) * 2 for f in fols]


def test_single_family_gives_singletons():
    sample = sample_builtin(square_hv(only=["H"]), [2, 3])
    theta = comparator_from_keys({e.id: e.key for L in (2, 3) for e in sample.by_level[L]})
    fam = _families(sample, 2, ["H"])
    tc = quotient_union(fam, theta, [[e.id for e in sample.by_level[3]]])
    assert all(len(c) == 1 for c in tc.classes)


def test_full_plane_hv_has_four_gaps_and_no_mixed_classes():
    sample = sample_builtin(square_hv(), [2, 3, 4])
    fol = {e.id: e.foliation for L in (2, 3, 4) for e in sample.by_level[L]}
    theta = comparator_from_keys({e.id: e.key for L in (2, 3, 4) for e in sample.by_level[L]})
    fam = _families(sample, 2, ["H", "V"])
    wit = [[e.id for e in sample.by_level[3] if e.foliation == f] for f in ("H", "V")]
    tc = quotient_union(fam, theta, wit)
    assert all(len({fol[v] for v in c}) == 1 for c in tc.classes)
    assert sum(g.unresolved for g in tc.gaps) == 4
    assert not tc.conflicts


def test_representative_choice_does_not_change_the_quotient_order():
    sample = sample_builtin(affine_k(3), [1, 2])
    theta = comparator_from_keys({e.id: e.key for L in (1, 2) for e in sample.by_level[L]})
    fols = ["F0", "F1", "F2"]
    wit = [[e.id for e in sample.by_level[2] if e.foliation == f] for f in fols]
    tc = quotient_union(_families(sample, 1, fols), theta, wit)
    k = list(range(len(tc.classes)))
    least = cyclic_sort(tc.quotient_theta(theta), k)
    other = [max(c) for c in tc.classes]
    alt = cyclic_sort(lambda a, b, c: theta(other[a], other[b], other[c]), k)
    assert least == alt


def test_project_to_everything_is_the_identity():
    theta = comparator_from_keys({i: i for i in range(8)})
    chart = back_and_forth_embed(list(range(8)), theta)
    fol = {i: "AB"[i % 2] for i in range(8)}
    _c, collapse = project(chart, {"A", "B"}, fol)
    assert partition_of(collapse) == partition_of(chart.classes)
    with pytest.raises(ValueError):
        project(chart, set(), fol)


def test_project_collapses_runs_without_target_ends():
    theta = comparator_from_keys({i: i for i in range(8)})
    chart = back_and_forth_embed(list(range(8)), theta)
    fol = {0: "A", 1: "B", 2: "B", 3: "A", 4: "A", 5: "B", 6: "A", 7: "B"}
    _c, collapse = project(chart, {"A"}, fol)
    assert partition_of(collapse) == frozenset(
        map(frozenset, [{0}, {1, 2}, {3}, {4}, {5}, {6}, {7}]))


def test_chart_json_round_trip():
    theta = comparator_from_keys({i: i for i in range(9)})
    chart = back_and_forth_embed(list(range(9)), theta)
    back = CircleChart.from_json(chart.to_json())
    assert back.angles == chart.angles and back.classes == chart.classes


def test_approx_quotient_examples():
    X = list(range(12))
    dense = comparator_from_keys({**{i: i for i in X}, **{f"w{i}": i + 0.5 for i in X}})
    aq = approx_quotient(X, dense, witness=[f"w{i}" for i in X])
    assert all(len(c) == 1 for c in aq.classes)

    three = comparator_from_keys({0: 0, 1: 1, 2: 2})
    assert len(approx_quotient([0, 1, 2], three).classes) == 1


def _brute_classes(X, keys, witness):
    """x ~ y iff one of the two closed arcs from x to y has no witness strictly inside."""
    wk = sorted(keys[w] for w in witness)
    kx = {x: keys[x] for x in X}

    def empty(a, b):
        if a <= b:
            return not any(a < w < b for w in wk)
        return not any(w > a or w < b for w in wk)

    parent = {x: x for x in X}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for x in X:
        for y in X:
            if x != y and (empty(kx[x], kx[y]) or empty(kx[y], kx[x])):
                parent[find(x)] = find(y)
    groups = {}
    for x in X:
        groups.setdefault(find(x), set()).add(x)
    return {frozenset(g) for g in groups.values()}


def test_approx_quotient_two_dense_arcs_with_isolated_points():
    X = list(range(20))
    witness_keys = {f"w{k}": k + 0.5 for k in range(20) if k not in (8, 18)}
    keys = {**{i: float(i) for i in X}, **witness_keys}
    aq = approx_quotient(X, comparator_from_keys(keys), witness=list(witness_keys))
    got = {frozenset(c) for c in aq.classes}
    assert got == _brute_classes(X, keys, witness_keys)
    assert frozenset({8, 9}) in got and frozenset({18, 19}) in got


def test_default_budget_is_ceil_sqrt():
    assert [default_budget(n) for n in (1, 2, 4, 5, 9, 10)] == [1, 2, 2, 3, 3, 4]


keys_st = st.lists(st.floats(0, 1, allow_nan=False), min_size=4, max_size=24, unique=True)


@settings(max_examples=50, deadline=None)
@given(keys_st, st.randoms(use_true_random=False))
def test_charts_from_different_separating_sets_agree(keys, rnd):
    n = len(keys)
    theta = comparator_from_keys(dict(enumerate(keys)))
    ordered = cyclic_sort(theta, list(range(n)))
    E1 = ordered[0::2]
    E2 = [v for v in ordered if rnd.random() < 0.7] or ordered
    if not is_separating(theta, E2, ordered)[0]:
        E2 = ordered
    p1 = back_and_forth_embed(list(range(n)), theta, E1).order_permutation()
    p2 = back_and_forth_embed(list(range(n)), theta, E2).order_permutation()
    assert p1 == p2


@settings(max_examples=50, deadline=None)
@given(keys_st, st.lists(st.floats(0, 1, allow_nan=False), max_size=10, unique=True))
def test_extension_never_swaps_order(keys, extra):
    extra = [x for x in extra if x not in keys]
    allkeys = {**dict(enumerate(keys)), **{1000 + i: x for i, x in enumerate(extra)}}
    theta = comparator_from_keys(allkeys)
    chart = back_and_forth_embed(list(range(len(keys))), theta)
    ext = extend_monotone(chart, list(allkeys), theta)
    members = ext.class_members()
    reps = [m[0] for m in members.values()]
    ctheta = ext.theta()
    for a in reps[:6]:
        for b in reps[:6]:
            for c in reps[:6]:
                assert ctheta(a, b, c) == theta(a, b, c)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2))
def test_quotient_classes_meet_each_family_once(level, k):
    b = affine_k(2 + k)
    sample = sample_builtin(b, [level, level + 1])
    theta = comparator_from_keys({e.id: e.key for L in sample.levels for e in sample.by_level[L]})
    fols = list(b.foliations)
    wit = [[e.id for e in sample.by_level[level + 1] if e.foliation == f] for f in fols]
    tc = quotient_union(_families(sample, level, fols), theta, wit)
    fam_sets = [set(X) for X, _E in _families(sample, level, fols)]
    assert all(sum(v in s for v in c) <= 1 for c in tc.classes for s in fam_sets)


def test_dyadics_module_instance_is_canonical():
    assert DYADICS.prefix(4) == DyadicEnumeration().prefix(4)
