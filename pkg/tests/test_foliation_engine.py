import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ideal_boundary.compactify import chart_for_builtin
from ideal_boundary.foliation_engine import (
    EndRecord,
    FoliationSpec,
    Poly,
    SectorConsistencyError,
    SingularTerminus,
    SpecError,
    SpecRejection,
    TransverseSegment,
    UnknownTerminus,
    certify_transverse,
    classify_singularities,
    crossing_counts,
    detect_nonseparated,
    format_spec,
    integrate_full_leaf,
    integrate_leaf,
    interleaving_ok,
    parse_spec,
    sector_scan,
    transverse_crossing_count,
)
from ideal_boundary.gallery import square_hv
from ideal_boundary.ray_geometry import Ray, exit_angle

SADDLE = parse_spec("schema ideal-boundary.foliation/1\nP 1 0 1\nQ 0 1 -1\nsingularity 0 0 4\n")
HORIZONTAL = parse_spec("schema ideal-boundary.foliation/1\nP 0 0 1\n")


def test_saddle_is_classified():
    (s,) = classify_singularities(SADDLE)
    assert s.k == 4 and s.kind == "hyperbolic-saddle"
    assert np.allclose(s.point, (0, 0), atol=1e-12)
    assert np.allclose(s.eigenvalues, (1.0, -1.0))
    assert np.allclose(np.abs(s.eigenvectors), [[1, 0], [0, 1]])


def test_nonvanishing_field_has_no_singularities():
    assert classify_singularities(HORIZONTAL) == []


def test_undeclared_and_node_zeros_are_all_listed():
    # (x^2 - 1, -y): a saddle at (1, 0) and a node at (-1, 0), none declared
    spec = FoliationSpec(Poly({(2, 0): 1, (0, 0): -1}), Poly({(0, 1): -1}))
    with pytest.raises(SpecRejection) as info:
        classify_singularities(spec)
    pts = sorted(tuple(round(c, 9) for c in p) for p in info.value.points)
    assert pts == [(-1.0, 0.0), (1.0, 0.0)]


def test_focus_is_rejected():
    spec = FoliationSpec(Poly({(0, 1): -1, (1, 0): 1}), Poly({(1, 0): 1, (0, 1): 1}), singularities=[(0, 0, 4)])
    with pytest.raises(SpecRejection, match="focus"):
        classify_singularities(spec)


def test_horizontal_leaf_is_a_ray():
    ray = integrate_leaf(HORIZONTAL, (0.0, 0.0), "+")
    assert isinstance(ray, Ray)
    assert np.allclose(ray.points[:, 1], 0.0)
    assert math.isclose(ray.points[-1, 0], 50.0, rel_tol=1e-9)
    assert ray.has_escape_certificate()


def test_saddle_leaf_approaches_the_axis():
    ray = integrate_leaf(SADDLE, (1.0, 1.0), "+")
    x, y = ray.points[-1]
    # the leaf is xy = 1
    assert x > 49 and abs(y) < 0.03
    assert np.allclose(ray.points[:, 0] * ray.points[:, 1], 1.0, atol=1e-6)


def test_stable_separatrix_ends_at_the_saddle():
    end = integrate_leaf(SADDLE, (0.0, 1.0), "+")
    assert isinstance(end, SingularTerminus)
    assert end.point == (0.0, 0.0)
    assert math.isclose(end.direction, 0.25, abs_tol=1e-6)
    assert isinstance(integrate_leaf(SADDLE, (0.0, 1.0), "-"), Ray)


def test_closed_leaf_is_reported():
    rotation = FoliationSpec(Poly({(0, 1): -1}), Poly({(1, 0): 1}))
    end = integrate_leaf(rotation, (1.0, 0.0), "+")
    assert isinstance(end, UnknownTerminus) and "closes" in end.reason


def test_seed_in_basin_is_refused():
    with pytest.raises(ValueError):
        integrate_leaf(SADDLE, (0.0, 0.0), "+")


def test_crossing_count_examples():
    seg = TransverseSegment.straight((0, -1), (0, 1))
    assert transverse_crossing_count(seg, np.array([[-5.0, 0.0], [5.0, 0.0]])).count == 1
    assert transverse_crossing_count(seg, np.array([[-5.0, 3.0], [5.0, 3.0]])).count == 0
    on_saddle = TransverseSegment.straight((1, -1), (1, 1))
    xs = np.linspace(0.05, 10, 400)
    report = transverse_crossing_count(on_saddle, np.column_stack([xs, 0.5 / xs]))
    assert report.count == 1 and not report.violation
    assert np.allclose(report.points[0], (1.0, 0.5), atol=1e-4)


def test_double_crossing_is_a_violation():
    seg = TransverseSegment.straight((0, -1), (0, 1))
    zigzag = np.array([[-1.0, 0.0], [1.0, 0.2], [-1.0, 0.4]])
    assert transverse_crossing_count(seg, zigzag).violation
    reports = crossing_counts(seg, [zigzag, np.array([[10.0, 0.0], [11.0, 0.0]])])
    assert [r.count for r in reports] == [2, 0]


def test_certify_transverse():
    ok = certify_transverse(SADDLE, TransverseSegment.straight((1, -1), (1, 1)))
    assert ok.ok and ok.sign == 1 and math.isclose(ok.margin, 1.0, rel_tol=1e-9)
    along = certify_transverse(HORIZONTAL, TransverseSegment.straight((-1, 0), (1, 0)))
    assert not along.ok
    through = certify_transverse(SADDLE, TransverseSegment.straight((-1, 1), (1, -1)))
    assert not through.ok


def test_saddle_transversal_finds_the_stable_separatrix():
    seg = TransverseSegment.straight((1, -1), (1, 1))
    entries = detect_nonseparated(SADDLE, seg, "-")
    assert [(e.t_star, e.approach, e.side) for e in entries] == [(0.0, "above", "left"), (0.0, "below", "left")]
    assert all(e.singular for e in entries)
    # from above the leaves run up the y axis, from below down it
    assert math.isclose(entries[0].limit_key, 0.25, abs_tol=1e-6)
    assert math.isclose(entries[1].limit_key, 0.75, abs_tol=1e-6)
    assert ("separatrix", (0.0, 0.0), 0.25) in entries[0].partners
    assert ("separatrix", (0.0, 0.0), 0.75) in entries[1].partners
    assert detect_nonseparated(SADDLE, seg, "+") == []


def test_spec_round_trip():
    text = "schema ideal-boundary.foliation/1\nname demo\norientation -\nP 2 0 1/3\nP 0 0 -1\nQ 0 1 2\n"
    spec = parse_spec(text)
    assert spec.orientation == -1 and spec.name == "demo"
    assert parse_spec(format_spec(spec)) == spec
    assert spec.field(3.0, 1.0) == (-2.0, -2.0)


def test_spec_errors():
    with pytest.raises(SpecError, match="schema"):
        parse_spec("P 0 0 1\n")
    with pytest.raises(SpecError, match="line 2"):
        parse_spec("schema ideal-boundary.foliation/1\nP 0 0 x\n")
    with pytest.raises(SpecError, match="unknown"):
        parse_spec("schema ideal-boundary.foliation/1\nR 0 0 1\n")


def test_trivial_foliation_has_no_sectors():
    fc = chart_for_builtin(square_hv(only=["H"]), 3)
    assert sector_scan(fc.ends, fc.chart) == []


def _stub_chart(classes):
    members = {}
    for i, c in classes.items():
        members.setdefault(c, []).append(i)
    return SimpleNamespace(class_members=lambda: members)


def test_sector_scan_interleaving():
    ends = [EndRecord(0, "H", 0, "+", 0.0), EndRecord(1, "H", 1, "+", 1.0), EndRecord(2, "V", 0, "+", 1.5),
            EndRecord(3, "H", 2, "+", 2.0), EndRecord(4, "H", 3, "+", 3.0)]
    (rep,) = sector_scan(ends, _stub_chart({0: 0, 1: 1, 2: 1, 3: 1, 4: 2}))
    assert rep.corner_class == 1 and rep.ordered_ends == [1, 2, 3]
    assert rep.sectors == [(1, 3)]
    by_id = {e.id: e for e in ends}
    assert interleaving_ok(rep, by_id, "H", "V")
    # two H ends with no V end between them
    (bare,) = sector_scan(ends[:2] + ends[3:], _stub_chart({0: 0, 1: 1, 3: 1, 4: 2}))
    assert not interleaving_ok(bare, by_id, "H", "V")


def test_sector_scan_rejects_split_runs():
    ends = [EndRecord(i, "H", i, "+", float(i)) for i in range(3)]
    with pytest.raises(SectorConsistencyError):
        sector_scan(ends, _stub_chart({0: 0, 2: 0, 1: 1}))


@settings(max_examples=8, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.sampled_from([1, -1]), st.sampled_from([1, -1]))
def test_saddle_leaves_are_not_compact(x, y, sx, sy):
    leaf = integrate_full_leaf(SADDLE, (sx * x, sy * y), max_radius=20.0)
    assert isinstance(leaf.plus, Ray) and isinstance(leaf.minus, Ray)
    # the two ends of one leaf go out along perpendicular half-axes
    a, b = exit_angle(leaf.plus, 10.0), exit_angle(leaf.minus, 10.0)
    assert abs(abs(math.remainder(a - b, 1.0)) - 0.25) < 0.05


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                       st.fractions(min_value=-5, max_value=5, max_denominator=7), max_size=5),
       st.sampled_from([1, -1]))
def test_format_then_parse_is_identity(coeffs, orientation):
    spec = FoliationSpec(Poly(coeffs), Poly({(0, 0): 1}), orientation)
    back = parse_spec(format_spec(spec))
    assert back.P == spec.P and back.Q == spec.Q and back.orientation == orientation
