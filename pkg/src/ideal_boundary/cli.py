"""Command line: run scenario files and list the built-in examples.

    ideal-boundary list
    ideal-boundary example square_hv > square.json
    ideal-boundary run square.json -o out/ [--level 4] [--budget max_ends=5000] [--json-only]
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import compactify, group_action
from .foliation_engine import (
    SectorConsistencyError,
    SpecError,
    SpecRejection,
    classify_singularities,
    parse_spec,
    sector_scan,
)
from .gallery import CATALOG, list_builtins, load_builtin
from .render import disc_svg

SCENARIO_SCHEMA = "ideal-boundary.scenario/1"
ANALYSIS_SCHEMA = "ideal-boundary.analysis/1"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_SPEC = 4
EXIT_BUDGET = 5

ANALYSES = ("chart", "sectors", "center_like", "coincidence", "action")
DEFAULT_BUDGETS = {"max_ends": 20000, "depth": 8, "center_depth": 3}
DEFAULT_LEVEL = 3


class ScenarioError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# scenario files


def validate_scenario(data) -> dict:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    if data.get("schema") != SCENARIO_SCHEMA:
        raise ScenarioError(f"schema must be {SCENARIO_SCHEMA!r}")
    known = {"schema", "name", "builtin", "only", "specs", "window", "seeds", "level", "budgets",
             "generators", "analyses", "outputs", "params"}
    extra = set(data) - known
    if extra:
        raise ScenarioError(f"unknown fields: {sorted(extra)}")
    if ("builtin" in data) == ("specs" in data):
        raise ScenarioError("give exactly one of 'builtin' and 'specs'")
    if "builtin" in data and data["builtin"] not in CATALOG:
        raise ScenarioError(f"unknown built-in {data['builtin']!r}")
    if "specs" in data:
        specs = data["specs"]
        if not isinstance(specs, dict) or not specs:
            raise ScenarioError("'specs' maps foliation labels to {'path'} or {'text'}")
        for label, s in specs.items():
            if not isinstance(s, dict) or len(set(s) & {"path", "text"}) != 1:
                raise ScenarioError(f"spec {label!r} needs exactly one of 'path', 'text'")
        w = data.get("window")
        if not (isinstance(w, list) and len(w) == 4 and all(isinstance(v, (int, float)) for v in w)):
            raise ScenarioError("spec scenarios need 'window': [xmin, xmax, ymin, ymax]")
    level = data.get("level", DEFAULT_LEVEL)
    if not isinstance(level, int) or not 1 <= level <= 8:
        raise ScenarioError("'level' must be an integer in 1..8")
    analyses = data.get("analyses", ["chart"])
    if not isinstance(analyses, list) or any(a not in ANALYSES for a in analyses):
        raise ScenarioError(f"'analyses' must be a list drawn from {list(ANALYSES)}")
    budgets = data.get("budgets", {})
    if not isinstance(budgets, dict) or any(k not in DEFAULT_BUDGETS for k in budgets):
        raise ScenarioError(f"'budgets' keys must be among {sorted(DEFAULT_BUDGETS)}")
    if any(not isinstance(v, int) or v < 0 for v in budgets.values()):
        raise ScenarioError("budgets are non-negative integers")
    outputs = data.get("outputs", {})
    if not isinstance(outputs, dict) or any(k not in ("chart", "analysis", "svg") for k in outputs):
        raise ScenarioError("'outputs' keys must be among chart, analysis, svg")
    return data


def builtin_scenario(name: str) -> dict:
    """Default scenario for a built-in example."""
    b = load_builtin(name)
    analyses = ["chart", "sectors", "center_like"]
    if len(b.foliations) >= 2:
        analyses.append("coincidence")
    if b.generators() or b.circle_maps():
        analyses.append("action")
    if not b.foliations:
        analyses = ["action"]
    return {"schema": SCENARIO_SCHEMA, "name": name, "builtin": name, "level": DEFAULT_LEVEL,
            "analyses": analyses}


# ---------------------------------------------------------------------------
# running


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and v == float("inf"):
        return "inf"
    return v


def _family(data, base: Path, level: int, budgets: dict):
    """(FamilyChart or None, builtin or None, extra analysis fields)."""
    if "builtin" in data:
        b = load_builtin(data["builtin"], **data.get("params", {}))
        if data.get("only"):
            b = b.restrict(data["only"]) if hasattr(b, "restrict") else type(b)(only=data["only"])
        if not b.foliations:
            return None, b, {}
        n = len(b.ends(level + 2))
        if n > budgets["max_ends"]:
            raise BudgetExhausted(f"{n} sampled ends at level {level + 2} exceed max_ends={budgets['max_ends']}")
        return compactify.chart_for_builtin(b, level), b, {}
    specs = {}
    for label, s in sorted(data["specs"].items()):
        text = s["text"] if "text" in s else (base / s["path"]).read_text()
        spec = parse_spec(text)
        classify_singularities(spec, tuple(data["window"]))
        specs[label] = spec
    n = data.get("seeds", 7)
    fc, harvest = compactify.spec_family_chart(specs, tuple(data["window"]), n=n)
    if len(fc.ends) > budgets["max_ends"]:
        raise BudgetExhausted(f"{len(fc.ends)} ends exceed max_ends={budgets['max_ends']}")
    return fc, None, {"excluded": [list(x) for x in harvest.excluded]}


def _chart_summary(fc) -> dict:
    members = fc.chart.class_members()
    return {
        "foliations": fc.foliations,
        "ends": len(fc.ends),
        "classes": len(members),
        "blocks": [{"classes": [b.classes[0], b.classes[-1]], "count": len(b.classes),
                    "foliations": b.foliations} for b in fc.blocks],
        "gaps": [{"angle": g.angle, "between": [g.before, g.after]} for g in fc.gaps],
        "gap_classes": fc.gap_classes,
        "extension_agrees": fc.extension_agrees,
    }


def _action(b, budgets) -> dict:
    out = {}
    depth = budgets["depth"]
    maps = b.circle_maps()
    if maps:
        probe = group_action.orbit_density_probe(maps, 0.1, depth)
        nest = group_action.nesting_search((0.4, 0.6), maps, min(depth, 4))
        out["orbit"] = probe.to_dict()
        out["nesting"] = {"found": nest.found, "word": nest.name, "fixed_point": nest.fixed_point}
        out["_orbit_angles"] = probe.final_angles
    gens = b.generators()
    if gens:
        level = 2
        ends = b.ends(level)
        picks = [ends[0], ends[len(ends) // 3], ends[2 * len(ends) // 3]]
        out["orbit_probes"] = [group_action.orbit_density_probe(gens, e, depth, b).to_dict() for e in picks]
        out["identity_at_infinity"] = {
            g.name: group_action.identity_at_infinity_test(g, b, level).identity for g in gens}
        leaf = next(e.leaf for e in ends if e.side == "+")
        nest = group_action.nesting_search(leaf, gens, min(depth, 3), b, level)
        out["nesting"] = {"leaf": str(leaf), "found": nest.found, "word": nest.name,
                          "words_tested": nest.words_tested}
    return out


def run_scenario(data: dict, base: Path, outdir: Path, level=None, budgets=None, json_only=False) -> dict:
    data = validate_scenario(data)
    level = level if level is not None else data.get("level", DEFAULT_LEVEL)
    bud = dict(DEFAULT_BUDGETS)
    bud.update(data.get("budgets", {}))
    bud.update(budgets or {})
    analyses = data.get("analyses", ["chart"])
    fc, b, extra = _family(data, base, level, bud)

    analysis = {"schema": ANALYSIS_SCHEMA, "scenario": data.get("name", ""), "level": level,
                "budgets": bud}
    analysis.update(extra)
    if fc is not None:
        analysis["chart"] = _chart_summary(fc)
        if "sectors" in analyses:
            try:
                reps = sector_scan(fc.ends, fc.chart)
                analysis["sectors"] = [{"class": r.corner_class, "ends": r.ordered_ends, "sectors": r.sectors}
                                       for r in reps]
            except SectorConsistencyError as exc:
                analysis["sectors"] = {"error": str(exc)}
        if "center_like" in analyses:
            rep = compactify.center_like_scan(fc, bud["center_depth"])
            analysis["center_like"] = [{"angle": p["angle"], "gap": p["gap"]} for p in rep.points]
        if "coincidence" in analyses and len(fc.foliations) >= 2:
            A, B = fc.foliations[:2]
            res = compactify.chart_coincidence_test(fc, A, B)
            analysis["coincidence"] = {"pair": [A, B], "coincide": res.coincide,
                                       "split_groups": len(res.split_intervals)}
    orbit_angles = None
    if "action" in analyses and b is not None:
        act = _action(b, bud)
        orbit_angles = act.pop("_orbit_angles", None)
        analysis["action"] = act

    outdir.mkdir(parents=True, exist_ok=True)
    names = {"chart": "chart.json", "analysis": "analysis.json", "svg": "disc.svg"}
    names.update(data.get("outputs", {}))
    written = []
    if fc is not None:
        (outdir / names["chart"]).write_text(fc.chart.to_json() + "\n")
        written.append(names["chart"])
    (outdir / names["analysis"]).write_text(json.dumps(_plain(analysis), indent=2, sort_keys=True) + "\n")
    written.append(names["analysis"])
    if not json_only:
        (outdir / names["svg"]).write_bytes(disc_svg(fc, data.get("name", ""), orbit_angles))
        written.append(names["svg"])
    analysis["written"] = written
    return analysis


def _parse_budgets(items) -> dict:
    out = {}
    for item in items or ():
        k, sep, v = item.partition("=")
        if not sep or k not in DEFAULT_BUDGETS or not v.isdigit():
            raise ScenarioError(f"bad --budget {item!r}; use key=int with key in {sorted(DEFAULT_BUDGETS)}")
        out[k] = int(v)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ideal-boundary", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("-o", "--output-dir", type=Path, default=Path("out"))
    p_run.add_argument("--level", type=int, default=None, help="grid level override")
    p_run.add_argument("--budget", action="append", metavar="KEY=N", help="budget override, repeatable")
    p_run.add_argument("--json-only", action="store_true", help="skip the SVG")
    sub.add_parser("list", help="list built-in examples")
    p_ex = sub.add_parser("example", help="print the default scenario of a built-in")
    p_ex.add_argument("name")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name, desc in list_builtins():
            print(f"{name:20s} {desc}")
        return EXIT_OK
    if args.command == "example":
        if args.name not in CATALOG:
            print(f"unknown built-in {args.name!r}", file=sys.stderr)
            return EXIT_USAGE
        print(json.dumps(builtin_scenario(args.name), indent=2))
        return EXIT_OK

    try:
        data = json.loads(args.scenario.read_text())
        result = run_scenario(data, args.scenario.parent, args.output_dir, args.level,
                              _parse_budgets(args.budget), args.json_only)
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (SpecError, SpecRejection) as exc:
        print(f"spec rejected: {exc}", file=sys.stderr)
        for p in getattr(exc, "points", ()):
            print(f"  {p}", file=sys.stderr)
        return EXIT_SPEC
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    print(f"wrote {', '.join(result['written'])} to {args.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
