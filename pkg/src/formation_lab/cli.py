"""Command line front end: scenario files, simulation runs and exported reports.

Scenario files are JSON. Trajectories go to CSV, reports to JSON and
snapshots to SVG. Exit codes: 0 success, 1 invalid input, 2 numerical
failure.
"""
import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import geometry
from .dynamics import (Gradient, Integration, LinearGain, ObjectiveMode, ObservationMode,
                       PolynomialCustom, ScalarScenario, Scenario, TriangleCyclic, integrate,
                       vector_field)
from .equilibria import classify, find_equilibria, partition
from .errors import ConfigError, FormationError, NonFinite
from .rigidity import (FormationGraph, Framework, is_infinitesimally_rigid,
                       is_minimally_rigid, rigidity_rank)
from .robustness import PerturbationSpec, probe
from .stability import MonteCarlo, assess, default_bounds, design_candidates, sample_initial

_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_edge = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_bounds = {"anyOf": [{"type": "null"},
                     {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "target": {"type": "array", "items": _point},
        "h_edges": {"type": "array", "items": _edge},
        "delta_edges": {"type": "array", "items": _edge},
        "obs_mode": {"enum": [m.value for m in ObservationMode]},
        "obj_mode": {"enum": [m.value for m in ObjectiveMode]},
        "law": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["LinearGain", "Gradient", "TriangleCyclic", "PolynomialCustom"]},
                "params": {"type": "object"},
            },
        },
        "system": {
            "type": "object", "additionalProperties": False, "required": ["coeffs"],
            "properties": {
                "kind": {"const": "scalar_polynomial"},
                "coeffs": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "design": {"type": "array", "items": {"type": "number"}},
            },
        },
        "integration": {
            "type": "object", "additionalProperties": False,
            "properties": {"dt": {"type": "number", "exclusiveMinimum": 0},
                           "T": {"type": "number", "exclusiveMinimum": 0}},
        },
        "mc": {
            "type": "object", "additionalProperties": False,
            "properties": {"count": {"type": "integer", "minimum": 1}, "bounds": _bounds,
                           "seed": {"type": "integer", "minimum": 0}},
        },
        "robustness": {
            "type": "object", "additionalProperties": False,
            "properties": {"epsilon": {"type": "number", "minimum": 0},
                           "degree": {"type": "integer", "minimum": 0},
                           "trials": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0}},
        },
    },
    "oneOf": [{"required": ["system"], "not": {"anyOf": [{"required": [k]} for k in (
                  "n", "target", "h_edges", "delta_edges", "obs_mode", "obj_mode", "law")]}},
              {"required": ["n", "target", "h_edges", "law"], "not": {"required": ["system"]}}],
}


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    scenario: object            # Scenario or ScalarScenario
    mc: MonteCarlo
    robustness: PerturbationSpec

    @property
    def scalar(self):
        return isinstance(self.scenario, ScalarScenario)


def _law_from(doc):
    kind, params = doc["kind"], dict(doc.get("params", {}))
    try:
        if kind == "LinearGain":
            law = LinearGain(tuple(params.pop("gains")))
        elif kind == "PolynomialCustom":
            law = PolynomialCustom(tuple(params.pop("terms")), int(params.pop("max_degree", 4)))
        else:
            law = Gradient() if kind == "Gradient" else TriangleCyclic()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for law {kind}: {exc}") from exc
    if params:
        raise ConfigError(f"unknown law parameters: {sorted(params)}")
    return law


def _law_to(law):
    if isinstance(law, LinearGain):
        return {"kind": "LinearGain", "params": {"gains": list(law.gains)}}
    if isinstance(law, PolynomialCustom):
        terms = [[[c, list(e)] for c, e in edge] for edge in law.terms]
        return {"kind": "PolynomialCustom", "params": {"terms": terms, "max_degree": law.max_degree}}
    return {"kind": type(law).__name__, "params": {}}


def parse_scenario(doc):
    """Validate a JSON document and build a :class:`ScenarioFile`."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid scenario file: {exc.message}") from exc
    integ = Integration(**doc.get("integration", {}))
    mc = doc.get("mc", {})
    bounds = mc.get("bounds")
    mc = MonteCarlo(int(mc.get("count", 1000)),
                    None if bounds is None else (float(bounds[0]), float(bounds[1])),
                    int(mc.get("seed", 0)))
    rb = doc.get("robustness", {})
    rb = PerturbationSpec(float(rb.get("epsilon", 1e-3)), int(rb.get("degree", 2)),
                          int(rb.get("trials", 50)), int(rb.get("seed", 0)))
    if "system" in doc:
        sysd = doc["system"]
        s = ScalarScenario(tuple(sysd["coeffs"]), tuple(sysd.get("design", ())), integ)
        return ScenarioFile(s, mc, rb)
    n = doc["n"]
    h = FormationGraph(n, tuple(map(tuple, doc["h_edges"])))
    dg = FormationGraph(n, tuple(map(tuple, doc.get("delta_edges", doc["h_edges"]))))
    s = Scenario(np.array(doc["target"], dtype=float).reshape(-1, 2), h, dg,
                 ObservationMode(doc.get("obs_mode", "RelativePosition")),
                 ObjectiveMode(doc.get("obj_mode", "RangeOnly")),
                 _law_from(doc["law"]), integ)
    vector_field(s)  # law/graph compatibility is checked here
    return ScenarioFile(s, mc, rb)


def serialize_scenario(sf):
    s = sf.scenario
    doc = {}
    if sf.scalar:
        doc["system"] = {"kind": "scalar_polynomial", "coeffs": list(s.coeffs),
                         "design": list(s.design)}
    else:
        doc.update(n=s.n, target=s.target.tolist(),
                   h_edges=[list(e) for e in s.h_graph.edges],
                   delta_edges=[list(e) for e in s.delta_graph.edges],
                   obs_mode=s.obs_mode.value, obj_mode=s.obj_mode.value, law=_law_to(s.law))
    doc["integration"] = {"dt": s.integration.dt, "T": s.integration.T}
    doc["mc"] = {"count": sf.mc.count,
                 "bounds": None if sf.mc.bounds is None else list(sf.mc.bounds),
                 "seed": sf.mc.seed}
    rb = sf.robustness
    doc["robustness"] = {"epsilon": rb.epsilon, "degree": rb.basis_degree,
                         "trials": rb.trials, "seed": rb.seed}
    return doc


def bundled_scenarios():
    root = resources.files("formation_lab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(path):
    """Read a scenario file; bare names such as ``triangle`` resolve to bundled files."""
    p = Path(path)
    if not p.exists():
        name = p.name if p.name.endswith(".json") else p.name + ".json"
        res = resources.files("formation_lab") / "scenarios" / name
        if p.parent != Path(".") or not res.is_file():
            raise ConfigError(f"no such scenario file: {path}")
        text = res.read_text()
    else:
        text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_scenario(doc)


# exporters -----------------------------------------------------------------

def _g(v):
    return format(float(v), ".17g")


def write_trajectory_csv(path, traj):
    """Header comment with the terminal speed, then ``t, x1x, x1y, ...`` rows."""
    X = traj.states.reshape(len(traj.times), -1)
    if traj.states.ndim == 3:
        names = [f"x{i + 1}{c}" for i in range(traj.states.shape[1]) for c in "xy"]
    else:
        names = [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        fh.write(f"# terminal_speed={_g(traj.terminal_speed)}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        for t, row in zip(traj.times, X):
            w.writerow([_g(t)] + [_g(v) for v in row])


def read_trajectory_csv(path):
    """Inverse of :func:`write_trajectory_csv`: ``(times, states_flat, terminal_speed)``."""
    with open(path) as fh:
        first = fh.readline()
        speed = float(first.split("=", 1)[1])
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float)
    return data[:, 0], data[:, 1:], speed


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj):
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def framework_svg(config, edges, paths=None, size=480, margin=40):
    """SVG snapshot: agents as dots, edge ``(i, j)`` as an arrow from i to j.

    ``paths`` optionally holds trajectories ``(T, n, 2)`` drawn as thin polylines.
    """
    P = geometry.as_config(config)
    pts = P if paths is None else np.vstack([P, np.asarray(paths).reshape(-1, 2)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-12)
    scale = (size - 2 * margin) / span

    def xy(p):
        return margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           '<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="8" '
           'markerHeight="8" orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" '
           'fill="black"/></marker></defs>',
           '<rect width="100%" height="100%" fill="white"/>']
    if paths is not None:
        Q = np.asarray(paths)
        for i in range(Q.shape[1]):
            line = " ".join("%.2f,%.2f" % xy(p) for p in Q[:, i])
            out.append(f'<polyline points="{line}" fill="none" stroke="#999" stroke-width="1"/>')
    r = 5
    for i, j in edges:
        (x1, y1), (x2, y2) = xy(P[i - 1]), xy(P[j - 1])
        L = math.hypot(x2 - x1, y2 - y1)
        if L < 2 * r:
            continue
        ux, uy = (x2 - x1) / L, (y2 - y1) / L
        out.append(f'<line x1="{x1 + r * ux:.2f}" y1="{y1 + r * uy:.2f}" x2="{x2 - r * ux:.2f}" '
                   f'y2="{y2 - r * uy:.2f}" stroke="black" stroke-width="1.5" '
                   f'marker-end="url(#arrow)"/>')
    for k, p in enumerate(P):
        x, y = xy(p)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="black"/>')
        out.append(f'<text x="{x + 7:.2f}" y="{y - 7:.2f}" font-size="12">{k + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# commands ------------------------------------------------------------------

def _initial_state(sf, source, seed):
    s = sf.scenario
    if source is None or source == "target":
        if sf.scalar:
            if not s.design:
                raise ConfigError("scalar scenario has no design point to start from")
            return np.array([s.design[0]])
        return s.target_config
    if source.startswith("random:"):
        try:
            rs = int(source.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad seed in {source!r}") from exc
        rs = seed if seed is not None else rs
        bounds = sf.mc.bounds if sf.mc.bounds is not None else default_bounds(s)
        if sf.scalar:
            return sample_initial(1, bounds, rs, 1, dim=1).reshape(1)
        return sample_initial(s.n, bounds, rs, 1)[0]
    p = Path(source)
    if not p.exists():
        raise ConfigError(f"no such initial-state file: {source}")
    try:
        x0 = np.array(json.loads(p.read_text()), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"{source}: expected a JSON array of numbers") from exc
    expected = 1 if sf.scalar else 2 * s.n
    if x0.size != expected:
        raise ConfigError(f"{source}: expected {expected} numbers, got {x0.size}")
    return x0.reshape(-1) if sf.scalar else x0.reshape(-1, 2)


def _with_seed(sf, seed):
    if seed is None:
        return sf
    return ScenarioFile(sf.scenario, replace(sf.mc, seed=seed), replace(sf.robustness, seed=seed))


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def cmd_rigidity(sf, args):
    if sf.scalar:
        raise ConfigError("rigidity needs a formation scenario")
    s = sf.scenario
    fw = Framework(s.delta_graph, s.target_config)
    rank = rigidity_rank(fw)
    inf = is_infinitesimally_rigid(fw)
    mini = is_minimally_rigid(fw)
    # verdicts are the command's output, so they print even with --quiet
    print(f"rank: {rank}")
    print(f"infinitesimally rigid: {str(inf).lower()}")
    print(f"minimally rigid: {str(mini).lower()}")
    write_json(args.out / "rigidity.json", {
        "rank": rank, "infinitesimally_rigid": inf, "minimally_rigid": mini})


def cmd_simulate(sf, args):
    x0 = _initial_state(sf, args.x0, args.seed)
    traj = integrate(sf.scenario, x0)
    path = args.out / "trajectory.csv"
    write_trajectory_csv(path, traj)
    _say(args, f"wrote {path} ({len(traj.times)} rows, terminal speed {traj.terminal_speed:.3g})")


def cmd_equilibria(sf, args):
    s = sf.scenario
    f = vector_field(s)
    seeds = [np.ravel(c) for c in design_candidates(s)]
    bounds = sf.mc.bounds if sf.mc.bounds is not None else default_bounds(s)
    if sf.scalar:
        seeds += list(sample_initial(1, bounds, sf.mc.seed, args.seeds, dim=1).reshape(-1, 1))
    else:
        seeds += list(sample_initial(s.n, bounds, sf.mc.seed, args.seeds).reshape(args.seeds, -1))
    recs = partition([classify(f, y) for y in find_equilibria(f, seeds)], s)
    path = args.out / "equilibria.json"
    write_json(path, [r.to_dict() for r in recs])
    _say(args, f"wrote {path} ({len(recs)} equilibria)")


def cmd_typea(sf, args):
    rep = assess(sf.scenario, sf.mc)
    path = args.out / "typea.json"
    write_json(path, rep.to_dict())
    _say(args, f"to design {rep.frac_to_design:.3f}, to stable ancillary "
               f"{rep.frac_to_ancillary_stable:.3f}, unsettled {rep.frac_nonconvergent:.3f}")
    _say(args, " ".join(f"{k}={str(v).lower()}" for k, v in rep.verdicts.items()))
    _say(args, f"wrote {path}")


def cmd_robustness(sf, args):
    s = sf.scenario
    f = vector_field(s)
    x_star = _initial_state(sf, "target", None)
    rep = probe(f, np.ravel(x_star), sf.robustness)
    path = args.out / "robustness.json"
    write_json(path, rep.to_dict())
    _say(args, f"survived {rep.survived}/{rep.trials}, max drift {rep.max_drift:.3g}")
    _say(args, f"wrote {path}")


def cmd_plot(sf, args):
    if sf.scalar:
        raise ConfigError("plot needs a formation scenario")
    s = sf.scenario
    if args.x0 is None:
        svg = framework_svg(s.target_config, s.h_graph.edges)
    else:
        traj = integrate(s, _initial_state(sf, args.x0, args.seed))
        svg = framework_svg(traj.states[-1], s.h_graph.edges, paths=traj.states)
    path = args.out / "plot.svg"
    path.write_text(svg)
    _say(args, f"wrote {path}")


COMMANDS = {"rigidity": cmd_rigidity, "simulate": cmd_simulate, "equilibria": cmd_equilibria,
            "typea": cmd_typea, "robustness": cmd_robustness, "plot": cmd_plot}


def build_parser():
    p = argparse.ArgumentParser(prog="formation-lab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON file or bundled name "
                                         "(triangle, two-cycles, five-agent, scalar-example)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the file's seeds")
    common.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("rigidity", parents=[common], help="rank and rigidity of the target framework")
    sp = sub.add_parser("simulate", parents=[common], help="integrate and write a CSV trajectory")
    sp.add_argument("--x0", default="target", help="JSON file, random:SEED or target")
    sp = sub.add_parser("equilibria", parents=[common], help="locate and classify equilibria")
    sp.add_argument("--seeds", type=int, default=200, help="random Newton seeds")
    sub.add_parser("typea", parents=[common], help="Monte Carlo type-A assessment")
    sub.add_parser("robustness", parents=[common], help="perturbation probe at the target")
    sp = sub.add_parser("plot", parents=[common], help="SVG of the target or a trajectory")
    sp.add_argument("--x0", default=None, help="simulate from this start before drawing")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sf = _with_seed(load_scenario(args.scenario), args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](sf, args)
    except NonFinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
