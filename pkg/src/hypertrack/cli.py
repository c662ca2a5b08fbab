"""Command-line entry point.

Scenario files are plain ``key = value`` lines.  Values are Python literals
(numbers, quoted strings, lists) or bare words; ``#`` starts a comment and a
``[name]`` header starts a new scenario::

    [burgers_shock]
    system = burgers
    initial = riemann
    u_left = [1.0]
    u_right = [0.0]
    epsilon = [0.1, 0.05]
    t_end = 1.0

``initial`` is ``riemann`` (``u_left``, ``u_right``, ``x0``), ``breakpoints``
(``xs``, ``states``), ``random`` (``jumps``, ``amplitude``, seeded by ``seed``)
or ``sine`` (``amplitude`` times a sine wave around the base state over
``x_range``).
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import HypertrackError, ParseError, ValidationError
from .front_tracking import (Breakpoints, _fmt, random_steps, simulate, write_fronts_csv, write_ledger_csv,
                             write_snapshots_csv)
from .functionals import functional_series, generation_accounting, write_functionals_csv, write_generations_csv
from .graph import default_path_families, phi_completion, write_graph_csv, write_vertical_segments_csv
from .nonlinearity import nd_check
from .oracles import oleinik_riemann
from .riemann import profile_rows, riemann_summary, solve_riemann
from .system import BUILTIN_NAMES, builtin
from .wave_curves import wave_curve

CHECK_LEVELS = ("off", "invariants", "full")
OUTPUTS = ("fronts", "snapshots", "ledger", "functionals", "generations")
INITIAL_KINDS = ("riemann", "breakpoints", "random", "sine")


@dataclass
class Scenario:
    name: str = "scenario"
    system: str = "burgers"
    params: list = field(default_factory=list)
    pressure: str = "power"
    initial: str = "riemann"
    u_left: list = field(default_factory=lambda: [1.0])
    u_right: list = field(default_factory=lambda: [0.0])
    x0: float = 0.0
    xs: list = field(default_factory=list)
    states: list = field(default_factory=list)
    jumps: int = 10
    amplitude: float = 0.5
    x_range: list = field(default_factory=lambda: [0.0, 1.0])
    epsilon: list = field(default_factory=lambda: [0.1])
    delta: float | None = None
    t_end: float = 1.0
    outputs: list = field(default_factory=lambda: ["fronts", "snapshots", "ledger", "functionals"])
    seed: int = 0
    check: str = "off"
    snapshots: int = 5
    points: int = 401

    def build_system(self):
        options = {"pressure": self.pressure} if self.system == "p_system" else {}
        return builtin(self.system, self.params, **options)

    def initial_data(self, system) -> Breakpoints:
        if self.initial == "riemann":
            return Breakpoints([self.x0], [self.u_left, self.u_right])
        if self.initial == "breakpoints":
            return Breakpoints(list(self.xs), list(self.states))
        if self.initial == "random":
            return random_steps(system, self.jumps, self.amplitude, self.seed, tuple(self.x_range))
        base = system.base_state
        a, b = self.x_range
        lhat = system.lhat / np.dot(system.lhat, system.lhat)
        cells = max(int(math.ceil(10.0 / min(self.epsilon))), 2)
        edges = np.linspace(a, b, cells + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        states = [base] + [base + self.amplitude * math.sin(2 * math.pi * (x - a) / (b - a)) * lhat
                           for x in mids] + [base]
        return Breakpoints(list(edges), states)


_KEYS = {f.name: f for f in fields(Scenario)}
_BARE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


def _parse_value(text: str, line: int, column: int):
    text = text.strip()
    if not text:
        raise ParseError("missing value", line, column)
    if text in ("none", "None", "null"):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if _BARE.match(text):
            return text
        if text.startswith("[") and text.endswith("]"):
            items = [item.strip() for item in text[1:-1].split(",") if item.strip()]
            if all(_BARE.match(item) for item in items):
                return items
        raise ParseError(f"cannot read value {text!r}", line, column) from None


def _coerce(name: str, value, line: int):
    if name in ("epsilon",) and isinstance(value, (int, float)):
        value = [value]
    if name in ("u_left", "u_right") and isinstance(value, (int, float)):
        value = [value]
    if name in ("params", "xs", "states", "x_range", "epsilon", "outputs", "u_left", "u_right"):
        if isinstance(value, tuple):
            value = list(value)
        if not isinstance(value, list):
            raise ParseError(f"{name} must be a list", line, 1)
        if name == "states":
            value = [[float(v)] if isinstance(v, (int, float)) else [float(c) for c in v] for v in value]
        elif name == "outputs":
            value = [str(v) for v in value]
        else:
            value = [float(v) for v in value]
        return value
    if name in ("x0", "amplitude", "t_end") or (name == "delta" and value is not None):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError(f"{name} must be a number", line, 1)
        return float(value)
    if name in ("jumps", "seed", "snapshots", "points"):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ParseError(f"{name} must be an integer", line, 1)
        return value
    if name in ("name", "system", "pressure", "initial", "check"):
        if not isinstance(value, str):
            raise ParseError(f"{name} must be a word or a string", line, 1)
    return value


def validate(sc: Scenario) -> Scenario:
    problems = []
    if sc.system not in BUILTIN_NAMES:
        problems.append(f"unknown system {sc.system!r}")
    if sc.initial not in INITIAL_KINDS:
        problems.append(f"initial must be one of {', '.join(INITIAL_KINDS)}")
    if not sc.epsilon or any(e <= 0 for e in sc.epsilon):
        problems.append("epsilon values must be positive")
    elif any(b >= a for a, b in zip(sc.epsilon, sc.epsilon[1:])):
        problems.append("epsilon values must be strictly descending")
    if sc.delta is not None and sc.epsilon:
        if sc.delta <= 0:
            problems.append("delta must be positive")
        elif sc.delta > min(sc.epsilon) ** 2 / 10.0:
            problems.append(f"delta = {sc.delta:g} must be <= min(epsilon)^2/10 = {min(sc.epsilon) ** 2 / 10:g}")
    if sc.t_end <= 0:
        problems.append("t_end must be positive")
    if sc.check not in CHECK_LEVELS:
        problems.append(f"check must be one of {', '.join(CHECK_LEVELS)}")
    bad = [o for o in sc.outputs if o not in OUTPUTS]
    if bad:
        problems.append(f"unknown outputs {', '.join(bad)}")
    if sc.initial == "breakpoints" and len(sc.states) != len(sc.xs) + 1:
        problems.append("breakpoints need exactly one more state than positions")
    if len(sc.x_range) != 2 or sc.x_range[1] <= sc.x_range[0]:
        problems.append("x_range must be [a, b] with a < b")
    if problems:
        raise ValidationError(problems)
    return sc


def parse_scenarios(text: str) -> list[Scenario]:
    """All scenarios in ``text``; keys before the first header form an unnamed scenario."""
    blocks: list[tuple[str | None, dict]] = [(None, {})]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]") or len(stripped) < 3:
                raise ParseError("malformed section header", lineno, col)
            blocks.append((stripped[1:-1].strip(), {}))
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, col)
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno, col)
        vcol = len(line) - len(value) + (len(value) - len(value.lstrip())) + 1
        section = blocks[-1][1]
        if key in section:
            raise ParseError(f"duplicate key {key!r}", lineno, col)
        section[key] = _coerce(key, _parse_value(value, lineno, vcol), lineno)
    out = []
    for name, values in blocks:
        if name is None and not values:
            continue
        if name is not None and "name" not in values:
            values["name"] = name
        out.append(validate(Scenario(**values)))
    if not out:
        raise ParseError("no scenario found", 1, 1)
    return out


def parse_scenario(text: str) -> Scenario:
    scenarios = parse_scenarios(text)
    if len(scenarios) != 1:
        raise ParseError(f"expected one scenario, found {len(scenarios)}", 1, 1)
    return scenarios[0]


def print_scenario(sc: Scenario) -> str:
    lines = [f"[{sc.name}]"]
    for f in fields(Scenario):
        if f.name == "name":
            continue
        v = getattr(sc, f.name)
        lines.append(f"{f.name} = {v!r}" if not isinstance(v, str) else f"{f.name} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


# -- subcommands -----------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _system_from_args(args):
    options = {"pressure": args.pressure} if args.system == "p_system" and args.pressure else {}
    return builtin(args.system, _floats(args.params) if args.params else [], **options)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def cmd_riemann(args) -> int:
    system = _system_from_args(args)
    sol = solve_riemann(system, _floats(args.u_left), _floats(args.u_right))
    lo, hi = sol.speed_range
    pad = max(0.5, 0.25 * (hi - lo))
    xis = np.linspace(lo - pad, hi + pad, args.points)
    out = _out_dir(args)
    _write_rows(out / "riemann_profile.csv", ["xi"] + [f"u{k + 1}" for k in range(system.n)],
                profile_rows(sol, xis))
    summary = {"system": system.name, "strengths": sol.strengths.tolist(), "packets": riemann_summary(sol),
               "intermediate_states": [s.tolist() for s in sol.intermediate_states]}
    (out / "riemann_summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


def cmd_wavecurve(args) -> int:
    system = _system_from_args(args)
    packet = wave_curve(system, args.family, _floats(args.u_left), args.m_target)
    rows = []
    for k, kind in enumerate(packet.kinds):
        ta, tb = packet.knots[k], packet.knots[k + 1]
        for t in np.linspace(ta, tb, args.points):
            m = packet.m_left + packet.direction * t
            rows.append([m] + packet.state_t(t).tolist() + [packet.speed_t(t), kind])
    _write_rows(_out_dir(args) / "wavecurve.csv", ["m"] + [f"u{k + 1}" for k in range(system.n)] +
                ["speed", "piece_kind"], rows)
    print(f"{len(packet.kinds)} pieces, inner speed variation {packet.isv:.6g}")
    return 0


def _load_scenarios(args) -> list[Scenario]:
    scenarios = parse_scenarios(Path(args.scenario).read_text())
    over = {}
    if args.epsilon:
        over["epsilon"] = _floats(args.epsilon)
    if args.delta is not None:
        over["delta"] = args.delta
    if args.t_end is not None:
        over["t_end"] = args.t_end
    if args.seed is not None:
        over["seed"] = args.seed
    if args.check is not None:
        over["check"] = args.check
    return [validate(replace(sc, **over)) for sc in scenarios]


def run_scenario(sc: Scenario, eps: float, out: Path) -> dict:
    system = sc.build_system()
    traj = simulate(system, sc.initial_data(system), eps, sc.t_end, delta=sc.delta, seed=sc.seed,
                    check=sc.check, x_range=tuple(sc.x_range))
    out.mkdir(parents=True, exist_ok=True)
    if "fronts" in sc.outputs:
        write_fronts_csv(traj, out / "fronts.csv")
    if "snapshots" in sc.outputs:
        xs = [f.x_at_birth for f in traj.fronts.values()] or [0.0]
        reach = (system.lambda_hat + 1.0) * sc.t_end
        grid = np.linspace(min(xs + list(sc.x_range)) - reach, max(xs + list(sc.x_range)) + reach, sc.points)
        write_snapshots_csv(traj, out / "snapshots.csv", np.linspace(0.0, sc.t_end, sc.snapshots), grid)
    if "ledger" in sc.outputs:
        write_ledger_csv(traj, out / "ledger.csv")
    if "functionals" in sc.outputs:
        write_functionals_csv(functional_series(traj, 1.0, 1.0 / traj.delta), out / "functionals.csv")
    if "generations" in sc.outputs:
        write_generations_csv(generation_accounting(traj), out / "generations.csv")
    last = traj.series[-1]
    summary = {"scenario": sc.name, "system": system.name, "epsilon": eps, "delta": traj.delta,
               "t_end": sc.t_end, "interactions": traj.interactions, "status": traj.status,
               "fronts_created": len(traj.fronts), "final": {k: float(v) for k, v in last.items()}}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def cmd_run(args) -> int:
    base = Path(args.out)
    for sc in _load_scenarios(args):
        for eps in sc.epsilon:
            target = base / sc.name / f"eps_{eps:g}"
            summary = run_scenario(sc, eps, target)
            print(f"{sc.name} eps={eps:g}: {summary['interactions']} interactions -> {target}")
    return 0


def cmd_nd_check(args) -> int:
    system = _system_from_args(args)
    families = [args.family] if args.family else list(range(1, system.n + 1))
    out = _out_dir(args)
    code = 0
    for j in families:
        rep = nd_check(system, j, args.points)
        header = [f"u{k + 1}" for k in range(system.n)] + [f"pi_{k + 1}" for k in range(rep.K)] + \
            ["critical_exponent"]
        _write_rows(out / f"nd_check_family{j}.csv", header, rep.rows())
        verdict = "nondegenerate" if rep.nondegenerate else "degenerate"
        print(f"family {j}: {verdict} (min over grid of max |pi| = {rep.min_max_pi:.3e})")
    return code


def cmd_graph(args) -> int:
    families = None
    base = Path(args.out)
    times = _floats(args.times)
    for sc in _load_scenarios(args):
        system = sc.build_system()
        families = default_path_families(system)
        path = families[args.path]
        for eps in sc.epsilon:
            traj = simulate(system, sc.initial_data(system), eps, sc.t_end, delta=sc.delta, seed=sc.seed,
                            x_range=tuple(sc.x_range))
            target = base / sc.name / f"eps_{eps:g}"
            target.mkdir(parents=True, exist_ok=True)
            graphs = {}
            for t in times:
                side = "+" if t in traj.event_times else None
                g = phi_completion(traj, t, path, side)
                graphs[t] = g
                write_graph_csv(g, target / f"graph_t{t:g}.csv", t)
            write_vertical_segments_csv(graphs, target / "vertical_segments.csv")
            print(f"{sc.name} eps={eps:g}: graphs at {len(times)} times -> {target}")
    return 0


def cmd_oracle(args) -> int:
    system = _system_from_args(args)
    if system.n != 1:
        print("the hull oracle covers scalar laws only", file=sys.stderr)
        return 1
    ul, ur = float(args.u_left), float(args.u_right)
    exact = oleinik_riemann(system.scalar_flux, system.scalar_speed, ul, ur, poly=system.poly)
    speeds = [s for _, _, _, a, b in exact.structure for s in (a, b)] or [0.0]
    xis = np.linspace(min(speeds) - 0.5, max(speeds) + 0.5, args.points)
    out = _out_dir(args)
    name = f"oracle_{system.name}_{ul:g}_{ur:g}.csv"
    _write_rows(out / name, ["xi", "u"], zip(xis, exact(xis)))
    print(f"wrote {out / name}")
    return 0


def cmd_accept(args) -> int:
    from .acceptance import run_battery

    numbers = [int(v) for v in args.only.split(",")] if args.only else None
    results = run_battery(numbers, quick=args.quick)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypertrack", description="Front tracking for hyperbolic systems.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def system_args(p):
        p.add_argument("--system", required=True, choices=BUILTIN_NAMES)
        p.add_argument("--params", default="", help="comma-separated flux parameters")
        p.add_argument("--pressure", default=None, help="p-system pressure law (power or cubic)")
        p.add_argument("--out", default=".", help="output directory")

    def run_args(p):
        p.add_argument("scenario", help="scenario file")
        p.add_argument("--epsilon", help="comma-separated epsilon values (overrides the file)")
        p.add_argument("--delta", type=float)
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--check", choices=CHECK_LEVELS)
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("riemann", help="solve one Riemann problem")
    system_args(p)
    p.add_argument("--u-left", required=True)
    p.add_argument("--u-right", required=True)
    p.add_argument("--points", type=int, default=401)
    p.set_defaults(func=cmd_riemann)

    p = sub.add_parser("wavecurve", help="sample a composite wave curve")
    system_args(p)
    p.add_argument("--family", type=int, default=1)
    p.add_argument("--u-left", required=True)
    p.add_argument("--m-target", type=float, required=True)
    p.add_argument("--points", type=int, default=33, help="samples per piece")
    p.set_defaults(func=cmd_wavecurve)

    p = sub.add_parser("run", help="front tracking for a scenario file")
    run_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("nd-check", help="nonlinearity coefficients on a grid")
    system_args(p)
    p.add_argument("--family", type=int)
    p.add_argument("--points", type=int, default=11, help="grid points per axis")
    p.set_defaults(func=cmd_nd_check)

    p = sub.add_parser("graph", help="parametrized graphs of a scenario run")
    run_args(p)
    p.add_argument("--times", required=True, help="comma-separated times")
    p.add_argument("--path", choices=("segment", "riemann_graph"), default="segment")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("oracle", help="exact scalar Riemann profile for golden files")
    system_args(p)
    p.add_argument("--u-left", required=True)
    p.add_argument("--u-right", required=True)
    p.add_argument("--points", type=int, default=401)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("accept", help="run the acceptance battery")
    p.add_argument("--quick", action="store_true", help="smaller batteries, same tolerances")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_accept)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print("invalid scenario:\n  " + "\n  ".join(exc.problems), file=sys.stderr)
        return 3
    except HypertrackError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
