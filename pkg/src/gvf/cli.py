"""Command line front end.

Subcommands: run, field, singular, probe-sphere, check, list.  Exit
codes: 0 success, 1 usage or input errors, 2 numeric failures, 3
assumption audit findings.
"""

from __future__ import annotations

import argparse
import dataclasses as _dc
import json
import os
import re
import sys
import warnings

import numpy as np

from .field import field_components, lyapunov
from .integrate import (
    IntegratorConfig,
    VERDICT_NUMERIC,
    batch,
    integrate,
    jsonable,
    write_meta_json,
    write_trajectory_csv,
)
from .manifold import RankDeficient, RetractionDiverged
from .scenarios import (
    Scenario,
    from_json,
    get_scenario,
    rot_x,
    rot_y,
    rot_z,
    rotation_to_state,
    scenario_config,
    scenario_names,
)
from .singular import GridSpec, check_assumptions, find_singular_points

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_FINDINGS = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; this tool reserves 2 for numeric failures
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class InputError(ValueError):
    """Bad user input that is not an argparse-level syntax problem."""


_ROT_TOKEN = re.compile(r"r([xyz])\(([^)]+)\)")


def parse_x0(text: str, scenario: Scenario) -> np.ndarray:
    """Parse a seed: comma separated floats, or a rotation literal.

    Rotation literals look like '@rx(0.785)ry(-0.785)' and multiply the
    named elementary rotations left to right; they only make sense for
    the 9 dimensional rotation scenarios.
    """
    text = text.strip()
    if text.startswith("@"):
        if scenario.ambient_dim != 9:
            raise InputError(
                f"rotation literal given but scenario {scenario.name} has "
                f"ambient dimension {scenario.ambient_dim}, not 9"
            )
        body = text[1:]
        tokens = _ROT_TOKEN.findall(body)
        if not tokens or "".join(f"r{a}({v})" for a, v in tokens) != body.replace(" ", ""):
            raise InputError(f"cannot parse rotation literal {text!r}")
        A = np.eye(3)
        maker = {"x": rot_x, "y": rot_y, "z": rot_z}
        for axis, val in tokens:
            try:
                A = A @ maker[axis](float(val))
            except ValueError:
                raise InputError(f"bad angle {val!r} in rotation literal") from None
        return rotation_to_state(A)
    try:
        vals = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"cannot parse seed {text!r} as comma separated floats") from None
    if vals.shape != (scenario.ambient_dim,):
        raise InputError(
            f"seed has {vals.shape[0]} coordinates, scenario {scenario.name} "
            f"needs {scenario.ambient_dim}"
        )
    return vals


def _parse_grid(text: str) -> GridSpec:
    axes = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise InputError(f"grid axis {part!r} is not lo:hi:n")
        try:
            axes.append((float(bits[0]), float(bits[1]), int(bits[2])))
        except ValueError:
            raise InputError(f"grid axis {part!r} is not lo:hi:n") from None
    return GridSpec(tuple(axes))


def _load_scenario(args) -> Scenario:
    if getattr(args, "scenario_file", None):
        try:
            return from_json(args.scenario_file)
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise InputError(f"cannot load scenario file: {exc}") from exc
    try:
        return get_scenario(args.scenario)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None


def _config_from(args, scenario: Scenario) -> IntegratorConfig:
    return scenario_config(
        scenario,
        dt=args.dt,
        t_max=args.t_max,
        tol_path=args.tol_path,
        tol_singular=args.tol_singular,
        record_stride=args.record_stride,
    )


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_rows(path: str, header: list[str], rows: np.ndarray) -> None:
    lines = [",".join(header)]
    for row in np.atleast_2d(rows):
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _out_path(args, name: str) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def cmd_run(args) -> int:
    scenario = _load_scenario(args)
    cfg = _config_from(args, scenario)
    surfaces = scenario.surfaces
    if args.propagation_sign and args.propagation_sign != surfaces.propagation_sign:
        surfaces = _dc.replace(surfaces, propagation_sign=args.propagation_sign)
    if args.x0 is not None:
        x0 = parse_x0(args.x0, scenario)
    elif scenario.starts:
        x0 = np.asarray(scenario.starts[0], dtype=float)
    else:
        raise InputError(f"scenario {scenario.name} has no default start, pass --x0")

    traj = integrate(scenario.constraints, surfaces, x0, cfg)
    csv_path = _out_path(args, "traj.csv")
    write_trajectory_csv(traj, csv_path)
    meta_path = _out_path(args, "meta.json")
    write_meta_json(meta_path, scenario.name, traj, x0)
    written = [csv_path, meta_path]

    if args.components:
        errs = np.abs(surfaces.errors(traj.states))
        header = ["t"] + [f"abs_phi_{i}" for i in range(errs.shape[1])]
        comp_path = _out_path(args, "components.csv")
        _write_rows(comp_path, header, np.column_stack([traj.times, errs]))
        written.append(comp_path)

    print(
        f"verdict={traj.verdict} t_final={traj.t_final:g} "
        f"e_norm_final={traj.e_norms[-1]:.6g} audit_max_growth={traj.audit_max_growth:.3e}"
    )
    for p in written:
        print(f"wrote {p}")
    return EXIT_NUMERIC if traj.verdict == VERDICT_NUMERIC else EXIT_OK


def cmd_field(args) -> int:
    scenario = _load_scenario(args)
    grid = _parse_grid(args.grid) if args.grid else scenario.scan_grid
    pts = grid.points()
    amb = (
        np.asarray(scenario.chart_to_ambient(pts), dtype=float)
        if scenario.chart_to_ambient is not None
        else pts
    )
    parts = field_components(scenario.constraints, scenario.surfaces, amb)
    e_norm = np.linalg.norm(parts.errors, axis=-1)
    V = lyapunov(scenario.surfaces, parts.errors)
    m = scenario.ambient_dim
    header = [f"x_{j}" for j in range(m)] + [f"chi_{j}" for j in range(m)] + ["e_norm", "V"]
    rows = np.column_stack([amb, parts.chi, e_norm, V])
    field_path = _out_path(args, "field.csv")
    _write_rows(field_path, header, rows)
    print(f"wrote {field_path} ({rows.shape[0]} points)")

    if scenario.path_sampler is not None:
        path_pts = scenario.path_points(args.path_samples)
        path_path = _out_path(args, "path.csv")
        _write_rows(path_path, [f"x_{j}" for j in range(m)], path_pts)
        print(f"wrote {path_path} ({path_pts.shape[0]} points)")
    return EXIT_OK


def _singular_report(scenario: Scenario):
    path_samples = (
        scenario.path_points() if scenario.path_sampler is not None else np.zeros((0, 0))
    )
    pts, sc = find_singular_points(
        scenario.constraints,
        scenario.surfaces,
        scenario.scan_grid,
        to_ambient=scenario.chart_to_ambient,
        path_samples=path_samples if len(path_samples) else None,
    )
    return pts, sc


def cmd_singular(args) -> int:
    scenario = _load_scenario(args)
    pts, _ = _singular_report(scenario)
    report = [sp.as_report_dict() for sp in pts]
    out = _out_path(args, "singular.json")
    with open(out, "w", newline="\n") as fh:
        fh.write(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
    print(f"{scenario.name}: {len(pts)} singular point(s)")
    for sp in pts:
        coords = ",".join(f"{v:.9g}" for v in sp.x)
        print(
            f"  x=({coords}) label={sp.label} chi_norm={sp.chi_norm:.3e} "
            f"dist_to_path={sp.dist_to_path:.6g} refined={sp.refined}"
        )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = _load_scenario(args)
    pts, sc = _singular_report(scenario)
    grid_pts = sc.grid.points()
    amb = (
        np.asarray(scenario.chart_to_ambient(grid_pts), dtype=float)
        if scenario.chart_to_ambient is not None
        else grid_pts
    )
    path_samples = (
        scenario.path_points() if scenario.path_sampler is not None else np.zeros((0, 2))
    )
    findings = check_assumptions(
        scenario.constraints, scenario.surfaces, pts, amb, path_samples
    )
    report = {
        "scenario": scenario.name,
        "n_singular": len(pts),
        "singular": [sp.as_report_dict() for sp in pts],
        "findings": findings,
    }
    out = _out_path(args, "check.json")
    with open(out, "w", newline="\n") as fh:
        fh.write(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
    if findings:
        print(f"{scenario.name}: {len(findings)} finding(s)")
        for f in findings:
            print(f"  {f['assumption']}: {f['detail']}")
    else:
        print(f"{scenario.name}: assumptions hold on the sampled sets")
    print(f"wrote {out}")
    return EXIT_FINDINGS if findings else EXIT_OK


def cmd_probe_sphere(args) -> int:
    scenario = _load_scenario(args)
    cfg = _config_from(args, scenario)
    m = scenario.ambient_dim
    R, N = args.R, args.N

    from scipy.stats import norm, qmc

    sob = qmc.Sobol(d=m, scramble=True, seed=args.seed)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties.*")
        u = sob.random(N)
    g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    seeds = R * g / np.linalg.norm(g, axis=-1, keepdims=True)

    cand = (
        np.asarray(scenario.probe_candidates(R), dtype=float)
        if scenario.probe_candidates is not None
        else np.zeros((0, m))
    )
    all_seeds = np.concatenate([seeds, cand], axis=0) if len(cand) else seeds
    res = batch(scenario.constraints, scenario.surfaces, all_seeds, cfg)

    def entry(i):
        return {
            "x0": all_seeds[i],
            "verdict": res.verdicts[i],
            "x_final": res.x_final[i],
            "t_final": res.t_final[i],
            "e_norm_final": res.e_norm_final[i],
            "chi_norm_final": res.chi_norm_final[i],
        }

    non_path = [entry(i) for i in range(N) if res.verdicts[i] != "PathConverging"]
    candidates = [entry(N + j) for j in range(len(cand))]
    report = {
        "scenario": scenario.name,
        "R": R,
        "N": N,
        "seed": args.seed,
        "config": _dc.asdict(cfg),
        "verdicts": res.verdicts[:N],
        "n_path_converging": sum(1 for v in res.verdicts[:N] if v == "PathConverging"),
        "non_path_converging": non_path,
        "candidates": candidates,
        "hypothesis_note": scenario.hypothesis_note,
    }
    out = _out_path(args, "probe.json")
    with open(out, "w", newline="\n") as fh:
        fh.write(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
    print(
        f"{scenario.name}: {report['n_path_converging']}/{N} boundary seeds path-converging, "
        f"{len(non_path)} other, {len(candidates)} targeted candidate(s)"
    )
    if scenario.hypothesis_note:
        print(f"  note: {scenario.hypothesis_note}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_list(args) -> int:
    names = scenario_names()
    width = max(len(n) for n in names)
    for name in names:
        s = get_scenario(name)
        print(
            f"{name:<{width}}  m={s.ambient_dim} k={s.constraints.k} "
            f"surfaces={s.surfaces.n_surfaces}  {s.notes}"
        )
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, with_config: bool = True) -> None:
    p.add_argument("--scenario", default=None, help="built-in scenario name")
    p.add_argument(
        "--scenario-file", default=None, help="JSON file with a user scenario"
    )
    p.add_argument("--out", default=None, help="output directory (default: current)")
    if with_config:
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--t-max", dest="t_max", type=float, default=None)
        p.add_argument("--tol-path", dest="tol_path", type=float, default=None)
        p.add_argument("--tol-singular", dest="tol_singular", type=float, default=None)
        p.add_argument(
            "--record-stride", dest="record_stride", type=int, default=None
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="gvf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one seed and export the trajectory")
    _add_common(p_run)
    p_run.add_argument("--x0", default=None, help="seed: 'a,b,...' or '@rx(..)ry(..)'")
    p_run.add_argument(
        "--propagation-sign", type=int, choices=(1, -1), default=None,
        help="travel direction along the path",
    )
    p_run.add_argument(
        "--components", action="store_true",
        help="also write per-surface |phi_i| samples",
    )
    p_run.set_defaults(fn=cmd_run)

    p_field = sub.add_parser("field", help="evaluate the field on a grid and export CSV")
    _add_common(p_field, with_config=False)
    p_field.add_argument("--grid", default=None, help="axes as lo:hi:n,lo:hi:n,...")
    p_field.add_argument(
        "--path-samples", dest="path_samples", type=int, default=4096,
        help="points written to path.csv",
    )
    p_field.set_defaults(fn=cmd_field)

    p_sing = sub.add_parser("singular", help="locate and classify field zeros")
    _add_common(p_sing, with_config=False)
    p_sing.set_defaults(fn=cmd_singular)

    p_probe = sub.add_parser(
        "probe-sphere", help="integrate seeds from a radius-R sphere"
    )
    _add_common(p_probe)
    p_probe.add_argument("--R", type=float, default=3.0)
    p_probe.add_argument("--N", type=int, default=100)
    p_probe.add_argument("--seed", type=int, default=0)
    p_probe.set_defaults(fn=cmd_probe_sphere)

    p_check = sub.add_parser("check", help="audit the convergence assumptions")
    _add_common(p_check, with_config=False)
    p_check.set_defaults(fn=cmd_check)

    p_list = sub.add_parser("list", help="list built-in scenarios")
    p_list.set_defaults(fn=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.fn is not cmd_list and not getattr(args, "scenario_file", None) and not args.scenario:
            parser.error("one of --scenario or --scenario-file is required")
    except SystemExit as exc:  # keep in-process calls exception-free
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ValueError as exc:  # InputError and config/geometry validation
        print(f"gvf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankDeficient, RetractionDiverged, np.linalg.LinAlgError) as exc:
        print(f"gvf: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
