"""Command line: ``signed-rigidity {analyze,simulate,henneberg,check-jacobian,list}``.

Exit codes: 0 success, 1 scenario error, 2 numerical divergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .framework import FrameworkError
from .henneberg import validate_signed_henneberg
from .oracle import jacobian_sweep
from .output import OutputError, analysis_report, emit_outputs, output_paths, simulation_report
from .rigidity import RigidityKind
from .scenario import ScenarioError, bundled_scenario_text, bundled_scenarios, load_scenario, parse_scenario
from .simulation import Status, simulate

EXIT_OK, EXIT_SCENARIO, EXIT_DIVERGED = 0, 1, 2
BUNDLED_PREFIX = "bundled:"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors count as scenario errors; 2 is reserved for divergence
        self.print_usage(sys.stderr)
        self.exit(EXIT_SCENARIO, f"{self.prog}: error: {message}\n")


def _load(ref: str):
    if ref.startswith(BUNDLED_PREFIX):
        name = ref[len(BUNDLED_PREFIX):]
        try:
            text = bundled_scenario_text(name)
        except FileNotFoundError:
            raise ScenarioError(f"no bundled scenario {name!r}; try `list`") from None
        return parse_scenario(text)
    return load_scenario(ref)


def _run_one(command: str, ref: str, out_dir) -> tuple[int, str]:
    """Run one scenario; returns (exit code, one-line summary). Safe to call in a worker."""
    try:
        sf = _load(ref)
        paths = output_paths(sf, out_dir)
        if command == "henneberg":
            cert = validate_signed_henneberg(sf.framework)
            report = analysis_report(sf)
            emit_outputs(report, None, paths)
            return EXIT_OK, json.dumps(cert.to_dict())
        report = analysis_report(sf)
        if command == "analyze" or not sf.is_simulation:
            emit_outputs(report, None, paths)
            verdicts = ", ".join(f"{c['kind']}: rank {c['numerical_rank']}/{c['target_rank']} "
                                 f"{'rigid' if c['is_rigid'] else 'not rigid'}" for c in report["classification"])
            return EXIT_OK, f"{sf.name}: {verdicts}; written {paths['report']}"
        traj = simulate(sf.simulation_config())
        report["simulation"] = simulation_report(sf, traj)
        written = emit_outputs(report, traj, paths, title=f"{sf.name} ({traj.controller.value})")
        amb = report["simulation"]["ambiguity"]
        summary = (f"{sf.name}: {traj.status.value} at t={traj.times[-1]:.3f} "
                   f"|e|={traj.error_norms[-1]:.3e} flip={amb['flip']} flex={amb['flex']}; "
                   f"written {', '.join(str(p) for p in written)}")
        return (EXIT_DIVERGED if traj.status is Status.DIVERGED else EXIT_OK), summary
    except (ScenarioError, FrameworkError) as exc:
        return EXIT_SCENARIO, f"{ref}: scenario error: {exc}"
    except OutputError as exc:
        return EXIT_SCENARIO, f"{ref}: output error: {exc}"


def _combine(codes) -> int:
    codes = list(codes)
    if EXIT_SCENARIO in codes:
        return EXIT_SCENARIO
    if EXIT_DIVERGED in codes:
        return EXIT_DIVERGED
    return EXIT_OK


def _scenario_command(args) -> int:
    refs = args.scenario
    if args.jobs > 1 and len(refs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, [args.command] * len(refs), refs, [args.out_dir] * len(refs)))
    else:
        results = [_run_one(args.command, r, args.out_dir) for r in refs]
    for code, line in results:
        print(line, file=sys.stderr if code == EXIT_SCENARIO else sys.stdout)
    return _combine(code for code, _ in results)


def _check_jacobian(args) -> int:
    kinds = args.kinds or [k.value for k in RigidityKind]
    try:
        results = jacobian_sweep([RigidityKind(k) for k in kinds], cases=args.cases, seed=args.seed, h=args.step)
    except ValueError as exc:
        print(f"check-jacobian: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    print(json.dumps({k: r.to_dict() for k, r in results.items()}, indent=2))
    return EXIT_OK


def _list(args) -> int:
    for name in bundled_scenarios():
        print(BUNDLED_PREFIX + name[:-5])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="signed-rigidity",
                     description="Rigidity analysis and formation control with signed constraints.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "analyze": "classify the scenario framework and certify Henneberg structure",
        "simulate": "integrate the scenario's controller and write report, CSV and SVG",
        "henneberg": "construct (from a step script) and validate a signed Henneberg framework",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", nargs="+", help="scenario file, or bundled:<name>")
        p.add_argument("--out-dir", default=None, help="directory for output files (default: as in scenario)")
        p.add_argument("--jobs", type=int, default=1, help="run several scenarios in parallel")
        p.set_defaults(func=_scenario_command)
    p = sub.add_parser("check-jacobian", help="compare analytic rigidity rows with finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--kinds", nargs="*", choices=[k.value for k in RigidityKind])
    p.set_defaults(func=_check_jacobian)
    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
