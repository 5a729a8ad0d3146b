"""Command-line entry point: ``orbitflow list | run | verify | sweep``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import runner
from .errors import UnknownScenario
from .scenarios import get_scenario, list_scenarios
from .verify import format_report, verify_scenario

DIRECTIONS = {"fwd": "forward", "forward": "forward", "bwd": "backward", "backward": "backward"}
RUN_FILE_KEYS = {"scenario", "direction", "t_max", "seed", "out"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for invariant violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(runner.EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _key_value(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def _coerce(value: str):
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orbitflow", description="Mean curvature flow of group orbits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("list", help="list built-in scenarios")

    r = sub.add_parser("run", help="run one flow and write trace + summary")
    r.add_argument("scenario")
    start = r.add_mutually_exclusive_group()
    start.add_argument("--z0", type=float, help="latitude of the starting orbit")
    start.add_argument("--init", type=_key_value, action="append", default=[], metavar="K=V",
                       help="initial-point parameter (repeatable)")
    r.add_argument("--direction", choices=sorted(DIRECTIONS), default=None)
    r.add_argument("--t-max", type=float, default=None)
    r.add_argument("--out", default=None, help="output directory (default $ORBITFLOW_OUT)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--config", default=None, help="flat key=value file with defaults")
    r.add_argument("--set", type=_key_value, action="append", default=[], metavar="K=V",
                   help="FlowParams/StepControl override (repeatable)")

    v = sub.add_parser("verify", help="run the invariant suite of a scenario")
    v.add_argument("scenario")
    v.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sweep", help="run a grid of starting orbits")
    s.add_argument("scenario")
    s.add_argument("--grid", required=True, help='e.g. "z0=0.1:0.9:9" or "b1=0.2,0.3;b2=0.1:0.4:4"')
    s.add_argument("--direction", choices=sorted(DIRECTIONS), default="fwd")
    s.add_argument("--t-max", type=float, default=30.0)
    s.add_argument("--out", default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--set", type=_key_value, action="append", default=[], metavar="K=V")
    return p


def config_from_args(args) -> runner.RunConfig:
    """Merge defaults < config file < command line."""
    file_vals = read_config_file(args.config) if args.config else {}
    init = {}
    overrides = {}
    for k, v in file_vals.items():
        if k.startswith("init."):
            init[k[5:]] = float(v)
        elif k not in RUN_FILE_KEYS:
            overrides[k] = _coerce(v)
    if "scenario" in file_vals and file_vals["scenario"] != args.scenario:
        raise UsageError(f"config file names scenario {file_vals['scenario']!r}")
    overrides.update({k: _coerce(v) for k, v in args.set})
    if args.z0 is not None:
        init["z0"] = args.z0
    init.update({k: float(v) for k, v in args.init})

    direction = args.direction or file_vals.get("direction", "forward")
    if direction not in DIRECTIONS:
        raise UsageError(f"bad direction {direction!r}")
    t_max = args.t_max if args.t_max is not None else float(file_vals.get("t_max", 30.0))
    seed = args.seed if args.seed is not None else int(file_vals.get("seed", 0))
    out = args.out or file_vals.get("out")
    if t_max <= 0:
        raise UsageError("t_max must be positive")
    return runner.RunConfig(scenario=args.scenario, direction=DIRECTIONS[direction], t_max=t_max,
                            overrides=overrides, init=init, output_dir=out, seed=seed)


def _cmd_list(args) -> int:
    names = list_scenarios()
    width = max(len(n) for n, _ in names)
    for name, desc in names:
        print(f"{name:<{width}}  {desc}")
    return runner.EXIT_OK


def _cmd_run(args) -> int:
    cfg = config_from_args(args)
    spec = get_scenario(cfg.scenario)
    unknown = set(cfg.init) - set(spec.defaults)
    if unknown:
        raise UsageError(f"unknown initial-point parameter(s) {sorted(unknown)} for {spec.name}; "
                         f"expected {sorted(spec.defaults)}")
    try:
        cfg.flow_params()
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    code, summary = runner.run(cfg)
    print(f"{summary['scenario']} {summary['direction']}: {summary['terminal']} "
          f"at t={summary['t_final']:.6f} ({summary['n_samples']} samples)")
    for msg in summary["invariant_violations"]:
        print(f"invariant violation: {msg}", file=sys.stderr)
    return code


def _cmd_verify(args) -> int:
    get_scenario(args.scenario)
    checks = verify_scenario(args.scenario, seed=args.seed)
    print(format_report(args.scenario, checks))
    return runner.EXIT_INVARIANT if any(c.status == "FAIL" for c in checks) else runner.EXIT_OK


def _cmd_sweep(args) -> int:
    spec = get_scenario(args.scenario)
    try:
        grid = runner.parse_grid(args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    unknown = set(grid) - set(spec.defaults)
    if unknown:
        raise UsageError(f"unknown grid parameter(s) {sorted(unknown)} for {spec.name}")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    path = runner.sweep(args.scenario, grid, direction=DIRECTIONS[args.direction], seed=args.seed,
                        overrides={k: _coerce(v) for k, v in args.set}, t_max=args.t_max,
                        output_dir=args.out, jobs=args.jobs)
    codes = [int(line.rsplit(",", 1)[1]) for line in path.read_text().splitlines()[1:]]
    print(f"wrote {path} ({len(codes)} cells)")
    return max(codes, default=runner.EXIT_OK)


COMMANDS = {"list": _cmd_list, "run": _cmd_run, "verify": _cmd_verify, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UnknownScenario as exc:
        print(f"orbitflow: unknown scenario {exc.args[0]!r}; see 'orbitflow list'", file=sys.stderr)
        return runner.EXIT_USAGE
    except (UsageError, OSError) as exc:
        print(f"orbitflow: error: {exc}", file=sys.stderr)
        return runner.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
