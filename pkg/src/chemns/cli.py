"""Command-line entry point.

Exit codes: 0 success / verdict passed, 1 verdict failed, 2 configuration
error, 3 numerical failure during a run.
"""

from __future__ import annotations

import argparse
import sys

from .config import (CANONICAL_SCENARIOS, ConfigError, canonical_config,
                     load_config)
from .flow import CFLError, SolverError
from .transport import PositivityError
from .model import InitialDataError
from .expressions import ExpressionError


def _load(path_or_name):
    if path_or_name in CANONICAL_SCENARIOS:
        return canonical_config(path_or_name)
    return load_config(path_or_name)


def _parse_overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def cmd_run(args):
    config = _load(args.config).with_overrides(_parse_overrides(args.set))
    out_dir = args.out or config["output.dir"]
    from .run import run_scenario
    result = run_scenario(config, out_dir=out_dir,
                          snapshots=True if args.snapshots else None)
    s = result.summary
    if not args.quiet:
        print(f"verdict: {s.verdict}  t={s.final_time:g}  steps={s.steps}  "
              f"regime={s.regime}")
        print(f"final distances: {['%.3e' % d for d in s.final_distances]}")
        print(f"outputs written to {out_dir}")
    return 0 if not s.blow_up else 1


def cmd_oracle(args):
    from .run import ode_oracle
    config = _load(args.config)
    params = config.params
    from .run import build_initial_state
    state = build_initial_state(config)
    y0 = (state.n1.values.flat[0], state.n2.values.flat[0],
          state.c.values.flat[0])
    times, vals = ode_oracle(params, y0, config["run.t_end"],
                             config["transport.dt_max"])
    cadence = config["output.cadence"]
    if not args.quiet:
        print("t,n1,n2,c")
        next_out = 0.0
        for t, (n1, n2, c) in zip(times, vals):
            if t + 1e-12 >= next_out:
                print(f"{t!r},{n1!r},{n2!r},{c!r}")
                next_out += cadence
    return 0


def cmd_mms(args):
    from .mms import run_suite
    report = run_suite(args.suite)
    if not args.quiet:
        print(report.table())
    return 0


def cmd_sweep_eps(args):
    from .run import eps_consistency_sweep
    config = _load(args.config)
    eps_list = [float(e) for e in args.eps.split(",")]
    res = eps_consistency_sweep(config, eps_list)
    if not args.quiet:
        print("eps_hi,eps_lo,dist_n1,dist_n2,dist_c,dist_u")
        for row in res.rows:
            print(",".join(repr(float(v)) for v in row))
        if res.error:
            print(f"sweep aborted: {res.error}", file=sys.stderr)
    if res.error:
        return 3
    dists = [max(r[2:]) for r in res.rows]
    decreasing = all(b < a for a, b in zip(dists[:-1], dists[1:]))
    return 0 if decreasing or len(dists) < 2 else 1


def cmd_stabilize(args):
    from .run import stabilization_experiment
    result, verdict = stabilization_experiment(
        args.case, overrides=_parse_overrides(args.set), out_dir=args.out)
    if not args.quiet:
        print(f"case: {verdict['case']}  passed: {verdict['passed']}")
        print(f"final distances: {['%.3e' % d for d in verdict['final_distances']]} "
              f"(tolerance {verdict['tolerance']:g})")
        print(f"tail monotone: {verdict['tail_monotone']}")
    return 0 if verdict["passed"] else 1


def cmd_validate(args):
    config = _load(args.config)
    from .run import build_initial_state, phi_gradients
    build_initial_state(config)
    phi_gradients(config)
    if not args.quiet:
        print(f"ok: {config.config_hash()}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="chemns",
                                description=__doc__.splitlines()[0])
    p.add_argument("--quiet", action="store_true", help="suppress normal output")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run one scenario and write outputs")
    sp.add_argument("config", help="config path or canonical scenario name")
    sp.add_argument("--out", help="output directory (default from config)")
    sp.add_argument("--snapshots", action="store_true")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override a config key")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("oracle", help="print the homogeneous-reduction solution")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("mms", help="run a manufactured-solution study")
    sp.add_argument("suite", choices=["diffusion", "advection", "chemotaxis",
                                      "stokes", "splitting"])
    sp.set_defaults(func=cmd_mms)

    sp = sub.add_parser("sweep-eps", help="consistency sweep over the "
                                          "regularization parameter")
    sp.add_argument("config")
    sp.add_argument("--eps", required=True, help="comma-separated eps values, "
                                                 "largest first")
    sp.set_defaults(func=cmd_sweep_eps)

    sp = sub.add_parser("stabilize", help="run a canonical stabilization case")
    sp.add_argument("case", choices=["coexistence", "exclusion"])
    sp.add_argument("--out")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_stabilize)

    sp = sub.add_parser("validate", help="parse and validate a config")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InitialDataError, ExpressionError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (PositivityError, SolverError, CFLError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
