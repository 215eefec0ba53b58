"""``pairedwalk`` command line: synthesize, simulate, converge, check, geodesics."""

import argparse
import json
import logging
import sys

from .config import PRESETS, load_config
from .errors import ConfigError, PairedWalkError
from .experiments import cmd_check, cmd_converge, cmd_geodesics, cmd_simulate, cmd_synthesize

log = logging.getLogger("pairedwalk")

EXIT_OK = 0
EXIT_CHECK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as configuration errors (exit 1) instead of exit 2."""

    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="pairedwalk", description=__doc__)
    parser.add_argument("--config", metavar="PATH", help="INI configuration file")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides [output] out)")
    parser.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for sweeps")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthesize", help="dump the walk operators and certificates at one point")
    p.add_argument("--at", nargs=2, type=float, metavar=("T", "X"), required=True)

    sub.add_parser("simulate", help="evolve the configured packet and write snapshots")

    p = sub.add_parser("converge", help="walk versus PDE oracle error for several eps")
    p.add_argument("--eps", nargs="+", type=float, help="lattice spacings (default: [converge] eps_list)")

    sub.add_parser("check", help="run the invariant suite")

    p = sub.add_parser("geodesics", help="integrate null geodesics from seed positions")
    p.add_argument("--seeds", nargs="*", type=float, default=[])
    p.add_argument("--t-max", type=float, default=None)
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    preset = args.preset or (None if args.config else "desk")
    cfg = load_config(args.config, preset=preset, out=args.out)
    out = cfg.out

    if args.command == "synthesize":
        dump = cmd_synthesize(cfg, args.at[0], args.at[1], out=out)
        print(json.dumps(dump, indent=2))
        return EXIT_OK if dump["passed"] else EXIT_CHECK_FAILED
    if args.command == "simulate":
        meta = cmd_simulate(cfg, out=out)
        print(f"wrote {out}: {meta['snapshots']} snapshots, norm drift {meta['norm_drift']:.3e}")
        return EXIT_OK
    if args.command == "converge":
        report = cmd_converge(cfg, args.eps or list(cfg.eps_list), out=out, threads=args.threads)
        sys.stdout.write(report.to_text())
        return EXIT_OK
    if args.command == "check":
        ok, summary = cmd_check(cfg, out=out)
        print(json.dumps(summary, indent=2))
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    path, geos = cmd_geodesics(cfg, args.seeds, out=out, t_max=args.t_max)
    print(f"wrote {len(geos)} geodesics to {path}")
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except PairedWalkError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
