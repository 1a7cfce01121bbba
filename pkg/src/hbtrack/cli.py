"""Command line entry point: ``hbtrack {run,sweep,dump-codebook,trace}``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from . import sim
from .codebook import build_codebook, dump_codebook
from .config import _floats, _ints, _names, array_from_options, read_config, scenario_from_options
from .errors import ConfigurationError

log = logging.getLogger("hbtrack")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI scenario file; flags override it")
    p.add_argument("--elements", type=int, help="ULA size N (power of 2)")
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--sigma-e", dest="sigma_e", type=_floats, help="ranging error std in m (comma list)")
    p.add_argument("--qi", type=_ints, help="resampling factor(s), comma list")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tracker", type=_names, help="proposed, fct, level8 (comma list)")
    p.add_argument("--pilots-per-level", dest="pilots_per_level", type=_ints)
    p.add_argument("--refine-depth", dest="refine_depth", type=int)
    p.add_argument("--no-noise", dest="no_noise", action="store_const", const=True)
    p.add_argument("--full-scale", dest="full_scale", action="store_const", const=True,
                   help=f"use {sim.FULL_SCALE_EPISODES} episodes")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hbtrack", description="Hierarchical THz beam-tracking Monte Carlo simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="evaluate one scenario")
    _add_common(run)

    sw = sub.add_parser("sweep", help="sweep one axis, one CSV row per value and tracker")
    _add_common(sw)
    sw.add_argument("--axis", required=True, choices=["sigma_e", "q_i", "pilots_per_level"])
    sw.add_argument("--values", type=_floats, help="axis values (comma list)")

    dump = sub.add_parser("dump-codebook", help="write the codebook as text records")
    _add_common(dump)

    tr = sub.add_parser("trace", help="per-slot JSON lines for one episode")
    _add_common(tr)
    tr.add_argument("--episode", type=int, default=0, help="episode counter under --seed")
    return parser


def _options(args: argparse.Namespace) -> dict:
    opts = read_config(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key in ("config", "command", "verbose", "out", "axis", "values", "episode"):
            continue
        if val is not None:
            opts[key] = val
    return opts


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _cmd_run(args) -> int:
    scenario = scenario_from_options(_options(args))
    rows = []
    for q in scenario.q_i:
        for s in scenario.sigma_e:
            for kind in scenario.trackers:
                log.info("running %s q_i=%s sigma_e=%s", kind, q, s)
                rows.append(sim.evaluate(scenario, kind, q, s))
    with _output(args.out) as fh:
        sim.write_csv(rows, fh)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    scenario = scenario_from_options(_options(args))
    values = args.values
    if values is not None and args.axis != "sigma_e":
        values = [int(v) for v in values]
    rows = sim.sweep(scenario, args.axis, values)
    with _output(args.out) as fh:
        sim.write_csv(rows, fh)
    return EXIT_OK


def _cmd_dump(args) -> int:
    array = array_from_options(_options(args))
    with _output(args.out) as fh:
        dump_codebook(build_codebook(array), fh)
    return EXIT_OK


def _cmd_trace(args) -> int:
    scenario = scenario_from_options(_options(args))
    res = sim.run_episode(scenario, scenario.trackers[0], args.episode, trace=True)
    with _output(args.out) as fh:
        sim.write_trace(res, fh)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "dump-codebook": _cmd_dump, "trace": _cmd_trace}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"hbtrack: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"hbtrack: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
