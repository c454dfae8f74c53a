"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .experiments import (
    PRESETS,
    compare_stabilization,
    converge_space,
    converge_time,
    resume_experiment,
    run_experiment,
)
from .fileio import CheckpointError, SnapshotFormatError, read_snapshot, write_pgm
from .schemes import BlowUpError

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("pfcsav")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--quiet", action="store_true", help="only print errors")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfcsav", description="Stabilized SAV solvers for the phase field crystal equation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a simulation described by a config file or preset")
    p.add_argument("config", help="INI config path, or preset:<name>")
    _common(p)

    for name, what in (("converge-time", "temporal"), ("converge-space", "spatial")):
        p = sub.add_parser(name, help=f"{what} Cauchy convergence study")
        p.add_argument("config")
        p.add_argument("--scheme", choices=("first", "second"), help="override the scheme")
        p.add_argument("--workers", type=int, default=1, help="parallel processes")
        _common(p)

    p = sub.add_parser("stabilization", help="compare large-step energy curves for several S against a small-step reference")
    p.add_argument("config")
    p.add_argument("--S", type=float, nargs="+", default=[0.0, 0.01])
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--ref-dt", type=float, default=0.02)
    p.add_argument("--T", type=float)
    _common(p)

    p = sub.add_parser("render", help="convert a binary snapshot to a PGM image")
    p.add_argument("snapshot")
    p.add_argument("pgm")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--T", type=float, help="new final time")
    _common(p)

    p = sub.add_parser("preset", help="print a preset configuration")
    p.add_argument("name", choices=sorted(PRESETS))
    return parser


def _load(source: str, args) -> RunConfig:
    if source.startswith("preset:"):
        name = source.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
        cfg = PRESETS[name]()
    else:
        cfg = load_config(source)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "out", None):
        cfg = replace(cfg, output=args.out)
    if getattr(args, "scheme", None):
        cfg = replace(cfg, scheme=args.scheme)
    return cfg.validate()


def _dispatch(args) -> int:
    if args.command == "preset":
        print(PRESETS[args.name]().to_ini())
        return EXIT_OK
    if args.command == "render":
        snap = read_snapshot(args.snapshot)
        write_pgm(args.pgm, snap.phi)
        log.info("wrote %s (t=%g, step %d)", args.pgm, snap.t, snap.step)
        return EXIT_OK
    if args.command == "resume":
        if args.seed is not None:
            log.warning("--seed has no effect when resuming")
        res = resume_experiment(args.checkpoint, out_dir=args.out, T=args.T)
        log.info("resumed to step %d in %s", res.state.step_index, res.out_dir)
        return EXIT_OK

    cfg = _load(args.config, args)
    out = Path(cfg.output)
    if args.command == "run":
        res = run_experiment(cfg, out)
        st = res.manifest["status"]
        log.info("completed %d steps, final modified energy %.12g, output in %s",
                 st["step"], st["final_E_modified"], out)
    elif args.command == "converge-time":
        rows = converge_time(cfg, out, max_workers=args.workers)
        log.info("%10s %12s %8s %12s %8s", "dt", "err_phi", "rate", "err_r", "rate")
        for r in rows:
            log.info("%10.6g %12.4e %8.3f %12.4e %8.3f", r.dt, r.err_phi, r.rate_phi, r.err_r, r.rate_r)
    elif args.command == "converge-space":
        for n, e in converge_space(cfg, out, max_workers=args.workers):
            log.info("N=%4d  err=%.4e", n, e)
    elif args.command == "stabilization":
        study = compare_stabilization(cfg, args.S, dt=args.dt, ref_dt=args.ref_dt, T=args.T, out_dir=out)
        for S in args.S:
            log.info("S=%g  max |E - E_ref| = %.4e  final SAV drift = %.4e", S, study.deviation[S], study.drift[S])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO, format="%(message)s", force=True)
    try:
        return _dispatch(args)
    except BlowUpError as exc:
        log.error("%s", exc)
        return EXIT_BLOWUP
    except (OSError, SnapshotFormatError, CheckpointError) as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
