"""Command line entry point: ``risassoc {run,sweep,load-stats,convergence}``."""
import argparse
import logging
import sys

from . import experiments as ex
from .config import ConfigError, RunConfig, full_scale, load_config

EXIT_BAD_CONFIG = 2


def _values(text):
    return [float(v) if "." in v or "e" in v.lower() else int(v) for v in text.split(",") if v]


def build_parser():
    parser = argparse.ArgumentParser(prog="risassoc", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config (desk-scale defaults if omitted)")
    common.add_argument("--seed", type=int, default=0, help="seed, or first seed of a batch")
    common.add_argument("--out", metavar="PATH", help="CSV destination (stdout if omitted)")
    common.add_argument("--full-scale", action="store_true",
                        help="J=4, K=15, M=32, N=64 profile (slow)")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="single seeded run")
    p.add_argument("--scheme", default="proposed_w_ris", choices=ex.SCHEMES)

    p = sub.add_parser("sweep", parents=[common], help="sum-rate versus one parameter")
    p.add_argument("--var", required=True, choices=sorted(ex.SWEEP_VARS))
    p.add_argument("--values", required=True, type=_values, help="comma-separated values")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--scheme", action="append", choices=ex.SCHEMES,
                   help="repeatable; all schemes if omitted")

    p = sub.add_parser("load-stats", parents=[common], help="mean users served per BS")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--scheme", action="append", choices=ex.SCHEMES)

    sub.add_parser("convergence", parents=[common], help="outer and first ADMM traces")
    return parser


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = load_config(args.config) if args.config else RunConfig()
        if args.full_scale:
            run = full_scale(run)
    except ConfigError as exc:
        print(f"risassoc: config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    schemes = tuple(getattr(args, "scheme", None) or ex.SCHEMES)

    if args.command == "run":
        res = ex.run_scheme(run, args.scheme, args.seed)
        text = ex.write_csv([ex.result_row(run, res)], ex.RUN_COLUMNS, args.out)
        print(f"{res.scheme} seed {res.seed}: sum-rate {res.sum_rate:.4f} bit/s/Hz, users "
              f"{res.user_to_bs.tolist()}, RIS {res.ris_bs}, {res.iterations} iterations, "
              f"{res.wall_time:.1f} s", file=sys.stderr)
        _emit(text, args.out)
    elif args.command == "sweep":
        rows = ex.run_sweep(run, args.var, args.values, args.trials, schemes, args.seed,
                            args.workers, args.out)
        _emit(ex.write_csv(rows, ex.SWEEP_COLUMNS), args.out)
    elif args.command == "load-stats":
        rows, _ = ex.run_load_stats(run, args.trials, schemes, args.seed, args.workers,
                                    args.out)
        _emit(ex.write_csv(rows, ex.LOAD_COLUMNS), args.out)
    else:
        rows, _ = ex.run_convergence(run, args.seed, args.out)
        _emit(ex.write_csv(rows, ex.CONVERGENCE_COLUMNS), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
