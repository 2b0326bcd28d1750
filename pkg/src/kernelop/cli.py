"""
Command-line entry point.

    kernelop benchmark helmholtz-20 --out runs/h20
    kernelop convergence --set sizes=10000,20000,40000,80000 --set trials=5
    kernelop selfcheck
    kernelop kernel-check

Configs are flat ``key = value`` files (``#`` starts a comment); ``--set``
overrides are applied after the file, then ``--seed`` and ``--out``.  Every
run writes ``resolved-config.txt`` so that it can be repeated exactly.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 self-check
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, NumericalError, ShapeError
from .experiments import ExperimentConfig, run_benchmark, run_convergence
from .problems import PROBLEMS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_SELFCHECK = 4

WALL_TIME_NOTE = "cost = wall time of fit plus evaluation of every family member"

# the desk-scale Poisson-3D study, used when convergence is run bare
CONVERGENCE_DEFAULTS = [
    ("problem", "poisson3d"),
    ("sizes", "10000,20000,40000,80000"),
    ("trials", "5"),
    ("schedule_alpha", "0.4"),
    ("schedule_c", "1e-7"),
]


class UsageError(Exception):
    pass


def _parse_set(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--set", dest="overrides", action="append", type=_parse_set,
                        default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--threads", type=int, help="BLAS thread limit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="kernelop",
        description="Physics-informed kernel ridge regression for linear PDE solution operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    bench = sub.add_parser("benchmark", parents=[common], help="run one benchmark problem")
    bench.add_argument("problem", help=f"one of: {', '.join(sorted(PROBLEMS))}")
    sub.add_parser("convergence", parents=[common], help="empirical convergence study")
    sub.add_parser("selfcheck", parents=[common], help="run all self-check suites")
    sub.add_parser("kernel-check", parents=[common], help="kernel derivatives vs finite differences")
    return parser


def resolve_config(args, base_pairs=()) -> ExperimentConfig:
    pairs = list(base_pairs)
    if args.config:
        try:
            pairs += ExperimentConfig.read_pairs(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    pairs += list(args.overrides)
    if getattr(args, "problem", None):
        pairs.append(("problem", args.problem))
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    if args.out:
        pairs.append(("out", args.out))
    return ExperimentConfig.from_pairs(pairs).resolved()


def _prepare_out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resolved-config.txt", "w", newline="\n") as fh:
        fh.write(cfg.dump())
    return out


def cmd_benchmark(args) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    report = run_benchmark(cfg)
    report.write_errors_csv(out / "errors.csv")
    report.write_summary_csv(out / "summary.csv")
    print(report.table_line(cfg.problem))
    print(f"({WALL_TIME_NOTE}; M = {len(report.per_function)}, N = {report.n_samples})")
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg = resolve_config(args, CONVERGENCE_DEFAULTS)
    out = _prepare_out(cfg)

    def progress(n, trial, rep):
        print(f"N={n} trial={trial} rel L2 {rep.mean_l2:.3e} rel Linf {rep.mean_linf:.3e} "
              f"cost {rep.wall_time_seconds:.2f} s", flush=True)

    study = run_convergence(cfg, progress)
    study.write_trials_csv(out / "errors.csv")
    study.write_summary_csv(out / "summary.csv")
    with open(out / "slopes.json", "w", newline="\n") as fh:
        fh.write(study.slopes_json() + "\n")
    for n, m2, minf in zip(study.sample_sizes, study.mean_l2, study.mean_linf):
        print(f"N={n} mean rel L2 {m2:.3e} mean rel Linf {minf:.3e}")
    print(study.slopes_json())
    return EXIT_OK


def _report(results) -> int:
    failed = False
    for r in results:
        print(r.line())
        for f in r.failures:
            print(f"    {f}")
        failed |= not r.passed
    return EXIT_SELFCHECK if failed else EXIT_OK


def cmd_selfcheck(args) -> int:
    from .checks import run_selfcheck

    return _report(run_selfcheck())


def cmd_kernel_check(args) -> int:
    from .checks import kernel_fd_suite

    return _report([kernel_fd_suite()])


COMMANDS = {
    "benchmark": cmd_benchmark,
    "convergence": cmd_convergence,
    "selfcheck": cmd_selfcheck,
    "kernel-check": cmd_kernel_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    limiter = None
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_USAGE
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
