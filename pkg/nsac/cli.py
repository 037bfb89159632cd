"""
Command line entry point.

``nsac run <config>`` runs a simulation; the ``bench-*``, ``sweep-eps`` and
``validate-constitutive`` subcommands run the benchmarks and the constitutive property suite.
Exit status is ``0`` on success or PASS, ``1`` on failure or FAIL and ``2`` on usage errors.
"""
import argparse
import logging
import sys
import typing
from dataclasses import replace

from . import benchmarks, error
from .config import load_config
from .const import __version__
from .constitutive import check_constitutive_properties
from .runner import run

log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def _float_list(text: str) -> typing.Tuple[float, ...]:
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _with(cfg, **overrides):
    return replace(cfg, **{key: value for key, value in overrides.items() if value is not None})


def _finish(report, output: str) -> int:
    benchmarks.write_report(report, output)
    print(report.verdict())
    return 0 if report.passed else 1


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg = replace(cfg, output_dir=args.output)
    return run(cfg)


def cmd_bench_mcf(args) -> int:
    cfg = _with(benchmarks.MCFBench(), eps=args.eps, r0=args.r0, nx=args.nx, dt=args.dt)
    return _finish(benchmarks.run_mcf_benchmark(cfg), args.output)


def cmd_bench_front(args) -> int:
    cfg = _with(benchmarks.FrontBench(), ell_bar=args.ellbar, eps=args.eps)
    report = benchmarks.run_front_benchmark(cfg)
    if cfg.ell_bar:
        c_ell, growth = benchmarks.calibrate_c_ell(report)
        print(f"calibrated c_ell={c_ell:.6g} growth={growth:+.0f}")
    return _finish(report, args.output)


def cmd_sweep_eps(args) -> int:
    cfg = _with(benchmarks.SweepBench(), eps_list=args.list)
    report = benchmarks.run_energy_convergence_sweep(cfg)
    for eps, energy_error, psi_error in report.series:
        print(f"eps={eps:.6g} energy_error={energy_error:.6e} psi_error={psi_error:.6e}")
    return _finish(report, args.output)


def cmd_bench_coupled(args) -> int:
    cfg = _with(
        benchmarks.CoupledBench(),
        theta0=args.theta0,
        max_steps=args.max_steps,
        dt=args.dt,
        c_ell=args.c_ell,
    )
    report = benchmarks.run_coupled_release(cfg)
    for name, t in report.extra["first_violation"].items():
        print(f"{name} first violated at t={t:.6g}")
    return _finish(report, args.output)


def cmd_validate_constitutive(args) -> int:
    checks = check_constitutive_properties()
    for check in checks:
        print(f"{check.name} {'PASS' if check.passed else 'FAIL'} {check.detail}")
    return 0 if all(check.passed for check in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsac", description="Non-isothermal Navier-Stokes/Allen-Cahn phase-field simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    common.add_argument("--output", help="output directory")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("run", parents=[common], help="run a configured simulation")
    p.add_argument("config", help="path of a key = value configuration file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench-mcf", parents=[common], help="shrinking circle benchmark")
    p.add_argument("--eps", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--nx", type=int)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_bench_mcf, default_output="nsac-bench")

    p = sub.add_parser("bench-front", parents=[common], help="forced traveling front benchmark")
    p.add_argument("--ellbar", type=float)
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_bench_front, default_output="nsac-bench")

    p = sub.add_parser("sweep-eps", parents=[common], help="interface energy convergence sweep")
    p.add_argument("--list", type=_float_list, help="descending eps values, e.g. 0.08,0.04,0.02")
    p.set_defaults(func=cmd_sweep_eps, default_output="nsac-bench")

    p = sub.add_parser("bench-coupled", parents=[common], help="coupled release benchmark")
    p.add_argument("--theta0", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--c-ell", type=float, help="calibrated speed per unit latent heat")
    p.set_defaults(func=cmd_bench_coupled, default_output="nsac-bench")

    p = sub.add_parser(
        "validate-constitutive", parents=[common], help="constitutive property suite"
    )
    p.set_defaults(func=cmd_validate_constitutive)
    return parser


def main(argv: typing.Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format=LOG_FORMAT, level=logging.DEBUG if args.verbose else logging.INFO)
    if args.output is None:
        args.output = getattr(args, "default_output", None)
    try:
        return args.func(args)
    except error.NSACError as ex:
        log.error(f"{args.command} failed: {ex}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
