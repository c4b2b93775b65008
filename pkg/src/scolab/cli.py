"""Command-line entry point: ``scolab <experiment> [flags]``.

Exit status is 0 when every verdict passes, 2 when any fails and 64 when
the experiment specification is invalid.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import SpecError
from .experiments import EXPERIMENTS, ExperimentSpec, run_experiment, table_csv

EXIT_OK, EXIT_FAIL, EXIT_SPEC = 0, 2, 64

log = logging.getLogger("scolab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scolab", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=int, help="single sample size")
    g.add_argument("--n-grid", type=_int_list, help="comma-separated sample sizes")
    p.add_argument("--trials", type=int, help="Monte-Carlo repetitions (experiment default if omitted)")
    s = p.add_mutually_exclusive_group()
    s.add_argument("--sigma", type=float, help="noise level in units of 1/sqrt(d)")
    s.add_argument("--sigma-grid", type=_float_list, help="comma-separated noise levels, units of 1/sqrt(d)")
    p.add_argument("--seed", type=int, help="master seed (required for stochastic experiments)")
    p.add_argument("--out", help="output file; a directory for 'figures'. stdout if omitted")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in JSON output")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the verdict summary on stderr")
    return p


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit(report, spec: ExperimentSpec, timing: bool = False) -> None:
    if spec.name == "figures":
        if spec.out is None:
            for name in ("figure1", "figure2"):
                sys.stdout.write(table_csv(report.tables[name]))
            return
        os.makedirs(spec.out, exist_ok=True)
        for name in ("figure1", "figure2"):
            _write(os.path.join(spec.out, f"{name}.csv"), table_csv(report.tables[name]))
        return
    if spec.format == "json":
        _write(spec.out, report.to_json(timing=timing))
    elif "bounds" in report.tables:
        _write(spec.out, table_csv(report.tables["bounds"], report.meta))
    else:
        _write(spec.out, report.to_csv())


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        spec = ExperimentSpec(name=args.experiment, n=args.n, n_grid=args.n_grid,
                              trials=args.trials, sigma=args.sigma, sigma_grid=args.sigma_grid,
                              seed=args.seed, out=args.out, format=args.format)
        report = run_experiment(spec)
    except SpecError as exc:
        log.error("spec error: %s", exc)
        return EXIT_SPEC
    emit(report, spec, timing=args.timing)
    if not args.quiet:
        for m in report.metrics:
            if m.verdict != "informational":
                log.info("%-4s %s  estimate=%s  reference=%s", m.verdict.upper(), m.name,
                         _fmt(m.estimate), _fmt(m.analytic_value))
        log.info("%s: %d metrics, %d failed, %.1fs", spec.name, len(report.metrics),
                 len(report.failures()), report.wall_clock_s)
    return EXIT_OK if report.passed else EXIT_FAIL


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.6g}"


if __name__ == "__main__":
    sys.exit(main())
