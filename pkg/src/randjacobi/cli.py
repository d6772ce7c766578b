"""Command-line front end.

Exit status is 0 on success, 1 when a computation fails and 2 on usage
errors (unknown verb, missing argument, unusable path).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .eigensolve import eigendecompose
from .errors import JacobiError
from .experiments import (
    ExperimentConfig,
    carleman_partial_sums,
    report_json,
    run_counterexample,
    run_experiment,
)
from .measures import check_semiinfinite_relation, matrix_measure, site_measure
from .operator import load_operator

VERBS = ("spectrum", "measure", "relation", "experiment", "counterexample", "carleman")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Command:
    verb: str
    input: str | None = None
    output: str | None = None
    config: str | None = None
    seed: int | None = None
    trials: int | None = None
    site: int | None = None
    matrix: bool = False
    size: int = 3
    workers: int = 1


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randjacobi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", metavar="VERB")
    sub.required = True

    p = sub.add_parser("spectrum", help="eigenvalues and eigenvectors of a matrix file")
    p.add_argument("--input", required=True)
    p.add_argument("--output")

    p = sub.add_parser("measure", help="spectral measure of a site as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--site", type=int, required=True)
    p.add_argument("--matrix", action="store_true",
                   help="emit the 2x2 matrix measure of sites (site, site+1)")
    p.add_argument("--output")

    p = sub.add_parser("relation", help="residuals of the measure/polynomial relations")
    p.add_argument("--input", required=True)
    p.add_argument("--site", type=int, required=True)
    p.add_argument("--output")

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--trials", type=_u64)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output")

    p = sub.add_parser("counterexample", help="the free-matrix non-equivalence example")
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--output")

    p = sub.add_parser("carleman", help="Carleman partial sums for a coefficient rule")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    return parser


def parse_args(argv) -> Command:
    """Parse ``argv`` into a :class:`Command`; raises :class:`UsageError`."""
    ns = _build_parser().parse_args(list(argv))
    cmd = Command(**{k: v for k, v in vars(ns).items() if v is not None})
    for path in (cmd.input, cmd.config):
        if path is not None and not Path(path).is_file():
            raise UsageError(f"no such file: {path}")
    if cmd.output is not None:
        parent = Path(cmd.output).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise UsageError(f"cannot write to {cmd.output}")
    return cmd


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def run(cmd: Command) -> int:
    """Execute ``cmd``; returns the process exit status."""
    try:
        return _dispatch(cmd)
    except (JacobiError, ValueError, KeyError, TypeError, OSError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        print(f"randjacobi {cmd.verb}: {msg}", file=sys.stderr)
        return 1


def _dispatch(cmd: Command) -> int:
    if cmd.verb == "spectrum":
        ed = eigendecompose(load_operator(cmd.input))
        _emit(json.dumps(ed.to_dict()) + "\n", cmd.output)
        return 0

    if cmd.verb in ("measure", "relation"):
        H = load_operator(cmd.input)
        if cmd.site not in H.interval or (cmd.matrix and cmd.site + 1 not in H.interval):
            raise JacobiError(f"site {cmd.site} is out of range [{H.lo}, {H.hi}]")
        ed = eigendecompose(H)
        if cmd.verb == "relation":
            rep = check_semiinfinite_relation(ed, H, cmd.site)
            out = {
                "site": cmd.site,
                "max_s_residual": rep.max_s,
                "max_c_residual": rep.max_c,
                "locations": [float(x) for x in rep.locations],
                "s_residuals": [float(x) for x in rep.s_residuals],
                "c_residuals": [float(x) for x in rep.c_residuals],
            }
            _emit(json.dumps(out, indent=2) + "\n", cmd.output)
            return 0
        target = cmd.output if cmd.output is not None else sys.stdout
        if cmd.matrix:
            matrix_measure(ed, cmd.site).to_csv(target)
        else:
            site_measure(ed, cmd.site).to_csv(target)
        return 0

    if cmd.verb == "experiment":
        cfg = ExperimentConfig.from_dict(_read_json(cmd.config))
        cfg = cfg.with_overrides(seed=cmd.seed, trials=cmd.trials)
        _emit(report_json(run_experiment(cfg, workers=cmd.workers)), cmd.output)
        return 0

    if cmd.verb == "counterexample":
        rep = run_counterexample(cmd.size)
        print(f"{'check':<24}{'value':>26}{'expected':>22}  result")
        for c in rep["checks"]:
            print(f"{c['name']:<24}{c['value']!r:>26}{c['expected']!r:>22}  "
                  f"{'PASS' if c['passed'] else 'FAIL'}")
        if cmd.output is not None:
            Path(cmd.output).write_text(report_json(rep))
        return 0 if rep["passed"] else 1

    data = _read_json(cmd.config)
    if "N" not in data:
        raise JacobiError("carleman config needs N")
    rule = {k: v for k, v in data.items() if k != "N"}
    sums = carleman_partial_sums(rule, int(data["N"]))
    _emit(json.dumps({"rule": rule, "N": int(data["N"]),
                      "partial_sums": [float(x) for x in sums]}, indent=2) + "\n",
          cmd.output)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        print(f"randjacobi: error: {exc}", file=sys.stderr)
        return 2
    return run(cmd)


def entry() -> None:
    sys.exit(main())
