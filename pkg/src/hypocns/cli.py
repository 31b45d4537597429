"""Command-line entry point: ``hypocns {linear,simulate,norms,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .diagnostics import FunctionalConfig, besov_minus1, energy_E0, hs_norm_sq, lambda_norm, series_name
from .errors import HypoCNSError, MalformedReport
from .harness import ExperimentConfig, compare_rates, load_state, run_experiment
from .spectral import PhysParams


def _s1_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --s1 list {text!r}") from exc


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--box-len", dest="box_len", type=float)
    p.add_argument("--s1", dest="s1_list", type=_s1_list, help="comma-separated derivative orders")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--tolerance", type=float)


_OVERRIDES = ("beta", "gamma", "n", "box_len", "s1_list", "t_end", "dt", "amplitude", "seed", "out", "tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypocns", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linear", help="linear decay study (continuum or periodic box)")
    p.add_argument("--mode", choices=("linear_r2", "linear_torus"), default="linear_r2")
    _common(p)

    p = sub.add_parser("simulate", help="nonlinear decay study")
    _common(p)

    p = sub.add_parser("norms", help="evaluate norms of a saved state (.npz)")
    p.add_argument("state")
    p.add_argument("--s1", dest="s1_list", type=_s1_list, default=[0.0])
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=1.0)

    p = sub.add_parser("report", help="check the verdicts of a report.json")
    p.add_argument("report")
    return parser


def _config(args, mode: str) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    overrides["mode"] = mode
    if args.config:
        return ExperimentConfig.from_json(args.config, **overrides)
    return ExperimentConfig.from_mapping(overrides)


def _norms(args) -> dict:
    state, t = load_state(args.state)
    params = PhysParams(args.beta, args.gamma)
    fc = FunctionalConfig()
    out = {
        "t": t,
        "n": state.grid.n,
        "box_len": state.grid.box_len,
        "L2_a": state.a.l2_norm(),
        "L2_u": math.hypot(*(f.l2_norm() for f in state.u)),
        "Hs": math.sqrt(sum(hs_norm_sq(f, fc.s) for f in state.fields)),
        "E0": energy_E0(state, fc, params),
        "besov_minus1": besov_minus1(state),
        "min_density": state.min_density(),
    }
    for s1 in args.s1_list:
        out[series_name(s1)] = lambda_norm(state, s1)
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "norms":
            print(json.dumps(_norms(args), indent=2))
            return 0
        if args.command == "report":
            return compare_rates(args.report)
        mode = args.mode if args.command == "linear" else "nonlinear"
        report = run_experiment(_config(args, mode))
        return compare_rates(report) if report["fits"] else _degenerate(report)
    except MalformedReport as exc:
        print(f"malformed report: {exc}", file=sys.stderr)
        return 2
    except (HypoCNSError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _degenerate(report: dict) -> int:
    for e in report["fit_errors"]:
        print(f"FAIL {e['series']}: {e['error']}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
