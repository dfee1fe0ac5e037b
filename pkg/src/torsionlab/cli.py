"""Command-line entry point.

Exit status: 0 on success, 1 when a checked inequality or agreement test
fails, 2 on configuration or resolution errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .discretize import UnresolvableFeatureError
from .experiments import RUNNERS, ConfigError, ExperimentConfig, _json_default

log = logging.getLogger("torsionlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _point(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad point {text!r}; use x,y[,z]") from exc


def _int_list(text):
    return [int(t) for t in text.split(",") if t]


def _float_list(text):
    return [float(t) for t in text.split(",") if t]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with experiment parameters; flags override it")
    common.add_argument("--domain", help="domain as a JSON object or a path to a JSON file")
    common.add_argument("--h", type=float, help="grid spacing (default: selection rule)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output directory for JSON and CSV files")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--point", type=_point, action="append", dest="points", help="probe point x,y[,z]")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="torsionlab", description="Torsion function and principal eigenvalue toolkit.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in ("torsion", "eig", "product"):
        sub.add_parser(name, parents=[common], help=f"{name} on one domain")
    s = sub.add_parser("convex-sweep", parents=[common], help="rectangles and ellipses across aspect ratios")
    s.add_argument("--aspect-ratios", type=_float_list, dest="aspect_ratios")
    s.add_argument("--shapes", type=lambda t: t.split(","))
    s = sub.add_parser("perforated-sweep", parents=[common], help="perforated cube at the near-extremal radius")
    s.add_argument("--N", type=_int_list, dest="N")
    s.add_argument("--alpha", type=float)
    s.add_argument("--L", type=float)
    s.add_argument("--m", type=int)
    s.add_argument("--C", type=float, help="two-sided cell-eigenvalue constant (m >= 3)")
    s.add_argument("--calC", type=float, help="decay constant for the product bound")
    s = sub.add_parser("verify-bounds", parents=[common], help="check every inequality on a corpus")
    s.add_argument("--replay", action="append", help="SpectralResult JSON file to check instead of solving")
    s.add_argument("--no-corpus", action="store_true", help="skip the default corpus")
    s.add_argument("--C", type=float)
    s.add_argument("--calC", type=float)
    s = sub.add_parser("wos", parents=[common], help="walk-on-spheres torsion estimate")
    s.add_argument("--n-walks", type=int, dest="n_walks")
    s.add_argument("--eps-shell", type=float, dest="eps_shell")
    s = sub.add_parser("survival", parents=[common], help="survival-probability integral")
    s.add_argument("--dt", type=float)
    s.add_argument("--t-max", type=float, dest="t_max")
    s = sub.add_parser("oracle-check", parents=[common], help="compare FD, walk-on-spheres and survival")
    s.add_argument("--n-walks", type=int, dest="n_walks")
    s.add_argument("--eps-shell", type=float, dest="eps_shell")
    s.add_argument("--dt", type=float)
    s.add_argument("--t-max", type=float, dest="t_max")
    return p


def _load_domain(text):
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"domain is neither a file nor JSON: {exc}") from exc


def config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        base = ExperimentConfig.from_file(args.config).__dict__.copy()
    base["experiment"] = args.experiment
    skip = {"config", "experiment", "verbose", "domain", "no_corpus", "replay"}
    for k, v in vars(args).items():
        if k not in skip and v is not None:
            base[k] = v
    if args.domain:
        base["domain"] = _load_domain(args.domain)
    if getattr(args, "replay", None):
        base["replay"] = args.replay
    if getattr(args, "no_corpus", False):
        base["corpus"] = []
    cfg = ExperimentConfig.from_dict(base)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        out = RUNNERS[cfg.experiment](cfg)
    except (ConfigError, UnresolvableFeatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out:
        for p in out.write(cfg.out, cfg.experiment):
            log.info("wrote %s", p)
    json.dump(out.report, sys.stdout, indent=2, default=_json_default)
    sys.stdout.write("\n")
    return EXIT_FAIL if out.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
