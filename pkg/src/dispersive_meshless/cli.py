"""Command line front end: ``run``, ``compare``, ``oracle`` and ``sweep``.

Exit status is 0 on success, 2 for configuration problems and 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .config import load_config, with_overrides
from .errors import ConfigParseError, ConfigValidationError, MeshlessError
from .oracles import empty_cavity_modes

log = logging.getLogger("dispersive_meshless")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _range(text):
    try:
        lo, hi, n = text.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        return np.linspace(float(lo), float(hi), n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:steps, got {text!r}") from None


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "mode", None):
        changes["solver_basis_mode"] = args.mode
    if getattr(args, "out", None):
        changes["output_directory"] = str(args.out)
    return with_overrides(cfg, **changes) if changes else cfg


def _print(items: dict):
    for k, v in items.items():
        print(f"{k} = {v}")


def cmd_run(args):
    cfg = _load(args)
    res = ex.run_experiment(cfg, Path(cfg.output_directory))
    _print(res.summary())
    return EXIT_OK


def cmd_compare(args):
    cfg = _load(args)
    _print(ex.compare_modes(cfg, Path(cfg.output_directory)).report)
    return EXIT_OK


def cmd_oracle(args):
    cfg = _load(args)
    lo, hi = cfg.diagnostics_oracle_band
    print("# empty cavity (closed form)")
    for f, m, n in empty_cavity_modes(cfg.cavity_width, cfg.cavity_height, hi):
        if f >= lo:
            print(f"TE({m},{n}) = {f!r}")
    if cfg.plasma_present:
        print("# plasma loaded (finite differences)")
        for f in ex.oracle_frequencies(cfg):
            print(f"mode = {f!r}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    rows = ex.sweep(cfg, args.param, args.range, Path(cfg.output_directory))
    print(f"{args.param},dominant_hz,oracle_hz,relative_error")
    for row in rows:
        print(",".join(repr(x) for x in row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dispersive-meshless", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write its artifacts")
    r.add_argument("config")
    r.add_argument("--out", type=Path)
    r.add_argument("--mode", choices=("vector", "scalar"))
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run vector and scalar bases side by side")
    c.add_argument("config")
    c.add_argument("--out", type=Path)
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", help="print reference resonances for a config")
    o.add_argument("config")
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("sweep", help="dominant-peak error against a kernel parameter")
    s.add_argument("config")
    s.add_argument("--param", default="shape_parameter", choices=("shape_parameter", "support_factor"))
    s.add_argument("--range", type=_range, required=True, metavar="LO:HI:STEPS")
    s.add_argument("--out", type=Path)
    s.add_argument("--mode", choices=("vector", "scalar"))
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshlessError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
