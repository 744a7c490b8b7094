"""Command-line interface.

Examples
--------
    lmgboot bootstrap --L 8 --gamma 1 --hx 1 --hz 1 --sectors all --out results.csv
    lmgboot compare --L 6 --gamma 0.5 --hx 0.5 --hz 1
    lmgboot toy --L 4
    lmgboot bootstrap --config run.cfg --format json --out results.json
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .runner import EXIT_INVALID, MODES, ConfigError, parse_config_text, run, validate_config

# CLI flag -> configuration key
_FLAGS = {
    "L": "L",
    "gamma": "gamma",
    "hx": "hx",
    "hz": "hz",
    "sectors": "sectors",
    "measures": "measures",
    "tau_null": "tau_null",
    "tau_res": "tau_res",
    "tau_deg": "tau_deg",
    "out": "output",
    "format": "format",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmgboot",
        description="Bootstrap spectra and entanglement of the LMG model.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", type=Path, help="key=value or JSON configuration file")
        p.add_argument("--L", type=str, help="number of spins")
        p.add_argument("--gamma", type=str)
        p.add_argument("--hx", type=str)
        p.add_argument("--hz", type=str)
        p.add_argument("--sectors", type=str, help="'all' or comma list such as 0,1 or 1/2,3/2")
        p.add_argument("--measures", type=str, help="'all' or comma list of concurrence,tangle,residual,qfi,entropy")
        p.add_argument("--tau-null", dest="tau_null", type=str)
        p.add_argument("--tau-res", dest="tau_res", type=str)
        p.add_argument("--tau-deg", dest="tau_deg", type=str)
        p.add_argument("--out", type=str, help="table path; plot data goes next to it")
        p.add_argument("--format", type=str, choices=["csv", "json"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    data: dict = {}
    try:
        if args.config is not None:
            text = args.config.read_text(encoding="utf-8")
            data.update(parse_config_text(text))
        for flag, key in _FLAGS.items():
            val = getattr(args, flag)
            if val is not None:
                data[key] = val
        data["mode"] = args.mode
        cfg = validate_config(data)
    except ConfigError as e:
        for problem in e.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg, out=sys.stdout).exit_code


if __name__ == "__main__":
    sys.exit(main())
