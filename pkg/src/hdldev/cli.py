"""Command-line driver for the experiment suites.

Each suite writes ``<suite>.csv`` (the main table) and ``<suite>_checks.csv``
into ``--out``, plus suite-specific data files (see ``extra_tables``).
Exit code 0 means every check passed, 1 an assertion failure, 2 a
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import inspect
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import load_config
from .errors import ConfigError, ValidationError

log = logging.getLogger("hdldev")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, meta: dict):
    """Header row, data rows, then a ``# key=value`` metadata block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        for key in ("seed", "git-describe", "config-hash"):
            fh.write(f"# {key}={meta.get(key, '')}\n")
    return path


def extra_tables(result: ex.SuiteResult):
    """Suite-specific data files: yields (stem, columns, rows)."""
    x = result.extra
    if result.suite == "scheme-order":
        sol = x["solution"]
        n = sol.values.shape[1]
        yield ("scheme_order_solution", ("t", "x", "value"),
               [(t, k / n, v) for t, vals in zip(sol.times, sol.values) for k, v in enumerate(vals)])
    elif result.suite in ("lln", "lln-perturbed"):
        yield (result.suite.replace("-", "_") + "_replicas", ("N", "ell", "replica", "sup_err"),
               [(n, ell, r, e) for (n, ell), errs in x["errors"].items() for r, e in enumerate(errs)])
    elif result.suite == "invert-h":
        yield ("invert_h_profile", ("M", "t", "x", "H"),
               [(m, x["t_slice"], xi, hi) for m, (xs, hs) in x["slices"].items() for xi, hi in zip(xs, hs)])
    elif result.suite == "concentration":
        yield ("concentration_replicas", ("ell", "replica", "sup_Y"),
               [(ell, r, s) for ell, sups in x["sups"].items() for r, s in enumerate(sups)])
    elif result.suite == "is-estimate":
        est = x["estimate"]
        yield ("is_estimate_replicas", ("replica", "log_weight", "in_tube"),
               [(r, lw, t) for r, (lw, t) in enumerate(zip(est.log_weights, est.in_tube))])


def _suite_kwargs(name, args, cfg):
    fn = ex.SUITES[name]
    target = ex.run_lln if name.startswith("lln") else fn
    accepted = inspect.signature(target).parameters
    kw = {}
    if cfg is not None:
        if "setup" in accepted:
            kw["setup"] = ex.Setup(cfg.reaction, cfg.perturbation, cfg.initial)
        if "t_final" in accepted:
            kw["t_final"] = cfg.t_final
        if "replicas" in accepted:
            kw["replicas"] = cfg.replicas
        if "seed" in accepted:
            kw["seed"] = cfg.seed
    if args.seed is not None and "seed" in accepted:
        kw["seed"] = args.seed
    if args.replicas is not None and "replicas" in accepted:
        kw["replicas"] = args.replicas
    if "threads" in accepted:
        kw["threads"] = args.threads
    return fn, kw


def run(name, args) -> int:
    cfg = None
    try:
        if args.config:
            cfg = load_config(args.config)
        if args.replicas is not None and args.replicas < 1:
            raise ConfigError("--replicas must be positive")
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        fn, kw = _suite_kwargs(name, args, cfg)
    except (ConfigError, ValidationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = fn(**kw)
    meta = {"seed": kw.get("seed", 0), "git-describe": git_describe(),
            "config-hash": cfg.config_hash if cfg is not None else "default"}
    out = Path(args.out)
    stem = name.replace("-", "_")
    write_csv(out / f"{stem}.csv", result.columns, result.rows, meta)
    write_csv(out / f"{stem}_checks.csv", ("check", "passed", "detail"),
              [(c.name, c.passed, c.detail) for c in result.checks], meta)
    for extra_stem, cols, rows in extra_tables(result):
        write_csv(out / f"{extra_stem}.csv", cols, rows, meta)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {name}:{c.name} {c.detail}")
    return EXIT_OK if result.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdldev", description="Run the lattice reaction-diffusion experiment suites.")
    sub = p.add_subparsers(dest="suite", required=True)
    for name in ex.SUITES:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH", help="INI run configuration")
        s.add_argument("--out", metavar="DIR", default="results")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--replicas", type=int, default=None, help="overrides the configuration")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.suite, args)


if __name__ == "__main__":
    sys.exit(main())
