"""Command-line entry point.

    lorentz-cmc run --config cfg.json [--out-dir DIR] [--threads N]
    lorentz-cmc classify --config cfg.json
    lorentz-cmc validate --config cfg.json

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The log level comes from LORENTZ_CMC_LOG_LEVEL (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bjorling import BjorlingError, data_to_singular_potential, reconstruct_curve
from .export import export_cellmap, export_curve, export_obj, export_report, report_json
from .iwasawa import IwasawaError
from .pipeline import ConfigError, NumericalFailure, classify_only, parse_config, run_sweep
from .potentials import (ConditionAError, DomainError, IntegrationError,
                         translate_to_standard, validate_standard)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
LOG_ENV = "LORENTZ_CMC_LOG_LEVEL"

log = logging.getLogger("lorentz_cmc")


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _out_path(out_dir: Path, name: str | None, suffix: str = "") -> Path | None:
    if name is None:
        return None
    p = Path(name)
    if suffix:
        p = p.with_name(p.stem + suffix + p.suffix)
    return p if p.is_absolute() else out_dir / p


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grids, report = run_sweep(cfg, threads=args.threads)
    o = cfg.outputs
    multi = len(grids) > 1
    for angle, sg in zip(cfg.lambda0, grids):
        sfx = f"_lam{angle:g}" if multi else ""
        if (p := _out_path(out_dir, o.mesh, sfx)) is not None:
            export_obj(sg, p, o.rescale_e2e3)
        if (p := _out_path(out_dir, o.cellmap, sfx)) is not None:
            export_cellmap(sg, p)
        if (p := _out_path(out_dir, o.curve, sfx)) is not None:
            d = cfg.bjorling_data()
            ref = None
            if sg.grid.j_row is not None and angle % 360 == 0:
                xs = np.clip(sg.grid.xs, *d.J)
                ref = reconstruct_curve(d, xs)
            export_curve(sg, report.records, p, ref)
    if (p := _out_path(out_dir, o.report)) is not None:
        export_report(report, p)
    summary = {"status": report.status, "records": len(report.records),
               "cell_counts": report.grid_stats.get("cell_counts")}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = parse_config(args.config)
    sys.stdout.write(report_json(classify_only(cfg)))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    d = cfg.bjorling_data()
    xi = data_to_singular_potential(d)
    grid = cfg.grid_spec()
    check = validate_standard(translate_to_standard(xi), grid)
    print(json.dumps({"config": "ok", "standard_potential_regular": check.passed,
                      "min_abs_beta_12": check.min_abs}))
    return EXIT_OK if check.passed else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lorentz-cmc",
                                description="CMC surfaces with singularities in Minkowski space.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="build the surface and write all outputs")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=".")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("classify", help="classify singular points without integrating")
    c.add_argument("--config", required=True)
    c.set_defaults(func=cmd_classify)
    v = sub.add_parser("validate", help="check the configuration and potential")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, BjorlingError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, IwasawaError, IntegrationError, DomainError,
            ConditionAError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
