"""Run configuration, end-to-end orchestration and the classification report."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bjorling import (BjorlingData, BjorlingError, classify_singularity,
                       is_degenerate, solve_bjorling)
from .iwasawa import DELTA_CELL, EPS_IWA
from .loop_algebra import DEFAULT_N
from .potentials import GridSpec
from .surface import InsufficientWindow, SurfaceGrid, mean_curvature_oracle

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


class NumericalFailure(RuntimeError):
    """A pipeline stage produced unusable numbers."""


def load_schema(name: str) -> dict:
    text = resources.files("lorentz_cmc").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class BjorlingConfig:
    s_coeffs: tuple
    t_coeffs: tuple
    theta_coeffs: tuple
    J: tuple = (-1.0, 1.0)


@dataclass(frozen=True)
class GridConfig:
    x_range: tuple | None = None   # defaults to J
    y_range: tuple = (-0.3, 0.3)
    nx: int = 101
    ny: int = 31


@dataclass(frozen=True)
class NumericsConfig:
    N: int = DEFAULT_N
    M: int | None = None
    h_step: float | None = None
    eps_iwa: float = EPS_IWA
    delta_cell: float = DELTA_CELL


@dataclass(frozen=True)
class OutputsConfig:
    mesh: str | None = "surface.obj"
    cellmap: str | None = "cellmap.pgm"
    curve: str | None = "curve.csv"
    report: str | None = "report.json"
    rescale_e2e3: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    H: float
    bjorling: BjorlingConfig
    lambda0: tuple = (0.0,)
    grid: GridConfig = field(default_factory=GridConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    # derived objects ----------------------------------------------------
    def bjorling_data(self) -> BjorlingData:
        b = self.bjorling
        return BjorlingData(b.s_coeffs, b.t_coeffs, b.theta_coeffs, self.H, b.J)

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(tuple(g.x_range or self.bjorling.J), tuple(g.y_range), g.nx, g.ny)

    def lambda0_values(self) -> list[complex]:
        return [complex(np.exp(1j * math.radians(a))) if a % 360 else 1.0 + 0j
                for a in self.lambda0]

    def to_dict(self) -> dict:
        d = asdict(self)

        def lists(v):
            if isinstance(v, dict):
                return {k: lists(x) for k, x in v.items()}
            if isinstance(v, (tuple, list)):
                return [lists(x) for x in v]
            return v
        d = lists(d)
        if d["grid"]["x_range"] is None:
            d["grid"]["x_range"] = list(self.bjorling.J)
        return {"H": d["H"], "lambda0": d["lambda0"], "bjorling": d["bjorling"],
                "grid": d["grid"], "numerics": d["numerics"], "outputs": d["outputs"]}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"duplicate key '{k}'")
        out[k] = v
    return out


SHORTHAND = {"s": "s_coeffs", "t": "t_coeffs", "theta": "theta_coeffs", "J": "J"}


def parse_config_text(text: str) -> RunConfig:
    if not text.strip():
        raise ConfigError("configuration is empty")
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from None
    return parse_config_dict(raw)


def parse_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return parse_config_text(text)


def parse_config_dict(raw) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    raw = dict(raw)
    # flat form {H, s, t, theta[, J]} is accepted as a shorthand for the bjorling block
    short = {k: raw.pop(k) for k in list(raw) if k in SHORTHAND}
    if short:
        if "bjorling" in raw:
            raise ConfigError("give either 'bjorling' or the shorthand keys s/t/theta, not both")
        raw["bjorling"] = {SHORTHAND[k]: v for k, v in short.items()}
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")

    b = raw["bjorling"]
    J = tuple(float(v) for v in b.get("J", (-1.0, 1.0)))
    bj = BjorlingConfig(tuple(map(float, b["s_coeffs"])), tuple(map(float, b["t_coeffs"])),
                        tuple(map(float, b["theta_coeffs"])), J)
    g = raw.get("grid", {})
    grid = GridConfig(
        x_range=tuple(map(float, g["x_range"])) if "x_range" in g else J,
        y_range=tuple(map(float, g.get("y_range", (-0.3, 0.3)))),
        nx=int(g.get("nx", 101)), ny=int(g.get("ny", 31)))
    n = raw.get("numerics", {})
    N = int(n.get("N", DEFAULT_N))
    M = n.get("M")
    if M is not None and M < 4 * N + 4:
        raise ConfigError(f"numerics/M: must be at least 4N + 4 = {4 * N + 4}")
    num = NumericsConfig(N=N, M=None if M is None else int(M),
                         h_step=None if n.get("h_step") is None else float(n["h_step"]),
                         eps_iwa=float(n.get("eps_iwa", EPS_IWA)),
                         delta_cell=float(n.get("delta_cell", DELTA_CELL)))
    o = raw.get("outputs", {})
    defaults = OutputsConfig()
    outs = OutputsConfig(**{k: o.get(k, getattr(defaults, k)) for k in
                            ("mesh", "cellmap", "curve", "report")},
                         rescale_e2e3=float(o.get("rescale_e2e3", 1.0)))
    cfg = RunConfig(H=float(raw["H"]), bjorling=bj,
                    lambda0=tuple(float(a) for a in raw.get("lambda0", [0.0])),
                    grid=grid, numerics=num, outputs=outs)
    try:
        cfg.bjorling_data()
        cfg.grid_spec()
    except (BjorlingError, ValueError) as e:
        raise ConfigError(str(e)) from None
    return cfg


# ---------------------------------------------------------------------------
# report


@dataclass
class Report:
    status: str
    degenerate: bool
    lambda0: list
    records: list
    grid_stats: dict
    provenance: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def record_for(self, x0: float) -> dict | None:
        for r in self.records:
            if r["x0"] == x0:
                return r
        return None


def j_samples(cfg: RunConfig) -> np.ndarray:
    """Grid abscissae on the real axis that lie in J."""
    grid = cfg.grid_spec()
    if grid.j_row is None:
        return np.array([])
    lo, hi = cfg.bjorling.J
    xs = grid.xs
    return xs[(xs >= lo) & (xs <= hi)]


def classification_records(cfg: RunConfig) -> list[dict]:
    d = cfg.bjorling_data()
    s1, t1, th1 = d.s.deriv(), d.t.deriv(), d.theta.deriv()
    out = []
    for x in sorted(j_samples(cfg)):
        x = float(x)
        out.append({"x0": x, "type": classify_singularity(d, x).value,
                    "s": float(d.s(x)), "t": float(d.t(x)), "s_prime": float(s1(x)),
                    "t_prime": float(t1(x)), "theta_prime": float(th1(x))})
    return out


def classify_only(cfg: RunConfig) -> Report:
    d = cfg.bjorling_data()
    return Report("classified", is_degenerate(d), list(cfg.lambda0),
                  classification_records(cfg), {}, _provenance(cfg))


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "version": __version__}


def run_sweep(cfg: RunConfig, threads: int = 1) -> tuple[list[SurfaceGrid], Report]:
    """All lambda0 surfaces plus the report; no surfaces for degenerate data."""
    d = cfg.bjorling_data()
    records = classification_records(cfg)
    if is_degenerate(d):
        log.info("theta' vanishes identically; data are degenerate, no surface built")
        return [], Report("degenerate", True, list(cfg.lambda0), records, {}, _provenance(cfg))
    nm = cfg.numerics
    grid = cfg.grid_spec()
    log.info("building %dx%d grid for %d spectral value(s)", grid.nx, grid.ny, len(cfg.lambda0))
    grids = solve_bjorling(d, grid, cfg.lambda0_values(), N=nm.N, M=nm.M, h_step=nm.h_step,
                           eps_iwa=nm.eps_iwa, delta_cell=nm.delta_cell, threads=threads)
    sg = grids[0]
    if sg.diagnostics["max_det_residual"] > 1e-6:
        raise NumericalFailure(
            f"frame integration: det residual {sg.diagnostics['max_det_residual']:.3e}")
    if grid.j_row is not None and not np.all(sg.valid[grid.j_row]):
        raise NumericalFailure("factorization: samples on the real axis failed to factor")
    try:
        mc = mean_curvature_oracle(sg)
        mce = {"max": mc.max_error, "mean": mc.mean_error, "count": mc.count}
    except InsufficientWindow:
        mce = None
    stats = {"shape": list(sg.shape), "cell_counts": sg.cell_counts(),
             "valid_samples": int(sg.valid.sum()),
             "max_iwasawa_residual": sg.diagnostics["max_iwasawa_residual"],
             "max_det_residual": sg.diagnostics["max_det_residual"],
             "mean_curvature_error": mce}
    return grids, Report("ok", False, list(cfg.lambda0), records, stats, _provenance(cfg))


def run_pipeline(cfg: RunConfig, threads: int = 1) -> tuple[SurfaceGrid | None, Report]:
    grids, report = run_sweep(cfg, threads)
    return (grids[0] if grids else None), report
