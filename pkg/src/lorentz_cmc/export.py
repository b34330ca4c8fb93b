"""Flat-file exports: OBJ mesh, PGM cell map, singular-curve CSV, JSON report.

All writers are deterministic: floats are printed with 17 significant
digits and iteration follows grid order.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema
import numpy as np

from .iwasawa import CellTag
from .surface import SurfaceGrid

CELL_GRAY = {
    CellTag.BIG_CELL_PLUS: 255,
    CellTag.BIG_CELL_MINUS: 200,
    CellTag.P1: 128,
    CellTag.P2: 64,
    CellTag.HIGHER: 0,
    CellTag.UNKNOWN: 0,
}

NULL_AXIS = np.array([0.0, 1.0, 1.0]) / np.sqrt(2)


def _num(v: float) -> str:
    return format(float(v), ".17g")


def rescale_null_axis(p: np.ndarray, factor: float) -> np.ndarray:
    """Stretch positions along (e2 + e3)/sqrt(2) by ``factor``."""
    if factor == 1.0:
        return p
    return p + (factor - 1.0) * (p @ NULL_AXIS)[..., None] * NULL_AXIS


def companion_csv_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".singular.csv")


def export_obj(sg: SurfaceGrid, path, rescale_e2e3: float = 1.0) -> Path:
    """Mesh of the valid samples; also writes the singular-band companion CSV."""
    path = Path(path)
    ny, nx = sg.shape
    index = np.zeros((ny, nx), dtype=int)
    f = rescale_null_axis(np.where(sg.valid[..., None], sg.f, 0.0), rescale_e2e3)
    lines = ["# lorentz-cmc surface", f"# grid {nx} x {ny}, H = {_num(sg.H)}"]
    n = 0
    for i in range(ny):
        for j in range(nx):
            if sg.valid[i, j]:
                n += 1
                index[i, j] = n
                lines.append("v " + " ".join(_num(c) for c in f[i, j]))
    for i in range(ny - 1):
        for j in range(nx - 1):
            quad = [index[i, j], index[i, j + 1], index[i + 1, j + 1], index[i + 1, j]]
            ok = [q > 0 for q in quad]
            if all(ok):
                lines.append(f"f {quad[0]} {quad[1]} {quad[2]}")
                lines.append(f"f {quad[0]} {quad[2]} {quad[3]}")
            elif sum(ok) == 3:
                tri = [q for q in quad if q > 0]
                lines.append(f"f {tri[0]} {tri[1]} {tri[2]}")
    path.write_text("\n".join(lines) + "\n")

    with open(companion_csv_path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "row", "col", "x", "y", "f1", "f2", "f3"])
        for i, j in zip(*np.nonzero((sg.tag == CellTag.P1) & sg.valid)):
            w.writerow([index[i, j], i, j, _num(sg.z[i, j].real), _num(sg.z[i, j].imag),
                        *(_num(c) for c in f[i, j])])
    return path


def cellmap_array(sg: SurfaceGrid) -> np.ndarray:
    """Gray levels with image row 0 at the largest y."""
    lut = np.array([CELL_GRAY[CellTag(k)] for k in range(len(CellTag))], dtype=np.uint8)
    return lut[sg.tag.astype(int)][::-1]


def export_cellmap(sg: SurfaceGrid, path) -> Path:
    path = Path(path)
    img = cellmap_array(sg)
    h, w = img.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def export_curve(sg: SurfaceGrid, records: list[dict], path, reference=None) -> Path:
    """Samples on y = 0 with the surface position and classification.

    ``reference`` optionally gives the prescribed curve at the same
    abscissae for side-by-side comparison.
    """
    path = Path(path)
    row = sg.grid.j_row
    by_x = {r["x0"]: r for r in records}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "f1", "f2", "f3", "ref1", "ref2", "ref3", "type"])
        if row is not None:
            for j, x in enumerate(sg.grid.xs):
                rec = by_x.get(float(x))
                if rec is None:
                    continue
                ref = reference[j] if reference is not None else (np.nan,) * 3
                w.writerow([_num(x), *(_num(c) for c in sg.f[row, j]),
                            *(_num(c) for c in ref), rec["type"]])
    return path


def report_json(report) -> str:
    from .pipeline import load_schema
    doc = report.to_dict() if hasattr(report, "to_dict") else report
    jsonschema.validate(doc, load_schema("report"))
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def export_report(report, path) -> Path:
    path = Path(path)
    path.write_text(report_json(report))
    return path
