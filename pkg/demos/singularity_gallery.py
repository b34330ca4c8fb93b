# coding: utf-8

# # Singularity gallery
#
# Three sets of Bjorling data, one for each generic singularity type at
# x = 0, classified first from the data alone and then built as surfaces.

from pathlib import Path

import numpy as np

from lorentz_cmc.export import export_obj
from lorentz_cmc.pipeline import classify_only, parse_config_dict, run_pipeline

out = Path("gallery_out")
out.mkdir(exist_ok=True)

gallery = {
    "cuspidal_edge": {"s": [1.0], "t": [1.0], "theta": [0.0, 1.0]},
    "swallowtail": {"s": [0.0, 1.0], "t": [1.0], "theta": [0.0, 0.0001]},
    "cross_cap": {"s": [1.0, -1.0], "t": [0.0, 1.0], "theta": [0.0, 0.001]},
}

# ## Classification from the data
#
# Only s, t and their first derivatives at x0 are needed.

for name, data in gallery.items():
    rep = classify_only(parse_config_dict({"H": 1.0, **data}))
    print(f"{name:14s} -> {rep.record_for(0.0)['type']}")

# ## Surfaces
#
# With theta' tiny the swallowtail is very flat along the null direction;
# stretching the mesh along (e2 + e3)/sqrt(2) makes its shape visible.

for name, data in gallery.items():
    cfg = parse_config_dict({"H": 1.0, **data,
                             "grid": {"x_range": [-1, 1], "y_range": [-0.3, 0.3], "nx": 61, "ny": 21}})
    sg, report = run_pipeline(cfg)
    stretch = 200.0 if name == "swallowtail" else 1.0
    export_obj(sg, out / f"{name}.obj", rescale_e2e3=stretch)
    print(f"{name:14s} valid samples {int(sg.valid.sum())}/{sg.valid.size}, "
          f"cells {report.grid_stats['cell_counts']}")

# ## Degenerate data
#
# theta' = 0 everywhere: no big cell touches the curve, so no surface is built.

sg, rep = run_pipeline(parse_config_dict({"H": 1.0, "s": [1.0], "t": [1.0], "theta": [0.3]}))
print("constant theta ->", rep.status, "| surface built:", sg is not None)
