#include "plot.hpp"

namespace pnc::cli {

std::string bundle_plot_script() {
    return R"PY(#!/usr/bin/env python3
# Band diagram and density of states from bands.csv, dos.csv and gaps.csv.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def rows(name):
    with open(os.path.join(here, name), newline="") as f:
        return list(csv.DictReader(f))


bands = rows("bands.csv")
dos = rows("dos.csv")
gaps = rows("gaps.csv")

colors = {"even": "tab:blue", "odd": "tab:red", "mixed": "0.5"}
markers = {"even": "o", "odd": "s", "mixed": "x"}

fig, (ax_b, ax_d) = plt.subplots(1, 2, sharey=True, figsize=(7, 5), gridspec_kw={"width_ratios": [2, 1]})
for py in markers:
    for pz in colors:
        sel = [b for b in bands if b["parity_y"] == py and b["parity_z"] == pz]
        if not sel:
            continue
        ax_b.scatter([float(b["k_reduced"]) for b in sel], [float(b["frequency_GHz"]) for b in sel],
                     s=10, marker=markers[py], color=colors[pz], label=f"y {py}, z {pz}")
ax_d.plot([float(d["dos_per_GHz"]) for d in dos], [float(d["frequency_GHz"]) for d in dos], color="k", lw=1)
for g in gaps:
    for ax in (ax_b, ax_d):
        ax.axhspan(float(g["f_lo_GHz"]), float(g["f_hi_GHz"]), color="0.85", zorder=0)

ax_b.set_xlabel("k (pi / a)")
ax_b.set_ylabel("frequency (GHz)")
ax_b.set_xlim(0, 1)
ax_d.set_xlabel("DOS (1/GHz)")
ax_d.set_xlim(left=0)
ax_b.legend(fontsize=7, loc="lower right")
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "bundle.png")
fig.savefig(out, dpi=150)
)PY";
}

} // namespace pnc::cli
