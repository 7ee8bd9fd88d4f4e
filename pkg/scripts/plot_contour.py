#!/usr/bin/env python3
"""Render a contour CSV (plus marker sidecar) produced by `swapsim contour`.

Usage: plot_contour.py <out-dir-of-contour-command> [target.png]

Optional helper; matplotlib is not a package dependency.
"""

import json
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def main() -> None:
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    run_dir = Path(sys.argv[1])
    target = Path(sys.argv[2]) if len(sys.argv) > 2 else run_dir / "contour.png"

    rows = [line.split(",") for line in (run_dir / "contour.csv").read_text().splitlines()]
    v_axis = np.array([float(x) for x in rows[0][1:]])
    s_axis = np.array([float(r[0]) for r in rows[1:]])
    fid = np.array([[float(x) for x in r[1:]] for r in rows[1:]])

    fig, ax = plt.subplots(figsize=(6, 4.5))
    levels = np.linspace(0.25, 1.0, 16)
    contour = ax.contourf(v_axis, s_axis, fid, levels=levels, cmap="viridis")
    ax.contour(v_axis, s_axis, fid, levels=[0.5], colors="white", linewidths=1.2)
    fig.colorbar(contour, ax=ax, label="fidelity to the singlet")

    markers_file = run_dir / "markers.json"
    if markers_file.exists():
        for m in json.loads(markers_file.read_text())["markers"]:
            ax.plot(m["visibility"], m["s_tau_over_hbar"], "o", color="crimson")
            ax.annotate(
                f"{m['name']} ({m['fidelity']:.2f})",
                (m["visibility"], m["s_tau_over_hbar"]),
                textcoords="offset points",
                xytext=(6, 4),
                color="white",
                fontsize=8,
            )

    ax.set_xlabel("HOM visibility")
    ax.set_ylabel(r"$S\,\tau_X/\hbar$")
    fig.tight_layout()
    fig.savefig(target, dpi=160)
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
