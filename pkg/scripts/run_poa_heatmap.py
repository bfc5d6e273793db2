"""PoA of the cities game on the power-law families over a (theta, gamma) grid.

Writes poa_heatmap_<family>.dat in gnuplot nonuniform-matrix layout; cells
where the price of anarchy is undefined hold NaN.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from graphon_games.cli import emit_heatmap
from graphon_games.equilibrium import poa_closed_form
from graphon_games.errors import ConditionViolation, ConfigError
from graphon_games.graphon import NormalizedPowerLaw, PowerLaw


def heatmap(family, thetas, gammas):
    vals = np.full((len(gammas), len(thetas)), math.nan)
    for i, g in enumerate(gammas):
        for j, t in enumerate(thetas):
            try:
                vals[i, j] = poa_closed_form(family(g), t)
            except (ConditionViolation, ConfigError):
                pass
    return vals


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--out", default="out/poa")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    thetas = np.linspace(0.01, 0.3, args.n)
    gammas = np.linspace(0.01, 0.3, args.n)
    for name, fam in (("powerlaw", PowerLaw), ("npowerlaw", NormalizedPowerLaw)):
        vals = heatmap(fam, thetas, gammas)
        emit_heatmap(thetas, gammas, vals, out / f"poa_heatmap_{name}.dat")
        print(f"{name}: {np.isnan(vals).sum()} of {vals.size} cells infeasible, "
              f"PoA in [{np.nanmin(vals):.4f}, {np.nanmax(vals):.4f}]")


if __name__ == "__main__":
    main()
