"""epsilon-Nash gap of the block-averaged graphon equilibrium as N grows."""

import argparse
from pathlib import Path

from graphon_games.cli import emit_plot_data, parse_graphon
from graphon_games.convergence_lab import StudyConfig, run_epsilon_study, write_rate_table
from graphon_games.finite_game import BetaGrid
from graphon_games.game import builtin_beach


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--graphon", default="constant:0.5")
    ap.add_argument("--Nlist", default="50,100,200,400,800")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--plain-mc", action="store_true", help="independent draws instead of antithetic pairs")
    ap.add_argument("--out", default="out/epsilon")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = StudyConfig(parse_graphon(args.graphon), builtin_beach(), tuple(int(n) for n in args.Nlist.split(",")),
                      "bernoulli", tuple(range(args.seeds)), 1600)
    table = run_epsilon_study(cfg, BetaGrid(), args.samples, antithetic=not args.plain_mc)
    write_rate_table(table, out / "epsilon.csv", out / "epsilon_meta.json")
    emit_plot_data(table, out / "epsilon.dat")
    for N, v in table.medians("epsilon").items():
        print(f"N={N:5d}  median epsilon {v:.3e}")


if __name__ == "__main__":
    main()
