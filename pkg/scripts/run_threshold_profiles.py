"""Nash and planner profiles of the cities game on the threshold graphon."""

import argparse
from pathlib import Path

from graphon_games.cli import emit_plot_data
from graphon_games.equilibrium import planner_optimum, price_of_anarchy, solve_nash
from graphon_games.function_space import make_grid
from graphon_games.game import builtin_cities
from graphon_games.graphon import SimpleThreshold, discretize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--thetas", default="0.1,0.4,0.7")
    ap.add_argument("--gridM", type=int, default=1024)
    ap.add_argument("--out", default="out/threshold")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    op = discretize(SimpleThreshold(), make_grid(args.gridM), "adapted")
    for theta in map(float, args.thetas.split(",")):
        spec = builtin_cities(1.0, theta)
        nash = solve_nash(spec, op)
        plan = planner_optimum(spec, op)
        emit_plot_data(nash.profile, out / f"nash_theta{theta:g}.dat", ylabel="alpha")
        emit_plot_data(plan.profile, out / f"planner_theta{theta:g}.dat", ylabel="alpha")
        print(f"theta={theta:g}: PoA {price_of_anarchy(spec, op, nash, plan):.6f}")


if __name__ == "__main__":
    main()
