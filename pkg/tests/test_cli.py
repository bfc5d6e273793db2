import math

import numpy as np
import pytest

from graphon_games.cli import (RunConfig, emit_heatmap, emit_plot_data, emit_series, graphon_to_string, main,
                               parse_game, parse_graphon, parse_noise, read_manifest)
from graphon_games.convergence_lab import RateTable
from graphon_games.errors import ConfigError
from graphon_games.game import NoiseSpec
from graphon_games.graphon import Constant, NormalizedPowerLaw, PowerLaw, SimpleThreshold, StepMatrix, WattsStrogatz


def read_dat(path):
    rows = [l.split() for l in path.read_text().splitlines() if not l.startswith("#")]
    return np.array(rows, dtype=float)


def test_solve_constant(tmp_path, capsys):
    assert main(["solve", "--game", "beach", "--graphon", "constant:1", "--gridM", "512", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert lines[1] == "x,alpha,z" and len(lines) == 514
    alpha = np.array([float(l.split(",")[1]) for l in lines[2:]])
    assert np.max(np.abs(alpha - 0.5)) <= 1e-8
    assert (tmp_path / "manifest.ini").exists()


def test_poa_prints_value(tmp_path, capsys):
    assert main(["poa", "--game", "cities:k=1,theta=0.25", "--graphon", "constant:1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.strip().splitlines()[-1]
    assert out.startswith("0.888888888")
    header, row = (tmp_path / "poa.csv").read_text().splitlines()
    assert header == "nashCost,plannerCost,poa,poaClosedForm"
    poa, closed = map(float, row.split(",")[2:])
    assert poa == pytest.approx(8 / 9, abs=1e-12) and closed == pytest.approx(8 / 9, abs=1e-15)


def test_sample_graph_is_deterministic(tmp_path):
    args = ["sample-graph", "--graphon", "constant:0.5", "--N", "100", "--kind", "bernoulli", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("graph.csv", "graph.csv.latent"):
        a, b = (tmp_path / d / name for d in "ab")
        assert a.read_bytes() == b.read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert main(["solve", "--game", "chess", "--out", str(tmp_path / "c")]) == 2
    assert main(["solve", "--graphon", "wiggle:1", "--out", str(tmp_path / "c")]) == 2
    assert main(["solve", "--gridM", "0", "--out", str(tmp_path / "c")]) == 2
    assert main(["solve", "--game", "cities:k=1,theta=1.2", "--graphon", "constant:1",
                 "--out", str(tmp_path / "v")]) == 3
    err = capsys.readouterr().err
    assert "condition violation" in err and ">= 1" in err
    assert main(["solve", "--game", "cities:k=1,theta=0.9", "--graphon", "constant:1", "--max-iter", "3",
                 "--out", str(tmp_path / "n")]) == 4
    assert "error = non-convergence" in (tmp_path / "n" / "manifest.ini").read_text()


def test_override_iterates_past_certificate(tmp_path):
    # beach on Constant{3.3}: uniqueness value 1.1, and the iteration really does diverge
    args = ["solve", "--graphon", "constant:3.3", "--gridM", "64", "--max-iter", "50"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 3
    assert main(args + ["--override", "--out", str(tmp_path / "b")]) == 4
    # Constant{2.9} sits just inside the condition and solves without the flag
    assert main(["solve", "--graphon", "constant:2.9", "--gridM", "64", "--out", str(tmp_path / "c")]) == 0


def test_closed_form_and_finite_solve(tmp_path):
    assert main(["closed-form", "--game", "beach", "--graphon", "minmax", "--gridM", "128",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "closed_form.csv").read_text().startswith("x,value\n")
    assert main(["finite-solve", "--graphon", "constant:0.5", "--N", "30", "--method", "bri",
                 "--out", str(tmp_path / "f")]) == 0
    lines = (tmp_path / "f" / "finite.csv").read_text().splitlines()
    assert lines[0] == "i,alpha" and len(lines) == 31


def test_heatmap_marks_infeasible_cells(tmp_path):
    assert main(["poa", "--game", "cities:k=1,theta=0.1", "--graphon", "powerlaw:gamma=0.1",
                 "--theta-grid", "0.01:0.3:30", "--gamma-grid", "0.01:0.3:30", "--format", "dat",
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "poa_heatmap.dat").read_text().splitlines()
    assert lines[0].startswith("#") and lines[1].split()[0] == "30"
    thetas = np.array(lines[1].split()[1:], dtype=float)
    for line in lines[2:]:
        g, *vals = map(float, line.split())
        for t, v in zip(thetas, vals):
            assert math.isnan(v) == (1 - 2 * g - 2 * t <= 0)
    assert sum(l.count("nan") for l in lines) > 0


def test_threshold_profiles_differ_in_shape(tmp_path):
    assert main(["poa", "--game", "cities:k=1,theta=0.4", "--graphon", "threshold", "--rule", "adapted",
                 "--gridM", "512", "--format", "dat", "--out", str(tmp_path)]) == 0
    nash = read_dat(tmp_path / "nash_profile.dat")
    plan = read_dat(tmp_path / "planner_profile.dat")
    assert np.array_equal(nash[:, 0], plan[:, 0])
    ratio = plan[:, 1] / nash[:, 1]
    # not a rescaled copy: the planner profile bends differently in x
    assert np.ptp(ratio) > 0.05
    assert np.all(plan[:, 1] >= nash[:, 1])


def test_dat_outputs(tmp_path):
    assert main(["solve", "--graphon", "ws:p=0.3,rewire=0.2", "--gridM", "64", "--format", "dat",
                 "--out", str(tmp_path)]) == 0
    a = read_dat(tmp_path / "profile_alpha.dat")
    assert a.shape == (64, 2)
    assert (tmp_path / "profile_z.dat").read_text().startswith("# x z\n")


def test_emit_plot_data_edge_cases(tmp_path):
    p = emit_plot_data(RateTable((), math.nan), tmp_path / "empty.dat")
    assert p[0].read_text() == "# N median_dS\n"
    emit_series([], [], tmp_path / "s.dat")
    assert (tmp_path / "s.dat").read_text() == "# x value\n"
    emit_heatmap([0.1, 0.2], [1.0], [[1.0, math.nan]], tmp_path / "h.dat")
    assert (tmp_path / "h.dat").read_text().splitlines()[1:] == ["2 0.10000000000000001 0.20000000000000001",
                                                                 "1 1 nan"]
    with pytest.raises(ConfigError):
        emit_plot_data(3, tmp_path / "x.dat")


def test_manifest_round_trip(tmp_path):
    assert main(["converge", "--graphon", "constant:0.5", "--Nlist", "20,40", "--seeds", "0:2", "--gridM", "80",
                 "--out", str(tmp_path / "a")]) == 0
    cfg = read_manifest(tmp_path / "a" / "manifest.ini")
    assert cfg.Nlist == "20,40" and cfg.seeds == "0:2" and cfg.antithetic is True
    assert main(["run", "--config", str(tmp_path / "a" / "manifest.ini"), "--out", str(tmp_path / "b")]) == 0
    for name in ("convergence.csv", "convergence_meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stability_command(tmp_path):
    assert main(["stability", "--game", "cities:k=1,theta=0.2", "--graphon", "constant:1", "--gridM", "64",
                 "--perturb", "constant:1.05", "--perturb", "minmax", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "stability.csv").read_text().splitlines()
    assert lines[0] == "label,opNormDiff,equilibriumDiff,kappaBound,kappa,c0,ok" and len(lines) == 3


def test_bad_manifest(tmp_path):
    (tmp_path / "m.ini").write_text("[run]\n")
    assert main(["run", "--config", str(tmp_path / "m.ini")]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2


def test_parsers():
    assert parse_graphon("constant:1") == Constant(1.0)
    assert parse_graphon("powerlaw:gamma=0.2") == PowerLaw(0.2)
    assert parse_graphon("npowerlaw:0.3") == NormalizedPowerLaw(0.3)
    assert parse_graphon("threshold") == SimpleThreshold()
    assert parse_graphon("ws:p=0.3,rewire=0.2") == WattsStrogatz(0.3, 0.2)
    assert parse_graphon("step:0.5,0.2/0.2,0.5") == StepMatrix(((0.5, 0.2), (0.2, 0.5)))
    for w in (Constant(0.25), PowerLaw(0.1), WattsStrogatz(0.3, 0.2), StepMatrix(((0.5, 0.2), (0.2, 0.5)))):
        assert parse_graphon(graphon_to_string(w)) == w
    assert parse_noise("uniform:0.5") == NoiseSpec("uniform", 0.5)
    assert parse_game("cities:k=2,theta=0.1", NoiseSpec()).param("k") == 2.0
    for bad in ("", "constant", "powerlaw:delta=1", "step:1,2/3"):
        with pytest.raises(ConfigError):
            parse_graphon(bad)
    with pytest.raises(ConfigError):
        parse_noise("cauchy:1")
    with pytest.raises(ConfigError):
        RunConfig("solve", format="png").validate()


def test_game_file(tmp_path):
    (tmp_path / "g.ini").write_text("[game]\ngame = cournot\na = 1.0\nb = 0.5\nc = 0.2\n")
    spec = parse_game(f"file:{tmp_path / 'g.ini'}", NoiseSpec())
    assert spec.name == "cournot" and spec.param("c") == 0.2
