"""Command-line front end.

Every run writes its result files plus ``manifest.ini`` into the output
directory. The manifest echoes the fully resolved configuration (all
defaults included) and the certificate values; ``run --config manifest.ini``
replays it and reproduces the result files byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .convergence_lab import (StudyConfig, run_convergence_study, run_epsilon_study, run_stability_study,
                              write_rate_table, write_stability_table)
from .equilibrium import (closed_form_nash, cournot_check, op_norm, planner_optimum, poa_closed_form,
                          price_of_anarchy, social_cost, solve_nash, write_equilibrium_csv)
from .errors import ConditionViolation, ConfigError, GraphonGameError, NonConvergence
from .finite_game import (BestResponseIteration, BetaGrid, FiniteGame, best_responses,
                          operator_norm_scaled, solve_nash_finite, write_finite_csv)
from .function_space import IDENTITY, SORT_VALUES, GridProfile, make_grid, write_profile_csv
from .game import BUILTINS, NoiseSpec, certify, spec_from_config, spec_to_config
from .graphon import (Constant, MinMax, NormalizedPowerLaw, PowerLaw, SimpleThreshold, StepMatrix, WattsStrogatz,
                      discretize, sample_graph, write_graph_csv)

COMMANDS = ("solve", "closed-form", "poa", "sample-graph", "finite-solve", "epsilon", "converge", "stability")


# ---------------------------------------------------------------- spec strings


def _split_params(text: str) -> tuple[str, list[str]]:
    name, _, rest = text.partition(":")
    return name.strip(), [p.strip() for p in rest.split(",") if p.strip()] if rest else []


def _keyed(parts: list[str], order: tuple, what: str) -> dict:
    """Parse `k=v` items; bare values fill `order` positionally."""
    out = {}
    for pos, item in enumerate(parts):
        if "=" in item:
            k, v = item.split("=", 1)
            k = k.strip()
        elif pos < len(order):
            k, v = order[pos], item
        else:
            raise ConfigError(f"too many positional parameters for {what}")
        if k not in order:
            raise ConfigError(f"unknown parameter {k!r} for {what}; expected one of {list(order)}")
        try:
            out[k] = float(v)
        except ValueError:
            raise ConfigError(f"parameter {k} of {what} is not a number: {v!r}") from None
    return out


def parse_graphon(text: str):
    """`constant:1`, `powerlaw:gamma=0.2`, `npowerlaw:0.3`, `minmax`, `threshold`,
    `ws:p=0.2,rewire=0.1`, `step:0.5,0.2/0.2,0.5` (rows separated by '/')."""
    name, rest = text.partition(":")[0].strip(), text.partition(":")[2]
    if name == "step":
        rows = [r for r in rest.split("/") if r.strip()]
        try:
            W = tuple(tuple(float(v) for v in r.split(",")) for r in rows)
            return StepMatrix(W)
        except ValueError:
            raise ConfigError(f"bad step matrix {rest!r}") from None
    _, parts = _split_params(text)
    if name == "constant":
        kw = _keyed(parts, ("a",), name)
        if "a" not in kw:
            raise ConfigError("constant graphon needs a value, e.g. constant:1")
        return Constant(kw["a"])
    if name == "powerlaw":
        return PowerLaw(**_require(_keyed(parts, ("gamma",), name), ("gamma",), name))
    if name == "npowerlaw":
        return NormalizedPowerLaw(**_require(_keyed(parts, ("gamma", "g"), name), ("gamma",), name))
    if name == "minmax":
        _keyed(parts, (), name)
        return MinMax()
    if name == "threshold":
        _keyed(parts, (), name)
        return SimpleThreshold()
    if name == "ws":
        return WattsStrogatz(**_require(_keyed(parts, ("p", "rewire"), name), ("p", "rewire"), name))
    raise ConfigError(f"unknown graphon family {name!r}")


def _require(kw: dict, keys: tuple, what: str) -> dict:
    missing = [k for k in keys if k not in kw]
    if missing:
        raise ConfigError(f"{what} needs parameters {missing}")
    return kw


def graphon_to_string(w) -> str:
    if isinstance(w, StepMatrix):
        return "step:" + "/".join(",".join(repr(float(v)) for v in row) for row in w.W)
    if isinstance(w, (MinMax, SimpleThreshold)):
        return w.tag
    params = w.params()
    return w.tag + ":" + ",".join(f"{k}={float(v)!r}" for k, v in params.items())


def parse_noise(text: str) -> NoiseSpec:
    """`gaussian:1`, `uniform:0.5` or `pointmass`."""
    name, parts = _split_params(text)
    if name == "pointmass":
        return NoiseSpec("pointmass", 0.0)
    if name not in ("gaussian", "uniform"):
        raise ConfigError(f"unknown noise family {name!r}")
    kw = _keyed(parts, ("scale",), name)
    return NoiseSpec(name, kw.get("scale", 1.0))


def noise_to_string(noise: NoiseSpec) -> str:
    return noise.kind if noise.kind == "pointmass" else f"{noise.kind}:{noise.scale!r}"


def parse_game(text: str, noise: NoiseSpec):
    """`beach`, `cities:k=1,theta=0.25`, `cournot:a=1,b=1,c=0.2` or `file:<path>` (INI, section [game])."""
    if text.startswith("file:"):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        path = text[5:]
        if not cp.read(path):
            raise ConfigError(f"cannot read game file {path!r}")
        if "game" not in cp:
            raise ConfigError(f"game file {path!r} has no [game] section")
        return spec_from_config(dict(cp["game"]))
    name, parts = _split_params(text)
    keys = {"beach": (), "cities": ("k", "theta"), "cournot": ("a", "b", "c")}
    if name not in BUILTINS:
        raise ConfigError(f"unknown game {name!r}; expected one of {sorted(BUILTINS)} or file:<path>")
    return BUILTINS[name](**_keyed(parts, keys[name], name), noise=noise)


def _range(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise ConfigError(f"expected lo:hi:count, got {text!r}") from None


def _int_list(text: str) -> tuple:
    """`50,100,200` or a half-open range `0:10`."""
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return tuple(range(int(lo), int(hi)))
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected integers, got {text!r}") from None


# ---------------------------------------------------------------- run config


@dataclass
class RunConfig:
    command: str
    game: str = "beach"
    graphon: str = "constant:1"
    noise: str = "gaussian:1.0"
    gridM: int = 1024
    rule: str = "midpoint"
    tol: float = 1e-12
    maxIter: int = 10000
    N: int = 100
    Nlist: str = "50,100,200,400,800"
    kind: str = "bernoulli"
    seed: int = 0
    seeds: str = "0:10"
    mcSamples: int = 10000
    method: str = "closed"
    betaGrid: str = "-2:2:41"
    antithetic: bool = True
    dsSearch: str = "identity"
    perturb: tuple = ()
    thetaGrid: str = ""
    gammaGrid: str = ""
    override: bool = False
    out: str = "out"
    format: str = "csv"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "dat"):
            raise ConfigError("format must be csv or dat")
        if self.rule not in ("midpoint", "adapted"):
            raise ConfigError("rule must be midpoint or adapted")
        if self.kind not in ("weighted", "bernoulli"):
            raise ConfigError("kind must be weighted or bernoulli")
        if self.method not in ("closed", "bri"):
            raise ConfigError("method must be closed or bri")
        if self.dsSearch not in ("identity", "sort"):
            raise ConfigError("dsSearch must be identity or sort")
        if self.gridM < 1 or self.N < 1 or self.maxIter < 1 or self.mcSamples < 1:
            raise ConfigError("gridM, N, maxIter and mcSamples must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.command == "stability" and not self.perturb:
            raise ConfigError("stability needs at least one --perturb graphon")
        if bool(self.thetaGrid) != bool(self.gammaGrid):
            raise ConfigError("a PoA heatmap needs both --theta-grid and --gamma-grid")


_SECTIONS = {
    "run": ("command",),
    "game": ("game", "noise"),
    "graphon": ("graphon",),
    "numeric": ("gridM", "rule", "tol", "maxIter", "N", "Nlist", "kind", "seed", "seeds", "mcSamples", "method",
                "betaGrid", "antithetic", "dsSearch", "perturb", "thetaGrid", "gammaGrid", "override"),
    "output": ("out", "format"),
}


def _to_text(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ; ".join(v)
    return str(v)


def _from_text(name: str, text: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    t = kinds[name]
    try:
        if t == "bool":
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if t == "int":
            return int(text)
        if t == "float":
            return float(text)
        if t == "tuple":
            return tuple(p.strip() for p in text.split(";") if p.strip())
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def write_manifest(cfg: RunConfig, path, resolved: dict, certificate: dict, outputs: list) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for section, keys in _SECTIONS.items():
        cp[section] = {k: _to_text(getattr(cfg, k)) for k in keys}
    cp["resolved"] = {k: _to_text(v) for k, v in resolved.items()}
    cp["certificate"] = {k: _to_text(v) for k, v in certificate.items()}
    cp["outputs"] = {"files": " ".join(outputs)}
    with open(path, "w") as fh:
        cp.write(fh)


def read_manifest(path) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigError(f"cannot read manifest {path!r}")
    kw = {}
    for section, keys in _SECTIONS.items():
        if section not in cp:
            raise ConfigError(f"manifest lacks section [{section}]")
        for k in keys:
            if k in cp[section]:
                kw[k] = _from_text(k, cp[section][k])
    if "command" not in kw:
        raise ConfigError("manifest lacks run.command")
    return RunConfig(**kw)


# ---------------------------------------------------------------- plot data


def _num(v) -> str:
    v = float(v)
    return "nan" if v != v else f"{v:.17g}"


def emit_series(x, y, path, xlabel: str = "x", ylabel: str = "value") -> Path:
    """One whitespace-separated series; header-only when empty."""
    lines = [f"# {xlabel} {ylabel}"] + [f"{_num(a)} {_num(b)}" for a, b in zip(x, y)]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_heatmap(cols, rows, values, path, col_label: str = "theta", row_label: str = "gamma") -> Path:
    """Row-major grid in gnuplot's nonuniform-matrix layout: the first line holds
    the column count and column coordinates, every later line a row coordinate
    followed by its values. NaN marks infeasible cells."""
    values = np.asarray(values, dtype=float).reshape(len(rows), len(cols))
    lines = [f"# rows={row_label} cols={col_label}",
             " ".join([str(len(cols))] + [_num(c) for c in cols])]
    for r, vals in zip(rows, values):
        lines.append(" ".join([_num(r)] + [_num(v) for v in vals]))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_plot_data(obj, path, **labels) -> list:
    """Write `.dat` plot data for a profile, a rate table or a list of stability rows.

    Tables produce one file per series, named `<stem>_<series>.dat`.
    """
    path = Path(path)
    if isinstance(obj, GridProfile):
        return [emit_series(obj.grid.points, obj.values, path, "x", labels.get("ylabel", "value"))]
    if hasattr(obj, "rows") and hasattr(obj, "medians"):
        written = []
        keys = ["dS"] + (["epsilon", "stderr"] if any(r.epsilon == r.epsilon for r in obj.rows) else [])
        for key in keys:
            med = obj.medians(key) if obj.rows else {}
            written.append(emit_series(list(med), list(med.values()),
                                       path.with_name(f"{path.stem}_{key}.dat"), "N", f"median_{key}"))
        return written
    if isinstance(obj, list):
        return [emit_series([r.opNormDiff for r in obj], [r.equilibriumDiff for r in obj], path,
                            "opNormDiff", "equilibriumDiff")]
    raise ConfigError(f"no plot-data writer for {type(obj).__name__}")


# ---------------------------------------------------------------- commands


@dataclass
class _Context:
    cfg: RunConfig
    out: Path
    resolved: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def profile(self, prof: GridProfile, stem: str, label: str = "value") -> None:
        if self.cfg.format == "dat":
            emit_series(prof.grid.points, prof.values, self.path(f"{stem}.dat"), "x", label)
        else:
            write_profile_csv(prof, self.path(f"{stem}.csv"))


def _setup(cfg: RunConfig):
    noise = parse_noise(cfg.noise)
    spec = parse_game(cfg.game, noise)
    w = parse_graphon(cfg.graphon)
    return spec, w


def _require_unique(ctx: _Context, spec, op) -> None:
    """Refuse to iterate when the sufficient uniqueness condition fails, unless overridden."""
    cert = certify(spec, op_norm(op))
    ctx.certificate.update(cert.as_dict())
    if cert.uniqueness_ok or ctx.cfg.override:
        return
    bd = spec.bundle
    if not cert.contraction_ok:
        raise ConditionViolation(f"sqrt(c_z)*||W|| = {math.sqrt(bd.c_z) * cert.w_norm:.6g} >= 1")
    raise ConditionViolation(f"(ell_J/ell_c)*sqrt(c_alpha)*||W|| / (1 - sqrt(c_z)*||W||) = "
                             f"{cert.uniqueness_value:.6g} >= 1 (||W|| = {cert.w_norm:.6g}); "
                             "pass --override to iterate anyway")


def _cmd_solve(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    op = discretize(w, make_grid(cfg.gridM), cfg.rule)
    _require_unique(ctx, spec, op)
    rep = solve_nash(spec, op, tol=cfg.tol, max_iter=cfg.maxIter, override=cfg.override)
    ctx.certificate.update(rep.certificate.as_dict())
    ctx.resolved.update(iterations=rep.iterations, residual=float(rep.residual), converged=rep.converged)
    if not rep.converged:
        raise NonConvergence(f"Picard iteration stopped after {rep.iterations} steps with residual "
                             f"{rep.residual:.3g} > tol {cfg.tol:.3g}", last=rep.profile, residual=rep.residual)
    if cfg.format == "dat":
        ctx.profile(rep.profile, "profile_alpha", "alpha")
        ctx.profile(rep.aggregate, "profile_z", "z")
    else:
        write_equilibrium_csv(rep, ctx.path("profile.csv"))
    print(f"solved in {rep.iterations} iterations; residual {rep.residual:.3e}; "
          f"uniqueness value {rep.certificate.uniqueness_value:.6g}")


def _cmd_closed_form(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    op = discretize(w, make_grid(cfg.gridM), cfg.rule)
    ctx.certificate.update(certify(spec, op_norm(op)).as_dict())
    prof = closed_form_nash(spec, op)
    ctx.profile(prof, "closed_form", "alpha")
    if spec.name == "cournot":
        chk = cournot_check(spec, op)
        ctx.resolved.update(cournotResidual=chk.proof_residual, cournotAltResidual=chk.proposition_residual)
        print(f"equilibrium residual {chk.proof_residual:.3e}; "
              f"alternative coupling c(1+b) residual {chk.proposition_residual:.3e}")
    else:
        print(f"closed form on {cfg.gridM} points written")


def _poa_family(w):
    if isinstance(w, (Constant, PowerLaw, SimpleThreshold)):
        return w
    return None


def _cmd_poa(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    if spec.name != "cities" and cfg.thetaGrid:
        raise ConfigError("the PoA heatmap is defined for the cities game")
    if cfg.thetaGrid:
        _poa_heatmap(ctx, spec, w)
        return
    op = discretize(w, make_grid(cfg.gridM), cfg.rule)
    _require_unique(ctx, spec, op)
    nash = solve_nash(spec, op, tol=cfg.tol, max_iter=cfg.maxIter, override=cfg.override)
    ctx.certificate.update(nash.certificate.as_dict())
    plan = planner_optimum(spec, op, "closed")
    poa = price_of_anarchy(spec, op, nash, plan)
    closed = math.nan
    if spec.name == "cities" and _poa_family(w) is not None:
        closed = poa_closed_form(w, spec.param("theta"))
    s_nash = social_cost(spec, op, nash.profile, nash.aggregate)
    ctx.resolved.update(poa=poa, poaClosedForm=closed, nashCost=s_nash, plannerCost=plan.social_cost)
    if cfg.format == "dat":
        emit_series([0], [poa], ctx.path("poa.dat"), "index", "poa")
    else:
        ctx.path("poa.csv").write_text("nashCost,plannerCost,poa,poaClosedForm\n"
                                       f"{_num(s_nash)},{_num(plan.social_cost)},{_num(poa)},{_num(closed)}\n")
    ctx.profile(nash.profile, "nash_profile", "alpha")
    ctx.profile(plan.profile, "planner_profile", "alpha")
    print(f"{poa:.12g}")


def _poa_heatmap(ctx: _Context, spec, w) -> None:
    """Closed-form PoA over (theta, gamma) for the (normalized) power-law family."""
    thetas, gammas = _range(ctx.cfg.thetaGrid), _range(ctx.cfg.gammaGrid)
    if not isinstance(w, PowerLaw):
        raise ConfigError("the PoA heatmap sweeps gamma; use --graphon powerlaw:... or npowerlaw:...")
    vals = np.full((len(gammas), len(thetas)), math.nan)
    for i, g in enumerate(gammas):
        for j, t in enumerate(thetas):
            try:
                fam = NormalizedPowerLaw(g) if isinstance(w, NormalizedPowerLaw) else PowerLaw(g)
                vals[i, j] = poa_closed_form(fam, t)
            except (ConditionViolation, ConfigError):
                pass
    ctx.resolved.update(heatmapCells=vals.size, infeasibleCells=int(np.isnan(vals).sum()))
    if ctx.cfg.format == "dat":
        emit_heatmap(thetas, gammas, vals, ctx.path("poa_heatmap.dat"))
    else:
        lines = ["gamma,theta,poa"] + [f"{_num(g)},{_num(t)},{_num(vals[i, j])}"
                                       for i, g in enumerate(gammas) for j, t in enumerate(thetas)]
        ctx.path("poa_heatmap.csv").write_text("\n".join(lines) + "\n")
    print(f"{vals.size} cells, {int(np.isnan(vals).sum())} infeasible")


def _cmd_sample_graph(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    g = sample_graph(w, cfg.N, cfg.seed, cfg.kind)
    write_graph_csv(g, ctx.path("graph.csv"))
    ctx.outputs.append("graph.csv.latent")
    print(f"sampled {cfg.kind} graph on {cfg.N} vertices (seed {cfg.seed})")


def _cmd_finite_solve(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    g = sample_graph(w, cfg.N, cfg.seed, cfg.kind)
    game = FiniteGame(cfg.N, g.W, spec)
    norm = operator_norm_scaled(game)
    ctx.certificate.update(certify(spec, norm).as_dict())
    if cfg.method == "closed":
        alpha = solve_nash_finite(game, "closed")
    else:
        alpha = solve_nash_finite(game, BestResponseIteration(cfg.tol, cfg.maxIter, override=cfg.override))
    foc = float(np.max(np.abs(best_responses(game, alpha) - alpha)))
    ctx.resolved.update(bestResponseGap=foc, scaledOpNorm=norm)
    write_graph_csv(g, ctx.path("graph.csv"))
    ctx.outputs.append("graph.csv.latent")
    if cfg.format == "dat":
        emit_series(np.arange(1, cfg.N + 1), alpha, ctx.path("finite.dat"), "i", "alpha")
    else:
        write_finite_csv(alpha, ctx.path("finite.csv"))
    print(f"finite equilibrium on {cfg.N} players; best-response gap {foc:.3e}")


def _study_config(cfg: RunConfig, spec, w) -> StudyConfig:
    return StudyConfig(w, spec, Nlist=_int_list(cfg.Nlist), sampling=cfg.kind, seeds=_int_list(cfg.seeds),
                       gridM=cfg.gridM, ds_search=IDENTITY if cfg.dsSearch == "identity" else SORT_VALUES,
                       rule=cfg.rule)


def _beta_grid(text: str) -> BetaGrid:
    pts = _range(text)
    return BetaGrid(float(pts[0]), float(pts[-1]), len(pts))


def _write_table(ctx: _Context, table, stem: str, constants: dict | None) -> None:
    if ctx.cfg.format == "dat":
        for p in emit_plot_data(table, ctx.out / f"{stem}.dat"):
            ctx.outputs.append(p.name)
    else:
        write_rate_table(table, ctx.path(f"{stem}.csv"), ctx.path(f"{stem}_meta.json"), constants)


def _study_certificate(ctx: _Context, spec, w) -> None:
    op = discretize(w, make_grid(ctx.cfg.gridM), ctx.cfg.rule)
    ctx.certificate.update(certify(spec, op_norm(op)).as_dict())


def _cmd_converge(ctx: _Context, spec, w) -> None:
    study = _study_config(ctx.cfg, spec, w)
    _study_certificate(ctx, spec, w)
    table = run_convergence_study(study)
    ctx.resolved.update(fittedSlope=table.fitted_slope, failures=len(table.failures))
    med = table.medians("dS")
    _write_table(ctx, table, "convergence", None)
    for N, v in med.items():
        print(f"N={N} median dS={v:.4e}")
    print(f"fitted slope {table.fitted_slope:.4f}")


def _cmd_epsilon(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    study = _study_config(cfg, spec, w)
    _study_certificate(ctx, spec, w)
    table = run_epsilon_study(study, _beta_grid(cfg.betaGrid), cfg.mcSamples, cfg.antithetic)
    ctx.resolved.update(failures=len(table.failures))
    _write_table(ctx, table, "epsilon", None)
    for N, v in table.medians("epsilon").items():
        print(f"N={N} median epsilon={v:.4e}")


def _cmd_stability(ctx: _Context, spec, w) -> None:
    cfg = ctx.cfg
    perturbed = [parse_graphon(p) for p in cfg.perturb]
    rows = run_stability_study(spec, w, perturbed, cfg.gridM, cfg.rule)
    op = discretize(w, make_grid(cfg.gridM), cfg.rule)
    ctx.certificate.update(certify(spec, op_norm(op)).as_dict())
    ctx.resolved.update(allWithinBound=all(r.ok for r in rows))
    if cfg.format == "dat":
        emit_plot_data(rows, ctx.path("stability.dat"))
    else:
        write_stability_table(rows, ctx.path("stability.csv"))
    for r in rows:
        print(f"{r.label}: diff {r.equilibriumDiff:.4e} <= {r.kappaBound:.4e}: {r.ok}")
    if not all(r.ok for r in rows):
        bad = next(r for r in rows if not r.ok)
        raise ConditionViolation(f"||alpha - alpha'|| = {bad.equilibriumDiff:.6g} > kappa*||W - W'|| = "
                                 f"{bad.kappaBound:.6g} for {bad.label}")


_DISPATCH = {
    "solve": _cmd_solve,
    "closed-form": _cmd_closed_form,
    "poa": _cmd_poa,
    "sample-graph": _cmd_sample_graph,
    "finite-solve": _cmd_finite_solve,
    "epsilon": _cmd_epsilon,
    "converge": _cmd_converge,
    "stability": _cmd_stability,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status (0, 2 config, 3 condition, 4 non-convergence)."""
    ctx = None
    try:
        cfg.validate()
        spec, w = _setup(cfg)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        ctx = _Context(cfg, out)
        ctx.resolved.update({f"game.{k}": v for k, v in spec_to_config(spec).items()})
        ctx.resolved["graphon.canonical"] = graphon_to_string(w)
        _DISPATCH[cfg.command](ctx, spec, w)
        write_manifest(cfg, out / "manifest.ini", ctx.resolved, ctx.certificate, ctx.outputs)
        return 0
    except GraphonGameError as exc:
        label = {2: "config error", 3: "condition violation", 4: "non-convergence"}.get(exc.exit_code, "error")
        print(f"{label}: {exc}", file=sys.stderr)
        if ctx is not None:
            ctx.resolved["error"] = f"{label}: {exc}"
            write_manifest(cfg, ctx.out / "manifest.ini", ctx.resolved, ctx.certificate, ctx.outputs)
        return exc.exit_code


# ---------------------------------------------------------------- argparse


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphon-games", description="Static graphon game solvers and experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    d = RunConfig("solve")
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--game", default=d.game)
        s.add_argument("--graphon", default=d.graphon)
        s.add_argument("--noise", default=d.noise)
        s.add_argument("--gridM", "--grid-m", dest="gridM", type=int, default=d.gridM)
        s.add_argument("--rule", default=d.rule, choices=("midpoint", "adapted"))
        s.add_argument("--tol", type=float, default=d.tol)
        s.add_argument("--max-iter", dest="maxIter", type=int, default=d.maxIter)
        s.add_argument("--N", type=int, default=d.N)
        s.add_argument("--Nlist", default=d.Nlist)
        s.add_argument("--kind", default=d.kind, choices=("weighted", "bernoulli"))
        s.add_argument("--seed", type=int, default=d.seed)
        s.add_argument("--seeds", default=d.seeds)
        s.add_argument("--mc-samples", dest="mcSamples", type=int, default=d.mcSamples)
        s.add_argument("--method", default=d.method, choices=("closed", "bri"))
        s.add_argument("--beta-grid", dest="betaGrid", default=d.betaGrid)
        s.add_argument("--plain-mc", dest="antithetic", action="store_false")
        s.add_argument("--ds-search", dest="dsSearch", default=d.dsSearch, choices=("identity", "sort"))
        s.add_argument("--perturb", action="append", default=[])
        s.add_argument("--theta-grid", dest="thetaGrid", default=d.thetaGrid)
        s.add_argument("--gamma-grid", dest="gammaGrid", default=d.gammaGrid)
        s.add_argument("--override", action="store_true")
        s.add_argument("--out", default=d.out)
        s.add_argument("--format", default=d.format, choices=("csv", "dat"))
    r = sub.add_parser("run", help="replay a manifest")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        try:
            cfg = read_manifest(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return exc.exit_code
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        return run(cfg)
    kw = {k: v for k, v in vars(args).items() if k != "command"}
    kw["perturb"] = tuple(kw["perturb"])
    return run(RunConfig(args.command, **kw))


if __name__ == "__main__":
    sys.exit(main())
