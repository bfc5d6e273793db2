"""Desk-scale experiments: finite equilibria converging to the graphon
equilibrium, the rate constants, stability under kernel perturbations and
the decay of epsilon-Nash gaps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .equilibrium import op_norm, solve_nash
from .errors import ConditionViolation, ConfigError, GraphonGameError
from .finite_game import (BestResponseIteration, BetaGrid, FiniteGame, epsilon_nash_details, make_noise_batch,
                          operator_norm_scaled, solve_nash_finite)
from .function_space import IDENTITY, GridProfile, PermutationSearch, block_average, embed_step, make_grid, \
    perm_invariant_dist
from .game import GameSpec, certify
from .graphon import (DiscretizedOperator, Graphon, cut_norm_bounds_kernel, discretize, operator_norm,
                      sample_graph)

CSV_HEADER = ("N", "seed", "dS", "epsilon", "opNorm", "cutLower", "cutUpper")


@dataclass(frozen=True)
class StudyConfig:
    graphon: Graphon
    game: GameSpec
    Nlist: tuple = (50, 100, 200, 400, 800)
    sampling: str = "bernoulli"
    seeds: tuple = tuple(range(10))
    gridM: int = 1024
    ds_search: PermutationSearch = IDENTITY
    rule: str = "midpoint"
    cut_resolution: int = 32

    def __post_init__(self):
        Nlist = tuple(int(n) for n in self.Nlist)
        if not Nlist or any(b <= a for a, b in zip(Nlist, Nlist[1:])) or Nlist[0] < 1:
            raise ConfigError("Nlist must be a strictly increasing list of positive integers")
        if self.sampling not in ("weighted", "bernoulli"):
            raise ConfigError(f"unknown sampling kind {self.sampling!r}")
        object.__setattr__(self, "Nlist", Nlist)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def grid_for(self, N: int) -> int:
        """gridM snapped to the nearest positive multiple of N (ties round up)."""
        k = max(1, int(math.floor(self.gridM / N + 0.5)))
        return k * N


@dataclass(frozen=True)
class RateRow:
    N: int
    seed: int
    dS: float
    epsilon: float
    opNorm: float
    cutLower: float
    cutUpper: float
    stderr: float = math.nan
    rowEnergy: float = math.nan


@dataclass(frozen=True)
class RateTable:
    rows: tuple
    fitted_slope: float
    failures: tuple = ()
    meta: dict = field(default_factory=dict)

    def medians(self, key: str = "dS") -> dict:
        out = {}
        for N in sorted({r.N for r in self.rows}):
            vals = [getattr(r, key) for r in self.rows if r.N == N]
            out[N] = float(np.median(vals))
        return out


def fit_slope(N, values) -> float:
    """Least-squares slope of log(value) on log(N)."""
    N = np.asarray(N, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(N[keep]), np.log(v[keep]), 1)[0])


class _GraphonCache:
    """Graphon equilibria and operators per grid size."""

    def __init__(self, cfg: StudyConfig):
        self.cfg = cfg
        self.ops: dict[int, DiscretizedOperator] = {}
        self.eq: dict[int, GridProfile] = {}

    def op(self, M: int) -> DiscretizedOperator:
        if M not in self.ops:
            self.ops[M] = discretize(self.cfg.graphon, make_grid(M), self.cfg.rule)
        return self.ops[M]

    def equilibrium(self, M: int) -> GridProfile:
        if M not in self.eq:
            op = self.op(M)
            cert = certify(self.cfg.game, op_norm(op))
            if not cert.uniqueness_ok:
                raise ConditionViolation(f"uniqueness value {cert.uniqueness_value:.6g} >= 1 for the limit graphon")
            rep = solve_nash(self.cfg.game, op)
            if not rep.converged:
                raise GraphonGameError("graphon equilibrium did not converge")
            self.eq[M] = rep.profile
        return self.eq[M]


def _finite_nash(game: FiniteGame) -> np.ndarray:
    try:
        return solve_nash_finite(game, "closed")
    except ConditionViolation:
        return solve_nash_finite(game, BestResponseIteration())


def _step_kernel(W: np.ndarray, M: int) -> np.ndarray:
    r = M // W.shape[0]
    return np.repeat(np.repeat(W, r, axis=0), r, axis=1)


def _row(cfg: StudyConfig, cache: _GraphonCache, N: int, seed: int, eps_fn=None) -> RateRow:
    M = cfg.grid_for(N)
    target = cache.equilibrium(M)
    g = sample_graph(cfg.graphon, N, seed, cfg.sampling)
    game = FiniteGame(N, g.W, cfg.game)
    alpha = _finite_nash(game)
    dS = perm_invariant_dist(embed_step(alpha, M), target, cfg.ds_search)
    op = cache.op(M)
    lower, upper = cut_norm_bounds_kernel(_step_kernel(g.W, M) - op.kernel, cfg.cut_resolution)
    eps, se = (math.nan, math.nan) if eps_fn is None else eps_fn(game, target, seed)
    energy = float(np.max(np.sum(g.W**2, axis=1)) / N**2)
    return RateRow(N, seed, dS, eps, operator_norm_scaled(game), lower, upper, se, energy)


def _run(cfg: StudyConfig, eps_fn=None) -> RateTable:
    cache = _GraphonCache(cfg)
    cache.equilibrium(cfg.grid_for(cfg.Nlist[0]))  # fail fast on the limit game
    rows, failures = [], []
    for N in cfg.Nlist:
        for seed in cfg.seeds:
            try:
                rows.append(_row(cfg, cache, N, seed, eps_fn))
            except GraphonGameError as exc:
                failures.append((N, seed, str(exc)))
    med = {}
    for r in rows:
        med.setdefault(r.N, []).append(r.dS)
    Ns = sorted(med)
    slope = fit_slope(Ns, [np.median(med[n]) for n in Ns])
    meta = {"graphon": cfg.graphon.tag, "graphonParams": _jsonable(cfg.graphon.params()), "game": cfg.game.name,
            "gameParams": dict(cfg.game.params), "Nlist": list(cfg.Nlist), "sampling": cfg.sampling,
            "seeds": list(cfg.seeds), "gridM": cfg.gridM, "dsSearch": cfg.ds_search.mode, "rule": cfg.rule,
            "fittedSlope": slope}
    return RateTable(tuple(rows), slope, tuple(failures), meta)


def run_convergence_study(cfg: StudyConfig) -> RateTable:
    return _run(cfg)


def run_epsilon_study(cfg: StudyConfig, beta_grid: BetaGrid = BetaGrid(), S: int = 10_000,
                      antithetic: bool = True) -> RateTable:
    """epsilon-Nash gap of the block-averaged graphon equilibrium on sampled graphs.

    Antithetic noise batches are the default: with plain draws the maximum
    over players of the Monte Carlo deviation gain carries a positive bias of
    order max_i mean(xi_i)^2, which hides the decay of epsilon.
    """

    def eps_fn(game: FiniteGame, target: GridProfile, seed: int):
        alpha = block_average(target, game.N)
        noise = make_noise_batch(game.spec.noise, S, game.N, seed + 1_000_003, antithetic)
        rep = epsilon_nash_details(game, alpha, beta_grid, noise)
        return rep.epsilon, rep.stderr

    table = _run(cfg, eps_fn)
    table.meta["S"] = S
    table.meta["antithetic"] = antithetic
    table.meta["betaGrid"] = [beta_grid.lo, beta_grid.hi, beta_grid.steps]
    return table


def theoretical_constants(spec: GameSpec, zeta1: float, zeta2: float, eps: float = 0.0,
                          c0: float | None = None, noise_var: float | None = None) -> dict:
    """Rate constants for the N^(-1/4) bound and the stability constant kappa."""
    bd = spec.bundle
    m2 = spec.noise.variance if noise_var is None else noise_var
    z1, z2 = zeta1 + eps, zeta2 + eps
    d0 = 1 - 2 * bd.c_z * z1**2
    dz = 1 - math.sqrt(bd.c_z) * z2
    if d0 <= 0 or dz <= 0:
        raise ConditionViolation("aggregate contraction fails for the given zeta values")
    u = (bd.ell_J / bd.ell_c) * math.sqrt(bd.c_alpha) * z2 / dz
    if u >= 1:
        raise ConditionViolation(f"uniqueness value {u:.6g} >= 1 for the given zeta2")
    k0 = 2 * z1**2 * m2 / d0
    k1 = 1.0 / (1.0 - u)
    k2 = bd.c_alpha * z1**2 / dz**2
    kt = 2 * k1 * math.sqrt(2 * bd.ell_J_tilde / bd.ell_c) * (2 * k0 + k2) ** 0.25
    if c0 is None:
        kappa = math.nan
    else:
        inner = bd.ell_c * dz - bd.ell_J * math.sqrt(bd.c_alpha) * z2
        kappa = c0 * bd.ell_J * dz / (dz * inner)
    return {"kappa": kappa, "kappaTilde": kt, "kappa0": k0, "kappa1": k1, "kappa2": k2}


@dataclass(frozen=True)
class StabilityRow:
    label: str
    opNormDiff: float
    equilibriumDiff: float
    kappaBound: float
    kappa: float
    c0: float
    ok: bool


def _difference_norm(a: DiscretizedOperator, b: DiscretizedOperator) -> float:
    if np.array_equal(a.weights, b.weights):
        return operator_norm(DiscretizedOperator(a.grid, a.kernel - b.kernel, a.weights, a.rule))
    return float(np.linalg.norm(a.matrix - b.matrix, 2))


def run_stability_study(spec: GameSpec, w: Graphon, perturbations, gridM: int = 1024, rule: str = "midpoint",
                        tol: float = 1e-14, slack: float = 1e-10) -> list:
    """||alpha - alpha'|| against kappa ||W - W'|| for each perturbed graphon.

    Without a declared c0 the bound uses the largest |b| met at either
    equilibrium, which dominates the L^2 norm the stability argument needs.
    """
    from .equilibrium import stability_bound

    grid = make_grid(gridM)
    op = discretize(w, grid, rule)
    base_norm = op_norm(op)
    if not certify(spec, base_norm).uniqueness_ok:
        raise ConditionViolation("uniqueness condition fails for the reference graphon")
    base = solve_nash(spec, op, tol=tol)
    rows = []
    for wp in perturbations:
        label = wp.tag + "".join(f";{k}={v!r}" for k, v in _jsonable(wp.params()).items())
        try:
            opp = discretize(wp, grid, rule)
            pert = solve_nash(spec, opp, tol=tol)
            diff = float(np.sqrt(np.mean((base.profile.values - pert.profile.values) ** 2)))
            dnorm = _difference_norm(op, opp)
            c0 = spec.bundle.c0
            if c0 is None:
                c0 = max(float(np.max(np.abs(spec.b(r.profile.values, r.aggregate.values)))) for r in (base, pert))
            kappa = stability_bound(spec, base_norm, op_norm(opp), c0)
            bound = kappa * dnorm
            rows.append(StabilityRow(label, dnorm, diff, bound, kappa, c0, diff <= bound + slack))
        except GraphonGameError as exc:
            rows.append(StabilityRow(f"{label} failed: {exc}", math.nan, math.nan, math.nan, math.nan, math.nan,
                                     False))
    return rows


# ---------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _g(v: float) -> str:
    return "nan" if v != v else f"{v:.17g}"


def write_rate_table(table: RateTable, csv_path, meta_path=None, constants: dict | None = None) -> None:
    lines = [",".join(CSV_HEADER)]
    for r in table.rows:
        lines.append(",".join([str(r.N), str(r.seed)] + [_g(getattr(r, k)) for k in CSV_HEADER[2:]]))
    Path(csv_path).write_text("\n".join(lines) + "\n")
    if meta_path is not None:
        meta = dict(table.meta)
        meta["medians_dS"] = {str(k): v for k, v in table.medians("dS").items()}
        if any(r.epsilon == r.epsilon for r in table.rows):
            meta["medians_epsilon"] = {str(k): v for k, v in table.medians("epsilon").items()}
        meta["failures"] = [list(f) for f in table.failures]
        if constants is not None:
            meta["constants"] = constants
        Path(meta_path).write_text(json.dumps(_jsonable(meta), sort_keys=True, allow_nan=True) + "\n")


def write_stability_table(rows, path) -> None:
    lines = ["label,opNormDiff,equilibriumDiff,kappaBound,kappa,c0,ok"]
    for r in rows:
        lines.append(",".join([f'"{r.label}"', _g(r.opNormDiff), _g(r.equilibriumDiff), _g(r.kappaBound),
                               _g(r.kappa), _g(r.c0), str(r.ok).lower()]))
    Path(path).write_text("\n".join(lines) + "\n")
