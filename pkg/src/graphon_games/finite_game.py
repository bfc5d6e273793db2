"""The N-player game with random aggregates.

Player i picks alpha_i, ends in X_i = b(alpha_i, z_i) + xi_i and pays
f(X_i, alpha_i, z_i), where z_i = (1/N) sum_j W_ij X_j. Aggregates are
random through the idiosyncratic noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConditionViolation, ConfigError, NonConvergence
from .game import GameSpec, IdentityDrift, NoiseSpec, QuadraticCost, QuadraticRunningCost

DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class FiniteGame:
    N: int
    W: np.ndarray = field(repr=False)
    spec: GameSpec

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.shape != (self.N, self.N):
            raise ConfigError(f"weight matrix must be {self.N}x{self.N}")
        if not np.array_equal(W, W.T):
            raise ConfigError("weight matrix must be symmetric")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def zero_diagonal(self) -> bool:
        return bool(np.all(np.diag(self.W) == 0))

    @property
    def scaled(self) -> np.ndarray:
        return self.W / self.N


@dataclass(frozen=True)
class NoiseBatch:
    """S x N noise draws. Antithetic batches hold rows xi followed by rows -xi."""

    samples: np.ndarray = field(repr=False)
    seed: int
    antithetic: bool = False

    @property
    def S(self) -> int:
        return self.samples.shape[0]

    def stderr(self, values: np.ndarray) -> np.ndarray:
        """Standard error of the column means of per-sample values."""
        if self.antithetic:
            half = self.S // 2
            values = 0.5 * (values[:half] + values[half:])
        n = values.shape[0]
        if n < 2:
            return np.zeros(values.shape[1:])
        return np.std(values, axis=0, ddof=1) / math.sqrt(n)


def make_noise_batch(noise: NoiseSpec, S: int, N: int, seed: int, antithetic: bool = False) -> NoiseBatch:
    rng = np.random.default_rng(seed)
    if antithetic:
        if S % 2:
            raise ConfigError("antithetic batches need an even sample count")
        half = noise.sample(rng, (S // 2, N))
        xi = np.concatenate([half, -half])
    else:
        xi = noise.sample(rng, (S, N))
    xi.setflags(write=False)
    return NoiseBatch(xi, seed, antithetic)


def frobenius_scaled(game: FiniteGame) -> float:
    return float(np.sqrt(np.sum(game.W**2)) / game.N)


def operator_norm_scaled(game: FiniteGame) -> float:
    """Spectral norm of W/N, the operator norm of the step graphon of W."""
    return float(np.max(np.abs(np.linalg.eigvalsh(game.scaled)))) if game.N else 0.0


def _check_aggregate(game: FiniteGame) -> None:
    q = math.sqrt(game.spec.bundle.c_z) * frobenius_scaled(game)
    if q >= 1:
        raise ConditionViolation(f"sqrt(c_z)*||W||_F = {q:.6g} >= 1; finite aggregate map is not a contraction")


def aggregate_samples(game: FiniteGame, alpha, noise: NoiseBatch, tol: float = 1e-13,
                      max_iter: int = 100000) -> np.ndarray:
    """S x N matrix of aggregates, one fixed point per noise sample."""
    _check_aggregate(game)
    alpha = np.asarray(alpha, dtype=float)
    WT = game.scaled.T
    xi = noise.samples
    if isinstance(game.spec.drift, IdentityDrift):
        return (alpha[None, :] + xi) @ WT
    Z = np.zeros_like(xi)
    for _ in range(max_iter):
        Z_new = (game.spec.b(alpha[None, :], Z) + xi) @ WT
        if np.max(np.abs(Z_new - Z)) <= tol:
            return Z_new
        Z = Z_new
    raise NonConvergence("sampled aggregate iteration did not converge", last=Z)


def _running(game: FiniteGame):
    f = game.spec.running
    if f is None:
        raise ConfigError("finite-game costs need the running cost f(x, alpha, z)")
    return f


# ---------------------------------------------------------------- analytic moments


@dataclass(frozen=True)
class _Moments:
    """Mean aggregates m and the noise-to-aggregate map G for affine drifts."""

    m: np.ndarray
    G: np.ndarray
    a0: float
    sa: float
    sz: float
    var: float

    @property
    def g_sq(self) -> np.ndarray:
        return np.sum(self.G**2, axis=1)

    @property
    def g_diag(self) -> np.ndarray:
        return np.diag(self.G)


def _moments(game: FiniteGame, alpha) -> _Moments:
    coeffs = game.spec.drift.affine()
    if coeffs is None:
        raise ConfigError("analytic costs need an affine drift")
    _check_aggregate(game)
    a0, sa, sz = coeffs
    P = game.scaled
    if sz == 0:
        G = P
    else:
        G = np.linalg.solve(np.eye(game.N) - sz * P, P)
    m = G @ (a0 + sa * np.asarray(alpha, dtype=float))
    return _Moments(m, G, a0, sa, sz, game.spec.noise.variance)


def _analytic_cost(f: QuadraticRunningCost, mo: _Moments, beta, idx, alpha_idx):
    # cost of player idx playing beta against fixed others, all exact
    shift = mo.sa * (beta - alpha_idx) * mo.g_diag[idx]
    m_i = mo.m[idx] + shift
    mx = mo.a0 + mo.sa * beta + mo.sz * m_i
    var_z = mo.var * mo.g_sq[idx]
    cov_xz = mo.var * (mo.sz * mo.g_sq[idx] + mo.g_diag[idx])
    var_x = mo.var * (mo.sz**2 * mo.g_sq[idx] + 2 * mo.sz * mo.g_diag[idx] + 1.0)
    return f(mx, beta, m_i) + f.xx * var_x + f.zz * var_z + f.xz * cov_xz


def _analytic_ok(game: FiniteGame) -> bool:
    return isinstance(game.spec.running, QuadraticRunningCost) and game.spec.drift.affine() is not None


def expected_costs(game: FiniteGame, alpha) -> np.ndarray:
    """Exact J_i(alpha) for every player (quadratic f, affine drift)."""
    alpha = np.asarray(alpha, dtype=float)
    mo = _moments(game, alpha)
    idx = np.arange(game.N)
    return _analytic_cost(_running(game), mo, alpha, idx, alpha)


def expected_cost_mc(game: FiniteGame, i: int, alpha, noise: NoiseBatch):
    """(mean, standard error) of player i's cost over the noise batch."""
    alpha = np.asarray(alpha, dtype=float)
    Z = aggregate_samples(game, alpha, noise)
    zi = Z[:, i]
    x = game.spec.b(alpha[i], zi) + noise.samples[:, i]
    vals = _running(game)(x, alpha[i], zi)
    return float(np.mean(vals)), float(noise.stderr(vals[:, None])[0])


def expected_cost(game: FiniteGame, i: int, alpha, noise: NoiseBatch | None = None, method: str = "auto") -> float:
    if method == "mc" or (method == "auto" and not _analytic_ok(game)):
        if noise is None:
            raise ConfigError("Monte Carlo cost needs a noise batch")
        return expected_cost_mc(game, i, alpha, noise)[0]
    return float(expected_costs(game, alpha)[i])


# ---------------------------------------------------------------- Nash solvers


@dataclass(frozen=True)
class BestResponseIteration:
    tol: float = 1e-12
    max_iter: int = 10000
    damping: float = 1.0
    override: bool = False


def _closed_form_ready(game: FiniteGame) -> bool:
    return (isinstance(game.spec.drift, IdentityDrift) and isinstance(game.spec.cost, QuadraticCost)
            and game.zero_diagonal)


def finite_uniqueness_value(game: FiniteGame) -> float:
    bd = game.spec.bundle
    wn = operator_norm_scaled(game)
    margin = 1 - math.sqrt(bd.c_z) * wn
    return math.inf if margin <= 0 else (bd.ell_J / bd.ell_c) * math.sqrt(bd.c_alpha) * wn / margin


def best_responses(game: FiniteGame, alpha, noise: NoiseBatch | None = None) -> np.ndarray:
    """Every player's best response to the others' current actions."""
    alpha = np.asarray(alpha, dtype=float)
    spec = game.spec
    if _closed_form_ready(game):
        return spec.cost.minimizer(game.scaled @ alpha)
    if _analytic_ok(game):
        # exact expected cost is quadratic in the deviation: take the parabola vertex
        mo = _moments(game, alpha)
        idx = np.arange(game.N)
        f = _running(game)
        c_m = _analytic_cost(f, mo, alpha - 1.0, idx, alpha)
        c_0 = _analytic_cost(f, mo, alpha, idx, alpha)
        c_p = _analytic_cost(f, mo, alpha + 1.0, idx, alpha)
        curv = c_p - 2 * c_0 + c_m
        if np.any(curv <= 0):
            raise ConditionViolation("expected cost is not strictly convex in the player's own action")
        return alpha - (c_p - c_m) / (2 * curv)
    if noise is None:
        raise ConfigError("best responses for non-affine games need a noise batch")
    out = np.empty(game.N)
    lo, hi = getattr(spec.cost, "bracket", (-10.0, 10.0))
    for i in range(game.N):
        out[i] = _golden(lambda b: _mc_deviation_costs(game, i, np.array([b]), alpha, noise)[0][0], lo, hi)
    return out


def _golden(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * (1 + abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def solve_nash_finite(game: FiniteGame, method="closed", noise: NoiseBatch | None = None) -> np.ndarray:
    spec = game.spec
    if method == "closed":
        if not _closed_form_ready(game):
            raise ConditionViolation("finite closed form needs identity drift, quadratic cost and zero diagonal")
        c = spec.cost
        A = 2 * c.q2 * np.eye(game.N) + c.qz * game.scaled
        try:
            alpha = np.linalg.solve(A, np.full(game.N, -c.q1))
        except np.linalg.LinAlgError as exc:
            raise ConditionViolation("finite equilibrium system is singular") from exc
        if not np.all(np.isfinite(alpha)):
            raise ConditionViolation("finite equilibrium system is numerically singular")
        return alpha
    if not isinstance(method, BestResponseIteration):
        raise ConfigError(f"unknown finite solver {method!r}")
    if not method.override:
        u = finite_uniqueness_value(game)
        if not u < 1:
            raise ConditionViolation(f"finite uniqueness value {u:.6g} >= 1")
    alpha = np.zeros(game.N)
    for _ in range(method.max_iter):
        new = (1 - method.damping) * alpha + method.damping * best_responses(game, alpha, noise)
        res = float(np.sqrt(np.mean((new - alpha) ** 2)))
        alpha = new
        if res <= method.tol:
            return alpha
    raise NonConvergence("finite best-response iteration did not converge", last=alpha, residual=res)


# ---------------------------------------------------------------- epsilon-Nash


@dataclass(frozen=True)
class BetaGrid:
    lo: float = -2.0
    hi: float = 2.0
    steps: int = 41

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class EpsilonReport:
    epsilon: float
    stderr: float
    player: int
    beta: float
    gains: np.ndarray = field(repr=False)


def _mc_deviation_costs(game: FiniteGame, i: int, betas: np.ndarray, alpha: np.ndarray, noise: NoiseBatch,
                        Z: np.ndarray | None = None, mo: _Moments | None = None):
    """Per-sample costs (S x len(betas)) of player i deviating to each beta, common noise."""
    spec = game.spec
    f = _running(game)
    xi = noise.samples[:, i][:, None]
    coeffs = spec.drift.affine()
    if coeffs is not None:
        if Z is None:
            Z = aggregate_samples(game, alpha, noise)
        if mo is None:
            mo = _moments(game, alpha)
        # the aggregate is affine in the deviation, so re-solving is an exact shift
        zi = Z[:, i][:, None] + mo.sa * (betas[None, :] - alpha[i]) * mo.g_diag[i]
        x = spec.b(betas[None, :], zi) + xi
        return f(x, betas[None, :], zi), Z
    cols = []
    for beta in betas:
        dev = alpha.copy()
        dev[i] = beta
        Zd = aggregate_samples(game, dev, noise)
        zi = Zd[:, i]
        cols.append(f(spec.b(beta, zi) + noise.samples[:, i], beta, zi))
    return np.stack(cols, axis=1), Z


def _quadratic_gains(game: FiniteGame, alpha: np.ndarray, grid: np.ndarray, br: np.ndarray, noise: NoiseBatch,
                     chunk: int = 128):
    # With quadratic f and affine drift every per-sample cost is a quadratic in
    # the deviation d = beta - alpha_i, so three evaluations fix it exactly.
    spec = game.spec
    f = _running(game)
    Z = aggregate_samples(game, alpha, noise)
    mo = _moments(game, alpha)
    N = game.N
    gains, ses, best = np.empty(N), np.empty(N), np.empty(N)
    for start in range(0, N, chunk):
        cols = slice(start, min(N, start + chunk))
        a = alpha[cols]
        xi = noise.samples[:, cols]
        z0 = Z[:, cols]
        gd = mo.g_diag[cols]

        def cost(d):
            zi = z0 + mo.sa * d * gd
            return f(spec.b(a + d, zi) + xi, a + d, zi)

        c_m, c_0, c_p = cost(-1.0), cost(0.0), cost(1.0)
        lin = 0.5 * (c_p - c_m)
        quad = 0.5 * (c_p - 2 * c_0 + c_m)
        L, Q = lin.mean(axis=0), quad.mean(axis=0)
        d = np.concatenate([np.zeros((a.size, 1)), (br[cols] - a)[:, None], grid[None, :] - a[:, None]], axis=1)
        mean_gain = -(L[:, None] * d + Q[:, None] * d * d)
        k = np.argmax(mean_gain, axis=1)
        rows = np.arange(a.size)
        dk = d[rows, k]
        gains[cols] = mean_gain[rows, k]
        ses[cols] = noise.stderr(-(lin * dk[None, :] + quad * dk[None, :] ** 2))
        best[cols] = a + dk
    return gains, ses, best


def epsilon_nash_details(game: FiniteGame, alpha, beta_grid: BetaGrid, noise: NoiseBatch) -> EpsilonReport:
    alpha = np.asarray(alpha, dtype=float)
    grid = beta_grid.points()
    if _analytic_ok(game):
        br = best_responses(game, alpha)
        grid = np.union1d(grid, np.linspace(min(beta_grid.lo, br.min()), max(beta_grid.hi, br.max()),
                                            beta_grid.steps))
        gains, ses, best_beta = _quadratic_gains(game, alpha, grid, br, noise)
    else:
        gains, ses, best_beta = np.empty(game.N), np.empty(game.N), np.empty(game.N)
        for i in range(game.N):
            betas = np.concatenate([[alpha[i]], grid])
            costs, _ = _mc_deviation_costs(game, i, betas, alpha, noise)
            diff = costs[:, :1] - costs
            mean = diff.mean(axis=0)
            k = int(np.argmax(mean))
            gains[i], best_beta[i] = mean[k], betas[k]
            ses[i] = float(noise.stderr(diff[:, k:k + 1])[0])
    j = int(np.argmax(gains))
    return EpsilonReport(float(gains[j]), float(np.max(ses)), j, float(best_beta[j]), gains)


def epsilon_nash_certify(game: FiniteGame, alpha, beta_grid: BetaGrid, noise: NoiseBatch) -> float:
    """Largest Monte Carlo gain any player obtains by a unilateral deviation."""
    return epsilon_nash_details(game, alpha, beta_grid, noise).epsilon


def write_finite_csv(alpha, path) -> None:
    lines = ["i,alpha"] + [f"{i + 1},{a:.17g}" for i, a in enumerate(np.asarray(alpha, dtype=float))]
    Path(path).write_text("\n".join(lines) + "\n")


def read_finite_csv(path) -> np.ndarray:
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != "i,alpha":
        raise ValueError("equilibrium CSV must start with header i,alpha")
    return np.array([float(r.split(",")[1]) for r in rows[1:]])
