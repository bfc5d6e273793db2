"""Graphon kernels, their discretized integral operators and sampled graphs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConditionViolation, ConfigError, NonConvergence
from .function_space import Grid, GridProfile


# ---------------------------------------------------------------- families


class Graphon:
    """Base class; subclasses implement `evaluate` on broadcastable arrays."""

    tag = "graphon"

    def evaluate(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def bounded01(self) -> bool:
        """True when the kernel is known to take values in [0, 1]."""
        return False


@dataclass(frozen=True)
class Constant(Graphon):
    a: float
    tag = "constant"

    def evaluate(self, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(self.a))

    def params(self):
        return {"a": self.a}

    def bounded01(self):
        return 0.0 <= self.a <= 1.0


@dataclass(frozen=True)
class StepMatrix(Graphon):
    """Psi^K(W): value W[i][j] on [i/K, (i+1)/K) x [j/K, (j+1)/K)."""

    W: tuple
    tag = "step"

    def __post_init__(self):
        m = np.array(self.W, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ConfigError("step graphon needs a non-empty square matrix")
        if not np.array_equal(m, m.T):
            raise ConfigError("step graphon matrix must be symmetric")
        object.__setattr__(self, "W", tuple(tuple(float(v) for v in row) for row in m))

    @property
    def K(self) -> int:
        return len(self.W)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.array(self.W, dtype=float)
        m.setflags(write=False)
        return m

    def block_index(self, x) -> np.ndarray:
        return np.clip(np.floor(np.asarray(x, dtype=float) * self.K).astype(int), 0, self.K - 1)

    def evaluate(self, x, y):
        return self.matrix[self.block_index(x), self.block_index(y)]

    def params(self):
        return {"K": self.K, "W": self.W}

    def bounded01(self):
        return bool(np.all((self.matrix >= 0) & (self.matrix <= 1)))


@dataclass(frozen=True)
class PowerLaw(Graphon):
    gamma: float
    tag = "powerlaw"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0 / 3.0:
            raise ConfigError(f"power-law exponent must lie in (0, 1/3), got {self.gamma}")

    @property
    def scale(self) -> float:
        return 1.0

    def evaluate(self, x, y):
        return self.scale * (np.asarray(x, dtype=float) * np.asarray(y, dtype=float)) ** (-self.gamma)

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True)
class NormalizedPowerLaw(PowerLaw):
    """g(gamma) (xy)^(-gamma); g defaults to (1 - gamma)^2, giving unit edge density."""

    g: float | None = None
    tag = "npowerlaw"

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5:
            raise ConfigError(f"normalized power-law exponent must lie in (0, 1/2), got {self.gamma}")
        if self.g is None:
            object.__setattr__(self, "g", (1.0 - self.gamma) ** 2)

    @property
    def scale(self) -> float:
        return float(self.g)

    def params(self):
        return {"gamma": self.gamma, "g": self.g}


@dataclass(frozen=True)
class MinMax(Graphon):
    tag = "minmax"

    def evaluate(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.minimum(x, y) * (1.0 - np.maximum(x, y))

    def bounded01(self):
        return True


@dataclass(frozen=True)
class SimpleThreshold(Graphon):
    tag = "threshold"

    def evaluate(self, x, y):
        return (np.asarray(x, dtype=float) + np.asarray(y, dtype=float) <= 1.0).astype(float)

    def bounded01(self):
        return True


def circle_distance(x, y) -> np.ndarray:
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class WattsStrogatz(Graphon):
    p: float
    rewire: float
    tag = "ws"

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.rewire <= 1.0):
            raise ConfigError("Watts-Strogatz parameters must lie in [0, 1]")

    @property
    def near(self) -> float:
        return 1.0 - self.rewire * (1.0 - self.p)

    @property
    def far(self) -> float:
        return self.rewire * self.p

    def evaluate(self, x, y):
        close = circle_distance(x, y) <= self.p / 2.0
        return np.where(close, self.near, self.far)

    def params(self):
        return {"p": self.p, "rewire": self.rewire}

    def bounded01(self):
        return True


@dataclass(frozen=True)
class CustomKernel(Graphon):
    """Caller-supplied symmetric kernel fn(x, y) evaluated on arrays."""

    fn: Callable = field(compare=False)
    name: str = "custom"
    unit_range: bool = False
    tag = "custom"

    def evaluate(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.asarray(self.fn(x, y), dtype=float)

    def params(self):
        return {"name": self.name}

    def bounded01(self):
        return self.unit_range


FAMILIES = {
    cls.tag: cls
    for cls in (Constant, StepMatrix, PowerLaw, NormalizedPowerLaw, MinMax, SimpleThreshold, WattsStrogatz)
}


def eval_graphon(w: Graphon, x: float, y: float) -> float:
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ConfigError(f"graphon coordinates must lie in [0,1], got ({x}, {y})")
    if isinstance(w, PowerLaw) and (x == 0.0 or y == 0.0):
        raise ConfigError("power-law graphon is singular on the axes")
    return float(w.evaluate(x, y))


def step_graphon_from_matrix(W) -> StepMatrix:
    return StepMatrix(tuple(map(tuple, np.asarray(W, dtype=float))))


# ---------------------------------------------------------------- operator


@dataclass(frozen=True)
class DiscretizedOperator:
    """Nystrom operator [W g]_i = sum_j A_ij weights_j g_j.

    With the default midpoint rule every weight is 1/M. The "adapted" rule
    keeps the grid but swaps in cell averages (indicator kernels) or
    endpoint-corrected weights (power-law kernels).
    """

    grid: Grid
    kernel: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    rule: str = "midpoint"

    @property
    def quadrature_weight(self) -> float:
        return 1.0 / self.grid.M

    @cached_property
    def matrix(self) -> np.ndarray:
        """The M x M matrix acting on grid values."""
        m = self.kernel * self.weights[None, :]
        m.setflags(write=False)
        return m

    @property
    def positive_weights(self) -> bool:
        return bool(np.all(self.weights > 0))

    @cached_property
    def symmetric_matrix(self) -> np.ndarray:
        """D^(1/2) A D^(1/2), similar to `matrix` when all weights are positive."""
        s = np.sqrt(self.weights)
        m = s[:, None] * self.kernel * s[None, :]
        m.setflags(write=False)
        return m

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _threshold_cells(M: int) -> np.ndarray:
    i = np.arange(1, M + 1)
    s = i[:, None] + i[None, :]
    return np.where(s <= M, 1.0, np.where(s == M + 1, 0.5, 0.0))


def _triangular_cdf(u, centre, h):
    # CDF of x - y for (x, y) uniform on a cell of side h whose offset is centre
    t = (np.asarray(u) - centre) / h
    t = np.clip(t, -1.0, 1.0)
    return np.where(t <= 0, 0.5 * (1 + t) ** 2, 1 - 0.5 * (1 - t) ** 2)


def _watts_strogatz_cells(w: WattsStrogatz, M: int) -> np.ndarray:
    h = 1.0 / M
    k = np.arange(-(M - 1), M)
    centre = k * h
    r = w.p / 2.0

    def mass(lo, hi):
        return _triangular_cdf(hi, centre, h) - _triangular_cdf(lo, centre, h)

    if r >= 0.5:
        frac = np.ones_like(centre)
    else:
        frac = mass(-r, r) + mass(1 - r, 1.0 + h) + mass(-1.0 - h, -1 + r)
    frac = np.clip(frac, 0.0, 1.0)
    by_offset = w.far + (w.near - w.far) * frac
    i = np.arange(M)
    return by_offset[(i[:, None] - i[None, :]) + (M - 1)]


def power_law_weights(gamma: float, grid: Grid) -> np.ndarray:
    """Midpoint weights with the two leftmost nodes corrected.

    The corrected rule integrates y^(-gamma) and y^(-2 gamma) exactly, which
    are the only singular moments met by the resolvent of a power-law kernel.
    """
    M = grid.M
    x = grid.points
    w = np.full(M, 1.0 / M)
    if M < 3:
        return w
    powers = (-gamma, -2.0 * gamma)
    V = np.array([[x[0] ** p, x[1] ** p] for p in powers])
    rhs = np.array([1.0 / (1.0 + p) - np.sum(x[2:] ** p) / M for p in powers])
    w[:2] = np.linalg.solve(V, rhs)
    return w


def discretize(w: Graphon, grid: Grid, rule: str = "midpoint") -> DiscretizedOperator:
    if rule not in ("midpoint", "adapted"):
        raise ConfigError(f"unknown quadrature rule {rule!r}")
    M = grid.M
    x = grid.points
    weights = np.full(M, 1.0 / M)
    if rule == "adapted" and isinstance(w, SimpleThreshold):
        A = _threshold_cells(M)
    elif rule == "adapted" and isinstance(w, WattsStrogatz):
        A = _watts_strogatz_cells(w, M)
    else:
        A = w.evaluate(x[:, None], x[None, :])
        if rule == "adapted" and isinstance(w, PowerLaw):
            weights = power_law_weights(w.gamma, grid)
    A = np.asarray(A, dtype=float)
    # exact symmetry regardless of floating-point evaluation order
    A = np.triu(A) + np.triu(A, 1).T
    return DiscretizedOperator(grid, _frozen(A), _frozen(weights), rule)


def apply(op: DiscretizedOperator, p: GridProfile) -> GridProfile:
    if p.grid.M != op.grid.M:
        raise ValueError(f"grid mismatch: operator M={op.grid.M}, profile M={p.grid.M}")
    return GridProfile(op.grid, op.matrix @ p.values)


def operator_norm(op: DiscretizedOperator, tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Largest |eigenvalue| of the discretized operator by power iteration.

    With positive weights the iteration runs on the symmetric similar matrix,
    where ||S v|| for a unit vector v increases to the spectral norm even when
    +lambda and -lambda are both present.
    """
    S = op.symmetric_matrix if op.positive_weights else op.matrix
    rng = np.random.default_rng(12345)
    v = 1.0 + 0.1 * rng.random(op.grid.M)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        Sv = S @ v
        new = float(np.linalg.norm(Sv))
        if new == 0.0:
            return 0.0
        v = Sv / new
        if abs(new - lam) <= tol:
            return new
        lam = new
    raise NonConvergence(f"power iteration did not settle in {max_iter} steps", last=lam)


def hs_norm(w, grid: Grid | None = None) -> float:
    """Hilbert-Schmidt norm ||w||_2; accepts a graphon plus grid or an operator."""
    if isinstance(w, DiscretizedOperator):
        om = w.weights
        return float(np.sqrt(max(om @ (w.kernel**2) @ om, 0.0)))
    if grid is None:
        raise ValueError("hs_norm of a graphon needs a grid")
    x = grid.points
    A = w.evaluate(x[:, None], x[None, :])
    return float(np.sqrt(np.sum(A**2)) / grid.M)


@dataclass(frozen=True)
class NeumannSeries:
    tol: float = 1e-15
    max_terms: int = 100000


@dataclass(frozen=True)
class DirectSolve:
    pass


def resolvent_apply(op: DiscretizedOperator, theta: float, phi: GridProfile,
                    method=None, w_norm: float | None = None) -> GridProfile:
    """r = [I - theta W]^(-1) phi."""
    method = NeumannSeries() if method is None else method
    if phi.grid.M != op.grid.M:
        raise ValueError("grid mismatch between operator and profile")
    if theta == 0.0:
        return phi
    K = op.matrix
    if isinstance(method, DirectSolve):
        sys = np.eye(op.grid.M) - theta * K
        try:
            r = np.linalg.solve(sys, phi.values)
        except np.linalg.LinAlgError as exc:
            raise ConditionViolation(f"I - theta W is singular for theta={theta}") from exc
        # LAPACK rarely flags an exactly singular system; an exploding solution does
        if not np.all(np.isfinite(r)) or np.max(np.abs(r)) > 1e10 * (1.0 + np.max(np.abs(phi.values))):
            raise ConditionViolation(f"I - theta W is numerically singular for theta={theta}")
        return GridProfile(op.grid, r)
    norm = operator_norm(op) if w_norm is None else w_norm
    if abs(theta) * norm >= 1.0:
        raise ConditionViolation(f"|theta|*||W|| = {abs(theta) * norm:.6g} >= 1; Neumann series diverges")
    term = phi.values.copy()
    total = term.copy()
    for _ in range(method.max_terms):
        term = theta * (K @ term)
        total += term
        if np.sqrt(np.mean(term**2)) <= method.tol:
            return GridProfile(op.grid, total)
    raise NonConvergence("Neumann series did not reach tolerance", last=GridProfile(op.grid, total))


def eigen_decompose(op: DiscretizedOperator, k: int):
    """Top-k eigenpairs by |lambda|; eigenprofiles orthonormal for the operator's weights."""
    if not 1 <= k <= op.grid.M:
        raise ValueError(f"need 1 <= k <= M, got k={k}")
    if not op.positive_weights:
        raise ValueError("eigen decomposition needs positive quadrature weights")
    lam, U = np.linalg.eigh(op.symmetric_matrix)
    order = np.argsort(-np.abs(lam), kind="stable")[:k]
    lam = lam[order]
    phis = U[:, order] / np.sqrt(op.weights)[:, None]
    return lam, [GridProfile(op.grid, phis[:, j]) for j in range(k)]


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class SampledGraph:
    N: int
    W: np.ndarray = field(repr=False)
    kind: str
    latent: np.ndarray = field(repr=False)

    def __post_init__(self):
        W = _frozen(self.W)
        if W.shape != (self.N, self.N):
            raise ValueError("weight matrix shape does not match N")
        if not np.array_equal(W, W.T) or np.any(np.diag(W) != 0):
            raise ValueError("sampled graph must be symmetric with zero diagonal")
        if self.kind not in ("weighted", "bernoulli"):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "latent", _frozen(self.latent))


def _latent_points(N: int, rng: np.random.Generator) -> np.ndarray:
    if N < 1:
        raise ConfigError("sample size must be positive")
    return np.sort(rng.random(N))


def sample_weighted(w: Graphon, N: int, seed: int) -> SampledGraph:
    rng = np.random.default_rng(seed)
    x = _latent_points(N, rng)
    P = np.array(w.evaluate(x[:, None], x[None, :]), dtype=float)
    P = np.triu(P, 1)
    return SampledGraph(N, P + P.T, "weighted", x)


def sample_bernoulli(w: Graphon, N: int, seed: int) -> SampledGraph:
    if not w.bounded01():
        raise ConfigError(f"Bernoulli sampling needs a [0,1]-valued graphon, got {w.tag}")
    rng = np.random.default_rng(seed)
    x = _latent_points(N, rng)
    P = np.array(w.evaluate(x[:, None], x[None, :]), dtype=float)
    U = rng.random((N, N))
    E = np.triu((U < P).astype(float), 1)
    return SampledGraph(N, E + E.T, "bernoulli", x)


def sample_graph(w: Graphon, N: int, seed: int, kind: str) -> SampledGraph:
    if kind == "weighted":
        return sample_weighted(w, N, seed)
    if kind == "bernoulli":
        return sample_bernoulli(w, N, seed)
    raise ConfigError(f"unknown sampling kind {kind!r}")


def write_graph_csv(g: SampledGraph, path) -> Path:
    """Upper-triangle edges as `i,j,w` (1-based) plus a `.latent` sidecar line."""
    path = Path(path)
    iu, ju = np.nonzero(np.triu(g.W, 1))
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["i", "j", "w"])
        for i, j in zip(iu, ju):
            out.writerow([i + 1, j + 1, f"{g.W[i, j]:.17g}"])
    side = path.with_suffix(path.suffix + ".latent")
    side.write_text(f"kind={g.kind};N={g.N};x=" + ",".join(f"{v:.17g}" for v in g.latent) + "\n")
    return side


def read_graph_csv(path) -> SampledGraph:
    path = Path(path)
    meta = path.with_suffix(path.suffix + ".latent").read_text().strip()
    fields = dict(part.split("=", 1) for part in meta.split(";"))
    N = int(fields["N"])
    latent = np.array([float(v) for v in fields["x"].split(",")]) if fields["x"] else np.zeros(0)
    W = np.zeros((N, N))
    with path.open() as fh:
        rows = csv.reader(fh)
        if next(rows) != ["i", "j", "w"]:
            raise ValueError("graph CSV must start with header i,j,w")
        for i, j, v in rows:
            W[int(i) - 1, int(j) - 1] = W[int(j) - 1, int(i) - 1] = float(v)
    return SampledGraph(N, W, fields["kind"], latent)


# ---------------------------------------------------------------- cut norm


def cut_norm_bounds(w1: Graphon, w2: Graphon, grid: Grid, scan_resolution: int = 32):
    """(lower, upper) bounds on the cut norm of w1 - w2.

    lower: best rectangle S x T with S, T intervals on a lattice of spacing
    1/scan_resolution; upper: ||w1 - w2||_2.
    """
    x = grid.points
    D = w1.evaluate(x[:, None], x[None, :]) - w2.evaluate(x[:, None], x[None, :])
    return cut_norm_bounds_kernel(D, scan_resolution)


def cut_norm_bounds_kernel(D: np.ndarray, scan_resolution: int = 32):
    """Cut-norm bounds for a kernel difference already sampled on a midpoint grid."""
    if scan_resolution < 2:
        raise ValueError("scan resolution must be at least 2")
    M = D.shape[0]
    x = (np.arange(M) + 0.5) / M
    cell = np.asarray(D, dtype=float) / M**2
    upper = float(np.sqrt(np.sum(cell**2)) * M)
    P = np.zeros((M + 1, M + 1))
    P[1:, 1:] = np.cumsum(np.cumsum(cell, axis=0), axis=1)
    cuts = np.searchsorted(x, np.linspace(0.0, 1.0, scan_resolution + 1))
    Q = P[np.ix_(cuts, cuts)]
    lower = 0.0
    for a in range(len(cuts)):
        rows = Q[a + 1:] - Q[a]
        if rows.size:
            lower = max(lower, float(np.max(rows.max(axis=1) - rows.min(axis=1))))
    return min(lower, upper), upper
