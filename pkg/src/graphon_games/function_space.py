"""Uniform midpoint discretization of L^2([0,1]).

Every profile (strategies alpha, aggregates z) lives on a grid of M cells
with midpoints x_i = (i - 1/2)/M. Block embeddings psi^N and block averages
mu^N are exact whenever N divides M.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_M = 1024


@dataclass(frozen=True)
class Grid:
    M: int

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ValueError(f"grid size must be a positive integer, got {self.M!r}")

    @property
    def points(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) / self.M

    @property
    def width(self) -> float:
        return 1.0 / self.M


def make_grid(M: int = DEFAULT_M) -> Grid:
    return Grid(int(M))


@dataclass(frozen=True)
class GridProfile:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.M,):
            raise ValueError(f"profile has shape {v.shape}, grid needs ({self.grid.M},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridProfile":
        return cls(grid, np.full(grid.M, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "GridProfile":
        return cls(grid, np.asarray(fn(grid.points), dtype=float) * np.ones(grid.M))

    def __add__(self, other: "GridProfile") -> "GridProfile":
        _check_same(self, other)
        return GridProfile(self.grid, self.values + other.values)

    def __sub__(self, other: "GridProfile") -> "GridProfile":
        _check_same(self, other)
        return GridProfile(self.grid, self.values - other.values)

    def scale(self, c: float) -> "GridProfile":
        return GridProfile(self.grid, c * self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _check_same(p: GridProfile, q: GridProfile) -> None:
    if p.grid.M != q.grid.M:
        raise ValueError(f"grid mismatch: M={p.grid.M} vs M={q.grid.M}")


def integrate(p: GridProfile) -> float:
    return float(np.sum(p.values) / p.grid.M)


def l2_norm(p: GridProfile) -> float:
    return float(np.sqrt(np.sum(p.values**2) / p.grid.M))


def l2_dist(p: GridProfile, q: GridProfile) -> float:
    _check_same(p, q)
    return l2_norm(p - q)


def embed_step(v, M: int) -> GridProfile:
    """psi^N: the block-constant profile taking value v_i on [(i-1)/N, i/N)."""
    v = np.asarray(v, dtype=float).ravel()
    N = v.size
    if N == 0 or M < 1 or M % N:
        raise ValueError(f"grid size {M} is not a positive multiple of {N}")
    return GridProfile(Grid(int(M)), np.repeat(v, M // N))


def block_average(p: GridProfile, N: int) -> np.ndarray:
    """mu^N: mean of the profile over each of N equal blocks."""
    M = p.grid.M
    if N < 1 or M % N:
        raise ValueError(f"grid size {M} is not a multiple of {N}")
    blocks = p.values.reshape(N, M // N)
    # averaging offsets from the first cell keeps constant blocks exact
    first = blocks[:, 0]
    return first + (blocks - first[:, None]).mean(axis=1)


@dataclass(frozen=True)
class PermutationSearch:
    """Relabeling family searched when bounding d_S.

    mode is "identity", "sort" or "blocks"; for "blocks" the profiles must be
    constant on `blocks` equal cells and every block permutation is tried.
    """

    mode: str = "identity"
    blocks: int = 0

    MAX_BLOCKS = 9

    def __post_init__(self):
        if self.mode not in ("identity", "sort", "blocks"):
            raise ValueError(f"unknown permutation search mode {self.mode!r}")
        if self.mode == "blocks" and not 1 <= self.blocks <= self.MAX_BLOCKS:
            raise ValueError(f"exhaustive block search needs 1..{self.MAX_BLOCKS} blocks, got {self.blocks}")


IDENTITY = PermutationSearch("identity")
SORT_VALUES = PermutationSearch("sort")


def exhaustive_blocks(K: int) -> PermutationSearch:
    return PermutationSearch("blocks", K)


def perm_invariant_dist(p: GridProfile, q: GridProfile, search: PermutationSearch = IDENTITY) -> float:
    """Upper bound on d_S(p, q): the smallest L^2 distance over the searched relabelings."""
    _check_same(p, q)
    base = l2_dist(p, q)
    if search.mode == "identity":
        return base
    if search.mode == "sort":
        d = float(np.sqrt(np.mean((np.sort(p.values) - np.sort(q.values)) ** 2)))
        return min(base, d)
    K = search.blocks
    M = p.grid.M
    if M % K:
        raise ValueError(f"grid size {M} is not a multiple of {K} blocks")
    pb = block_average(p, K)
    qb = block_average(q, K)
    for prof, avg in ((p, pb), (q, qb)):
        gap = np.max(np.abs(np.repeat(avg, M // K) - prof.values))
        if gap > 1e-12 * (1 + np.max(np.abs(avg))):
            raise ValueError(f"profile is not constant on {K} blocks")
    best = base
    for perm in itertools.permutations(range(K)):
        best = min(best, float(np.sqrt(np.mean((pb - qb[list(perm)]) ** 2))))
    return best


def write_profile_csv(p: GridProfile, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for x, v in zip(p.grid.points, p.values):
            w.writerow([f"{x:.17g}", f"{v:.17g}"])


def read_profile_csv(path) -> GridProfile:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "value"]:
        raise ValueError("profile CSV must start with header x,value")
    vals = np.array([float(r[1]) for r in rows[1:]])
    return GridProfile(Grid(len(vals)), vals)
