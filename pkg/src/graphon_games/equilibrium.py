"""Continuum graphon-game solvers.

Aggregates solve z = W[b(alpha, z)]; the Nash profile is the fixed point of
B o Z where B maps an aggregate to pointwise best responses. Also houses the
closed forms of the linear-quadratic examples, the mean-field reductions,
the central planner and the price of anarchy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConditionViolation, ConfigError, NonConvergence
from .function_space import Grid, GridProfile
from .game import Certificate, CustomCost, GameSpec, IdentityDrift, QuadraticCost, certify
from .graphon import (Constant, DirectSolve, DiscretizedOperator, Graphon, NeumannSeries, NormalizedPowerLaw,
                      PowerLaw, SimpleThreshold, StepMatrix, discretize, operator_norm, resolvent_apply)

DIVERGENCE_WINDOW = 50


def op_norm(op: DiscretizedOperator) -> float:
    """Operator norm, computed once per operator."""
    cached = op.__dict__.get("_norm")
    if cached is None:
        cached = operator_norm(op)
        op.__dict__["_norm"] = cached
    return cached


def _require_contraction(spec: GameSpec, w_norm: float) -> Certificate:
    cert = certify(spec, w_norm)
    if not cert.contraction_ok:
        raise ConditionViolation(
            f"sqrt(c_z)*||W|| = {math.sqrt(spec.bundle.c_z) * w_norm:.6g} >= 1; aggregate map is not a contraction")
    return cert


# ---------------------------------------------------------------- Z and B


def _aggregate(spec: GameSpec, K: np.ndarray, alpha: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    if isinstance(spec.drift, IdentityDrift):
        return K @ alpha
    z = np.zeros_like(alpha)
    for _ in range(max_iter):
        z_new = K @ spec.b(alpha, z)
        if np.max(np.abs(z_new - z)) <= tol:
            return z_new
        z = z_new
    raise NonConvergence(f"aggregate iteration exhausted {max_iter} steps", last=z,
                         residual=float(np.max(np.abs(K @ spec.b(alpha, z) - z))))


def solve_aggregate(spec: GameSpec, op: DiscretizedOperator, alpha: GridProfile, tol: float = 1e-13,
                    max_iter: int = 100000, override: bool = False) -> GridProfile:
    """Banach iteration for z = W[b(alpha, z)] started at z = 0."""
    if alpha.grid.M != op.grid.M:
        raise ValueError("grid mismatch between operator and profile")
    if not override:
        _require_contraction(spec, op_norm(op))
    return GridProfile(op.grid, _aggregate(spec, op.matrix, alpha.values, tol, max_iter))


def _newton_best_response(cost: CustomCost, z: np.ndarray, grid_points=None) -> np.ndarray:
    lo = np.full(z.shape, float(cost.bracket[0]))
    hi = np.full(z.shape, float(cost.bracket[1]))
    g_lo = cost.grad_alpha(lo, z)
    g_hi = cost.grad_alpha(hi, z)
    bad = ~((g_lo <= 0) & (g_hi >= 0))
    if np.any(bad):
        i = int(np.argmax(bad))
        where = f"x={grid_points[i]:.6g}" if grid_points is not None else f"index {i}"
        raise ConditionViolation(f"best response not bracketed by {cost.bracket} at {where}")
    a = 0.5 * (lo + hi)
    for _ in range(500):
        g = cost.grad_alpha(a, z)
        if np.all(np.abs(g) <= 1e-12):
            return a
        lo = np.where(g < 0, a, lo)
        hi = np.where(g > 0, a, hi)
        h = 1e-6 * (1.0 + np.abs(a))
        curv = (cost.grad_alpha(a + h, z) - cost.grad_alpha(a - h, z)) / (2 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = a - g / curv
        bisect = 0.5 * (lo + hi)
        ok = np.isfinite(step) & (step > lo) & (step < hi) & (curv > 0)
        a = np.where(np.abs(g) <= 1e-12, a, np.where(ok, step, bisect))
        if np.all(hi - lo <= 4 * np.finfo(float).eps * (1 + np.abs(a))):
            return a
    return a


def best_response_profile(spec: GameSpec, z: GridProfile) -> GridProfile:
    return GridProfile(z.grid, _best_response(spec, z.values, z.grid.points))


def _best_response(spec: GameSpec, z: np.ndarray, points=None) -> np.ndarray:
    if isinstance(spec.cost, QuadraticCost):
        return spec.cost.minimizer(z)
    return _newton_best_response(spec.cost, z, points)


# ---------------------------------------------------------------- Nash


@dataclass(frozen=True)
class EquilibriumReport:
    profile: GridProfile
    aggregate: GridProfile
    iterations: int
    residual: float
    certificate: Certificate
    converged: bool
    tol: float = 0.0

    def metadata(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual, "converged": self.converged,
                "tol": self.tol, **self.certificate.as_dict()}


def _picard(spec: GameSpec, K: np.ndarray, init: np.ndarray, tol: float, max_iter: int, damping: float,
            norm, points=None):
    alpha = init.copy()
    growth = 0
    prev = math.inf
    res = math.inf
    for it in range(1, max_iter + 1):
        z = _aggregate(spec, K, alpha, tol / 10.0, 100000)
        new = (1.0 - damping) * alpha + damping * _best_response(spec, z, points)
        res = norm(new - alpha)
        alpha = new
        if not np.all(np.isfinite(alpha)):
            raise NonConvergence("best-response iteration produced non-finite values", residual=res)
        if res <= tol:
            return alpha, it, res, True
        growth = growth + 1 if res > prev else 0
        if growth >= DIVERGENCE_WINDOW:
            raise NonConvergence(f"residual grew for {DIVERGENCE_WINDOW} consecutive iterations "
                                 f"(last residual {res:.3g})", last=alpha, residual=res)
        prev = res
    return alpha, max_iter, res, False


def solve_nash(spec: GameSpec, op: DiscretizedOperator, init: GridProfile | None = None, tol: float = 1e-12,
               max_iter: int = 10000, damping: float = 1.0, override: bool = False) -> EquilibriumReport:
    """Picard iteration alpha <- B(Z(alpha)) from the zero profile (or `init`)."""
    if not 0.0 < damping <= 1.0:
        raise ConfigError("damping must lie in (0, 1]")
    w_norm = op_norm(op)
    cert = certify(spec, w_norm)
    if not cert.contraction_ok and not override:
        raise ConditionViolation(
            f"sqrt(c_z)*||W|| = {math.sqrt(spec.bundle.c_z) * w_norm:.6g} >= 1; aggregate map is not a contraction")
    start = np.zeros(op.grid.M) if init is None else init.values
    M = op.grid.M
    alpha, iters, res, ok = _picard(spec, op.matrix, start, tol, max_iter, damping,
                                    lambda d: float(np.sqrt(np.sum(d * d) / M)), op.grid.points)
    z = _aggregate(spec, op.matrix, alpha, tol / 10.0, 100000)
    return EquilibriumReport(GridProfile(op.grid, alpha), GridProfile(op.grid, z), iters, res, cert, ok, tol)


def fixed_point_residual(spec: GameSpec, op: DiscretizedOperator, alpha: GridProfile, norm: str = "sup") -> float:
    """Distance between alpha and B(Z(alpha))."""
    z = _aggregate(spec, op.matrix, alpha.values, 1e-15, 100000)
    d = alpha.values - _best_response(spec, z, op.grid.points)
    return float(np.max(np.abs(d))) if norm == "sup" else float(np.sqrt(np.mean(d * d)))


def write_equilibrium_csv(report: EquilibriumReport, path) -> None:
    path = Path(path)
    meta = ";".join(f"{k}={_fmt(v)}" for k, v in report.metadata().items())
    lines = [f"# {meta}", "x,alpha,z"]
    for x, a, z in zip(report.profile.grid.points, report.profile.values, report.aggregate.values):
        lines.append(f"{x:.17g},{a:.17g},{z:.17g}")
    path.write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


# ---------------------------------------------------------------- closed forms


def _resolvent_ones(op: DiscretizedOperator, theta: float, method=None) -> GridProfile:
    one = GridProfile.constant(op.grid, 1.0)
    if method is None or isinstance(method, NeumannSeries):
        norm = op_norm(op)
        if abs(theta) * norm >= 1.0:
            raise ConditionViolation(f"|theta|*||W|| = {abs(theta) * norm:.6g} >= 1; resolvent series diverges")
        return resolvent_apply(op, theta, one, method, w_norm=norm)
    return resolvent_apply(op, theta, one, method)


def cournot_coefficients(spec: GameSpec):
    a, b, c = spec.param("a"), spec.param("b"), spec.param("c")
    return a / (1 + 2 * b), c * (1 + b) / (1 + 2 * b), c * (1 + b)


def closed_form_nash(spec: GameSpec, w: Graphon | DiscretizedOperator, grid: Grid | None = None,
                     rule: str = "midpoint", method=None) -> GridProfile:
    """Katz-centrality form of the equilibrium for the built-in examples."""
    op = w if isinstance(w, DiscretizedOperator) else discretize(w, grid, rule)
    if spec.name == "beach":
        return _resolvent_ones(op, 1.0 / 3.0, method).scale(1.0 / 3.0)
    if spec.name == "cities":
        return _resolvent_ones(op, spec.param("theta"), method).scale(spec.param("k"))
    if spec.name == "cournot":
        scale, theta, _ = cournot_coefficients(spec)
        return _resolvent_ones(op, theta, method).scale(scale)
    raise ConfigError(f"no closed form for game {spec.name!r}")


@dataclass(frozen=True)
class CournotCheck:
    proof_profile: GridProfile
    proof_residual: float
    proposition_profile: GridProfile | None
    proposition_residual: float


def cournot_check(spec: GameSpec, op: DiscretizedOperator) -> CournotCheck:
    """Equilibrium-condition residuals of the two Katz forms of the Cournot solution.

    The coupling c(1+b)/(1+2b) solves alpha = B(Z(alpha)); the coupling
    c(1+b) without the 1/(1+2b) factor generally does not.
    """
    scale, theta_proof, theta_prop = cournot_coefficients(spec)
    proof = _resolvent_ones(op, theta_proof, DirectSolve()).scale(scale)
    res_proof = fixed_point_residual(spec, op, proof)
    try:
        prop = _resolvent_ones(op, theta_prop, DirectSolve()).scale(scale)
        res_prop = fixed_point_residual(spec, op, prop)
    except ConditionViolation:
        prop, res_prop = None, math.nan
    return CournotCheck(proof, res_proof, prop, res_prop)


# ---------------------------------------------------------------- mean-field reductions


@dataclass(frozen=True)
class MFGSolution:
    """Block values of the reduced equilibrium; one block for constant strength."""

    alpha: np.ndarray
    z: np.ndarray
    kind: str

    @property
    def alpha_hat(self) -> float:
        return float(self.alpha[0]) if self.kind == "constant" else math.nan

    @property
    def z_hat(self) -> float:
        return float(self.z[0]) if self.kind == "constant" else math.nan

    def profile(self, grid: Grid) -> GridProfile:
        from .function_space import embed_step
        return embed_step(self.alpha, grid.M)


def row_integrals(op: DiscretizedOperator) -> np.ndarray:
    return op.matrix @ np.ones(op.grid.M)


def mfg_reduce(spec: GameSpec, w: Graphon, grid: Grid, tol: float = 1e-10, rule: str = "midpoint",
               solve_tol: float = 1e-14, max_iter: int = 100000) -> MFGSolution | None:
    """Scalar (or K-population) reduction of the graphon game when one exists."""
    op = discretize(w, grid, rule)
    r = row_integrals(op)
    a = float(np.mean(r))
    if np.max(np.abs(r - a)) <= tol:
        K = np.array([[a]])
        kind = "constant"
    elif isinstance(w, StepMatrix):
        K = w.matrix / w.K
        kind = "kpop"
    else:
        return None
    norm = float(np.max(np.abs(np.linalg.eigvalsh(K)))) if K.shape[0] > 1 else abs(a)
    _require_contraction(spec, norm)
    alpha, _, res, ok = _picard(spec, K, np.zeros(K.shape[0]), solve_tol, max_iter, 1.0,
                                lambda d: float(np.sqrt(np.mean(d * d))))
    if not ok:
        raise NonConvergence("mean-field scalar iteration did not converge", last=alpha, residual=res)
    z = _aggregate(spec, K, alpha, solve_tol, max_iter)
    return MFGSolution(alpha, z, kind)


# ---------------------------------------------------------------- social cost and planner


def social_cost(spec: GameSpec, op: DiscretizedOperator, alpha: GridProfile, z: GridProfile | None = None,
                override: bool = False) -> float:
    if z is None:
        z = solve_aggregate(spec, op, alpha, override=override)
    return op.integrate(spec.J(alpha.values, z.values))


@dataclass(frozen=True)
class GradientDescent:
    step: float | None = None
    tol: float = 1e-10
    max_iter: int = 100000


@dataclass(frozen=True)
class PlannerReport:
    profile: GridProfile
    social_cost: float
    method: str
    iterations: int
    gradient_norm: float = 0.0


def _quadratic_identity(spec: GameSpec) -> bool:
    return isinstance(spec.drift, IdentityDrift) and isinstance(spec.cost, QuadraticCost)


def _hessian_poly(cost: QuadraticCost):
    # S''(alpha) = 2 q2 + 2 qz W + 2 rz2 W^2, a polynomial in the self-adjoint W
    return lambda lam: 2 * cost.q2 + 2 * cost.qz * lam + 2 * cost.rz2 * lam * lam


def _planner_convex(cost: QuadraticCost, w_norm: float) -> float:
    """Lower bound of the planner Hessian over the spectral interval [-||W||, ||W||]."""
    p = _hessian_poly(cost)
    cands = [-w_norm, w_norm]
    if cost.rz2 != 0:
        v = -cost.qz / (2 * cost.rz2)
        if -w_norm < v < w_norm:
            cands.append(v)
    return min(p(c) for c in cands)


def _quadratic_gradient(spec: GameSpec, op: DiscretizedOperator, alpha: np.ndarray) -> np.ndarray:
    c = spec.cost
    K = op.matrix
    Ka = K @ alpha
    return 2 * c.q2 * alpha + c.q1 + 2 * c.qz * Ka + 2 * c.rz2 * (K @ Ka) + c.rz1 * (K @ np.ones_like(alpha))


def _adjoint_gradient(spec: GameSpec, op: DiscretizedOperator, alpha: np.ndarray) -> np.ndarray:
    # pointwise partials by central differences, chained through z = W b(alpha, z) by an adjoint solve
    K = op.matrix
    z = _aggregate(spec, K, alpha, 1e-14, 100000)
    h = 1e-5 * (1.0 + np.abs(alpha))
    hz = 1e-5 * (1.0 + np.abs(z))
    J_a = (spec.J(alpha + h, z) - spec.J(alpha - h, z)) / (2 * h)
    J_z = (spec.J(alpha, z + hz) - spec.J(alpha, z - hz)) / (2 * hz)
    b_a = (spec.b(alpha + h, z) - spec.b(alpha - h, z)) / (2 * h)
    b_z = (spec.b(alpha, z + hz) - spec.b(alpha, z - hz)) / (2 * hz)
    y = J_z.copy()
    for _ in range(100000):
        y_new = J_z + b_z * (K @ y)
        if np.max(np.abs(y_new - y)) <= 1e-14 * (1 + np.max(np.abs(y_new))):
            y = y_new
            break
        y = y_new
    return J_a + b_a * (K @ y)


def planner_gradient(spec: GameSpec, op: DiscretizedOperator, alpha: GridProfile) -> GridProfile:
    if _quadratic_identity(spec):
        return GridProfile(op.grid, _quadratic_gradient(spec, op, alpha.values))
    return GridProfile(op.grid, _adjoint_gradient(spec, op, alpha.values))


def planner_optimum(spec: GameSpec, op: DiscretizedOperator, method="closed") -> PlannerReport:
    """Minimize the social cost S(alpha) = int J(alpha_x, [Z alpha]_x) dx."""
    w_norm = op_norm(op)
    _require_contraction(spec, w_norm)
    M = op.grid.M
    l2 = lambda v: float(np.sqrt(np.sum(v * v) / M))  # noqa: E731
    if method == "closed":
        if not _quadratic_identity(spec):
            raise ConditionViolation("closed-form planner needs identity drift and quadratic cost")
        c = spec.cost
        if spec.name == "cities":
            theta = spec.param("theta")
            if 2 * theta * w_norm >= 1:
                raise ConditionViolation(f"2*theta*||W|| = {2 * theta * w_norm:.6g} >= 1; planner problem unbounded")
            alpha = _resolvent_ones(op, 2 * theta, DirectSolve()).scale(spec.param("k"))
        else:
            low = _planner_convex(c, w_norm)
            if low <= 0:
                raise ConditionViolation(f"planner Hessian lower bound {low:.6g} <= 0; closed form unavailable")
            K = op.matrix
            H = 2 * c.q2 * np.eye(M) + 2 * c.qz * K + 2 * c.rz2 * (K @ K)
            rhs = -c.q1 - c.rz1 * (K @ np.ones(M))
            alpha = GridProfile(op.grid, np.linalg.solve(H, rhs))
        g = l2(_quadratic_gradient(spec, op, alpha.values))
        return PlannerReport(alpha, social_cost(spec, op, alpha), "ClosedForm", 0, g)
    if not isinstance(method, GradientDescent):
        raise ConfigError(f"unknown planner method {method!r}")
    alpha = np.zeros(M)
    if _quadratic_identity(spec):
        c = spec.cost
        p = _hessian_poly(c)
        upper = max(abs(p(-w_norm)), abs(p(w_norm)), 2 * c.q2 + 2 * abs(c.qz) * w_norm + 2 * abs(c.rz2) * w_norm**2)
        step = method.step or 1.0 / upper
        for it in range(1, method.max_iter + 1):
            g = _quadratic_gradient(spec, op, alpha)
            gn = l2(g)
            if gn <= method.tol:
                break
            alpha = alpha - step * g
            if not np.all(np.isfinite(alpha)):
                raise NonConvergence("planner gradient descent diverged")
        else:
            raise NonConvergence("planner gradient descent did not reach tolerance", residual=gn)
        prof = GridProfile(op.grid, alpha)
        return PlannerReport(prof, social_cost(spec, op, prof), "GradientDescent", it, gn)
    # general specs: Armijo backtracking on the adjoint gradient
    cost = lambda a: social_cost(spec, op, GridProfile(op.grid, a))  # noqa: E731
    step0 = method.step or 1.0 / spec.bundle.ell_c
    f = cost(alpha)
    for it in range(1, method.max_iter + 1):
        g = _adjoint_gradient(spec, op, alpha)
        gn = l2(g)
        if gn <= method.tol:
            break
        s = step0
        while True:
            trial = alpha - s * g
            ft = cost(trial)
            if ft <= f - 0.5 * s * gn * gn or s < 1e-12:
                break
            s *= 0.5
        alpha, f = trial, ft
    else:
        raise NonConvergence("planner gradient descent did not reach tolerance", residual=gn)
    prof = GridProfile(op.grid, alpha)
    return PlannerReport(prof, f, "GradientDescent", it, gn)


def price_of_anarchy(spec: GameSpec, op: DiscretizedOperator, nash: EquilibriumReport | None = None,
                     planner: PlannerReport | None = None) -> float:
    """S(Nash) / S(planner); in (0, 1] for the cities game where both costs are negative."""
    if nash is None:
        nash = solve_nash(spec, op)
    if planner is None:
        try:
            planner = planner_optimum(spec, op, "closed")
        except ConditionViolation as exc:
            raise ConditionViolation(f"price of anarchy undefined: {exc}") from exc
    s_nash = social_cost(spec, op, nash.profile, nash.aggregate)
    if planner.social_cost == 0:
        raise ConditionViolation("price of anarchy undefined: planner social cost is zero")
    return s_nash / planner.social_cost


def cities_poa_inner_products(op: DiscretizedOperator, theta: float) -> float:
    """<[I - theta W]^-2 1, 1> / <[I - 2 theta W]^-1 1, 1>."""
    r1 = _resolvent_ones(op, theta, DirectSolve())
    r2 = resolvent_apply(op, theta, r1, DirectSolve())
    ro = _resolvent_ones(op, 2 * theta, DirectSolve())
    return op.integrate(r2.values) / op.integrate(ro.values)


@dataclass(frozen=True)
class ConstantStrength:
    a: float


def poa_closed_form(family, theta: float) -> float:
    """Closed-form cities price of anarchy; raises ConditionViolation when infeasible."""
    if isinstance(family, (Constant, ConstantStrength)):
        ta = theta * family.a
        if not 2 * ta < 1:
            raise ConditionViolation(f"2*theta*a = {2 * ta:.6g} >= 1; price of anarchy undefined")
        return (1 - 2 * ta) / (1 - ta) ** 2
    if isinstance(family, PowerLaw):
        gam = family.gamma
        t = theta * family.scale  # the normalized family scales every W by g
        if not 1 - 2 * gam - 2 * t > 0:
            raise ConditionViolation(f"1 - 2*gamma - 2*theta*g = {1 - 2 * gam - 2 * t:.6g} <= 0; "
                                     "price of anarchy undefined")
        num = 1 + t * (1 - 2 * gam) * (2 - 4 * gam - t) / ((1 - gam) ** 2 * (1 - 2 * gam - t) ** 2)
        den = 1 + 2 * t * (1 - 2 * gam) / ((1 - gam) ** 2 * (1 - 2 * gam - 2 * t))
        return num / den
    if isinstance(family, SimpleThreshold):
        if not 0 < theta < math.pi / 4:
            raise ConditionViolation(f"theta = {theta:.6g} outside (0, pi/4); price of anarchy undefined")
        return (2 * theta / (1 - math.sin(theta))) * (
            (1 - math.sin(2 * theta)) / (math.cos(2 * theta) + math.sin(2 * theta) - 1))
    raise ConfigError(f"no closed-form price of anarchy for {family!r}")


# ---------------------------------------------------------------- stability


def stability_bound(spec: GameSpec, w_norm: float, w_norm_prime: float, c0: float) -> float:
    """kappa with ||alpha - alpha'|| <= kappa ||W - W'||."""
    bd = spec.bundle
    s = 1 - math.sqrt(bd.c_z) * w_norm
    if not (s > 0 and 1 - math.sqrt(bd.c_z) * w_norm_prime > 0):
        raise ConditionViolation("sqrt(c_z)*||W|| >= 1 for one of the graphons")
    inner = bd.ell_c * s - bd.ell_J * math.sqrt(bd.c_alpha) * w_norm
    if not inner > 0:
        raise ConditionViolation("uniqueness condition fails for the reference graphon")
    if not math.isfinite(c0):
        raise ConditionViolation("c0 must be finite")
    return c0 * bd.ell_J * s / (s * inner)
