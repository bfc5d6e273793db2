"""Game specifications: drift, reduced cost, noise law and constant bundle.

A player with action alpha facing aggregate z ends in state
X = b(alpha, z) + xi and pays f(X, alpha, z). The reduced cost
J(alpha, z) = E f(b(alpha, z) + xi, alpha, z) drives the continuum game; the
running cost f itself is kept for the finite game, where z is random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError

A_MAX = 10.0


# ---------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "pointmass"):
            raise ConfigError(f"unknown noise family {self.kind!r}")
        if self.scale < 0:
            raise ConfigError("noise scale must be nonnegative")
        if self.kind == "pointmass":
            object.__setattr__(self, "scale", 0.0)

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.scale**2
        if self.kind == "uniform":
            return self.scale**2 / 3.0
        return 0.0

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, size=shape)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size=shape)
        return np.zeros(shape)


def gaussian(sigma: float) -> NoiseSpec:
    return NoiseSpec("gaussian", sigma)


def uniform(half_width: float) -> NoiseSpec:
    return NoiseSpec("uniform", half_width)


POINT_MASS = NoiseSpec("pointmass", 0.0)


# ---------------------------------------------------------------- drift


@dataclass(frozen=True)
class IdentityDrift:
    tag = "identity"

    def __call__(self, alpha, z):
        return np.asarray(alpha, dtype=float) + 0.0 * np.asarray(z, dtype=float)

    @property
    def sqrt_c_alpha(self) -> float:
        return 1.0

    @property
    def sqrt_c_z(self) -> float:
        return 0.0

    def affine(self):
        """(a0, s_alpha, s_z) with b = a0 + s_alpha alpha + s_z z."""
        return 0.0, 1.0, 0.0


@dataclass(frozen=True)
class AffineDrift:
    """b(alpha, z) = a0 - b1 alpha + c1 z."""

    a0: float
    b1: float
    c1: float
    tag = "affine"

    def __call__(self, alpha, z):
        return self.a0 - self.b1 * np.asarray(alpha, dtype=float) + self.c1 * np.asarray(z, dtype=float)

    @property
    def sqrt_c_alpha(self) -> float:
        return abs(self.b1)

    @property
    def sqrt_c_z(self) -> float:
        return abs(self.c1)

    def affine(self):
        return self.a0, -self.b1, self.c1


@dataclass(frozen=True)
class CustomDrift:
    fn: Callable = field(compare=False)
    sqrt_c_alpha: float = 1.0
    sqrt_c_z: float = 0.0
    name: str = "custom"
    tag = "custom"

    def __post_init__(self):
        if self.sqrt_c_alpha < 0 or self.sqrt_c_z < 0:
            raise ConfigError("declared drift constants must be nonnegative")

    def __call__(self, alpha, z):
        return np.asarray(self.fn(np.asarray(alpha, dtype=float), np.asarray(z, dtype=float)), dtype=float)

    def affine(self):
        return None


# ---------------------------------------------------------------- costs


@dataclass(frozen=True)
class QuadraticCost:
    """J = q2 a^2 + q1 a + qz a z + r_const + r_noise E[xi^2] + rz2 z^2 + rz1 z."""

    q2: float
    q1: float
    qz: float
    r_const: float = 0.0
    r_noise: float = 0.0
    rz2: float = 0.0
    rz1: float = 0.0
    tag = "quadratic"

    def __post_init__(self):
        if not self.q2 > 0:
            raise ConfigError("quadratic cost needs q2 > 0 for strong convexity")

    def value(self, alpha, z, noise_var: float):
        a = np.asarray(alpha, dtype=float)
        z = np.asarray(z, dtype=float)
        return (self.q2 * a * a + self.q1 * a + self.qz * a * z + self.r_const
                + self.r_noise * noise_var + self.rz2 * z * z + self.rz1 * z)

    def grad_alpha(self, alpha, z):
        return 2.0 * self.q2 * np.asarray(alpha, dtype=float) + self.q1 + self.qz * np.asarray(z, dtype=float)

    def grad_z(self, alpha, z):
        return self.qz * np.asarray(alpha, dtype=float) + 2.0 * self.rz2 * np.asarray(z, dtype=float) + self.rz1

    def minimizer(self, z):
        return -(self.q1 + self.qz * np.asarray(z, dtype=float)) / (2.0 * self.q2)

    @property
    def ell_c(self) -> float:
        return 2.0 * self.q2

    @property
    def ell_J(self) -> float:
        return abs(self.qz)


@dataclass(frozen=True)
class CustomCost:
    """Reduced cost given by evaluators J(alpha, z) and dJ/dalpha(alpha, z)."""

    J: Callable = field(compare=False)
    dJ: Callable = field(compare=False)
    ell_c: float = 1.0
    ell_J: float = 0.0
    ell_J_tilde: float = 0.0
    bracket: tuple = (-A_MAX, A_MAX)
    name: str = "custom"
    tag = "custom"

    def value(self, alpha, z, noise_var: float):
        return np.asarray(self.J(np.asarray(alpha, dtype=float), np.asarray(z, dtype=float)), dtype=float)

    def grad_alpha(self, alpha, z):
        return np.asarray(self.dJ(np.asarray(alpha, dtype=float), np.asarray(z, dtype=float)), dtype=float)


@dataclass(frozen=True)
class QuadraticRunningCost:
    """Running cost f(x, a, z) as a quadratic form in (x, a, z)."""

    xx: float = 0.0
    aa: float = 0.0
    zz: float = 0.0
    xa: float = 0.0
    xz: float = 0.0
    az: float = 0.0
    x: float = 0.0
    a: float = 0.0
    z: float = 0.0
    c: float = 0.0

    def __call__(self, x, a, z):
        return (self.xx * x * x + self.aa * a * a + self.zz * z * z + self.xa * x * a + self.xz * x * z
                + self.az * a * z + self.x * x + self.a * a + self.z * z + self.c)

    def reduce(self, drift) -> QuadraticCost:
        """Reduced cost for an affine drift with deterministic z."""
        coeffs = drift.affine()
        if coeffs is None:
            raise ConfigError("closed-form reduction needs an affine drift")
        a0, sa, sz = coeffs
        return QuadraticCost(
            q2=self.xx * sa * sa + self.aa + self.xa * sa,
            q1=2 * self.xx * a0 * sa + self.xa * a0 + self.x * sa + self.a,
            qz=2 * self.xx * sa * sz + self.xa * sz + self.xz * sa + self.az,
            r_const=self.xx * a0 * a0 + self.x * a0 + self.c,
            r_noise=self.xx,
            rz2=self.xx * sz * sz + self.zz + self.xz * sz,
            rz1=2 * self.xx * a0 * sz + self.xz * a0 + self.x * sz + self.z,
        )


# ---------------------------------------------------------------- spec


@dataclass(frozen=True)
class ConstantBundle:
    c_alpha: float
    c_z: float
    ell_c: float
    ell_J: float
    ell_J_tilde: float
    c0: float | None = None

    def __post_init__(self):
        if not self.ell_c > 0:
            raise ConfigError("ell_c must be positive")
        if min(self.c_alpha, self.c_z, self.ell_J, self.ell_J_tilde) < 0:
            raise ConfigError("Lipschitz constants must be nonnegative")


@dataclass(frozen=True)
class GameSpec:
    drift: object
    cost: object
    noise: NoiseSpec
    bundle: ConstantBundle
    running: object = None
    name: str = "custom"
    params: tuple = ()

    def J(self, alpha, z):
        return self.cost.value(alpha, z, self.noise.variance)

    def dJ(self, alpha, z):
        return self.cost.grad_alpha(alpha, z)

    def b(self, alpha, z):
        return self.drift(alpha, z)

    @property
    def is_quadratic(self) -> bool:
        return isinstance(self.cost, QuadraticCost)

    def param(self, key: str) -> float:
        return dict(self.params)[key]

    def with_noise(self, noise: NoiseSpec) -> "GameSpec":
        return replace(self, noise=noise)


def quadratic_bundle(drift, cost: QuadraticCost, c0: float | None = None) -> ConstantBundle:
    return ConstantBundle(
        c_alpha=drift.sqrt_c_alpha**2,
        c_z=drift.sqrt_c_z**2,
        ell_c=cost.ell_c,
        ell_J=cost.ell_J,
        ell_J_tilde=abs(cost.qz) * A_MAX * math.sqrt(2.0),
        c0=c0,
    )


def builtin_beach(noise: NoiseSpec = NoiseSpec()) -> GameSpec:
    drift = IdentityDrift()
    cost = QuadraticCost(q2=3.0, q1=-2.0, qz=-2.0, r_const=1.0, r_noise=2.0, rz2=1.0)
    running = QuadraticRunningCost(aa=1.0, xx=2.0, x=-2.0, c=1.0, zz=1.0, xz=-2.0)
    return GameSpec(drift, cost, noise, quadratic_bundle(drift, cost), running, "beach")


def builtin_cities(k: float = 1.0, theta: float = 0.25, noise: NoiseSpec = NoiseSpec()) -> GameSpec:
    if not (k > 0 and theta > 0):
        raise ConfigError("cities game needs k > 0 and theta > 0")
    drift = IdentityDrift()
    cost = QuadraticCost(q2=0.5, q1=-k, qz=-theta)
    running = QuadraticRunningCost(aa=0.5, a=-k, az=-theta)
    return GameSpec(drift, cost, noise, quadratic_bundle(drift, cost), running, "cities",
                    (("k", float(k)), ("theta", float(theta))))


def builtin_cournot(a: float = 1.0, b: float = 1.0, c: float = 0.2, noise: NoiseSpec = NoiseSpec()) -> GameSpec:
    if not (a > 0 and b > 0 and c > 0):
        raise ConfigError("Cournot game needs a, b, c > 0")
    drift = AffineDrift(a, b, c)
    cost = QuadraticCost(q2=b + 0.5, q1=-a, qz=-c)
    running = QuadraticRunningCost(aa=0.5, xa=-1.0)
    return GameSpec(drift, cost, noise, quadratic_bundle(drift, cost), running, "cournot",
                    (("a", float(a)), ("b", float(b)), ("c", float(c))))


def quadratic_game(running: QuadraticRunningCost, drift=IdentityDrift(), noise: NoiseSpec = NoiseSpec(),
                   name: str = "quadratic") -> GameSpec:
    """Game whose reduced cost is derived from a quadratic running cost."""
    cost = running.reduce(drift)
    return GameSpec(drift, cost, noise, quadratic_bundle(drift, cost), running, name)


BUILTINS = {"beach": builtin_beach, "cities": builtin_cities, "cournot": builtin_cournot}


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True)
class Certificate:
    w_norm: float
    contraction_margin: float
    uniqueness_value: float
    contraction_ok: bool
    uniqueness_ok: bool

    def as_dict(self) -> dict:
        return {
            "wNorm": self.w_norm,
            "contractionMargin": self.contraction_margin,
            "uniquenessValue": self.uniqueness_value,
            "contractionOk": self.contraction_ok,
            "uniquenessOk": self.uniqueness_ok,
        }


def certify(spec: GameSpec, w_norm: float) -> Certificate:
    if w_norm < 0:
        raise ValueError("operator norm must be nonnegative")
    bd = spec.bundle
    margin = 1.0 - math.sqrt(bd.c_z) * w_norm
    if margin > 0:
        value = (bd.ell_J / bd.ell_c) * math.sqrt(bd.c_alpha) * w_norm / margin
    else:
        value = math.inf
    contraction_ok = margin > 0
    return Certificate(w_norm, margin, value, contraction_ok, contraction_ok and value < 1.0)


@dataclass(frozen=True)
class MonotonicityReport:
    violations: int
    samples: int
    min_integral: float


def monotonicity_probe(spec: GameSpec, op, n_pairs: int = 100, seed: int = 0,
                       amplitude: float = 1.0) -> MonotonicityReport:
    """Random-pair probe of the Lasry-Lions type monotonicity of J.

    A pair violates monotonicity when the integrand
    J(a1, Za1) - J(a1, Za2) - J(a2, Za1) + J(a2, Za2) is negative on every
    grid cell. The smallest integral of the integrand is reported as well.
    """
    from .equilibrium import solve_aggregate
    from .function_space import GridProfile

    rng = np.random.default_rng(seed)
    violations = 0
    min_integral = math.inf
    for _ in range(n_pairs):
        a1 = GridProfile(op.grid, rng.uniform(-amplitude, amplitude, op.grid.M))
        a2 = GridProfile(op.grid, rng.uniform(-amplitude, amplitude, op.grid.M))
        z1 = solve_aggregate(spec, op, a1, override=True).values
        z2 = solve_aggregate(spec, op, a2, override=True).values
        g = spec.J(a1.values, z1) - spec.J(a1.values, z2) - spec.J(a2.values, z1) + spec.J(a2.values, z2)
        if not np.any(g >= 0):
            violations += 1
        min_integral = min(min_integral, op.integrate(g))
    return MonotonicityReport(violations, n_pairs, min_integral)


# ---------------------------------------------------------------- Lipschitz probes


def drift_lipschitz_gap(spec: GameSpec, alpha, z, alpha2, z2, form: str = "sum"):
    """Excess of |b(a,z) - b(a',z')| over its declared bound (<= 0 means satisfied).

    form="sum" checks |db| <= sqrt(c_a)|da| + sqrt(c_z)|dz|, the form used by
    the aggregate contraction estimates; form="squared" checks
    |db|^2 <= c_a da^2 + c_z dz^2.
    """
    bd = spec.bundle
    db = np.abs(spec.b(alpha, z) - spec.b(alpha2, z2))
    da = np.abs(np.asarray(alpha) - np.asarray(alpha2))
    dz = np.abs(np.asarray(z) - np.asarray(z2))
    if form == "sum":
        return db - (math.sqrt(bd.c_alpha) * da + math.sqrt(bd.c_z) * dz)
    if form == "squared":
        return db**2 - (bd.c_alpha * da**2 + bd.c_z * dz**2)
    raise ValueError(f"unknown form {form!r}")


def convexity_gap(spec: GameSpec, alpha, alpha2, z):
    """ell_c (a - a')^2 - (dJ(a,z) - dJ(a',z))(a - a'); <= 0 when strongly convex."""
    d = np.asarray(alpha) - np.asarray(alpha2)
    return spec.bundle.ell_c * d * d - (spec.dJ(alpha, z) - spec.dJ(alpha2, z)) * d


def cross_lipschitz_gap(spec: GameSpec, alpha, z, z2):
    """|dJ(a,z') - dJ(a,z)| - ell_J |z' - z|; <= 0 when the cross bound holds."""
    return np.abs(spec.dJ(alpha, z2) - spec.dJ(alpha, z)) - spec.bundle.ell_J * np.abs(np.asarray(z2) - np.asarray(z))


# ---------------------------------------------------------------- config


def _num(v) -> str:
    return repr(float(v))


def spec_to_config(spec: GameSpec) -> dict:
    """Flat string mapping; floats use repr so parsing restores them bit for bit."""
    out = {"noise": spec.noise.kind, "noise_scale": _num(spec.noise.scale)}
    if spec.name in BUILTINS and spec.running is not None:
        out = {"game": spec.name, **{k: _num(v) for k, v in spec.params}, **out}
        if spec.bundle.c0 is not None:
            out["c0"] = _num(spec.bundle.c0)
        return out
    if not isinstance(spec.cost, QuadraticCost) or isinstance(spec.drift, CustomDrift):
        raise ConfigError("only quadratic specs with identity or affine drift serialize")
    out = {"game": "quadratic", "name": spec.name, **out, "drift": spec.drift.tag}
    if isinstance(spec.drift, AffineDrift):
        out.update(drift_a0=_num(spec.drift.a0), drift_b1=_num(spec.drift.b1), drift_c1=_num(spec.drift.c1))
    for key in ("q2", "q1", "qz", "r_const", "r_noise", "rz2", "rz1"):
        out[f"cost_{key}"] = _num(getattr(spec.cost, key))
    for key in ("c_alpha", "c_z", "ell_c", "ell_J", "ell_J_tilde"):
        out[f"bundle_{key}"] = _num(getattr(spec.bundle, key))
    if spec.bundle.c0 is not None:
        out["bundle_c0"] = _num(spec.bundle.c0)
    return out


def spec_from_config(cfg: dict) -> GameSpec:
    cfg = dict(cfg)
    try:
        noise = NoiseSpec(cfg.get("noise", "gaussian"), float(cfg.get("noise_scale", 1.0)))
        name = cfg["game"]
        if name in BUILTINS:
            keys = {"beach": (), "cities": ("k", "theta"), "cournot": ("a", "b", "c")}[name]
            unknown = set(cfg) - set(keys) - {"game", "noise", "noise_scale", "c0"}
            if unknown:
                raise ConfigError(f"unknown parameters for {name}: {sorted(unknown)}")
            spec = BUILTINS[name](**{k: float(cfg[k]) for k in keys if k in cfg}, noise=noise)
            if "c0" in cfg:
                spec = replace(spec, bundle=replace(spec.bundle, c0=float(cfg["c0"])))
            return spec
        if name != "quadratic":
            raise ConfigError(f"unknown game {name!r}")
        if cfg["drift"] == "identity":
            drift = IdentityDrift()
        elif cfg["drift"] == "affine":
            drift = AffineDrift(float(cfg["drift_a0"]), float(cfg["drift_b1"]), float(cfg["drift_c1"]))
        else:
            raise ConfigError(f"unknown drift {cfg['drift']!r}")
        cost = QuadraticCost(**{k: float(cfg[f"cost_{k}"])
                                for k in ("q2", "q1", "qz", "r_const", "r_noise", "rz2", "rz1")})
        bundle = ConstantBundle(**{k: float(cfg[f"bundle_{k}"])
                                   for k in ("c_alpha", "c_z", "ell_c", "ell_J", "ell_J_tilde")},
                                c0=float(cfg["bundle_c0"]) if "bundle_c0" in cfg else None)
        return GameSpec(drift, cost, noise, bundle, None, cfg.get("name", "quadratic"))
    except KeyError as exc:
        raise ConfigError(f"missing game field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
