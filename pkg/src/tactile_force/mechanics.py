"""Planar push mechanics: support friction as a particle sum and
least-squares recovery of the contact force from observed motion.

Conventions. Planar quantities (velocities, accelerations, contact offsets,
forces) are expressed in a CM-centered frame aligned with the world axes;
the ParticleGrid stores body-fixed particle offsets and the friction
operations rotate them by the current pose angle. The recovered contact
force is tagged with the object frame and can be re-expressed in the sensor
frame with a FrameTransform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FrameMismatchError, SchemaError

STATIONARY_SPEED_TOL = 1e-9  # m/s; below this a particle contributes no friction

DEFAULT_PARTICLE_COUNT = 80
DEFAULT_LINEAR_LOSS_WEIGHT = 10.0
DEFAULT_FRICTION_COEFF = 0.1


class Frame(enum.Enum):
    OBJECT = "object"
    SENSOR = "sensor"
    WORLD = "world"


@dataclass(frozen=True)
class ForceVector:
    """A force with an explicit frame tag; 2-vectors live in planar frames."""

    components: np.ndarray
    frame: Frame

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.shape not in ((2,), (3,)):
            raise SchemaError(f"force must be a 2- or 3-vector, got shape {c.shape}")
        if c.shape == (2,) and self.frame is Frame.SENSOR:
            raise SchemaError("2-D forces are only valid in planar frames (object/world)")
        object.__setattr__(self, "components", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))


@dataclass(frozen=True)
class FrameTransform:
    """Rotation taking vectors from `from_frame` to `to_frame`."""

    rotation: np.ndarray
    from_frame: Frame
    to_frame: Frame

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3):
            raise SchemaError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise SchemaError("rotation must be orthonormal")
        if not math.isclose(float(np.linalg.det(rot)), 1.0, abs_tol=1e-9):
            raise SchemaError("rotation must be proper (determinant +1)")
        object.__setattr__(self, "rotation", rot)

    def inverse(self) -> "FrameTransform":
        return FrameTransform(self.rotation.T, self.to_frame, self.from_frame)


@dataclass(frozen=True)
class PushParams:
    """Pushed-object parameters.

    m: mass (kg); inertia: moment about the CM (kg m^2); mu_s: support
    friction coefficient; n: friction particle count; k: weight on the
    linear-acceleration residual in the force objective.
    """

    m: float
    inertia: float
    mu_s: float = DEFAULT_FRICTION_COEFF
    n: int = DEFAULT_PARTICLE_COUNT
    k: float = DEFAULT_LINEAR_LOSS_WEIGHT
    g: float = 9.81

    def __post_init__(self):
        if self.m <= 0:
            raise SchemaError(f"mass must be positive, got {self.m}")
        if self.inertia <= 0:
            raise SchemaError(f"inertia must be positive, got {self.inertia}")
        if self.mu_s < 0:
            raise SchemaError(f"friction coefficient must be >= 0, got {self.mu_s}")
        if self.n < 1:
            raise SchemaError(f"particle count must be >= 1, got {self.n}")
        if self.k <= 0:
            raise SchemaError(f"linear-loss weight must be positive, got {self.k}")

    @classmethod
    def from_config(cls, config: dict) -> "PushParams":
        try:
            return cls(
                m=float(config["m"]),
                inertia=float(config["inertia"]),
                mu_s=float(config.get("mu_s", DEFAULT_FRICTION_COEFF)),
                n=int(config.get("n", DEFAULT_PARTICLE_COUNT)),
                k=float(config.get("k", DEFAULT_LINEAR_LOSS_WEIGHT)),
                g=float(config.get("g", 9.81)),
            )
        except KeyError as exc:
            raise SchemaError(f"params config missing field {exc.args[0]!r}") from exc


@dataclass(frozen=True)
class PlanarMotion:
    """SE(2) object state: pose (x, y, theta) plus velocities and accelerations."""

    pose: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega: float = 0.0
    v_dot: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega_dot: float = 0.0

    def __post_init__(self):
        pose = np.asarray(self.pose, dtype=float)
        v = np.asarray(self.v, dtype=float)
        v_dot = np.asarray(self.v_dot, dtype=float)
        if pose.shape != (3,) or v.shape != (2,) or v_dot.shape != (2,):
            raise SchemaError("pose must be a 3-vector, v and v_dot 2-vectors")
        values = np.concatenate([pose, v, [self.omega], v_dot, [self.omega_dot]])
        if not np.all(np.isfinite(values)):
            raise SchemaError("motion state contains non-finite values")
        object.__setattr__(self, "pose", pose)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "v_dot", v_dot)

    @property
    def theta(self) -> float:
        return float(self.pose[2])


def perp(r: np.ndarray) -> np.ndarray:
    """90-degree counterclockwise rotation: (x, y) -> (-y, x)."""
    return np.array([-r[1], r[0]])


def cross2(a: np.ndarray, b: np.ndarray) -> float:
    """Scalar 2-D cross product a_x b_y - a_y b_x."""
    return float(a[0] * b[1] - a[1] * b[0])


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def point_velocity(motion: PlanarMotion, r: np.ndarray) -> np.ndarray:
    """Velocity of a body point at offset r from the CM: v + omega * perp(r)."""
    r = np.asarray(r, dtype=float)
    return motion.v + motion.omega * perp(r)


def _most_square_factors(n: int) -> tuple[int, int]:
    """Factor n = a * b with a <= b and b - a minimal."""
    a = int(math.isqrt(n))
    while n % a != 0:
        a -= 1
    return a, n // a


@dataclass(frozen=True)
class ParticleGrid:
    """Support-contact particles: body-frame offsets from the CM, each
    carrying the same share m*g/n of the normal load."""

    particles: np.ndarray
    per_particle_normal_force: float

    def __post_init__(self):
        p = np.asarray(self.particles, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2:
            raise SchemaError(f"particles must be an (n, 2) array, got {p.shape}")
        if self.per_particle_normal_force <= 0:
            raise SchemaError("per-particle normal force must be positive")
        object.__setattr__(self, "particles", p)

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @classmethod
    def uniform_rectangle(cls, half_extents: np.ndarray, params: PushParams) -> "ParticleGrid":
        """Cell-centroid lattice over a rectangular contact region.

        The region is split into nx * ny = n cells with the lattice counts
        chosen as the most-square factor pair, the larger count along the
        longer side; each cell contributes one particle at its centroid.
        """
        hx, hy = (float(half_extents[0]), float(half_extents[1]))
        if hx <= 0 or hy <= 0:
            raise SchemaError("half extents must be positive")
        a, b = _most_square_factors(params.n)
        nx, ny = (b, a) if hx >= hy else (a, b)
        xs = (np.arange(nx) + 0.5) / nx * 2 * hx - hx
        ys = (np.arange(ny) + 0.5) / ny * 2 * hy - hy
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        particles = np.column_stack([gx.ravel(), gy.ravel()])
        return cls(particles=particles, per_particle_normal_force=params.m * params.g / params.n)


@dataclass(frozen=True)
class FrictionWrench:
    """Support friction resultant in the planar frame.

    `static` marks the regime where every particle sat below the stationary
    speed tolerance, for which the friction model is undefined and the wrench
    is reported as zero.
    """

    force: np.ndarray
    moment: float
    static: bool


def friction_wrench(
    grid: ParticleGrid, motion: PlanarMotion, params: PushParams
) -> FrictionWrench:
    """Coulomb friction force and moment summed over the particle grid.

    Particle offsets are rotated by the pose angle into the planar frame.
    Particles slower than the stationary tolerance contribute nothing; if all
    are stationary the wrench is zero and flagged static.
    """
    offsets = grid.particles @ rot2(motion.theta).T
    vels = motion.v[None, :] + motion.omega * np.column_stack([-offsets[:, 1], offsets[:, 0]])
    speeds = np.linalg.norm(vels, axis=1)
    moving = speeds > STATIONARY_SPEED_TOL
    if not np.any(moving):
        return FrictionWrench(force=np.zeros(2), moment=0.0, static=True)
    unit = vels[moving] / speeds[moving, None]
    scale = params.mu_s * grid.per_particle_normal_force
    force = -scale * unit.sum(axis=0)
    r_m = offsets[moving]
    moment = -scale * float(np.sum(r_m[:, 0] * unit[:, 1] - r_m[:, 1] * unit[:, 0]))
    return FrictionWrench(force=force, moment=moment, static=False)


def friction_force(grid: ParticleGrid, motion: PlanarMotion, params: PushParams) -> ForceVector:
    """Support friction force; see friction_wrench for the static flag."""
    return ForceVector(friction_wrench(grid, motion, params).force, Frame.OBJECT)


def friction_moment(grid: ParticleGrid, motion: PlanarMotion, params: PushParams) -> float:
    """Support friction moment about the CM; see friction_wrench for the flag."""
    return friction_wrench(grid, motion, params).moment


class SolveMethod(enum.Enum):
    CLOSED_FORM = "closed_form"
    ITERATIVE = "iterative"
    GRID_ORACLE = "grid_oracle"


@dataclass(frozen=True)
class InferenceResult:
    """Inferred contact force with the objective value at the solution and
    the friction regime flag."""

    force: ForceVector
    objective: float
    static_friction: bool
    method: SolveMethod


def _objective(f: np.ndarray, c: np.ndarray, a: np.ndarray, b: float, k: float) -> float:
    residual_lin = f - a
    residual_ang = cross2(c, f) - b
    return k * float(residual_lin @ residual_lin) + residual_ang * residual_ang


def _solve_closed_form(c: np.ndarray, a: np.ndarray, b: float, k: float) -> np.ndarray:
    # Normal equations of the quadratic: (k I + p p^T) f = k a + b p, p = perp(c).
    p = perp(c)
    mat = k * np.eye(2) + np.outer(p, p)
    return np.linalg.solve(mat, k * a + b * p)


def _solve_iterative(
    c: np.ndarray,
    a: np.ndarray,
    b: float,
    k: float,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Gradient descent with Armijo backtracking on the force objective."""
    p = perp(c)
    f = np.array(a, dtype=float)  # warm start at the friction-corrected Newton target
    obj = _objective(f, c, a, b, k)
    grad_scale = max(1.0, k * float(np.linalg.norm(a)) + abs(b) * float(np.linalg.norm(p)))
    step0 = 1.0 / (2.0 * (k + float(p @ p)))  # inverse of the largest curvature
    for _ in range(max_iter):
        grad = 2.0 * k * (f - a) + 2.0 * (cross2(c, f) - b) * p
        gnorm2 = float(grad @ grad)
        if math.sqrt(gnorm2) <= tol * grad_scale:
            break
        step = step0 * 4.0
        while True:
            trial = f - step * grad
            trial_obj = _objective(trial, c, a, b, k)
            if trial_obj <= obj - 0.5 * step * gnorm2 or step < 1e-20:
                break
            step *= 0.5
        if step < 1e-20 or trial_obj >= obj:  # stalled at float precision
            break
        f, obj = trial, trial_obj
    return f


def _solve_grid(
    c: np.ndarray,
    a: np.ndarray,
    b: float,
    k: float,
    points_per_axis: int = 21,
    rounds: int = 14,
) -> np.ndarray:
    """Coarse-to-fine scan of the objective over a force box.

    Independent oracle: uses only objective evaluations, no normal-equations
    algebra. The initial box is wide enough to contain the minimizer (the
    minimizer cannot beat f = a without staying within the bound below).
    """
    p = perp(c)
    half_width = float(np.linalg.norm(a)) + (abs(b) + np.linalg.norm(p) * np.linalg.norm(a)) / math.sqrt(k) + 1.0
    center = np.array(a, dtype=float)
    for _ in range(rounds):
        xs = np.linspace(center[0] - half_width, center[0] + half_width, points_per_axis)
        ys = np.linspace(center[1] - half_width, center[1] + half_width, points_per_axis)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        lin = k * ((gx - a[0]) ** 2 + (gy - a[1]) ** 2)
        ang = (c[0] * gy - c[1] * gx - b) ** 2
        idx = np.unravel_index(np.argmin(lin + ang), gx.shape)
        center = np.array([gx[idx], gy[idx]])
        # keep a two-cell margin around the best cell while shrinking
        half_width = 2.0 * (2.0 * half_width / (points_per_axis - 1))
    return center


_SOLVERS = {
    SolveMethod.CLOSED_FORM: _solve_closed_form,
    SolveMethod.ITERATIVE: _solve_iterative,
    SolveMethod.GRID_ORACLE: _solve_grid,
}


def infer_force_frictionless(
    motion: PlanarMotion,
    c: np.ndarray,
    params: PushParams,
    method: SolveMethod = SolveMethod.CLOSED_FORM,
) -> InferenceResult:
    """Recover the contact force from motion alone, ignoring support friction.

    Minimizes k ||f - m v_dot||^2 + (cross2(c, f) - I omega_dot)^2 over f;
    c is the contact point relative to the CM, in the planar frame.
    """
    c = np.asarray(c, dtype=float)
    a = params.m * motion.v_dot
    b = params.inertia * motion.omega_dot
    f = _SOLVERS[SolveMethod(method)](c, a, b, params.k)
    return InferenceResult(
        force=ForceVector(f, Frame.OBJECT),
        objective=_objective(f, c, a, b, params.k),
        static_friction=False,
        method=SolveMethod(method),
    )


def infer_force_with_friction(
    motion: PlanarMotion,
    c: np.ndarray,
    grid: ParticleGrid,
    params: PushParams,
    method: SolveMethod = SolveMethod.CLOSED_FORM,
) -> InferenceResult:
    """Recover the contact force including the support friction wrench.

    Minimizes k ||f + f_f - m v_dot||^2 + (cross2(c, f) + n_f - I omega_dot)^2.
    The friction wrench depends only on the observed motion, so it shifts the
    frictionless targets by (-f_f, -n_f).
    """
    c = np.asarray(c, dtype=float)
    wrench = friction_wrench(grid, motion, params)
    a = params.m * motion.v_dot - wrench.force
    b = params.inertia * motion.omega_dot - wrench.moment
    f = _SOLVERS[SolveMethod(method)](c, a, b, params.k)
    return InferenceResult(
        force=ForceVector(f, Frame.OBJECT),
        objective=_objective(f, c, a, b, params.k),
        static_friction=wrench.static,
        method=SolveMethod(method),
    )


def force_objective(
    f: np.ndarray,
    motion: PlanarMotion,
    c: np.ndarray,
    params: PushParams,
    grid: ParticleGrid | None = None,
) -> float:
    """Evaluate the inference objective at an arbitrary force (for checks)."""
    c = np.asarray(c, dtype=float)
    if grid is None:
        a = params.m * motion.v_dot
        b = params.inertia * motion.omega_dot
    else:
        wrench = friction_wrench(grid, motion, params)
        a = params.m * motion.v_dot - wrench.force
        b = params.inertia * motion.omega_dot - wrench.moment
    return _objective(np.asarray(f, dtype=float), c, a, b, params.k)


def to_sensor_frame(f_c: ForceVector, transform: FrameTransform) -> ForceVector:
    """Embed a planar object-frame force in 3-D and rotate it into frame B."""
    if f_c.frame is not Frame.OBJECT:
        raise FrameMismatchError(f"expected an object-frame force, got {f_c.frame}")
    if transform.from_frame is not Frame.OBJECT or transform.to_frame is not Frame.SENSOR:
        raise FrameMismatchError(
            f"transform maps {transform.from_frame} -> {transform.to_frame}, "
            "expected object -> sensor"
        )
    if f_c.components.shape != (2,):
        raise SchemaError("expected a planar 2-D force")
    embedded = np.array([f_c.components[0], f_c.components[1], 0.0])
    return ForceVector(transform.rotation @ embedded, Frame.SENSOR)
