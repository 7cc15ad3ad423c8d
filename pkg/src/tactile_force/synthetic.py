"""Synthetic data generation: simulated planar pushes with exact ground
truth, and a forward sensor model mapping contact state and force to
electrode readings.

Planar episodes are integrated with semi-implicit Euler and store the exact
accelerations used at every step, so re-running the force inference on the
stored motion recovers the applied force to solver precision. The forward
sensor model is an invertible stand-in for real hardware: each electrode
responds through a Gaussian kernel around the contact point to the normal
force component, the shear magnitude, and the shear component along the
electrode-specific tangential direction. The directional term is what makes
distinct forces produce distinct readings; without it the shear direction
would be unobservable and force regression ill-posed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import SampleRecord
from .errors import NumericalError, SchemaError
from .mechanics import (
    Frame,
    FrameTransform,
    ParticleGrid,
    PlanarMotion,
    PushParams,
    cross2,
    friction_wrench,
    rot2,
)
from .sensor import (
    ContactDetection,
    ContactState,
    ElectrodeLayout,
    SensorSample,
    SurfaceGeometry,
    detect_contact,
    surface_point_and_normal,
)

DEFAULT_BOX_MASS_KG = 0.65
DEFAULT_BOX_HALF_EXTENTS_M = (0.1, 0.075)
DEFAULT_DT_S = 1e-3

# Static pressure synthesized from the force magnitude; 400 units/N keeps
# pushes in the 0.1-2 N range comfortably above the contact threshold of 10.
PRESSURE_UNITS_PER_NEWTON = 400.0

SOURCE_RIGID_FT = "rigid_ft"
SOURCE_BALL_FT = "ball_ft"
SOURCE_PLANAR = "planar_pushing"


def box_inertia(m: float, half_extents) -> float:
    """Moment of inertia of a uniform-density rectangle about its center."""
    hx, hy = float(half_extents[0]), float(half_extents[1])
    return m * (hx**2 + hy**2) / 3.0


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix via a normalized quaternion."""
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_aligning(target_x: np.ndarray, roll: float = 0.0) -> np.ndarray:
    """Rotation whose first column is target_x, with a roll about it."""
    c1 = np.asarray(target_x, dtype=float)
    c1 = c1 / np.linalg.norm(c1)
    helper = np.array([0.0, 0.0, 1.0]) if abs(c1[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    c2 = np.cross(helper, c1)
    c2 /= np.linalg.norm(c2)
    c3 = np.cross(c1, c2)
    cr, sr = math.cos(roll), math.sin(roll)
    return np.column_stack([c1, cr * c2 + sr * c3, -sr * c2 + cr * c3])


@dataclass(frozen=True)
class PushEpisode:
    """One simulated pushing trial with per-step ground truth.

    Planar arrays are expressed in the CM-centered world-aligned frame;
    contact_points are offsets from the CM (already rotated by the pose).
    The sensor stream pairs each step with the synthesized tactile reading
    and the sensor-frame contact state.
    """

    trial_id: str
    source_tag: str
    params: PushParams
    half_extents: tuple[float, float]
    times: np.ndarray
    poses: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    v_dot: np.ndarray
    omega_dot: np.ndarray
    contact_points: np.ndarray
    applied_forces: np.ndarray
    static_flags: np.ndarray
    sensor_to_object: np.ndarray = None  # R such that f_3d = R @ [f_c, 0]
    sensor_stream: list[tuple[SensorSample, ContactState]] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.times.shape[0]

    def motion_at(self, i: int) -> PlanarMotion:
        return PlanarMotion(
            pose=self.poses[i],
            v=self.v[i],
            omega=float(self.omega[i]),
            v_dot=self.v_dot[i],
            omega_dot=float(self.omega_dot[i]),
        )

    def step_dicts(self) -> list[dict]:
        """Rows for the episode JSON-lines file."""
        rows = []
        for i in range(self.n_steps):
            rows.append(
                {
                    "t": float(self.times[i]),
                    "pose": self.poses[i].tolist(),
                    "v": self.v[i].tolist(),
                    "omega": float(self.omega[i]),
                    "v_dot": self.v_dot[i].tolist(),
                    "omega_dot": float(self.omega_dot[i]),
                    "contact_point": self.contact_points[i].tolist(),
                    "f_true": self.applied_forces[i].tolist(),
                }
            )
        return rows


def simulate_push(
    params: PushParams,
    half_extents,
    applied_forces: np.ndarray,
    contact_body: np.ndarray,
    dt: float = DEFAULT_DT_S,
    initial_pose=(0.0, 0.0, 0.0),
    initial_v=(0.0, 0.0),
    initial_omega: float = 0.0,
    trial_id: str = "trial",
) -> PushEpisode:
    """Integrate the planar dynamics under a per-step applied force schedule.

    applied_forces is (steps, 2) in the planar frame; contact_body is the
    body-fixed contact offset from the CM, rotated by the pose each step.
    Semi-implicit Euler: the acceleration from the current state advances the
    velocity first, then the pose. When no force is applied and the friction
    step would overshoot (gain energy), the body is captured at rest instead.
    """
    if dt <= 0:
        raise SchemaError(f"dt must be positive, got {dt}")
    applied_forces = np.asarray(applied_forces, dtype=float)
    if applied_forces.ndim != 2 or applied_forces.shape[1] != 2:
        raise SchemaError("applied_forces must be (steps, 2)")
    steps = applied_forces.shape[0]
    contact_body = np.asarray(contact_body, dtype=float)
    grid = ParticleGrid.uniform_rectangle(half_extents, params)

    pose = np.array(initial_pose, dtype=float)
    v = np.array(initial_v, dtype=float)
    omega = float(initial_omega)

    times = np.arange(steps) * dt
    poses = np.zeros((steps, 3))
    vs = np.zeros((steps, 2))
    omegas = np.zeros(steps)
    v_dots = np.zeros((steps, 2))
    omega_dots = np.zeros(steps)
    contacts = np.zeros((steps, 2))
    statics = np.zeros(steps, dtype=bool)

    for i in range(steps):
        motion_now = PlanarMotion(pose=pose, v=v, omega=omega)
        wrench = friction_wrench(grid, motion_now, params)
        f_applied = applied_forces[i]
        c_now = rot2(pose[2]) @ contact_body
        v_dot = (f_applied + wrench.force) / params.m
        omega_dot = (cross2(c_now, f_applied) + wrench.moment) / params.inertia

        poses[i], vs[i], omegas[i] = pose, v, omega
        v_dots[i], omega_dots[i] = v_dot, omega_dot
        contacts[i] = c_now
        statics[i] = wrench.static

        v_new = v + dt * v_dot
        omega_new = omega + dt * omega_dot
        if not np.all(np.isfinite(v_new)) or not math.isfinite(omega_new):
            raise NumericalError(f"integration diverged at step {i}")
        if np.allclose(f_applied, 0.0):
            ke_old = 0.5 * params.m * float(v @ v) + 0.5 * params.inertia * omega**2
            ke_new = 0.5 * params.m * float(v_new @ v_new) + 0.5 * params.inertia * omega_new**2
            if ke_new > ke_old:  # friction overshoot at near-rest: capture
                v_new = np.zeros(2)
                omega_new = 0.0
        v, omega = v_new, omega_new
        pose = pose + dt * np.array([v[0], v[1], omega])

    return PushEpisode(
        trial_id=trial_id,
        source_tag=SOURCE_PLANAR,
        params=params,
        half_extents=(float(half_extents[0]), float(half_extents[1])),
        times=times,
        poses=poses,
        v=vs,
        omega=omegas,
        v_dot=v_dots,
        omega_dot=omega_dots,
        contact_points=contacts,
        applied_forces=applied_forces,
        static_flags=statics,
    )


def electrode_tangents(layout: ElectrodeLayout) -> np.ndarray:
    """Fixed per-electrode tangent directions (anisotropy axes).

    Deterministic function of the layout, alternating per electrode between
    the azimuthal tangent (normal crossed with the sensor axis) and the
    axial tangent (sensor axis projected onto the electrode's tangent
    plane), so the fixed axes jointly span both shear directions at any
    contact. Degenerate cases near the tip fall back to +x-based axes.
    """
    z_axis = np.array([0.0, 0.0, 1.0])
    x_axis = np.array([1.0, 0.0, 0.0])
    tangents = np.empty_like(layout.normals)
    for i, n in enumerate(layout.normals):
        if i % 2 == 0:
            t = np.cross(n, z_axis)
            if np.linalg.norm(t) < 1e-6:
                t = np.cross(n, x_axis)
        else:
            t = z_axis - (z_axis @ n) * n
            if np.linalg.norm(t) < 1e-6:
                t = x_axis - (x_axis @ n) * n
        tangents[i] = t / np.linalg.norm(t)
    return tangents


@dataclass(frozen=True)
class SensorForwardModel:
    """Synthetic map from (contact, force) to the 19 electrode readings.

    Each electrode i at position p_i responds through a Gaussian spatial
    kernel w_i = exp(-||p_i - s_c||^2 / decay^2) to four force features: the
    normal component -f.n, the shear magnitude, the shear projected on the
    tangential unit vector from the contact toward the electrode, and the
    shear projected on the electrode's own fixed anisotropy axis (skin-like
    directional sensitivity). The two projected terms are what make distinct
    forces produce distinct readings; with both sensitivities zero the shear
    direction about the normal is unobservable and force regression from
    readings alone is ill-posed. Noise is only added when an rng is
    supplied, keeping the map itself a pure function.
    """

    layout: ElectrodeLayout
    gain: float = 10.0
    decay_length: float = 0.007
    normal_sensitivity: float = 0.5
    shear_sensitivity: float = 0.1
    directional_shear_sensitivity: float = 0.5
    anisotropic_shear_sensitivity: float = 2.5
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.decay_length <= 0:
            raise SchemaError(f"decay length must be positive, got {self.decay_length}")
        object.__setattr__(self, "_tangents", electrode_tangents(self.layout))


def sensor_forward(
    model: SensorForwardModel,
    contact: ContactState,
    f_3d: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Electrode readings for a contact and sensor-frame force."""
    if not contact.in_contact:
        raise SchemaError("sensor_forward requires an in-contact state")
    f = np.asarray(f_3d, dtype=float)
    n = contact.s_n
    offsets = model.layout.positions - contact.s_c[None, :]
    weights = np.exp(-np.sum(offsets**2, axis=1) / model.decay_length**2)

    normal_feat = -float(f @ n)
    shear_vec = f - float(f @ n) * n
    shear_mag = float(np.linalg.norm(shear_vec))
    tangential = offsets - (offsets @ n)[:, None] * n[None, :]
    t_norms = np.linalg.norm(tangential, axis=1)
    safe = t_norms > 1e-12
    t_hat = np.zeros_like(tangential)
    t_hat[safe] = tangential[safe] / t_norms[safe, None]

    e = model.gain * weights * (
        model.normal_sensitivity * normal_feat
        + model.shear_sensitivity * shear_mag
        + model.directional_shear_sensitivity * (t_hat @ shear_vec)
        + model.anisotropic_shear_sensitivity * (model._tangents @ shear_vec)
    )
    if rng is not None and model.noise_scale > 0:
        e = e + rng.normal(scale=model.noise_scale, size=e.shape)
    return e


def _cone_direction(rng: np.random.Generator, axis: np.ndarray, max_angle: float) -> np.ndarray:
    """Random unit vector within max_angle (radians) of axis."""
    phi = rng.uniform(0.0, max_angle)
    azim = rng.uniform(0.0, 2 * math.pi)
    frame = rotation_aligning(axis)
    local = np.array([math.cos(phi), math.sin(phi) * math.cos(azim), math.sin(phi) * math.sin(azim)])
    return frame @ local


def _surface_contact(
    geometry: SurfaceGeometry, rng: np.random.Generator, cap_only: bool
) -> ContactState:
    """Random contact on the sensing side of the surface (azimuth within
    75 degrees of +x)."""
    azim = rng.uniform(math.radians(-75), math.radians(75))
    if cap_only:
        polar = rng.uniform(math.radians(5), math.radians(70))
        query = geometry.cap_center + np.array(
            [
                math.sin(polar) * math.cos(azim),
                math.sin(polar) * math.sin(azim),
                math.cos(polar),
            ]
        )
    else:
        z = rng.uniform(0.05, 0.95) * geometry.half_cylinder_length
        query = np.array([math.cos(azim), math.sin(azim), 0.0]) + np.array([0.0, 0.0, z])
    return surface_point_and_normal(geometry, query)


def make_ft_samples(
    model: SensorForwardModel,
    geometry: SurfaceGeometry,
    source_tag: str,
    n_trials: int,
    samples_per_trial: int,
    seed: int,
    force_range: tuple[float, float],
    cone_angle_deg: float = 60.0,
    cap_only: bool = False,
    trial_prefix: str | None = None,
) -> list[SampleRecord]:
    """Force-torque style samples: random surface contacts with forces drawn
    within a cone of the inward normal, one sensor pose per trial."""
    rng = np.random.default_rng(seed)
    prefix = trial_prefix or source_tag
    records: list[SampleRecord] = []
    for trial in range(n_trials):
        trial_id = f"{prefix}_{trial:04d}"
        r_wb = random_rotation(rng)  # one wrist pose per trial
        for _ in range(samples_per_trial):
            contact = _surface_contact(geometry, rng, cap_only=cap_only)
            direction = _cone_direction(rng, -contact.s_n, math.radians(cone_angle_deg))
            magnitude = rng.uniform(*force_range)
            f_3d = magnitude * direction
            e = sensor_forward(model, contact, f_3d, rng=rng)
            records.append(
                SampleRecord(
                    trial_id=trial_id,
                    source_tag=source_tag,
                    e=e,
                    s_c=contact.s_c,
                    s_n=contact.s_n,
                    f_3d=f_3d,
                    r_wb=r_wb,
                )
            )
    return records


def piecewise_force_schedule(
    rng: np.random.Generator,
    steps: int,
    magnitude_range: tuple[float, float] = (0.1, 2.0),
    direction_jitter_deg: float = 45.0,
    segment_steps: tuple[int, int] = (40, 120),
    idle_steps: int = 20,
) -> np.ndarray:
    """Piecewise-constant pushes along +x with angular jitter, with idle
    padding at both ends."""
    forces = np.zeros((steps, 2))
    i = idle_steps
    while i < steps - idle_steps:
        seg = int(rng.integers(*segment_steps))
        mag = rng.uniform(*magnitude_range)
        ang = math.radians(rng.uniform(-direction_jitter_deg, direction_jitter_deg))
        forces[i : min(i + seg, steps - idle_steps)] = mag * np.array(
            [math.cos(ang), math.sin(ang)]
        )
        i += seg
    return forces


def make_planar_trials(
    model: SensorForwardModel,
    geometry: SurfaceGeometry,
    n_trials: int,
    steps: int,
    seed: int,
    params: PushParams | None = None,
    half_extents=DEFAULT_BOX_HALF_EXTENTS_M,
    dt: float = DEFAULT_DT_S,
    magnitude_range: tuple[float, float] = (0.1, 2.0),
    trial_prefix: str = SOURCE_PLANAR,
) -> tuple[list[PushEpisode], list[SampleRecord]]:
    """Simulate pushing trials and derive sensor samples from each step.

    The sensor touches the box at a fixed spot per trial; its orientation is
    built so the nominal +x push direction maps near the contact's outward
    normal (a head-on push compresses the sensing face). Contact gating uses
    the synthesized static pressure history, so the first steps of each push
    are dropped until the detection window fills.
    """
    master = np.random.default_rng(seed)
    episodes: list[PushEpisode] = []
    records: list[SampleRecord] = []
    for trial in range(n_trials):
        rng = np.random.default_rng(master.integers(2**63))
        trial_id = f"{trial_prefix}_{trial:04d}"
        if params is None:
            trial_params = PushParams(
                m=DEFAULT_BOX_MASS_KG, inertia=box_inertia(DEFAULT_BOX_MASS_KG, half_extents)
            )
        else:
            trial_params = params
        hx, hy = half_extents
        contact_body = np.array([-hx, rng.uniform(-0.6 * hy, 0.6 * hy)])
        forces = piecewise_force_schedule(rng, steps, magnitude_range=magnitude_range)
        episode = simulate_push(
            trial_params, half_extents, forces, contact_body, dt=dt, trial_id=trial_id
        )

        contact = _surface_contact(geometry, rng, cap_only=False)
        tilt = _cone_direction(rng, contact.s_n, math.radians(15.0))
        sensor_to_object = rotation_aligning(tilt, roll=rng.uniform(0, 2 * math.pi))
        r_wb = sensor_to_object.T  # planar frame is world-aligned
        episode = dataclasses.replace(episode, sensor_to_object=sensor_to_object)

        pressure_history: list[float] = []
        stream: list[tuple[SensorSample, ContactState]] = []
        for i in range(episode.n_steps):
            f_c = episode.applied_forces[i]
            f_3d = sensor_to_object @ np.array([f_c[0], f_c[1], 0.0])
            magnitude = float(np.linalg.norm(f_3d))
            p_dc = PRESSURE_UNITS_PER_NEWTON * magnitude
            pressure_history.append(p_dc)
            pushing = magnitude > 0.0
            state = (
                ContactState(s_c=contact.s_c, s_n=contact.s_n, in_contact=True)
                if pushing
                else ContactState.none()
            )
            e = sensor_forward(model, state, f_3d, rng=rng) if pushing else np.zeros(19)
            sample = SensorSample(
                e=e, p_dc=p_dc, p_ac=np.zeros(22), t_dc=0.0, t_ac=0.0, t=float(episode.times[i])
            )
            stream.append((sample, state))
            detected = detect_contact(pressure_history)
            if detected is ContactDetection.CONTACT and pushing:
                records.append(
                    SampleRecord(
                        trial_id=trial_id,
                        source_tag=SOURCE_PLANAR,
                        e=e,
                        s_c=contact.s_c,
                        s_n=contact.s_n,
                        f_3d=f_3d,
                        r_wb=r_wb,
                        motion={
                            "t": float(episode.times[i]),
                            "pose": episode.poses[i].tolist(),
                            "v": episode.v[i].tolist(),
                            "omega": float(episode.omega[i]),
                            "v_dot": episode.v_dot[i].tolist(),
                            "omega_dot": float(episode.omega_dot[i]),
                        },
                    )
                )
        episode.sensor_stream.extend(stream)
        episodes.append(episode)
    return episodes, records


def episode_force_transform(episode: PushEpisode) -> FrameTransform:
    """Object-to-sensor transform for an episode's ground-truth forces."""
    if episode.sensor_to_object is None:
        raise SchemaError("episode carries no sensor orientation")
    return FrameTransform(episode.sensor_to_object, Frame.OBJECT, Frame.SENSOR)
