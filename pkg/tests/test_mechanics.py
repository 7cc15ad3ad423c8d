"""Tests for the particle-friction model and least-squares force recovery."""

import math

import numpy as np
import pytest

from tactile_force.errors import FrameMismatchError, SchemaError
from tactile_force.mechanics import (
    ForceVector,
    Frame,
    FrameTransform,
    ParticleGrid,
    PlanarMotion,
    PushParams,
    SolveMethod,
    cross2,
    force_objective,
    friction_force,
    friction_moment,
    friction_wrench,
    infer_force_frictionless,
    infer_force_with_friction,
    perp,
    point_velocity,
    to_sensor_frame,
)


def four_particle_friction_oracle(positions, motion, params):
    """Direct per-particle summation of the friction force and moment."""
    scale = params.mu_s * params.m * params.g / len(positions)
    c, s = math.cos(motion.theta), math.sin(motion.theta)
    force = np.zeros(2)
    moment = 0.0
    for r_body in positions:
        r = np.array([c * r_body[0] - s * r_body[1], s * r_body[0] + c * r_body[1]])
        v = motion.v + motion.omega * np.array([-r[1], r[0]])
        speed = np.linalg.norm(v)
        if speed <= 1e-9:
            continue
        unit = v / speed
        force -= scale * unit
        moment -= scale * (r[0] * unit[1] - r[1] * unit[0])
    return force, moment


def make_motion(v=(0.0, 0.0), omega=0.0, v_dot=(0.0, 0.0), omega_dot=0.0, theta=0.0):
    return PlanarMotion(
        pose=np.array([0.0, 0.0, theta]),
        v=np.array(v, dtype=float),
        omega=omega,
        v_dot=np.array(v_dot, dtype=float),
        omega_dot=omega_dot,
    )


class TestPointVelocity:
    def test_pure_translation(self):
        motion = make_motion(v=(1.0, 0.0))
        np.testing.assert_allclose(point_velocity(motion, [0.3, -0.7]), [1.0, 0.0])

    def test_unit_rotation(self):
        motion = make_motion(omega=1.0)
        np.testing.assert_allclose(point_velocity(motion, [1.0, 0.0]), [0.0, 1.0])

    def test_hand_evaluated_combination(self):
        motion = make_motion(v=(2.0, -1.0), omega=3.0)
        np.testing.assert_allclose(
            point_velocity(motion, [0.5, 0.2]), [2.0 - 0.6, -1.0 + 1.5]
        )


class TestParticleGrid:
    def test_uniform_lattice_cell_centroids(self):
        params = PushParams(m=1.0, inertia=0.01, n=80)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        assert grid.n == 80
        # 80 = 10 x 8 with the longer count on the longer side
        assert len(np.unique(np.round(grid.particles[:, 0], 12))) == 10
        assert len(np.unique(np.round(grid.particles[:, 1], 12))) == 8
        assert np.all(np.abs(grid.particles[:, 0]) < 0.1)
        assert np.all(np.abs(grid.particles[:, 1]) < 0.075)

    def test_normal_forces_sum_to_weight(self):
        params = PushParams(m=0.65, inertia=0.005, n=80)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        total = grid.per_particle_normal_force * grid.n
        np.testing.assert_allclose(total, params.m * params.g, rtol=1e-9)

    def test_param_validation(self):
        with pytest.raises(SchemaError):
            PushParams(m=0.0, inertia=0.01)
        with pytest.raises(SchemaError):
            PushParams(m=1.0, inertia=0.01, mu_s=-0.1)
        with pytest.raises(SchemaError):
            PushParams(m=1.0, inertia=0.01, k=0.0)


class TestFriction:
    def test_pure_translation_force(self):
        params = PushParams(m=1.0, inertia=0.01, mu_s=0.1)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        f = friction_force(grid, make_motion(v=(1.0, 0.0)), params)
        np.testing.assert_allclose(f.components, [-0.981, 0.0], atol=1e-12)
        assert f.frame is Frame.OBJECT

    def test_pure_rotation_symmetric_grid_cancels(self):
        params = PushParams(m=1.0, inertia=0.01, mu_s=0.2, n=80)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)  # 180deg symmetric
        f = friction_force(grid, make_motion(omega=2.0), params)
        np.testing.assert_allclose(f.components, [0.0, 0.0], atol=1e-9)

    def test_pure_translation_symmetric_grid_zero_moment(self):
        params = PushParams(m=1.0, inertia=0.01, mu_s=0.2, n=80)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        assert abs(friction_moment(grid, make_motion(v=(0.3, -0.2)), params)) < 1e-9

    def test_rotation_moment_opposes(self):
        params = PushParams(m=1.0, inertia=0.01, mu_s=0.1, n=16)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        assert friction_moment(grid, make_motion(omega=1.5), params) < 0.0
        assert friction_moment(grid, make_motion(omega=-1.5), params) > 0.0

    def test_four_particle_summation_oracle(self):
        params = PushParams(m=0.65, inertia=0.004, mu_s=0.1, n=4)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.1), params)  # 2x2 square
        motion = make_motion(v=(1.0, 0.0), omega=0.5)
        expected_f, expected_n = four_particle_friction_oracle(
            grid.particles, motion, params
        )
        np.testing.assert_allclose(
            friction_force(grid, motion, params).components, expected_f, atol=1e-12
        )
        np.testing.assert_allclose(
            friction_moment(grid, motion, params), expected_n, atol=1e-12
        )

    def test_rotated_pose_matches_oracle(self):
        params = PushParams(m=0.65, inertia=0.004, mu_s=0.15, n=12)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.06), params)
        motion = make_motion(v=(0.4, -0.3), omega=1.2, theta=0.7)
        expected_f, expected_n = four_particle_friction_oracle(
            grid.particles, motion, params
        )
        np.testing.assert_allclose(
            friction_force(grid, motion, params).components, expected_f, atol=1e-12
        )
        np.testing.assert_allclose(
            friction_moment(grid, motion, params), expected_n, atol=1e-12
        )

    def test_static_regime_flag(self):
        params = PushParams(m=1.0, inertia=0.01, mu_s=0.1)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        wrench = friction_wrench(grid, make_motion(), params)
        assert wrench.static
        np.testing.assert_array_equal(wrench.force, [0.0, 0.0])
        assert wrench.moment == 0.0

    def test_magnitude_bounded_by_coulomb_limit(self):
        rng = np.random.default_rng(5)
        params = PushParams(m=0.8, inertia=0.004, mu_s=0.25, n=36)
        grid = ParticleGrid.uniform_rectangle((0.09, 0.05), params)
        limit = params.mu_s * params.m * params.g
        for _ in range(200):
            motion = make_motion(
                v=rng.normal(size=2), omega=rng.normal(), theta=rng.normal()
            )
            f = friction_force(grid, motion, params)
            assert f.norm <= limit + 1e-12

    def test_doubling_particles_converges(self):
        # refinement shrinks the change between successive discretizations
        motions = make_motion(v=(0.3, 0.1), omega=2.0)
        half_extents = (0.1, 0.075)

        def wrench_at(n):
            params = PushParams(m=0.65, inertia=0.004, mu_s=0.1, n=n)
            grid = ParticleGrid.uniform_rectangle(half_extents, params)
            w = friction_wrench(grid, motions, params)
            return np.array([w.force[0], w.force[1], w.moment])

        coarse_change = np.linalg.norm(wrench_at(80) - wrench_at(40))
        fine_change = np.linalg.norm(wrench_at(160) - wrench_at(80))
        assert fine_change < coarse_change


class TestForceInference:
    def test_moment_term_vanishes_at_origin_contact(self):
        params = PushParams(m=1.0, inertia=0.01, k=10.0)
        motion = make_motion(v_dot=(1.0, 0.0))
        result = infer_force_frictionless(motion, np.zeros(2), params)
        np.testing.assert_allclose(result.force.components, [1.0, 0.0], atol=1e-12)

    def test_zero_motion_zero_force(self):
        params = PushParams(m=1.0, inertia=0.01)
        result = infer_force_frictionless(make_motion(), np.array([0.05, 0.02]), params)
        np.testing.assert_allclose(result.force.components, [0.0, 0.0], atol=1e-12)

    def test_normal_equations_against_grid_oracle(self):
        params = PushParams(m=0.65, inertia=0.004, k=10.0)
        motion = make_motion(v_dot=(0.2, 0.0), omega_dot=1.5)
        c = np.array([0.0, 0.1])
        closed = infer_force_frictionless(motion, c, params, SolveMethod.CLOSED_FORM)
        oracle = infer_force_frictionless(motion, c, params, SolveMethod.GRID_ORACLE)
        np.testing.assert_allclose(
            closed.force.components, oracle.force.components, atol=1e-3
        )

    def test_zero_friction_matches_frictionless(self):
        params = PushParams(m=0.65, inertia=0.004, mu_s=0.0, n=16)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        motion = make_motion(v=(0.5, 0.2), omega=0.3, v_dot=(1.0, -0.4), omega_dot=2.0)
        c = np.array([0.08, -0.03])
        with_f = infer_force_with_friction(motion, c, grid, params)
        without = infer_force_frictionless(motion, c, params)
        np.testing.assert_allclose(
            with_f.force.components, without.force.components, atol=1e-12
        )

    def test_equilibrium_push_cancels_friction(self):
        # steady sliding: inferred force exactly balances kinetic friction
        params = PushParams(m=1.0, inertia=0.01, mu_s=0.1, n=80, k=10.0)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        motion = make_motion(v=(1.0, 0.0))
        result = infer_force_with_friction(motion, np.zeros(2), grid, params)
        np.testing.assert_allclose(result.force.components, [0.981, 0.0], atol=1e-9)

    def test_three_solvers_agree_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            params = PushParams(
                m=rng.uniform(0.2, 2.0),
                inertia=rng.uniform(1e-3, 1e-2),
                mu_s=rng.uniform(0.0, 0.3),
                k=rng.uniform(1.0, 20.0),
                n=int(rng.integers(4, 100)),
            )
            grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
            motion = make_motion(
                v=rng.normal(size=2),
                omega=rng.normal(),
                v_dot=rng.normal(size=2),
                omega_dot=rng.normal(),
                theta=rng.normal(),
            )
            c = rng.uniform(-0.15, 0.15, size=2)
            closed = infer_force_with_friction(motion, c, grid, params, SolveMethod.CLOSED_FORM)
            iterative = infer_force_with_friction(motion, c, grid, params, SolveMethod.ITERATIVE)
            oracle = infer_force_with_friction(motion, c, grid, params, SolveMethod.GRID_ORACLE)
            np.testing.assert_allclose(
                closed.force.components, iterative.force.components, atol=1e-6
            )
            np.testing.assert_allclose(
                closed.force.components, oracle.force.components, atol=1e-3
            )

    def test_closed_form_is_local_minimum(self):
        rng = np.random.default_rng(9)
        params = PushParams(m=0.65, inertia=0.004, mu_s=0.1, k=10.0, n=16)
        grid = ParticleGrid.uniform_rectangle((0.1, 0.075), params)
        motion = make_motion(v=(0.3, 0.1), omega=0.5, v_dot=(0.4, -0.2), omega_dot=1.0)
        c = np.array([0.06, -0.02])
        result = infer_force_with_friction(motion, c, grid, params)
        base = force_objective(result.force.components, motion, c, params, grid)
        for _ in range(100):
            direction = rng.normal(size=2)
            direction /= np.linalg.norm(direction)
            perturbed = force_objective(
                result.force.components + 1e-3 * direction, motion, c, params, grid
            )
            assert base <= perturbed + 1e-15


class TestFrameTransform:
    def test_identity(self):
        transform = FrameTransform(np.eye(3), Frame.OBJECT, Frame.SENSOR)
        f = ForceVector(np.array([1.5, -2.0]), Frame.OBJECT)
        out = to_sensor_frame(f, transform)
        np.testing.assert_allclose(out.components, [1.5, -2.0, 0.0])
        assert out.frame is Frame.SENSOR

    def test_quarter_turn_about_z(self):
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        transform = FrameTransform(rot, Frame.OBJECT, Frame.SENSOR)
        out = to_sensor_frame(ForceVector(np.array([1.0, 0.0]), Frame.OBJECT), transform)
        np.testing.assert_allclose(out.components, [0.0, 1.0, 0.0], atol=1e-15)

    def test_norm_preserved_under_random_rotation(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            q = rng.normal(size=4)
            w, x, y, z = q / np.linalg.norm(q)
            rot = np.array(
                [
                    [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                    [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                    [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
                ]
            )
            transform = FrameTransform(rot, Frame.OBJECT, Frame.SENSOR)
            f = ForceVector(rng.normal(size=2), Frame.OBJECT)
            out = to_sensor_frame(f, transform)
            assert math.isclose(out.norm, f.norm, rel_tol=0, abs_tol=1e-12)

    def test_frame_mismatch_rejected(self):
        transform = FrameTransform(np.eye(3), Frame.SENSOR, Frame.WORLD)
        f = ForceVector(np.array([1.0, 0.0]), Frame.OBJECT)
        with pytest.raises(FrameMismatchError):
            to_sensor_frame(f, transform)

    def test_non_orthonormal_rotation_rejected(self):
        with pytest.raises(SchemaError):
            FrameTransform(np.eye(3) * 2.0, Frame.OBJECT, Frame.SENSOR)

    def test_improper_rotation_rejected(self):
        reflection = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(SchemaError):
            FrameTransform(reflection, Frame.OBJECT, Frame.SENSOR)


class TestHelpers:
    def test_perp_and_cross(self):
        np.testing.assert_array_equal(perp(np.array([2.0, 3.0])), [-3.0, 2.0])
        assert cross2(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
        assert cross2(np.array([0.5, 0.2]), np.array([0.5, 0.2])) == 0.0
