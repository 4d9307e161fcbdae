from __future__ import annotations

import numpy as np
import pytest
from oracles import finite_difference_jacobian, relative_frobenius_error

from geomotion.types import (
    Demonstration,
    Obstacle,
    Pose,
    Trajectory,
    antipodal_double,
    normalize_orientation,
)


def _demo(n_samples: int = 10, seed: int = 0, ident: str = "d0") -> Demonstration:
    rng = np.random.default_rng(seed)
    poses = []
    for _ in range(n_samples):
        q = rng.normal(size=3)
        poses.append(Pose(rng.normal(size=2), q / np.linalg.norm(q)))
    return Demonstration(id=ident, timestamps=np.arange(n_samples, dtype=float), poses=tuple(poses))


class TestAntipodalDouble:
    def test_doubles_counts_and_negates_orientations(self):
        demo = _demo(10)
        out = antipodal_double([demo])
        assert len(out) == 2
        assert sum(len(d) for d in out) == 20
        for original, twin in zip(out[0].poses, out[1].poses):
            assert np.array_equal(twin.orientation, -original.orientation)
            assert np.array_equal(twin.position, original.position)

    def test_simple_negation(self):
        demo = Demonstration("one", np.array([0.0]), (Pose([0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]),))
        out = antipodal_double([demo])
        assert np.array_equal(out[1].poses[0].orientation, [-1.0, 0.0, 0.0, 0.0])

    def test_double_is_involution_on_orientation_multiset(self):
        demo = _demo(5)
        twice = antipodal_double(antipodal_double([demo]))
        assert len(twice) == 4
        for i, pose in enumerate(demo.poses):
            multiset = sorted(tuple(d.poses[i].orientation) for d in twice)
            q, nq = tuple(pose.orientation), tuple(-pose.orientation)
            assert multiset == sorted([q, nq, nq, q])

    def test_positions_are_measure_preserving(self):
        demos = [_demo(6, seed=1, ident="a"), _demo(4, seed=2, ident="b")]
        out = antipodal_double(demos)
        original = sorted(tuple(p.position) for d in demos for p in d.poses)
        doubled = sorted(tuple(p.position) for d in out for p in d.poses)
        assert doubled == sorted(original * 2)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="no demonstrations"):
            antipodal_double([])


class TestNormalizeOrientation:
    def test_axis_aligned_case(self):
        u, jac = normalize_orientation(np.array([2.0, 0.0, 0.0, 0.0]))
        assert np.allclose(u, [1.0, 0.0, 0.0, 0.0])
        assert np.allclose(jac, np.diag([0.0, 0.5, 0.5, 0.5]))

    def test_radial_direction_annihilated(self, rng):
        for _ in range(20):
            v = rng.normal(size=4) * rng.uniform(0.1, 10)
            _, jac = normalize_orientation(v)
            assert np.allclose(jac @ v, 0.0, atol=1e-12)

    def test_jacobian_matches_finite_differences(self, rng):
        for _ in range(20):
            v = rng.normal(size=4) * rng.uniform(0.5, 3.0)
            _, jac = normalize_orientation(v)
            fd = finite_difference_jacobian(lambda x: x / np.linalg.norm(x), v, h=1e-5)
            assert relative_frobenius_error(jac, fd) < 1e-6

    def test_unit_norm_across_magnitudes(self, rng):
        for scale in 10.0 ** np.linspace(-6, 6, 13):
            v = rng.normal(size=4)
            v = scale * v / np.linalg.norm(v)
            u, _ = normalize_orientation(v)
            assert abs(np.linalg.norm(u) - 1.0) <= 1e-12

    def test_degenerate_vector_rejected(self):
        with pytest.raises(ValueError, match="degenerate quaternion"):
            normalize_orientation(np.zeros(4))


class TestInvariants:
    def test_pose_requires_unit_orientation(self):
        with pytest.raises(ValueError, match="orientation norm"):
            Pose([0.0, 0.0], [0.5, 0.5, 0.5])

    def test_pose_requires_finite_entries(self):
        with pytest.raises(ValueError, match="finite"):
            Pose([np.inf, 0.0], [1.0, 0.0, 0.0])

    def test_demonstration_requires_increasing_timestamps(self):
        pose = Pose([0.0], [1.0, 0.0])
        with pytest.raises(ValueError, match="strictly increasing"):
            Demonstration("bad", np.array([0.0, 0.0]), (pose, pose))

    def test_demonstration_rejects_mixed_dimensions(self):
        p1 = Pose([0.0], [1.0, 0.0])
        p2 = Pose([0.0, 1.0], [1.0, 0.0])
        with pytest.raises(ValueError, match="mixes pose dimensions"):
            Demonstration("bad", np.array([0.0, 1.0]), (p1, p2))

    def test_trajectory_parameter_must_span_unit_interval(self):
        pose = Pose([0.0], [1.0, 0.0])
        with pytest.raises(ValueError, match="span"):
            Trajectory(np.array([0.0, 0.5]), (pose, pose))
        Trajectory(np.array([0.0, 1.0]), (pose, pose))
        Trajectory(np.array([0.0]), (pose,))

    def test_obstacle_validation(self):
        with pytest.raises(ValueError, match="radius"):
            Obstacle([0.0, 0.0], radius=0.0, strength=1.0)
        with pytest.raises(ValueError, match="strength"):
            Obstacle([0.0, 0.0], radius=1.0, strength=-2.0)
