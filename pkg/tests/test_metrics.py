import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_traj, random_rotation
from latdyn import metrics
from latdyn.model import ValidationError
from oracles import direct_step_lengths, smoothed_kl

LOG2 = math.log(2.0)


def traj_of(states):
    return make_traj(states)


class TestStepDistances:
    def test_constant_trajectory_zero(self):
        d = metrics.step_distances(traj_of([[1.0, 2.0]] * 5), normalize=False)
        assert np.array_equal(d.delta, np.zeros(4))

    def test_unit_steps(self):
        states = [[float(t), 0.0] for t in range(5)]
        d = metrics.step_distances(traj_of(states), normalize=False)
        assert np.array_equal(d.delta, np.ones(4))

    def test_zero_state_normalize_error(self):
        with pytest.raises(ValidationError, match="cannot normalize zero state"):
            metrics.step_distances(traj_of([[0.0, 0.0], [1.0, 0.0]]), normalize=True)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.booleans())
    def test_matches_direct_recomputation(self, seed, normalize):
        rng = np.random.default_rng(seed)
        states = rng.normal(size=(6, 2)) + 5.0  # offset keeps norms nonzero
        d = metrics.step_distances(traj_of(states), normalize=normalize)
        oracle = direct_step_lengths(states, normalize)
        assert np.allclose(d.delta, oracle, rtol=0, atol=1e-12)


class TestContinuity:
    def test_constant_zero(self):
        assert metrics.continuity(traj_of([[1.0, 1.0]] * 4), normalize=False).continuity == 0.0

    def test_unit_steps_mean_one(self):
        states = [[float(t), 0.0] for t in range(5)]
        assert metrics.continuity(traj_of(states), normalize=False).continuity == 1.0

    def test_equals_mean_of_delta(self):
        rng = np.random.default_rng(7)
        rep = metrics.continuity(traj_of(rng.normal(size=(9, 3))), normalize=False)
        assert abs(rep.continuity - float(np.mean(rep.delta.delta))) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 100.0), st.integers(0, 2 ** 16))
    def test_positive_homogeneity(self, scale, seed):
        rng = np.random.default_rng(seed)
        states = rng.normal(size=(6, 3))
        base = metrics.continuity(traj_of(states), normalize=False).continuity
        scaled = metrics.continuity(traj_of(scale * states), normalize=False).continuity
        assert math.isclose(scaled, scale * base, rel_tol=1e-9, abs_tol=1e-12)

    def test_isometry_invariance_raw(self):
        rng = np.random.default_rng(11)
        states = rng.normal(size=(8, 3))
        rot = random_rotation(3, seed=5)
        moved = states @ rot.T + np.array([4.0, -2.0, 1.0])
        a = metrics.continuity(traj_of(states), normalize=False).continuity
        b = metrics.continuity(traj_of(moved), normalize=False).continuity
        assert math.isclose(a, b, rel_tol=1e-9)

    def test_rotation_invariance_normalized(self):
        # Translation moves points relative to the unit sphere, so only
        # rotations preserve the normalized metric.
        rng = np.random.default_rng(12)
        states = rng.normal(size=(8, 3)) + 4.0
        rot = random_rotation(3, seed=6)
        a = metrics.continuity(traj_of(states), normalize=True).continuity
        b = metrics.continuity(traj_of(states @ rot.T), normalize=True).continuity
        assert math.isclose(a, b, rel_tol=1e-9)


class TestDetectJumps:
    def delta(self, values):
        return metrics.StepDistances(delta=np.asarray(values, float), normalized=False)

    def test_outlier_below_mean_z_threshold(self):
        # mean 3.25, std ~3.897: threshold ~11.04 sits above the outlier.
        rep = metrics.detect_jumps(self.delta([1, 1, 1, 10]), method="mean_z", z=2)
        assert rep.indices == set()

    def test_outlier_caught_by_median_mad(self):
        rep = metrics.detect_jumps(self.delta([1, 1, 1, 10]), method="median_mad", z=2)
        assert rep.indices == {4}
        assert rep.threshold == 1.0

    def test_constant_delta_empty_not_error(self):
        for method in metrics.JUMP_METHODS:
            assert metrics.detect_jumps(self.delta([2, 2, 2, 2]), method=method).indices == set()

    def test_unreachable_threshold(self):
        rng = np.random.default_rng(0)
        rep = metrics.detect_jumps(self.delta(rng.uniform(size=20)), z=1e9)
        assert rep.indices == set()

    def test_errors(self):
        with pytest.raises(ValidationError):
            metrics.detect_jumps(self.delta([1.0]))
        with pytest.raises(ValidationError, match="z must be positive"):
            metrics.detect_jumps(self.delta([1, 2, 3]), z=0)
        with pytest.raises(ValidationError, match="unknown jump method"):
            metrics.detect_jumps(self.delta([1, 2, 3]), method="zscore")

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=30),
           st.sampled_from(metrics.JUMP_METHODS), st.floats(0.5, 5.0))
    def test_indices_recomputable_from_threshold(self, values, method, z):
        rep = metrics.detect_jumps(self.delta(values), method=method, z=z)
        expected = {i + 1 for i, v in enumerate(values) if v > rep.threshold}
        assert rep.indices == expected


class TestMeanSuccessiveKL:
    def test_identical_distributions_zero(self):
        dists = [[0.5, 0.5]] * 3
        rep = metrics.mean_successive_kl(traj_of_with_dists(dists))
        assert np.array_equal(rep.per_step, np.zeros(2))
        assert rep.mean_kl == 0.0

    def test_point_mass_to_uniform_is_log2(self):
        rep = metrics.mean_successive_kl(traj_of_with_dists([[1.0, 0.0], [0.5, 0.5]]))
        assert abs(rep.mean_kl - LOG2) < 1e-7
        assert abs(rep.mean_kl - smoothed_kl([1.0, 0.0], [0.5, 0.5])) < 1e-12

    def test_missing_distributions(self):
        with pytest.raises(ValidationError, match="KL unavailable"):
            metrics.mean_successive_kl(traj_of([[1.0], [2.0], [3.0]]))

    def test_single_distribution(self):
        with pytest.raises(ValidationError):
            metrics.mean_successive_kl(make_traj([[1.0], [2.0]],
                                                 token_distributions=[[1.0]]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 16))
    def test_nonnegative_and_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        dists = rng.dirichlet(np.full(4, 0.3), size=4)
        rep = metrics.mean_successive_kl(traj_of_with_dists(dists))
        assert np.all(rep.per_step >= 0)
        for t in range(3):
            assert abs(rep.per_step[t] - max(smoothed_kl(dists[t], dists[t + 1]), 0.0)) < 1e-10


def traj_of_with_dists(dists):
    n = len(dists) + 1
    states = [[float(t), 1.0] for t in range(n)]
    return make_traj(states, token_distributions=dists)
