import math

import numpy as np
import pytest

from forcemanip import dynamics, mdp
from forcemanip.dynamics import JointKind
from forcemanip.mdp import (ConvergenceMonitor, Curriculum, CurriculumSchedule,
                            EpisodeConfig, EpisodeRecord, RewardParams, build_state,
                            chi_metric, reward, run_episode)

from conftest import make_prismatic, make_revolute


class TestBuildState:
    def test_prismatic_initial_zero_tail(self):
        spec = make_prismatic()
        anchor = np.array([0.4, 0.0, 0.1])
        state = dynamics.initial_state(spec, anchor)
        p_0 = dynamics.point_position(spec, anchor, 0.0)
        s = build_state(spec, state, p_0)
        np.testing.assert_allclose(s[:3], spec.world_axis())
        np.testing.assert_allclose(s[3:], 0.0, atol=1e-15)

    def test_revolute_projection_removes_axis_component(self):
        spec = make_revolute(axis=(0, 0, 1), origin=(0, 0, 0), anchors=[(0.3, 0.0, 0.5)])
        state = dynamics.initial_state(spec, np.array([0.3, 0.0, 0.5]))
        s = build_state(spec, state)
        np.testing.assert_allclose(s[3:], [0.3, 0.0, 0.0], atol=1e-15)

    def test_revolute_on_axis_zero_tail(self):
        spec = make_revolute(axis=(0, 0, 1), origin=(0.1, 0.2, 0.0))
        state = dynamics.initial_state(spec, np.array([0.1, 0.2, 0.9]))
        s = build_state(spec, state)
        np.testing.assert_allclose(s[3:], 0.0, atol=1e-15)

    @pytest.mark.parametrize("make", [make_prismatic, make_revolute])
    def test_frame_consistency_under_yaw(self, make):
        # rotating the base yaw rotates both halves of the observation
        alpha = 0.8
        spec0 = make(base_yaw=0.0)
        spec1 = make(base_yaw=alpha)
        anchor = np.array([0.35, 0.05, 0.1])
        q = 0.15
        st0 = dynamics.ObjectState(q=q, q_dot=0.0, contact_anchor=anchor)
        rot = dynamics.rotation_about_axis(np.array([0.0, 0.0, 1.0]), alpha)
        p0_a = dynamics.point_position(spec0, anchor, 0.0)
        p0_b = dynamics.point_position(spec1, anchor, 0.0)
        s0 = build_state(spec0, st0, p0_a)
        s1 = build_state(spec1, st0, p0_b)
        np.testing.assert_allclose(s1[:3], rot @ s0[:3], atol=1e-9)
        np.testing.assert_allclose(s1[3:], rot @ s0[3:], atol=1e-9)


class TestReward:
    params = RewardParams(r_goal=10.0)

    def test_aligned_positive(self):
        dx = np.array([0.02, 0.0, 0.0])
        r = reward(np.array([0.01, 0.0, 0.0]), dx, 0.1, False, self.params)
        assert r == pytest.approx(0.02)

    def test_orthogonal_zero(self):
        r = reward(np.array([0.0, 0.01, 0.0]), np.array([0.02, 0.0, 0.0]), 0.1, False, self.params)
        assert r == pytest.approx(0.0, abs=1e-15)

    def test_closing_branch_negates(self):
        r = reward(np.array([0.01, 0.0, 0.0]), np.array([0.02, 0.0, 0.0]), -0.1, False, self.params)
        assert r == pytest.approx(-0.02)

    def test_goal_bonus_added(self):
        dense = reward(np.array([0.01, 0, 0]), np.array([0.02, 0, 0]), 0.1, False, self.params)
        with_goal = reward(np.array([0.01, 0, 0]), np.array([0.02, 0, 0]), 0.1, True, self.params)
        assert with_goal - dense == pytest.approx(self.params.r_goal)

    def test_zero_vectors_convention(self):
        assert reward(np.zeros(3), np.array([0.02, 0, 0]), 0.1, False, self.params) == 0.0
        assert reward(np.array([0.01, 0, 0]), np.zeros(3), 0.1, False, self.params) == 0.0

    def test_sign_consistency_property(self, rng):
        for _ in range(200):
            a = rng.normal(size=3) * 0.02
            dx = rng.normal(size=3) * 0.02
            dq = rng.normal()
            r = reward(a, dx, dq, False, self.params)
            aligned = a @ dx
            if dq >= 0:
                assert np.sign(r) == np.sign(aligned)
            else:
                assert np.sign(r) == -np.sign(aligned)


class TestChiMetric:
    def _record(self, pairs):
        rec = EpisodeRecord()
        for a, dx in pairs:
            rec.actions.append(np.asarray(a, float))
            rec.deltas.append(np.asarray(dx, float))
        return rec

    def test_perfect_alignment(self):
        rec = self._record([([1, 0, 0], [2, 0, 0])] * 5)
        assert chi_metric(rec) == pytest.approx(1.0)

    def test_perfect_opposition(self):
        rec = self._record([([1, 0, 0], [-2, 0, 0])] * 5)
        assert chi_metric(rec) == pytest.approx(-1.0)

    def test_alternating_half(self):
        rec = self._record([([1, 0, 0], [1, 0, 0]), ([1, 0, 0], [0, 1, 0])] * 3)
        assert chi_metric(rec) == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            chi_metric(EpisodeRecord())

    def test_bounds_random(self, rng):
        pairs = [(rng.normal(size=3), rng.normal(size=3)) for _ in range(50)]
        assert -1.0 <= chi_metric(self._record(pairs)) <= 1.0


class TestRunEpisode:
    config = EpisodeConfig()
    params = RewardParams()

    def test_zero_policy(self, rng):
        spec = make_prismatic()
        rec = run_episode(spec, lambda s: np.zeros(3), self.config, self.params, rng)
        assert not rec.success
        assert rec.steps == self.config.max_steps
        assert rec.chi == 0.0

    def test_axis_push_succeeds_early(self, rng):
        spec = make_prismatic()
        h = spec.world_axis()
        rec = run_episode(spec, lambda s: 0.02 * h, self.config, self.params, rng)
        assert rec.success
        assert rec.steps < self.config.max_steps
        assert rec.transitions[-1][4] is True or rec.transitions[-1][4]

    def test_goal_bonus_accounting(self, rng):
        spec = make_prismatic()
        h = spec.world_axis()
        rec = run_episode(spec, lambda s: 0.02 * h, self.config, self.params, rng)
        dense = sum(
            mdp.reward(a, dx, 1.0, False, self.params)
            for a, dx in zip(rec.actions, rec.deltas))
        assert rec.total_reward - dense == pytest.approx(self.params.r_goal)


class TestCurriculum:
    def test_stage_zero_before_window(self):
        cur = Curriculum()
        for _ in range(99):
            cur.record(1.0)
        assert cur.stage == 0

    def test_advances_after_good_window(self):
        cur = Curriculum()
        for _ in range(100):
            cur.record(0.9)
        assert cur.stage == 1
        assert cur.yaw_range == (-math.pi / 2, 0.0)

    def test_five_windows_reach_final_and_stay(self):
        cur = Curriculum()
        for _ in range(5 * 100):
            cur.record(0.85)
        assert cur.at_final_stage
        assert cur.yaw_range == (-math.pi, math.pi)
        for _ in range(200):
            cur.record(0.85)
        assert cur.at_final_stage

    def test_never_regresses(self):
        cur = Curriculum()
        for _ in range(100):
            cur.record(0.9)
        stage = cur.stage
        for _ in range(300):
            cur.record(-1.0)
            assert cur.stage >= stage

    def test_monotone_stage_property(self, rng):
        cur = Curriculum()
        prev = cur.stage
        for chi in rng.uniform(-1, 1, size=2000):
            cur.record(chi)
            assert cur.stage >= prev
            prev = cur.stage


class TestConvergenceMonitor:
    def test_window_not_full(self):
        mon = ConvergenceMonitor()
        for _ in range(99):
            mon.record(1.0)
        assert not mon.converged()

    def test_boundary_inclusive(self):
        mon = ConvergenceMonitor()
        for _ in range(100):
            mon.record(0.75)
        assert mon.converged()

    def test_below_threshold(self):
        mon = ConvergenceMonitor()
        for _ in range(100):
            mon.record(0.74)
        assert not mon.converged()

    def test_chi_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ConvergenceMonitor().record(1.5)
