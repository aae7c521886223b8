import numpy as np
import pytest

from shepherding.control import (
    HierarchicalController,
    RewardGains,
    decode_discrete_action,
    driving_obs_dqn,
    driving_obs_ppo,
    driving_reward,
    selection_obs,
    selection_reward,
)
from shepherding.sim import SimParams, WorldState


def state_1v1(herder, target, goal=(0.0, 0.0)):
    return WorldState([herder], [target], [[0.0, 0.0]], goal_center=goal)


class TestDrivingObservations:
    def test_dqn_layout(self):
        s = state_1v1((1.0, 2.0), (3.0, 4.0))
        np.testing.assert_allclose(driving_obs_dqn(s, 0, 0), [3, 4, 1, 2])

    def test_dqn_origin(self):
        s = state_1v1((0.0, 0.0), (0.0, 0.0))
        np.testing.assert_allclose(driving_obs_dqn(s, 0, 0), np.zeros(4))

    def test_ppo_normalization(self):
        s = state_1v1((0.0, 0.0), (25.0, 0.0))
        np.testing.assert_allclose(driving_obs_ppo(s, 0, 0, rho_0=25.0),
                                   [1, 0, 1, 0])

    def test_ppo_coincident_pair(self):
        s = state_1v1((5.0, 5.0), (5.0, 5.0))
        obs = driving_obs_ppo(s, 0, 0, rho_0=25.0)
        np.testing.assert_allclose(obs[2:], [0.0, 0.0])

    def test_ppo_scale_invariance(self):
        s = state_1v1((2.0, -3.0), (7.0, 1.0))
        a = driving_obs_ppo(s, 0, 0, rho_0=25.0)
        s2 = state_1v1((6.0, -9.0), (21.0, 3.0))
        b = driving_obs_ppo(s2, 0, 0, rho_0=75.0)
        np.testing.assert_allclose(a, b)


class TestDecodeDiscreteAction:
    def test_center_and_corners(self):
        np.testing.assert_allclose(decode_discrete_action(12, 12.0), [0, 0])
        np.testing.assert_allclose(decode_discrete_action(0, 12.0), [-12, -12])
        np.testing.assert_allclose(decode_discrete_action(24, 12.0), [12, 12])

    def test_bijection_onto_grid(self):
        seen = {tuple(decode_discrete_action(i, 12.0)) for i in range(25)}
        bins = [-12.0, -6.0, 0.0, 6.0, 12.0]
        assert seen == {(vx, vy) for vx in bins for vy in bins}

    def test_out_of_range(self):
        for bad in (-1, 25):
            with pytest.raises(ValueError):
                decode_discrete_action(bad, 12.0)


class TestDrivingReward:
    gains = RewardGains.for_ppo()

    def test_only_herder_in_goal_penalty(self):
        s = state_1v1((0.0, 0.0), (0.0, 0.0))
        assert driving_reward(s, [0, 0], self.gains, rho_G=5.0) == pytest.approx(-5.0)

    def test_approach_and_steering_terms(self):
        s = state_1v1((6.0, 0.0), (10.0, 0.0))
        assert driving_reward(s, [0, 0], self.gains, 5.0) == pytest.approx(-0.7)

    def test_target_inside_herder_outside(self):
        s = state_1v1((7.0, 0.0), (1.0, 0.0))
        assert driving_reward(s, [0, 0], self.gains, 5.0) == pytest.approx(-0.3)

    def test_translation_decomposition(self):
        # joint translation keeps the approach term, moves goal-centred terms
        rng = np.random.default_rng(4)
        for _ in range(20):
            h, t = rng.uniform(-10, 10, size=(2, 2))
            shift = rng.uniform(-5, 5, size=2)
            u = rng.uniform(-12, 12, size=2)
            g = self.gains
            base_approach = -g.k_a * np.linalg.norm(t - h)
            r1 = driving_reward(state_1v1(h, t), u, g, 5.0)
            r2 = driving_reward(state_1v1(h + shift, t + shift), u, g, 5.0)
            goal_terms_1 = r1 - base_approach + g.k_c * np.linalg.norm(u)
            goal_terms_2 = r2 - base_approach + g.k_c * np.linalg.norm(u)
            td1 = np.linalg.norm(t)
            td2 = np.linalg.norm(t + shift)
            expect_1 = -g.k_s * max(td1 - 5.0, 0) - g.k_h * (np.linalg.norm(h) <= 5.0)
            expect_2 = -g.k_s * max(td2 - 5.0, 0) - g.k_h * (np.linalg.norm(h + shift) <= 5.0)
            assert goal_terms_1 == pytest.approx(expect_1)
            assert goal_terms_2 == pytest.approx(expect_2)

    def test_gain_hierarchy_warning(self):
        with pytest.warns(UserWarning):
            RewardGains(k_a=1.0, k_s=0.5, k_c=0.1, k_h=5.0, k_t=1.0)


def state_2v5(seed=0):
    rng = np.random.default_rng(seed)
    return WorldState(rng.uniform(-20, 20, (2, 2)),
                      rng.uniform(-20, 20, (5, 2)), np.zeros((5, 2)))


class TestSelectionObs:
    def test_length(self):
        assert selection_obs(state_2v5(), 0).shape == (14,)

    def test_ego_first(self):
        s = state_2v5()
        for j in range(2):
            np.testing.assert_allclose(selection_obs(s, j)[:2], s.herder_pos[j])

    def test_target_permutation_moves_only_target_block(self):
        s = state_2v5()
        perm = np.array([3, 0, 4, 1, 2])
        s2 = WorldState(s.herder_pos, s.target_pos[perm],
                        s.target_vel[perm], s.goal_center, s.time)
        a, b = selection_obs(s, 0), selection_obs(s2, 0)
        np.testing.assert_allclose(a[:4], b[:4])
        np.testing.assert_allclose(a[4:].reshape(5, 2)[perm], b[4:].reshape(5, 2))

    def test_scaling(self):
        s = state_2v5()
        np.testing.assert_allclose(selection_obs(s, 1, scale=25.0),
                                   selection_obs(s, 1) / 25.0)


class TestSelectionReward:
    def test_all_inside(self):
        s = WorldState([[20.0, 0.0]], np.zeros((3, 2)), np.zeros((3, 2)))
        assert selection_reward(s, k_t=1.0, rho_G=5.0) == 0.0

    def test_single_outside(self):
        s = WorldState([[20.0, 0.0]], [[8.0, 0.0]], [[0.0, 0.0]])
        assert selection_reward(s, 0.01, 5.0) == pytest.approx(-0.03)

    def test_five_outside(self):
        s = WorldState([[20.0, 0.0]], np.tile([10.0, 0.0], (5, 1)),
                       np.zeros((5, 2)))
        assert selection_reward(s, 1.0, 5.0) == pytest.approx(-25.0)

    def test_never_positive(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            s = WorldState([[0.0, 20.0]], rng.uniform(-30, 30, (4, 2)),
                           np.zeros((4, 2)))
            r = selection_reward(s, 0.01, 5.0)
            assert r <= 0.0
            inside = np.linalg.norm(s.target_pos, axis=1) <= 5.0
            assert (r == 0.0) == inside.all()


class FixedDriving:
    def __init__(self):
        self.calls = []

    def control(self, state, herder_idx, target_idx):
        self.calls.append((herder_idx, target_idx))
        return np.array([100.0, -100.0])  # deliberately out of the box


class CyclingSelection:
    def __init__(self):
        self.k = 0

    def select(self, state, herder_idx):
        self.k += 1
        return self.k % state.n_targets


class TestHierarchicalController:
    params = SimParams(n_herders=2, n_targets=5)

    def test_controls_clamped(self):
        ctrl = HierarchicalController(FixedDriving(), CyclingSelection(),
                                      self.params)
        s = state_2v5()
        controls, _ = ctrl.act(s)
        assert np.all(np.abs(controls) <= self.params.v_max)

    def test_selection_reused_between_queries(self):
        ctrl = HierarchicalController(FixedDriving(), CyclingSelection(),
                                      self.params, n_w=4, evaluate=False)
        s = state_2v5()
        first = ctrl.act(s)[1]
        for _ in range(3):
            np.testing.assert_array_equal(ctrl.act(s)[1], first)
        assert not np.array_equal(ctrl.act(s)[1], first)  # 5th step re-queries

    def test_evaluate_mode_queries_every_step(self):
        ctrl = HierarchicalController(FixedDriving(), CyclingSelection(),
                                      self.params, n_w=4, evaluate=True)
        s = state_2v5()
        a = ctrl.act(s)[1]
        b = ctrl.act(s)[1]
        assert not np.array_equal(a, b)

    def test_single_target_bypasses_selection(self):
        p = SimParams(n_herders=1, n_targets=1)
        ctrl = HierarchicalController(FixedDriving(), None, p)
        s = state_1v1((1.0, 1.0), (2.0, 2.0))
        _, sel = ctrl.act(s)
        np.testing.assert_array_equal(sel, [0])

    def test_missing_policies_raise(self):
        ctrl = HierarchicalController(FixedDriving(), None, self.params)
        with pytest.raises(RuntimeError):
            ctrl.act(state_2v5())
        ctrl2 = HierarchicalController(None, CyclingSelection(), self.params)
        with pytest.raises(RuntimeError):
            ctrl2.act(state_2v5())
