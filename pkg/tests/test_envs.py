import numpy as np
import pytest

from cashlab.envs import (
    EnvError,
    FirefightingEnv,
    MiningEnv,
    TeamFileError,
    TeamSpec,
    fire_train_teams,
    load_builtin_teams,
    load_team_file,
    nearest_neighbor_slots,
    sample_training_teams,
    save_team_file,
)


def _fire_team(n=3):
    return TeamSpec(np.array([[0.3, 1.0], [0.2, 2.0], [0.1, 3.0]][:n]))


def _mine_team():
    return TeamSpec(np.array([[0.1, 0.4], [0.2, 0.3], [0.3, 0.2], [0.5, 0.0]]))


# ---------------------------------------------------------------- team files

def test_fire_test_team_file_first_row():
    teams = load_builtin_teams("fire_test_teams.csv")
    assert len(teams) == 10
    np.testing.assert_allclose(
        teams[0].caps, [[0.09, 3.43], [0.21, 2.94], [0.42, 0.75]])


def test_mining_test_team_file_first_agent():
    teams = load_builtin_teams("mining_test_teams.csv")
    assert len(teams) == 10
    np.testing.assert_allclose(teams[0].caps[0], [0.72, 0.28])


def test_mining_train_capacities_sum_half():
    for team in load_builtin_teams("mining_train_teams.csv"):
        np.testing.assert_allclose(team.caps.sum(axis=1), 0.5, atol=1e-12)


def test_fire_train_teams_are_pool_combinations():
    teams = fire_train_teams(3)
    assert len(teams) == 10  # C(5,3)
    shipped = load_builtin_teams("fire_train_teams.csv")
    for a, b in zip(teams, shipped):
        np.testing.assert_array_equal(a.caps, b.caps)


def test_team_file_round_trip(tmp_path):
    teams = [TeamSpec(np.random.default_rng(0).uniform(0, 1, (3, 2)))
             for _ in range(4)]
    path = tmp_path / "teams.csv"
    save_team_file(path, teams)
    back = load_team_file(path)
    assert len(back) == 4
    for a, b in zip(teams, back):
        np.testing.assert_array_equal(a.caps, b.caps)


def test_team_file_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("m=2,n=3\n0.1,0.2,0.3,0.4,0.5,0.6\n0.1,oops\n")
    with pytest.raises(TeamFileError, match=":3"):
        load_team_file(path)


def test_team_file_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not a header\n")
    with pytest.raises(TeamFileError):
        load_team_file(path)


def test_sample_training_teams_mining_sums():
    rng = np.random.default_rng(0)
    for team in sample_training_teams("mining", 50, rng):
        assert team.caps.shape == (4, 2)
        np.testing.assert_allclose(team.caps.sum(axis=1), 0.5, atol=1e-12)


def test_sample_training_teams_fire_ranges():
    rng = np.random.default_rng(1)
    for team in sample_training_teams("firefighting", 50, rng):
        assert np.all((team.caps[:, 0] >= 0.1) & (team.caps[:, 0] <= 0.3))
        assert np.all((team.caps[:, 1] >= 1.0) & (team.caps[:, 1] <= 3.0))


def test_sample_training_teams_reproducible():
    a = sample_training_teams("mining", 5, np.random.default_rng(7))
    b = sample_training_teams("mining", 5, np.random.default_rng(7))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.caps, y.caps)


# ------------------------------------------------------------ teammate slots

def test_nearest_neighbors_all_included_n4():
    pos = np.array([[0.0, 0.0], [0.5, 0.0], [0.1, 0.0], [0.0, 0.3]])
    out = nearest_neighbor_slots(pos, 0)
    np.testing.assert_allclose(
        out, [0.1, 0.0, 0.0, 0.3, 0.5, 0.0])


def test_nearest_neighbors_brute_force_n12():
    rng = np.random.default_rng(3)
    pos = rng.uniform(-1, 1, (12, 2))
    for i in range(12):
        out = nearest_neighbor_slots(pos, i)
        dists = sorted((np.linalg.norm(pos[j] - pos[i]), j)
                       for j in range(12) if j != i)
        expect = np.concatenate([pos[j] - pos[i] for _, j in dists[:3]])
        np.testing.assert_allclose(out, expect)


def test_nearest_neighbors_padding_n2():
    pos = np.array([[0.0, 0.0], [0.2, 0.1]])
    out = nearest_neighbor_slots(pos, 0)
    np.testing.assert_allclose(out, [0.2, 0.1, 0, 0, 0, 0])


# ------------------------------------------------------------- firefighting

def test_reset_deterministic():
    env1, env2 = FirefightingEnv(), FirefightingEnv()
    o1 = env1.reset(_fire_team(), seed=42)
    o2 = env2.reset(_fire_team(), seed=42)
    np.testing.assert_array_equal(o1, o2)


def test_reset_fire_strengths_in_range():
    env = FirefightingEnv()
    for seed in range(1000):
        env.reset(_fire_team(), seed=seed)
        assert np.all(env.fire_strength >= 0.2)
        assert np.all(env.fire_strength <= 0.3)


def test_reset_robots_near_depot():
    env = FirefightingEnv()
    for seed in range(100):
        env.reset(_fire_team(), seed=seed)
        assert np.all(np.linalg.norm(env.pos, axis=1) < 0.1)


def test_reset_wrong_team_size():
    env = FirefightingEnv(n_agents=3)
    with pytest.raises(EnvError):
        env.reset(TeamSpec(np.ones((4, 2))), seed=0)


def test_obs_shape_fixed():
    env = FirefightingEnv()
    obs = env.reset(_fire_team(), seed=0)
    assert obs.shape == (3, 16)
    env12 = FirefightingEnv(n_agents=12)
    obs12 = env12.reset(TeamSpec(np.tile([[0.1, 2.0]], (12, 1))), seed=0)
    assert obs12.shape == (12, 16)


def test_no_robot_in_range_strengths_unchanged():
    env = FirefightingEnv()
    env.reset(_fire_team(), seed=0)
    env.fire_pos = np.array([[0.9, 0.9], [-0.9, -0.9]])
    before = env.fire_strength.copy()
    res = env.step([0, 0, 0])
    np.testing.assert_array_equal(env.fire_strength, before)
    assert res.reward == pytest.approx(-0.1 * before.sum())


def test_adjacent_robot_extinguishes_in_five_steps():
    # douse rate 0.2 * 0.2 = 0.04 per step; 0.2 strength -> 5 steps
    env = FirefightingEnv(n_agents=1)
    env.reset(TeamSpec(np.array([[0.2, 1.0]])), seed=0)
    env.pos = np.array([[0.0, 0.0]])
    env.vel = np.zeros((1, 2))
    env.fire_pos = np.array([[0.05, 0.0], [0.9, 0.9]])
    env.fire_strength = np.array([0.2, 0.25])
    for k in range(4):
        env.step([0])
        assert env.fire_strength[0] > 0
    env.step([0])
    assert env.fire_strength[0] == 0.0


def test_success_gives_done_and_bonus():
    env = FirefightingEnv(n_agents=1)
    env.reset(TeamSpec(np.array([[0.3, 1.0]])), seed=0)
    env.pos = np.array([[0.0, 0.0]])
    env.vel = np.zeros((1, 2))
    env.fire_pos = np.array([[0.05, 0.0], [-0.05, 0.0]])
    env.fire_strength = np.array([0.05, 0.05])
    res = env.step([0])
    assert res.info["success"] and res.done
    assert res.info["makespan"] == env.t
    # two extinguish bonuses + success bonus, no remaining strength penalty
    assert res.reward == pytest.approx(5.0 + 5.0 + 10.0)


def test_step_after_done_raises():
    env = FirefightingEnv()
    env.reset(_fire_team(), seed=0)
    for _ in range(50):
        res = env.step([0, 0, 0])
    assert res.done
    with pytest.raises(EnvError):
        env.step([0, 0, 0])


def test_trajectory_bit_identical():
    def run():
        env = FirefightingEnv()
        env.reset(_fire_team(), seed=11)
        rng = np.random.default_rng(5)
        log = []
        done = False
        while not done:
            res = env.step(rng.integers(0, 5, size=3))
            log.append((res.obs.copy(), res.reward))
            done = res.done
        return log

    for (o1, r1), (o2, r2) in zip(run(), run()):
        np.testing.assert_array_equal(o1, o2)
        assert r1 == r2


def test_fire_fuzz_invariants():
    env = FirefightingEnv()
    teams = fire_train_teams(3)
    rng = np.random.default_rng(0)
    for ep in range(200):
        env.reset(teams[ep % len(teams)], seed=ep)
        prev = env.fire_strength.copy()
        done = False
        while not done:
            res = env.step(rng.integers(0, 5, size=3))
            assert np.all(np.abs(env.pos) <= 1.0)
            assert np.all(env.fire_strength <= prev + 1e-15)
            assert np.all(env.fire_strength >= 0.0)
            prev = env.fire_strength.copy()
            done = res.done


# ------------------------------------------------------------------- mining

def test_mining_reset_quota():
    env = MiningEnv()
    env.reset(_mine_team(), seed=0)
    np.testing.assert_allclose(env.remaining_quota, [1.0, 1.0])


def test_mining_auto_mine_fills_to_capacity():
    env = MiningEnv()
    env.reset(_mine_team(), seed=0)
    env.pos = np.array([[-0.7, 0.7], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    env.vel = np.zeros((4, 2))
    env.step([0, 0, 0, 0])
    assert env.load[0, 0] == pytest.approx(0.1)
    assert env.load[0, 1] == 0.0
    assert np.all(env.load[1:] == 0.0)


def test_mining_zero_capacity_agent_never_loads():
    env = MiningEnv()
    env.reset(_mine_team(), seed=0)
    # agent 3 has capacity (0.5, 0.0); park it at zone 2
    env.pos = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.7, 0.7]])
    env.vel = np.zeros((4, 2))
    env.step([0, 0, 0, 0])
    assert env.load[3, 1] == 0.0
    assert env.load[3, 0] == 0.0


def test_mining_deposit_counts_and_rewards():
    env = MiningEnv()
    env.reset(_mine_team(), seed=0)
    env.load[0] = [0.1, 0.4]
    env.total_mined[:] = [0.1, 0.4]
    env.pos = np.array([[0.0, -0.7], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    env.vel = np.zeros((4, 2))
    res = env.step([0, 0, 0, 0])
    assert res.reward == pytest.approx(0.5 - 0.01)
    np.testing.assert_allclose(env.remaining_quota, [0.9, 0.6])
    assert np.all(env.load[0] == 0.0)


def test_mining_mass_balance_fuzz():
    env = MiningEnv()
    teams = load_builtin_teams("mining_train_teams.csv")
    rng = np.random.default_rng(1)
    for ep in range(100):
        env.reset(teams[ep % len(teams)], seed=ep)
        done = False
        prev_quota = env.remaining_quota.copy()
        while not done:
            res = env.step(rng.integers(0, 5, size=4))
            lhs = env.load.sum(axis=0) + env.deposited
            np.testing.assert_allclose(lhs, env.total_mined, atol=1e-12)
            assert np.all(env.remaining_quota <= prev_quota + 1e-15)
            assert np.all(np.abs(env.pos) <= 1.0)
            prev_quota = env.remaining_quota.copy()
            done = res.done


def test_mining_step_after_done_raises():
    env = MiningEnv()
    env.reset(_mine_team(), seed=0)
    done = False
    while not done:
        done = env.step([0, 0, 0, 0]).done
    with pytest.raises(EnvError):
        env.step([0, 0, 0, 0])


def test_mining_obs_shape_and_quota_feature():
    env = MiningEnv()
    obs = env.reset(_mine_team(), seed=0)
    assert obs.shape == (4, 18)
    np.testing.assert_allclose(obs[:, 10:12], 1.0)


def test_global_state_dims():
    fire = FirefightingEnv()
    fire.reset(_fire_team(), seed=0)
    assert fire.global_state().shape == (fire.state_dim,) == (24,)
    mine = MiningEnv()
    mine.reset(_mine_team(), seed=0)
    assert mine.global_state().shape == (mine.state_dim,) == (34,)
