"""Scenario generation, JSON round-trips, and episode stepping semantics."""

import numpy as np
import pytest

from beliefplan.config import RunConfig
from beliefplan.errors import ConfigurationError, UsageError
from beliefplan.geometry import CartesianState
from beliefplan.scenario import (
    KINDS,
    Scenario,
    generate_scenario,
    generate_suite,
    idm_accel,
)
from beliefplan.simulator import Simulator


@pytest.fixture(scope="module")
def toy_config():
    return RunConfig.toy()


def replay_expert(sim: Simulator):
    """Drive the ego exactly along the expert log."""
    sc = sim.scenario
    headings = np.zeros(sc.duration + 1)
    diffs = np.diff(sc.ego.expert, axis=0)
    seg_heading = np.arctan2(diffs[:, 1], diffs[:, 0])
    headings[:-1] = seg_heading
    headings[-1] = seg_heading[-1] if len(seg_heading) else 0.0
    results = []
    while not sim.done:
        t = sim.state.t + 1
        pos = sc.ego.expert[t]
        v = float(np.linalg.norm(diffs[t - 1]) / sc.dt) if t - 1 < len(diffs) else 0.0
        res = sim.step([CartesianState(pos[0], pos[1], headings[t - 1], v)])
        results.append(res)
    return results


# ---------------------------------------------------------------------------
# generation


def test_same_seed_gives_byte_identical_scenario():
    a = generate_scenario("intersection", 7)
    b = generate_scenario("intersection", 7)
    assert a.to_json() == b.to_json()


def test_different_seeds_differ():
    a = generate_scenario("merge", 1)
    b = generate_scenario("merge", 2)
    assert a.to_json() != b.to_json()


def test_unknown_kind_rejected():
    with pytest.raises(ConfigurationError):
        generate_scenario("roundabout", 0)


def test_intersection_has_crossing_agent_with_future_branch():
    for seed in range(10):
        sc = generate_scenario("intersection", seed)
        intent_agents = [a for a in sc.agents if a.intent]
        assert len(intent_agents) >= 1
        a = intent_agents[0]
        assert 0 < a.reveal_step < a.branch_step < sc.duration
        # crossing geometry: travels in -y through the ego lane x band
        assert abs(a.states[0, 1]) > 5.0


def test_intent_branches_share_prefix_and_diverge_after_branch():
    # two seeds with forced opposite intents: regenerate until we see both
    sc_go, sc_yield = None, None
    for seed in range(40):
        sc = generate_scenario("intersection", seed, {"occlusion_prob": 0.0, "follower_prob": 0.0})
        a = sc.agents[0]
        if a.intent == "go" and sc_go is None:
            sc_go = sc
        if a.intent == "yield" and sc_yield is None:
            sc_yield = sc
    assert sc_go is not None and sc_yield is not None
    a_yield = sc_yield.agents[0]
    # yielding agent stops outside the ego lane corridor
    final_speed = np.hypot(a_yield.states[-1, 3], a_yield.states[-1, 4])
    assert final_speed < 0.05
    assert a_yield.states[-1, 1] > 2.0  # stopped short of the lane


def test_zero_agents_scenario_valid():
    sc = generate_scenario("lane-follow", 3, {"num_intent_agents": 0, "follower_prob": 0.0})
    assert sc.agents == []
    cfg = RunConfig.toy(episode_steps=sc.duration)
    sim = Simulator(sc, cfg)
    obs = sim.observe()
    assert obs.agent_valid[0] and not obs.agent_valid[1:].any()


def test_json_roundtrip(tmp_path):
    sc = generate_scenario("merge", 11)
    path = tmp_path / "scenario.json"
    sc.save(path)
    sc2 = Scenario.load(path)
    assert sc2.to_json() == sc.to_json()


def test_suite_cycles_kinds():
    suite = generate_suite(list(KINDS), 6, base_seed=100)
    assert [s.kind for s in suite] == list(KINDS) + list(KINDS)
    assert [s.seed for s in suite] == list(range(100, 106))


# ---------------------------------------------------------------------------
# stepping


def test_reward_identity_and_expert_replay(toy_config):
    sc = generate_scenario("intersection", 21)
    sim = Simulator(sc, toy_config)
    results = replay_expert(sim)
    assert results, "episode produced no steps"
    for res in results:
        assert res.reward == pytest.approx(
            res.r_col + res.r_prog - 0.01 * res.r_expert, abs=1e-12
        )
        assert res.r_expert == pytest.approx(0.0, abs=1e-9)  # ego tracks the log
    assert sim.state.reason in ("goal", "timeout")


def test_stationary_ego_with_stationary_expert_zero_reward():
    sc = generate_scenario("lane-follow", 5, {"num_intent_agents": 0, "follower_prob": 0.0})
    sc.ego.expert[:] = sc.ego.expert[0]  # expert never moves
    sim = Simulator(sc, RunConfig.toy())
    res = sim.step([CartesianState(sc.ego.x, sc.ego.y, sc.ego.heading, 0.0)])
    assert res.reward == 0.0 and res.r_prog == 0.0 and res.r_expert == 0.0


def test_collision_gives_penalty_and_terminates():
    sc = generate_scenario("lane-follow", 9, {"follower_prob": 0.0})
    leader = sc.agents[0]
    target = leader.states[5, 0:2]
    sim = Simulator(sc, RunConfig.toy())
    # teleport the ego into the leader at its step-5 position
    for t in range(1, 6):
        res = sim.step([CartesianState(target[0], target[1], 0.0, 0.0)])
        if res.done:
            break
    assert res.done and res.reason == "collision"
    assert res.r_col == -10.0


def test_step_after_done_raises():
    sc = generate_scenario("lane-follow", 9, {"follower_prob": 0.0})
    leader = sc.agents[0]
    sim = Simulator(sc, RunConfig.toy())
    target = leader.states[3, 0:2]
    for _ in range(4):
        res = sim.step([CartesianState(target[0], target[1], 0.0, 0.0)])
        if res.done:
            break
    assert sim.done
    with pytest.raises(UsageError):
        sim.step([CartesianState(0.0, 0.0, 0.0, 0.0)])


def test_goal_termination():
    sc = generate_scenario("lane-follow", 13, {"num_intent_agents": 0, "follower_prob": 0.0})
    sim = Simulator(sc, RunConfig.toy())
    end = sc.ego.route[-1]
    res = sim.step([CartesianState(end[0], end[1], 0.0, 5.0)])
    assert res.done and res.reason == "goal"


def test_timeout_termination():
    sc = generate_scenario("lane-follow", 13, {"num_intent_agents": 0, "follower_prob": 0.0})
    sim = Simulator(sc, RunConfig.toy())
    while not sim.done:
        res = sim.step([CartesianState(sim.state.ego.x, sim.state.ego.y, 0.0, 0.0)])
    assert res.reason == "timeout"
    assert sim.state.t == sc.duration


def test_off_route_termination():
    sc = generate_scenario("lane-follow", 13, {"num_intent_agents": 0, "follower_prob": 0.0})
    sim = Simulator(sc, RunConfig.toy())
    res = sim.step([CartesianState(5.0, 5.0, 0.0, 1.0)])
    assert res.done and res.reason == "off-route"


def test_replayed_agents_follow_track_exactly_regardless_of_ego():
    sc = generate_scenario("intersection", 31, {"follower_prob": 0.0})
    cfg = RunConfig.toy()
    agent = sc.agents[0]

    def run(ego_speed):
        sim = Simulator(sc, cfg)
        rows = [sim.state.agent_states[agent.agent_id].copy()]
        x = sc.ego.x
        while not sim.done and sim.state.t < 30:
            x += ego_speed * sc.dt
            sim.step([CartesianState(x, 0.0, 0.0, ego_speed)])
            rows.append(sim.state.agent_states[agent.agent_id].copy())
        return np.array(rows)

    slow, fast = run(1.0), run(6.0)
    n = min(len(slow), len(fast))
    assert np.array_equal(slow[:n], fast[:n])
    assert np.array_equal(slow[:n], agent.states[:n])


def test_reactive_agent_does_not_rear_end_stationary_leader():
    # follower starts beyond braking distance of a stopped leader
    sc = generate_scenario("lane-follow", 17, {"num_intent_agents": 0, "follower_prob": 1.0})
    followers = [a for a in sc.agents if a.reactive]
    assert followers, "expected a reactive follower"
    cfg = RunConfig.toy()
    sim = Simulator(sc, cfg)
    # park the ego 25 m ahead of the follower and keep it there
    f0 = followers[0].states[0]
    ego_x = f0[0] + 25.0
    collided = False
    while not sim.done:
        res = sim.step([CartesianState(ego_x, 0.0, 0.0, 0.0)])
        collided = collided or res.reason == "collision"
    assert not collided
    # follower halted at a positive gap
    gap = ego_x - sim.state.agent_states[followers[0].agent_id][0]
    assert gap > (cfg.ego_length + followers[0].length) / 2.0


def test_episode_deterministic_given_same_actions():
    sc = generate_scenario("intersection", 23)
    cfg = RunConfig.toy(obs_noise_std=0.05)

    def run():
        sim = Simulator(sc, cfg)
        rewards, feats = [], []
        x = 0.0
        for _ in range(20):
            if sim.done:
                break
            x += 0.4
            res = sim.step([CartesianState(x, 0.0, 0.0, 4.0)])
            rewards.append(res.reward)
            if res.observation is not None:
                feats.append(res.observation.agent_features.copy())
        return rewards, feats

    r1, f1 = run()
    r2, f2 = run()
    assert r1 == r2
    assert all(np.array_equal(a, b) for a, b in zip(f1, f2))


# ---------------------------------------------------------------------------
# observation contents


def test_observation_own_frame_identity():
    sc = generate_scenario("intersection", 41, {"occlusion_prob": 0.0})
    cfg = RunConfig.toy(obs_noise_std=0.1)
    sim = Simulator(sc, cfg)
    x = 0.0
    for _ in range(6):
        x += 0.5
        sim.step([CartesianState(x, 0.0, 0.0, 5.0)])
    obs = sim.observe()
    for row in range(obs.num_agents):
        if obs.agent_valid[row]:
            # latest valid step of a present agent sits at the origin of its frame
            assert obs.agent_step_valid[row, -1]
            assert np.allclose(obs.agent_features[row, -1, 0:2], 0.0, atol=1e-12)


def test_observation_padding_fully_masked():
    sc = generate_scenario("lane-follow", 3, {"num_intent_agents": 0, "follower_prob": 0.0})
    sim = Simulator(sc, RunConfig.toy())
    obs = sim.observe()
    assert obs.agent_valid[0]
    assert not obs.agent_valid[1:].any()
    assert not obs.agent_step_valid[1:].any()
    assert np.all(obs.agent_features[1:] == 0.0)
    assert obs.agent_ids[0] == 0 and np.all(obs.agent_ids[1:] == -1)


def test_scripted_occlusion_hides_agent_but_preserves_history():
    params = {"occlusion_prob": 1.0, "follower_prob": 0.0}
    sc = generate_scenario("intersection", 47, params)
    agent = sc.agents[0]
    assert agent.occlusion, "occlusion window expected"
    lo, hi = agent.occlusion[0]
    cfg = RunConfig.toy(history_steps=8)
    sim = Simulator(sc, cfg)
    x = 0.0
    for t in range(1, lo + 2):
        x += 0.3
        sim.step([CartesianState(x, 0.0, 0.0, 3.0)])
    obs = sim.observe()  # now inside the occlusion window
    assert sim.state.t == lo + 1
    assert agent.agent_id not in obs.agent_ids.tolist()  # hidden now

    # step past the window, the agent reappears with occluded steps masked
    while sim.state.t <= hi:
        x += 0.3
        sim.step([CartesianState(x, 0.0, 0.0, 3.0)])
    obs = sim.observe()
    row = obs.agent_ids.tolist().index(agent.agent_id)
    t_now = sim.state.t
    for j in range(cfg.history_steps):
        u = t_now - (cfg.history_steps - 1 - j)
        if u < 0:
            continue
        expected = not (lo <= u < hi)
        assert obs.agent_step_valid[row, j] == expected


def test_idm_free_road_accelerates_toward_limit():
    assert idm_accel(2.0, 8.0, None, None) > 0
    assert idm_accel(8.0, 8.0, None, None) == pytest.approx(0.0)
    assert idm_accel(2.0, 8.0, 4.0, 0.0) < 0  # close gap forces braking
