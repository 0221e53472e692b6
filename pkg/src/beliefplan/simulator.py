"""Episode environment: replayed and reactive agents, observations, reward.

One simulator instance runs one episode, single-threaded.  Replayed agents
reproduce their scenario track exactly; reactive agents follow their own
route under the longitudinal reactive law, treating whichever vehicle is
ahead in their corridor (including the ego) as the leader.  The per-step
reward decomposes exactly as collision + progress - 0.01 * expert gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import UsageError
from .geometry import (
    CartesianState,
    OrientedBox,
    ReferencePath,
    obb_overlap_batch,
    project_to_frenet,
    transform_points_to_frame,
    wrap_angle,
)
from .observation import LANE_TYPES, AGENT_FEATURES, MAP_FEATURES, Observation
from .scenario import AgentTrack, Scenario, idm_accel

EXPERT_WEIGHT = 0.01
COLLISION_PENALTY = -10.0
GOAL_MARGIN = 0.25
LEADER_CORRIDOR = 2.2


@dataclass
class StepResult:
    reward: float
    r_col: float
    r_prog: float
    r_expert: float
    observation: Observation | None
    done: bool
    reason: str | None


@dataclass
class EpisodeState:
    t: int
    ego: CartesianState
    agent_states: dict[int, np.ndarray]
    cumulative_reward: float = 0.0
    done: bool = False
    reason: str | None = None


@dataclass
class _ReactiveState:
    path: ReferencePath
    s: float
    v: float


def _state_row(ego: CartesianState) -> np.ndarray:
    vx, vy = ego.velocity
    return np.array([ego.x, ego.y, ego.heading, vx, vy])


class Simulator:
    def __init__(self, scenario: Scenario, config: RunConfig):
        self.scenario = scenario
        self.config = config
        self.path = scenario.ego_path()
        self.dt = scenario.dt
        ego = scenario.ego
        self.state = EpisodeState(
            t=0,
            ego=CartesianState(ego.x, ego.y, ego.heading, ego.v),
            agent_states={a.agent_id: a.states[0].copy() for a in scenario.agents},
        )
        self._reactive: dict[int, _ReactiveState] = {}
        for a in scenario.agents:
            if a.reactive:
                rp = ReferencePath(a.route, ego.speed_limit)
                f, _ = project_to_frenet(
                    CartesianState(a.states[0, 0], a.states[0, 1], a.states[0, 2],
                                   float(np.hypot(a.states[0, 3], a.states[0, 4]))),
                    rp,
                )
                self._reactive[a.agent_id] = _ReactiveState(path=rp, s=f.s, v=max(f.s_dot, 0.0))
        # actual realized state history, one row per timestep, per vehicle
        self._trace: dict[int, list[np.ndarray]] = {
            a.agent_id: [a.states[0].copy()] for a in scenario.agents
        }
        self._ego_trace: list[np.ndarray] = [_state_row(self.state.ego)]

    # ------------------------------------------------------------------
    @property
    def done(self) -> bool:
        return self.state.done

    def ego_frenet(self):
        return project_to_frenet(self.state.ego, self.path)[0]

    def agent_speed(self, agent_id: int) -> float:
        st = self.state.agent_states[agent_id]
        return float(np.hypot(st[3], st[4]))

    def realized_positions(self, agent_id: int) -> np.ndarray:
        """Actual (x, y) rows recorded so far for one agent."""
        return np.array([row[0:2] for row in self._trace[agent_id]])

    def ego_positions(self) -> np.ndarray:
        return np.array([row[0:2] for row in self._ego_trace])

    def _agent_present(self, a: AgentTrack, t: int) -> bool:
        return 0 <= t < len(a.valid) and bool(a.valid[t])

    # ------------------------------------------------------------------
    def step(self, ego_states: list[CartesianState]) -> StepResult:
        """Advance the episode along the provided ego states.

        Executes the states in order, stopping early on termination, and
        returns rewards summed over the executed primitive steps.
        """
        if self.state.done:
            raise UsageError("cannot step a finished episode")
        if not ego_states:
            raise UsageError("step requires at least one ego state")
        total = {"r_col": 0.0, "r_prog": 0.0, "r_expert": 0.0}
        for ego_next in ego_states:
            prev = self.state.ego
            self.state.t += 1
            self.state.ego = ego_next
            self._advance_agents()
            self._ego_trace.append(_state_row(ego_next))
            r_prog = float(np.hypot(ego_next.x - prev.x, ego_next.y - prev.y))
            expert_pos = self.scenario.ego.expert[min(self.state.t, self.scenario.duration)]
            r_expert = float(np.hypot(ego_next.x - expert_pos[0], ego_next.y - expert_pos[1]))
            done, reason = self._check_termination()
            r_col = COLLISION_PENALTY if reason == "collision" else 0.0
            total["r_col"] += r_col
            total["r_prog"] += r_prog
            total["r_expert"] += r_expert
            self.state.cumulative_reward += r_col + r_prog - EXPERT_WEIGHT * r_expert
            if done:
                self.state.done = True
                self.state.reason = reason
                break
        reward = total["r_col"] + total["r_prog"] - EXPERT_WEIGHT * total["r_expert"]
        obs = None if self.state.done else self.observe()
        return StepResult(
            reward=reward, r_col=total["r_col"], r_prog=total["r_prog"],
            r_expert=total["r_expert"], observation=obs,
            done=self.state.done, reason=self.state.reason,
        )

    def _advance_agents(self) -> None:
        t = self.state.t
        for a in self.scenario.agents:
            if a.reactive:
                rs = self._reactive[a.agent_id]
                gap, lead_v = self._leader_for(a, rs)
                acc = idm_accel(rs.v, rs.path.speed_limits[0], gap, lead_v)
                rs.v = max(0.0, rs.v + acc * self.dt)
                rs.s = min(rs.s + rs.v * self.dt, rs.path.length)
                pos = rs.path.point_at(rs.s)
                heading = float(rs.path.heading_at(rs.s))
                row = np.array(
                    [pos[0], pos[1], heading, rs.v * np.cos(heading), rs.v * np.sin(heading)]
                )
            else:
                u = min(t, len(a.states) - 1)
                row = a.states[u].copy()
            self.state.agent_states[a.agent_id] = row
            self._trace[a.agent_id].append(row)

    def _leader_for(self, me: AgentTrack, rs: _ReactiveState):
        """Nearest vehicle ahead of a reactive agent within its corridor."""
        best_gap, best_v = None, None
        candidates = [(np.array([self.state.ego.x, self.state.ego.y]),
                       self.state.ego.v, self.config.ego_length)]
        for other in self.scenario.agents:
            if other.agent_id == me.agent_id:
                continue
            if not self._agent_present(other, self.state.t):
                continue
            st = self.state.agent_states[other.agent_id]
            candidates.append((st[0:2], float(np.hypot(st[3], st[4])), other.length))
        for pos, v, lead_len in candidates:
            diffs = pos - rs.path.waypoints[:-1]
            tproj = np.clip(np.einsum("ij,ij->i", diffs, rs.path.seg_dir), 0.0, rs.path.seg_len)
            foot = rs.path.waypoints[:-1] + rs.path.seg_dir * tproj[:, None]
            k = int(np.argmin(np.sum((foot - pos) ** 2, axis=1)))
            normal = np.array([-rs.path.seg_dir[k, 1], rs.path.seg_dir[k, 0]])
            l = float((pos - foot[k]) @ normal)
            s_cand = float(rs.path.cum_s[k] + tproj[k])
            if abs(l) < LEADER_CORRIDOR and s_cand > rs.s + 0.1:
                gap = s_cand - rs.s - (lead_len + me.length) / 2.0
                if best_gap is None or gap < best_gap:
                    best_gap, best_v = gap, v
        return best_gap, best_v

    # ------------------------------------------------------------------
    def collision_now(self) -> bool:
        t = self.state.t
        present = [a for a in self.scenario.agents if self._agent_present(a, t)]
        if not present:
            return False
        e = self.state.ego
        n = len(present)
        centers = np.array([self.state.agent_states[a.agent_id][0:2] for a in present])
        headings = np.array([self.state.agent_states[a.agent_id][2] for a in present])
        dims = np.array([[a.length, a.width] for a in present])
        hits = obb_overlap_batch(
            np.tile([[e.x, e.y]], (n, 1)), np.full(n, e.heading),
            np.tile([[self.config.ego_length, self.config.ego_width]], (n, 1)),
            centers, headings, dims,
        )
        return bool(np.any(hits))

    def _check_termination(self):
        if self.collision_now():
            return True, "collision"
        frenet = self.ego_frenet()
        if abs(frenet.l) > self.config.corridor:
            return True, "off-route"
        if frenet.s >= self.path.length - GOAL_MARGIN:
            return True, "goal"
        if self.state.t >= self.scenario.duration:
            return True, "timeout"
        return False, None

    def check_termination(self):
        """Public view of the termination predicate for the current state."""
        return self._check_termination()

    # ------------------------------------------------------------------
    def observe(self) -> Observation:
        cfg = self.config
        t = self.state.t
        ego = self.state.ego
        th = cfg.history_steps

        visible = [a for a in self.scenario.agents if a.visible(t)]
        dists = [
            float(np.hypot(self.state.agent_states[a.agent_id][0] - ego.x,
                           self.state.agent_states[a.agent_id][1] - ego.y))
            for a in visible
        ]
        order = sorted(range(len(visible)), key=lambda i: (dists[i], visible[i].agent_id))
        chosen = [visible[i] for i in order[: cfg.num_agents - 1]]

        n_a = cfg.num_agents
        feats = np.zeros((n_a, th, AGENT_FEATURES))
        step_valid = np.zeros((n_a, th), dtype=bool)
        agent_valid = np.zeros(n_a, dtype=bool)
        anchors = np.zeros((n_a, 3))
        ids = np.full(n_a, -1, dtype=int)
        sizes = np.zeros((n_a, 2))

        def fill_row(row, hist_rows, hist_valid, anchor, size, noise):
            anchors[row] = anchor
            sizes[row] = size
            agent_valid[row] = True
            for j in range(th):
                u = t - (th - 1 - j)
                if u < 0 or u >= len(hist_rows) or not hist_valid(u):
                    continue
                st = hist_rows[u]
                pos = st[0:2] + noise[j]
                local = transform_points_to_frame(pos, anchor)
                v_loc = transform_points_to_frame(pos + st[3:5], anchor) - local
                feats[row, j] = (
                    local[0], local[1], wrap_angle(st[2] - anchor[2]),
                    v_loc[0], v_loc[1], size[0], size[1], 1.0,
                )
                step_valid[row, j] = True

        zero_noise = np.zeros((th, 2))
        ids[0] = 0
        fill_row(
            0, self._ego_trace, lambda u: True,
            np.array([ego.x, ego.y, ego.heading]),
            (cfg.ego_length, cfg.ego_width), zero_noise,
        )

        noise_std = cfg.obs_noise_std
        for row, a in enumerate(chosen, start=1):
            cur = self.state.agent_states[a.agent_id]
            if noise_std > 0:
                rng = np.random.default_rng([self.scenario.seed, 104729, t, a.agent_id])
                noise = rng.normal(0.0, noise_std, size=(th, 2))
            else:
                noise = zero_noise
            anchor = np.array([cur[0] + noise[-1, 0], cur[1] + noise[-1, 1], cur[2]])
            ids[row] = a.agent_id
            fill_row(row, self._trace[a.agent_id], a.visible, anchor,
                     (a.length, a.width), noise)

        # map block: nearest polylines, resampled to a fixed waypoint count
        n_m, n_w = cfg.num_polylines, cfg.waypoints_per_polyline
        map_feats = np.zeros((n_m, n_w, MAP_FEATURES))
        point_valid = np.zeros((n_m, n_w), dtype=bool)
        poly_valid = np.zeros(n_m, dtype=bool)
        map_anchors = np.zeros((n_m, 3))
        ego_pos = np.array([ego.x, ego.y])
        ranked = sorted(
            self.scenario.polylines,
            key=lambda poly: (float(np.min(np.hypot(*(poly.waypoints - ego_pos).T))),
                              poly.polyline_id),
        )
        for row, poly in enumerate(ranked[:n_m]):
            wp = poly.waypoints
            if len(wp) > n_w:
                idx = np.linspace(0, len(wp) - 1, n_w).round().astype(int)
                wp = wp[idx]
            seg = np.diff(wp, axis=0)
            seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
            headings = np.concatenate([seg_heading, seg_heading[-1:]])
            anchor = np.array([wp[0, 0], wp[0, 1], headings[0]])
            map_anchors[row] = anchor
            poly_valid[row] = True
            local = transform_points_to_frame(wp, anchor)
            onehot = np.zeros(3)
            onehot[LANE_TYPES.index(poly.lane_type)] = 1.0
            k = len(wp)
            map_feats[row, :k, 0:2] = local
            map_feats[row, :k, 2] = wrap_angle(headings - anchor[2])
            map_feats[row, :k, 3:6] = onehot
            point_valid[row, :k] = True

        return Observation(
            t=t,
            agent_features=feats, agent_step_valid=step_valid, agent_valid=agent_valid,
            agent_anchors=anchors, agent_ids=ids, agent_sizes=sizes,
            map_features=map_feats, map_point_valid=point_valid,
            polyline_valid=poly_valid, map_anchors=map_anchors,
        )
