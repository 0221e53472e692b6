"""Synthetic driving scenarios and their on-disk JSON format.

A scenario is a replayable world: map polylines, per-agent tracks on a
shared 0.1 s clock, an ego route with an expert log, and scripted
occlusion windows.  Non-ego agents with latent intents follow one of two
pre-authored trajectory branches.  The branches share a common prefix and
separate only at a scripted branch step; the realized branch is additionally
foreshadowed by a short, transient speed dip at an earlier reveal step, so
an observer with memory can disambiguate intent before the branch while a
memoryless observer cannot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import ReferencePath

SCENARIO_SCHEMA_VERSION = 1

KINDS = ("intersection", "merge", "lane-follow")

# intelligent-driver-model constants (longitudinal reactive law)
IDM_TIME_HEADWAY = 1.5
IDM_MAX_ACCEL = 2.0
IDM_COMFORT_BRAKE = 3.0
IDM_MIN_GAP = 2.0


def idm_accel(v: float, v_desired: float, gap: float | None, lead_v: float | None) -> float:
    """Longitudinal acceleration toward the desired speed behind a leader."""
    free = 1.0 - (v / max(v_desired, 1e-6)) ** 4
    if gap is None:
        return IDM_MAX_ACCEL * free
    gap = max(gap, 0.1)
    dv = v - (lead_v if lead_v is not None else 0.0)
    s_star = IDM_MIN_GAP + max(
        0.0, v * IDM_TIME_HEADWAY + v * dv / (2.0 * np.sqrt(IDM_MAX_ACCEL * IDM_COMFORT_BRAKE))
    )
    return IDM_MAX_ACCEL * (free - (s_star / gap) ** 2)


@dataclass
class MapPolyline:
    polyline_id: int
    lane_type: str  # "lane" | "edge" | "route"
    speed_limit: float
    waypoints: np.ndarray  # (K, 2)


@dataclass
class AgentTrack:
    agent_id: int
    length: float
    width: float
    reactive: bool
    intent: str                  # realized intent label ("" when not applicable)
    reveal_step: int             # transient-cue step (-1 when none)
    branch_step: int             # trajectory-branch step (-1 when none)
    states: np.ndarray           # (T+1, 5): x, y, heading, vx, vy
    valid: np.ndarray            # (T+1,) bool
    occlusion: list[list[int]] = field(default_factory=list)  # [start, end) step windows
    route: np.ndarray | None = None  # reactive agents: geometric path to follow

    def visible(self, t: int) -> bool:
        if t < 0 or t >= len(self.valid) or not self.valid[t]:
            return False
        return not any(lo <= t < hi for lo, hi in self.occlusion)


@dataclass
class EgoSpec:
    x: float
    y: float
    heading: float
    v: float
    speed_limit: float
    route: np.ndarray            # (K, 2)
    expert: np.ndarray           # (T+1, 2) logged positions


@dataclass
class Scenario:
    kind: str
    seed: int
    dt: float
    duration: int                # steps; state arrays carry duration+1 entries
    polylines: list[MapPolyline]
    agents: list[AgentTrack]
    ego: EgoSpec
    schema_version: int = SCENARIO_SCHEMA_VERSION

    @property
    def scenario_id(self) -> str:
        return f"{self.kind}-{self.seed}"

    def ego_path(self) -> ReferencePath:
        return ReferencePath(self.ego.route, self.ego.speed_limit)

    # -- JSON ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "seed": self.seed,
            "dt": self.dt,
            "duration": self.duration,
            "polylines": [
                {
                    "polyline_id": p.polyline_id,
                    "lane_type": p.lane_type,
                    "speed_limit": p.speed_limit,
                    "waypoints": p.waypoints.tolist(),
                }
                for p in self.polylines
            ],
            "agents": [
                {
                    "agent_id": a.agent_id,
                    "length": a.length,
                    "width": a.width,
                    "reactive": a.reactive,
                    "intent": a.intent,
                    "reveal_step": a.reveal_step,
                    "branch_step": a.branch_step,
                    "states": a.states.tolist(),
                    "valid": [bool(v) for v in a.valid],
                    "occlusion": [list(w) for w in a.occlusion],
                    "route": None if a.route is None else a.route.tolist(),
                }
                for a in self.agents
            ],
            "ego": {
                "x": self.ego.x,
                "y": self.ego.y,
                "heading": self.ego.heading,
                "v": self.ego.v,
                "speed_limit": self.ego.speed_limit,
                "route": self.ego.route.tolist(),
                "expert": self.ego.expert.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if data.get("schema_version") != SCENARIO_SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported scenario schema {data.get('schema_version')}"
            )
        polylines = [
            MapPolyline(
                polyline_id=p["polyline_id"],
                lane_type=p["lane_type"],
                speed_limit=p["speed_limit"],
                waypoints=np.asarray(p["waypoints"], dtype=float),
            )
            for p in data["polylines"]
        ]
        agents = [
            AgentTrack(
                agent_id=a["agent_id"],
                length=a["length"],
                width=a["width"],
                reactive=a["reactive"],
                intent=a["intent"],
                reveal_step=a["reveal_step"],
                branch_step=a["branch_step"],
                states=np.asarray(a["states"], dtype=float),
                valid=np.asarray(a["valid"], dtype=bool),
                occlusion=[list(w) for w in a["occlusion"]],
                route=None if a["route"] is None else np.asarray(a["route"], dtype=float),
            )
            for a in data["agents"]
        ]
        e = data["ego"]
        ego = EgoSpec(
            x=e["x"], y=e["y"], heading=e["heading"], v=e["v"],
            speed_limit=e["speed_limit"],
            route=np.asarray(e["route"], dtype=float),
            expert=np.asarray(e["expert"], dtype=float),
        )
        return cls(
            kind=data["kind"], seed=data["seed"], dt=data["dt"],
            duration=data["duration"], polylines=polylines, agents=agents, ego=ego,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"scenario {path} is not valid JSON: {err}") from err
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# generation

DEFAULT_PARAMS = {
    "duration": 80,
    "dt": 0.1,
    "route_length": 48.0,
    "speed_limit": 8.0,
    "ego_v0": 5.0,
    "num_intent_agents": 1,
    "follower_prob": 0.4,
    "occlusion_prob": 0.5,
    "lane_half_width": 1.75,
}


def _speed_profile_positions(start: float, speeds: np.ndarray, dt: float, direction: float = 1.0):
    """Integrate a per-step speed profile into positions along one axis."""
    pos = np.empty(len(speeds) + 1)
    pos[0] = start
    pos[1:] = start + direction * np.cumsum(speeds) * dt
    return pos


def _dipped_speeds(base: float, steps: int, reveal: int, dip: float, dip_len: int) -> np.ndarray:
    """Constant speed with a smooth transient dip starting at ``reveal``."""
    v = np.full(steps, base)
    for k in range(dip_len):
        t = reveal + k
        if 0 <= t < steps:
            v[t] = base - dip * np.sin(np.pi * (k + 1) / (dip_len + 1))
    return v


def _brake_from(speeds: np.ndarray, start: int, decel: float, dt: float) -> np.ndarray:
    v = speeds.copy()
    for t in range(start, len(v)):
        v[t] = max(0.0, v[t - 1] - decel * dt if t > 0 else v[t] - decel * dt)
    return v


def _track_from_line(
    p0: np.ndarray, direction: np.ndarray, speeds: np.ndarray, dt: float
) -> np.ndarray:
    """States (T+1, 5) moving along a straight line with a speed profile."""
    steps = len(speeds)
    heading = float(np.arctan2(direction[1], direction[0]))
    dist = np.concatenate([[0.0], np.cumsum(speeds) * dt])
    xy = p0[None, :] + dist[:, None] * direction[None, :]
    v_pad = np.concatenate([speeds, speeds[-1:]])
    out = np.zeros((steps + 1, 5))
    out[:, 0:2] = xy
    out[:, 2] = heading
    out[:, 3] = v_pad * direction[0]
    out[:, 4] = v_pad * direction[1]
    return out


def _expert_log(
    route: ReferencePath,
    ego_v0: float,
    agents: list[AgentTrack],
    duration: int,
    dt: float,
    corridor_block: float = 2.2,
) -> np.ndarray:
    """Omniscient longitudinal log: reactive law against realized tracks,
    with a virtual stop line ahead of any corridor crossing that is occupied
    soon."""
    # precompute, per agent, projection of its realized track onto the route
    proj = []
    for a in agents:
        rel = a.states[:, 0:2]
        s_list = np.empty(len(rel))
        l_list = np.empty(len(rel))
        for i, p in enumerate(rel):
            diffs = p - route.waypoints[:-1]
            t = np.clip(np.einsum("ij,ij->i", diffs, route.seg_dir), 0.0, route.seg_len)
            foot = route.waypoints[:-1] + route.seg_dir * t[:, None]
            d2 = np.sum((foot - p) ** 2, axis=1)
            k = int(np.argmin(d2))
            s_list[i] = route.cum_s[k] + t[k]
            normal = np.array([-route.seg_dir[k, 1], route.seg_dir[k, 0]])
            l_list[i] = (p - foot[k]) @ normal
        proj.append((s_list, l_list))

    lookahead = int(round(2.5 / dt))
    s, v = 0.0, ego_v0
    log = np.zeros((duration + 1, 2))
    log[0] = route.point_at(0.0)
    for t in range(1, duration + 1):
        gap, lead_v = None, None
        for a, (s_list, l_list) in zip(agents, proj):
            u = min(t, len(s_list) - 1)
            # current in-corridor leader
            if abs(l_list[u]) < corridor_block and s_list[u] > s + 0.5:
                g = s_list[u] - s - a.length / 2.0
                if gap is None or g < gap:
                    gap, lead_v = g, float(np.hypot(a.states[u, 3], a.states[u, 4]))
            # upcoming corridor occupancy -> virtual stop line
            for w in range(u, min(u + lookahead, len(s_list))):
                if abs(l_list[w]) < corridor_block and s_list[w] > s + 0.5:
                    g = s_list[w] - 4.0 - s
                    if gap is None or g < gap:
                        gap, lead_v = g, 0.0
                    break
        acc = idm_accel(v, route.speed_limits[0], gap, lead_v)
        v = max(0.0, v + acc * dt)
        s = min(s + v * dt, route.length)
        log[t] = route.point_at(s)
    return log


def generate_scenario(kind: str, seed: int, params: dict | None = None) -> Scenario:
    """Deterministically synthesize one scenario of the given kind."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown scenario kind {kind!r}; expected one of {KINDS}")
    p = dict(DEFAULT_PARAMS)
    if params:
        unknown = set(params) - set(DEFAULT_PARAMS)
        if unknown:
            raise ConfigurationError(f"unknown scenario params: {sorted(unknown)}")
        p.update(params)
    if p["duration"] < 10:
        raise ConfigurationError("scenario duration must be at least 10 steps")

    rng = np.random.default_rng([seed, KINDS.index(kind)])
    duration = int(p["duration"])
    dt = float(p["dt"])
    length = float(p["route_length"])
    limit = float(p["speed_limit"])
    half = float(p["lane_half_width"])

    route = np.array([[0.0, 0.0], [length, 0.0]])
    polylines = [
        MapPolyline(0, "lane", limit, np.array([[-8.0, 0.0], [length + 10.0, 0.0]])),
        MapPolyline(1, "edge", limit, np.array([[-8.0, half], [length + 10.0, half]])),
        MapPolyline(2, "edge", limit, np.array([[-8.0, -half], [length + 10.0, -half]])),
        MapPolyline(3, "route", limit, route.copy()),
    ]
    agents: list[AgentTrack] = []
    next_id = 1

    n_intent = int(p["num_intent_agents"])
    for _ in range(max(0, n_intent)):
        intent_agent, extra_lines = _make_intent_agent(kind, rng, next_id, duration, dt, p)
        agents.append(intent_agent)
        for line in extra_lines:
            line.polyline_id = len(polylines)
            polylines.append(line)
        next_id += 1

    if n_intent >= 0 and rng.uniform() < p["follower_prob"]:
        # reactive follower behind the ego in the same lane
        start_x = -rng.uniform(10.0, 14.0)
        v0 = rng.uniform(3.5, 5.0)
        speeds = np.full(duration, v0)
        states = _track_from_line(np.array([start_x, 0.0]), np.array([1.0, 0.0]), speeds, dt)
        agents.append(
            AgentTrack(
                agent_id=next_id, length=4.2, width=1.9, reactive=True, intent="",
                reveal_step=-1, branch_step=-1, states=states,
                valid=np.ones(duration + 1, dtype=bool),
                route=np.array([[start_x - 2.0, 0.0], [length + 20.0, 0.0]]),
            )
        )
        next_id += 1

    ego = EgoSpec(
        x=0.0, y=0.0, heading=0.0, v=float(p["ego_v0"]), speed_limit=limit,
        route=route, expert=np.zeros((duration + 1, 2)),
    )
    path = ReferencePath(route, limit)
    ego.expert = _expert_log(path, ego.v, agents, duration, dt)
    return Scenario(
        kind=kind, seed=seed, dt=dt, duration=duration,
        polylines=polylines, agents=agents, ego=ego,
    )


def _make_intent_agent(kind, rng, agent_id, duration, dt, p):
    """Author the two intent branches, pick one, and return its track."""
    half = float(p["lane_half_width"])
    length = float(p["route_length"])
    reveal = int(rng.integers(8, 15))
    dip_len = 6
    dip = rng.uniform(1.8, 2.4)
    extra_lines: list[MapPolyline] = []

    if kind == "intersection":
        v_c = rng.uniform(4.6, 6.2)
        jx = rng.uniform(0.42, 0.62) * length
        stop_y = half + 2.6
        branch = int(rng.integers(reveal + dip_len + 6, reveal + dip_len + 14))
        brake = 3.0
        # choose start so braking from the branch step stops at the stop line
        dip_loss = dip * dt * sum(np.sin(np.pi * (k + 1) / (dip_len + 1)) for k in range(dip_len))
        y0 = stop_y + v_c ** 2 / (2.0 * brake) + v_c * branch * dt - dip_loss
        intent = "go" if rng.uniform() < 0.5 else "yield"
        base = _dipped_speeds(v_c, duration, reveal, dip if intent == "yield" else 0.0, dip_len)
        speeds = _brake_from(base, branch, brake, dt) if intent == "yield" else base
        states = _track_from_line(np.array([jx, y0]), np.array([0.0, -1.0]), speeds, dt)
        extra_lines.append(
            MapPolyline(-1, "lane", v_c + 2.0, np.array([[jx, y0 + 8.0], [jx, -25.0]]))
        )
    elif kind == "merge":
        v_c = rng.uniform(4.2, 5.6)
        mx = rng.uniform(0.45, 0.60) * length
        approach = 24.0
        angle = 0.18  # rad, shallow merge
        start = np.array([mx - approach * np.cos(angle), -approach * np.sin(angle)])
        direction = np.array([np.cos(angle), np.sin(angle)])
        branch = int(rng.integers(reveal + dip_len + 6, reveal + dip_len + 12))
        intent = "go" if rng.uniform() < 0.5 else "yield"
        base = _dipped_speeds(v_c, duration, reveal, dip if intent == "yield" else 0.0, dip_len)
        if intent == "yield":
            speeds = _brake_from(base, branch, 1.6, dt)
            speeds = np.maximum(speeds, v_c * 0.35)
        else:
            speeds = base.copy()
            speeds[branch:] = np.minimum(v_c + 2.0, speeds[branch:] + 1.2)
        # follow the angled ramp, then bend onto the lane (piecewise line walk)
        ramp = ReferencePath(
            np.array([start, [mx, 0.0], [mx + 60.0, 0.0]]), v_c + 2.0
        )
        dist = np.concatenate([[0.0], np.cumsum(speeds) * dt])
        xy = ramp.point_at(np.clip(dist, 0.0, ramp.length))
        headings = ramp.heading_at(np.clip(dist, 0.0, ramp.length))
        v_pad = np.concatenate([speeds, speeds[-1:]])
        states = np.zeros((duration + 1, 5))
        states[:, 0:2] = xy
        states[:, 2] = headings
        states[:, 3] = v_pad * np.cos(headings)
        states[:, 4] = v_pad * np.sin(headings)
        extra_lines.append(
            MapPolyline(-1, "lane", v_c + 2.0, np.array([start - direction * 6.0, [mx, 0.0]]))
        )
    else:  # lane-follow
        v_c = rng.uniform(4.0, 5.2)
        start_x = rng.uniform(14.0, 20.0)
        branch = int(rng.integers(reveal + dip_len + 8, reveal + dip_len + 16))
        intent = "cruise" if rng.uniform() < 0.5 else "brake"
        base = _dipped_speeds(v_c, duration, reveal, dip if intent == "brake" else 0.0, dip_len)
        speeds = _brake_from(base, branch, 1.8, dt) if intent == "brake" else base
        states = _track_from_line(np.array([start_x, 0.0]), np.array([1.0, 0.0]), speeds, dt)

    occlusion = []
    if rng.uniform() < p["occlusion_prob"]:
        occ_start = reveal + dip_len + int(rng.integers(1, 5))
        occ_len = int(rng.integers(5, 9))
        occlusion.append([occ_start, min(occ_start + occ_len, duration - 2)])

    return (
        AgentTrack(
            agent_id=agent_id, length=4.4, width=1.9, reactive=False, intent=intent,
            reveal_step=reveal, branch_step=branch, states=states,
            valid=np.ones(duration + 1, dtype=bool), occlusion=occlusion,
        ),
        extra_lines,
    )


def generate_suite(kinds, count: int, base_seed: int, params: dict | None = None) -> list[Scenario]:
    """Deterministic list of scenarios cycling through ``kinds``."""
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        out.append(generate_scenario(kind, base_seed + i, params))
    return out
