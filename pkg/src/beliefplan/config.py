"""Run configuration: every tunable with its default, JSON round-trip, hashing.

Defaults mirror the reference operating point (16 observed agents, 20
history steps, 50x20 map polylines, hidden width 256, 6 modes, 80 future
steps, 20-step options at 0.1 s, 8 tracked agents, threshold 0.15, 100
search iterations, discount 0.8, exploration constant 100, the 11-option
table, and the published learning-rate/exploration schedules).  ``toy()``
is the scaled-down profile used by the test and demo suites.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    precision: str = "float64"

    # observation block shapes
    num_agents: int = 16                 # closest agents observed (incl. ego)
    history_steps: int = 20
    num_polylines: int = 50
    waypoints_per_polyline: int = 20
    tracked_agents: int = 8              # agents whose intentions are tracked

    # encoder
    hidden_dim: int = 256
    attention_layers: int = 3
    attention_heads: int = 8

    # prediction
    modes: int = 6
    future_steps: int = 80
    sigma_floor: float = 0.01
    scalar_gate: bool = False
    forget_steps: int = 10
    decoder_hidden: int = 64

    # planner
    option_steps: int = 20
    step_dt: float = 0.1
    prob_threshold: float = 0.15
    mode_filter: str = "threshold"       # "threshold" | "argmax"
    iterations: int = 100
    discount: float = 0.8
    exploration_const: float = 100.0
    weight_collision: float = 10.0
    weight_comfort: float = 0.1
    weight_route: float = 0.5
    weight_speed: float = 0.5
    corridor: float = 3.5
    replan_every_step: bool = False
    leaf_rollout: bool = True
    lateral_speeds: list[float] = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    accelerations: list[float] = field(default_factory=lambda: [-4.0, -2.0, 0.0, 1.0, 3.0])
    lateral_allowed_accels: list[float] = field(default_factory=lambda: [-2.0, 0.0, 1.0])

    # simulator
    episode_steps: int = 200
    sim_dt: float = 0.1
    ego_length: float = 4.5
    ego_width: float = 2.0
    obs_noise_std: float = 0.0

    # offline learning
    offline_lr: float = 2e-4
    offline_lr_halve_epochs: int = 5
    offline_epochs: int = 40
    offline_batch: int = 8
    offline_weight_decay: float = 0.01
    offline_constant_lr: bool = False

    # online learning
    online_lr: float = 3e-4
    online_lr_decay_factor: float = 0.7
    online_lr_decay_steps: int = 50_000
    online_steps: int = 300_000
    replay_capacity: int = 100_000
    batch_size: int = 128
    q_discount: float = 0.99
    target_sync: int = 500
    bptt_steps: int = 10
    explore_start: float = 0.8
    explore_end: float = 0.05
    hindsight_passes: int = 1
    eval_interval: int = 2000
    q_hidden: int = 64

    # fixed feature widths (position, heading, velocity, size, valid flag)
    AGENT_FEATURES = 8
    MAP_FEATURES = 6

    # ------------------------------------------------------------------
    @property
    def search_depth(self) -> int:
        return self.future_steps // self.option_steps

    @property
    def option_count(self) -> int:
        n = 0
        for a in self.accelerations:
            n += len(self.lateral_speeds) if a in self.lateral_allowed_accels else 1
        return n

    def validate(self) -> "RunConfig":
        if self.precision not in ("float64", "float32"):
            raise ConfigurationError(f"unknown precision {self.precision!r}")
        if self.hidden_dim % self.attention_heads != 0:
            raise ConfigurationError("attention head count must divide hidden_dim")
        if self.future_steps % self.option_steps != 0:
            raise ConfigurationError("option_steps must divide future_steps")
        if not (0.0 <= self.prob_threshold < 1.0):
            raise ConfigurationError("prob_threshold must lie in [0, 1)")
        if self.mode_filter not in ("threshold", "argmax"):
            raise ConfigurationError(f"unknown mode_filter {self.mode_filter!r}")
        if self.iterations < 1:
            raise ConfigurationError("planner needs at least one iteration")
        if self.modes < 1 or self.tracked_agents < 0:
            raise ConfigurationError("modes must be >= 1 and tracked_agents >= 0")
        if self.option_steps < 1 or self.episode_steps < 1:
            raise ConfigurationError("step counts must be positive")
        if len(set(self._option_table())) != len(self._option_table()):
            raise ConfigurationError("duplicate macro-action options")
        return self

    def _option_table(self) -> list[tuple[float, float]]:
        table = []
        for a in self.accelerations:
            laterals = self.lateral_speeds if a in self.lateral_allowed_accels else [0.0]
            for v_l in laterals:
                table.append((float(a), float(v_l)))
        return sorted(table)

    # ------------------------------------------------------------------
    @classmethod
    def toy(cls, **overrides) -> "RunConfig":
        """Desk-scale profile: small dims, short horizons, fast suites."""
        base = dict(
            num_agents=6,
            history_steps=5,
            num_polylines=6,
            waypoints_per_polyline=10,
            tracked_agents=4,
            hidden_dim=16,
            attention_layers=2,
            attention_heads=2,
            modes=3,
            future_steps=40,
            decoder_hidden=32,
            episode_steps=80,
            q_hidden=32,
            target_sync=50,
            batch_size=32,
            replay_capacity=5000,
            eval_interval=500,
        )
        base.update(overrides)
        return cls(**base).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported config schema {data.get('schema_version')}"
            )
        return cls(**data).validate()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"config {path} is not valid JSON: {err}") from err
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
