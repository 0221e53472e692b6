"""Recurrent latent intention tracking with gated ego-action influence.

Per tracked agent, the update fuses the current scene token with the
previous latent vector through a recurrent cell.  The ego's recent motion,
expressed in the agent's frame, is encoded and injected additively into the
cell input behind a learned sigmoid gate, so agents the ego cannot
influence can have the channel shut off entirely.  When the gate is closed
the update reduces exactly to the plain recurrent step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import ConfigurationError
from .geometry import transform_points_to_frame, wrap_angle
from .nn import MLP, GRUCell, ParameterStore, Tensor, concat


@dataclass
class LatentBelief:
    agent_id: int
    vector: np.ndarray          # (D,), entries in (-1, 1)
    anchor: np.ndarray          # (3,) agent pose the belief is expressed against
    last_update: int


def ego_relative_action(ego_poses: np.ndarray, agent_anchor) -> np.ndarray:
    """Ego poses (T_o, 3) re-expressed in the agent anchor frame as (dx, dy, dheading)."""
    poses = np.asarray(ego_poses, dtype=float)
    xy = transform_points_to_frame(poses[:, 0:2], agent_anchor)
    dh = wrap_angle(poses[:, 2] - agent_anchor[2])
    return np.concatenate([xy, dh[:, None]], axis=1)


class BeliefUpdater:
    """The learned per-agent update network."""

    def __init__(self, config: RunConfig, seed: int | None = None):
        self.config = config
        d = config.hidden_dim
        action_width = config.option_steps * 3
        gate_width = 1 if config.scalar_gate else d
        self.store = ParameterStore(config.seed + 1 if seed is None else seed)
        self.action_mlp = MLP(self.store, "upd.action", [action_width, d, d])
        self.gate_mlp = MLP(self.store, "upd.gate", [2 * d, d, gate_width])
        self.cell = GRUCell(self.store, "upd.cell", d, d)

    def update(self, z: Tensor, prev: Tensor, actions: Tensor) -> Tensor:
        """One update for a batch of agents: (B, D) x (B, D) x (B, T_o*3) -> (B, D)."""
        if z.shape[-1] != self.config.hidden_dim:
            raise ConfigurationError("token width does not match the update network")
        if prev.shape != z.shape:
            raise ConfigurationError("previous belief width does not match token width")
        encoded = self.action_mlp(actions)
        gate = self.gate_mlp(concat([prev, encoded], axis=-1)).sigmoid()
        influence = gate * encoded
        return self.cell(z + influence, prev)


def initial_belief(z: np.ndarray) -> np.ndarray:
    """Squash an unbounded token into the recurrent range for initialization."""
    return np.tanh(z)


class BeliefTracker:
    """Per-episode map agent id -> latent belief with occlusion fallback."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.beliefs: dict[int, LatentBelief] = {}
        self.t = -1

    def track_step(
        self,
        updater: BeliefUpdater,
        tokens: list[tuple[int, np.ndarray, np.ndarray]],
        ego_poses: np.ndarray,
        t: int,
    ) -> dict[int, LatentBelief]:
        """Advance the tracker with the tokens visible at step ``t``.

        ``tokens`` holds (agent_id, token vector, agent anchor pose) for the
        tracked agents; agents absent from it keep their last belief until
        they have been gone longer than the forget horizon.
        """
        self.t = t
        seen = set()
        to_update = []
        for agent_id, vec, anchor in tokens:
            seen.add(agent_id)
            prev = self.beliefs.get(agent_id)
            if prev is None:
                self.beliefs[agent_id] = LatentBelief(
                    agent_id=agent_id, vector=initial_belief(vec), anchor=np.asarray(anchor),
                    last_update=t,
                )
            else:
                to_update.append((agent_id, vec, anchor, prev))
        if to_update:
            z = Tensor(np.stack([vec for _, vec, _, _ in to_update]))
            prev_vec = Tensor(np.stack([p.vector for *_, p in to_update]))
            acts = Tensor(
                np.stack(
                    [ego_relative_action(ego_poses, anchor).reshape(-1)
                     for _, _, anchor, _ in to_update]
                )
            )
            new = updater.update(z, prev_vec, acts).data
            for i, (agent_id, _, anchor, _) in enumerate(to_update):
                self.beliefs[agent_id] = LatentBelief(
                    agent_id=agent_id, vector=new[i].copy(), anchor=np.asarray(anchor),
                    last_update=t,
                )
        # evict agents unseen for longer than the forget horizon
        stale = [
            agent_id
            for agent_id, b in self.beliefs.items()
            if agent_id not in seen and t - b.last_update > self.config.forget_steps
        ]
        for agent_id in stale:
            del self.beliefs[agent_id]
        return dict(self.beliefs)
