"""Scene encoder: agent-history GRU, map MLP + masked max-pool, and
relational attention over local-frame tokens.

Each token is built purely from features in its own anchor frame and
attends to others through a learned feed-forward encoding of relative
anchor poses, so the whole encoding is invariant to rigid transforms of
the scene and, in particular, to ego motion between frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .nn import (
    MLP,
    GRUCell,
    LayerNorm,
    MultiHeadAttention,
    ParameterStore,
    Tensor,
)
from .observation import AGENT_FEATURES, MAP_FEATURES, Observation


@dataclass
class SceneEncoding:
    tokens: Tensor               # (N_a + N_m, D)
    anchors: np.ndarray          # (N_a + N_m, 3)
    token_valid: np.ndarray      # (N_a + N_m,) bool
    agent_ids: np.ndarray        # (N_a,) ids for the leading agent rows
    num_agent_tokens: int

    @property
    def ego_token(self) -> Tensor:
        return self.tokens[0]

    def agent_row(self, agent_id: int) -> int | None:
        hits = np.nonzero(self.agent_ids == agent_id)[0]
        return int(hits[0]) if len(hits) else None

    def tracked_agents(self, limit: int) -> list[tuple[int, int]]:
        """(agent_id, row) of up to ``limit`` valid non-ego agents, nearest first."""
        ego_xy = self.anchors[0, 0:2]
        rows = [
            r
            for r in range(1, self.num_agent_tokens)
            if self.token_valid[r] and self.agent_ids[r] >= 0
        ]
        rows.sort(key=lambda r: (float(np.hypot(*(self.anchors[r, 0:2] - ego_xy))),
                                 int(self.agent_ids[r])))
        return [(int(self.agent_ids[r]), r) for r in rows[:limit]]


def relative_pose_features(anchors: np.ndarray) -> np.ndarray:
    """(n, n, 4) features of anchor j seen from anchor i: dx, dy, sin/cos dheading."""
    xy = anchors[:, 0:2]
    headings = anchors[:, 2]
    delta = xy[None, :, :] - xy[:, None, :]
    c, s = np.cos(headings), np.sin(headings)
    dx = delta[..., 0] * c[:, None] + delta[..., 1] * s[:, None]
    dy = -delta[..., 0] * s[:, None] + delta[..., 1] * c[:, None]
    dh = headings[None, :] - headings[:, None]
    return np.stack([dx, dy, np.sin(dh), np.cos(dh)], axis=-1)


class ObservationEncoder:
    def __init__(self, config: RunConfig, seed: int | None = None):
        self.config = config
        d = config.hidden_dim
        self.store = ParameterStore(config.seed if seed is None else seed)
        self.history_gru = GRUCell(self.store, "enc.history", AGENT_FEATURES, d)
        self.map_mlp = MLP(self.store, "enc.map", [MAP_FEATURES, d, d])
        self.pe_mlp = MLP(self.store, "enc.pe", [4, d, d])
        self.layers = []
        for i in range(config.attention_layers):
            self.layers.append(
                {
                    "norm_att": LayerNorm(self.store, f"enc.l{i}.norm_att", d),
                    "att": MultiHeadAttention(self.store, f"enc.l{i}.att", d, config.attention_heads),
                    "norm_ff": LayerNorm(self.store, f"enc.l{i}.norm_ff", d),
                    "ff": MLP(self.store, f"enc.l{i}.ff", [d, 2 * d, d]),
                }
            )

    # ------------------------------------------------------------------
    def encode_history(self, obs: Observation) -> Tensor:
        """Final GRU hidden per agent; steps with invalid masks are skipped."""
        n_a, t_h, _ = obs.agent_features.shape
        h = Tensor(np.zeros((n_a, self.config.hidden_dim)))
        for j in range(t_h):
            x = Tensor(obs.agent_features[:, j, :])
            m = Tensor(obs.agent_step_valid[:, j:j + 1].astype(float))
            h_new = self.history_gru(x, h)
            h = m * h_new + (1.0 - m) * h
        return h

    def encode_map(self, obs: Observation) -> Tensor:
        """Per-waypoint MLP, then max over valid waypoints of each polyline."""
        from .nn import MASK_BIAS

        out = self.map_mlp(Tensor(obs.map_features))  # (N_m, N_w, D)
        bias = np.where(obs.map_point_valid, 0.0, MASK_BIAS)[:, :, None]
        pooled = (out + Tensor(bias)).max(axis=1)
        keep = Tensor(obs.polyline_valid.astype(float)[:, None])
        return pooled * keep

    def relational_attention(
        self, tokens: Tensor, anchors: np.ndarray, token_valid: np.ndarray
    ) -> Tensor:
        n = tokens.shape[0]
        pe = self.pe_mlp(Tensor(relative_pose_features(anchors)))  # (n, n, D)
        mask = np.broadcast_to(token_valid[None, :], (n, n))
        keep = Tensor(token_valid.astype(float)[:, None])
        x = tokens
        for layer in self.layers:
            xn = layer["norm_att"](x)
            kv = xn.reshape(1, n, self.config.hidden_dim) + pe
            x = x + layer["att"](xn, kv, mask)
            x = x + layer["ff"](layer["norm_ff"](x))
            x = x * keep
        return x

    def encode_scene(self, obs: Observation) -> SceneEncoding:
        agent_tokens = self.encode_history(obs)
        map_tokens = self.encode_map(obs)
        from .nn import concat

        tokens = concat([agent_tokens, map_tokens], axis=0)
        anchors = np.concatenate([obs.agent_anchors, obs.map_anchors], axis=0)
        valid = np.concatenate([obs.agent_valid, obs.polyline_valid])
        z = self.relational_attention(tokens, anchors, valid)
        return SceneEncoding(
            tokens=z,
            anchors=anchors,
            token_valid=valid,
            agent_ids=obs.agent_ids,
            num_agent_tokens=obs.num_agents,
        )
