"""Observation container shared by the simulator and the encoder.

Every element is expressed in its own local frame (the agent's or
polyline's anchor pose), with the anchor recorded alongside, so encodings
are invariant to rigid transforms of the whole scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AGENT_FEATURES = 8  # x, y, heading, vx, vy, length, width, valid
MAP_FEATURES = 6    # x, y, heading, one-hot(lane, edge, route)

LANE_TYPES = ("lane", "edge", "route")


@dataclass
class Observation:
    t: int
    agent_features: np.ndarray     # (N_a, T_h, 8) in each agent's current frame
    agent_step_valid: np.ndarray   # (N_a, T_h) bool
    agent_valid: np.ndarray        # (N_a,) bool
    agent_anchors: np.ndarray      # (N_a, 3) world pose of each agent's frame
    agent_ids: np.ndarray          # (N_a,) int, -1 for padding
    agent_sizes: np.ndarray        # (N_a, 2) length, width
    map_features: np.ndarray       # (N_m, N_w, 6) in each polyline's origin frame
    map_point_valid: np.ndarray    # (N_m, N_w) bool
    polyline_valid: np.ndarray     # (N_m,) bool
    map_anchors: np.ndarray        # (N_m, 3)

    @property
    def num_agents(self) -> int:
        return self.agent_features.shape[0]

    @property
    def num_polylines(self) -> int:
        return self.map_features.shape[0]
