"""Reference-path geometry, macro-action kinematics, and oriented-box tests.

Paths are piecewise-linear polylines with exact per-segment projection;
there is no curvature coupling because per-segment curvature is zero.
All functions are pure and operate on immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, OffRouteError


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    out = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    out = np.where(out == -np.pi, np.pi, out)
    return float(out) if np.isscalar(a) or np.ndim(a) == 0 else out


def transform_points_to_frame(points: np.ndarray, pose) -> np.ndarray:
    """Express world points (..., 2) in the local frame of ``pose`` (x, y, heading)."""
    x, y, heading = pose
    c, s = np.cos(heading), np.sin(heading)
    d = np.asarray(points, dtype=float) - np.array([x, y])
    return np.stack([d[..., 0] * c + d[..., 1] * s, -d[..., 0] * s + d[..., 1] * c], axis=-1)


def transform_points_from_frame(points: np.ndarray, pose) -> np.ndarray:
    """Inverse of :func:`transform_points_to_frame`."""
    x, y, heading = pose
    c, s = np.cos(heading), np.sin(heading)
    p = np.asarray(points, dtype=float)
    return np.stack(
        [p[..., 0] * c - p[..., 1] * s + x, p[..., 0] * s + p[..., 1] * c + y], axis=-1
    )


def relative_pose(pose_ref, pose_other) -> tuple[float, float, float]:
    """Pose of ``pose_other`` expressed in the frame of ``pose_ref``."""
    dx, dy = transform_points_to_frame(np.asarray(pose_other[:2], dtype=float), pose_ref)
    return float(dx), float(dy), float(wrap_angle(pose_other[2] - pose_ref[2]))


@dataclass(frozen=True)
class CartesianState:
    x: float
    y: float
    heading: float
    v: float
    a: float = 0.0

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.v * np.cos(self.heading), self.v * np.sin(self.heading))


@dataclass(frozen=True)
class FrenetState:
    s: float
    s_dot: float
    l: float
    l_dot: float


@dataclass(frozen=True)
class MacroAction:
    """Constant longitudinal acceleration + constant lateral speed primitive."""

    a_s: float
    v_l: float
    steps: int
    dt: float = 0.1

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigurationError("macro-action length must be at least 1 step")


@dataclass(frozen=True)
class OrientedBox:
    cx: float
    cy: float
    heading: float
    length: float
    width: float

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ConfigurationError("box extents must be positive")

    def corners(self) -> np.ndarray:
        half = np.array(
            [
                [self.length / 2, self.width / 2],
                [self.length / 2, -self.width / 2],
                [-self.length / 2, -self.width / 2],
                [-self.length / 2, self.width / 2],
            ]
        )
        return transform_points_from_frame(half, (self.cx, self.cy, self.heading))


class ReferencePath:
    """Polyline with per-segment heading, cumulative arc length and speed limit."""

    def __init__(self, waypoints, speed_limit=8.0):
        wp = np.asarray(waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[0] < 2 or wp.shape[1] != 2:
            raise ConfigurationError("reference path needs at least two 2-D waypoints")
        seg = np.diff(wp, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0):
            raise ConfigurationError("reference path has zero-length segments")
        self.waypoints = wp
        self.seg_dir = seg / seg_len[:, None]
        self.seg_len = seg_len
        self.headings = np.arctan2(seg[:, 1], seg[:, 0])
        self.cum_s = np.concatenate([[0.0], np.cumsum(seg_len)])
        limits = np.asarray(speed_limit, dtype=float)
        if limits.ndim == 0:
            limits = np.full(len(seg_len), float(limits))
        if len(limits) != len(seg_len):
            raise ConfigurationError("speed limit profile must have one entry per segment")
        self.speed_limits = limits

    @property
    def length(self) -> float:
        return float(self.cum_s[-1])

    def segment_at(self, s) -> np.ndarray:
        """Index of the segment containing arc length ``s`` (clamped at ends)."""
        idx = np.searchsorted(self.cum_s, s, side="right") - 1
        return np.clip(idx, 0, len(self.seg_len) - 1)

    def point_at(self, s, l=0.0):
        """World position at arc length ``s`` offset ``l`` along the left normal."""
        s_arr = np.clip(np.atleast_1d(np.asarray(s, dtype=float)), 0.0, self.length)
        l_arr = np.broadcast_to(np.asarray(l, dtype=float), s_arr.shape)
        idx = self.segment_at(s_arr)
        t = np.clip(s_arr - self.cum_s[idx], 0.0, None)
        base = self.waypoints[idx] + self.seg_dir[idx] * t[:, None]
        normal = np.stack([-self.seg_dir[idx, 1], self.seg_dir[idx, 0]], axis=-1)
        out = base + normal * l_arr[:, None]
        return out[0] if np.ndim(s) == 0 else out

    def heading_at(self, s):
        idx = self.segment_at(np.clip(s, 0.0, self.length))
        return self.headings[idx]

    def speed_limit_at(self, s):
        idx = self.segment_at(np.clip(s, 0.0, self.length))
        return self.speed_limits[idx]


def project_to_frenet(
    state: CartesianState, path: ReferencePath, l_max: float | None = None
) -> tuple[FrenetState, bool]:
    """Project a Cartesian state onto the path.

    Returns the Frenet state and a clamp flag that is true when the nearest
    point lies beyond either end of the polyline.  Ties at segment junctions
    resolve to the smaller segment index.  If ``l_max`` is given and the
    lateral offset exceeds it, raises :class:`OffRouteError`.
    """
    p = np.array([state.x, state.y])
    rel = p - path.waypoints[:-1]
    t = np.einsum("ij,ij->i", rel, path.seg_dir)
    t_clamped = np.clip(t, 0.0, path.seg_len)
    foot = path.waypoints[:-1] + path.seg_dir * t_clamped[:, None]
    d2 = np.sum((foot - p) ** 2, axis=1)
    i = int(np.argmin(d2))  # first minimum wins on exact ties
    clamped = bool((i == 0 and t[0] < 0.0) or (i == len(path.seg_len) - 1 and t[-1] > path.seg_len[-1]))
    s = float(path.cum_s[i] + t_clamped[i])
    dvec = p - (path.waypoints[i] + path.seg_dir[i] * t_clamped[i])
    normal = np.array([-path.seg_dir[i, 1], path.seg_dir[i, 0]])
    l = float(dvec @ normal)
    if l_max is not None and abs(l) > l_max:
        raise OffRouteError(f"lateral offset {l:.2f} m exceeds corridor {l_max:.2f} m")
    vx, vy = state.velocity
    s_dot = float(vx * path.seg_dir[i, 0] + vy * path.seg_dir[i, 1])
    l_dot = float(vx * normal[0] + vy * normal[1])
    return FrenetState(s=s, s_dot=s_dot, l=l, l_dot=l_dot), clamped


def rollout_macro_action(start: FrenetState, action: MacroAction) -> list[FrenetState]:
    """Evaluate the constant-acceleration / constant-lateral-speed kinematics.

    Longitudinal speed is clamped at zero: once it reaches zero inside the
    macro-action it stays zero for the remainder (no reverse motion).
    Returns the states at tau = dt, 2*dt, ..., steps*dt.
    """
    s_arr, sd_arr, l_arr, ld_arr = rollout_arrays(start, action.a_s, action.v_l, action.steps, action.dt)
    return [
        FrenetState(s=float(s_arr[k]), s_dot=float(sd_arr[k]), l=float(l_arr[k]), l_dot=float(ld_arr[k]))
        for k in range(action.steps)
    ]


def rollout_arrays(start: FrenetState, a_s: float, v_l: float, steps: int, dt: float):
    """Vectorized closed form behind :func:`rollout_macro_action`."""
    tau = dt * np.arange(1, steps + 1)
    s0, sd0 = start.s, max(start.s_dot, 0.0)
    if a_s < 0.0 and sd0 + a_s * steps * dt < 0.0:
        t_stop = sd0 / (-a_s)
        s_stop = s0 + sd0 * t_stop + 0.5 * a_s * t_stop * t_stop
        moving = tau < t_stop
        sd = np.where(moving, sd0 + a_s * tau, 0.0)
        s = np.where(moving, s0 + sd0 * tau + 0.5 * a_s * tau * tau, s_stop)
    else:
        sd = sd0 + a_s * tau
        s = s0 + sd0 * tau + 0.5 * a_s * tau * tau
    l = start.l + v_l * tau
    ld = np.full(steps, v_l)
    return s, sd, l, ld


def frenet_to_cartesian(
    states, path: ReferencePath, a_s: float = 0.0
) -> tuple[list[CartesianState], bool]:
    """Map Frenet states back to world coordinates.

    Heading combines the segment heading with the local motion direction
    atan2(l_dot, s_dot); speed is the Frenet-rate magnitude.  Arc lengths
    beyond the path ends are clamped and flagged.
    """
    s = np.array([f.s for f in states])
    l = np.array([f.l for f in states])
    sd = np.array([f.s_dot for f in states])
    ld = np.array([f.l_dot for f in states])
    clamped = bool(np.any(s < 0.0) or np.any(s > path.length))
    s_c = np.clip(s, 0.0, path.length)
    pos = path.point_at(s_c, l)
    base_heading = path.heading_at(s_c)
    heading = wrap_angle(base_heading + np.arctan2(ld, np.where((sd == 0) & (ld == 0), 1.0, sd)))
    heading = np.where((sd == 0) & (ld == 0), base_heading, heading)
    v = np.hypot(sd, ld)
    out = [
        CartesianState(x=float(pos[k, 0]), y=float(pos[k, 1]), heading=float(heading[k]),
                       v=float(v[k]), a=a_s)
        for k in range(len(states))
    ]
    return out, clamped


# ---------------------------------------------------------------------------
# oriented-box overlap


def obb_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test; boundary contact counts as overlap."""
    return bool(
        obb_overlap_batch(
            np.array([[a.cx, a.cy]]), np.array([a.heading]), np.array([[a.length, a.width]]),
            np.array([[b.cx, b.cy]]), np.array([b.heading]), np.array([[b.length, b.width]]),
        )[0]
    )


def obb_overlap_batch(centers_a, headings_a, dims_a, centers_b, headings_b, dims_b) -> np.ndarray:
    """Vectorized SAT over N box pairs; returns a boolean array of length N.

    For two rectangles the four candidate axes are the edge normals, i.e. the
    local x/y axes of each box.  Boxes overlap iff the projected extents
    intersect on all four axes (touching counts).
    """
    ca = np.asarray(centers_a, dtype=float)
    cb = np.asarray(centers_b, dtype=float)
    ha = np.asarray(headings_a, dtype=float)
    hb = np.asarray(headings_b, dtype=float)
    da = np.asarray(dims_a, dtype=float) / 2.0
    db = np.asarray(dims_b, dtype=float) / 2.0

    cos_a, sin_a = np.cos(ha), np.sin(ha)
    cos_b, sin_b = np.cos(hb), np.sin(hb)
    # axes: (N, 4, 2) = [ax_a_x, ax_a_y, ax_b_x, ax_b_y]
    axes = np.stack(
        [
            np.stack([cos_a, sin_a], axis=-1),
            np.stack([-sin_a, cos_a], axis=-1),
            np.stack([cos_b, sin_b], axis=-1),
            np.stack([-sin_b, cos_b], axis=-1),
        ],
        axis=1,
    )
    delta = cb - ca  # (N, 2)
    dist = np.abs(np.einsum("nkd,nd->nk", axes, delta))  # (N, 4)

    # projection radius of each box on each axis
    ua = np.stack([cos_a, sin_a], axis=-1)
    va = np.stack([-sin_a, cos_a], axis=-1)
    ub = np.stack([cos_b, sin_b], axis=-1)
    vb = np.stack([-sin_b, cos_b], axis=-1)

    def radius(axes_, u, v, half):
        pu = np.abs(np.einsum("nkd,nd->nk", axes_, u)) * half[:, 0:1]
        pv = np.abs(np.einsum("nkd,nd->nk", axes_, v)) * half[:, 1:2]
        return pu + pv

    ra = radius(axes, ua, va, da)
    rb = radius(axes, ub, vb, db)
    return np.all(dist <= ra + rb, axis=1)


def obb_separation_margin(a: OrientedBox, b: OrientedBox) -> float:
    """min over axes of (sum of radii - center distance); >= 0 iff overlap.

    Magnitude near zero means the configuration is within numerical reach of
    boundary contact; useful for guard bands in sampling comparisons.
    """
    ca = np.array([[a.cx, a.cy]])
    cb = np.array([[b.cx, b.cy]])
    ha, hb = np.array([a.heading]), np.array([b.heading])
    da = np.array([[a.length, a.width]]) / 2.0
    db = np.array([[b.length, b.width]]) / 2.0
    cos_a, sin_a = np.cos(ha), np.sin(ha)
    cos_b, sin_b = np.cos(hb), np.sin(hb)
    axes = np.stack(
        [
            np.stack([cos_a, sin_a], axis=-1),
            np.stack([-sin_a, cos_a], axis=-1),
            np.stack([cos_b, sin_b], axis=-1),
            np.stack([-sin_b, cos_b], axis=-1),
        ],
        axis=1,
    )
    delta = cb - ca
    dist = np.abs(np.einsum("nkd,nd->nk", axes, delta))
    ua = np.stack([cos_a, sin_a], axis=-1)
    va = np.stack([-sin_a, cos_a], axis=-1)
    ub = np.stack([cos_b, sin_b], axis=-1)
    vb = np.stack([-sin_b, cos_b], axis=-1)
    ra = np.abs(np.einsum("nkd,nd->nk", axes, ua)) * da[:, 0:1] + np.abs(
        np.einsum("nkd,nd->nk", axes, va)
    ) * da[:, 1:2]
    rb = np.abs(np.einsum("nkd,nd->nk", axes, ub)) * db[:, 0:1] + np.abs(
        np.einsum("nkd,nd->nk", axes, vb)
    ) * db[:, 1:2]
    return float(np.min(ra + rb - dist))


def point_in_obb(points: np.ndarray, box: OrientedBox) -> np.ndarray:
    """Boolean mask of points (N, 2) inside (or on) the box."""
    local = transform_points_to_frame(points, (box.cx, box.cy, box.heading))
    return (np.abs(local[:, 0]) <= box.length / 2.0) & (np.abs(local[:, 1]) <= box.width / 2.0)
