"""Frenet conversions, macro-action kinematics, and box-overlap oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefplan.errors import OffRouteError
from beliefplan.geometry import (
    CartesianState,
    FrenetState,
    MacroAction,
    OrientedBox,
    ReferencePath,
    frenet_to_cartesian,
    obb_overlap,
    obb_separation_margin,
    point_in_obb,
    project_to_frenet,
    rollout_macro_action,
    transform_points_from_frame,
    transform_points_to_frame,
    wrap_angle,
)


def straight_path(length=100.0):
    return ReferencePath([[0.0, 0.0], [length, 0.0]])


def random_curved_path(rng, n_segments=8):
    """Gentle polyline: heading changes <= ~20 deg per segment."""
    pts = [np.zeros(2)]
    heading = rng.uniform(-np.pi, np.pi)
    for _ in range(n_segments):
        heading += rng.uniform(-0.35, 0.35)
        step = rng.uniform(6.0, 12.0)
        pts.append(pts[-1] + step * np.array([np.cos(heading), np.sin(heading)]))
    return ReferencePath(np.array(pts))


# ---------------------------------------------------------------------------
# projection


def test_project_axis_aligned_case():
    path = straight_path()
    state = CartesianState(x=3.0, y=2.0, heading=0.0, v=4.0)
    f, clamped = project_to_frenet(state, path)
    assert not clamped
    assert f.s == pytest.approx(3.0)
    assert f.l == pytest.approx(2.0)
    assert f.s_dot == pytest.approx(4.0)
    assert f.l_dot == pytest.approx(0.0)


def test_project_point_on_path_has_zero_lateral():
    rng = np.random.default_rng(0)
    path = random_curved_path(rng)
    s = 0.4 * path.length
    p = path.point_at(s)
    f, _ = project_to_frenet(CartesianState(p[0], p[1], 0.0, 0.0), path)
    assert abs(f.l) < 1e-9
    assert f.s == pytest.approx(s, abs=1e-9)


def test_project_beyond_ends_clamps_with_flag():
    path = straight_path(10.0)
    f, clamped = project_to_frenet(CartesianState(-2.0, 0.5, 0.0, 1.0), path)
    assert clamped and f.s == 0.0
    f, clamped = project_to_frenet(CartesianState(14.0, -0.5, 0.0, 1.0), path)
    assert clamped and f.s == pytest.approx(10.0)


def test_project_outside_corridor_raises():
    path = straight_path()
    with pytest.raises(OffRouteError):
        project_to_frenet(CartesianState(5.0, 7.0, 0.0, 1.0), path, l_max=4.0)


def test_project_then_invert_roundtrip_curved():
    rng = np.random.default_rng(7)
    for _ in range(100):
        path = random_curved_path(rng)
        # sample points near the path with margins from junctions
        i = rng.integers(0, len(path.seg_len))
        t = rng.uniform(0.5, path.seg_len[i] - 0.5)
        l = rng.uniform(-2.0, 2.0)
        s = path.cum_s[i] + t
        p = path.point_at(s, l)
        f, clamped = project_to_frenet(CartesianState(p[0], p[1], 0.0, 0.0), path)
        assert not clamped
        back = path.point_at(f.s, f.l)
        assert np.linalg.norm(back - p) < 1e-6


def test_frenet_to_cartesian_straight_and_roundtrip():
    path = straight_path()
    states, clamped = frenet_to_cartesian([FrenetState(11.0, 5.0, 2.0, 0.0)], path)
    assert not clamped
    assert states[0].x == pytest.approx(11.0)
    assert states[0].y == pytest.approx(2.0)
    assert states[0].heading == pytest.approx(0.0)  # l_dot = 0 -> path heading
    assert states[0].v == pytest.approx(5.0)

    # straight-path round trip should be essentially exact
    rng = np.random.default_rng(3)
    for _ in range(50):
        f = FrenetState(rng.uniform(1, 99), rng.uniform(0, 10), rng.uniform(-3, 3), rng.uniform(-1, 1))
        [c], _ = frenet_to_cartesian([f], path)
        f2, _ = project_to_frenet(c, path)
        assert abs(f.s - f2.s) < 1e-9 and abs(f.l - f2.l) < 1e-9
        assert abs(f.s_dot - f2.s_dot) < 1e-9 and abs(f.l_dot - f2.l_dot) < 1e-9


def test_cartesian_roundtrip_curved_paths():
    rng = np.random.default_rng(11)
    for _ in range(100):
        path = random_curved_path(rng)
        i = rng.integers(0, len(path.seg_len))
        t = rng.uniform(0.5, path.seg_len[i] - 0.5)
        f = FrenetState(
            s=float(path.cum_s[i] + t),
            s_dot=rng.uniform(0, 10),
            l=rng.uniform(-2, 2),
            l_dot=rng.uniform(-1, 1),
        )
        [c], _ = frenet_to_cartesian([f], path)
        f2, _ = project_to_frenet(c, path)
        p1 = path.point_at(f.s, f.l)
        p2 = path.point_at(f2.s, f2.l)
        assert np.linalg.norm(p1 - p2) < 1e-6


# ---------------------------------------------------------------------------
# macro-action rollout


def test_rollout_matches_closed_form_direct_case():
    # s(0)=0, s_dot(0)=5, a_s=1, dt=0.1: at k=20 (tau=2) s = 5*2 + 0.5*1*2^2 = 12, s_dot=7
    states = rollout_macro_action(FrenetState(0.0, 5.0, 0.0, 0.0), MacroAction(1.0, 0.0, 20, 0.1))
    assert states[19].s == pytest.approx(12.0)
    assert states[19].s_dot == pytest.approx(7.0)
    for k, st_ in enumerate(states, start=1):
        tau = 0.1 * k
        assert st_.s == pytest.approx(5 * tau + 0.5 * tau * tau, abs=1e-12)


def test_rollout_zero_action_uniform_motion():
    states = rollout_macro_action(FrenetState(2.0, 3.0, 1.5, 0.0), MacroAction(0.0, 0.0, 10, 0.1))
    for k, st_ in enumerate(states, start=1):
        assert st_.s == pytest.approx(2.0 + 3.0 * 0.1 * k, abs=1e-12)
        assert st_.l == pytest.approx(1.5)
        assert st_.s_dot == pytest.approx(3.0)


def test_rollout_velocity_clamp_freezes_position():
    # s_dot(0)=1, a_s=-4: stop at tau=0.25, s_stop = 1*0.25 - 2*0.0625 = 0.125
    states = rollout_macro_action(FrenetState(0.0, 1.0, 0.0, 0.0), MacroAction(-4.0, 0.0, 10, 0.1))
    assert states[0].s_dot == pytest.approx(0.6)
    assert states[1].s_dot == pytest.approx(0.2)
    for st_ in states[2:]:
        assert st_.s_dot == 0.0
        assert st_.s == pytest.approx(0.125)
    s_values = [st_.s for st_ in states]
    assert all(b >= a for a, b in zip(s_values, s_values[1:]))


def test_rollout_lateral_constant_speed():
    states = rollout_macro_action(FrenetState(0.0, 5.0, -1.0, 0.0), MacroAction(0.0, 0.5, 20, 0.1))
    for k, st_ in enumerate(states, start=1):
        assert st_.l == pytest.approx(-1.0 + 0.5 * 0.1 * k, abs=1e-12)
        assert st_.l_dot == pytest.approx(0.5)


@given(
    a_s=st.sampled_from([-4.0, -2.0, 0.0, 1.0, 3.0]),
    v_l=st.sampled_from([-1.0, 0.0, 1.0]),
    s_dot0=st.floats(min_value=0.0, max_value=15.0),
)
@settings(max_examples=60, deadline=None)
def test_rollout_s_monotone_nondecreasing(a_s, v_l, s_dot0):
    states = rollout_macro_action(FrenetState(0.0, s_dot0, 0.0, 0.0), MacroAction(a_s, v_l, 20, 0.1))
    s_values = [0.0] + [st_.s for st_ in states]
    assert all(b >= a - 1e-12 for a, b in zip(s_values, s_values[1:]))
    assert all(st_.s_dot >= 0.0 for st_ in states)


# ---------------------------------------------------------------------------
# oriented boxes


def test_identical_boxes_overlap():
    b = OrientedBox(1.0, 2.0, 0.3, 4.0, 2.0)
    assert obb_overlap(b, b)


def test_distant_unit_squares_do_not_overlap():
    a = OrientedBox(0.0, 0.0, 0.0, 1.0, 1.0)
    b = OrientedBox(10.0, 0.0, 0.0, 1.0, 1.0)
    assert not obb_overlap(a, b)


def test_boundary_contact_counts_as_overlap():
    a = OrientedBox(0.0, 0.0, 0.0, 2.0, 2.0)
    b = OrientedBox(2.0, 0.0, 0.0, 2.0, 2.0)  # edges touch at x=1
    assert obb_overlap(a, b)


def _sampling_oracle(a: OrientedBox, b: OrientedBox, step=0.01) -> bool:
    """Dense point-grid oracle: sample box a's area and test membership in b."""
    xs = np.arange(-a.length / 2, a.length / 2 + step / 2, step)
    ys = np.arange(-a.width / 2, a.width / 2 + step / 2, step)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    world = transform_points_from_frame(pts, (a.cx, a.cy, a.heading))
    return bool(np.any(point_in_obb(world, b)))


def test_obb_against_sampling_oracle():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(1000):
        a = OrientedBox(
            rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-np.pi, np.pi),
            rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.0),
        )
        b = OrientedBox(
            rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-np.pi, np.pi),
            rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.0),
        )
        # skip configurations within one grid cell of boundary contact
        if abs(obb_separation_margin(a, b)) < 0.02:
            continue
        checked += 1
        assert obb_overlap(a, b) == _sampling_oracle(a, b)
    assert checked > 900


@given(data=st.data())
@settings(max_examples=100, deadline=None)
def test_obb_overlap_symmetric(data):
    def draw_box():
        return OrientedBox(
            data.draw(st.floats(-3, 3)), data.draw(st.floats(-3, 3)),
            data.draw(st.floats(-3.14, 3.14)),
            data.draw(st.floats(0.2, 4.0)), data.draw(st.floats(0.2, 3.0)),
        )

    a, b = draw_box(), draw_box()
    assert obb_overlap(a, b) == obb_overlap(b, a)


# ---------------------------------------------------------------------------
# frames


def test_frame_transforms_invert():
    rng = np.random.default_rng(23)
    for _ in range(100):
        pose = (rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-np.pi, np.pi))
        pts = rng.normal(size=(6, 2)) * 10
        back = transform_points_from_frame(transform_points_to_frame(pts, pose), pose)
        assert np.allclose(back, pts, atol=1e-12)


def test_wrap_angle_range():
    angles = np.array([-np.pi, np.pi, 3 * np.pi, -3 * np.pi, 0.1, 2 * np.pi])
    wrapped = wrap_angle(angles)
    assert np.all(wrapped > -np.pi) and np.all(wrapped <= np.pi)
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
