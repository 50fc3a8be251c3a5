import math

import numpy as np
import pytest

from wolf.dynamics import compute_kincache, foot_jacobians, gravity_forces
from wolf.estimation import (compute_icp, detect_contacts, estimate_base_twist,
                             fit_terrain_plane, horizontal_frame,
                             support_polygon)
from wolf.model import Configuration, canonical_model
from wolf.rotations import quat_from_axis_angle, quat_mul, rpy_of


def euler_zyx_quat(roll, pitch, yaw):
    qz = quat_from_axis_angle([0, 0, 1], yaw)
    qy = quat_from_axis_angle([0, 1, 0], pitch)
    qx = quat_from_axis_angle([1, 0, 0], roll)
    return quat_mul(qz, quat_mul(qy, qx))


# --- horizontal frame --------------------------------------------------------

def test_horizontal_identity():
    q, degenerate = horizontal_frame(np.array([1.0, 0, 0, 0]))
    np.testing.assert_allclose(q, [1, 0, 0, 0], atol=1e-15)
    assert not degenerate


def test_horizontal_pure_yaw():
    qin = euler_zyx_quat(0.0, 0.0, math.radians(30.0))
    q, _ = horizontal_frame(qin)
    np.testing.assert_allclose(q, qin, atol=1e-12)


def test_horizontal_strips_roll_pitch():
    qin = euler_zyx_quat(math.radians(10), math.radians(5), math.radians(45))
    q, degenerate = horizontal_frame(qin)
    roll, pitch, yaw = rpy_of(q)
    assert abs(roll) <= 1e-9 and abs(pitch) <= 1e-9
    assert yaw == pytest.approx(math.radians(45), abs=1e-9)
    assert not degenerate


def test_horizontal_gimbal_flag():
    qin = euler_zyx_quat(0.0, math.radians(89.7), math.radians(20))
    _, degenerate = horizontal_frame(qin)
    assert degenerate


def test_horizontal_random_zero_roll_pitch():
    rng = np.random.default_rng(6)
    for _ in range(100):
        qin = euler_zyx_quat(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                             rng.uniform(-math.pi, math.pi))
        q, _ = horizontal_frame(qin)
        roll, pitch, _ = rpy_of(q)
        assert abs(roll) <= 1e-9 and abs(pitch) <= 1e-9


# --- base twist --------------------------------------------------------------

def consistent_joint_rates(model, cfg, twist, contacts):
    """Joint rates making contact feet stationary under the given twist."""
    kin = compute_kincache(model, cfg)
    J = foot_jacobians(model, kin)
    qd = np.zeros(model.n_joints)
    for g in range(4):
        if not contacts[g]:
            continue
        Jj = J[g][:, 6 + 3 * g: 9 + 3 * g]
        qd[3 * g: 3 * g + 3] = np.linalg.solve(Jj, -J[g][:, :6] @ twist)
    return qd


def test_twist_zero_when_static():
    model = canonical_model()
    cfg = model.default_config()
    twist, ok = estimate_base_twist(model, cfg, np.zeros(12), [1, 1, 1, 1])
    assert ok
    np.testing.assert_allclose(twist, 0.0, atol=1e-12)


def test_twist_recovers_ground_truth():
    model = canonical_model()
    cfg = model.default_config()
    contacts = np.array([True, True, True, True])
    for truth in ([0.3, 0, 0, 0, 0, 0], [0.1, -0.2, 0.05, 0.1, 0.2, -0.3]):
        truth = np.array(truth, dtype=float)
        qd = consistent_joint_rates(model, cfg, truth, contacts)
        est, ok = estimate_base_twist(model, cfg, qd, contacts)
        assert ok
        np.testing.assert_allclose(est, truth, atol=1e-6)


def test_twist_three_contacts_unique():
    model = canonical_model()
    cfg = model.default_config()
    contacts = np.array([True, True, True, False])
    truth = np.array([0.2, 0.1, -0.05, 0.3, -0.1, 0.2])
    qd = consistent_joint_rates(model, cfg, truth, contacts)
    est, ok = estimate_base_twist(model, cfg, qd, contacts)
    assert ok
    np.testing.assert_allclose(est, truth, atol=1e-6)


def test_twist_single_leg_matches_normal_equations():
    model = canonical_model()
    cfg = model.default_config()
    contacts = np.array([True, False, False, False])
    rng = np.random.default_rng(0)
    qd = rng.normal(size=12) * 0.3
    est, ok = estimate_base_twist(model, cfg, qd, contacts)
    assert ok
    kin = compute_kincache(model, cfg)
    J = foot_jacobians(model, kin)[0]
    A = J[:, :6]
    b = -J[:, 6:9] @ qd[0:3]
    oracle = np.linalg.pinv(A) @ b
    np.testing.assert_allclose(est, oracle, atol=1e-9)


def test_twist_unobservable_without_contacts():
    model = canonical_model()
    _, ok = estimate_base_twist(model, model.default_config(), np.zeros(12),
                                [0, 0, 0, 0])
    assert not ok


# --- contact detection -------------------------------------------------------

def standing_torques(model, cfg, fz_per_leg):
    """Statics: tau = G - Jc^T f for vertical per-leg forces."""
    kin = compute_kincache(model, cfg)
    G = gravity_forces(model, kin)
    J = foot_jacobians(model, kin)
    tau = G[6:].copy()
    for g in range(4):
        f = np.array([0.0, 0.0, fz_per_leg[g]])
        tau -= (J[g].T @ f)[6:]
    return tau


def test_detect_contacts_standing():
    model = canonical_model()
    cfg = model.default_config()
    fz = model.total_mass * 9.81 / 4.0
    tau = standing_torques(model, cfg, [fz] * 4)
    flags, f_hat, indet = detect_contacts(model, cfg, tau, threshold=5.0)
    assert flags.all() and not indet.any()
    np.testing.assert_allclose(f_hat[:, 2], fz, rtol=1e-9)
    assert fz == pytest.approx(255.06 / 4.0, abs=0.1)


def test_detect_contacts_airborne_leg():
    model = canonical_model()
    cfg = model.default_config()
    fz = model.total_mass * 9.81 / 4.0
    tau = standing_torques(model, cfg, [fz, fz, fz, 0.0])
    flags, f_hat, _ = detect_contacts(model, cfg, tau, threshold=5.0)
    np.testing.assert_array_equal(flags, [True, True, True, False])
    np.testing.assert_allclose(f_hat[3], 0.0, atol=1e-9)


def test_detect_contacts_strict_threshold():
    model = canonical_model()
    cfg = model.default_config()
    tau = standing_torques(model, cfg, [4.0, 4.0, 4.0, 4.0])
    flags, _, _ = detect_contacts(model, cfg, tau, threshold=5.0)
    assert not flags.any()
    # exactly at the threshold stays off (strict inequality)
    tau = standing_torques(model, cfg, [5.0] * 4)
    flags, _, _ = detect_contacts(model, cfg, tau, threshold=5.0)
    assert not flags.any()


def test_detect_contacts_singular_leg():
    model = canonical_model()
    cfg = model.default_config()
    q = cfg.q.copy()
    q[1] = 0.0
    q[2] = 0.0   # LF leg straight: singular
    cfg2 = Configuration(cfg.base_pos, cfg.base_quat, q)
    flags, _, indet = detect_contacts(model, cfg2, np.zeros(12), threshold=5.0)
    assert indet[0]


# --- support polygon ---------------------------------------------------------

def test_polygon_square():
    pts = np.array([[0.25, 0.15], [0.25, -0.15], [-0.25, 0.15], [-0.25, -0.15]])
    hull, center = support_polygon(pts)
    assert len(hull) == 4
    np.testing.assert_allclose(center, [0.0, 0.0], atol=1e-12)


def test_polygon_triangle_centroid():
    hull, center = support_polygon(np.array([[0, 0], [0.5, 0], [0, 0.5]]))
    assert len(hull) == 3
    np.testing.assert_allclose(center, [0.5 / 3, 0.5 / 3], atol=1e-12)


def test_polygon_collinear_degenerates_to_segment():
    hull, _ = support_polygon(np.array([[0, 0], [0.2, 0.2], [0.4, 0.4]]))
    assert len(hull) == 2
    np.testing.assert_allclose(sorted(hull[:, 0]), [0.0, 0.4], atol=1e-12)


def test_polygon_permutation_invariance():
    from wolf.geometry import polygon_area
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(6, 2))
    hull, center = support_polygon(pts)
    for _ in range(5):
        p = rng.permutation(pts)
        h2, c2 = support_polygon(p)
        np.testing.assert_allclose(c2, center, atol=1e-12)
        assert polygon_area(h2) == pytest.approx(polygon_area(hull), abs=1e-12)


# --- terrain plane -----------------------------------------------------------

def test_plane_flat_exact():
    pts = np.array([[0.25, 0.15, 0], [0.25, -0.15, 0], [-0.25, 0.15, 0],
                    [-0.25, -0.15, 0]])
    plane, fresh = fit_terrain_plane(pts)
    assert fresh
    np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-12)
    assert plane.slope_angle() == pytest.approx(0.0, abs=1e-12)


def test_plane_ramp_exact():
    a = math.tan(math.radians(10.0))
    pts = np.array([[x, y, a * x] for x, y in
                    [(0.3, 0.1), (0.3, -0.1), (-0.2, 0.1), (-0.2, -0.1)]])
    plane, _ = fit_terrain_plane(pts)
    assert math.degrees(plane.slope_angle()) == pytest.approx(10.0, abs=1e-9)
    # residual exactly zero for coplanar inputs
    for p in pts:
        assert plane.height_at(p[0], p[1]) == pytest.approx(p[2], abs=1e-12)


def test_plane_noisy_matches_lstsq_oracle():
    rng = np.random.default_rng(12)
    pts = rng.normal(size=(6, 3)) * np.array([0.3, 0.3, 0.02])
    plane, _ = fit_terrain_plane(pts)
    A = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
    coef_oracle = np.linalg.lstsq(A, pts[:, 2], rcond=None)[0]
    np.testing.assert_allclose(plane.coeffs(), coef_oracle, atol=1e-9)


def test_plane_keeps_previous_when_degenerate():
    prev, _ = fit_terrain_plane(np.array([[0, 0, 0], [1, 0, 0.1], [0, 1, 0.0],
                                          [0.5, 0.5, 0.05]]))
    plane, fresh = fit_terrain_plane(np.array([[0, 0, 0], [1, 1, 0]]), prev)
    assert not fresh and plane.stale
    np.testing.assert_allclose(plane.normal, prev.normal, atol=1e-15)
    # collinear points also refuse to fit
    plane2, fresh2 = fit_terrain_plane(
        np.array([[0, 0, 0], [0.1, 0.1, 0], [0.2, 0.2, 0]]), prev)
    assert not fresh2


# --- ICP ---------------------------------------------------------------------

def test_icp_zero_velocity():
    icp, clamped = compute_icp([0.3, -0.2, 0.4], [0, 0, 0], 0.4)
    np.testing.assert_allclose(icp, [0.3, -0.2], atol=1e-15)
    assert not clamped


def test_icp_offset_value():
    icp, _ = compute_icp([0, 0, 0.4], [0.5, 0, 0], 0.4)
    assert icp[0] == pytest.approx(0.5 / math.sqrt(9.81 / 0.4), abs=1e-6)
    assert icp[0] == pytest.approx(0.10096, abs=1e-4)


def test_icp_linear_in_velocity():
    icp1, _ = compute_icp([0, 0, 0.4], [0.3, 0.1, 0], 0.4)
    icp2, _ = compute_icp([0, 0, 0.4], [0.6, 0.2, 0], 0.4)
    np.testing.assert_allclose(icp2, 2.0 * icp1, atol=1e-12)


def test_icp_offset_parallel_to_velocity():
    rng = np.random.default_rng(2)
    for _ in range(50):
        v = rng.normal(size=3)
        icp, _ = compute_icp([0, 0, 0.35], v, 0.35)
        # sin(angle) via the cross product resolves angles near zero
        sin_ang = abs(icp[0] * v[1] - icp[1] * v[0]) \
            / (np.linalg.norm(icp) * np.linalg.norm(v[:2]))
        assert sin_ang <= 1e-12


def test_icp_height_clamp():
    _, clamped = compute_icp([0, 0, 0.01], [0.1, 0, 0], 0.01)
    assert clamped
