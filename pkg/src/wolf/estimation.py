"""Proprioceptive whole-body state estimation.

Orientation comes straight from the IMU; base twist is the least-squares
solution of the stationary-foot equations over the active contacts;
contacts come from joint torques through the leg Jacobian transpose
(or from contact sensors when enabled). The support polygon latches at
full stance, the terrain plane is a least-squares fit over stance feet.
Everything lives in the estimator's own world frame, anchored at the
initial pose and dead-reckoned by the twist estimate; the control stack
only consumes relative quantities, so slow drift is harmless.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import compute_kincache, foot_jacobians, gravity_forces
from .geometry import TerrainPlane, convex_hull_2d, fit_plane, polygon_center
from .model import GRAVITY, Configuration
from .rotations import quat_from_yaw, quat_to_rot, rpy_of


def horizontal_frame(quat):
    """Yaw-only (roll/pitch removed) orientation, z-y-x convention.

    Near-gimbal pitch (|pitch| > 89 deg) falls back to the projected
    heading of the body x axis and raises the degenerate flag.
    """
    roll, pitch, yaw = rpy_of(quat)
    degenerate = abs(pitch) > math.radians(89.0)
    if degenerate:
        R = quat_to_rot(quat)
        ex = R[:, 0]
        if np.hypot(ex[0], ex[1]) > 1e-6:
            yaw = math.atan2(ex[1], ex[0])
        else:
            ez = R[:, 2]
            yaw = math.atan2(-ez[1], -ez[0]) if pitch > 0 else math.atan2(ez[1], ez[0])
    return quat_from_yaw(yaw), degenerate


def estimate_base_twist(model, cfg, qd_joints, contacts, kin=None):
    """Base twist from joint rates and the stationary-foot assumption.

    Minimizes the stacked contact-foot velocities over the 6 base
    velocities, equally weighted. Returns (twist(6,), observable);
    observable is False with zero contacts (caller keeps its previous
    estimate).
    """
    contacts = np.asarray(contacts, dtype=bool)
    if not contacts.any():
        return np.zeros(6), False
    if kin is None:
        kin = compute_kincache(model, cfg)
    J = foot_jacobians(model, kin)
    rows_A = []
    rows_b = []
    for g in range(4):
        if not contacts[g]:
            continue
        rows_A.append(J[g][:, :6])
        rows_b.append(-J[g][:, 6 + 3 * g: 9 + 3 * g] @ qd_joints[3 * g: 3 * g + 3])
    A = np.vstack(rows_A)
    b = np.concatenate(rows_b)
    twist, *_ = np.linalg.lstsq(A, b, rcond=None)
    return twist, True


def detect_contacts(model, cfg, tau, threshold, kin=None, plane=None):
    """Per-leg contact flags and GRF estimates from joint torques.

    f_hat solves J_leg^T f = g_leg - tau_leg (gravity-compensated);
    contact iff the plane-normal component strictly exceeds the
    threshold. Singular legs are flagged indeterminate.
    """
    if kin is None:
        kin = compute_kincache(model, cfg)
    J = foot_jacobians(model, kin)
    G = gravity_forces(model, kin)
    normal = plane.normal if plane is not None else np.array([0.0, 0.0, 1.0])
    flags = np.zeros(4, dtype=bool)
    indeterminate = np.zeros(4, dtype=bool)
    f_hat = np.zeros((4, 3))
    for g in range(4):
        sl = slice(6 + 3 * g, 9 + 3 * g)
        Jg = J[g][:, sl]
        tau_net = tau[3 * g:3 * g + 3] - G[sl]
        if abs(np.linalg.det(Jg)) < 1e-8:
            indeterminate[g] = True
            continue
        f = np.linalg.solve(Jg.T, -tau_net)
        f_hat[g] = f
        flags[g] = float(f @ normal) > threshold
    return flags, f_hat, indeterminate


def support_polygon(points):
    """CCW hull of ground-projected stance feet and its vertex centroid."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 1:
        raise ValueError("need at least one stance foot")
    hull = convex_hull_2d(pts)
    return hull, polygon_center(hull)


def fit_terrain_plane(points, previous=None):
    """LS plane z = ax + by + c; keeps the previous plane (stale) when
    fewer than 3 usable or collinear points are given."""
    res = fit_plane(points)
    if res is None:
        prev = previous if previous is not None else TerrainPlane()
        return TerrainPlane(prev.normal.copy(), prev.offset, stale=True), False
    plane, _ = res
    return plane, True


def compute_icp(com, com_vel, com_height):
    """Instantaneous capture point: com_xy + v_xy / sqrt(g / z_c)."""
    clamped = com_height < 0.05
    z_c = max(float(com_height), 0.05)
    omega0 = math.sqrt(GRAVITY / z_c)
    icp = np.asarray(com, dtype=float)[:2] + np.asarray(com_vel, dtype=float)[:2] / omega0
    return icp, clamped


@dataclass
class WholeBodyState:
    """Published snapshot of the estimator; treat as immutable."""

    time: float
    cfg: Configuration
    kin: object
    horizontal_quat: np.ndarray
    gimbal_degenerate: bool
    contacts: np.ndarray            # (4,) detected, with hysteresis
    grf: np.ndarray                 # (4,3)
    feet: np.ndarray                # (4,3) estimator world frame
    com: np.ndarray
    com_vel: np.ndarray
    icp: np.ndarray                 # (2,)
    icp_clamped: bool
    support_polygon: np.ndarray     # latched at full stance, (k,2)
    polygon_center: np.ndarray
    active_polygon: np.ndarray      # hull of current stance feet
    plane: TerrainPlane
    com_height: float
    twist_observable: bool
    events: list = field(default_factory=list)


class StateEstimator:
    """Owns the filters, latches, and the dead-reckoned base position."""

    def __init__(self, model, initial_cfg, contact_threshold=5.0,
                 hysteresis=2.0, velocity_cutoff_hz=40.0,
                 use_contact_sensors=False):
        self.model = model
        self.base_pos = initial_cfg.base_pos.copy()
        self.base_quat = initial_cfg.base_quat.copy()
        self.twist = np.zeros(6)
        self.twist_filt = np.zeros(6)
        self.contact_threshold = contact_threshold
        self.hysteresis = hysteresis
        self.use_contact_sensors = use_contact_sensors
        self.velocity_cutoff_hz = velocity_cutoff_hz
        self.contacts = np.ones(4, dtype=bool)
        self.touchdown_points = None    # last known ground point per leg
        self.plane = TerrainPlane()
        self.polygon = None
        self.polygon_center = np.zeros(2)
        self.com_prev = None
        self.com_vel_filt = np.zeros(3)
        self.time = 0.0
        self.last_latch = 0.0
        self.max_latch_age = 1.0        # staleness guard on the latched hull

    def update(self, sensors, dt):
        """One estimation tick; returns a WholeBodyState snapshot."""
        model = self.model
        events = []
        self.time += dt

        cfg_pos = Configuration(self.base_pos, sensors.imu_quat, sensors.joint_q)
        kin0 = compute_kincache(model, cfg_pos)

        # contacts
        if self.use_contact_sensors:
            new_contacts = np.asarray(sensors.contact_flags, dtype=bool).copy()
            _, grf, _ = detect_contacts(model, cfg_pos, sensors.joint_tau,
                                        self.contact_threshold, kin=kin0,
                                        plane=self.plane)
        elif not np.any(np.abs(sensors.joint_tau) > 1e-9):
            # torque-based detection is undefined before torques flow;
            # hold the boot assumption (standing contact)
            new_contacts = self.contacts.copy()
            grf = np.zeros((4, 3))
        else:
            raw, grf, indet = detect_contacts(
                model, cfg_pos, sensors.joint_tau,
                self.contact_threshold, kin=kin0, plane=self.plane)
            low, _, _ = detect_contacts(
                model, cfg_pos, sensors.joint_tau,
                self.contact_threshold - self.hysteresis, kin=kin0,
                plane=self.plane)
            new_contacts = self.contacts.copy()
            for g in range(4):
                if indet[g]:
                    continue            # hold previous flag
                if self.contacts[g]:
                    new_contacts[g] = low[g]     # leave below thr - band
                else:
                    new_contacts[g] = raw[g]     # enter above thr
        rising = new_contacts & ~self.contacts
        self.contacts = new_contacts

        # base twist; the same low-pass as the CoM velocity keeps the
        # foot-vibration content of the LS solution out of the Kd terms
        twist, observable = estimate_base_twist(
            model, cfg_pos, sensors.joint_qd, self.contacts, kin=kin0)
        if observable:
            self.twist = twist
        alpha_v = 1.0 - math.exp(-2.0 * math.pi * self.velocity_cutoff_hz * dt)
        self.twist_filt = self.twist_filt + alpha_v * (self.twist - self.twist_filt)
        self.base_pos = self.base_pos + self.twist_filt[:3] * dt
        self.base_quat = sensors.imu_quat.copy()

        cfg = Configuration(self.base_pos, self.base_quat, sensors.joint_q,
                            base_lin=self.twist_filt[:3],
                            base_ang=self.twist_filt[3:],
                            qd=sensors.joint_qd)
        kin = compute_kincache(model, cfg, vel=True)
        feet = kin.foot

        if self.touchdown_points is None:
            self.touchdown_points = feet.copy()
        for g in np.flatnonzero(rising):
            self.touchdown_points[g] = feet[g]
            events.append(f"touchdown:{g}")

        # terrain plane: stance feet, padded with previous touchdowns
        pts = [feet[g] for g in range(4) if self.contacts[g]]
        if len(pts) < 3:
            pts += [self.touchdown_points[g] for g in range(4)
                    if not self.contacts[g]]
        self.plane, fresh = fit_terrain_plane(np.array(pts), self.plane)

        # support polygons
        stance_feet = feet[self.contacts] if self.contacts.any() else feet
        active_polygon = convex_hull_2d(stance_feet[:, :2])
        if self.polygon is None or self.contacts.all():
            self.polygon, self.polygon_center = support_polygon(feet[:, :2])
            if self.contacts.all():
                events.append("polygon_latch")
            self.last_latch = self.time
        elif self.time - self.last_latch > self.max_latch_age:
            # full stance never happened recently: fall back to the last
            # known ground point of every leg
            self.polygon, self.polygon_center = support_polygon(
                self.touchdown_points[:, :2])
            self.last_latch = self.time
            events.append("polygon_refresh")

        # CoM, filtered velocity, ICP
        com = kin.com_robot
        if self.com_prev is None:
            self.com_prev = com.copy()
        raw_vel = (com - self.com_prev) / dt
        self.com_prev = com.copy()
        alpha = 1.0 - math.exp(-2.0 * math.pi * self.velocity_cutoff_hz * dt)
        self.com_vel_filt = self.com_vel_filt + alpha * (raw_vel - self.com_vel_filt)
        com_height = com[2] - self.plane.height_at(com[0], com[1])
        icp, icp_clamped = compute_icp(com, self.com_vel_filt, com_height)

        hq, degen = horizontal_frame(self.base_quat)
        return WholeBodyState(
            time=self.time, cfg=cfg, kin=kin,
            horizontal_quat=hq, gimbal_degenerate=degen,
            contacts=self.contacts.copy(), grf=grf, feet=feet.copy(),
            com=com.copy(), com_vel=self.com_vel_filt.copy(),
            icp=icp, icp_clamped=icp_clamped,
            support_polygon=self.polygon.copy(),
            polygon_center=self.polygon_center.copy(),
            active_polygon=active_polygon,
            plane=self.plane, com_height=com_height,
            twist_observable=observable, events=events)
