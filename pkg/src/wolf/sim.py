"""Deterministic physics harness.

Penalty ground contact (spring-damper normal, Coulomb-saturated anchor
spring tangential), semi-implicit Euler at fixed small steps, parametric
terrain (flat / ramp / stairs), timed external pushes, and simulated
proprioceptive sensors with optional seeded Gaussian noise.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import bias_forces, compute_kincache, foot_jacobians, mass_matrix
from .model import Configuration
from .rotations import cross, quat_integrate, quat_mul, quat_from_axis_angle


class SimError(RuntimeError):
    """Simulation diverged or was stepped outside its contract."""


# ---------------------------------------------------------------------------
# terrain

@dataclass
class Terrain:
    kind: str = "flat"
    angle: float = 0.0        # ramp slope, rad
    start_x: float = 0.3      # where the ramp/stairs begin
    rise: float = 0.0
    run: float = 0.3
    count: int = 0

    @classmethod
    def parse(cls, spec):
        """'flat' | 'ramp:<deg>' | 'stairs:<rise>:<run>:<count>'."""
        parts = str(spec).split(":")
        if parts[0] == "flat":
            return cls("flat")
        if parts[0] == "ramp":
            return cls("ramp", angle=math.radians(float(parts[1])))
        if parts[0] == "stairs":
            return cls("stairs", rise=float(parts[1]), run=float(parts[2]),
                       count=int(parts[3]))
        raise ValueError(f"unknown terrain spec '{spec}'")

    def height(self, x, y):
        if self.kind == "flat":
            return np.zeros_like(np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        if self.kind == "ramp":
            return np.maximum(0.0, x - self.start_x) * math.tan(self.angle)
        # stairs: tread k covers (start + (k-1) run, start + k run],
        # right-closed; the 1e-9 guard keeps exact boundaries on their tread
        k = np.ceil((x - self.start_x) / self.run - 1e-9)
        k = np.clip(k, 0, self.count)
        return k * self.rise

    def normal(self, x, y):
        if self.kind == "ramp" and np.asarray(x) > self.start_x:
            c, s = math.cos(self.angle), math.sin(self.angle)
            return np.array([-s, 0.0, c])
        return np.array([0.0, 0.0, 1.0])

    def normals(self, xs, ys):
        return np.stack([self.normal(x, y) for x, y in zip(xs, ys)])


# ---------------------------------------------------------------------------
# sensors

@dataclass
class NoiseConfig:
    quat_std: float = 0.0       # small-angle rad on the IMU orientation
    gyro_std: float = 0.0       # rad/s
    joint_pos_std: float = 0.0
    joint_vel_std: float = 0.0
    tau_std: float = 0.0

    def any(self):
        return any(v > 0.0 for v in
                   (self.quat_std, self.gyro_std, self.joint_pos_std,
                    self.joint_vel_std, self.tau_std))


@dataclass
class Sensors:
    imu_quat: np.ndarray
    imu_gyro: np.ndarray        # body frame
    joint_q: np.ndarray
    joint_qd: np.ndarray
    joint_tau: np.ndarray
    contact_flags: np.ndarray   # (4,) bool, from penetration


@dataclass
class SimParams:
    k_normal: float = 2.0e4     # N/m
    d_normal: float = 500.0     # N s/m
    k_tangent: float = 2.0e4
    d_tangent: float = 120.0    # tangential damping keeps anchors quiet
    mu: float = 0.7
    max_dt: float = 2.0e-3


@dataclass
class Push:
    force: np.ndarray           # world frame
    point: np.ndarray           # base frame
    t_end: float


class Simulator:
    """Owns the true state; strictly sequential stepping."""

    def __init__(self, model, terrain=None, params=None, cfg=None, seed=0):
        self.model = model
        self.terrain = terrain or Terrain()
        self.params = params or SimParams()
        self.cfg = cfg.copy() if cfg is not None else model.default_config()
        self.time = 0.0
        self.anchors = [None] * 4   # tangential anchor per foot, world
        self.pushes: list[Push] = []
        self.rng = np.random.default_rng(seed)
        self.last_tau = np.zeros(model.n_joints)
        self.tau_clamped = False
        self.last_forces = np.zeros((4, 3))
        self.last_penetration = np.zeros(4)

    # -- commands -----------------------------------------------------------

    def apply_push(self, force, point=(0.0, 0.0, 0.0), duration=0.1):
        """World-frame force at a base-frame point for a duration."""
        if duration <= 0.0:
            raise ValueError("push duration must be positive")
        self.pushes.append(Push(np.asarray(force, dtype=float),
                                np.asarray(point, dtype=float),
                                self.time + duration))

    # -- dynamics -----------------------------------------------------------

    def _contact_forces(self, kin):
        """Penalty forces per foot, returns (4,3) world forces."""
        p = self.params
        feet = kin.foot
        vels = kin.foot_vel
        forces = np.zeros((4, 3))
        h = self.terrain.height(feet[:, 0], feet[:, 1])
        for g in range(4):
            n = self.terrain.normal(feet[g, 0], feet[g, 1])
            gap = float(n[2] * (feet[g, 2] - h[g]))      # signed normal distance
            if gap >= 0.0:
                self.anchors[g] = None
                self.last_penetration[g] = 0.0
                continue
            pen = -gap
            self.last_penetration[g] = pen
            pen_rate = -float(n @ vels[g])
            f_n = max(0.0, p.k_normal * pen + p.d_normal * pen_rate)
            if self.anchors[g] is None:
                self.anchors[g] = feet[g] - gap * n      # surface projection
            t_off = feet[g] - self.anchors[g]
            t_off = t_off - float(n @ t_off) * n
            v_t = vels[g] - float(n @ vels[g]) * n
            f_t = -p.k_tangent * t_off - p.d_tangent * v_t
            f_t = f_t - float(n @ f_t) * n
            limit = p.mu * f_n
            nrm = float(np.linalg.norm(f_t))
            if nrm > limit:
                f_t = f_t * (limit / max(nrm, 1e-12))
                # anchor slides so the spring matches the saturated force
                slide = (f_t + p.d_tangent * v_t) / p.k_tangent
                slide = slide - float(n @ slide) * n
                self.anchors[g] = feet[g] + slide
            forces[g] = f_n * n + f_t
        return forces

    def step(self, tau, dt):
        """Advance one step under joint torques tau."""
        if not (0.0 < dt <= self.params.max_dt):
            raise SimError(f"dt {dt} outside (0, {self.params.max_dt}]")
        model = self.model
        tau = np.asarray(tau, dtype=float)
        clipped = np.clip(tau, -model.tau_max, model.tau_max)
        self.tau_clamped = bool(np.any(clipped != tau))
        tau = clipped
        self.last_tau = tau

        cfg = self.cfg
        kin = compute_kincache(model, cfg, vel=True)
        M = mass_matrix(model, kin)
        h = bias_forces(model, kin)

        rhs = -h
        rhs[6:] += tau
        forces = self._contact_forces(kin)
        self.last_forces = forces
        if np.any(forces):
            J = foot_jacobians(model, kin)
            for g in range(4):
                if forces[g].any():
                    rhs += J[g].T @ forces[g]
        if self.pushes:
            self.pushes = [p for p in self.pushes if p.t_end > self.time]
            for push in self.pushes:
                pt_world = cfg.base_pos + kin.R_b @ push.point
                rhs[0:3] += push.force
                rhs[3:6] += cross(pt_world - cfg.base_pos, push.force)

        qdd = np.linalg.solve(M, rhs)
        if not np.all(np.isfinite(qdd)):
            raise SimError(
                f"non-finite acceleration at t={self.time:.4f}; "
                f"|q|max={np.abs(cfg.q).max():.3g} "
                f"|qd|max={np.abs(cfg.qd).max():.3g}")

        # semi-implicit Euler: velocities first, then positions
        v = cfg.generalized_velocity() + dt * qdd
        cfg.base_lin = v[0:3]
        cfg.base_ang = v[3:6]
        cfg.qd = v[6:]
        cfg.base_pos = cfg.base_pos + dt * v[0:3]
        cfg.base_quat = quat_integrate(cfg.base_quat, v[3:6], dt)
        cfg.q = cfg.q + dt * v[6:]
        if not (np.all(np.isfinite(cfg.base_pos)) and np.all(np.isfinite(cfg.q))):
            raise SimError(f"non-finite state at t={self.time:.4f}")
        self.time += dt
        return self.cfg

    # -- sensing ------------------------------------------------------------

    def sensors(self, noise=None):
        noise = noise or NoiseConfig()
        cfg = self.cfg
        R_b = None
        quat = cfg.base_quat.copy()
        gyro_world = cfg.base_ang.copy()
        q = cfg.q.copy()
        qd = cfg.qd.copy()
        tau = self.last_tau.copy()
        if noise.any():
            rng = self.rng
            if noise.quat_std > 0.0:
                rotvec = rng.normal(0.0, noise.quat_std, 3)
                angle = float(np.linalg.norm(rotvec))
                if angle > 1e-12:
                    quat = quat_mul(quat_from_axis_angle(rotvec / angle, angle), quat)
            if noise.gyro_std > 0.0:
                gyro_world = gyro_world + rng.normal(0.0, noise.gyro_std, 3)
            if noise.joint_pos_std > 0.0:
                q = q + rng.normal(0.0, noise.joint_pos_std, q.shape)
            if noise.joint_vel_std > 0.0:
                qd = qd + rng.normal(0.0, noise.joint_vel_std, qd.shape)
            if noise.tau_std > 0.0:
                tau = tau + rng.normal(0.0, noise.tau_std, tau.shape)
        from .rotations import quat_to_rot
        R_b = quat_to_rot(quat)
        return Sensors(
            imu_quat=quat,
            imu_gyro=R_b.T @ gyro_world,
            joint_q=q, joint_qd=qd, joint_tau=tau,
            contact_flags=self.last_penetration > 0.0)

    # -- bookkeeping for tests/telemetry -------------------------------------

    def mechanical_energy(self):
        """Kinetic + gravitational + contact spring energy."""
        model = self.model
        kin = compute_kincache(model, self.cfg, vel=True)
        M = mass_matrix(model, kin)
        v = self.cfg.generalized_velocity()
        e = 0.5 * float(v @ M @ v)
        e += model.total_mass * 9.81 * float(kin.com_robot[2])
        p = self.params
        for g in range(4):
            pen = self.last_penetration[g]
            e += 0.5 * p.k_normal * pen * pen
            if self.anchors[g] is not None:
                n = self.terrain.normal(kin.foot[g, 0], kin.foot[g, 1])
                t_off = kin.foot[g] - self.anchors[g]
                t_off = t_off - float(n @ t_off) * n
                e += 0.5 * p.k_tangent * float(t_off @ t_off)
        return e


def equilibrium_start(model, terrain=None, params=None):
    """Default stance lowered so contact springs carry the weight."""
    params = params or SimParams()
    terrain = terrain or Terrain()
    cfg = model.default_config()
    sag = model.total_mass * 9.81 / 4.0 / params.k_normal
    ground = float(terrain.height(np.array([0.0]), np.array([0.0]))[0])
    cfg.base_pos = cfg.base_pos + np.array([0.0, 0.0, ground - sag])
    return cfg
