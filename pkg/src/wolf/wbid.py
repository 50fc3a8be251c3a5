"""Hierarchical whole-body inverse dynamics.

Decision vector x = [qdd (nv), contact forces (3 per active contact)].
Tasks are affine acceleration rows grouped into strict priority levels;
the cascade solves one QP per level and freezes each level's achieved
value A_i x = A_i x_i* as equalities for everything below, with all
inequality constraints active at every level. Torques are recovered
from the actuated rows of the dynamics afterwards.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import bias_forces, com_jacobian, foot_jacobians, mass_matrix
from .footstep import minimum_jerk
from .model import LEG_NAMES
from .qp import solve_qp
from .rotations import (cross, orientation_error, quat_slerp, quat_to_rot,
                        rotation_log, skew)


class ControlMode(Enum):
    WALKING = "walking"          # arm follows the base
    MANIPULATION = "manipulation"  # arm anchored to the base footprint


class UnsupportedPhaseError(RuntimeError):
    """No active contacts while the stack still needs support."""


@dataclass
class Task:
    level: int
    weight: float
    A: np.ndarray
    b: np.ndarray
    label: str

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError(f"task '{self.label}': rows(A) != len(b)")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError(f"task '{self.label}': non-finite entries")
        if self.weight <= 0.0:
            raise ValueError(f"task '{self.label}': weight must be positive")


@dataclass
class ConstraintSet:
    C: np.ndarray
    d: np.ndarray
    E: np.ndarray
    f: np.ndarray
    nv: int
    contact_legs: list

    @property
    def n_x(self):
        return self.nv + 3 * len(self.contact_legs)


@dataclass
class Gains:
    kp_foot: float = 100.0
    kd_foot: float = 20.0
    kp_com: float = 100.0
    kd_com: float = 20.0
    kp_ori: float = 50.0
    kd_ori: float = 14.0
    kp_posture: float = 50.0
    kd_posture: float = 14.0
    kp_arm: float = 80.0
    kd_arm: float = 18.0
    w_foot: float = 1.0
    w_ori: float = 1.0
    w_com: float = 1.0
    w_arm: float = 1.0
    w_posture: float = 1.0


@dataclass
class References:
    """Targets consumed by build_tasks; world frame unless stated."""

    com_pos: np.ndarray = None
    com_vel: np.ndarray = None
    com_acc: np.ndarray = None
    base_quat: np.ndarray = None
    base_ang_vel: np.ndarray = None
    base_ang_acc: np.ndarray = None
    swing: dict = field(default_factory=dict)   # leg -> (pos, vel, acc)
    posture_q: np.ndarray = None
    arm_target: tuple = None                    # (pos, quat) in the mode frame
    arm_vel: np.ndarray = None                  # 6-vector, mode frame
    footprint: tuple = None                     # (pos(3,), yaw) of the anchor
    com_err_clip: float = 0.12
    ori_err_clip: float = 0.5


def _pad(A, n_x):
    out = np.zeros((A.shape[0], n_x))
    out[:, :A.shape[1]] = A
    return out


def build_tasks(model, state, refs, mode, gains=None):
    """Prioritized acceleration tasks for the current tick.

    Levels: 0 swing feet + base orientation, 1 CoM, 2 arm end effector,
    3 posture. Every target is a PD acceleration a_ff + Kp e + Kd de.
    """
    g = gains or Gains()
    kin = state.kin
    nv = model.nv
    n_x = nv + 3 * int(np.sum(state.contacts))
    tasks = []
    v = state.cfg.generalized_velocity()

    # level 0: swing-foot tracking
    if refs.swing:
        J = foot_jacobians(model, kin)
        for leg, (p_ref, v_ref, a_ref) in sorted(refs.swing.items()):
            e = p_ref - kin.foot[leg]
            de = v_ref - kin.foot_vel[leg]
            b = a_ref + g.kp_foot * e + g.kd_foot * de - kin.foot_jdv[leg]
            tasks.append(Task(0, g.w_foot, _pad(J[leg], n_x), b,
                              f"foot_{LEG_NAMES[leg]}"))

    # level 0: base orientation
    if refs.base_quat is not None:
        e = orientation_error(refs.base_quat, state.cfg.base_quat)
        nrm = np.linalg.norm(e)
        if nrm > refs.ori_err_clip:
            e = e * (refs.ori_err_clip / nrm)
        wref = refs.base_ang_vel if refs.base_ang_vel is not None else np.zeros(3)
        aff = refs.base_ang_acc if refs.base_ang_acc is not None else np.zeros(3)
        A = np.zeros((3, n_x))
        A[:, 3:6] = np.eye(3)
        b = aff + g.kp_ori * e + g.kd_ori * (wref - state.cfg.base_ang)
        tasks.append(Task(0, g.w_ori, A, b, "base_orientation"))

    # level 1: CoM
    if refs.com_pos is not None:
        if not np.any(state.contacts):
            raise UnsupportedPhaseError("CoM task with no active contacts")
        e = refs.com_pos - state.com
        nrm = np.linalg.norm(e)
        if nrm > refs.com_err_clip:
            e = e * (refs.com_err_clip / nrm)
        vref = refs.com_vel if refs.com_vel is not None else np.zeros(3)
        aff = refs.com_acc if refs.com_acc is not None else np.zeros(3)
        Jc = com_jacobian(model, kin)
        b = aff + g.kp_com * e + g.kd_com * (vref - kin.com_vel) - kin.com_jdv
        tasks.append(Task(1, g.w_com, _pad(Jc, n_x), b, "com"))

    # level 2: arm end effector, frame picked by the control mode
    if refs.arm_target is not None and model.has_arm:
        tasks.append(_arm_task(model, state, refs, mode, g, n_x))

    # level 3: posture regularization
    q_ref = refs.posture_q if refs.posture_q is not None else model.default_joints
    nj = model.n_joints
    A = np.zeros((nj, n_x))
    A[:, 6:6 + nj] = np.eye(nj)
    b = g.kp_posture * (q_ref - state.cfg.q) - g.kd_posture * state.cfg.qd
    tasks.append(Task(3, g.w_posture, A, b, "posture"))
    return tasks


def _arm_task(model, state, refs, mode, g, n_x):
    from .dynamics import frame_jacobian
    kin = state.kin
    p_rel, q_rel = refs.arm_target
    J_ee = frame_jacobian(model, kin, "arm_ee")
    p_ee = kin.p_ee
    v = state.cfg.generalized_velocity()

    if mode == ControlMode.WALKING:
        # track relative to the base: subtract the base's transported motion
        # [I, -skew(r)] on the linear rows, [0, I] on the angular rows
        A6 = J_ee.copy()
        r = p_ee - kin.p_b
        A6[:3, 0:3] -= np.eye(3)
        A6[:3, 3:6] += skew(r)
        A6[3:, 3:6] -= np.eye(3)
        R_anchor = kin.R_b
        p_anchor = kin.p_b
        jdv = np.concatenate([kin.ee_jdv, kin.ee_alpha_jdv])
        # base's own jdv at the ee point (qdd=0): w x (w x r)
        wb = state.cfg.base_ang
        jdv = jdv - np.concatenate([cross(wb, cross(wb, r)), np.zeros(3)])
    else:
        # anchor at the base footprint: x, y, yaw projected to the terrain
        A6 = J_ee
        fp_pos, fp_yaw = refs.footprint
        c, s = math.cos(fp_yaw), math.sin(fp_yaw)
        R_anchor = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        p_anchor = np.asarray(fp_pos, dtype=float)
        jdv = np.concatenate([kin.ee_jdv, kin.ee_alpha_jdv])

    p_des = p_anchor + R_anchor @ p_rel
    R_des = R_anchor @ quat_to_rot(q_rel)
    e_pos = p_des - p_ee
    e_rot = rotation_log(R_des @ kin.R_ee.T)
    v_ee = J_ee @ v
    v_des = np.zeros(6) if refs.arm_vel is None else refs.arm_vel
    b = np.concatenate([
        g.kp_arm * e_pos + g.kd_arm * (v_des[:3] - v_ee[:3]),
        g.kp_arm * e_rot + g.kd_arm * (v_des[3:] - v_ee[3:]),
    ]) - jdv
    return Task(2, g.w_arm, _pad(A6, n_x), b, "arm_ee")


def build_constraints(model, state, plane, dt, mu=0.7):
    """Equalities and inequalities for one tick.

    (a) unactuated base dynamics, (b) zero contact-foot acceleration,
    (c) inscribed 4-face friction pyramids aligned with the terrain
    normal, (d) torque limits through the actuated rows, (e) joint
    acceleration viability bounds from velocity and position limits.
    """
    kin = state.kin
    contacts = [g for g in range(4) if state.contacts[g]]
    if not contacts:
        raise UnsupportedPhaseError("no active contacts")
    nv = model.nv
    nj = model.n_joints
    n_c = len(contacts)
    n_x = nv + 3 * n_c

    M = mass_matrix(model, kin)
    h = bias_forces(model, kin)
    J_all = foot_jacobians(model, kin)
    J_c = np.vstack([J_all[g] for g in contacts])           # (3nc, nv)
    jdv_c = np.concatenate([kin.foot_jdv[g] for g in contacts])

    # (a) + (b) equalities
    E = np.zeros((6 + 3 * n_c, n_x))
    f = np.zeros(6 + 3 * n_c)
    E[:6, :nv] = M[:6, :]
    E[:6, nv:] = -J_c[:, :6].T
    f[:6] = -h[:6]
    E[6:, :nv] = J_c
    f[6:] = -jdv_c

    # (c) friction pyramids in terrain axes
    R_t = plane.rotation()
    t1, t2, n = R_t[:, 0], R_t[:, 1], R_t[:, 2]
    coef = mu / math.sqrt(2.0)
    rows = []
    d_rows = []
    for k in range(n_c):
        colsl = slice(nv + 3 * k, nv + 3 * k + 3)
        for tvec in (t1, -t1, t2, -t2):
            r = np.zeros(n_x)
            r[colsl] = tvec - coef * n
            rows.append(r)
            d_rows.append(0.0)
        r = np.zeros(n_x)
        r[colsl] = -n
        rows.append(r)
        d_rows.append(0.0)

    # (d) torque limits through the actuated dynamics rows
    act = np.zeros((nj, n_x))
    act[:, :nv] = M[6:, :]
    act[:, nv:] = -J_c[:, 6:].T
    tau_bias = h[6:]
    rows.append(act)
    d_rows.append(model.tau_max - tau_bias)
    rows.append(-act)
    d_rows.append(model.tau_max + tau_bias)

    # (e) viability bounds on joint accelerations
    q = state.cfg.q
    qd = state.cfg.qd
    ub = (model.qd_max - qd) / dt
    lb = (-model.qd_max - qd) / dt
    ub = np.minimum(ub, 2.0 * (model.q_upper - q - qd * dt) / (dt * dt))
    lb = np.maximum(lb, 2.0 * (model.q_lower - q - qd * dt) / (dt * dt))
    bad = lb > ub
    if np.any(bad):
        mid = 0.5 * (lb[bad] + ub[bad])
        lb[bad] = mid - 1e-6
        ub[bad] = mid + 1e-6
    sel = np.zeros((nj, n_x))
    sel[:, 6:6 + nj] = np.eye(nj)
    rows.append(sel)
    d_rows.append(ub)
    rows.append(-sel)
    d_rows.append(-lb)

    C = np.vstack([np.atleast_2d(r) for r in rows])
    d = np.concatenate([np.atleast_1d(x) for x in d_rows])
    return ConstraintSet(C=C, d=d, E=E, f=f, nv=nv, contact_legs=contacts)


@dataclass
class HierarchyResult:
    status: str
    x: np.ndarray = None
    qdd: np.ndarray = None
    forces: np.ndarray = None        # (4,3), zeros for swing legs
    level_costs: dict = field(default_factory=dict)
    failing_level: int = -1
    iterations: int = 0
    kkt_residual: float = 0.0

    @property
    def ok(self):
        return self.status == "optimal"


def solve_hierarchy(tasks, constraints):
    """Lexicographic cascade with residual freezing.

    The feasible affine set is carried incrementally as x = c + B w
    (B orthonormal): hard equalities reduce it once, then each solved
    level pins its achieved task value by restricting B to the
    nullspace of its task rows. Freezing is exact by construction and
    every level sees all inequality constraints.
    """
    from .qp import _reduce_equalities

    cset = constraints
    n_x = cset.n_x
    levels = sorted({t.level for t in tasks})
    if len(cset.E):
        red = _reduce_equalities(cset.E, cset.f, n_x)
        if red is None:
            return HierarchyResult(status="infeasible", failing_level=-1)
        c, B = red
    else:
        c, B = np.zeros(n_x), np.eye(n_x)

    x = c
    costs = {}
    iters = 0
    kkt = 0.0
    for lv in levels:
        lv_tasks = [t for t in tasks if t.level == lv]
        if B.shape[1] > 0:
            dim = B.shape[1]
            H = np.zeros((dim, dim))
            g_vec = np.zeros(dim)
            for t in lv_tasks:
                Ar = t.weight * (t.A @ B)
                br = t.weight * (t.b - t.A @ c)
                H += Ar.T @ Ar
                g_vec += -Ar.T @ br
            if len(cset.C):
                Cr = cset.C @ B
                dr = cset.d - cset.C @ c
            else:
                Cr = dr = None
            res = solve_qp(H, g_vec, C=Cr, d=dr)
            iters += res.iterations
            if not res.ok:
                return HierarchyResult(status="infeasible", failing_level=lv,
                                       iterations=iters)
            kkt = max(kkt, res.kkt_residual)
            x = c + B @ res.x
            # freeze this level: restrict B to the task-row nullspace
            T = np.vstack([t.A for t in lv_tasks]) @ B
            Q, R = np.linalg.qr(T.T, mode="complete")
            diag = np.abs(np.diag(R)) if min(R.shape) else np.zeros(0)
            rank = int(np.sum(diag > 1e-10 * max(1.0, diag[0] if diag.size else 1.0)))
            c = x
            B = B @ Q[:, rank:]
        costs[lv] = float(sum(
            t.weight ** 2 * np.sum((t.A @ x - t.b) ** 2) for t in lv_tasks))
    nv = cset.nv
    forces = np.zeros((4, 3))
    for k, leg in enumerate(cset.contact_legs):
        forces[leg] = x[nv + 3 * k: nv + 3 * k + 3]
    return HierarchyResult(status="optimal", x=x, qdd=x[:nv], forces=forces,
                           level_costs=costs, iterations=iters,
                           kkt_residual=kkt)


def recover_torques(model, kin, qdd, forces):
    """tau from the actuated rows of M qdd + h - Jc^T f."""
    M = mass_matrix(model, kin)
    h = bias_forces(model, kin)
    gen = M @ qdd + h
    if np.any(forces):
        J = foot_jacobians(model, kin)
        for g in range(4):
            if forces[g].any():
                gen -= J[g].T @ forces[g]
    return gen[6:]


def min_jerk_waypoint(p0, quat0, p1, quat1, T, t):
    """Pose and twist along a minimum-jerk waypoint interpolation.

    Translation scales by the quintic; orientation slerps with the same
    profile. Boundary velocities and accelerations are zero.
    """
    if T <= 0.0:
        raise ValueError("waypoint duration must be positive")
    u = min(max(t / T, 0.0), 1.0)
    s, ds, _ = minimum_jerk(u)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pos = p0 + s * (p1 - p0)
    vel = ds / T * (p1 - p0)
    quat = quat_slerp(quat0, quat1, s)
    rot_full = rotation_log(quat_to_rot(quat1) @ quat_to_rot(quat0).T)
    ang = ds / T * rot_full
    return pos, quat, vel, ang
