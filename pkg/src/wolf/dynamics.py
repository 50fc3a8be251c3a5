"""Floating-base kinematics and dynamics.

One KinCache per (model, configuration) carries everything the control
stack needs for a tick: world transforms, link CoMs, Jacobians, mass
matrix, bias forces, and (with velocities) the coordinate accelerations
that give the Jdot*qd terms. Leg quantities are batched across the four
legs and, when numba is importable, evaluated by a compiled kernel; the
pure-numpy route below is the reference implementation and fallback
(tests assert the two agree). The optional arm is short enough to loop
in numpy either way.

Mass matrix uses per-subtree composite sums, bias forces a flat
Newton-Euler projection; both consume the same cache.
"""

import numpy as np

from . import _kernels
from .model import GRAVITY, FOOT_FRAMES
from .rotations import cross, cross_rows, quat_to_rot, rodrigues_rows, skew, skew_rows

G_VEC = np.array([0.0, 0.0, -GRAVITY])


class KinCache:
    """Per-configuration kinematic data. Legs are indexed [level][leg]."""

    __slots__ = (
        "cfg", "R_b", "p_b", "base_com_w",
        "R", "o", "axis", "com", "foot", "I_w",
        "arm_R", "arm_o", "arm_axis", "arm_com", "arm_I_w", "p_ee", "R_ee",
        "com_robot", "total_mass",
        "has_vel", "w_b", "v_b",
        "w", "v_com", "alpha", "a_com",
        "foot_vel", "foot_jdv",
        "arm_w", "arm_vcom", "arm_alpha", "arm_acom",
        "ee_vel", "ee_jdv", "ee_w", "ee_alpha_jdv",
        "com_vel", "com_jdv", "base_com_acc",
        "_M", "_h", "_G", "_J_feet",
    )


def compute_kincache(model, cfg, vel=False):
    """Forward kinematics (and velocity/acceleration propagation).

    With vel=True the cache also holds link twists and the coordinate
    accelerations taken at qdd = 0, i.e. the Jdot*qd of every body.
    """
    if _kernels.HAVE_NUMBA:
        return _compute_kincache_kernel(model, cfg, vel)
    return _compute_kincache_numpy(model, cfg, vel)


# ---------------------------------------------------------------------------
# kernel-backed path

def _compute_kincache_kernel(model, cfg, vel):
    kc = KinCache()
    kc.cfg = cfg
    R_b = quat_to_rot(cfg.base_quat)
    kc.R_b, kc.p_b = R_b, cfg.base_pos
    nv = model.nv

    o = np.empty((3, 4, 3))
    Rw = np.empty((3, 4, 3, 3))
    axw = np.empty((3, 4, 3))
    com = np.empty((3, 4, 3))
    Iw = np.empty((3, 4, 3, 3))
    foot = np.empty((4, 3))
    w = np.empty((3, 4, 3))
    vcom = np.empty((3, 4, 3))
    alpha = np.empty((3, 4, 3))
    acom = np.empty((3, 4, 3))
    foot_v = np.empty((4, 3))
    foot_jdv = np.empty((4, 3))
    J_feet = np.empty((4, 3, nv))
    M = np.empty((nv, nv))
    h = np.empty(nv)
    G = np.empty(nv)
    agg = np.empty(15)

    if vel:
        v_b, w_b, qd = cfg.base_lin, cfg.base_ang, cfg.qd
    else:
        v_b = w_b = np.zeros(3)
        qd = np.zeros(model.n_joints)

    _kernels.quad_dynamics_kernel(
        cfg.base_pos, R_b, v_b, w_b,
        np.ascontiguousarray(cfg.q[:12].reshape(4, 3)),
        np.ascontiguousarray(qd[:12].reshape(4, 3)),
        model.hip_offsets, model.leg_axes, model.leg_lengths,
        model.leg_masses, model.leg_inertias,
        model.base_mass, model.base_com, model.base_inertia, nv, GRAVITY,
        o, Rw, axw, com, Iw, foot, w, vcom, alpha, acom,
        foot_v, foot_jdv, J_feet, M, h, G, agg)

    kc.o, kc.R, kc.axis, kc.com, kc.I_w, kc.foot = o, Rw, axw, com, Iw, foot
    kc.base_com_w = agg[9:12].copy()
    kc.base_com_acc = agg[12:15].copy()
    kc.total_mass = model.total_mass
    kc.has_vel = vel
    kc.w_b, kc.v_b = w_b, v_b
    kc.w, kc.v_com, kc.alpha, kc.a_com = w, vcom, alpha, acom
    kc.foot_vel, kc.foot_jdv = foot_v, foot_jdv
    kc._J_feet = J_feet
    kc._M, kc._G = M, G
    kc._h = h if vel else None

    msum = agg[0:3].copy()
    msum_v = agg[3:6].copy()
    msum_a = agg[6:9].copy()
    if model.has_arm:
        _arm_fk(model, cfg, kc)
        if vel:
            _arm_vel(model, cfg, kc)
        _arm_mass_blocks(model, kc, M)
        _arm_bias_rows(model, kc, h if vel else None, G, vel)
        for j in range(model.n_arm):
            msum += model.arm_masses[j] * kc.arm_com[j]
            if vel:
                msum_v += model.arm_masses[j] * kc.arm_vcom[j]
                msum_a += model.arm_masses[j] * kc.arm_acom[j]
    else:
        kc.p_ee = kc.R_ee = None
    kc.com_robot = msum / model.total_mass
    if vel:
        kc.com_vel = msum_v / model.total_mass
        kc.com_jdv = msum_a / model.total_mass
    return kc


# ---------------------------------------------------------------------------
# numpy reference path

def _compute_kincache_numpy(model, cfg, vel):
    kc = KinCache()
    kc.cfg = cfg
    R_b = quat_to_rot(cfg.base_quat)
    p_b = cfg.base_pos
    kc.R_b, kc.p_b = R_b, p_b
    kc.base_com_w = p_b + R_b @ model.base_com
    kc._M = kc._h = kc._G = kc._J_feet = None

    q_leg = cfg.q[:12].reshape(4, 3)

    R = [None] * 3
    o = [None] * 3
    axis = [None] * 3
    com = [None] * 3
    I_w = [None] * 3
    R_parent = np.broadcast_to(R_b, (4, 3, 3))
    o_parent = p_b + model.hip_offsets @ R_b.T
    for lv in range(3):
        ax_local = model.leg_axes[lv]
        axis[lv] = np.matmul(R_parent, ax_local[:, :, None])[:, :, 0]
        R[lv] = np.matmul(R_parent, rodrigues_rows(ax_local, q_leg[:, lv]))
        o[lv] = o_parent
        L = model.leg_lengths[lv]
        drop = R[lv][:, :, 2] * (-L[:, None])
        com[lv] = o[lv] + 0.5 * drop
        I_loc = model.leg_inertias[lv]
        I_w[lv] = np.matmul(np.matmul(R[lv], I_loc), R[lv].transpose(0, 2, 1))
        R_parent = R[lv]
        o_parent = o[lv] + drop
    kc.R = np.stack(R)
    kc.o = np.stack(o)
    kc.axis = np.stack(axis)
    kc.com = np.stack(com)
    kc.I_w = np.stack(I_w)
    kc.foot = o_parent

    if model.has_arm:
        _arm_fk(model, cfg, kc)
    else:
        kc.p_ee = kc.R_ee = None

    msum = model.base_mass * kc.base_com_w + np.einsum(
        "lg,lgi->i", model.leg_masses, kc.com)
    if model.has_arm:
        msum = msum + np.einsum("j,ji->i", model.arm_masses, np.stack(kc.arm_com))
    kc.total_mass = model.total_mass
    kc.com_robot = msum / model.total_mass

    kc.has_vel = vel
    if vel:
        _velocity_pass_numpy(model, cfg, kc)
    return kc


def _arm_fk(model, cfg, kc):
    arm_R, arm_o, arm_axis, arm_com, arm_I = [], [], [], [], []
    Rp = kc.R_b
    op = kc.p_b + kc.R_b @ model.arm_mount
    for j in range(model.n_arm):
        oj = op + Rp @ model.arm_offsets[j]
        a_w = Rp @ model.arm_axes[j]
        Rj = Rp @ _rodrigues(model.arm_axes[j], cfg.q[12 + j])
        arm_o.append(oj)
        arm_axis.append(a_w)
        arm_R.append(Rj)
        arm_com.append(oj + Rj @ model.arm_coms[j])
        arm_I.append(Rj @ model.arm_inertias[j] @ Rj.T)
        Rp, op = Rj, oj
    kc.arm_R, kc.arm_o, kc.arm_axis = arm_R, arm_o, arm_axis
    kc.arm_com, kc.arm_I_w = arm_com, arm_I
    kc.p_ee = arm_o[-1] + arm_R[-1] @ model.arm_ee_offset
    kc.R_ee = arm_R[-1]


def _arm_vel(model, cfg, kc):
    k = model.n_arm
    w_b, v_b = kc.w_b, kc.v_b
    arm_w, arm_vcom, arm_alpha, arm_acom = [], [], [], []
    wp = w_b
    rm = kc.arm_o[0] - kc.p_b
    vp = v_b + cross(w_b, rm)
    ap = cross(w_b, cross(w_b, rm))
    alp = np.zeros(3)
    for j in range(k):
        qd = cfg.qd[12 + j]
        ax = kc.arm_axis[j]
        wj = wp + qd * ax
        alj = alp + qd * cross(wp, ax)
        rc = kc.arm_com[j] - kc.arm_o[j]
        arm_w.append(wj)
        arm_alpha.append(alj)
        arm_vcom.append(vp + cross(wj, rc))
        arm_acom.append(ap + cross(alj, rc) + cross(wj, cross(wj, rc)))
        if j + 1 < k:
            rn = kc.arm_o[j + 1] - kc.arm_o[j]
            vp = vp + cross(wj, rn)
            ap = ap + cross(alj, rn) + cross(wj, cross(wj, rn))
        wp, alp = wj, alj
    re = kc.p_ee - kc.arm_o[-1]
    kc.ee_vel = vp + cross(arm_w[-1], re)
    kc.ee_jdv = ap + cross(arm_alpha[-1], re) + cross(arm_w[-1], cross(arm_w[-1], re))
    kc.ee_w = arm_w[-1]
    kc.ee_alpha_jdv = arm_alpha[-1]
    kc.arm_w, kc.arm_vcom = arm_w, arm_vcom
    kc.arm_alpha, kc.arm_acom = arm_alpha, arm_acom


def _rodrigues(axis, angle):
    c, s = np.cos(angle), np.sin(angle)
    K = skew(axis)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def _velocity_pass_numpy(model, cfg, kc):
    """Twists plus coordinate accelerations at qdd=0 (Jdot*qd terms)."""
    w_b, v_b = cfg.base_ang, cfg.base_lin
    kc.w_b, kc.v_b = w_b, v_b
    qd_leg = cfg.qd[:12].reshape(4, 3)

    w = [None] * 3
    v_com = [None] * 3
    alpha = [None] * 3
    a_com = [None] * 3

    r0 = kc.o[0] - kc.p_b
    w_parent = np.broadcast_to(w_b, (4, 3))
    v_parent = v_b + cross_rows(np.broadcast_to(w_b, (4, 3)), r0)
    a_parent = cross_rows(np.broadcast_to(w_b, (4, 3)),
                          cross_rows(np.broadcast_to(w_b, (4, 3)), r0))
    al_parent = np.zeros((4, 3))
    for lv in range(3):
        qd = qd_leg[:, lv][:, None]
        ax = kc.axis[lv]
        w[lv] = w_parent + qd * ax
        alpha[lv] = al_parent + qd * cross_rows(w_parent, ax)
        rc = kc.com[lv] - kc.o[lv]
        v_com[lv] = v_parent + cross_rows(w[lv], rc)
        a_com[lv] = a_parent + cross_rows(alpha[lv], rc) \
            + cross_rows(w[lv], cross_rows(w[lv], rc))
        rn = (kc.o[lv + 1] - kc.o[lv]) if lv < 2 else (kc.foot - kc.o[2])
        dv = cross_rows(w[lv], rn)
        v_parent = v_parent + dv
        a_parent = a_parent + cross_rows(alpha[lv], rn) + cross_rows(w[lv], dv)
        w_parent = w[lv]
        al_parent = alpha[lv]
    kc.foot_vel = v_parent
    kc.foot_jdv = a_parent
    kc.w = np.stack(w)
    kc.v_com = np.stack(v_com)
    kc.alpha = np.stack(alpha)
    kc.a_com = np.stack(a_com)

    if model.has_arm:
        _arm_vel(model, cfg, kc)

    rb = kc.base_com_w - kc.p_b
    acb = cross(w_b, cross(w_b, rb))
    kc.base_com_acc = acb
    vcb = v_b + cross(w_b, rb)
    msum_v = model.base_mass * vcb + np.einsum(
        "lg,lgi->i", model.leg_masses, kc.v_com)
    msum_a = model.base_mass * acb + np.einsum(
        "lg,lgi->i", model.leg_masses, kc.a_com)
    if model.has_arm:
        msum_v = msum_v + np.einsum("j,ji->i", model.arm_masses, np.stack(kc.arm_vcom))
        msum_a = msum_a + np.einsum("j,ji->i", model.arm_masses, np.stack(kc.arm_acom))
    kc.com_vel = msum_v / model.total_mass
    kc.com_jdv = msum_a / model.total_mass


# ---------------------------------------------------------------------------
# Jacobians

def foot_jacobians(model, kc):
    """Linear point Jacobians of the four feet, stacked (4, 3, nv)."""
    if kc._J_feet is not None:
        return kc._J_feet
    nv = model.nv
    J = np.zeros((4, 3, nv))
    J[:, 0, 0] = J[:, 1, 1] = J[:, 2, 2] = 1.0
    r = kc.foot - kc.p_b
    J[:, :, 3:6] = -skew_rows(r)
    for lv in range(3):
        u = cross_rows(kc.axis[lv], kc.foot - kc.o[lv])
        cols = 6 + 3 * np.arange(4) + lv
        J[np.arange(4), :, cols] = u
    return J


def com_jacobian(model, kc):
    """Mass-weighted CoM Jacobian (3, nv)."""
    if kc._M is not None:
        return kc._M[:3, :] / model.total_mass
    return _linear_momentum_rows(model, kc) / model.total_mass


def frame_jacobian(model, cfg_or_cache, frame):
    """World-aligned 6 x nv spatial Jacobian (linear rows, then angular)."""
    kc = cfg_or_cache if isinstance(cfg_or_cache, KinCache) \
        else compute_kincache(model, cfg_or_cache)
    nv = model.nv
    J = np.zeros((6, nv))
    if frame == "base":
        J[:3, :3] = np.eye(3)
        J[3:, 3:6] = np.eye(3)
        return J
    if frame in FOOT_FRAMES:
        g = FOOT_FRAMES.index(frame)
        J[:3, :3] = np.eye(3)
        J[:3, 3:6] = -skew(kc.foot[g] - kc.p_b)
        J[3:, 3:6] = np.eye(3)
        for lv in range(3):
            col = 6 + 3 * g + lv
            J[:3, col] = cross(kc.axis[lv][g], kc.foot[g] - kc.o[lv][g])
            J[3:, col] = kc.axis[lv][g]
        return J
    if frame == "arm_ee":
        if not model.has_arm:
            raise KeyError("model has no arm; frame 'arm_ee' undefined")
        J[:3, :3] = np.eye(3)
        J[:3, 3:6] = -skew(kc.p_ee - kc.p_b)
        J[3:, 3:6] = np.eye(3)
        for j in range(model.n_arm):
            col = 6 + 12 + j
            J[:3, col] = cross(kc.arm_axis[j], kc.p_ee - kc.arm_o[j])
            J[3:, col] = kc.arm_axis[j]
        return J
    raise KeyError(f"unknown frame '{frame}'")


# ---------------------------------------------------------------------------
# Mass matrix

_PAIRS = [(j, m) for j in range(3) for m in range(j, 3)]


def _linear_momentum_rows(model, kc):
    """Rows mapping generalized velocity to total linear momentum (3, nv)."""
    nv = model.nv
    rows = np.zeros((3, nv))
    m_tot = model.total_mass
    rows[0, 0] = rows[1, 1] = rows[2, 2] = m_tot
    first = model.base_mass * (kc.base_com_w - kc.p_b) + np.einsum(
        "lg,lgi->i", model.leg_masses, kc.com - kc.p_b)
    if model.n_arm:
        first = first + np.einsum(
            "j,ji->i", model.arm_masses, np.stack(kc.arm_com) - kc.p_b)
    rows[:, 3:6] = -skew(first)
    masses = model.leg_masses
    for j in range(3):
        wsum = np.zeros((4, 3))
        mtotj = np.zeros(4)
        for m in range(j, 3):
            wsum += masses[m][:, None] * kc.com[m]
            mtotj += masses[m]
        u = cross_rows(kc.axis[j], wsum - mtotj[:, None] * kc.o[j])
        cols = 6 + 3 * np.arange(4) + j
        rows[:, cols] = u.T
    for j in range(model.n_arm):
        wsum = np.zeros(3)
        mt = 0.0
        for m in range(j, model.n_arm):
            wsum += model.arm_masses[m] * kc.arm_com[m]
            mt += model.arm_masses[m]
        rows[:, 18 + j] = cross(kc.arm_axis[j], wsum - mt * kc.arm_o[j])
    return rows


def _arm_mass_blocks(model, kc, M):
    """Arm columns plus the arm links' contribution to the base block."""
    p_b = kc.p_b
    k = model.n_arm
    for j in range(k):
        m = model.arm_masses[j]
        r = kc.arm_com[j] - p_b
        S = skew(r)
        M[:3, :3] += m * np.eye(3)
        M[:3, 3:6] += -m * S
        M[3:6, :3] += m * S
        M[3:6, 3:6] += kc.arm_I_w[j] - m * (S @ S)
    for j in range(k):
        a_j = kc.arm_axis[j]
        lin = np.zeros(3)
        ang = np.zeros(3)
        for m in range(j, k):
            um = cross(a_j, kc.arm_com[m] - kc.arm_o[j])
            mm = model.arm_masses[m]
            lin += mm * um
            ang += cross(kc.arm_com[m] - p_b, mm * um) + kc.arm_I_w[m] @ a_j
        col = 18 + j
        M[0:3, col] = lin
        M[3:6, col] = ang
        M[col, 0:3] = lin
        M[col, 3:6] = ang
        for kk in range(j, k):
            a_k = kc.arm_axis[kk]
            val = 0.0
            for m in range(kk, k):
                uj = cross(a_j, kc.arm_com[m] - kc.arm_o[j])
                uk = cross(a_k, kc.arm_com[m] - kc.arm_o[kk])
                val += model.arm_masses[m] * float(uj @ uk) \
                    + float(a_j @ (kc.arm_I_w[m] @ a_k))
            M[18 + j, 18 + kk] = val
            M[18 + kk, 18 + j] = val


def mass_matrix(model, kc):
    """Joint-space inertia matrix, (nv, nv), symmetric positive definite."""
    if kc._M is not None:
        return kc._M
    nv = model.nv
    M = np.zeros((nv, nv))
    p_b = kc.p_b
    masses = model.leg_masses

    coms = [kc.base_com_w] + [kc.com[lv][g] for lv in range(3) for g in range(4)]
    ms = [model.base_mass] + [masses[lv, g] for lv in range(3) for g in range(4)]
    Is = [kc.R_b @ model.base_inertia @ kc.R_b.T] \
        + [kc.I_w[lv][g] for lv in range(3) for g in range(4)]
    coms = np.array(coms)
    ms = np.array(ms)
    Is = np.array(Is)

    r = coms - p_b
    S = skew_rows(r)
    mS = ms[:, None, None] * S
    M[:3, :3] = np.diag([ms.sum()] * 3)
    M[:3, 3:6] = -mS.sum(axis=0)
    M[3:6, :3] = -M[:3, 3:6]
    M[3:6, 3:6] = Is.sum(axis=0) - np.einsum("nij,njk->ik", mS, S)

    u = {}
    for j, m in _PAIRS:
        u[(j, m)] = cross_rows(kc.axis[j], kc.com[m] - kc.o[j])
    Isub = [None] * 3
    Isub[2] = kc.I_w[2]
    Isub[1] = Isub[2] + kc.I_w[1]
    Isub[0] = Isub[1] + kc.I_w[0]

    cols4 = 6 + 3 * np.arange(4)
    for j in range(3):
        lin = np.zeros((4, 3))
        ang = np.matmul(Isub[j], kc.axis[j][:, :, None])[:, :, 0]
        for m in range(j, 3):
            mu = masses[m][:, None] * u[(j, m)]
            lin += mu
            ang += cross_rows(kc.com[m] - p_b, mu)
        cols = cols4 + j
        M[0:3, cols] = lin.T
        M[3:6, cols] = ang.T
        M[cols, 0:3] = lin
        M[cols, 3:6] = ang
    for j in range(3):
        for kcol in range(j, 3):
            val = np.einsum("gi,gij,gj->g", kc.axis[j], Isub[kcol], kc.axis[kcol])
            for m in range(kcol, 3):
                val = val + masses[m] * np.einsum("gi,gi->g", u[(j, m)], u[(kcol, m)])
            M[cols4 + j, cols4 + kcol] = val
            if kcol != j:
                M[cols4 + kcol, cols4 + j] = val

    if model.has_arm:
        _arm_mass_blocks(model, kc, M)
    return M


# ---------------------------------------------------------------------------
# Bias forces (Coriolis/centrifugal + gravity)

def _project_link_forces(model, kc, F_legs, N_legs, F_base, N_base,
                         F_arm=None, N_arm=None):
    """Map per-link CoM wrenches to generalized forces.

    F_legs/N_legs are (3,4,3), wrenches act at link CoMs.
    """
    nv = model.nv
    out = np.zeros(nv)
    W_legs = [N_legs[lv] + cross_rows(kc.com[lv], F_legs[lv]) for lv in range(3)]

    Fsum = F_base.copy()
    Wsum = N_base + cross(kc.base_com_w, F_base)
    for lv in range(3):
        Fsum = Fsum + F_legs[lv].sum(axis=0)
        Wsum = Wsum + W_legs[lv].sum(axis=0)
    if F_arm is not None:
        for j in range(model.n_arm):
            Fsum = Fsum + F_arm[j]
            Wsum = Wsum + N_arm[j] + cross(kc.arm_com[j], F_arm[j])
    out[0:3] = Fsum
    out[3:6] = Wsum - cross(kc.p_b, Fsum)

    Fc = F_legs[2]
    Wc = W_legs[2]
    cols4 = 6 + 3 * np.arange(4)
    for j in (2, 1, 0):
        T = Wc - cross_rows(kc.o[j], Fc)
        out[cols4 + j] = np.einsum("gi,gi->g", kc.axis[j], T)
        if j > 0:
            Fc = Fc + F_legs[j - 1]
            Wc = Wc + W_legs[j - 1]
    if F_arm is not None and model.n_arm:
        k = model.n_arm
        Fc = F_arm[k - 1].copy()
        Wc = N_arm[k - 1] + cross(kc.arm_com[k - 1], F_arm[k - 1])
        for j in range(k - 1, -1, -1):
            out[18 + j] = float(kc.arm_axis[j] @ (Wc - cross(kc.arm_o[j], Fc)))
            if j > 0:
                Fc = Fc + F_arm[j - 1]
                Wc = Wc + N_arm[j - 1] + cross(kc.arm_com[j - 1], F_arm[j - 1])
    return out


def _arm_link_wrenches(model, kc, vel):
    if vel:
        F_arm = [model.arm_masses[j] * (kc.arm_acom[j] - G_VEC)
                 for j in range(model.n_arm)]
        N_arm = [kc.arm_I_w[j] @ kc.arm_alpha[j]
                 + cross(kc.arm_w[j], kc.arm_I_w[j] @ kc.arm_w[j])
                 for j in range(model.n_arm)]
    else:
        F_arm = [model.arm_masses[j] * (-G_VEC) for j in range(model.n_arm)]
        N_arm = [np.zeros(3)] * model.n_arm
    return F_arm, N_arm


def _apply_arm_wrenches(model, kc, vec, F_arm, N_arm):
    k = model.n_arm
    Fsum = np.zeros(3)
    Wsum = np.zeros(3)
    for j in range(k):
        Fsum += F_arm[j]
        Wsum += N_arm[j] + cross(kc.arm_com[j], F_arm[j])
    vec[0:3] += Fsum
    vec[3:6] += Wsum - cross(kc.p_b, Fsum)
    Fc = F_arm[k - 1].copy()
    Wc = N_arm[k - 1] + cross(kc.arm_com[k - 1], F_arm[k - 1])
    for j in range(k - 1, -1, -1):
        vec[18 + j] = float(kc.arm_axis[j] @ (Wc - cross(kc.arm_o[j], Fc)))
        if j > 0:
            Fc = Fc + F_arm[j - 1]
            Wc = Wc + N_arm[j - 1] + cross(kc.arm_com[j - 1], F_arm[j - 1])


def _arm_bias_rows(model, kc, h, G, vel):
    """Add arm wrenches into kernel-produced h and G (base + arm rows)."""
    _apply_arm_wrenches(model, kc, G, *_arm_link_wrenches(model, kc, vel=False))
    if h is not None:
        _apply_arm_wrenches(model, kc, h, *_arm_link_wrenches(model, kc, vel=vel))


def bias_forces(model, kc):
    """h(q, qd): gravity plus Coriolis/centrifugal, needs a velocity cache."""
    assert kc.has_vel, "bias_forces needs compute_kincache(..., vel=True)"
    if kc._h is not None:
        return kc._h
    F_legs, N_legs = [], []
    for lv in range(3):
        m = model.leg_masses[lv][:, None]
        F_legs.append(m * (kc.a_com[lv] - G_VEC))
        Iw = kc.I_w[lv]
        Nw = np.matmul(Iw, kc.alpha[lv][:, :, None])[:, :, 0] \
            + cross_rows(kc.w[lv], np.matmul(Iw, kc.w[lv][:, :, None])[:, :, 0])
        N_legs.append(Nw)
    I_b = kc.R_b @ model.base_inertia @ kc.R_b.T
    F_base = model.base_mass * (kc.base_com_acc - G_VEC)
    N_base = cross(kc.w_b, I_b @ kc.w_b)
    F_arm = N_arm = None
    if model.has_arm:
        F_arm, N_arm = _arm_link_wrenches(model, kc, vel=True)
    return _project_link_forces(model, kc, F_legs, N_legs, F_base, N_base,
                                F_arm, N_arm)


def gravity_forces(model, kc):
    """Pure gravity term of h (velocity-independent)."""
    if kc._G is not None:
        return kc._G
    F_legs = [model.leg_masses[lv][:, None] * np.broadcast_to(-G_VEC, (4, 3))
              for lv in range(3)]
    N_legs = [np.zeros((4, 3))] * 3
    F_base = model.base_mass * (-G_VEC)
    F_arm = N_arm = None
    if model.has_arm:
        F_arm, N_arm = _arm_link_wrenches(model, kc, vel=False)
    return _project_link_forces(model, kc, F_legs, N_legs, F_base, np.zeros(3),
                                F_arm, N_arm)


def dynamics_terms(model, cfg):
    """Mass matrix M and bias vector h for M qdd + h = S^T tau + Jc^T f."""
    cfg.check_dof(model)
    kc = compute_kincache(model, cfg, vel=True)
    return mass_matrix(model, kc), bias_forces(model, kc)


def forward_kinematics(model, cfg):
    """World foot positions (4,3), arm end effector (or None), robot CoM."""
    cfg.check_dof(model)
    kc = compute_kincache(model, cfg)
    return kc.foot.copy(), (None if kc.p_ee is None else kc.p_ee.copy()), \
        kc.com_robot.copy()


def integrate_config(cfg, v, dt):
    """Displace a configuration along generalized velocity v for dt.

    Base orientation integrates the world angular rate on the quaternion
    (renormalized); velocities carried in cfg are left untouched.
    """
    from .model import Configuration
    from .rotations import quat_integrate

    nj = cfg.q.shape[0]
    return Configuration(
        base_pos=cfg.base_pos + dt * v[0:3],
        base_quat=quat_integrate(cfg.base_quat, v[3:6], dt),
        q=cfg.q + dt * v[6:6 + nj],
        base_lin=cfg.base_lin, base_ang=cfg.base_ang, qd=cfg.qd)
