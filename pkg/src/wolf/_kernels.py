"""Numba kernels for the base+legs dynamics hot path.

The math mirrors wolf.dynamics exactly (tests assert agreement); these
exist only to keep a full control tick within the 1 kHz budget. When
numba is unavailable (or WOLF_NO_NUMBA is set) wolf.dynamics falls back
to its pure-numpy implementation.
"""

import os

import numpy as np

HAVE_NUMBA = False
if not os.environ.get("WOLF_NO_NUMBA"):
    try:
        from numba import njit
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        pass

if not HAVE_NUMBA:  # pragma: no cover
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap


@njit(cache=True, inline="always")
def _cross(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(cache=True)
def _rodrigues_into(axis, angle, R):
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    x, y, z = axis[0], axis[1], axis[2]
    R[0, 0] = c + t * x * x
    R[0, 1] = t * x * y - s * z
    R[0, 2] = t * x * z + s * y
    R[1, 0] = t * x * y + s * z
    R[1, 1] = c + t * y * y
    R[1, 2] = t * y * z - s * x
    R[2, 0] = t * x * z - s * y
    R[2, 1] = t * y * z + s * x
    R[2, 2] = c + t * z * z


@njit(cache=True)
def quad_dynamics_kernel(p_b, R_b, v_b, w_b, q_leg, qd_leg,
                         hip_off, axes, lengths, masses, inertias,
                         base_mass, base_com, base_I, nv, gz,
                         o, Rw, axw, com, Iw, foot,
                         w, vcom, alpha, acom,
                         foot_v, foot_jdv, J_feet,
                         M, h, G, aggregates):
    """Forward kinematics, velocity propagation, M, h, G for base + legs.

    Leg arrays are indexed [level, leg]. M/h/G cover the base and leg
    blocks of the full nv-sized system; arm contributions are added by
    the caller. aggregates returns mass-weighted CoM sums:
    [m*com, m*vcom, m*acom, base_com_w, base_com_acc] flattened (15,).
    """
    tmp = np.empty(3)
    tmp2 = np.empty(3)
    rvec = np.empty(3)

    base_com_w = np.empty(3)
    for i in range(3):
        base_com_w[i] = p_b[i] + R_b[i, 0] * base_com[0] \
            + R_b[i, 1] * base_com[1] + R_b[i, 2] * base_com[2]

    Rj = np.empty((3, 3))
    # ---- forward kinematics, per leg ------------------------------------
    for g in range(4):
        # parent transform starts at the base
        Rp = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                Rp[i, j] = R_b[i, j]
        op = np.empty(3)
        for i in range(3):
            op[i] = p_b[i] + R_b[i, 0] * hip_off[g, 0] \
                + R_b[i, 1] * hip_off[g, 1] + R_b[i, 2] * hip_off[g, 2]
        for lv in range(3):
            ax = axes[lv, g]
            for i in range(3):
                axw[lv, g, i] = Rp[i, 0] * ax[0] + Rp[i, 1] * ax[1] + Rp[i, 2] * ax[2]
                o[lv, g, i] = op[i]
            _rodrigues_into(ax, q_leg[g, lv], Rj)
            for i in range(3):
                for j in range(3):
                    Rw[lv, g, i, j] = Rp[i, 0] * Rj[0, j] + Rp[i, 1] * Rj[1, j] \
                        + Rp[i, 2] * Rj[2, j]
            L = lengths[lv, g]
            for i in range(3):
                drop = -Rw[lv, g, i, 2] * L
                com[lv, g, i] = op[i] + 0.5 * drop
                tmp[i] = op[i] + drop
            # world inertia R I R^T
            for i in range(3):
                for j in range(3):
                    s = 0.0
                    for k in range(3):
                        rik = Rw[lv, g, i, 0] * inertias[lv, g, 0, k] \
                            + Rw[lv, g, i, 1] * inertias[lv, g, 1, k] \
                            + Rw[lv, g, i, 2] * inertias[lv, g, 2, k]
                        s += rik * Rw[lv, g, j, k]
                    Iw[lv, g, i, j] = s
            for i in range(3):
                for j in range(3):
                    Rp[i, j] = Rw[lv, g, i, j]
                op[i] = tmp[i]
        for i in range(3):
            foot[g, i] = op[i]

    # ---- velocity and qdd=0 acceleration propagation ---------------------
    base_com_acc = np.empty(3)
    _cross(w_b, base_com_w - p_b, tmp)
    _cross(w_b, tmp, base_com_acc)
    for g in range(4):
        wp = np.empty(3)
        vp = np.empty(3)
        ap = np.empty(3)
        alp = np.zeros(3)
        for i in range(3):
            rvec[i] = o[0, g, i] - p_b[i]
        _cross(w_b, rvec, tmp)
        for i in range(3):
            wp[i] = w_b[i]
            vp[i] = v_b[i] + tmp[i]
        _cross(w_b, tmp, ap)
        for lv in range(3):
            qd = qd_leg[g, lv]
            _cross(wp, axw[lv, g], tmp)
            for i in range(3):
                w[lv, g, i] = wp[i] + qd * axw[lv, g, i]
                alpha[lv, g, i] = alp[i] + qd * tmp[i]
            for i in range(3):
                rvec[i] = com[lv, g, i] - o[lv, g, i]
            _cross(w[lv, g], rvec, tmp)
            for i in range(3):
                vcom[lv, g, i] = vp[i] + tmp[i]
            _cross(w[lv, g], tmp, tmp2)
            _cross(alpha[lv, g], rvec, tmp)
            for i in range(3):
                acom[lv, g, i] = ap[i] + tmp[i] + tmp2[i]
            # advance the propagation point to the next joint / foot
            if lv < 2:
                for i in range(3):
                    rvec[i] = o[lv + 1, g, i] - o[lv, g, i]
            else:
                for i in range(3):
                    rvec[i] = foot[g, i] - o[2, g, i]
            _cross(w[lv, g], rvec, tmp)
            for i in range(3):
                vp[i] = vp[i] + tmp[i]
            _cross(w[lv, g], tmp, tmp2)
            _cross(alpha[lv, g], rvec, tmp)
            for i in range(3):
                ap[i] = ap[i] + tmp[i] + tmp2[i]
                wp[i] = w[lv, g, i]
                alp[i] = alpha[lv, g, i]
        for i in range(3):
            foot_v[g, i] = vp[i]
            foot_jdv[g, i] = ap[i]

    # ---- foot point Jacobians -------------------------------------------
    for g in range(4):
        for i in range(3):
            for j in range(nv):
                J_feet[g, i, j] = 0.0
        J_feet[g, 0, 0] = 1.0
        J_feet[g, 1, 1] = 1.0
        J_feet[g, 2, 2] = 1.0
        for i in range(3):
            rvec[i] = foot[g, i] - p_b[i]
        # -skew(r)
        J_feet[g, 0, 4] = rvec[2]
        J_feet[g, 0, 5] = -rvec[1]
        J_feet[g, 1, 3] = -rvec[2]
        J_feet[g, 1, 5] = rvec[0]
        J_feet[g, 2, 3] = rvec[1]
        J_feet[g, 2, 4] = -rvec[0]
        for lv in range(3):
            for i in range(3):
                rvec[i] = foot[g, i] - o[lv, g, i]
            _cross(axw[lv, g], rvec, tmp)
            col = 6 + 3 * g + lv
            for i in range(3):
                J_feet[g, i, col] = tmp[i]

    # ---- mass matrix ------------------------------------------------------
    for i in range(nv):
        for j in range(nv):
            M[i, j] = 0.0
    m_tot = base_mass
    for lv in range(3):
        for g in range(4):
            m_tot += masses[lv, g]
    for i in range(3):
        M[i, i] = m_tot
    # base angular block: sum of I_w - m S(r)S(r), and first moments
    fm = np.zeros(3)                      # sum m * (c - p_b)
    for i in range(3):
        fm[i] = base_mass * (base_com_w[i] - p_b[i])
    ang = np.zeros((3, 3))
    # base link
    bI = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                rik = R_b[i, 0] * base_I[0, k] + R_b[i, 1] * base_I[1, k] \
                    + R_b[i, 2] * base_I[2, k]
                s += rik * R_b[j, k]
            bI[i, j] = s
    for i in range(3):
        rvec[i] = base_com_w[i] - p_b[i]
    rr = rvec[0] * rvec[0] + rvec[1] * rvec[1] + rvec[2] * rvec[2]
    for i in range(3):
        for j in range(3):
            ang[i, j] += bI[i, j] + base_mass * ((rr if i == j else 0.0)
                                                 - rvec[i] * rvec[j])
    for lv in range(3):
        for g in range(4):
            m = masses[lv, g]
            for i in range(3):
                rvec[i] = com[lv, g, i] - p_b[i]
                fm[i] += m * rvec[i]
            rr = rvec[0] * rvec[0] + rvec[1] * rvec[1] + rvec[2] * rvec[2]
            for i in range(3):
                for j in range(3):
                    ang[i, j] += Iw[lv, g, i, j] + m * ((rr if i == j else 0.0)
                                                        - rvec[i] * rvec[j])
    for i in range(3):
        for j in range(3):
            M[3 + i, 3 + j] = ang[i, j]
    # -m S(fm/m) coupling: M[:3,3:6] = -skew(fm)
    M[0, 4] = fm[2]
    M[0, 5] = -fm[1]
    M[1, 3] = -fm[2]
    M[1, 5] = fm[0]
    M[2, 3] = fm[1]
    M[2, 4] = -fm[0]
    M[3, 1] = -fm[2]
    M[3, 2] = fm[1]
    M[4, 0] = fm[2]
    M[4, 2] = -fm[0]
    M[5, 0] = -fm[1]
    M[5, 1] = fm[0]

    u = np.empty((3, 3, 3))   # u[j, m] for m >= j, per leg (reused)
    for g in range(4):
        for j in range(3):
            for m in range(j, 3):
                for i in range(3):
                    rvec[i] = com[m, g, i] - o[j, g, i]
                _cross(axw[j, g], rvec, tmp)
                for i in range(3):
                    u[j, m, i] = tmp[i]
        for j in range(3):
            col = 6 + 3 * g + j
            lin = np.zeros(3)
            angc = np.zeros(3)
            for m in range(j, 3):
                mm = masses[m, g]
                for i in range(3):
                    lin[i] += mm * u[j, m, i]
                for i in range(3):
                    rvec[i] = com[m, g, i] - p_b[i]
                    tmp2[i] = mm * u[j, m, i]
                _cross(rvec, tmp2, tmp)
                for i in range(3):
                    s = Iw[m, g, i, 0] * axw[j, g, 0] + Iw[m, g, i, 1] * axw[j, g, 1] \
                        + Iw[m, g, i, 2] * axw[j, g, 2]
                    angc[i] += tmp[i] + s
            for i in range(3):
                M[i, col] = lin[i]
                M[col, i] = lin[i]
                M[3 + i, col] = angc[i]
                M[col, 3 + i] = angc[i]
            for kcol in range(j, 3):
                colk = 6 + 3 * g + kcol
                val = 0.0
                for m in range(kcol, 3):
                    mm = masses[m, g]
                    dot_u = u[j, m, 0] * u[kcol, m, 0] + u[j, m, 1] * u[kcol, m, 1] \
                        + u[j, m, 2] * u[kcol, m, 2]
                    aIa = 0.0
                    for i in range(3):
                        s = Iw[m, g, i, 0] * axw[kcol, g, 0] \
                            + Iw[m, g, i, 1] * axw[kcol, g, 1] \
                            + Iw[m, g, i, 2] * axw[kcol, g, 2]
                        aIa += axw[j, g, i] * s
                    val += mm * dot_u + aIa
                M[col, colk] = val
                M[colk, col] = val

    # ---- bias h and gravity G ---------------------------------------------
    for i in range(nv):
        h[i] = 0.0
        G[i] = 0.0
    # per-link wrenches; W about world origin
    Fb = np.empty(3)
    Wb = np.empty(3)
    for i in range(3):
        Fb[i] = base_mass * base_com_acc[i]
    Fb[2] += base_mass * gz
    # N_base = w x (I w)
    for i in range(3):
        tmp[i] = bI[i, 0] * w_b[0] + bI[i, 1] * w_b[1] + bI[i, 2] * w_b[2]
    _cross(w_b, tmp, tmp2)
    _cross(base_com_w, Fb, Wb)
    for i in range(3):
        Wb[i] += tmp2[i]
    Fsum = np.zeros(3)
    Wsum = np.zeros(3)
    for i in range(3):
        Fsum[i] = Fb[i]
        Wsum[i] = Wb[i]
    GFsum = np.zeros(3)
    GWsum = np.zeros(3)
    GFsum[2] = base_mass * gz
    _cross(base_com_w, GFsum, GWsum)

    F = np.empty((3, 4, 3))
    W = np.empty((3, 4, 3))
    for lv in range(3):
        for g in range(4):
            m = masses[lv, g]
            for i in range(3):
                F[lv, g, i] = m * acom[lv, g, i]
            F[lv, g, 2] += m * gz
            for i in range(3):
                tmp[i] = Iw[lv, g, i, 0] * alpha[lv, g, 0] \
                    + Iw[lv, g, i, 1] * alpha[lv, g, 1] \
                    + Iw[lv, g, i, 2] * alpha[lv, g, 2]
                tmp2[i] = Iw[lv, g, i, 0] * w[lv, g, 0] \
                    + Iw[lv, g, i, 1] * w[lv, g, 1] \
                    + Iw[lv, g, i, 2] * w[lv, g, 2]
            _cross(w[lv, g], tmp2, rvec)
            nlg0 = tmp[0] + rvec[0]
            nlg1 = tmp[1] + rvec[1]
            nlg2 = tmp[2] + rvec[2]
            _cross(com[lv, g], F[lv, g], tmp)
            W[lv, g, 0] = nlg0 + tmp[0]
            W[lv, g, 1] = nlg1 + tmp[1]
            W[lv, g, 2] = nlg2 + tmp[2]
            for i in range(3):
                Fsum[i] += F[lv, g, i]
                Wsum[i] += W[lv, g, i]
            GFsum[2] += m * gz
            GWsum[0] += com[lv, g, 1] * m * gz
            GWsum[1] += -com[lv, g, 0] * m * gz

    for i in range(3):
        h[i] = Fsum[i]
        G[i] = 0.0
    G[2] = GFsum[2]
    _cross(p_b, Fsum, tmp)
    for i in range(3):
        h[3 + i] = Wsum[i] - tmp[i]
    _cross(p_b, GFsum, tmp)
    for i in range(3):
        G[3 + i] = GWsum[i] - tmp[i]

    # leg joint rows: cumulative subtree sums from the tip
    for g in range(4):
        Fc = np.zeros(3)
        Wc = np.zeros(3)
        GFc = np.zeros(3)
        GWc = np.zeros(3)
        for j in range(2, -1, -1):
            m = masses[j, g]
            for i in range(3):
                Fc[i] += F[j, g, i]
                Wc[i] += W[j, g, i]
            GFc[2] += m * gz
            GWc[0] += com[j, g, 1] * m * gz
            GWc[1] += -com[j, g, 0] * m * gz
            _cross(o[j, g], Fc, tmp)
            col = 6 + 3 * g + j
            h[col] = axw[j, g, 0] * (Wc[0] - tmp[0]) + axw[j, g, 1] * (Wc[1] - tmp[1]) \
                + axw[j, g, 2] * (Wc[2] - tmp[2])
            _cross(o[j, g], GFc, tmp)
            G[col] = axw[j, g, 0] * (GWc[0] - tmp[0]) + axw[j, g, 1] * (GWc[1] - tmp[1]) \
                + axw[j, g, 2] * (GWc[2] - tmp[2])

    # aggregates: weighted com sums for base+legs
    for i in range(3):
        aggregates[i] = base_mass * base_com_w[i]
        aggregates[3 + i] = base_mass * (v_b[i])
        aggregates[6 + i] = base_mass * base_com_acc[i]
        aggregates[9 + i] = base_com_w[i]
        aggregates[12 + i] = base_com_acc[i]
    # base com velocity includes w x r term
    for i in range(3):
        rvec[i] = base_com_w[i] - p_b[i]
    _cross(w_b, rvec, tmp)
    for i in range(3):
        aggregates[3 + i] += base_mass * tmp[i]
    for lv in range(3):
        for g in range(4):
            m = masses[lv, g]
            for i in range(3):
                aggregates[i] += m * com[lv, g, i]
                aggregates[3 + i] += m * vcom[lv, g, i]
                aggregates[6 + i] += m * acom[lv, g, i]
