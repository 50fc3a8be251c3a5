import numpy as np
import pytest

from wolf.dynamics import (G_VEC, com_jacobian, compute_kincache, dynamics_terms,
                           foot_jacobians, forward_kinematics, frame_jacobian,
                           gravity_forces, integrate_config, mass_matrix)
from wolf.model import Configuration, canonical_model
from wolf.rotations import quat_from_axis_angle, quat_normalize

RNG = np.random.default_rng(42)


def random_config(model, rng=RNG, vel_scale=1.0):
    quat = quat_normalize(rng.normal(size=4))
    lo, hi = model.q_lower, model.q_upper
    q = lo + (hi - lo) * rng.uniform(0.15, 0.85, size=model.n_joints)
    return Configuration(
        base_pos=rng.normal(scale=0.3, size=3) + np.array([0, 0, 0.4]),
        base_quat=quat, q=q,
        base_lin=vel_scale * rng.normal(scale=0.5, size=3),
        base_ang=vel_scale * rng.normal(scale=0.5, size=3),
        qd=vel_scale * rng.normal(scale=1.0, size=model.n_joints))


# --- forward kinematics -----------------------------------------------------

def test_straight_leg_foot_below_hip():
    model = canonical_model()
    cfg = Configuration(np.zeros(3), [1, 0, 0, 0], np.zeros(12))
    feet, _, _ = forward_kinematics(model, cfg)
    for g in range(4):
        expect = model.hip_offsets[g] + [0.0, 0.0, -0.4]
        np.testing.assert_allclose(feet[g], expect, atol=1e-14)


def test_knee_right_angle():
    # hip pitch 0, knee pi/2 -> foot 0.2 forward, 0.2 below the hip
    model = canonical_model()
    q = np.zeros(12)
    q[2] = np.pi / 2  # LF knee
    cfg = Configuration(np.zeros(3), [1, 0, 0, 0], q)
    feet, _, _ = forward_kinematics(model, cfg)
    expect = model.hip_offsets[0] + [0.2, 0.0, -0.2]
    np.testing.assert_allclose(feet[0], expect, atol=1e-14)


def test_symmetric_stance_com_centered():
    model = canonical_model()
    cfg = model.default_config()
    _, _, com = forward_kinematics(model, cfg)
    np.testing.assert_allclose(com[:2], cfg.base_pos[:2], atol=1e-12)


def test_unknown_frame():
    model = canonical_model()
    with pytest.raises(KeyError, match="unknown frame"):
        frame_jacobian(model, model.default_config(), "left_wing")
    with pytest.raises(KeyError, match="no arm"):
        frame_jacobian(model, model.default_config(), "arm_ee")


# --- Jacobians vs finite differences ----------------------------------------

def fd_frame_jacobian(model, cfg, frame, eps=1e-6):
    """Central-difference spatial Jacobian of a frame (independent oracle)."""
    from wolf.rotations import quat_to_rot

    def frame_pos_rot(c):
        kc = compute_kincache(model, c)
        if frame == "base":
            return kc.p_b.copy(), kc.R_b.copy()
        if frame == "arm_ee":
            return kc.p_ee.copy(), kc.R_ee.copy()
        g = ["LF_foot", "RF_foot", "LH_foot", "RH_foot"].index(frame)
        return kc.foot[g].copy(), kc.R[2][g].copy()

    nv = model.nv
    J = np.zeros((6, nv))
    for k in range(nv):
        dv = np.zeros(nv)
        dv[k] = 1.0
        pp, Rp = frame_pos_rot(integrate_config(cfg, dv, eps))
        pm, Rm = frame_pos_rot(integrate_config(cfg, dv, -eps))
        J[:3, k] = (pp - pm) / (2 * eps)
        dR = (Rp - Rm) / (2 * eps)
        W = dR @ frame_pos_rot(cfg)[1].T
        J[3:, k] = [W[2, 1], W[0, 2], W[1, 0]]
    return J


@pytest.mark.parametrize("with_arm", [False, True])
def test_frame_jacobians_match_finite_differences(with_arm):
    model = canonical_model(with_arm=with_arm)
    frames = ["base", "LF_foot", "RH_foot"] + (["arm_ee"] if with_arm else [])
    for trial in range(4):
        cfg = random_config(model)
        kc = compute_kincache(model, cfg)
        for frame in frames:
            J = frame_jacobian(model, kc, frame)
            J_fd = fd_frame_jacobian(model, cfg, frame)
            scale = max(1.0, np.abs(J_fd).max())
            np.testing.assert_allclose(J, J_fd, atol=1e-6 * scale,
                                       err_msg=f"{frame} trial {trial}")


def test_foot_jacobians_match_frame_jacobian():
    model = canonical_model()
    cfg = random_config(model)
    kc = compute_kincache(model, cfg)
    J4 = foot_jacobians(model, kc)
    for g, frame in enumerate(["LF_foot", "RF_foot", "LH_foot", "RH_foot"]):
        np.testing.assert_allclose(J4[g], frame_jacobian(model, kc, frame)[:3],
                                   atol=1e-12)


def test_base_translation_block_is_identity():
    model = canonical_model()
    J = frame_jacobian(model, model.default_config(), "LF_foot")
    np.testing.assert_array_equal(J[:3, :3], np.eye(3))


def test_com_jacobian_matches_finite_differences():
    model = canonical_model(with_arm=True)
    for _ in range(3):
        cfg = random_config(model)
        kc = compute_kincache(model, cfg)
        Jc = com_jacobian(model, kc)
        eps = 1e-6
        for k in range(model.nv):
            dv = np.zeros(model.nv)
            dv[k] = 1.0
            _, _, cp = forward_kinematics(model, integrate_config(cfg, dv, eps))
            _, _, cm = forward_kinematics(model, integrate_config(cfg, dv, -eps))
            np.testing.assert_allclose(Jc[:, k], (cp - cm) / (2 * eps), atol=1e-6)


def test_straight_leg_singularity_rank():
    model = canonical_model()
    cfg = Configuration(np.zeros(3), [1, 0, 0, 0], np.zeros(12))
    kc = compute_kincache(model, cfg)
    J = foot_jacobians(model, kc)[0][:, 6:9]  # LF joint block, 3x3
    s = np.linalg.svd(J, compute_uv=False)
    assert s[1] > 1e-8 and s[2] < 1e-10  # rank 2 of 3


# --- dynamics ---------------------------------------------------------------

@pytest.mark.parametrize("with_arm", [False, True])
def test_mass_matrix_symmetric_positive_definite(with_arm):
    model = canonical_model(with_arm=with_arm)
    rng = np.random.default_rng(7)
    n_samples = 1000 if not with_arm else 200
    for _ in range(n_samples):
        cfg = random_config(model, rng=rng)
        M = mass_matrix(model, compute_kincache(model, cfg))
        assert np.abs(M - M.T).max() <= 1e-10
        assert np.linalg.eigvalsh(M)[0] > 0.0


def test_kinetic_energy_identity():
    # 0.5 v^T M v equals the sum of per-link kinetic energies computed
    # from the velocity propagation - an independent route to M.
    for with_arm in (False, True):
        model = canonical_model(with_arm=with_arm)
        cfg = random_config(model)
        kc = compute_kincache(model, cfg, vel=True)
        M = mass_matrix(model, kc)
        v = cfg.generalized_velocity()
        e_M = 0.5 * v @ M @ v
        I_b = kc.R_b @ model.base_inertia @ kc.R_b.T
        from wolf.rotations import cross
        v_cb = kc.v_b + cross(kc.w_b, kc.base_com_w - kc.p_b)
        e = 0.5 * model.base_mass * v_cb @ v_cb + 0.5 * kc.w_b @ I_b @ kc.w_b
        for lv in range(3):
            for g in range(4):
                m = model.leg_masses[lv, g]
                e += 0.5 * m * kc.v_com[lv][g] @ kc.v_com[lv][g]
                e += 0.5 * kc.w[lv][g] @ kc.I_w[lv][g] @ kc.w[lv][g]
        for j in range(model.n_arm):
            e += 0.5 * model.arm_masses[j] * kc.arm_vcom[j] @ kc.arm_vcom[j]
            e += 0.5 * kc.arm_w[j] @ kc.arm_I_w[j] @ kc.arm_w[j]
        assert e_M == pytest.approx(e, rel=1e-10)


def test_zero_velocity_bias_is_pure_gravity():
    model = canonical_model(with_arm=True)
    cfg = random_config(model, vel_scale=0.0)
    kc = compute_kincache(model, cfg, vel=True)
    h = dynamics_terms(model, cfg)[1]
    np.testing.assert_allclose(h, gravity_forces(model, kc), atol=1e-12)


def test_gravity_matches_potential_gradient():
    # independent oracle: G_k = dV/dq_k by central differences of the
    # potential V = sum_i m_i g z_i computed from forward kinematics only
    for with_arm in (False, True):
        model = canonical_model(with_arm=with_arm)
        cfg = random_config(model, vel_scale=0.0)
        kc = compute_kincache(model, cfg)
        G = gravity_forces(model, kc)

        def potential(c):
            k = compute_kincache(model, c)
            v = model.base_mass * k.base_com_w[2]
            for lv in range(3):
                v += float(model.leg_masses[lv] @ k.com[lv][:, 2])
            for j in range(model.n_arm):
                v += model.arm_masses[j] * k.arm_com[j][2]
            return 9.81 * v

        eps = 1e-6
        for k_idx in range(model.nv):
            dv = np.zeros(model.nv)
            dv[k_idx] = 1.0
            g_fd = (potential(integrate_config(cfg, dv, eps))
                    - potential(integrate_config(cfg, dv, -eps))) / (2 * eps)
            assert G[k_idx] == pytest.approx(g_fd, abs=2e-6)


def test_generalized_gravity_base_z_row():
    # gravity wrench on the base vertical row equals -m g for the 26 kg robot
    model = canonical_model()
    kc = compute_kincache(model, model.default_config())
    G = gravity_forces(model, kc)
    assert -G[2] == pytest.approx(-26.0 * 9.81, abs=1e-9)


def test_energy_rate_identity():
    # |qd^T (Mdot - 2C) qd| small, Mdot by central differences along the flow
    for with_arm in (False, True):
        model = canonical_model(with_arm=with_arm)
        for trial in range(3):
            cfg = random_config(model)
            v = cfg.generalized_velocity()
            v /= max(1.0, np.linalg.norm(v))
            cfg.base_lin, cfg.base_ang, cfg.qd = v[:3], v[3:6], v[6:]
            kc = compute_kincache(model, cfg, vel=True)
            M, h = mass_matrix(model, kc), None
            h = dynamics_terms(model, cfg)[1]
            G = gravity_forces(model, kc)
            delta = 3e-5
            Mp = mass_matrix(model, compute_kincache(model, integrate_config(cfg, v, delta)))
            Mm = mass_matrix(model, compute_kincache(model, integrate_config(cfg, v, -delta)))
            Mdot = (Mp - Mm) / (2 * delta)
            residual = v @ Mdot @ v - 2.0 * v @ (h - G)
            assert abs(residual) <= 1e-8


def test_com_velocity_consistency():
    model = canonical_model(with_arm=True)
    cfg = random_config(model)
    kc = compute_kincache(model, cfg, vel=True)
    Jc = com_jacobian(model, kc)
    np.testing.assert_allclose(Jc @ cfg.generalized_velocity(), kc.com_vel,
                               atol=1e-12)


def test_foot_velocity_and_jdv_consistency():
    # J qd matches propagated foot velocity; Jdot qd matches the
    # finite-difference derivative of J qd at fixed qd
    model = canonical_model()
    cfg = random_config(model)
    kc = compute_kincache(model, cfg, vel=True)
    v = cfg.generalized_velocity()
    J = foot_jacobians(model, kc)
    for g in range(4):
        np.testing.assert_allclose(J[g] @ v, kc.foot_vel[g], atol=1e-12)
    eps = 1e-6
    cp = integrate_config(cfg, v, eps)
    cm = integrate_config(cfg, v, -eps)
    kp = compute_kincache(model, cp)
    km = compute_kincache(model, cm)
    Jp = foot_jacobians(model, kp)
    Jm = foot_jacobians(model, km)
    for g in range(4):
        jdv_fd = (Jp[g] - Jm[g]) @ v / (2 * eps)
        np.testing.assert_allclose(kc.foot_jdv[g], jdv_fd, atol=1e-5)
