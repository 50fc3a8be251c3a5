"""Robot description loading and the floating-base model.

A robot is a rigid body ("base") with four 3-DoF point-foot legs and an
optional serial revolute arm (up to 7 joints). Descriptions are JSON
documents (see docs/robot_schema.md); units are meters, kilograms,
radians throughout.

Joint ordering is leg-major: [LF hip-roll, LF hip-pitch, LF knee, RF ...,
LH ..., RH ..., arm joints]. Generalized velocity is
[base linear (world), base angular (world), joint rates], n = 6 + 12 + k.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rotations import quat_normalize

LEG_NAMES = ("LF", "RF", "LH", "RH")
FOOT_FRAMES = tuple(f"{leg}_foot" for leg in LEG_NAMES)
GRAVITY = 9.81

_DEFAULT_LEG_AXES = ((1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, -1.0, 0.0))


class ModelError(ValueError):
    """Robot description violates the schema or a physical invariant."""


def _box_inertia(mass, size):
    sx, sy, sz = size
    return mass / 12.0 * np.diag([sy * sy + sz * sz, sx * sx + sz * sz, sx * sx + sy * sy])


def _rod_inertia(mass, length, radius=0.015):
    """Thin rod along local z; degenerates to a small sphere for length 0."""
    if length <= 1e-9:
        return mass * (0.02 ** 2) * np.eye(3)
    it = mass * length * length / 12.0
    ia = max(mass * radius * radius, 1e-8)
    return np.diag([it, it, ia])


@dataclass
class RobotModel:
    """Validated kinematic/dynamic description. Treat as immutable."""

    name: str
    # base
    base_mass: float
    base_inertia: np.ndarray          # (3,3) about base CoM, base frame
    base_com: np.ndarray              # (3,) CoM offset in base frame
    base_size: np.ndarray             # (3,) box dims, kept for emit()
    # legs, level-major batched layout: index [level 0..2, leg 0..3]
    hip_offsets: np.ndarray           # (4,3) in base frame
    leg_axes: np.ndarray              # (3,4,3) unit joint axes at zero config
    leg_lengths: np.ndarray           # (3,4) segment length below each joint
    leg_masses: np.ndarray            # (3,4)
    leg_inertias: np.ndarray          # (3,4,3,3) local, about link CoM
    # optional arm
    arm_mount: np.ndarray | None      # (3,) in base frame
    arm_axes: np.ndarray | None       # (k,3)
    arm_offsets: np.ndarray | None    # (k,3) joint i position in link i-1 frame
    arm_coms: np.ndarray | None       # (k,3) link CoM in link frame
    arm_masses: np.ndarray | None     # (k,)
    arm_inertias: np.ndarray | None   # (k,3,3)
    arm_ee_offset: np.ndarray | None  # (3,) end effector in last link frame
    # limits over all actuated joints (12 + k)
    q_lower: np.ndarray
    q_upper: np.ndarray
    qd_max: np.ndarray
    tau_max: np.ndarray
    stance_height: float
    # derived
    n_arm: int = 0
    total_mass: float = 0.0
    default_joints: np.ndarray = field(default=None, repr=False)

    @property
    def n_joints(self):
        return 12 + self.n_arm

    @property
    def nv(self):
        """Generalized-velocity dimension: 6 (base) + joints."""
        return 6 + self.n_joints

    @property
    def has_arm(self):
        return self.n_arm > 0

    def frame_names(self):
        names = ["base", *FOOT_FRAMES]
        if self.has_arm:
            names.append("arm_ee")
        return names

    def default_config(self):
        """Standing configuration at the nominal stance height."""
        return Configuration(
            base_pos=np.array([0.0, 0.0, self.stance_height]),
            base_quat=np.array([1.0, 0.0, 0.0, 0.0]),
            q=self.default_joints.copy(),
        )

    def leg_joint_slice(self, leg):
        return slice(3 * leg, 3 * leg + 3)


@dataclass
class Configuration:
    """Base pose plus joint positions; velocities default to zero.

    base_lin/base_ang are world-frame twist components of the base.
    """

    base_pos: np.ndarray
    base_quat: np.ndarray
    q: np.ndarray
    base_lin: np.ndarray = None
    base_ang: np.ndarray = None
    qd: np.ndarray = None

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        quat = np.asarray(self.base_quat, dtype=float)
        n = np.linalg.norm(quat)
        if abs(n - 1.0) > 1e-6:
            raise ModelError(f"base_quat norm {n:.6f} is not a unit quaternion")
        if abs(n - 1.0) > 1e-9:
            quat = quat_normalize(quat)
        self.base_quat = quat
        nj = self.q.shape[0]
        if self.base_lin is None:
            self.base_lin = np.zeros(3)
        if self.base_ang is None:
            self.base_ang = np.zeros(3)
        if self.qd is None:
            self.qd = np.zeros(nj)
        self.base_lin = np.asarray(self.base_lin, dtype=float)
        self.base_ang = np.asarray(self.base_ang, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.qd.shape[0] != nj:
            raise ModelError(f"qd length {self.qd.shape[0]} does not match q length {nj}")

    def check_dof(self, model):
        if self.q.shape[0] != model.n_joints:
            raise ModelError(
                f"configuration has {self.q.shape[0]} joints, model expects {model.n_joints}")

    def generalized_velocity(self):
        return np.concatenate([self.base_lin, self.base_ang, self.qd])

    def copy(self):
        return Configuration(self.base_pos.copy(), self.base_quat.copy(), self.q.copy(),
                             self.base_lin.copy(), self.base_ang.copy(), self.qd.copy())


def _require(cond, msg):
    if not cond:
        raise ModelError(msg)


def _as_vec(value, n, fieldname):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ModelError(f"{fieldname}: expected {n} numbers, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{fieldname}: non-finite entry")
    return arr

def _check_inertia(I, fieldname):
    if not np.allclose(I, I.T, atol=1e-12):
        raise ModelError(f"{fieldname}: inertia matrix not symmetric")
    if np.any(np.linalg.eigvalsh(I) <= 0.0):
        raise ModelError(f"{fieldname}: inertia matrix not positive definite")


def _broadcast_limit(value, n, fieldname, pair=False):
    """Scalar, per-leg-joint triple, or full-length list -> (n,) array(s)."""
    if pair:
        arr = np.asarray(value, dtype=float)
        if arr.shape == (2,):
            arr = np.tile(arr, (n, 1))
        elif arr.shape == (3, 2) and n >= 12:
            arr = np.vstack([np.tile(arr, (4, 1))] + [np.tile([[-2.9, 2.9]], (n - 12, 1))])
        elif arr.shape == (12, 2) and n > 12:
            arr = np.vstack([arr, np.tile([[-2.9, 2.9]], (n - 12, 1))])
        elif arr.shape != (n, 2):
            raise ModelError(f"{fieldname}: expected [lo,hi], 3 pairs, or {n} pairs")
        lo, hi = arr[:, 0], arr[:, 1]
        if np.any(lo >= hi):
            bad = int(np.argmax(lo >= hi))
            raise ModelError(f"{fieldname}[{bad}]: limit inversion (lower >= upper)")
        return lo, hi
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    elif arr.shape == (3,) and n >= 12:
        arr = np.concatenate([np.tile(arr, 4), np.full(n - 12, float(np.max(arr)))])
    elif arr.shape != (n,):
        raise ModelError(f"{fieldname}: expected scalar, 3 values, or {n} values")
    if np.any(arr <= 0.0):
        raise ModelError(f"{fieldname}: non-positive limit")
    return arr


def load_model(description):
    """Build a validated RobotModel from a JSON document, dict, or file path.

    Raises ModelError naming the offending field on schema violations,
    non-positive masses, or inverted limits.
    """
    if isinstance(description, (str, Path)):
        p = Path(description)
        if p.exists():
            doc = json.loads(p.read_text())
        else:
            doc = json.loads(description)
    else:
        doc = description
    _require(isinstance(doc, dict), "document: expected a JSON object")
    for key in ("base", "legs"):
        _require(key in doc, f"document: missing required key '{key}'")

    base = doc["base"]
    base_mass = float(base.get("mass", 0.0))
    _require(base_mass > 0.0, "base.mass: non-positive mass")
    base_size = _as_vec(base.get("size", [0.6, 0.3, 0.15]), 3, "base.size")
    base_com = _as_vec(base.get("com", [0.0, 0.0, 0.0]), 3, "base.com")
    if "inertia" in base:
        base_inertia = np.asarray(base["inertia"], dtype=float)
        _require(base_inertia.shape == (3, 3), "base.inertia: expected 3x3 matrix")
    else:
        base_inertia = _box_inertia(base_mass, base_size)
    _check_inertia(base_inertia, "base.inertia")

    legs = doc["legs"]
    _require(isinstance(legs, list) and len(legs) == 4,
             f"legs: exactly 4 legs required, got {len(legs) if isinstance(legs, list) else type(legs)}")
    hip_offsets = np.zeros((4, 3))
    leg_axes = np.zeros((3, 4, 3))
    leg_lengths = np.zeros((3, 4))
    leg_masses = np.zeros((3, 4))
    leg_inertias = np.zeros((3, 4, 3, 3))
    for g, leg in enumerate(legs):
        tag = f"legs[{g}]"
        name = leg.get("name", LEG_NAMES[g])
        _require(name == LEG_NAMES[g],
                 f"{tag}.name: expected '{LEG_NAMES[g]}' (order LF, RF, LH, RH), got '{name}'")
        hip_offsets[g] = _as_vec(leg["hip_offset"], 3, f"{tag}.hip_offset")
        lengths = _as_vec(leg.get("link_lengths", [0.0, 0.2, 0.2]), 3, f"{tag}.link_lengths")
        masses = _as_vec(leg.get("link_masses", [0.5, 0.5, 0.5]), 3, f"{tag}.link_masses")
        axes = leg.get("axes", _DEFAULT_LEG_AXES)
        for lv in range(3):
            _require(masses[lv] > 0.0, f"{tag}.link_masses[{lv}]: non-positive mass")
            _require(lengths[lv] >= 0.0, f"{tag}.link_lengths[{lv}]: negative length")
            ax = _as_vec(axes[lv], 3, f"{tag}.axes[{lv}]")
            nrm = np.linalg.norm(ax)
            _require(nrm > 1e-9, f"{tag}.axes[{lv}]: zero axis")
            leg_axes[lv, g] = ax / nrm
            leg_lengths[lv, g] = lengths[lv]
            leg_masses[lv, g] = masses[lv]
            if "link_inertias" in leg:
                I = np.asarray(leg["link_inertias"][lv], dtype=float)
                _require(I.shape == (3, 3), f"{tag}.link_inertias[{lv}]: expected 3x3")
            else:
                I = _rod_inertia(masses[lv], lengths[lv])
            _check_inertia(I, f"{tag}.link_inertias[{lv}]")
            leg_inertias[lv, g] = I
        _require(lengths[1] > 0.0 and lengths[2] > 0.0,
                 f"{tag}.link_lengths: upper and lower segments need positive length")

    arm_mount = arm_axes = arm_offsets = arm_coms = arm_masses = arm_inertias = arm_ee = None
    n_arm = 0
    arm_q_lims = []
    if "arm" in doc and doc["arm"]:
        arm = doc["arm"]
        joints = arm.get("joints", [])
        _require(1 <= len(joints) <= 7, f"arm.joints: expected 1..7 joints, got {len(joints)}")
        n_arm = len(joints)
        arm_mount = _as_vec(arm.get("mount", [0.2, 0.0, 0.1]), 3, "arm.mount")
        arm_axes = np.zeros((n_arm, 3))
        arm_offsets = np.zeros((n_arm, 3))
        arm_coms = np.zeros((n_arm, 3))
        arm_masses = np.zeros(n_arm)
        arm_inertias = np.zeros((n_arm, 3, 3))
        next_offsets = [None] * n_arm
        for j, joint in enumerate(joints):
            tag = f"arm.joints[{j}]"
            ax = _as_vec(joint["axis"], 3, f"{tag}.axis")
            nrm = np.linalg.norm(ax)
            _require(nrm > 1e-9, f"{tag}.axis: zero axis")
            arm_axes[j] = ax / nrm
            arm_offsets[j] = _as_vec(joint.get("offset", [0.0, 0.0, 0.0]), 3, f"{tag}.offset")
            m = float(joint.get("mass", 0.3))
            _require(m > 0.0, f"{tag}.mass: non-positive mass")
            arm_masses[j] = m
            arm_q_lims.append(joint.get("position", [-2.9, 2.9]))
        arm_ee = _as_vec(arm.get("ee_offset", [0.1, 0.0, 0.0]), 3, "arm.ee_offset")
        for j in range(n_arm):
            nxt = arm_offsets[j + 1] if j + 1 < n_arm else arm_ee
            next_offsets[j] = nxt
            if "com" in joints[j]:
                arm_coms[j] = _as_vec(joints[j]["com"], 3, f"arm.joints[{j}].com")
            else:
                arm_coms[j] = 0.5 * nxt
            seg = float(np.linalg.norm(next_offsets[j]))
            if "inertia" in joints[j]:
                I = np.asarray(joints[j]["inertia"], dtype=float)
            else:
                I = _rod_inertia(arm_masses[j], seg)
            _check_inertia(I, f"arm.joints[{j}].inertia")
            arm_inertias[j] = I

    nj = 12 + n_arm
    limits = doc.get("limits", {})
    q_lower, q_upper = _broadcast_limit(
        limits.get("position", [[-1.0, 1.0], [-2.2, 1.2], [0.08, 2.7]]), nj,
        "limits.position", pair=True)
    if n_arm:
        for j, lim in enumerate(arm_q_lims):
            lo, hi = float(lim[0]), float(lim[1])
            _require(lo < hi, f"arm.joints[{j}].position: limit inversion (lower >= upper)")
            q_lower[12 + j], q_upper[12 + j] = lo, hi
    qd_max = _broadcast_limit(limits.get("velocity", 25.0), nj, "limits.velocity")
    tau_max = _broadcast_limit(limits.get("torque", 45.0), nj, "limits.torque")

    stance_height = float(doc.get("stance", {}).get("height", 0.32))
    l1 = float(np.mean(leg_lengths[1]))
    l2 = float(np.mean(leg_lengths[2]))
    _require(0.05 < stance_height < l1 + l2,
             f"stance.height: {stance_height} not reachable with leg length {l1 + l2}")

    total_mass = base_mass + float(leg_masses.sum()) + (float(arm_masses.sum()) if n_arm else 0.0)

    model = RobotModel(
        name=str(doc.get("name", "quadruped")),
        base_mass=base_mass, base_inertia=base_inertia, base_com=base_com,
        base_size=base_size,
        hip_offsets=hip_offsets, leg_axes=leg_axes, leg_lengths=leg_lengths,
        leg_masses=leg_masses, leg_inertias=leg_inertias,
        arm_mount=arm_mount, arm_axes=arm_axes, arm_offsets=arm_offsets,
        arm_coms=arm_coms, arm_masses=arm_masses, arm_inertias=arm_inertias,
        arm_ee_offset=arm_ee,
        q_lower=q_lower, q_upper=q_upper, qd_max=qd_max, tau_max=tau_max,
        stance_height=stance_height,
        n_arm=n_arm, total_mass=total_mass,
    )
    model.default_joints = _standing_joints(model)
    return model


def _standing_joints(model):
    """Hip-roll 0, symmetric knee bend reaching the stance height."""
    q = np.zeros(model.n_joints)
    for g in range(4):
        l1, l2 = model.leg_lengths[1, g], model.leg_lengths[2, g]
        d = min(model.stance_height, 0.999 * (l1 + l2))
        c = (d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
        knee = math.acos(max(-1.0, min(1.0, c)))
        gamma = math.atan2(l2 * math.sin(knee), l1 + l2 * math.cos(knee))
        q[3 * g + 1] = -gamma
        q[3 * g + 2] = knee
    return q


def emit_document(model):
    """Inverse of load_model; load_model(emit_document(m)) == m."""
    doc = {
        "name": model.name,
        "base": {
            "mass": model.base_mass,
            "size": model.base_size.tolist(),
            "com": model.base_com.tolist(),
            "inertia": model.base_inertia.tolist(),
        },
        "legs": [],
        "limits": {
            "position": np.stack([model.q_lower[:12], model.q_upper[:12]], axis=1).tolist(),
            "velocity": model.qd_max.tolist(),
            "torque": model.tau_max.tolist(),
        },
        "stance": {"height": model.stance_height},
    }
    for g, name in enumerate(LEG_NAMES):
        doc["legs"].append({
            "name": name,
            "hip_offset": model.hip_offsets[g].tolist(),
            "link_lengths": model.leg_lengths[:, g].tolist(),
            "link_masses": model.leg_masses[:, g].tolist(),
            "axes": model.leg_axes[:, g].tolist(),
            "link_inertias": model.leg_inertias[:, g].tolist(),
        })
    if model.has_arm:
        joints = []
        for j in range(model.n_arm):
            joints.append({
                "axis": model.arm_axes[j].tolist(),
                "offset": model.arm_offsets[j].tolist(),
                "mass": float(model.arm_masses[j]),
                "com": model.arm_coms[j].tolist(),
                "inertia": model.arm_inertias[j].tolist(),
                "position": [float(model.q_lower[12 + j]), float(model.q_upper[12 + j])],
            })
        doc["arm"] = {
            "mount": model.arm_mount.tolist(),
            "joints": joints,
            "ee_offset": model.arm_ee_offset.tolist(),
        }
    return doc


def canonical_document(with_arm=False):
    """Desk-scale reference quadruped: 0.6 x 0.3 m body, 20 kg, 26 kg total."""
    doc = {
        "name": "canonical",
        "base": {"mass": 20.0, "size": [0.6, 0.3, 0.15]},
        # hind legs mirror the pitch axes: the X-pose keeps the default
        # stance fore-aft symmetric with one shared joint vector
        "legs": [
            {"name": name,
             "hip_offset": [sx * 0.25, sy * 0.15, 0.0],
             "link_lengths": [0.0, 0.2, 0.2],
             "link_masses": [0.5, 0.5, 0.5],
             "axes": [[1, 0, 0], [0, -sx, 0], [0, -sx, 0]]}
            for name, (sx, sy) in zip(LEG_NAMES, [(1, 1), (1, -1), (-1, 1), (-1, -1)])
        ],
        "limits": {
            "position": [[-1.0, 1.0], [-2.2, 1.2], [0.08, 2.7]],
            "velocity": 25.0,
            "torque": 45.0,
        },
        "stance": {"height": 0.32},
    }
    if with_arm:
        doc["arm"] = {
            "mount": [0.22, 0.0, 0.09],
            "joints": [
                {"axis": [0, 0, 1], "offset": [0.0, 0.0, 0.04], "mass": 0.4},
                {"axis": [0, -1, 0], "offset": [0.0, 0.0, 0.05], "mass": 0.4},
                {"axis": [0, -1, 0], "offset": [0.22, 0.0, 0.0], "mass": 0.4},
            ],
            "ee_offset": [0.20, 0.0, 0.0],
        }
    return doc


def canonical_model(with_arm=False):
    return load_model(canonical_document(with_arm=with_arm))
