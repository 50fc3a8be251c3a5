"""Foothold planning and terrain-aligned swing trajectories.

Footholds follow the half-stance-time heuristic: project the hip onto
the terrain plane, advance by v_cmd * T_stance/2 (plus the equivalent
hip velocity of the commanded yaw rate), clamp to a reachable disc.

Swings run in the terrain-aligned frame: minimum-jerk along the
start-target chord, half-sine lift along the plane normal.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import TerrainPlane
from .rotations import cross


def minimum_jerk(u):
    """Quintic 10u^3 - 15u^4 + 6u^5 with first/second derivatives."""
    u2 = u * u
    u3 = u2 * u
    s = 10.0 * u3 - 15.0 * u2 * u2 + 6.0 * u3 * u2
    ds = 30.0 * u2 - 60.0 * u3 + 30.0 * u2 * u2
    dds = 60.0 * u - 180.0 * u2 + 120.0 * u3
    return s, ds, dds


@dataclass
class Foothold:
    leg: int
    position: np.ndarray        # world frame, on the terrain plane
    touchdown_phase: float = 0.0


@dataclass
class SwingTrajectory:
    start: np.ndarray
    foothold: Foothold
    apex: float                 # extra clearance above the chord, > 0
    duration: float
    plane_rot: np.ndarray       # world <- terrain-aligned frame

    def sample(self, s):
        """Position, velocity, acceleration at sub-phase s in [0, 1].

        Outside values clamp; the flag reports that. Velocity and
        acceleration are per-second (chain rule through the duration).
        """
        clamped = s < 0.0 or s > 1.0
        s = min(max(s, 0.0), 1.0)
        R = self.plane_rot
        chord = R.T @ (self.foothold.position - self.start)
        sig, dsig, ddsig = minimum_jerk(s)
        pos_l = chord * sig
        vel_l = chord * dsig
        acc_l = chord * ddsig
        pi_s = math.pi * s
        pos_l[2] += self.apex * math.sin(pi_s)
        vel_l[2] += self.apex * math.pi * math.cos(pi_s)
        acc_l[2] += -self.apex * math.pi * math.pi * math.sin(pi_s)
        T = self.duration
        pos = self.start + R @ pos_l
        vel = R @ vel_l / T
        acc = R @ acc_l / (T * T)
        return pos, vel, acc, clamped


def plan_foothold(leg, hip_position, base_position, twist_cmd, schedule, plane,
                  r_max=0.15, capture_offset=None):
    """Foothold for a leg about to swing.

    hip_position/base_position: world points; the hip's plane projection
    anchors the step. twist_cmd: (vx, vy, wz) in the world/horizontal
    frame. capture_offset: optional push-recovery delta added before
    clamping.
    """
    plane = plane or TerrainPlane()
    hip_proj = plane.project(np.asarray(hip_position, dtype=float))
    t_half = 0.5 * schedule.stance_duration()
    v = np.array([twist_cmd[0], twist_cmd[1], 0.0])
    # yaw rate contributes the equivalent hip velocity w x r about the base
    lever = np.asarray(hip_position, dtype=float) - np.asarray(base_position, dtype=float)
    spin = cross(np.array([0.0, 0.0, twist_cmd[2]]), lever)
    offset = ((v + spin) * t_half)[:2]
    if capture_offset is not None:
        offset = offset + np.asarray(capture_offset, dtype=float)[:2]
    nrm = float(np.hypot(offset[0], offset[1]))
    if nrm > r_max:
        offset = offset * (r_max / nrm)
    x, y = hip_proj[0] + offset[0], hip_proj[1] + offset[1]
    pos = np.array([x, y, plane.height_at(x, y)])
    phases = schedule.leg_phases()
    return Foothold(leg=leg, position=pos,
                    touchdown_phase=(schedule.phase + (1.0 - phases[leg])) % 1.0)


def generate_swing(start, foothold, apex, duration, plane):
    """Swing from the current foot point to the foothold."""
    if duration <= 0.0:
        raise ValueError("swing duration must be positive")
    if apex <= 0.0:
        raise ValueError("swing apex must be positive")
    plane = plane or TerrainPlane()
    return SwingTrajectory(
        start=np.asarray(start, dtype=float).copy(),
        foothold=foothold,
        apex=float(apex),
        duration=float(duration),
        plane_rot=plane.rotation())


def sample_swing(trajectory, s):
    return trajectory.sample(s)
