"""Reactive layer: capture-point push recovery and the step reflex.

A push is declared when the CoM ground point leaves the support polygon
shrunk by sigma about its center. While the flag holds, footholds get a
clamped offset toward the capture point. Unexpected swing contacts in
the first half of the swing regenerate the trajectory over the obstacle;
later contacts end the swing early.
"""

from dataclasses import dataclass

import numpy as np

from .footstep import generate_swing
from .geometry import distance_to_polygon, point_in_polygon, shrink_polygon


@dataclass
class ReactiveConfig:
    sigma: float = 0.9              # support-polygon scale in [0, 1]
    max_delta: float = 0.15         # capture-offset clamp, m
    reflex_apex: float = 0.04       # extra swing clearance on reflex, m
    reflex_min_phase: float = 0.1   # ignore lingering lift-off contact
    min_reflex_duration: float = 0.3  # floor, fraction of the nominal swing
    push_recovery_enabled: bool = True
    reflex_enabled: bool = True

    def __post_init__(self):
        if not (0.0 <= self.sigma <= 1.0):
            raise ValueError("sigma must lie in [0, 1]")
        if self.max_delta <= 0.0:
            raise ValueError("max_delta must be positive")


def detect_push(com_xy, polygon, sigma):
    """True when the CoM ground point exits the sigma-shrunk polygon.

    Degenerate polygons (point/segment) fall back to a distance margin
    of (1 - sigma) * 0.05 m.
    """
    com_xy = np.asarray(com_xy, dtype=float)[:2]
    polygon = np.asarray(polygon, dtype=float)
    if len(polygon) < 3:
        margin = (1.0 - sigma) * 0.05
        return distance_to_polygon(com_xy, polygon) > margin
    shrunk = shrink_polygon(polygon, sigma)
    center = shrunk.mean(axis=0)
    if float(np.max(np.abs(shrunk - center))) < 1e-12:
        # sigma ~ 0 collapses the polygon to its center
        return float(np.hypot(*(com_xy - center))) > 1e-12
    return not point_in_polygon(com_xy, shrunk, tol=1e-12)


def capture_delta(icp_xy, polygon_center_xy, max_delta):
    """Per-step foothold offset toward the capture point, norm-clamped."""
    delta = np.asarray(icp_xy, dtype=float)[:2] \
        - np.asarray(polygon_center_xy, dtype=float)[:2]
    nrm = float(np.hypot(delta[0], delta[1]))
    if nrm > max_delta:
        delta = delta * (max_delta / nrm)
    return delta


@dataclass
class ReflexDecision:
    kind: str                        # "none" | "reflex" | "early_touchdown"
    trajectory: object = None        # replacement SwingTrajectory for "reflex"


def step_reflex(sub_phase, contact, trajectory, foot_point, config,
                already_reflexed=False, plane=None):
    """Decide how a swing leg responds to an unexpected contact.

    First-half contact regenerates the swing from the current foot point
    over the same foothold with extra apex; second-half contact promotes
    the leg to stance. At most one reflex per swing.
    """
    if not contact or trajectory is None:
        return ReflexDecision("none")
    if sub_phase < config.reflex_min_phase:
        return ReflexDecision("none")
    if sub_phase >= 0.5:
        return ReflexDecision("early_touchdown")
    if already_reflexed or not config.reflex_enabled:
        return ReflexDecision("none")
    remaining = (1.0 - sub_phase) * trajectory.duration
    duration = max(remaining, config.min_reflex_duration * trajectory.duration)
    from .geometry import TerrainPlane
    if plane is None:
        plane = TerrainPlane()
        plane.normal = trajectory.plane_rot[:, 2].copy()
        plane.offset = float(plane.normal @ trajectory.foothold.position)
    new_traj = generate_swing(
        start=np.asarray(foot_point, dtype=float),
        foothold=trajectory.foothold,
        apex=trajectory.apex + config.reflex_apex,
        duration=duration,
        plane=plane)
    return ReflexDecision("reflex", trajectory=new_traj)
