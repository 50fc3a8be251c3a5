"""Planar geometry shared by estimation, footstep planning and the
reactive layer: terrain planes, 2-D convex hulls, polygon tests."""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TerrainPlane:
    """Plane n . p = offset with unit normal, n_z > 0."""

    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    offset: float = 0.0
    stale: bool = False

    @classmethod
    def from_coeffs(cls, a, b, c):
        """From z = a x + b y + c."""
        n = np.array([-a, -b, 1.0])
        n /= np.linalg.norm(n)
        return cls(normal=n, offset=float(n[2] * c))

    def coeffs(self):
        """Back to (a, b, c) of z = a x + b y + c."""
        nx, ny, nz = self.normal
        return -nx / nz, -ny / nz, self.offset / nz

    def height_at(self, x, y):
        nx, ny, nz = self.normal
        return (self.offset - nx * x - ny * y) / nz

    def slope_angle(self):
        a, b, _ = self.coeffs()
        return math.atan(math.sqrt(a * a + b * b))

    def rotation(self):
        """Minimal rotation taking world z onto the plane normal."""
        z = np.array([0.0, 0.0, 1.0])
        n = self.normal
        c = float(n[2])
        if c > 1.0 - 1e-12:
            return np.eye(3)
        v = np.array([z[1] * n[2] - z[2] * n[1],
                      z[2] * n[0] - z[0] * n[2],
                      z[0] * n[1] - z[1] * n[0]])
        s2 = float(v @ v)
        K = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
        return np.eye(3) + K + K @ K * ((1.0 - c) / s2)

    def project(self, p):
        """Closest point on the plane."""
        p = np.asarray(p, dtype=float)
        return p - (float(self.normal @ p) - self.offset) * self.normal


def fit_plane(points):
    """Least-squares z = a x + b y + c through >= 3 points.

    Returns (plane, residual_inf) or None for < 3 or collinear inputs.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 3:
        return None
    A = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
    AtA = A.T @ A
    if abs(np.linalg.det(AtA)) < 1e-12:
        return None
    coef = np.linalg.solve(AtA, A.T @ pts[:, 2])
    plane = TerrainPlane.from_coeffs(*coef)
    resid = float(np.max(np.abs(A @ coef - pts[:, 2])))
    return plane, resid


def convex_hull_2d(points):
    """Counterclockwise hull via monotone chain; handles 1-2 points.

    Collinear inputs collapse to the spanning segment.
    """
    pts = np.unique(np.round(np.asarray(points, dtype=float)[:, :2], 12), axis=0)
    if len(pts) == 1:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 1e-15:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) == 0:
        hull = pts[[0, -1]]
    return hull


def polygon_center(verts):
    return np.asarray(verts, dtype=float).mean(axis=0)


def shrink_polygon(verts, factor, center=None):
    """Scale vertices toward the (vertex-centroid) center by factor."""
    verts = np.asarray(verts, dtype=float)
    c = polygon_center(verts) if center is None else np.asarray(center, dtype=float)
    return c + factor * (verts - c)


def point_in_polygon(pt, verts, tol=1e-12):
    """Inside-or-on test for a convex CCW polygon; degenerate-safe."""
    verts = np.asarray(verts, dtype=float)
    pt = np.asarray(pt, dtype=float)[:2]
    n = len(verts)
    if n == 1:
        return float(np.hypot(*(pt - verts[0]))) <= tol
    if n == 2:
        return distance_to_segment(pt, verts[0], verts[1]) <= tol
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        crossv = (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0])
        if crossv < -tol:
            return False
    return True


def distance_to_segment(pt, a, b):
    pt = np.asarray(pt, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(pt - a))
    t = float(np.clip((pt - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(pt - (a + t * ab)))


def distance_to_polygon(pt, verts):
    """Distance to the polygon boundary-or-interior (0 inside)."""
    verts = np.asarray(verts, dtype=float)
    if len(verts) >= 3 and point_in_polygon(pt, verts):
        return 0.0
    if len(verts) == 1:
        return float(np.linalg.norm(np.asarray(pt)[:2] - verts[0]))
    n = len(verts)
    return min(distance_to_segment(pt, verts[i], verts[(i + 1) % n])
               for i in range(n if n > 2 else 1))


def polygon_area(verts):
    v = np.asarray(verts, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.abs(x @ np.roll(y, -1) - y @ np.roll(x, -1)))
