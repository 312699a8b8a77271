"""Primitives for circles lifted to R^3 and boxes aligned to the light cone.

A circle in the plane with center (x1, x2) and radius x3 > 0 is encoded as
the point (x1, x2, x3). Two circles are internally tangent exactly when the
planar distance between their centers equals the absolute difference of
their radii, so tangency detection reduces to a gap computation on encoded
points, and families of mutually tangent circles lie along rays of the
light cone {|(x1, x2)| = x3}.

The module provides the scalar predicates; vectorized variants live next to
their consumers so each fast path can be checked against these definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConcentricError, NotNearTangentError

SQRT2 = math.sqrt(2.0)

# Annuli used in rectangle-containment tests are 10*delta thick.
ANNULUS_THICKNESS_FACTOR = 10.0

# Default relative tolerance for "exact" tangency of float circles: the
# integer path is the only true zero test, floats get delta < TOL * scale.
FLOAT_TANGENCY_RTOL = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t < 0.0:
        t += 2.0 * math.pi
    return t - math.pi


def wrap_axis_angle(angle: float) -> float:
    """Wrap an undirected axis angle into [0, pi)."""
    a = math.fmod(angle, math.pi)
    if a < 0.0:
        a += math.pi
    if a >= math.pi:  # fmod rounding at the seam
        a -= math.pi
    return a


@dataclass(frozen=True)
class Circle3:
    """A circle encoded as a point of R^3: planar center plus radius as height.

    Coordinates may be floats or exact Python integers; the integer form is
    what the exact tangency counting path consumes.
    """

    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def is_integer(self) -> bool:
        return (
            isinstance(self.center[0], int)
            and isinstance(self.center[1], int)
            and isinstance(self.radius, int)
        )

    def as_point(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], self.radius], dtype=float)


def delta_gap(x: Circle3, y: Circle3) -> float:
    """Tangency gap between two encoded circles.

    Returns | |planar center distance| - |radius difference| |, which is zero
    exactly when the circles are internally tangent. Total and symmetric.
    """
    planar = math.hypot(x.center[0] - y.center[0], x.center[1] - y.center[1])
    return abs(planar - abs(x.radius - y.radius))


def is_exact_tangent_int(x: Circle3, y: Circle3) -> bool:
    """Exact internal-tangency test for integer circles.

    Evaluates (x1-y1)^2 + (x2-y2)^2 == (x3-y3)^2 in Python integers, which
    are arbitrary precision: the squares can never wrap, so no overflow
    handling is needed on this path.
    """
    if not (x.is_integer and y.is_integer):
        raise TypeError("is_exact_tangent_int requires exact integer coordinates")
    if x == y:
        raise ValueError("tangency test requires two distinct circles")
    dx = x.center[0] - y.center[0]
    dy = x.center[1] - y.center[1]
    dz = x.radius - y.radius
    return dx * dx + dy * dy == dz * dz


def is_near_tangent(x: Circle3, y: Circle3, tol: float | None = None, scale: float = 1.0) -> bool:
    """Float stand-in for exact tangency: gap below a tolerance.

    Float equality against zero is meaningless, so callers choose a relative
    tolerance; the default is FLOAT_TANGENCY_RTOL at the family scale.
    """
    if tol is None:
        tol = FLOAT_TANGENCY_RTOL * scale
    return delta_gap(x, y) < tol


# ---------------------------------------------------------------------------
# Light-cone plank frames and membership
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlankFrame:
    """Orthonormal frame attached to the light cone at angle theta.

    The frame normalizes the cone direction (cos t, sin t, 1)/sqrt(2), its
    angular derivative, and their cross product to unit vectors, so plank
    side lengths are literal Euclidean lengths.
    """

    theta: float
    axis_a: np.ndarray
    axis_b: np.ndarray
    axis_c: np.ndarray

    def matrix(self) -> np.ndarray:
        """Rows are (axis_a, axis_b, axis_c)."""
        return np.stack([self.axis_a, self.axis_b, self.axis_c])


def plank_axes(theta: float) -> PlankFrame:
    """Build the orthonormal cone frame at angle theta in [-pi, pi).

    axis_a points along the cone ray, axis_b along the tangential direction,
    axis_c along their cross product. The raw derivative and cross product
    both have norm 1/sqrt(2), so normalization multiplies them by sqrt(2);
    the closed forms below bake that in.
    """
    c, s = math.cos(theta), math.sin(theta)
    axis_a = np.array([c / SQRT2, s / SQRT2, 1.0 / SQRT2])
    axis_b = np.array([-s, c, 0.0])
    axis_c = np.array([-c / SQRT2, -s / SQRT2, 1.0 / SQRT2])
    return PlankFrame(theta=theta, axis_a=axis_a, axis_b=axis_b, axis_c=axis_c)


@dataclass(frozen=True)
class Lightplank:
    """An A x sqrt(A*B) x B box aligned to the cone frame at angle theta.

    Half-widths are A/2, sqrt(A*B)/2, B/2 along axis_a, axis_b, axis_c.
    The enumeration in this package uses A <= B (thin along the ray), but
    nothing here requires it: the lift of a planar tangency rectangle has
    A > B and is handled by the same arithmetic.
    """

    frame: PlankFrame
    v: np.ndarray
    A: float
    B: float

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("plank side lengths must be positive")

    def half_widths(self) -> np.ndarray:
        return np.array([self.A / 2.0, math.sqrt(self.A * self.B) / 2.0, self.B / 2.0])


def plank_contains(plank: Lightplank, x, K: float = 1.0) -> bool:
    """Whether point x lies in the K-dilation (about the center) of the plank."""
    if K < 1.0:
        raise ValueError("dilation factor K must be >= 1")
    p = x.as_point() if isinstance(x, Circle3) else np.asarray(x, dtype=float)
    rel = p - plank.v
    hw = plank.half_widths() * K
    return (
        abs(float(rel @ plank.frame.axis_a)) <= hw[0]
        and abs(float(rel @ plank.frame.axis_b)) <= hw[1]
        and abs(float(rel @ plank.frame.axis_c)) <= hw[2]
    )


def plank_corners(plank: Lightplank) -> np.ndarray:
    """The 8 corners of the plank, shape (8, 3)."""
    hw = plank.half_widths()
    axes = plank.frame.matrix()
    signs = np.array(
        [[sa, sb, sc] for sa in (-1.0, 1.0) for sb in (-1.0, 1.0) for sc in (-1.0, 1.0)]
    )
    return plank.v + (signs * hw) @ axes


def containment_slack(hw: np.ndarray) -> np.ndarray:
    """Float slack for box-containment comparisons, relative to half-widths.

    Frame transforms cost a few ulps; the slack sits far above that and far
    below the geometric margins of any lattice used here.
    """
    return 1e-9 * (1.0 + hw)


def plank_contained_in_dilation(inner: Lightplank, outer: Lightplank, K: float = 1.0) -> bool:
    """Whether every corner of `inner` lies in the K-dilation of `outer`.

    Corner containment decides box-in-box containment exactly, because the
    dilation is convex and corner coordinates achieve the extreme values of
    the frame coordinates over the inner box.
    """
    corners = plank_corners(inner) - outer.v
    coords = corners @ outer.frame.matrix().T
    hw = outer.half_widths() * K
    return bool(np.all(np.abs(coords) <= hw + containment_slack(hw)))


def plank_comparable(P: Lightplank, Q: Lightplank, K: float = 1.0) -> bool:
    """True when one plank is contained in the K-dilation of the other."""
    if K < 1.0:
        raise ValueError("dilation factor K must be >= 1")
    return plank_contained_in_dilation(P, Q, K) or plank_contained_in_dilation(Q, P, K)


def rotate_point_z(p: np.ndarray, phi: float) -> np.ndarray:
    """Rotate a point of R^3 about the x3-axis."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])


def rotate_plank_z(plank: Lightplank, phi: float) -> Lightplank:
    """Rotate a plank about the x3-axis: the frame angle advances by phi."""
    return Lightplank(
        frame=plank_axes(wrap_angle(plank.frame.theta + phi)),
        v=rotate_point_z(plank.v, phi),
        A=plank.A,
        B=plank.B,
    )


# ---------------------------------------------------------------------------
# Planar tangency rectangles and annulus containment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rect2:
    """A planar rectangle given by center, long-axis angle, and side lengths.

    width is the short side (about delta for tangency rectangles), length the
    long side (about sqrt(delta)); angle is the undirected long-axis
    direction in [0, pi).
    """

    center: tuple
    angle: float
    width: float
    length: float

    def __post_init__(self):
        if not (0.0 < self.width <= self.length):
            raise ValueError("need 0 < width <= length")
        if not (0.0 <= self.angle < math.pi):
            raise ValueError("angle must lie in [0, pi)")


def rect_axes(rect: Rect2) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors along the long and short axes."""
    c, s = math.cos(rect.angle), math.sin(rect.angle)
    return np.array([c, s]), np.array([-s, c])


def rect_corners(rect: Rect2) -> np.ndarray:
    """The 4 corners, shape (4, 2)."""
    u_long, u_short = rect_axes(rect)
    hl, hw = rect.length / 2.0, rect.width / 2.0
    cx = np.array(rect.center, dtype=float)
    return np.array(
        [cx + sl * hl * u_long + sw * hw * u_short for sl in (-1, 1) for sw in (-1, 1)]
    )


def point_rect_distance(point, rect: Rect2) -> float:
    """Euclidean distance from a planar point to the rectangle (0 if inside)."""
    u_long, u_short = rect_axes(rect)
    rel = np.array(point, dtype=float) - np.array(rect.center, dtype=float)
    du = max(abs(float(rel @ u_long)) - rect.length / 2.0, 0.0)
    dv = max(abs(float(rel @ u_short)) - rect.width / 2.0, 0.0)
    return math.hypot(du, dv)


def annulus_contains_rect(x: Circle3, rect: Rect2, delta: float) -> bool:
    """Whether the rectangle lies inside the 10*delta-thick annulus around x.

    Exact for rectangles: the farthest point of a convex polygon from the
    annulus center is a corner, and the nearest point realizes the usual
    point-to-rectangle distance. Containment holds iff
    corner max < radius + 10*delta and near distance > radius - 10*delta.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    thick = ANNULUS_THICKNESS_FACTOR * delta
    cx = np.array(x.center, dtype=float)
    far = float(np.max(np.linalg.norm(rect_corners(rect) - cx, axis=1)))
    if far >= x.radius + thick:
        return False
    near = point_rect_distance(cx, rect)
    return near > x.radius - thick


def tangency_point(x: Circle3, y: Circle3) -> tuple[np.ndarray, np.ndarray]:
    """Approximate common point of a near-tangent pair and its radial direction.

    Returns (z_star, u) where u is the unit vector from the larger circle's
    center toward the smaller circle's center and z_star sits on the larger
    circle along u. Radius ties break by lexicographic comparison of centers
    (the lexicographically smaller center plays the larger circle) so the
    output is deterministic.
    """
    if x.radius > y.radius or (x.radius == y.radius and tuple(x.center) <= tuple(y.center)):
        big, small = x, y
    else:
        big, small = y, x
    cb = np.array(big.center, dtype=float)
    cs = np.array(small.center, dtype=float)
    d = float(np.linalg.norm(cs - cb))
    if d == 0.0:
        raise ConcentricError("concentric circles have no tangency point")
    u = (cs - cb) / d
    return cb + big.radius * u, u


def tangency_rect(x: Circle3, y: Circle3, delta: float) -> Rect2:
    """The delta x sqrt(delta) rectangle witnessing a near-tangency.

    The rectangle has width 2*delta and length 2*sqrt(delta), is centered at
    the tangency point of the pair, and its long axis runs perpendicular to
    the radial direction there. Raises ConcentricError for concentric input
    and NotNearTangentError when the gap is at least delta. The result is
    contained in both 10*delta annuli (checkable via annulus_contains_rect).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    gap = delta_gap(x, y)
    z_star, u = tangency_point(x, y)  # raises ConcentricError first if needed
    if gap >= delta:
        raise NotNearTangentError(f"gap {gap} is not below delta {delta}")
    angle = wrap_axis_angle(math.atan2(u[1], u[0]) + math.pi / 2.0)
    return Rect2(
        center=(float(z_star[0]), float(z_star[1])),
        angle=angle,
        width=2.0 * delta,
        length=2.0 * math.sqrt(delta),
    )
