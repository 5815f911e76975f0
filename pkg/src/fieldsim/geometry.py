"""Positioner arm geometry: 2R kinematics, safety arithmetic, and
segment distance kernels.

A theta-phi positioner is a planar 2R arm: the central arm of length
``l1`` rotates by theta about the positioner center, the eccentric arm
of length ``l2`` rotates by phi about the central arm's tip and carries
the fiber. Only eccentric arms can collide (neighboring arms share a
plane), so collision checks reduce to distances between the straight
segments from elbow to fiber tip.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from fieldsim import _segdist
from fieldsim.errors import (
    InvalidParameterError,
    InvalidSampleCountError,
    OutOfReachError,
)

TAU = 2.0 * math.pi

Point = tuple[float, float]


def _normalize_angle(a: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    v = math.fmod(a, TAU)
    if v < 0.0:
        v += TAU
    if v >= TAU:
        v = 0.0
    return v


class Elbow(enum.Enum):
    """Inverse-kinematics branch: sign of the eccentric-arm fold angle."""

    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class ArmGeometry:
    """Central (l1) and eccentric (l2) arm lengths in millimeters.

    The eccentric arm is never shorter than the central one (ratio >= 1);
    equal arms are the degenerate ratio-1 case whose patrol annulus
    collapses to a full disk.
    """

    l1: float
    l2: float

    def __post_init__(self) -> None:
        if not (self.l1 > 0.0 and self.l2 > 0.0):
            raise InvalidParameterError(
                f"arm lengths must be positive, got l1={self.l1}, l2={self.l2}"
            )
        if self.l2 < self.l1:
            raise InvalidParameterError(
                f"arm ratio l2/l1 must be >= 1, got {self.l2 / self.l1:.6g}"
            )

    def ratio(self) -> float:
        return self.l2 / self.l1

    def reach_max(self) -> float:
        return self.l1 + self.l2

    def reach_min(self) -> float:
        return abs(self.l2 - self.l1)


@dataclass(frozen=True)
class SafetyModel:
    """Collision-safety parameters.

    d is the safety radius around the eccentric-arm line (half the
    effective arm thickness plus margin), delta_theta the per-step
    rotation bound, and threshold the pairwise distance below which two
    arms are declared in collision. d and threshold are independent
    knobs; both default to 4.5 mm.
    """

    d: float = 4.5
    delta_theta: float = 0.0
    threshold: float = 4.5

    def __post_init__(self) -> None:
        if self.d < 0.0 or self.threshold < 0.0 or self.delta_theta < 0.0:
            raise InvalidParameterError(
                "d, delta_theta and threshold must all be non-negative"
            )


@dataclass(frozen=True)
class Pose:
    """Joint angles (radians), normalized to [0, 2*pi) at construction.

    theta rotates the central arm about the positioner center; phi
    rotates the eccentric arm relative to the central arm.
    """

    theta: float
    phi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _normalize_angle(self.theta))
        object.__setattr__(self, "phi", _normalize_angle(self.phi))


@dataclass(frozen=True)
class Segment:
    """Closed planar segment; degenerate (a == b) segments act as points."""

    a: Point
    b: Point

    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])


def forward_kinematics(geom: ArmGeometry, center: Point, pose: Pose) -> Point:
    """Fiber-tip position for the given joint angles.

    tip = center + l1 * u(theta) + l2 * u(theta + phi), with u the unit
    vector at the given angle; the result always lies inside the patrol
    annulus [reach_min, reach_max] around the center.
    """
    x = center[0] + geom.l1 * math.cos(pose.theta) \
        + geom.l2 * math.cos(pose.theta + pose.phi)
    y = center[1] + geom.l1 * math.sin(pose.theta) \
        + geom.l2 * math.sin(pose.theta + pose.phi)
    return (x, y)


def inverse_kinematics(
    geom: ArmGeometry,
    center: Point,
    target: Point,
    elbow: Elbow = Elbow.RIGHT,
) -> Pose:
    """Joint angles that place the fiber tip on the target.

    Args:
        geom: Arm lengths.
        center: Positioner center.
        target: Requested tip position; must lie inside the patrol
            annulus (a 1e-9 relative boundary tolerance is accepted and
            clamped so reachability checks done in one arithmetic cannot
            spuriously fail in another).
        elbow: RIGHT selects the positive-phi branch (package default),
            LEFT the negative one.

    Returns:
        Pose whose forward kinematics reproduce the target within
        1e-9 mm. When equal arms fold onto their own center the pose is
        the conventional (theta=0, phi=pi).

    Raises:
        OutOfReachError: Target outside [reach_min, reach_max].
    """
    dx = target[0] - center[0]
    dy = target[1] - center[1]
    r = math.hypot(dx, dy)
    rmin = geom.reach_min()
    rmax = geom.reach_max()
    tol = 1e-9 * max(1.0, rmax)
    if r > rmax + tol or r < rmin - tol:
        raise OutOfReachError(
            f"target at distance {r:.6g} outside patrol annulus "
            f"[{rmin:.6g}, {rmax:.6g}]"
        )
    if r <= tol and rmin <= tol:
        # Folded singularity: theta is indeterminate, fixed by convention.
        return Pose(0.0, math.pi)
    c = (r * r - geom.l1 * geom.l1 - geom.l2 * geom.l2) / (2.0 * geom.l1 * geom.l2)
    c = min(1.0, max(-1.0, c))
    phi = math.acos(c)
    if elbow is Elbow.LEFT:
        phi = -phi
    theta = math.atan2(dy, dx) - math.atan2(
        geom.l2 * math.sin(phi), geom.l1 + geom.l2 * math.cos(phi)
    )
    return Pose(theta, phi)


def eccentric_arm_segment(geom: ArmGeometry, center: Point, pose: Pose) -> Segment:
    """Straight segment from the elbow to the fiber tip (length l2)."""
    ex = center[0] + geom.l1 * math.cos(pose.theta)
    ey = center[1] + geom.l1 * math.sin(pose.theta)
    tip = forward_kinematics(geom, center, pose)
    return Segment((ex, ey), tip)


def max_displacement(geom: ArmGeometry, safety: SafetyModel) -> float:
    """Largest tip displacement in one step: (l1 + l2) * sin(2*delta_theta).

    Zero in the static case (delta_theta = 0). Meaningful for
    delta_theta in [0, pi/4].
    """
    return (geom.l1 + geom.l2) * math.sin(2.0 * safety.delta_theta)


def min_safe_distance(geom: ArmGeometry, safety: SafetyModel) -> float:
    """Lower bound on a safe pairwise distance: max_displacement + 2*d.

    This is a helper for composing a detection threshold; it is never
    substituted for the configured ``SafetyModel.threshold``.
    """
    return max_displacement(geom, safety) + 2.0 * safety.d


def _seg_arrays(s: Segment):
    return (
        np.array([s.a[0]]), np.array([s.a[1]]),
        np.array([s.b[0]]), np.array([s.b[1]]),
    )


def segment_min_distance_exact(s1: Segment, s2: Segment) -> float:
    """True minimum Euclidean distance between two closed segments.

    Exactly 0 iff the segments intersect; symmetric in its arguments
    bit-identically (arguments are canonically ordered internally).
    """
    d = _segdist.exact_distance(*_seg_arrays(s1), *_seg_arrays(s2))
    return float(d[0])


def segment_min_distance_discrete(s1: Segment, s2: Segment, n: int = 64) -> float:
    """Minimum distance over n+1 equally spaced samples on each segment.

    Always >= the exact distance; the overestimate is bounded by half
    the sample spacing of each segment summed, i.e.
    (len(s1) + len(s2)) / (2 * n).

    Raises:
        InvalidSampleCountError: n < 2.
    """
    if n < 2:
        raise InvalidSampleCountError(f"need at least 2 subdivisions, got {n}")
    d = _segdist.discrete_distance(*_seg_arrays(s1), *_seg_arrays(s2), n)
    return float(d[0])
