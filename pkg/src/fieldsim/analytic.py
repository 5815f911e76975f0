"""Closed-form static collision probability for hexagonal arrays.

The model composes, per lattice neighbor shell, the chance that a
target falls in the shared conflict region with the chance that the
eccentric arm sweeps through the pairwise collision band, normalized by
a coverage area. Two coverage conventions are provided:

* ``MOTION_RING`` (default): the thin ring of width 2d traced by the
  eccentric-arm motion circle, radii (l2 - l1 -/+ d) clamped at zero.
* ``FULL_PATROL``: the inflated patrol annulus, outer radius
  l1 + l2 + d, inner radius max(0, l2 - l1 - d).

The conflict area is the exact intersection of the two inflated patrol
annuli, computed by inclusion-exclusion over circle-circle lens areas
(each inner disk is contained in its outer disk, so four lens terms
give the annulus intersection exactly).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from fieldsim.errors import DegenerateCoverError
from fieldsim.geometry import ArmGeometry, SafetyModel
from fieldsim.hexgrid import (
    InteractionType,
    classify_interaction,
    lattice_neighbor_classes,
)


class CoverMode(enum.Enum):
    MOTION_RING = "motion-ring"
    FULL_PATROL = "full-patrol"


@dataclass(frozen=True)
class AnalyticAreas:
    """Area breakdown behind an analytic probability."""

    s_cover: float
    # (center distance, area) per lattice neighbor class within cutoff
    collision_by_class: tuple[tuple[float, float], ...]
    conflict_by_class: tuple[tuple[float, float], ...]
    r_inner: float
    r_outer: float


@dataclass(frozen=True)
class AnalyticResult:
    raw: float       # unclamped model value; comparisons use this
    clamped: float   # raw limited to [0, 1]
    areas: AnalyticAreas
    interaction: InteractionType


def ring_radii(geom: ArmGeometry, safety: SafetyModel) -> tuple[float, float]:
    """Inner and outer radius of the arm-tip motion ring, clamped at 0.

    For equal arms the unclamped inner radius l2 - l1 - d is negative;
    clamping keeps areas non-negative.
    """
    r_inner = max(0.0, geom.l2 - geom.l1 - safety.d)
    r_outer = max(0.0, geom.l2 - geom.l1 + safety.d)
    return r_inner, r_outer


def s_cover(
    geom: ArmGeometry,
    safety: SafetyModel,
    mode: CoverMode = CoverMode.MOTION_RING,
) -> float:
    """Coverage area used as the probability denominator."""
    if mode is CoverMode.MOTION_RING:
        r_inner, r_outer = ring_radii(geom, safety)
        return math.pi * (r_outer * r_outer - r_inner * r_inner)
    outer = geom.l1 + geom.l2 + safety.d
    inner = max(0.0, geom.l2 - geom.l1 - safety.d)
    return math.pi * (outer * outer - inner * inner)


def s_collision(
    geom: ArmGeometry, safety: SafetyModel, center_distance: float
) -> float:
    """Band swept by the eccentric arm into a neighbor's motion range.

    d * (l2 + d) * max(0, (l1 + l2 - D/2) / (l2/2)) for a neighbor at
    center distance D; zero once the arms cannot span half the gap.
    """
    reach = geom.l1 + geom.l2
    factor = max(0.0, (reach - center_distance / 2.0) / (geom.l2 / 2.0))
    return safety.d * (geom.l2 + safety.d) * factor


def _lens_area(r1: float, r2: float, dist: float) -> float:
    """Intersection area of two circles with radii r1, r2, centers dist apart."""
    if r1 <= 0.0 or r2 <= 0.0:
        return 0.0
    if dist >= r1 + r2:
        return 0.0
    if dist <= abs(r1 - r2):
        rm = min(r1, r2)
        return math.pi * rm * rm
    c1 = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist * r1)
    c2 = (dist * dist + r2 * r2 - r1 * r1) / (2.0 * dist * r2)
    a1 = math.acos(min(1.0, max(-1.0, c1)))
    a2 = math.acos(min(1.0, max(-1.0, c2)))
    tri = 0.5 * math.sqrt(
        max(
            0.0,
            (-dist + r1 + r2) * (dist + r1 - r2)
            * (dist - r1 + r2) * (dist + r1 + r2),
        )
    )
    return r1 * r1 * a1 + r2 * r2 * a2 - tri


def s_conflict(
    geom: ArmGeometry, safety: SafetyModel, center_distance: float
) -> float:
    """Intersection area of the two inflated patrol annuli.

    Annuli have outer radius l1 + l2 + d and inner radius
    max(0, l2 - l1 - d); the area is zero once the centers are at least
    2 * (l1 + l2 + d) apart. Exact for every configuration via the
    four-term lens decomposition.
    """
    big = geom.l1 + geom.l2 + safety.d
    small = max(0.0, geom.l2 - geom.l1 - safety.d)
    dist = center_distance
    area = (
        _lens_area(big, big, dist)
        - _lens_area(big, small, dist)
        - _lens_area(small, big, dist)
        + _lens_area(small, small, dist)
    )
    return max(0.0, area)


def collision_probability_analytic(
    geom: ArmGeometry,
    safety: SafetyModel,
    pitch: float,
    mode: CoverMode = CoverMode.MOTION_RING,
) -> AnalyticResult:
    """Sum the per-shell conflict x collision products over the lattice.

    Every neighbor class within cutoff 2 * (l1 + l2 + d) contributes
    multiplicity * (S_conflict / S_cover) * (S_collision / S_cover).
    TYPE1 configurations yield exactly 0. The raw value can exceed 1
    for extreme TYPE3 parameters; the clamped value is also returned.

    Raises:
        DegenerateCoverError: S_cover is 0 while some class has a
            nonzero conflict or collision area (d = 0 under the
            motion-ring mode); use FULL_PATROL instead.
    """
    interaction = classify_interaction(geom, safety, pitch)
    r_inner, r_outer = ring_radii(geom, safety)
    cover = s_cover(geom, safety, mode)
    cutoff = 2.0 * (geom.l1 + geom.l2 + safety.d)

    collision_classes: list[tuple[float, float]] = []
    conflict_classes: list[tuple[float, float]] = []
    total = 0.0
    if interaction is not InteractionType.TYPE1:
        for dist, mult in lattice_neighbor_classes(pitch, cutoff):
            col = s_collision(geom, safety, dist)
            con = s_conflict(geom, safety, dist)
            collision_classes.append((dist, col))
            conflict_classes.append((dist, con))
            if cover == 0.0:
                if col > 0.0 or con > 0.0:
                    raise DegenerateCoverError(
                        "coverage area is zero while overlap areas are not "
                        "(d = 0 under motion-ring mode); use the full-patrol "
                        "cover mode"
                    )
                continue
            total += mult * (con / cover) * (col / cover)

    areas = AnalyticAreas(
        s_cover=cover,
        collision_by_class=tuple(collision_classes),
        conflict_by_class=tuple(conflict_classes),
        r_inner=r_inner,
        r_outer=r_outer,
    )
    return AnalyticResult(
        raw=total,
        clamped=min(1.0, max(0.0, total)),
        areas=areas,
        interaction=interaction,
    )
