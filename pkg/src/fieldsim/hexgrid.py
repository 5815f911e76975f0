"""Hexagonal positioner arrays: lattice construction, neighbor pairs,
interaction classification, and coverage queries.

Centers sit on a hexagonal lattice with one lattice vector along +x;
axial coordinates are enumerated in a fixed ring spiral so the center
list is deterministic for a given (pitch, rings).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from fieldsim.errors import InvalidParameterError
from fieldsim.geometry import ArmGeometry, SafetyModel

_SQRT3_2 = math.sqrt(3.0) / 2.0

# Axial unit moves, counterclockwise; all have unit lattice norm.
_AXIAL_DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def hex_count(rings: int) -> int:
    """Centered hexagonal number: 3*rings*(rings+1) + 1."""
    return 3 * rings * (rings + 1) + 1


class InteractionType(enum.Enum):
    """How far a positioner's collision reach extends.

    TYPE1: cannot touch any neighbor. TYPE2: only the adjacent ring is
    reachable (at most 6 partners). TYPE3: reach extends past the
    adjacent ring (more than 6 partners).
    """

    TYPE1 = 1
    TYPE2 = 2
    TYPE3 = 3


@dataclass(frozen=True, eq=False)
class HexArray:
    """Immutable positioner array on a hexagonal lattice."""

    pitch: float
    rings: int
    geom: ArmGeometry
    safety: SafetyModel
    centers: np.ndarray  # (N, 2) float64, spiral order, origin first

    def __len__(self) -> int:
        return self.centers.shape[0]

    def circumradius(self) -> float:
        """Distance from the array center to the outermost positioner center."""
        return self.rings * self.pitch

    def default_neighbor_cutoff(self) -> float:
        """Largest center distance at which inflated patrol disks can touch."""
        return 2.0 * (self.geom.l1 + self.geom.l2 + self.safety.d)


@dataclass(frozen=True, eq=False)
class NeighborIndex:
    """Unordered center pairs (i < j) within a cutoff distance."""

    pairs: np.ndarray      # (M, 2) int64, lexicographically sorted
    distances: np.ndarray  # (M,) float64 center-to-center distances
    cutoff: float

    def __len__(self) -> int:
        return self.pairs.shape[0]


def _axial_spiral(rings: int) -> list[tuple[int, int]]:
    coords = [(0, 0)]
    for k in range(1, rings + 1):
        q, r = 0, -k
        for d in _AXIAL_DIRS:
            for _ in range(k):
                coords.append((q, r))
                q += d[0]
                r += d[1]
    return coords


def build_hex_array(
    pitch: float, rings: int, geom: ArmGeometry, safety: SafetyModel
) -> HexArray:
    """Build the centered hexagonal array with the given ring count.

    rings=2 gives 19 positioners, rings=12 gives 469.

    Raises:
        InvalidParameterError: pitch <= 0 or rings < 0.
    """
    if pitch <= 0.0:
        raise InvalidParameterError(f"pitch must be positive, got {pitch}")
    if rings < 0:
        raise InvalidParameterError(f"rings must be non-negative, got {rings}")
    axial = _axial_spiral(rings)
    centers = np.empty((len(axial), 2), dtype=np.float64)
    for k, (q, r) in enumerate(axial):
        centers[k, 0] = pitch * (q + 0.5 * r)
        centers[k, 1] = pitch * (_SQRT3_2 * r)
    centers.setflags(write=False)
    return HexArray(pitch=pitch, rings=rings, geom=geom, safety=safety,
                    centers=centers)


def _pairs_within(points: np.ndarray, cutoff: float, block: int = 512):
    """All index pairs (i < j) with squared distance <= cutoff^2."""
    n = points.shape[0]
    c2 = cutoff * cutoff
    out_i, out_j, out_d = [], [], []
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        dx = points[lo:hi, None, 0] - points[None, :, 0]
        dy = points[lo:hi, None, 1] - points[None, :, 1]
        d2 = dx * dx + dy * dy
        ii, jj = np.nonzero(d2 <= c2)
        gi = ii + lo
        keep = gi < jj
        out_i.append(gi[keep])
        out_j.append(jj[keep])
        out_d.append(np.sqrt(d2[ii[keep], jj[keep]]))
    return (
        np.concatenate(out_i) if out_i else np.empty(0, dtype=np.int64),
        np.concatenate(out_j) if out_j else np.empty(0, dtype=np.int64),
        np.concatenate(out_d) if out_d else np.empty(0, dtype=np.float64),
    )


def neighbor_pairs(array: HexArray, cutoff: float | None = None) -> NeighborIndex:
    """Exhaustive duplicate-free pair index for centers within cutoff.

    cutoff defaults to the array's inflated-patrol touching distance
    2 * (l1 + l2 + d).
    """
    if cutoff is None:
        cutoff = array.default_neighbor_cutoff()
    if cutoff <= 0.0:
        raise InvalidParameterError(f"cutoff must be positive, got {cutoff}")
    ii, jj, dd = _pairs_within(array.centers, cutoff)
    pairs = np.stack([ii, jj], axis=1).astype(np.int64)
    return NeighborIndex(pairs=pairs, distances=dd, cutoff=cutoff)


def classify_interaction(
    geom: ArmGeometry, safety: SafetyModel, pitch: float
) -> InteractionType:
    """Classify collision reach for the given geometry and pitch.

    Boundary equalities resolve to the safer (lower-numbered) type.
    """
    if pitch <= 0.0:
        raise InvalidParameterError(f"pitch must be positive, got {pitch}")
    reach2 = 2.0 * (geom.l1 + geom.l2 + safety.d)
    if reach2 <= pitch:
        return InteractionType.TYPE1
    if reach2 <= 2.0 * pitch:
        return InteractionType.TYPE2
    return InteractionType.TYPE3


def lattice_neighbor_classes(
    pitch: float, cutoff: float
) -> list[tuple[float, int]]:
    """Distinct center distances on the infinite lattice up to cutoff.

    Returns (distance, coordination number) sorted by distance; the
    first shells are (pitch, 6), (sqrt(3)*pitch, 6), (2*pitch, 6).
    Grouping is done on the exact integer lattice norm i^2 + i*j + j^2.
    """
    if cutoff <= 0.0:
        raise InvalidParameterError(f"cutoff must be positive, got {cutoff}")
    if pitch <= 0.0:
        raise InvalidParameterError(f"pitch must be positive, got {pitch}")
    span = int(2.0 / math.sqrt(3.0) * cutoff / pitch) + 2
    counts: dict[int, int] = {}
    for i in range(-span, span + 1):
        for j in range(-span, span + 1):
            if i == 0 and j == 0:
                continue
            norm2 = i * i + i * j + j * j
            if pitch * math.sqrt(norm2) <= cutoff:
                counts[norm2] = counts.get(norm2, 0) + 1
    return [(pitch * math.sqrt(q), counts[q]) for q in sorted(counts)]


def coverage_multiplicity(array: HexArray, p) -> int:
    """Number of positioners whose patrol annulus contains the point.

    Uses the uninflated annulus [reach_min, reach_max]; an unequal-arm
    positioner does not cover its own center.
    """
    dx = array.centers[:, 0] - p[0]
    dy = array.centers[:, 1] - p[1]
    r = np.hypot(dx, dy)
    rmin = array.geom.reach_min()
    rmax = array.geom.reach_max()
    return int(np.count_nonzero((r >= rmin) & (r <= rmax)))
