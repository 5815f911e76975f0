"""Monte Carlo estimation of static collision probability.

Each iteration regenerates a random target field, allocates targets to
positioners (fewest-loaded wins, then nearest), solves inverse
kinematics toward one chosen target per positioner, and counts
neighbor pairs whose eccentric arms come closer than the collision
threshold. Positioners that received no target are "following"
positioners and are excluded from the statistics. Collision counts are
pooled across iterations and summarized with a Wilson interval; the
reported probability is the mean of the interval bounds.

Determinism: the whole pipeline is a pure function of the
configuration. Iteration k draws its generator seed as
``derive_seed(root_seed, k)`` (a splitmix64 mix, see that function), so
iterations can run in any order or in parallel and still reproduce the
sequential result bit for bit.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.spatial import cKDTree

from fieldsim import _accel
from fieldsim.batch import Kernel, collision_flags_pruned
from fieldsim.errors import InvalidParameterError
from fieldsim.geometry import ArmGeometry, Elbow, Pose, SafetyModel, inverse_kinematics
from fieldsim.hexgrid import HexArray, NeighborIndex, build_hex_array, neighbor_pairs

_MASK64 = (1 << 64) - 1
_POISSON_DISK_ETA = 0.75
_POISSON_DISK_ATTEMPT_FACTOR = 30


def derive_seed(root_seed: int, index: int) -> int:
    """Mix a root seed with an index into an independent 64-bit seed.

    splitmix64: state = root + (index + 1) * 0x9E3779B97F4A7C15, then
    the xorshift-multiply finalizer (>>30 * 0xBF58476D1CE4E5B9, >>27 *
    0x94D049BB133111EB, >>31). Documented so runs can be reproduced or
    sharded by other tools.
    """
    z = (root_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Distribution(enum.Enum):
    """Target-field point process."""

    UNIFORM_FIXED_COUNT = "uniform"
    POISSON_PROCESS = "poisson-process"
    POISSON_DISK = "poisson-disk"


class FinalChoice(enum.Enum):
    """How a positioner picks its pose target among its assigned targets.

    SEEDED_RANDOM (default) draws uniformly from the positioner's
    target list with a generator derived from the field seed; it models
    one observation out of the many an allocation serves and is what
    the acceptance studies use. NEAREST always moves to the closest
    assigned target; with dense fields it folds every arm onto its own
    center and static collisions all but vanish.
    """

    SEEDED_RANDOM = "seeded-random"
    NEAREST = "nearest"


@dataclass(frozen=True, eq=False)
class TargetField:
    """Random sky targets inside a disk, reproducible from the seed."""

    points: np.ndarray  # (N, 2) float64
    distribution: Distribution
    region_radius: float
    seed: int
    requested: int

    def __len__(self) -> int:
        return self.points.shape[0]


def _uniform_disk(rng: np.random.Generator, radius: float, n: int) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    ang = rng.random(n) * (2.0 * math.pi)
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)


def gen_targets(
    distribution: Distribution, region_radius: float, count: int, seed: int
) -> TargetField:
    """Generate a target field; bit-identical for identical arguments.

    UNIFORM_FIXED_COUNT draws exactly ``count`` i.i.d. uniform points on
    the disk. POISSON_PROCESS draws the total from Poisson(count) and
    places it uniformly. POISSON_DISK dart-throws greedily with minimum
    separation region_radius * sqrt(0.75 / count) until ``count`` points
    are accepted or 30 * count proposals are spent.

    Raises:
        InvalidParameterError: non-positive radius or count.
    """
    if region_radius <= 0.0:
        raise InvalidParameterError(
            f"region_radius must be positive, got {region_radius}")
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    rng = np.random.Generator(np.random.PCG64(seed & _MASK64))
    if distribution is Distribution.UNIFORM_FIXED_COUNT:
        pts = _uniform_disk(rng, region_radius, count)
    elif distribution is Distribution.POISSON_PROCESS:
        n = int(rng.poisson(count))
        pts = _uniform_disk(rng, region_radius, n)
    elif distribution is Distribution.POISSON_DISK:
        r_min = region_radius * math.sqrt(_POISSON_DISK_ETA / count)
        proposals = _uniform_disk(
            rng, region_radius, _POISSON_DISK_ATTEMPT_FACTOR * count)
        px = np.ascontiguousarray(proposals[:, 0])
        py = np.ascontiguousarray(proposals[:, 1])
        ox, oy, n_acc = _accel.poisson_disk(px, py, r_min, region_radius, count)
        pts = np.stack([ox[:n_acc], oy[:n_acc]], axis=1)
    else:  # pragma: no cover
        raise InvalidParameterError(f"unknown distribution {distribution}")
    pts.setflags(write=False)
    return TargetField(
        points=pts,
        distribution=distribution,
        region_radius=region_radius,
        seed=seed,
        requested=count,
    )


@dataclass(frozen=True, eq=False)
class Assignment:
    """Target-to-positioner mapping for one iteration.

    ``final_target`` maps each assigned positioner to the target it
    poses toward, selected from its list by the allocation's
    final-choice policy; ``unassigned_positioners`` are the following
    positioners, excluded from collision statistics.
    """

    field: TargetField
    final_target: dict[int, int]
    unassigned_positioners: frozenset[int]
    _assigned: np.ndarray = dataclass_field(repr=False)  # per-target positioner or -1
    _order: np.ndarray = dataclass_field(repr=False)     # global processing order

    @property
    def per_positioner_targets(self) -> dict[int, list[int]]:
        """Ordered target lists per positioner (allocation order).

        Built on demand; the simulation hot path only needs
        ``final_target``.
        """
        cached = getattr(self, "_ppt_cache", None)
        if cached is not None:
            return cached
        ppt: dict[int, list[int]] = {}
        assigned = self._assigned
        for t in self._order.tolist():
            i = int(assigned[t])
            if i >= 0:
                ppt.setdefault(i, []).append(t)
        object.__setattr__(self, "_ppt_cache", ppt)
        return ppt


def _reachable_candidates(array: HexArray, points: np.ndarray):
    """Per-target reachable positioners with recomputed distances.

    Returns (valid mask (T, k), idx (T, k), dist (T, k)); the KD-tree is
    only a broad phase (radius slightly inflated), reachability is then
    decided on directly computed distances, which are also the ones the
    allocation policy compares.
    """
    n_pos = len(array)
    rmax = array.geom.reach_max()
    rmin = array.geom.reach_min()
    tree = cKDTree(array.centers)
    # Expected overlap count from lattice density, padded; the loop
    # below still doubles k if a target turns out to saturate it.
    density = 2.0 / (math.sqrt(3.0) * array.pitch * array.pitch)
    k_est = int(math.pi * rmax * rmax * density * 1.4) + 4
    k = min(n_pos, max(4, k_est))
    while True:
        dist, idx = tree.query(
            points, k=k, distance_upper_bound=rmax * (1.0 + 1e-12))
        if k == 1:
            dist = dist[:, None]
            idx = idx[:, None]
        if k >= n_pos or not np.any(np.isfinite(dist[:, -1])):
            break
        k = min(n_pos, k * 2)
    found = idx < n_pos
    safe_idx = np.where(found, idx, 0)
    dx = points[:, 0:1] - array.centers[safe_idx, 0]
    dy = points[:, 1:2] - array.centers[safe_idx, 1]
    d = np.sqrt(dx * dx + dy * dy)
    valid = found & (d >= rmin) & (d <= rmax)
    return valid, safe_idx, d


_FINAL_CHOICE_SALT = 0x66696E616C  # distinct stream for the pose-target draw


def allocate_targets(
    array: HexArray,
    field: TargetField,
    final_choice: FinalChoice = FinalChoice.SEEDED_RANDOM,
) -> Assignment:
    """Allocate targets to positioners per the fewest-loaded policy.

    Targets are processed in a fixed global order (ascending distance
    to the nearest reachable center, ties by target index); each goes
    to the reachable positioner with the fewest targets so far, ties by
    smaller center distance then lower index. Unreachable targets are
    dropped. The pose target per positioner is then picked from its
    list according to ``final_choice``; both policies are deterministic
    given the field (the random draw is seeded from ``field.seed``).
    """
    n_pos = len(array)
    n_t = len(field)
    if n_t == 0:
        return Assignment(
            field=field,
            final_target={},
            unassigned_positioners=frozenset(range(n_pos)),
            _assigned=np.empty(0, dtype=np.int64),
            _order=np.empty(0, dtype=np.int64),
        )
    valid, idx, d = _reachable_candidates(array, field.points)

    nearest = np.where(valid, d, np.inf).min(axis=1)
    reachable_targets = np.nonzero(np.isfinite(nearest))[0]
    order = reachable_targets[
        np.lexsort((reachable_targets, nearest[reachable_targets]))
    ]

    counts = valid.sum(axis=1)
    indptr = np.zeros(n_t + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    cand_idx = idx[valid].astype(np.int64)
    cand_dist = d[valid]

    assigned = _accel.greedy_allocate(order, indptr, cand_idx, cand_dist, n_pos)

    final: dict[int, int] = {}
    if final_choice is FinalChoice.NEAREST:
        sel = np.nonzero(assigned >= 0)[0]
        if sel.size:
            pos = assigned[sel]
            dx = field.points[sel, 0] - array.centers[pos, 0]
            dy = field.points[sel, 1] - array.centers[pos, 1]
            dd = np.sqrt(dx * dx + dy * dy)
            srt = np.lexsort((sel, dd, pos))
            uniq_pos, first = np.unique(pos[srt], return_index=True)
            for p, f in zip(uniq_pos.tolist(), first.tolist()):
                final[int(p)] = int(sel[srt][f])
    else:
        # Stable-sort assigned targets by positioner, preserving
        # allocation order inside each group, then draw one per group.
        seq = order[assigned[order] >= 0]
        if seq.size:
            pos_seq = assigned[seq]
            grp = np.argsort(pos_seq, kind="stable")
            seq_sorted = seq[grp]
            uniq_pos, starts, group_sizes = np.unique(
                pos_seq[grp], return_index=True, return_counts=True)
            rng = np.random.Generator(
                np.random.PCG64(derive_seed(field.seed, _FINAL_CHOICE_SALT)))
            u = rng.random(n_pos)
            offsets = (u[uniq_pos] * group_sizes).astype(np.int64)
            chosen = seq_sorted[starts + offsets]
            for p, t in zip(uniq_pos.tolist(), chosen.tolist()):
                final[int(p)] = int(t)
    unassigned = frozenset(i for i in range(n_pos) if i not in final)
    return Assignment(
        field=field,
        final_target=final,
        unassigned_positioners=unassigned,
        _assigned=assigned,
        _order=order,
    )


def assign_poses(
    array: HexArray, assignment: Assignment, elbow: Elbow = Elbow.RIGHT
) -> list[Pose | None]:
    """Inverse-kinematics pose per positioner; None for following ones.

    Allocation guarantees reachability, so OutOfReach here would be an
    internal defect and is allowed to propagate.
    """
    poses: list[Pose | None] = [None] * len(array)
    for i, t in assignment.final_target.items():
        center = (float(array.centers[i, 0]), float(array.centers[i, 1]))
        target = (
            float(assignment.field.points[t, 0]),
            float(assignment.field.points[t, 1]),
        )
        poses[i] = inverse_kinematics(array.geom, center, target, elbow)
    return poses


@dataclass(frozen=True)
class CollisionCounts:
    """Raw counts from one collision evaluation."""

    colliding_positioners: int
    colliding_pairs: int
    assigned_positioners: int
    evaluated_pairs: int


def count_collisions(
    array: HexArray,
    poses: list[Pose | None],
    threshold: float,
    kernel: Kernel,
    pairs: NeighborIndex | None = None,
) -> CollisionCounts:
    """Count colliding pairs/positioners among posed neighbors.

    A pair collides iff the arm-segment distance under the kernel is
    strictly below the threshold; only pairs where both positioners
    hold a pose are evaluated. A positioner collides if it belongs to
    at least one colliding pair.
    """
    if threshold < 0.0:
        raise InvalidParameterError("threshold must be non-negative")
    if pairs is None:
        pairs = neighbor_pairs(array)
    posed = np.array([p is not None for p in poses], dtype=bool)
    n_assigned = int(posed.sum())
    if pairs.pairs.shape[0] == 0 or n_assigned < 2:
        return CollisionCounts(0, 0, n_assigned, 0)

    theta = np.array([p.theta if p is not None else 0.0 for p in poses])
    phi = np.array([p.phi if p is not None else 0.0 for p in poses])
    l1 = array.geom.l1
    l2 = array.geom.l2
    ex = array.centers[:, 0] + l1 * np.cos(theta)
    ey = array.centers[:, 1] + l1 * np.sin(theta)
    tx = ex + l2 * np.cos(theta + phi)
    ty = ey + l2 * np.sin(theta + phi)

    ii = pairs.pairs[:, 0]
    jj = pairs.pairs[:, 1]
    both = posed[ii] & posed[jj]
    ii = ii[both]
    jj = jj[both]
    if ii.size == 0:
        return CollisionCounts(0, 0, n_assigned, 0)
    flags = collision_flags_pruned(ex, ey, tx, ty, ii, jj, threshold, kernel)
    colliding_pairs = int(flags.sum())
    if colliding_pairs:
        hit = np.unique(np.concatenate([ii[flags], jj[flags]]))
        colliding_positioners = int(hit.size)
    else:
        colliding_positioners = 0
    return CollisionCounts(
        colliding_positioners=colliding_positioners,
        colliding_pairs=colliding_pairs,
        assigned_positioners=n_assigned,
        evaluated_pairs=int(ii.size),
    )


def wilson_interval(p_hat: float, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Lower bound clamped to >= 0 and upper to <= 1. At p_hat = 0 the
    upper bound reduces to z^2 / (n + z^2).

    Raises:
        InvalidParameterError: n < 1, p_hat outside [0, 1], or z <= 0.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not 0.0 <= p_hat <= 1.0:
        raise InvalidParameterError(f"p_hat must be in [0, 1], got {p_hat}")
    if z <= 0.0:
        raise InvalidParameterError(f"z must be positive, got {z}")
    denom = 1.0 + z * z / n
    center = p_hat + z * z / (2.0 * n)
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n))
    lower = max(0.0, (center - half) / denom)
    upper = min(1.0, (center + half) / denom)
    # Algebraically exact endpoints; rounding in the sqrt would otherwise
    # leave the trivial bound off by an ulp.
    if p_hat == 0.0:
        lower = 0.0
    if p_hat == 1.0:
        upper = 1.0
    return lower, upper


@dataclass(frozen=True)
class SimConfig:
    """Everything a simulation run depends on, seed included."""

    geom: ArmGeometry
    safety: SafetyModel
    pitch: float
    rings: int
    iterations: int = 6000
    z: float = 1.96
    target_count: int = 20000
    region_radius: float | None = None  # None: 1.5 x array circumradius
    distribution: Distribution = Distribution.UNIFORM_FIXED_COUNT
    kernel: Kernel = Kernel.discrete(64)
    root_seed: int = 0
    elbow: Elbow = Elbow.RIGHT
    final_choice: FinalChoice = FinalChoice.SEEDED_RANDOM
    early_stop_width: float | None = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if self.z <= 0.0:
            raise InvalidParameterError("z must be positive")
        if self.target_count < 1:
            raise InvalidParameterError("target_count must be >= 1")
        if self.pitch <= 0.0:
            raise InvalidParameterError("pitch must be positive")
        if self.rings < 0:
            raise InvalidParameterError("rings must be non-negative")
        if self.region_radius is not None and self.region_radius <= 0.0:
            raise InvalidParameterError("region_radius must be positive")

    def resolved_region_radius(self) -> float:
        if self.region_radius is not None:
            return self.region_radius
        if self.rings == 0:
            return 1.5 * self.geom.reach_max()
        return 1.5 * self.rings * self.pitch


@dataclass(frozen=True)
class CollisionStats:
    """Pooled simulation outcome with Wilson summary.

    p_hat is colliding / assigned positioners pooled over iterations;
    pair_proportion is the same ratio over evaluated pairs, emitted for
    transparency. ``reported`` is the mean of the Wilson bounds at
    n = iterations.
    """

    p_hat: float
    wilson_lower: float
    wilson_upper: float
    reported: float
    iterations: int
    colliding_positioner_count: int
    colliding_pair_count: int
    assigned_positioner_count: int
    evaluated_pair_count: int
    pair_proportion: float


def _iteration_counts(
    array: HexArray,
    pairs: NeighborIndex,
    config: SimConfig,
    region_radius: float,
    k: int,
) -> tuple[int, int, int, int]:
    seed = derive_seed(config.root_seed, k)
    field = gen_targets(
        config.distribution, region_radius, config.target_count, seed)
    assignment = allocate_targets(array, field, config.final_choice)
    poses = assign_poses(array, assignment, config.elbow)
    c = count_collisions(
        array, poses, config.safety.threshold, config.kernel, pairs)
    return (
        c.colliding_positioners,
        c.colliding_pairs,
        c.assigned_positioners,
        c.evaluated_pairs,
    )


_WORKER_CTX: tuple | None = None


def _init_worker(config: SimConfig) -> None:
    global _WORKER_CTX
    array = build_hex_array(config.pitch, config.rings, config.geom, config.safety)
    pairs = neighbor_pairs(array)
    _WORKER_CTX = (array, pairs, config, config.resolved_region_radius())


def _worker_iteration(k: int) -> tuple[int, int, int, int]:
    array, pairs, config, region = _WORKER_CTX
    return _iteration_counts(array, pairs, config, region, k)


def _warn_region(array: HexArray, region_radius: float) -> None:
    envelope = array.circumradius() + array.geom.reach_max()
    if region_radius < envelope:
        warnings.warn(
            f"target region radius {region_radius:g} mm does not cover the "
            f"array's patrol envelope ({envelope:g} mm); edge positioners "
            "will often follow",
            stacklevel=3,
        )


def run_simulation(config: SimConfig, workers: int = 1) -> CollisionStats:
    """Run the full Monte Carlo pipeline.

    Iterations are independent; with workers > 1 they are distributed
    over processes and the pooled counters are identical to a
    sequential run (integer sums in seeded, order-free form). The
    optional early stop (sequential runs only) ends the loop once the
    Wilson width at the current iteration count drops below
    ``early_stop_width``.
    """
    array = build_hex_array(config.pitch, config.rings, config.geom, config.safety)
    pairs = neighbor_pairs(array)
    region = config.resolved_region_radius()
    _warn_region(array, region)

    totals = [0, 0, 0, 0]
    done = 0
    if workers > 1 and config.early_stop_width is None:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(config,),
        ) as pool:
            chunk = max(1, config.iterations // (workers * 8))
            for c in pool.map(
                _worker_iteration, range(config.iterations), chunksize=chunk
            ):
                for s in range(4):
                    totals[s] += c[s]
        done = config.iterations
    else:
        for k in range(config.iterations):
            c = _iteration_counts(array, pairs, config, region, k)
            for s in range(4):
                totals[s] += c[s]
            done = k + 1
            if config.early_stop_width is not None and done % 50 == 0:
                p = totals[0] / totals[2] if totals[2] else 0.0
                lo, hi = wilson_interval(p, done, config.z)
                if hi - lo <= config.early_stop_width:
                    break

    coll_pos, coll_pairs, assigned, evaluated = totals
    p_hat = coll_pos / assigned if assigned else 0.0
    lower, upper = wilson_interval(p_hat, done, config.z)
    return CollisionStats(
        p_hat=p_hat,
        wilson_lower=lower,
        wilson_upper=upper,
        reported=0.5 * (lower + upper),
        iterations=done,
        colliding_positioner_count=coll_pos,
        colliding_pair_count=coll_pairs,
        assigned_positioner_count=assigned,
        evaluated_pair_count=evaluated,
        pair_proportion=coll_pairs / evaluated if evaluated else 0.0,
    )
