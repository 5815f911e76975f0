"""Parameter sweeps over (arm length, ratio, pitch) and the
analytic-vs-Monte-Carlo validation report."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from scipy.stats import spearmanr

from fieldsim.analytic import CoverMode, collision_probability_analytic
from fieldsim.batch import Kernel
from fieldsim.errors import InvalidParameterError
from fieldsim.geometry import ArmGeometry, SafetyModel
from fieldsim.montecarlo import (
    Distribution,
    FinalChoice,
    SimConfig,
    derive_seed,
    run_simulation,
)


@dataclass(frozen=True)
class SweepSpec:
    """Variable ranges and sampling mode for a sweep.

    Defaults are the large-array study ranges: arm length 7.25-14.5 mm,
    ratio 1-2, pitch 24.6-35 mm, 80 random points.
    """

    arm_min: float = 7.25
    arm_max: float = 14.5
    ratio_min: float = 1.0
    ratio_max: float = 2.0
    pitch_min: float = 24.6
    pitch_max: float = 35.0
    mode: str = "random"  # "random" | "grid"
    count: int = 80       # random-mode point count
    arm_steps: int = 1    # grid-mode steps per axis
    ratio_steps: int = 5
    pitch_steps: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        for lo, hi, name in (
            (self.arm_min, self.arm_max, "arm"),
            (self.ratio_min, self.ratio_max, "ratio"),
            (self.pitch_min, self.pitch_max, "pitch"),
        ):
            if not lo <= hi:
                raise InvalidParameterError(f"{name} range is empty: {lo} > {hi}")
        if self.mode not in ("random", "grid"):
            raise InvalidParameterError(f"unknown sweep mode {self.mode!r}")
        if self.mode == "random" and self.count < 1:
            raise InvalidParameterError("random sweep needs count >= 1")
        if min(self.arm_steps, self.ratio_steps, self.pitch_steps) < 1:
            raise InvalidParameterError("grid steps must be >= 1")


@dataclass(frozen=True)
class SimSettings:
    """Per-point simulation template shared by every sweep point."""

    rings: int = 12
    d: float = 4.5
    threshold: float = 4.5
    iterations: int = 6000
    target_count: int = 20000
    region_radius: float | None = None
    distribution: Distribution = Distribution.UNIFORM_FIXED_COUNT
    kernel: Kernel = Kernel.discrete(64)
    final_choice: FinalChoice = FinalChoice.SEEDED_RANDOM
    z: float = 1.96
    root_seed: int = 0


@dataclass(frozen=True)
class SweepRow:
    arm: float
    ratio: float
    pitch: float
    method: str  # "analytic" | "mc"
    probability: float
    wilson_lower: float | None = None
    wilson_upper: float | None = None
    seed: int | None = None


def sweep_points(spec: SweepSpec) -> np.ndarray:
    """(P, 3) array of (arm, ratio, pitch) points in deterministic order."""
    if spec.mode == "grid":
        arms = np.linspace(spec.arm_min, spec.arm_max, spec.arm_steps)
        ratios = np.linspace(spec.ratio_min, spec.ratio_max, spec.ratio_steps)
        pitches = np.linspace(spec.pitch_min, spec.pitch_max, spec.pitch_steps)
        pts = [(a, r, p) for a in arms for r in ratios for p in pitches]
        return np.array(pts, dtype=np.float64).reshape(-1, 3)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    u = rng.random((spec.count, 3))
    out = np.empty_like(u)
    out[:, 0] = spec.arm_min + u[:, 0] * (spec.arm_max - spec.arm_min)
    out[:, 1] = spec.ratio_min + u[:, 1] * (spec.ratio_max - spec.ratio_min)
    out[:, 2] = spec.pitch_min + u[:, 2] * (spec.pitch_max - spec.pitch_min)
    return out


def point_config(
    settings: SimSettings, arm: float, ratio: float, pitch: float, index: int
) -> SimConfig:
    """SimConfig for one sweep point; per-point seed derived by index."""
    return SimConfig(
        geom=ArmGeometry(arm, arm * ratio),
        safety=SafetyModel(settings.d, 0.0, settings.threshold),
        pitch=pitch,
        rings=settings.rings,
        iterations=settings.iterations,
        z=settings.z,
        target_count=settings.target_count,
        region_radius=settings.region_radius,
        distribution=settings.distribution,
        kernel=settings.kernel,
        final_choice=settings.final_choice,
        root_seed=derive_seed(settings.root_seed, index),
    )


_SWEEP_CTX: SimSettings | None = None


def _sweep_init(settings: SimSettings) -> None:
    global _SWEEP_CTX
    _SWEEP_CTX = settings


def _sweep_point_worker(task: tuple[int, float, float, float]):
    index, arm, ratio, pitch = task
    config = point_config(_SWEEP_CTX, arm, ratio, pitch, index)
    stats = run_simulation(config)
    return index, stats


def iter_sweep_rows(
    spec: SweepSpec,
    settings: SimSettings,
    method: str = "both",
    workers: int = 1,
    cover_mode: CoverMode = CoverMode.MOTION_RING,
) -> Iterator[SweepRow]:
    """Yield rows point by point, analytic before mc at each point.

    Monte Carlo points run across worker processes but results are
    yielded in point order, so output is identical for any worker
    count and a consumed prefix is always a complete set of points.
    """
    if method not in ("analytic", "mc", "both"):
        raise InvalidParameterError(f"unknown method {method!r}")
    points = sweep_points(spec)
    want_analytic = method in ("analytic", "both")
    want_mc = method in ("mc", "both")

    def analytic_row(arm, ratio, pitch):
        result = collision_probability_analytic(
            ArmGeometry(arm, arm * ratio),
            SafetyModel(settings.d, 0.0, settings.threshold),
            pitch,
            cover_mode,
        )
        return SweepRow(arm, ratio, pitch, "analytic", result.raw)

    def mc_row(index, arm, ratio, pitch, stats):
        return SweepRow(
            arm, ratio, pitch, "mc",
            stats.reported, stats.wilson_lower, stats.wilson_upper,
            derive_seed(settings.root_seed, index),
        )

    if not want_mc:
        for arm, ratio, pitch in points.tolist():
            yield analytic_row(arm, ratio, pitch)
        return

    tasks = [
        (k, arm, ratio, pitch)
        for k, (arm, ratio, pitch) in enumerate(points.tolist())
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_sweep_init, initargs=(settings,)
        ) as pool:
            for (index, stats), task in zip(pool.map(_sweep_point_worker, tasks),
                                            tasks):
                _, arm, ratio, pitch = task
                if want_analytic:
                    yield analytic_row(arm, ratio, pitch)
                yield mc_row(index, arm, ratio, pitch, stats)
    else:
        for index, arm, ratio, pitch in tasks:
            if want_analytic:
                yield analytic_row(arm, ratio, pitch)
            config = point_config(settings, arm, ratio, pitch, index)
            yield mc_row(index, arm, ratio, pitch, run_simulation(config))


def run_sweep(
    spec: SweepSpec,
    settings: SimSettings,
    method: str = "both",
    workers: int = 1,
    cover_mode: CoverMode = CoverMode.MOTION_RING,
) -> list[SweepRow]:
    return list(iter_sweep_rows(spec, settings, method, workers, cover_mode))


@dataclass(frozen=True)
class ValidationPoint:
    arm: float
    ratio: float
    pitch: float
    mc: float
    analytic: float
    mc_normalized: float
    analytic_normalized: float
    residual: float  # mc_normalized - analytic_normalized


@dataclass(frozen=True)
class ValidationReport:
    """Cross-method comparison over one sweep.

    Normalization is min-max to [0, 1] computed per method over exactly
    the points of this sweep (the scope is echoed by the CLI header).
    """

    points: tuple[ValidationPoint, ...]
    residual_mean: float
    residual_variance: float
    rank_correlation: float


def _minmax_normalize(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def compute_validation(rows: list[SweepRow]) -> ValidationReport:
    """Pair up mc/analytic rows by sweep point and compare them.

    Raises:
        InvalidParameterError: rows do not contain both methods for
            the same points.
    """
    mc = [r for r in rows if r.method == "mc"]
    an = [r for r in rows if r.method == "analytic"]
    if len(mc) != len(an) or not mc:
        raise InvalidParameterError(
            "validation needs matching analytic and mc rows")
    for a, b in zip(mc, an):
        if (a.arm, a.ratio, a.pitch) != (b.arm, b.ratio, b.pitch):
            raise InvalidParameterError("mc/analytic rows are misaligned")
    mc_v = np.array([r.probability for r in mc])
    an_v = np.array([r.probability for r in an])
    mc_n = _minmax_normalize(mc_v)
    an_n = _minmax_normalize(an_v)
    residuals = mc_n - an_n
    if np.array_equal(mc_v, an_v):
        rank = 1.0
    else:
        rank = float(spearmanr(mc_v, an_v).statistic)
        if math.isnan(rank):
            rank = 0.0
    points = tuple(
        ValidationPoint(
            arm=r.arm, ratio=r.ratio, pitch=r.pitch,
            mc=float(mc_v[k]), analytic=float(an_v[k]),
            mc_normalized=float(mc_n[k]), analytic_normalized=float(an_n[k]),
            residual=float(residuals[k]),
        )
        for k, r in enumerate(mc)
    )
    return ValidationReport(
        points=points,
        residual_mean=float(residuals.mean()),
        residual_variance=float(residuals.var()),
        rank_correlation=rank,
    )


def small_array_settings(**overrides) -> SimSettings:
    """Small-array study template: 19 positioners, 76.8 mm target disk."""
    base = SimSettings(
        rings=2,
        iterations=6000,
        target_count=20000,
        region_radius=76.8,
    )
    return replace(base, **overrides) if overrides else base


def large_array_settings(**overrides) -> SimSettings:
    """Large-array study template: 469 positioners, 200 mm target disk."""
    base = SimSettings(
        rings=12,
        iterations=6000,
        target_count=20000,
        region_radius=200.0,
    )
    return replace(base, **overrides) if overrides else base
