import math

import numpy as np
import pytest

from fieldsim.analytic import (
    CoverMode,
    collision_probability_analytic,
    ring_radii,
    s_collision,
    s_conflict,
    s_cover,
)
from fieldsim.errors import DegenerateCoverError
from fieldsim.geometry import ArmGeometry, SafetyModel
from fieldsim.hexgrid import InteractionType, lattice_neighbor_classes

EQUAL = ArmGeometry(8.25, 8.25)
UNEQUAL = ArmGeometry(7.25, 14.5)
SAFETY = SafetyModel(4.5, 0.0, 4.5)


def annuli_intersection_monte_carlo(geom, safety, dist, n_samples, seed):
    """Rejection-sampling oracle for the inflated-annuli intersection.

    Samples uniformly over the intersection of the two outer-circle
    bounding boxes; independent of the lens-decomposition code path.
    """
    big = geom.l1 + geom.l2 + safety.d
    small = max(0.0, geom.l2 - geom.l1 - safety.d)
    lo_x = max(-big, dist - big)
    hi_x = min(big, dist + big)
    if lo_x >= hi_x:
        return 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    total = 0
    box_area = (hi_x - lo_x) * (2 * big)
    chunk = 2_000_000
    while total < n_samples:
        m = min(chunk, n_samples - total)
        x = rng.uniform(lo_x, hi_x, m)
        y = rng.uniform(-big, big, m)
        r1 = np.hypot(x, y)
        r2 = np.hypot(x - dist, y)
        inside = (r1 <= big) & (r1 >= small) & (r2 <= big) & (r2 >= small)
        hits += int(inside.sum())
        total += m
    return box_area * hits / total


class TestRingRadii:
    def test_equal_arms_clamped(self):
        assert ring_radii(EQUAL, SAFETY) == (0.0, 4.5)

    def test_unequal(self):
        assert ring_radii(UNEQUAL, SAFETY) == (2.75, 11.75)

    def test_zero_width_at_d_zero(self):
        r_in, r_out = ring_radii(UNEQUAL, SafetyModel(d=0.0))
        assert r_in == r_out == 7.25


class TestSCover:
    def test_motion_ring_value(self):
        area = s_cover(UNEQUAL, SAFETY, CoverMode.MOTION_RING)
        assert area == pytest.approx(math.pi * (11.75**2 - 2.75**2), rel=1e-12)
        assert area == pytest.approx(409.98, abs=0.01)

    def test_zero_at_d_zero(self):
        assert s_cover(UNEQUAL, SafetyModel(d=0.0)) == 0.0

    def test_full_patrol_equal_arms(self):
        area = s_cover(EQUAL, SAFETY, CoverMode.FULL_PATROL)
        assert area == pytest.approx(math.pi * 21.0**2, rel=1e-12)
        assert area == pytest.approx(1385.44, abs=0.01)


class TestSCollision:
    def test_zero_when_distance_too_large(self):
        assert s_collision(EQUAL, SAFETY, 2 * 16.5) == 0.0
        assert s_collision(EQUAL, SAFETY, 40.0) == 0.0

    def test_study_baseline_value(self):
        area = s_collision(EQUAL, SAFETY, 25.6)
        expected = 4.5 * 12.75 * ((16.5 - 12.8) / 4.125)
        assert area == pytest.approx(expected, rel=1e-12)
        assert area == pytest.approx(51.46364, abs=1e-3)

    def test_zero_at_d_zero(self):
        assert s_collision(UNEQUAL, SafetyModel(d=0.0), 20.0) == 0.0


class TestSConflict:
    def test_zero_beyond_touching(self):
        assert s_conflict(EQUAL, SAFETY, 42.0) == 0.0
        assert s_conflict(EQUAL, SAFETY, 100.0) == 0.0

    def test_coincident_full_annulus(self):
        area = s_conflict(UNEQUAL, SAFETY, 0.0)
        big = 7.25 + 14.5 + 4.5
        small = 14.5 - 7.25 - 4.5
        assert area == pytest.approx(math.pi * (big**2 - small**2), rel=1e-12)

    def test_equal_arm_lens_vs_rejection_oracle(self):
        area = s_conflict(EQUAL, SAFETY, 25.6)
        oracle = annuli_intersection_monte_carlo(EQUAL, SAFETY, 25.6, 10**7, 99)
        assert abs(area - oracle) / oracle < 1e-3

    def test_random_triples_vs_rejection_oracle(self):
        rng = np.random.default_rng(123)
        for k in range(50):
            l1 = 5.0 + rng.random() * 10.0
            l2 = l1 * (1.0 + rng.random() * 2.0)
            d = rng.random() * 6.0
            geom = ArmGeometry(l1, l2)
            safety = SafetyModel(d, 0.0, d)
            big = l1 + l2 + d
            dist = rng.random() * 1.9 * big + 0.05 * big
            area = s_conflict(geom, safety, dist)
            oracle = annuli_intersection_monte_carlo(
                geom, safety, dist, 10**7, 1000 + k)
            if oracle > 1.0:  # relative comparison needs a real area
                assert abs(area - oracle) / oracle < 2e-3
            else:
                assert abs(area - oracle) < 0.05


class TestCollisionProbability:
    def test_type1_exactly_zero(self):
        for mode in CoverMode:
            res = collision_probability_analytic(EQUAL, SAFETY, 50.0, mode)
            assert res.raw == 0.0
            assert res.clamped == 0.0
            assert res.interaction is InteractionType.TYPE1

    def test_composes_from_area_oracles(self):
        # Single TYPE2 class at the first shell, multiplicity 6.
        res = collision_probability_analytic(EQUAL, SAFETY, 25.6)
        assert res.interaction is InteractionType.TYPE2
        cover = s_cover(EQUAL, SAFETY)
        expected = 6 * (s_conflict(EQUAL, SAFETY, 25.6) / cover) \
            * (s_collision(EQUAL, SAFETY, 25.6) / cover)
        assert res.raw == pytest.approx(expected, rel=1e-12)
        classes = lattice_neighbor_classes(25.6, 42.0)
        assert len(res.areas.conflict_by_class) == len(classes) == 1

    def test_decreases_with_pitch(self):
        for mode in CoverMode:
            p_near = collision_probability_analytic(EQUAL, SAFETY, 25.6, mode)
            p_far = collision_probability_analytic(EQUAL, SAFETY, 35.0, mode)
            assert p_near.raw > p_far.raw

    def test_monotone_over_pitch_grid(self):
        for mode in CoverMode:
            values = [
                collision_probability_analytic(EQUAL, SAFETY, float(p), mode).raw
                for p in np.linspace(24.6, 45.0, 40)
            ]
            assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_full_patrol_monotone_in_l2(self):
        values = [
            collision_probability_analytic(
                ArmGeometry(8.25, 8.25 * r), SAFETY, 25.6,
                CoverMode.FULL_PATROL).raw
            for r in (1.0, 1.5, 2.0, 2.5, 3.0)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_terms_nonnegative_and_subadditive(self):
        res = collision_probability_analytic(
            ArmGeometry(8.25, 24.75), SAFETY, 25.6, CoverMode.FULL_PATROL)
        cover = res.areas.s_cover
        terms = []
        classes = lattice_neighbor_classes(25.6, 2 * (8.25 + 24.75 + 4.5))
        for (dist, conflict), (_, collision), (_, mult) in zip(
            res.areas.conflict_by_class, res.areas.collision_by_class,
            [(d, m) for d, m in classes],
        ):
            term = mult * (conflict / cover) * (collision / cover)
            assert term >= 0.0
            terms.append(term)
        assert sum(terms) == pytest.approx(res.raw, rel=1e-12)
        running = 0.0
        for term in terms:
            running += term
            assert running <= res.raw + 1e-12

    def test_clamped_in_unit_interval(self):
        res = collision_probability_analytic(EQUAL, SAFETY, 25.6)
        assert res.raw > 1.0  # thin-ring cover makes the raw value large
        assert res.clamped == 1.0

    def test_equal_arm_specialization_runs(self):
        res = collision_probability_analytic(EQUAL, SAFETY, 30.0)
        assert res.raw >= 0.0

    def test_degenerate_cover_raises(self):
        with pytest.raises(DegenerateCoverError):
            collision_probability_analytic(
                EQUAL, SafetyModel(d=0.0), 25.6, CoverMode.MOTION_RING)

    def test_degenerate_cover_ok_in_full_patrol(self):
        res = collision_probability_analytic(
            EQUAL, SafetyModel(d=0.0), 25.6, CoverMode.FULL_PATROL)
        assert res.raw == 0.0  # collision band has zero width at d = 0
