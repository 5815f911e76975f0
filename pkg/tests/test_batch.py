import numpy as np
import pytest

from fieldsim import _segdist
from fieldsim.batch import (
    Kernel,
    batch_pair_distances,
    collision_flags_pruned,
    early_exit_pair_distance,
    naive_pair_distances,
    segment_batch,
)
from fieldsim.errors import (
    InvalidParameterError,
    InvalidSampleCountError,
    PairIndexError,
)
from fieldsim.geometry import (
    Segment,
    segment_min_distance_discrete,
    segment_min_distance_exact,
)


def random_batch(rng, n_segments, n_pairs, scale=60.0):
    elbows = rng.normal(scale=scale, size=(n_segments, 2))
    tips = elbows + rng.normal(scale=8.0, size=(n_segments, 2))
    ii, jj = np.triu_indices(n_segments, 1)
    pick = rng.choice(ii.size, size=min(n_pairs, ii.size), replace=False)
    pairs = np.stack([ii[pick], jj[pick]], axis=1)
    return segment_batch(elbows, tips, pairs)


class TestKernelSpec:
    def test_labels(self):
        assert Kernel.exact().label() == "exact"
        assert Kernel.discrete(64).label() == "discrete64"

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            Kernel("fast")
        with pytest.raises(InvalidSampleCountError):
            Kernel.discrete(1)


class TestSegmentBatch:
    def test_shape_validation(self):
        with pytest.raises(InvalidParameterError):
            segment_batch(np.zeros((3, 2)), np.zeros((4, 2)), [])

    def test_pair_index_out_of_range(self):
        with pytest.raises(PairIndexError):
            segment_batch(np.zeros((3, 2)), np.ones((3, 2)), [[0, 3]])
        with pytest.raises(PairIndexError):
            segment_batch(np.zeros((3, 2)), np.ones((3, 2)), [[-1, 1]])

    def test_duplicate_pairs_rejected(self):
        with pytest.raises(InvalidParameterError):
            segment_batch(
                np.zeros((3, 2)), np.ones((3, 2)), [[0, 1], [1, 0]])

    def test_empty_pairs(self):
        batch = segment_batch(np.zeros((2, 2)), np.ones((2, 2)), [])
        report = batch_pair_distances(batch, Kernel.exact(), 4.5)
        assert report.distances.size == 0
        assert report.flags.size == 0


class TestBatchMatchesScalar:
    @pytest.mark.parametrize("kernel", [Kernel.exact(), Kernel.discrete(64)])
    def test_bit_identical_to_scalar(self, kernel):
        rng = np.random.default_rng(2)
        batch = random_batch(rng, 60, 100)
        report = batch_pair_distances(batch, kernel, 4.5)
        for k, (i, j) in enumerate(batch.pairs.tolist()):
            s1 = Segment((batch.ax[i], batch.ay[i]), (batch.bx[i], batch.by[i]))
            s2 = Segment((batch.ax[j], batch.ay[j]), (batch.bx[j], batch.by[j]))
            if kernel.kind == "exact":
                scalar = segment_min_distance_exact(s1, s2)
            else:
                scalar = segment_min_distance_discrete(s1, s2, kernel.samples)
            assert report.distances[k] == scalar

    def test_flags_match_threshold(self):
        rng = np.random.default_rng(3)
        batch = random_batch(rng, 80, 200, scale=15.0)
        report = batch_pair_distances(batch, Kernel.exact(), 6.0)
        assert np.array_equal(report.flags, report.distances < 6.0)

    @pytest.mark.parametrize("kernel", [Kernel.exact(), Kernel.discrete(64)])
    def test_workers_bit_identical(self, kernel):
        rng = np.random.default_rng(5)
        batch = random_batch(rng, 300, 2000)
        r1 = batch_pair_distances(batch, kernel, 4.5, workers=1)
        r2 = batch_pair_distances(batch, kernel, 4.5, workers=2)
        assert np.array_equal(r1.distances, r2.distances)

    def test_numpy_fallback_bit_identical(self):
        rng = np.random.default_rng(11)
        args = tuple(rng.normal(scale=30, size=500) for _ in range(8))
        fast = _segdist.discrete_distance(*args, 64)
        slow = _segdist.discrete_distance_numpy(*args, 64)
        assert np.array_equal(fast, slow)

    def test_naive_reference_agrees(self):
        rng = np.random.default_rng(7)
        batch = random_batch(rng, 40, 60)
        for kernel in (Kernel.exact(), Kernel.discrete(16)):
            naive = naive_pair_distances(batch, kernel)
            fast = batch_pair_distances(batch, kernel, 4.5).distances
            assert np.max(np.abs(naive - fast)) < 1e-12


class TestEarlyExit:
    def test_far_pair_pruned(self):
        s1 = Segment((0.0, 0.0), (1.0, 0.0))
        s2 = Segment((100.0, 0.0), (101.0, 0.0))
        value, flag = early_exit_pair_distance(s1, s2, 4.5)
        assert flag is False
        assert value <= segment_min_distance_exact(s1, s2)
        assert value > 4.5

    def test_touching_not_pruned(self):
        s1 = Segment((0.0, 0.0), (1.0, 0.0))
        s2 = Segment((1.0, 0.0), (2.0, 1.0))
        value, flag = early_exit_pair_distance(s1, s2, 0.5)
        assert flag is True
        assert value == 0.0

    def test_negative_threshold_rejected(self):
        s = Segment((0, 0), (1, 0))
        with pytest.raises(InvalidParameterError):
            early_exit_pair_distance(s, s, -1.0)

    def test_flag_agreement_large_corpus(self):
        # 10^6 pairs: pruned flags must match the full kernel exactly.
        rng = np.random.default_rng(13)
        n = 1_000_000
        a1 = rng.normal(scale=40, size=(n, 2))
        b1 = a1 + rng.normal(scale=8, size=(n, 2))
        a2 = rng.normal(scale=40, size=(n, 2))
        b2 = a2 + rng.normal(scale=8, size=(n, 2))
        ax = np.concatenate([a1[:, 0], a2[:, 0]])
        ay = np.concatenate([a1[:, 1], a2[:, 1]])
        bx = np.concatenate([b1[:, 0], b2[:, 0]])
        by = np.concatenate([b1[:, 1], b2[:, 1]])
        ii = np.arange(n)
        jj = np.arange(n) + n
        threshold = 4.5
        pruned = collision_flags_pruned(
            ax, ay, bx, by, ii, jj, threshold, Kernel.exact())
        full = _segdist.exact_distance(
            a1[:, 0], a1[:, 1], b1[:, 0], b1[:, 1],
            a2[:, 0], a2[:, 1], b2[:, 0], b2[:, 1]) < threshold
        assert pruned.sum() > 0
        assert np.array_equal(pruned, full)

    def test_bound_never_exceeds_exact(self):
        rng = np.random.default_rng(17)
        args = tuple(rng.normal(scale=25, size=5000) for _ in range(8))
        bound = _segdist.separation_lower_bound(*args)
        exact = _segdist.exact_distance(*args)
        assert np.all(bound <= exact + 1e-12)


class TestScaling:
    def test_two_workers_faster_on_big_workload(self):
        rng = np.random.default_rng(19)
        batch = random_batch(rng, 4000, 12000)
        kernel = Kernel.discrete(64)
        batch_pair_distances(batch, kernel, 4.5)  # warm the JIT path

        def best_of(workers, reps=3):
            times = []
            for _ in range(reps):
                report = batch_pair_distances(batch, kernel, 4.5, workers)
                times.append(report.elapsed_s)
            return min(times)

        t1 = best_of(1)
        t2 = best_of(2)
        assert t2 < t1
