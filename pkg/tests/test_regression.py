import numpy as np
import pytest

from fieldsim.errors import (
    InvalidParameterError,
    SingularSystemError,
    ZeroVarianceError,
)
from fieldsim.regression import (
    RegressionModel,
    RegressionSample,
    Standardization,
    design_row,
    fit_ridge,
    load_model,
    predict,
    r_squared,
    ridge_gradient,
    save_model,
    split_samples,
)

PLANTED = (0.02, 0.004, 0.015, -0.012, 0.001, 0.002, 0.0025, 0.002,
           -0.003, -0.008)


def poly(coeffs, x, y, z):
    basis = (1, x, y, z, x * x, y * y, z * z, x * y, x * z, y * z)
    return sum(c * b for c, b in zip(coeffs, basis))


def synthetic_samples(n, seed, noise=0.0, coeffs=PLANTED):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        x = 7.25 + rng.random() * (14.5 - 7.25)
        y = 1.0 + rng.random()
        z = 24.6 + rng.random() * (35.0 - 24.6)
        f = poly(coeffs, x, y, z) + noise * rng.normal()
        out.append(RegressionSample(x, y, z, max(0.0, f)))
    return out


class TestDesignRow:
    def test_origin(self):
        row = design_row(0.0, 0.0, 0.0)
        assert row.tolist() == [1, 0, 0, 0, 0, 0, 0, 0, 0, 0]

    def test_ones(self):
        assert design_row(1.0, 1.0, 1.0).tolist() == [1.0] * 10

    def test_hand_expansion(self):
        row = design_row(2.0, 3.0, 5.0)
        assert row.tolist() == [1, 2, 3, 5, 4, 9, 25, 6, 10, 15]

    def test_standardized_inputs(self):
        std = Standardization(shift=(2.0, 3.0, 5.0), scale=(1.0, 1.0, 1.0))
        row = design_row(2.0, 3.0, 5.0, std)
        assert row.tolist() == [1, 0, 0, 0, 0, 0, 0, 0, 0, 0]


class TestFitRidge:
    def test_recovers_planted_coefficients_raw(self):
        samples = synthetic_samples(60, 1)
        model = fit_ridge(samples, 0.0, standardize=False)
        assert np.max(np.abs(np.array(model.coefficients)
                             - np.array(PLANTED))) < 1e-8

    def test_standardized_fit_matches_predictions(self):
        samples = synthetic_samples(60, 2)
        model = fit_ridge(samples, 0.0, standardize=True)
        for s in samples[:20]:
            assert predict(model, s.x, s.y, s.z) == pytest.approx(
                poly(PLANTED, s.x, s.y, s.z), abs=1e-9)

    def test_large_lambda_shrinks_to_mean(self):
        samples = synthetic_samples(80, 3, noise=0.001)
        model = fit_ridge(samples, 1e12, standardize=True)
        assert max(abs(c) for c in model.coefficients[1:]) < 1e-6
        mean_f = np.mean([s.f for s in samples])
        assert predict(model, 10.0, 1.5, 30.0) == pytest.approx(
            mean_f, abs=1e-6)

    def test_needs_ten_samples(self):
        with pytest.raises(InvalidParameterError):
            fit_ridge(synthetic_samples(9, 4), 0.0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(InvalidParameterError):
            fit_ridge(synthetic_samples(20, 5), -1.0)

    def test_singular_system_raises(self):
        base = synthetic_samples(1, 6)[0]
        samples = [base] * 12
        with pytest.raises(SingularSystemError):
            fit_ridge(samples, 0.0, standardize=False)

    def test_gradient_vanishes_at_fit(self):
        samples = synthetic_samples(80, 7, noise=0.01)
        for lam in (0.0, 1e-3, 1.0):
            model = fit_ridge(samples, lam, standardize=True)
            grad = ridge_gradient(model, samples)
            assert np.max(np.abs(grad)) < 1e-8

    def test_affine_input_invariance(self):
        samples = synthetic_samples(50, 8, noise=0.005)
        scaled = [
            RegressionSample(3.0 * s.x + 1.0, 2.0 * s.y + 0.5,
                             0.1 * s.z + 40.0, s.f)
            for s in samples
        ]
        m1 = fit_ridge(samples, 1e-4, standardize=True)
        m2 = fit_ridge(scaled, 1e-4, standardize=True)
        for s, t in zip(samples[:20], scaled[:20]):
            assert abs(predict(m1, s.x, s.y, s.z)
                       - predict(m2, t.x, t.y, t.z)) < 1e-10

    def test_deterministic(self):
        samples = synthetic_samples(40, 9, noise=0.01)
        m1 = fit_ridge(samples, 1e-3)
        m2 = fit_ridge(samples, 1e-3)
        assert m1.coefficients == m2.coefficients


class TestPredict:
    def test_intercept_only(self):
        model = RegressionModel(
            coefficients=(0.05,) + (0.0,) * 9,
            regularization=0.0,
            standardization=Standardization.identity(),
        )
        assert predict(model, 10.0, 1.5, 30.0) == 0.05
        assert predict(model, 1.0, 1.0, 1.0) == 0.05

    def test_matches_hand_evaluated_polynomial(self):
        coeffs = tuple(v * 1e-3 for v in range(1, 11))
        model = RegressionModel(
            coefficients=coeffs,
            regularization=0.0,
            standardization=Standardization.identity(),
        )
        x, y, z = 9.0, 1.25, 27.0
        assert predict(model, x, y, z) == pytest.approx(
            poly(coeffs, x, y, z), rel=1e-12)

    def test_linear_in_coefficients(self):
        rng = np.random.default_rng(10)
        c1 = tuple(rng.normal(size=10))
        c2 = tuple(rng.normal(size=10))
        std = Standardization.identity()
        m1 = RegressionModel(c1, 0.0, std)
        m2 = RegressionModel(c2, 0.0, std)
        m12 = RegressionModel(tuple(a + b for a, b in zip(c1, c2)), 0.0, std)
        x, y, z = 8.0, 1.7, 33.0
        assert predict(m12, x, y, z) == pytest.approx(
            predict(m1, x, y, z) + predict(m2, x, y, z), rel=1e-12)


class TestRSquared:
    def test_perfect_fit(self):
        samples = synthetic_samples(40, 11)
        model = fit_ridge(samples, 0.0, standardize=False)
        assert r_squared(model, samples) == pytest.approx(1.0, abs=1e-10)

    def test_mean_predictor_scores_zero(self):
        samples = synthetic_samples(40, 12, noise=0.01)
        mean_f = float(np.mean([s.f for s in samples]))
        model = RegressionModel(
            coefficients=(mean_f,) + (0.0,) * 9,
            regularization=0.0,
            standardization=Standardization.identity(),
        )
        assert r_squared(model, samples) == pytest.approx(0.0, abs=1e-12)

    def test_zero_variance_raises(self):
        flat = [RegressionSample(8.0 + k, 1.5, 30.0, 0.25) for k in range(5)]
        model = fit_ridge(synthetic_samples(20, 13), 1e-3)
        with pytest.raises(ZeroVarianceError):
            r_squared(model, flat)

    def test_needs_two_samples(self):
        model = fit_ridge(synthetic_samples(20, 14), 1e-3)
        with pytest.raises(InvalidParameterError):
            r_squared(model, synthetic_samples(1, 15))


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        model = fit_ridge(synthetic_samples(40, 16, noise=0.01), 1e-3)
        path = tmp_path / "model.txt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded == model

    def test_significant_digits(self, tmp_path):
        model = fit_ridge(synthetic_samples(40, 17, noise=0.01), 1e-3)
        path = tmp_path / "model.txt"
        save_model(model, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 17
        # every value round-trips bit exactly through the text form
        for line, value in zip(lines, list(model.coefficients)):
            assert float(line) == value

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(InvalidParameterError):
            load_model(path)


class TestSplit:
    def test_deterministic_split(self):
        samples = synthetic_samples(40, 18)
        t1, v1 = split_samples(samples, 0.25, 5)
        t2, v2 = split_samples(samples, 0.25, 5)
        assert [s.f for s in t1] == [s.f for s in t2]
        assert len(v1) == 10 and len(t1) == 30
        assert [s.f for s in v1] == [s.f for s in v2]

    def test_different_seeds_differ(self):
        samples = synthetic_samples(40, 19)
        _, v1 = split_samples(samples, 0.25, 1)
        _, v2 = split_samples(samples, 0.25, 2)
        assert [s.f for s in v1] != [s.f for s in v2]


class TestSampleValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(InvalidParameterError):
            RegressionSample(0.0, 1.5, 30.0, 0.1)
        with pytest.raises(InvalidParameterError):
            RegressionSample(8.0, 0.5, 30.0, 0.1)
        with pytest.raises(InvalidParameterError):
            RegressionSample(8.0, 1.5, 30.0, -0.1)
