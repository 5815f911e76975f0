"""Quadratic surrogate for collision rate over design parameters.

Fits f(x, y, z) = a + b x + c y + d z + e x^2 + f y^2 + g z^2 + h xy +
i xz + j yz, where x is arm length (mm), y the arm-length ratio, and z
the pitch (mm), with optional ridge regularization on everything but
the intercept. Coefficients are stored positionally in the fixed basis
order [1, x, y, z, x^2, y^2, z^2, xy, xz, yz].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fieldsim.errors import (
    InvalidParameterError,
    SingularSystemError,
    ZeroVarianceError,
)

N_COEFFS = 10


@dataclass(frozen=True)
class RegressionSample:
    """One observation: design point (x, y, z) and collision rate f."""

    x: float  # arm length, mm
    y: float  # arm ratio
    z: float  # pitch, mm
    f: float  # collision rate

    def __post_init__(self) -> None:
        if self.x <= 0.0 or self.z <= 0.0:
            raise InvalidParameterError("arm length and pitch must be positive")
        if self.y < 1.0:
            raise InvalidParameterError("arm ratio must be >= 1")
        if self.f < 0.0:
            raise InvalidParameterError("collision rate must be non-negative")


@dataclass(frozen=True)
class Standardization:
    """Per-variable affine input map applied before the basis expansion."""

    shift: tuple[float, float, float]
    scale: tuple[float, float, float]

    @classmethod
    def identity(cls) -> "Standardization":
        return cls((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    def apply(self, x: float, y: float, z: float) -> tuple[float, float, float]:
        return (
            (x - self.shift[0]) / self.scale[0],
            (y - self.shift[1]) / self.scale[1],
            (z - self.shift[2]) / self.scale[2],
        )


@dataclass(frozen=True)
class RegressionModel:
    coefficients: tuple[float, ...]  # 10 values, fixed basis order
    regularization: float
    standardization: Standardization

    def __post_init__(self) -> None:
        if len(self.coefficients) != N_COEFFS:
            raise InvalidParameterError(
                f"expected {N_COEFFS} coefficients, got {len(self.coefficients)}"
            )


def design_row(
    x: float, y: float, z: float, standardization: Standardization | None = None
) -> np.ndarray:
    """Basis values [1, x, y, z, x^2, y^2, z^2, xy, xz, yz].

    When a standardization is given the basis is expanded on the
    standardized inputs.
    """
    if standardization is not None:
        x, y, z = standardization.apply(x, y, z)
    return np.array(
        [1.0, x, y, z, x * x, y * y, z * z, x * y, x * z, y * z],
        dtype=np.float64,
    )


def _design_matrix(
    samples: Sequence[RegressionSample], standardization: Standardization
) -> np.ndarray:
    return np.stack(
        [design_row(s.x, s.y, s.z, standardization) for s in samples]
    )


def fit_ridge(
    samples: Sequence[RegressionSample],
    regularization: float,
    standardize: bool = True,
) -> RegressionModel:
    """Least-squares fit with ridge penalty on non-intercept coefficients.

    Minimizes sum (f - model)^2 + lambda * ||coeffs[1:]||^2, solved
    deterministically through the augmented least-squares system (the
    closed-form ridge solution). With standardize=True (default) inputs
    are z-scored using the given samples, which should be the training
    split only.

    Raises:
        InvalidParameterError: fewer than 10 samples or lambda < 0.
        SingularSystemError: the regularized system is rank-deficient
            (degenerate sampling); a positive lambda usually fixes it.
    """
    if len(samples) < N_COEFFS:
        raise InvalidParameterError(
            f"need at least {N_COEFFS} samples, got {len(samples)}")
    if regularization < 0.0:
        raise InvalidParameterError("regularization must be non-negative")

    if standardize:
        xs = np.array([s.x for s in samples])
        ys = np.array([s.y for s in samples])
        zs = np.array([s.z for s in samples])
        scale = tuple(
            float(v) if v > 0.0 else 1.0
            for v in (xs.std(), ys.std(), zs.std())
        )
        standardization = Standardization(
            shift=(float(xs.mean()), float(ys.mean()), float(zs.mean())),
            scale=scale,
        )
    else:
        standardization = Standardization.identity()

    design = _design_matrix(samples, standardization)
    f = np.array([s.f for s in samples], dtype=np.float64)
    if regularization > 0.0:
        penalty = np.sqrt(regularization) * np.eye(N_COEFFS)[1:]
        a = np.vstack([design, penalty])
        b = np.concatenate([f, np.zeros(N_COEFFS - 1)])
    else:
        a = design
        b = f
    coeffs, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < N_COEFFS:
        raise SingularSystemError(
            "normal system is rank-deficient; sampling is degenerate "
            "(try a positive regularization)"
        )
    return RegressionModel(
        coefficients=tuple(float(c) for c in coeffs),
        regularization=regularization,
        standardization=standardization,
    )


def predict(model: RegressionModel, x: float, y: float, z: float) -> float:
    """Evaluate the surrogate at one point. No clamping is applied."""
    row = design_row(x, y, z, model.standardization)
    return float(row @ np.asarray(model.coefficients))


def r_squared(model: RegressionModel, samples: Sequence[RegressionSample]) -> float:
    """1 - SS_res / SS_tot over the given (test) samples.

    Raises:
        InvalidParameterError: fewer than 2 samples.
        ZeroVarianceError: all responses equal.
    """
    if len(samples) < 2:
        raise InvalidParameterError("need at least 2 samples for R^2")
    f = np.array([s.f for s in samples], dtype=np.float64)
    ss_tot = float(np.sum((f - f.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("test responses are constant")
    pred = np.array([predict(model, s.x, s.y, s.z) for s in samples])
    ss_res = float(np.sum((f - pred) ** 2))
    return 1.0 - ss_res / ss_tot


def ridge_gradient(
    model: RegressionModel, samples: Sequence[RegressionSample]
) -> np.ndarray:
    """Gradient of the ridge objective at the model's coefficients.

    Should vanish (to numerical precision) at a fitted model; exposed
    for verification.
    """
    design = _design_matrix(samples, model.standardization)
    f = np.array([s.f for s in samples], dtype=np.float64)
    beta = np.asarray(model.coefficients)
    grad = 2.0 * design.T @ (design @ beta - f)
    grad[1:] += 2.0 * model.regularization * beta[1:]
    return grad


def save_model(model: RegressionModel, path) -> None:
    """Write the flat text record: 10 coefficients, lambda, 3 shifts,
    3 scales, one value per line, 17 significant digits."""
    values = list(model.coefficients)
    values.append(model.regularization)
    values.extend(model.standardization.shift)
    values.extend(model.standardization.scale)
    Path(path).write_text(
        "".join(f"{v:.17g}\n" for v in values), encoding="ascii")


def load_model(path) -> RegressionModel:
    """Read a model written by :func:`save_model`."""
    values = [float(line) for line in Path(path).read_text().split()]
    if len(values) != N_COEFFS + 7:
        raise InvalidParameterError(
            f"model file must hold {N_COEFFS + 7} numbers, got {len(values)}")
    return RegressionModel(
        coefficients=tuple(values[:N_COEFFS]),
        regularization=values[N_COEFFS],
        standardization=Standardization(
            shift=tuple(values[N_COEFFS + 1:N_COEFFS + 4]),
            scale=tuple(values[N_COEFFS + 4:N_COEFFS + 7]),
        ),
    )


def split_samples(
    samples: Iterable[RegressionSample], test_fraction: float, seed: int
) -> tuple[list[RegressionSample], list[RegressionSample]]:
    """Deterministic train/test split (shuffle by seed, then cut)."""
    samples = list(samples)
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(samples))
    n_test = int(round(test_fraction * len(samples)))
    test_idx = set(order[:n_test].tolist())
    train = [s for k, s in enumerate(samples) if k not in test_idx]
    test = [s for k, s in enumerate(samples) if k in test_idx]
    return train, test
