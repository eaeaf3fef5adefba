"""Registrations: two-point (baseline) coordinates, Procrustes superimposition,
and removal of the affine part of a shape comparison.

All registrations here are orientation preserving. No operation ever
applies a reflection; the Procrustes rotation is the closed-form 2D
optimum with determinant +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    UNIT_PROCRUSTES,
    UNIT_TWO_POINT,
    LandmarkConfiguration,
    Sample,
    centroid,
    centroid_size,
)
from .errors import (
    CollinearTemplateError,
    ConvergenceError,
    DegenerateBaselineError,
    DegenerateConfigurationError,
    HomologyError,
    InputError,
    NumericalError,
)

GPA_TOL = 1e-10
GPA_MAX_ITER = 100


class Baseline(NamedTuple):
    """Ordered pair of landmark ordinals anchoring a two-point registration.

    start is sent to (0, 0), end to (1, 0).
    """

    start: int
    end: int


@dataclass(frozen=True)
class AffineMap2:
    """Affine map of the plane: p -> linear @ p + translation."""

    linear: np.ndarray       # (2, 2)
    translation: np.ndarray  # (2,)

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=float).reshape(2, 2)
        translation = np.asarray(self.translation, dtype=float).reshape(2)
        if not (np.all(np.isfinite(linear)) and np.all(np.isfinite(translation))):
            raise InputError("affine map entries must be finite")
        linear.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "AffineMap2":
        return cls(np.eye(2), np.zeros(2))

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.linear.T + self.translation

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.linear))

    def inverse(self) -> "AffineMap2":
        if abs(self.determinant) <= 1e-12:
            raise NumericalError("affine map is not invertible (|det| <= 1e-12)")
        inv = np.linalg.inv(self.linear)
        return AffineMap2(inv, -inv @ self.translation)


def _check_baseline(config: LandmarkConfiguration, baseline: Baseline) -> Baseline:
    k = len(config)
    start, end = int(baseline[0]), int(baseline[1])
    if not (0 <= start < k and 0 <= end < k):
        raise InputError(f"baseline ({start}, {end}) out of range for {k} landmarks")
    if start == end:
        raise InputError("baseline endpoints must be two distinct landmarks")
    return Baseline(start, end)


def two_point_register(config: LandmarkConfiguration, baseline: Baseline) -> LandmarkConfiguration:
    """Register to baseline coordinates: similarity sending the baseline to (0,0)-(1,0).

    The transform is the orientation-preserving similarity determined by the
    two baseline landmarks; no reflection is introduced. The baseline
    endpoints land exactly on their anchors.
    """
    baseline = _check_baseline(config, baseline)
    p = config.coords
    a = p[baseline.start]
    d = p[baseline.end] - a
    nsq = d[0] * d[0] + d[1] * d[1]
    if np.sqrt(nsq) <= 1e-12 * centroid_size(config):
        raise DegenerateBaselineError(
            f"baseline landmarks {baseline.start} and {baseline.end} nearly coincide")
    rel = p - a
    # Similarity as division by the baseline vector in complex form.
    x = (rel[:, 0] * d[0] + rel[:, 1] * d[1]) / nsq
    y = (rel[:, 1] * d[0] - rel[:, 0] * d[1]) / nsq
    out = np.column_stack([x, y])
    # the arithmetic already lands the anchors on (0,0) and (1,0), but can
    # leave a -0.0 behind; pin them so the contract holds bit for bit
    out[baseline.start] = (0.0, 0.0)
    out[baseline.end] = (1.0, 0.0)
    return config.with_coords(out, unit=UNIT_TWO_POINT)


def _normalized(coords: np.ndarray) -> np.ndarray:
    """Center at the origin and scale to unit centroid size."""
    dev = coords - coords.mean(axis=0)
    size = np.sqrt((dev * dev).sum())
    if size <= 0.0:
        raise DegenerateConfigurationError("all landmarks coincide; centroid size is zero")
    return dev / size


def optimal_rotation_angle(coords: np.ndarray, reference: np.ndarray) -> float:
    """Closed-form angle rotating coords onto reference in the least-squares sense.

    Both inputs must already be centered. The optimum of
    sum ||R(theta) p_i - q_i||^2 is atan2(sum(x_i y'_i - y_i x'_i),
    sum(x_i x'_i + y_i y'_i)) with primes on the reference.
    """
    a = float((coords[:, 0] * reference[:, 0] + coords[:, 1] * reference[:, 1]).sum())
    b = float((coords[:, 0] * reference[:, 1] - coords[:, 1] * reference[:, 0]).sum())
    return float(np.arctan2(b, a))


def procrustes_align(config: LandmarkConfiguration,
                     reference: LandmarkConfiguration) -> LandmarkConfiguration:
    """Center, scale to unit centroid size, and rotate onto the reference.

    The applied rotation is a pure rotation (determinant +1); reflections
    are never used. The reference is consulted only for the angle.
    """
    if len(config) != len(reference):
        raise HomologyError(
            f"configurations {config.name!r} and {reference.name!r} are not homologous: "
            f"{len(config)} vs {len(reference)} landmarks")
    p = _normalized(config.coords)
    q = reference.coords - reference.coords.mean(axis=0)
    if np.sqrt((q * q).sum()) <= 0.0:
        raise DegenerateConfigurationError(
            f"reference {reference.name!r} is degenerate (all landmarks coincide)")
    theta = optimal_rotation_angle(p, q)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return config.with_coords(p @ rot.T, unit=UNIT_PROCRUSTES)


def gpa_mean(sample: Sample, name: str = "mean") -> LandmarkConfiguration:
    """Generalized Procrustes mean of all configurations in the sample.

    The reference starts as the first configuration centered and scaled to
    unit centroid size. Each pass aligns every configuration to the
    reference, averages coordinates, and re-centers/re-scales the average;
    iteration stops when the mean moves less than 1e-10 RMS.
    """
    configs = sample.configurations
    ref = _normalized(configs[0].coords)
    labels = sample.labels
    for iteration in range(1, GPA_MAX_ITER + 1):
        ref_config = LandmarkConfiguration(name, labels, ref, UNIT_PROCRUSTES)
        aligned = np.stack([procrustes_align(c, ref_config).coords for c in configs])
        avg = _normalized(aligned.mean(axis=0))
        rms = float(np.sqrt(((avg - ref) ** 2).mean()))
        ref = avg
        if rms < GPA_TOL:
            return LandmarkConfiguration(name, labels, ref, UNIT_PROCRUSTES)
    raise ConvergenceError(
        f"generalized Procrustes averaging did not converge in {GPA_MAX_ITER} iterations "
        f"(last RMS movement {rms:.3e})")


def affine_fit(template: LandmarkConfiguration,
               target: LandmarkConfiguration) -> AffineMap2:
    """Least-squares affine map taking template landmarks onto target landmarks.

    Each target coordinate is regressed on (1, x, y) of the template. Solved
    by orthogonal decomposition; a collinear template is rejected.
    """
    if len(template) != len(target):
        raise HomologyError(
            f"configurations {template.name!r} and {target.name!r} are not homologous: "
            f"{len(template)} vs {len(target)} landmarks")
    p = template.coords
    design = np.column_stack([np.ones(len(template)), p])
    coef, _, rank, _ = np.linalg.lstsq(design, target.coords, rcond=None)
    if rank < 3:
        raise CollinearTemplateError(
            f"template {template.name!r} landmarks are collinear; affine fit is rank-deficient")
    return AffineMap2(coef[1:3].T, coef[0])


def remove_affine(template: LandmarkConfiguration,
                  target: LandmarkConfiguration) -> LandmarkConfiguration:
    """Strip the affine part of the template->target comparison.

    Returns the target with each landmark replaced by
    template_i + (target_i - A(template_i)) where A is the least-squares
    affine fit. Refitting an affine map from the template to the result
    gives the identity, so only the nonaffine part of the comparison
    survives. Both inputs should already share a registration.
    """
    amap = affine_fit(template, target)
    adjusted = template.coords + (target.coords - amap(template.coords))
    return target.with_coords(adjusted)
