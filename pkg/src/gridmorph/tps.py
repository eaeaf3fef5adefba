"""Thin-plate spline interpolation of landmark displacements.

The interpolant uses the biharmonic kernel U(r) = r^2 log r (U(0) = 0).
Fitting solves the dense (k+3) x (k+3) bordered system

    [ K   P ] [ w ]   [ q ]
    [ P^T 0 ] [ a ] = [ 0 ]

once per output coordinate, where K_ij = U(|p_i - p_j|) and the rows of P
are (1, x_i, y_i). The side conditions sum w = sum w x = sum w y = 0 make
the warp term decay far from the landmarks, so the map relaxes to its own
affine part at great distances. The bending energy of each coordinate is
the quadratic form w^T K w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LandmarkConfiguration
from .errors import (
    CoincidentLandmarksError,
    CollinearTemplateError,
    HomologyError,
    SingularSystemError,
)

SIDE_CONDITION_TOL = 1e-9
MIN_SEPARATION = 1e-10


def _kernel(r2: np.ndarray) -> np.ndarray:
    """U(r) = r^2 log r evaluated from squared distances, with U(0) = 0."""
    out = np.zeros_like(r2)
    pos = r2 > 0.0
    out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    return out


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff).sum(axis=2)


@dataclass(frozen=True, eq=False)
class TpsModel:
    """Fitted thin-plate spline from a template to a target.

    affine has rows (constant, x, y) per output coordinate; weights is
    (k, 2); energy holds the per-coordinate bending energies w^T K w.
    """

    template_points: np.ndarray  # (k, 2)
    weights: np.ndarray          # (k, 2)
    affine: np.ndarray           # (3, 2)
    energy: tuple[float, float]

    def __post_init__(self):
        for attr in ("template_points", "weights", "affine"):
            arr = np.asarray(getattr(self, attr), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)


def tps_fit(template: LandmarkConfiguration, target: LandmarkConfiguration) -> TpsModel:
    """Interpolating spline sending every template landmark to its target position."""
    if len(template) != len(target):
        raise HomologyError(
            f"configurations {template.name!r} and {target.name!r} are not homologous: "
            f"{len(template)} vs {len(target)} landmarks")
    p = template.coords
    k = len(template)

    d2 = _squared_distances(p, p)
    d2_off = d2.copy()
    np.fill_diagonal(d2_off, np.inf)
    if d2_off.min() < MIN_SEPARATION ** 2:
        a, b = divmod(int(np.argmin(d2_off)), k)
        raise CoincidentLandmarksError(
            f"template landmarks {template.labels[a]!r} and {template.labels[b]!r} "
            f"are closer than {MIN_SEPARATION}")
    sv = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-12 * sv[0]:
        raise CollinearTemplateError(
            f"template {template.name!r} landmarks are collinear; spline system is singular")

    kernel = _kernel(d2)
    pmat = np.column_stack([np.ones(k), p])
    lmat = np.zeros((k + 3, k + 3))
    lmat[:k, :k] = kernel
    lmat[:k, k:] = pmat
    lmat[k:, :k] = pmat.T
    rhs = np.zeros((k + 3, 2))
    rhs[:k] = target.coords
    try:
        solution = np.linalg.solve(lmat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"spline system is singular: {exc}") from exc

    weights = solution[:k]
    affine = solution[k:]
    moments = pmat.T @ weights  # side conditions, one column per coordinate
    scale = max(1.0, float(np.abs(target.coords).max()))
    if np.abs(moments).max() > SIDE_CONDITION_TOL * scale:
        raise SingularSystemError(
            "spline side conditions violated; system is too ill-conditioned "
            f"(max moment {np.abs(moments).max():.3e})")
    energy = tuple(float(weights[:, c] @ kernel @ weights[:, c]) for c in range(2))
    if min(energy) < -1e-12:
        raise SingularSystemError(
            f"bending energy came out negative ({min(energy):.3e}); system is ill-conditioned")
    return TpsModel(p, weights, affine, energy)


def tps_eval(model: TpsModel, points) -> np.ndarray:
    """Evaluate the spline at one point (2,) or many (..., 2)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    flat = pts.reshape(-1, 2)
    g = _kernel(_squared_distances(flat, model.template_points))
    out = model.affine[0] + flat @ model.affine[1:] + g @ model.weights
    return out[0] if single else out.reshape(pts.shape)


def tps_jacobian(model: TpsModel, point) -> np.ndarray:
    """Analytic 2x2 Jacobian at a point; entry [r, c] is d f_r / d p_c.

    Uses dU/dx = x (2 log r + 1) with the limit 0 at r = 0.
    """
    p = np.asarray(point, dtype=float).reshape(2)
    diff = p - model.template_points
    r2 = (diff * diff).sum(axis=1)
    factor = np.zeros_like(r2)
    pos = r2 > 0.0
    factor[pos] = np.log(r2[pos]) + 1.0  # 2 log r + 1
    grad_u = diff * factor[:, None]  # (k, 2): d U / d p
    return model.affine[1:].T + model.weights.T @ grad_u


def bending_energy(model: TpsModel) -> float:
    """Total bending energy: the sum of the two per-coordinate quadratic forms."""
    return float(model.energy[0] + model.energy[1])
