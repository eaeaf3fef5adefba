"""Transformation grids and segment-rotation surveys.

A grid is specified in template coordinates, pushed through any point map
(spline, trend, affine, bilinear pair, homography), and then optionally
trimmed to a polygon or extended beyond the data. Trimming tests the
template preimage of each sample by default, so the same region of the
template is shown no matter how wild the map is; trimming on the image
side is available where the target region is what matters. Image
coordinates are never altered by trimming, only kept flags.

Angles are signed with the counterclockwise direction positive; reports
carry that convention explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import LandmarkConfiguration, Segment, as_coords, enumerate_segments
from .errors import (
    DegenerateConfigurationError,
    DegeneratePolygonError,
    HomologyError,
    InputError,
    ZeroLengthSegmentError,
)
from .maps import BilinearMap, Homography, Quad
from .registration import AffineMap2
from .tps import TpsModel, tps_eval
from .trend import PolynomialTrend, trend_eval

DEFAULT_CELLS = 24
DEFAULT_SAMPLES_PER_EDGE = 10
BOUNDARY_TOL = 1e-12
ROTATION_CONVENTION = "counterclockwise-positive"


@dataclass(frozen=True)
class GridSpec:
    """A rectangular window of square cells in template coordinates.

    base_extent records the construction-time extents; extend_grid measures
    its multiples against them, which makes repeated extensions additive.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE
    base_extent: tuple[float, float] | None = None

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        if not (x1 > x0 and y1 > y0):
            raise InputError(f"grid ranges must be non-empty, got x={self.x_range} y={self.y_range}")
        if self.nx < 1 or self.ny < 1:
            raise InputError("grid needs at least one cell per axis")
        if self.samples_per_edge < 2:
            raise InputError("need at least 2 samples per cell edge")
        if self.base_extent is None:
            object.__setattr__(self, "base_extent", (x1 - x0, y1 - y0))

    @property
    def cell_size(self) -> tuple[float, float]:
        return ((self.x_range[1] - self.x_range[0]) / self.nx,
                (self.y_range[1] - self.y_range[0]) / self.ny)


def make_grid(template, margin: float = 0.0, cells: int = DEFAULT_CELLS,
              samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE) -> GridSpec:
    """Grid window over the template's bounding box, expanded by margin per side.

    The longer axis is divided into exactly `cells` cells; the cell size is
    carried to the other axis (cells stay square) and that axis's range is
    widened symmetrically to hold a whole number of cells.
    """
    coords = as_coords(template)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    w = hi - lo
    if w[0] <= 0.0 or w[1] <= 0.0:
        raise DegenerateConfigurationError("bounding box has zero area; cannot build a grid")
    if cells < 1:
        raise InputError("cells must be at least 1")
    lo = lo - margin * w
    hi = hi + margin * w
    w = hi - lo
    h = float(w.max()) / cells
    n = [cells, cells]
    for ax in range(2):
        if w[ax] < w.max():
            n[ax] = max(1, math.ceil(w[ax] / h - 1e-9))
            pad = (n[ax] * h - w[ax]) / 2.0
            lo[ax] -= pad
            hi[ax] += pad
    return GridSpec((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])),
                    n[0], n[1], samples_per_edge)


_DIRECTIONS = {"left": (0, -1), "right": (0, +1), "down": (1, -1), "up": (1, +1)}


def extend_grid(spec: GridSpec, direction: str, multiples: float) -> GridSpec:
    """Push one edge of the window outward by multiples of the construction extent.

    The cell size is preserved, so the extension snaps to a whole number of
    cells; every documented use is exact. Extending the same side twice by
    m1 and m2 equals one extension by m1 + m2 whenever the snaps are exact.
    """
    if direction not in _DIRECTIONS:
        raise InputError(f"direction must be one of {sorted(_DIRECTIONS)}, got {direction!r}")
    if not multiples > 0.0:
        raise InputError(f"multiples must be positive, got {multiples}")
    axis, sign = _DIRECTIONS[direction]
    amount = multiples * spec.base_extent[axis]
    h = spec.cell_size[axis]
    cells_added = int(math.floor(amount / h + 0.5))
    if abs(cells_added * h - amount) > 1e-9 * max(h, amount):
        amount = cells_added * h  # snap to the lattice
    if cells_added == 0:
        return spec
    rng = list(spec.x_range if axis == 0 else spec.y_range)
    rng[0 if sign < 0 else 1] += sign * amount
    new_ranges = {
        "x_range": tuple(rng) if axis == 0 else spec.x_range,
        "y_range": tuple(rng) if axis == 1 else spec.y_range,
    }
    return replace(spec, **new_ranges,
                   nx=spec.nx + (cells_added if axis == 0 else 0),
                   ny=spec.ny + (cells_added if axis == 1 else 0))


def as_point_map(obj):
    """Uniform vectorized evaluation for anything that can move points.

    Accepts a TpsModel, PolynomialTrend, AffineMap2, Homography, BilinearMap,
    a (source Quad, destination Quad) pair, or a plain callable on (n, 2)
    arrays. The returned callable maps (n, 2) -> (n, 2), with NaN rows where
    the underlying map has no value (outside a bilinear source quad, on the
    vanishing line of a homography).
    """
    if isinstance(obj, TpsModel):
        return lambda pts: tps_eval(obj, pts)
    if isinstance(obj, PolynomialTrend):
        return lambda pts: trend_eval(obj, pts)
    if isinstance(obj, (AffineMap2,)):
        return obj
    if isinstance(obj, (Homography, BilinearMap)):
        return obj.map_points
    if isinstance(obj, tuple) and len(obj) == 2 and all(isinstance(q, Quad) for q in obj):
        return BilinearMap(*obj).map_points
    if callable(obj):
        return obj
    raise InputError(f"cannot interpret {type(obj).__name__} as a point map")


@dataclass(frozen=True, eq=False)
class GridPolyline:
    """One grid line: sampled preimage, its image, and per-sample kept flags."""

    preimage: np.ndarray  # (n, 2)
    image: np.ndarray     # (n, 2)
    kept: np.ndarray      # (n,) bool

    def __post_init__(self):
        for attr in ("preimage", "image", "kept"):
            arr = np.asarray(getattr(self, attr))
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)


@dataclass(frozen=True, eq=False)
class DeformedGrid:
    """Two families of deformed grid lines plus the GridSpec they came from."""

    spec: GridSpec
    vertical: tuple[GridPolyline, ...]    # lines of constant x
    horizontal: tuple[GridPolyline, ...]  # lines of constant y

    @property
    def polylines(self) -> tuple[GridPolyline, ...]:
        return self.vertical + self.horizontal

    @property
    def total_samples(self) -> int:
        return sum(p.kept.size for p in self.polylines)

    @property
    def kept_samples(self) -> int:
        return sum(int(p.kept.sum()) for p in self.polylines)


def deform_grid(spec: GridSpec, mapping) -> DeformedGrid:
    """Sample every grid line and push the samples through the map.

    Samples whose image is undefined are marked not kept; their preimages
    stay, so trimming and rendering can still see the lattice.
    """
    pmap = as_point_map(mapping)
    xs = np.linspace(spec.x_range[0], spec.x_range[1], spec.nx + 1)
    ys = np.linspace(spec.y_range[0], spec.y_range[1], spec.ny + 1)
    per_v = spec.ny * (spec.samples_per_edge - 1) + 1
    per_h = spec.nx * (spec.samples_per_edge - 1) + 1
    ts_v = np.linspace(spec.y_range[0], spec.y_range[1], per_v)
    ts_h = np.linspace(spec.x_range[0], spec.x_range[1], per_h)

    pre_v = [np.column_stack([np.full(per_v, x), ts_v]) for x in xs]
    pre_h = [np.column_stack([ts_h, np.full(per_h, y)]) for y in ys]
    stacked = np.vstack(pre_v + pre_h)
    images = np.asarray(pmap(stacked), dtype=float)
    if images.shape != stacked.shape:
        raise InputError("point map returned a wrong-shaped array")

    lines: list[GridPolyline] = []
    offset = 0
    for pre in pre_v + pre_h:
        img = images[offset:offset + len(pre)]
        kept = np.isfinite(img).all(axis=1)
        lines.append(GridPolyline(pre, img, kept))
        offset += len(pre)
    nv = len(pre_v)
    return DeformedGrid(spec, tuple(lines[:nv]), tuple(lines[nv:]))


def _polygon_array(polygon) -> np.ndarray:
    poly = as_coords(polygon)
    if poly.shape[0] < 3:
        raise DegeneratePolygonError(f"polygon needs at least 3 vertices, got {poly.shape[0]}")
    if not np.all(np.isfinite(poly)):
        raise DegeneratePolygonError("polygon vertices must be finite")
    sv = np.linalg.svd(poly - poly.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegeneratePolygonError("polygon is degenerate (all vertices collinear)")
    return poly


def points_in_polygon(points, polygon) -> np.ndarray:
    """Even-odd test for many points; boundary points (within 1e-12) count inside."""
    poly = _polygon_array(polygon)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    boundary = np.zeros(len(pts), dtype=bool)
    finite = np.isfinite(pts).all(axis=1)
    m = len(poly)
    for a in range(m):
        ax, ay = poly[a]
        bx, by = poly[(a + 1) % m]
        # crossing test, half-open in y so shared vertices count once
        cond = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_hit = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= cond & (x < x_hit)
        # boundary proximity
        ex, ey = bx - ax, by - ay
        len2 = ex * ex + ey * ey
        if len2 > 0.0:
            t = np.clip(((x - ax) * ex + (y - ay) * ey) / len2, 0.0, 1.0)
        else:
            t = np.zeros_like(x)
        dx = x - (ax + t * ex)
        dy = y - (ay + t * ey)
        boundary |= dx * dx + dy * dy <= BOUNDARY_TOL ** 2
    return (inside | boundary) & finite


def point_in_polygon(point, polygon) -> bool:
    """Even-odd test for one point; boundary points (within 1e-12) count inside."""
    return bool(points_in_polygon(np.asarray(point, dtype=float).reshape(1, 2), polygon)[0])


def trim_grid(grid: DeformedGrid, polygon, space: str = "template") -> DeformedGrid:
    """Clear kept flags for samples outside the polygon.

    space="template" tests each sample's preimage (the default), so the
    polygon is drawn in template coordinates; space="image" tests the
    deformed positions instead. Coordinates are never altered.
    """
    if space not in ("template", "image"):
        raise InputError(f"space must be 'template' or 'image', got {space!r}")
    poly = _polygon_array(polygon)

    def trimmed(line: GridPolyline) -> GridPolyline:
        where = line.preimage if space == "template" else line.image
        keep = line.kept & points_in_polygon(where, poly)
        return GridPolyline(line.preimage, line.image, keep)

    return DeformedGrid(grid.spec,
                        tuple(trimmed(p) for p in grid.vertical),
                        tuple(trimmed(p) for p in grid.horizontal))


def kept_runs(line: GridPolyline) -> list[np.ndarray]:
    """Split one deformed line into maximal kept runs of image points, for drawing."""
    runs: list[np.ndarray] = []
    start = None
    for idx, flag in enumerate(line.kept):
        if flag and start is None:
            start = idx
        elif not flag and start is not None:
            if idx - start >= 2:
                runs.append(line.image[start:idx])
            start = None
    if start is not None and len(line.kept) - start >= 2:
        runs.append(line.image[start:])
    return runs


def landmark_cycle_polygon(config) -> np.ndarray:
    """The closed polygon visiting the landmarks in their stored order."""
    return as_coords(config)


def convex_hull_polygon(config) -> np.ndarray:
    """Convex hull of the landmarks (monotone chain), counterclockwise."""
    pts = sorted(map(tuple, as_coords(config)))

    def half(points):
        chain: list[tuple[float, float]] = []
        for p in points:
            while len(chain) >= 2:
                (ox, oy), (ax, ay) = chain[-2], chain[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(list(reversed(pts)))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegeneratePolygonError("landmarks are collinear; hull is degenerate")
    return np.asarray(hull, dtype=float)


@dataclass(frozen=True, eq=False)
class SegmentRotationReport:
    """Signed rotation and length ratio of every interlandmark segment.

    rotations are in radians, wrapped to (-pi, pi], with counterclockwise
    positive (see convention). template_directions hold each segment's
    direction angle in the template, for orientation-dependent summaries.
    """

    segments: tuple[Segment, ...]
    labels: tuple[str, ...]
    rotations: np.ndarray            # (m,)
    ratios: np.ndarray               # (m,)
    template_directions: np.ndarray  # (m,)
    convention: str = ROTATION_CONVENTION

    def __post_init__(self):
        for attr in ("rotations", "ratios", "template_directions"):
            arr = np.asarray(getattr(self, attr), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)

    def rows(self):
        """Yield (segment, label pair, rotation, ratio, template direction)."""
        for idx, seg in enumerate(self.segments):
            yield (seg, (self.labels[seg.i], self.labels[seg.j]),
                   float(self.rotations[idx]), float(self.ratios[idx]),
                   float(self.template_directions[idx]))


def segment_rotations(template: LandmarkConfiguration,
                      target: LandmarkConfiguration) -> SegmentRotationReport:
    """Rotation and length ratio of every segment, template -> target.

    Both configurations must be homologous and share a registration; the
    unit tags are checked because comparing segments across mismatched
    registrations is meaningless.
    """
    if len(template) != len(target) or template.labels != target.labels:
        raise HomologyError(
            f"configurations {template.name!r} and {target.name!r} are not homologous")
    if template.unit != target.unit:
        raise InputError(
            f"configurations must share a registration: unit tags are "
            f"{template.unit!r} vs {target.unit!r}")
    segs = enumerate_segments(len(template))
    ii = np.array([s.i for s in segs])
    jj = np.array([s.j for s in segs])
    u = template.coords[jj] - template.coords[ii]
    v = target.coords[jj] - target.coords[ii]
    nu = np.hypot(u[:, 0], u[:, 1])
    nv = np.hypot(v[:, 0], v[:, 1])
    for norms, config in ((nu, template), (nv, target)):
        if np.any(norms == 0.0):
            idx = int(np.argmin(norms))
            raise ZeroLengthSegmentError(
                f"segment ({template.labels[segs[idx].i]}, {template.labels[segs[idx].j]}) "
                f"has zero length in {config.name!r}")
    rot = np.arctan2(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0],
                     u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1])
    rot = np.where(rot <= -np.pi, np.pi, rot)  # wrap to (-pi, pi]
    return SegmentRotationReport(
        segments=tuple(segs),
        labels=template.labels,
        rotations=rot,
        ratios=nv / nu,
        template_directions=np.arctan2(u[:, 1], u[:, 0]),
    )


def filter_rotations(report: SegmentRotationReport, threshold: float) -> list[Segment]:
    """Segments whose |rotation| meets the threshold, largest magnitude first."""
    if threshold < 0.0:
        raise InputError(f"threshold must be non-negative, got {threshold}")
    picked = [(abs(float(report.rotations[idx])), seg)
              for idx, seg in enumerate(report.segments)
              if abs(float(report.rotations[idx])) >= threshold]
    picked.sort(key=lambda item: (-item[0], item[1]))
    return [seg for _, seg in picked]
