"""
Arbitrary-shape ROI support: fatness validation, outer/inner grid
rasterization and the best-inner-grid search.

Polygons are held as shapely geometries; coordinates are in units of the
sensor footprint side length.
"""

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
import shapely
from shapely.geometry import Point, Polygon
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from core.errors import GeometryError, ParameterError
from core.models import ApproximationReport, Cell

logger = logging.getLogger(__name__)

Point2 = Tuple[float, float]

BALL_RADIUS = math.sqrt(2) / 2
DISK_QUAD_SEGMENTS = 16
AREA_EPSILON = 1e-12


def _ring(coords: Sequence[Sequence[float]]) -> Tuple[Point2, ...]:
    points = [(float(x), float(y)) for x, y in coords]
    if len(points) > 1 and points[0] == points[-1]:
        points.pop()
    return tuple(points)


@dataclass(frozen=True)
class FatPolygon:
    """
    Simple polygon with optional holes.

    The outer boundary is stored counterclockwise and holes clockwise, so
    the interior always lies to the left of the boundary direction.
    """
    outer_boundary: Tuple[Point2, ...]
    holes: Tuple[Tuple[Point2, ...], ...] = ()

    def __post_init__(self):
        outer = _ring(self.outer_boundary)
        holes = tuple(_ring(h) for h in self.holes)
        for ring in (outer,) + holes:
            if len(ring) < 3:
                raise GeometryError(f"Boundary needs at least 3 vertices, got {len(ring)}")
            if len(set(ring)) != len(ring):
                raise GeometryError("Boundary has repeated vertices")

        shape = Polygon(outer, holes)
        if not shape.is_valid:
            raise GeometryError(f"Polygon is not simple: {shapely.is_valid_reason(shape)}")
        if shape.area <= AREA_EPSILON:
            raise GeometryError("Polygon has zero area")

        shape = orient(shape, sign=1.0)
        object.__setattr__(self, 'outer_boundary', _ring(shape.exterior.coords))
        object.__setattr__(self, 'holes', tuple(_ring(i.coords) for i in shape.interiors))

    @cached_property
    def shape(self) -> Polygon:
        shape = Polygon(self.outer_boundary, self.holes)
        shapely.prepare(shape)
        return shape

    @property
    def area(self) -> float:
        return self.shape.area

    def rings(self) -> List[Tuple[Point2, ...]]:
        return [self.outer_boundary, *self.holes]

    @classmethod
    def from_shape(cls, shape: Polygon) -> 'FatPolygon':
        if not isinstance(shape, Polygon):
            raise GeometryError(f"Expected a single polygon, got {shape.geom_type}")
        return cls(tuple(shape.exterior.coords), tuple(tuple(i.coords) for i in shape.interiors))

    @classmethod
    def rectangle(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> 'FatPolygon':
        return cls(((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)))

    @classmethod
    def disk(cls, center: Point2, radius: float) -> 'FatPolygon':
        """Regular 64-gon inscribed in the circle."""
        if radius <= 0:
            raise GeometryError(f"Disk radius must be positive, got {radius}")
        return cls.from_shape(Point(center).buffer(radius, quad_segs=DISK_QUAD_SEGMENTS))

    def translated(self, dx: float, dy: float) -> 'FatPolygon':
        return FatPolygon(tuple((x + dx, y + dy) for x, y in self.outer_boundary),
                          tuple(tuple((x + dx, y + dy) for x, y in h) for h in self.holes))

    def to_dict(self) -> Dict[str, Any]:
        return {'outer_boundary': [list(p) for p in self.outer_boundary],
                'holes': [[list(p) for p in h] for h in self.holes]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FatPolygon':
        try:
            return cls(tuple(tuple(p) for p in data['outer_boundary']),
                       tuple(tuple(tuple(p) for p in h) for h in data.get('holes', [])))
        except (KeyError, TypeError, ValueError) as e:
            raise GeometryError(f"Malformed polygon document: {e}") from e


@dataclass(frozen=True)
class GridApproximation:
    """Inner and outer cell sets of a polygon on one offset grid."""
    origin_offset: Point2
    inner_cells: FrozenSet[Cell]
    outer_cells: FrozenSet[Cell]

    @property
    def C_in(self) -> int:
        return len(self.inner_cells)

    @property
    def C_out(self) -> int:
        return len(self.outer_cells)


def load_polygon(path: Union[str, Path]) -> FatPolygon:
    """
    Load a polygon file.

    Args:
        path: JSON file with ``outer_boundary`` and ``holes`` vertex lists

    Returns:
        FatPolygon described by the file
    """
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise GeometryError(f"Polygon file {path} is not valid JSON: {e}") from e
    return FatPolygon.from_dict(data)


def _sharp_convex_vertices(ring: Tuple[Point2, ...], corner_angle_deg: float) -> List[Point2]:
    sharp = []
    n = len(ring)
    for k in range(n):
        px, py = ring[k - 1]
        cx, cy = ring[k]
        nx, ny = ring[(k + 1) % n]
        ax, ay = cx - px, cy - py
        bx, by = nx - cx, ny - cy
        cross = ax * by - ay * bx
        if cross <= 0:
            continue
        interior = 180.0 - math.degrees(math.atan2(cross, ax * bx + ay * by))
        if interior < corner_angle_deg:
            sharp.append((cx, cy))
    return sharp


def _boundary_samples(ring: Tuple[Point2, ...], per_unit: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sample points on a ring and the inward (left) unit normals there."""
    points = []
    normals = []
    n = len(ring)
    for k in range(n):
        x0, y0 = ring[k]
        x1, y1 = ring[(k + 1) % n]
        length = math.hypot(x1 - x0, y1 - y0)
        count = max(1, math.ceil(length * per_unit))
        tx, ty = (x1 - x0) / length, (y1 - y0) / length
        for s in range(count):
            t = (s + 0.5) / count
            points.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
            normals.append((-ty, tx))
    return np.asarray(points), np.asarray(normals)


def is_fat(poly: FatPolygon, boundary_samples: int = 8, ball_samples: int = 32,
           tolerance: float = 0.01, corner_angle_deg: float = 150.0) -> bool:
    """
    Sampled test of the fatness condition.

    At every sampled boundary point, the ball of radius sqrt(2)/2 centred
    sqrt(2)/2 along the inward normal must lie inside the polygon. Ball
    boundaries are sampled at ``ball_samples`` points with the radius
    shrunk by ``tolerance``. Samples within sqrt(2)/2 of a convex vertex
    sharper than ``corner_angle_deg`` are skipped, and the polygon must
    additionally contain a ball of that radius somewhere.

    Args:
        poly: Polygon to test
        boundary_samples: Samples per unit of boundary length (>= 3)
        ball_samples: Points on each ball boundary
        tolerance: Radius shrink for the ball test
        corner_angle_deg: Interior angle below which convex corners are skipped

    Returns:
        True when every tested ball fits
    """
    if boundary_samples < 3:
        raise ParameterError(f"Need at least 3 boundary samples per unit, got {boundary_samples}")

    shape = poly.shape
    radius = BALL_RADIUS - tolerance
    if shape.buffer(-radius).is_empty:
        return False

    angles = np.linspace(0.0, 2 * math.pi, ball_samples, endpoint=False)
    ring_offsets = np.stack([np.cos(angles), np.sin(angles)], axis=1) * radius

    for ring in poly.rings():
        points, normals = _boundary_samples(ring, boundary_samples)
        sharp = _sharp_convex_vertices(ring, corner_angle_deg)
        if sharp:
            corners = np.asarray(sharp)
            distances = np.linalg.norm(points[:, None, :] - corners[None, :, :], axis=2)
            keep = distances.min(axis=1) >= BALL_RADIUS
            points, normals = points[keep], normals[keep]
        if len(points) == 0:
            continue

        centers = points + normals * BALL_RADIUS
        if not shapely.contains_xy(shape, centers[:, 0], centers[:, 1]).all():
            return False
        ball_points = (centers[:, None, :] + ring_offsets[None, :, :]).reshape(-1, 2)
        if not shapely.contains_xy(shape, ball_points[:, 0], ball_points[:, 1]).all():
            return False
    return True


def is_unit_strip(poly: FatPolygon) -> bool:
    """Axis-aligned rectangle whose shorter side lies in [1, sqrt(2))."""
    if poly.holes:
        return False
    shape = poly.shape
    if abs(shape.envelope.area - shape.area) > 1e-9:
        return False
    xmin, ymin, xmax, ymax = shape.bounds
    return 1.0 <= min(xmax - xmin, ymax - ymin) < math.sqrt(2)


def _require_fat(poly: FatPolygon) -> None:
    if not is_unit_strip(poly) and not is_fat(poly):
        raise GeometryError("Polygon does not satisfy the fatness condition")


def _cell_boxes(shape: Polygon, offset: Point2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ox, oy = offset
    xmin, ymin, xmax, ymax = shape.bounds
    ii = np.arange(math.floor(xmin - ox) - 1, math.ceil(xmax - ox) + 1)
    jj = np.arange(math.floor(ymin - oy) - 1, math.ceil(ymax - oy) + 1)
    gi, gj = np.meshgrid(ii, jj, indexing='ij')
    gi, gj = gi.ravel(), gj.ravel()
    boxes = shapely.box(ox + gi, oy + gj, ox + gi + 1, oy + gj + 1)
    return gi, gj, boxes


def _inner_mask(shape: Polygon, boxes: np.ndarray) -> np.ndarray:
    return shapely.covers(shape, boxes)


def rasterize(poly: FatPolygon, origin_offset: Point2 = (0.0, 0.0),
              check: bool = True) -> GridApproximation:
    """
    Inner and outer grid approximation on the grid with the given offset.

    Cell (i, j) is the square [ox + i, ox + i + 1] x [oy + j, oy + j + 1].
    Inner cells are covered by the polygon (holes excluded); outer cells
    share interior points with it.

    Args:
        poly: Fat polygon
        origin_offset: Grid offset (ox, oy)
        check: Validate fatness first

    Returns:
        GridApproximation
    """
    if check:
        _require_fat(poly)
    offset = (float(origin_offset[0]), float(origin_offset[1]))
    gi, gj, boxes = _cell_boxes(poly.shape, offset)
    inner = _inner_mask(poly.shape, boxes)
    outer = shapely.relate_pattern(poly.shape, boxes, 'T********')
    return GridApproximation(
        origin_offset=offset,
        inner_cells=frozenset(zip(gi[inner].tolist(), gj[inner].tolist())),
        outer_cells=frozenset(zip(gi[outer].tolist(), gj[outer].tolist()))
    )


def best_inner_grid(poly: FatPolygon, resolution: float = 0.05,
                    check: bool = True) -> Tuple[GridApproximation, int]:
    """
    Search axis-aligned grid offsets for the fewest inner cells.

    Args:
        poly: Fat polygon
        resolution: Offset step in [0, 1) along each axis (<= 0.1)
        check: Validate fatness first

    Returns:
        (approximation at the best offset, its inner cell count)
    """
    if not 0 < resolution <= 0.1:
        raise ParameterError(f"Offset resolution must be in (0, 0.1], got {resolution}")
    if check:
        _require_fat(poly)

    steps = [k * resolution for k in range(math.ceil(1.0 / resolution - 1e-9))]
    best_offset: Optional[Point2] = None
    best_count = 0
    for ox in steps:
        for oy in steps:
            _, _, boxes = _cell_boxes(poly.shape, (ox, oy))
            count = int(_inner_mask(poly.shape, boxes).sum())
            if count >= 1 and (best_offset is None or count < best_count):
                best_offset, best_count = (ox, oy), count

    if best_offset is None:
        raise GeometryError("No grid offset leaves an inner cell")
    return rasterize(poly, best_offset, check=False), best_count


def verify_approximation_bounds(poly: FatPolygon, resolution: float = 0.05) -> ApproximationReport:
    """
    Check C_out <= 3 C_in + 6 and C_in <= 6 C_best for one polygon.

    The algorithm's grid is the one at offset (0, 0).
    """
    _require_fat(poly)
    grid = rasterize(poly, (0.0, 0.0), check=False)
    _, best = best_inner_grid(poly, resolution, check=False)
    report = ApproximationReport(
        lemma3_ok=grid.C_out <= 3 * grid.C_in + 6,
        lemma4_ok=grid.C_in <= 6 * best,
        C_out=grid.C_out,
        C_in=grid.C_in,
        C_best=best
    )
    if not (report.lemma3_ok and report.lemma4_ok):
        logger.debug(f"Approximation bound failed: {report.to_dict()}")
    return report


def random_fat_polygon(seed: int, max_disks: int = 4, radius_range: Tuple[float, float] = (2.5, 4.0),
                       attempts: int = 100) -> FatPolygon:
    """
    Seeded union of overlapping disks, re-checked for fatness.

    Args:
        seed: RNG seed
        max_disks: Upper bound on the number of disks
        radius_range: Disk radii are drawn uniformly from this range
        attempts: Draws before giving up

    Returns:
        A fat, hole-free polygon
    """
    rng = np.random.default_rng(seed)
    low, high = radius_range
    if low < math.sqrt(2) or high < low:
        raise ParameterError(f"Disk radii must be at least sqrt(2), got {radius_range}")

    for _ in range(attempts):
        count = int(rng.integers(1, max_disks + 1))
        centers = [tuple(rng.random(2))]
        radii = [float(rng.uniform(low, high))]
        for _ in range(count - 1):
            anchor = int(rng.integers(len(centers)))
            radius = float(rng.uniform(low, high))
            distance = float(rng.uniform(0.3, 0.9)) * (radii[anchor] + radius)
            angle = float(rng.uniform(0.0, 2 * math.pi))
            ax, ay = centers[anchor]
            centers.append((ax + distance * math.cos(angle), ay + distance * math.sin(angle)))
            radii.append(radius)

        union = unary_union([Point(c).buffer(r, quad_segs=DISK_QUAD_SEGMENTS)
                             for c, r in zip(centers, radii)])
        if not isinstance(union, Polygon) or union.interiors:
            continue
        poly = FatPolygon.from_shape(union)
        if is_fat(poly):
            return poly
    raise GeometryError(f"No fat polygon found for seed {seed} in {attempts} attempts")
