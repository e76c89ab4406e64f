"""Geometry and planning over verified tractor traces.

Boundary detection runs a k-nearest-neighbour concave hull over the locally
projected trace: starting from the lowest point the walk repeatedly takes
the sharpest available right-hand turn among the k nearest unused points,
rejecting edges that would cross the hull, and grows k until the result is
a simple ring that holds (essentially) every input point.  If no k up to
the limit works, the convex hull stands in and the method is flagged.

Acreage is the shoelace area of the projected ring.  Clustering is greedy
agglomerative merging under radius and capacity caps; tractor assignment
minimizes distance plus skill/experience penalties, solved exactly with the
Hungarian method up to a size limit and greedily beyond it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (DegeneratePolygon, InfeasibleSkill,
                     InsufficientWeatherData, SpanTooLarge)

EARTH_RADIUS_M = 6371000.0

MIN_BOUNDARY_POINTS = 30
DEDUP_RESOLUTION_M = 1.0
KNN_START = 7
KNN_LIMIT = 30
AREA_RANGE_HA = (0.05, 100.0)
CONTAINMENT_TOL_M = 2.0

SKILL_MISS_PENALTY = 1000.0
EXPERIENCE_WEIGHT = 10.0
OPTIMAL_ASSIGNMENT_LIMIT = 12

DEFAULT_MOISTURE_BAND = (0.20, 0.35)
DEFAULT_HORIZON_DAYS = 14
DEFAULT_MAX_RADIUS_KM = 5.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon {self.lon} out of range")


@dataclass(frozen=True)
class Trace:
    tractor_id: str
    day_stamp: str
    points: tuple[GeoPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("a trace needs at least one point")


class LocalProjection:
    """Equirectangular plane about a centroid; meters east/north.

    Adequate for field-scale work: the round trip is exact up to float
    noise, and distortion at the permitted span (1 degree) stays far below
    the geometry tolerances used here.
    """

    def __init__(self, lat0: float, lon0: float):
        self.lat0 = lat0
        self.lon0 = lon0
        self._cos0 = math.cos(math.radians(lat0))

    def to_xy(self, latlon: np.ndarray) -> np.ndarray:
        lat = np.radians(latlon[:, 0] - self.lat0)
        lon = np.radians(latlon[:, 1] - self.lon0)
        return np.column_stack((EARTH_RADIUS_M * self._cos0 * lon,
                                EARTH_RADIUS_M * lat))

    def to_latlon(self, xy: np.ndarray) -> np.ndarray:
        lat = self.lat0 + np.degrees(xy[:, 1] / EARTH_RADIUS_M)
        lon = self.lon0 + np.degrees(xy[:, 0] / (EARTH_RADIUS_M * self._cos0))
        return np.column_stack((lat, lon))


def project_local(points: Sequence[GeoPoint] | np.ndarray) -> tuple[np.ndarray, LocalProjection]:
    """Project lat/lon points to planar meters about their centroid."""
    latlon = _as_latlon_array(points)
    lat_span = latlon[:, 0].max() - latlon[:, 0].min()
    lon_span = latlon[:, 1].max() - latlon[:, 1].min()
    if lat_span > 1.0 or lon_span > 1.0:
        raise SpanTooLarge(f"span {max(lat_span, lon_span):.3f} deg exceeds 1 deg")
    projection = LocalProjection(float(latlon[:, 0].mean()), float(latlon[:, 1].mean()))
    return projection.to_xy(latlon), projection


def _as_latlon_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=float)
    return np.array([[p.lat, p.lon] for p in points], dtype=float)


# -- planar primitives ---------------------------------------------------------

def shoelace_area(xy: np.ndarray) -> float:
    """Absolute polygon area of an (implicitly closed) ring, in ring units."""
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def dedup_grid(xy: np.ndarray, resolution_m: float = DEDUP_RESOLUTION_M) -> np.ndarray:
    """Keep the first point per resolution cell (the '1 m dedup')."""
    cells = np.floor(xy / resolution_m).astype(np.int64)
    _, first = np.unique(cells, axis=0, return_index=True)
    return xy[np.sort(first)]


def convex_hull(xy: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertex indices, CCW, open ring."""
    order = np.lexsort((xy[:, 1], xy[:, 0]))

    def half(indices):
        chain: list[int] = []
        for i in indices:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                cross = ((xy[a, 0] - xy[o, 0]) * (xy[i, 1] - xy[o, 1])
                         - (xy[a, 1] - xy[o, 1]) * (xy[i, 0] - xy[o, 0]))
                if cross <= 0:
                    chain.pop()
                else:
                    break
            chain.append(int(i))
        return chain

    lower = half(order)
    upper = half(order[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=int)


def points_in_ring(points: np.ndarray, ring: np.ndarray,
                   tol_m: float = 0.0) -> np.ndarray:
    """Ray-cast containment mask; points within tol_m of an edge count as in."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(ring)
    x1, y1 = ring[:, 0], ring[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for i in range(n):
        cond = (y1[i] > y) != (y2[i] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = (x2[i] - x1[i]) * (y - y1[i]) / (y2[i] - y1[i]) + x1[i]
        inside ^= cond & (x < xi)
    if tol_m > 0.0:
        out = ~inside
        if out.any():
            near = _dist_to_edges(points[out], ring) <= tol_m
            inside[np.flatnonzero(out)[near]] = True
    return inside


def _dist_to_edges(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    a = ring
    b = np.roll(ring, -1, axis=0)
    ab = b - a                                        # (E,2)
    denom = (ab ** 2).sum(axis=1)
    denom[denom == 0] = 1.0
    ap = points[:, None, :] - a[None, :, :]           # (P,E,2)
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return d.min(axis=1)


def _segments_cross(p: np.ndarray, q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """True where segment (p,q) intersects segments (a[i], b[i]), touching
    counted as crossing (a touch would pinch the ring)."""
    def orient(ux, uy, vx, vy, wx, wy):
        return (vx - ux) * (wy - uy) - (vy - uy) * (wx - ux)

    d1 = orient(p[0], p[1], q[0], q[1], a[:, 0], a[:, 1])
    d2 = orient(p[0], p[1], q[0], q[1], b[:, 0], b[:, 1])
    d3 = orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1], p[0], p[1])
    d4 = orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1], q[0], q[1])
    cross = (d1 * d2 < 0) & (d3 * d4 < 0)
    # collinear overlap / endpoint touch
    touch = (d1 * d2 <= 0) & (d3 * d4 <= 0) & ~cross
    if touch.any():
        # touching only matters if the segments genuinely share a point that
        # is interior to at least one of them; bounding-box overlap filters
        # the (common) disjoint-collinear case.
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        plo = np.minimum(p, q)
        phi = np.maximum(p, q)
        overlap = ((plo[0] <= hi[:, 0]) & (lo[:, 0] <= phi[0])
                   & (plo[1] <= hi[:, 1]) & (lo[:, 1] <= phi[1]))
        cross = cross | (touch & overlap)
    return cross


def knn_concave_hull(xy: np.ndarray, k: int) -> Optional[np.ndarray]:
    """One k-nearest-neighbour hull walk; returns vertex indices or None.

    None means the walk got stuck or left points outside: the caller should
    retry with a larger k.
    """
    n = len(xy)
    if n < 3:
        return None
    k = max(3, min(k, n - 1))
    start = int(np.lexsort((xy[:, 0], xy[:, 1]))[0])     # min y, then min x
    hull = [start]
    available = np.ones(n, dtype=bool)
    available[start] = False
    current = start
    # `backward` points at the previous hull point; candidates are swept
    # clockwise starting from it, which walks the boundary clockwise.  The
    # virtual previous point sits due west of the start.
    backward = math.pi
    for _ in range(4 * n):
        closing_allowed = len(hull) >= 4
        if closing_allowed:
            available[start] = True
        cand_idx = np.flatnonzero(available)
        if len(cand_idx) == 0:
            return None
        deltas = xy[cand_idx] - xy[current]
        dists = np.hypot(deltas[:, 0], deltas[:, 1])
        take = min(k, len(cand_idx))
        keep = np.argpartition(dists, take - 1)[:take]
        nearest = cand_idx[keep]
        near_dists = dists[keep]

        vecs = xy[nearest] - xy[current]
        angles = np.arctan2(vecs[:, 1], vecs[:, 0])
        sweep = np.mod(backward - angles, 2.0 * math.pi)
        # exactly backward would immediately backtrack; demote it to a last
        # resort, and prefer the nearer of collinear candidates
        sweep[sweep < 1e-9] = 2.0 * math.pi
        order = nearest[np.lexsort((near_dists, sweep))]

        chosen = -1
        for cand in order:
            if not self_intersects(xy, hull, current, int(cand), start):
                chosen = int(cand)
                break
        if closing_allowed:
            available[start] = False
        if chosen < 0:
            return None
        if chosen == start:
            ring = np.array(hull, dtype=int)
            rest = np.ones(n, dtype=bool)
            rest[ring] = False
            if rest.any() and not points_in_ring(
                    xy[rest], xy[ring], tol_m=CONTAINMENT_TOL_M).all():
                return None
            return ring
        hull.append(chosen)
        available[chosen] = False
        backward = math.atan2(xy[current, 1] - xy[chosen, 1],
                              xy[current, 0] - xy[chosen, 0])
        current = chosen
    return None


def self_intersects(xy: np.ndarray, hull: list[int], current: int,
                    candidate: int, start: int) -> bool:
    """Would edge (current -> candidate) cross the hull built so far?"""
    if len(hull) < 2:
        return False
    edges_a = xy[hull[:-1]]
    edges_b = xy[hull[1:]]
    # skip the edge ending at `current` (index len(hull) - 2); when closing,
    # also skip the first edge, which legitimately shares the start vertex
    skip_from = len(hull) - 2
    lo = 1 if candidate == start else 0
    a = edges_a[lo:skip_from]
    b = edges_b[lo:skip_from]
    if len(a) == 0:
        return False
    return bool(_segments_cross(xy[current], xy[candidate], a, b).any())


# -- boundary detection -----------------------------------------------------------


class BoundaryMethod:
    CONCAVE = "CONCAVE"
    CONVEX_FALLBACK = "CONVEX_FALLBACK"


@dataclass(frozen=True)
class BoundaryPolygon:
    ring: tuple[GeoPoint, ...]          # open ring, implicitly closed
    area_m2: float
    method: str

    @property
    def area_ha(self) -> float:
        return self.area_m2 / 10_000.0


@dataclass(frozen=True)
class Undetectable:
    reason: str


def detect_boundary(traces: Trace | Iterable[Trace] | Sequence[GeoPoint],
                    min_points: int = MIN_BOUNDARY_POINTS,
                    k_start: int = KNN_START, k_limit: int = KNN_LIMIT,
                    area_range_ha: tuple[float, float] = AREA_RANGE_HA
                    ) -> BoundaryPolygon | Undetectable:
    """Detect a farm boundary from one or more day traces.

    Multi-day revisits of the same farm are merged before detection.  The
    result is Undetectable when there are too few distinct points or the
    detected area falls outside the plausible farm size range.
    """
    points = _collect_points(traces)
    if len(points) == 0:
        return Undetectable("TOO_FEW_POINTS")
    xy_all, projection = project_local(points)
    xy = dedup_grid(xy_all)
    if len(xy) < min_points:
        return Undetectable("TOO_FEW_POINTS")

    ring_idx = None
    method = BoundaryMethod.CONCAVE
    for k in range(k_start, k_limit + 1):
        ring_idx = knn_concave_hull(xy, k)
        if ring_idx is not None:
            break
    if ring_idx is None:
        method = BoundaryMethod.CONVEX_FALLBACK
        ring_idx = convex_hull(xy)
    if len(ring_idx) < 3:
        return Undetectable("DEGENERATE")

    ring_xy = xy[ring_idx]
    area = shoelace_area(ring_xy)
    area_ha = area / 10_000.0
    if not (area_range_ha[0] <= area_ha <= area_range_ha[1]):
        return Undetectable("AREA_OUT_OF_RANGE")
    ring_latlon = projection.to_latlon(ring_xy)
    ring = tuple(GeoPoint(float(lat), float(lon)) for lat, lon in ring_latlon)
    return BoundaryPolygon(ring=ring, area_m2=area, method=method)


def _collect_points(traces) -> list[GeoPoint]:
    if isinstance(traces, Trace):
        return list(traces.points)
    items = list(traces)
    if items and isinstance(items[0], Trace):
        points: list[GeoPoint] = []
        for trace in items:
            points.extend(trace.points)
        return points
    return items


def estimate_acreage(polygon: BoundaryPolygon | Sequence[GeoPoint]) -> float:
    """Hectares from the shoelace area of the projected ring."""
    ring = polygon.ring if isinstance(polygon, BoundaryPolygon) else tuple(polygon)
    xy, _ = project_local(ring)
    area = shoelace_area(xy)
    if area <= 0.0:
        raise DegeneratePolygon("polygon has zero area")
    return area / 10_000.0


def boundary_geojson(farm_id: str, polygon: BoundaryPolygon) -> dict:
    ring = [[p.lon, p.lat] for p in polygon.ring]
    ring.append(ring[0])
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [ring]},
        "properties": {
            "farm_id": farm_id,
            "area_ha": round(polygon.area_ha, 4),
            "method": polygon.method,
        },
    }


def boundary_from_geojson(feature: dict) -> BoundaryPolygon:
    coordinates = feature["geometry"]["coordinates"][0]
    ring = tuple(GeoPoint(lat, lon) for lon, lat in coordinates[:-1])
    return BoundaryPolygon(
        ring=ring,
        area_m2=feature["properties"]["area_ha"] * 10_000.0,
        method=feature["properties"].get("method", BoundaryMethod.CONCAVE),
    )


# -- clustering ------------------------------------------------------------------


@dataclass(frozen=True)
class Booking:
    booking_id: str
    farm_id: str
    location: tuple[float, float]          # (lat, lon)
    hectares: float
    service_type: str
    skill: str
    window: tuple[float, float]            # epoch seconds (start, end)

    def __post_init__(self):
        if self.hectares <= 0:
            raise ValueError("hectares must be positive")


@dataclass(frozen=True)
class TractorProfile:
    tractor_id: str
    base: tuple[float, float]
    capacity_ha_day: float
    skills: frozenset[str]
    operator_id: str
    experience: float                      # [0, 1]

    def __post_init__(self):
        if self.capacity_ha_day <= 0:
            raise ValueError("capacity must be positive")
        if not 0.0 <= self.experience <= 1.0:
            raise ValueError("experience must be in [0, 1]")


@dataclass(frozen=True)
class ClusterParams:
    max_radius_km: float = DEFAULT_MAX_RADIUS_KM
    max_cluster_ha: Optional[float] = None


@dataclass
class Cluster:
    cluster_id: str
    booking_ids: tuple[str, ...]
    centroid: tuple[float, float]
    total_ha: float
    skill: str


@dataclass
class ClusterPlan:
    clusters: list[Cluster]
    params: ClusterParams

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {
                    "cluster_id": c.cluster_id,
                    "booking_ids": list(c.booking_ids),
                    "centroid": list(c.centroid),
                    "total_ha": round(c.total_ha, 4),
                    "skill": c.skill,
                }
                for c in self.clusters
            ],
            "params": {
                "max_radius_km": self.params.max_radius_km,
                "max_cluster_ha": self.params.max_cluster_ha,
            },
        }


def cluster_bookings(bookings: Sequence[Booking],
                     params: ClusterParams | None = None) -> ClusterPlan:
    """Greedy agglomerative clustering, skill-partitioned.

    Within a skill, the nearest pair of clusters (haversine between
    centroids) merges while the distance stays within max_radius_km and the
    combined hectares stay within max_cluster_ha.  Ties break on the lowest
    member booking id, so the plan is deterministic for a given input.
    """
    if not bookings:
        raise ValueError("bookings must be non-empty")
    params = params or ClusterParams()

    groups: dict[str, list[list[Booking]]] = {}
    for booking in sorted(bookings, key=lambda b: b.booking_id):
        groups.setdefault(booking.skill, []).append([booking])

    def centroid(members: list[Booking]) -> tuple[float, float]:
        return (sum(b.location[0] for b in members) / len(members),
                sum(b.location[1] for b in members) / len(members))

    clusters: list[Cluster] = []
    for skill in sorted(groups):
        parts = groups[skill]
        while len(parts) > 1:
            best = None
            for i in range(len(parts)):
                for j in range(i + 1, len(parts)):
                    ci, cj = centroid(parts[i]), centroid(parts[j])
                    dist_km = haversine_m(*ci, *cj) / 1000.0
                    if dist_km > params.max_radius_km:
                        continue
                    combined = sum(b.hectares for b in parts[i] + parts[j])
                    if params.max_cluster_ha is not None and combined > params.max_cluster_ha:
                        continue
                    key_i = min(b.booking_id for b in parts[i])
                    key_j = min(b.booking_id for b in parts[j])
                    key = (dist_km, min(key_i, key_j), max(key_i, key_j))
                    if best is None or key < best[0]:
                        best = (key, i, j)
            if best is None:
                break
            _, i, j = best
            merged = parts[i] + parts[j]
            parts = [p for idx, p in enumerate(parts) if idx not in (i, j)]
            parts.append(merged)
        for members in sorted(parts, key=lambda ms: min(b.booking_id for b in ms)):
            members = sorted(members, key=lambda b: b.booking_id)
            clusters.append(Cluster(
                cluster_id="",
                booking_ids=tuple(b.booking_id for b in members),
                centroid=centroid(members),
                total_ha=sum(b.hectares for b in members),
                skill=skill,
            ))
    for index, cluster in enumerate(clusters, start=1):
        cluster.cluster_id = f"c{index:03d}"
    return ClusterPlan(clusters, params)


# -- assignment ---------------------------------------------------------------------


@dataclass
class Assignment:
    cluster_id: str
    tractor_id: str
    operator_id: str
    cost: float


@dataclass
class AssignmentPlan:
    assignments: list[Assignment]
    unmatched_cluster_ids: list[str]
    total_cost: float

    def to_dict(self) -> dict:
        return {
            "assignments": [
                {
                    "cluster_id": a.cluster_id, "tractor_id": a.tractor_id,
                    "operator_id": a.operator_id, "cost": round(a.cost, 6),
                }
                for a in self.assignments
            ],
            "unmatched_cluster_ids": list(self.unmatched_cluster_ids),
            "total_cost": round(self.total_cost, 6),
        }


def pair_cost(cluster: Cluster, tractor: TractorProfile) -> float:
    """Kilometers to the cluster, a hard penalty for a missing skill and a
    soft preference for experienced operators."""
    distance_km = haversine_m(*cluster.centroid, *tractor.base) / 1000.0
    missing = 0.0 if cluster.skill in tractor.skills else SKILL_MISS_PENALTY
    return distance_km + missing + EXPERIENCE_WEIGHT * (1.0 - tractor.experience)


def hungarian(cost: Sequence[Sequence[float]]) -> tuple[list[int], float]:
    """Minimum-cost assignment for an n x m matrix with n <= m.

    Potentials-based O(n^2 m) method; returns (column per row, total cost).
    """
    n = len(cost)
    m = len(cost[0]) if n else 0
    if n > m:
        raise ValueError("hungarian requires n <= m")
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)          # p[j] = row matched to column j (1-based)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    result = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            result[p[j] - 1] = j - 1
    total = sum(cost[i][result[i]] for i in range(n))
    return result, total


def assign_tractors(clusters: Sequence[Cluster], tractors: Sequence[TractorProfile],
                    optimal_limit: int = OPTIMAL_ASSIGNMENT_LIMIT) -> AssignmentPlan:
    """Pair clusters with tractor-operator teams at minimum total cost.

    Exact (Hungarian) when min(#clusters, #tractors) <= optimal_limit,
    greedy beyond.  Clusters left without a tractor are reported, never
    silently dropped.
    """
    if not clusters:
        return AssignmentPlan([], [], 0.0)
    available_skills = set()
    for tractor in tractors:
        available_skills |= tractor.skills
    for cluster in clusters:
        if cluster.skill not in available_skills:
            raise InfeasibleSkill(f"no tractor offers skill {cluster.skill!r}")

    n, m = len(clusters), len(tractors)
    cost = [[pair_cost(c, t) for t in tractors] for c in clusters]

    pairs: list[tuple[int, int]] = []
    if min(n, m) <= optimal_limit:
        if n <= m:
            cols, _ = hungarian(cost)
            pairs = [(i, j) for i, j in enumerate(cols) if j >= 0]
        else:
            transposed = [[cost[i][j] for i in range(n)] for j in range(m)]
            rows, _ = hungarian(transposed)
            pairs = [(i, j) for j, i in enumerate(rows) if i >= 0]
    else:
        flat = sorted(((cost[i][j], clusters[i].cluster_id, tractors[j].tractor_id, i, j)
                       for i in range(n) for j in range(m)))
        used_c: set[int] = set()
        used_t: set[int] = set()
        for _, _, _, i, j in flat:
            if i in used_c or j in used_t:
                continue
            pairs.append((i, j))
            used_c.add(i)
            used_t.add(j)

    assignments = [
        Assignment(clusters[i].cluster_id, tractors[j].tractor_id,
                   tractors[j].operator_id, cost[i][j])
        for i, j in sorted(pairs)
    ]
    matched = {i for i, _ in pairs}
    unmatched = [c.cluster_id for i, c in enumerate(clusters) if i not in matched]
    return AssignmentPlan(assignments, unmatched, sum(a.cost for a in assignments))


# -- scheduling -----------------------------------------------------------------------


def recommend_schedule(series: Mapping[date, float], start: date,
                       band: tuple[float, float] = DEFAULT_MOISTURE_BAND,
                       horizon_days: int = DEFAULT_HORIZON_DAYS) -> Optional[date]:
    """Earliest day in the horizon whose soil moisture sits in the band.

    Returns None when no day qualifies; a gap anywhere inside the horizon
    raises InsufficientWeatherData (the rule never interpolates).
    """
    lo, hi = band
    days = [start + timedelta(days=i) for i in range(horizon_days)]
    missing = [d for d in days if d not in series]
    if missing:
        raise InsufficientWeatherData(f"no sample for {missing[0].isoformat()}")
    for day in days:
        if lo <= series[day] <= hi:
            return day
    return None


# -- utilization ---------------------------------------------------------------------


@dataclass(frozen=True)
class ServiceRecord:
    farm_id: str
    day: date
    hectares: float


@dataclass(frozen=True)
class UtilizationReport:
    tractor_id: str
    period_start: date
    period_end: date
    hectares_served: float
    farms_served: int
    active_days: int
    idle_days: int
    farms_per_day: float
    revenue: float

    def to_dict(self) -> dict:
        return {
            "tractor_id": self.tractor_id,
            "period_start": self.period_start.isoformat(),
            "period_end": self.period_end.isoformat(),
            "hectares_served": round(self.hectares_served, 4),
            "farms_served": self.farms_served,
            "active_days": self.active_days,
            "idle_days": self.idle_days,
            "farms_per_day": round(self.farms_per_day, 4),
            "revenue": round(self.revenue, 2),
        }


def utilization_report(tractor_id: str, period_start: date, period_end: date,
                       services: Iterable[ServiceRecord],
                       rate_per_ha: float) -> UtilizationReport:
    """Aggregate a tractor's served hectares, farms/day and revenue."""
    in_period = [s for s in services if period_start <= s.day <= period_end]
    hectares = sum(s.hectares for s in in_period)
    farms = {s.farm_id for s in in_period}
    days_active = {s.day for s in in_period}
    period_days = (period_end - period_start).days + 1
    farms_per_day = len(farms) / len(days_active) if days_active else 0.0
    return UtilizationReport(
        tractor_id=tractor_id,
        period_start=period_start,
        period_end=period_end,
        hectares_served=hectares,
        farms_served=len(farms),
        active_days=len(days_active),
        idle_days=period_days - len(days_active),
        farms_per_day=farms_per_day,
        revenue=rate_per_ha * hectares,
    )
