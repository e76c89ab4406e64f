"""Synthetic field-activity corpus.

Stands in for the instrumented-tractor feed: rectangular farms scattered
over a region, serpentine day traces that cover them, matching bookings
and the JSONL event stream a system of engagement would push.  Everything
derives from one seed, so corpora are reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional

from .geo import Booking, GeoPoint, LocalProjection, TractorProfile, Trace

DEFAULT_REGION_CENTER = (9.05, 8.10)
DEFAULT_REGION_SPAN_DEG = 0.5
SERVICE_SKILLS = ("plough", "harrow", "ridge")
DAY_START_HOUR = 7
POINT_INTERVAL_S = 2.0


@dataclass(frozen=True)
class FarmSpec:
    farm_id: str
    center: tuple[float, float]
    width_m: float
    height_m: float
    skill: str

    @property
    def area_ha(self) -> float:
        return self.width_m * self.height_m / 10_000.0


def generate_farms(n: int, seed: int,
                   region_center: tuple[float, float] = DEFAULT_REGION_CENTER,
                   region_span_deg: float = DEFAULT_REGION_SPAN_DEG) -> list[FarmSpec]:
    """Farms on a jittered grid; spacing keeps neighbours kilometres apart
    so vicinity matching is unambiguous."""
    rng = random.Random(seed)
    side = math.ceil(math.sqrt(n))
    spacing = region_span_deg / side
    farms = []
    cells = [(r, c) for r in range(side) for c in range(side)]
    rng.shuffle(cells)
    lat0 = region_center[0] - region_span_deg / 2
    lon0 = region_center[1] - region_span_deg / 2
    for index, (row, col) in enumerate(cells[:n]):
        lat = lat0 + (row + 0.5) * spacing + rng.uniform(-0.15, 0.15) * spacing
        lon = lon0 + (col + 0.5) * spacing + rng.uniform(-0.15, 0.15) * spacing
        # mostly ~2 ha farms, some smaller and larger
        width = rng.uniform(80.0, 160.0)
        height = rng.uniform(90.0, 210.0)
        farms.append(FarmSpec(
            farm_id=f"F{index + 1:05d}",
            center=(round(lat, 7), round(lon, 7)),
            width_m=round(width, 1),
            height_m=round(height, 1),
            skill=rng.choice(SERVICE_SKILLS),
        ))
    return farms


def serpentine_xy(width_m: float, height_m: float, pitch_m: float = 4.0,
                  step_m: float = 3.0) -> list[tuple[float, float]]:
    """Row-by-row coverage of a rectangle centred on the origin.

    Rows and columns always include both field edges so the trace reaches
    the true boundary.
    """
    def axis(extent, spacing):
        ticks = [i * spacing for i in range(int(extent // spacing) + 1)]
        if ticks[-1] < extent:
            ticks.append(extent)
        return [t - extent / 2 for t in ticks]

    ys = axis(height_m, pitch_m)
    xs_fwd = axis(width_m, step_m)
    points = []
    for r, y in enumerate(ys):
        row = xs_fwd if r % 2 == 0 else list(reversed(xs_fwd))
        points.extend((x, y) for x in row)
    return points


def farm_trace_points(farm: FarmSpec, pitch_m: float = 4.0,
                      step_m: float = 3.0, jitter_m: float = 0.0,
                      rng: random.Random | None = None) -> list[GeoPoint]:
    projection = LocalProjection(farm.center[0], farm.center[1])
    xy = serpentine_xy(farm.width_m, farm.height_m, pitch_m, step_m)
    if jitter_m and rng is not None:
        xy = [(x + rng.uniform(-jitter_m, jitter_m),
               y + rng.uniform(-jitter_m, jitter_m)) for x, y in xy]
    import numpy as np
    latlon = projection.to_latlon(np.array(xy, dtype=float))
    return [GeoPoint(float(lat), float(lon)) for lat, lon in latlon]


@dataclass
class Corpus:
    farms: list[FarmSpec]
    events: list[dict]
    bookings: list[Booking]
    tractors: list[TractorProfile]
    traces: dict[str, list[Trace]]        # farm_id -> day traces
    service_days: dict[str, list[tuple[str, str]]]  # tractor -> (day, farm_id)


def generate_corpus(n_farms: int, n_events: int, seed: int,
                    start_day: str = "2020-05-04",
                    farms_per_tractor_day: int = 7,
                    region_center: tuple[float, float] = DEFAULT_REGION_CENTER,
                    region_span_deg: float = DEFAULT_REGION_SPAN_DEG) -> Corpus:
    """Farms, tractors, bookings and ~n_events GPS events.

    Tractors service a fixed number of farms per day; each serviced farm
    yields one serpentine day trace whose points become events.  Event
    generation stops once the target count is reached, so the last farm may
    be partially covered.
    """
    rng = random.Random(seed * 2654435761 % (2 ** 31))
    farms = generate_farms(n_farms, seed, region_center, region_span_deg)
    n_tractors = max(1, round(n_farms / (farms_per_tractor_day * 4)))
    tractors = []
    for i in range(n_tractors):
        base_farm = farms[rng.randrange(len(farms))]
        # the first machine is fully equipped so every skill stays feasible
        skills = (frozenset(SERVICE_SKILLS) if i == 0
                  else frozenset(rng.sample(SERVICE_SKILLS, rng.randint(1, 3))))
        tractors.append(TractorProfile(
            tractor_id=f"T{i + 1:03d}",
            base=base_farm.center,
            capacity_ha_day=rng.uniform(8.0, 16.0),
            skills=skills,
            operator_id=f"op{i + 1:03d}",
            experience=round(rng.uniform(0.3, 1.0), 2),
        ))

    day0 = datetime.fromisoformat(start_day).replace(tzinfo=timezone.utc)
    events: list[dict] = []
    bookings: list[Booking] = []
    traces: dict[str, list[Trace]] = {}
    service_days: dict[str, list[tuple[str, str]]] = {t.tractor_id: [] for t in tractors}
    seq: dict[str, int] = {t.tractor_id: 0 for t in tractors}

    farm_cycle = list(farms)
    rng.shuffle(farm_cycle)
    day_index = 0
    farm_pos = 0
    done = False
    while not done:
        day = day0 + timedelta(days=day_index)
        day_str = day.date().isoformat()
        for tractor in tractors:
            if done:
                break
            start_ts = day.replace(hour=DAY_START_HOUR).timestamp()
            cursor_ts = start_ts
            for _ in range(farms_per_tractor_day):
                if farm_pos >= len(farm_cycle):
                    farm_pos = 0
                    rng.shuffle(farm_cycle)
                farm = farm_cycle[farm_pos]
                farm_pos += 1
                points = farm_trace_points(farm, jitter_m=0.4, rng=rng)
                window_start = cursor_ts - 1800.0
                trace_points = []
                for point in points:
                    seq[tractor.tractor_id] += 1
                    ts = cursor_ts
                    cursor_ts += POINT_INTERVAL_S
                    event = {
                        "tractor_id": tractor.tractor_id,
                        "ts": datetime.fromtimestamp(ts, tz=timezone.utc)
                                      .strftime("%Y-%m-%dT%H:%M:%SZ"),
                        "lat": round(point.lat, 7),
                        "lon": round(point.lon, 7),
                        "seq": seq[tractor.tractor_id],
                    }
                    if rng.random() < 0.2:
                        event["speed"] = round(rng.uniform(1.0, 3.0), 2)
                    if rng.random() < 0.1:
                        event["fuel"] = round(rng.uniform(5.0, 40.0), 1)
                    if rng.random() < 0.05:
                        event["operator"] = tractor.operator_id
                    events.append(event)
                    trace_points.append(GeoPoint(event["lat"], event["lon"]))
                    if len(events) >= n_events:
                        done = True
                        break
                if trace_points:
                    traces.setdefault(farm.farm_id, []).append(Trace(
                        tractor_id=tractor.tractor_id, day_stamp=day_str,
                        points=tuple(trace_points)))
                    service_days[tractor.tractor_id].append((day_str, farm.farm_id))
                    bookings.append(Booking(
                        booking_id=f"B{len(bookings) + 1:06d}",
                        farm_id=farm.farm_id,
                        location=farm.center,
                        hectares=round(farm.area_ha, 3),
                        service_type="ploughing",
                        skill=farm.skill,
                        window=(window_start, cursor_ts + 1800.0),
                    ))
                cursor_ts += 600.0   # transfer time between farms
                if done:
                    break
        day_index += 1
    return Corpus(farms, events, bookings, tractors, traces, service_days)


def write_events_jsonl(events: Iterable[dict], path: str | Path) -> int:
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event, sort_keys=True))
            fh.write("\n")
            count += 1
    return count
