"""Farm information pipeline.

Validates incoming tractor/farm events against registered event
definitions, de-identifies them, persists them to an append-only log,
anchors each batch's digest on the ledger and fans events out through an
in-process pub/sub broker with replayable offsets.  Weather and
remote-sensing context comes from deterministic synthetic sources that
mirror the interface a live client would have.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional

from .codec import canonical_join, canonical_json, sha256_hex
from .errors import (Unauthorized, UnknownEventType, UnknownFarm,
                     UnparseableMessage)
from .geo import haversine_m
from .identity import AuthToken, FieldClass, IdentityService
from .ledger import Ledger, TransactionProposal, TxStatus

GPS_TOPIC = "events.gps"
DEFAULT_VICINITY_RADIUS_M = 500.0

EDI_SEGMENT_SEP = "~"
EDI_FIELD_SEP = "*"


def parse_ts(value) -> float:
    """ISO-8601 UTC timestamp (or epoch seconds) to epoch seconds."""
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        raw = value.replace("Z", "+00:00")
        dt = datetime.fromisoformat(raw)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    raise ValueError(f"bad timestamp {value!r}")


def day_stamp(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date().isoformat()


# -- event definitions ---------------------------------------------------------

def _check_lat(v):
    v = float(v)
    if not -90.0 <= v <= 90.0:
        raise ValueError("lat out of range")
    return v


def _check_lon(v):
    v = float(v)
    if not -180.0 <= v <= 180.0:
        raise ValueError("lon out of range")
    return v


SEMANTIC_CHECKS: dict[str, Callable] = {
    "lat": _check_lat,
    "lon": _check_lon,
    "ts": parse_ts,
    "str": str,
    "float": float,
    "int": int,
}


@dataclass(frozen=True)
class EventDefinition:
    event_type: str
    required: tuple[tuple[str, str], ...]   # (field, semantic type)
    optional: tuple[tuple[str, str], ...] = ()
    topic: str = GPS_TOPIC
    gps: bool = False

    def __post_init__(self):
        names = [f for f, _ in self.required] + [f for f, _ in self.optional]
        if len(names) != len(set(names)):
            raise ValueError("duplicate field names")
        if self.gps:
            required_names = {f for f, _ in self.required}
            if not {"lat", "lon", "ts"} <= required_names:
                raise ValueError("GPS event types must require lat, lon and ts")


DEFAULT_DEFINITIONS = (
    EventDefinition(
        event_type="tractor.gps",
        required=(("tractor_id", "str"), ("ts", "ts"), ("lat", "lat"),
                  ("lon", "lon"), ("seq", "int")),
        optional=(("speed", "float"), ("fuel", "float"), ("operator", "str")),
        topic=GPS_TOPIC,
        gps=True,
    ),
    EventDefinition(
        event_type="booking.status",
        required=(("booking_id", "str"), ("status", "str"), ("ts", "ts")),
        topic="bookings",
    ),
    EventDefinition(
        event_type="payment.approved",
        required=(("booking_id", "str"), ("amount", "float"), ("ts", "ts")),
        topic="payments",
    ),
)


@dataclass
class IngestReceipt:
    batch_id: str
    accepted: int
    rejected: list[tuple[int, str]]
    anchor_tx_id: Optional[str]


@dataclass(frozen=True)
class CorrelationMatch:
    farm_id: str
    booking_id: str
    distance_m: float


@dataclass
class Subscription:
    subscriber: str
    topic: str
    event_type: Optional[str] = None
    farm_id: Optional[str] = None
    tractor_id: Optional[str] = None
    cursor: int = 0

    def matches(self, event: dict) -> bool:
        if self.event_type and event.get("event_type") != self.event_type:
            return False
        if self.farm_id and event.get("farm_id") != self.farm_id:
            return False
        if self.tractor_id and event.get("tractor_id") != self.tractor_id:
            return False
        return True


@dataclass(frozen=True)
class WeatherSample:
    cell_id: str
    date: date
    soil_moisture_index: float


@dataclass(frozen=True)
class RemoteSenseTile:
    cell_id: str
    date: date
    tile_ref: str


@dataclass
class ContextBundle:
    farm_id: str
    samples: list[WeatherSample]
    tiles: list[RemoteSenseTile]
    missing_days: list[date]


class EventLog:
    """Append-only per-topic log with monotone offsets.

    Entries are canonical JSON bytes; with a directory configured each topic
    also lands in a JSONL segment file so a restart can replay from disk.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root else None
        self._topics: dict[str, list[bytes]] = {}
        self._lock = threading.Lock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            for segment in sorted(self.root.glob("*.jsonl")):
                topic = segment.stem.replace("__", "/")
                entries = [line.encode("utf-8")
                           for line in segment.read_text().splitlines() if line]
                self._topics[topic] = entries

    def append(self, topic: str, payload: bytes) -> int:
        with self._lock:
            entries = self._topics.setdefault(topic, [])
            entries.append(payload)
            offset = len(entries) - 1
            if self.root is not None:
                segment = self.root / f"{topic.replace('/', '__')}.jsonl"
                with segment.open("ab") as fh:
                    fh.write(payload + b"\n")
            return offset

    def read(self, topic: str, offset: int, max_n: int | None = None) -> list[bytes]:
        with self._lock:
            entries = self._topics.get(topic, [])
            end = len(entries) if max_n is None else min(len(entries), offset + max_n)
            return entries[offset:end]

    def length(self, topic: str) -> int:
        with self._lock:
            return len(self._topics.get(topic, []))

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)


class Broker:
    """Minimal at-least-once pub/sub over the event log."""

    def __init__(self, log: EventLog,
                 authorize: Callable[[AuthToken, str], bool] | None = None):
        self.log = log
        self.authorize = authorize

    def publish(self, topic: str, event: dict) -> int:
        return self.log.append(topic, canonical_json(event))

    def subscribe(self, token: AuthToken, topic: str, *, event_type: str | None = None,
                  farm_id: str | None = None, tractor_id: str | None = None,
                  from_offset: int = 0) -> Subscription:
        if self.authorize is not None and not self.authorize(token, topic):
            raise Unauthorized(f"subscription to {topic!r} denied")
        return Subscription(subscriber=token.user_id, topic=topic,
                            event_type=event_type, farm_id=farm_id,
                            tractor_id=tractor_id, cursor=from_offset)

    def poll(self, subscription: Subscription, max_n: int = 100) -> list[dict]:
        """Deliver up to max_n matching events in topic order, advancing the
        private cursor past everything scanned."""
        delivered: list[dict] = []
        scanned = 0
        while len(delivered) < max_n:
            chunk = self.log.read(subscription.topic, subscription.cursor + scanned,
                                  max_n)
            if not chunk:
                break
            for raw in chunk:
                scanned += 1
                event = json.loads(raw)
                if subscription.matches(event):
                    delivered.append(event)
                    if len(delivered) >= max_n:
                        break
        subscription.cursor += scanned
        return delivered

    def replay(self, topic: str) -> list[bytes]:
        return self.log.read(topic, 0)


class SyntheticContextSource:
    """Deterministic stand-in for weather and remote-sensing services.

    Values are a keyed hash of (seed, cell, date) so any fixed seed yields
    the same series; coverage is bounded so out-of-window queries surface
    explicit gaps instead of interpolation.
    """

    def __init__(self, seed: int = 1, coverage_start: date = date(2020, 1, 1),
                 coverage_end: date = date(2021, 12, 31), cell_deg: float = 0.1):
        self.seed = seed
        self.coverage_start = coverage_start
        self.coverage_end = coverage_end
        self.cell_deg = cell_deg

    def cell_id(self, lat: float, lon: float) -> str:
        i = math.floor(lat / self.cell_deg)
        j = math.floor(lon / self.cell_deg)
        return f"cell_{i}_{j}"

    def covered(self, day: date) -> bool:
        return self.coverage_start <= day <= self.coverage_end

    def soil_moisture(self, cell_id: str, day: date) -> Optional[float]:
        if not self.covered(day):
            return None
        digest = sha256_hex(canonical_join([self.seed, cell_id, day.isoformat()]))
        return int(digest[:8], 16) / 0xFFFFFFFF

    def tile_ref(self, cell_id: str, day: date) -> Optional[str]:
        if not self.covered(day):
            return None
        digest = sha256_hex(canonical_join([self.seed, "tile", cell_id, day.isoformat()]))
        return f"pairs://tiles/{cell_id}/{day.isoformat()}/{digest[:16]}"


class FipService:
    """Ingest, de-identify, anchor, correlate and distribute farm events."""

    def __init__(self, identity: IdentityService, ledger: Ledger | None = None,
                 channel_id: str = "agrinet", log_dir: str | Path | None = None,
                 vicinity_radius_m: float = DEFAULT_VICINITY_RADIUS_M,
                 context_source: SyntheticContextSource | None = None,
                 authorize_topic: Callable[[AuthToken, str], bool] | None = None,
                 authorized_source_orgs: Iterable[str] | None = None,
                 clock: Callable[[], float] = time.time):
        self.identity = identity
        self.ledger = ledger
        self.channel_id = channel_id
        self.vicinity_radius_m = vicinity_radius_m
        self.context = context_source or SyntheticContextSource()
        self.clock = clock
        self.log = EventLog(log_dir)
        self.broker = Broker(self.log, authorize=authorize_topic)
        self.authorized_source_orgs = (set(authorized_source_orgs)
                                       if authorized_source_orgs is not None else None)
        self._definitions: dict[str, EventDefinition] = {}
        self._dedup: set[tuple[str, float, int]] = set()
        self._tractor_last_ts: dict[str, float] = {}
        self._batches: dict[str, dict] = {}
        self._farm_locator: Callable[[str], Optional[tuple[float, float]]] | None = None
        self._lock = threading.Lock()
        self._batch_seq = 0
        for definition in DEFAULT_DEFINITIONS:
            self.register_event_definition(definition)
        identity.register_schema("tractor.gps", {
            "event_type": FieldClass.RETAIN, "day_stamp": FieldClass.RETAIN,
            "tractor_id": FieldClass.RETAIN, "ts": FieldClass.RETAIN,
            "lat": FieldClass.RETAIN, "lon": FieldClass.RETAIN,
            "seq": FieldClass.RETAIN, "speed": FieldClass.RETAIN,
            "fuel": FieldClass.RETAIN, "operator": FieldClass.USER_REF,
            "operator_name": FieldClass.PII, "operator_phone": FieldClass.PII,
        })

    # -- configuration -------------------------------------------------------

    def register_event_definition(self, definition: EventDefinition) -> None:
        self._definitions[definition.event_type] = definition

    def set_farm_locator(self, locator: Callable[[str], Optional[tuple[float, float]]]) -> None:
        self._farm_locator = locator

    def _source_authorized(self, token: AuthToken) -> bool:
        try:
            claims = self.identity.verify_token(token)
        except Exception:
            return False
        if "admin" in claims.roles:
            return True
        if self.authorized_source_orgs is not None:
            return claims.org_id in self.authorized_source_orgs
        from .identity import OrgKind
        return self.identity.org(claims.org_id).org_kind is OrgKind.PLATFORM

    # -- ingest ---------------------------------------------------------------

    def ingest(self, events: Iterable[dict] | bytes | str, source_token: AuthToken,
               event_type: str = "tractor.gps") -> IngestReceipt:
        """Validate, de-identify and persist a batch; anchor its digest.

        Accepts a list of event dicts or JSON Lines bytes/text.  Rejected
        events are reported by input index with a reason; duplicates (same
        tractor_id, ts, seq) are silently dropped and counted as rejected.
        """
        if not self._source_authorized(source_token):
            raise Unauthorized("source is not an authorized system of engagement")
        definition = self._definitions.get(event_type)
        if definition is None:
            raise UnknownEventType(event_type)

        if isinstance(events, (bytes, str)):
            text = events.decode("utf-8") if isinstance(events, bytes) else events
            raw_events: list = []
            for line in text.splitlines():
                line = line.strip()
                if line:
                    try:
                        raw_events.append(json.loads(line))
                    except json.JSONDecodeError:
                        raw_events.append(None)
        else:
            raw_events = list(events)

        candidates: list[tuple[int, dict]] = []
        rejected: list[tuple[int, str]] = []
        for index, raw in enumerate(raw_events):
            if not isinstance(raw, dict):
                rejected.append((index, "UNPARSEABLE"))
                continue
            try:
                event = self._validate(definition, raw)
            except ValueError as exc:
                rejected.append((index, str(exc)))
                continue
            event["event_type"] = event_type
            if definition.gps:
                event["day_stamp"] = day_stamp(event["ts"])
                event, _ = self.identity.strip_pii(event, "tractor.gps")
            candidates.append((index, event))

        # Dedup claims and persistence happen atomically so two identical
        # batches racing each other cannot both land.
        accepted: list[dict] = []
        payloads: list[bytes] = []
        with self._lock:
            self._batch_seq += 1
            batch_id = f"batch-{self._batch_seq:06d}"
            if definition.gps:
                kept: list[dict] = []
                for index, event in candidates:
                    key = (event["tractor_id"], event["ts"], event["seq"])
                    if key in self._dedup:
                        rejected.append((index, "DUPLICATE"))
                        continue
                    last = self._tractor_last_ts.get(event["tractor_id"])
                    if last is not None and event["ts"] < last:
                        rejected.append((index, "STALE_TS"))
                        continue
                    self._dedup.add(key)
                    kept.append(event)
                # per-tractor order within the batch, stable across tractors
                kept.sort(key=lambda e: (e["tractor_id"], e["ts"], e["seq"]))
                for event in kept:
                    self._tractor_last_ts[event["tractor_id"]] = event["ts"]
                accepted = kept
            else:
                accepted = [event for _, event in candidates]
            for event in accepted:
                payload = canonical_json(event)
                payloads.append(payload)
                self.log.append(definition.topic, payload)
            rejected.sort(key=lambda r: r[0])

        anchor_tx = self._anchor_batch(batch_id, payloads, source_token)
        receipt = IngestReceipt(batch_id, len(accepted), rejected, anchor_tx)
        with self._lock:
            self._batches[batch_id] = {
                "digest": self._batch_digest(payloads),
                "payloads": payloads,
                "anchor_tx_id": anchor_tx,
                "topic": definition.topic,
            }
        return receipt

    def _validate(self, definition: EventDefinition, raw: dict) -> dict:
        event: dict = {}
        for field_name, semantic in definition.required:
            if field_name not in raw or raw[field_name] is None:
                raise ValueError(f"MISSING_FIELD:{field_name}")
            try:
                event[field_name] = SEMANTIC_CHECKS[semantic](raw[field_name])
            except (ValueError, TypeError):
                raise ValueError(f"BAD_FIELD:{field_name}") from None
        for field_name, semantic in definition.optional:
            if field_name in raw and raw[field_name] is not None:
                try:
                    event[field_name] = SEMANTIC_CHECKS[semantic](raw[field_name])
                except (ValueError, TypeError):
                    raise ValueError(f"BAD_FIELD:{field_name}") from None
        for field_name in raw:
            if field_name not in event and field_name not in ("event_type",):
                # carry unknown fields through; PII stripping decides their fate
                event[field_name] = raw[field_name]
        return event

    @staticmethod
    def _batch_digest(payloads: list[bytes]) -> str:
        return sha256_hex(canonical_join(payloads))

    def _anchor_batch(self, batch_id: str, payloads: list[bytes],
                      token: AuthToken) -> Optional[str]:
        if self.ledger is None:
            return None
        digest = self._batch_digest(payloads)
        proposal = TransactionProposal(
            channel_id=self.channel_id,
            submitter=token.user_id,
            chaincode_name="fip",
            operation="anchor_batch",
            args=digest.encode("ascii"),
            read_set=(),
            write_set=((f"batch/{batch_id}", digest.encode("ascii")),),
        )
        channel = self.ledger.channel(self.channel_id)
        endorsements = self.ledger.endorse(proposal, sorted(channel.member_orgs))
        tx_id = self.ledger.submit_transaction(self.channel_id, proposal, endorsements)
        self.ledger.drain(self.channel_id)
        if self.ledger.tx_status(self.channel_id, tx_id) is not TxStatus.VALID:
            return None
        return tx_id

    def verify_anchor(self, batch_id: str, reader: str | None = None) -> bool:
        """Recompute a batch digest from stored payloads and compare with the
        on-chain anchor."""
        with self._lock:
            batch = self._batches.get(batch_id)
        if batch is None:
            return False
        recomputed = self._batch_digest(batch["payloads"])
        if recomputed != batch["digest"]:
            return False
        if self.ledger is None or batch["anchor_tx_id"] is None:
            return True
        entry = self.ledger.world_state(self.channel_id).get(f"batch/{batch_id}")
        return entry is not None and entry[0].decode("ascii") == recomputed

    def batches(self) -> list[str]:
        with self._lock:
            return sorted(self._batches)

    def rebuild_dedup_from_log(self) -> int:
        """After a restart, replay the GPS topic to restock the dedup index."""
        count = 0
        with self._lock:
            for raw in self.log.read(GPS_TOPIC, 0):
                event = json.loads(raw)
                key = (event["tractor_id"], event["ts"], event["seq"])
                self._dedup.add(key)
                last = self._tractor_last_ts.get(event["tractor_id"], -1.0)
                if event["ts"] > last:
                    self._tractor_last_ts[event["tractor_id"]] = event["ts"]
                count += 1
        return count

    def replay(self, topic: str = GPS_TOPIC) -> list[bytes]:
        """Full stored byte stream for a topic, offset 0 onwards."""
        return self.log.read(topic, 0)

    # -- correlation -----------------------------------------------------------

    def correlate(self, event: dict, bookings: Iterable) -> Optional[CorrelationMatch]:
        """Match an event to the nearest farm whose booking window covers it.

        A booking qualifies when the haversine distance from the event to the
        farm location is within the vicinity radius and the event timestamp
        falls inside the scheduled window.  Ties break to the strictly nearer
        farm, then the earlier window start, then the lower farm id.
        """
        ts = event["ts"] if isinstance(event["ts"], (int, float)) else parse_ts(event["ts"])
        lat, lon = float(event["lat"]), float(event["lon"])
        best: Optional[tuple[float, str, float, str]] = None
        for booking in bookings:
            window_start, window_end = booking.window
            if not (window_start <= ts <= window_end):
                continue
            farm_lat, farm_lon = booking.location
            distance = haversine_m(lat, lon, farm_lat, farm_lon)
            if distance > self.vicinity_radius_m:
                continue
            key = (distance, booking.farm_id, window_start, booking.booking_id)
            if best is None or key < best:
                best = key
        if best is None:
            return None
        return CorrelationMatch(farm_id=best[1], booking_id=best[3], distance_m=best[0])

    # -- EDI -----------------------------------------------------------------------

    def convert_edi(self, message: str) -> tuple[list[dict], list[tuple[int, str]]]:
        """Flat delimited messages to FIP events.

        Segments split on '~', fields on '*', first field names the segment
        type.  Supported segments: GPS (tractor_id, ts, lat, lon, seq) and
        BKS (booking_id, status, ts).  Malformed segments are reported; a
        message with no valid segment raises UnparseableMessage.
        """
        events: list[dict] = []
        rejections: list[tuple[int, str]] = []
        segments = [s for s in message.strip().split(EDI_SEGMENT_SEP) if s.strip()]
        for index, segment in enumerate(segments):
            fields = segment.strip().split(EDI_FIELD_SEP)
            kind = fields[0].upper() if fields else ""
            try:
                if kind == "GPS" and len(fields) >= 6:
                    events.append({
                        "event_type": "tractor.gps",
                        "tractor_id": fields[1],
                        "ts": parse_ts(fields[2]),
                        "lat": _check_lat(fields[3]),
                        "lon": _check_lon(fields[4]),
                        "seq": int(fields[5]),
                    })
                elif kind == "BKS" and len(fields) >= 4:
                    events.append({
                        "event_type": "booking.status",
                        "booking_id": fields[1],
                        "status": fields[2],
                        "ts": parse_ts(fields[3]),
                    })
                else:
                    rejections.append((index, f"UNKNOWN_SEGMENT:{kind or '<empty>'}"))
            except (ValueError, TypeError):
                rejections.append((index, f"MALFORMED_SEGMENT:{kind}"))
        if not events:
            raise UnparseableMessage("no valid segment in message")
        return events, rejections

    # -- context -----------------------------------------------------------------

    def pull_context(self, farm_id: str, start: date, end: date) -> ContextBundle:
        """Weather samples and tile references for a farm's cell over a date
        range; uncovered days are reported as gaps, never interpolated."""
        if self._farm_locator is None:
            raise UnknownFarm(farm_id)
        location = self._farm_locator(farm_id)
        if location is None:
            raise UnknownFarm(farm_id)
        cell = self.context.cell_id(*location)
        samples: list[WeatherSample] = []
        tiles: list[RemoteSenseTile] = []
        missing: list[date] = []
        day = start
        while day <= end:
            smi = self.context.soil_moisture(cell, day)
            if smi is None:
                missing.append(day)
            else:
                samples.append(WeatherSample(cell, day, smi))
                tiles.append(RemoteSenseTile(cell, day, self.context.tile_ref(cell, day)))
            day += timedelta(days=1)
        return ContextBundle(farm_id, samples, tiles, missing)
