"""Composition root: configuration, wiring, demo seeding and persistence.

A Network owns one of everything -- identity, ledger, workflow engine,
event pipeline, analytics registry -- wired together the way a deployment
would run them: enrollment events and batch anchors land on the ledger,
workflow steps publish to the broker, the event pipeline asks the workflow
engine for read authorization, and analytics reads verified instances.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

from . import corpus as corpus_mod
from .codec import canonical_json
from .errors import BadConfig, UnknownFarm, UnknownTractor
from .fip import GPS_TOPIC, FipService, parse_ts
from .geo import (Booking, BoundaryPolygon, ClusterParams, ClusterPlan,
                  GeoPoint, ServiceRecord, Trace, TractorProfile, Undetectable,
                  assign_tractors, boundary_geojson, cluster_bookings,
                  detect_boundary, estimate_acreage, recommend_schedule,
                  utilization_report)
from .identity import IdentityService, OrgKind, UserCredential
from .ledger import Ledger, LedgerConfig, TransactionProposal
from .store import FileByteStore, MemoryByteStore
from .workflow import (InstanceStatus, WorkflowEngine, WorkflowInstance,
                       load_default_definition)

DEFAULT_CHANNEL = "agrinet"

SKILL_OF_SERVICE = {
    "ploughing": "plough",
    "harrowing": "harrow",
    "ridging": "ridge",
}

DEFAULT_ORGS = (
    {"org_id": "coop1", "display_name": "Booking agents cooperative",
     "org_kind": "COOP_AGENTS"},
    {"org_id": "fleet1", "display_name": "Tractor fleet services",
     "org_kind": "FLEET"},
    {"org_id": "platform1", "display_name": "Platform operator",
     "org_kind": "PLATFORM"},
)


@dataclass
class NetworkConfig:
    block_size: int = 10
    block_timeout_ms: int = 500
    peers_per_org: int = 1
    orgs: tuple[dict, ...] = DEFAULT_ORGS
    channels: tuple[dict, ...] = (
        {"channel_id": DEFAULT_CHANNEL,
         "members": ("coop1", "fleet1", "platform1"),
         "endorsement_policy": 2},
    )
    vicinity_radius_m: float = 500.0
    rate_per_ha: float = 30.0
    moisture_band: tuple[float, float] = (0.20, 0.35)
    max_radius_km: float = 5.0
    port: int = 8047

    @classmethod
    def from_dict(cls, raw: dict) -> "NetworkConfig":
        try:
            ledger = raw.get("ledger", {})
            fip = raw.get("fip", {})
            analytics = raw.get("analytics", {})
            server = raw.get("server", {})
            kwargs = {}
            if "block_size" in ledger:
                kwargs["block_size"] = int(ledger["block_size"])
            if "block_timeout_ms" in ledger:
                kwargs["block_timeout_ms"] = int(ledger["block_timeout_ms"])
            if "peers_per_org" in ledger:
                kwargs["peers_per_org"] = int(ledger["peers_per_org"])
            if "orgs" in ledger:
                kwargs["orgs"] = tuple(ledger["orgs"])
            if "channels" in ledger:
                kwargs["channels"] = tuple(
                    {**ch, "members": tuple(ch["members"])}
                    for ch in ledger["channels"])
            if "vicinity_radius_m" in fip:
                kwargs["vicinity_radius_m"] = float(fip["vicinity_radius_m"])
            if "rate_per_ha" in analytics:
                kwargs["rate_per_ha"] = float(analytics["rate_per_ha"])
            if "moisture_band" in analytics:
                band = analytics["moisture_band"]
                kwargs["moisture_band"] = (float(band[0]), float(band[1]))
            if "max_radius_km" in analytics:
                kwargs["max_radius_km"] = float(analytics["max_radius_km"])
            if "port" in server:
                kwargs["port"] = int(server["port"])
            return cls(**kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            raise BadConfig(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "NetworkConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix in (".yaml", ".yml"):
            import yaml
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
        return cls.from_dict(raw or {})


class Network:
    def __init__(self, config: NetworkConfig | None = None,
                 data_dir: str | Path | None = None,
                 deployment_secret: bytes | None = None,
                 clock=time.time):
        self.config = config or NetworkConfig()
        self.data_dir = Path(data_dir) if data_dir else None
        self.clock = clock
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)

        self.identity = IdentityService(deployment_secret=deployment_secret,
                                        clock=clock, audit=self._audit_enrollment)
        self.ledger = Ledger(clock=clock)
        ledger_config = LedgerConfig(block_size=self.config.block_size,
                                     block_timeout_ms=self.config.block_timeout_ms,
                                     num_orgs=len(self.config.orgs),
                                     peers_per_org=self.config.peers_per_org)
        for org in self.config.orgs:
            self.identity.register_org(org["org_id"], org["display_name"],
                                       OrgKind(org["org_kind"]))
            self.ledger.register_org(org["org_id"],
                                     self.identity.org_mac_key(org["org_id"]))
        for channel in self.config.channels:
            self.ledger.create_channel(channel["channel_id"],
                                       channel["members"],
                                       int(channel.get("endorsement_policy", 1)),
                                       ledger_config)
        self.channel_id = self.config.channels[0]["channel_id"]

        docstore = (FileByteStore(self.data_dir / "docstore")
                    if self.data_dir else MemoryByteStore())
        self.engine = WorkflowEngine(self.ledger, self.identity,
                                     docstore=docstore,
                                     publish=self._publish,
                                     channel_id=self.channel_id, clock=clock)
        self.fip = FipService(
            self.identity, self.ledger, channel_id=self.channel_id,
            log_dir=(self.data_dir / "events") if self.data_dir else None,
            vicinity_radius_m=self.config.vicinity_radius_m,
            authorize_topic=self._authorize_topic, clock=clock)
        self.fip.set_farm_locator(self._farm_location)

        self.tractors: dict[str, TractorProfile] = {}
        self.boundaries: dict[str, BoundaryPolygon] = {}
        self.farm_traces: dict[str, list[Trace]] = {}
        self.service_log: list[dict] = []
        self.bench_runs: dict[str, dict] = {}
        self.model_files: dict[str, bytes] = {}
        self._lock = threading.RLock()

    # -- wiring callbacks -------------------------------------------------------

    def _publish(self, topic: str, event: dict) -> None:
        self.fip.broker.publish(topic, event)

    def _authorize_topic(self, token, topic: str) -> bool:
        if topic == GPS_TOPIC:
            return self.engine.authorize_read(token, "raw_events")
        return True

    def _farm_location(self, farm_id: str):
        efr = self.engine.farm(farm_id)
        return efr.location if efr else None

    def _audit_enrollment(self, kind: str, data: dict) -> None:
        """Record enrollment events on the platform channel."""
        proposal = TransactionProposal(
            channel_id=self.channel_id,
            submitter="__network__",
            chaincode_name="identity",
            operation=kind,
            args=canonical_json(data),
            read_set=(),
            write_set=((f"user/{data['user_id']}", canonical_json(data)),),
        )
        channel = self.ledger.channel(self.channel_id)
        self.ledger.register_user("__network__", next(iter(channel.member_orgs)))
        endorsements = self.ledger.endorse(proposal, sorted(channel.member_orgs))
        self.ledger.submit_transaction(self.channel_id, proposal, endorsements)
        self.ledger.drain(self.channel_id)

    # -- membership helpers --------------------------------------------------------

    def enroll(self, org_id: str, user_id: str, roles) -> UserCredential:
        credential = self.identity.enroll_user(org_id, user_id, roles)
        self.ledger.register_user(user_id, org_id)
        return credential

    def token_for(self, user_id: str, ttl_seconds: float = 3600):
        return self.identity.issue_token(self.identity.credential(user_id),
                                         ttl_seconds=ttl_seconds)

    # -- analytics over live state ----------------------------------------------------

    def register_tractor(self, profile: TractorProfile) -> None:
        with self._lock:
            self.tractors[profile.tractor_id] = profile

    def record_service(self, tractor_id: str, farm_id: str, day: str,
                       hectares: float) -> None:
        with self._lock:
            self.service_log.append({"tractor_id": tractor_id, "farm_id": farm_id,
                                     "day": day, "hectares": hectares})

    BOUNDARY_MODEL_ID = "boundary-detector"

    def install_model(self, model_id: str, data: bytes, admin_token) -> str:
        """Register a model file on the ledger and keep its bytes off-chain."""
        digest = self.engine.register_model(model_id, data, admin_token)
        with self._lock:
            self.model_files[model_id] = data
        return digest

    def _require_verified_boundary_model(self) -> None:
        """Analytics refuses to run when a registered model file no longer
        matches its on-ledger digest."""
        data = self.model_files.get(self.BOUNDARY_MODEL_ID)
        if data is None:
            return   # no model registered for this deployment; procedure is inbuilt
        if not self.engine.verify_model_artifact(self.BOUNDARY_MODEL_ID, data):
            from .errors import Unauthorized
            raise Unauthorized(
                f"model {self.BOUNDARY_MODEL_ID!r} failed verification")

    def detect_farm_boundary(self, farm_id: str) -> BoundaryPolygon | Undetectable:
        self._require_verified_boundary_model()
        efr = self.engine.farm(farm_id)
        if efr is None:
            raise UnknownFarm(farm_id)
        traces = self.farm_traces.get(farm_id)
        if not traces:
            traces = self._traces_from_log(farm_id)
        if not traces:
            return Undetectable("TOO_FEW_POINTS")
        result = detect_boundary(traces)
        if isinstance(result, BoundaryPolygon):
            with self._lock:
                self.boundaries[farm_id] = result
            self.engine.attach_boundary(farm_id, boundary_geojson(farm_id, result))
            self._flag_discrepancies(farm_id, result)
        return result

    def _traces_from_log(self, farm_id: str) -> list[Trace]:
        """Correlate stored GPS events to this farm and group into day traces."""
        bookings = self.current_bookings(include_completed=True)
        day_points: dict[tuple[str, str], list[GeoPoint]] = {}
        for raw in self.fip.replay(GPS_TOPIC):
            event = json.loads(raw)
            match = self.fip.correlate(event, bookings)
            if match is None or match.farm_id != farm_id:
                continue
            key = (event["tractor_id"], event["day_stamp"])
            day_points.setdefault(key, []).append(
                GeoPoint(event["lat"], event["lon"]))
        return [Trace(tractor_id=t, day_stamp=d, points=tuple(points))
                for (t, d), points in sorted(day_points.items())]

    def _flag_discrepancies(self, farm_id: str, polygon: BoundaryPolygon) -> None:
        for instance in self.engine.instances():
            if instance.farm_id != farm_id:
                continue
            walk = instance.booking.get("boundary_walk")
            if not walk:
                continue
            try:
                estimated = estimate_acreage(
                    [GeoPoint(p[0], p[1]) for p in walk])
            except Exception:
                continue
            self.engine.review_acreage(instance.instance_id, polygon.area_ha,
                                       estimated)

    def current_bookings(self, on_date: Optional[date] = None,
                         include_completed: bool = False) -> list[Booking]:
        bookings = []
        for instance in self.engine.instances():
            if instance.status is InstanceStatus.CANCELLED:
                continue
            if not include_completed and instance.status is InstanceStatus.COMPLETED:
                continue
            booking = self._as_geo_booking(instance)
            if booking is None:
                continue
            if on_date is not None:
                day_start = datetime(on_date.year, on_date.month, on_date.day,
                                     tzinfo=timezone.utc).timestamp()
                if not (booking.window[0] <= day_start + 43200 <= booking.window[1]):
                    continue
            bookings.append(booking)
        return bookings

    def _as_geo_booking(self, instance: WorkflowInstance) -> Optional[Booking]:
        efr = self.engine.farm(instance.farm_id)
        if efr is None or efr.location is None:
            return None
        payload = instance.booking
        walk = payload.get("boundary_walk") or []
        try:
            hectares = estimate_acreage([GeoPoint(p[0], p[1]) for p in walk]) \
                if len(walk) >= 3 else 1.0
        except Exception:
            hectares = 1.0
        service = payload.get("service_type", "ploughing")
        scheduled = payload.get("scheduled_date")
        if scheduled:
            start = datetime.fromisoformat(scheduled).replace(
                tzinfo=timezone.utc).timestamp()
            window = (start - 21600, start + 64800)
        else:
            first_action = instance.history[0].timestamp if instance.history else 0.0
            window = (first_action - 3600, first_action + 7 * 86400)
        return Booking(
            booking_id=instance.booking_id,
            farm_id=instance.farm_id,
            location=efr.location,
            hectares=max(hectares, 0.01),
            service_type=service,
            skill=SKILL_OF_SERVICE.get(service, service),
            window=window,
        )

    def cluster_plan(self, on_date: Optional[date] = None,
                     max_cluster_ha: Optional[float] = None) -> ClusterPlan:
        bookings = self.current_bookings(on_date)
        if not bookings:
            return ClusterPlan([], ClusterParams(self.config.max_radius_km,
                                                 max_cluster_ha))
        if max_cluster_ha is None and self.tractors:
            max_cluster_ha = max(t.capacity_ha_day for t in self.tractors.values())
        return cluster_bookings(bookings, ClusterParams(
            max_radius_km=self.config.max_radius_km,
            max_cluster_ha=max_cluster_ha))

    def assignment_plan(self, on_date: Optional[date] = None):
        plan = self.cluster_plan(on_date)
        if not plan.clusters or not self.tractors:
            from .geo import AssignmentPlan
            return plan, AssignmentPlan([], [c.cluster_id for c in plan.clusters], 0.0)
        tractors = [self.tractors[t] for t in sorted(self.tractors)]
        skills = set()
        for t in tractors:
            skills |= t.skills
        feasible = [c for c in plan.clusters if c.skill in skills]
        assignment = assign_tractors(feasible, tractors)
        infeasible = [c.cluster_id for c in plan.clusters if c.skill not in skills]
        assignment.unmatched_cluster_ids.extend(infeasible)
        return plan, assignment

    def utilization(self, tractor_id: str, period_start: date, period_end: date):
        if tractor_id not in self.tractors:
            raise UnknownTractor(tractor_id)
        services = []
        with self._lock:
            log = list(self.service_log)
        for entry in log:
            if entry["tractor_id"] != tractor_id:
                continue
            services.append(ServiceRecord(farm_id=entry["farm_id"],
                                          day=date.fromisoformat(entry["day"]),
                                          hectares=entry["hectares"]))
        return utilization_report(tractor_id, period_start, period_end, services,
                                  rate_per_ha=self.config.rate_per_ha)

    def schedule_recommendation(self, farm_id: str, start: date,
                                horizon_days: int = 14) -> Optional[date]:
        bundle = self.fip.pull_context(farm_id, start,
                                       start + timedelta(days=horizon_days - 1))
        series = {s.date: s.soil_moisture_index for s in bundle.samples}
        return recommend_schedule(series, start, band=self.config.moisture_band,
                                  horizon_days=horizon_days)

    # -- demo seeding -----------------------------------------------------------------

    SERVICE_OF_SKILL = {"plough": "ploughing", "harrow": "harrowing",
                        "ridge": "ridging"}

    def seed_users(self) -> dict:
        """The standing demo cast; returns long-lived tokens per role."""
        self.enroll("platform1", "root", {"admin"})
        self.enroll("platform1", "soe1", {"admin"})
        self.enroll("platform1", "fin1", {"financier"})
        self.enroll("coop1", "agent1", {"agent"})
        self.enroll("coop1", "super1", {"supervisor"})
        self.enroll("coop1", "farmer1", {"farmer"})
        self.enroll("fleet1", "mgr1", {"fleet_manager"})
        self.enroll("fleet1", "op1", {"operator"})
        ttl = 30 * 86400.0
        return {
            "admin": self.token_for("root", ttl),
            "soe": self.token_for("soe1", ttl),
            "agent": self.token_for("agent1", ttl),
            "supervisor": self.token_for("super1", ttl),
            "fleet_manager": self.token_for("mgr1", ttl),
            "financier": self.token_for("fin1", ttl),
            "farmer": self.token_for("farmer1", ttl),
            "operator": self.token_for("op1", ttl),
        }

    def seed_demo(self, seed: int = 1, n_farms: int = 30, n_events: int = 20000,
                  complete_fraction: float = 0.7,
                  detect_boundaries: int = 6) -> dict:
        """Populate the network end to end from a synthetic corpus.

        Creates bookings for every traced farm, ingests the GPS stream,
        advances most instances through the full workflow, records services
        and detects a handful of boundaries up front (the rest on demand).
        """
        rng = random.Random(seed)
        tokens = self.seed_users()
        self.engine.register_workflow(load_default_definition(), tokens["admin"])

        corpus = corpus_mod.generate_corpus(n_farms, n_events, seed=seed)
        for tractor in corpus.tractors:
            self.register_tractor(tractor)
        farm_by_id = {f.farm_id: f for f in corpus.farms}

        # one booking instance per traced farm
        instance_of_farm: dict[str, str] = {}
        for farm_id, traces in sorted(corpus.traces.items()):
            farm = farm_by_id[farm_id]
            walk = self._agent_walk(farm, rng)
            payload = {
                "boundary_walk": walk,
                "primary_crop": rng.choice(["maize", "rice", "soybean"]),
                "secondary_crop": rng.choice(["beans", "cassava", "none"]),
                "service_type": self.SERVICE_OF_SKILL.get(farm.skill, "ploughing"),
                "farmer_id": f"farmer-{farm_id}",
            }
            instance = self.engine.instantiate("booking", farm_id, payload,
                                               tokens["agent"])
            instance_of_farm[farm_id] = instance.instance_id
            self.farm_traces[farm_id] = traces

        # the wire: systems of engagement push the day-stamped GPS stream
        batch: list[dict] = []
        for event in corpus.events:
            batch.append(event)
            if len(batch) >= 1000:
                self.fip.ingest(batch, tokens["soe"])
                batch = []
        if batch:
            self.fip.ingest(batch, tokens["soe"])

        # advance workflows; most reach payment, some linger mid-flight
        served: dict[str, list[tuple[str, str]]] = corpus.service_days
        day_of_farm: dict[str, tuple[str, str]] = {}
        for tractor_id, entries in served.items():
            for day, farm_id in entries:
                day_of_farm.setdefault(farm_id, (day, tractor_id))
        for farm_id, instance_id in sorted(instance_of_farm.items()):
            day, tractor_id = day_of_farm.get(
                farm_id, ("2020-05-12", corpus.tractors[0].tractor_id))
            operator = self.tractors[tractor_id].operator_id
            stage = rng.random()
            self.engine.execute_action(instance_id, "schedule",
                                       tokens["fleet_manager"],
                                       {"scheduled_date": day,
                                        "tractor_id": tractor_id,
                                        "operator_id": operator})
            if stage > complete_fraction:
                continue
            farm = farm_by_id[farm_id]
            self.engine.execute_action(
                instance_id, "confirm_service", tokens["supervisor"],
                {"serviced_area_ha": round(farm.area_ha, 3)},
                documents={"service_report":
                           f"service report {farm_id} {day}".encode()})
            self.engine.execute_action(
                instance_id, "approve_payment", tokens["financier"],
                {"amount": round(farm.area_ha * self.config.rate_per_ha, 2)},
                documents={"invoice": f"invoice {farm_id} {day}".encode()})
            self.record_service(tractor_id, farm_id, day, round(farm.area_ha, 3))

        detected = 0
        for farm_id in sorted(corpus.traces):
            if detected >= detect_boundaries:
                break
            result = self.detect_farm_boundary(farm_id)
            if isinstance(result, BoundaryPolygon):
                detected += 1

        trio = self._seed_cluster_trio(tokens, rng)
        utilization = self._seed_utilization_fixture(tokens, rng)
        return {"tokens": tokens, "corpus": corpus,
                "instances": instance_of_farm, "trio": trio,
                "utilization": utilization, "boundaries_detected": detected}

    @staticmethod
    def _agent_walk(farm, rng: random.Random, points: int = 42) -> list[list[float]]:
        """The booking agent's walk around the field edge, with a bit of
        hand-held GPS noise."""
        from .geo import LocalProjection
        import numpy as np
        projection = LocalProjection(farm.center[0], farm.center[1])
        w, h = farm.width_m / 2, farm.height_m / 2
        perimeter = 2 * (farm.width_m + farm.height_m)
        corners = [(-w, -h), (w, -h), (w, h), (-w, h)]
        xy = []
        for i in range(points):
            d = perimeter * i / points
            for (x0, y0), (x1, y1) in zip(corners, corners[1:] + corners[:1]):
                edge = abs(x1 - x0) + abs(y1 - y0)
                if d <= edge:
                    t = d / edge
                    xy.append((x0 + t * (x1 - x0) + rng.uniform(-3, 3),
                               y0 + t * (y1 - y0) + rng.uniform(-3, 3)))
                    break
                d -= edge
        latlon = projection.to_latlon(np.array(xy))
        return [[round(float(lat), 7), round(float(lon), 7)] for lat, lon in latlon]

    def _seed_cluster_trio(self, tokens, rng: random.Random) -> dict:
        """Three adjacent farms booked for the same day: the canonical
        single-service cluster used by dashboards and fixtures."""
        centers = [(9.2000, 8.3000), (9.2080, 8.3060), (9.1925, 8.2950)]
        day = "2020-06-01"
        instance_ids = []
        for index, center in enumerate(centers):
            farm = corpus_mod.FarmSpec(
                farm_id=f"FT{index + 1:03d}", center=center,
                width_m=100.0, height_m=200.0, skill="plough")
            walk = self._agent_walk(farm, rng)
            instance = self.engine.instantiate("booking", farm.farm_id, {
                "boundary_walk": walk, "primary_crop": "maize",
                "secondary_crop": "beans", "service_type": "ploughing",
            }, tokens["agent"])
            self.engine.execute_action(instance.instance_id, "schedule",
                                       tokens["fleet_manager"],
                                       {"scheduled_date": day,
                                        "tractor_id": "T001",
                                        "operator_id": "op001"})
            points = corpus_mod.farm_trace_points(farm, jitter_m=0.4, rng=rng)
            self.farm_traces[farm.farm_id] = [Trace(
                tractor_id="T001", day_stamp=day, points=tuple(points))]
            self.detect_farm_boundary(farm.farm_id)
            instance_ids.append(instance.instance_id)
        return {"date": day, "farm_ids": ["FT001", "FT002", "FT003"],
                "instance_ids": instance_ids}

    def _seed_utilization_fixture(self, tokens, rng: random.Random) -> dict:
        """One tractor serving 7 farms on each of two days, fully paid --
        the utilization chart's reference shape (farms/day = 7)."""
        tractor = TractorProfile(
            tractor_id="T900", base=(9.30, 8.40), capacity_ha_day=16.0,
            skills=frozenset({"plough", "harrow", "ridge"}),
            operator_id="op900", experience=0.9)
        self.register_tractor(tractor)
        days = ("2020-06-10", "2020-06-11")
        served = []
        for index in range(14):
            day = days[index // 7]
            farm = corpus_mod.FarmSpec(
                farm_id=f"FU{index + 1:03d}",
                center=(9.30 + 0.004 * index, 8.40 + 0.003 * (index % 7)),
                width_m=100.0, height_m=140.0, skill="plough")
            walk = self._agent_walk(farm, rng)
            instance = self.engine.instantiate("booking", farm.farm_id, {
                "boundary_walk": walk, "primary_crop": "maize",
                "secondary_crop": "none", "service_type": "ploughing",
            }, tokens["agent"])
            self.engine.execute_action(instance.instance_id, "schedule",
                                       tokens["fleet_manager"],
                                       {"scheduled_date": day,
                                        "tractor_id": "T900",
                                        "operator_id": "op900"})
            self.engine.execute_action(instance.instance_id, "confirm_service",
                                       tokens["supervisor"],
                                       {"serviced_area_ha": round(farm.area_ha, 3)})
            self.engine.execute_action(
                instance.instance_id, "approve_payment", tokens["financier"],
                {"amount": round(farm.area_ha * self.config.rate_per_ha, 2)},
                documents={"invoice": f"invoice {farm.farm_id} {day}".encode()})
            self.record_service("T900", farm.farm_id, day, round(farm.area_ha, 3))
            served.append(farm.farm_id)
        return {"tractor_id": "T900", "days": list(days), "farm_ids": served}

    # -- persistence -------------------------------------------------------------------

    def save(self) -> Path:
        if self.data_dir is None:
            raise BadConfig("network has no data_dir to save into")
        state_dir = self.data_dir
        for channel_id in self.ledger.channels():
            self.ledger.export_blocks(channel_id,
                                      state_dir / f"blocks_{channel_id}.jsonl")
        snapshot = {
            "config": {
                "ledger": {
                    "block_size": self.config.block_size,
                    "block_timeout_ms": self.config.block_timeout_ms,
                    "peers_per_org": self.config.peers_per_org,
                    "orgs": list(self.config.orgs),
                    "channels": [dict(c, members=list(c["members"]))
                                 for c in self.config.channels],
                },
                "fip": {"vicinity_radius_m": self.config.vicinity_radius_m},
                "analytics": {"rate_per_ha": self.config.rate_per_ha,
                              "moisture_band": list(self.config.moisture_band),
                              "max_radius_km": self.config.max_radius_km},
                "server": {"port": self.config.port},
            },
            "users": [
                {"user_id": u.user_id, "org_id": u.org_id,
                 "roles": sorted(u.roles),
                 "enrollment_secret": u.enrollment_secret.hex()}
                for u in self.identity.users()
            ],
            "definitions": [d.to_dict() for d in self.engine.definitions()],
            "instances": [i.to_dict() for i in self.engine.instances()],
            "farms": [f.to_dict() for f in self.engine.farms()],
            "anchors": [a.to_dict() for a in self.engine.anchors()],
            "models": dict(self.engine._models),
            "tractors": [
                {"tractor_id": t.tractor_id, "base": list(t.base),
                 "capacity_ha_day": t.capacity_ha_day,
                 "skills": sorted(t.skills), "operator_id": t.operator_id,
                 "experience": t.experience}
                for t in self.tractors.values()
            ],
            "service_log": self.service_log,
            "boundaries": {farm_id: boundary_geojson(farm_id, polygon)
                           for farm_id, polygon in self.boundaries.items()},
        }
        (state_dir / "state.json").write_text(
            json.dumps(snapshot, indent=1, sort_keys=True), encoding="utf-8")
        return state_dir

    @classmethod
    def load(cls, data_dir: str | Path,
             deployment_secret: bytes | None = None) -> "Network":
        """Rebuild a network from a saved state directory.

        The ledger replays from the exported block logs; projections and
        off-chain registries come from the snapshot; the event pipeline
        replays its segment files and restocks its dedup index.
        """
        data_dir = Path(data_dir)
        snapshot = json.loads((data_dir / "state.json").read_text(encoding="utf-8"))
        secret = deployment_secret
        if secret is None:
            secret_file = data_dir / "secret.bin"
            secret = secret_file.read_bytes() if secret_file.exists() else None
        config = NetworkConfig.from_dict(snapshot["config"])
        network = cls(config, data_dir=data_dir, deployment_secret=secret)
        for user in snapshot["users"]:
            network.identity.restore_user(UserCredential(
                user_id=user["user_id"], org_id=user["org_id"],
                roles=frozenset(user["roles"]),
                enrollment_secret=bytes.fromhex(user["enrollment_secret"])))
            network.ledger.register_user(user["user_id"], user["org_id"])
        for channel_id in network.ledger.channels():
            blocks = data_dir / f"blocks_{channel_id}.jsonl"
            if blocks.exists():
                network.ledger.import_blocks(channel_id, blocks)
        network.engine.restore_state(
            definitions=snapshot.get("definitions", ()),
            instances=snapshot.get("instances", ()),
            farms=snapshot.get("farms", ()),
            anchors=snapshot.get("anchors", ()),
            models=snapshot.get("models"))
        network.fip.rebuild_dedup_from_log()
        from .geo import boundary_from_geojson
        for entry in snapshot.get("tractors", ()):
            network.register_tractor(TractorProfile(
                tractor_id=entry["tractor_id"], base=tuple(entry["base"]),
                capacity_ha_day=entry["capacity_ha_day"],
                skills=frozenset(entry["skills"]),
                operator_id=entry["operator_id"],
                experience=entry["experience"]))
        network.service_log = list(snapshot.get("service_log", ()))
        for farm_id, feature in snapshot.get("boundaries", {}).items():
            network.boundaries[farm_id] = boundary_from_geojson(feature)
        return network

    def save_secret(self) -> None:
        """Persist the deployment secret beside the state (dev convenience)."""
        if self.data_dir is None:
            raise BadConfig("network has no data_dir")
        (self.data_dir / "secret.bin").write_bytes(self.identity._secret)
