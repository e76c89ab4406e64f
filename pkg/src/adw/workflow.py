"""Chaincode-style workflow execution over the ledger.

A workflow definition is an ordered list of role-gated steps.  Every state
change of an instance is a ledger transaction: the proposal reads the
instance key at its current version and writes the advanced state, so two
racing actions on one instance resolve through MVCC -- exactly one commits,
the other surfaces as OutOfOrder and can be retried.

Documents are kept in the pluggable byte store; only their digests go on
chain.  Workflows are strictly linear; CANCELLED is the only escape hatch.
"""

from __future__ import annotations

import importlib.resources
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .codec import canonical_json, sha256_hex
from .errors import (InstanceClosed, InvalidDefinition, MissingInput, OutOfOrder,
                     Unauthorized, UnknownInstance, UnknownModel, UnknownSlot)
from .identity import ROLES, AuthToken, IdentityService
from .ledger import Ledger, TransactionProposal, TxStatus, Version
from .store import ByteStore, MemoryByteStore

# Roles allowed to read raw tractor event streams: the supply side and the
# platform operator.  Demand-side and financing roles see derived views only.
RAW_EVENT_ROLES = frozenset({"admin", "fleet_manager", "operator", "supervisor"})
UTILIZATION_ROLES = frozenset({"admin", "fleet_manager", "financier"})

ACREAGE_REVIEW_THRESHOLD = 0.15


class InstanceStatus(str, Enum):
    ACTIVE = "ACTIVE"
    COMPLETED = "COMPLETED"
    CANCELLED = "CANCELLED"


@dataclass(frozen=True)
class Step:
    action_name: str
    required_role: str
    required_inputs: tuple[str, ...] = ()
    document_slots: tuple[str, ...] = ()
    emits_topic: Optional[str] = None


@dataclass(frozen=True)
class WorkflowDefinition:
    workflow_id: str
    version: int
    steps: tuple[Step, ...]

    def validate(self) -> None:
        if not self.steps:
            raise InvalidDefinition("a workflow needs at least one step")
        names = [s.action_name for s in self.steps]
        if len(names) != len(set(names)):
            raise InvalidDefinition("duplicate action names")
        for step in self.steps:
            if step.required_role not in ROLES:
                raise InvalidDefinition(f"unknown role {step.required_role!r}")

    def step_roles(self) -> frozenset[str]:
        return frozenset(s.required_role for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "workflow_id": self.workflow_id,
            "version": self.version,
            "steps": [
                {
                    "action_name": s.action_name,
                    "required_role": s.required_role,
                    "required_inputs": list(s.required_inputs),
                    "document_slots": list(s.document_slots),
                    "emits_topic": s.emits_topic,
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkflowDefinition":
        steps = tuple(
            Step(
                action_name=s["action_name"],
                required_role=s["required_role"],
                required_inputs=tuple(s.get("required_inputs", ())),
                document_slots=tuple(s.get("document_slots", ())),
                emits_topic=s.get("emits_topic"),
            )
            for s in d["steps"]
        )
        return cls(d["workflow_id"], int(d["version"]), steps)


def load_default_definition() -> WorkflowDefinition:
    """The four-step farm service booking workflow shipped with the platform."""
    raw = importlib.resources.files("adw.data").joinpath("booking_v1.json").read_text()
    return WorkflowDefinition.from_dict(json.loads(raw))


@dataclass(frozen=True)
class ActionRecord:
    action_name: str
    actor_correlation: str
    actor_role: str
    timestamp: float
    payload_digest: str
    tx_id: str

    def to_dict(self) -> dict:
        return {
            "action_name": self.action_name,
            "actor_correlation": self.actor_correlation,
            "actor_role": self.actor_role,
            "timestamp": self.timestamp,
            "payload_digest": self.payload_digest,
            "tx_id": self.tx_id,
        }


@dataclass
class WorkflowInstance:
    instance_id: str
    workflow_id: str
    version: int
    farm_id: str
    booking_id: str
    channel_id: str
    current_step_index: int = 0
    status: InstanceStatus = InstanceStatus.ACTIVE
    history: list[ActionRecord] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    booking: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "workflow_id": self.workflow_id,
            "version": self.version,
            "farm_id": self.farm_id,
            "booking_id": self.booking_id,
            "channel_id": self.channel_id,
            "current_step_index": self.current_step_index,
            "status": self.status.value,
            "history": [r.to_dict() for r in self.history],
            "flags": list(self.flags),
            "booking": self.booking,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkflowInstance":
        inst = cls(
            instance_id=d["instance_id"],
            workflow_id=d["workflow_id"],
            version=int(d["version"]),
            farm_id=d["farm_id"],
            booking_id=d["booking_id"],
            channel_id=d["channel_id"],
            current_step_index=int(d["current_step_index"]),
            status=InstanceStatus(d["status"]),
            flags=list(d.get("flags", [])),
            booking=dict(d.get("booking", {})),
        )
        inst.history = [ActionRecord(
            action_name=r["action_name"],
            actor_correlation=r["actor_correlation"],
            actor_role=r["actor_role"],
            timestamp=r["timestamp"],
            payload_digest=r["payload_digest"],
            tx_id=r["tx_id"],
        ) for r in d.get("history", [])]
        return inst


@dataclass(frozen=True)
class DocumentAnchor:
    anchor_id: str
    instance_id: str
    slot: str
    off_chain_uri: str
    digest: str
    size: int

    def to_dict(self) -> dict:
        return {
            "anchor_id": self.anchor_id, "instance_id": self.instance_id,
            "slot": self.slot, "off_chain_uri": self.off_chain_uri,
            "digest": self.digest, "size": self.size,
        }


@dataclass
class ElectronicFieldRecord:
    farm_id: str
    farmer_correlation: Optional[str]
    location: Optional[tuple[float, float]]
    primary_crop: Optional[str] = None
    secondary_crop: Optional[str] = None
    boundary: Optional[dict] = None
    activity_log: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "farm_id": self.farm_id,
            "farmer_correlation": self.farmer_correlation,
            "location": list(self.location) if self.location else None,
            "primary_crop": self.primary_crop,
            "secondary_crop": self.secondary_crop,
            "boundary": self.boundary,
            "activity_log": [list(x) for x in self.activity_log],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElectronicFieldRecord":
        return cls(
            farm_id=d["farm_id"],
            farmer_correlation=d.get("farmer_correlation"),
            location=tuple(d["location"]) if d.get("location") else None,
            primary_crop=d.get("primary_crop"),
            secondary_crop=d.get("secondary_crop"),
            boundary=d.get("boundary"),
            activity_log=[tuple(x) for x in d.get("activity_log", [])],
        )


@dataclass
class PreparedAction:
    instance_id: str
    action_name: str
    proposal: TransactionProposal
    new_state: dict
    record: ActionRecord
    emits_topic: Optional[str]
    completes: bool


class WorkflowEngine:
    """Role-gated, ordered workflow execution recorded on the ledger."""

    def __init__(self, ledger: Ledger, identity: IdentityService,
                 docstore: ByteStore | None = None,
                 publish: Callable[[str, dict], None] | None = None,
                 channel_id: str = "agrinet",
                 clock: Callable[[], float] = time.time):
        self.ledger = ledger
        self.identity = identity
        self.docstore = docstore if docstore is not None else MemoryByteStore()
        self.publish = publish
        self.channel_id = channel_id
        self.clock = clock
        self._definitions: dict[tuple[str, int], WorkflowDefinition] = {}
        self._instances: dict[str, WorkflowInstance] = {}
        self._anchors: dict[str, DocumentAnchor] = {}
        self._farms: dict[str, ElectronicFieldRecord] = {}
        self._models: dict[str, str] = {}
        self._lock = threading.RLock()
        self._seq = 0

    # -- plumbing -----------------------------------------------------------

    def _next_id(self, prefix: str) -> str:
        with self._lock:
            self._seq += 1
            return f"{prefix}-{self._seq:06d}-{uuid.uuid4().hex[:8]}"

    def _commit(self, proposal: TransactionProposal) -> str:
        """Endorse with every member org, submit, flush, return the tx id.

        Raises OutOfOrder when MVCC rejects the write (a concurrent action
        advanced the instance first).
        """
        channel = self.ledger.channel(proposal.channel_id)
        endorsements = self.ledger.endorse(proposal, sorted(channel.member_orgs))
        tx_id = self.ledger.submit_transaction(proposal.channel_id, proposal, endorsements)
        self.ledger.drain(proposal.channel_id)
        status = self.ledger.tx_status(proposal.channel_id, tx_id)
        if status is not TxStatus.VALID:
            raise OutOfOrder(f"transaction {tx_id[:12]}.. rejected: {status}")
        return tx_id

    def _require_role(self, token: AuthToken, role: str) -> AuthToken:
        claims = self.identity.verify_token(token)
        if role not in claims.roles:
            raise Unauthorized(f"action requires role {role!r}")
        return claims

    def _instance_key(self, instance_id: str) -> str:
        return f"instance/{instance_id}"

    def _instance_version(self, instance_id: str) -> Optional[Version]:
        entry = self.ledger.world_state(self.channel_id).get(self._instance_key(instance_id))
        return entry[1] if entry else None

    # -- definitions -----------------------------------------------------------

    def register_workflow(self, definition: WorkflowDefinition,
                          admin_token: AuthToken) -> tuple[str, int]:
        claims = self._require_role(admin_token, "admin")
        definition.validate()
        key = f"workflow/{definition.workflow_id}/v{definition.version}"
        proposal = TransactionProposal(
            channel_id=self.channel_id,
            submitter=claims.user_id,
            chaincode_name="workflow",
            operation="register_workflow",
            args=canonical_json(definition.to_dict()),
            read_set=(),
            write_set=((key, canonical_json(definition.to_dict())),),
        )
        self._commit(proposal)
        with self._lock:
            self._definitions[(definition.workflow_id, definition.version)] = definition
        return definition.workflow_id, definition.version

    def definition(self, workflow_id: str, version: int | None = None) -> WorkflowDefinition:
        with self._lock:
            if version is not None:
                try:
                    return self._definitions[(workflow_id, version)]
                except KeyError:
                    raise InvalidDefinition(f"{workflow_id} v{version} not registered") from None
            versions = [v for (wid, v) in self._definitions if wid == workflow_id]
            if not versions:
                raise InvalidDefinition(f"{workflow_id} not registered")
            return self._definitions[(workflow_id, max(versions))]

    def definitions(self) -> list[WorkflowDefinition]:
        with self._lock:
            return [self._definitions[k] for k in sorted(self._definitions)]

    # -- instance lifecycle -------------------------------------------------------

    def instantiate(self, workflow_id: str, farm_id: str, payload: dict,
                    token: AuthToken, version: int | None = None) -> WorkflowInstance:
        definition = self.definition(workflow_id, version)
        step0 = definition.steps[0]
        claims = self._require_role(token, step0.required_role)
        missing = [f for f in step0.required_inputs if f not in payload]
        if missing:
            raise MissingInput(f"payload missing {missing}")

        # user references never land on chain in the clear
        booking = {k: v for k, v in payload.items() if k != "farmer_id"}
        if "farmer_id" in payload:
            booking["farmer_correlation"] = self.identity.correlation_id(
                str(payload["farmer_id"]))
        instance = WorkflowInstance(
            instance_id=self._next_id("inst"),
            workflow_id=definition.workflow_id,
            version=definition.version,
            farm_id=farm_id,
            booking_id=self._next_id("bk"),
            channel_id=self.channel_id,
            booking=booking,
        )
        record, tx_id = self._advance(instance, definition, step0, claims, payload,
                                      prior_version=None)
        self._register_farm(instance, payload, claims)
        with self._lock:
            self._instances[instance.instance_id] = instance
        self._emit(step0, instance, record)
        return instance

    def execute_action(self, instance_id: str, action_name: str, token: AuthToken,
                       payload: dict, documents: dict[str, bytes] | None = None
                       ) -> WorkflowInstance:
        instance = self.instance(instance_id)
        definition = self.definition(instance.workflow_id, instance.version)
        if instance.status is not InstanceStatus.ACTIVE:
            raise InstanceClosed(f"instance is {instance.status.value}")
        step = definition.steps[instance.current_step_index]
        if action_name != step.action_name:
            raise OutOfOrder(
                f"expected {step.action_name!r} at step {instance.current_step_index}")
        claims = self._require_role(token, step.required_role)
        missing = [f for f in step.required_inputs if f not in payload]
        if missing:
            raise MissingInput(f"payload missing {missing}")

        prior_version = self._instance_version(instance_id)
        record, _ = self._advance(instance, definition, step, claims, payload,
                                  prior_version=prior_version)
        for slot, data in (documents or {}).items():
            self.anchor_document(instance_id, slot, data, token)
        self._emit(step, instance, record)
        return instance

    def _advance(self, instance: WorkflowInstance, definition: WorkflowDefinition,
                 step: Step, claims: AuthToken, payload: dict,
                 prior_version: Optional[Version]) -> tuple[ActionRecord, str]:
        prepared = self._prepare(instance, definition, step, claims, payload, prior_version)
        tx_id = self._commit(prepared.proposal)
        record = ActionRecord(
            action_name=prepared.record.action_name,
            actor_correlation=prepared.record.actor_correlation,
            actor_role=prepared.record.actor_role,
            timestamp=prepared.record.timestamp,
            payload_digest=prepared.record.payload_digest,
            tx_id=tx_id,
        )
        instance.history.append(record)
        instance.current_step_index += 1
        instance.booking = dict(prepared.new_state["booking"])
        if prepared.completes:
            instance.status = InstanceStatus.COMPLETED
        if instance.farm_id in self._farms:
            efr = self._farms[instance.farm_id]
            efr.activity_log.append((instance.instance_id, step.action_name))
        return record, tx_id

    def _prepare(self, instance: WorkflowInstance, definition: WorkflowDefinition,
                 step: Step, claims: AuthToken, payload: dict,
                 prior_version: Optional[Version]) -> PreparedAction:
        payload_digest = sha256_hex(canonical_json(payload))
        record = ActionRecord(
            action_name=step.action_name,
            actor_correlation=self.identity.correlation_id(claims.user_id),
            actor_role=step.required_role,
            timestamp=self.clock(),
            payload_digest=payload_digest,
            tx_id="",
        )
        next_index = instance.current_step_index + 1
        completes = next_index == len(definition.steps)
        new_state = instance.to_dict()
        new_state["current_step_index"] = next_index
        new_state["status"] = (InstanceStatus.COMPLETED if completes
                               else InstanceStatus.ACTIVE).value
        new_state["history"] = [r.to_dict() for r in instance.history] + [record.to_dict()]
        if step.action_name == "schedule":
            new_state["booking"] = {**instance.booking, **{
                k: payload[k] for k in ("scheduled_date", "tractor_id", "operator_id")
                if k in payload}}
        key = self._instance_key(instance.instance_id)
        proposal = TransactionProposal(
            channel_id=instance.channel_id,
            submitter=claims.user_id,
            chaincode_name="workflow",
            operation=step.action_name,
            args=payload_digest.encode("ascii"),
            read_set=((key, prior_version),),
            write_set=((key, canonical_json(new_state)),),
        )
        return PreparedAction(instance.instance_id, step.action_name, proposal,
                              new_state, record, step.emits_topic, completes)

    # Low-level split of execute_action used to exercise concurrent submission:
    # prepare_action builds the MVCC-read proposal without committing it.
    def prepare_action(self, instance_id: str, action_name: str, token: AuthToken,
                       payload: dict) -> PreparedAction:
        instance = self.instance(instance_id)
        definition = self.definition(instance.workflow_id, instance.version)
        if instance.status is not InstanceStatus.ACTIVE:
            raise InstanceClosed(f"instance is {instance.status.value}")
        step = definition.steps[instance.current_step_index]
        if action_name != step.action_name:
            raise OutOfOrder(f"expected {step.action_name!r}")
        claims = self._require_role(token, step.required_role)
        return self._prepare(instance, definition, step, claims, payload,
                             self._instance_version(instance_id))

    def submit_prepared(self, prepared: PreparedAction) -> str:
        channel = self.ledger.channel(prepared.proposal.channel_id)
        endorsements = self.ledger.endorse(prepared.proposal, sorted(channel.member_orgs))
        return self.ledger.submit_transaction(prepared.proposal.channel_id,
                                              prepared.proposal, endorsements)

    def sync_instance(self, instance_id: str) -> WorkflowInstance:
        """Reload an instance from committed world state."""
        entry = self.ledger.world_state(self.channel_id).get(self._instance_key(instance_id))
        if entry is None:
            raise UnknownInstance(instance_id)
        instance = WorkflowInstance.from_dict(json.loads(entry[0]))
        with self._lock:
            self._instances[instance_id] = instance
        return instance

    def cancel(self, instance_id: str, token: AuthToken) -> WorkflowInstance:
        instance = self.instance(instance_id)
        claims = self.identity.verify_token(token)
        if "admin" not in claims.roles and "agent" not in claims.roles:
            raise Unauthorized("cancel requires the admin or instantiating agent role")
        if instance.status is not InstanceStatus.ACTIVE:
            raise InstanceClosed(f"instance is {instance.status.value}")
        new_state = instance.to_dict()
        new_state["status"] = InstanceStatus.CANCELLED.value
        key = self._instance_key(instance_id)
        proposal = TransactionProposal(
            channel_id=instance.channel_id,
            submitter=claims.user_id,
            chaincode_name="workflow",
            operation="cancel",
            args=b"cancel",
            read_set=((key, self._instance_version(instance_id)),),
            write_set=((key, canonical_json(new_state)),),
        )
        self._commit(proposal)
        instance.status = InstanceStatus.CANCELLED
        return instance

    def instance(self, instance_id: str) -> WorkflowInstance:
        with self._lock:
            try:
                return self._instances[instance_id]
            except KeyError:
                raise UnknownInstance(instance_id) from None

    def instances(self, status: InstanceStatus | None = None) -> list[WorkflowInstance]:
        with self._lock:
            values = sorted(self._instances.values(), key=lambda i: i.instance_id)
        if status is not None:
            values = [i for i in values if i.status is status]
        return values

    def audit_trail(self, instance_id: str) -> list[ActionRecord]:
        return list(self.instance(instance_id).history)

    def _emit(self, step: Step, instance: WorkflowInstance, record: ActionRecord) -> None:
        if self.publish is None or step.emits_topic is None:
            return
        self.publish(step.emits_topic, {
            "event_type": f"workflow.{step.action_name}",
            "instance_id": instance.instance_id,
            "booking_id": instance.booking_id,
            "farm_id": instance.farm_id,
            "tx_id": record.tx_id,
            "ts": record.timestamp,
        })

    # -- farms / EFR ------------------------------------------------------------

    def _register_farm(self, instance: WorkflowInstance, payload: dict,
                       claims: AuthToken) -> None:
        walk = payload.get("boundary_walk") or []
        location = None
        if walk:
            location = (sum(p[0] for p in walk) / len(walk),
                        sum(p[1] for p in walk) / len(walk))
        elif "location" in payload:
            location = tuple(payload["location"])
        farmer = payload.get("farmer_id")
        with self._lock:
            efr = self._farms.get(instance.farm_id)
            if efr is None:
                efr = ElectronicFieldRecord(
                    farm_id=instance.farm_id,
                    farmer_correlation=(self.identity.correlation_id(farmer)
                                        if farmer else None),
                    location=location,
                )
                self._farms[instance.farm_id] = efr
            efr.primary_crop = payload.get("primary_crop", efr.primary_crop)
            efr.secondary_crop = payload.get("secondary_crop", efr.secondary_crop)
            if location and efr.location is None:
                efr.location = location
            efr.activity_log.append((instance.instance_id, "create_booking"))

    def farm(self, farm_id: str) -> Optional[ElectronicFieldRecord]:
        with self._lock:
            return self._farms.get(farm_id)

    def farms(self) -> list[ElectronicFieldRecord]:
        with self._lock:
            return sorted(self._farms.values(), key=lambda f: f.farm_id)

    def attach_boundary(self, farm_id: str, boundary: dict) -> None:
        with self._lock:
            efr = self._farms.get(farm_id)
            if efr is not None:
                efr.boundary = boundary

    def review_acreage(self, instance_id: str, detected_ha: float,
                       estimated_ha: float,
                       threshold: float = ACREAGE_REVIEW_THRESHOLD) -> bool:
        """Flag (never reject) instances whose agent estimate strays more than
        the threshold from the detected acreage."""
        instance = self.instance(instance_id)
        if estimated_ha <= 0:
            return False
        discrepancy = abs(detected_ha - estimated_ha) / estimated_ha
        if discrepancy > threshold:
            flag = "ACREAGE_DISCREPANCY"
            if flag not in instance.flags:
                instance.flags.append(flag)
            return True
        return False

    # -- documents ------------------------------------------------------------

    def anchor_document(self, instance_id: str, slot: str, data: bytes,
                        token: AuthToken) -> DocumentAnchor:
        instance = self.instance(instance_id)
        definition = self.definition(instance.workflow_id, instance.version)
        claims = self.identity.verify_token(token)
        declared = set()
        for step in definition.steps[:max(instance.current_step_index, 1)]:
            declared.update(step.document_slots)
        if instance.current_step_index < len(definition.steps):
            declared.update(definition.steps[instance.current_step_index].document_slots)
        if slot not in declared:
            raise UnknownSlot(f"slot {slot!r} is not declared by a current or past step")
        address = self.docstore.put(data)
        anchor = DocumentAnchor(
            anchor_id=self._next_id("anchor"),
            instance_id=instance_id,
            slot=slot,
            off_chain_uri=f"store://{address}",
            digest=sha256_hex(data),
            size=len(data),
        )
        proposal = TransactionProposal(
            channel_id=instance.channel_id,
            submitter=claims.user_id,
            chaincode_name="workflow",
            operation="anchor_document",
            args=anchor.digest.encode("ascii"),
            read_set=(),
            write_set=((f"anchor/{anchor.anchor_id}", canonical_json(anchor.to_dict())),),
        )
        self._commit(proposal)
        with self._lock:
            self._anchors[anchor.anchor_id] = anchor
        return anchor

    def verify_document(self, anchor: DocumentAnchor, data: bytes) -> bool:
        return sha256_hex(data) == anchor.digest

    def anchors(self, instance_id: str | None = None) -> list[DocumentAnchor]:
        with self._lock:
            values = sorted(self._anchors.values(), key=lambda a: a.anchor_id)
        if instance_id is not None:
            values = [a for a in values if a.instance_id == instance_id]
        return values

    def stored_document(self, anchor: DocumentAnchor) -> bytes:
        return self.docstore.get(anchor.off_chain_uri.removeprefix("store://"))

    # -- read authorization ------------------------------------------------------

    def authorize_read(self, token: AuthToken, resource_kind: str,
                       resource_id: str | None = None) -> bool:
        """Gateway-side read gate; deny is a value, not an error."""
        try:
            claims = self.identity.verify_token(token)
        except Exception:
            return False
        roles = claims.roles
        if "admin" in roles:
            return True
        if resource_kind in ("instance", "booking"):
            try:
                instance = self.instance(resource_id) if resource_id else None
            except UnknownInstance:
                return False
            if instance is not None:
                channel = self.ledger.channel(instance.channel_id)
                if claims.org_id not in channel.member_orgs:
                    return False
                definition = self.definition(instance.workflow_id, instance.version)
                return bool(roles & definition.step_roles())
            return False
        if resource_kind in ("raw_events", "events"):
            return bool(roles & RAW_EVENT_ROLES)
        if resource_kind == "utilization":
            return bool(roles & UTILIZATION_ROLES)
        if resource_kind in ("farm", "efr", "boundary", "clusters", "plan"):
            return bool(roles & (ROLES - {"operator"}))
        return False

    # -- model registry ------------------------------------------------------------

    def register_model(self, model_id: str, data: bytes, admin_token: AuthToken) -> str:
        claims = self._require_role(admin_token, "admin")
        digest = sha256_hex(data)
        proposal = TransactionProposal(
            channel_id=self.channel_id,
            submitter=claims.user_id,
            chaincode_name="workflow",
            operation="register_model",
            args=digest.encode("ascii"),
            read_set=(),
            write_set=((f"model/{model_id}", digest.encode("ascii")),),
        )
        self._commit(proposal)
        with self._lock:
            self._models[model_id] = digest
        return digest

    def verify_model_artifact(self, model_id: str, data: bytes) -> bool:
        with self._lock:
            digest = self._models.get(model_id)
        if digest is None:
            raise UnknownModel(model_id)
        return sha256_hex(data) == digest

    # -- persistence ------------------------------------------------------------

    def restore_state(self, definitions=(), instances=(), farms=(), anchors=(),
                      models: dict[str, str] | None = None) -> None:
        """Re-install persisted projections (ledger state imports separately)."""
        with self._lock:
            for d in definitions:
                definition = WorkflowDefinition.from_dict(d)
                self._definitions[(definition.workflow_id, definition.version)] = \
                    definition
            for i in instances:
                instance = WorkflowInstance.from_dict(i)
                self._instances[instance.instance_id] = instance
            for f in farms:
                efr = ElectronicFieldRecord.from_dict(f)
                self._farms[efr.farm_id] = efr
            for a in anchors:
                anchor = DocumentAnchor(
                    anchor_id=a["anchor_id"], instance_id=a["instance_id"],
                    slot=a["slot"], off_chain_uri=a["off_chain_uri"],
                    digest=a["digest"], size=a["size"])
                self._anchors[anchor.anchor_id] = anchor
            if models:
                self._models.update(models)
            self._seq += len(self._instances) + len(self._anchors)

    # -- audit cross-checks ----------------------------------------------------------

    def committed_tx_count(self, instance_id: str) -> int:
        """VALID workflow transactions that wrote this instance's key."""
        key = self._instance_key(instance_id)
        count = 0
        for block in self.ledger.blocks(self.channel_id):
            for tx in block.txs:
                if tx.validation_status is TxStatus.VALID and any(
                        k == key for k, _ in tx.proposal.write_set):
                    count += 1
        return count
