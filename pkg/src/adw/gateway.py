"""HTTP gateway: the JSON face of the platform.

Every mutating endpoint needs a bearer token and lands at least one
committed ledger transaction; the tx id comes back in the response so
clients can audit.  Authorization decisions delegate to the workflow
engine -- there is no separate gateway-side rule set to drift out of sync.
"""

from __future__ import annotations

import base64
import binascii
import json
from datetime import date, datetime, timezone
from typing import Optional

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from . import errors
from .geo import BoundaryPolygon, boundary_geojson
from .identity import AuthToken, token_from_string, token_to_string
from .network import Network
from .workflow import InstanceStatus

ERROR_STATUS = {
    errors.Unauthorized: 403,
    errors.NotMember: 403,
    errors.ExpiredToken: 401,
    errors.BadSignature: 401,
    errors.OutOfOrder: 409,
    errors.InstanceClosed: 409,
    errors.MissingInput: 400,
    errors.MalformedProposal: 400,
    errors.InvalidDefinition: 400,
    errors.BadConfig: 400,
    errors.InvalidSpec: 400,
    errors.UnparseableMessage: 400,
    errors.UnknownChannel: 404,
    errors.UnknownOrg: 404,
    errors.UnknownUser: 404,
    errors.UnknownInstance: 404,
    errors.UnknownFarm: 404,
    errors.UnknownTractor: 404,
    errors.UnknownModel: 404,
    errors.UnknownEventType: 400,
    errors.UnknownSchema: 400,
    errors.UnknownSlot: 400,
    errors.InfeasibleSkill: 409,
    errors.InsufficientWeatherData: 409,
    errors.NoSaturation: 404,
}


def _error_response(exc: errors.AdwError) -> JSONResponse:
    status = ERROR_STATUS.get(type(exc), 500)
    return JSONResponse(status_code=status,
                        content={"code": exc.code, "message": exc.message})


def instance_view(network: Network, instance) -> dict:
    view = instance.to_dict()
    view["audit_trail"] = [r.to_dict() for r in instance.history]
    return view


def create_app(network: Network) -> FastAPI:
    app = FastAPI(title="adw-gateway", docs_url=None, redoc_url=None)

    @app.exception_handler(errors.AdwError)
    async def handle_adw_error(request: Request, exc: errors.AdwError):
        return _error_response(exc)

    def bearer(request: Request) -> AuthToken:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise errors.Unauthorized("missing bearer token")
        token = token_from_string(header[7:].strip())
        return network.identity.verify_token(token)

    def authorize(token: AuthToken, kind: str, resource_id: str | None = None):
        if not network.engine.authorize_read(token, kind, resource_id):
            raise errors.Unauthorized(f"role may not read {kind}")

    # -- health ----------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "channels": network.ledger.channels(),
            "height": {c: network.ledger.height(c)
                       for c in network.ledger.channels()},
            "orgs": [o.org_id for o in network.identity.orgs()],
            "instances": len(network.engine.instances()),
            "topics": network.fip.log.topics(),
        }

    # -- auth -------------------------------------------------------------------

    @app.post("/auth/token")
    async def issue_token(request: Request):
        body = await request.json()
        try:
            secret = bytes.fromhex(body.get("enrollment_secret", ""))
        except (ValueError, binascii.Error):
            raise errors.BadSignature("enrollment_secret must be hex")
        credential = network.identity.authenticate(body["user_id"], secret)
        ttl = float(body.get("ttl_seconds", 3600))
        token = network.identity.issue_token(credential, ttl_seconds=ttl)
        return {"token": token_to_string(token),
                "user_id": token.user_id, "org_id": token.org_id,
                "roles": sorted(token.roles), "expires_at": token.expires_at}

    # -- bookings and workflow ----------------------------------------------------

    @app.post("/bookings", status_code=201)
    async def create_booking(request: Request, token: AuthToken = Depends(bearer)):
        body = await request.json()
        farm_id = body.get("farm_id")
        if not farm_id:
            raise errors.MissingInput("farm_id required")
        payload = {k: v for k, v in body.items() if k != "farm_id"}
        workflow_id = payload.pop("workflow_id", "booking")
        instance = network.engine.instantiate(workflow_id, farm_id, payload, token)
        return {"instance_id": instance.instance_id,
                "booking_id": instance.booking_id,
                "farm_id": instance.farm_id,
                "status": instance.status.value,
                "current_step_index": instance.current_step_index,
                "tx_id": instance.history[0].tx_id}

    @app.get("/bookings")
    def list_bookings(status: Optional[str] = Query(default=None),
                      token: AuthToken = Depends(bearer)):
        wanted = InstanceStatus(status) if status else None
        out = []
        for instance in network.engine.instances(wanted):
            if not network.engine.authorize_read(token, "instance",
                                                 instance.instance_id):
                continue
            out.append({
                "instance_id": instance.instance_id,
                "booking_id": instance.booking_id,
                "farm_id": instance.farm_id,
                "status": instance.status.value,
                "current_step_index": instance.current_step_index,
                "service_type": instance.booking.get("service_type"),
                "scheduled_date": instance.booking.get("scheduled_date"),
                "tractor_id": instance.booking.get("tractor_id"),
                "flags": list(instance.flags),
            })
        return {"bookings": out}

    @app.post("/instances/{instance_id}/actions")
    async def execute_action(instance_id: str, request: Request,
                             token: AuthToken = Depends(bearer)):
        body = await request.json()
        action = body.get("action")
        if not action:
            raise errors.MissingInput("action required")
        payload = body.get("payload", {})
        documents = {}
        for slot, encoded in (body.get("documents") or {}).items():
            documents[slot] = base64.b64decode(encoded)
        instance = network.engine.execute_action(instance_id, action, token,
                                                 payload, documents or None)
        view = instance_view(network, instance)
        view["tx_id"] = instance.history[-1].tx_id
        return view

    @app.get("/instances/{instance_id}")
    def get_instance(instance_id: str, token: AuthToken = Depends(bearer)):
        authorize(token, "instance", instance_id)
        instance = network.engine.instance(instance_id)
        return instance_view(network, instance)

    # -- events ---------------------------------------------------------------------

    @app.post("/events/batch")
    async def ingest_events(request: Request, token: AuthToken = Depends(bearer)):
        content_type = request.headers.get("content-type", "")
        raw = await request.body()
        if "json" in content_type and raw.lstrip()[:1] == b"[":
            events = json.loads(raw)
        else:
            events = raw  # JSON Lines
        receipt = network.fip.ingest(events, token)
        return {"batch_id": receipt.batch_id,
                "accepted": receipt.accepted,
                "rejected": [{"index": i, "reason": r} for i, r in receipt.rejected],
                "anchor_tx_id": receipt.anchor_tx_id}

    @app.get("/events/batches/{batch_id}")
    def get_batch_anchor(batch_id: str, token: AuthToken = Depends(bearer)):
        authorize(token, "raw_events")
        if batch_id not in network.fip.batches():
            return JSONResponse(status_code=404, content={
                "code": "UNKNOWN_BATCH", "message": batch_id})
        return {"batch_id": batch_id,
                "verified": network.fip.verify_anchor(batch_id)}

    # -- farms and analytics ----------------------------------------------------------

    @app.get("/farms/{farm_id}")
    def get_farm(farm_id: str, token: AuthToken = Depends(bearer)):
        authorize(token, "farm", farm_id)
        efr = network.engine.farm(farm_id)
        if efr is None:
            raise errors.UnknownFarm(farm_id)
        return efr.to_dict()

    @app.get("/farms/{farm_id}/boundary")
    def get_boundary(farm_id: str, token: AuthToken = Depends(bearer)):
        authorize(token, "boundary", farm_id)
        cached = network.boundaries.get(farm_id)
        if cached is not None:
            return boundary_geojson(farm_id, cached)
        result = network.detect_farm_boundary(farm_id)
        if isinstance(result, BoundaryPolygon):
            return boundary_geojson(farm_id, result)
        return JSONResponse(status_code=404, content={
            "code": "UNDETECTABLE", "message": result.reason})

    @app.get("/clusters")
    def get_clusters(date_: Optional[str] = Query(default=None, alias="date"),
                     token: AuthToken = Depends(bearer)):
        authorize(token, "clusters")
        on_date = date.fromisoformat(date_) if date_ else None
        plan = network.cluster_plan(on_date)
        payload = plan.to_dict()
        for cluster in payload["clusters"]:
            members = []
            for booking_id in cluster["booking_ids"]:
                instance = next((i for i in network.engine.instances()
                                 if i.booking_id == booking_id), None)
                if instance is None:
                    continue
                feature = None
                polygon = network.boundaries.get(instance.farm_id)
                if polygon is not None:
                    feature = boundary_geojson(instance.farm_id, polygon)
                members.append({"booking_id": booking_id,
                                "farm_id": instance.farm_id,
                                "instance_id": instance.instance_id,
                                "boundary": feature})
            cluster["members"] = members
        return payload

    @app.post("/plans/assign")
    async def post_assignment(request: Request, token: AuthToken = Depends(bearer)):
        authorize(token, "plan")
        raw = await request.body()
        body = json.loads(raw) if raw.strip() else {}
        on_date = date.fromisoformat(body["date"]) if body.get("date") else None
        clusters, assignment = network.assignment_plan(on_date)
        operators = {a.tractor_id: a.operator_id for a in assignment.assignments}
        return {"clusters": clusters.to_dict(),
                "assignment": assignment.to_dict(),
                "operators": operators}

    @app.get("/tractors/{tractor_id}/utilization")
    def get_utilization(tractor_id: str,
                        from_: Optional[str] = Query(default=None, alias="from"),
                        to: Optional[str] = Query(default=None),
                        token: AuthToken = Depends(bearer)):
        authorize(token, "utilization")
        period_start = date.fromisoformat(from_) if from_ else date(2020, 1, 1)
        period_end = date.fromisoformat(to) if to else date(2021, 12, 31)
        report = network.utilization(tractor_id, period_start, period_end)
        return report.to_dict()

    # -- bench ------------------------------------------------------------------------

    @app.get("/bench/runs/{run_id}")
    def get_bench_run(run_id: str, token: AuthToken = Depends(bearer)):
        run = network.bench_runs.get(run_id)
        if run is None and network.data_dir is not None:
            path = network.data_dir / "bench" / f"{run_id}.json"
            if path.exists():
                run = json.loads(path.read_text(encoding="utf-8"))
                network.bench_runs[run_id] = run
        if run is None:
            return JSONResponse(status_code=404, content={
                "code": "UNKNOWN_RUN", "message": f"no bench run {run_id}"})
        return run

    return app


def serve(network: Network, host: str = "127.0.0.1", port: int | None = None):
    """Run the gateway under uvicorn (blocking)."""
    import uvicorn
    app = create_app(network)
    uvicorn.run(app, host=host, port=port or network.config.port,
                log_level="warning")
