#!/usr/bin/env python3
"""Record a gateway response corpus for the dashboard's fixture server.

Seeds the standard demo network, drives the real HTTP gateway in-process
and captures the responses the dashboard consumes, plus a session table
and the workflow definition so the fixture server can gate actions the
same way the gateway does.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from adw.gateway import create_app
from adw.identity import token_to_string
from adw.network import Network
from adw.workflow import load_default_definition

OUT = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "corpus.json"


def main() -> int:
    network = Network(deployment_secret=b"fixture-recorder")
    seeded = network.seed_demo(seed=11, n_farms=12, n_events=5000)
    client = TestClient(create_app(network))
    tokens = seeded["tokens"]

    def bearer(role):
        return {"Authorization": f"Bearer {token_to_string(tokens[role])}"}

    def get(path, role):
        response = client.get(path, headers=bearer(role))
        assert response.status_code == 200, (path, response.status_code)
        return response.json()

    sessions = {}
    for role, token in tokens.items():
        if role == "soe":
            continue
        sessions[f"fixture-token-{role}"] = {
            "user_id": token.user_id, "org_id": token.org_id,
            "roles": sorted(token.roles), "role": role,
        }

    # instances parked at each step for the role x step contract walk
    agent_headers = bearer("agent")
    parked = {}
    walk = [[9.4, 8.4], [9.4009, 8.4], [9.4009, 8.4012], [9.4, 8.4012]]
    base_booking = {"boundary_walk": walk, "primary_crop": "maize",
                    "secondary_crop": "beans", "service_type": "ploughing"}
    schedule_payload = {"scheduled_date": "2020-06-15", "tractor_id": "T001",
                        "operator_id": "op001"}
    stages = {
        "at_schedule": [],
        "at_confirm": [("schedule", schedule_payload, "fleet_manager")],
        "at_payment": [("schedule", schedule_payload, "fleet_manager"),
                       ("confirm_service", {"serviced_area_ha": 2.0},
                        "supervisor")],
        "completed": [("schedule", schedule_payload, "fleet_manager"),
                      ("confirm_service", {"serviced_area_ha": 2.0},
                       "supervisor"),
                      ("approve_payment", {"amount": 60.0}, "financier")],
    }
    for name, actions in stages.items():
        created = client.post("/bookings",
                              json={**base_booking, "farm_id": f"FIX-{name}"},
                              headers=agent_headers)
        assert created.status_code == 201
        instance_id = created.json()["instance_id"]
        for action, payload, role in actions:
            response = client.post(f"/instances/{instance_id}/actions",
                                   json={"action": action, "payload": payload},
                                   headers=bearer(role))
            assert response.status_code == 200, response.text
        parked[name] = instance_id

    corpus = {
        "recorded_with_seed": 11,
        "sessions": sessions,
        "definition": load_default_definition().to_dict(),
        "action_payloads": {
            "schedule": schedule_payload,
            "confirm_service": {"serviced_area_ha": 2.0},
            "approve_payment": {"amount": 60.0},
        },
        "parked_instances": parked,
        "responses": {},
    }

    record = corpus["responses"]
    record["/healthz"] = client.get("/healthz").json()
    record["/bookings"] = get("/bookings", "supervisor")
    trio_date = seeded["trio"]["date"]
    record[f"/clusters?date={trio_date}"] = get(
        f"/clusters?date={trio_date}", "fleet_manager")
    assign = client.post("/plans/assign", json={"date": trio_date},
                         headers=bearer("fleet_manager"))
    assert assign.status_code == 200
    record[f"POST /plans/assign {trio_date}"] = assign.json()
    record["/clusters?date=2031-01-01"] = get(
        "/clusters?date=2031-01-01", "fleet_manager")
    util = seeded["utilization"]
    record[f"/tractors/{util['tractor_id']}/utilization"
           f"?from={util['days'][0]}&to={util['days'][1]}"] = get(
        f"/tractors/{util['tractor_id']}/utilization"
        f"?from={util['days'][0]}&to={util['days'][1]}", "financier")
    record[f"/tractors/{util['tractor_id']}/utilization"
           "?from=2031-01-01&to=2031-01-02"] = get(
        f"/tractors/{util['tractor_id']}/utilization"
        "?from=2031-01-01&to=2031-01-02", "financier")
    for farm_id in seeded["trio"]["farm_ids"]:
        record[f"/farms/{farm_id}"] = get(f"/farms/{farm_id}", "agent")
        record[f"/farms/{farm_id}/boundary"] = get(
            f"/farms/{farm_id}/boundary", "agent")
    for name, instance_id in parked.items():
        record[f"/instances/{instance_id}"] = get(
            f"/instances/{instance_id}", "supervisor")

    instance_states = {}
    for name, instance_id in parked.items():
        view = record[f"/instances/{instance_id}"]
        instance_states[instance_id] = {
            "current_step_index": view["current_step_index"],
            "status": view["status"],
        }
    corpus["instance_states"] = instance_states
    corpus["trio_date"] = trio_date
    corpus["utilization_fixture"] = util

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(corpus, indent=1, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes, "
          f"{len(record)} recorded responses)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
