import random

import pytest

from adw.errors import (InstanceClosed, InvalidDefinition, MissingInput,
                        OutOfOrder, Unauthorized, UnknownModel, UnknownSlot)
from adw.ledger import TxStatus
from adw.workflow import (InstanceStatus, Step, WorkflowDefinition,
                          WorkflowEngine, load_default_definition)


def square_walk(lat0=9.05, lon0=8.10, n=42):
    # ~42-point walk around a roughly 140 m square
    import math
    points = []
    for i in range(n):
        angle = 2 * math.pi * i / n
        points.append([lat0 + 0.00065 * math.sin(angle),
                       lon0 + 0.00065 * math.cos(angle)])
    return points


BOOKING_PAYLOAD = {
    "boundary_walk": square_walk(),
    "primary_crop": "maize",
    "secondary_crop": "beans",
    "service_type": "ploughing",
}


@pytest.fixture
def engine(ledger, identity, clock):
    published = []
    eng = WorkflowEngine(ledger, identity, publish=lambda t, e: published.append((t, e)),
                         channel_id="agrinet", clock=clock)
    eng.published = published
    return eng


@pytest.fixture
def tokens(identity):
    users = {
        "agent": identity.enroll_user("coop1", "agent1", {"agent"}),
        "farmer": identity.enroll_user("coop1", "farmer1", {"farmer"}),
        "supervisor": identity.enroll_user("coop1", "super1", {"supervisor"}),
        "fleet_manager": identity.enroll_user("fleet1", "mgr1", {"fleet_manager"}),
        "operator": identity.enroll_user("fleet1", "op1", {"operator"}),
        "financier": identity.enroll_user("platform1", "fin1", {"financier"}),
        "admin": identity.enroll_user("platform1", "root", {"admin"}),
    }
    return {role: identity.issue_token(c, ttl_seconds=10_000_000)
            for role, c in users.items()}


@pytest.fixture
def registered(engine, tokens, ledger, identity):
    for credential in identity.users():
        ledger.register_user(credential.user_id, credential.org_id)
    engine.register_workflow(load_default_definition(), tokens["admin"])
    return engine


def run_happy_path(engine, tokens, farm_id="F9"):
    instance = engine.instantiate("booking", farm_id, dict(BOOKING_PAYLOAD),
                                  tokens["agent"])
    engine.execute_action(instance.instance_id, "schedule", tokens["fleet_manager"],
                          {"scheduled_date": "2020-05-12", "tractor_id": "T1",
                           "operator_id": "op1"})
    engine.execute_action(instance.instance_id, "confirm_service", tokens["supervisor"],
                          {"serviced_area_ha": 2.1})
    engine.execute_action(instance.instance_id, "approve_payment", tokens["financier"],
                          {"amount": 63.0}, documents={"invoice": b"INV-001 63.00"})
    return instance


class TestRegistration:
    def test_default_definition_registers_v1(self, registered):
        definition = registered.definition("booking")
        assert definition.version == 1
        assert [s.action_name for s in definition.steps] == [
            "create_booking", "schedule", "confirm_service", "approve_payment"]
        assert [s.required_role for s in definition.steps] == [
            "agent", "fleet_manager", "supervisor", "financier"]

    def test_duplicate_action_names(self, engine, tokens):
        bad = WorkflowDefinition("dup", 1, (
            Step("go", "agent"), Step("go", "supervisor")))
        with pytest.raises(InvalidDefinition):
            engine.register_workflow(bad, tokens["admin"])

    def test_non_admin_rejected(self, engine, tokens):
        with pytest.raises(Unauthorized):
            engine.register_workflow(load_default_definition(), tokens["agent"])

    def test_prior_versions_stay_queryable(self, registered, tokens):
        v2 = WorkflowDefinition("booking", 2, (Step("create_booking", "agent"),))
        registered.register_workflow(v2, tokens["admin"])
        assert registered.definition("booking", 1).version == 1
        assert registered.definition("booking").version == 2


class TestInstantiate:
    def test_booking_goes_active_at_index_1(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        assert instance.status is InstanceStatus.ACTIVE
        assert instance.current_step_index == 1
        assert len(instance.history) == 1
        assert instance.history[0].action_name == "create_booking"
        status = registered.ledger.tx_status("agrinet", instance.history[0].tx_id)
        assert status is TxStatus.VALID
        assert len(BOOKING_PAYLOAD["boundary_walk"]) == 42

    def test_missing_service_type(self, registered, tokens):
        payload = {k: v for k, v in BOOKING_PAYLOAD.items() if k != "service_type"}
        with pytest.raises(MissingInput):
            registered.instantiate("booking", "F9", payload, tokens["agent"])

    def test_wrong_role(self, registered, tokens):
        with pytest.raises(Unauthorized):
            registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                   tokens["farmer"])


class TestExecuteAction:
    def test_out_of_order(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        with pytest.raises(OutOfOrder):
            registered.execute_action(instance.instance_id, "confirm_service",
                                      tokens["supervisor"], {"serviced_area_ha": 2})

    def test_wrong_role_on_payment(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        registered.execute_action(instance.instance_id, "schedule",
                                  tokens["fleet_manager"],
                                  {"scheduled_date": "d", "tractor_id": "T1",
                                   "operator_id": "op1"})
        registered.execute_action(instance.instance_id, "confirm_service",
                                  tokens["supervisor"], {"serviced_area_ha": 2})
        with pytest.raises(Unauthorized):
            registered.execute_action(instance.instance_id, "approve_payment",
                                      tokens["supervisor"], {"amount": 10})

    def test_happy_path_end_to_end(self, registered, tokens):
        instance = run_happy_path(registered, tokens)
        assert instance.status is InstanceStatus.COMPLETED
        assert instance.current_step_index == 4
        assert len(instance.history) == 4
        # audit trail cross-check against the ledger
        for record in instance.history:
            assert registered.ledger.tx_status("agrinet", record.tx_id) is TxStatus.VALID
        assert registered.committed_tx_count(instance.instance_id) == len(instance.history)
        # terminal step published a payment event
        topics = [t for t, _ in registered.published]
        assert "payments" in topics

    def test_closed_instance_rejects_actions(self, registered, tokens):
        instance = run_happy_path(registered, tokens)
        with pytest.raises(InstanceClosed):
            registered.execute_action(instance.instance_id, "approve_payment",
                                      tokens["financier"], {"amount": 1})

    def test_cancel(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        registered.cancel(instance.instance_id, tokens["agent"])
        assert instance.status is InstanceStatus.CANCELLED
        with pytest.raises(InstanceClosed):
            registered.execute_action(instance.instance_id, "schedule",
                                      tokens["fleet_manager"],
                                      {"scheduled_date": "d", "tractor_id": "T1",
                                       "operator_id": "o"})

    def test_concurrent_actions_resolve_via_mvcc(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        payload = {"scheduled_date": "d", "tractor_id": "T1", "operator_id": "op1"}
        first = registered.prepare_action(instance.instance_id, "schedule",
                                          tokens["fleet_manager"], payload)
        second = registered.prepare_action(instance.instance_id, "schedule",
                                           tokens["fleet_manager"],
                                           {**payload, "tractor_id": "T2"})
        tx1 = registered.submit_prepared(first)
        tx2 = registered.submit_prepared(second)
        registered.ledger.drain("agrinet")
        statuses = {registered.ledger.tx_status("agrinet", tx1),
                    registered.ledger.tx_status("agrinet", tx2)}
        assert statuses == {TxStatus.VALID, TxStatus.MVCC_CONFLICT}
        synced = registered.sync_instance(instance.instance_id)
        assert synced.current_step_index == 2


class TestDocuments:
    def test_anchor_and_verify(self, registered, tokens):
        instance = run_happy_path(registered, tokens)
        anchor = registered.anchors(instance.instance_id)[0]
        stored = registered.stored_document(anchor)
        assert registered.verify_document(anchor, stored)
        assert not registered.verify_document(anchor, stored[:-1] + b"X")

    def test_anchor_to_undeclared_slot(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        with pytest.raises(UnknownSlot):
            registered.anchor_document(instance.instance_id, "blueprints", b"x",
                                       tokens["agent"])

    def test_anchor_survives_restart_of_store(self, registered, tokens, tmp_path):
        from adw.store import FileByteStore
        registered.docstore = FileByteStore(tmp_path / "docs")
        instance = run_happy_path(registered, tokens)
        anchor = registered.anchors(instance.instance_id)[0]
        reopened = FileByteStore(tmp_path / "docs")
        data = reopened.get(anchor.off_chain_uri.removeprefix("store://"))
        assert registered.verify_document(anchor, data)


class TestAuthorizeRead:
    def test_participant_reads_instance(self, registered, tokens):
        instance = run_happy_path(registered, tokens)
        assert registered.authorize_read(tokens["supervisor"], "instance",
                                         instance.instance_id)

    def test_financier_denied_raw_events(self, registered, tokens):
        assert not registered.authorize_read(tokens["financier"], "raw_events")

    def test_fleet_manager_reads_raw_events(self, registered, tokens):
        assert registered.authorize_read(tokens["fleet_manager"], "raw_events")

    def test_foreign_channel_agent_denied(self, registered, tokens, identity, ledger):
        ledger.create_channel("coop2net", ["fleet1", "platform1"])
        foreign = identity.enroll_user("fleet1", "other_agent", {"agent"})
        ledger.register_user("other_agent", "fleet1")
        foreign_token = identity.issue_token(foreign)
        # a coop2 instance lives on a channel coop1's org is not a member of
        engine2 = WorkflowEngine(registered.ledger, registered.identity,
                                 channel_id="coop2net", clock=registered.clock)
        engine2.register_workflow(load_default_definition(), tokens["admin"])
        instance = engine2.instantiate("booking", "F77", dict(BOOKING_PAYLOAD),
                                       foreign_token)
        reader = registered.identity.enroll_user("coop1", "coop_agent9", {"agent"})
        registered.ledger.register_user("coop_agent9", "coop1")
        reader_token = registered.identity.issue_token(reader)
        assert not engine2.authorize_read(reader_token, "instance",
                                          instance.instance_id)


class TestModels:
    def test_register_and_verify(self, registered, tokens):
        registered.register_model("boundary-detector", b"MODEL v1", tokens["admin"])
        assert registered.verify_model_artifact("boundary-detector", b"MODEL v1")
        assert not registered.verify_model_artifact("boundary-detector", b"MODEL v2")

    def test_unknown_model(self, registered):
        with pytest.raises(UnknownModel):
            registered.verify_model_artifact("nope", b"x")


class TestAcreageReview:
    def test_discrepancy_flags_instance(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        flagged = registered.review_acreage(instance.instance_id,
                                            detected_ha=2.0, estimated_ha=1.5)
        assert flagged
        assert "ACREAGE_DISCREPANCY" in instance.flags
        assert instance.status is InstanceStatus.ACTIVE  # flag, never reject

    def test_small_discrepancy_ok(self, registered, tokens):
        instance = registered.instantiate("booking", "F9", dict(BOOKING_PAYLOAD),
                                          tokens["agent"])
        assert not registered.review_acreage(instance.instance_id, 2.05, 2.0)
        assert instance.flags == []


class TestSequenceSafetyProperty:
    def test_random_interleavings(self, registered, tokens, rng):
        """Random valid/invalid attempts never corrupt step order or roles."""
        definition = registered.definition("booking")
        step_order = [s.action_name for s in definition.steps]
        role_of = {s.action_name: s.required_role for s in definition.steps}
        instances = [registered.instantiate("booking", f"F{i}", dict(BOOKING_PAYLOAD),
                                            tokens["agent"]) for i in range(12)]
        payloads = {
            "schedule": {"scheduled_date": "d", "tractor_id": "T1", "operator_id": "o"},
            "confirm_service": {"serviced_area_ha": 2.0},
            "approve_payment": {"amount": 10.0},
        }
        attempts = 0
        for _ in range(400):
            instance = rng.choice(instances)
            action = rng.choice(step_order[1:])
            role = rng.choice(list(tokens))
            attempts += 1
            try:
                registered.execute_action(instance.instance_id, action,
                                          tokens[role], payloads[action])
            except (OutOfOrder, Unauthorized, InstanceClosed, MissingInput):
                continue
        assert attempts == 400
        for instance in instances:
            names = [r.action_name for r in instance.history]
            assert names == step_order[:len(names)]
            for record in instance.history:
                assert record.actor_role == role_of[record.action_name]
            if instance.status is InstanceStatus.COMPLETED:
                assert names == step_order
            assert registered.committed_tx_count(instance.instance_id) == len(names)
