import json
import math
from datetime import date

import pytest

from adw.corpus import generate_corpus
from adw.errors import Unauthorized, UnknownEventType, UnknownFarm, UnparseableMessage
from adw.fip import (Broker, EventLog, FipService, SyntheticContextSource,
                     haversine_m, parse_ts)
from adw.geo import Booking


@pytest.fixture
def soe_token(identity):
    credential = identity.enroll_user("platform1", "soe1", {"admin"})
    return identity.issue_token(credential, ttl_seconds=10_000_000)


@pytest.fixture
def fip(identity, ledger, soe_token):
    ledger.register_user("soe1", "platform1")
    return FipService(identity, ledger, channel_id="agrinet")


GOOD_EVENTS = [
    {"tractor_id": "T1", "ts": "2020-05-04T07:00:00Z", "lat": 9.02, "lon": 8.01, "seq": 1},
    {"tractor_id": "T1", "ts": "2020-05-04T07:00:02Z", "lat": 9.0201, "lon": 8.0101, "seq": 2},
    {"tractor_id": "T2", "ts": "2020-05-04T07:00:00Z", "lat": 9.03, "lon": 8.02, "seq": 1,
     "operator": "op7"},
]


class TestIngest:
    def test_batch_accepted_and_anchored(self, fip, soe_token, ledger):
        receipt = fip.ingest([dict(e) for e in GOOD_EVENTS], soe_token)
        assert receipt.accepted == 3
        assert receipt.rejected == []
        assert receipt.anchor_tx_id is not None
        assert fip.verify_anchor(receipt.batch_id)

    def test_missing_lat_rejected(self, fip, soe_token):
        events = [dict(GOOD_EVENTS[0])]
        del events[0]["lat"]
        receipt = fip.ingest(events, soe_token)
        assert receipt.accepted == 0
        assert receipt.rejected == [(0, "MISSING_FIELD:lat")]

    def test_resubmit_all_duplicates(self, fip, soe_token):
        fip.ingest([dict(e) for e in GOOD_EVENTS], soe_token)
        receipt = fip.ingest([dict(e) for e in GOOD_EVENTS], soe_token)
        assert receipt.accepted == 0
        assert all(reason == "DUPLICATE" for _, reason in receipt.rejected)
        assert len(receipt.rejected) == 3

    def test_conservation(self, fip, soe_token):
        events = [dict(e) for e in GOOD_EVENTS]
        events.append({"tractor_id": "T3", "ts": "bad-ts", "lat": 1, "lon": 1, "seq": 1})
        events.append({"tractor_id": "T3", "lat": 1, "lon": 1, "seq": 2})
        receipt = fip.ingest(events, soe_token)
        assert receipt.accepted + len(receipt.rejected) == len(events)

    def test_unauthorized_source(self, fip, identity, ledger):
        farmer = identity.enroll_user("coop1", "f1", {"farmer"})
        ledger.register_user("f1", "coop1")
        token = identity.issue_token(farmer)
        with pytest.raises(Unauthorized):
            fip.ingest([dict(GOOD_EVENTS[0])], token)

    def test_unknown_event_type(self, fip, soe_token):
        with pytest.raises(UnknownEventType):
            fip.ingest([{}], soe_token, event_type="alien.event")

    def test_operator_deidentified(self, fip, soe_token, identity):
        fip.ingest([dict(GOOD_EVENTS[2])], soe_token)
        stored = [json.loads(raw) for raw in fip.replay()]
        assert stored[0]["operator"] == identity.correlation_id("op7")
        assert "op7" not in json.dumps(stored)

    def test_jsonl_input(self, fip, soe_token):
        lines = "\n".join(json.dumps(e) for e in GOOD_EVENTS)
        receipt = fip.ingest(lines, soe_token)
        assert receipt.accepted == 3

    def test_lat_out_of_range_rejected(self, fip, soe_token):
        event = dict(GOOD_EVENTS[0])
        event["lat"] = 95.0
        receipt = fip.ingest([event], soe_token)
        assert receipt.rejected == [(0, "BAD_FIELD:lat")]

    def test_replay_byte_identical(self, fip, soe_token):
        fip.ingest([dict(e) for e in GOOD_EVENTS], soe_token)
        first = fip.replay()
        second = fip.replay()
        assert first == second
        assert all(isinstance(raw, bytes) for raw in first)

    def test_per_tractor_order_in_replay(self, fip, soe_token):
        shuffled = [dict(GOOD_EVENTS[1]), dict(GOOD_EVENTS[2]), dict(GOOD_EVENTS[0])]
        fip.ingest(shuffled, soe_token)
        per_tractor = {}
        for raw in fip.replay():
            event = json.loads(raw)
            ts = event["ts"]
            assert per_tractor.get(event["tractor_id"], -1) <= ts
            per_tractor[event["tractor_id"]] = ts

    def test_log_restart_replays_identically(self, identity, ledger, soe_token, tmp_path):
        ledger.register_user("soe1", "platform1")
        fip1 = FipService(identity, ledger, log_dir=tmp_path / "log")
        fip1.ingest([dict(e) for e in GOOD_EVENTS], soe_token)
        stream = fip1.replay()
        log2 = EventLog(tmp_path / "log")
        assert log2.read("events.gps", 0) == stream


class TestPubSub:
    def test_poll_cursor_advance(self, fip, soe_token):
        for i in range(5):
            fip.broker.publish("bookings", {"event_type": "booking.status", "n": i})
        sub = fip.broker.subscribe(soe_token, "bookings")
        first = fip.broker.poll(sub, max_n=3)
        assert [e["n"] for e in first] == [0, 1, 2]
        assert sub.cursor == 3
        second = fip.broker.poll(sub, max_n=3)
        assert [e["n"] for e in second] == [3, 4]
        assert sub.cursor == 5

    def test_replay_from_zero(self, fip, soe_token):
        for i in range(4):
            fip.broker.publish("bookings", {"n": i})
        sub1 = fip.broker.subscribe(soe_token, "bookings")
        sub2 = fip.broker.subscribe(soe_token, "bookings")
        assert fip.broker.poll(sub1, 100) == fip.broker.poll(sub2, 100)

    def test_filter_by_tractor(self, fip, soe_token):
        for tid in ("T1", "T2", "T1"):
            fip.broker.publish("events.gps", {"tractor_id": tid})
        sub = fip.broker.subscribe(soe_token, "events.gps", tractor_id="T1")
        events = fip.broker.poll(sub, 10)
        assert len(events) == 2

    def test_acl_denies_financier_raw_gps(self, identity, ledger):
        def deny_financier(token, topic):
            return not (topic == "events.gps" and "financier" in token.roles)

        fip = FipService(identity, ledger=None, authorize_topic=deny_financier)
        fin = identity.enroll_user("platform1", "fin9", {"financier"})
        token = identity.issue_token(fin)
        with pytest.raises(Unauthorized):
            fip.broker.subscribe(token, "events.gps")
        fip.broker.subscribe(token, "payments")  # allowed topic


class TestCorrelate:
    def mk_booking(self, booking_id, farm_id, lat, lon, start, end):
        return Booking(booking_id=booking_id, farm_id=farm_id, location=(lat, lon),
                       hectares=2.0, service_type="ploughing", skill="plough",
                       window=(start, end))

    def test_match_within_radius_and_window(self, fip):
        # ~80 m north of the farm
        farm_lat, farm_lon = 9.02, 8.01
        event = {"ts": 1000.0, "lat": farm_lat + 80 / 111195.0, "lon": farm_lon}
        bookings = [self.mk_booking("B1", "F9", farm_lat, farm_lon, 0.0, 2000.0)]
        match = fip.correlate(event, bookings)
        assert match is not None
        assert match.farm_id == "F9"
        assert 75 <= match.distance_m <= 85

    def test_outside_window_unmatched(self, fip):
        event = {"ts": 5000.0, "lat": 9.0207, "lon": 8.01}
        bookings = [self.mk_booking("B1", "F9", 9.02, 8.01, 0.0, 2000.0)]
        assert fip.correlate(event, bookings) is None

    def test_outside_radius_unmatched(self, fip):
        event = {"ts": 100.0, "lat": 9.02 + 700 / 111195.0, "lon": 8.01}
        bookings = [self.mk_booking("B1", "F9", 9.02, 8.01, 0.0, 2000.0)]
        assert fip.correlate(event, bookings) is None

    def test_tie_breaks(self, fip):
        # strictly nearer farm wins even by centimetres
        event = {"ts": 100.0, "lat": 9.02, "lon": 8.01}
        nearer = self.mk_booking("B2", "F2", 9.02 + 100.0 / 111195.0, 8.01, 0.0, 200.0)
        farther = self.mk_booking("B1", "F1", 9.02 + 100.5 / 111195.0, 8.01, 0.0, 200.0)
        match = fip.correlate(event, [farther, nearer])
        assert match.farm_id == "F2"
        # exactly equal distance: lower farm id
        east = self.mk_booking("B3", "F8", 9.02, 8.01 + 1e-3, 0.0, 200.0)
        west = self.mk_booking("B4", "F5", 9.02, 8.01 - 1e-3, 0.0, 200.0)
        match = fip.correlate(event, [east, west])
        assert match.farm_id == "F5"

    def test_same_farm_earliest_window(self, fip):
        event = {"ts": 100.0, "lat": 9.02, "lon": 8.01}
        late = self.mk_booking("B9", "F1", 9.02, 8.01, 50.0, 200.0)
        early = self.mk_booking("B8", "F1", 9.02, 8.01, 0.0, 200.0)
        match = fip.correlate(event, [late, early])
        assert match.booking_id == "B8"

    def test_brute_force_agreement_small_corpus(self, fip, rng):
        corpus = generate_corpus(40, 4000, seed=99)
        bookings = corpus.bookings
        events = [{"ts": parse_ts(e["ts"]), "lat": e["lat"], "lon": e["lon"]}
                  for e in corpus.events[::10]]

        def brute_force(event):
            best = None
            for b in bookings:
                if not (b.window[0] <= event["ts"] <= b.window[1]):
                    continue
                # independent haversine formulation (law of cosines form)
                lat1, lon1 = math.radians(event["lat"]), math.radians(event["lon"])
                lat2, lon2 = math.radians(b.location[0]), math.radians(b.location[1])
                d = 6371000.0 * math.acos(min(1.0, max(-1.0,
                    math.sin(lat1) * math.sin(lat2)
                    + math.cos(lat1) * math.cos(lat2) * math.cos(lon2 - lon1))))
                if d > fip.vicinity_radius_m:
                    continue
                key = (d, b.farm_id, b.window[0], b.booking_id)
                if best is None or key < best:
                    best = key
            return None if best is None else (best[1], best[3])

        agreements = 0
        for event in events:
            mine = fip.correlate(event, bookings)
            oracle = brute_force(event)
            got = None if mine is None else (mine.farm_id, mine.booking_id)
            assert got == oracle
            agreements += 1
        assert agreements == len(events)


class TestEdi:
    def test_two_segment_message(self, fip):
        msg = ("BKS*B001*scheduled*2020-05-04T08:00:00Z~"
               "BKS*B002*confirmed*2020-05-04T09:00:00Z")
        events, rejections = fip.convert_edi(msg)
        assert len(events) == 2
        assert rejections == []
        assert events[0]["event_type"] == "booking.status"

    def test_mixed_valid_and_malformed(self, fip):
        msg = "GPS*T1*2020-05-04T08:00:00Z*9.02*8.01*5~GPS*T1*notadate*9*8*6"
        events, rejections = fip.convert_edi(msg)
        assert len(events) == 1
        assert len(rejections) == 1
        assert rejections[0][0] == 1

    def test_empty_message(self, fip):
        with pytest.raises(UnparseableMessage):
            fip.convert_edi("")

    def test_unknown_segment_counts_as_rejection(self, fip):
        events, rejections = fip.convert_edi(
            "XYZ*a*b~GPS*T1*2020-05-04T08:00:00Z*9.0*8.0*1")
        assert len(events) == 1
        assert rejections[0][1].startswith("UNKNOWN_SEGMENT")


class TestContext:
    def test_seven_day_range(self, fip):
        fip.set_farm_locator(lambda f: (9.02, 8.01) if f == "F9" else None)
        bundle = fip.pull_context("F9", date(2020, 5, 4), date(2020, 5, 10))
        assert len(bundle.samples) == 7
        assert len(bundle.tiles) == 7
        assert bundle.missing_days == []
        assert all(0.0 <= s.soil_moisture_index <= 1.0 for s in bundle.samples)

    def test_unknown_farm(self, fip):
        fip.set_farm_locator(lambda f: None)
        with pytest.raises(UnknownFarm):
            fip.pull_context("nope", date(2020, 5, 4), date(2020, 5, 5))

    def test_gap_reported_not_interpolated(self, identity):
        source = SyntheticContextSource(seed=1, coverage_start=date(2020, 5, 1),
                                        coverage_end=date(2020, 5, 6))
        fip = FipService(identity, ledger=None, context_source=source)
        fip.set_farm_locator(lambda f: (9.0, 8.0))
        bundle = fip.pull_context("F1", date(2020, 5, 4), date(2020, 5, 9))
        assert len(bundle.samples) == 3
        assert bundle.missing_days == [date(2020, 5, 7), date(2020, 5, 8),
                                       date(2020, 5, 9)]

    def test_deterministic_for_seed(self, identity):
        a = SyntheticContextSource(seed=42)
        b = SyntheticContextSource(seed=42)
        assert a.soil_moisture("cell_1_2", date(2020, 5, 4)) == \
            b.soil_moisture("cell_1_2", date(2020, 5, 4))
