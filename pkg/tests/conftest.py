import random

import pytest

from adw.identity import IdentityService, OrgKind
from adw.ledger import Ledger, LedgerConfig


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in RESULTS.items():
        terminalreporter.write_line(f"  {outcome}  {name}")


DEFAULT_ORGS = (
    ("coop1", "Booking agents cooperative", OrgKind.COOP_AGENTS),
    ("fleet1", "Tractor fleet services", OrgKind.FLEET),
    ("platform1", "Platform operator", OrgKind.PLATFORM),
)


class ManualClock:
    """Settable clock for deterministic submission/commit timing."""

    def __init__(self, start: float = 0.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, dt: float) -> float:
        self.now += dt
        return self.now


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def identity(clock):
    service = IdentityService(deployment_secret=b"test-secret", clock=clock)
    for org_id, name, kind in DEFAULT_ORGS:
        service.register_org(org_id, name, kind)
    return service


@pytest.fixture
def ledger(identity, clock):
    led = Ledger(clock=clock)
    for org_id, _, _ in DEFAULT_ORGS:
        led.register_org(org_id, identity.org_mac_key(org_id))
    led.create_channel("agrinet", [o for o, _, _ in DEFAULT_ORGS],
                       endorsement_policy=2, config=LedgerConfig(block_size=10))
    return led


@pytest.fixture
def rng():
    return random.Random(20200515)
