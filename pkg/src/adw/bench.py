"""Workload harness: send-rate x block-size sweeps over the ledger.

The harness drives the real submission, block-cutting and MVCC-validation
code under a simulated clock, so curves are deterministic and fast.  Time
costs come from a calibrated cost model rather than wall time:

    capacity(fill) = 1e6 / (validate_us + commit_us / fill)   [tx/s]

Endorsement happens client-side and is pipelined, so it adds latency but
not committer load.  A small queue penalty models validation slowing down
as unconfirmed transactions pile up, which is what bends the plateau
gently downward past saturation.  The defaults put the mean capacity over
the default block sizes at roughly 110 tx/s.

Latency for a transaction is commit-completion minus client submit time,
i.e. the moment the client would get its response back.
"""

from __future__ import annotations

import csv
import json
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .errors import InvalidSpec, IoFailure, NoSaturation
from .identity import IdentityService, OrgKind
from .ledger import Ledger, LedgerConfig, TxStatus
from .workflow import WorkflowEngine, load_default_definition

DEFAULT_RATES = tuple(range(20, 201, 20))
DEFAULT_BLOCK_SIZES = (10, 30, 50, 70)
SATURATION_FACTOR = 0.95


@dataclass(frozen=True)
class WorkloadSpec:
    send_rates: tuple[int, ...] = DEFAULT_RATES
    block_sizes: tuple[int, ...] = DEFAULT_BLOCK_SIZES
    block_timeout_ms: int = 500
    clients: int = 25
    txs_per_rate: int = 1000
    channels: int = 1
    orgs: int = 3
    peers_per_org: int = 1

    def validate(self) -> None:
        values = (list(self.send_rates) + list(self.block_sizes)
                  + [self.block_timeout_ms, self.clients, self.txs_per_rate,
                     self.channels, self.orgs, self.peers_per_org])
        if not self.send_rates or not self.block_sizes:
            raise InvalidSpec("send_rates and block_sizes must be non-empty")
        if any(v <= 0 for v in values):
            raise InvalidSpec("all workload parameters must be positive")
        if list(self.send_rates) != sorted(self.send_rates):
            raise InvalidSpec("send_rates must be ascending")


@dataclass(frozen=True)
class CostModel:
    endorse_us: float = 2000.0
    validate_us: float = 8400.0
    commit_us: float = 16000.0
    queue_penalty_us: float = 2.0

    def __post_init__(self):
        if min(self.endorse_us, self.validate_us, self.commit_us,
               self.queue_penalty_us) < 0:
            raise InvalidSpec("cost components must be >= 0")

    def capacity(self, avg_block_fill: float) -> float:
        """Committer throughput ceiling at a given average block fill."""
        return 1e6 / (self.validate_us + self.commit_us / avg_block_fill)

    @property
    def nominal_capacity(self) -> float:
        """Headline capacity: mean ceiling over the default block sizes.

        The defaults are calibration constants, not hardware claims; they
        put this figure at roughly 110 tx/s.
        """
        caps = [self.capacity(bs) for bs in DEFAULT_BLOCK_SIZES]
        return sum(caps) / len(caps)


@dataclass
class RunMetrics:
    send_rate: int
    block_size: int
    throughput_tps: float
    avg_latency_s: float
    min_latency_s: float
    max_latency_s: float
    p95_latency_s: float
    invalid: int
    blocks: int = 0
    timeout_cuts: int = 0

    def to_dict(self) -> dict:
        return {
            "send_rate": self.send_rate, "block_size": self.block_size,
            "throughput_tps": round(self.throughput_tps, 4),
            "avg_latency_s": round(self.avg_latency_s, 4),
            "min_latency_s": round(self.min_latency_s, 4),
            "max_latency_s": round(self.max_latency_s, 4),
            "p95_latency_s": round(self.p95_latency_s, 4),
            "invalid": self.invalid, "blocks": self.blocks,
            "timeout_cuts": self.timeout_cuts,
        }


class _SimClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self) -> float:
        return self.now


def _build_network(block_size: int, timeout_ms: int, orgs: int, clock):
    identity = IdentityService(deployment_secret=b"bench", clock=clock)
    ledger = Ledger(clock=clock)
    org_ids = []
    kinds = [OrgKind.COOP_AGENTS, OrgKind.FLEET, OrgKind.PLATFORM, OrgKind.FINANCIER]
    for i in range(orgs):
        org_id = f"org{i + 1}"
        identity.register_org(org_id, f"Org {i + 1}", kinds[i % len(kinds)])
        ledger.register_org(org_id, identity.org_mac_key(org_id))
        org_ids.append(org_id)
    ledger.create_channel("bench", org_ids, endorsement_policy=min(2, orgs),
                          config=LedgerConfig(block_size=block_size,
                                              block_timeout_ms=timeout_ms,
                                              num_orgs=orgs))
    engine = WorkflowEngine(ledger, identity, channel_id="bench", clock=clock)
    admin = identity.enroll_user(org_ids[-1], "bench-admin", {"admin"})
    ledger.register_user("bench-admin", org_ids[-1])
    roles = ["agent", "fleet_manager", "supervisor", "financier"]
    tokens = {}
    for index, role in enumerate(roles):
        org = org_ids[index % len(org_ids)]
        user = f"bench-{role}"
        identity.enroll_user(org, user, {role})
        ledger.register_user(user, org)
        tokens[role] = identity.issue_token(
            identity.credential(user), ttl_seconds=10 ** 9)
    tokens["admin"] = identity.issue_token(identity.credential("bench-admin"),
                                           ttl_seconds=10 ** 9)
    engine.register_workflow(load_default_definition(), tokens["admin"])
    return identity, ledger, engine, tokens


def _stage_instances(engine, tokens, count: int, rng: random.Random):
    """Pre-commit `count` fresh bookings whose next step is `schedule`."""
    payload = {
        "boundary_walk": [[9.05, 8.10], [9.051, 8.10], [9.051, 8.101]],
        "primary_crop": "maize", "secondary_crop": "beans",
        "service_type": "ploughing",
    }
    prepared = []
    for i in range(count):
        instance = engine.instantiate("booking", f"bench-farm-{i}", payload,
                                      tokens["agent"])
        action_payload = {
            "scheduled_date": "2020-05-12",
            "tractor_id": f"T{rng.randrange(100):03d}",
            "operator_id": f"op{rng.randrange(100):03d}",
        }
        prepared.append(engine.prepare_action(instance.instance_id, "schedule",
                                              tokens["fleet_manager"],
                                              action_payload))
    return prepared


def _simulate_run(rate: int, block_size: int, spec: WorkloadSpec,
                  cost: CostModel, seed: int) -> RunMetrics:
    clock = _SimClock()
    rng = random.Random((seed, rate, block_size).__hash__() & 0x7FFFFFFF)
    identity, ledger, engine, tokens = _build_network(
        block_size, spec.block_timeout_ms, spec.orgs, clock)
    n = spec.txs_per_rate
    prepared = _stage_instances(engine, tokens, n, rng)

    endorse_s = cost.endorse_us / 1e6
    timeout_s = spec.block_timeout_ms / 1000.0
    send_times = [(j + 1) / rate for j in range(n)]

    latencies: list[float] = []
    invalid = 0
    committer_free = 0.0
    committed = 0
    blocks = 0
    timeout_cuts = 0
    queue_len = 0
    queue_head_t: Optional[float] = None
    send_of: dict[str, float] = {}
    last_done = 0.0
    j = 0

    def commit(block, cut_time: float) -> None:
        nonlocal committer_free, invalid, committed, blocks, timeout_cuts, last_done
        start = max(cut_time, committer_free)
        # transactions sent but not yet validated when this block starts:
        # the queue-pressure term that bends the plateau downward
        sent_by_now = min(n, int(start * rate))
        backlog = max(0, sent_by_now - committed - len(block.txs))
        per_tx_us = cost.validate_us + cost.queue_penalty_us * backlog
        service = (len(block.txs) * per_tx_us + cost.commit_us) / 1e6
        done = start + service
        committer_free = done
        last_done = done
        clock.now = done
        result = ledger.validate_and_commit(block)
        for tx in block.txs:
            latencies.append(done - send_of[tx.tx_id])
            if result.statuses[tx.tx_id] is not TxStatus.VALID:
                invalid += 1
        committed += len(block.txs)
        blocks += 1
        if block.cut_reason.value == "TIMEOUT":
            timeout_cuts += 1

    while j < n or queue_len > 0:
        arrival = send_times[j] + endorse_s if j < n else math.inf
        deadline = queue_head_t + timeout_s if queue_len else math.inf
        if deadline <= arrival:
            block = ledger.cut_block("bench", deadline)
            if block is None:  # lost to float rounding at the exact deadline
                block = ledger.cut_block("bench", deadline + 1e-9)
            queue_len = 0
            queue_head_t = None
            commit(block, deadline)
            continue
        clock.now = arrival
        p = prepared[j]
        tx_id = engine.submit_prepared(p)
        send_of[tx_id] = send_times[j]
        queue_len += 1
        if queue_head_t is None:
            queue_head_t = arrival
        j += 1
        if queue_len >= block_size:
            block = ledger.cut_block("bench", arrival)
            queue_len = 0
            queue_head_t = None
            commit(block, arrival)

    wall = last_done  # measurement starts at t=0, before the first send
    latencies.sort()
    valid = n - invalid
    p95 = latencies[min(len(latencies) - 1, math.ceil(0.95 * len(latencies)) - 1)]
    return RunMetrics(
        send_rate=rate, block_size=block_size,
        throughput_tps=valid / wall if wall > 0 else 0.0,
        avg_latency_s=sum(latencies) / len(latencies),
        min_latency_s=latencies[0], max_latency_s=latencies[-1],
        p95_latency_s=p95, invalid=invalid, blocks=blocks,
        timeout_cuts=timeout_cuts,
    )


def run_benchmark(spec: WorkloadSpec | None = None,
                  cost_model: CostModel | None = None, seed: int = 1,
                  progress: Callable[[RunMetrics], None] | None = None
                  ) -> list[RunMetrics]:
    """Full rate x block-size matrix; deterministic for a given seed."""
    spec = spec or WorkloadSpec()
    cost_model = cost_model or CostModel()
    spec.validate()
    metrics: list[RunMetrics] = []
    for block_size in spec.block_sizes:
        for rate in spec.send_rates:
            row = _simulate_run(rate, block_size, spec, cost_model, seed)
            metrics.append(row)
            if progress is not None:
                progress(row)
    return metrics


def detect_saturation(curve: Iterable[tuple[float, float]]) -> float:
    """Smallest rate where throughput falls below 95% of the send rate.

    The crossing is interpolated between the last keeping-up rate and the
    first saturated one by solving 0.95 * r = saturated throughput.
    """
    points = sorted(curve)
    if len(points) < 3:
        raise InvalidSpec("need at least 3 curve points")
    for index, (rate, throughput) in enumerate(points):
        if throughput < SATURATION_FACTOR * rate:
            if index == 0:
                return float(rate)
            previous_rate = points[index - 1][0]
            crossing = throughput / SATURATION_FACTOR
            return float(min(max(crossing, previous_rate), rate))
    raise NoSaturation("throughput keeps up with every tested rate")


def curve_for_block_size(metrics: Sequence[RunMetrics],
                         block_size: int) -> list[tuple[float, float]]:
    return [(m.send_rate, m.throughput_tps) for m in metrics
            if m.block_size == block_size]


def export_csv(metrics: Sequence[RunMetrics], path: str | Path) -> Path:
    """Stable-order CSV; identical metrics yield byte-identical files."""
    if not metrics:
        raise IoFailure("no metrics to export")
    rows = sorted(metrics, key=lambda m: (m.block_size, m.send_rate))
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["send_rate", "block_size", "throughput_tps",
                             "avg_latency_s", "p95_latency_s", "invalid"])
            for m in rows:
                writer.writerow([m.send_rate, m.block_size,
                                 f"{m.throughput_tps:.4f}",
                                 f"{m.avg_latency_s:.4f}",
                                 f"{m.p95_latency_s:.4f}", m.invalid])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def summarize(metrics: Sequence[RunMetrics], spec: WorkloadSpec,
              cost_model: CostModel, seed: int, run_id: str | None = None) -> dict:
    """Per-curve summary with detected saturation points."""
    summary: dict = {
        "run_id": run_id or f"bench-{seed}",
        "seed": seed,
        "generated_at": None,   # filled by callers that want wall time
        "spec": {
            "send_rates": list(spec.send_rates),
            "block_sizes": list(spec.block_sizes),
            "block_timeout_ms": spec.block_timeout_ms,
            "clients": spec.clients,
            "txs_per_rate": spec.txs_per_rate,
            "orgs": spec.orgs,
            "peers_per_org": spec.peers_per_org,
        },
        "cost_model": {
            "endorse_us": cost_model.endorse_us,
            "validate_us": cost_model.validate_us,
            "commit_us": cost_model.commit_us,
            "queue_penalty_us": cost_model.queue_penalty_us,
            "nominal_capacity_tps": round(cost_model.nominal_capacity, 2),
        },
        "curves": {},
        "rows": [m.to_dict() for m in sorted(
            metrics, key=lambda m: (m.block_size, m.send_rate))],
    }
    for block_size in spec.block_sizes:
        curve = curve_for_block_size(metrics, block_size)
        try:
            saturation = round(detect_saturation(curve), 2)
        except (NoSaturation, InvalidSpec):
            saturation = None
        summary["curves"][str(block_size)] = {
            "saturation_tps": saturation,
            "capacity_tps": round(cost_model.capacity(block_size), 2),
            "peak_throughput_tps": round(max(t for _, t in curve), 2),
        }
    return summary


def write_summary(summary: dict, path: str | Path) -> Path:
    path = Path(path)
    summary = dict(summary)
    summary["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    try:
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path
