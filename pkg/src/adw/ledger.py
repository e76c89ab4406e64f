"""Minimal permissioned ledger.

Per channel: an ordering queue, a hash-chained block log and a versioned
world state.  Transactions are validated at commit time with multiversion
concurrency control -- a transaction is VALID only if its endorsements
satisfy the channel policy and every key it read still carries the version
it saw, checked against the state as of the previous transaction in the
same block.  The block log is the source of truth; the world state is a
replayable projection of it.

Ordering is single-process per channel (solo style).  Submission is safe
from any number of threads; cutting and committing for a channel are
serialized behind a per-channel lock.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, NamedTuple, Optional

from .codec import ZERO_DIGEST, canonical_join, mac, macs_equal, sha256_hex
from .errors import ChainMismatch, MalformedProposal, NotMember, UnknownChannel


class Version(NamedTuple):
    height: int
    tx_index: int


class TxStatus(str, Enum):
    PENDING = "PENDING"
    VALID = "VALID"
    MVCC_CONFLICT = "MVCC_CONFLICT"
    ENDORSEMENT_FAIL = "ENDORSEMENT_FAIL"


class CutReason(str, Enum):
    SIZE = "SIZE"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class TransactionProposal:
    channel_id: str
    submitter: str
    chaincode_name: str
    operation: str
    args: bytes = b""
    read_set: tuple[tuple[str, Optional[Version]], ...] = ()
    write_set: tuple[tuple[str, bytes], ...] = ()

    def validate_shape(self) -> None:
        read_keys = [k for k, _ in self.read_set]
        if len(read_keys) != len(set(read_keys)):
            raise MalformedProposal("duplicate keys in read set")
        write_keys = [k for k, _ in self.write_set]
        if len(write_keys) != len(set(write_keys)):
            raise MalformedProposal("duplicate keys in write set")
        if self.write_set and not self.args:
            raise MalformedProposal("args required for non-query operations")

    def canonical_bytes(self) -> bytes:
        parts = [self.channel_id, self.submitter, self.chaincode_name,
                 self.operation, self.args]
        for key, version in self.read_set:
            parts.append(key)
            if version is None:
                parts.append(None)
            else:
                parts.append(canonical_join([version.height, version.tx_index]))
        for key, value in self.write_set:
            parts.append(key)
            parts.append(value)
        return canonical_join(parts)

    def digest(self) -> str:
        return sha256_hex(self.canonical_bytes())


@dataclass
class Transaction:
    tx_id: str
    proposal: TransactionProposal
    endorsements: tuple[tuple[str, bytes], ...]
    submit_time: float
    validation_status: TxStatus = TxStatus.PENDING


@dataclass
class Block:
    channel_id: str
    height: int
    prev_hash: str
    txs: list[Transaction]
    cut_reason: CutReason
    block_hash: str = ""

    def compute_hash(self) -> str:
        # Covers the chain linkage and every proposal (via the tx ids);
        # endorsement MACs are checked separately in verify_chain.
        parts = [self.height, self.prev_hash] + [tx.tx_id for tx in self.txs]
        return sha256_hex(canonical_join(parts))


@dataclass
class LedgerConfig:
    block_size: int = 10
    block_timeout_ms: int = 500
    num_orgs: int = 3
    peers_per_org: int = 1

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.block_timeout_ms <= 0:
            raise ValueError("block_timeout_ms must be > 0")


@dataclass
class Channel:
    channel_id: str
    member_orgs: frozenset[str]
    endorsement_policy: int = 1
    config: LedgerConfig = field(default_factory=LedgerConfig)

    def __post_init__(self):
        if not self.member_orgs:
            raise ValueError("member_orgs must be non-empty")
        if self.endorsement_policy < 1:
            raise ValueError("endorsement_policy must be >= 1")


@dataclass
class CommitResult:
    block: Block
    statuses: dict[str, TxStatus]
    height: int


class ChainCheck(NamedTuple):
    ok: bool
    first_bad_height: Optional[int]


@dataclass
class _ChannelState:
    channel: Channel
    queue: list[tuple[float, Transaction]] = field(default_factory=list)
    blocks: list[Block] = field(default_factory=list)
    state: dict[str, tuple[bytes, Version]] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock)
    tx_index: dict[str, TxStatus] = field(default_factory=dict)


class Ledger:
    """Channels, ordering queues, block log and world state."""

    def __init__(self, clock: Callable[[], float] = time.time):
        self.clock = clock
        self._channels: dict[str, _ChannelState] = {}
        self._org_keys: dict[str, bytes] = {}
        self._user_orgs: dict[str, str] = {}
        self._registry_lock = threading.Lock()

    # -- membership ---------------------------------------------------------

    def register_org(self, org_id: str, mac_key: bytes) -> None:
        with self._registry_lock:
            self._org_keys[org_id] = mac_key

    def register_user(self, user_id: str, org_id: str) -> None:
        with self._registry_lock:
            self._user_orgs[user_id] = org_id

    def create_channel(self, channel_id: str, member_orgs, endorsement_policy: int = 1,
                       config: LedgerConfig | None = None) -> Channel:
        channel = Channel(channel_id, frozenset(member_orgs), endorsement_policy,
                          config or LedgerConfig())
        with self._registry_lock:
            if channel_id in self._channels:
                raise ValueError(f"channel {channel_id} already exists")
            self._channels[channel_id] = _ChannelState(channel)
        return channel

    def channel(self, channel_id: str) -> Channel:
        return self._require(channel_id).channel

    def channels(self) -> list[str]:
        return sorted(self._channels)

    def _require(self, channel_id: str) -> _ChannelState:
        try:
            return self._channels[channel_id]
        except KeyError:
            raise UnknownChannel(channel_id) from None

    def _org_of(self, user_id: str) -> Optional[str]:
        return self._user_orgs.get(user_id)

    # -- endorsement ----------------------------------------------------------

    def endorse(self, proposal: TransactionProposal, org_ids) -> tuple[tuple[str, bytes], ...]:
        """Simulated endorsement: each org MACs the proposal digest."""
        digest = proposal.digest().encode("ascii")
        out = []
        for org_id in org_ids:
            key = self._org_keys.get(org_id)
            if key is None:
                raise NotMember(f"org {org_id} has no endorsement key")
            out.append((org_id, mac(key, digest)))
        return tuple(out)

    def _endorsement_valid(self, channel: Channel, tx: Transaction) -> bool:
        digest = tx.tx_id.encode("ascii")
        valid_orgs = set()
        for org_id, signature in tx.endorsements:
            if org_id not in channel.member_orgs:
                continue
            key = self._org_keys.get(org_id)
            if key is None:
                continue
            if macs_equal(signature, mac(key, digest)):
                valid_orgs.add(org_id)
        return len(valid_orgs) >= channel.endorsement_policy

    # -- submission and ordering ----------------------------------------------

    def submit_transaction(self, channel_id: str, proposal: TransactionProposal,
                           endorsements) -> str:
        st = self._require(channel_id)
        if proposal.channel_id != channel_id:
            raise MalformedProposal("proposal channel mismatch")
        proposal.validate_shape()
        submitter_org = self._org_of(proposal.submitter)
        if submitter_org is None or submitter_org not in st.channel.member_orgs:
            raise NotMember(f"{proposal.submitter} is not enrolled in a member org")
        tx = Transaction(tx_id=proposal.digest(), proposal=proposal,
                         endorsements=tuple(endorsements), submit_time=self.clock())
        with st.lock:
            st.queue.append((tx.submit_time, tx))
        return tx.tx_id

    def queue_length(self, channel_id: str) -> int:
        return len(self._require(channel_id).queue)

    def cut_block(self, channel_id: str, now: float | None = None) -> Optional[Block]:
        """Emit a block when the size or timeout trigger fires; SIZE wins ties."""
        st = self._require(channel_id)
        cfg = st.channel.config
        now = self.clock() if now is None else now
        with st.lock:
            if not st.queue:
                return None
            if len(st.queue) >= cfg.block_size:
                reason = CutReason.SIZE
                count = cfg.block_size
            elif (now - st.queue[0][0]) * 1000.0 >= cfg.block_timeout_ms - 1e-6:
                # microsecond slack so a timer firing at its exact deadline
                # is not lost to float rounding
                reason = CutReason.TIMEOUT
                count = len(st.queue)
            else:
                return None
            return self._cut_locked(st, count, reason)

    def _cut_locked(self, st: _ChannelState, count: int, reason: CutReason) -> Block:
        taken = [tx for _, tx in st.queue[:count]]
        del st.queue[:count]
        height = len(st.blocks)
        prev_hash = st.blocks[-1].block_hash if st.blocks else ZERO_DIGEST
        block = Block(st.channel.channel_id, height, prev_hash, taken, reason)
        block.block_hash = block.compute_hash()
        return block

    # -- validation and commit --------------------------------------------------

    def validate_and_commit(self, block: Block) -> CommitResult:
        st = self._require(block.channel_id)
        with st.lock:
            tip = st.blocks[-1].block_hash if st.blocks else ZERO_DIGEST
            if block.prev_hash != tip:
                raise ChainMismatch(f"prev_hash {block.prev_hash[:12]}.. does not match tip")
            statuses: dict[str, TxStatus] = {}
            for index, tx in enumerate(block.txs):
                if not self._endorsement_valid(st.channel, tx):
                    tx.validation_status = TxStatus.ENDORSEMENT_FAIL
                elif not self._reads_current(st.state, tx.proposal):
                    tx.validation_status = TxStatus.MVCC_CONFLICT
                else:
                    tx.validation_status = TxStatus.VALID
                    version = Version(block.height, index)
                    for key, value in tx.proposal.write_set:
                        st.state[key] = (value, version)
                statuses[tx.tx_id] = tx.validation_status
                st.tx_index[tx.tx_id] = tx.validation_status
            st.blocks.append(block)
            return CommitResult(block, statuses, block.height)

    @staticmethod
    def _reads_current(state, proposal: TransactionProposal) -> bool:
        for key, version in proposal.read_set:
            current = state.get(key)
            current_version = current[1] if current is not None else None
            if current_version != version:
                return False
        return True

    def drain(self, channel_id: str) -> list[CommitResult]:
        """Flush the ordering queue: SIZE blocks while full, then one final
        flush block (reported as TIMEOUT, the forced-cut analogue)."""
        st = self._require(channel_id)
        results = []
        with st.lock:
            cfg = st.channel.config
            while st.queue:
                if len(st.queue) >= cfg.block_size:
                    block = self._cut_locked(st, cfg.block_size, CutReason.SIZE)
                else:
                    block = self._cut_locked(st, len(st.queue), CutReason.TIMEOUT)
                results.append(self.validate_and_commit(block))
        return results

    # -- reads ---------------------------------------------------------------

    def get_state(self, channel_id: str, key: str, reader: str):
        """Latest committed (value, version) or None; members only."""
        st = self._require(channel_id)
        org = self._org_of(reader)
        if org is None or org not in st.channel.member_orgs:
            raise NotMember(f"{reader} may not read channel {channel_id}")
        with st.lock:
            return st.state.get(key)

    def state_keys(self, channel_id: str, reader: str, prefix: str = "") -> list[str]:
        st = self._require(channel_id)
        org = self._org_of(reader)
        if org is None or org not in st.channel.member_orgs:
            raise NotMember(f"{reader} may not read channel {channel_id}")
        with st.lock:
            return sorted(k for k in st.state if k.startswith(prefix))

    def tx_status(self, channel_id: str, tx_id: str) -> Optional[TxStatus]:
        return self._require(channel_id).tx_index.get(tx_id)

    def height(self, channel_id: str) -> int:
        return len(self._require(channel_id).blocks)

    def blocks(self, channel_id: str) -> list[Block]:
        return list(self._require(channel_id).blocks)

    # -- integrity --------------------------------------------------------------

    def verify_chain(self, channel_id: str) -> ChainCheck:
        """Recompute every digest and link from genesis."""
        st = self._require(channel_id)
        with st.lock:
            blocks = list(st.blocks)
        prev = ZERO_DIGEST
        for expected_height, block in enumerate(blocks):
            if block.height != expected_height or block.prev_hash != prev:
                return ChainCheck(False, expected_height)
            for tx in block.txs:
                if tx.proposal.digest() != tx.tx_id:
                    return ChainCheck(False, expected_height)
                for org_id, signature in tx.endorsements:
                    key = self._org_keys.get(org_id)
                    if key is not None and not macs_equal(
                            signature, mac(key, tx.tx_id.encode("ascii"))):
                        return ChainCheck(False, expected_height)
            if block.compute_hash() != block.block_hash:
                return ChainCheck(False, expected_height)
            prev = block.block_hash
        return ChainCheck(True, None)

    def replay_state(self, channel_id: str) -> dict[str, tuple[bytes, Version]]:
        """Rebuild world state from the block log alone (event sourcing)."""
        st = self._require(channel_id)
        state: dict[str, tuple[bytes, Version]] = {}
        for block in st.blocks:
            for index, tx in enumerate(block.txs):
                if tx.validation_status is TxStatus.VALID:
                    version = Version(block.height, index)
                    for key, value in tx.proposal.write_set:
                        state[key] = (value, version)
        return state

    def world_state(self, channel_id: str) -> dict[str, tuple[bytes, Version]]:
        st = self._require(channel_id)
        with st.lock:
            return dict(st.state)

    # -- export / import ----------------------------------------------------------

    def export_blocks(self, channel_id: str, path: str | Path) -> int:
        """Write the block log as JSON Lines, one block per line."""
        blocks = self.blocks(channel_id)
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for block in blocks:
                fh.write(json.dumps(block_to_dict(block), sort_keys=True))
                fh.write("\n")
        return len(blocks)

    def import_blocks(self, channel_id: str, path: str | Path) -> int:
        """Replay an exported block log into an empty channel."""
        st = self._require(channel_id)
        count = 0
        with st.lock:
            if st.blocks:
                raise ChainMismatch("channel is not empty")
            with Path(path).open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    block = block_from_dict(json.loads(line))
                    st.blocks.append(block)
                    for index, tx in enumerate(block.txs):
                        st.tx_index[tx.tx_id] = tx.validation_status
                        if tx.validation_status is TxStatus.VALID:
                            version = Version(block.height, index)
                            for key, value in tx.proposal.write_set:
                                st.state[key] = (value, version)
                    count += 1
        return count


# -- wire helpers -----------------------------------------------------------


def proposal_to_dict(p: TransactionProposal) -> dict:
    return {
        "channel_id": p.channel_id,
        "submitter": p.submitter,
        "chaincode_name": p.chaincode_name,
        "operation": p.operation,
        "args": p.args.hex(),
        "read_set": [[k, list(v) if v is not None else None] for k, v in p.read_set],
        "write_set": [[k, v.hex()] for k, v in p.write_set],
    }


def proposal_from_dict(d: dict) -> TransactionProposal:
    return TransactionProposal(
        channel_id=d["channel_id"],
        submitter=d["submitter"],
        chaincode_name=d["chaincode_name"],
        operation=d["operation"],
        args=bytes.fromhex(d["args"]),
        read_set=tuple((k, Version(*v) if v is not None else None)
                       for k, v in d["read_set"]),
        write_set=tuple((k, bytes.fromhex(v)) for k, v in d["write_set"]),
    )


def block_to_dict(block: Block) -> dict:
    return {
        "channel_id": block.channel_id,
        "height": block.height,
        "prev_hash": block.prev_hash,
        "cut_reason": block.cut_reason.value,
        "block_hash": block.block_hash,
        "txs": [
            {
                "tx_id": tx.tx_id,
                "proposal": proposal_to_dict(tx.proposal),
                "endorsements": [[org, sig.hex()] for org, sig in tx.endorsements],
                "submit_time": tx.submit_time,
                "validation_status": tx.validation_status.value,
            }
            for tx in block.txs
        ],
    }


def block_from_dict(d: dict) -> Block:
    txs = [
        Transaction(
            tx_id=t["tx_id"],
            proposal=proposal_from_dict(t["proposal"]),
            endorsements=tuple((org, bytes.fromhex(sig)) for org, sig in t["endorsements"]),
            submit_time=t["submit_time"],
            validation_status=TxStatus(t["validation_status"]),
        )
        for t in d["txs"]
    ]
    return Block(
        channel_id=d["channel_id"],
        height=d["height"],
        prev_hash=d["prev_hash"],
        txs=txs,
        cut_reason=CutReason(d["cut_reason"]),
        block_hash=d["block_hash"],
    )
