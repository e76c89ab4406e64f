"""Canonical byte encoding, digests and keyed MACs.

Everything that ends up under a hash goes through :func:`canonical_join`:
each field is encoded to bytes and prefixed with its 8-byte big-endian
length, then the parts are concatenated in declaration order.  The scheme
is unambiguous (no delimiter collisions) and stable across runs, which is
what makes transaction ids and block hashes reproducible.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from typing import Iterable

ZERO_DIGEST = "0" * 64


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def to_bytes(value) -> bytes:
    """Encode a scalar for canonical serialization."""
    if isinstance(value, bytes):
        return value
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, bool):
        return b"\x01" if value else b"\x00"
    if isinstance(value, int):
        return str(value).encode("ascii")
    if isinstance(value, float):
        return repr(value).encode("ascii")
    if value is None:
        return b"\xff\x00\xff"
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def canonical_join(fields: Iterable) -> bytes:
    """Length-prefixed concatenation of encoded fields."""
    out = bytearray()
    for field in fields:
        encoded = to_bytes(field)
        out += len(encoded).to_bytes(8, "big")
        out += encoded
    return bytes(out)


def canonical_json(obj) -> bytes:
    """Deterministic JSON bytes: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def mac(key: bytes, data: bytes) -> bytes:
    """Keyed MAC used to simulate signatures (HMAC-SHA256)."""
    return hmac.new(key, data, hashlib.sha256).digest()


def mac_hex(key: bytes, data: bytes) -> str:
    return hmac.new(key, data, hashlib.sha256).hexdigest()


def macs_equal(a: bytes, b: bytes) -> bool:
    return hmac.compare_digest(a, b)
