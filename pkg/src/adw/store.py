"""Content-addressed byte stores for off-chain payloads.

The ledger only ever holds digests; documents, event payloads and model
files live in one of these stores.  Deployments may bring their own store
by implementing the same three methods (put/get/delete by content
address).
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Protocol

from .codec import sha256_hex


class ByteStore(Protocol):
    def put(self, data: bytes) -> str:
        """Store bytes, return their content address (hex digest)."""
        ...

    def get(self, address: str) -> bytes:
        ...

    def delete(self, address: str) -> None:
        ...


class MemoryByteStore:
    """Dict-backed store, the default for tests and in-process demos."""

    def __init__(self):
        self._blobs: dict[str, bytes] = {}

    def put(self, data: bytes) -> str:
        address = sha256_hex(data)
        self._blobs[address] = data
        return address

    def get(self, address: str) -> bytes:
        return self._blobs[address]

    def delete(self, address: str) -> None:
        self._blobs.pop(address, None)

    def __contains__(self, address: str) -> bool:
        return address in self._blobs

    def __len__(self) -> int:
        return len(self._blobs)


class FileByteStore:
    """Directory-backed store; one file per blob, named by digest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, address: str) -> Path:
        return self.root / address

    def put(self, data: bytes) -> str:
        address = sha256_hex(data)
        path = self._path(address)
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return address

    def get(self, address: str) -> bytes:
        return self._path(address).read_bytes()

    def delete(self, address: str) -> None:
        try:
            self._path(address).unlink()
        except FileNotFoundError:
            pass

    def __contains__(self, address: str) -> bool:
        return self._path(address).exists()
