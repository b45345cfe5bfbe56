"""Checksums, canonical config hashes and per-item seed derivation."""

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Union

CHUNK_SIZE = 8192


def file_checksum(file_path: Union[str, Path], chunk_size: int = CHUNK_SIZE) -> str:
    """SHA-256 of a file, read in chunks."""
    hasher = hashlib.sha256()
    with open(file_path, 'rb') as f:
        while chunk := f.read(chunk_size):
            hasher.update(chunk)
    return hasher.hexdigest()


def bytes_checksum(data: bytes) -> str:
    """SHA-256 of an in-memory buffer."""
    return hashlib.sha256(data).hexdigest()


def canonical_json(data: Any) -> str:
    """JSON text with sorted keys and no whitespace variance."""
    return json.dumps(data, sort_keys=True, separators=(',', ':'), default=str)


def content_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON form of `data`."""
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()


def combine_hashes(hashes: Iterable[str]) -> str:
    """Order-sensitive digest over a sequence of hex digests."""
    hasher = hashlib.sha256()
    for value in hashes:
        hasher.update(value.encode('ascii'))
        hasher.update(b'\n')
    return hasher.hexdigest()


def stable_seed(seed: int, key: str) -> int:
    """
    Derive a 64-bit seed from a global seed and an item key.

    Independent of process, hash randomization and scheduling order.
    """
    digest = hashlib.sha256(f"{int(seed)}:{key}".encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big')
