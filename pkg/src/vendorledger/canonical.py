"""Deterministic JSON serialization used as the preimage of every hash."""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import MalformedPayload

ZERO_HASH = "0" * 64


def _check(value: Any, path: str = "$") -> None:
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, int):
        return
    if isinstance(value, float):
        raise MalformedPayload(f"floating-point value at {path} cannot be hashed")
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise MalformedPayload(f"non-string key {key!r} at {path}")
            _check(item, f"{path}.{key}")
        return
    raise MalformedPayload(f"unsupported type {type(value).__name__} at {path}")


def canonical_bytes(value: Any) -> bytes:
    """Serialize ``value`` as sorted-key, whitespace-free UTF-8 JSON.

    Python orders ``str`` keys by code point, which for UTF-8 coincides with
    byte order. Floats are rejected so that hashes never depend on float
    formatting.
    """
    _check(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_record(value: Any) -> str:
    return sha256_hex(canonical_bytes(value))


def is_hex_digest(value: Any) -> bool:
    return (
        isinstance(value, str)
        and len(value) == 64
        and all(c in "0123456789abcdef" for c in value)
    )
