"""Detached signatures. Ed25519 is the only scheme shipped."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import UnsupportedScheme

ED25519 = "ed25519"
SUPPORTED_SCHEMES = frozenset({ED25519})


@dataclass(frozen=True)
class Ed25519Signer:
    private_key: Ed25519PrivateKey
    scheme: str = ED25519

    @classmethod
    def generate(cls) -> "Ed25519Signer":
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes | str) -> "Ed25519Signer":
        """Deterministic key for fixtures and replayable scripts."""
        if isinstance(seed, str):
            seed = seed.encode("utf-8")
        return cls(Ed25519PrivateKey.from_private_bytes(hashlib.sha256(seed).digest()))

    @classmethod
    def from_private_bytes(cls, raw: bytes) -> "Ed25519Signer":
        return cls(Ed25519PrivateKey.from_private_bytes(raw))

    @property
    def public_key(self) -> bytes:
        return self.private_key.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    def private_bytes(self) -> bytes:
        return self.private_key.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )

    def sign(self, message: bytes) -> bytes:
        return self.private_key.sign(message)


def verify_signature(scheme: str, public_key: bytes, message: bytes, signature: bytes) -> bool:
    if scheme not in SUPPORTED_SCHEMES:
        raise UnsupportedScheme(f"unsupported signature scheme {scheme!r}")
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True
