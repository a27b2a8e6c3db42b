"""Vendor identity registration and the security control catalog."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .canonical import canonical_bytes
from .errors import (
    DuplicateRegistration,
    PreconditionViolation,
    UnknownControl,
    UnsupportedScheme,
    VendorNotRegistered,
)
from .keys import ED25519, SUPPORTED_SCHEMES, verify_signature
from .ledger import EntryType, Ledger, LedgerEntry


def derive_vendor_id(public_key: bytes) -> str:
    """First 20 bytes of SHA-256 over the raw public key, as hex."""
    return hashlib.sha256(public_key).digest()[:20].hex()


@dataclass(frozen=True)
class VendorIdentity:
    vendor_id: str
    public_key: bytes
    scheme: str
    display_name: str
    registered_at: int

    def to_payload(self) -> dict:
        return {
            "vendor_id": self.vendor_id,
            "public_key": self.public_key.hex(),
            "scheme": self.scheme,
            "display_name": self.display_name,
        }

    @classmethod
    def from_entry(cls, entry: LedgerEntry) -> "VendorIdentity":
        p = entry.payload
        return cls(p["vendor_id"], bytes.fromhex(p["public_key"]), p["scheme"],
                   p["display_name"], entry.timestamp)


def register_vendor(
    ledger: Ledger,
    public_key: bytes,
    display_name: str,
    timestamp: int,
    scheme: str = ED25519,
) -> VendorIdentity:
    if scheme not in SUPPORTED_SCHEMES:
        raise UnsupportedScheme(f"unsupported signature scheme {scheme!r}")
    identity = VendorIdentity(derive_vendor_id(public_key), bytes(public_key), scheme,
                              display_name, timestamp)
    with ledger._lock:
        if ledger.query(EntryType.VendorRegistration, vendor_id=identity.vendor_id):
            raise DuplicateRegistration(f"vendor {identity.vendor_id} already registered")
        ledger.append_entry(EntryType.VendorRegistration, identity.to_payload(), timestamp)
    return identity


def find_vendor(ledger: Ledger, vendor_id: str) -> VendorIdentity:
    found = ledger.query(EntryType.VendorRegistration, vendor_id=vendor_id)
    if not found:
        raise VendorNotRegistered(f"vendor {vendor_id} is not registered")
    return VendorIdentity.from_entry(found[0])


def vendors(ledger: Ledger) -> list[VendorIdentity]:
    return [VendorIdentity.from_entry(e) for e in ledger.query(EntryType.VendorRegistration)]


def authenticate(identity: VendorIdentity, challenge: bytes, signature: bytes) -> bool:
    if not challenge:
        raise PreconditionViolation("challenge must be non-empty")
    return verify_signature(identity.scheme, identity.public_key, challenge, signature)


# -- control catalog ----------------------------------------------------------

class NistFamily(str, Enum):
    AC = "AC"
    IA = "IA"
    SC = "SC"
    SI = "SI"
    IR = "IR"
    CM = "CM"
    SR = "SR"
    RA = "RA"


NIST_FAMILY_NAMES = {
    NistFamily.AC: "Access Control",
    NistFamily.IA: "Identification and Authentication",
    NistFamily.SC: "System and Communications Protection",
    NistFamily.SI: "System and Information Integrity",
    NistFamily.IR: "Incident Response",
    NistFamily.CM: "Configuration Management",
    NistFamily.SR: "Supply Chain Risk Management",
    NistFamily.RA: "Risk Assessment",
}


@dataclass(frozen=True)
class SecurityControl:
    control_id: str
    threat_name: str
    countermeasure: str
    nist_family: NistFamily
    source_ref: str

    def to_record(self) -> dict:
        return {
            "control_id": self.control_id,
            "threat_name": self.threat_name,
            "countermeasure": self.countermeasure,
            "nist_family": self.nist_family.value,
            "source_ref": self.source_ref,
        }

    @classmethod
    def from_record(cls, record: dict) -> "SecurityControl":
        return cls(
            control_id=record["control_id"],
            threat_name=record["threat_name"],
            countermeasure=record["countermeasure"],
            nist_family=NistFamily(record["nist_family"]),
            source_ref=record.get("source_ref", ""),
        )


@dataclass(frozen=True)
class ControlCatalog:
    controls: tuple[SecurityControl, ...]
    version: str = "1.0"

    def __post_init__(self):
        ids = [c.control_id for c in self.controls]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate control_id in catalog")

    def __len__(self) -> int:
        return len(self.controls)

    def __contains__(self, control_id: object) -> bool:
        return any(c.control_id == control_id for c in self.controls)

    def lookup(self, control_id: str) -> SecurityControl:
        for control in self.controls:
            if control.control_id == control_id:
                return control
        raise UnknownControl(f"unknown control {control_id!r}")

    def require(self, control_ids: Iterable[str]) -> None:
        for cid in control_ids:
            self.lookup(cid)

    def by_family(self, family: NistFamily | str) -> list[SecurityControl]:
        family = NistFamily(family)
        return [c for c in self.controls if c.nist_family is family]

    def to_json(self) -> bytes:
        return canonical_bytes([c.to_record() for c in self.controls])

    @classmethod
    def from_json(cls, data: bytes | str, version: str = "custom") -> "ControlCatalog":
        raw = json.loads(data)
        if isinstance(raw, dict):
            version = raw.get("version", version)
            raw = raw["controls"]
        return cls(tuple(SecurityControl.from_record(r) for r in raw), version)

    @classmethod
    def from_file(cls, path: str | Path) -> "ControlCatalog":
        return cls.from_json(Path(path).read_bytes())


@lru_cache(maxsize=None)
def builtin_catalog() -> ControlCatalog:
    data = resources.files("vendorledger.data").joinpath("controls.json").read_bytes()
    return ControlCatalog.from_json(data)


def lookup_control(catalog: ControlCatalog, control_id: str) -> SecurityControl:
    return catalog.lookup(control_id)
