"""Append-only, hash-chained, Merkle-rooted audit ledger.

Entries are chained through ``prev_hash``; sealed blocks commit to their
entries through a Merkle root and to each other through
``prev_block_hash``. The on-disk form is one canonical JSON record per line,
so reloading a file reproduces every hash bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .canonical import ZERO_HASH, canonical_bytes, hash_record, is_hex_digest
from .errors import (
    EntryNotSealed,
    LedgerCorrupted,
    MalformedPayload,
    NoPendingEntries,
    NonMonotonicTimestamp,
    UnknownEntry,
    UnsupportedScheme,
)
from .keys import verify_signature

EMPTY_ROOT = hashlib.sha256(b"").hexdigest()


class EntryType(str, Enum):
    VendorRegistration = "VendorRegistration"
    DocumentAnchor = "DocumentAnchor"
    ComplianceVerdict = "ComplianceVerdict"
    RiskScanRecord = "RiskScanRecord"
    AccessPolicyAttestation = "AccessPolicyAttestation"
    MonitoringAlert = "MonitoringAlert"
    IncidentAction = "IncidentAction"
    AssetInventoryChange = "AssetInventoryChange"
    ContractDeployment = "ContractDeployment"


# Minimal shape check per entry type; producing modules validate the rest.
REQUIRED_FIELDS: dict[EntryType, frozenset[str]] = {
    EntryType.VendorRegistration: frozenset({"vendor_id", "public_key", "scheme", "display_name"}),
    EntryType.DocumentAnchor: frozenset({"vendor_id", "assessment_id", "doc_type", "content_hash"}),
    EntryType.ComplianceVerdict: frozenset({"vendor_id", "record"}),
    EntryType.RiskScanRecord: frozenset({"vendor_id", "scan_kind", "findings", "scanned_at"}),
    EntryType.AccessPolicyAttestation: frozenset(
        {"vendor_id", "mfa_enabled", "rbac_enabled", "policies", "passed"}
    ),
    EntryType.MonitoringAlert: frozenset({"vendor_id", "alert_type", "severity", "subject"}),
    EntryType.IncidentAction: frozenset({"vendor_id", "incident_id", "kind"}),
    EntryType.AssetInventoryChange: frozenset({"asset", "status"}),
    EntryType.ContractDeployment: frozenset(
        {"contract_id", "required_controls", "actions_on_pass", "actions_on_fail"}
    ),
}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_timestamp(value: Any, what: str = "timestamp") -> int:
    if not _is_int(value) or value < 0:
        raise MalformedPayload(f"{what} must be a non-negative integer, got {value!r}")
    return value


def validate_payload(entry_type: EntryType, payload: Any) -> dict:
    if not isinstance(payload, dict):
        raise MalformedPayload(f"{entry_type.value} payload must be an object")
    missing = REQUIRED_FIELDS[entry_type] - payload.keys()
    if missing:
        raise MalformedPayload(f"{entry_type.value} payload missing {sorted(missing)}")
    # round-trip detaches the stored copy from the caller's objects
    return json.loads(canonical_bytes(payload))


# -- Merkle tree --------------------------------------------------------------

def leaf_hash(entry_hash: str) -> bytes:
    return hashlib.sha256(b"\x00" + bytes.fromhex(entry_hash)).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"\x01" + left + right).digest()


def _next_level(level: list[bytes]) -> list[bytes]:
    out = [node_hash(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
    if len(level) % 2:
        out.append(level[-1])  # odd node promoted, not duplicated
    return out


def merkle_root(entry_hashes: Sequence[str]) -> str:
    if not entry_hashes:
        return EMPTY_ROOT
    level = [leaf_hash(h) for h in entry_hashes]
    while len(level) > 1:
        level = _next_level(level)
    return level[0].hex()


def merkle_path(entry_hashes: Sequence[str], position: int) -> list[tuple[str, str]]:
    """Sibling path for the leaf at ``position``; side names the sibling's side."""
    level = [leaf_hash(h) for h in entry_hashes]
    path: list[tuple[str, str]] = []
    while len(level) > 1:
        if position % 2 == 1:
            path.append((level[position - 1].hex(), "left"))
        elif position + 1 < len(level):
            path.append((level[position + 1].hex(), "right"))
        level = _next_level(level)
        position //= 2
    return path


@dataclass(frozen=True)
class InclusionProof:
    entry_index: int
    entry_hash: str
    path: tuple[tuple[str, str], ...]
    block_height: int

    def fold(self) -> str:
        current = leaf_hash(self.entry_hash)
        for sibling, side in self.path:
            sib = bytes.fromhex(sibling)
            if side == "left":
                current = node_hash(sib, current)
            elif side == "right":
                current = node_hash(current, sib)
            else:
                raise ValueError(f"bad side {side!r}")
        return current.hex()

    def verify(self, root: str) -> bool:
        try:
            return self.fold() == root
        except ValueError:
            return False

    def to_record(self) -> dict:
        return {
            "entry_index": self.entry_index,
            "entry_hash": self.entry_hash,
            "path": [{"sibling": s, "side": side} for s, side in self.path],
            "block_height": self.block_height,
        }


# -- records ------------------------------------------------------------------

@dataclass(frozen=True)
class Signature:
    scheme: str
    public_key: str
    value: str

    def to_record(self) -> dict:
        return {"scheme": self.scheme, "public_key": self.public_key, "value": self.value}


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    timestamp: int
    entry_type: EntryType
    payload: dict
    prev_hash: str
    entry_hash: str
    signature: Optional[Signature] = None

    def hashed_body(self) -> dict:
        return {
            "index": self.index,
            "timestamp": self.timestamp,
            "entry_type": self.entry_type.value,
            "payload": self.payload,
            "prev_hash": self.prev_hash,
        }

    def compute_hash(self) -> str:
        return hash_record(self.hashed_body())

    def to_record(self) -> dict:
        record = self.hashed_body()
        record["kind"] = "entry"
        record["entry_hash"] = self.entry_hash
        record["signature"] = self.signature.to_record() if self.signature else None
        return record

    @classmethod
    def from_record(cls, record: dict) -> "LedgerEntry":
        expected = {"kind", "index", "timestamp", "entry_type", "payload",
                    "prev_hash", "entry_hash", "signature"}
        if set(record) != expected:
            raise ValueError(f"entry keys {sorted(record)}")
        sig = record["signature"]
        if sig is not None:
            if set(sig) != {"scheme", "public_key", "value"}:
                raise ValueError("signature keys")
            sig = Signature(str(sig["scheme"]), str(sig["public_key"]), str(sig["value"]))
        if not isinstance(record["payload"], dict):
            raise ValueError("payload must be an object")
        for key in ("index", "timestamp"):
            if not _is_int(record[key]):
                raise ValueError(f"{key} must be an integer")
        for key in ("prev_hash", "entry_hash"):
            if not isinstance(record[key], str):
                raise ValueError(f"{key} must be a string")
        return cls(
            index=record["index"],
            timestamp=record["timestamp"],
            entry_type=EntryType(record["entry_type"]),
            payload=record["payload"],
            prev_hash=record["prev_hash"],
            entry_hash=record["entry_hash"],
            signature=sig,
        )


@dataclass(frozen=True)
class Block:
    height: int
    prev_block_hash: str
    merkle_root: str
    sealed_at: int
    start: int
    stop: int
    block_hash: str

    @property
    def entry_indices(self) -> range:
        return range(self.start, self.stop)

    def hashed_body(self) -> dict:
        return {
            "height": self.height,
            "prev_block_hash": self.prev_block_hash,
            "merkle_root": self.merkle_root,
            "sealed_at": self.sealed_at,
            "entry_indices": {"start": self.start, "stop": self.stop},
        }

    def compute_hash(self) -> str:
        return hash_record(self.hashed_body())

    def to_record(self) -> dict:
        record = self.hashed_body()
        record["kind"] = "block"
        record["block_hash"] = self.block_hash
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Block":
        expected = {"kind", "height", "prev_block_hash", "merkle_root",
                    "sealed_at", "entry_indices", "block_hash"}
        if set(record) != expected:
            raise ValueError(f"block keys {sorted(record)}")
        rng = record["entry_indices"]
        if not isinstance(rng, dict) or set(rng) != {"start", "stop"}:
            raise ValueError("entry_indices must be {start, stop}")
        ints = (record["height"], record["sealed_at"], rng["start"], rng["stop"])
        if not all(_is_int(v) for v in ints):
            raise ValueError("block integers")
        for key in ("prev_block_hash", "merkle_root", "block_hash"):
            if not isinstance(record[key], str):
                raise ValueError(f"{key} must be a string")
        return cls(
            height=record["height"],
            prev_block_hash=record["prev_block_hash"],
            merkle_root=record["merkle_root"],
            sealed_at=record["sealed_at"],
            start=rng["start"],
            stop=rng["stop"],
            block_hash=record["block_hash"],
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    location: str


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    first_violation: Optional[Violation] = None

    def describe(self) -> str:
        if self.ok:
            return "ok"
        return f"{self.first_violation.kind} at {self.first_violation.location}"

    def to_record(self) -> dict:
        v = self.first_violation
        return {
            "ok": self.ok,
            "first_violation": None if v is None else {"kind": v.kind, "location": v.location},
        }


def _fail(kind: str, location: str) -> VerificationReport:
    return VerificationReport(False, Violation(kind, location))


# -- ledger -------------------------------------------------------------------

@dataclass
class Ledger:
    """Single-writer ledger. Writes are serialized through an internal lock."""

    _entries: list[LedgerEntry] = field(default_factory=list)
    _blocks: list[Block] = field(default_factory=list)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    @classmethod
    def genesis(cls, created_at: int) -> "Ledger":
        _check_timestamp(created_at, "created_at")
        ledger = cls()
        body = {
            "height": 0,
            "prev_block_hash": ZERO_HASH,
            "merkle_root": EMPTY_ROOT,
            "sealed_at": created_at,
            "entry_indices": {"start": 0, "stop": 0},
        }
        ledger._blocks.append(
            Block(0, ZERO_HASH, EMPTY_ROOT, created_at, 0, 0, hash_record(body))
        )
        return ledger

    # read side

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def sealed_count(self) -> int:
        return self._blocks[-1].stop if self._blocks else 0

    @property
    def pending(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries[self.sealed_count:])

    @property
    def last_timestamp(self) -> int:
        """Latest timestamp seen by the ledger, entries or blocks."""
        stamps = [b.sealed_at for b in self._blocks[-1:]]
        stamps += [e.timestamp for e in self._entries[-1:]]
        return max(stamps, default=0)

    def entry(self, index: int) -> LedgerEntry:
        if not _is_int(index) or not 0 <= index < len(self._entries):
            raise UnknownEntry(f"no entry with index {index!r}")
        return self._entries[index]

    def query(
        self,
        entry_type: EntryType | str | None = None,
        vendor_id: str | None = None,
        time_range: tuple[int | None, int | None] | None = None,
    ) -> list[LedgerEntry]:
        """Entries matching every given filter, in index order. Bounds are inclusive."""
        if entry_type is not None:
            entry_type = EntryType(entry_type)
        lo, hi = time_range if time_range is not None else (None, None)
        out = []
        for e in self.entries:
            if entry_type is not None and e.entry_type is not entry_type:
                continue
            if vendor_id is not None and e.payload.get("vendor_id") != vendor_id:
                continue
            if lo is not None and e.timestamp < lo:
                continue
            if hi is not None and e.timestamp > hi:
                continue
            out.append(e)
        return out

    # write side

    def _make_entry(self, index, prev_hash, entry_type, payload, timestamp, signer):
        entry_type = EntryType(entry_type)
        payload = validate_payload(entry_type, payload)
        body = {
            "index": index,
            "timestamp": timestamp,
            "entry_type": entry_type.value,
            "payload": payload,
            "prev_hash": prev_hash,
        }
        entry_hash = hash_record(body)
        signature = None
        if signer is not None:
            sig = signer.sign(bytes.fromhex(entry_hash))
            signature = Signature(signer.scheme, signer.public_key.hex(), sig.hex())
        return LedgerEntry(index, timestamp, entry_type, payload, prev_hash, entry_hash, signature)

    def append_entry(self, entry_type, payload: dict, timestamp: int, signer=None) -> LedgerEntry:
        return self.append_batch([(entry_type, payload, timestamp)], signer=signer)[0]

    def append_batch(
        self, items: Iterable[tuple[EntryType | str, dict, int]], signer=None
    ) -> list[LedgerEntry]:
        """Append several entries atomically: all are validated before any is stored."""
        with self._lock:
            index = len(self._entries)
            prev_hash = self._entries[-1].entry_hash if self._entries else ZERO_HASH
            last = self.last_timestamp
            staged: list[LedgerEntry] = []
            for entry_type, payload, timestamp in items:
                _check_timestamp(timestamp)
                if timestamp < last:
                    raise NonMonotonicTimestamp(
                        f"timestamp {timestamp} precedes previous timestamp {last}"
                    )
                entry = self._make_entry(index, prev_hash, entry_type, payload, timestamp, signer)
                staged.append(entry)
                index, prev_hash, last = index + 1, entry.entry_hash, timestamp
            self._entries.extend(staged)
            return staged

    def seal_block(self, sealed_at: int) -> Block:
        with self._lock:
            _check_timestamp(sealed_at, "sealed_at")
            start, stop = self.sealed_count, len(self._entries)
            if start == stop:
                raise NoPendingEntries("no pending entries to seal")
            if sealed_at < self.last_timestamp:
                raise NonMonotonicTimestamp(
                    f"sealed_at {sealed_at} precedes previous timestamp {self.last_timestamp}"
                )
            prev = self._blocks[-1]
            root = merkle_root([e.entry_hash for e in self._entries[start:stop]])
            body = {
                "height": prev.height + 1,
                "prev_block_hash": prev.block_hash,
                "merkle_root": root,
                "sealed_at": sealed_at,
                "entry_indices": {"start": start, "stop": stop},
            }
            block = Block(prev.height + 1, prev.block_hash, root, sealed_at,
                          start, stop, hash_record(body))
            self._blocks.append(block)
            return block

    # proofs and verification

    def block_of(self, index: int) -> Block:
        self.entry(index)
        for block in self._blocks:
            if block.start <= index < block.stop:
                return block
        raise EntryNotSealed(f"entry {index} is pending, not sealed")

    def prove_inclusion(self, index: int) -> InclusionProof:
        block = self.block_of(index)
        hashes = [e.entry_hash for e in self._entries[block.start:block.stop]]
        return InclusionProof(
            entry_index=index,
            entry_hash=self._entries[index].entry_hash,
            path=tuple(merkle_path(hashes, index - block.start)),
            block_height=block.height,
        )

    def verify_chain(self) -> VerificationReport:
        entries, blocks = self.entries, self.blocks
        prev_hash, last_ts = ZERO_HASH, 0
        for i, e in enumerate(entries):
            where = f"entry {i}"
            if e.index != i:
                return _fail("EntryLinkMismatch", where)
            try:
                recomputed = e.compute_hash()
            except MalformedPayload:
                return _fail("MalformedRecord", where)
            if not is_hex_digest(e.entry_hash) or recomputed != e.entry_hash:
                return _fail("EntryHashMismatch", where)
            if e.prev_hash != prev_hash:
                return _fail("EntryLinkMismatch", where)
            if e.timestamp < last_ts:
                return _fail("TimestampRegression", where)
            if e.signature is not None and not _signature_ok(e):
                return _fail("SignatureInvalid", where)
            prev_hash, last_ts = e.entry_hash, e.timestamp

        if not blocks:
            return _fail("BlockLinkMismatch", "block 0")
        prev_block, expected_start = ZERO_HASH, 0
        for h, b in enumerate(blocks):
            where = f"block {h}"
            if b.height != h or b.prev_block_hash != prev_block:
                return _fail("BlockLinkMismatch", where)
            if not is_hex_digest(b.block_hash) or b.compute_hash() != b.block_hash:
                return _fail("BlockHashMismatch", where)
            empty_ok = h == 0
            if (b.start != expected_start or b.stop > len(entries)
                    or b.stop < b.start or (b.stop == b.start and not empty_ok)):
                return _fail("BlockRangeMismatch", where)
            root = merkle_root([e.entry_hash for e in entries[b.start:b.stop]])
            if root != b.merkle_root:
                return _fail("MerkleRootMismatch", where)
            prev_block, expected_start = b.block_hash, b.stop
        return VerificationReport(True)

    # persistence

    def records(self) -> list[dict]:
        """Records in append order: each block follows the entries it seals."""
        out: list[dict] = []
        for block in self._blocks:
            out.extend(e.to_record() for e in self._entries[block.start:block.stop])
            out.append(block.to_record())
        out.extend(e.to_record() for e in self._entries[self.sealed_count:])
        return out

    def to_bytes(self) -> bytes:
        return b"".join(canonical_bytes(r) + b"\n" for r in self.records())

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        data = self.to_bytes()
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_bytes(cls, data: bytes, verify: bool = True) -> "Ledger":
        ledger, report = _parse(data)
        if verify and not report.ok:
            raise LedgerCorrupted(report)
        if ledger is None:
            raise LedgerCorrupted(report)
        return ledger

    @classmethod
    def load(cls, path: str | os.PathLike, verify: bool = True) -> "Ledger":
        return cls.from_bytes(Path(path).read_bytes(), verify=verify)


def _signature_ok(entry: LedgerEntry) -> bool:
    sig = entry.signature
    try:
        return verify_signature(
            sig.scheme, bytes.fromhex(sig.public_key),
            bytes.fromhex(entry.entry_hash), bytes.fromhex(sig.value),
        )
    except (ValueError, UnsupportedScheme):
        return False


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name}")


def _parse(data: bytes) -> tuple[Optional[Ledger], VerificationReport]:
    if data and not data.endswith(b"\n"):
        return None, _fail("MalformedRecord", "end of file")
    ledger = Ledger()
    for lineno, line in enumerate(data.split(b"\n")[:-1], start=1):
        where = f"line {lineno}"
        try:
            record = json.loads(line.decode("utf-8"), parse_constant=_reject_constant)
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
            kind = record.get("kind")
            if kind == "entry":
                ledger._entries.append(LedgerEntry.from_record(record))
            elif kind == "block":
                ledger._blocks.append(Block.from_record(record))
            else:
                raise ValueError(f"unknown record kind {kind!r}")
            canonical = canonical_bytes(record)
        except (ValueError, KeyError, TypeError, AttributeError, MalformedPayload):
            return None, _fail("MalformedRecord", where)
        if canonical != line:
            return None, _fail("NonCanonicalRecord", where)
    report = ledger.verify_chain()
    if report.ok and ledger.to_bytes() != data:
        report = _fail("LayoutMismatch", "file")
    return ledger, report


def verify_file(path: str | os.PathLike) -> VerificationReport:
    """Verify a persisted ledger, including byte-level canonical layout."""
    return _parse(Path(path).read_bytes())[1]


def genesis(created_at: int) -> Ledger:
    return Ledger.genesis(created_at)
