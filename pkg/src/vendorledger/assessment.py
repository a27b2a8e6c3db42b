"""Per-vendor assessment workflow.

States advance strictly along ``STATE_ORDER``. Every transition that carries
information is written to the ledger first, so :func:`replay_assessment`
can rebuild an assessment from the ledger alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .canonical import hash_record, sha256_hex
from .contracts import Attestation, SmartContract, Verdict, evaluate, execute_actions
from .errors import (
    AuthenticationFailed,
    DuplicateDocument,
    MalformedPayload,
    MixedVendors,
    OutOfOrder,
    PreconditionViolation,
    UnanchoredEvidence,
    UnknownAssessment,
)
from .ledger import EntryType, Ledger, LedgerEntry
from .registry import ControlCatalog, VendorIdentity, authenticate, builtin_catalog, find_vendor


class State(str, Enum):
    Initiated = "Initiated"
    DocumentsSubmitted = "DocumentsSubmitted"
    ComplianceChecked = "ComplianceChecked"
    RiskAssessed = "RiskAssessed"
    AccessVerified = "AccessVerified"
    Monitoring = "Monitoring"
    Closed = "Closed"

    @property
    def rank(self) -> int:
        return STATE_ORDER.index(self)


STATE_ORDER = tuple(State)


class ScanKind(str, Enum):
    VulnerabilityScan = "VulnerabilityScan"
    PenetrationTest = "PenetrationTest"


class Severity(str, Enum):
    Low = "Low"
    Medium = "Medium"
    High = "High"
    Critical = "Critical"


class VulnStatus(str, Enum):
    Open = "Open"
    Remediated = "Remediated"


@dataclass(frozen=True)
class Vulnerability:
    vuln_id: str
    severity: Severity = Severity.Medium
    status: VulnStatus = VulnStatus.Open

    def __post_init__(self):
        object.__setattr__(self, "severity", Severity(self.severity))
        object.__setattr__(self, "status", VulnStatus(self.status))

    def to_record(self) -> dict:
        return {"vuln_id": self.vuln_id, "severity": self.severity.value,
                "status": self.status.value}

    @classmethod
    def from_record(cls, record: dict) -> "Vulnerability":
        return cls(record["vuln_id"], record.get("severity", "Medium"),
                   record.get("status", "Open"))


@dataclass(frozen=True)
class RiskScanRecord:
    vendor_id: str
    scan_kind: ScanKind
    findings: tuple[Vulnerability, ...]
    scanned_at: int

    def __post_init__(self):
        object.__setattr__(self, "scan_kind", ScanKind(self.scan_kind))
        object.__setattr__(self, "findings", tuple(self.findings))
        ids = [f.vuln_id for f in self.findings]
        if len(ids) != len(set(ids)):
            raise MalformedPayload("vuln_id values must be unique within a scan")

    @property
    def open_findings(self) -> tuple[Vulnerability, ...]:
        return tuple(f for f in self.findings if f.status is VulnStatus.Open)

    def to_record(self) -> dict:
        return {
            "vendor_id": self.vendor_id,
            "scan_kind": self.scan_kind.value,
            "findings": [f.to_record() for f in self.findings],
            "scanned_at": self.scanned_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "RiskScanRecord":
        return cls(
            vendor_id=record["vendor_id"],
            scan_kind=ScanKind(record["scan_kind"]),
            findings=tuple(Vulnerability.from_record(f) for f in record["findings"]),
            scanned_at=record["scanned_at"],
        )


@dataclass(frozen=True)
class AccessVerification:
    vendor_id: str
    mfa_enabled: bool
    rbac_enabled: bool
    policies: tuple[str, ...] = ()
    verified_at: int = 0

    @property
    def passes(self) -> bool:
        return self.mfa_enabled and self.rbac_enabled

    def to_record(self) -> dict:
        return {
            "vendor_id": self.vendor_id,
            "mfa_enabled": self.mfa_enabled,
            "rbac_enabled": self.rbac_enabled,
            "policies": list(self.policies),
            "passed": self.passes,
            "verified_at": self.verified_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "AccessVerification":
        return cls(record["vendor_id"], record["mfa_enabled"], record["rbac_enabled"],
                   tuple(record["policies"]), record["verified_at"])


@dataclass
class Assessment:
    assessment_id: str
    vendor_id: str
    state: State = State.Initiated
    document_anchors: list[tuple[str, str]] = field(default_factory=list)
    verdict: Optional[Verdict] = None
    risk_findings: Optional[RiskScanRecord] = None
    access_result: Optional[AccessVerification] = None
    started_at: int = 0
    updated_at: int = 0

    @property
    def anchored_hashes(self) -> set[str]:
        return {h for _, h in self.document_anchors}


def _require(assessment: Assessment, *allowed: State, op: str) -> None:
    if assessment.state not in allowed:
        expected = " or ".join(s.value for s in allowed)
        raise OutOfOrder(f"{op} requires state {expected}, assessment is {assessment.state.value}")


def default_assessment_id(vendor_id: str, timestamp: int) -> str:
    return "asm-" + hash_record({"vendor_id": vendor_id, "started_at": timestamp})[:16]


def start_assessment(
    ledger: Ledger,
    identity: VendorIdentity,
    challenge: bytes,
    signature: bytes,
    timestamp: int,
    assessment_id: str | None = None,
) -> Assessment:
    """Authenticate the vendor against its registered key and open an assessment."""
    registered = find_vendor(ledger, identity.vendor_id)
    if registered.public_key != identity.public_key or not authenticate(
        registered, challenge, signature
    ):
        raise AuthenticationFailed(f"signature does not verify for vendor {identity.vendor_id}")
    assessment_id = assessment_id or default_assessment_id(identity.vendor_id, timestamp)
    if _entries_for(ledger, assessment_id):
        raise PreconditionViolation(f"assessment {assessment_id!r} already exists")
    return Assessment(assessment_id, identity.vendor_id, State.Initiated,
                      started_at=timestamp, updated_at=timestamp)


def submit_document(
    ledger: Ledger,
    assessment: Assessment,
    doc_type: str,
    content: bytes,
    timestamp: int,
    signer=None,
) -> LedgerEntry:
    _require(assessment, State.Initiated, State.DocumentsSubmitted, op="submit_document")
    content_hash = sha256_hex(content)
    if (doc_type, content_hash) in assessment.document_anchors:
        raise DuplicateDocument(f"{doc_type} with hash {content_hash[:12]} already anchored")
    payload = {
        "vendor_id": assessment.vendor_id,
        "assessment_id": assessment.assessment_id,
        "assessment_started_at": assessment.started_at,
        "doc_type": doc_type,
        "content_hash": content_hash,
        "size": len(content),
    }
    entry = ledger.append_entry(EntryType.DocumentAnchor, payload, timestamp, signer=signer)
    assessment.document_anchors.append((doc_type, content_hash))
    assessment.state = State.DocumentsSubmitted
    assessment.updated_at = timestamp
    return entry


def run_compliance_check(
    ledger: Ledger,
    assessment: Assessment,
    contract: SmartContract,
    attestations: Iterable[Attestation],
    timestamp: int,
    catalog: ControlCatalog | None = None,
) -> Verdict:
    _require(assessment, State.DocumentsSubmitted, op="run_compliance_check")
    attestations = list(attestations)
    catalog = catalog or builtin_catalog()
    anchored = assessment.anchored_hashes
    for a in attestations:
        if a.vendor_id != assessment.vendor_id:
            raise MixedVendors(f"attestation from {a.vendor_id} in assessment of {assessment.vendor_id}")
        catalog.lookup(a.control_id)
        if a.evidence_hash is not None and a.evidence_hash not in anchored:
            raise UnanchoredEvidence(
                f"evidence {a.evidence_hash[:12]} for {a.control_id!r} was never anchored"
            )
    verdict = evaluate(contract, attestations, timestamp, vendor_id=assessment.vendor_id)
    execute_actions(ledger, contract, verdict, timestamp, assessment_id=assessment.assessment_id)
    assessment.verdict = verdict
    assessment.state = State.ComplianceChecked
    assessment.updated_at = timestamp
    return verdict


def record_risk_scan(ledger: Ledger, assessment: Assessment, record: RiskScanRecord) -> LedgerEntry:
    _require(assessment, State.ComplianceChecked, op="record_risk_scan")
    if record.vendor_id != assessment.vendor_id:
        raise MixedVendors(f"scan for {record.vendor_id} in assessment of {assessment.vendor_id}")
    payload = {**record.to_record(), "assessment_id": assessment.assessment_id}
    entry = ledger.append_entry(EntryType.RiskScanRecord, payload, record.scanned_at)
    assessment.risk_findings = record
    assessment.state = State.RiskAssessed
    assessment.updated_at = record.scanned_at
    return entry


def verify_access_controls(
    ledger: Ledger, assessment: Assessment, verification: AccessVerification
) -> LedgerEntry:
    """Record the access-control check; only MFA plus RBAC advances the state.

    A failing check leaves the assessment at RiskAssessed and adds a
    NonCompliant note, so the vendor can re-attest without restarting.
    """
    _require(assessment, State.RiskAssessed, op="verify_access_controls")
    if verification.vendor_id != assessment.vendor_id:
        raise MixedVendors(
            f"verification for {verification.vendor_id} in assessment of {assessment.vendor_id}"
        )
    ts = verification.verified_at
    payload = {**verification.to_record(), "assessment_id": assessment.assessment_id}
    batch = [(EntryType.AccessPolicyAttestation, payload, ts)]
    if not verification.passes:
        missing = [name for name, on in (("mfa", verification.mfa_enabled),
                                         ("rbac", verification.rbac_enabled)) if not on]
        batch.append((EntryType.ComplianceVerdict, {
            "record": "access_note",
            "vendor_id": assessment.vendor_id,
            "assessment_id": assessment.assessment_id,
            "outcome": "NonCompliant",
            "missing": missing,
        }, ts))
    entry = ledger.append_batch(batch)[0]
    assessment.access_result = verification
    assessment.updated_at = ts
    if verification.passes:
        assessment.state = State.AccessVerified
    return entry


def enter_monitoring(assessment: Assessment) -> Assessment:
    _require(assessment, State.AccessVerified, op="enter_monitoring")
    assessment.state = State.Monitoring
    return assessment


def open_vulnerability_count(assessment: Assessment) -> int:
    if assessment.risk_findings is None:
        return 0
    return len(assessment.risk_findings.open_findings)


# -- reconstruction -----------------------------------------------------------

def _entries_for(ledger: Ledger, assessment_id: str) -> list[LedgerEntry]:
    return [e for e in ledger.entries if e.payload.get("assessment_id") == assessment_id]


def replay_assessment(ledger: Ledger, assessment_id: str) -> Assessment:
    """Rebuild an assessment purely from its ledger entries.

    The monitoring phase is inferred: once access is verified, any later
    alert or incident entry for the vendor puts the assessment in Monitoring.
    """
    entries = _entries_for(ledger, assessment_id)
    anchors = [e for e in entries if e.entry_type is EntryType.DocumentAnchor]
    if not anchors:
        raise UnknownAssessment(f"no ledger entries for assessment {assessment_id!r}")
    first = anchors[0].payload
    a = Assessment(assessment_id, first["vendor_id"],
                   started_at=first["assessment_started_at"])
    verified_index = None
    for e in entries:
        p = e.payload
        if e.entry_type is EntryType.DocumentAnchor:
            a.document_anchors.append((p["doc_type"], p["content_hash"]))
            a.state = State.DocumentsSubmitted
        elif e.entry_type is EntryType.ComplianceVerdict and p["record"] == "verdict":
            a.verdict = Verdict.from_record(p)
            a.state = State.ComplianceChecked
        elif e.entry_type is EntryType.RiskScanRecord:
            a.risk_findings = RiskScanRecord.from_record(p)
            a.state = State.RiskAssessed
        elif e.entry_type is EntryType.AccessPolicyAttestation:
            a.access_result = AccessVerification.from_record(p)
            if p["passed"]:
                a.state = State.AccessVerified
                verified_index = e.index
        a.updated_at = e.timestamp
    if verified_index is not None:
        for e in ledger.entries[verified_index + 1:]:
            if (e.entry_type in (EntryType.MonitoringAlert, EntryType.IncidentAction)
                    and e.payload.get("vendor_id") == a.vendor_id):
                a.state = State.Monitoring
                break
    return a


def assessment_ids(ledger: Ledger, vendor_id: str | None = None) -> list[str]:
    seen: dict[str, None] = {}
    for e in ledger.query(EntryType.DocumentAnchor, vendor_id=vendor_id):
        seen.setdefault(e.payload["assessment_id"], None)
    return list(seen)


def challenge_for(assessment_id: str, vendor_id: str, timestamp: int) -> bytes:
    """Challenge bytes the CLI asks a vendor key to sign when opening an assessment."""
    return hashlib.sha256(
        f"vendorledger-assessment:{assessment_id}:{vendor_id}:{timestamp}".encode()
    ).digest()
