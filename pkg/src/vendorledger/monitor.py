"""Continuous monitoring, incident response and before/after metrics.

All derived state (open vulnerabilities, incident timelines, the asset
inventory) is recomputed from the ledger, so metrics are a pure function of
the ledger contents.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import (
    AlreadyRemediated,
    AlreadyResponded,
    NoBaselineScan,
    PreconditionViolation,
    TimeTravel,
    UnknownIncident,
    UnknownVulnerability,
    VendorNotMonitoring,
)
from .assessment import RiskScanRecord
from .ledger import EntryType, Ledger, LedgerEntry


class AlertType(str, Enum):
    SyscallAudit = "SyscallAudit"
    ThreatDetection = "ThreatDetection"
    AnomalyFlag = "AnomalyFlag"
    RemediationApplied = "RemediationApplied"


class AlertSeverity(str, Enum):
    Info = "Info"
    Warning = "Warning"
    Critical = "Critical"


@dataclass(frozen=True)
class MonitoringAlert:
    vendor_id: str
    alert_type: AlertType
    severity: AlertSeverity
    subject: str
    observed_at: int

    def __post_init__(self):
        object.__setattr__(self, "alert_type", AlertType(self.alert_type))
        object.__setattr__(self, "severity", AlertSeverity(self.severity))

    def to_record(self) -> dict:
        return {
            "vendor_id": self.vendor_id,
            "alert_type": self.alert_type.value,
            "severity": self.severity.value,
            "subject": self.subject,
            "observed_at": self.observed_at,
        }


def is_monitoring(ledger: Ledger, vendor_id: str) -> bool:
    """A vendor is monitored once some assessment of it passed access verification."""
    return any(
        e.payload.get("passed") is True
        for e in ledger.query(EntryType.AccessPolicyAttestation, vendor_id=vendor_id)
    )


def _require_monitoring(ledger: Ledger, vendor_id: str) -> None:
    if not is_monitoring(ledger, vendor_id):
        raise VendorNotMonitoring(f"vendor {vendor_id} has not reached the monitoring phase")


def baseline_scan(ledger: Ledger, vendor_id: str) -> RiskScanRecord:
    scans = ledger.query(EntryType.RiskScanRecord, vendor_id=vendor_id)
    if not scans:
        raise NoBaselineScan(f"no risk scan recorded for vendor {vendor_id}")
    return RiskScanRecord.from_record(scans[0].payload)


def remediated_vulnerabilities(ledger: Ledger, vendor_id: str) -> list[str]:
    return [
        e.payload["subject"]
        for e in ledger.query(EntryType.MonitoringAlert, vendor_id=vendor_id)
        if e.payload["alert_type"] == AlertType.RemediationApplied.value
    ]


def open_vulnerabilities(ledger: Ledger, vendor_id: str) -> list[str]:
    """Baseline open findings minus every remediation seen since, in scan order."""
    baseline = baseline_scan(ledger, vendor_id)
    fixed = set(remediated_vulnerabilities(ledger, vendor_id))
    return [f.vuln_id for f in baseline.open_findings if f.vuln_id not in fixed]


def ingest_alert(ledger: Ledger, alert: MonitoringAlert) -> LedgerEntry:
    with ledger._lock:
        _require_monitoring(ledger, alert.vendor_id)
        if alert.alert_type is AlertType.RemediationApplied:
            try:
                known = {f.vuln_id for f in baseline_scan(ledger, alert.vendor_id).findings}
            except NoBaselineScan:
                known = set()
            if alert.subject not in known:
                raise UnknownVulnerability(f"unknown vulnerability {alert.subject!r}")
            if alert.subject not in open_vulnerabilities(ledger, alert.vendor_id):
                raise AlreadyRemediated(f"vulnerability {alert.subject!r} is not open")
        return ledger.append_entry(EntryType.MonitoringAlert, alert.to_record(), alert.observed_at)


# -- asset inventory ----------------------------------------------------------

class AssetDecision(str, Enum):
    Allowed = "Allowed"
    Denied = "Denied"
    Unknown = "Unknown"


@dataclass(frozen=True)
class AssetInventory:
    authorized: frozenset[str] = frozenset()
    unauthorized: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "authorized", frozenset(self.authorized))
        object.__setattr__(self, "unauthorized", frozenset(self.unauthorized))
        overlap = self.authorized & self.unauthorized
        if overlap:
            raise ValueError(f"assets both authorized and unauthorized: {sorted(overlap)}")

    def authorize(self, label: str) -> "AssetInventory":
        return AssetInventory(self.authorized | {label}, self.unauthorized - {label})

    def blacklist(self, label: str) -> "AssetInventory":
        return AssetInventory(self.authorized - {label}, self.unauthorized | {label})


def check_asset(inventory: AssetInventory, asset_label: str) -> AssetDecision:
    if asset_label in inventory.authorized:
        return AssetDecision.Allowed
    if asset_label in inventory.unauthorized:
        return AssetDecision.Denied
    return AssetDecision.Unknown


def record_asset_change(
    ledger: Ledger, asset: str, status: str, timestamp: int, vendor_id: str | None = None
) -> LedgerEntry:
    if status not in ("authorized", "unauthorized"):
        raise PreconditionViolation(f"asset status must be authorized or unauthorized, got {status!r}")
    payload = {"asset": asset, "status": status}
    if vendor_id is not None:
        payload["vendor_id"] = vendor_id
    return ledger.append_entry(EntryType.AssetInventoryChange, payload, timestamp)


def inventory_from_ledger(ledger: Ledger, vendor_id: str | None = None) -> AssetInventory:
    inv = AssetInventory()
    for e in ledger.query(EntryType.AssetInventoryChange, vendor_id=vendor_id):
        if e.payload["status"] == "authorized":
            inv = inv.authorize(e.payload["asset"])
        else:
            inv = inv.blacklist(e.payload["asset"])
    return inv


# -- incidents ----------------------------------------------------------------

@dataclass(frozen=True)
class IncidentRecord:
    incident_id: str
    vendor_id: str
    detected_at: int
    responded_at: Optional[int] = None
    remediation_steps: tuple[tuple[str, int], ...] = ()

    @property
    def response_seconds(self) -> Optional[int]:
        if self.responded_at is None:
            return None
        return self.responded_at - self.detected_at

    def to_record(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "vendor_id": self.vendor_id,
            "detected_at": self.detected_at,
            "responded_at": self.responded_at,
            "remediation_steps": [{"step": s, "at": at} for s, at in self.remediation_steps],
        }


def incidents(ledger: Ledger, vendor_id: str | None = None) -> list[IncidentRecord]:
    """Rebuild incident timelines from IncidentAction entries, in detection order."""
    found: dict[str, IncidentRecord] = {}
    for e in ledger.query(EntryType.IncidentAction, vendor_id=vendor_id):
        p = e.payload
        if p["kind"] == "Detected":
            found[p["incident_id"]] = IncidentRecord(p["incident_id"], p["vendor_id"], p["detected_at"])
        elif p["kind"] == "Responded":
            rec = found[p["incident_id"]]
            found[p["incident_id"]] = IncidentRecord(
                rec.incident_id, rec.vendor_id, rec.detected_at, p["responded_at"],
                rec.remediation_steps + ((p["step"], p["step_at"]),),
            )
    return list(found.values())


def load_incident(ledger: Ledger, incident_id: str) -> IncidentRecord:
    for rec in incidents(ledger):
        if rec.incident_id == incident_id:
            return rec
    raise UnknownIncident(f"unknown incident {incident_id!r}")


def open_incident(
    ledger: Ledger, vendor_id: str, detected_at: int, incident_id: str | None = None
) -> IncidentRecord:
    with ledger._lock:
        _require_monitoring(ledger, vendor_id)
        existing = incidents(ledger)
        if incident_id is None:
            incident_id = f"inc-{len(existing) + 1:04d}"
        elif any(r.incident_id == incident_id for r in existing):
            raise PreconditionViolation(f"incident {incident_id!r} already exists")
        payload = {"vendor_id": vendor_id, "incident_id": incident_id,
                   "kind": "Detected", "detected_at": detected_at}
        ledger.append_entry(EntryType.IncidentAction, payload, detected_at)
    return IncidentRecord(incident_id, vendor_id, detected_at)


def respond_incident(
    ledger: Ledger,
    incident: IncidentRecord | str,
    responded_at: int,
    steps: Sequence[str | tuple[str, int]],
) -> IncidentRecord:
    """Record the response and its remediation steps, one entry per step.

    Bare step strings are stamped with ``responded_at``; explicit step times
    must not precede it and must be non-decreasing.
    """
    with ledger._lock:
        incident_id = incident if isinstance(incident, str) else incident.incident_id
        current = load_incident(ledger, incident_id)
        if current.responded_at is not None:
            raise AlreadyResponded(f"incident {incident_id!r} already has a response")
        if responded_at < current.detected_at:
            raise TimeTravel(
                f"responded_at {responded_at} precedes detected_at {current.detected_at}"
            )
        timed = [(s, responded_at) if isinstance(s, str) else (s[0], s[1]) for s in steps]
        if not timed:
            raise PreconditionViolation("a response needs at least one remediation step")
        last = responded_at
        for text, at in timed:
            if at < last:
                raise TimeTravel(f"step {text!r} at {at} is out of order")
            last = at
        batch = [
            (EntryType.IncidentAction, {
                "vendor_id": current.vendor_id,
                "incident_id": incident_id,
                "kind": "Responded",
                "detected_at": current.detected_at,
                "responded_at": responded_at,
                "step": text,
                "step_at": at,
                "position": pos,
            }, at)
            for pos, (text, at) in enumerate(timed)
        ]
        ledger.append_batch(batch)
    return IncidentRecord(incident_id, current.vendor_id, current.detected_at,
                          responded_at, tuple(timed))


# -- metrics ------------------------------------------------------------------

def percent(fraction: Fraction) -> int:
    """Whole percent, rounding halves up (2/3 -> 67)."""
    scaled = fraction * 100
    return int((scaled + Fraction(1, 2)) // 1)


def decimal_str(value: Fraction | int, digits: int = 12) -> str:
    value = Fraction(value)
    sign = "-" if value < 0 else ""
    scaled = int((abs(value) * 10**digits + Fraction(1, 2)) // 1)
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


@dataclass(frozen=True)
class Metrics:
    vulns_before: int
    vulns_after: int
    vuln_reduction_fraction: Fraction
    mean_response_before: Optional[Fraction] = None
    mean_response_after: Optional[Fraction] = None
    response_improvement_fraction: Optional[Fraction] = None

    @property
    def vuln_reduction_percent(self) -> int:
        return percent(self.vuln_reduction_fraction)

    @property
    def response_improvement_percent(self) -> Optional[int]:
        if self.response_improvement_fraction is None:
            return None
        return percent(self.response_improvement_fraction)

    def to_record(self) -> dict:
        """JSON-safe view: ratios become fixed 12-digit decimal strings."""
        def opt(v):
            return None if v is None else decimal_str(v)
        return {
            "vulns_before": self.vulns_before,
            "vulns_after": self.vulns_after,
            "vuln_reduction_fraction": decimal_str(self.vuln_reduction_fraction),
            "vuln_reduction_percent": self.vuln_reduction_percent,
            "mean_response_before_s": opt(self.mean_response_before),
            "mean_response_after_s": opt(self.mean_response_after),
            "response_improvement_fraction": opt(self.response_improvement_fraction),
            "response_improvement_percent": self.response_improvement_percent,
        }


def _mean(values: Iterable[int]) -> Optional[Fraction]:
    values = list(values)
    if not values:
        return None
    return Fraction(sum(values), len(values))


def compute_metrics(ledger: Ledger, vendor_id: str, cutover_at: int) -> Metrics:
    baseline = baseline_scan(ledger, vendor_id)
    before = len(baseline.open_findings)
    after = len(open_vulnerabilities(ledger, vendor_id))
    reduction = Fraction(before - after, before) if before else Fraction(0)

    responded = [r for r in incidents(ledger, vendor_id) if r.responded_at is not None]
    mean_before = _mean(r.response_seconds for r in responded if r.detected_at < cutover_at)
    mean_after = _mean(r.response_seconds for r in responded if r.detected_at >= cutover_at)
    improvement = None
    if mean_before is not None and mean_after is not None:
        improvement = (mean_before - mean_after) / mean_before if mean_before else Fraction(0)
    return Metrics(before, after, reduction, mean_before, mean_after, improvement)
