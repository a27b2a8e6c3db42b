"""Replay a case-study scenario end to end on a fresh ledger."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .assessment import (
    AccessVerification,
    RiskScanRecord,
    Vulnerability,
    challenge_for,
    enter_monitoring,
    record_risk_scan,
    run_compliance_check,
    start_assessment,
    submit_document,
    verify_access_controls,
)
from .canonical import sha256_hex
from .contracts import Attestation, deploy_contract
from .errors import PreconditionViolation
from .keys import Ed25519Signer
from .ledger import Ledger, VerificationReport
from .monitor import (
    Metrics,
    MonitoringAlert,
    compute_metrics,
    ingest_alert,
    open_incident,
    respond_incident,
)
from .registry import register_vendor

DEFAULT_CONTRACT = {
    "contract_id": "baseline-controls",
    "standard_label": "NIST SP 800-53 Rev. 5",
    "required_controls": ["sqli", "ssrf", "unauthorized_access"],
    "actions_on_pass": ["IssueCertificate"],
    "actions_on_fail": ["NotifyStakeholders", "TriggerReassessment"],
}


@dataclass
class SimulationResult:
    ledger: Ledger
    vendor_id: str
    assessment_id: str
    metrics: Metrics
    verification: VerificationReport

    def to_record(self) -> dict:
        return {
            "vendor_id": self.vendor_id,
            "assessment_id": self.assessment_id,
            "metrics": self.metrics.to_record(),
            "entries": len(self.ledger),
            "blocks": len(self.ledger.blocks),
            "head": self.ledger.blocks[-1].block_hash,
            "verified": self.verification.ok,
        }


def packaged_scenario(name: str = "ihealth.scenario.json") -> dict:
    data = resources.files("vendorledger.data").joinpath(name).read_text()
    return json.loads(data)


def load_scenario(path: str | Path) -> dict:
    """Read a scenario file, falling back to the packaged fixture of that name."""
    path = Path(path)
    if path.exists():
        return json.loads(path.read_text())
    return packaged_scenario(path.name)


def run_scenario(scenario: dict) -> SimulationResult:
    t0 = scenario.get("start_at", 0)
    vendor_cfg = scenario.get("vendor", {})
    signer = Ed25519Signer.from_seed(vendor_cfg.get("key_seed", "scenario-vendor"))
    ledger = Ledger.genesis(t0)

    identity = register_vendor(ledger, signer.public_key, vendor_cfg.get("display_name", "vendor"), t0)
    contract = deploy_contract(ledger, scenario.get("contract", DEFAULT_CONTRACT), t0)

    assessment_id = scenario.get("assessment_id", "asm-case-study")
    challenge = challenge_for(assessment_id, identity.vendor_id, t0)
    assessment = start_assessment(ledger, identity, challenge, signer.sign(challenge), t0,
                                  assessment_id=assessment_id)

    documents = scenario.get("documents") or [
        {"doc_type": "security_policy", "content": "security policy"}
    ]
    doc_hashes = {}
    t = t0
    for doc in documents:
        t += 1
        content = doc["content"].encode("utf-8")
        submit_document(ledger, assessment, doc["doc_type"], content, t, signer=signer)
        doc_hashes[doc["doc_type"]] = sha256_hex(content)

    first_doc = next(iter(doc_hashes.values()))
    raw_attestations = scenario.get("attestations") or [
        {"control_id": cid, "status": "Pass"} for cid in sorted(contract.required_controls)
    ]
    attestations = []
    for a in raw_attestations:
        evidence = doc_hashes.get(a.get("document"), first_doc) if a["status"] == "Pass" else None
        attestations.append(Attestation(identity.vendor_id, a["control_id"], a["status"], evidence, t))
    t += 1
    run_compliance_check(ledger, assessment, contract, attestations, t)

    scan_at = max(scenario.get("baseline_scan_at", t + 1), t)
    findings = tuple(Vulnerability.from_record(f) for f in scenario.get("baseline_findings", []))
    record_risk_scan(ledger, assessment,
                     RiskScanRecord(identity.vendor_id, scenario.get("scan_kind", "VulnerabilityScan"),
                                    findings, scan_at))

    access = scenario.get("access", {"mfa_enabled": True, "rbac_enabled": True})
    t = scan_at + 1
    verify_access_controls(ledger, assessment, AccessVerification(
        identity.vendor_id, access["mfa_enabled"], access["rbac_enabled"],
        tuple(access.get("policies", ())), t))
    enter_monitoring(assessment)
    ledger.seal_block(t)

    events = []
    for a in scenario.get("alerts", []):
        events.append((a["observed_at"], len(events), "alert", a))
    for inc in scenario.get("incidents", []):
        events.append((inc["detected_at"], len(events), "open", inc))
        events.append((inc["responded_at"], len(events), "respond", inc))
    events.sort(key=lambda ev: (ev[0], ev[1]))
    if events and events[0][0] < t:
        raise PreconditionViolation(
            f"scenario event at {events[0][0]} predates the end of onboarding at {t}"
        )

    opened = {}
    for at, seq, kind, item in events:
        if kind == "alert":
            ingest_alert(ledger, MonitoringAlert(identity.vendor_id, item["alert_type"],
                                                 item.get("severity", "Info"), item["subject"], at))
        elif kind == "open":
            opened[id(item)] = open_incident(ledger, identity.vendor_id, at, item.get("incident_id"))
        else:
            respond_incident(ledger, opened[id(item)], at, item.get("steps") or ["responded"])
    if ledger.pending:
        ledger.seal_block(max(t, ledger.last_timestamp))

    cutover = scenario.get("cutover_at", t)
    metrics = compute_metrics(ledger, identity.vendor_id, cutover)
    return SimulationResult(ledger, identity.vendor_id, assessment_id, metrics, ledger.verify_chain())


def format_report(result: SimulationResult, name: str = "scenario") -> str:
    m = result.metrics
    lines = [
        f"scenario: {name} (vendor {result.vendor_id})",
        f"vulnerabilities: {m.vulns_before} -> {m.vulns_after} "
        f"({m.vuln_reduction_percent}% reduction)",
    ]
    if m.response_improvement_fraction is not None:
        before_h = float(m.mean_response_before) / 3600
        after_h = float(m.mean_response_after) / 3600
        lines.append(
            f"mean incident response: {before_h:.1f} h -> {after_h:.1f} h "
            f"({m.response_improvement_percent}% improvement)"
        )
    else:
        lines.append("mean incident response: insufficient responded incidents around cutover")
    lines.append(
        f"ledger: {len(result.ledger.blocks)} blocks, {len(result.ledger)} entries, "
        f"verify {result.verification.describe()}"
    )
    return "\n".join(lines)
