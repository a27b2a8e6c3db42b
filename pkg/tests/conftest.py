from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vendorledger import assessment as asm
from vendorledger.contracts import Attestation, deploy_contract
from vendorledger.keys import Ed25519Signer
from vendorledger.ledger import Ledger
from vendorledger.registry import register_vendor

T0 = 1_700_000_000
# RFC 8032 section 7.1, test 1
RFC8032_SECRET = bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
RFC8032_PUBLIC = bytes.fromhex("d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a")

CONTRACT_SPEC = {
    "contract_id": "nist-baseline",
    "standard_label": "NIST SP 800-53 Rev. 5",
    "required_controls": ["ssrf", "sqli"],
    "actions_on_pass": ["IssueCertificate"],
    "actions_on_fail": ["NotifyStakeholders", "EscalateToReview"],
}


@pytest.fixture
def signer():
    return Ed25519Signer.from_private_bytes(RFC8032_SECRET)


@pytest.fixture
def ledger():
    return Ledger.genesis(T0)


class Flow:
    """Drives one vendor through the workflow on a shared ledger."""

    def __init__(self, ledger: Ledger, signer: Ed25519Signer, t: int = T0):
        self.ledger = ledger
        self.signer = signer
        self.t = t
        self.identity = register_vendor(ledger, signer.public_key, "iHealth", self.tick())
        self.contract = None
        self.docs = 0

    def tick(self) -> int:
        self.t += 1
        return self.t

    def start(self, assessment_id="asm-1"):
        at = self.tick()
        challenge = asm.challenge_for(assessment_id, self.identity.vendor_id, at)
        self.assessment = asm.start_assessment(
            self.ledger, self.identity, challenge, self.signer.sign(challenge), at,
            assessment_id=assessment_id)
        return self.assessment

    def submit(self, content: bytes | None = None, doc_type="security_policy"):
        self.docs += 1
        content = content if content is not None else f"document {self.docs}".encode()
        entry = asm.submit_document(self.ledger, self.assessment, doc_type, content, self.tick())
        if self.contract is None:
            self.contract = deploy_contract(self.ledger, CONTRACT_SPEC, self.tick())
        return entry

    def attest(self, status="Pass", controls=("ssrf", "sqli")):
        evidence = self.assessment.document_anchors[0][1] if self.assessment.document_anchors else None
        return [Attestation(self.identity.vendor_id, c, status,
                            evidence if status == "Pass" else None, self.t) for c in controls]

    def check(self, attestations=None):
        attestations = self.attest() if attestations is None else attestations
        return asm.run_compliance_check(self.ledger, self.assessment, self.contract,
                                        attestations, self.tick())

    def scan(self, n_findings=3):
        findings = tuple(asm.Vulnerability(f"VULN-{i:03d}", "High") for i in range(1, n_findings + 1))
        record = asm.RiskScanRecord(self.identity.vendor_id, "VulnerabilityScan", findings, self.tick())
        return asm.record_risk_scan(self.ledger, self.assessment, record)

    def access(self, mfa=True, rbac=True):
        v = asm.AccessVerification(self.identity.vendor_id, mfa, rbac, ("MFA", "RBAC"), self.tick())
        return asm.verify_access_controls(self.ledger, self.assessment, v)

    def monitor(self):
        return asm.enter_monitoring(self.assessment)

    def happy_path(self, n_findings=3):
        self.start()
        self.submit()
        self.check()
        self.scan(n_findings)
        self.access()
        self.monitor()
        return self.assessment


@pytest.fixture
def flow(ledger, signer):
    return Flow(ledger, signer)


def run_cli_script(workdir: Path) -> tuple[Path, list[int]]:
    """Drive a full vendor lifecycle through the CLI in replay mode.

    Returns the ledger path and each command's exit code.
    """
    import json

    from vendorledger.cli import main
    from vendorledger.registry import derive_vendor_id

    workdir.mkdir(parents=True, exist_ok=True)
    ledger = workdir / "ledger.jsonl"
    key = workdir / "vendor.key"
    policy = workdir / "policy.txt"
    policy.write_text("all access requires MFA\n")
    (workdir / "contract.json").write_text(json.dumps(CONTRACT_SPEC))
    (workdir / "atts.json").write_text(json.dumps([
        {"control_id": "ssrf", "status": "Pass", "evidence_file": str(policy)},
        {"control_id": "sqli", "status": "Pass", "evidence_file": str(policy)},
    ]))
    (workdir / "scan.json").write_text(json.dumps({
        "scan_kind": "PenetrationTest",
        "findings": [{"vuln_id": f"VULN-{i:03d}", "severity": "High"} for i in range(1, 4)],
    }))
    vendor = derive_vendor_id(Ed25519Signer.from_seed("cli-vendor").public_key)
    base = ["--ledger", str(ledger), "--replay"]
    script = [
        ["init", "--at", str(T0)],
        ["keygen", "--seed", "cli-vendor", "--out", str(key)],
        ["register", "--key", str(key), "--name", "iHealth"],
        ["deploy-contract", str(workdir / "contract.json")],
        ["submit-doc", "--assessment", "asm-1", "--key", str(key), "--doc-type",
         "security_policy", str(policy)],
        ["check-compliance", "--assessment", "asm-1", "--contract", "nist-baseline",
         "--attestations", str(workdir / "atts.json")],
        ["record-scan", "--assessment", "asm-1", str(workdir / "scan.json")],
        ["verify-access", "--assessment", "asm-1", "--mfa", "--rbac", "--policy", "MFA"],
        ["monitor", "ingest", "--vendor", vendor, "--type", "RemediationApplied",
         "--subject", "VULN-001"],
        ["monitor", "asset", "laptop-17", "--status", "authorized", "--vendor", vendor],
        ["incident", "open", "--vendor", vendor],
        ["incident", "respond", "inc-0001", "--step", "isolate", "--step", "patch"],
    ]
    codes = [main(base + argv) for argv in script]
    return ledger, codes
