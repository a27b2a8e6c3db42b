"""Deterministic compliance contracts.

A contract is a set of required controls plus the actions to fire on pass
and on fail. Evaluation is a pure function of (contract, attestations,
timestamp); executing a verdict appends it and its actions to the ledger in
one atomic batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .canonical import hash_record, is_hex_digest
from .errors import (
    ContractVerdictMismatch,
    DuplicateContract,
    InvalidAction,
    MalformedPayload,
    MixedVendors,
    UnknownContract,
)
from .ledger import EntryType, Ledger, LedgerEntry
from .registry import ControlCatalog, builtin_catalog


class AttestationStatus(str, Enum):
    Pass = "Pass"
    Fail = "Fail"
    NotProvided = "NotProvided"


class Action(str, Enum):
    IssueCertificate = "IssueCertificate"
    NotifyStakeholders = "NotifyStakeholders"
    TriggerReassessment = "TriggerReassessment"
    EscalateToReview = "EscalateToReview"


class Outcome(str, Enum):
    Compliant = "Compliant"
    NonCompliant = "NonCompliant"


class Reason(str, Enum):
    Missing = "Missing"
    Failed = "Failed"


@dataclass(frozen=True)
class Attestation:
    vendor_id: str
    control_id: str
    status: AttestationStatus
    evidence_hash: Optional[str] = None
    attested_at: int = 0

    def __post_init__(self):
        object.__setattr__(self, "status", AttestationStatus(self.status))
        if self.status is AttestationStatus.Pass and not is_hex_digest(self.evidence_hash):
            raise MalformedPayload(
                f"Pass attestation for {self.control_id!r} needs a 64-hex evidence_hash"
            )

    @classmethod
    def from_record(cls, record: dict) -> "Attestation":
        return cls(
            vendor_id=record["vendor_id"],
            control_id=record["control_id"],
            status=AttestationStatus(record["status"]),
            evidence_hash=record.get("evidence_hash"),
            attested_at=record.get("attested_at", 0),
        )


def _actions(values: Iterable) -> tuple[Action, ...]:
    out = []
    for v in values:
        try:
            out.append(Action(v))
        except ValueError:
            raise InvalidAction(f"unknown action {v!r}") from None
    return tuple(out)


@dataclass(frozen=True)
class SmartContract:
    contract_id: str
    required_controls: frozenset[str]
    standard_label: str = ""
    actions_on_pass: tuple[Action, ...] = ()
    actions_on_fail: tuple[Action, ...] = ()
    deployed_at: int = 0

    def to_payload(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "standard_label": self.standard_label,
            "required_controls": sorted(self.required_controls),
            "actions_on_pass": [a.value for a in self.actions_on_pass],
            "actions_on_fail": [a.value for a in self.actions_on_fail],
        }

    @classmethod
    def from_spec(cls, spec: dict, deployed_at: int = 0) -> "SmartContract":
        try:
            contract_id = spec["contract_id"]
            required = spec["required_controls"]
        except KeyError as exc:
            raise MalformedPayload(f"contract spec missing {exc.args[0]!r}") from None
        if not isinstance(contract_id, str) or not contract_id:
            raise MalformedPayload("contract_id must be a non-empty string")
        return cls(
            contract_id=contract_id,
            required_controls=frozenset(required),
            standard_label=spec.get("standard_label", ""),
            actions_on_pass=_actions(spec.get("actions_on_pass", ())),
            actions_on_fail=_actions(spec.get("actions_on_fail", ())),
            deployed_at=deployed_at,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "SmartContract":
        return cls.from_spec(json.loads(Path(path).read_bytes()))


@dataclass(frozen=True)
class Verdict:
    vendor_id: str
    contract_id: str
    outcome: Outcome
    discrepancies: tuple[tuple[str, Reason], ...] = field(default=())
    certificate_hash: Optional[str] = None
    evaluated_at: int = 0

    @property
    def compliant(self) -> bool:
        return self.outcome is Outcome.Compliant

    def to_record(self) -> dict:
        return {
            "vendor_id": self.vendor_id,
            "contract_id": self.contract_id,
            "outcome": self.outcome.value,
            "discrepancies": [
                {"control_id": cid, "reason": reason.value} for cid, reason in self.discrepancies
            ],
            "certificate_hash": self.certificate_hash,
            "evaluated_at": self.evaluated_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Verdict":
        return cls(
            vendor_id=record["vendor_id"],
            contract_id=record["contract_id"],
            outcome=Outcome(record["outcome"]),
            discrepancies=tuple(
                (d["control_id"], Reason(d["reason"])) for d in record["discrepancies"]
            ),
            certificate_hash=record["certificate_hash"],
            evaluated_at=record["evaluated_at"],
        )


def deploy_contract(
    ledger: Ledger,
    contract_spec: dict | SmartContract,
    timestamp: int,
    catalog: ControlCatalog | None = None,
) -> SmartContract:
    catalog = catalog or builtin_catalog()
    if isinstance(contract_spec, SmartContract):
        contract_spec = contract_spec.to_payload()
    contract = SmartContract.from_spec(contract_spec, deployed_at=timestamp)
    catalog.require(sorted(contract.required_controls))
    with ledger._lock:
        if _deployment(ledger, contract.contract_id) is not None:
            raise DuplicateContract(f"contract {contract.contract_id!r} already deployed")
        ledger.append_entry(EntryType.ContractDeployment, contract.to_payload(), timestamp)
    return contract


def _deployment(ledger: Ledger, contract_id: str) -> Optional[LedgerEntry]:
    for e in ledger.query(EntryType.ContractDeployment):
        if e.payload["contract_id"] == contract_id:
            return e
    return None


def load_contract(ledger: Ledger, contract_id: str) -> SmartContract:
    entry = _deployment(ledger, contract_id)
    if entry is None:
        raise UnknownContract(f"contract {contract_id!r} is not deployed")
    return SmartContract.from_spec(entry.payload, deployed_at=entry.timestamp)


def certificate_hash(vendor_id: str, contract: SmartContract, evaluated_at: int) -> str:
    return hash_record({
        "vendor_id": vendor_id,
        "contract_id": contract.contract_id,
        "required_controls": sorted(contract.required_controls),
        "evaluated_at": evaluated_at,
    })


def evaluate(
    contract: SmartContract,
    attestations: Iterable[Attestation],
    timestamp: int,
    vendor_id: str | None = None,
) -> Verdict:
    """Check every required control for a Pass attestation.

    A Pass for a control outweighs any Fail for the same control. With no
    attestations at all, ``vendor_id`` names the vendor being judged.
    """
    attestations = list(attestations)
    vendor_ids = {a.vendor_id for a in attestations}
    if vendor_id is not None:
        vendor_ids.add(vendor_id)
    if len(vendor_ids) > 1:
        raise MixedVendors(f"attestations span vendors {sorted(vendor_ids)}")
    vendor = next(iter(vendor_ids), "")

    passed = {a.control_id for a in attestations if a.status is AttestationStatus.Pass}
    failed = {a.control_id for a in attestations if a.status is AttestationStatus.Fail}
    discrepancies = []
    for cid in sorted(contract.required_controls - passed):
        discrepancies.append((cid, Reason.Failed if cid in failed else Reason.Missing))

    if discrepancies:
        return Verdict(vendor, contract.contract_id, Outcome.NonCompliant,
                       tuple(discrepancies), None, timestamp)
    return Verdict(vendor, contract.contract_id, Outcome.Compliant, (),
                   certificate_hash(vendor, contract, timestamp), timestamp)


def execute_actions(
    ledger: Ledger,
    contract: SmartContract,
    verdict: Verdict,
    timestamp: int,
    assessment_id: str | None = None,
) -> list[LedgerEntry]:
    if verdict.contract_id != contract.contract_id:
        raise ContractVerdictMismatch(
            f"verdict for {verdict.contract_id!r} cannot drive contract {contract.contract_id!r}"
        )
    if verdict.compliant:
        actions = contract.actions_on_pass
    else:
        actions = contract.actions_on_fail
    context = {} if assessment_id is None else {"assessment_id": assessment_id}
    verdict_payload = {"record": "verdict", **verdict.to_record(), **context}
    batch = [(EntryType.ComplianceVerdict, verdict_payload, timestamp)]
    for position, action in enumerate(actions):
        payload = {
            "record": "action",
            "vendor_id": verdict.vendor_id,
            "contract_id": contract.contract_id,
            "action": action.value,
            "position": position,
            "outcome": verdict.outcome.value,
            **context,
        }
        if action is Action.IssueCertificate:
            payload["certificate_hash"] = verdict.certificate_hash
        batch.append((EntryType.ComplianceVerdict, payload, timestamp))
    return ledger.append_batch(batch)
