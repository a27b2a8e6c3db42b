"""Command-line front end.

Exit codes: 0 success, 1 domain error (one diagnostic line on stderr),
2 usage error. ``--format json`` prints exactly one canonical JSON document.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import assessment as asm
from . import bayes, monitor
from .canonical import canonical_bytes, sha256_hex
from .contracts import Attestation, deploy_contract, load_contract
from .errors import UnknownAssessment, VendorLedgerError
from .keys import Ed25519Signer
from .ledger import EntryType, Ledger, verify_file
from .registry import (
    ControlCatalog,
    builtin_catalog,
    derive_vendor_id,
    find_vendor,
    register_vendor,
)
from .simulate import format_report, load_scenario, run_scenario

DEFAULT_LEDGER = "vendorledger.jsonl"


class CliError(VendorLedgerError):
    pass


# -- helpers ------------------------------------------------------------------

def _emit(args, record: dict, text: str) -> None:
    if args.format == "json":
        sys.stdout.write(canonical_bytes(record).decode("utf-8") + "\n")
    else:
        print(text)


def _load(args) -> Ledger:
    path = Path(args.ledger)
    if not path.exists():
        raise CliError(f"ledger {path} does not exist; run `init` first")
    return Ledger.load(path)


def _at(args, ledger: Optional[Ledger] = None) -> int:
    if getattr(args, "at", None) is not None:
        return args.at
    if args.replay:
        return 0 if ledger is None else ledger.last_timestamp + 1
    return int(time.time())


def _commit(args, ledger: Ledger, at: int) -> None:
    """Seal everything this command appended into one block and persist."""
    if ledger.pending:
        ledger.seal_block(max(at, ledger.last_timestamp))
    ledger.save(args.ledger)


def _catalog(args) -> ControlCatalog:
    return ControlCatalog.from_file(args.catalog) if args.catalog else builtin_catalog()


def _read_signer(path: str) -> Ed25519Signer:
    raw = Path(path).read_text().strip()
    try:
        return Ed25519Signer.from_private_bytes(bytes.fromhex(raw))
    except ValueError:
        raise CliError(f"{path} does not hold a hex ed25519 private key") from None


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _entry_text(e) -> str:
    return f"{e.index:>5} {e.timestamp} {e.entry_type.value:<24} {e.entry_hash[:16]}"


def _open_assessment(args, ledger: Ledger) -> asm.Assessment:
    try:
        return asm.replay_assessment(ledger, args.assessment)
    except UnknownAssessment:
        raise CliError(f"unknown assessment {args.assessment!r}") from None


# -- ledger-level commands ----------------------------------------------------

def cmd_init(args) -> int:
    path = Path(args.ledger)
    if path.exists() and not args.force:
        raise CliError(f"{path} already exists (use --force to overwrite)")
    ledger = Ledger.genesis(_at(args))
    ledger.save(path)
    g = ledger.blocks[0]
    _emit(args, {"ledger": str(path), "genesis": g.block_hash},
          f"initialized {path} (genesis {g.block_hash[:16]})")
    return 0


def cmd_keygen(args) -> int:
    signer = Ed25519Signer.from_seed(args.seed) if args.seed else Ed25519Signer.generate()
    Path(args.out).write_text(signer.private_bytes().hex() + "\n")
    os.chmod(args.out, 0o600)
    record = {"public_key": signer.public_key.hex(), "vendor_id": derive_vendor_id(signer.public_key)}
    _emit(args, record, f"vendor_id {record['vendor_id']}\npublic_key {record['public_key']}")
    return 0


def cmd_verify(args) -> int:
    report = verify_file(args.ledger)
    _emit(args, report.to_record(), report.describe())
    return 0 if report.ok else 1


def cmd_prove(args) -> int:
    ledger = _load(args)
    proof = ledger.prove_inclusion(args.index)
    root = ledger.blocks[proof.block_height].merkle_root
    record = {**proof.to_record(), "merkle_root": root, "verified": proof.verify(root)}
    lines = [f"entry {proof.entry_index} in block {proof.block_height}",
             f"root {root}"]
    lines += [f"  {side:<5} {sib}" for sib, side in proof.path]
    lines.append("verified" if record["verified"] else "NOT verified")
    _emit(args, record, "\n".join(lines))
    return 0


def cmd_query(args) -> int:
    ledger = _load(args)
    hits = ledger.query(args.type, args.vendor, (args.start, args.end))
    _emit(args, {"entries": [e.to_record() for e in hits]},
          "\n".join(_entry_text(e) for e in hits) or "no matching entries")
    return 0


def cmd_seal(args) -> int:
    ledger = _load(args)
    at = _at(args, ledger)
    block = ledger.seal_block(max(at, ledger.last_timestamp))
    ledger.save(args.ledger)
    _emit(args, block.to_record(), f"sealed block {block.height} ({block.block_hash[:16]})")
    return 0


# -- registry and contracts ---------------------------------------------------

def cmd_register(args) -> int:
    ledger = _load(args)
    if args.key:
        public_key = _read_signer(args.key).public_key
    elif args.public_key:
        public_key = bytes.fromhex(args.public_key)
    else:
        raise CliError("register needs --key or --public-key")
    at = _at(args, ledger)
    identity = register_vendor(ledger, public_key, args.name, at)
    _commit(args, ledger, at)
    _emit(args, {"vendor_id": identity.vendor_id, "registered_at": at},
          f"registered {args.name} as {identity.vendor_id}")
    return 0


def cmd_catalog(args) -> int:
    catalog = _catalog(args)
    if args.action == "export":
        data = catalog.to_json()
        if args.out:
            Path(args.out).write_bytes(data + b"\n")
        else:
            sys.stdout.write(data.decode("utf-8") + "\n")
        return 0
    control = catalog.lookup(args.control_id)
    _emit(args, control.to_record(),
          f"{control.control_id} [{control.nist_family.value}] {control.threat_name}\n"
          f"  {control.countermeasure}")
    return 0


def cmd_deploy_contract(args) -> int:
    ledger = _load(args)
    at = _at(args, ledger)
    contract = deploy_contract(ledger, _read_json(args.file), at, catalog=_catalog(args))
    _commit(args, ledger, at)
    _emit(args, contract.to_payload(), f"deployed contract {contract.contract_id}")
    return 0


# -- assessment workflow ------------------------------------------------------

def cmd_submit_doc(args) -> int:
    ledger = _load(args)
    signer = _read_signer(args.key)
    vendor = find_vendor(ledger, derive_vendor_id(signer.public_key))
    at = _at(args, ledger)
    if args.assessment in asm.assessment_ids(ledger):
        a = asm.replay_assessment(ledger, args.assessment)
        if a.vendor_id != vendor.vendor_id:
            raise CliError(f"assessment {args.assessment!r} belongs to another vendor")
    else:
        challenge = asm.challenge_for(args.assessment, vendor.vendor_id, at)
        a = asm.start_assessment(ledger, vendor, challenge, signer.sign(challenge), at,
                                 assessment_id=args.assessment)
    entry = asm.submit_document(ledger, a, args.doc_type, Path(args.file).read_bytes(), at,
                                signer=signer)
    _commit(args, ledger, at)
    _emit(args, {"assessment_id": a.assessment_id, "content_hash": entry.payload["content_hash"],
                 "entry_index": entry.index, "state": a.state.value},
          f"anchored {args.doc_type} {entry.payload['content_hash'][:16]} (entry {entry.index})")
    return 0


def cmd_check_compliance(args) -> int:
    ledger = _load(args)
    a = _open_assessment(args, ledger)
    contract = load_contract(ledger, args.contract)
    at = _at(args, ledger)
    attestations = []
    for raw in _read_json(args.attestations):
        evidence = raw.get("evidence_hash")
        if raw.get("evidence_file"):
            evidence = sha256_hex(Path(raw["evidence_file"]).read_bytes())
        attestations.append(Attestation(raw.get("vendor_id", a.vendor_id), raw["control_id"],
                                        raw["status"], evidence, raw.get("attested_at", at)))
    verdict = asm.run_compliance_check(ledger, a, contract, attestations, at, catalog=_catalog(args))
    _commit(args, ledger, at)
    text = f"{verdict.outcome.value}"
    if verdict.certificate_hash:
        text += f" (certificate {verdict.certificate_hash[:16]})"
    for cid, reason in verdict.discrepancies:
        text += f"\n  {cid}: {reason.value}"
    _emit(args, verdict.to_record(), text)
    return 0


def cmd_record_scan(args) -> int:
    ledger = _load(args)
    a = _open_assessment(args, ledger)
    at = _at(args, ledger)
    raw = _read_json(args.file)
    if isinstance(raw, list):
        raw = {"findings": raw}
    record = asm.RiskScanRecord(
        a.vendor_id, raw.get("scan_kind", "VulnerabilityScan"),
        tuple(asm.Vulnerability.from_record(f) for f in raw["findings"]), at)
    entry = asm.record_risk_scan(ledger, a, record)
    _commit(args, ledger, at)
    _emit(args, {"entry_index": entry.index, "open": asm.open_vulnerability_count(a)},
          f"recorded scan with {len(record.findings)} findings "
          f"({asm.open_vulnerability_count(a)} open)")
    return 0


def cmd_verify_access(args) -> int:
    ledger = _load(args)
    a = _open_assessment(args, ledger)
    at = _at(args, ledger)
    v = asm.AccessVerification(a.vendor_id, args.mfa, args.rbac, tuple(args.policy or ()), at)
    asm.verify_access_controls(ledger, a, v)
    _commit(args, ledger, at)
    _emit(args, {"passed": v.passes, "state": a.state.value},
          f"access controls {'verified' if v.passes else 'NOT verified'}; state {a.state.value}")
    return 0


# -- monitoring ---------------------------------------------------------------

def cmd_monitor(args) -> int:
    ledger = _load(args)
    if args.action == "check-asset":
        decision = monitor.check_asset(monitor.inventory_from_ledger(ledger, args.vendor), args.label)
        _emit(args, {"asset": args.label, "decision": decision.value}, decision.value)
        return 0
    at = _at(args, ledger)
    if args.action == "ingest":
        alert = monitor.MonitoringAlert(args.vendor, args.type, args.severity, args.subject, at)
        entry = monitor.ingest_alert(ledger, alert)
        record = {"entry_index": entry.index}
        text = f"ingested {args.type} alert (entry {entry.index})"
        if alert.alert_type is monitor.AlertType.RemediationApplied:
            record["open"] = len(monitor.open_vulnerabilities(ledger, args.vendor))
            text += f"; {record['open']} vulnerabilities open"
    else:
        status = "authorized" if args.status == "authorized" else "unauthorized"
        entry = monitor.record_asset_change(ledger, args.label, status, at, vendor_id=args.vendor)
        record = {"entry_index": entry.index, "asset": args.label, "status": status}
        text = f"{args.label} marked {status}"
    _commit(args, ledger, at)
    _emit(args, record, text)
    return 0


def cmd_incident(args) -> int:
    ledger = _load(args)
    at = _at(args, ledger)
    if args.action == "open":
        rec = monitor.open_incident(ledger, args.vendor, at, args.id)
        text = f"opened {rec.incident_id}"
    else:
        rec = monitor.respond_incident(ledger, args.incident_id, at, args.step or [])
        text = f"responded to {rec.incident_id} after {rec.response_seconds / 3600:.1f} h"
    _commit(args, ledger, at)
    _emit(args, rec.to_record(), text)
    return 0


def cmd_metrics(args) -> int:
    ledger = _load(args)
    m = monitor.compute_metrics(ledger, args.vendor, args.cutover)
    text = f"vulnerabilities: {m.vulns_before} -> {m.vulns_after} ({m.vuln_reduction_percent}% reduction)"
    if m.response_improvement_fraction is not None:
        text += (f"\nmean incident response: {float(m.mean_response_before) / 3600:.1f} h -> "
                 f"{float(m.mean_response_after) / 3600:.1f} h "
                 f"({m.response_improvement_percent}% improvement)")
    _emit(args, m.to_record(), text)
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_scenario(scenario)
    if args.out:
        result.ledger.save(args.out)
    _emit(args, result.to_record(), format_report(result, scenario.get("name", "scenario")))
    return 0 if result.verification.ok else 1


# -- bayes --------------------------------------------------------------------

def cmd_bayes(args) -> int:
    network = bayes.load_network(args.network)
    evidence = bayes.parse_evidence(args.evidence or [])
    if args.action == "build":
        record = {"nodes": list(network.topological_order),
                  "edges": [list(e) for e in network.edges()]}
        _emit(args, record, f"valid network: {len(network)} nodes, {len(network.edges())} edges")
    elif args.action == "query":
        dist = bayes.posterior(network, args.node, evidence)
        _emit(args, {"node": args.node, "posterior": {s: f"{p:.12f}" for s, p in dist.items()}},
              "\n".join(f"{s}: {p:.6f}" for s, p in dist.items()))
    else:
        paths = bayes.extract_attack_paths(network, evidence, args.threshold, args.compromised_state)
        text = "\n".join(f"{p.score:.6f}  {' -> '.join(p.nodes)}" for p in paths)
        _emit(args, {"paths": [p.to_record() for p in paths]}, text or "no attack paths")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vendorledger",
        description="Tamper-evident third-party vendor risk assessment ledger.",
    )
    parser.add_argument("--ledger", default=os.environ.get("VENDORLEDGER_PATH", DEFAULT_LEDGER),
                        help="ledger file (default: $VENDORLEDGER_PATH or %(default)s)")
    parser.add_argument("--catalog", help="control catalog JSON replacing the built-in one")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    parser.add_argument("--replay", action="store_true",
                        help="default timestamps to last ledger timestamp + 1")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=func)
        return p

    def at(p):
        p.add_argument("--at", type=int, help="Unix seconds for this action")

    p = add("init", cmd_init, help="create a ledger with its genesis block")
    at(p)
    p.add_argument("--force", action="store_true")

    p = add("keygen", cmd_keygen, help="write a new ed25519 vendor key")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", help="derive the key deterministically from this text")

    p = add("register", cmd_register, help="register a vendor identity")
    p.add_argument("--key", help="private key file (public key is derived)")
    p.add_argument("--public-key", help="raw public key as hex")
    p.add_argument("--name", required=True)
    at(p)

    p = add("catalog", cmd_catalog, help="export or show security controls")
    csub = p.add_subparsers(dest="action", required=True)
    c = csub.add_parser("export")
    c.add_argument("--out")
    c = csub.add_parser("show")
    c.add_argument("control_id")

    p = add("deploy-contract", cmd_deploy_contract, help="deploy a compliance contract")
    p.add_argument("file")
    at(p)

    p = add("submit-doc", cmd_submit_doc, help="anchor a vendor document hash")
    p.add_argument("--assessment", required=True)
    p.add_argument("--key", required=True, help="vendor private key file")
    p.add_argument("--doc-type", required=True)
    p.add_argument("file")
    at(p)

    p = add("check-compliance", cmd_check_compliance, help="evaluate a contract")
    p.add_argument("--assessment", required=True)
    p.add_argument("--contract", required=True)
    p.add_argument("--attestations", required=True, help="JSON list of attestations")
    at(p)

    p = add("record-scan", cmd_record_scan, help="record a vulnerability scan")
    p.add_argument("--assessment", required=True)
    p.add_argument("file", help="JSON {scan_kind, findings}")
    at(p)

    p = add("verify-access", cmd_verify_access, help="record access-control verification")
    p.add_argument("--assessment", required=True)
    p.add_argument("--mfa", action="store_true")
    p.add_argument("--rbac", action="store_true")
    p.add_argument("--policy", action="append")
    at(p)

    p = add("monitor", cmd_monitor, help="monitoring alerts and asset inventory")
    msub = p.add_subparsers(dest="action", required=True)
    m = msub.add_parser("ingest")
    m.add_argument("--vendor", required=True)
    m.add_argument("--type", required=True, choices=[t.value for t in monitor.AlertType])
    m.add_argument("--severity", default="Info", choices=[s.value for s in monitor.AlertSeverity])
    m.add_argument("--subject", required=True)
    at(m)
    m = msub.add_parser("asset")
    m.add_argument("label")
    m.add_argument("--status", required=True, choices=("authorized", "unauthorized"))
    m.add_argument("--vendor")
    at(m)
    m = msub.add_parser("check-asset")
    m.add_argument("label")
    m.add_argument("--vendor")

    p = add("incident", cmd_incident, help="open or respond to incidents")
    isub = p.add_subparsers(dest="action", required=True)
    i = isub.add_parser("open")
    i.add_argument("--vendor", required=True)
    i.add_argument("--id")
    at(i)
    i = isub.add_parser("respond")
    i.add_argument("incident_id")
    i.add_argument("--step", action="append", help="remediation step (repeatable)")
    at(i)

    p = add("metrics", cmd_metrics, help="vulnerability and response-time metrics")
    p.add_argument("--vendor", required=True)
    p.add_argument("--cutover", type=int, required=True)

    add("verify", cmd_verify, help="verify the ledger file")

    p = add("prove", cmd_prove, help="Merkle inclusion proof for an entry")
    p.add_argument("index", type=int)

    p = add("query", cmd_query, help="list ledger entries")
    p.add_argument("--type", choices=[t.value for t in EntryType])
    p.add_argument("--vendor")
    p.add_argument("--from", dest="start", type=int)
    p.add_argument("--to", dest="end", type=int)

    p = add("seal", cmd_seal, help="seal pending entries into a block")
    at(p)

    p = add("bayes", cmd_bayes, help="Bayesian attack-path analysis")
    bsub = p.add_subparsers(dest="action", required=True)
    for name in ("build", "query", "paths"):
        b = bsub.add_parser(name)
        b.add_argument("network", help="network spec JSON")
        b.add_argument("--evidence", nargs="*", help="name=state pairs")
        if name == "query":
            b.add_argument("--node", required=True)
        if name == "paths":
            b.add_argument("--threshold", type=float, default=bayes.DEFAULT_THRESHOLD)
            b.add_argument("--compromised-state", default="true")

    p = add("simulate", cmd_simulate, help="run a case-study scenario")
    p.add_argument("scenario")
    p.add_argument("--out", help="also write the resulting ledger here")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VendorLedgerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
