"""Tamper-evident third-party vendor risk assessment.

A hash-chained, Merkle-rooted audit ledger underpins vendor registration,
compliance contracts, the assessment workflow, monitoring and incident
response. A Bayesian network engine ranks likely zero-day attack paths.
"""

from .ledger import (
    Block,
    EntryType,
    InclusionProof,
    Ledger,
    LedgerEntry,
    VerificationReport,
    genesis,
    verify_file,
)
from .registry import (
    ControlCatalog,
    SecurityControl,
    VendorIdentity,
    authenticate,
    builtin_catalog,
    lookup_control,
    register_vendor,
)
from .contracts import Attestation, SmartContract, Verdict, deploy_contract, evaluate, execute_actions
from .keys import Ed25519Signer

__version__ = "0.1.0"

__all__ = [
    "Attestation",
    "Block",
    "ControlCatalog",
    "Ed25519Signer",
    "EntryType",
    "InclusionProof",
    "Ledger",
    "LedgerEntry",
    "SecurityControl",
    "SmartContract",
    "VendorIdentity",
    "Verdict",
    "VerificationReport",
    "authenticate",
    "builtin_catalog",
    "deploy_contract",
    "evaluate",
    "execute_actions",
    "genesis",
    "lookup_control",
    "register_vendor",
    "verify_file",
]
