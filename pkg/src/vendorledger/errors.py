"""Exception hierarchy.

Every domain error derives from :class:`VendorLedgerError`; the CLI maps
those to exit code 1 and everything else to a crash.
"""


class VendorLedgerError(Exception):
    """Base class for all domain errors."""


class PreconditionViolation(VendorLedgerError, ValueError):
    pass


# ledger
class MalformedPayload(VendorLedgerError, ValueError):
    pass


class NonMonotonicTimestamp(VendorLedgerError):
    pass


class NoPendingEntries(VendorLedgerError):
    pass


class EntryNotSealed(VendorLedgerError):
    pass


class UnknownEntry(VendorLedgerError, KeyError):
    pass


class LedgerCorrupted(VendorLedgerError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"ledger failed verification: {report.describe()}")


# registry
class DuplicateRegistration(VendorLedgerError):
    pass


class UnsupportedScheme(VendorLedgerError):
    pass


class UnknownControl(VendorLedgerError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class VendorNotRegistered(VendorLedgerError):
    pass


# contracts
class InvalidAction(VendorLedgerError, ValueError):
    pass


class DuplicateContract(VendorLedgerError):
    pass


class UnknownContract(VendorLedgerError):
    pass


class MixedVendors(VendorLedgerError, ValueError):
    pass


class ContractVerdictMismatch(VendorLedgerError):
    pass


# assessment
class AuthenticationFailed(VendorLedgerError):
    pass


class OutOfOrder(VendorLedgerError):
    pass


class DuplicateDocument(VendorLedgerError):
    pass


class UnanchoredEvidence(VendorLedgerError):
    pass


class UnknownAssessment(VendorLedgerError):
    pass


# monitor
class VendorNotMonitoring(VendorLedgerError):
    pass


class UnknownVulnerability(VendorLedgerError):
    pass


class AlreadyRemediated(UnknownVulnerability):
    """The cited vulnerability exists but is no longer open."""


class AlreadyResponded(VendorLedgerError):
    pass


class TimeTravel(VendorLedgerError, ValueError):
    pass


class UnknownIncident(VendorLedgerError):
    pass


class NoBaselineScan(VendorLedgerError):
    pass


# bayes
class InvalidNetwork(VendorLedgerError, ValueError):
    pass


class CycleDetected(InvalidNetwork):
    pass


class UnknownParent(InvalidNetwork):
    pass


class MalformedCPT(InvalidNetwork):
    pass


class UnknownNode(VendorLedgerError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidEvidence(VendorLedgerError, ValueError):
    pass


class IncompleteAssignment(VendorLedgerError, ValueError):
    pass


class QueryIsEvidence(VendorLedgerError, ValueError):
    pass


class ZeroProbabilityEvidence(VendorLedgerError):
    pass


class MissingCompromisedState(VendorLedgerError, ValueError):
    pass
