from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from vendorledger.errors import (
    AlreadyRemediated,
    AlreadyResponded,
    NoBaselineScan,
    PreconditionViolation,
    TimeTravel,
    UnknownIncident,
    UnknownVulnerability,
    VendorNotMonitoring,
)
from vendorledger.keys import Ed25519Signer
from vendorledger.ledger import EntryType, Ledger
from vendorledger.monitor import (
    AssetDecision,
    AssetInventory,
    MonitoringAlert,
    check_asset,
    compute_metrics,
    decimal_str,
    incidents,
    ingest_alert,
    inventory_from_ledger,
    is_monitoring,
    load_incident,
    open_incident,
    open_vulnerabilities,
    percent,
    record_asset_change,
    respond_incident,
)

from conftest import T0, Flow

HOUR = 3600


@pytest.fixture
def monitored(flow):
    flow.happy_path(n_findings=30)
    return flow


def remediate(flow, vuln_id, at=None):
    at = flow.tick() if at is None else at
    return ingest_alert(flow.ledger, MonitoringAlert(
        flow.identity.vendor_id, "RemediationApplied", "Info", vuln_id, at))


class TestAlerts:
    def test_twenty_remediations_leave_ten(self, monitored):
        vid = monitored.identity.vendor_id
        for i in range(1, 21):
            remediate(monitored, f"VULN-{i:03d}")
        assert open_vulnerabilities(monitored.ledger, vid) == [f"VULN-{i:03d}" for i in range(21, 31)]
        m = compute_metrics(monitored.ledger, vid, T0)
        assert (m.vulns_before, m.vulns_after) == (30, 10)
        assert m.vuln_reduction_fraction == Fraction(2, 3)
        assert m.vuln_reduction_percent == 67

    def test_unknown_vulnerability(self, monitored):
        before = len(monitored.ledger)
        with pytest.raises(UnknownVulnerability):
            remediate(monitored, "VULN-999")
        assert len(monitored.ledger) == before

    def test_already_remediated(self, monitored):
        remediate(monitored, "VULN-001")
        with pytest.raises(AlreadyRemediated):
            remediate(monitored, "VULN-001")

    def test_syscall_alert_leaves_counts(self, monitored):
        vid = monitored.identity.vendor_id
        entry = ingest_alert(monitored.ledger, MonitoringAlert(
            vid, "SyscallAudit", "Warning", "execve /tmp/x", monitored.tick()))
        assert entry.entry_type is EntryType.MonitoringAlert
        assert len(open_vulnerabilities(monitored.ledger, vid)) == 30

    def test_not_monitoring(self, flow):
        flow.start()
        flow.submit()
        assert not is_monitoring(flow.ledger, flow.identity.vendor_id)
        with pytest.raises(VendorNotMonitoring):
            ingest_alert(flow.ledger, MonitoringAlert(
                flow.identity.vendor_id, "ThreatDetection", "Critical", "x", flow.tick()))

    def test_failed_access_not_monitoring(self, flow):
        flow.start()
        flow.submit()
        flow.check()
        flow.scan()
        flow.access(mfa=False)
        assert not is_monitoring(flow.ledger, flow.identity.vendor_id)

    def test_invalid_alert_type(self):
        with pytest.raises(ValueError):
            MonitoringAlert("a" * 40, "Bogus", "Info", "x", T0)


class TestAssets:
    inv = AssetInventory(frozenset({"laptop-17"}), frozenset({"usb-9"}))

    @pytest.mark.parametrize("label,decision", [
        ("laptop-17", AssetDecision.Allowed),
        ("usb-9", AssetDecision.Denied),
        ("printer-3", AssetDecision.Unknown),
    ])
    def test_check(self, label, decision):
        assert check_asset(self.inv, label) is decision

    def test_disjoint(self):
        with pytest.raises(ValueError):
            AssetInventory(frozenset({"a"}), frozenset({"a"}))

    def test_blacklist_moves(self):
        assert check_asset(self.inv.blacklist("laptop-17"), "laptop-17") is AssetDecision.Denied

    def test_ledger_inventory(self, ledger):
        record_asset_change(ledger, "laptop-17", "authorized", T0)
        record_asset_change(ledger, "usb-9", "unauthorized", T0)
        record_asset_change(ledger, "laptop-17", "unauthorized", T0 + 1)
        inv = inventory_from_ledger(ledger)
        assert inv.unauthorized == {"laptop-17", "usb-9"}
        assert inv.authorized == frozenset()

    def test_bad_status(self, ledger):
        with pytest.raises(PreconditionViolation):
            record_asset_change(ledger, "x", "maybe", T0)

    @given(st.lists(st.tuples(st.sampled_from("abcde"), st.booleans()), max_size=30))
    def test_inventory_stays_disjoint(self, ops):
        inv = AssetInventory()
        for label, ok in ops:
            inv = inv.authorize(label) if ok else inv.blacklist(label)
            assert not inv.authorized & inv.unauthorized
        for label in "abcde":
            last = [ok for lb, ok in ops if lb == label]
            expected = AssetDecision.Unknown if not last else (
                AssetDecision.Allowed if last[-1] else AssetDecision.Denied)
            assert check_asset(inv, label) is expected


class TestIncidents:
    def test_forty_eight_hours(self, monitored):
        vid = monitored.identity.vendor_id
        inc = open_incident(monitored.ledger, vid, T0 + 10 * HOUR)
        done = respond_incident(monitored.ledger, inc, T0 + 58 * HOUR, ["isolate", "patch"])
        assert done.response_seconds == 172800
        assert load_incident(monitored.ledger, inc.incident_id) == done
        steps = [e for e in monitored.ledger.query(EntryType.IncidentAction) if e.payload["kind"] == "Responded"]
        assert [e.payload["step"] for e in steps] == ["isolate", "patch"]

    def test_explicit_step_times(self, monitored):
        vid = monitored.identity.vendor_id
        inc = open_incident(monitored.ledger, vid, T0 + HOUR)
        done = respond_incident(monitored.ledger, inc, T0 + 2 * HOUR,
                                [("isolate", T0 + 2 * HOUR), ("patch", T0 + 3 * HOUR)])
        assert done.remediation_steps[-1] == ("patch", T0 + 3 * HOUR)

    def test_steps_out_of_order(self, monitored):
        inc = open_incident(monitored.ledger, monitored.identity.vendor_id, T0 + HOUR)
        with pytest.raises(TimeTravel):
            respond_incident(monitored.ledger, inc, T0 + 2 * HOUR,
                             [("patch", T0 + 3 * HOUR), ("isolate", T0 + 2 * HOUR)])

    def test_time_travel(self, monitored):
        inc = open_incident(monitored.ledger, monitored.identity.vendor_id, T0 + 10 * HOUR)
        before = len(monitored.ledger)
        with pytest.raises(TimeTravel):
            respond_incident(monitored.ledger, inc, T0 + 9 * HOUR, ["late"])
        assert len(monitored.ledger) == before

    def test_already_responded(self, monitored):
        inc = open_incident(monitored.ledger, monitored.identity.vendor_id, T0 + HOUR)
        respond_incident(monitored.ledger, inc, T0 + 2 * HOUR, ["x"])
        with pytest.raises(AlreadyResponded):
            respond_incident(monitored.ledger, inc, T0 + 3 * HOUR, ["y"])

    def test_empty_steps(self, monitored):
        inc = open_incident(monitored.ledger, monitored.identity.vendor_id, T0 + HOUR)
        with pytest.raises(PreconditionViolation):
            respond_incident(monitored.ledger, inc, T0 + 2 * HOUR, [])

    def test_unknown(self, monitored):
        with pytest.raises(UnknownIncident):
            respond_incident(monitored.ledger, "inc-9999", T0 + HOUR, ["x"])

    def test_distinct_ids(self, monitored):
        vid = monitored.identity.vendor_id
        ids = [open_incident(monitored.ledger, vid, T0 + i * HOUR).incident_id for i in range(1, 4)]
        assert ids == ["inc-0001", "inc-0002", "inc-0003"]
        assert [r.incident_id for r in incidents(monitored.ledger, vid)] == ids

    def test_requires_monitoring(self, flow):
        flow.start()
        with pytest.raises(VendorNotMonitoring):
            open_incident(flow.ledger, flow.identity.vendor_id, flow.tick())


class TestMetrics:
    def test_response_improvement(self, monitored):
        vid = monitored.identity.vendor_id
        cut = T0 + 1000 * HOUR
        a = open_incident(monitored.ledger, vid, T0 + 10 * HOUR)
        respond_incident(monitored.ledger, a, T0 + 58 * HOUR, ["contain"])
        b = open_incident(monitored.ledger, vid, cut + HOUR)
        respond_incident(monitored.ledger, b, cut + 13 * HOUR, ["contain"])
        m = compute_metrics(monitored.ledger, vid, cut)
        assert m.mean_response_before == 48 * HOUR
        assert m.mean_response_after == 12 * HOUR
        assert m.response_improvement_fraction == Fraction(3, 4)
        assert m.response_improvement_percent == 75

    def test_no_remediations(self, monitored):
        m = compute_metrics(monitored.ledger, monitored.identity.vendor_id, T0)
        assert m.vuln_reduction_fraction == 0
        assert m.response_improvement_fraction is None

    def test_no_scan(self, ledger):
        with pytest.raises(NoBaselineScan):
            compute_metrics(ledger, "a" * 40, T0)

    def test_identical_after_reload(self, monitored, tmp_path):
        vid = monitored.identity.vendor_id
        for i in range(1, 11):
            remediate(monitored, f"VULN-{i:03d}")
        monitored.ledger.seal_block(monitored.t)
        path = tmp_path / "l.jsonl"
        monitored.ledger.save(path)
        again = Ledger.load(path)
        assert compute_metrics(again, vid, T0) == compute_metrics(monitored.ledger, vid, T0)

    @given(st.lists(st.integers(0, 10**6), min_size=1, max_size=6),
           st.lists(st.integers(0, 10**6), min_size=1, max_size=6))
    @settings(max_examples=40, deadline=None)
    def test_means_match_direct_sum(self, early, late):
        flow = Flow(Ledger.genesis(T0), Ed25519Signer.from_seed("m"))
        flow.happy_path(1)
        vid = flow.identity.vendor_id
        cut = T0 + 10**8
        for base, durations in ((T0 + 100, early), (cut, late)):
            for i, dur in enumerate(durations):
                inc = open_incident(flow.ledger, vid, base + i * 2 * 10**6)
                respond_incident(flow.ledger, inc, base + i * 2 * 10**6 + dur, ["x"])
        m = compute_metrics(flow.ledger, vid, cut)
        assert m.mean_response_before == Fraction(sum(early), len(early))
        assert m.mean_response_after == Fraction(sum(late), len(late))


@pytest.mark.parametrize("frac,expected", [
    (Fraction(2, 3), 67), (Fraction(3, 4), 75), (Fraction(1, 200), 1),
    (Fraction(1, 201), 0), (Fraction(0), 0), (Fraction(1), 100),
])
def test_percent(frac, expected):
    assert percent(frac) == expected


def test_decimal_str():
    assert decimal_str(Fraction(2, 3)) == "0.666666666667"
    assert decimal_str(Fraction(3, 4)) == "0.750000000000"
    assert decimal_str(172800) == "172800.000000000000"
