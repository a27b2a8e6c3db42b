import json

import pytest

from vendorledger.canonical import canonical_bytes
from vendorledger.cli import main
from vendorledger.ledger import Ledger, verify_file

from conftest import T0, run_cli_script


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ledger_path(tmp_path, capsys):
    path = tmp_path / "l.jsonl"
    assert run(capsys, "--ledger", str(path), "init", "--at", str(T0))[0] == 0
    return path


def test_init_and_verify(capsys, ledger_path):
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "verify")
    assert (code, out.strip()) == (0, "ok")


def test_init_refuses_overwrite(capsys, ledger_path):
    code, _, err = run(capsys, "--ledger", str(ledger_path), "init")
    assert code == 1
    assert err.startswith("error:")


def test_env_var_ledger(capsys, ledger_path, monkeypatch):
    monkeypatch.setenv("VENDORLEDGER_PATH", str(ledger_path))
    assert run(capsys, "verify")[0] == 0


def test_missing_ledger(capsys, tmp_path):
    code, _, err = run(capsys, "--ledger", str(tmp_path / "none.jsonl"), "query")
    assert code == 1
    assert len(err.strip().splitlines()) == 1


def test_verify_detects_tampering(capsys, ledger_path):
    data = ledger_path.read_bytes()
    ledger_path.write_bytes(data.replace(b'"height":0', b'"height":1'))
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "verify")
    assert code == 1
    assert out.startswith("BlockLinkMismatch")


@pytest.mark.parametrize("argv", [[], ["nonsense"], ["prove"], ["bayes", "query", "x.json"],
                                  ["--format", "xml", "verify"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_every_mutating_command_appends(tmp_path, capsys):
    ledger_path, codes = run_cli_script(tmp_path / "w")
    capsys.readouterr()
    assert codes == [0] * len(codes)
    ledger = Ledger.load(ledger_path)
    # genesis plus one block per mutating command
    assert len(ledger.blocks) == 1 + 10
    assert all(b.stop > b.start for b in ledger.blocks[1:])
    assert verify_file(ledger_path).ok
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "verify")
    assert (code, out.strip()) == (0, "ok")


def test_replay_timestamps_increase(tmp_path):
    ledger_path, _ = run_cli_script(tmp_path / "w")
    stamps = [e.timestamp for e in Ledger.load(ledger_path).entries]
    assert stamps == sorted(stamps)
    assert stamps[0] == T0 + 1


def test_out_of_order_command(tmp_path, capsys):
    ledger_path, _ = run_cli_script(tmp_path / "w")
    capsys.readouterr()
    before = ledger_path.read_bytes()
    code, _, err = run(capsys, "--ledger", str(ledger_path), "--replay", "record-scan",
                       "--assessment", "asm-1", str(tmp_path / "w" / "scan.json"))
    assert code == 1
    assert "requires state" in err
    assert ledger_path.read_bytes() == before


def test_json_output_is_canonical(tmp_path, capsys):
    ledger_path, _ = run_cli_script(tmp_path / "w")
    capsys.readouterr()
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "--format", "json", "query",
                       "--type", "IncidentAction")
    assert code == 0
    doc = json.loads(out)
    assert out.rstrip("\n").encode() == canonical_bytes(doc)
    assert [e["payload"]["kind"] for e in doc["entries"]] == ["Detected", "Responded", "Responded"]


def test_prove(tmp_path, capsys):
    ledger_path, _ = run_cli_script(tmp_path / "w")
    capsys.readouterr()
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "--format", "json", "prove", "3")
    assert code == 0
    assert json.loads(out)["verified"] is True


def test_metrics_and_asset(tmp_path, capsys):
    ledger_path, _ = run_cli_script(tmp_path / "w")
    capsys.readouterr()
    from vendorledger.keys import Ed25519Signer
    from vendorledger.registry import derive_vendor_id
    vendor = derive_vendor_id(Ed25519Signer.from_seed("cli-vendor").public_key)
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "metrics", "--vendor", vendor,
                       "--cutover", str(T0))
    assert code == 0
    assert "3 -> 2 (33% reduction)" in out
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "monitor", "check-asset", "laptop-17")
    assert out.strip() == "Allowed"
    code, out, _ = run(capsys, "--ledger", str(ledger_path), "monitor", "check-asset", "usb-9")
    assert out.strip() == "Unknown"


def test_catalog(capsys, tmp_path):
    code, out, _ = run(capsys, "catalog", "show", "zero_day")
    assert code == 0 and "Bayesian network" in out
    assert run(capsys, "catalog", "show", "nonexistent")[0] == 1
    out_file = tmp_path / "cat.json"
    assert run(capsys, "catalog", "export", "--out", str(out_file))[0] == 0
    assert len(json.loads(out_file.read_text())) == 15


def test_bayes_query(capsys):
    code, out, _ = run(capsys, "bayes", "query", "alarm.bayes.json", "--node", "Burglary",
                       "--evidence", "Alarm=true")
    assert code == 0
    assert out.splitlines()[0] == "true: 0.900000"


def test_bayes_paths(capsys):
    code, out, _ = run(capsys, "bayes", "paths", "alarm.bayes.json", "--evidence", "Alarm=true")
    assert out.strip() == "0.900000  Alarm -> Burglary"


def test_bayes_bad_evidence(capsys):
    code, _, err = run(capsys, "bayes", "query", "alarm.bayes.json", "--node", "Burglary",
                       "--evidence", "Alarm=maybe")
    assert code == 1


def test_simulate(capsys, tmp_path):
    out_file = tmp_path / "sim.jsonl"
    code, out, _ = run(capsys, "simulate", "ihealth.scenario.json", "--out", str(out_file))
    assert code == 0
    assert "30 -> 10 (67% reduction)" in out
    assert "48.0 h -> 12.0 h (75% improvement)" in out
    assert verify_file(out_file).ok


def test_keygen_seed_deterministic(capsys, tmp_path):
    a = run(capsys, "--format", "json", "keygen", "--seed", "x", "--out", str(tmp_path / "a"))[1]
    b = run(capsys, "--format", "json", "keygen", "--seed", "x", "--out", str(tmp_path / "b"))[1]
    assert a == b
    assert (tmp_path / "a").read_text() == (tmp_path / "b").read_text()
