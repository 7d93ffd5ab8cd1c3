import json
import subprocess
import sys

import pytest

from ghzt.cli import main, parse_allocation
from ghzt.resource import MessageState


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- run


def test_run_prints_unit_fidelity(capsys):
    code, out, _ = run(capsys, "run", "-m", 3, "-n", 1, "--seed", 7)
    assert code == 0
    assert "fidelity: 1.000000000" in out


def test_run_withheld_bit_fails(capsys, tmp_path):
    path = tmp_path / "t.json"
    code, out, err = run(capsys, "run", "-m", 3, "-n", 1, "--withhold", "c2", "--seed", 7, "-o", path)
    assert code == 1
    assert "MissingClassicalBit: c2" in out
    events = json.loads(path.read_text())["events"]
    assert any(e["type"] == "missing_classical_bit" and e["bit"] == "c2" for e in events)


def test_run_no_assert(capsys):
    code, *_ = run(capsys, "run", "--withhold", "c2", "--seed", 3, "--no-assert")
    assert code == 0


def test_run_distributed(capsys):
    code, out, _ = run(
        capsys, "run", "-m", 4, "-n", 2, "--mode", "distributed", "--allocation", "0:0,1:1"
    )
    assert code == 0
    assert "fidelity: 1.000000000" in out


def test_allocation_implies_distributed(capsys):
    code, out, _ = run(capsys, "run", "-m", 4, "-n", 2, "--allocation", "2:1")
    assert code == 0 and "mode=distributed" in out


def test_run_json_is_byte_identical(capsys):
    argv = ("run", "-m", 3, "-n", 2, "--seed", 12, "--format", "json")
    a = run(capsys, *argv)[1]
    b = run(capsys, *argv)[1]
    assert a == b
    data = json.loads(a)
    assert set(data) == {"config", "message", "events", "fidelity"}


def test_seed_env_fallback(capsys, monkeypatch):
    explicit = run(capsys, "run", "--seed", 21, "--format", "json")[1]
    monkeypatch.setenv("GHZT_SEED", "21")
    implicit = run(capsys, "run", "--format", "json")[1]
    assert explicit == implicit


def test_bad_seed_env(capsys, monkeypatch):
    monkeypatch.setenv("GHZT_SEED", "abc")
    assert run(capsys, "run")[0] == 2


def test_run_message_file(capsys, tmp_path):
    path = tmp_path / "msg.json"
    path.write_text(MessageState.from_amplitudes([0.6, 0.8]).to_json())
    code, out, _ = run(capsys, "run", "--message", path, "--format", "json")
    assert code == 0
    assert json.loads(out)["message"]["amplitudes"] == [[0.6, 0.0], [0.8, 0.0]]
    assert run(capsys, "run", "-n", 2, "--message", path)[0] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ("run", "-m", "2"),
        ("run", "--receiver", "0"),
        ("run", "--withhold", "cx"),
        ("run", "--withhold", "c9"),
        ("run", "-n", "2", "--allocation", "1:5"),
        ("run", "-m", "4", "-n", "2", "--allocation", "1:0,2:0"),
        ("run", "-m", "4", "--allocation", "3:0"),
        ("run", "--message", "/nonexistent.json"),
        ("table", "-m", "6", "-n", "3"),
        ("hinton", "--format", "png"),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


@pytest.mark.parametrize("argv", [("run", "--bogus"), ("audit", "--trials", "0"), ("nope",)])
def test_parser_rejects(capsys, argv):
    with pytest.raises(SystemExit) as info:
        main(list(argv))
    assert info.value.code == 2


def test_parse_allocation_defaults_to_sender():
    assert parse_allocation("1:1", 3) == {0: [0, 2], 1: [1]}
    assert parse_allocation(None, 2) is None


# ---------------------------------------------------------------- verify


def test_verify_single(capsys):
    code, out, _ = run(capsys, "verify", "-m", 3, "-n", 1)
    assert code == 0
    assert "8/8 branches OK" in out


def test_verify_default_sweep(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    assert len(out.strip().splitlines()) == 6
    assert "m=5 n=2" in out and "1024/1024 branches OK" in out


def test_verify_failure_exit_1(capsys):
    code, out, _ = run(capsys, "verify", "-m", 3, "-n", 2, "--mode", "minimal")
    assert code == 1
    assert "failed branch" in out


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "-m", 4, "-n", 1, "--format", "json")
    (report,) = json.loads(out)
    assert code == 0 and report["branches_checked"] == 16 and report["failures"] == []


# ---------------------------------------------------------------- table


def test_table_three_party_post(capsys):
    code, out, _ = run(capsys, "table", "-m", 3, "-n", 1, "--stage", "post")
    assert code == 0
    rows = out.strip().splitlines()[2:]
    assert [r.split()[-1] for r in rows] == ["I", "Z", "X", "XZ", "Z", "I", "ZX", "ZXZ"]


@pytest.mark.parametrize("m,n,count", [(4, 1, 4), (3, 2, 16)])
def test_table_pre_row_counts(capsys, m, n, count):
    code, out, _ = run(capsys, "table", "-m", m, "-n", n, "--stage", "pre", "--format", "md")
    assert code == 0
    assert len(out.strip().splitlines()) == count + 2


def test_table_csv_and_json(capsys):
    out = run(capsys, "table", "--format", "csv")[1]
    lines = out.strip().splitlines()
    assert lines[0] == "bell_bits,controller_bits,state,rotation" and len(lines) == 9
    data = json.loads(run(capsys, "table", "-m", 4, "--format", "json")[1])
    assert len(data["rows"]) == 16


# ---------------------------------------------------------------- audit


def test_audit_minimal_report(capsys, tmp_path):
    report = tmp_path / "audit.json"
    plot = tmp_path / "audit.png"
    code, out, _ = run(
        capsys, "audit", "--mode", "minimal", "-m", 4, "-n", 2, "--trials", 50,
        "-o", report, "--plot", plot,
    )
    assert code == 0
    data = json.loads(report.read_text())
    assert {"min", "mean", "max", "fidelities"} <= set(data)
    assert len(data["fidelities"]) == 50
    assert "mean fidelity" in out
    assert plot.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_audit_formats(capsys):
    data = json.loads(run(capsys, "audit", "--trials", 5, "--format", "json")[1])
    assert data["min"] == pytest.approx(1, abs=1e-10)
    csv_out = run(capsys, "audit", "--trials", 5, "--format", "csv", "--workers", 2)[1]
    assert csv_out.splitlines()[0] == "trial,fidelity" and len(csv_out.splitlines()) == 6


# ---------------------------------------------------------------- hinton


def test_hinton_from_transcript(capsys, tmp_path):
    transcript = tmp_path / "t.json"
    svg = tmp_path / "out.svg"
    assert run(capsys, "run", "--seed", 7, "-o", transcript)[0] == 0
    assert run(capsys, "hinton", "--from", transcript, "--format", "svg", "-o", svg)[0] == 0
    text = svg.read_text()
    assert text.startswith("<?xml") and 'data-diagram="rho_in"' in text and 'data-diagram="rho_out"' in text


def test_hinton_text_json_and_pdf(capsys, tmp_path):
    code, out, _ = run(capsys, "hinton", "--format", "text", "--width", 4)
    assert code == 0 and out.startswith("rho_in") and "rho_out" in out
    data = json.loads(run(capsys, "hinton", "--format", "json")[1])
    assert set(data) == {"rho_in", "rho_out"}
    assert data["rho_in"]["labels"] == ["|0⟩", "|1⟩"]
    pdf = tmp_path / "h.pdf"
    assert run(capsys, "hinton", "--format", "pdf", "-o", pdf)[0] == 0
    assert pdf.read_bytes().startswith(b"%PDF")


def test_hinton_direct_matches_transcript(capsys, tmp_path):
    transcript = tmp_path / "t.json"
    run(capsys, "run", "--seed", 5, "-o", transcript)
    a = run(capsys, "hinton", "--from", transcript)[1]
    b = run(capsys, "hinton", "--seed", 5)[1]
    assert a == b


# ---------------------------------------------------------------- entry points


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ghzt", "verify", "-m", "3", "-n", "1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert "8/8 branches OK" in proc.stdout
