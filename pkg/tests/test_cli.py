import json
import subprocess
import sys

import pytest

from sspbound import corpus
from sspbound.cli import Report, main

from conftest import ZERO_MODEL


def path(name):
    return str(corpus.path(name))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_summary(capsys):
    code, out, _ = run(capsys, "parse", path("gambler"))
    assert code == 0 and "|X|=1 |R|=2 k=2" in out


@pytest.mark.parametrize("name,upper", [
    ("gambler", "2x"), ("robot2d", "5x - 5y + 5"), ("mini_roulette", "11x"), ("american_roulette", "24x"),
])
def test_bound_text(capsys, name, upper):
    code, out, _ = run(capsys, "bound", path(name))
    assert code == 0
    assert f"sup upper bound: {upper}" in out


def test_bound_json_round_trip(capsys):
    code, out, _ = run(capsys, "bound", path("gambler"), "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1 and doc["status"] == "ok"
    assert Report.from_dict(doc).to_dict() == doc
    assert [c["side"] for c in doc["certificates"]] == ["upper", "lower"]


def test_bound_init_override(capsys):
    code, out, _ = run(capsys, "bound", path("gambler"), "--side", "upper", "--init", "x=5")
    assert code == 0 and "(at x0: 10)" in out


def test_bound_no_certificate(capsys):
    code, out, _ = run(capsys, "bound", path("log"), "--side", "upper")
    assert code == 1 and "no linear certificate" in out


def test_bound_inf_motzkin(capsys):
    code, out, _ = run(capsys, "bound", path("gambler"), "--problem", "inf", "--lower-strategy", "motzkin", "--init", "x=5")
    assert code == 0 and "inf upper bound" in out and "inf lower bound" in out


def test_input_errors(capsys, tmp_path):
    bad = tmp_path / "bad.smdp"
    bad.write_text("var x = 1;\nwhile x >= 1 do { while x >= 2 do { x := x - 1; } od } od\n")
    assert run(capsys, "parse", str(bad))[0] == 2
    assert run(capsys, "bound", path("gambler"), "--init", "z=1")[0] == 2
    assert run(capsys, "simulate", path("gambler"), "--policy", "always:9")[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["bound", path("gambler"), "--trials", "5"])
    assert e.value.code == 2


def test_missing_file_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "parse", str(tmp_path / "nope.smdp"))
    assert code == 3 and "cannot read" in err


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", path("gambler"), "--init", "x=5", "--trials", "20000", "--seed", "1",
                       "--format", "json")
    assert code == 0
    est = json.loads(out)["estimates"][0]
    assert abs(est["mean"] - 10) < 4 * est["stderr"]


def test_simulate_single_trial(capsys):
    code, out, _ = run(capsys, "simulate", path("gambler"), "--trials", "1")
    assert code == 0 and "stderr null" in out


def test_simulate_unreliable(capsys):
    code, out, _ = run(capsys, "simulate", path("gambler"), "--trials", "100", "--step-cap", "3")
    assert code == 1 and "unreliable" in out


def test_certify_round_trip(capsys, tmp_path):
    out = tmp_path / "cert.json"
    assert run(capsys, "bound", path("gambler"), "--format", "json", "--out", str(out))[0] == 0
    assert run(capsys, "certify", path("gambler"), str(out))[0] == 0
    doc = json.loads(out.read_text())
    doc["certificates"][0]["a"] = {"x": 1.0}
    doc["certificates"][0].pop("exact", None)
    out.write_text(json.dumps(doc))
    code, text, _ = run(capsys, "certify", path("gambler"), str(out))
    assert code == 1 and "(C3) violated for ℓ=1" in text


def test_certify_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "certify", path("gambler"), str(bad))[0] == 2


def test_zero_model_certificates(capsys, tmp_path):
    # [TRIVIAL] no reward: both bounds are the zero function
    m = tmp_path / "zero.smdp"
    m.write_text(ZERO_MODEL)
    cert = tmp_path / "cert.json"
    assert run(capsys, "bound", str(m), "--format", "json", "--out", str(cert))[0] == 0
    doc = json.loads(cert.read_text())
    assert all(c["value_at_init"] == 0 for c in doc["certificates"])
    assert run(capsys, "certify", str(m), str(cert))[0] == 0


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "sspbound.cli", "parse", path("gambler")], capture_output=True, text=True)
    assert r.returncode == 0 and "k=2" in r.stdout
