import json
import subprocess
import sys

import pytest

from unidecay.cli import main, parse_config, problem_hash, serialize_config
from unidecay.errors import ConfigError

DIAG = {"kind": "matrix-family",
        "problem": {"base": [[0, 0], [0, -1]], "coefficients": [[[-1, 0], [0, -1]]], "q1": 1.0, "nu": 0.5},
        "kappas": [0.25, 0.5, 0.75]}


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1]) if out else None


@pytest.fixture
def certified(tmp_path, capsys):
    cfg = _write(tmp_path, "diag.json", DIAG)
    out = str(tmp_path / "out")
    code, summary = _run(capsys, ["certify", cfg, "--out", out])
    assert code == 0
    return cfg, out, summary


def test_certify_writes_three_envelopes(certified):
    cfg, out, summary = certified
    assert [e["kappa"] for e in summary["envelopes"]] == [0.25, 0.5, 0.75]
    with open(summary["certificate"]) as fh:
        cert = json.load(fh)
    assert len(cert["envelopes"]) == 3
    # a simple zero eigenvalue selects the simple-eigenvalue envelope with its eps4 ledger
    assert all(e["tag"] == "uniform-simple" and "eps4" in e for e in cert["envelopes"])
    for key in ("sector", "family_cert", "nu", "M2", "eps0", "eps1", "M3", "evidence"):
        assert key in cert


def test_validate_passes(certified, capsys):
    cfg, out, summary = certified
    code, res = _run(capsys, ["validate", cfg, summary["certificate"], "--out", out])
    assert code == 0 and res["passed"]
    with open(res["results"][0]["csv"]) as fh:
        lines = fh.read().split("\n")
    assert lines[0] == "alpha,t,measured_norm,envelope,ratio"


def test_validate_edited_prefactor_fails(certified, capsys, tmp_path):
    cfg, out, summary = certified
    with open(summary["certificate"]) as fh:
        cert = json.load(fh)
    cert["envelopes"][1]["prefactor"] = {"log": -5.0, "value": None}
    bad = _write(tmp_path, "bad.json", cert)
    code, res = _run(capsys, ["validate", cfg, bad, "--out", out])
    assert code == 3 and not res["passed"]
    failed = [r for r in res["results"] if not r["passed"]]
    assert [r["kappa"] for r in failed] == [0.5]
    assert failed[0]["witness"][4] > 1


def test_validate_hash_mismatch(certified, capsys, tmp_path):
    cfg, out, summary = certified
    other = dict(DIAG, problem=dict(DIAG["problem"], q1=0.5))
    code, res = _run(capsys, ["validate", _write(tmp_path, "other.json", other), summary["certificate"],
                              "--out", out])
    assert code == 2 and res["error"] == "HashMismatch"


def test_rd_d_condition_violation(tmp_path, capsys):
    cfg = _write(tmp_path, "rd.json", {"kind": "rd", "problem": {"D": 2.5, "n": 64}})
    code, res = _run(capsys, ["certify", cfg, "--out", str(tmp_path)])
    assert code == 2 and res["error"] == "DConditionViolated"
    assert res["details"]["rho"] >= 1


def test_unknown_key_rejected(tmp_path, capsys):
    with pytest.raises(ConfigError):
        parse_config(json.dumps(dict(DIAG, colour="red")))
    with pytest.raises(ConfigError):
        parse_config(json.dumps(dict(DIAG, problem=dict(DIAG["problem"], extra=1))))
    with pytest.raises(ConfigError):
        parse_config(json.dumps(dict(DIAG, kappas=[1.0])))
    code, res = _run(capsys, ["certify", _write(tmp_path, "x.json", dict(DIAG, colour="red")),
                              "--out", str(tmp_path)])
    assert code == 2 and res["error"] == "ConfigError"


def test_config_round_trip():
    cfg = parse_config(json.dumps(DIAG))
    again = parse_config(serialize_config(cfg))
    assert again == cfg and problem_hash(again) == problem_hash(cfg)


def test_scan_single_point(tmp_path, capsys):
    cfg = _write(tmp_path, "s.json", {"kind": "rd", "problem": {"n": 64}, "grids": {"xi": [0.0]}})
    code, res = _run(capsys, ["scan", cfg, "--out", str(tmp_path)])
    assert code == 0 and res["rows"] == 1
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert lines[0] == "xi,alpha,weighted_sup,log_prefactor,spectral_abscissa" and len(lines) == 2
    assert not list(tmp_path.glob("*.png"))


def test_scan_rejects_matrix_family(tmp_path, capsys):
    code, res = _run(capsys, ["scan", _write(tmp_path, "d.json", DIAG), "--out", str(tmp_path)])
    assert code == 2 and res["error"] == "ConfigError"


def test_appendix_reports(tmp_path, capsys):
    code, res = _run(capsys, ["appendix", "--out", str(tmp_path)])
    assert code == 0 and len(res["files"]) == 4
    for path in res["files"][:3]:
        with open(path) as fh:
            rep = json.load(fh)
        # every destabilization report: positive perturbed eigenvalue, negative definite W0
        assert rep["lambda_star"] > 0 and rep["W0_negdef"] and rep["W0_max_eig"] < -1e-6
        assert rep["zero_simple"]


def test_reruns_are_byte_identical(tmp_path, capsys):
    cfg = _write(tmp_path, "diag.json", DIAG)
    texts = []
    for sub in ("a", "b"):
        assert main(["certify", cfg, "--out", str(tmp_path / sub)]) == 0
        texts.append((tmp_path / sub / "certificate.json").read_bytes())
    capsys.readouterr()
    assert texts[0] == texts[1]


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "unidecay.cli", "appendix", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["command"] == "appendix"
