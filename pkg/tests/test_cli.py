import json
import subprocess
import sys

import pytest

from colombeau_lab.cli import Settings, ScenarioError, acceptance_manifest_path, main, run, run_suite


def test_classify_report():
    rep = run("classify", {"expr": "(exp (neg (/ 1 eps)))"})
    assert rep["status"] == "pass"
    assert rep["result"]["negligible"]["status"] == "Proven"
    assert set(rep) >= {"kind", "inputs", "parameters", "result", "assertions", "status"}
    assert "wall_time" not in rep and "wall_time" in run("classify", {"expr": "eps"}, timing=True)


def test_alias_and_unknown_kind():
    assert run("eq", {"a": "eps", "b": "(+ eps (exp (neg (/ 1 eps))))"})["kind"] == "gn-eq"
    bad = run("frobnicate", {})
    assert bad["status"] == "error" and "unknown" in bad["error"]


def test_settings_validation_and_provenance():
    st = Settings.build({"k_max": 30})
    prov = st.provenance()
    assert prov["k_max"]["source"] == "override" and prov["k_min"]["source"] == "default"
    with pytest.raises(ScenarioError):
        Settings.build({"grid_ratio": 1.5})
    assert run("classify", {"expr": "eps"}, {"m_max": -1})["status"] == "error"


def test_expectations_can_flip_assertions():
    rep = run("classify", {"expr": "(sin (/ 1 eps))"}, expect={"negligible": "proven"})
    assert rep["status"] == "fail"
    rep = run("classify", {"expr": "eps"}, expect={"no-such-thing": "proven"})
    assert rep["status"] == "fail"


def test_empty_manifest():
    out = run_suite({"scenarios": []})
    assert out == {"summary": {"total": 0, "pass": 0, "fail": 0, "error": 0}, "reports": []}


def test_bad_path_is_isolated(tmp_path):
    (tmp_path / "dom.json").write_text(json.dumps({"dim": 1, "bounds": [[-1, 1]]}))
    manifest = {"scenarios": [
        {"kind": "gf-classify", "inputs": {"domain_file": "missing.json", "u": "x1"}},
        {"kind": "gf-classify", "inputs": {"domain_file": "dom.json", "u": "(sin x1)"}},
        {"kind": "classify", "inputs": {"expr": "(+ eps"}},
        {"nokind": True},
    ]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest))
    out = run_suite(path)
    assert [r["status"] for r in out["reports"]] == ["error", "pass", "error", "error"]
    assert out["summary"] == {"total": 4, "pass": 1, "fail": 0, "error": 3}


def test_acceptance_manifest_passes():
    out = run_suite(acceptance_manifest_path())
    assert out["summary"]["fail"] == 0 and out["summary"]["error"] == 0


def test_main_exit_codes(capsys, tmp_path):
    assert main(["classify", "(exp (neg (/ 1 eps)))", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["result"]["negligible"]["status"] == "Proven"
    assert main(["classify", "(pow -1.0 0.5)"]) == 2
    assert "pow-domain" in capsys.readouterr().err
    assert main(["suite", str(tmp_path / "nope.json")]) == 2
    assert main(["classify", "eps", "--grid-ratio", "2"]) == 2


def test_csv_emission(tmp_path):
    path = tmp_path / "net.csv"
    assert main(["classify", "(pow eps 2)", "--csv", str(path)]) == 0
    rows = path.read_text().strip().splitlines()
    assert rows[0].startswith("eps") and len(rows) == 38


def test_json_is_byte_identical_across_processes(tmp_path):
    env_runs = []
    for threads in ("1", "3"):
        cmd = [sys.executable, "-m", "colombeau_lab.cli", "suite", "--json", "--seed", "0"]
        res = subprocess.run(cmd, capture_output=True, env={"COLOMBEAU_LAB_THREADS": threads,
                                                               "PATH": "/usr/bin:/bin",
                                                               "PYTHONPATH": ":".join(sys.path)})
        env_runs.append(res.stdout)
    assert env_runs[0] and env_runs[0] == env_runs[1]
