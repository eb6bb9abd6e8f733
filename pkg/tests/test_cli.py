import json
import subprocess
import sys

import pytest

from itermem.cli import bundled_scenes, main, round12

SCENE = {
    "quadrature": {"rule": "gauss", "points_per_axis": 64},
    "forms": [
        {"name": "dx1", "dim": 2, "degree": 1, "coeffs": {"1": "1"}},
        {"name": "dx2", "dim": 2, "degree": 1, "coeffs": {"2": "1"}},
        {"name": "vol", "dim": 2, "degree": 2, "coeffs": {"1,2": "x1"}},
    ],
    "membranes": [
        {"name": "parabola", "cube_dim": 1, "ambient_dim": 2, "components": ["t1", "t1^2"]},
        {"name": "square", "cube_dim": 2, "ambient_dim": 2, "components": ["t1", "t2"]},
    ],
    "integrands": [
        {"name": "I", "cube_dim": 2, "cuts": [1, 1], "slots": [{"j": [1, 1], "form": "vol", "J": [1, 2]}]},
    ],
    "checks": [
        {"name": "parabola", "type": "path-shuffle", "path": "parabola", "forms1": ["dx1"], "forms2": ["dx2"]},
    ],
}


@pytest.fixture
def scene(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(SCENE, indent=2))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_shuffle_count(capsys):
    code, out, _ = run(capsys, "shuffles", "count", 2, 1)
    assert code == 0 and out.strip() == "3"
    code, out, _ = run(capsys, "shuffles", "count", "1,1", "1,1", "--family", "shn", "--copies", 2)
    assert out.strip() == "6"


def test_shuffle_list_and_bad_arguments(capsys):
    code, out, _ = run(capsys, "shuffles", "list", 1, 1)
    assert out.split("\n")[:2] == ["(1, 2)", "(2, 1)"]
    code, _, err = run(capsys, "shuffles", "count", "-1", 2)
    assert code == 2 and "non-negative" in err
    code, _, _ = run(capsys, "shuffles", "count", "a", 2)
    assert code == 2


def test_verify_path_shuffle_on_bundled_corpus(capsys):
    code, out, _ = run(capsys, "verify", "path-shuffle")
    report = json.loads(out)
    assert code == 0 and report["pass"]
    parabola = next(c for c in report["checks"] if "parabola dx1|dx2" in c["name"])
    assert parabola["abs_diff"] <= 1e-8 and parabola["lhs"] == pytest.approx(1.0)
    assert set(parabola) >= {"name", "lhs", "rhs", "abs_diff", "tolerance", "pass"}


def test_verify_all_bundled_exits_zero(capsys):
    code, out, _ = run(capsys, "verify", "all")
    report = json.loads(out)
    assert code == 0 and report["pass"]
    assert len(report["checks"]) >= 20
    assert len(bundled_scenes()) == 3


def test_verify_on_document(capsys, scene):
    code, out, _ = run(capsys, "verify", "path-shuffle", scene)
    assert code == 0 and json.loads(out)["checks"][0]["abs_diff"] <= 1e-8
    code, out, _ = run(capsys, "verify", "holonomy", scene)
    assert code == 0 and json.loads(out)["checks"] == []


def test_failing_check_exits_one(capsys, tmp_path):
    data = json.loads(json.dumps(SCENE))
    data["checks"][0]["tolerance"] = -1.0
    path = tmp_path / "strict.json"
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", "path-shuffle", path)
    assert code == 1 and json.loads(out)["pass"] is False


def test_non_convergence_is_a_failed_check(capsys, tmp_path):
    data = json.loads(json.dumps(SCENE))
    data["quadrature"] = {"rule": "trapezoid", "points_per_axis": 4, "rel_tol": 1e-14}
    path = tmp_path / "coarse.json"
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", "path-shuffle", path)
    check = json.loads(out)["checks"][0]
    assert code == 1 and check["pass"] is False and "convergence" in check["error"]


def test_malformed_json_reports_line(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "forms": [\n    {"name": "x",}\n  ]\n}\n')
    code, _, err = run(capsys, "verify", "all", path)
    assert code == 2 and "line 3" in err


def test_undefined_name_reports_line(capsys, tmp_path):
    data = json.loads(json.dumps(SCENE))
    data["checks"][0]["forms1"] = ["nope"]
    path = tmp_path / "undefined.json"
    path.write_text(json.dumps(data, indent=2))
    code, _, err = run(capsys, "verify", "all", path)
    assert code == 2 and "nope" in err and "line" in err


def test_missing_file_and_usage(capsys, tmp_path):
    code, _, err = run(capsys, "integrate-path", tmp_path / "missing.json", "--path", "p", "--forms", "a")
    assert code == 2
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_integrate_path_and_signature(capsys, scene):
    code, out, _ = run(capsys, "integrate-path", scene, "--path", "parabola", "--forms", "dx1,dx2")
    result = json.loads(out)
    assert code == 0 and result["value"] == pytest.approx(2 / 3, abs=1e-10)
    assert "error_estimate" in result
    code, out, _ = run(capsys, "signature", scene, "--path", "parabola", "--forms", "dx1,dx2", "--level", 2)
    coeffs = json.loads(out)["coefficients"]
    assert coeffs["1,2"] == pytest.approx(2 / 3) and coeffs["2,1"] == pytest.approx(1 / 3)


def test_integrate_membrane_and_transport(capsys, scene):
    code, out, _ = run(capsys, "integrate-membrane", scene, "--membrane", "square", "--integrand", "I")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.5)
    code, out, _ = run(capsys, "transport", scene, "--path", "parabola", "--w", "dx1", "--theta", "dx2",
                       "--steps", 0)
    assert code == 0 and json.loads(out)["covector"]["2"] == pytest.approx(1.0)


def test_table_output(capsys, scene):
    code, out, _ = run(capsys, "verify", "path-shuffle", scene, "--table")
    assert code == 0 and "overall: pass" in out
    code, out, _ = run(capsys, "integrate-path", scene, "--path", "parabola", "--forms", "dx1", "--table")
    assert "value: 1" in out


def test_output_is_deterministic(scene):
    cmd = [sys.executable, "-m", "itermem", "verify", "all", str(scene), "--bundled"]
    first = subprocess.run(cmd, capture_output=True, check=False)
    second = subprocess.run(cmd, capture_output=True, check=False)
    assert first.returncode == 0
    assert first.stdout == second.stdout


def test_round12():
    assert round12(1 / 3) == 0.333333333333
    assert round12(-0.0) == 0.0 and str(round12(-0.0)) == "0.0"
    assert round12(float("nan")) is None and round12(float("inf")) == "inf"
    assert round12({"a": [1e-20, 2]}) == {"a": [1e-20, 2]}
