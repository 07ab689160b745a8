import json

import numpy as np
import pytest

from pretest_liu.cli import main, parse_range, read_output


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def strip_timestamp(text):
    return "\n".join(l for l in text.splitlines() if "timestamp" not in l)


def test_parse_range():
    assert parse_range("0") == [0.0]
    assert len(parse_range("0:20:0.5")) == 41
    assert parse_range("0:1:0.1")[-1] == 1.0
    assert parse_range("1,2:4:1") == [1, 2, 3, 4]


def test_fit_heart(capsys, heart_like):
    code, out, _ = run(capsys, "fit", heart_like)
    assert code == 0
    meta, rows = read_output(out)
    assert meta["q"] == 4 and len(rows) == 8
    assert [r["estimator"] for r in rows] == ["MLE", "RMLE", "PTMLE", "UR", "RE", "PT", "S", "PS"]
    assert 0 <= meta["d_optimum"] <= 1 and meta["converged"] is True


def test_fit_errors(capsys, heart_like, tmp_path):
    code, _, err = run(capsys, "fit", heart_like, "--restrict", "sbp,nosuch")
    assert code == 2 and "error[input]" in err
    code, _, err = run(capsys, "fit", heart_like, "--restrict", "sbp,age", "--estimators", "s,ps")
    assert code == 3 and "q ≥ 3 required" in err
    code, _, _ = run(capsys, "fit", tmp_path / "missing.csv")
    assert code == 2
    code, _, _ = run(capsys, "fit", heart_like, "--d", "2")
    assert code == 2
    code, _, _ = run(capsys, "bogus")
    assert code == 2


def test_fit_separation_exit3(capsys, tmp_path):
    p = tmp_path / "sep.csv"
    x = np.linspace(-2, 2, 20)
    p.write_text("x1,x2,x3,y\n" + "".join(f"{v},{v ** 2},{np.sin(v)},{int(v > 0)}\n" for v in x))
    code, _, err = run(capsys, "fit", p, "--restrict", "x1,x2,x3")
    assert code == 3 and "error[numeric]" in err


def test_risk(capsys):
    code, out, _ = run(capsys, "risk", "--grid", "0", "--d", "1", "--kinds", "UR", "--eigenvalues", "0.5,1,2,4")
    _, rows = read_output(out)
    assert rows[0]["risk"] == pytest.approx(2 + 1 + 0.5 + 0.25, rel=1e-14)
    code, out, _ = run(capsys, "risk", "--grid", "0:20:0.5")
    _, rows = read_output(out)
    assert code == 0 and sum(r["kind"] == "PS" for r in rows) == 41
    assert all(r["relative_risk"] == 1 for r in rows if r["kind"] == "UR")


def test_risk_matrix_file(capsys, tmp_path):
    D = tmp_path / "D.txt"
    np.savetxt(D, np.array([[2.0, 0.3, 0, 0], [0.3, 1.0, 0, 0], [0, 0, 1.5, 0.2], [0, 0, 0.2, 0.7]]))
    code, out, _ = run(capsys, "risk", "--D", D, "--restrict", "1,2,3", "--grid", "0,5", "--format", "json")
    obj = json.loads(out)
    assert code == 0 and obj["metadata"]["q"] == 3 and len(obj["rows"]) == 10


def test_csv_json_equivalence(capsys, heart_like, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.json"
    assert main(["cv", str(heart_like), "--repeats", "3", "--seed", "5", "-o", str(a)]) == 0
    assert main(["cv", str(heart_like), "--repeats", "3", "--seed", "5", "-o", str(b), "--format", "json"]) == 0
    _, rc = read_output(a.read_text())
    meta, rj = read_output(b.read_text(), "json")
    assert meta["seed"] == 5
    assert len(rc) == 8 and len(rc[0]) == 7
    for x, y in zip(rc, rj):
        assert x == y


def test_simulate_determinism(capsys, tmp_path):
    args = ["simulate", "--reps", "6", "--q", "3", "--grid", "0,4", "--seed", "1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["-o", str(a), "--threads", "1"]) == 0
    assert main(args + ["-o", str(b), "--threads", "4"]) == 0
    assert strip_timestamp(a.read_text()) == strip_timestamp(b.read_text())
    meta, rows = read_output(a.read_text())
    assert meta["seed"] == 1 and meta["config"][0]["reps"] == 6
    assert all(r["rmse"] == 1 for r in rows if r["estimator"] == "UR")


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reps": 2, "q": 3, "delta_star_grid": [0, 1]}))
    out = tmp_path / "o.json"
    assert main(["simulate", "--config", str(cfg), "--format", "json", "-o", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert {r["delta_star"] for r in obj["rows"]} == {0.0, 1.0}
    cfg.write_text(json.dumps({"reps": 2, "bogus": 1}))
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_round_trip_precision(capsys):
    code, out, _ = run(capsys, "risk", "--grid", "0,3.3")
    _, rows = read_output(out)
    from pretest_liu.asymptotics import AsymptoticScenario, asymptotic_risk
    from pretest_liu.restriction import LinearRestriction
    sc = AsymptoticScenario(np.diag([0.3, 0.6, 1, 1.5, 2.5]), [1.5, 2.5, 0, 0, 0],
                            LinearRestriction.zero_coefficients(5, [2, 3, 4]), np.ones(3), 0.5)
    want = asymptotic_risk("PS", sc.with_delta2(3.3))
    got = [r["risk"] for r in rows if r["kind"] == "PS" and r["delta2"] == 3.3][0]
    assert got == want
