import json
from pathlib import Path

import numpy as np
import pytest

from densemodel.cli import main
from densemodel.formats import MODEL_SCHEMA, parse_instance, read_instance, to_text

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def hand_file(tmp_path):
    p = tmp_path / "hand2.json"
    p.write_text((FIXTURES / "hand2.json").read_text())
    return p


def gen(capsys, tmp_path, name, *flags):
    code, out, _ = run(capsys, "gen", *flags)
    assert code == 0
    p = tmp_path / name
    p.write_text(out)
    return p, out


def test_generated_hand_instance_matches_fixture(capsys, tmp_path):
    _, out = gen(capsys, tmp_path, "h.json", "hand2", "--epsilon", "0.5")
    assert out == (FIXTURES / "hand2.json").read_text()


@pytest.mark.parametrize("flags", [
    ("set", "--n", "32", "--r-size", "8", "--d-size", "4", "--seed", "9"),
    ("set", "--n", "20", "--family", "random", "--m", "3", "--seed", "2"),
    ("random", "--n", "16", "--m", "3", "--seed", "4"),
])
def test_gen_is_deterministic_and_round_trips(capsys, tmp_path, flags):
    p, first = gen(capsys, tmp_path, "a.json", *flags)
    _, second = gen(capsys, tmp_path, "b.json", *flags)
    assert first == second
    assert read_instance(str(p)).to_text() == first


def test_set_instance_density(capsys, tmp_path):
    p, _ = gen(capsys, tmp_path, "s.json", "set", "--n", "40", "--r-size", "10", "--d-size", "5")
    assert read_instance(str(p)).instance().delta == 0.5


def test_find_model_hand_instance(capsys, tmp_path, hand_file):
    report = tmp_path / "r.json"
    code, _, err = run(capsys, "find-model", hand_file, "--report", report)
    assert code == 3
    rep = json.loads(report.read_text())
    assert rep["result"] == "distinguisher"
    assert rep["witness"]["members"] == [0] and rep["witness"]["labels"] == ["split"]
    assert rep["witness"]["achieved"] == 1.0
    assert "split" in err
    assert run(capsys, "verify", report, hand_file)[0] == 0


def test_find_model_trivial_instance(capsys, tmp_path):
    g = [0.2, 0.9, 0.5, 0.4]
    obj = {"schema": "densemodel.instance/1", "n": 4, "epsilon": 0.1, "nu": g, "g": g,
           "family": {"generator": "characters", "frequencies": [1]}}
    inst = tmp_path / "t.json"
    inst.write_text(json.dumps(obj))
    report = tmp_path / "r.json"
    assert run(capsys, "find-model", inst, "--report", report, "--seed", "5")[0] == 0
    rep = json.loads(report.read_text())
    assert rep["result"] == "dense_model" and rep["seeds"]["seed"] == 5
    assert run(capsys, "verify", report, inst)[0] == 0


def test_report_to_stdout_is_parseable(capsys, hand_file):
    code, out, _ = run(capsys, "find-model", hand_file)
    assert code == 3 and json.loads(out)["schema"] == "densemodel.report/1"


def test_tampered_epsilon_prime_is_caught(capsys, tmp_path, hand_file):
    report = tmp_path / "r.json"
    run(capsys, "find-model", hand_file, "--report", report)
    rep = json.loads(report.read_text())
    rep["epsilon_prime"] *= 1.5
    report.write_text(to_text(rep))
    code, out, _ = run(capsys, "verify", report, hand_file)
    assert code == 2
    assert "FAIL epsilon_prime:" in out


@pytest.mark.parametrize("field,value", [("achieved", 2.0), ("t", 0.1), ("c_k", "1/3")])
def test_other_tampering_is_caught(capsys, tmp_path, hand_file, field, value):
    report = tmp_path / "r.json"
    run(capsys, "find-model", hand_file, "--report", report)
    rep = json.loads(report.read_text())
    section = {"achieved": "witness", "t": "threshold", "c_k": "term"}[field]
    rep[section][field] = value
    report.write_text(to_text(rep))
    assert run(capsys, "verify", report, hand_file)[0] == 2


def test_report_replayed_against_other_instance(capsys, tmp_path, hand_file):
    report = tmp_path / "r.json"
    run(capsys, "find-model", hand_file, "--report", report)
    other = json.loads(hand_file.read_text())
    other["nu"] = [1.5, 0.5]
    other["g"] = [1.5, 0.0]
    p = tmp_path / "other.json"
    p.write_text(json.dumps(other))
    code, out, _ = run(capsys, "verify", report, p)
    assert code == 2 and "FAIL instance" in out


def test_malformed_instances_name_the_field(capsys, tmp_path, hand_file):
    obj = json.loads(hand_file.read_text())
    cases = {
        "g[1]": {**obj, "g": [2.0, 0.5]},
        "epsilon": {k: v for k, v in obj.items() if k != "epsilon"},
        "nu": {**obj, "nu": [2.0]},
        "family.members[0].values[1]": {**obj, "family": {"members": [{"label": "x", "values": [1.0, -3.0]}]}},
        "family.generator": {**obj, "family": {"generator": "walsh"}},
        "schema": {**obj, "schema": "other/2"},
    }
    for path, bad in cases.items():
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(bad))
        code, _, err = run(capsys, "find-model", p)
        assert code == 1, path
        assert path in err, (path, err)
    p = tmp_path / "broken.json"
    p.write_text('{\n  "n": 2,\n  oops\n}')
    code, _, err = run(capsys, "find-model", p)
    assert code == 1 and "line 3" in err


def test_usage_errors(capsys, hand_file, tmp_path):
    assert run(capsys, "find-model")[0] == 1
    assert run(capsys, "gen", "walsh")[0] == 1
    assert run(capsys, "find-model", tmp_path / "missing.json")[0] == 1
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"schema": MODEL_SCHEMA, "values": [1.0, 1.0]}))
    assert run(capsys, "round", hand_file, model, "--trials", "0")[0] == 1
    assert run(capsys, "--threads", "0", "verify", hand_file, hand_file)[0] == 1


def _write_model(tmp_path, values):
    p = tmp_path / "model.json"
    p.write_text(to_text({"schema": MODEL_SCHEMA, "values": [float(v) for v in values]}))
    return p


def test_round_zero_one_model_is_deterministic(capsys, tmp_path):
    p, _ = gen(capsys, tmp_path, "s.json", "set", "--n", "32", "--r-size", "16", "--d-size", "8")
    model = _write_model(tmp_path, np.arange(32) < 16)
    out = tmp_path / "round.json"
    assert run(capsys, "round", p, model, "--trials", "20", "--output", out)[0] == 0
    summary = json.loads(out.read_text())
    assert len({(t["density"], t["indist_vs_g"]) for t in summary["per_trial"]}) == 1


def test_round_constant_model_beats_prediction(capsys, tmp_path):
    n, delta = 4096, 0.25
    obj = {"schema": "densemodel.instance/1", "n": n, "epsilon": 0.1, "nu": [1.0] * n, "g": [delta] * n,
           "family": {"generator": "characters", "frequencies": [1, 2, 3]}}
    inst = tmp_path / "c.json"
    inst.write_text(json.dumps(obj))
    model = _write_model(tmp_path, [delta] * n)
    out = tmp_path / "round.json"
    assert run(capsys, "round", inst, model, "--trials", "1000", "--seed", "1", "--output", out)[0] == 0
    s = json.loads(out.read_text())
    assert s["empirical_failure_rate"] <= s["chernoff_bound"]
    assert abs(s["mean_density"] - delta) <= 0.005


def test_round_accepts_dense_report(capsys, tmp_path):
    g = [0.2, 0.9, 0.5, 0.4]
    obj = {"schema": "densemodel.instance/1", "n": 4, "epsilon": 0.1, "nu": g, "g": g,
           "family": {"generator": "characters", "frequencies": [1]}}
    inst = tmp_path / "t.json"
    inst.write_text(json.dumps(obj))
    report = tmp_path / "r.json"
    run(capsys, "find-model", inst, "--report", report)
    assert run(capsys, "round", inst, report, "--trials", "3")[0] == 0


def test_check_pr_exit_codes(capsys, tmp_path, hand_file):
    assert run(capsys, "check-pr", hand_file)[0] == 3
    flat = json.loads(hand_file.read_text())
    flat["nu"] = [1.0, 1.0]
    flat["g"] = [0.5, 0.5]
    p = tmp_path / "flat.json"
    p.write_text(json.dumps(flat))
    assert run(capsys, "check-pr", p, "--k", "3")[0] == 0
    assert run(capsys, "check-pr", p, "--k", "8", "--budget", "5")[0] == 4


def test_threads_from_environment(capsys, monkeypatch, hand_file):
    monkeypatch.setenv("DENSEMODEL_THREADS", "1")
    assert run(capsys, "check-pr", hand_file)[0] == 3
    monkeypatch.setenv("DENSEMODEL_THREADS", "many")
    assert run(capsys, "check-pr", hand_file)[0] == 1


def test_parse_instance_keeps_generator_spec():
    obj = json.loads((FIXTURES / "hand2.json").read_text())
    obj["family"] = {"generator": "characters", "frequencies": [1]}
    parsed = parse_instance(obj)
    assert parsed.family == {"generator": "characters", "frequencies": [1]}
    assert parsed.instance().family.labels == ("cos1", "sin1")
