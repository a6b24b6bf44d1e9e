import json

import pytest

from mostackelberg.cli import main
from mostackelberg.experiments import generate_uniform_game
from mostackelberg.game import save_game
from tests.conftest import make_game


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_fixed(capsys):
    code, out, _ = run(capsys, "solve", "--fixed", "high-risk", "--constraint", "c1")
    data = json.loads(out)
    assert code == 0 and (data["l"], data["f"]) == (1, 1)
    assert data["leader_utility"] == pytest.approx(1.4, abs=1e-9)
    code, out, _ = run(capsys, "solve", "--fixed", "play-safe", "--constraint", "c1")
    assert json.loads(out)["leader_utility"] == pytest.approx(1.625, abs=1e-9)


def test_solve_non_beneficial_file(capsys, tmp_path):
    g = make_game([[[5, 5], [0, 0]]], [[[1, 1], [1, 1]]], [0.5, 0.5], [0.5, 0.5])
    path = tmp_path / "g.json"
    save_game(g, path)
    code, out, _ = run(capsys, "solve", "--game", str(path))
    assert code == 0 and json.loads(out)["beneficial"] is False


def test_malformed_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2")
    code, out, err = run(capsys, "solve", "--game", str(path))
    assert code != 0 and out == "" and "bad.json" in err


def test_run_nomanip(capsys, tmp_path):
    trace = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "run", "--fixed", "high-risk", "--policy", "nomanip", "--T", "40", "--out", str(trace))
    assert code == 0
    assert json.loads(out)["cumulative_regret"] == pytest.approx(16.0)
    assert len(trace.read_text().splitlines()) == 41


def test_run_is_reproducible(capsys, tmp_path):
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for p in paths:
        run(capsys, "run", "--fixed", "play-safe", "--policy", "longeu+pfr", "--T", "15", "--seed", "4",
            "--out", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_unknown_policy_and_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--policy", "bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["solve", "--no-such-flag"])


def test_generate_then_solve(capsys, tmp_path):
    path = tmp_path / "g.json"
    code, _, _ = run(capsys, "generate", "--dims", "3", "--seed", "2", "--out", str(path))
    assert code == 0
    code, out, _ = run(capsys, "solve", "--game", str(path))
    assert code == 0 and "leader_utility" in json.loads(out)
    code, out, _ = run(capsys, "generate", "--seed", "2")
    assert json.loads(out)["dims"] == 2


def test_experiment_config_and_flags(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    out = tmp_path / "s.csv"
    cfg.write_text(json.dumps({"generator": "high-risk", "constraint": "c1", "policies": ["nomanip"],
                               "replications": 1}))
    code, stdout, _ = run(capsys, "experiment", "--config", str(cfg), "--out", str(out))
    assert code == 0 and "nomanip T=40" in stdout
    lines = out.read_text().splitlines()
    assert lines[0] == "policy,T,mean_cr,se_cr,reps,beneficial_frac"
    assert lines[1].startswith("nomanip,40,") and ",0.0,1," in lines[1]


def test_experiment_bad_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"replications": 1, "colour": "red"}))
    code, _, err = run(capsys, "experiment", "--config", str(cfg))
    assert code == 1 and "colour" in err


def test_inspect(capsys, tmp_path):
    g = generate_uniform_game(3, 2, 2, seed=1)
    path = tmp_path / "g.json"
    save_game(g, path)
    code, out, _ = run(capsys, "inspect", "--game", str(path), "--policy", "longeu+mwmc", "--T", "5",
                       "--samples", "3")
    data = json.loads(out)
    assert code == 0 and len(data["samples"]) == 3 and "normals" in data["region"]
