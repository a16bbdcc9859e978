import subprocess
import sys

import pytest

from maoii.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_solve_config_b(capsys):
    code, out, err = run(["solve", "--N", "5", "--r", "0.1", "--rho", "0.5", "--lambda", "8"], capsys)
    assert code == 0
    d = kv(out)
    assert d["threshold"] == "6" and d["brute_force_threshold"] == "6" and d["oracle_match"] == "true"
    assert float(d["c_star"]) == pytest.approx(3.8903707575757576)
    assert "[resolved_config]" in err


def test_solve_config_a(capsys):
    code, out, _ = run(["solve", "--r", "0.25", "--lam", "8"], capsys)
    d = kv(out)
    assert code == 0 and d["threshold"] == "inf" and float(d["c_star"]) == pytest.approx(3.2)
    assert float(d["lambda_limit"]) == pytest.approx(6.08)


@pytest.mark.parametrize("args", [
    ["solve", "--r", "0.3"],
    ["solve", "--rho", "0"],
    ["solve", "--N", "1"],
    ["solve", "--lam", "-1"],
    ["solve", "--N", "2", "--r", "0.7"],
    ["steady", "--N", "2", "--r", "1.0"],
    ["learn", "--N", "2", "--r", "0.3"],
    ["simulate", "--threshold", "x"],
    ["simulate", "--T", "0"],
    ["regret", "--algos", "proposed,oracle"],
    ["regret", "--checkpoints", "100,1000", "--runs", "2", "--seed", "-1"],
])
def test_bad_parameters_exit_2(args, capsys):
    code, _, err = run(args, capsys)
    assert code == 2 and err.startswith("error:")


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("N = 5\nbogus = 1\n")
    code, _, err = run(["solve", "--config", str(cfg)], capsys)
    assert code == 2 and "bogus" in err


def test_missing_config_is_io_error(tmp_path, capsys):
    code, _, _ = run(["solve", "--config", str(tmp_path / "none.toml")], capsys)
    assert code == 4


def test_unwritable_output(tmp_path, capsys):
    code, _, _ = run(["solve", "--out", str(tmp_path / "no" / "such" / "dir.txt")], capsys)
    assert code == 4


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("r = 0.25\n[solve]\nlam = 8.0\nn_max = 50\n")
    out = tmp_path / "s.txt"
    assert main(["solve", "--config", str(cfg), "--r", "0.1", "--out", str(out)]) == 0
    assert kv(out.read_text())["threshold"] == "6"
    meta = (tmp_path / "s.txt.resolved.toml").read_text()
    assert "r = 0.1\n" in meta and "n_max = 50\n" in meta and "lam = 8.0\n" in meta
    assert "threads" not in meta


def test_steady_table(capsys):
    code, out, _ = run(["steady", "--n-max", "10"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "n,avg_age,avg_active,avg_cost"
    assert len(lines) == 13 and lines[-1].startswith("inf,")
    code, out, _ = run(["steady", "--N", "2", "--r", "0.9", "--n-max", "10"], capsys)
    assert [l.split(",")[0] for l in out.splitlines()[1:]] == ["0", "2", "4", "6", "8", "10", "inf"]


def test_simulate_and_learn_outputs(tmp_path):
    for cmd, header in (("simulate", "t,x,x_hat,j,action,success,cost"),
                        ("learn", "t,cost,phase,i,r_hat,threshold")):
        out = tmp_path / f"{cmd}.csv"
        assert main([cmd, "--T", "500", "--seed", "4", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == header and len(lines) == 501
        again = tmp_path / f"{cmd}2.csv"
        main([cmd, "--T", "500", "--seed", "4", "--out", str(again)])
        assert again.read_text() == out.read_text()


def test_simulate_threshold_choices(capsys):
    for th in ("0", "inf", "opt", "7"):
        code, out, _ = run(["simulate", "--T", "50", "--threshold", th], capsys)
        assert code == 0 and len(out.splitlines()) == 51
    _, out, _ = run(["simulate", "--T", "50", "--threshold", "inf"], capsys)
    assert all(l.split(",")[4] == "0" for l in out.splitlines()[1:])


def test_regret_identical_across_threads(tmp_path):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"r{threads}.csv"
        code = main(["regret", "--runs", "6", "--checkpoints", "100,300,1000,3000,10000",
                     "--algos", "proposed,greedy,fixed", "--threads", threads, "--out", str(out)])
        assert code == 0
        outs.append((out.read_text(), (tmp_path / f"r{threads}.csv.fit.txt").read_text(),
                     (tmp_path / f"r{threads}.csv.resolved.toml").read_text()))
    assert outs[0] == outs[1]
    data, fit, _ = outs[0]
    assert data.splitlines()[0] == "algo,T,mean_regret,stderr,n_runs"
    assert len(data.splitlines()) == 16
    assert "proposed.log_like=" in fit and "proposed.reference_slope=" in fit


def test_regret_too_few_checkpoints_reports_in_fit(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["regret", "--runs", "2", "--checkpoints", "100,1000", "--out", str(out)]) == 0
    assert "proposed.error=" in (tmp_path / "r.csv.fit.txt").read_text()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "maoii", "solve"], capture_output=True, text=True)
    assert res.returncode == 0 and "threshold=6" in res.stdout
