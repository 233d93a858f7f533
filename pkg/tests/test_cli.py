import json

import pytest

from occmdp.cli import ConfigError, main, parse_config
from occmdp.model import ContinuousModel1D


@pytest.fixture
def m2_file(tmp_path, M2):
    p = tmp_path / "m2.json"
    p.write_text(json.dumps(M2.to_dict()))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_defaults(m2_file):
    cfg = parse_config(["solve", "--model", m2_file])
    assert cfg.command == "solve" and cfg.tol == 1e-9 and cfg.seed == 0


def test_echo_seed_horizon(m2_file):
    cfg = parse_config(["simulate", "--model", m2_file, "--seed", "42", "--horizon", "100000"])
    assert cfg.seed == 42 and cfg.horizon == 100000


def test_config_file_overridden_by_flags(tmp_path, m2_file):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"model": m2_file, "seed": 5, "horizon": 7}))
    cfg = parse_config(["simulate", "--config", str(conf), "--seed", "9"])
    assert cfg.seed == 9 and cfg.horizon == 7 and cfg.model == m2_file


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "--model", "x.json", "--bogus"],
    ["solve", "--model", "x.json", "--trace"],
    ["analyze", "--model", "x.json", "--actions", "0,1", "--policy", "p.csv"],
    ["simulate", "--model", "x.json", "--horizon", "0"],
    ["frobnicate"],
])
def test_bad_arguments(argv):
    with pytest.raises(ConfigError):
        parse_config(argv)


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"model": "m.json", "colour": "red"}))
    with pytest.raises(ConfigError):
        parse_config(["solve", "--config", str(conf)])


def test_unknown_flag_exit_code(capsys):
    code, _, err = run(["solve", "--nope"], capsys)
    assert code == 1 and "error" in err


def test_solve_stdout(tmp_path, m2_file, capsys):
    code, out, _ = run(["solve", "--model", m2_file, "--output", str(tmp_path / "o")], capsys)
    assert code == 0
    assert out.strip() == "delta_star=1.2 deterministic_fraction=1.0"
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert names == ["occupation.csv", "policy.csv", "policy_actions.csv", "solve.json"]
    occ = (tmp_path / "o" / "occupation.csv").read_bytes()
    assert occ.startswith(b"x,u,mass\n") and b"\r" not in occ


def test_analyze_json(tmp_path, m2_file, capsys):
    code, out, _ = run(["analyze", "--model", m2_file, "--actions", "0,1", "--output", str(tmp_path)], capsys)
    assert code == 0
    text = (tmp_path / "analyze.json").read_text()
    assert '"unichain":true' in text and '"alpha":0.0' in text


def test_malformed_model_leaves_no_files(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_states": 2, "kernel": ')
    out = tmp_path / "out"
    code, _, err = run(["solve", "--model", str(bad), "--output", str(out)], capsys)
    assert code == 1 and err
    assert list(out.iterdir()) == []


def test_invalid_kernel_exit_1(tmp_path, M2, capsys):
    d = M2.to_dict()
    d["kernel"][0][0] = [0.5, 0.48]
    p = tmp_path / "m.json"
    p.write_text(json.dumps(d))
    code, _, err = run(["solve", "--model", str(p), "--output", str(tmp_path / "o")], capsys)
    assert code == 1 and "row sum" in err


def test_dense_contraction_failure(tmp_path, capsys):
    cm = ContinuousModel1D("linear-gaussian", 1.0, 0.0, 1e-3, -2.0, 2.0, (0.0, 1.0), 8)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cm.to_dict()))
    code, _, err = run(["dense", "--model", str(p), "--refinements", "1,2,4,8",
                        "--output", str(tmp_path / "o")], capsys)
    assert code == 2 and "Dobrushin" in err
    assert list((tmp_path / "o").iterdir()) == []


def test_dense_main_instance(tmp_path, capsys):
    cm = ContinuousModel1D("linear-gaussian", 0.5, 1.0, 0.3, -2.0, 2.0, (-0.5, 0.5), 16)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cm.to_dict()))
    code, _, _ = run(["dense", "--model", str(p), "--output", str(tmp_path)], capsys)
    lines = (tmp_path / "dense.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "k,alpha,tv_gap,cost_gap,bound_rhs" and len(lines) == 5


def test_rvi_periodic_exit_2(tmp_path, two_cycle, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(two_cycle.to_dict()))
    code, _, err = run(["rvi", "--model", str(p), "--max-iter", "200", "--output", str(tmp_path / "o")], capsys)
    assert code == 2 and "relative value iteration" in err


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["analyze"],
    ["simulate", "--horizon", "500", "--seed", "3", "--trace"],
    ["split", "--small-set", "0,1"],
    ["strategic", "--horizon", "2"],
    ["rvi"],
])
def test_byte_identical_reruns(tmp_path, m2_file, capsys, argv):
    dirs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        code, _, _ = run([argv[0], "--model", m2_file, "--output", str(d), *argv[1:]], capsys)
        assert code == 0
        dirs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert dirs[0] == dirs[1] and dirs[0]


def test_simulate_outputs(tmp_path, m2_file, capsys):
    code, _, _ = run(["simulate", "--model", m2_file, "--actions", "0,1", "--horizon", "50", "--trace",
                      "--output", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "prefix.csv").read_text().splitlines()[0] == "T,expected_avg_cost,residual"
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "t,x,u,c" and len(trace) == 51


def test_split_report(tmp_path, m2_file, capsys):
    code, _, _ = run(["split", "--model", m2_file, "--actions", "0,1", "--output", str(tmp_path)], capsys)
    rep = json.loads((tmp_path / "split.json").read_text())
    assert code == 0 and rep["minorization_mass"] == pytest.approx(1.0)
    assert rep["split_chain"]["states"][2] == "(0,1)"


def test_split_not_small(tmp_path, two_cycle, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(two_cycle.to_dict()))
    code, _, _ = run(["split", "--model", str(p), "--output", str(tmp_path / "o")], capsys)
    assert code == 2


def test_oracle_sweep(tmp_path, capsys):
    code, out, _ = run(["oracle-sweep", "--seeds", "5", "--output", str(tmp_path)], capsys)
    lines = (tmp_path / "oracle.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "instance_seed,lp_value,brute_value,rvi_value,max_gap"
    assert len(lines) == 6 and out.startswith("instances=5")
