import json

import pytest

from slipipm.harness.problems import load_problem
from slipipm.run_cli import (
    EXIT_INFEASIBLE_START,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PHASE1,
    build_parser,
    main,
)


def test_generate_socp_writes_problem(tmp_path, capsys):
    out = tmp_path / "socp.json"
    assert main(["generate", "socp", "--n", "6", "--l", "2", "--seed", "3", "-o", str(out)]) == EXIT_OK
    fx = load_problem(out)
    assert fx.name == "socp_n6_l2_s3"
    assert fx.x_start.shape == (6,)
    assert "socp_n6_l2_s3" in capsys.readouterr().out


def test_solve_example1(tmp_path, capsys):
    code = main(["solve", "example1", "--budget", "40", "--seed", "0", "1",
                 "--output-dir", str(tmp_path), "--no-ledger"])
    assert code == EXIT_OK
    assert (tmp_path / "example1_deterministic_seed1.json").exists()
    assert "2 ejecuciones" in capsys.readouterr().out


def test_solve_stochastic_with_overrides(tmp_path):
    code = main(["solve", "box_qp_n3_l0", "--mode", "stochastic", "--noise", "gaussian", "--sigma", "0.5",
                 "--budget", "50", "--t-alpha", "-0.2", "--output-dir", str(tmp_path), "--no-ledger"])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "box_qp_n3_l0_stochastic_seed0.json").read_text(encoding="utf-8"))
    assert report["mode"] == "stochastic"
    assert report["schedule"]["t_alpha"] == -0.2
    assert report["noise"]["kind"] == "gaussian"


def test_solve_infeasible_start_exit_code(tmp_path):
    code = main(["solve", "example1", "--start=-1,0", "--budget", "5",
                 "--output-dir", str(tmp_path), "--no-ledger"])
    assert code == EXIT_INFEASIBLE_START


def test_phase1_success(tmp_path, capsys):
    code = main(["phase1", "disk", "--output-dir", str(tmp_path), "--no-ledger"])
    assert code == EXIT_OK
    assert (tmp_path / "disk_phase1.json").exists()
    assert "Fase I OK" in capsys.readouterr().out


def test_phase1_failure_exit_code(tmp_path):
    code = main(["phase1", "infeasible_pair", "--max-iter", "20", "--output-dir", str(tmp_path), "--no-ledger"])
    assert code == EXIT_PHASE1
    result = json.loads((tmp_path / "infeasible_pair_phase1.json").read_text(encoding="utf-8"))
    assert result["failure"] == "iteration_limit"


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "example1", "--theta0", "-1", "--budget", "5"],
        ["solve", "no_existe", "--budget", "5"],
        ["solve", "example1", "--budget", "5", "--t", "-0.3", "--mode", "stochastic", "--t-alpha", "-0.4"],
        ["solve", "example1", "--budget", "0"],
    ],
)
def test_numerical_or_config_failure_exit_code(tmp_path, argv):
    assert main(argv + ["--output-dir", str(tmp_path), "--no-ledger"]) == EXIT_NUMERICAL


def test_bench_from_key_value_file(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        "problem = example2\nbudget = 30\nseeds = [4]\nlabel = corner\ntrace_every = 0\n",
        encoding="utf-8",
    )
    code = main(["bench", str(cfg), "--output-dir", str(tmp_path / "out"), "--no-ledger"])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "out" / "corner_summary.json").read_text(encoding="utf-8"))
    assert summary["runs"] == 1


def test_bench_invalid_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"problem": "example1", "mode": "otro"}), encoding="utf-8")
    assert main(["bench", str(cfg), "--no-ledger"]) == EXIT_NUMERICAL


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
