import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from slipipm.core.phase1 import strictly_feasible
from slipipm.errors import InfeasibleStart
from slipipm.harness import ledger, reports
from slipipm.harness.experiment import find_start, prepare_run, run_experiment
from slipipm.harness.problems import (
    SOC_EPS,
    box_estimates,
    build_problem,
    dump_problem,
    fixture_batch,
    fixture_disk,
    fixture_example1,
    fixture_example2,
    generate_socp,
    load_problem,
    named_fixture,
    resolve_problem,
)
from slipipm.harness.settings import ExperimentConfig, load_config, parse_key_values


def test_example1_values():
    fx = fixture_example1(1.0, (0.0, 1.0))
    assert_allclose(fx.spec.eval_c(fx.x_start), [-1.0, -1.0])
    assert fx.spec.eval_f(np.array([0.3, 0.7])) == pytest.approx(0.7)
    assert fx.name == "example1_a1_v0_1"
    with pytest.raises(ValueError):
        fixture_example1(0.0)


def test_example2_values():
    fx = fixture_example2()
    x = fx.x_start
    assert_allclose(fx.spec.eval_c(x), [-0.5, -0.5])
    assert_allclose(fx.spec.eval_jac(x)[:, 1], [1.0, -2.0])
    assert_allclose(fx.spec.eval_hess_c(1, x), [[0.0, 0.0], [0.0, -2.0]])


@pytest.mark.parametrize("n,l,seed", [(2, 0, 0), (5, 2, 1), (50, 10, 7)])
def test_generated_socp_has_certified_interior_point(n, l, seed):
    fx = generate_socp(n, l, seed)
    p, x = fx.spec, fx.x_start
    assert p.A.shape == (l, n)
    assert p.residual_eq(x) <= 1e-10 * (1.0 + np.linalg.norm(p.b))
    cv = p.eval_c(x)
    assert np.all(cv < 0)
    assert strictly_feasible(cv, p.bounds_meta)
    assert np.linalg.norm(x[:-1]) < x[-1]
    assert cv[1] == pytest.approx(-x[-1] + SOC_EPS)


def test_generated_socp_deterministic_by_seed():
    a, b = generate_socp(6, 2, 3), generate_socp(6, 2, 3)
    assert_allclose(a.spec.A, b.spec.A)
    assert_allclose(a.x_start, b.x_start)
    assert not np.allclose(generate_socp(6, 2, 4).x_start, a.x_start)


def test_generate_socp_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        generate_socp(1, 0, 0)
    with pytest.raises(ValueError):
        generate_socp(4, 4, 0)


def test_batch_has_strictly_feasible_starts():
    batch = fixture_batch()
    assert len(batch) >= 20
    assert len({fx.name for fx in batch}) == len(batch)
    for fx in batch:
        p = fx.spec
        assert p.residual_eq(fx.x_start) <= 1e-8 * (1.0 + np.linalg.norm(p.b)), fx.name
        assert np.max(p.eval_c(fx.x_start)) < 0, fx.name
        if fx.estimates is not None:
            assert fx.estimates.m == p.m


def test_box_estimates_bound_sampled_values(rng):
    fx = named_fixture("box_qp_n5_l1")
    est, p = fx.estimates, fx.spec
    lo = np.asarray(p.data["constraints"][0]["lower"])
    hi = np.asarray(p.data["constraints"][0]["upper"])
    for _ in range(200):
        x = lo + (hi - lo) * rng.random(5)
        assert np.all(np.abs(p.eval_c(x)) <= est.kappa_c + 1e-12)
        assert np.linalg.norm(p.eval_grad(x)) <= est.kappa_grad_f + 1e-12


def test_box_estimates_only_for_bounded_affine_problems():
    assert box_estimates(fixture_disk().spec.data) is None


def test_dump_and_load_problem(tmp_path):
    fx = named_fixture("poly_qp_n4_r6_l1")
    path = dump_problem(fx, tmp_path / "poly.json")
    back = load_problem(path)
    x = fx.x_start + 0.01
    assert back.name == fx.name
    assert_allclose(back.spec.eval_c(x), fx.spec.eval_c(x))
    assert back.spec.eval_f(x) == pytest.approx(fx.spec.eval_f(x))
    assert back.estimates.to_dict() == fx.estimates.to_dict()
    assert resolve_problem(str(path)).name == fx.name


def test_resolve_problem_sources():
    assert resolve_problem("socp:4,1,2").name == "socp_n4_l1_s2"
    assert resolve_problem("example2").name == "example2_v1_0"
    with pytest.raises(KeyError):
        resolve_problem("no_existe")


def test_unknown_constraint_family():
    with pytest.raises(ValueError):
        build_problem({"n": 1, "objective": {"family": "linear", "c": [1.0]},
                       "constraints": [{"family": "cono", "eps": 0.1}]})


def test_parse_key_values_nested():
    text = """
    # comentario
    problem = socp:50,10,7
    mode = stochastic
    seeds = [1, 2, 3]
    noise.kind = gaussian
    noise.sigma = 1.0   # desviación
    schedule.t_alpha = -0.151
    """
    data = parse_key_values(text)
    assert data["seeds"] == [1, 2, 3]
    assert data["noise"] == {"kind": "gaussian", "sigma": 1.0}
    cfg = ExperimentConfig.model_validate(data)
    assert cfg.schedule.to_kwargs() == {"t_alpha": -0.151}
    assert cfg.noise.to_model().sigma == 1.0


def test_parse_key_values_rejects_line_without_equals():
    with pytest.raises(ValueError):
        parse_key_values("problem example1")


@pytest.mark.parametrize(
    "data",
    [
        {"problem": "example1", "mode": "aleatorio"},
        {"problem": "example1", "seeds": []},
        {"problem": "example1", "budget": 0},
        {"problem": "example1", "schedule": {"t": 0.5}},
        {"problem": "example1", "desconocido": 1},
    ],
)
def test_experiment_config_validation(data):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(data)


def test_config_hash_ignores_output_dir_and_workers():
    a = ExperimentConfig(problem="example1", output_dir="a", workers=1)
    b = ExperimentConfig(problem="example1", output_dir="b", workers=4)
    c = ExperimentConfig(problem="example1", budget=10)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert a.run_label == "example1_deterministic"


def test_load_config_json_and_key_values(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"problem": "example1", "budget": 50}), encoding="utf-8")
    (tmp_path / "b.cfg").write_text("problem = example1\nbudget = 50\n", encoding="utf-8")
    assert load_config(tmp_path / "a.json") == load_config(tmp_path / "b.cfg")


def test_find_start_prefers_known_interior_point():
    fx = fixture_example1()
    x, ph1 = find_start(fx)
    assert ph1 is None
    assert_allclose(x, fx.x_start)


def test_find_start_runs_phase1_when_needed():
    x, ph1 = find_start(fixture_disk())
    assert ph1 is not None and ph1.success
    assert x @ x <= 1.0 - 1e-4


def test_prepare_run_uses_fixture_estimates_with_noise_bound():
    fx = named_fixture("box_qp_n3_l0")
    cfg = ExperimentConfig(problem=fx.name, mode="stochastic", noise={"kind": "gaussian", "sigma": 0.5}, budget=10)
    run = prepare_run(fx, cfg)
    assert not run.sampled
    assert run.estimates.sigma == 0.5
    assert run.schedule.stochastic
    det = prepare_run(fx, cfg, mode="deterministic")
    assert det.estimates.sigma == 0.0


def _read_outputs(out_dir):
    return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}


def test_run_experiment_writes_reports(tmp_path):
    cfg = ExperimentConfig(problem="example1", budget=60, seeds=[0, 1], output_dir=str(tmp_path), trace_every=10)
    res = run_experiment(cfg, ledger=False)
    names = {p.name for p in tmp_path.iterdir()}
    label = cfg.run_label
    assert {f"{label}_seed0.json", f"{label}_seed0_trace.csv", f"{label}_seed1.json",
            f"{label}_objectives.csv", f"{label}_summary.json", f"{label}_config.json"} <= names
    report = json.loads((tmp_path / f"{label}_seed0.json").read_text(encoding="utf-8"))
    assert report["iterations_run"] == 60
    # sin ruido, las semillas no cambian la ejecución determinista
    assert res.reports[0].f_final == res.reports[1].f_final
    assert res.summary["f_final_relative_spread"] == 0.0
    table = pd.read_csv(tmp_path / f"{label}_objectives.csv")
    assert list(table["run"]) == ["det", "det"]


def test_run_experiment_is_byte_reproducible(tmp_path):
    common = dict(problem="box_qp_n3_l0", mode="stochastic", budget=80, seeds=[2, 5],
                  noise={"kind": "gaussian", "sigma": 0.5}, include_deterministic=True)
    run_experiment(ExperimentConfig(output_dir=str(tmp_path / "a"), **common), ledger=False)
    run_experiment(ExperimentConfig(output_dir=str(tmp_path / "b"), workers=2, **common), ledger=False)
    a, b = _read_outputs(tmp_path / "a"), _read_outputs(tmp_path / "b")
    assert a.keys() == b.keys()
    assert a == b
    table = pd.read_csv(tmp_path / "a" / "box_qp_n3_l0_stochastic_objectives.csv")
    assert list(table["run"].astype(str)) == ["det", "2", "5"]


def test_run_experiment_reports_phase1(tmp_path):
    cfg = ExperimentConfig(problem="disk", budget=30, output_dir=str(tmp_path))
    res = run_experiment(cfg, ledger=False)
    assert len(res.phase1) == 1
    assert (tmp_path / "disk_deterministic_disk_phase1.json").exists()
    assert np.all(fixture_disk().spec.eval_c(res.reports[0].final_x) < 0)


def test_run_experiment_explicit_infeasible_start(tmp_path):
    cfg = ExperimentConfig(problem="example1", budget=5, start=[-1.0, 0.0], output_dir=str(tmp_path))
    with pytest.raises(InfeasibleStart):
        run_experiment(cfg, ledger=False)


def test_ledger_records_and_reads_back(tmp_path):
    cfg = ExperimentConfig(problem="example1_v11", budget=20, seeds=[3], output_dir=str(tmp_path))
    res = run_experiment(cfg, ledger=True)
    df = ledger.runs_frame("example1_a1_v1_1")
    assert len(df) >= 1
    row = df.iloc[-1]
    assert row["seed"] == 3
    assert row["iterations"] == 20
    assert row["f_final"] == pytest.approx(res.reports[0].f_final)


def test_summary_and_spread():
    assert reports.relative_spread([1.0, 1.0, 1.0]) == 0.0
    assert reports.relative_spread([-10.0, -9.0]) == pytest.approx(0.1)
    assert reports.relative_spread([0.1, 0.3]) == pytest.approx(0.2)
    assert reports.summarize([])["runs"] == 0


@pytest.mark.slow
def test_batch_histogram_deterministic(tmp_path):
    cfg = ExperimentConfig(problem="batch", budget=20000, output_dir=str(tmp_path), trace_every=1000)
    res = run_experiment(cfg, ledger=False)
    hist = pd.read_csv(tmp_path / "batch_deterministic_histogram.csv")
    assert len(hist) == len(fixture_batch())
    assert res.summary["all_decreased"]
    assert res.summary["relative_stationarity_fraction_below_target"] >= 0.9


@pytest.mark.slow
def test_socp_stochastic_final_objectives_agree(tmp_path):
    cfg = ExperimentConfig(
        problem="socp:50,10,7", mode="stochastic", budget=20000, seeds=list(range(1, 11)),
        noise={"kind": "gaussian", "sigma": 1.0}, include_deterministic=True, output_dir=str(tmp_path),
    )
    res = run_experiment(cfg, ledger=False)
    assert res.summary["runs"] == 11
    assert res.summary["f_final_relative_spread"] <= 1e-3
    fx = generate_socp(50, 10, 7)
    assert all(np.all(fx.spec.eval_c(r.final_x) < 0) for r in res.reports)


@pytest.mark.parametrize("name", ["socp_tabla.cfg", "lote_histograma.cfg", "ejemplo1_kkt.json"])
def test_shipped_configs_validate(name):
    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / name)
    assert cfg.budget == 20000
