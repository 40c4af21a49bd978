import json
import subprocess
import sys

import numpy as np
import pytest

from stochvi import cli
from stochvi.bench import (
    SUMMARY_COLUMNS,
    BenchmarkSummary,
    ConfigError,
    ExperimentConfig,
    SummaryRow,
    check_expectations,
    config_from_dict,
    derive_seed,
    emit_table,
    emit_trajectory_curves,
    parse_summary_csv,
    run_experiment,
    runs_csv,
)
from stochvi.errors import InvalidInputError, UnsupportedOperationError
from stochvi.problems import affine_test_problem
from stochvi.schedules import ConstantBatch, ConstantStep
from stochvi.solvers import SolverConfig, StoppingRule, run


def small_game_cfg(**kw):
    base = dict(family="asymmetric", dims=((4, 6),), replications=3, base_seed=5,
                stop=StoppingRule(1e-3, max_iterations=400))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def game_summary():
    return run_experiment(small_game_cfg(record_trajectory=True))


def test_summary_shape(game_summary):
    assert [(r.dim, r.algorithm) for r in game_summary.rows] == [("4x6", "SFBF"), ("4x6", "SEG")]
    assert len(game_summary.records) == 6
    for row in game_summary.rows:
        recs = game_summary.records_for(row.dim, row.algorithm)
        its = [r.report.iterations for r in recs]
        assert row.mean_iterations == pytest.approx(np.mean(its))
        assert row.sd_iterations == pytest.approx(np.std(its, ddof=1))
        assert 0 <= row.convergence_rate <= 1


def test_oracle_call_ledger(game_summary):
    for row in game_summary.rows:
        recs = game_summary.records_for(row.dim, row.algorithm)
        for r in recs:
            assert r.report.oracle_calls == r.expected_oracle_calls == 2 * sum(r.report.batch_sizes)
        assert row.mean_oracle_calls == pytest.approx(np.mean([r.expected_oracle_calls for r in recs]))


def test_paired_instances(game_summary):
    sfbf = game_summary.records_for("4x6", "SFBF")
    seg = game_summary.records_for("4x6", "SEG")
    assert [r.problem_seed for r in sfbf] == [r.problem_seed for r in seg]
    assert len({r.solver_seed for r in sfbf + seg}) == 6


def test_derive_seed():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1) != derive_seed(1, 1, 2)
    assert 0 <= derive_seed(123, 4) < 2**64


def test_emit_table_one_row():
    row = SummaryRow("fractional", "200", "SFBF", 29.88, 1.5, 0.1234567, 0.01, 1000.0, 1.0)
    text = emit_table(BenchmarkSummary([row]), "csv")
    lines = text.strip().split("\n")
    assert len(lines) == 2 and lines[0] == ",".join(SUMMARY_COLUMNS)
    assert "aligned" not in emit_table(BenchmarkSummary([row]), "aligned_text")


def test_emit_table_empty_is_error():
    with pytest.raises(InvalidInputError):
        emit_table(BenchmarkSummary([]), "csv")
    with pytest.raises(InvalidInputError):
        emit_table(BenchmarkSummary([]), "aligned_text")


def test_emit_table_round_trip(game_summary):
    parsed = parse_summary_csv(emit_table(game_summary, "csv"))
    assert len(parsed) == len(game_summary.rows)
    for a, b in zip(parsed, game_summary.rows):
        assert (a.family, a.dim, a.algorithm) == (b.family, b.dim, b.algorithm)
        for col in SUMMARY_COLUMNS[3:]:
            assert getattr(a, col) == pytest.approx(getattr(b, col), rel=5e-6, abs=1e-300)


def test_aligned_text_has_ratio_column(game_summary):
    text = emit_table(game_summary, "aligned_text")
    header, rule, line = text.strip().split("\n")
    assert "SEG/SFBF iters" in header and set(rule) <= {"-", "+"}
    ratio = game_summary.ratio("4x6")[0]
    assert line.rstrip().endswith(f"{ratio:.2f}")


def test_trajectory_curves_rows(game_summary):
    text = emit_trajectory_curves(game_summary.records)
    lines = text.strip().split("\n")
    assert lines[0] == "run_id,algorithm,n,wall_time_s,residual"
    ids = [ln.split(",")[0] for ln in lines[1:]]
    # contiguous blocks in record order
    order = list(dict.fromkeys(ids))
    assert order == [r.run_id for r in game_summary.records]
    assert ids == sorted(ids, key=order.index)
    for r in game_summary.records:
        assert ids.count(r.run_id) == r.report.iterations


def test_fifty_iteration_run_gives_fifty_rows():
    p = affine_test_problem(4, True, seed=0)
    cfg = SolverConfig("SFBF", ConstantStep(0.01), ConstantBatch(1), StoppingRule(1e-300, max_iterations=50),
                       record_trajectory=True)
    rep = run(p, cfg, np.zeros(4))
    lines = emit_trajectory_curves([("only", rep)]).strip().split("\n")
    assert len(lines) == 51 and all(ln.startswith("only,SFBF,") for ln in lines[1:])


def test_zero_noise_affine_residual_strictly_decreasing():
    cfg = ExperimentConfig("affine", ((10,), (25,)), replications=2, noise_sd=0.0, record_trajectory=True,
                           stop=StoppingRule(1e-9, max_iterations=2000))
    summary = run_experiment(cfg)
    for rec in summary.records:
        res = [p.residual for p in rec.report.trajectory]
        assert all(b < a + 1e-12 for a, b in zip(res[1:], res[2:]))


def test_trajectory_curves_missing():
    summary = run_experiment(small_game_cfg(replications=1))
    with pytest.raises(UnsupportedOperationError, match="asymmetric-4x6-SFBF-0"):
        emit_trajectory_curves(summary.records)


def test_determinism_and_byte_identical_runs_csv(tmp_path):
    cfg = small_game_cfg(replications=2, record_trajectory=True)
    a = run_experiment(cfg, output_dir=str(tmp_path / "a"))
    b = run_experiment(cfg, output_dir=str(tmp_path / "b"))
    for name in ("runs.csv", "summary.csv", "problems.jsonl", "config.json"):
        if name == "summary.csv":
            continue  # holds timing columns
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    for x, y in zip(a.records, b.records):
        assert [p.residual for p in x.report.trajectory] == [p.residual for p in y.report.trajectory]
    assert (tmp_path / "a" / "trajectories.csv").exists()


def test_single_replication_repeat():
    cfg = small_game_cfg(replications=1, record_trajectory=True)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.records[0].report.iterations == b.records[0].report.iterations
    assert [p.residual for p in a.records[0].report.trajectory] == [p.residual for p in b.records[0].report.trajectory]


@pytest.mark.slow
def test_parallel_matches_serial():
    cfg = small_game_cfg(replications=2)
    serial = run_experiment(cfg, parallelism=1)
    parallel = run_experiment(cfg, parallelism=2)
    assert runs_csv(serial.records) == runs_csv(parallel.records)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("knapsack", ((3,),))
    with pytest.raises(ConfigError):
        ExperimentConfig("symmetric", ((3, 4),))
    with pytest.raises(ConfigError):
        ExperimentConfig("fractional", ((3,),), replications=0)
    with pytest.raises(ConfigError):
        ExperimentConfig("fractional", ())
    with pytest.raises(ConfigError):
        ExperimentConfig("fractional", ((3,),), algorithms=("GD",))
    with pytest.raises(ConfigError):
        ExperimentConfig("fractional", ((3,),), step_rule={"alpha": -1})
    with pytest.raises(ConfigError):
        config_from_dict({"family": "fractional", "dims": [3], "stop": {"residual_tol": 0}})
    with pytest.raises(ConfigError):
        config_from_dict({"family": "fractional", "dims": [3], "colour": "red"})
    cfg = config_from_dict({"family": "zero_sum", "dims": [[5, 5]], "algorithms": ["sfbf"]})
    assert cfg.dims == ((5, 5),) and cfg.algorithms == ("SFBF",)


def test_check_expectations(game_summary):
    ok = check_expectations(game_summary, [
        {"dim": "4x6", "algorithm": "SFBF", "metric": "convergence_rate", "min": 0.0, "max": 1.0},
        {"dim": "4x6", "ratio": ["SEG", "SFBF"], "min": 0.0},
        {"dim": "4x6", "algorithm": "SEG", "metric": "max_final_residual", "max": 1.0},
    ])
    assert all(r.passed for r in ok)
    bad = check_expectations(game_summary, [{"dim": "4x6", "algorithm": "SFBF", "metric": "mean_iterations",
                                             "max": 0.5}])
    assert not bad[0].passed and "FAIL" in bad[0].line()


# -- command line ---------------------------------------------------------------------


def write_cfg(tmp_path, **kw):
    raw = {"family": "asymmetric", "dims": [[4, 6]], "replications": 1,
           "stop": {"residual_tol": 1e-3, "max_iterations": 400}}
    raw.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return str(path)


def test_cli_bench_success(tmp_path, capsys):
    path = write_cfg(tmp_path, expect=[{"dim": "4x6", "algorithm": "SFBF", "metric": "convergence_rate", "min": 1}])
    assert cli.main(["bench", path, "--output-dir", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "SEG/SFBF iters" in out and "PASS" in out
    assert (tmp_path / "out" / "summary.csv").exists() and (tmp_path / "out" / "runs.csv").exists()


def test_cli_bench_failed_expectation(tmp_path, capsys):
    path = write_cfg(tmp_path, expect=[{"dim": "4x6", "algorithm": "SFBF", "metric": "mean_iterations", "max": 0}])
    assert cli.main(["bench", path]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_bench_config_error(tmp_path, capsys):
    assert cli.main(["bench", write_cfg(tmp_path, family="knapsack")]) == 2
    assert cli.main(["bench", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["bench", str(tmp_path / "bad.json")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_seed_override(tmp_path, capsys):
    path = write_cfg(tmp_path)
    cli.main(["bench", path, "--output-dir", str(tmp_path / "s1"), "--seed", "1"])
    cli.main(["bench", path, "--output-dir", str(tmp_path / "s2"), "--seed", "2"])
    assert (tmp_path / "s1" / "runs.csv").read_text() != (tmp_path / "s2" / "runs.csv").read_text()


def test_cli_solve(tmp_path, capsys):
    traj = tmp_path / "t.csv"
    assert cli.main(["solve", "--family", "zero_sum", "--dim", "5x5", "--algorithm", "SEG",
                     "--trajectory", str(traj)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["algorithm"] == "SEG" and out["converged"] and out["problem"]["family"] == "zero_sum"
    assert traj.read_text().startswith("n,residual,distance,alpha,batch,cumulative_oracle_calls")
    assert cli.main(["solve", "--family", "symmetric", "--dim", "3x4"]) == 2


def test_cli_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["solve", "--family", "fractional", "--dim", "abc"])
    assert info.value.code == 2


def test_cli_check_subset(capsys):
    assert cli.main(["check", "--suite", "validation"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stochvi", "check", "--suite", "validation"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "FAIL" not in res.stdout
