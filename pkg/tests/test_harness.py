import numpy as np
import pytest

from flowalloc.harness import (
    AGGREGATE_COLUMNS,
    ALGO_PDS,
    ALGO_Q,
    METRICS_COLUMNS,
    ExperimentConfig,
    aggregate,
    evaluate_policy,
    monte_carlo,
    read_csv,
    run_single,
    write_csv,
)


@pytest.fixture(scope="module")
def small_exp(cfg_k2):
    return ExperimentConfig(
        model=cfg_k2,
        train_slots=40_000,
        eval_slots=20_000,
        runs=3,
        base_seed=7,
        snapshot_every=10_000,
    )


@pytest.fixture(scope="module")
def small_results(small_exp, cm_k2, solved_k2):
    return monte_carlo(small_exp, cm_k2, solved_k2.v)


def test_experiment_config_validation(cfg_k2):
    with pytest.raises(ValueError):
        ExperimentConfig(model=cfg_k2, train_slots=-1)
    with pytest.raises(ValueError):
        ExperimentConfig(model=cfg_k2, runs=0)


def test_row_structure(small_exp, small_results):
    rows, agg = small_results
    per_run = (
        small_exp.train_slots + small_exp.eval_slots
    ) // small_exp.snapshot_every
    assert len(rows) == 2 * small_exp.runs * per_run
    for r in rows:
        assert len(r) == len(METRICS_COLUMNS)
        assert r[1] in (ALGO_PDS, ALGO_Q)
        assert r[2] in ("train", "eval")
        assert r[4] >= 0 and r[5] > 0 and r[6] >= 0
    # Iterations keep counting through the evaluation phase.
    evals = [r for r in rows if r[2] == "eval"]
    assert min(r[3] for r in evals) > small_exp.train_slots


def test_rows_sorted_and_deterministic(small_exp, small_results, cm_k2, solved_k2):
    rows, agg = small_results
    assert rows == sorted(rows, key=lambda r: (r[1], r[0], r[2], r[3]))
    rows2, agg2 = monte_carlo(small_exp, cm_k2, solved_k2.v)
    assert rows2 == rows
    assert agg2 == agg


def test_runs_are_distinct_but_seeded(small_results):
    rows, _ = small_results
    by_run = {}
    for r in rows:
        by_run.setdefault((r[1], r[0]), []).append(r[4:])
    series = list(by_run.values())
    assert all(s != series[0] for s in series[1:])


def test_aggregate_matches_recomputation(small_exp, small_results):
    rows, agg = small_results
    assert all(len(a) == len(AGGREGATE_COLUMNS) for a in agg)
    groups = {}
    for r in rows:
        groups.setdefault((r[1], r[2], r[3]), []).append(r)
    assert len(agg) == len(groups)
    for a in agg:
        grp = groups[(a[0], a[1], a[2])]
        assert len(grp) == small_exp.runs
        rbes = np.array([g[4] for g in grp])
        assert a[3] == pytest.approx(rbes.mean(), rel=1e-12)
        assert a[4] == pytest.approx(
            rbes.std(ddof=1) / np.sqrt(len(grp)), rel=1e-12
        )
        costs = np.array([g[5] for g in grp])
        assert a[5] == pytest.approx(costs.mean(), rel=1e-12)


def test_aggregate_is_order_independent(small_results):
    import random

    rows, agg = small_results
    shuffled = rows[:]
    random.Random(3).shuffle(shuffled)
    assert aggregate(shuffled) == agg


def test_aggregate_single_run_has_zero_stderr(cfg_k2, cm_k2, solved_k2):
    exp = ExperimentConfig(
        model=cfg_k2, train_slots=5_000, eval_slots=0, runs=1,
        snapshot_every=5_000, algos=(ALGO_PDS,),
    )
    _, agg = monte_carlo(exp, cm_k2, solved_k2.v)
    assert all(a[4] == 0.0 and a[6] == 0.0 and a[8] == 0.0 for a in agg)


def test_eval_rows_carry_final_training_rbe(small_exp, cm_k2, solved_k2):
    rows = run_single(small_exp, cm_k2, solved_k2.v, ALGO_PDS, 0)
    train = [r for r in rows if r[2] == "train"]
    evals = [r for r in rows if r[2] == "eval"]
    assert all(r[4] == train[-1][4] for r in evals)
    # Cumulative counters never decrease within a phase.
    for seq in (train, evals):
        blocked = [r[6] for r in seq]
        assert blocked == sorted(blocked)


def test_evaluate_policy_optimal_beats_worst(cm_k2, solved_k2):
    """Sanity oracle: the exact optimal policy outperforms the cost-worst one."""
    worst = np.empty(cm_k2.S, dtype=np.int8)
    succ = cm_k2.succ.transpose(1, 0, 2).reshape(cm_k2.S, -1)
    for s in range(cm_k2.S):
        feas = np.nonzero(succ[s] >= 0)[0]
        worst[s] = max(feas, key=lambda a: cm_k2.xi[succ[s, a]])
    opt_rows = evaluate_policy(solved_k2.policy, cm_k2, 200_000, seed=5)
    bad_rows = evaluate_policy(worst, cm_k2, 200_000, seed=5)
    assert opt_rows[-1][1] < bad_rows[-1][1]


def test_evaluate_policy_oracle_dominance(cm_k2, solved_k2):
    """The exact optimal policy is never beaten by a learned one (same seeds)."""
    from flowalloc.learners import pds_vi_train, q_learning_train

    opt = evaluate_policy(solved_k2.policy, cm_k2, 200_000, seed=77)[-1][1]
    for learner in (
        pds_vi_train(cm_k2, 100_000, seed=55),
        q_learning_train(cm_k2, 100_000, seed=55),
    ):
        learned = evaluate_policy(learner.total_policy(), cm_k2, 200_000, seed=77)
        assert opt <= learned[-1][1] + 1e-9


def test_evaluate_policy_validation_and_edges(cm_k2, solved_k2):
    assert evaluate_policy(solved_k2.policy, cm_k2, 0, seed=1) == []
    with pytest.raises(ValueError, match="total"):
        partial = solved_k2.policy.copy()
        partial[0] = -1
        evaluate_policy(partial, cm_k2, 100, seed=1)
    rows = evaluate_policy(solved_k2.policy, cm_k2, 1000, seed=1, snapshot_every=300)
    assert [r[0] for r in rows] == [300, 600, 900, 1000]


def test_evaluate_policy_deterministic_in_seed(cm_k2, solved_k2):
    a = evaluate_policy(solved_k2.policy, cm_k2, 10_000, seed=9)
    b = evaluate_policy(solved_k2.policy, cm_k2, 10_000, seed=9)
    c = evaluate_policy(solved_k2.policy, cm_k2, 10_000, seed=10)
    assert a == b
    assert a != c


def test_csv_round_trip_and_hash_check(tmp_path, small_results, cfg_k2):
    rows, agg = small_results
    h = cfg_k2.config_hash()
    p = tmp_path / "metrics.csv"
    write_csv(p, METRICS_COLUMNS, rows, h)
    cols, parsed, found = read_csv(p, expected_hash=h)
    assert cols == list(METRICS_COLUMNS)
    assert found == h
    assert len(parsed) == len(rows)
    assert parsed[0]["rbe"] == rows[0][4]  # repr round-trip is exact
    with pytest.raises(ValueError, match="mismatch"):
        read_csv(p, expected_hash="0" * 16)


def test_csv_bytes_identical_across_reruns(tmp_path, small_exp, cm_k2, solved_k2):
    h = small_exp.model.config_hash()
    paths = []
    for i in range(2):
        rows, agg = monte_carlo(small_exp, cm_k2, solved_k2.v)
        p = tmp_path / f"agg{i}.csv"
        write_csv(p, AGGREGATE_COLUMNS, agg, h)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_parallel_matches_serial(small_exp, cm_k2, solved_k2):
    import dataclasses

    serial = monte_carlo(small_exp, cm_k2, solved_k2.v)
    par_exp = dataclasses.replace(small_exp, workers=2)
    parallel = monte_carlo(par_exp, cm_k2, solved_k2.v)
    assert parallel == serial


# ----- CLI ------------------------------------------------------------------


@pytest.fixture()
def config_toml(tmp_path):
    p = tmp_path / "model.toml"
    p.write_text(
        "K = 2\nM = 2\nmean_rate = [1, 2]\ncapacity = [3, 4]\n"
        "unit_power_cost = [1.0, 2.0]\narrival_prob = 0.5\n"
        "type_prob = [0.5, 0.5]\ndeparture_prob = [0.3, 0.5]\ndiscount = 0.9\n"
    )
    return p


def test_cli_enumerate(config_toml, capsys):
    from flowalloc.cli import main

    assert main(["enumerate", "--config", str(config_toml)]) == 0
    out = capsys.readouterr().out
    assert "states" in out


def test_cli_dp_train_evaluate_pipeline(config_toml, tmp_path, capsys):
    from flowalloc.cli import main

    vstar = tmp_path / "vstar.csv"
    assert main([
        "dp", "--config", str(config_toml), "--out", str(vstar),
        "--tol", "1e-10",
    ]) == 0
    assert vstar.exists() and (tmp_path / "vstar_pds.csv").exists()

    metrics = tmp_path / "metrics.csv"
    policy = tmp_path / "policy.csv"
    assert main([
        "train", "--algo", "pds-vi", "--config", str(config_toml),
        "--slots", "20000", "--vstar", str(vstar),
        "--metrics-out", str(metrics), "--policy-out", str(policy),
        "--snapshot-every", "5000", "--omega", "0.6", "--offset", "20",
    ]) == 0
    cols, rows, _ = read_csv(metrics)
    assert cols == list(METRICS_COLUMNS)
    assert len(rows) == 4
    assert rows[-1]["rbe"] < rows[0]["rbe"]

    capsys.readouterr()
    assert main([
        "evaluate", "--config", str(config_toml), "--policy", str(policy),
        "--slots", "5000",
    ]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1 and out[0].startswith("5000,")


def test_cli_compare_writes_both_csvs(config_toml, tmp_path):
    from flowalloc.cli import main

    out_dir = tmp_path / "out"
    assert main([
        "compare", "--config", str(config_toml), "--slots", "10000",
        "--eval-slots", "5000", "--runs", "2", "--snapshot-every", "5000",
        "--tol", "1e-8", "--out-dir", str(out_dir),
    ]) == 0
    for name in ("metrics.csv", "aggregate.csv"):
        cols, rows, _ = read_csv(out_dir / name)
        assert len(rows) > 0


def test_cli_rejects_oversized_instance(tmp_path):
    from flowalloc.cli import main

    p = tmp_path / "huge.toml"
    p.write_text(
        "K = 10\nM = 3\nmean_rate = [1, 2, 3]\n"
        "capacity = [1000, 1000, 1000, 1000, 1000, 1000, 1000, 1000, 1000, 1000]\n"
        "unit_power_cost = [1, 1, 1, 1, 1, 1, 1, 1, 1, 1]\n"
        "arrival_prob = 0.5\ntype_prob = [0.4, 0.3, 0.3]\n"
        "departure_prob = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]\n"
        "discount = 0.9\n"
    )
    assert main(["enumerate", "--config", str(p)]) == 2
