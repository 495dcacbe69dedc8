"""Command-line interface."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .compiled import CompiledModel
from .config import ModelConfig
from .dp import load_value_csv, save_value_csv, solve
from .harness import (
    ALGO_PDS,
    ALGO_Q,
    METRICS_COLUMNS,
    AGGREGATE_COLUMNS,
    ExperimentConfig,
    evaluate_policy,
    monte_carlo,
    run_single,
    write_csv,
)
from .indexing import InstanceTooLargeError, enumerate_states
from .learners import StepSchedule


def _save_policy(path, policy, config_hash):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write("state_index,action\n")
        for i, a in enumerate(policy):
            fh.write(f"{i},{int(a)}\n")


def _load_policy(path, n_states, expected_hash=None):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# config_hash="):
            raise ValueError(f"{path}: missing config hash header")
        found = header.split("=", 1)[1]
        if expected_hash is not None and found != expected_hash:
            raise ValueError(f"{path}: config hash mismatch")
        fh.readline()
        policy = np.full(n_states, -1, dtype=np.int8)
        for line in fh:
            if line.strip():
                i, a = line.split(",")
                policy[int(i)] = int(a)
    return policy


def cmd_enumerate(args):
    cfg = ModelConfig.from_toml(args.config)
    idx = enumerate_states(cfg)
    print(f"per-UPF feasible vectors: {list(idx.radices)}")
    print(f"allocation matrices: {idx.total_allocs}")
    print(f"states: {idx.total_states}")
    return 0


def cmd_dp(args):
    cfg = ModelConfig.from_toml(args.config)
    cm = CompiledModel(cfg)
    result = solve(cm, tol=args.tol, mode=args.mode)
    h = cfg.config_hash()
    save_value_csv(args.out, result.v, h)
    base, ext = os.path.splitext(args.out)
    pds_out = f"{base}_pds{ext or '.csv'}"
    save_value_csv(pds_out, result.vtilde, h)
    print(
        f"solved in {result.sweeps} sweeps (final sup-norm change "
        f"{result.final_delta:.3e}); wrote {args.out} and {pds_out}"
    )
    return 0


def cmd_train(args):
    cfg = ModelConfig.from_toml(args.config)
    cm = CompiledModel(cfg)
    h = cfg.config_hash()
    if args.vstar:
        vstar = load_value_csv(args.vstar, expected_hash=h)
    else:
        vstar = solve(cm, tol=args.tol, mode="pds").v
    from .env import derive_seed
    from .harness import _ALGO_SALT
    from .learners import pds_vi_train, q_learning_train
    from .metrics import rbe

    seed = derive_seed(args.seed ^ _ALGO_SALT[args.algo], 0)
    schedule = StepSchedule(omega=args.omega, offset=args.offset)
    rows = []

    def hook(learner):
        r = rbe(learner.derived_value(), vstar, learner.w)
        rows.append(
            (0, args.algo, "train", learner.slots, r, learner.avg_cost(),
             learner.blocked)
        )

    if args.algo == ALGO_PDS:
        learner = pds_vi_train(
            cm, args.slots, seed, schedule=schedule,
            snapshot_every=args.snapshot_every, hook=hook,
        )
    else:
        learner = q_learning_train(
            cm, args.slots, seed, schedule=schedule,
            snapshot_every=args.snapshot_every, hook=hook,
        )
    write_csv(args.metrics_out, METRICS_COLUMNS, rows, h)
    if args.policy_out:
        _save_policy(args.policy_out, learner.total_policy(), h)
        print(f"wrote {args.policy_out}")
    print(f"wrote {args.metrics_out}")
    return 0


def cmd_evaluate(args):
    cfg = ModelConfig.from_toml(args.config)
    cm = CompiledModel(cfg)
    h = cfg.config_hash()
    policy = _load_policy(args.policy, cm.S, expected_hash=h)
    rows = evaluate_policy(policy, cm, args.slots, args.seed, args.snapshot_every)
    for done, avg_cost, blocked in rows:
        print(f"{done},{avg_cost!r},{blocked}")
    return 0


def cmd_compare(args):
    cfg = ModelConfig.from_toml(args.config)
    exp = ExperimentConfig(
        model=cfg,
        train_slots=args.slots,
        eval_slots=args.eval_slots,
        runs=args.runs,
        base_seed=args.seed,
        snapshot_every=args.snapshot_every,
        tol=args.tol,
        workers=args.workers,
    )
    rows, agg = monte_carlo(exp)
    h = cfg.config_hash()
    os.makedirs(args.out_dir, exist_ok=True)
    write_csv(os.path.join(args.out_dir, "metrics.csv"), METRICS_COLUMNS, rows, h)
    write_csv(os.path.join(args.out_dir, "aggregate.csv"), AGGREGATE_COLUMNS, agg, h)
    print(f"wrote {args.out_dir}/metrics.csv and {args.out_dir}/aggregate.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowalloc")
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("enumerate", help="count the feasible state space")
    pe.add_argument("--config", required=True)
    pe.set_defaults(func=cmd_enumerate)

    pd = sub.add_parser("dp", help="solve the MDP exactly")
    pd.add_argument("--config", required=True)
    pd.add_argument("--tol", type=float, default=1e-9)
    pd.add_argument("--mode", choices=["direct", "pds"], default="pds")
    pd.add_argument("--out", default="vstar.csv")
    pd.set_defaults(func=cmd_dp)

    pt = sub.add_parser("train", help="train one learner online")
    pt.add_argument("--algo", choices=[ALGO_PDS, ALGO_Q], required=True)
    pt.add_argument("--config", required=True)
    pt.add_argument("--slots", type=int, required=True)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--vstar", default=None)
    pt.add_argument("--tol", type=float, default=1e-9)
    pt.add_argument("--snapshot-every", type=int, default=1000)
    pt.add_argument("--metrics-out", default="metrics.csv")
    pt.add_argument("--policy-out", default=None)
    pt.add_argument("--omega", type=float, default=0.7)
    pt.add_argument("--offset", type=float, default=1.0)
    pt.set_defaults(func=cmd_train)

    pv = sub.add_parser("evaluate", help="run a frozen policy")
    pv.add_argument("--config", required=True)
    pv.add_argument("--policy", required=True)
    pv.add_argument("--slots", type=int, required=True)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--snapshot-every", type=int, default=None)
    pv.set_defaults(func=cmd_evaluate)

    pc = sub.add_parser("compare", help="full Monte Carlo comparison")
    pc.add_argument("--config", required=True)
    pc.add_argument("--slots", type=int, default=3_500_000)
    pc.add_argument("--eval-slots", type=int, default=1_000_000)
    pc.add_argument("--runs", type=int, default=20)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--workers", type=int, default=1)
    pc.add_argument("--snapshot-every", type=int, default=100_000)
    pc.add_argument("--tol", type=float, default=1e-9)
    pc.add_argument("--out-dir", default="out")
    pc.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
