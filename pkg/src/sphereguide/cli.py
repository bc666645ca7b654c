"""Command-line pipeline: sample states, optimize trajectories, compile BC
data, train policies, and evaluate checkpoints.

Exit codes: 0 on success, 1 on usage errors (bad flags or flag
combinations), 2 on runtime failures.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import datasets, evaluate, guidance, sampler, scene, sim, splines, trajopt
from .rl import TrainConfig

_METHODS = guidance.METHODS
_DISTS = ("uni", "wo-balance", "traj")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse defaults to exit code 2; the pipeline reserves 2 for
        # runtime failures and uses 1 for usage problems
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _load_scene(path):
    if path is None:
        return scene.default_scene()
    return scene.load_scene(path)


def _cmd_sample_states(args) -> int:
    spec = _load_scene(args.scene)
    ds = sampler.generate_states(spec, args.num, args.seed)
    datasets.save_states(args.out, ds)
    print(f"wrote {len(ds)} states to {args.out} "
          f"(attempts {ds.attempts}, feasibility "
          f"{ds.feasibility_rate:.3f})")
    return 0 if ds.complete else 2


def _cmd_optimize_trajectories(args) -> int:
    spec = _load_scene(args.scene)
    ds = datasets.load_states(args.states)
    if scene.scene_hash(spec) != ds.scene_hash:
        raise RuntimeError("state dataset was generated for a different "
                           "scene")
    du = trajopt.generate_trajectories(spec, ds, args.num, args.seed)
    datasets.save_trajectories(args.out, du)
    print(f"wrote {len(du)} trajectories to {args.out} "
          f"(attempts {du.attempts}, feasibility "
          f"{du.feasibility_rate:.3f})")
    return 0 if du.complete else 2


def _cmd_compile_bc(args) -> int:
    du = datasets.load_trajectories(args.trajectories)
    triples = splines.compile_bc_dataset(du)
    datasets.save_bc(args.out, triples)
    print(f"wrote {len(triples)} BC triples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    spec = _load_scene(args.scene)
    ds = datasets.load_states(args.states)
    du = None
    if args.method in guidance.TRAJ_METHODS:
        if args.trajectories is None:
            raise _UsageError(f"method {args.method} requires --trajectories")
        du = datasets.load_trajectories(args.trajectories)
    lambda_bc = args.lambda_bc
    if lambda_bc is None:
        lambda_bc = 0.3 if args.method == "trajSchedBC" else 0.0
    t_block = args.t_block if args.t_block else max(1, args.steps // 20)
    t_sched = args.t_sched if args.t_sched else max(1, args.steps // 2)
    cfg = guidance.RunConfig(
        method=args.method, steps=args.steps, t_block=t_block,
        t_sched=t_sched, train=TrainConfig(lambda_bc=lambda_bc,
                                           gamma=args.gamma))
    os.makedirs(args.out, exist_ok=True)
    metrics_path = os.path.join(args.out, "metrics.csv")
    with datasets.MetricsWriter(metrics_path) as mw:
        def on_block(row):
            mw.write(row)
            print(f"step {row['step']:>8d} block {row['block']:>3d} "
                  f"alpha {row['alpha']:.3f} "
                  f"reward {row['avg_episode_reward']:.3f} "
                  f"success {row['success_rate']:.3f}", flush=True)
        nets, rows = guidance.run_training(spec, cfg, ds, du=du,
                                           seed=args.seed,
                                           on_block=on_block)
    datasets.save_checkpoint(
        os.path.join(args.out, "checkpoint"), nets, cfg.train,
        step=cfg.steps, seed=args.seed, scene_hash=scene.scene_hash(spec),
        extra={"method": args.method, "steps": cfg.steps,
               "t_block": cfg.t_block, "t_sched": cfg.t_sched,
               "alpha_min": cfg.alpha_min, "pair_batch": cfg.pair_batch})
    print(f"checkpoint written to {os.path.join(args.out, 'checkpoint')}")
    return 0


def _cmd_evaluate(args) -> int:
    nets, cfg, meta = datasets.load_checkpoint(args.checkpoint)
    spec = _load_scene(args.scene)
    if scene.scene_hash(spec) != meta["scene_hash"]:
        raise RuntimeError("checkpoint was trained on a different scene")
    dist = args.distribution.replace("-", "_")
    ds = du = None
    if dist in ("uni", "wo_balance"):
        if args.states is None:
            raise _UsageError(f"distribution {args.distribution} requires "
                              "--states")
        ds = datasets.load_states(args.states)
    else:
        if args.trajectories is None:
            raise _UsageError("distribution traj requires --trajectories")
        du = datasets.load_trajectories(args.trajectories)
    report = evaluate.evaluate_policy(
        spec, nets, dist, args.episodes, args.seed, ds=ds, du=du,
        method=meta.get("extra", {}).get("method", ""))
    datasets.save_report(args.out, report)
    print(evaluate.report_table([report]))
    return 0


def _cmd_stats(args) -> int:
    with open(args.dataset) as fh:
        header = json.loads(fh.readline())
    kind = header.get("kind")
    if kind == "states":
        ds = datasets.load_states(args.dataset)
        print(f"kind:             states")
        print(f"samples:          {len(ds)}")
        print(f"attempts:         {ds.attempts}")
        print(f"feasibility_rate: {ds.feasibility_rate:.4f}")
        print(f"evals_per_sample: {ds.evals_per_sample:.1f}")
        print(f"complete:         {ds.complete}")
    elif kind == "trajectories":
        du = datasets.load_trajectories(args.dataset)
        per = du.n_evals / len(du) if len(du) else float("nan")
        print(f"kind:             trajectories")
        print(f"records:          {len(du)}")
        print(f"attempts:         {du.attempts}")
        print(f"feasibility_rate: {du.feasibility_rate:.4f}")
        print(f"evals_per_record: {per:.1f}")
        print(f"complete:         {du.complete}")
    elif kind == "bc":
        print(f"kind:             bc")
        print(f"triples:          {header['count']}")
    else:
        raise RuntimeError(f"unrecognized dataset kind {kind!r}")
    print("wall time:        not stored (outputs are content-deterministic)")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="sphereguide",
                description="Sample-guided RL pipeline for contact-rich "
                            "sphere manipulation")
    sub = p.add_subparsers(dest="command", required=True)

    ss = sub.add_parser("sample-states", parents=[],
                        help="project random configurations onto the "
                             "constraint manifold")
    ss.add_argument("--scene", default=None, help="scene YAML (default: "
                                                  "built-in double sphere)")
    ss.add_argument("--num", type=int, required=True)
    ss.add_argument("--seed", type=int, required=True)
    ss.add_argument("--out", required=True)
    ss.set_defaults(func=_cmd_sample_states)

    ot = sub.add_parser("optimize-trajectories",
                        help="optimize open-loop trajectories between "
                             "sampled states")
    ot.add_argument("--scene", default=None)
    ot.add_argument("--states", required=True)
    ot.add_argument("--num", type=int, required=True)
    ot.add_argument("--seed", type=int, required=True)
    ot.add_argument("--out", required=True)
    ot.add_argument("--workers", type=int, default=1,
                    help="parallelism cap (results are identical for any "
                         "value)")
    ot.set_defaults(func=_cmd_optimize_trajectories)

    cb = sub.add_parser("compile-bc", help="flatten trajectories into "
                                           "behavior-cloning triples")
    cb.add_argument("--trajectories", required=True)
    cb.add_argument("--out", required=True)
    cb.set_defaults(func=_cmd_compile_bc)

    tr = sub.add_parser("train", help="train a policy with a reset "
                                      "strategy")
    tr.add_argument("--scene", default=None)
    tr.add_argument("--method", choices=_METHODS, required=True)
    tr.add_argument("--states", required=True)
    tr.add_argument("--trajectories", default=None)
    tr.add_argument("--steps", type=int, required=True)
    tr.add_argument("--seed", type=int, required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--lambda-bc", type=float, default=None,
                    help="BC weight (default 0.3 for trajSchedBC, else 0)")
    tr.add_argument("--gamma", type=float, default=0.95)
    tr.add_argument("--t-block", type=int, default=None,
                    help="steps per block (default steps/20)")
    tr.add_argument("--t-sched", type=int, default=None,
                    help="schedule horizon (default steps/2)")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint on a "
                                         "start/goal distribution")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--distribution", choices=_DISTS, required=True)
    ev.add_argument("--episodes", type=int, required=True)
    ev.add_argument("--seed", type=int, required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--scene", default=None)
    ev.add_argument("--states", default=None)
    ev.add_argument("--trajectories", default=None)
    ev.add_argument("--workers", type=int, default=1)
    ev.set_defaults(func=_cmd_evaluate)

    st = sub.add_parser("stats", help="print dataset statistics")
    st.add_argument("--dataset", required=True)
    st.set_defaults(func=_cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
