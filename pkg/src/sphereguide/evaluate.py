"""Noise-free policy evaluation over the benchmark start/goal distributions.

Three distributions: ``uni`` draws independent starts and goals from the
state dataset (goals excluding rest-on-the-floor-only modes), ``wo_balance``
additionally excludes goals balanced solely on the robot sphere, and
``traj`` draws starts along demonstrated trajectories with their goals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scene as sc
from . import sim
from .guidance import sample_baseline, sample_traj, time_limit
from .rl import Networks
from .rng import substream
from .sampler import StateDataset, filter_goals
from .trajopt import TrajectoryDataset

DISTRIBUTIONS = ("uni", "wo_balance", "traj")


@dataclass
class EvalReport:
    method: str
    distribution: str
    episodes: int
    success_rate: float
    seed: int
    outcomes: list

    def __post_init__(self):
        if abs(self.success_rate * self.episodes
               - sum(self.outcomes)) > 1e-9:
            raise ValueError("success_rate inconsistent with outcomes")


def evaluate_policy(spec: sc.SceneSpec, nets: Networks, distribution: str,
                    episodes: int, seed: int, ds: StateDataset = None,
                    du: TrajectoryDataset = None,
                    sim_params: sim.SimParams = None,
                    method: str = "") -> EvalReport:
    """Run ``episodes`` deterministic episodes; success = termination."""
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    if distribution in ("uni", "wo_balance"):
        if ds is None or len(ds) == 0:
            raise ValueError(f"distribution {distribution} requires a "
                             "state dataset")
        goal_pool = filter_goals(
            ds, exclude_on_table_only=True,
            exclude_robot_balance=(distribution == "wo_balance"), spec=spec)
        if len(goal_pool) == 0:
            raise ValueError("goal filter removed every candidate goal")
    else:
        if du is None or len(du.records) == 0:
            raise ValueError("distribution traj requires a trajectory "
                             "dataset")
    if sim_params is None:
        sim_params = sim.SimParams()
    env = sim.ManipEnv(spec, sim_params)
    limit = time_limit(1.0, False, 2.0)

    outcomes = []
    for ep in range(episodes):
        rng = substream(seed, "eval", distribution, ep)
        if distribution == "traj":
            start, goal = sample_traj(du, 1.0, False, rng)
        else:
            start, goal = sample_baseline(ds, rng, goal_pool)
        obs = env.reset(start, goal)
        env.set_time_limit(limit)
        success = 0
        while True:
            res = env.step(nets.policy(obs))
            obs = res.obs
            if res.terminated:
                success = 1
            if res.done:
                break
        outcomes.append(success)
    n_success = sum(outcomes)
    return EvalReport(method=method, distribution=distribution,
                      episodes=episodes,
                      success_rate=n_success / episodes if episodes else 0.0,
                      seed=seed, outcomes=outcomes)


def report_table(reports) -> str:
    """Fixed-width summary table for one or more reports."""
    lines = [f"{'method':<14} {'distribution':<12} {'episodes':>8} "
             f"{'success':>8}  seed"]
    for r in reports:
        lines.append(f"{r.method or '-':<14} {r.distribution:<12} "
                     f"{r.episodes:>8d} {r.success_rate:>8.3f}  {r.seed}")
    return "\n".join(lines)
