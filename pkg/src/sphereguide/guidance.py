"""Start/goal sampling strategies and the guided training loop.

Six strategies control where episodes reset: sampling along demonstrated
trajectories (optionally scheduled from the trajectory tail toward its
start), projected interpolation between feasible states (optionally
scheduled), and the plain start/goal distribution as the baseline.  The
orchestrator resamples a start/goal batch every block, adapts the episode
time limit to the schedule phase, and interleaves one gradient update per
environment step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import scene as sc
from . import sim
from .kdtree import KdTree
from .rl import Networks, ReplayBuffer, TrainConfig, Trainer
from .rng import substream
from .sampler import StateDataset, filter_goals
from .splines import compile_bc_dataset
from .trajopt import TrajectoryDataset

METHODS = ("traj", "trajSched", "trajSchedBC", "interp", "interpSched",
           "baseline")
SCHEDULED_METHODS = frozenset({"trajSched", "trajSchedBC", "interpSched"})
TRAJ_METHODS = frozenset({"traj", "trajSched", "trajSchedBC"})
INTERP_METHODS = frozenset({"interp", "interpSched"})


@dataclass
class Schedule:
    t_tot: int = 2_000_000
    t_block: int = 100_000
    t_sched: int = 1_000_000
    alpha_min: float = 0.1

    def __post_init__(self):
        if min(self.t_tot, self.t_block, self.t_sched) < 1:
            raise ValueError("schedule horizons must be positive")
        if not 0.0 < self.alpha_min <= 1.0:
            raise ValueError("alpha_min must lie in (0, 1]")

    def alpha_at(self, t: int, scheduled: bool) -> float:
        """Phase in [alpha_min, 1]; identically 1 for unscheduled methods."""
        if not scheduled:
            return 1.0
        return min(max((t + self.t_block) / self.t_sched, self.alpha_min), 1.0)


class PhiIndex:
    """Exact nearest-feasible-state lookup in embedding space."""

    def __init__(self, spec: sc.SceneSpec, ds: StateDataset):
        if len(ds) < 1:
            raise ValueError("state dataset is empty")
        self.spec = spec
        self.embeds = np.array([sc.phi_static(spec, cfg.s)
                                for cfg in ds.samples])
        self.tree = KdTree(self.embeds)

    def nearest(self, phi) -> int:
        return self.tree.query(np.asarray(phi, dtype=float))[0]


def sample_traj(du: TrajectoryDataset, alpha: float, scheduled: bool,
                rng) -> tuple:
    """(start snapshot, goal) from a random demonstrated trajectory.

    The start is the stored state at t ~ U[(1-alpha)T, T] (U[0, T]
    unscheduled), snapped to the nearest snapshot on the 0.05 s grid.
    """
    rec = du.records[int(rng.integers(len(du.records)))]
    horizon = (rec.path.shape[0] - 1) * sim.H_WINDOW
    lo = (1.0 - alpha) * horizon if scheduled else 0.0
    t = rng.uniform(lo, horizon)
    assert lo - 1e-12 <= t <= horizon + 1e-12
    w = int(round(t / sim.H_WINDOW))
    w = min(max(w, 0), rec.path.shape[0] - 1)
    return rec.path[w].copy(), rec.g


def sample_interp(ds: StateDataset, index: PhiIndex, alpha: float,
                  scheduled: bool, rng, goal_pool: StateDataset = None) -> tuple:
    """(start, goal) by projecting an interpolated configuration back onto
    the dataset: the start is the feasible state nearest in embedding space
    to (1-t)a + t g."""
    pool = goal_pool if goal_pool is not None else ds
    a = ds.samples[int(rng.integers(len(ds)))]
    g = pool.samples[int(rng.integers(len(pool)))]
    lo = 1.0 - alpha if scheduled else 0.0
    t = rng.uniform(lo, 1.0)
    assert lo - 1e-12 <= t <= 1.0 + 1e-12
    interp = (1.0 - t) * a.s + t * g.s
    i = index.nearest(sc.phi_static(index.spec, interp))
    return ds.samples[i], g


def sample_baseline(ds: StateDataset, rng,
                    goal_pool: StateDataset = None) -> tuple:
    """Independent uniform start and goal draws."""
    pool = goal_pool if goal_pool is not None else ds
    s = ds.samples[int(rng.integers(len(ds)))]
    g = pool.samples[int(rng.integers(len(pool)))]
    return s, g


def time_limit(alpha: float, scheduled: bool, base_t: float,
               window: float = sim.H_WINDOW) -> int:
    """Episode step budget: ceil(2*alpha*base_t/window) when scheduled,
    base_t/window otherwise."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if scheduled:
        return max(1, int(math.ceil(2.0 * alpha * base_t / window - 1e-9)))
    return max(1, int(round(base_t / window)))


@dataclass
class StartGoalBatch:
    pairs: list
    method: str
    alpha: float

    def __len__(self) -> int:
        return len(self.pairs)

    def draw(self, rng):
        return self.pairs[int(rng.integers(len(self.pairs)))]


def make_batch(method: str, size: int, alpha: float, rng,
               ds: StateDataset = None, du: TrajectoryDataset = None,
               index: PhiIndex = None,
               goal_pool: StateDataset = None) -> StartGoalBatch:
    scheduled = method in SCHEDULED_METHODS
    pairs = []
    for _ in range(size):
        if method in TRAJ_METHODS:
            pairs.append(sample_traj(du, alpha, scheduled, rng))
        elif method in INTERP_METHODS:
            pairs.append(sample_interp(ds, index, alpha, scheduled, rng,
                                       goal_pool))
        elif method == "baseline":
            pairs.append(sample_baseline(ds, rng, goal_pool))
        else:
            raise ValueError(f"unknown method {method!r}")
    return StartGoalBatch(pairs=pairs, method=method, alpha=alpha)


@dataclass
class RunConfig:
    method: str
    steps: int = 200_000
    t_block: int = 10_000
    t_sched: int = 100_000
    alpha_min: float = 0.1
    pair_batch: int = 256
    traj_horizon: float = 1.0    # T in the 2*alpha*T scheduled limit
    base_limit: float = 2.0      # seconds per episode when unscheduled
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; "
                             f"expected one of {METHODS}")
        if self.steps < 1 or self.pair_batch < 1:
            raise ValueError("steps and pair_batch must be positive")

    @property
    def schedule(self) -> Schedule:
        return Schedule(t_tot=self.steps, t_block=self.t_block,
                        t_sched=self.t_sched, alpha_min=self.alpha_min)


def bc_arrays(du: TrajectoryDataset) -> tuple:
    """Behavior-cloning observations and actions from a trajectory dataset."""
    triples = compile_bc_dataset(du)
    obs = np.empty((len(triples), sim.OBS_DIM), dtype=np.float32)
    act = np.empty((len(triples), 3), dtype=np.float32)
    for i, tr in enumerate(triples):
        obs[i] = sim.observe(tr.state, tr.goal[3:6])
        act[i] = tr.action
    return obs, act


def run_training(spec: sc.SceneSpec, cfg: RunConfig, ds: StateDataset,
                 du: TrajectoryDataset = None, seed: int = 0,
                 sim_params: sim.SimParams = None, on_block=None,
                 loss_trace: list = None) -> tuple:
    """Train a policy with the configured reset strategy.

    Returns (Networks, list of per-block metric rows).  ``on_block`` is
    called with each finished row; ``loss_trace`` (if given) collects the
    critic loss of every gradient step.
    """
    method = cfg.method
    if method in TRAJ_METHODS and (du is None or len(du.records) == 0):
        raise ValueError(f"method {method} requires a trajectory dataset")
    if len(ds) < 1:
        raise ValueError("state dataset is empty")
    if sim_params is None:
        sim_params = sim.SimParams(action_limit=cfg.train.action_limit)
    scheduled = method in SCHEDULED_METHODS
    schedule = cfg.schedule

    env = sim.ManipEnv(spec, sim_params)
    nets = Networks(cfg.train, seed=seed)
    bc_obs = bc_act = None
    if method == "trajSchedBC" and cfg.train.lambda_bc > 0.0:
        bc_obs, bc_act = bc_arrays(du)
    trainer = Trainer(nets, cfg.train, seed=seed, bc_obs=bc_obs,
                      bc_act=bc_act)
    buffer = ReplayBuffer(cfg.train.buffer_capacity)

    goal_pool = None
    index = None
    if method in INTERP_METHODS or method == "baseline":
        goal_pool = filter_goals(ds, exclude_on_table_only=True, spec=spec)
        if len(goal_pool) == 0:
            raise ValueError("goal filter removed every candidate goal")
    if method in INTERP_METHODS:
        index = PhiIndex(spec, ds)

    rng_resets = substream(seed, "resets")
    rows = []
    t = 0
    block = 0
    while t < cfg.steps:
        alpha = schedule.alpha_at(t, scheduled)
        batch = make_batch(method, cfg.pair_batch, alpha,
                           substream(seed, "pair-batch", block),
                           ds=ds, du=du, index=index, goal_pool=goal_pool)
        limit = time_limit(alpha, scheduled,
                           cfg.traj_horizon if scheduled else cfg.base_limit)
        block_end = min(t + cfg.t_block, cfg.steps)
        episodes = 0
        returns = 0.0
        successes = 0
        critic_sum = 0.0
        critic_n = 0
        actor_sum = 0.0
        actor_n = 0
        while t < block_end:
            start, goal = batch.draw(rng_resets)
            obs = env.reset(start, goal)
            env.set_time_limit(limit)
            ep_return = 0.0
            while True:
                action = trainer.act(obs)
                res = env.step(action)
                buffer.add(obs, action, res.reward, res.obs, res.terminated)
                obs = res.obs
                ep_return += res.reward
                t += 1
                if len(buffer) >= cfg.train.batch_size:
                    stats = trainer.td_update(buffer)
                    critic_sum += stats.critic_loss
                    critic_n += 1
                    if np.isfinite(stats.actor_loss):
                        actor_sum += stats.actor_loss
                        actor_n += 1
                    if loss_trace is not None:
                        loss_trace.append(stats.critic_loss)
                if res.done:
                    break
            episodes += 1
            returns += ep_return
            if res.terminated:
                successes += 1
        row = {
            "step": t,
            "block": block,
            "alpha": alpha,
            "avg_episode_reward": returns / episodes,
            "success_rate": successes / episodes,
            "critic_loss": critic_sum / critic_n if critic_n else math.nan,
            "actor_loss": actor_sum / actor_n if actor_n else math.nan,
        }
        rows.append(row)
        if on_block is not None:
            on_block(row)
        block += 1
    return nets, rows
