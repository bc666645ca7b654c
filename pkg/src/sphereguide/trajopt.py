"""Open-loop trajectory optimization over spline control points.

For a start/goal pair of feasible static configurations, CMA-ES searches the
12 free knot coordinates of the robot reference spline, minimizing the
squared feature-space distance between the goal and the simulated terminal
state.  Runs whose terminal cost clears the admission threshold are replayed
through the compiled action sequence before being accepted.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import scene as sc
from . import sim
from . import splines
from .cmaes import cma_minimize
from .rng import substream
from .sampler import StateDataset, filter_goals
from .scene import SceneSpec, StaticConfig

log = logging.getLogger(__name__)

ADMIT_TOL = 1e-3
CMA_BUDGET = 20_000
CMA_SIGMA0 = 0.1
DIVERGE_COST = 1e6


@dataclass
class TrajectoryRecord:
    s: StaticConfig
    g: StaticConfig
    knots: np.ndarray        # (12,) flat spline knots
    path: np.ndarray         # (n_windows + 1, 26) states on the window grid
    terminal_cost: float
    n_evals: int


@dataclass
class TrajectoryDataset:
    records: list
    scene_hash: str = ""
    seed: int = 0
    requested: int = 0
    attempts: int = 0
    n_evals: int = 0
    complete: bool = True
    admit_tol: float = ADMIT_TOL
    time_per_run: float = 0.0    # in-memory stat, not serialized

    def __len__(self) -> int:
        return len(self.records)

    @property
    def feasibility_rate(self) -> float:
        return len(self.records) / self.attempts if self.attempts else 0.0


def _rollout(start_arr: np.ndarray, win_coef: np.ndarray, pack: np.ndarray,
             substeps: int):
    """Window-grid path for the coefficient sequence.

    Returns (path, n_done); n_done < n_windows means divergence and the
    remaining rows repeat the last valid state.
    """
    n = win_coef.shape[0]
    path = np.empty((n + 1, sc.DynState.SIZE))
    path[0] = start_arr
    arr = start_arr
    for w in range(n):
        try:
            arr = sim.step_physics(arr, win_coef[w], pack, substeps)
        except sim.SimulationDiverged:
            path[w + 1:] = arr
            return path, w
        path[w + 1] = arr
    return path, n


def trajectory_cost(spec: SceneSpec, s: StaticConfig, g: StaticConfig,
                    theta, params: sim.SimParams = None,
                    pack: np.ndarray = None) -> tuple:
    """(cost, path) for knot vector ``theta``: squared feature-space distance
    of the simulated terminal state from the goal, or a 1e6 penalty on
    divergence."""
    if params is None:
        params = sim.SimParams()
    if pack is None:
        pack = sim.build_pack(spec, params)
    theta = np.asarray(theta, dtype=float)
    sp = splines.make_spline(s.robot_pos, theta.reshape(splines.N_KNOTS, 3))
    start_arr = sc.DynState.at_rest(s.s).to_array()
    path, n_done = _rollout(start_arr, sp.win_coef, pack, params.substeps)
    if n_done < sp.n_windows:
        return DIVERGE_COST, path
    phi_goal = sc.phi_static(spec, g.s)
    phi_end = sc.feature_embed(spec, sc.DynState.from_array(path[-1]))
    delta = phi_goal - phi_end
    return float(delta @ delta), path


def optimize_trajectory(spec: SceneSpec, s: StaticConfig, g: StaticConfig,
                        seed: int, params: sim.SimParams = None,
                        budget: int = CMA_BUDGET, sigma0: float = CMA_SIGMA0,
                        admit_tol: float = ADMIT_TOL, rng=None):
    """CMA-ES over the knots; returns an admitted TrajectoryRecord or None.

    The search starts from hold-position knots.  A candidate is admitted
    only if its compiled action replay stays within the action limit and the
    recomputed terminal cost still clears the threshold.
    """
    if params is None:
        params = sim.SimParams()
    pack = sim.build_pack(spec, params)
    if rng is None:
        rng = substream(seed, "traj-cma")
    start_arr = sc.DynState.at_rest(s.s).to_array()
    phi_goal = sc.phi_static(spec, g.s)

    limit = params.action_limit

    def objective(theta):
        sp = splines.make_spline(s.robot_pos,
                                 theta.reshape(splines.N_KNOTS, 3))
        path, n_done = _rollout(start_arr, sp.win_coef, pack, params.substeps)
        if n_done < sp.n_windows:
            return DIVERGE_COST
        delta = phi_goal - sc.feature_embed(spec,
                                            sc.DynState.from_array(path[-1]))
        cost = float(delta @ delta)
        # hinge on the action limit: uncompilable candidates can never reach
        # the admission target, and the quadratic term steers them back in
        excess = float(np.abs(sp.win_act).max()) - limit
        if excess > 0.0:
            cost += admit_tol + 1e4 * excess * excess
        return cost

    x0 = np.tile(s.robot_pos, splines.N_KNOTS)
    res = cma_minimize(objective, x0, sigma0, budget, ftarget=admit_tol,
                       rng=rng)
    if res.fbest > admit_tol:
        return None

    # admission: replay through the compiled action sequence
    sp = splines.make_spline(s.robot_pos,
                             res.x.reshape(splines.N_KNOTS, 3))
    try:
        actions = splines.compile_to_actions(sp, sc.DynState.at_rest(s.s),
                                             action_limit=params.action_limit)
    except splines.CompileError as exc:
        log.info("optimized knots rejected at compile: %s", exc)
        return None
    arr = start_arr
    path = np.empty((sp.n_windows + 1, sc.DynState.SIZE))
    path[0] = arr
    for w, act in enumerate(actions):
        coef = sim.segment_coef(act, arr[22:25], params.window)
        try:
            arr = sim.step_physics(arr, coef, pack, params.substeps)
        except sim.SimulationDiverged:
            log.info("optimized knots rejected: replay diverged")
            return None
        path[w + 1] = arr
    delta = phi_goal - sc.feature_embed(spec, sc.DynState.from_array(arr))
    cost = float(delta @ delta)
    if cost > admit_tol:
        log.info("optimized knots rejected: replay cost %.3e", cost)
        return None
    return TrajectoryRecord(s=s, g=g, knots=res.x.copy(), path=path,
                            terminal_cost=cost, n_evals=res.n_evals)


def generate_trajectories(spec: SceneSpec, ds: StateDataset, count: int,
                          seed: int, params: sim.SimParams = None,
                          max_attempts: int = None, budget: int = CMA_BUDGET,
                          admit_tol: float = ADMIT_TOL,
                          progress=None) -> TrajectoryDataset:
    """Accumulate ``count`` admitted trajectories over uniformly drawn
    start/goal pairs from ``ds`` (goals filtered against resting-on-the-
    floor-only modes).  Per-attempt seeding keeps results independent of
    attempt scheduling."""
    if len(ds) < 2:
        raise ValueError("state dataset must hold at least 2 samples")
    if params is None:
        params = sim.SimParams()
    if max_attempts is None:
        max_attempts = 60 * count
    goals = filter_goals(ds, exclude_on_table_only=True,
                         exclude_robot_balance=False, spec=spec)
    if len(goals) == 0:
        raise ValueError("goal filter removed every candidate goal")

    records = []
    attempts = 0
    n_evals = 0
    t0 = time.perf_counter()
    while len(records) < count and attempts < max_attempts:
        rng_a = substream(seed, "traj-attempt", attempts)
        s = ds.samples[int(rng_a.integers(len(ds)))]
        g = goals.samples[int(rng_a.integers(len(goals)))]
        rec = optimize_trajectory(spec, s, g, seed, params=params,
                                  budget=budget, admit_tol=admit_tol,
                                  rng=substream(seed, "traj-cma", attempts))
        attempts += 1
        if rec is not None:
            n_evals += rec.n_evals
            records.append(rec)
        if progress is not None:
            progress(len(records), attempts)
    complete = len(records) >= count
    if not complete:
        log.warning("attempt budget exhausted: %d/%d trajectories",
                    len(records), count)
    elapsed = time.perf_counter() - t0
    return TrajectoryDataset(records=records, scene_hash=sc.scene_hash(spec),
                             seed=seed, requested=count, attempts=attempts,
                             n_evals=n_evals, complete=complete,
                             admit_tol=admit_tol,
                             time_per_run=elapsed / max(attempts, 1))
