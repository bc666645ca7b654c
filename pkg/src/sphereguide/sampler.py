"""Feasible-state generation: random contact modes projected onto the manifold.

Each attempt draws a contact mode (uniform arity 1..3, then a uniform support
subset of that size), a uniform target configuration inside the sampling box,
and runs the proximal projection.  Feasible results are admitted together
with their contact auxiliaries (points of application and forces) so a
dataset can be re-validated without re-solving anything.

Attempts are keyed by their index: attempt k of seed K uses the substream
(K, "state-sample", k) regardless of how work is split across workers, so a
parallel run merges to the same dataset as a serial one.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import alsolver as al
from . import constraints as con
from . import scene as sc
from .rng import substream


@dataclass
class StateDataset:
    samples: list
    scene_hash: str = ""
    seed: int = 0
    requested: int = 0
    attempts: int = 0
    n_evals: int = 0
    complete: bool = True
    tol_feas: float = 1e-4

    def __len__(self):
        return len(self.samples)

    @property
    def feasibility_rate(self) -> float:
        """Feasible attempts over total attempts at generation time."""
        if self.attempts == 0:
            return 0.0
        return len(self.samples) / self.attempts

    @property
    def evals_per_sample(self) -> float:
        if not self.samples:
            return 0.0
        return self.n_evals / len(self.samples)

    def configs(self) -> np.ndarray:
        return np.array([cfg.s for cfg in self.samples])


def sample_contact_mode(spec: sc.SceneSpec, rng) -> con.ContactMode:
    """Uniform arity in {1,2,3}, then a uniform support subset of that size."""
    arity = int(rng.integers(1, 4))
    supports = sorted(spec.support_set)
    idx = rng.choice(len(supports), size=arity, replace=False)
    chosen = tuple(sorted(supports[i] for i in idx))
    return con.ContactMode(chosen)


def mode_probability(spec: sc.SceneSpec, mode) -> float:
    """Exact probability of drawing ``mode`` (for tests against enumeration)."""
    mode = tuple(sorted(mode))
    n = len(spec.support_set)
    k = len(mode)
    n_subsets = sum(1 for _ in combinations(range(n), k))
    return (1.0 / 3.0) * (1.0 / n_subsets)


def sample_state(spec: sc.SceneSpec, seed: int, attempt: int,
                 params: al.ALParams = None):
    """Run one attempt.  Returns (StaticConfig or None, n_evals)."""
    rng = substream(seed, "state-sample", attempt)
    mode = sample_contact_mode(spec, rng)
    s_bar = rng.uniform(spec.box_lower, spec.box_upper)
    cs = con.build_constraints(spec, mode)
    res = al.solve_proximal(cs, s_bar, params)
    if not res.feasible:
        return None, res.n_evals
    cfg = sc.StaticConfig(s=res.s.copy(), mode=mode.supports,
                          violation=res.violation, aux=res.z[6:].copy())
    return cfg, res.n_evals


def generate_states(spec: sc.SceneSpec, count: int, seed: int,
                    params: al.ALParams = None, max_attempts: int = None,
                    progress=None) -> StateDataset:
    """Accumulate ``count`` feasible configurations.

    ``max_attempts`` bounds total work (default 50x count); if it is hit the
    dataset is returned with complete=False.
    """
    if params is None:
        params = al.ALParams()
    if max_attempts is None:
        max_attempts = 50 * count
    samples = []
    n_evals = 0
    attempt = 0
    while len(samples) < count and attempt < max_attempts:
        cfg, evals = sample_state(spec, seed, attempt, params)
        n_evals += evals
        attempt += 1
        if cfg is not None:
            samples.append(cfg)
        if progress is not None and attempt % 200 == 0:
            progress(attempt, len(samples))
    return StateDataset(
        samples=samples, scene_hash=sc.scene_hash(spec), seed=seed,
        requested=count, attempts=attempt, n_evals=n_evals,
        complete=(len(samples) == count), tol_feas=params.tol_feas,
    )


def revalidate(spec: sc.SceneSpec, ds: StateDataset, tol: float = None):
    """Re-assemble each sample's constraints and check its stored solution.

    Returns (ok_count, worst_violation).  Samples without stored auxiliaries
    cannot be checked and count as failures.
    """
    if tol is None:
        tol = ds.tol_feas
    ok = 0
    worst = 0.0
    for cfg in ds.samples:
        aux = getattr(cfg, "aux", None)
        if aux is None:
            worst = np.inf
            continue
        cs = con.build_constraints(spec, cfg.mode)
        z = np.concatenate([cfg.s, aux])
        v = con.max_violation(cs, z)
        worst = max(worst, v)
        if v <= tol:
            ok += 1
    return ok, worst


def filter_goals(ds: StateDataset, exclude_on_table_only: bool = False,
                 exclude_robot_balance: bool = False,
                 spec: sc.SceneSpec = None) -> StateDataset:
    """Drop samples whose contact mode is an excluded goal mode.

    ``exclude_on_table_only`` removes samples resting solely on the floor;
    ``exclude_robot_balance`` removes samples supported solely by the robot.
    Floor ids come from ``spec`` when given, else from the default scene.
    Generation statistics are carried over unchanged.
    """
    shapes = (spec or default_scene_cached()).shapes
    floor_modes = set((sh.id,) for sh in shapes if sh.kind == "floor")
    kept = []
    for cfg in ds.samples:
        mode = tuple(cfg.mode)
        if exclude_on_table_only and mode in floor_modes:
            continue
        if exclude_robot_balance and mode == (sc.ROBOT_ID,):
            continue
        kept.append(cfg)
    return StateDataset(
        samples=kept, scene_hash=ds.scene_hash, seed=ds.seed,
        requested=ds.requested, attempts=ds.attempts, n_evals=ds.n_evals,
        complete=ds.complete, tol_feas=ds.tol_feas,
    )


_DEFAULT_SCENE = None


def default_scene_cached() -> sc.SceneSpec:
    global _DEFAULT_SCENE
    if _DEFAULT_SCENE is None:
        _DEFAULT_SCENE = sc.default_scene()
    return _DEFAULT_SCENE
