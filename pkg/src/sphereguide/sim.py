"""Deterministic contact simulator (1 kHz) and goal-conditioned MDP (20 Hz).

Each MDP action is a reference displacement: a quadratic segment is planned
from the current actuator reference (position and velocity) to ``ref + a``
with zero end velocity 0.1 s ahead, and only its first 0.05 s window is
executed before replanning.  For the window [0, h] that yields the segment

    ref(tau) = ref0 + refvel0*tau + coef*tau^2,
    coef = (a - 1.5*refvel0*h) / (2*h^2),

which the stepper tracks with a PD controller.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import scene as sc
from . import simcore

DT = 1e-3
WINDOW_SUBSTEPS = 50
H_WINDOW = WINDOW_SUBSTEPS * DT     # action period, 0.05 s


class SimulationDiverged(RuntimeError):
    """A state coordinate left the sanity box during stepping."""


@dataclass
class SimParams:
    dt: float = DT
    substeps: int = WINDOW_SUBSTEPS
    kp: float = 500.0
    kd: float = 40.0
    robot_mass: float = 1.0
    contact_stiffness: float = 1e4
    contact_damping: float = 100.0
    friction_vel_gain: float = 100.0
    action_limit: float = 0.1
    goal_tol: float = 0.01
    base_time_limit: float = 2.0     # seconds; 40 actions
    diverge_limit: float = 1e3

    def __post_init__(self):
        if self.dt <= 0 or self.contact_stiffness <= 0 or self.kp <= 0:
            raise ValueError("dt, stiffness and gains must be positive")
        if self.contact_damping <= 0 or self.kd <= 0:
            raise ValueError("damping gains must be positive")

    @property
    def window(self) -> float:
        return self.substeps * self.dt

    @property
    def base_limit_steps(self) -> int:
        return int(round(self.base_time_limit / self.window))


def build_pack(spec: sc.SceneSpec, params: SimParams) -> np.ndarray:
    """Flatten scene and parameters into the stepper's parameter pack."""
    walls = [sh for sh in spec.shapes if sh.kind == "wall"]
    floors = [sh for sh in spec.shapes if sh.kind == "floor"]
    if len(floors) != 1:
        raise ValueError("stepper expects exactly one floor shape")
    moment = spec.object_inertia[3, 3]
    pack = np.empty(16 + 6 * len(walls))
    pack[0] = params.dt
    pack[1] = params.kp
    pack[2] = params.kd
    pack[3] = params.robot_mass
    pack[4] = spec.object_mass
    pack[5] = 1.0 / moment
    pack[6] = spec.gravity
    pack[7] = params.contact_stiffness
    pack[8] = params.contact_damping
    pack[9] = spec.mu
    pack[10] = params.friction_vel_gain
    pack[11] = spec.object_radius
    pack[12] = spec.robot_radius
    pack[13] = floors[0].height
    pack[14] = params.diverge_limit
    pack[15] = float(len(walls))
    for k, sh in enumerate(walls):
        lo = np.array(sh.center) - np.array(sh.half_extents)
        hi = np.array(sh.center) + np.array(sh.half_extents)
        pack[16 + 6 * k:19 + 6 * k] = lo
        pack[19 + 6 * k:22 + 6 * k] = hi
    return pack


def segment_coef(action, refvel, h: float) -> np.ndarray:
    """Quadratic coefficient of the executed window for displacement ``action``."""
    action = np.asarray(action, dtype=float)
    refvel = np.asarray(refvel, dtype=float)
    return (action - (1.5 * refvel) * h) / (2.0 * (h * h))


def segment_action(coef, refvel, h: float) -> np.ndarray:
    """Inverse of segment_coef: displacement that produces ``coef``."""
    coef = np.asarray(coef, dtype=float)
    refvel = np.asarray(refvel, dtype=float)
    return (2.0 * coef) * (h * h) + (1.5 * refvel) * h


def advance_reference(pos, vel, coef, h: float):
    """Window-end reference, mirroring the stepper's update expressions."""
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    coef = np.asarray(coef, dtype=float)
    new_pos = pos + vel * h + coef * (h * h)
    new_vel = vel + (2.0 * coef) * h
    return new_pos, new_vel


def step_physics(state: np.ndarray, coef, spec_pack: np.ndarray,
                 n_sub: int = WINDOW_SUBSTEPS):
    """Advance one window; raises SimulationDiverged on state explosion."""
    out, diverged = simcore.run_window(np.asarray(state, dtype=float),
                                       np.asarray(coef, dtype=float),
                                       spec_pack, n_sub)
    if diverged:
        raise SimulationDiverged(f"state left sanity box at t={out[25]:.3f}")
    return out


OBS_DIM = 21


def observe(state: np.ndarray, goal_p: np.ndarray) -> np.ndarray:
    """Observation: q, p, qd, pd, 0.1*w, 0.01*(ref - q), (g_p - p)."""
    obs = np.empty(OBS_DIM)
    obs[0:3] = state[0:3]
    obs[3:6] = state[3:6]
    obs[6:9] = state[6:9]
    obs[9:12] = state[9:12]
    obs[12:15] = 0.1 * state[12:15]
    obs[15:18] = 0.01 * (state[19:22] - state[0:3])
    obs[18:21] = goal_p - state[3:6]
    return obs


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated


class ManipEnv:
    """Goal-conditioned MDP around the contact stepper.

    One environment owns one DynState array.  Divergence inside a step is
    reported as a reward-0 truncation and latched in ``diverged``.
    """

    def __init__(self, spec: sc.SceneSpec, params: SimParams = None):
        self.spec = spec
        self.params = params if params is not None else SimParams()
        self.pack = build_pack(spec, self.params)
        self.state = None
        self.goal_p = None
        self.step_count = 0
        self.time_limit = self.params.base_limit_steps
        self.diverged = False

    def set_time_limit(self, steps: int):
        if steps < 1:
            raise ValueError("time limit must be at least one step")
        self.time_limit = int(steps)

    def reset(self, start, goal) -> np.ndarray:
        """Start a new episode.

        ``start`` is a StaticConfig, a 6-vector configuration, or a full
        26-float DynState array (trajectory snapshot).  ``goal`` is a
        StaticConfig or 6-vector; only its object block is used.
        """
        if isinstance(start, sc.StaticConfig):
            state = sc.DynState.at_rest(start.s).to_array()
        elif isinstance(start, sc.DynState):
            state = start.to_array()
        else:
            start = np.asarray(start, dtype=float)
            if start.shape == (6,):
                state = sc.DynState.at_rest(start).to_array()
            elif start.shape == (sc.DynState.SIZE,):
                state = start.copy()
            else:
                raise ValueError("start must be a config or state snapshot")
        if isinstance(goal, sc.StaticConfig):
            goal_p = goal.s[3:6].copy()
        else:
            goal = np.asarray(goal, dtype=float)
            goal_p = goal[3:6].copy() if goal.shape == (6,) else goal.copy()
        if goal_p.shape != (3,):
            raise ValueError("goal must provide an object position")
        self.state = state
        self.goal_p = goal_p
        self.step_count = 0
        self.diverged = False
        return self.observe()

    def observe(self) -> np.ndarray:
        return observe(self.state, self.goal_p)

    def step(self, action) -> StepResult:
        if self.state is None:
            raise RuntimeError("reset before stepping")
        action = np.clip(np.asarray(action, dtype=float),
                         -self.params.action_limit, self.params.action_limit)
        coef = segment_coef(action, self.state[22:25], self.params.window)
        try:
            self.state = step_physics(self.state, coef, self.pack,
                                      self.params.substeps)
        except SimulationDiverged:
            self.diverged = True
            self.step_count += 1
            return StepResult(self.observe(), 0.0, False, True)
        self.step_count += 1
        dist = float(np.linalg.norm(self.state[3:6] - self.goal_p))
        reward = 1.0 if dist <= self.params.goal_tol else 0.0
        terminated = reward > 0.0
        truncated = (not terminated) and self.step_count >= self.time_limit
        return StepResult(self.observe(), reward, terminated, truncated)


def dump_rollout(path, records):
    """Write per-step debug records {t, q, p, quat, reward} as NDJSON."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({
                "t": float(rec["t"]),
                "q": [float(v) for v in rec["q"]],
                "p": [float(v) for v in rec["p"]],
                "quat": [float(v) for v in rec["quat"]],
                "reward": float(rec["reward"]),
            }) + "\n")
