"""Second-order B-spline control trajectories and exact action compilation.

A control spline spans a 1 s horizon with 4 free control points and pinned
boundaries: the curve starts at the robot's reference with zero velocity and
ends at the last control point with zero velocity (doubled boundary control
points on a clamped knot vector).  Its quadratic pieces break every 0.2 s,
already aligned to the 0.05 s action grid, so each action window has one
constant quadratic coefficient and the window chain reproduces the stepper's
reference updates bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from . import scene as sc
from . import sim

N_KNOTS = 4
HORIZON = 1.0


class CompileError(ValueError):
    """Spline cannot be compiled into grid-aligned actions."""


@dataclass
class ControlSpline:
    start: np.ndarray       # (3,) reference position at t=0 (zero velocity)
    knots: np.ndarray       # (4,3) free control points
    horizon: float
    win_pos: np.ndarray     # (n,3) reference position at each window start
    win_vel: np.ndarray     # (n,3) reference velocity at each window start
    win_coef: np.ndarray    # (n,3) quadratic coefficient per window
    win_act: np.ndarray     # (n,3) equivalent action per window

    @property
    def n_windows(self) -> int:
        return self.win_coef.shape[0]


_ACC_CACHE: dict = {}


def _acc_design(horizon: float, n_spans: int) -> np.ndarray:
    """Rows of clamped quadratic B-spline second-derivative basis values at
    span midpoints, so per-span acceleration is a single matmul with the
    control points."""
    key = (horizon, n_spans)
    mat = _ACC_CACHE.get(key)
    if mat is None:
        span = horizon / n_spans
        kv = np.concatenate([[0.0, 0.0, 0.0],
                             np.arange(1, n_spans) * span,
                             [horizon, horizon, horizon]])
        mids = np.arange(n_spans) * span + 0.5 * span
        mat = BSpline(kv, np.eye(n_spans + 2), 2)(mids, nu=2)
        _ACC_CACHE[key] = mat
    return mat


def make_spline(start, knots, horizon: float = HORIZON) -> ControlSpline:
    """Construct the piecewise-quadratic window representation.

    ``knots`` holds the free control points, shape (4, 3).
    """
    start = np.asarray(start, dtype=float).reshape(3)
    knots = np.asarray(knots, dtype=float).reshape(N_KNOTS, 3)
    h = sim.H_WINDOW
    n_windows = int(round(horizon / h))
    if abs(n_windows * h - horizon) > 1e-12 or n_windows < 1:
        raise CompileError("horizon must be a multiple of the action period")
    n_spans = N_KNOTS + 1
    per_span = n_windows // n_spans
    if per_span * n_spans != n_windows:
        raise CompileError("spline breakpoints must align with the action grid")

    ctrl = np.vstack([start, start, knots, knots[-1]])
    acc = _acc_design(horizon, n_spans) @ ctrl

    win_pos = np.empty((n_windows, 3))
    win_vel = np.empty((n_windows, 3))
    win_coef = np.empty((n_windows, 3))
    win_act = np.empty((n_windows, 3))
    # Scalar chain, expression-identical to segment_action / segment_coef /
    # advance_reference.  Each window coefficient is canonicalized through
    # the action map so a compiled-action replay recovers the same bits.
    h2 = h * h
    acc_half = (0.5 * acc).tolist()
    pos = [float(start[0]), float(start[1]), float(start[2])]
    vel = [0.0, 0.0, 0.0]
    for w in range(n_windows):
        ah = acc_half[w // per_span]
        for k in range(3):
            v = vel[k]
            act = (2.0 * ah[k]) * h2 + (1.5 * v) * h
            coef = (act - (1.5 * v) * h) / (2.0 * h2)
            win_pos[w, k] = pos[k]
            win_vel[w, k] = v
            win_coef[w, k] = coef
            win_act[w, k] = act
            pos[k] = pos[k] + v * h + coef * h2
            vel[k] = v + (2.0 * coef) * h
    return ControlSpline(start=start, knots=knots, horizon=horizon,
                         win_pos=win_pos, win_vel=win_vel, win_coef=win_coef,
                         win_act=win_act)


def eval_spline(sp: ControlSpline, t: float):
    """Reference position and velocity at time t, exact per-window polynomial."""
    if t < 0.0 or t > sp.horizon + 1e-12:
        raise ValueError(f"t={t} outside [0, {sp.horizon}]")
    h = sim.H_WINDOW
    w = min(int(t / h), sp.n_windows - 1)
    tau = t - w * h
    pos = sp.win_pos[w] + sp.win_vel[w] * tau + sp.win_coef[w] * (tau * tau)
    vel = sp.win_vel[w] + (2.0 * sp.win_coef[w]) * tau
    return pos, vel


def compile_to_actions(sp: ControlSpline, start: sc.DynState,
                       action_limit: float = None) -> np.ndarray:
    """Translate the spline into the unique equivalent action sequence.

    ``start`` must have its actuator reference at the spline start with zero
    reference velocity (the post-reset condition).  When ``action_limit`` is
    given, any out-of-box action raises CompileError.
    """
    if isinstance(start, sc.DynState):
        ref, refvel = start.ref, start.refvel
    else:
        arr = np.asarray(start, dtype=float)
        ref, refvel = arr[19:22], arr[22:25]
    if not np.allclose(ref, sp.start, rtol=0.0, atol=1e-9):
        raise CompileError("start reference does not match the spline start")
    if not np.allclose(refvel, 0.0, rtol=0.0, atol=1e-9):
        raise CompileError("start reference velocity must be zero")
    actions = sp.win_act.copy()
    if action_limit is not None:
        worst = float(np.max(np.abs(actions)))
        if worst > action_limit:
            raise CompileError(f"action magnitude {worst:.4f} exceeds "
                               f"limit {action_limit}")
    return actions


@dataclass
class BCTriple:
    traj: int               # source trajectory index
    step: int               # action index within the trajectory
    state: np.ndarray       # DynState snapshot before the action
    goal: np.ndarray        # goal configuration (6,)
    action: np.ndarray      # compiled action


def compile_bc_dataset(du) -> list:
    """Flatten a trajectory dataset into behavior-cloning triples.

    Each record contributes one triple per action window: the stored state
    snapshot before the window, the record's goal, and the compiled action.
    """
    triples = []
    for i, rec in enumerate(du.records):
        sp = make_spline(rec.s.s[0:3], rec.knots)
        actions = compile_to_actions(sp, rec.path[0])
        for step in range(actions.shape[0]):
            triples.append(BCTriple(
                traj=i, step=step,
                state=np.asarray(rec.path[step], dtype=float),
                goal=np.asarray(rec.g.s, dtype=float),
                action=actions[step],
            ))
    return triples
