"""Augmented Lagrangian solver for proximal projection onto the constraints.

Solves  min_z 0.5 ||s - s_bar||^2  s.t.  g(z) <= 0, h(z) = 0  with the
classic PHR augmented Lagrangian: the bound-constrained inner problem is
handled by a damped Gauss-Newton iteration with Armijo backtracking, and the
configuration block of z is clamped to the scene sampling box inside the line
search.  Multipliers are updated after every inner solve; the penalty grows
whenever the worst violation fails to drop fast enough.

Everything is deterministic: no randomness, fixed iteration order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import constraints as con


@dataclass
class ALParams:
    tol_feas: float = 1e-4      # admission threshold on the worst violation
    penalty_init: float = 10.0
    penalty_growth: float = 5.0
    penalty_max: float = 1e12
    max_outer: int = 40
    max_inner: int = 30
    max_evals: int = 4000       # hard budget of constraint evaluations
    step_tol: float = 1e-11     # inner convergence on the Newton step norm
    damping_init: float = 1e-6
    stall_limit: int = 6        # outers without halving the violation


@dataclass
class NLPResult:
    z: np.ndarray
    feasible: bool
    violation: float
    n_evals: int
    outer_iters: int
    objective: float

    @property
    def s(self) -> np.ndarray:
        return self.z[0:6]


def _merit(s, s_bar, g, h, lam, mu, rho):
    he = h + lam / rho
    ge = np.maximum(g + mu / rho, 0.0)
    return (0.5 * float((s - s_bar) @ (s - s_bar))
            + 0.5 * rho * float(he @ he)
            + 0.5 * rho * float(ge @ ge))


class _Counter:
    __slots__ = ("n",)

    def __init__(self):
        self.n = 0


def _inner_solve(cs, z, s_bar, lam, mu, rho, params, counter, step_stop):
    """Damped Gauss-Newton on the augmented Lagrangian.

    Levenberg-Marquardt damping control: one constraint evaluation per trial
    step, damping scaled by the ratio of actual to predicted merit reduction.
    ``step_stop`` is the step-norm threshold below which the inner problem is
    considered solved (loosened in early outer iterations).
    """
    lo, hi = cs.scene.box_lower, cs.scene.box_upper
    damp = params.damping_init
    eye = np.eye(cs.dim)

    for _ in range(params.max_inner):
        if counter.n >= params.max_evals:
            break
        g, h, Jg, Jh = con.evaluate(cs, z)
        counter.n += 1
        he = h + lam / rho
        ge = g + mu / rho
        act = ge > 0.0

        grad = np.zeros(cs.dim)
        grad[0:6] = z[0:6] - s_bar
        grad += rho * (Jh.T @ he)
        if np.any(act):
            grad += rho * (Jg[act].T @ ge[act])

        H = rho * (Jh.T @ Jh)
        if np.any(act):
            H += rho * (Jg[act].T @ Jg[act])
        H[0:6, 0:6] += np.eye(6)

        m0 = _merit(z[0:6], s_bar, g, h, lam, mu, rho)
        accepted = False
        for _retry in range(12):
            if counter.n >= params.max_evals:
                return z
            try:
                fac = cho_factor(H + damp * eye, lower=True)
            except np.linalg.LinAlgError:
                damp *= 10.0
                continue
            dz = cho_solve(fac, -grad)
            step = float(np.linalg.norm(dz))
            if step < step_stop:
                return z

            z_try = z + dz
            np.clip(z_try[0:6], lo, hi, out=z_try[0:6])
            g2, h2 = con.evaluate(cs, z_try, jac=False)
            counter.n += 1
            m1 = _merit(z_try[0:6], s_bar, g2, h2, lam, mu, rho)
            predicted = -(float(grad @ dz) + 0.5 * float(dz @ (H @ dz)))
            if m1 < m0:
                ratio = (m0 - m1) / max(predicted, 1e-300)
                if ratio > 0.75:
                    damp = max(damp / 3.0, 1e-12)
                elif ratio < 0.25:
                    damp *= 2.0
                z = z_try
                accepted = True
                break
            damp *= 10.0
        if not accepted:
            break
    return z


def solve_proximal(cs: con.ConstraintSpec, s_bar, params: ALParams = None) -> NLPResult:
    """Project s_bar onto the constraint set of ``cs``.

    Returns the full decision vector (configuration plus contact auxiliaries),
    feasibility at ``params.tol_feas``, the worst remaining violation, and the
    number of constraint evaluations spent.
    """
    if params is None:
        params = ALParams()
    s_bar = np.asarray(s_bar, dtype=float)
    z = con.init_decision(cs, s_bar)
    lam = np.zeros(cs.n_eq)
    mu = np.zeros(cs.n_ineq)
    rho = params.penalty_init
    counter = _Counter()

    best_v = np.inf
    v_prev = np.inf
    stall = 0
    feasible = False
    v = np.inf
    outer = 0
    for outer in range(1, params.max_outer + 1):
        if counter.n >= params.max_evals:
            break
        # solve the inner problem only as tightly as the outer stage needs
        step_stop = max(params.step_tol, min(1e-6, 0.01 * best_v))
        z = _inner_solve(cs, z, s_bar, lam, mu, rho, params, counter, step_stop)
        g, h = con.evaluate(cs, z, jac=False)
        counter.n += 1
        v = 0.0
        if g.size:
            v = max(v, float(np.max(g)))
        if h.size:
            v = max(v, float(np.max(np.abs(h))))
        if v <= params.tol_feas:
            feasible = True
            break

        # infeasible modes plateau; give up once progress stops
        if v > 0.5 * best_v:
            stall += 1
            if stall >= params.stall_limit:
                break
        else:
            stall = 0
        best_v = min(best_v, v)

        lam = lam + rho * h
        mu = np.maximum(mu + rho * g, 0.0)
        if v > 0.25 * v_prev:
            rho = min(rho * params.penalty_growth, params.penalty_max)
        v_prev = v

    obj = 0.5 * float((z[0:6] - s_bar) @ (z[0:6] - s_bar))
    return NLPResult(z=z, feasible=feasible, violation=v, n_evals=counter.n,
                     outer_iters=outer, objective=obj)
