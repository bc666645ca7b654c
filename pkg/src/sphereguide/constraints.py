"""Static-feasibility constraints for a contact mode.

A contact mode names the supports the object rests on.  For a decision vector

    z = [ s (6) | p_j (3), f_j (3)  for each active support j, sorted ]

where ``p_j`` is the point of application and ``f_j`` the force the object
exerts on support j, the constraint system is:

inequalities g(z) <= 0, in order:
  * non-collision -d_ij for every inactive shape pair
  * per active contact: normal-sign  n^T f,  then friction cone
    ||f||^2 - (1 + mu^2) (n^T f)^2
equalities h(z) = 0, in order:
  * per active contact: touch d_1j, point on object surface, point on
    support surface
  * static force balance  sum_j f_j - m g_vec   (reaction -f_j acts on the
    object, so this is Newton's second law at rest)
  * static torque balance  sum_j (p_j - p) x f_j

All rows carry analytic Jacobians with respect to z.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scene as sc


@dataclass(frozen=True)
class ContactMode:
    """Sorted tuple of support shape ids the object is in contact with."""

    supports: tuple

    def __post_init__(self):
        sup = tuple(int(j) for j in self.supports)
        object.__setattr__(self, "supports", sup)
        if not 1 <= len(sup) <= 3:
            raise ValueError("contact mode arity must be 1..3")
        if tuple(sorted(set(sup))) != sup:
            raise ValueError("supports must be sorted and unique")

    @property
    def arity(self) -> int:
        return len(self.supports)


class ConstraintSpec:
    """Constraint system of one (scene, contact mode) pair."""

    def __init__(self, spec: sc.SceneSpec, mode: ContactMode):
        for j in mode.supports:
            if j not in spec.support_set:
                raise ValueError(f"shape {j} is not a potential support")
        self.scene = spec
        self.mode = mode
        active = set((sc.OBJECT_ID, j) for j in mode.supports)
        self.inactive_pairs = [pq for pq in sc.contact_pairs(spec)
                               if pq not in active]
        k = mode.arity
        self.dim = 6 + 6 * k
        self.n_ineq = len(self.inactive_pairs) + 2 * k
        self.n_eq = 3 * k + 6

    def slice_p(self, idx: int) -> slice:
        return slice(6 + 6 * idx, 9 + 6 * idx)

    def slice_f(self, idx: int) -> slice:
        return slice(9 + 6 * idx, 12 + 6 * idx)

    def describe(self) -> str:
        return (f"mode {self.mode.supports}: dim={self.dim} "
                f"ineq={self.n_ineq} eq={self.n_eq}")


def build_constraints(spec: sc.SceneSpec, mode) -> ConstraintSpec:
    if not isinstance(mode, ContactMode):
        mode = ContactMode(tuple(sorted(mode)))
    return ConstraintSpec(spec, mode)


def _skew(v) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def evaluate(cs: ConstraintSpec, z, jac: bool = True):
    """Evaluate (g, h) and optionally their Jacobians at z.

    Returns (g, h) when jac is False, else (g, h, Jg, Jh).
    """
    z = np.asarray(z, dtype=float)
    spec = cs.scene
    s = z[0:6]
    mu2 = 1.0 + spec.mu ** 2
    k = cs.mode.arity

    g = np.empty(cs.n_ineq)
    h = np.empty(cs.n_eq)
    Jg = np.zeros((cs.n_ineq, cs.dim)) if jac else None
    Jh = np.zeros((cs.n_eq, cs.dim)) if jac else None

    row = 0
    for (a, b) in cs.inactive_pairs:
        if jac:
            d, _, _, _, jd, _ = sc.pair_distance_jac(spec, a, b, s)
            Jg[row, 0:6] = -jd
        else:
            d, _, _, _ = sc.pair_distance(spec, a, b, s)
        g[row] = -d
        row += 1

    force_rows = slice(3 * k, 3 * k + 3)
    torque_rows = slice(3 * k + 3, 3 * k + 6)
    h[force_rows] = -spec.object_mass * spec.gravity_vec
    h[torque_rows] = 0.0
    c1 = s[3:6]

    for idx, j in enumerate(cs.mode.supports):
        sp, sf = cs.slice_p(idx), cs.slice_f(idx)
        p_j, f_j = z[sp], z[sf]

        if jac:
            d, n, _, _, jd, jn = sc.pair_distance_jac(spec, sc.OBJECT_ID, j, s)
            sd_o, go_pt, go_s = sc.surface_distance_jac(spec, sc.OBJECT_ID, p_j, s)
            sd_j, gj_pt, gj_s = sc.surface_distance_jac(spec, j, p_j, s)
        else:
            d, n, _, _ = sc.pair_distance(spec, sc.OBJECT_ID, j, s)
            sd_o = sc.surface_distance(spec, sc.OBJECT_ID, p_j, s)
            sd_j = sc.surface_distance(spec, j, p_j, s)

        nf = float(n @ f_j)
        g[row] = nf
        g[row + 1] = float(f_j @ f_j) - mu2 * nf * nf

        eq = 3 * idx
        h[eq] = d
        h[eq + 1] = sd_o
        h[eq + 2] = sd_j
        arm = p_j - c1
        h[force_rows] += f_j
        h[torque_rows] += np.cross(arm, f_j)

        if jac:
            Jg[row, 0:6] = f_j @ jn
            Jg[row, sf] = n
            Jg[row + 1, 0:6] = -2.0 * mu2 * nf * (f_j @ jn)
            Jg[row + 1, sf] = 2.0 * f_j - 2.0 * mu2 * nf * n
            Jh[eq, 0:6] = jd
            Jh[eq + 1, 0:6] = go_s
            Jh[eq + 1, sp] = go_pt
            Jh[eq + 2, 0:6] = gj_s
            Jh[eq + 2, sp] = gj_pt
            Jh[force_rows, sf] = np.eye(3)
            sk_f = _skew(f_j)
            Jh[torque_rows, sp] = -sk_f
            Jh[torque_rows, sf] = _skew(arm)
            Jh[torque_rows, 3:6] += sk_f
        row += 2

    if jac:
        return g, h, Jg, Jh
    return g, h


def max_violation(cs: ConstraintSpec, z) -> float:
    """Worst constraint violation at z (0 when feasible)."""
    g, h = evaluate(cs, z, jac=False)
    worst = 0.0
    if g.size:
        worst = max(worst, float(np.max(g)))
    if h.size:
        worst = max(worst, float(np.max(np.abs(h))))
    return worst


def init_decision(cs: ConstraintSpec, s_bar) -> np.ndarray:
    """Warm-start decision vector at the proximal target.

    Points of application start at the midpoint between the witness points of
    each active pair; forces split the object's weight along the contact
    normals (force on the support opposes the normal).
    """
    s_bar = np.asarray(s_bar, dtype=float)
    spec = cs.scene
    z = np.zeros(cs.dim)
    z[0:6] = s_bar
    share = spec.object_mass * spec.gravity / cs.mode.arity
    for idx, j in enumerate(cs.mode.supports):
        _, n, wi, wj = sc.pair_distance(spec, sc.OBJECT_ID, j, s_bar)
        z[cs.slice_p(idx)] = 0.5 * (wi + wj)
        z[cs.slice_f(idx)] = -share * n
    return z
