"""Covariance matrix adaptation evolution strategy.

Standard (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance
updates and cumulative step-size adaptation.  Deterministic for a fixed
seed.  Non-finite objective values are replaced by a large finite penalty so
covariance updates stay defined.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

log = logging.getLogger(__name__)

NONFINITE_PENALTY = 1e6
EIG_FLOOR = 1e-14


def default_popsize(dim: int) -> int:
    return 4 + int(3 * np.log(dim))


@dataclass
class CmaResult:
    x: np.ndarray
    fbest: float
    n_evals: int
    stop: str
    generations: int
    best_history: list = field(default_factory=list)  # best-ever per generation


def cma_minimize(f, x0, sigma0: float, budget: int, seed: int = 0,
                 ftarget: float = None, popsize: int = None,
                 tolx: float = 1e-12, tolfun: float = 1e-12,
                 rng=None) -> CmaResult:
    """Minimize ``f`` starting from ``x0`` with initial step size ``sigma0``.

    Stops on ``ftarget``, evaluation ``budget``, step-size collapse (tolx),
    stagnation of the best values (tolfun), or covariance ill-conditioning,
    and returns the best-ever candidate.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    if d < 1:
        raise ValueError("dimension must be at least 1")
    lam = popsize if popsize is not None else default_popsize(d)
    if budget < lam:
        raise ValueError("budget must cover one full generation")
    if rng is None:
        rng = substream(seed, "cma")

    mu = lam // 2
    w = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / float(w @ w)
    cc = (4.0 + mueff / d) / (d + 4.0 + 2.0 * mueff / d)
    cs = (mueff + 2.0) / (d + mueff + 5.0)
    c1 = 2.0 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1,
              2.0 * (mueff - 2.0 + 1.0 / mueff) / ((d + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, np.sqrt((mueff - 1.0) / (d + 1.0)) - 1.0) + cs
    chi_n = np.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))

    mean = x0.copy()
    sigma = float(sigma0)
    cov = np.eye(d)
    pc = np.zeros(d)
    ps = np.zeros(d)

    best_x = x0.copy()
    best_f = np.inf
    history = []
    recent_best = []
    hist_len = 10 + int(np.ceil(30.0 * d / lam))

    n_evals = 0
    gen = 0
    stop = "budget"
    while n_evals + lam <= budget:
        gen += 1
        eigvals, basis = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, EIG_FLOOR)
        if eigvals.max() / eigvals.min() > 1e14:
            stop = "condition"
            break
        scale = np.sqrt(eigvals)

        z = rng.standard_normal((lam, d))
        y = (z * scale) @ basis.T
        xs = mean + sigma * y
        fs = np.empty(lam)
        for i in range(lam):
            fi = float(f(xs[i]))
            if not np.isfinite(fi):
                log.warning("non-finite objective value replaced by penalty")
                fi = NONFINITE_PENALTY
            fs[i] = fi
        n_evals += lam

        order = np.argsort(fs, kind="stable")
        if fs[order[0]] < best_f:
            best_f = float(fs[order[0]])
            best_x = xs[order[0]].copy()
        history.append(best_f)

        sel_y = y[order[:mu]]
        y_w = w @ sel_y
        mean = mean + sigma * y_w

        inv_sqrt = (basis / scale) @ basis.T
        ps = (1.0 - cs) * ps + np.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt @ y_w)
        ps_norm = float(np.linalg.norm(ps))
        hsig = (ps_norm / np.sqrt(1.0 - (1.0 - cs) ** (2 * gen)) / chi_n
                < 1.4 + 2.0 / (d + 1.0))
        pc = (1.0 - cc) * pc + (np.sqrt(cc * (2.0 - cc) * mueff) * y_w
                                if hsig else 0.0)

        rank_mu = (sel_y * w[:, None]).T @ sel_y
        cov = ((1.0 - c1 - cmu) * cov
               + c1 * (np.outer(pc, pc)
                       + (0.0 if hsig else 1.0) * cc * (2.0 - cc) * cov)
               + cmu * rank_mu)
        cov = 0.5 * (cov + cov.T)
        sigma *= float(np.exp((cs / damps) * (ps_norm / chi_n - 1.0)))

        if ftarget is not None and best_f <= ftarget:
            stop = "ftarget"
            break
        if sigma * np.sqrt(float(np.max(np.diag(cov)))) < tolx and \
                sigma * float(np.max(np.abs(pc))) < tolx:
            stop = "tolx"
            break
        recent_best.append(float(fs[order[0]]))
        if len(recent_best) > hist_len:
            recent_best.pop(0)
            if max(recent_best) - min(recent_best) < tolfun:
                stop = "tolfun"
                break

    return CmaResult(x=best_x, fbest=best_f, n_evals=n_evals, stop=stop,
                     generations=gen, best_history=history)
