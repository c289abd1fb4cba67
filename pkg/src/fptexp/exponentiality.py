"""Exponentiality of the first-passage time and quasi-stationary laws.

For a law ``mu`` on E the time T is Exp(alpha) under ``mu`` exactly when the
conditioned law ``mu(t) = P_mu(X_t = . | T > t)`` evolves as

    mu'(t) = e^{alpha t} (mu Q^T + alpha (mu - delta)) P^T(t),

and then necessarily ``alpha = sum_i eta_i mu_i``. Quasi-stationary laws are
the special case where the bracket vanishes. This module tests the survival
function directly on a time grid, checks the left-eigenvector equation,
builds the ladder ``mu^(n) = (-1/alpha)^n mu (Q^T)^n`` and integrates the
correction that maps an exponential law to its Yaglom limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .chain import (KilledGenerator, as_distribution, check_grid, propagate,
                    survival_curve, transient_path)
from .errors import ConvergenceError, ValidationError

NEG_SLACK = 1e-12
LADDER_TOL = 1e-12
PERRON_TOL = 1e-12
PERRON_MAX_ITER = 1_000_000
GRID_POINTS = 32
GRID_SPAN = (0.05, 5.0)
GAUSS_NODES = 16
MAX_DOUBLINGS = 10


def alpha_of(kg: KilledGenerator, mu) -> float:
    """Candidate rate ``sum_i eta_i mu_i``."""
    mu = as_distribution(kg, mu)
    return math.fsum(kg.eta * mu[:-1])


class QsdCheck(NamedTuple):
    is_qsd: bool
    residual: float
    alpha: float


def qsd_residual(kg: KilledGenerator, mu, alpha: float | None = None) -> np.ndarray:
    """``mu Q^T + alpha mu - alpha delta`` over E and the cemetery."""
    mu = as_distribution(kg, mu)
    if alpha is None:
        alpha = alpha_of(kg, mu)
    r = kg.qT.T @ mu + alpha * mu
    r[-1] -= alpha
    return r


def is_qsd(kg: KilledGenerator, mu, tol: float = 1e-10) -> QsdCheck:
    if tol <= 0:
        raise ValidationError("tol must be positive")
    alpha = alpha_of(kg, mu)
    res = float(np.abs(qsd_residual(kg, mu, alpha)).max())
    return QsdCheck(res < tol, res, alpha)


@dataclass(frozen=True)
class ExponentialityReport:
    alpha: float
    max_abs_dev: float
    verdict: str
    grid: tuple
    deviations: tuple = ()
    high_confidence: bool = False
    reason: str = ""

    @property
    def exponential(self) -> bool:
        return self.verdict == "exponential"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "max_abs_dev": self.max_abs_dev,
            "verdict": self.verdict,
            "grid": list(self.grid),
            "deviations": list(self.deviations),
            "high_confidence": self.high_confidence,
            "reason": self.reason,
        }


def default_grid(alpha: float) -> np.ndarray:
    """32 geometric points with ``alpha * t`` spanning [0.05, 5]."""
    lo, hi = GRID_SPAN
    return np.geomspace(lo / alpha, hi / alpha, GRID_POINTS)


def check_exponentiality(kg: KilledGenerator, mu, grid=None, tol: float = 1e-9) -> ExponentialityReport:
    """Compare ``P_mu(T > t)`` with ``exp(-alpha t)`` on a grid, alpha = alpha_of(mu)."""
    if tol <= 0:
        raise ValidationError("tol must be positive")
    alpha = alpha_of(kg, mu)
    if grid is None:
        if alpha == 0:
            grid = np.geomspace(0.05, 5.0, GRID_POINTS)
        else:
            grid = default_grid(alpha)
    grid = check_grid(grid)
    surv = survival_curve(kg, mu, grid)
    dev = np.abs(surv - np.exp(-alpha * grid))
    mad = float(dev.max())
    at = alpha * grid
    confident = bool(((at >= 0.5) & (at <= 3.0)).any())
    if alpha == 0:
        return ExponentialityReport(0.0, mad, "not_exponential", tuple(grid.tolist()),
                                    tuple(dev.tolist()), confident,
                                    "zero killing rate under mu")
    verdict = "exponential" if mad < tol else "not_exponential"
    reason = "" if confident else "no grid point with alpha*t in [0.5, 3]"
    return ExponentialityReport(alpha, mad, verdict, tuple(grid.tolist()),
                                tuple(dev.tolist()), confident, reason)


@dataclass(frozen=True)
class LadderResult:
    levels: list = field(default_factory=list)
    valid_up_to: int = 0
    terminated_reason: str = "requested_n"
    alpha: float = 0.0
    rejected: np.ndarray | None = None


def mu_ladder(kg: KilledGenerator, mu, n: int) -> LadderResult:
    """Iterate ``mu^(k+1) = (-1/alpha) mu^(k) Q^T`` restricted to E.

    Only meaningful when T is already exponential under ``mu``; that is not
    re-checked here. Stops at the first candidate that leaves ``[0, 1]``
    (the ``0 <= (-1)^n mu (Q^T)^n <= alpha^n`` validity bounds), that does
    not sum to one, or that repeats the previous level.
    """
    mu = as_distribution(kg, mu)
    alpha = alpha_of(kg, mu)
    if alpha == 0:
        raise ValidationError("alpha = 0: ladder undefined")
    if n < 1:
        raise ValidationError("n must be >= 1")
    qtt = kg.qT.T.tocsr()
    cur = mu
    levels = []
    reason = "requested_n"
    rejected = None
    for _ in range(n):
        cand = -(qtt @ cur) / alpha
        cand[-1] = 0.0
        body = cand[:-1]
        if (body < -NEG_SLACK).any():
            reason, rejected = "negativity", cand
            break
        if (body > 1.0 + NEG_SLACK).any():
            reason, rejected = "exceeds_alpha_power", cand
            break
        if abs(math.fsum(body) - 1.0) > 1e-9:
            reason, rejected = "not_normalized", cand
            break
        cand = np.clip(cand, 0.0, None)
        levels.append(cand)
        if np.abs(cand - cur).max() < LADDER_TOL:
            reason = "converged"
            break
        cur = cand
    return LadderResult(levels, len(levels), reason, alpha, rejected)


class PerronResult(NamedTuple):
    vector: np.ndarray
    alpha: float
    iterations: int
    residual: float


def perron_left(q_sub, *, tol: float = PERRON_TOL, max_iter: int = PERRON_MAX_ITER,
                check_irreducible: bool = True) -> PerronResult:
    """Left Perron vector of a sub-generator by power iteration.

    Iterates on the substochastic kernel ``I + q_sub / L`` where ``L`` is
    1.25 times the largest exit rate, so the kernel has a positive diagonal
    and is aperiodic. The rate estimate at each step is the killing flux
    ``sum_i v_i d_i / sum_i v_i`` (``d`` = row deficit of ``q_sub``), which
    equals ``-lambda_max`` at the fixed point. Iteration stops once successive
    iterates (and rate estimates) differ by less than ``tol`` and the
    geometric tail estimate of the remaining error is below ``tol`` as well.
    """
    q_sub = sp.csr_matrix(q_sub, dtype=float)
    m = q_sub.shape[0]
    if check_irreducible and m > 1:
        from scipy.sparse.csgraph import connected_components
        off = q_sub - sp.diags(q_sub.diagonal())
        off.eliminate_zeros()
        if connected_components(off, directed=True, connection="strong")[0] != 1:
            raise ValidationError("transient restriction is reducible")
    deficit = -np.asarray(q_sub.sum(axis=1)).ravel()
    deficit[np.abs(deficit) < 1e-15 * max(1.0, np.abs(q_sub.diagonal()).max())] = 0.0
    top = float((-q_sub.diagonal()).max()) if m else 0.0
    lam = 1.25 * top if top > 0 else 1.0
    kt = (sp.identity(m, format="csr") + q_sub / lam).T.tocsr()
    v = np.full(m, 1.0 / m)
    a = float(deficit @ v)
    d_prev = None
    for it in range(1, max_iter + 1):
        w = kt @ v
        s = w.sum()
        if s <= 0 or not np.isfinite(s):
            raise ConvergenceError("power iteration collapsed to zero")
        w /= s
        a_new = float(deficit @ w)
        step = max(float(np.abs(w - v).sum()), abs(a_new - a) / max(1.0, top))
        v, a = w, a_new
        if step <= 16 * m * np.finfo(float).eps:
            break
        if step < tol and d_prev:
            # geometric tail estimate of the remaining error
            ratio = min(step / d_prev, 0.999999)
            if step * ratio / (1 - ratio) < tol:
                break
        d_prev = step
    else:
        res = float(np.abs(q_sub.T @ v + a * v).max())
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps "
                               f"(alpha={a!r}, residual={res:.3e})")
    res = float(np.abs(q_sub.T @ v + a * v).max())
    return PerronResult(v, a, it, res)


def quasi_stationary(kg: KilledGenerator) -> PerronResult:
    """Perron QSD over ``E + [cemetery]`` and its rate."""
    pr = perron_left(kg.q_transient)
    return pr._replace(vector=np.append(pr.vector, 0.0))


def decay_rate(kg: KilledGenerator) -> float:
    """Decay rate ``-lambda_max`` of the transient restriction of the killed q-matrix."""
    return perron_left(kg.q_transient).alpha


def _panels(h: float, rate: float):
    """Geometric panels on [0, h] with growth factor 2; smallest width ~ 1/rate."""
    m = max(1, math.ceil(math.log2(h * rate + 1.0)))
    h0 = h / (2.0**m - 1.0)
    edges = np.concatenate([[0.0], h0 * (2.0 ** np.arange(1, m + 1) - 1.0)])
    edges[-1] = h
    x, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def yaglom_correction(kg: KilledGenerator, mu, horizon: float = 10.0, tol: float = 1e-9,
                      verify: bool = True) -> np.ndarray:
    """Quasi-limiting law of an exponential initial law ``mu``.

    Returns ``mu + int_0^H (mu Q^T + alpha (mu - delta)) e^{alpha t} P^T(t) dt``,
    the horizon being extended (at most 10 doublings, in quarter steps) until
    the integrand's sup norm drops below ``tol * alpha``. With ``verify`` the exponentiality of
    ``mu`` is checked first at tolerance ``tol``.
    """
    mu = as_distribution(kg, mu)
    alpha = alpha_of(kg, mu)
    if alpha <= 0:
        raise ValidationError("alpha = 0: no quasi-limit")
    if verify:
        rep = check_exponentiality(kg, mu, tol=max(tol, 1e-12))
        if not rep.exponential:
            raise ValidationError(f"T is not exponential under mu (dev {rep.max_abs_dev:.3e})")
    w = kg.qT.T @ mu + alpha * mu
    w[-1] -= alpha
    if np.abs(w).max() <= 1e-14 * max(1.0, kg.uniformization_rate):
        return mu.copy()
    # the horizon grows by 2**(1/4) per step (up to 10 doublings): the weighted
    # rounding floor eps * exp(alpha h) must not be overshot by a coarse jump
    target = math.log(tol * alpha)
    h, v = 0.0, w
    for k in range(4 * MAX_DOUBLINGS + 1):
        h_next = float(horizon) * 2.0 ** (k / 4)
        v = propagate(kg, v, h_next - h)
        h = h_next
        # E part only: the cemetery entry keeps the O(eps) rounding of w at Delta
        tail = np.abs(v[:-1]).max()
        if tail == 0.0 or math.log(tail) + alpha * h < target:
            break
    else:
        raise ConvergenceError("no quasi-limit detected at this precision")
    nodes, weights = _panels(h, kg.uniformization_rate)
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    path = transient_path(kg, w, nodes)
    integrand = path * (weights * np.exp(alpha * nodes))[:, None]
    pi = mu + integrand.sum(axis=0)
    # the cemetery entry of the integrand vanishes identically for exponential
    # mu; numerically it is an eps-sized constant amplified by exp(alpha t).
    # Total mass is conserved, so the E-mass check below covers it.
    pi[-1] = 0.0
    if (pi < -1e-6).any():
        raise ConvergenceError("quasi-limit has negative entries")
    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if abs(total - 1.0) >= 1e-6:
        raise ConvergenceError(f"quasi-limit mass {total!r} is not 1")
    return pi / total
