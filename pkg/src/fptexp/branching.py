"""Extinction and emergence times of branching processes.

Linear birth-death process (per-capita birth rate ``lam``, death rate ``nu``,
subcritical ``lam < nu``): with ``rho = nu - lam`` and ``x = exp(-rho t)``,

    q_t = P_1(Z_t = 0) = nu (1 - x) / (nu - lam x),
    q_t^{-1}(u) = log(1 + rho u / (nu (1 - u))) / rho,

and the unique law ``mu_alpha`` on {1, 2, ...} making the extinction time
Exp(alpha) has generating function ``G(u) = 1 - exp(-alpha q^{-1}(u))``.
It is quasi-stationary iff ``alpha <= rho``.

For the two-type emergence problem ``q_{1,t}`` is estimated by simulation
and ``G`` is tabulated through ``G(q_{1,t}) = exp(-alpha t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .chain import Generator, check_grid
from .errors import CensoringError, ValidationError
from .simulation import _Uniforms, _pick, run_trajectories, stream

MAX_POPULATION = 1_000_000


@dataclass(frozen=True)
class BirthDeathSpec:
    lam: float
    nu: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.nu)) or self.lam < 0:
            raise ValidationError("rates must be finite, lam >= 0")
        if self.lam == self.nu:
            raise ValidationError("critical case lam == nu is not supported")
        if self.lam > self.nu:
            raise ValidationError("supercritical case lam > nu is not supported")

    @property
    def rho(self) -> float:
        """Malthusian decay parameter ``nu - lam``."""
        return self.nu - self.lam


def bd_extinction_prob(spec: BirthDeathSpec, t: float) -> float:
    if t < 0:
        raise ValidationError("t must be >= 0")
    x = math.exp(-spec.rho * t)
    return spec.nu * -math.expm1(-spec.rho * t) / (spec.nu - spec.lam * x)


def bd_q_inverse(spec: BirthDeathSpec, u: float) -> float:
    if not 0.0 <= u < 1.0:
        raise ValidationError("u must lie in [0, 1)")
    return math.log1p(spec.rho * u / (spec.nu * (1.0 - u))) / spec.rho


def bd_mu_alpha_gf(spec: BirthDeathSpec, alpha: float, t: float) -> float:
    """``G_{mu_alpha}(t) = 1 - ((nu - lam t) / (nu (1 - t)))^(-alpha / rho)``."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if not 0.0 <= t < 1.0:
        raise ValidationError("t must lie in [0, 1)")
    c = alpha / spec.rho
    return -math.expm1(-c * math.log1p(spec.rho * t / (spec.nu * (1.0 - t))))


def binomial_series(c: float, z: float, kmax: int) -> np.ndarray:
    """Coefficients of ``(1 - z x)^c`` up to ``x^kmax``."""
    out = np.empty(kmax + 1)
    out[0] = 1.0
    for k in range(1, kmax + 1):
        out[k] = out[k - 1] * (k - 1 - c) / k * z
    return out


def bd_mu_alpha_coeffs(spec: BirthDeathSpec, alpha: float, kmax: int):
    """``mu_alpha(1..kmax)`` and its classification (``qsd`` or ``exponential_only``).

    ``1 - G(x) = (1 - x)^c (1 - r x)^(-c)`` with ``c = alpha / rho`` and
    ``r = lam / nu``; the coefficients are the Cauchy product of the two
    binomial series.
    """
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if kmax < 1:
        raise ValidationError("kmax must be >= 1")
    c = alpha / spec.rho
    r = spec.lam / spec.nu
    a = binomial_series(c, 1.0, kmax)
    b = binomial_series(-c, r, kmax)
    one_minus_g = np.convolve(a, b)[: kmax + 1]
    coeffs = -one_minus_g[1:]
    cls = "qsd" if alpha <= spec.rho else "exponential_only"
    if cls == "qsd" and (coeffs < -1e-12).any():
        raise RuntimeError("negative coefficient in a quasi-stationary law: series error")
    return coeffs, cls


def bd_truncated_generator(spec: BirthDeathSpec, level: int) -> Generator:
    """Linear birth-death chain on ``0..level`` (no births at ``level``), D = {0}."""
    if level < 1:
        raise ValidationError("level must be >= 1")
    triples = []
    for k in range(1, level + 1):
        triples.append((str(k), str(k - 1), k * spec.nu))
        if k < level and spec.lam > 0:
            triples.append((str(k), str(k + 1), k * spec.lam))
    return Generator.from_triples([str(k) for k in range(level + 1)], ["0"], triples)


@dataclass(frozen=True)
class TwoTypeSpec:
    """Offspring law of type-1 individuals over ``(type-1 children, type-2 children)``."""

    offspring: tuple
    branch_rate: float

    def __post_init__(self):
        if not self.offspring:
            raise ValidationError("offspring law is empty")
        total = 0.0
        for k1, k2, p in self.offspring:
            if k1 < 0 or k2 < 0 or p < 0 or int(k1) != k1 or int(k2) != k2:
                raise ValidationError("offspring entries must be (k1 >= 0, k2 >= 0, p >= 0)")
            if k1 == 0 and k2 == 0 and p > 0:
                raise ValidationError("empty offspring must have zero mass")
            total += p
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"offspring probabilities sum to {total!r}")
        if not self.branch_rate > 0:
            raise ValidationError("branch_rate must be positive")

    @classmethod
    def of(cls, offspring, branch_rate):
        return cls(tuple((int(a), int(b), float(p)) for a, b, p in offspring), float(branch_rate))


@dataclass(frozen=True)
class _EmergenceTables:
    rate: float
    cum: list
    k1: list
    k2: list
    max_population: int


def _emergence_time(tab: _EmergenceTables, seed: int, k: int) -> float:
    draw = _Uniforms(stream(seed, k))
    n1 = 1
    t = 0.0
    while True:
        t += -math.log(draw()) / (n1 * tab.rate)
        j = _pick(tab.cum, draw())
        if tab.k2[j] > 0:
            return t
        n1 += tab.k1[j] - 1
        if n1 > tab.max_population:
            return math.inf


@dataclass(frozen=True, eq=False)
class EmergenceTable:
    """``q_hat`` is the (rearranged) survival estimate on ``t``; ``(u, G)`` is sorted by u."""

    t: np.ndarray
    q_hat: np.ndarray
    u: np.ndarray
    G: np.ndarray

    def to_csv(self) -> str:
        return "u,G\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(self.u.tolist(), self.G.tolist()))


def emergence_times(spec: TwoTypeSpec, n: int, seed: int, *, workers: int = 1,
                    max_population: int = MAX_POPULATION) -> np.ndarray:
    """Times of the first type-2 birth from a single type-1 ancestor."""
    probs = np.array([p for _, _, p in spec.offspring])
    tab = _EmergenceTables(spec.branch_rate, (np.cumsum(probs) / probs.sum()).tolist(),
                           [a for a, _, _ in spec.offspring], [b for _, b, _ in spec.offspring],
                           max_population)
    if not any(b > 0 and p > 0 for _, b, p in spec.offspring):
        raise CensoringError("no offspring event produces a type-2 individual", censored=n)
    values = run_trajectories(_emergence_time, tab, n, seed, workers)
    censored = int(np.isinf(values).sum())
    if censored:
        raise CensoringError(f"{censored} of {n} trajectories exceeded {max_population} "
                             "individuals before emergence", censored=censored)
    return values


def multitype_mu_alpha_gf(spec: TwoTypeSpec, alpha: float, grid, n: int, seed: int, *,
                          workers: int = 1) -> EmergenceTable:
    """Tabulate ``G_{mu_alpha}`` for the two-type emergence time by Monte Carlo."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if n < 1000:
        raise ValidationError("n must be >= 1000")
    t = check_grid(grid)
    times = np.sort(emergence_times(spec, n, seed, workers=workers))
    raw = 1.0 - np.searchsorted(times, t, side="right") / n
    # decreasing fit = negated increasing fit of the negated estimate
    q_hat = -isotonic_regression(-raw).x
    g = np.exp(-alpha * t)
    order = np.lexsort((g, q_hat))
    return EmergenceTable(t, q_hat, q_hat[order], g[order])
