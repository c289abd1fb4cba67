"""Exponential envelope, Monte Carlo first-passage sampling and KS testing.

Every trajectory ``k`` draws from its own Philox stream keyed by
``(seed, k)``, so samples do not depend on how trajectories are spread over
worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats

from .chain import Generator, KilledGenerator, as_distribution, build_killed
from .errors import CensoringError, ValidationError

MAX_EVENTS = 10_000_000
LEVEL = 0.01
BOOTSTRAP = 999
_BLOCK = 64


@dataclass(frozen=True)
class Envelope:
    alpha0: float
    alpha1: float

    def bounds(self, t):
        """``(exp(-alpha1 t), exp(-alpha0 t))``."""
        t = np.asarray(t, dtype=float)
        return np.exp(-self.alpha1 * t), np.exp(-self.alpha0 * t)


def envelope(kg: KilledGenerator) -> Envelope:
    """Smallest and largest killing rate over E."""
    return Envelope(float(kg.eta.min()), float(kg.eta.max()))


@dataclass(frozen=True, eq=False)
class SampleSet:
    values: np.ndarray
    seed: int
    scheme: str

    def __len__(self):
        return len(self.values)

    def to_csv(self) -> str:
        return "T\n" + "".join(f"{v!r}\n" for v in self.values.tolist())


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based substream ``index`` of master ``seed``."""
    return np.random.Generator(np.random.Philox(key=[seed % 2**64, index]))


class _Uniforms:
    """Buffered uniforms on (0, 1] from one stream."""

    __slots__ = ("_rng", "_buf", "_pos")

    def __init__(self, rng):
        self._rng = rng
        self._buf = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = (1.0 - self._rng.random(_BLOCK)).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _pick(cum, u):
    # linear scan; rows are short
    for j, c in enumerate(cum):
        if u <= c:
            return j
    return len(cum) - 1


@dataclass(frozen=True)
class _Tables:
    """Per-state jump tables in plain Python lists for fast inner loops."""

    init_cum: list
    rate: list          # total jump rate used for holding times
    cum: list           # cumulative jump probabilities
    dest: list          # destination index, -1 means "absorbed in D"
    kill: list          # killing rate (two-clock scheme only)
    scheme: str
    max_events: int


def _tables(kg: KilledGenerator, mu: np.ndarray, scheme: str, max_events: int) -> _Tables:
    q = kg.q_transient.tocsr()
    m = kg.m
    rate, cum, dest, kill = [], [], [], []
    for i in range(m):
        lo, hi = q.indptr[i], q.indptr[i + 1]
        cols = q.indices[lo:hi]
        vals = q.data[lo:hi]
        keep = cols != i
        cols, vals = cols[keep], vals[keep]
        eta = float(kg.eta[i])
        if scheme == "direct":
            cols = np.append(cols, -1)
            vals = np.append(vals, eta)
            kill.append(0.0)
        else:
            kill.append(eta)
        tot = float(vals.sum())
        rate.append(tot)
        cum.append((np.cumsum(vals) / tot).tolist() if tot > 0 else [])
        dest.append(cols.tolist())
    init = np.cumsum(mu[:-1])
    return _Tables((init / init[-1]).tolist(), rate, cum, dest, kill, scheme, max_events)


def _one_passage(tab: _Tables, seed: int, k: int) -> float:
    draw = _Uniforms(stream(seed, k))
    i = _pick(tab.init_cum, draw())
    t = 0.0
    two_clock = tab.scheme == "two_clock"
    for _ in range(tab.max_events):
        r = tab.rate[i]
        hold = -math.log(draw()) / r if r > 0 else math.inf
        if two_clock:
            eta = tab.kill[i]
            clock = -math.log(draw()) / eta if eta > 0 else math.inf
            if clock <= hold:
                return t + clock
        if hold == math.inf:
            return math.inf
        t += hold
        j = tab.dest[i][_pick(tab.cum[i], draw())]
        if j < 0:
            return t
        i = j
    return math.inf


def _run_chunk(args):
    fn, tab, seed, lo, hi = args
    return [fn(tab, seed, k) for k in range(lo, hi)]


def run_trajectories(fn: Callable, tab, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(tab, seed, k)`` for ``k < n``; order is restored by index."""
    if workers <= 1 or n < 2 * workers:
        return np.array(_run_chunk((fn, tab, seed, 0, n)), dtype=float)
    bounds = np.linspace(0, n, 4 * workers + 1).astype(int)
    jobs = [(fn, tab, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return np.array([x for part in parts for x in part], dtype=float)


def _reachable_killing(kg: KilledGenerator, mu: np.ndarray) -> bool:
    """Whether a state with positive killing rate is reachable from supp(mu)."""
    q = kg.q_transient.tocsr()
    frontier = list(np.flatnonzero(mu[:-1] > 0))
    seen = set(frontier)
    while frontier:
        i = frontier.pop()
        if kg.eta[i] > 0:
            return True
        for j in q.indices[q.indptr[i]:q.indptr[i + 1]]:
            if j not in seen and q[i, j] > 0:
                seen.add(j)
                frontier.append(j)
    return False


def _simulate(kg, mu, n, seed, scheme, workers, max_events):
    if n < 1:
        raise ValidationError("n must be >= 1")
    mu = as_distribution(kg, mu)
    if not _reachable_killing(kg, mu):
        raise CensoringError(f"D is unreachable from the initial law: all {n} trajectories censored",
                             censored=n)
    tab = _tables(kg, mu, scheme, max_events)
    values = run_trajectories(_one_passage, tab, n, seed, workers)
    censored = int(np.isinf(values).sum())
    if censored:
        raise CensoringError(f"{censored} of {n} trajectories exceeded {max_events} events",
                             censored=censored)
    return SampleSet(values, int(seed), scheme)


def simulate_direct(gen: Generator, mu, n: int, seed: int, *, workers: int = 1,
                    max_events: int = MAX_EVENTS) -> SampleSet:
    """First-passage times by jump-chain simulation of the full chain."""
    return _simulate(build_killed(gen), mu, n, seed, "direct", workers, max_events)


def simulate_two_clock(kg: KilledGenerator, mu, n: int, seed: int, *, workers: int = 1,
                       max_events: int = MAX_EVENTS) -> SampleSet:
    """First-passage times from the chain with D removed plus killing clocks.

    At each visited state ``i`` an independent clock ``Exp(eta_i)`` competes
    with the holding time of the D-removed chain; T is reached when a clock
    rings first. Clocks of states with ``eta_i = 0`` never ring.
    """
    return _simulate(kg, mu, n, seed, "two_clock", workers, max_events)


class KsResult(NamedTuple):
    statistic: float
    p_value: float
    verdict: str
    alpha: float


def _ks_exp1_rows(x: np.ndarray) -> np.ndarray:
    """KS distance of each row (already scaled to unit mean) to Exp(1)."""
    x = np.sort(x, axis=1)
    n = x.shape[1]
    f = -np.expm1(-x)
    i = np.arange(1, n + 1)
    return np.maximum((i / n - f).max(axis=1), (f - (i - 1) / n).max(axis=1))


def test_exponential(s: SampleSet | np.ndarray, alpha: float | str = "fit", *,
                     seed: int | None = None, n_boot: int = BOOTSTRAP,
                     level: float = LEVEL) -> KsResult:
    """One-sample KS test of the sample against Exp(alpha).

    With ``alpha='fit'`` the rate is the inverse sample mean and the p-value
    comes from a seeded parametric bootstrap (Lilliefors-type), whose
    smallest attainable value is ``1 / (n_boot + 1)``.
    """
    values = np.asarray(s.values if isinstance(s, SampleSet) else s, dtype=float)
    if values.size < 100:
        raise ValidationError("need at least 100 values")
    if (values <= 0).any() or not np.isfinite(values).all():
        raise ValidationError("sample has nonpositive or non-finite values")
    if alpha == "fit":
        rate = 1.0 / values.mean()
        stat = float(_ks_exp1_rows((values * rate)[None, :])[0])
        if seed is None:
            seed = s.seed if isinstance(s, SampleSet) else 0
        rng = stream(seed, 2**63)
        exceed = 0
        for lo in range(0, n_boot, 100):
            b = min(100, n_boot - lo)
            x = rng.exponential(size=(b, values.size))
            x /= x.mean(axis=1, keepdims=True)
            exceed += int((_ks_exp1_rows(x) >= stat).sum())
        p = (exceed + 1) / (n_boot + 1)
    else:
        rate = float(alpha)
        if rate <= 0:
            raise ValidationError("alpha must be positive")
        res = stats.kstest(values, "expon", args=(0.0, 1.0 / rate))
        stat, p = float(res.statistic), float(res.pvalue)
    verdict = "exponential" if p >= level else "not_exponential"
    return KsResult(stat, p, verdict, rate)


test_exponential.__test__ = False


def two_sample_ks(a: SampleSet, b: SampleSet) -> float:
    """p-value of the two-sample KS test between two sample sets."""
    return float(stats.ks_2samp(a.values, b.values).pvalue)
