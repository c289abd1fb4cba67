"""Block lumping of the first-passage problem.

A partition ``E_1 = D, E_2, ...`` of the state space is admissible when, for
every transient block ``k`` and every other block ``l``, the total rate
``sum_{j in E_l} q_ij`` is the same for all ``i`` in ``E_k``. The block
process killed at T is then itself Markov with q-matrix ``qbar``, and any
law whose block masses ``mu_bar`` solve ``mu_bar qbar = -alpha mu_bar + alpha d``
makes T exponential with rate ``alpha = sum_k qbar_k1 mu_bar_k``, whatever the
distribution inside each block.

The two-block closed form handles ``q21 == q31`` through its analytic limit:
writing ``a = q21 - q31``, ``s = a + q23 + q32`` and
``r = (a + q23 - q32)^2 + 4 q23 q32`` one has ``s^2 - r = 4 a q32``, hence

    mu2 = (s - sqrt(r)) / (2a) = 2 q32 / (s + sqrt(r)),

which tends to ``q32 / (q23 + q32)`` as ``a -> 0`` (the switch's own
stationary law) and is free of cancellation for every ``a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import Generator, as_distribution, build_killed
from .errors import ValidationError
from .exponentiality import perron_left

ROW_TOL = 1e-12
ALPHA_AGREE = 1e-10


@dataclass(frozen=True)
class Partition:
    """Ordered blocks of state labels, the first one being the target set."""

    blocks: tuple

    @classmethod
    def of(cls, blocks: Sequence[Sequence[str]]) -> "Partition":
        return cls(tuple(tuple(str(s) for s in b) for b in blocks))

    def check(self, gen: Generator) -> None:
        if len(self.blocks) < 2:
            raise ValidationError("partition needs at least two blocks")
        seen = {}
        for k, block in enumerate(self.blocks):
            if not block:
                raise ValidationError(f"block {k + 1} is empty")
            for s in block:
                if s not in gen.index:
                    raise ValidationError(f"block {k + 1}: unknown state {s!r}")
                if s in seen:
                    raise ValidationError(f"state {s!r} in blocks {seen[s] + 1} and {k + 1}")
                seen[s] = k
        if len(seen) != gen.n:
            missing = [s for s in gen.states if s not in seen]
            raise ValidationError(f"partition does not cover state {missing[0]!r}")
        if frozenset(self.blocks[0]) != gen.target:
            raise ValidationError("first block must equal the target set D")

    def block_of(self) -> dict:
        return {s: k for k, b in enumerate(self.blocks) for s in b}


@dataclass(frozen=True, eq=False)
class LumpedGenerator:
    """Block q-matrix with an absorbing first block."""

    qbar: np.ndarray
    partition: Partition

    @property
    def nblocks(self) -> int:
        return self.qbar.shape[0]

    def to_generator(self) -> Generator:
        """The block chain as a :class:`Generator` with labels ``B1, B2, ...``."""
        labels = [f"B{k + 1}" for k in range(self.nblocks)]
        return Generator.from_matrix(self.qbar, ["B1"], labels)


def validate_partition(gen: Generator, part: Partition | Sequence) -> LumpedGenerator:
    """Check the constant block-rate condition and return the lumped generator.

    On failure the error names the lexicographically smallest block pair
    ``(k, l)`` (1-based) together with two witness states.
    """
    if not isinstance(part, Partition):
        part = Partition.of(part)
    part.check(gen)
    nb = len(part.blocks)
    ind = np.zeros((gen.n, nb))
    for k, block in enumerate(part.blocks):
        for s in block:
            ind[gen.index[s], k] = 1.0
    flows = np.asarray(gen.rates @ ind)
    qbar = np.zeros((nb, nb))
    for k in range(1, nb):
        rows = [gen.index[s] for s in part.blocks[k]]
        rows.sort()
        for l in range(nb):
            if l == k:
                continue
            vals = flows[rows, l]
            ref = vals[0]
            bad = np.abs(vals - ref) > ROW_TOL * np.maximum(1.0, np.abs(ref))
            if bad.any():
                i, i2 = rows[0], rows[int(np.argmax(bad))]
                raise ValidationError(
                    f"block pair ({k + 1},{l + 1}) not lumpable: "
                    f"state {gen.states[i]!r} has rate {vals[0]!r} into block {l + 1}, "
                    f"state {gen.states[i2]!r} has {flows[i2, l]!r}")
            qbar[k, l] = ref
        qbar[k, k] = -qbar[k].sum()
    return LumpedGenerator(qbar, part)


def solve_lumped_qsd(lg: LumpedGenerator):
    """Block law ``mu_bar`` (zero on block 1) and rate ``alpha`` of the lumped QSD.

    ``alpha`` is taken from the flux formula ``sum_k qbar_k1 mu_bar_k``; it is
    cross-checked against the Perron eigenvalue.
    """
    if lg.nblocks < 2:
        raise ValidationError("need at least two blocks")
    sub = lg.qbar[1:, 1:]
    pr = perron_left(sub)
    mu_bar = np.concatenate([[0.0], pr.vector])
    alpha = math.fsum(lg.qbar[1:, 0] * pr.vector)
    # eigenvalue read off the matrix-vector product, independent of the flux
    v = pr.vector
    eig = -float((v @ sub) @ v / (v @ v))
    if abs(eig - alpha) > ALPHA_AGREE * max(1.0, alpha):
        raise ValidationError(f"lumped rate mismatch: eigenvalue {eig!r} vs flux {alpha!r}")
    return mu_bar, alpha


def emergence_closed_form(q21: float, q31: float, q23: float, q32: float):
    """Closed-form QSD of the two-block (treated / untreated) emergence chain.

    Returns ``(mu2, alpha)``: the mass of block 2 and the exponential rate.
    """
    rates = (q21, q31, q23, q32)
    if any((not math.isfinite(r)) or r < 0 for r in rates):
        raise ValidationError("rates must be finite and nonnegative")
    scale = max(max(rates), 1e-300)
    a = q21 - q31
    if abs(a) < 1e-12 * scale:
        if q23 + q32 <= 0:
            raise ValidationError("reducible: blocks 2 and 3 do not communicate")
        mu2 = q32 / (q23 + q32)
        return mu2, q21
    if q23 + q32 <= 0:
        raise ValidationError("reducible: blocks 2 and 3 do not communicate")
    s = a + q23 + q32
    root = math.sqrt((a + q23 - q32) ** 2 + 4.0 * q23 * q32)
    mu2 = 2.0 * q32 / (s + root)
    if not 0.0 <= mu2 <= 1.0:
        raise ValidationError(f"mu2 = {mu2!r} outside [0, 1]")
    return mu2, mu2 * q21 + (1.0 - mu2) * q31


def lift_lumped_law(gen: Generator, part: Partition | Sequence, mu_bar, within=None) -> np.ndarray:
    """Spread block masses over states: ``mu_i = mu_bar_k * within[k]_i``.

    ``within`` maps each transient block index ``k`` (0-based, ``k >= 1``) to a
    probability vector over that block's states in partition order; a
    missing entry (or ``within=None``) means uniform. Returns a law over
    ``E + [cemetery]`` in the order of ``build_killed(gen)``.
    """
    if not isinstance(part, Partition):
        part = Partition.of(part)
    part.check(gen)
    mu_bar = np.asarray(mu_bar, dtype=float)
    nb = len(part.blocks)
    if mu_bar.size == nb - 1:
        mu_bar = np.concatenate([[0.0], mu_bar])
    if mu_bar.size != nb:
        raise ValidationError(f"mu_bar has {mu_bar.size} entries for {nb} blocks")
    if mu_bar[0] != 0.0:
        raise ValidationError("mu_bar must not charge the target block")
    within = dict(within or {})
    kg = build_killed(gen)
    pos = {s: i for i, s in enumerate(kg.labels)}
    mu = np.zeros(kg.m + 1)
    for k in range(1, nb):
        block = part.blocks[k]
        w = within.get(k)
        w = np.full(len(block), 1.0 / len(block)) if w is None else np.asarray(w, dtype=float)
        if w.size != len(block) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"within[{k}] is not a probability vector on block {k + 1}")
        for s, p in zip(block, w):
            mu[pos[s]] = mu_bar[k] * p
    return as_distribution(kg, mu)


def block_masses(part: Partition, labels: Sequence[str], v) -> np.ndarray:
    """Aggregate a vector over ``labels + [cemetery]`` into block masses.

    The cemetery mass goes to block 1.
    """
    where = part.block_of()
    v = np.asarray(v, dtype=float)
    out = np.zeros(len(part.blocks))
    for s, x in zip(labels, v[:-1]):
        out[where[s]] += x
    out[0] += v[-1]
    return out
