import numpy as np
import pytest

from fptexp import Generator, build_killed

CHAIN_A = [("1", "0", 0.5), ("1", "2", 1.0), ("2", "0", 0.5), ("2", "1", 2.0)]
CHAIN_C = [("1", "0", 1.0), ("1", "2", 1.0), ("2", "1", 1.0)]
QSD_A = np.array([2 / 3, 1 / 3, 0.0])


def make_chain_a():
    return Generator.from_triples(["0", "1", "2"], ["0"], CHAIN_A)


def make_chain_c():
    return Generator.from_triples(["0", "1", "2"], ["0"], CHAIN_C)


def emergence_five_state():
    """5-state realization of the lumped emergence chain qbar21=1, qbar31=2, qbar23=qbar32=0.5.

    Blocks: D = {m}, E2 = {a1, a2}, E3 = {b1, b2}; rates inside blocks are arbitrary.
    """
    rates = [
        ("a1", "m", 1.0), ("a1", "b1", 0.3), ("a1", "b2", 0.2), ("a1", "a2", 0.7),
        ("a2", "m", 1.0), ("a2", "b2", 0.5), ("a2", "a1", 1.3),
        ("b1", "m", 2.0), ("b1", "a1", 0.25), ("b1", "a2", 0.25), ("b1", "b2", 0.4),
        ("b2", "m", 2.0), ("b2", "a2", 0.5), ("b2", "b1", 0.9),
    ]
    gen = Generator.from_triples(["m", "a1", "a2", "b1", "b2"], ["m"], rates)
    return gen, [["m"], ["a1", "a2"], ["b1", "b2"]]


def random_chain(rng, n_states=None, eta_const=None, n_target=None, density=0.7):
    """Random finite chain with irreducible transient part.

    With ``eta_const`` every transient state jumps into D at total rate ``eta_const``.
    """
    n = n_states or int(rng.integers(3, 9))
    d = n_target or int(rng.integers(1, min(3, n - 1) + 1))
    m = n - d
    q = np.zeros((n, n))
    for i in range(d, n):
        for j in range(d, n):
            if i != j and rng.random() < density:
                q[i, j] = rng.uniform(0.1, 3.0)
        # ring keeps E strongly connected
        if m > 1:
            nxt = d + (i - d + 1) % m
            q[i, nxt] = max(q[i, nxt], rng.uniform(0.1, 1.0))
        if eta_const is not None:
            split = rng.dirichlet(np.ones(d))
            q[i, :d] = eta_const * split
        else:
            for j in range(d):
                if rng.random() < 0.6:
                    q[i, j] = rng.uniform(0.0, 2.0)
    if eta_const is None and q[d:, :d].sum() == 0:
        q[d, 0] = 1.0
    np.fill_diagonal(q, -q.sum(axis=1))
    return Generator.from_matrix(q, list(range(d)))


def random_law(rng, m):
    w = rng.dirichlet(np.ones(m))
    return np.append(w, 0.0)


@pytest.fixture
def chain_a():
    return make_chain_a()


@pytest.fixture
def kg_a():
    return build_killed(make_chain_a())


@pytest.fixture
def kg_c():
    return build_killed(make_chain_c())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
