import functools

import numpy as np
import pytest

from latindex.clifford import build_gamma_rep
from latindex.gauge import ConnectionDescriptor, discretize, make_generalized_link


@functools.lru_cache(maxsize=None)
def flux_field(Q, N):
    desc = ConnectionDescriptor.u1_flux(Q) if Q else ConnectionDescriptor.trivial(2)
    return discretize(make_generalized_link(desc), N)


@pytest.fixture(scope="session")
def rep2():
    return build_gamma_rep(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def free_wilson_eigenvalues(N, m, n=2):
    """Momentum-space oracle for H_W(m) on trivial links (both signs)."""
    a = 1.0 / N
    p = 2 * np.pi * np.arange(N) / N
    grids = np.meshgrid(*([p] * n), indexing="ij")
    s2 = sum(np.sin(g) ** 2 for g in grids) / a ** 2
    mass = m + sum(1 - np.cos(g) for g in grids) / a
    e = np.sqrt(s2 + mass ** 2).ravel()
    reps = 2 ** (n // 2) // 2
    return np.sort(np.concatenate([np.repeat(e, reps), -np.repeat(e, reps)]))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
