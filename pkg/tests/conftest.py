import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from mkdv_exact import ComplexBlock, RealBlock, SolutionEvaluator, Triplet, assemble_canonical

EX2_A = [[1, -1, 0], [0, 1, -1], [0, 0, 1]]
EX2_B = [[0], [0], [1]]
EX2_C = [[1, 2, 0.5]]
EX2_P = np.array([[2, 7, 10], [4, 12, 13], [8, 20, 14]]) / 16.0

EX1_PARAMS = [(1.0, 2.0), (0.5, 1.0), (2.0, -3.0)]


def example1(a=1.0, c=2.0):
    return Triplet([[a]], [[1.0]], [[c]])


def example2():
    return Triplet(EX2_A, EX2_B, EX2_C)


def complex_triplet():
    return assemble_canonical([ComplexBlock(1.0, 1.0, [1.0], [0.0])])


def soliton(a, c, x, t):
    """Closed-form one-soliton potential for the triplet ([a], [1], [c])."""
    theta = 2 * a * np.asarray(x) - 8 * a ** 3 * np.asarray(t)
    k2 = (c / (2 * a)) ** 2
    return -2 * c / (np.exp(theta) + k2 * np.exp(-theta))


def soliton_x(a, c, x, t):
    theta = 2 * a * np.asarray(x) - 8 * a ** 3 * np.asarray(t)
    k2 = (c / (2 * a)) ** 2
    d = np.exp(theta) + k2 * np.exp(-theta)
    dx = 2 * a * (np.exp(theta) - k2 * np.exp(-theta))
    return 2 * c * dx / d ** 2


@pytest.fixture(scope="session")
def ev2():
    return SolutionEvaluator.from_triplet(example2())


@pytest.fixture(scope="session")
def ev1():
    return SolutionEvaluator.from_triplet(example1())


# Admissible canonical triplets with well separated eigenvalues.
_REAL_OMEGAS = (0.6, 1.0, 1.5)
_COMPLEX = ((0.8, 0.7), (1.2, 1.4))
_coef = st.floats(0.3, 2.0) | st.floats(-2.0, -0.3)


@st.composite
def canonical_triplets(draw, max_blocks=2, max_size=2):
    n_real = draw(st.integers(0, max_blocks))
    n_cplx = draw(st.integers(0 if n_real else 1, max_blocks - n_real if n_real < max_blocks else 0))
    blocks = []
    for omega in draw(st.permutations(_REAL_OMEGAS))[:n_real]:
        n = draw(st.integers(1, max_size))
        blocks.append(RealBlock(omega, draw(st.lists(_coef, min_size=n, max_size=n))))
    for alpha, beta in draw(st.permutations(_COMPLEX))[:n_cplx]:
        gamma = draw(_coef)
        epsilon = draw(_coef)
        blocks.append(ComplexBlock(alpha, beta, [gamma], [epsilon]))
    return assemble_canonical(blocks)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
