import numpy as np
import pytest
from hypothesis import strategies as st

from cdrl.experiments.generators import bandit_mdp, chain_mdp, three_state_mdp
from cdrl.mdp import Policy
from cdrl.measures import FiniteDistribution, SupportGrid


@pytest.fixture
def chain():
    return chain_mdp()


@pytest.fixture
def chain_policy():
    return Policy.uniform(2, 1)


@pytest.fixture
def bandit():
    return bandit_mdp()


@pytest.fixture
def three_state():
    return three_state_mdp()


@pytest.fixture
def grid012():
    return SupportGrid([0.0, 1.0, 2.0])


@st.composite
def finite_dists(draw, lo=-5.0, hi=5.0, max_atoms=6):
    n = draw(st.integers(1, max_atoms))
    locs = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n))
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    return FiniteDistribution.from_atoms(locs, w / w.sum())


@st.composite
def grids(draw, min_k=2, max_k=8):
    k = draw(st.integers(min_k, max_k))
    lo = draw(st.floats(-3.0, 0.0))
    gaps = draw(st.lists(st.floats(0.1, 2.0), min_size=k - 1, max_size=k - 1))
    return SupportGrid(lo + np.concatenate(([0.0], np.cumsum(gaps))))


@st.composite
def prob_vectors(draw, k):
    w = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k)))
    if w.sum() == 0:
        w[0] = 1.0
    return w / w.sum()


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
