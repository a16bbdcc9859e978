import sys

import numpy as np
import pytest

from maoii import make_params

# (N, r) pairs covering both regimes; N=2 with r > 2/3 oscillates
SMOOTH_SOURCES = [(3, 0.05), (3, 0.2), (3, 0.4), (3, 0.5), (4, 0.3), (5, 0.1), (5, 0.15),
                  (5, 0.25), (10, 0.05), (10, 0.1), (2, 0.3), (2, 0.5), (2, 0.6)]
OSC_SOURCES = [(2, 0.7), (2, 0.8), (2, 0.85), (2, 0.9), (2, 0.95), (2, 0.99)]
RHOS = [0.1, 0.5, 0.9, 1.0]


def grid(sources, rhos=RHOS, lam=1.0):
    return [make_params(N, r, rho, lam) for N, r in sources for rho in rhos]


@pytest.fixture
def smooth_grid():
    return grid(SMOOTH_SOURCES)


@pytest.fixture
def osc_grid():
    return grid(OSC_SOURCES)


def stationary_sum(params, n, values, length=4000):
    """Brute-force E[f(j)] under the stationary law, with an explicit long tail."""
    from maoii import stationary
    st = stationary(params, n)
    w = st.pmf_array(length)
    return float(np.sum(w * values[:length]))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
