from __future__ import annotations

import sys

import numpy as np
import pytest

from flame.core import LabeledDataset


def gaussian_pair(seed: int, n_pos: int = 20, n_neg: int = 20, d: int = 2, shift: float = 1.5):
    """Two spherical Gaussian classes separated along the first axis."""
    rng = np.random.default_rng(seed)
    mu = np.zeros(d)
    mu[0] = shift / 2
    X = np.vstack([rng.standard_normal((n_pos, d)) + mu, rng.standard_normal((n_neg, d)) - mu])
    y = np.r_[np.ones(n_pos), -np.ones(n_neg)]
    return LabeledDataset(X, y)


@pytest.fixture
def small_data():
    return gaussian_pair(0, 15, 25, 3)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
