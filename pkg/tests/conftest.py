from __future__ import annotations

import numpy as np
import pytest

from roboadvisor.dataio import bundled_item_set
from roboadvisor.lotteries import BreakpointGrid, PwlUtility
from roboadvisor.simulation import default_virtual_user


@pytest.fixture(scope="session")
def items10():
    return bundled_item_set("items10")


@pytest.fixture(scope="session")
def items20():
    return bundled_item_set("items20")


@pytest.fixture(scope="session")
def virtual_user():
    # saturating exponential on [0, 500000]
    return default_virtual_user(500_000.0)


@pytest.fixture(scope="session")
def virtual_user10():
    # same shape stretched over the wider 10-item domain
    return default_virtual_user(1_000_000.0)


def random_grid(rng: np.random.Generator, n_points: int, upper: float = 1.0) -> BreakpointGrid:
    interior = np.sort(rng.uniform(0.05, 0.95, size=n_points - 2))
    # keep interior points separated so segments stay well defined
    for i in range(1, len(interior)):
        interior[i] = max(interior[i], interior[i - 1] + 1e-3)
    pts = np.concatenate(([0.0], interior, [1.0])) * upper
    return BreakpointGrid(points=tuple(float(p) for p in pts))


def random_concave_utility(rng: np.random.Generator, grid: BreakpointGrid) -> PwlUtility:
    slopes = np.sort(rng.exponential(1.0, size=grid.n_points - 1))[::-1]
    return PwlUtility.from_beta(grid, slopes)
