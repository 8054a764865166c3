"""Session-scoped solves shared across module tests and the acceptance suite.

The 201x201 lift2d run is the workhorse fixture: solving it once keeps the
whole suite's wall time dominated by a single value iteration.
"""

import numpy as np
import pytest

from zubov.solver import SolverSettings, solve_zubov
from zubov.systems import Grid, builtin


@pytest.fixture(scope="session")
def lift2d_system():
    return builtin("lift2d")


@pytest.fixture(scope="session")
def lift2d_field(lift2d_system):
    grid = Grid([-1.2, -1.2], [1.2, 1.2], [201, 201])
    return solve_zubov(lift2d_system, grid, SolverSettings(dt=0.05, tol=1e-6))


@pytest.fixture(scope="session")
def lift2d_field_coarse(lift2d_system):
    grid = Grid([-1.2, -1.2], [1.2, 1.2], [101, 101])
    return solve_zubov(lift2d_system, grid, SolverSettings(dt=0.1, tol=1e-6))


@pytest.fixture(scope="session")
def ex1_field():
    grid = Grid([-2.0], [2.0], [801])
    return solve_zubov(builtin("ex1"), grid, SolverSettings(dt=0.05, tol=1e-6))


@pytest.fixture(scope="session")
def arctan_field():
    grid = Grid([-3.0], [3.0], [601])
    return solve_zubov(builtin("arctan1d"), grid,
                       SolverSettings(dt=0.05, tol=1e-6))
