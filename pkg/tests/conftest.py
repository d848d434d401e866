from __future__ import annotations

import math

import pytest

from holee_lattice.lattice import DiscountCurve
from holee_lattice.model import (
    ConstantScale,
    ModelParams,
    ProbSchedule,
    SaturatingScale,
    TimeGrid,
    TruncatedGeometricEta,
    UniformEta,
    classical_model,
    recombining_eta,
)


def q_const(q: float) -> ProbSchedule:
    return ProbSchedule.constant(q)


def families(n_steps: int = 100, dt: float = 1.0) -> dict[str, ModelParams]:
    """Parameter families used across the identity checks (not all recombine)."""
    grid = TimeGrid(dt, n_steps)
    sat = SaturatingScale(0.4, 5.0)
    return {
        "classical": classical_model(0.5, 0.99, grid),
        "constant_c": ModelParams(grid, UniformEta(), ConstantScale(0.4), q_const(0.5)),
        "saturating_c": ModelParams(grid, UniformEta(), sat, q_const(0.5)),
        "table_q": ModelParams(grid, recombining_eta(sat, grid), sat, ProbSchedule((0.3, 0.6, 0.45))),
        "truncated_geometric": ModelParams(grid, TruncatedGeometricEta(0.7), ConstantScale(0.3), q_const(0.4)),
    }


def recombining_families(n_steps: int = 12, dt: float = 1.0) -> dict[str, ModelParams]:
    grid = TimeGrid(dt, n_steps)
    sat = SaturatingScale(0.4, 5.0)
    return {
        "classical": classical_model(0.5, 0.99, grid),
        "classical_coarse": classical_model(0.35, math.exp(-0.1), grid),
        "saturating_recombining": ModelParams(grid, recombining_eta(sat, grid), sat, q_const(0.5)),
        "table_q": ModelParams(grid, recombining_eta(sat, grid), sat, ProbSchedule((0.3, 0.6, 0.45))),
    }


@pytest.fixture
def grid4() -> TimeGrid:
    return TimeGrid(1.0, 4)


@pytest.fixture
def const_params(grid4) -> ModelParams:
    return ModelParams(grid4, UniformEta(), ConstantScale(0.4), q_const(0.5))


@pytest.fixture
def flat5():
    def make(grid: TimeGrid) -> DiscountCurve:
        return DiscountCurve.flat(grid, 0.05)

    return make


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
