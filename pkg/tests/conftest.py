import json
from pathlib import Path

import numpy as np
import pytest

from algoprice.demand import (
    DiscreteChoiceDemand,
    PriceGrid,
    calibrate_discrete_choice,
    payoff_matrix,
)
from algoprice.multi_price import TransitionMatrix

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

# 2x2 example payoffs used throughout (normalized shape x = y = 1):
# index 0 = competitive price, 1 = monopoly price, entry [own, opp].
TABLE2 = np.array([[1.0, 3.0], [0.0, 2.0]])

# Frozen reference payoffs for the calibrated five-price market
# (own price 4..8 ascending by row, opponent 4..8 by column, 2 decimals).
REF5 = np.array([
    [1.90, 2.32, 2.68, 2.97, 3.19],
    [1.80, 2.30, 2.79, 3.21, 3.54],
    [1.55, 2.08, 2.64, 3.16, 3.61],
    [1.25, 1.74, 2.29, 2.87, 3.39],
    [0.95, 1.36, 1.86, 2.41, 2.95],
])


@pytest.fixture(scope="session")
def calibrated():
    """(a, b, grid, payoff table) for the five-price market."""
    a, b = calibrate_discrete_choice(4, 8)
    grid = PriceGrid.from_bounds(4, 8, 5)
    table = payoff_matrix(DiscreteChoiceDemand(a, b), grid)
    return a, b, grid, table


@pytest.fixture(scope="session")
def five_price_phi():
    return TransitionMatrix.load(str(DATA_DIR / "five_price_transitions.json"))


def _phi_from(entries: dict) -> np.ndarray:
    arr = np.zeros((2, 2, 2), dtype=int)
    for (a, b), succ in entries.items():
        arr[a, b] = succ
    return arr


C, M = 0, 1


def type1_transitions() -> TransitionMatrix:
    """Relent pattern: the undercutting incumbent's pair routes through
    (C,C); all other pairs go straight to (M,M).  An equilibrium exactly
    when the undercut gain x is at most beta."""
    phi_a = _phi_from({(C, C): (M, M), (M, M): (M, M),
                       (M, C): (M, M), (C, M): (C, C)})
    phi_b = _phi_from({(C, C): (M, M), (M, M): (M, M),
                       (M, C): (C, C), (C, M): (M, M)})
    return TransitionMatrix(phi_a, phi_b)


def type2_transitions() -> TransitionMatrix:
    """Undercut pattern: the reviser re-ups the undercut for one more
    round before the incumbent relents through (C,C).  An equilibrium
    exactly when x is at least beta."""
    phi_a = _phi_from({(C, C): (M, M), (M, M): (M, M),
                       (M, C): (M, C), (C, M): (C, C)})
    phi_b = _phi_from({(C, C): (M, M), (M, M): (M, M),
                       (C, M): (C, M), (M, C): (C, C)})
    return TransitionMatrix(phi_a, phi_b)


def random_pd_triples(n: int, seed: int, margin: float = 0.02):
    """Random (x, y, beta) with PD-valid payoffs, away from knife edges."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x = rng.uniform(0.05, 2.5)
        y = rng.uniform(max(0.0, x - 1.0) + 0.05, 3.0)
        beta = rng.uniform(0.05, 0.95)
        if abs(x - beta) < margin or abs(y - beta * (x - beta)) < margin:
            continue
        out.append((float(x), float(y), float(beta)))
    return out


def load_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Always show the acceptance pass/fail lines at the end of a run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
