"""Coupled price iteration for a pair of pricing algorithms.

An algorithm is a total map from the opponent's current price index to the
own next price index.  With both algorithms fixed, prices evolve in
lockstep, so every trajectory either settles on a fixed pair or enters a
cycle inside the finite joint state space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import CycleForbiddenError, DomainError, NoFixedPairError


@dataclass(frozen=True)
class Algorithm:
    """Total response map: entry j is the own next price when the opponent charges j."""

    responses: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(int(r) for r in self.responses))
        k = len(self.responses)
        if k < 2:
            raise DomainError("an algorithm needs at least two price levels")
        if any(not 0 <= r < k for r in self.responses):
            raise DomainError("algorithm responses must be valid price indices")

    @property
    def k(self) -> int:
        return len(self.responses)

    def __call__(self, opponent_price: int) -> int:
        return self.responses[opponent_price]

    def replace(self, opponent_price: int, own_price: int) -> "Algorithm":
        new = list(self.responses)
        new[opponent_price] = own_price
        return Algorithm(tuple(new))


@dataclass(frozen=True)
class FixedPair:
    """Self-consistent price pair: a = sA(b) and b = sB(a)."""

    a: int
    b: int

    def swapped(self) -> "FixedPair":
        return FixedPair(self.b, self.a)


@dataclass(frozen=True)
class Cycle:
    """Repeating sequence of price pairs of length >= 2, in trajectory order."""

    pairs: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.pairs)

    def canonical(self) -> tuple[tuple[int, int], ...]:
        """Rotation-invariant representation (smallest pair first)."""
        start = min(range(len(self.pairs)), key=lambda i: self.pairs[i])
        return self.pairs[start:] + self.pairs[:start]


Outcome = FixedPair | Cycle


class CyclePolicy(enum.Enum):
    """How cycle outcomes are treated when valuing an algorithm pair."""

    FORBIDDEN = "forbidden"
    MIN_PRICE = "min_price"
    AVERAGE_PAYOFF = "average_payoff"


def iterate(sa: Algorithm, sb: Algorithm, start_a: int, start_b: int
            ) -> tuple[Outcome, list[tuple[int, int]]]:
    """Run the coupled price dynamics until a state pair repeats.

    Both prices update simultaneously each tick: a' = sA(b), b' = sB(a).
    The joint state space has K^2 states, so a repeat occurs within K^2 + 1
    steps.  Returns the eventual fixed pair or cycle together with the
    pre-convergence transient (states visited before entering it).
    """
    k = sa.k
    if sb.k != k:
        raise DomainError("algorithms must share one price grid")
    if not (0 <= start_a < k and 0 <= start_b < k):
        raise DomainError("start prices must be valid indices")

    seen: dict[tuple[int, int], int] = {}
    path: list[tuple[int, int]] = []
    state = (start_a, start_b)
    while state not in seen:
        seen[state] = len(path)
        path.append(state)
        state = (sa(state[1]), sb(state[0]))
    first = seen[state]
    loop = path[first:]
    transient = path[:first]
    if len(loop) == 1:
        return FixedPair(*loop[0]), transient
    return Cycle(tuple(loop)), transient


def consistent_pairs(sa: Algorithm, sb: Algorithm) -> list[FixedPair]:
    """All (a, b) with a = sA(b) and b = sB(a), by exhaustive scan."""
    out = []
    for a in range(sa.k):
        for b in range(sb.k):
            if sa(b) == a and sb(a) == b:
                out.append(FixedPair(a, b))
    return out


def reachable_outcomes(own: Algorithm, opp: Algorithm
                       ) -> tuple[list[FixedPair], list[Cycle]]:
    """Fixed pairs and cycles reachable from some initial price pair.

    Coordinates are (own, opp).  The adjuster picks the initial prices, and
    a single initial pair seeds any reachable trajectory, so scanning all
    K^2 starts is exhaustive.
    """
    pairs: dict[tuple[int, int], FixedPair] = {}
    cycles: dict[tuple[tuple[int, int], ...], Cycle] = {}
    for i in range(own.k):
        for j in range(opp.k):
            outcome, _ = iterate(own, opp, i, j)
            if isinstance(outcome, FixedPair):
                pairs[(outcome.a, outcome.b)] = outcome
            else:
                cycles[outcome.canonical()] = outcome
    return list(pairs.values()), list(cycles.values())


def select_pair(
    s_opp: Algorithm,
    s_own: Algorithm,
    valuation: Callable[[FixedPair], float] | dict,
    opponent_valuation: Callable[[FixedPair], float] | dict | None = None,
) -> FixedPair:
    """Pick the convergent pair the adjuster steers the dynamics to.

    Among the consistent pairs of (own, opp) that are reachable from some
    initial price pair, returns the one maximizing the adjuster's valuation.
    Exact ties go to the pair the opponent prefers (when an opponent
    valuation is supplied) and then to the lowest own price index, so the
    choice is deterministic.  Pairs are in (own, opp) coordinates.
    """
    value = valuation.__getitem__ if isinstance(valuation, dict) else valuation
    if opponent_valuation is None:
        ovalue = None
    elif isinstance(opponent_valuation, dict):
        ovalue = opponent_valuation.__getitem__
    else:
        ovalue = opponent_valuation

    reachable, _ = reachable_outcomes(s_own, s_opp)
    if not reachable:
        raise NoFixedPairError("no reachable fixed pair for this algorithm pair")

    def key(pair: FixedPair):
        tie = ovalue(pair) if ovalue is not None else 0.0
        return (value(pair), tie, -pair.a)

    return max(reachable, key=key)


def cycle_value(cycle: Cycle, table: np.ndarray, policy: CyclePolicy
                ) -> tuple[float, float]:
    """Per-seller value of a cycle under the chosen resolution policy.

    MIN_PRICE evaluates each seller at the pair of both sellers' minimum
    cycle prices (customers time purchases); AVERAGE_PAYOFF takes the
    unweighted mean over the cycle's pairs (customers arrive uniformly).
    Pairs are (seller A price, seller B price).
    """
    if policy is CyclePolicy.FORBIDDEN:
        raise CycleForbiddenError("cycles are ruled out under the forbidden policy")
    t = np.asarray(table, dtype=float)
    if policy is CyclePolicy.MIN_PRICE:
        amin = min(p for p, _ in cycle.pairs)
        bmin = min(q for _, q in cycle.pairs)
        return float(t[amin, bmin]), float(t[bmin, amin])
    va = float(np.mean([t[p, q] for p, q in cycle.pairs]))
    vb = float(np.mean([t[q, p] for p, q in cycle.pairs]))
    return va, vb


def outcome_after(outcome: Outcome, sa: Algorithm, sb: Algorithm) -> Outcome:
    """Apply one joint update to an outcome (soundness helper for tests)."""
    if isinstance(outcome, FixedPair):
        return FixedPair(sa(outcome.b), sb(outcome.a))
    return Cycle(tuple((sa(b), sb(a)) for a, b in outcome.pairs))


def algorithms_for(k: int) -> Iterable[Algorithm]:
    """Enumerate all K^K algorithms on a K-point grid (small K only)."""
    import itertools

    for responses in itertools.product(range(k), repeat=k):
        yield Algorithm(responses)
