"""Equilibrium verification on grids with many prices.

With more than two prices the algorithm space explodes, but whenever a
seller sustains a price pair they can use the best algorithm consistent
with it, so the pair itself becomes the state.  An equilibrium candidate is
then a pair of transition tables ("who moves where when the other seller
revises"), and the induced continuation-value matrices must make every
prescribed transition feasible for the reviser and optimal for the
incumbent.  This module computes those value matrices exactly, verifies
candidates, recovers sustaining algorithms, and checks the collusion
bounds that every verified equilibrium satisfies.

Conventions: global pairs are (seller A price index, seller B price
index).  Per-seller matrices are indexed [own price, opponent price].
Seller indices: 0 = A, 1 = B.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Algorithm
from .errors import (
    DomainError,
    GridMismatchError,
    InfeasibleSuccessorError,
    InternalConsistencyError,
)

_EXACT_TOL = 1e-9
DEFAULT_MARGIN = 1e-9


@dataclass(frozen=True)
class TransitionMatrix:
    """Per-seller successor tables over global price pairs.

    ``phi_a[a, b]`` is the pair that follows (a, b) when seller A was the
    last to adjust (so seller B revises next); ``phi_b`` likewise with the
    roles swapped.  Orbits alternate the two tables.
    """

    phi_a: np.ndarray  # (K, K, 2) int
    phi_b: np.ndarray

    def __post_init__(self):
        pa = np.asarray(self.phi_a, dtype=int)
        pb = np.asarray(self.phi_b, dtype=int)
        if pa.shape != pb.shape or pa.ndim != 3 or pa.shape[2] != 2 \
                or pa.shape[0] != pa.shape[1]:
            raise DomainError("transition tables must both be K x K x 2")
        k = pa.shape[0]
        for arr in (pa, pb):
            if arr.min() < 0 or arr.max() >= k:
                raise DomainError("successor indices out of range")
        object.__setattr__(self, "phi_a", pa)
        object.__setattr__(self, "phi_b", pb)

    @property
    def k(self) -> int:
        return self.phi_a.shape[0]

    def successor(self, incumbent: int, a: int, b: int) -> tuple[int, int]:
        phi = self.phi_a if incumbent == 0 else self.phi_b
        return int(phi[a, b, 0]), int(phi[a, b, 1])

    def to_json(self) -> dict:
        return {"k": self.k,
                "A": self.phi_a.tolist(),
                "B": self.phi_b.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "TransitionMatrix":
        return cls(np.asarray(obj["A"]), np.asarray(obj["B"]))

    @classmethod
    def load(cls, path: str) -> "TransitionMatrix":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class PayoffTables:
    """Continuation-value matrices induced by a transition policy.

    For seller i (0 = A, 1 = B), all indexed [own price, opponent price]:

    - ``holding[i]``: value when i's algorithm is the fixed one and the
      opponent revises next (the current pair's flow is not included).
    - ``moving[i]``: value when i revises next.
    - ``before_moving[i]``: flow-inclusive value of landing on a pair and
      moving next, (1-beta)*profit + beta*moving.
    - ``before_holding[i]``: flow-inclusive value of landing and holding,
      (1-beta)*profit + beta*holding.
    - ``floor[i]``: the min-max guarantee of seller i when revising,
      max over own price of the min over opponent prices of before_holding.
    - ``punishment[i]``: the response map seller i uses to hold the
      opponent at their floor (entry x = i's price when the opponent
      charges x).
    """

    table: np.ndarray
    beta: float
    holding: tuple[np.ndarray, np.ndarray]
    moving: tuple[np.ndarray, np.ndarray]
    before_moving: tuple[np.ndarray, np.ndarray]
    before_holding: tuple[np.ndarray, np.ndarray]
    floor: tuple[float, float]
    punishment: tuple[tuple[int, ...], tuple[int, ...]]

    @property
    def k(self) -> int:
        return self.table.shape[0]


def _orbit_state_values(phi: TransitionMatrix, table: np.ndarray, beta: float
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-seller values of every (incumbent, pair) state.

    w[x, inc, a, b] is the discounted average payoff of seller x from the
    state where ``inc`` holds the fixed algorithm at pair (a, b), counting
    flows from the next pair onward.  Each orbit enters a cycle within
    2*K^2 steps; values come from the closed-form geometric sum over
    transient plus cycle, not from iteration.
    """
    k = phi.k
    n = 2 * k * k

    def sid(inc, a, b):
        return (inc * k + a) * k + b

    succ = np.empty(n, dtype=int)
    flow = np.empty((2, n))  # flow[x, state] = seller x's payoff at the state's pair
    for inc in range(2):
        for a in range(k):
            for b in range(k):
                s = sid(inc, a, b)
                a2, b2 = phi.successor(inc, a, b)
                succ[s] = sid(1 - inc, a2, b2)
                flow[0, s] = table[a, b]
                flow[1, s] = table[b, a]

    w = np.full((2, n), np.nan)
    one_m = 1.0 - beta
    done = np.zeros(n, dtype=bool)
    for n0 in range(n):
        if done[n0]:
            continue
        path = []
        pos: dict[int, int] = {}
        m = n0
        while not done[m] and m not in pos:
            pos[m] = len(path)
            path.append(m)
            m = succ[m]
        if not done[m]:
            start = pos[m]
            cyc = path[start:]
            length = len(cyc)
            for x in range(2):
                acc = 0.0
                scale = 1.0
                for j in range(length):
                    nxt = cyc[(j + 1) % length]
                    acc += scale * one_m * flow[x, nxt]
                    scale *= beta
                w[x, m] = acc / (1.0 - scale)
            done[m] = True
            for j in range(length - 1, 0, -1):
                c = cyc[j]
                nxt = cyc[(j + 1) % length]
                for x in range(2):
                    w[x, c] = one_m * flow[x, nxt] + beta * w[x, nxt]
                done[c] = True
            tail = path[:start]
        else:
            tail = path
        for c in reversed(tail):
            nxt = succ[c]
            for x in range(2):
                w[x, c] = one_m * flow[x, nxt] + beta * w[x, nxt]
            done[c] = True

    return w.reshape(2, 2, k, k), succ.reshape(2, k, k)


def payoffs_from_transitions(phi: TransitionMatrix, table: np.ndarray,
                             beta: float) -> PayoffTables:
    """Build all continuation-value matrices induced by a transition policy."""
    t = np.asarray(table, dtype=float)
    if t.shape != (phi.k, phi.k):
        raise GridMismatchError("payoff table and transition tables disagree on K")
    if not 0 < beta < 1:
        raise DomainError("need 0 < beta < 1")
    k = phi.k
    w, _ = _orbit_state_values(phi, t, beta)

    # w[x, inc, a, b] -> own-first per-seller matrices
    holding_a = w[0, 0]                # A's value, A incumbent, [a, b]
    moving_a = w[0, 1]                 # A's value, B incumbent
    holding_b = w[1, 1].T              # B own-first: [b, a]
    moving_b = w[1, 0].T

    one_m = 1.0 - beta
    before_moving = (one_m * t + beta * moving_a, one_m * t + beta * moving_b)
    before_holding = (one_m * t + beta * holding_a, one_m * t + beta * holding_b)

    floors = []
    punishments = []
    for i in (0, 1):
        u = before_holding[i]  # victim i's flow-inclusive holding values
        mins = np.empty(k)
        punish = []
        for x in range(k):
            row = u[x]
            m = row.min()
            ties = [y for y in range(k) if row[y] <= m + 1e-12]
            # worst-case semantics: lowest victim flow first, then lowest index
            ties.sort(key=lambda y: (t[x, y], y))
            punish.append(ties[0])
            mins[x] = m
        floors.append(float(mins.max()))
        punishments.append(tuple(punish))

    # punishment[i] is used BY seller i against the opponent; the map built
    # above is indexed by the victim, so swap.
    return PayoffTables(
        table=t, beta=beta,
        holding=(holding_a, holding_b),
        moving=(moving_a, moving_b),
        before_moving=before_moving,
        before_holding=before_holding,
        floor=(floors[0], floors[1]),
        punishment=(punishments[1], punishments[0]),
    )


def _check_identities(tables: PayoffTables, phi: TransitionMatrix) -> None:
    """The defining identities must hold to near machine precision."""
    t, beta = tables.table, tables.beta
    k = tables.k
    for i in (0, 1):
        lhs_v = tables.before_moving[i] - ((1 - beta) * t + beta * tables.moving[i])
        lhs_u = tables.before_holding[i] - ((1 - beta) * t + beta * tables.holding[i])
        if np.max(np.abs(lhs_v)) > _EXACT_TOL or np.max(np.abs(lhs_u)) > _EXACT_TOL:
            raise InternalConsistencyError("flow-inclusive identities violated")
    for inc in range(2):
        for a in range(k):
            for b in range(k):
                a2, b2 = phi.successor(inc, a, b)
                for x in range(2):
                    own, opp = (a, b) if x == 0 else (b, a)
                    own2, opp2 = (a2, b2) if x == 0 else (b2, a2)
                    if x == inc:
                        got = tables.holding[x][own, opp]
                        want = tables.before_moving[x][own2, opp2]
                    else:
                        got = tables.moving[x][own, opp]
                        want = tables.before_holding[x][own2, opp2]
                    if abs(got - want) > _EXACT_TOL:
                        raise InternalConsistencyError(
                            f"state ({inc},{a},{b}) value does not match its successor")


def feasible_transition(tables: PayoffTables, incumbent: int,
                        pair: tuple[int, int], successor: tuple[int, int],
                        margin: float = DEFAULT_MARGIN) -> bool:
    """Would the revising seller accept this move?

    ``pair`` and ``successor`` are global (A, B) pairs; the reviser is the
    non-incumbent.  The move must keep the reviser at or above their
    min-max floor, at or above the value of keeping their current
    algorithm, and must change the reviser's price unless the pair is
    unchanged (the incumbent's fixed algorithm pins their own price
    otherwise).
    """
    rev = 1 - incumbent
    a, b = pair
    a2, b2 = successor
    own, opp = (a, b) if rev == 0 else (b, a)
    own2, opp2 = (a2, b2) if rev == 0 else (b2, a2)
    u = tables.before_holding[rev]
    if (a2, b2) != (a, b) and own2 == own:
        return False
    if u[own2, opp2] < tables.floor[rev] - margin:
        return False
    if u[own2, opp2] < u[own, opp] - margin:
        return False
    return True


@dataclass
class VerificationReport:
    """Outcome of verifying a transition policy as an equilibrium."""

    beta: float
    feasible: np.ndarray   # (2, K, K) bool, [incumbent, a, b]
    optimal: np.ndarray    # (2, K, K) bool
    both_above_competitive: bool
    one_eventually_near_monopoly: bool
    violated_constraints: list[str] = field(default_factory=list)

    @property
    def confirmed(self) -> bool:
        return (bool(self.feasible.all()) and bool(self.optimal.all())
                and self.both_above_competitive
                and self.one_eventually_near_monopoly)

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "confirmed": bool(self.confirmed),
            "feasible": self.feasible.tolist(),
            "optimal": self.optimal.tolist(),
            "both_above_competitive": bool(self.both_above_competitive),
            "one_eventually_near_monopoly": bool(self.one_eventually_near_monopoly),
            "violated_constraints": self.violated_constraints,
        }


def orbit_values(phi: TransitionMatrix, tables: PayoffTables,
                 start: tuple[int, int], incumbent: int
                 ) -> tuple[list[tuple[int, int]], list[int],
                            list[float], list[float], int]:
    """Pairs, incumbents and per-seller values along a revision orbit.

    Returns (pairs, incumbents, values_a, values_b, cycle_start): the orbit
    from ``start`` with ``incumbent`` holding first, followed until the
    (incumbent, pair) state repeats; ``cycle_start`` indexes the first
    state of the eventual cycle.
    """
    k = tables.k
    pairs = []
    incs = []
    va = []
    vb = []
    seen: dict[tuple[int, int, int], int] = {}
    inc, (a, b) = incumbent, start
    while (inc, a, b) not in seen:
        seen[(inc, a, b)] = len(pairs)
        pairs.append((a, b))
        incs.append(inc)
        if inc == 0:
            va.append(float(tables.holding[0][a, b]))
            vb.append(float(tables.moving[1][b, a]))
        else:
            va.append(float(tables.moving[0][a, b]))
            vb.append(float(tables.holding[1][b, a]))
        a, b = phi.successor(inc, a, b)
        inc = 1 - inc
    return pairs, incs, va, vb, seen[(inc, a, b)]


def check_collusion_bounds(values_a: list[float], values_b: list[float],
                           cycle_start: int, table: np.ndarray, beta: float,
                           margin: float = DEFAULT_MARGIN,
                           skip_initial_holding: int | None = None
                           ) -> tuple[bool, bool]:
    """Bounds every verified equilibrium value path must satisfy.

    Flag 1: both sellers' continuation values stay at or above the
    competitive payoff (the initial holding value, index
    ``skip_initial_holding`` if given, is exempt: only on-path values are
    claimed).  Flag 2: from some epoch on, at least one seller's values
    stay at or above (1-beta)*profit(second-highest pair) +
    beta*profit(monopoly pair); decided on the eventual cycle.
    """
    t = np.asarray(table, dtype=float)
    k = t.shape[0]
    competitive = t[0, 0]
    bound = (1.0 - beta) * t[k - 2, k - 2] + beta * t[k - 1, k - 1]
    flag1 = True
    for series in (values_a, values_b):
        for idx, v in enumerate(series):
            if idx == skip_initial_holding:
                continue
            if v < competitive - margin:
                flag1 = False
    tail_a = max(values_a[cycle_start:])
    tail_b = max(values_b[cycle_start:])
    flag2 = bool(tail_a >= bound - margin or tail_b >= bound - margin)
    return flag1, flag2


def verify_equilibrium(phi: TransitionMatrix, table: np.ndarray, beta: float,
                       margin: float = DEFAULT_MARGIN) -> VerificationReport:
    """Verify a transition policy: reviser-feasible and incumbent-optimal.

    For every incumbent and pair, the prescribed successor must be
    feasible for the reviser and attain the maximum of the incumbent's
    flow-inclusive landing value over all feasible successors (ties within
    ``margin`` must be won under the opponent-preferred resolution).  Both
    first movers are covered since every (incumbent, pair) state is
    checked.  The collusion-bound flags are evaluated on all orbits.
    """
    t = np.asarray(table, dtype=float)
    tables = payoffs_from_transitions(phi, t, beta)
    _check_identities(tables, phi)
    k = tables.k
    feasible = np.zeros((2, k, k), dtype=bool)
    optimal = np.zeros((2, k, k), dtype=bool)
    violated: list[str] = []

    for inc in range(2):
        for a in range(k):
            for b in range(k):
                pair = (a, b)
                succ = phi.successor(inc, a, b)
                ok_f = feasible_transition(tables, inc, pair, succ, margin)
                feasible[inc, a, b] = ok_f
                if not ok_f:
                    violated.append(f"infeasible: incumbent {'AB'[inc]} at {pair} -> {succ}")

                own_s, opp_s = (succ[0], succ[1]) if inc == 0 else (succ[1], succ[0])
                v_inc = tables.before_moving[inc]
                u_rev = tables.before_holding[1 - inc]
                v_star = v_inc[own_s, opp_s]
                u_star = u_rev[opp_s, own_s]
                ok_o = ok_f
                for a2 in range(k):
                    for b2 in range(k):
                        if not feasible_transition(tables, inc, pair, (a2, b2), margin):
                            continue
                        own2, opp2 = (a2, b2) if inc == 0 else (b2, a2)
                        cand = v_inc[own2, opp2]
                        if cand > v_star + margin:
                            ok_o = False
                            violated.append(
                                f"suboptimal: incumbent {'AB'[inc]} at {pair}: "
                                f"{(a2, b2)} beats prescribed {succ}")
                            break
                        if cand > v_star - margin and u_rev[opp2, own2] > u_star + margin:
                            ok_o = False
                            violated.append(
                                f"tie-break: incumbent {'AB'[inc]} at {pair}: "
                                f"{(a2, b2)} preferred by reviser over {succ}")
                            break
                    if not ok_o:
                        break
                optimal[inc, a, b] = ok_o

    flag1 = True
    flag2 = True
    for inc in range(2):
        for a in range(k):
            for b in range(k):
                _, _, va, vb, cyc = orbit_values(phi, tables, (a, b), inc)
                f1, f2 = check_collusion_bounds(va, vb, cyc, t, beta, margin,
                                                skip_initial_holding=0)
                flag1 = flag1 and f1
                flag2 = flag2 and f2

    return VerificationReport(beta=beta, feasible=feasible, optimal=optimal,
                              both_above_competitive=flag1,
                              one_eventually_near_monopoly=flag2,
                              violated_constraints=violated)


def recover_algorithm(pair: tuple[int, int], successor: tuple[int, int],
                      punishment: tuple[int, ...] | list[int]) -> Algorithm:
    """Algorithm sustaining ``pair`` and steering the reviser to ``successor``.

    Both pairs are (own, opponent) from the incumbent's side.  The map
    sends the opponent's current price to the own current price, the
    successor's opponent price to the successor's own price, and punishes
    everywhere else.
    """
    p, q = pair
    p2, q2 = successor
    responses = list(punishment)
    k = len(responses)
    if not all(0 <= v < k for v in (p, q, p2, q2)):
        raise DomainError("pair indices outside the punishment map's grid")
    if q == q2 and (p, q) != (p2, q2):
        raise InfeasibleSuccessorError(
            "successor keeps the opponent's price but changes the own price")
    responses[q] = p
    responses[q2] = p2
    return Algorithm(tuple(responses))


def first_best(tables: PayoffTables, seller: int,
               margin: float = DEFAULT_MARGIN
               ) -> tuple[tuple[int, int], float]:
    """Best landing pair for ``seller`` that the reviser would accept.

    Maximizes the seller's flow-inclusive landing value subject to the
    opponent staying at or above their floor; ties go to the pair the
    opponent prefers, then to the lexicographically smallest (own, opp).
    The constraint set is never empty (the all-competitive pair keeps the
    opponent at or above the floor).
    """
    v = tables.before_moving[seller]
    u = tables.before_holding[1 - seller]
    k = tables.k
    best = None
    for own in range(k):
        for opp in range(k):
            if u[opp, own] < tables.floor[1 - seller] - margin:
                continue
            key = (v[own, opp], u[opp, own], -own, -opp)
            if best is None or key > best[0]:
                best = (key, (own, opp), float(v[own, opp]))
    if best is None:
        raise DomainError("no feasible landing pair; tables are inconsistent")
    return best[1], best[2]


def second_best(tables: PayoffTables, seller: int,
                q_star: int | None = None,
                margin: float = DEFAULT_MARGIN
                ) -> tuple[tuple[int, int], float] | None:
    """Best feasible landing pair avoiding the first-best opponent price.

    Returns None when every feasible pair has the opponent at ``q_star``
    (then some orbit value already exceeds the monopoly payoff).
    """
    if q_star is None:
        (_, q_star), _ = first_best(tables, seller, margin)
    v = tables.before_moving[seller]
    u = tables.before_holding[1 - seller]
    k = tables.k
    best = None
    for own in range(k):
        for opp in range(k):
            if opp == q_star:
                continue
            if u[opp, own] < tables.floor[1 - seller] - margin:
                continue
            key = (v[own, opp], u[opp, own], -own, -opp)
            if best is None or key > best[0]:
                best = (key, (own, opp), float(v[own, opp]))
    if best is None:
        return None
    return best[1], best[2]
