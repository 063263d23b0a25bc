"""Equilibrium theory of the two-price game.

Analytic classification of the Markov equilibria by the normalized payoff
parameters (x, y) and the effective discount factor, plus an independent
brute-force enumerator that checks every candidate response profile
against the one-shot-deviation condition.  The enumerator is the oracle
the closed-form classification is tested against.

Canonical algorithm order used everywhere in this module:
index 0 = always-monopoly, 1 = always-competitive, 2 = tit-for-tat,
3 = reverse tit-for-tat.  Price indices: 0 = competitive, 1 = monopoly.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _mpe_kernel_py
from .demand import pd_normalize
from .dynamics import Algorithm, CyclePolicy, cycle_value, reachable_outcomes
from .errors import DomainError

try:
    from . import _mpe_kernel as _compiled_kernel
except ImportError:  # extension not built; pure-Python path
    _compiled_kernel = None

ALGO_NAMES = ("s_M", "s_C", "s_T", "s_R")
ALGORITHMS = (
    Algorithm((1, 1)),  # s_M: always monopoly
    Algorithm((0, 0)),  # s_C: always competitive
    Algorithm((0, 1)),  # s_T: tit-for-tat
    Algorithm((1, 0)),  # s_R: reverse tit-for-tat
)
S_M, S_C, S_T, S_R = 0, 1, 2, 3

_TIE_TOL = 1e-12


def kernel_backend() -> str:
    """Which enumeration kernel is active: 'compiled' or 'pure-python'."""
    if _compiled_kernel is not None and not os.environ.get("ALGOPRICE_PURE_PYTHON"):
        return "compiled"
    return "pure-python"


def _kernel(backend: str | None):
    if backend is None:
        backend = kernel_backend()
    if backend == "compiled":
        if _compiled_kernel is None:
            raise DomainError("compiled kernel is not available")
        return _compiled_kernel
    if backend in ("pure-python", "pure"):
        return _mpe_kernel_py
    raise DomainError(f"unknown kernel backend {backend!r}")


class EquilibriumType(enum.Enum):
    """The families of Markov equilibria of the two-price game."""

    TYPE_I = "TypeI"          # relent to s_C then coordinate on tit-for-tat
    TYPE_II = "TypeII"        # undercut constant opponents once, then tit-for-tat
    TYPE_III = "TypeIII"      # mutual reverse tit-for-tat, alternating prices
    TYPE_I_PRIME = "TypeIPrime"  # jump straight to tit-for-tat from s_R

    @property
    def label(self) -> str:
        return self.value


@dataclass(frozen=True)
class OutcomeDescriptor:
    """Long-run price behavior of an equilibrium family."""

    kind: str  # "monopoly" | "alternating"
    pairs: tuple[tuple[int, int], ...]

    def describe(self) -> str:
        if self.kind == "monopoly":
            return "monopoly (p_M,p_M)"
        return "alternating (p_C,p_M) <-> (p_M,p_C)"


def _validate_params(x: float, y: float, beta: float) -> None:
    if not (x > 0 and y > 0 and y > x - 1):
        raise DomainError("need x > 0, y > 0 and y > x - 1")
    if not 0 < beta < 1:
        raise DomainError("need 0 < beta < 1")


def classify_mpe(x: float, y: float, beta: float,
                 policy: CyclePolicy = CyclePolicy.FORBIDDEN
                 ) -> frozenset[EquilibriumType]:
    """Equilibrium families possible at (x, y, beta) under a cycle policy.

    With cycles forbidden or valued at the minimum price: type I alone when
    x <= beta, type II when x > beta plus type III exactly when
    y < beta * (x - beta).  Valuing cycles at the average payoff splits the
    x <= beta region along y = 4*beta - 2 - 3*x into type I above and
    type I' below (both on the boundary); the x > beta region is unchanged.
    """
    _validate_params(x, y, beta)
    found: set[EquilibriumType] = set()
    if x <= beta:
        if policy is CyclePolicy.AVERAGE_PAYOFF:
            threshold = 4.0 * beta - 2.0 - 3.0 * x
            if y >= threshold:
                found.add(EquilibriumType.TYPE_I)
            if y <= threshold:
                found.add(EquilibriumType.TYPE_I_PRIME)
        else:
            found.add(EquilibriumType.TYPE_I)
    else:
        found.add(EquilibriumType.TYPE_II)
        if y < beta * (x - beta):
            found.add(EquilibriumType.TYPE_III)
    return frozenset(found)


def outcome_of(eq_type: EquilibriumType) -> OutcomeDescriptor:
    """Long-run prices: monopoly forever except type III, which alternates."""
    if eq_type is EquilibriumType.TYPE_III:
        return OutcomeDescriptor("alternating", ((0, 1), (1, 0)))
    return OutcomeDescriptor("monopoly", ((1, 1),))


def type3_beta_window(x: float, y: float) -> tuple[float, float] | None:
    """Discount factors admitting a type III equilibrium, if any.

    The window (x/2 - sqrt(x^2/4 - y), x/2 + sqrt(x^2/4 - y)) intersected
    with (0, 1); it exists only when x < 2 and y < x^2/4.
    """
    if x <= 0 or y <= 0:
        raise DomainError("need x > 0 and y > 0")
    if x >= 2 or y >= x * x / 4.0:
        return None
    half_width = math.sqrt(x * x / 4.0 - y)
    lo = max(x / 2.0 - half_width, 0.0)
    hi = min(x / 2.0 + half_width, 1.0)
    if not lo < hi:
        return None
    return lo, hi


def monopoly_unique_sufficient(x: float, y: float) -> bool:
    """True iff y > x, which rules out alternating equilibria at every beta."""
    if x <= 0 or y <= 0:
        raise DomainError("need x > 0 and y > 0")
    return y > x


def flow_table(table: np.ndarray, policy: CyclePolicy
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-(response, state) convergent flows after the adjuster's steering.

    Entry [r, s] is the flow payoff pair when the adjuster installs
    algorithm r against prevailing algorithm s: the adjuster steers to the
    reachable outcome they prefer (highest own flow, opponent-preferred on
    ties, fixed pairs over equally valued cycles).  Under the forbidden
    policy, cycle-only combinations are marked infeasible.

    Returns (padj, popp, feasible): adjuster flows, opponent flows, and the
    feasibility mask, each indexed [response, state].
    """
    t = np.asarray(table, dtype=float)
    padj = np.zeros((4, 4))
    popp = np.zeros((4, 4))
    feas = np.zeros((4, 4), dtype=bool)
    for r in range(4):
        for s in range(4):
            own, opp = ALGORITHMS[r], ALGORITHMS[s]
            pairs, cycles = reachable_outcomes(own, opp)
            candidates = []
            for fp in pairs:
                candidates.append((t[fp.a, fp.b], t[fp.b, fp.a], 1, -fp.a))
            if policy is not CyclePolicy.FORBIDDEN:
                for cyc in cycles:
                    va, vb = cycle_value(cyc, t, policy)
                    candidates.append((va, vb, 0, -own.k))
            if not candidates:
                continue
            adj, opp_v, _, _ = max(candidates)
            padj[r, s] = adj
            popp[r, s] = opp_v
            feas[r, s] = True
    return padj, popp, feas


@dataclass(frozen=True)
class MarkovProfile:
    """One candidate pair of response functions over the four states.

    ``fa[s]`` / ``fb[s]`` is the algorithm index the seller installs when
    the opponent's prevailing algorithm is ``s`` (canonical order
    s_M, s_C, s_T, s_R).
    """

    fa: tuple[int, int, int, int]
    fb: tuple[int, int, int, int]

    def named(self) -> dict[str, dict[str, str]]:
        return {
            "A": {ALGO_NAMES[s]: ALGO_NAMES[self.fa[s]] for s in range(4)},
            "B": {ALGO_NAMES[s]: ALGO_NAMES[self.fb[s]] for s in range(4)},
        }

    def has_type3_shape(self) -> bool:
        return self.fa[S_R] == S_R and self.fb[S_R] == S_R


def profile_values(profile: MarkovProfile, table: np.ndarray, beta: float,
                   policy: CyclePolicy = CyclePolicy.FORBIDDEN
                   ) -> tuple[list[float], list[float]]:
    """Exact node values (adjuster, non-adjuster) of a profile.

    Node ``i*4 + s``: seller A adjusts for i = 0, seller B for i = 1, with
    the opponent's prevailing algorithm ``s``.
    """
    padj, popp, feas = flow_table(table, policy)
    for i, f in enumerate((profile.fa, profile.fb)):
        for s in range(4):
            if not feas[f[s], s]:
                raise DomainError(f"profile response {ALGO_NAMES[f[s]]} to "
                                  f"{ALGO_NAMES[s]} is infeasible under {policy.value}")
    return _mpe_kernel_py.profile_values(profile.fa, profile.fb,
                                         padj.tolist(), popp.tolist(), beta)


def enumerate_mpe(table: np.ndarray, beta: float,
                  policy: CyclePolicy = CyclePolicy.FORBIDDEN,
                  tol: float = _TIE_TOL,
                  backend: str | None = None) -> list[MarkovProfile]:
    """Brute-force search over all candidate Markov profiles.

    Every joint profile over the policy-feasible responses is evaluated
    exactly and kept when each node's prescribed response maximizes the
    adjuster's value, with ties resolved in the opponent's favor.  This is
    the independent oracle for :func:`classify_mpe`.
    """
    pd_normalize(table)  # validates the payoff structure
    if not 0 < beta < 1:
        raise DomainError("need 0 < beta < 1")
    padj, popp, feas = flow_table(table, policy)
    allowed = [[r for r in range(4) if feas[r, s]] for s in range(4)]
    import itertools

    pool = [f for f in itertools.product(range(4), repeat=4)
            if all(f[s] in allowed[s] for s in range(4))]
    kern = _kernel(backend)
    out_a, out_b = kern.enumerate_survivors(
        padj.tolist(), popp.tolist(), feas.astype(np.uint8).tolist(),
        float(beta), float(tol), pool, pool)
    return [MarkovProfile(pool[ia], pool[ib]) for ia, ib in zip(out_a, out_b)]


_CODE_I, _CODE_II, _CODE_II_III, _CODE_I_PRIME = 1, 2, 3, 4


def scan_region(beta: float, x_max: float = 3.0, y_max: float = 3.0,
                resolution: int = 400,
                policy: CyclePolicy = CyclePolicy.FORBIDDEN) -> np.ndarray:
    """Classification raster over cell centers of (0, x_max] x (0, y_max].

    Entry [iy, ix] encodes the classification at the cell center:
    1 = type I only, 2 = type II only, 3 = type II and III,
    4 = type I' possible (average-payoff policy).  The formula is applied
    across the whole rectangle; cells with y <= x - 1 fall outside the
    utilitarian restriction but are still colored by the formula.
    """
    if resolution < 2:
        raise DomainError("resolution must be at least 2")
    if x_max <= 0 or y_max <= 0:
        raise DomainError("ranges must be positive")
    xs = (np.arange(resolution) + 0.5) * (x_max / resolution)
    ys = (np.arange(resolution) + 0.5) * (y_max / resolution)
    x, y = np.meshgrid(xs, ys)
    high = np.where(y < beta * (x - beta), _CODE_II_III, _CODE_II)
    if policy is CyclePolicy.AVERAGE_PAYOFF:
        low = np.where(y <= 4.0 * beta - 2.0 - 3.0 * x, _CODE_I_PRIME, _CODE_I)
    else:
        low = np.full_like(high, _CODE_I)
    return np.where(x <= beta, low, high).astype(np.int8)


def write_scan_csv(raster: np.ndarray, path: str, beta: float,
                   x_max: float, y_max: float) -> None:
    """Raster rows as CSV with a self-describing comment header."""
    res = raster.shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# two-price equilibrium classification raster\n")
        fh.write(f"# beta = {beta:.10g}; x in (0, {x_max:.10g}], "
                 f"y in (0, {y_max:.10g}]; resolution = {res}\n")
        fh.write("# rows: y ascending (cell centers); columns: x ascending\n")
        fh.write("# codes: 1 = TypeI, 2 = TypeII, 3 = TypeII+III, 4 = TypeIPrime\n")
        for row in raster:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
