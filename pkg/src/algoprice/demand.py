"""Profit models, price grids, regularity checks and demand calibration.

Two parametric profit families are supported (linear demand and discrete
choice) together with explicit payoff tables.  ``profit(p, q)`` is the
expected payoff from one customer for the seller charging ``p`` against an
opponent charging ``q``; marginal costs are normalized to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    CalibrationError,
    DomainError,
    GridMismatchError,
    InvalidPDError,
)

_SPACING_RTOL = 1e-9
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class PriceGrid:
    """Equally spaced price levels from the competitive to the monopoly price.

    ``prices[0]`` is the competitive price, ``prices[-1]`` the monopoly
    price; indices are used everywhere else in the package.
    """

    prices: tuple[float, ...]

    def __post_init__(self):
        prices = tuple(float(p) for p in self.prices)
        object.__setattr__(self, "prices", prices)
        if len(prices) < 2:
            raise DomainError("a price grid needs at least two levels")
        steps = np.diff(prices)
        if np.any(steps <= 0):
            raise DomainError("grid prices must be strictly increasing")
        scale = max(abs(prices[0]), abs(prices[-1]), 1.0)
        if np.max(np.abs(steps - steps[0])) > _SPACING_RTOL * scale:
            raise DomainError("grid prices must be equally spaced")

    @property
    def k(self) -> int:
        return len(self.prices)

    @property
    def delta(self) -> float:
        return self.prices[1] - self.prices[0]

    @property
    def competitive_index(self) -> int:
        return 0

    @property
    def monopoly_index(self) -> int:
        return len(self.prices) - 1

    @classmethod
    def from_bounds(cls, p_competitive: float, p_monopoly: float, k: int) -> "PriceGrid":
        if not p_competitive < p_monopoly:
            raise DomainError("competitive price must be below monopoly price")
        return cls(tuple(np.linspace(p_competitive, p_monopoly, k)))

    def index_of(self, price: float) -> int:
        for i, p in enumerate(self.prices):
            if math.isclose(p, price, rel_tol=1e-9, abs_tol=1e-12):
                return i
        raise DomainError(f"price {price!r} is not on the grid")


@dataclass(frozen=True)
class LinearDemand:
    """Quadratic profit from linear demand: p * (D - p + alpha*(q - p)) / (2D)."""

    d: float
    alpha: float

    def __post_init__(self):
        if self.d <= 0:
            raise DomainError("linear demand needs D > 0")
        if self.alpha < 0:
            raise DomainError("linear demand needs alpha >= 0")

    def profit(self, p: float, q: float) -> float:
        return p * (self.d - p + self.alpha * (q - p)) / (2.0 * self.d)

    def competitive_price(self) -> float:
        # unique symmetric one-shot best-response fixed point
        return self.d / (2.0 + self.alpha)

    def monopoly_price(self) -> float:
        # maximizes the symmetric joint profit p*(D - p)/D
        return self.d / 2.0


@dataclass(frozen=True)
class DiscreteChoiceDemand:
    """Discrete-choice profit: p * exp(-b p) / (a + exp(-b p) + exp(-b q))."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise DomainError("discrete choice needs a > 0 and b > 0")

    def profit(self, p: float, q: float) -> float:
        ep = math.exp(-self.b * p)
        eq = math.exp(-self.b * q)
        return p * ep / (self.a + ep + eq)

    def _nash_foc(self, p: float) -> float:
        # d/dp profit(p, q) at p == q, up to a positive factor
        e = math.exp(-self.b * p)
        return (self.a + 2.0 * e) - self.b * p * (self.a + e)

    def _joint_foc(self, p: float) -> float:
        # d/dp [profit(p, q) + profit(q, p)] at p == q, up to a positive factor
        e = math.exp(-self.b * p)
        return (self.a + 2.0 * e) - self.a * self.b * p

    def competitive_price(self, hint: float = 1.0) -> float:
        return _expanding_brentq(self._nash_foc, hint)

    def monopoly_price(self, hint: float = 1.0) -> float:
        return _expanding_brentq(self._joint_foc, hint)


@dataclass(frozen=True)
class ExplicitMatrix:
    """Payoff table given directly, aligned with its own price grid."""

    table: tuple[tuple[float, ...], ...]
    grid: PriceGrid

    def __post_init__(self):
        arr = np.asarray(self.table, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DomainError("explicit payoff table must be square")
        if arr.shape[0] != self.grid.k:
            raise GridMismatchError(
                f"table is {arr.shape[0]}x{arr.shape[0]} but grid has {self.grid.k} prices")
        if not np.all(np.isfinite(arr)):
            raise DomainError("explicit payoff table must be finite")
        object.__setattr__(self, "table", tuple(tuple(float(x) for x in row) for row in arr))

    def profit(self, p: float, q: float) -> float:
        return self.table[self.grid.index_of(p)][self.grid.index_of(q)]


ProfitModel = LinearDemand | DiscreteChoiceDemand | ExplicitMatrix


def _expanding_brentq(f, hint: float) -> float:
    lo, hi = hint * 1e-6, hint
    flo = f(lo)
    for _ in range(80):
        if flo * f(hi) <= 0:
            return brentq(f, lo, hi, xtol=1e-13, rtol=1e-15)
        hi *= 2.0
    raise DomainError("no first-order-condition root found")


def profit(model: ProfitModel, p: float, q: float) -> float:
    """Expected payoff from one customer for the seller charging p against q."""
    return model.profit(p, q)


def payoff_matrix(model: ProfitModel, grid: PriceGrid) -> np.ndarray:
    """K x K table with entry (i, j) = profit(prices[i], prices[j])."""
    if isinstance(model, ExplicitMatrix) and model.grid.k != grid.k:
        raise GridMismatchError("explicit table grid does not match the requested grid")
    k = grid.k
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = model.profit(grid.prices[i], grid.prices[j])
    return out


@dataclass(frozen=True)
class RegularityReport:
    """Exhaustive finite-grid checks of the standard market assumptions."""

    monotone_in_q: bool
    unique_best_response: bool
    static_nash_at_competitive: bool
    joint_max_at_monopoly: bool
    hull_condition: bool

    @property
    def all_ok(self) -> bool:
        return (self.monotone_in_q and self.unique_best_response
                and self.static_nash_at_competitive and self.joint_max_at_monopoly
                and self.hull_condition)


def regularity_report(table: np.ndarray) -> RegularityReport:
    """Scan a square payoff table for the regularity properties used throughout.

    The flags cover: payoffs weakly increasing in the opponent's price,
    a unique own-price best response that is nondecreasing in the opponent's
    price, the lowest grid pair being the unique one-shot Nash equilibrium,
    the highest pair maximizing joint profit, and the undercutting payoff
    pairs against the top price lying on the hull of the payoff cloud.
    """
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DomainError("payoff table must be square")
    k = t.shape[0]

    monotone = bool(np.all(np.diff(t, axis=1) > -_TIE_TOL))

    unique_br = True
    prev_best = -1
    for j in range(k):
        col = t[:, j]
        order = np.argsort(col)
        best, second = order[-1], order[-2]
        if col[best] - col[second] <= _TIE_TOL:
            unique_br = False
            break
        if best < prev_best:
            unique_br = False
            break
        prev_best = best

    nash = _pure_nash_pairs(t)
    nash_ok = nash == {(0, 0)}

    joint = t + t.T
    jmax = np.unravel_index(np.argmax(joint), joint.shape)
    others = joint[joint < joint[jmax] - _TIE_TOL]
    joint_ok = jmax == (k - 1, k - 1) and others.size == k * k - 1

    hull_ok = _hull_condition(t)

    return RegularityReport(monotone, unique_br, nash_ok, joint_ok, hull_ok)


def _pure_nash_pairs(t: np.ndarray) -> set[tuple[int, int]]:
    k = t.shape[0]
    colmax = t.max(axis=0)
    pairs = set()
    for i in range(k):
        for j in range(k):
            if t[i, j] >= colmax[j] - _TIE_TOL and t[j, i] >= colmax[i] - _TIE_TOL:
                pairs.add((i, j))
    return pairs


def _hull_condition(t: np.ndarray, tol: float = 1e-9) -> bool:
    """Payoff pairs from undercutting the top price must sit on the hull boundary."""
    k = t.shape[0]
    cloud = [(t[i, j], t[j, i]) for i in range(k) for j in range(k)]
    hull = _convex_hull(cloud)
    top = k - 1
    start = int(np.argmax(t[:, top]))
    for i in range(start, k):
        if not _on_hull_boundary((t[i, top], t[top, i]), hull, tol):
            return False
    return True


def _convex_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone-chain convex hull; returns vertices in order (may be degenerate)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _on_hull_boundary(point, hull, tol: float) -> bool:
    if len(hull) == 1:
        return math.dist(point, hull[0]) <= tol
    n = len(hull)
    for idx in range(n if n > 2 else 1):
        a, b = hull[idx], hull[(idx + 1) % n]
        if _segment_distance(point, a, b) <= tol:
            return True
    return False


def _segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0:
        return math.dist(p, a)
    s = ((px - ax) * dx + (py - ay) * dy) / denom
    s = min(1.0, max(0.0, s))
    return math.dist(p, (ax + s * dx, ay + s * dy))


def pd_normalize(table: np.ndarray) -> tuple[float, float]:
    """Normalize a 2x2 prisoner's-dilemma payoff table to the (x, y) form.

    With indices 0 = competitive, 1 = monopoly the normalized game has
    payoffs 1 at (1,1), 0 at (0,0), 1+x for the undercutting seller and -y
    for the undercut one, where

        x = (pi(C,M) - pi(M,M)) / (pi(M,M) - pi(C,C))
        y = (pi(C,C) - pi(M,C)) / (pi(M,M) - pi(C,C))

    Raises InvalidPDError unless pi(M,C) < pi(C,C) < pi(M,M) < pi(C,M)
    and the monopoly pair is jointly superior to the off-diagonal mix.
    """
    t = np.asarray(table, dtype=float)
    if t.shape != (2, 2):
        raise DomainError("normalization needs a 2x2 payoff table")
    cc, cm = t[0, 0], t[0, 1]
    mc, mm = t[1, 0], t[1, 1]
    if not (mc < cc < mm < cm):
        raise InvalidPDError(
            f"payoffs must satisfy pi(M,C) < pi(C,C) < pi(M,M) < pi(C,M); "
            f"got {mc}, {cc}, {mm}, {cm}")
    if not 2 * mm > cm + mc:
        raise InvalidPDError("monopoly pair must jointly dominate the off-diagonal mix")
    span = mm - cc
    return (cm - mm) / span, (cc - mc) / span


def normalized_table(x: float, y: float) -> np.ndarray:
    """The 2x2 table with payoffs 0/1 on the diagonal and 1+x / -y off it."""
    if x <= 0 or y <= 0 or y <= x - 1:
        raise InvalidPDError("need x > 0, y > 0 and y > x - 1")
    return np.array([[0.0, 1.0 + x], [-y, 1.0]])


def calibrate_discrete_choice(
    target_pc: float,
    target_pm: float,
    b_bounds: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """Find (a, b) so the discrete-choice market has the requested prices.

    The symmetric one-shot first-order condition must hold at ``target_pc``
    and the symmetric joint-profit first-order condition at ``target_pm``.
    The joint condition is solved in closed form, a(b) = 2 exp(-b pM) /
    (b pM - 1), and the remaining one-dimensional root in b is bracketed by
    a scan over (1/pM, 512/pC] and polished with Brent's method.  Both
    residuals are verified below 1e-9.
    """
    if not 0 < target_pc < target_pm:
        raise DomainError("need 0 < competitive price < monopoly price")

    def a_of_b(b: float) -> float:
        return 2.0 * math.exp(-b * target_pm) / (b * target_pm - 1.0)

    def nash_residual(b: float) -> float:
        a = a_of_b(b)
        e = math.exp(-b * target_pc)
        return (a + 2.0 * e) - b * target_pc * (a + e)

    lo_default = (1.0 + 1e-9) / target_pm
    if b_bounds is None:
        b_lo, b_hi = lo_default, 512.0 / target_pc
    else:
        b_lo, b_hi = b_bounds
        b_lo = max(b_lo, lo_default)
    if not b_lo < b_hi:
        raise CalibrationError("empty search interval for b")

    grid = np.geomspace(b_lo, b_hi, 256)
    res = [nash_residual(b) for b in grid]
    bracket = None
    for i in range(len(grid) - 1):
        if res[i] == 0.0 or res[i] * res[i + 1] < 0:
            bracket = (grid[i], grid[i + 1])
            break
    if bracket is None:
        best = int(np.argmin(np.abs(res)))
        raise CalibrationError(
            "no sign change of the one-shot first-order condition in the search box",
            residuals={"b": float(grid[best]), "nash_foc": float(res[best])})

    b = brentq(nash_residual, bracket[0], bracket[1], xtol=1e-15, rtol=8.9e-16)
    a = a_of_b(b)
    model = DiscreteChoiceDemand(a, b)
    r_nash = model._nash_foc(target_pc)
    r_joint = model._joint_foc(target_pm)
    if abs(r_nash) > 1e-9 or abs(r_joint) > 1e-9:
        raise CalibrationError(
            "calibration residuals above tolerance",
            residuals={"nash_foc": r_nash, "joint_foc": r_joint})
    return a, b


def load_model_file(path: str) -> tuple[ProfitModel, PriceGrid]:
    """Read a flat key-value model descriptor and build (model, grid).

    Format: one ``key = value`` pair per line, ``#`` comments.  Keys:
    ``model`` (linear | discrete_choice | matrix), the model parameters
    (``d``/``alpha`` or ``a``/``b``), and ``grid_min``/``grid_max``/``k``.
    The matrix variant embeds K lines ``row_0`` .. ``row_{K-1}`` of K
    decimals each (own price index ascending).
    """
    kv: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise DomainError(f"bad model descriptor line: {raw!r}")
            key, value = line.split("=", 1)
            kv[key.strip().lower()] = value.strip()

    kind = kv.get("model")
    if kind is None:
        raise DomainError("model descriptor is missing the 'model' key")
    k = int(kv.get("k", "2"))
    grid = PriceGrid.from_bounds(float(kv["grid_min"]), float(kv["grid_max"]), k)
    if kind == "linear":
        return LinearDemand(float(kv["d"]), float(kv["alpha"])), grid
    if kind == "discrete_choice":
        return DiscreteChoiceDemand(float(kv["a"]), float(kv["b"])), grid
    if kind == "matrix":
        rows = []
        for i in range(k):
            cell = kv.get(f"row_{i}")
            if cell is None:
                raise DomainError(f"matrix descriptor is missing row_{i}")
            rows.append(tuple(float(x) for x in cell.replace(",", " ").split()))
        return ExplicitMatrix(tuple(rows), grid), grid
    raise DomainError(f"unknown model kind {kind!r}")
