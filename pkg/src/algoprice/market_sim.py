"""Continuous-time market simulation validating the repeated-game reduction.

Customers arrive at Poisson rate ``lambda_`` and buy one unit; algorithm
revision opportunities arrive at Poisson rate ``mu`` and go to the seller
who was not the last to adjust; prices move on a tick grid of width ``dt``.
Discounted payoffs, normalized by ``lambda_/r``, should reproduce the
discrete-time recursion with effective discount factor ``mu/(r+mu)``, and
the finite-tick discount factor converges to it as ``dt`` shrinks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import two_price
from .dynamics import Algorithm, select_pair
from .errors import CycleForbiddenError, DomainError
from .multi_price import TransitionMatrix, payoffs_from_transitions, recover_algorithm


def effective_beta(mu: float, r: float) -> float:
    """Weight on continuation payoffs at revision epochs: mu / (r + mu)."""
    if mu <= 0 or r <= 0:
        raise DomainError("rates must be positive")
    return mu / (r + mu)


def effective_beta_discrete(mu: float, r: float, dt: float) -> float:
    """Finite-tick effective discount factor.

    (1 - exp(-mu dt)) / (1 - exp(-(mu+r) dt)); decreases to
    ``effective_beta(mu, r)`` as dt -> 0 and approaches 1 as dt grows.
    """
    if mu <= 0 or r <= 0 or dt <= 0:
        raise DomainError("rates and dt must be positive")
    return -math.expm1(-mu * dt) / -math.expm1(-(mu + r) * dt)


def experimentation_bound(k: int, dt: float, r: float, lambda_: float,
                          d_pi_max: float) -> float:
    """Largest payoff sacrifice from a k-tick price-experimentation phase.

    (lambda/r) * (1 - exp(-r k dt)) * d_pi_max; increasing in k and dt and
    vanishing as dt -> 0, so learning the opponent's algorithm is cheap.
    """
    if k < 0:
        raise DomainError("k must be nonnegative")
    if dt <= 0 or r <= 0 or lambda_ <= 0:
        raise DomainError("rates and dt must be positive")
    return (lambda_ / r) * -math.expm1(-r * k * dt) * d_pi_max


@dataclass(frozen=True)
class SimConfig:
    """Market and simulation parameters."""

    lambda_: float
    mu: float
    r: float
    dt: float
    horizon: float
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda_", "mu", "r", "dt", "horizon"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.dt * (self.r + self.mu) > 0.1:
            warnings.warn("dt*(r+mu) is not small; the reduction to the "
                          "discrete-time game degrades in this regime",
                          stacklevel=2)

    @property
    def beta(self) -> float:
        return effective_beta(self.mu, self.r)


@dataclass(frozen=True)
class Epoch:
    """One algorithm adjustment in a deterministic schedule."""

    adjuster: int                 # 0 = A, 1 = B
    algorithm: Algorithm          # the adjuster's new algorithm
    declared: tuple[int, ...] = ()  # own prices imposed on the first ticks


def _epoch_path(sa: Algorithm, sb: Algorithm, prices: tuple[int, int],
                adjuster: int, declared: tuple[int, ...]
                ) -> list[tuple[int, int]]:
    """Tick-by-tick pairs of one epoch, ending at the convergent fixed pair.

    Raises CycleForbiddenError when the algorithm pair cycles from the
    reached prices (cycles are ruled out in this model).
    """
    k = sa.k
    limit = len(declared) + k * k + 2
    a, b = prices
    path = []
    for t in range(limit):
        if t >= len(declared) and sa(b) == a and sb(a) == b:
            return path
        if t < len(declared):
            if adjuster == 0:
                a, b = declared[t], sb(a)
            else:
                a, b = sa(b), declared[t]
        else:
            a, b = sa(b), sb(a)
        path.append((a, b))
    raise CycleForbiddenError("the schedule produces a price cycle")


@dataclass
class DiscretePayoffs:
    """Per-epoch flows and values of a deterministic schedule."""

    beta_dt: float
    flows_adjuster: list[float]
    flows_holder: list[float]
    u: list[float]  # adjuster's value at each epoch
    v: list[float]  # non-adjuster's value at each epoch
    transient_lengths: list[int]


def discrete_time_payoffs(initial_algorithms: tuple[Algorithm, Algorithm],
                          initial_prices: tuple[int, int],
                          epochs: list[Epoch], table: np.ndarray,
                          config: SimConfig) -> DiscretePayoffs:
    """Exact tick-weighted payoffs of a deterministic adjustment schedule.

    Within each epoch, flow payoffs are averaged with tick weights
    exp(-(r+mu) i dt), including the pre-convergence transient; the epoch
    values then satisfy the alternating recursion with the finite-tick
    discount factor.  The schedule is treated as ending in an absorbing
    repetition of the last epoch's flows.
    """
    t = np.asarray(table, dtype=float)
    if not epochs:
        raise DomainError("schedule needs at least one epoch")
    sa, sb = initial_algorithms
    prices = initial_prices
    w = math.exp(-(config.r + config.mu) * config.dt)
    flows_adj: list[float] = []
    flows_hold: list[float] = []
    lengths: list[int] = []

    for ep in epochs:
        if ep.adjuster == 0:
            sa = ep.algorithm
        else:
            sb = ep.algorithm
        path = _epoch_path(sa, sb, prices, ep.adjuster, ep.declared)
        final = path[-1] if path else prices
        pi_adj = pi_hold = 0.0
        weight = 1.0
        for (a, b) in path:
            own, opp = (a, b) if ep.adjuster == 0 else (b, a)
            pi_adj += (1.0 - w) * weight * t[own, opp]
            pi_hold += (1.0 - w) * weight * t[opp, own]
            weight *= w
        own, opp = final if ep.adjuster == 0 else (final[1], final[0])
        pi_adj += weight * t[own, opp]
        pi_hold += weight * t[opp, own]
        flows_adj.append(pi_adj)
        flows_hold.append(pi_hold)
        lengths.append(max(len(path) - 1, 0))
        prices = final

    beta_dt = effective_beta_discrete(config.mu, config.r, config.dt)
    n = len(epochs)
    u = [0.0] * n
    v = [0.0] * n
    # absorbing tail: the last epoch's flows repeat forever
    u_inf = (flows_adj[-1] + beta_dt * flows_hold[-1]) * (1 - beta_dt) / (1 - beta_dt ** 2)
    v_inf = (flows_hold[-1] + beta_dt * flows_adj[-1]) * (1 - beta_dt) / (1 - beta_dt ** 2)
    next_u, next_v = u_inf, v_inf
    for k in range(n - 1, -1, -1):
        u[k] = (1 - beta_dt) * flows_adj[k] + beta_dt * next_v
        v[k] = (1 - beta_dt) * flows_hold[k] + beta_dt * next_u
        next_u, next_v = u[k], v[k]
    return DiscretePayoffs(beta_dt, flows_adj, flows_hold, u, v, lengths)


@dataclass
class MonteCarloResult:
    """Empirical normalized payoffs across independent market histories.

    ``u_hat``/``v_hat`` are normalized discounted payoffs measured from the
    first revision epoch for the seller adjusting there and their opponent.
    """

    u_hat: np.ndarray
    v_hat: np.ndarray
    customers: np.ndarray
    revisions: np.ndarray
    seed: int
    truncation_bias: float
    metadata: dict = field(default_factory=dict)

    @property
    def n_runs(self) -> int:
        return len(self.u_hat)

    def summary(self) -> dict:
        def ci(x):
            if len(x) < 2:
                return 0.0
            return 1.96 * float(np.std(x, ddof=1)) / math.sqrt(len(x))

        return {
            "n_runs": self.n_runs,
            "u_mean": float(np.mean(self.u_hat)),
            "u_ci95": ci(self.u_hat),
            "v_mean": float(np.mean(self.v_hat)),
            "v_ci95": ci(self.v_hat),
            "truncation_bias": self.truncation_bias,
            "seed": self.seed,
        }


class _MarkovDriver:
    """Revision behavior driven by a two-price Markov profile."""

    def __init__(self, profile: two_price.MarkovProfile, table: np.ndarray):
        self.profile = profile
        self.table = np.asarray(table, dtype=float)
        if self.table.shape != (2, 2):
            raise DomainError("Markov profiles drive the two-price game only")
        self.algos = list(two_price.ALGORITHMS)
        self.state = [two_price.S_C, two_price.S_C]

    def initial_algorithms(self) -> tuple[Algorithm, Algorithm]:
        return self.algos[self.state[0]], self.algos[self.state[1]]

    def revise(self, who: int, prices: tuple[int, int]
               ) -> tuple[Algorithm, tuple[int, ...]]:
        opp_state = self.state[1 - who]
        resp = (self.profile.fa if who == 0 else self.profile.fb)[opp_state]
        own_algo = self.algos[resp]
        opp_algo = self.algos[opp_state]
        t = self.table

        def val(fp):
            return t[fp.a, fp.b]

        def oval(fp):
            return t[fp.b, fp.a]

        target = select_pair(opp_algo, own_algo, val, oval)
        self.state[who] = resp
        own_now = prices[who]
        opp_now = prices[1 - who]
        if (own_now, opp_now) == (target.a, target.b):
            declared: tuple[int, ...] = ()
        else:
            declared = (target.a, target.a)
        return own_algo, declared


class _TransitionDriver:
    """Revision behavior driven by transition tables over price pairs."""

    def __init__(self, phi: TransitionMatrix, table: np.ndarray, beta: float,
                 initial_pair: tuple[int, int], first_incumbent: int):
        self.phi = phi
        self.tables = payoffs_from_transitions(phi, table, beta)
        self.incumbent = first_incumbent
        self.pair = initial_pair

    def _own_coords(self, who: int, pair: tuple[int, int]) -> tuple[int, int]:
        return (pair[0], pair[1]) if who == 0 else (pair[1], pair[0])

    def _algo_for(self, who: int, pair: tuple[int, int]) -> Algorithm:
        nxt = self.phi.successor(who, *pair)
        return recover_algorithm(self._own_coords(who, pair),
                                 self._own_coords(who, nxt),
                                 self.tables.punishment[who])

    def initial_algorithms(self) -> tuple[Algorithm, Algorithm]:
        stay_a = recover_algorithm(self._own_coords(0, self.pair),
                                   self._own_coords(0, self.pair),
                                   self.tables.punishment[0])
        stay_b = recover_algorithm(self._own_coords(1, self.pair),
                                   self._own_coords(1, self.pair),
                                   self.tables.punishment[1])
        if self.incumbent == 0:
            return self._algo_for(0, self.pair), stay_b
        return stay_a, self._algo_for(1, self.pair)

    def revise(self, who: int, prices: tuple[int, int]
               ) -> tuple[Algorithm, tuple[int, ...]]:
        target = self.phi.successor(self.incumbent, *self.pair)
        self.pair = target
        self.incumbent = who
        algo = self._algo_for(who, target)
        own_target = target[who]
        if prices == target:
            declared: tuple[int, ...] = ()
        else:
            declared = (own_target, own_target)
        return algo, declared


def monte_carlo(profile, table: np.ndarray, config: SimConfig,
                n_runs: int, first_adjuster: int = 0,
                initial_prices: tuple[int, int] = (0, 0),
                initial_pair: tuple[int, int] | None = None
                ) -> MonteCarloResult:
    """Event-driven simulation of the market under a revision policy.

    ``profile`` is either a two-price Markov profile or transition tables
    for a larger grid.  Each run draws its own revision and customer
    processes (seeded reproducibly from ``config.seed`` and the run index)
    and accumulates per-customer expected payoffs with weight
    exp(-r (t - T0)) from the first revision T0 on, normalized by
    lambda/r.  Coinciding event times resolve as revision, then customer,
    then price tick.
    """
    t = np.asarray(table, dtype=float)
    if n_runs < 1:
        raise DomainError("n_runs must be at least 1")
    k = t.shape[0]
    pi_max = float(t.max())
    u_out = np.empty(n_runs)
    v_out = np.empty(n_runs)
    customers_out = np.empty(n_runs, dtype=int)
    revisions_out = np.empty(n_runs, dtype=int)
    worst_bias = 0.0

    for run in range(n_runs):
        rng = np.random.default_rng([config.seed, run])
        if isinstance(profile, TransitionMatrix):
            driver = _TransitionDriver(profile, t, config.beta,
                                       initial_pair or (0, 0), 1 - first_adjuster)
            prices = initial_pair or (0, 0)
        else:
            driver = _MarkovDriver(profile, t)
            prices = initial_prices
        sa, sb = driver.initial_algorithms()

        # revision epochs, alternating adjusters from first_adjuster
        rev_times = []
        time = 0.0
        while True:
            time += rng.exponential(1.0 / config.mu)
            if time >= config.horizon:
                break
            rev_times.append(time)

        seg_times = [0.0]
        seg_pairs = [prices]
        adjuster = first_adjuster
        for idx, tau in enumerate(rev_times):
            algo, declared = driver.revise(adjuster, prices)
            if adjuster == 0:
                sa = algo
            else:
                sb = algo
            next_tau = rev_times[idx + 1] if idx + 1 < len(rev_times) else config.horizon
            tick = (math.floor(tau / config.dt - 1e-12) + 1) * config.dt
            path = _epoch_path(sa, sb, prices, adjuster, declared)
            for step_idx, pair in enumerate(path):
                t_at = tick + step_idx * config.dt
                if t_at >= next_tau or t_at >= config.horizon:
                    break
                if pair != prices:
                    seg_times.append(t_at)
                    seg_pairs.append(pair)
                prices = pair
            adjuster = 1 - adjuster

        if not rev_times:
            raise DomainError("horizon too short: no revision epoch occurred")
        t0 = rev_times[0]

        n_customers = rng.poisson(config.lambda_ * config.horizon)
        times = np.sort(rng.uniform(0.0, config.horizon, size=n_customers))
        seg_t = np.asarray(seg_times)
        pair_a = np.asarray([p[0] for p in seg_pairs])
        pair_b = np.asarray([p[1] for p in seg_pairs])
        idx = np.searchsorted(seg_t, times, side="left") - 1
        idx = np.clip(idx, 0, len(seg_t) - 1)
        active = times >= t0
        weights = np.exp(-config.r * (times[active] - t0))
        a_idx = pair_a[idx[active]]
        b_idx = pair_b[idx[active]]
        scale = config.r / config.lambda_
        ua = float(np.sum(weights * t[a_idx, b_idx]) * scale)
        ub = float(np.sum(weights * t[b_idx, a_idx]) * scale)
        if first_adjuster == 0:
            u_out[run], v_out[run] = ua, ub
        else:
            u_out[run], v_out[run] = ub, ua
        customers_out[run] = n_customers
        revisions_out[run] = len(rev_times)
        worst_bias = max(worst_bias,
                         math.exp(-config.r * (config.horizon - t0)) * pi_max)

    return MonteCarloResult(
        u_hat=u_out, v_hat=v_out, customers=customers_out,
        revisions=revisions_out, seed=config.seed,
        truncation_bias=worst_bias,
        metadata={"generator": "numpy PCG64 seeded [seed, run]",
                  "first_adjuster": first_adjuster})
