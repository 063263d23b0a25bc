"""Subgame-perfect payoff sets for the two-price game.

The set of continuation payoffs sustainable when the opponent's prevailing
algorithm is ``s`` satisfies a set-valued fixed-point equation: responding
with ``s'`` maps the payoff set of state ``s'`` through the affine update

    u = (1-beta) * flow_adj(s', s) + beta * v'
    v = (1-beta) * flow_opp(s', s) + beta * u'

and the union over responses is trimmed by the punishment floor
``u_min(s) = max_{s'} min u over the mapped set``.  Starting from full
squares and iterating shrinks monotonically to the answer.  Sets are
discretized as boolean rasters with a conservative one-cell-plus-margin
dilation, so the computed sets always contain the true ones (they can be
slightly larger, never smaller).

Flows come from the adjuster-preferred convergent pair of (s', s); cycles
are excluded (responses that can only cycle are not available).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import CyclePolicy
from .errors import DomainError, ExtractionError
from .two_price import ALGO_NAMES, flow_table

# responses are reviewed in this fixed order when tracing sequences
_EXTRACTION_ORDER = (1, 0, 2, 3)  # s_C, s_M, s_T, s_R

_EDGE_TOL = 1e-12


@dataclass
class PayoffSet:
    """Per-state boolean rasters over the square of feasible payoffs."""

    lo: float
    hi: float
    resolution: int
    eps_cells: float
    masks: np.ndarray  # (4, R, R) bool, [state, u-cell, v-cell]
    iterations: int = 0
    converged: bool = True

    @property
    def cell(self) -> float:
        return (self.hi - self.lo) / self.resolution

    def copy(self) -> "PayoffSet":
        return PayoffSet(self.lo, self.hi, self.resolution, self.eps_cells,
                         self.masks.copy(), self.iterations, self.converged)

    def contains(self, state: int, u: float, v: float,
                 slack_cells: float | None = None) -> bool:
        """Point membership with a tolerance of ``slack_cells`` cells."""
        if slack_cells is None:
            slack_cells = self.eps_cells + 1.0
        w = self.cell
        iu = (u - self.lo) / w
        iv = (v - self.lo) / w
        r = self.resolution
        lo_u = max(int(np.floor(iu - slack_cells)), 0)
        hi_u = min(int(np.ceil(iu + slack_cells)), r)
        lo_v = max(int(np.floor(iv - slack_cells)), 0)
        hi_v = min(int(np.ceil(iv + slack_cells)), r)
        if lo_u >= hi_u or lo_v >= hi_v:
            return False
        return bool(self.masks[state, lo_u:hi_u, lo_v:hi_v].any())

    def min_payoffs(self, state: int) -> tuple[float, float] | None:
        """Lower edges of the smallest occupied u and v cells, or None."""
        mask = self.masks[state]
        if not mask.any():
            return None
        iu = int(np.argmax(mask.any(axis=1)))
        iv = int(np.argmax(mask.any(axis=0)))
        return self.lo + iu * self.cell, self.lo + iv * self.cell

    def to_json(self) -> dict:
        states = {}
        for s in range(4):
            flat = self.masks[s].ravel()
            runs = []
            current = False
            count = 0
            for val in flat:
                if bool(val) == current:
                    count += 1
                else:
                    runs.append(count)
                    current = not current
                    count = 1
            runs.append(count)
            states[ALGO_NAMES[s]] = {"rle": runs, "cells": int(flat.sum())}
        return {
            "bounds": [self.lo, self.hi],
            "resolution": self.resolution,
            "eps_cells": self.eps_cells,
            "iterations": self.iterations,
            "converged": self.converged,
            "rle_convention": "row-major u-major runs, alternating false/true, starting false",
            "states": states,
        }

    def save_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    def save_pgm(self, state: int, path: str) -> None:
        """Plain PGM dump of one state's raster (v right, u up)."""
        mask = self.masks[state]
        r = self.resolution
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"P2\n{r} {r}\n255\n")
            for iu in range(r - 1, -1, -1):
                fh.write(" ".join("255" if mask[iu, iv] else "0"
                                  for iv in range(r)) + "\n")


def _full_squares(table: np.ndarray, resolution: int, eps_cells: float) -> PayoffSet:
    t = np.asarray(table, dtype=float)
    lo = float(t.min())
    hi = float(t.max())
    masks = np.ones((4, resolution, resolution), dtype=bool)
    return PayoffSet(lo, hi, resolution, eps_cells, masks)


def _cover_matrix(lo: float, cell: float, resolution: int, offset: float,
                  beta: float, eps: float) -> np.ndarray:
    """Boolean matrix marking target cells hit by mapping each source cell.

    Source cell j covers [lo + j*cell, lo + (j+1)*cell]; its image under
    t -> offset + beta*t, dilated by eps, is intersected against every
    target cell.
    """
    idx = np.arange(resolution)
    src_lo = lo + idx * cell
    src_hi = src_lo + cell
    img_lo = offset + beta * src_lo - eps
    img_hi = offset + beta * src_hi + eps
    cell_lo = lo + idx * cell
    cell_hi = cell_lo + cell
    return ((cell_lo[:, None] <= img_hi[None, :] + _EDGE_TOL)
            & (cell_hi[:, None] >= img_lo[None, :] - _EDGE_TOL))


class _StepContext:
    """Precomputed flows and cover matrices for one (table, beta, raster)."""

    def __init__(self, table: np.ndarray, beta: float, ps: PayoffSet):
        self.beta = beta
        padj, popp, feas = flow_table(table, CyclePolicy.FORBIDDEN)
        self.padj, self.popp, self.feas = padj, popp, feas
        eps = ps.eps_cells * ps.cell
        one_m = 1.0 - beta
        self.cov_u = {}
        self.cov_v = {}
        for r in range(4):
            for s in range(4):
                if not feas[r, s]:
                    continue
                cu = one_m * padj[r, s]
                cv = one_m * popp[r, s]
                self.cov_u[(r, s)] = _cover_matrix(
                    ps.lo, ps.cell, ps.resolution, cu, beta, eps).astype(np.float32)
                self.cov_v[(r, s)] = _cover_matrix(
                    ps.lo, ps.cell, ps.resolution, cv, beta, eps).astype(np.float32)

    def response_image(self, ps: PayoffSet, state: int, resp: int) -> np.ndarray | None:
        """Raster of payoffs from responding ``resp`` at ``state``."""
        if not self.feas[resp, state]:
            return None
        src = ps.masks[resp]
        if not src.any():
            return None
        au = self.cov_u[(resp, state)]
        av = self.cov_v[(resp, state)]
        img = au @ src.T.astype(np.float32) @ av.T
        return img > 0.5


def step(ps: PayoffSet, table: np.ndarray, beta: float,
         context: _StepContext | None = None) -> PayoffSet:
    """One application of the set-valued update, intersected with the input."""
    if context is None:
        context = _StepContext(np.asarray(table, dtype=float), beta, ps)
    out = ps.copy()
    out.iterations = ps.iterations + 1
    for s in range(4):
        images = []
        u_min = None
        for r in range(4):
            img = context.response_image(ps, s, r)
            if img is None or not img.any():
                continue
            iu = int(np.argmax(img.any(axis=1)))
            lo_u = ps.lo + iu * ps.cell
            u_min = lo_u if u_min is None else max(u_min, lo_u)
            images.append(img)
        if not images:
            out.masks[s] = False
            continue
        union = np.logical_or.reduce(images)
        idx = np.arange(ps.resolution)
        cell_hi = ps.lo + (idx + 1) * ps.cell
        union[cell_hi < u_min - _EDGE_TOL, :] = False
        out.masks[s] = union & ps.masks[s]
    return out


def solve(table: np.ndarray, beta: float, resolution: int = 200,
          eps_cells: float = 1.0, max_iter: int = 500) -> PayoffSet:
    """Iterate from full squares until the rasters stop changing.

    The rasters shrink monotonically, so termination at a fixed resolution
    is guaranteed; ``converged`` is False when ``max_iter`` was hit first.
    """
    if resolution < 50:
        raise DomainError("resolution must be at least 50")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    if not 0 < beta < 1:
        raise DomainError("need 0 < beta < 1")
    t = np.asarray(table, dtype=float)
    ps = _full_squares(t, resolution, eps_cells)
    context = _StepContext(t, beta, ps)
    for _ in range(max_iter):
        nxt = step(ps, t, beta, context)
        if np.array_equal(nxt.masks, ps.masks):
            nxt.converged = True
            return nxt
        ps = nxt
    ps.converged = False
    return ps


def extract_sequence(ps: PayoffSet, table: np.ndarray, beta: float,
                     start_state: int, target: tuple[float, float],
                     max_len: int = 40) -> list[int]:
    """Trace one algorithm sequence supporting ``target`` from ``start_state``.

    At each step the responses are reviewed in the fixed order s_C, s_M,
    s_T, s_R and the first one whose mapped image covers the running
    payoff target is taken; the target is then pulled back through the
    affine update and re-anchored to the raster (the pullback of a covered
    cell lies within (1 + eps)/beta + 1 cells of an occupied source cell,
    so a converged set always continues).  Returns algorithm indices
    starting with ``start_state`` itself.
    """
    t = np.asarray(table, dtype=float)
    context = _StepContext(t, beta, ps)
    u, v = float(target[0]), float(target[1])
    if not ps.contains(start_state, u, v):
        raise ExtractionError(f"target {target} is not in the payoff set of "
                              f"{ALGO_NAMES[start_state]}")
    snap_radius = ((1.0 + ps.eps_cells) / beta + 1.5) * ps.cell

    def anchor(state: int, u: float, v: float) -> tuple[int, int, float, float]:
        """Cell of (u, v), snapped to the nearest occupied cell if needed."""
        r = ps.resolution
        a = min(max(int((u - ps.lo) / ps.cell), 0), r - 1)
        b = min(max(int((v - ps.lo) / ps.cell), 0), r - 1)
        if ps.masks[state, a, b]:
            return a, b, u, v
        iu, iv = np.nonzero(ps.masks[state])
        if len(iu) == 0:
            raise ExtractionError(f"payoff set of {ALGO_NAMES[state]} is empty")
        cu = ps.lo + (iu + 0.5) * ps.cell
        cv = ps.lo + (iv + 0.5) * ps.cell
        dist = np.hypot(cu - u, cv - v)
        j = int(np.argmin(dist))
        if dist[j] > snap_radius:
            raise ExtractionError(
                "target drifted off the payoff set; raster margin too coarse")
        return int(iu[j]), int(iv[j]), float(cu[j]), float(cv[j])

    seq = [start_state]
    state = start_state
    one_m = 1.0 - beta
    while len(seq) < max_len:
        a, b, u, v = anchor(state, u, v)
        advanced = False
        for r in _EXTRACTION_ORDER:
            if not context.feas[r, state]:
                continue
            src = ps.masks[r]
            if not src.any():
                continue
            au = context.cov_u[(r, state)][a, :]
            av = context.cov_v[(r, state)][b, :]
            if float(au @ src.T.astype(np.float32) @ av) <= 0.5:
                continue
            cu = one_m * context.padj[r, state]
            cv = one_m * context.popp[r, state]
            u, v = (v - cv) / beta, (u - cu) / beta
            seq.append(r)
            state = r
            advanced = True
            break
        if not advanced:
            raise ExtractionError(
                "no response continues the target; raster margin too coarse")
    return seq


def raster_hausdorff(ps_a: PayoffSet, ps_b: PayoffSet, state: int) -> float:
    """Symmetric Hausdorff distance between two rasters, in payoff units.

    Works across resolutions (cell centers are compared), so it measures
    how much a refinement moved a state's set.
    """
    from scipy.spatial import cKDTree

    pts = []
    for ps in (ps_a, ps_b):
        iu, iv = np.nonzero(ps.masks[state])
        pts.append(np.column_stack([ps.lo + (iu + 0.5) * ps.cell,
                                    ps.lo + (iv + 0.5) * ps.cell]))
    a, b = pts
    if len(a) == 0 or len(b) == 0:
        return 0.0 if len(a) == len(b) else float("inf")
    d_ab = cKDTree(b).query(a)[0].max()
    d_ba = cKDTree(a).query(b)[0].max()
    return float(max(d_ab, d_ba))
