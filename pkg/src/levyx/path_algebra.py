"""Deterministic path operators on the grid skeleton.

Everything here is exact for the skeleton: reversal, stopping, shifting,
running extrema, passage times, extremum times and pre/post extremum splits.
The +infinity sentinel for empty passage sets is ``math.inf`` and every
consumer must branch on it explicitly.

Within a cell that carries both a continuous increment and jumps, the order
of the two is unresolved by the grid.  Extremum and crossing scans therefore
use a symmetric *envelope* of candidate values: for cell k with grid values
v_k -> v_{k+1} and jump sizes d_1..d_m the candidates are

    v_k + sum(d_i, i<=l)          (jumps first)   and
    v_{k+1} - sum(d_i, i>l)       (continuous move first)

for l = 0..m.  The envelope maps onto itself under time reversal, which is
what makes identities like sup(reverse(p)) == p.end - inf(p) hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .simulate import Path

__all__ = ["INFINITE", "Passage", "LastPassage", "SplitPair",
           "reverse_at", "reverse_just_before", "shift", "stop_at",
           "concat", "running_extrema", "first_passage_up",
           "first_passage_down", "last_passage", "extremum_times",
           "split_at_infimum", "split_at_supremum", "event_arrays",
           "eval_at", "eval_left"]

INFINITE = math.inf

_PRE, _POST, _GRID = 0, 1, 2


def _grid_index(path: Path, t: float) -> int | None:
    """Index k with t == k * grid_step up to relative tolerance, else None."""
    h = path.grid_step
    k = int(round(t / h))
    if 0 <= k <= path.n_cells and abs(t - k * h) <= 1e-9 * max(h, abs(t)):
        return k
    return None


def _jump_size_at(path: Path, t: float) -> float:
    return path.jump_at(t)


# ---------------------------------------------------------------------------
# Event machinery
# ---------------------------------------------------------------------------

def event_arrays(path: Path):
    """Canonical ordered event sequence (times, values, kinds).

    Kinds: 0 = pre-jump envelope value, 1 = post-jump value, 2 = grid value.
    At a jump time the pre value precedes the post value; a grid value at the
    same instant comes last.  For jump-free paths this is just the grid.
    """
    h = path.grid_step
    v = path.values
    n = path.n_cells
    g_times = np.arange(n + 1) * h
    if len(path.jump_times) == 0:
        return g_times, v.astype(float, copy=True), \
            np.full(n + 1, _GRID, dtype=np.int8)
    times = [g_times]
    vals = [v]
    kinds = [np.full(n + 1, _GRID, dtype=np.int8)]
    order = [np.full(n + 1, _GRID, dtype=np.int8)]
    cells = path.jump_cells
    jt = path.jump_times
    js = path.jump_sizes
    # Per-cell prefix/suffix sums of jump sizes.
    start = 0
    while start < len(jt):
        stop = start
        c = cells[start]
        while stop < len(jt) and cells[stop] == c:
            stop += 1
        sizes = js[start:stop]
        pref = np.cumsum(sizes)
        post_vals = v[c] + pref                       # jumps-first values
        suff = pref[-1] - pref                        # sum of sizes after l
        pre_vals = v[c + 1] - suff - sizes            # continuous-first values
        t_cell = jt[start:stop]
        times.append(np.concatenate([t_cell, t_cell]))
        vals.append(np.concatenate([pre_vals, post_vals]))
        kinds.append(np.concatenate([
            np.full(stop - start, _PRE, dtype=np.int8),
            np.full(stop - start, _POST, dtype=np.int8)]))
        order.append(kinds[-1])
        start = stop
    times = np.concatenate(times)
    vals = np.concatenate(vals).astype(float)
    kinds = np.concatenate(kinds)
    order = np.concatenate(order)
    idx = np.lexsort((order, times))
    return times[idx], vals[idx], kinds[idx]


def eval_at(path: Path, s: float) -> float:
    """Value of the step-function skeleton at time s (clamped to [0, zeta]);
    within a cell, jumps apply at their exact times from the cell's base."""
    h = path.grid_step
    if s <= 0:
        return path.start
    if s >= path.lifetime - 1e-12 * h:
        return path.end
    k = _grid_index(path, s)
    if k is not None:
        return float(path.values[k])
    k = int(s / h)
    val = float(path.values[k])
    if len(path.jump_times):
        mask = (path.jump_cells == k) & (path.jump_times <= s)
        val += float(path.jump_sizes[mask].sum())
    return val


def eval_left(path: Path, s: float) -> float:
    """Left limit at s; at a recorded jump time this is the pre-jump value,
    at other times it equals :func:`eval_at` (grid values stand for
    continuity points)."""
    if s <= 0:
        return path.start
    return eval_at(path, s) - _jump_size_at(path, s)


# ---------------------------------------------------------------------------
# Reversal / stop / shift
# ---------------------------------------------------------------------------

def _cells_for_times(times: np.ndarray, h: float) -> np.ndarray:
    """Owning cells for jump times under the (k*h, (k+1)*h] convention,
    robust to float noise at grid boundaries."""
    q = times / h
    m = np.round(q)
    on_grid = np.abs(q - m) <= 1e-9 * np.maximum(1.0, np.abs(q))
    return np.where(on_grid, m - 1, np.ceil(q) - 1).astype(np.int64)


def _eval_many(path: Path, s: np.ndarray) -> np.ndarray:
    """Vectorized eval_at over clamped times."""
    h = path.grid_step
    s = np.clip(s, 0.0, path.lifetime)
    k = np.minimum((s / h + 1e-9).astype(np.int64), path.n_cells)
    out = path.values[k].astype(float)
    on_grid = np.abs(s - k * h) <= 1e-9 * np.maximum(h, np.abs(s))
    for t_j, d_j, c_j in zip(path.jump_times, path.jump_sizes,
                             path.jump_cells):
        hit = (~on_grid) & (k == c_j) & (s >= t_j)
        out[hit] += d_j
    return out


def _eval_many_left(path: Path, s: np.ndarray) -> np.ndarray:
    """Vectorized left limits; differs from _eval_many only at jump times."""
    out = _eval_many(path, s)
    for t_j, d_j in zip(path.jump_times, path.jump_sizes):
        at = np.abs(s - t_j) <= 1e-9 * max(path.grid_step, abs(t_j))
        out[at] -= d_j
    return out


def _reflected_jumps(path: Path, t: float):
    """Jump records of the reversed path (times t - s, equal sizes),
    excluding a jump exactly at t (it becomes the start value)."""
    h = path.grid_step
    tol = 1e-9 * max(h, abs(t))
    keep = path.jump_times < t - tol
    times = t - path.jump_times[keep][::-1]
    sizes = path.jump_sizes[keep][::-1]
    return times, sizes, _cells_for_times(times, h)


def reverse_at(path: Path, t: float) -> Path:
    """The path reversed at t: s -> p(t) - p((t-s)-) on [0, t].

    Jumps in (0, t] map to jumps of equal size at reflected times; a jump
    exactly at t shows up as the reversed path's starting value.  When t is
    not grid aligned the result is re-gridded onto the same step (exact at
    event times, endpoint effects below one cell).
    """
    if not -1e-12 <= t <= path.lifetime * (1 + 1e-12):
        raise ValueError("reversal time outside [0, lifetime]")
    h = path.grid_step
    k = _grid_index(path, t)
    times, sizes, cells = _reflected_jumps(path, t)
    if k is not None:
        if k == 0:
            return Path(h, np.array([_jump_size_at(path, t)]))
        end_val = float(path.values[k])
        rev = np.empty(k + 1)
        rev[0] = _jump_size_at(path, t)
        rev[1:] = end_val - path.values[k - 1::-1]
        # Left limits at grid times differ from grid values only where a
        # recorded jump sits exactly on the grid (hand-built paths).
        for t_j, d_j in zip(path.jump_times, path.jump_sizes):
            g = int(round(t_j / h))
            if abs(t_j - g * h) <= 1e-9 * max(h, t_j) and 0 < g < k:
                rev[k - g] += d_j
        keep = (cells >= 0) & (cells <= k - 1)
        return Path(h, rev, times[keep], sizes[keep], cells[keep])
    n_new = max(1, int(round(t / h)))
    end_val = eval_at(path, t)
    rev = np.empty(n_new + 1)
    rev[0] = _jump_size_at(path, t)
    s = t - np.arange(1, n_new + 1) * h
    rev[1:] = end_val - _eval_many_left(path, s)
    keep = (cells >= 0) & (cells <= n_new - 1) & (times <= n_new * h)
    return Path(h, rev, times[keep], sizes[keep], cells[keep])


def reverse_just_before(path: Path, t: float) -> Path:
    """reverse_at minus the constant jump at t: the reversal of the path
    with its terminal jump dropped; starts at 0 and ends at p(t-) - p(0)."""
    delta = _jump_size_at(path, t)
    rev = reverse_at(path, t)
    if delta == 0.0:
        return rev
    return Path(rev.grid_step, rev.values - delta, rev.jump_times,
                rev.jump_sizes, rev.jump_cells)


def stop_at(path: Path, t: float) -> Path:
    """The path stopped at t (lifetime min(t, zeta), re-gridded if needed)."""
    if t >= path.lifetime * (1 - 1e-12):
        return path
    if t < 0:
        raise ValueError("stop time must be nonnegative")
    h = path.grid_step
    k = _grid_index(path, t)
    if k is not None:
        keep = path.jump_cells <= k - 1
        return Path(h, path.values[:k + 1].copy(), path.jump_times[keep],
                    path.jump_sizes[keep], path.jump_cells[keep])
    n_new = max(1, int(round(t / h)))
    vals = np.empty(n_new + 1)
    m = min(n_new, int(t / h))
    vals[:m + 1] = path.values[:m + 1]
    for j in range(m + 1, n_new + 1):
        vals[j] = eval_at(path, min(j * h, t))
    vals[n_new] = eval_at(path, t)
    keep = path.jump_times <= t
    cells = np.minimum(path.jump_cells[keep], n_new - 1)
    return Path(h, vals, path.jump_times[keep], path.jump_sizes[keep], cells)


def shift(path: Path, t: float) -> Path:
    """Re-anchored tail: s -> p(s + t) - p(t) with lifetime zeta - t."""
    if not -1e-12 <= t <= path.lifetime * (1 + 1e-12):
        raise ValueError("shift time outside [0, lifetime]")
    h = path.grid_step
    k = _grid_index(path, t)
    if k is not None:
        base = float(path.values[k])
        keep = path.jump_cells >= k
        return Path(h, path.values[k:] - base, path.jump_times[keep] - k * h,
                    path.jump_sizes[keep], path.jump_cells[keep] - k)
    n_new = max(0, int(round((path.lifetime - t) / h)))
    base = eval_at(path, t)
    vals = _eval_many(path, t + np.arange(n_new + 1) * h) - base
    keep = path.jump_times > t
    times = path.jump_times[keep] - t
    sizes = path.jump_sizes[keep]
    cells = _cells_for_times(times, h)
    ok = (cells >= 0) & (cells <= n_new - 1)
    return Path(h, vals, times[ok], sizes[ok], cells[ok])


def concat(pre: Path, post: Path) -> Path:
    """Concatenate a re-anchored tail back onto a stopped head."""
    if pre.grid_step != post.grid_step:
        raise ValueError("grid steps differ")
    vals = np.concatenate([pre.values, post.values[1:] + pre.end])
    times = np.concatenate([pre.jump_times, post.jump_times + pre.lifetime])
    sizes = np.concatenate([pre.jump_sizes, post.jump_sizes])
    cells = np.concatenate([pre.jump_cells, post.jump_cells + pre.n_cells])
    return Path(pre.grid_step, vals, times, sizes, cells)


# ---------------------------------------------------------------------------
# Extrema and passage times
# ---------------------------------------------------------------------------

def running_extrema(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """(S, I): running supremum and infimum sampled at the grid times,
    computed over grid values and jump-adjusted envelope values."""
    times, vals, kinds = event_arrays(path)
    smax = np.maximum.accumulate(vals)
    smin = np.minimum.accumulate(vals)
    at_grid = kinds == _GRID
    return smax[at_grid], smin[at_grid]


class Passage(NamedTuple):
    """First-passage result; ``time`` is math.inf when the level is never
    crossed (then value/overshoot are nan)."""

    time: float
    value: float
    overshoot: float

    @property
    def happened(self) -> bool:
        return math.isfinite(self.time)


def first_passage_up(path: Path, x: float) -> Passage:
    """tau_x = inf{s > 0 : p(s) > x}; +inf sentinel when the set is empty.

    A path started strictly above x has tau = 0 (right continuity)."""
    times, vals, _ = event_arrays(path)
    above = np.nonzero(vals > x)[0]
    if len(above):
        i = int(above[0])
        return Passage(float(times[i]), float(vals[i]), float(vals[i] - x))
    return Passage(math.inf, math.nan, math.nan)


def first_passage_down(path: Path, level: float) -> Passage:
    """inf{s > 0 : p(s) < level}; overshoot is level - value (>= 0)."""
    times, vals, _ = event_arrays(path)
    below = np.nonzero(vals < level)[0]
    if len(below):
        i = below[0]
        return Passage(float(times[i]), float(vals[i]),
                       float(level - vals[i]))
    return Passage(math.inf, math.nan, math.nan)


class LastPassage(NamedTuple):
    """Last time in [0, t] at or below a level.

    ``time`` is math.inf (the stated convention for an empty set) when the
    path never visits (-inf, x] before t.  ``value_after`` is the path value
    at the passage time: above x exactly when the level was left by a jump.
    """

    time: float
    value_after: float
    pre_value: float


def last_passage(path: Path, x: float, t: float) -> LastPassage:
    """sigma_x(t) = sup{0 <= s <= t : p(s) <= x} with sup(empty) = +inf."""
    if not -1e-12 <= t <= path.lifetime * (1 + 1e-12):
        raise ValueError("t outside [0, lifetime]")
    times, vals, _ = event_arrays(path)
    in_win = times <= t * (1 + 1e-15)
    below = np.nonzero(in_win & (vals <= x))[0]
    if len(below) == 0:
        return LastPassage(math.inf, math.nan, math.nan)
    i = int(below[-1])
    if i + 1 < len(times) and times[i + 1] <= t:
        return LastPassage(float(times[i + 1]), float(vals[i + 1]),
                           float(vals[i]))
    return LastPassage(float(t), float(vals[i]), float(vals[i]))


def extremum_times(path: Path, t: float) -> tuple[float, float]:
    """(last infimum time, last supremum time) on [0, t).

    Attainment by left limits counts (pre-jump envelope values are events);
    grid ties are broken by the last attaining instant.
    """
    if not 0 < t <= path.lifetime * (1 + 1e-12):
        raise ValueError("t must lie in (0, lifetime]")
    times, vals, kinds = event_arrays(path)
    before = times < t * (1 - 1e-15)
    at_t_pre = (~before) & (times <= t * (1 + 1e-15)) & (kinds == _PRE)
    sel = before | at_t_pre
    v = vals[sel]
    w = times[sel]
    g_inf = float(w[np.nonzero(v == v.min())[0][-1]])
    g_sup = float(w[np.nonzero(v == v.max())[0][-1]])
    return g_inf, g_sup


@dataclass(frozen=True)
class SplitPair:
    """Pre/post decomposition at an extremum time; post is re-anchored."""

    pre: Path
    post: Path
    split_time: float


def split_at_infimum(path: Path, t: float) -> SplitPair:
    g, _ = extremum_times(path, t)
    head = stop_at(path, t)
    return SplitPair(stop_at(head, g), shift(head, g), g)


def split_at_supremum(path: Path, t: float) -> SplitPair:
    _, g = extremum_times(path, t)
    head = stop_at(path, t)
    return SplitPair(stop_at(head, g), shift(head, g), g)
