"""Pathwise construction of the process conditioned to stay positive.

From a path of X started at 0 the construction time-changes onto the
occupation set of (0, inf), adds half the semimartingale local time at 0,
and adds the straddle terms contributed by jumps across 0:

    up(t) = X(alpha_plus(t)) + l(alpha_plus(t)) / 2
            + sum_{0<s<=alpha_plus(t)} [ 1{X_s <= 0} (X_{s-})_+
                                        + 1{X_s > 0} (X_{s-})_- ]

The mirrored formula (minus signs) builds the process conditioned to stay
negative.  The local time l is estimated by one-sided occupation near 0
scaled by 2b/eps; accuracy is validated end to end by the Bessel(3)
acceptance test in the Brownian case.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import path_algebra
from .simulate import Path, RngStream

__all__ = ["Direction", "ConditionedPath", "FutureInfimum",
           "semimartingale_local_time", "build_conditioned",
           "future_infimum", "passage_functionals", "PassageFunctionals",
           "bessel3_reference", "default_level_eps"]


class Direction(enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class ConditionedPath:
    """The conditioned process on its own (occupation) time axis."""

    base: Path
    direction: Direction
    source_horizon: float
    occupation_used: float

    @property
    def empty(self) -> bool:
        return len(self.base.values) <= 1


@dataclass(frozen=True)
class FutureInfimum:
    """J(t) = inf over s >= t of the conditioned path, within its window.

    The trailing stretch after the last interior minimum is tail-biased:
    values there may still drop if the window were extended.
    """

    values: np.ndarray


def default_level_eps(grid_step: float) -> float:
    """Occupation band for the local-time estimate (bias/variance
    compromise, exposed in experiment configs)."""
    return grid_step ** (1.0 / 3.0)


def _pieces(path: Path):
    """Constant-value pieces of the step skeleton: (start, duration, value)
    arrays in time order, splitting cells at their exact jump times."""
    h = path.grid_step
    v = path.values
    n = path.n_cells
    starts = [np.arange(n) * h]
    durs = [np.full(n, h)]
    vals = [v[:-1].astype(float)]
    if len(path.jump_times):
        # Replace each jump cell's single piece by its sub-pieces.
        order = []
        jc = path.jump_cells
        u = 0
        while u < len(jc):
            w = u
            while w < len(jc) and jc[w] == jc[u]:
                w += 1
            order.append((int(jc[u]), u, w))
            u = w
        keep = np.ones(n, dtype=bool)
        for c, u, w in order:
            keep[c] = False
        starts[0] = starts[0][keep]
        durs[0] = durs[0][keep]
        vals[0] = vals[0][keep]
        for c, u, w in order:
            ts = np.concatenate([[c * h], path.jump_times[u:w]])
            te = np.concatenate([path.jump_times[u:w], [(c + 1) * h]])
            pv = v[c] + np.concatenate([[0.0],
                                        np.cumsum(path.jump_sizes[u:w])])
            starts.append(ts)
            durs.append(te - ts)
            vals.append(pv)
    starts = np.concatenate(starts)
    durs = np.concatenate(durs)
    vals = np.concatenate(vals)
    idx = np.argsort(starts, kind="stable")
    return starts[idx], durs[idx], vals[idx]


def semimartingale_local_time(path: Path, gaussian_b: float,
                              level_eps: float | None = None) -> np.ndarray:
    """Occupation estimate of the local time of X at 0, on the path grid:
    l(t) ~ (2 b / eps) * Leb{s <= t : 0 <= X_s < eps}."""
    if gaussian_b <= 0:
        # Pure-jump case: the continuous local time vanishes.
        return np.zeros(len(path.values))
    eps = level_eps if level_eps is not None else \
        default_level_eps(path.grid_step)
    v = path.values
    h = path.grid_step
    occ = np.concatenate([[0.0],
                          np.cumsum(((v[:-1] >= 0.0) & (v[:-1] < eps)) * h)])
    return (2.0 * gaussian_b / eps) * occ


def build_conditioned(path: Path, lt0: np.ndarray,
                      direction: Direction = Direction.UP) -> ConditionedPath:
    """Conditioned path from a source path started at 0.

    ``lt0`` is the semimartingale local time estimate aligned to the source
    grid (zeros for a pure-jump source).  A source that never enters the
    required half-line yields an empty, flagged result.
    """
    if abs(path.start) > 1e-12:
        raise ValueError("source path must start at 0")
    if len(lt0) != len(path.values):
        raise ValueError("local time estimate not aligned to the path")
    h = path.grid_step
    up = direction is Direction.UP
    starts, durs, vals = _pieces(path)
    side = vals > 0.0 if up else vals <= 0.0
    if not side.any():
        return ConditionedPath(Path(h, np.zeros(1)), direction,
                               path.lifetime, 0.0)
    p_start = starts[side]
    p_dur = durs[side]
    p_val = vals[side]
    occ_after = np.cumsum(p_dur)
    occ_before = occ_after - p_dur
    total = float(occ_after[-1])

    # Straddle-jump corrections, cumulative in real time.
    j_contrib = np.zeros(len(path.jump_times))
    if len(path.jump_times):
        pre_vals = np.empty(len(path.jump_times))
        u = 0
        jc = path.jump_cells
        while u < len(jc):
            w = u
            c = jc[u]
            base = float(path.values[c])
            acc = 0.0
            while w < len(jc) and jc[w] == c:
                pre_vals[w] = base + acc
                acc += path.jump_sizes[w]
                w += 1
            u = w
        post_vals = pre_vals + path.jump_sizes
        j_contrib = np.where(post_vals <= 0.0, np.maximum(pre_vals, 0.0),
                             np.maximum(-pre_vals, 0.0))
    j_cum = np.concatenate([[0.0], np.cumsum(j_contrib)])

    m_cells = int(total / h + 1e-9)
    u_grid = np.arange(m_cells + 1) * h
    pc = np.searchsorted(occ_after, u_grid, side="right")
    pc = np.minimum(pc, len(p_val) - 1)
    alpha = p_start[pc] + (u_grid - occ_before[pc])
    x_vals = p_val[pc]
    lt_idx = np.minimum((alpha / h).astype(np.int64), len(lt0) - 1)
    half_lt = 0.5 * lt0[lt_idx]
    n_jumps_at = np.searchsorted(path.jump_times, alpha, side="right") \
        if len(path.jump_times) else np.zeros(len(alpha), dtype=np.int64)
    corr = j_cum[n_jumps_at]
    if up:
        out_vals = x_vals + half_lt + corr
    else:
        out_vals = x_vals - half_lt - corr

    # Jumps strictly inside the chosen half-line survive the time change.
    jt_new, js_new = [], []
    if len(path.jump_times):
        pre_vals_local = pre_vals
        post_vals_local = pre_vals + path.jump_sizes
        inside = (pre_vals_local > 0) & (post_vals_local > 0) if up \
            else (pre_vals_local <= 0) & (post_vals_local <= 0)
        for t_j, d_j, ok in zip(path.jump_times, path.jump_sizes, inside):
            if not ok:
                continue
            p = int(np.searchsorted(p_start, t_j, side="right")) - 1
            if p < 0 or p >= len(p_start):
                continue
            u_t = occ_before[p] + (t_j - p_start[p])
            if 0.0 < u_t < m_cells * h:
                jt_new.append(u_t)
                js_new.append(d_j)
    if jt_new:
        jt_arr = np.asarray(jt_new)
        js_arr = np.asarray(js_new)
        order = np.argsort(jt_arr)
        jt_arr, js_arr = jt_arr[order], js_arr[order]
        ok = np.concatenate([[True], np.diff(jt_arr) > 0])
        jt_arr, js_arr = jt_arr[ok], js_arr[ok]
        cells = path_algebra._cells_for_times(jt_arr, h)
        ok = (cells >= 0) & (cells <= m_cells - 1)
        base = Path(h, out_vals, jt_arr[ok], js_arr[ok], cells[ok])
    else:
        base = Path(h, out_vals)
    return ConditionedPath(base, direction, path.lifetime, total)


def future_infimum(cp: ConditionedPath) -> FutureInfimum:
    """J(t) = suffix minimum; requires an upward conditioned path."""
    if cp.direction is not Direction.UP:
        raise ValueError("future infimum is defined for direction UP")
    return FutureInfimum(np.minimum.accumulate(cp.base.values[::-1])[::-1])


@dataclass(frozen=True)
class PassageFunctionals:
    sigma_time: float
    tau_time: float
    value_at_sigma: float
    value_at_tau: float
    resolved: bool


def passage_functionals(cp: ConditionedPath, x: float) -> PassageFunctionals:
    """Last passage at/below x and first passage above x for the conditioned
    path; ``resolved`` is False when the window is too short to trust the
    last-passage time (the future infimum never exceeds x strictly before
    the window ends)."""
    if x <= 0:
        raise ValueError("x must be positive")
    if cp.empty:
        return PassageFunctionals(math.inf, math.inf, math.nan, math.nan,
                                  False)
    j = future_infimum(cp).values
    resolved = bool(len(j) > 1 and np.any(j[:-1] > x))
    lp = path_algebra.last_passage(cp.base, x, cp.base.lifetime)
    fp = path_algebra.first_passage_up(cp.base, x)
    return PassageFunctionals(lp.time, fp.time, lp.value_after, fp.value,
                              resolved)


def bessel3_reference(n: int, horizon: float, grid_step: float,
                      stream: RngStream) -> list[Path]:
    """Exact-in-law three-dimensional Bessel skeletons (norm of three
    independent Brownian skeletons), as oracles for the Brownian tests."""
    n_cells = max(1, int(round(horizon / grid_step)))
    sd = math.sqrt(grid_step)
    out = []
    for i in range(n):
        gen = stream.substream(i).generator()
        incs = sd * gen.standard_normal((3, n_cells))
        coords = np.cumsum(incs, axis=1)
        vals = np.empty(n_cells + 1)
        vals[0] = 0.0
        np.einsum("ij,ij->j", coords, coords, out=vals[1:])
        np.sqrt(vals[1:], out=vals[1:])
        out.append(Path(grid_step, vals))
    return out
