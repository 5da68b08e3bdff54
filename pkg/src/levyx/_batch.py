"""Streaming Monte Carlo kernels for scalar path summaries.

These loops consume the same per-path random streams as the Path sampler
(grid values agree bit for bit), but keep only running summaries so large
batches never materialize.  Work is split into fixed blocks of path indices;
the LEVYX_THREADS environment variable caps the worker pool and results are
reassembled in block order, so the output is invariant to the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .levy_model import LevyTriplet
from .simulate import RngStream, _increments

_BLOCK = 4096


def worker_count() -> int:
    raw = os.environ.get("LEVYX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_blocks(fn, n: int, block: int = _BLOCK) -> list:
    """Apply fn(start, stop) over a fixed partition of range(n); the
    partition and the output order never depend on the worker count."""
    spans = [(s, min(s + block, n)) for s in range(0, n, block)]
    workers = worker_count()
    if workers <= 1 or len(spans) <= 1:
        return [fn(*sp) for sp in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sp: fn(*sp), spans))


def _values(triplet: LevyTriplet, n_cells: int, h: float,
            gen: np.random.Generator, start: float = 0.0) -> np.ndarray:
    incr, _, _, _ = _increments(triplet, n_cells, h, gen)
    out = np.empty(n_cells + 1)
    out[0] = start
    np.cumsum(incr, out=out[1:])
    out[1:] += start
    return out


def endpoint_batch(triplet: LevyTriplet, t: float, h: float, n: int,
                   stream: RngStream) -> np.ndarray:
    """X_t over n paths."""
    n_cells = max(1, int(round(t / h)))

    def block(a, b):
        out = np.empty(b - a)
        for i in range(a, b):
            gen = stream.substream(i).generator()
            incr, _, _, _ = _increments(triplet, n_cells, h, gen)
            out[i - a] = incr.sum()
        return out

    return np.concatenate(run_blocks(block, n))


def extrema_batch(triplet: LevyTriplet, t: float, h: float, n: int,
                  stream: RngStream, start: float = 0.0) -> dict:
    """(endpoint, sup, inf, argmin time, argmax time) at grid resolution."""
    n_cells = max(1, int(round(t / h)))

    def block(a, b):
        m = b - a
        out = {k: np.empty(m) for k in
               ("endpoint", "sup", "inf", "g_inf", "g_sup")}
        for i in range(a, b):
            gen = stream.substream(i).generator()
            v = _values(triplet, n_cells, h, gen, start)
            j = i - a
            out["endpoint"][j] = v[-1]
            out["sup"][j] = v.max()
            out["inf"][j] = v.min()
            out["g_inf"][j] = v.argmin() * h
            out["g_sup"][j] = v.argmax() * h
        return out

    parts = run_blocks(block, n)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def exp_horizon_extrema_batch(triplet: LevyTriplet, alpha: float, h: float,
                              n: int, stream: RngStream) -> dict:
    """(T, endpoint, sup, inf) on independent Exponential(alpha) horizons."""

    def block(a, b):
        m = b - a
        out = {k: np.empty(m) for k in ("horizon", "endpoint", "sup", "inf")}
        for i in range(a, b):
            sub = stream.substream(i)
            t_hor = float(sub.generator(0).exponential(1.0 / alpha))
            n_cells = max(1, int(round(t_hor / h)))
            v = _values(triplet, n_cells, h, sub.generator(1))
            j = i - a
            out["horizon"][j] = n_cells * h
            out["endpoint"][j] = v[-1]
            out["sup"][j] = v.max()
            out["inf"][j] = v.min()
        return out

    parts = run_blocks(block, n)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def first_passage_batch(triplet: LevyTriplet, x: float, h: float, n: int,
                        stream: RngStream, horizon: float,
                        chunk_time: float = 4.0) -> dict:
    """First passage strictly above x, path by path in horizon chunks.

    Times resolve at cell precision for crossings carried by a jumping cell
    (the jump itself is exact in value, so overshoots are exact up to the
    in-cell Brownian residual).  Returns crossing flags, times, values and
    overshoots.
    """
    chunk_cells = max(1, int(round(chunk_time / h)))
    n_chunks = max(1, int(math.ceil(horizon / chunk_time)))

    def block(a, b):
        m = b - a
        time = np.full(m, np.inf)
        val = np.full(m, np.nan)
        for i in range(a, b):
            sub = stream.substream(i)
            carry = 0.0
            for c in range(n_chunks):
                gen = sub.generator(c)
                v = _values(triplet, chunk_cells, h, gen, carry)
                above = v > x
                if above.any():
                    k = int(np.argmax(above))
                    time[i - a] = c * chunk_cells * h + k * h
                    val[i - a] = v[k]
                    break
                carry = v[-1]
        return {"time": time, "value": val}

    parts = run_blocks(block, n, block=512)
    time = np.concatenate([p["time"] for p in parts])
    val = np.concatenate([p["value"] for p in parts])
    crossed = np.isfinite(time)
    return {"time": time, "value": val, "overshoot": val - x,
            "crossed": crossed}


def step_crossing_batch(triplet: LevyTriplet, x: float, h: float, n: int,
                        stream: RngStream, horizon: float,
                        chunk_time: float = 4.0,
                        fractions: tuple[float, ...] = ()) -> dict:
    """First passage strictly above x with jumps-first step semantics.

    Crossing candidates are the grid values and the within-cell post-jump
    values (cell base plus partial jump sums, no cell Brownian residual);
    the earlier candidate wins.  ``by_jump`` marks a crossing carried by a
    jump, whose value is then exact.  Summaries of the pre-crossing path
    (min, max, argmax, left value) and reversed-path fraction gathers come
    along for the reversion experiments.
    """
    chunk_cells = max(1, int(round(chunk_time / h)))
    n_chunks = max(1, int(math.ceil(horizon / chunk_time)))

    def block(a, b):
        m = b - a
        out = {
            "crossed": np.zeros(m, dtype=bool),
            "time": np.full(m, np.inf),
            "value": np.full(m, np.nan),
            "by_jump": np.zeros(m, dtype=bool),
            "jump_size": np.zeros(m),
            "pre_value": np.full(m, np.nan),
            "pre_min": np.full(m, np.nan),
            "pre_sup": np.full(m, np.nan),
            "g_max": np.full(m, np.nan),
            "s_max_before": np.full(m, np.nan),
        }
        fr = {q: np.full(m, np.nan) for q in fractions}
        for i in range(a, b):
            sub = stream.substream(i)
            carry = 0.0
            rmin = 0.0
            rmax = 0.0
            argmax_t = 0.0
            found = None
            for c in range(n_chunks):
                incr, times, sizes, cells = _increments(
                    triplet, chunk_cells, h, sub.generator(c))
                v = np.empty(chunk_cells + 1)
                v[0] = carry
                np.cumsum(incr, out=v[1:])
                v[1:] += carry
                above = v > x
                g_t = math.inf
                if above.any():
                    g_k = int(np.argmax(above))
                    g_t = g_k * h
                j_t = math.inf
                if len(times):
                    part = np.zeros(len(sizes))
                    u0 = 0
                    while u0 < len(sizes):
                        w0 = u0
                        while w0 < len(sizes) and cells[w0] == cells[u0]:
                            w0 += 1
                        part[u0:w0] = np.cumsum(sizes[u0:w0])
                        u0 = w0
                    jv = v[cells] + part
                    jub = np.nonzero(jv > x)[0]
                    if len(jub):
                        ji = int(jub[0])
                        j_t = float(times[ji])
                if g_t < math.inf or j_t < math.inf:
                    base_t = c * chunk_cells * h
                    if j_t < g_t:
                        val = float(jv[ji])
                        size = float(sizes[ji])
                        kc = int(cells[ji])
                        pre = val - size
                        seg = v[:kc + 1]
                        t_cross = base_t + j_t
                        idx_cross = kc
                    else:
                        val = float(v[g_k])
                        size = 0.0
                        pre = float(v[g_k - 1]) if g_k > 0 else carry
                        seg = v[:g_k + 1]
                        t_cross = base_t + g_t
                        idx_cross = g_k
                    seg_max = float(seg.max()) if len(seg) else carry
                    seg_arg = float(np.argmax(seg)) * h + base_t \
                        if len(seg) else 0.0
                    pmin = min(rmin, float(seg.min())) if len(seg) else rmin
                    if seg_max >= rmax:
                        g_max_t, s_max = seg_arg, seg_max
                    else:
                        g_max_t, s_max = argmax_t, rmax
                    found = (t_cross, val, size > 0.0, size, pre, pmin,
                             max(rmax, seg_max), g_max_t, s_max,
                             base_t, v, idx_cross)
                    break
                carry = float(v[-1])
                if v.min() < rmin:
                    rmin = float(v.min())
                if v.max() >= rmax:
                    rmax = float(v.max())
                    argmax_t = c * chunk_cells * h + float(np.argmax(v)) * h
            j = i - a
            if found is None:
                continue
            (t_cross, val, byj, size, pre, pmin, psup, g_max_t, s_max,
             base_t, v, idx_cross) = found
            out["crossed"][j] = True
            out["time"][j] = t_cross
            out["value"][j] = val
            out["by_jump"][j] = byj
            out["jump_size"][j] = size
            out["pre_value"][j] = pre
            out["pre_min"][j] = pmin
            out["pre_sup"][j] = psup
            out["g_max"][j] = g_max_t
            out["s_max_before"][j] = s_max
            for q in fractions:
                # Reversed path at fraction q of its lifetime, at grid
                # resolution; only valid when the crossing happened in the
                # first chunk (experiments gate on capped lifetimes).
                k = int(round((1.0 - q) * (base_t / h + idx_cross)))
                if 0 <= k - int(base_t / h) < len(v):
                    fr[q][j] = val - v[k - int(base_t / h)]
        out.update({f"rev_frac_{q:g}": fr[q] for q in fractions})
        return out

    parts = run_blocks(block, n, block=1024)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def last_passage_batch(triplet: LevyTriplet, x: float, t: float, h: float,
                       n: int, stream: RngStream,
                       fractions: tuple[float, ...] = (0.5,),
                       start: float = 0.0) -> dict:
    """Per-path last time at/below level x on [0, t] with the reversed-path
    summaries used by the reversion experiments.

    found:      the path visited (-inf, x] before t
    sigma:      the passage time (== t when still at/below x at t)
    value:      path value at sigma (above x exactly when a cell jumped over)
    jump_cell:  total recorded jump size in the cell carrying the crossing
    rev_sup:    sup of the path reversed at sigma (= value - inf before sigma)
    rev_frac_q: reversed path at fraction q of its lifetime
    """
    n_cells = max(1, int(round(t / h)))

    def block(a, b):
        m = b - a
        out = {
            "found": np.zeros(m, dtype=bool),
            "sigma": np.full(m, np.nan),
            "value": np.full(m, np.nan),
            "jump_cell": np.zeros(m),
            "rev_sup": np.full(m, np.nan),
            "pre_value": np.full(m, np.nan),
            "sup_before": np.full(m, np.nan),
            "inf_before": np.full(m, np.nan),
        }
        fr = {q: np.full(m, np.nan) for q in fractions}
        frp = {q: np.full(m, np.nan) for q in fractions}
        for i in range(a, b):
            gen = stream.substream(i).generator()
            incr, _, sizes, cells = _increments(triplet, n_cells, h, gen)
            v = np.empty(n_cells + 1)
            v[0] = start
            np.cumsum(incr, out=v[1:])
            v[1:] += start
            below = np.nonzero(v <= x)[0]
            j = i - a
            if len(below) == 0:
                continue
            out["found"][j] = True
            i_star = int(below[-1])
            if i_star == n_cells:
                sig_idx = n_cells
            else:
                sig_idx = i_star + 1
                if len(cells):
                    mask = cells == i_star
                    out["jump_cell"][j] = float(sizes[mask].sum())
            out["sigma"][j] = sig_idx * h
            out["value"][j] = v[sig_idx]
            out["rev_sup"][j] = v[sig_idx] - v[:sig_idx + 1].min()
            out["pre_value"][j] = v[i_star]
            out["sup_before"][j] = v[:i_star + 1].max()
            out["inf_before"][j] = v[:i_star + 1].min()
            for q in fractions:
                k = sig_idx - int(round(q * sig_idx))
                fr[q][j] = v[sig_idx] - v[k]
                frp[q][j] = v[int(round(q * i_star))]
        out.update({f"rev_frac_{q:g}": fr[q] for q in fractions})
        out.update({f"pre_frac_{q:g}": frp[q] for q in fractions})
        return out

    parts = run_blocks(block, n, block=2048)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
