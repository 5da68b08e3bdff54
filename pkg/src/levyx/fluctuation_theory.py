"""Excursions, local times, ladder processes and creeping estimates.

Excursions above the running infimum (and below the running supremum) are
extracted at grid resolution with the terminal jump recorded, so the
overshoot information that the plain reflected process forgets stays
available.  Local times come in three flavours: minus-the-infimum (exact for
spectrally positive processes), epsilon occupation, and epsilon excursion
counting; the latter two carry explicit normalization constants calibrated
on the Brownian case.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .levy_model import LevyTriplet
from .simulate import Path

__all__ = [
    "ExcursionRecord", "LadderSample", "LocalTimeEstimate", "LocalTimeMethod",
    "excursions_above_infimum", "excursions_below_supremum",
    "local_time_at_infimum", "local_time_at_supremum", "ladder_process",
    "estimate_kappa", "estimate_potential_density", "estimate_creeping",
    "excursions_to_csv", "ladders_to_csv", "kappa_brownian",
]


@dataclass(frozen=True)
class ExcursionRecord:
    """One excursion re-anchored at 0, with its boundary data.

    ``end_value`` is the excursion's final value (0 for a continuous return,
    negative below-the-infimum / positive above-the-supremum when the return
    happens by a jump) and ``terminal_jump`` the recorded jump size in the
    final cell (0 when none).
    """

    start_time: float
    local_time_coord: float
    segment: Path
    lifetime: float
    terminal_jump: float
    end_value: float

    @property
    def height(self) -> float:
        return float(self.segment.values.max())

    @property
    def depth(self) -> float:
        return float(self.segment.values.min())


class LocalTimeMethod(enum.Enum):
    MINUS_INFIMUM = "minus_infimum"
    EPS_EXCURSION_COUNT = "eps_excursion_count"
    EPS_OCCUPATION = "eps_occupation"


# Brownian-calibrated normalizations: with these constants both epsilon
# estimators target the same local time as Levy's theorem (L law-equal to
# the running supremum of a standard Brownian motion).
_OCCUPATION_NORM = 0.5


def _count_norm(eps: float) -> float:
    return math.sqrt(math.pi * eps)


@dataclass(frozen=True)
class LocalTimeEstimate:
    method: LocalTimeMethod
    eps: float
    values: np.ndarray          # nondecreasing, aligned to the path grid
    normalization_constant: float

    @property
    def total(self) -> float:
        return float(self.values[-1])


def _segment(path: Path, a: int, b: int) -> Path:
    """Re-anchored sub-path over grid indices [a, b] (inclusive)."""
    h = path.grid_step
    vals = path.values[a:b + 1] - path.values[a]
    keep = (path.jump_cells >= a) & (path.jump_cells <= b - 1)
    return Path(h, vals, path.jump_times[keep] - a * h,
                path.jump_sizes[keep], path.jump_cells[keep] - a)


def _mirror(path: Path) -> Path:
    return Path(path.grid_step, -path.values, path.jump_times,
                -path.jump_sizes, path.jump_cells)


def excursions_above_infimum(path: Path,
                             local_time: LocalTimeEstimate | None = None
                             ) -> list[ExcursionRecord]:
    """Maximal grid intervals where the path sits above its running infimum.

    Each record keeps the re-anchored segment, the lifetime, the terminal
    (negative) jump when the excursion ends by jumping below the past
    infimum, and a local-time coordinate (from ``local_time`` if given,
    otherwise the raw minus-infimum proxy).
    """
    h = path.grid_step
    v = path.values
    run_min = np.minimum.accumulate(v)
    above = v > run_min
    out: list[ExcursionRecord] = []
    if not above.any():
        return out
    # Jump sizes folded per cell, for terminal-jump attribution.
    idx = np.nonzero(above)[0]
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    for a_i, b_i in zip(starts, ends):
        g = int(a_i) - 1            # last at-infimum index
        d = int(b_i) + 1            # first index back at/below the infimum
        if g < 0:
            g = 0
        if d > path.n_cells:
            continue                # unfinished excursion at the horizon
        seg = _segment(path, g, d)
        end_value = float(v[d] - v[g])
        cell_mask = path.jump_cells == d - 1
        terminal = float(path.jump_sizes[cell_mask].sum()) if \
            cell_mask.any() else 0.0
        coord = float(local_time.values[g]) if local_time is not None \
            else float(v[0] - run_min[g])
        out.append(ExcursionRecord(start_time=g * h, local_time_coord=coord,
                                   segment=seg, lifetime=(d - g) * h,
                                   terminal_jump=terminal,
                                   end_value=end_value))
    return out


def excursions_below_supremum(path: Path,
                              local_time: LocalTimeEstimate | None = None
                              ) -> list[ExcursionRecord]:
    """Dual extraction from S - X; terminal positive jumps (overshoots of a
    new supremum) are recorded with positive end_value."""
    mirrored = excursions_above_infimum(_mirror(path), local_time)
    out = []
    for rec in mirrored:
        seg = rec.segment
        out.append(ExcursionRecord(
            start_time=rec.start_time, local_time_coord=rec.local_time_coord,
            segment=Path(seg.grid_step, -seg.values, seg.jump_times,
                         -seg.jump_sizes, seg.jump_cells),
            lifetime=rec.lifetime, terminal_jump=-rec.terminal_jump,
            end_value=-rec.end_value))
    return out


def local_time_at_infimum(path: Path, method: LocalTimeMethod,
                          eps: float = 1e-2,
                          triplet: LevyTriplet | None = None
                          ) -> LocalTimeEstimate:
    """Local time of X - I at 0 along the path grid.

    MINUS_INFIMUM requires a spectrally positive triplet (pass it to get the
    gate enforced); the epsilon methods require a Brownian component.
    """
    if triplet is not None:
        if method is LocalTimeMethod.MINUS_INFIMUM \
                and not triplet.is_spectrally_positive():
            raise ValueError("minus-infimum local time needs a spectrally "
                             "positive triplet")
        if method is not LocalTimeMethod.MINUS_INFIMUM \
                and triplet.effective_gaussian_b() <= 0:
            raise ValueError("epsilon local-time methods need gaussian_b > 0")
    v = path.values
    run_min = np.minimum.accumulate(v)
    if method is LocalTimeMethod.MINUS_INFIMUM:
        return LocalTimeEstimate(method, 0.0, v[0] - run_min, 1.0)
    h = path.grid_step
    if method is LocalTimeMethod.EPS_OCCUPATION:
        occ = np.concatenate([[0.0],
                              np.cumsum((v[:-1] - run_min[:-1] < eps) * h)])
        return LocalTimeEstimate(method, eps,
                                 _OCCUPATION_NORM * occ / eps,
                                 _OCCUPATION_NORM)
    # EPS_EXCURSION_COUNT: completed excursions longer than eps, counted at
    # their start times.
    vals = np.zeros(len(v))
    for rec in excursions_above_infimum(path):
        if rec.lifetime > eps:
            start = int(round(rec.start_time / h))
            vals[start:] += 1.0
    c = _count_norm(eps)
    return LocalTimeEstimate(method, eps, c * vals, c)


def local_time_at_supremum(path: Path, method: LocalTimeMethod,
                           eps: float = 1e-2,
                           triplet: LevyTriplet | None = None,
                           calibration: float = 1.0) -> LocalTimeEstimate:
    """Local time of S - X at 0: the infimum machinery on the mirrored path.

    ``calibration`` rescales the estimate (the supremum-side normalization is
    pinned per triplet by the excursion/ladder occupation identity; 1.0 is
    exact for symmetric laws).
    """
    mirrored_triplet = None
    if triplet is not None and method is not LocalTimeMethod.MINUS_INFIMUM:
        mirrored_triplet = triplet
    est = local_time_at_infimum(_mirror(path), method, eps, mirrored_triplet)
    return LocalTimeEstimate(est.method, est.eps, calibration * est.values,
                             calibration * est.normalization_constant)


@dataclass(frozen=True)
class LadderSample:
    """Inverse local time and ladder heights on a uniform local-time grid.

    ``killed`` marks a ladder that genuinely terminated inside the horizon
    (no new extremum for the trailing timeout fraction); ``truncated`` marks
    one merely cut off by the simulation horizon.
    """

    which: str                      # "min" or "max"
    dv: float
    inverse_lt: np.ndarray
    heights: np.ndarray
    killed: bool
    kill_coordinate: float
    truncated: bool

    def at_local_time(self, v: float):
        """(inverse_lt, height) at local time v, or None when not reached."""
        j = int(math.floor(v / self.dv + 1e-9))
        if j >= len(self.inverse_lt):
            return None
        return float(self.inverse_lt[j]), float(self.heights[j])


def ladder_process(path: Path, lt: LocalTimeEstimate, which: str,
                   dv: float = 0.01,
                   timeout_fraction: float = 0.25) -> LadderSample:
    """Right-continuous inverse of the local time plus the extremum heights.

    which="min": heights are -X at the inverse times (new infima);
    which="max": heights are +X there (new suprema; pass a supremum-side lt).
    """
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    if len(lt.values) != len(path.values):
        raise ValueError("local time estimate is not aligned to the path")
    h = path.grid_step
    total = lt.total
    v_grid = np.arange(0.0, total, dv)
    idx = np.searchsorted(lt.values, v_grid, side="right")
    reached = idx <= path.n_cells
    idx = np.minimum(idx, path.n_cells)
    inverse = idx * h
    sign = -1.0 if which == "min" else 1.0
    heights = sign * (path.values[idx] - path.values[0])
    # Kill vs truncation: if the extremum last advanced well before the end
    # of the horizon, the ladder ended for real.
    extr = np.minimum.accumulate(path.values) if which == "min" \
        else np.maximum.accumulate(path.values)
    moves = np.nonzero(np.diff(extr) != 0.0)[0]
    last_move = (moves[-1] + 1) * h if len(moves) else 0.0
    killed = last_move < (1.0 - timeout_fraction) * path.lifetime
    n_keep = int(reached.sum())
    return LadderSample(which=which, dv=dv,
                        inverse_lt=inverse[:n_keep].astype(float),
                        heights=heights[:n_keep].astype(float),
                        killed=bool(killed), kill_coordinate=float(total),
                        truncated=not killed)


def estimate_kappa(batch: list[LadderSample], alpha: float, beta: float,
                   max_truncated_fraction: float = 0.02
                   ) -> tuple[float, float]:
    """Laplace exponent estimate kappa(alpha, beta) with standard error.

    kappa = -log E[exp(-alpha * T_1 - beta * H_1); ladder alive at local
    time 1].  Samples killed before 1 contribute 0; samples *truncated* by
    the horizon before 1 are an estimation error when too frequent.
    """
    if not batch:
        raise ValueError("empty ladder batch")
    vals = []
    n_trunc = 0
    for s in batch:
        state = s.at_local_time(1.0)
        if state is None:
            if s.truncated:
                n_trunc += 1
                continue
            vals.append(0.0)
            continue
        t1, h1 = state
        vals.append(math.exp(-alpha * t1 - beta * h1))
    if n_trunc > max_truncated_fraction * len(batch):
        raise ValueError(
            f"{n_trunc}/{len(batch)} ladders truncated before local time 1; "
            "use a longer horizon")
    if not vals or all(u == 0.0 for u in vals):
        raise ValueError("all ladder samples killed before local time 1")
    arr = np.asarray(vals)
    m = float(arr.mean())
    se_m = float(arr.std(ddof=1) / math.sqrt(len(arr)))
    return -math.log(m), se_m / m


def kappa_brownian(alpha: float, beta: float) -> float:
    """Closed form for the standard Brownian triplet (0, 1/2, none) under
    the Levy-theorem normalization: sqrt(alpha) + beta / sqrt(2)."""
    return math.sqrt(alpha) + beta / math.sqrt(2.0)


def estimate_potential_density(batch: list[LadderSample],
                               x_grid: np.ndarray
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Occupation-density estimate of the ladder-height potential on cells
    [x_j, x_{j+1}); returns (density, standard errors) per cell.

    Uses max-ladders for the upward potential u* (Kesten: u*(0+) = 1/d*).
    Cells never visited get density 0 (flagged by a zero standard error).
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if len(x_grid) < 2:
        raise ValueError("x_grid needs at least two edges")
    widths = np.diff(x_grid)
    per_sample = np.zeros((len(batch), len(widths)))
    for i, s in enumerate(batch):
        if len(s.heights) == 0:
            continue
        counts, _ = np.histogram(s.heights, bins=x_grid)
        per_sample[i] = counts * s.dv / widths
    dens = per_sample.mean(axis=0)
    se = per_sample.std(axis=0, ddof=1) / math.sqrt(max(len(batch), 2))
    return dens, se


def estimate_ladder_drift(batch: list[LadderSample],
                          betas: tuple[float, float] = (20.0, 40.0)
                          ) -> tuple[float, float]:
    """Drift coefficient of the height subordinator from the large-beta slope
    of kappa(0, beta); returns (estimate, standard error)."""
    b1, b2 = betas
    k1, se1 = estimate_kappa(batch, 0.0, b1)
    k2, se2 = estimate_kappa(batch, 0.0, b2)
    d = (k2 - k1) / (b2 - b1)
    se = math.hypot(se1, se2) / (b2 - b1)
    return d, se


def estimate_creeping(triplet: LevyTriplet, x: float, n: int,
                      grid_step: float, stream, horizon: float = 32.0
                      ) -> dict:
    """Fraction of first passages over x that creep (overshoot below the
    sub-grid tolerance 3*sqrt(2 b h)); paths that never cross within the
    horizon are excluded and the exclusion rate reported."""
    from . import _batch
    if x <= 0:
        raise ValueError("x must be positive")
    res = _batch.first_passage_batch(triplet, x, grid_step, n, stream,
                                     horizon)
    sig_cell = math.sqrt(2.0 * triplet.effective_gaussian_b() * grid_step)
    tol = 3.0 * sig_cell
    crossed = res["crossed"]
    n_cross = int(crossed.sum())
    if n_cross == 0:
        raise ValueError("no path crossed the level within the horizon")
    over = res["overshoot"][crossed]
    creep = over <= tol
    p = float(creep.mean())
    out = {
        "estimate": p,
        "se": float(math.sqrt(max(p * (1 - p), 1e-12) / n_cross)),
        "exclusion_rate": 1.0 - n_cross / n,
        "tolerance": tol,
        "n_crossed": n_cross,
    }
    # Band-contamination removal: P(overshoot <= k sig) is the creeping
    # probability plus an approximately linear term from the smooth jump
    # overshoot density; the OLS intercept over k = 3..6 extrapolates it
    # away (the sub-grid Gaussian overshoot is fully captured at k >= 3).
    ks = np.array([3.0, 4.0, 5.0, 6.0])
    tols = ks * sig_cell
    p_k = np.array([float((over <= tk).mean()) for tk in tols])
    design = np.column_stack([np.ones_like(tols), tols])
    coef, *_ = np.linalg.lstsq(design, p_k, rcond=None)
    hat = np.linalg.pinv(design.T @ design) @ design.T
    cov = np.empty((len(tols), len(tols)))
    for a_i in range(len(tols)):
        for b_i in range(len(tols)):
            p_min = p_k[min(a_i, b_i)]
            cov[a_i, b_i] = (p_min - p_k[a_i] * p_k[b_i]) / n_cross
    var_a = float(hat[0] @ cov @ hat[0])
    out["extrapolated"] = float(coef[0])
    out["extrapolated_se"] = math.sqrt(max(var_a, 1e-18))
    return out


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def excursions_to_csv(records: list[ExcursionRecord], file_path: str) -> None:
    """One row per excursion: start, lifetime, end value, terminal jump,
    sup, inf."""
    with open(file_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_time", "lifetime", "end_value", "terminal_jump",
                    "sup", "inf"])
        for r in records:
            w.writerow([f"{r.start_time:.12g}", f"{r.lifetime:.12g}",
                        f"{r.end_value:.12g}", f"{r.terminal_jump:.12g}",
                        f"{r.height:.12g}", f"{r.depth:.12g}"])


def ladders_to_csv(batch: list[LadderSample], file_path: str) -> None:
    with open(file_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "which", "v", "inverse_lt", "height",
                    "killed"])
        for i, s in enumerate(batch):
            for j, (t, hgt) in enumerate(zip(s.inverse_lt, s.heights)):
                w.writerow([i, s.which, f"{j * s.dv:.12g}", f"{t:.12g}",
                            f"{hgt:.12g}", int(s.killed)])
