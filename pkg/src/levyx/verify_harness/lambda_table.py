"""The staying-above function Lambda(s, a) = P(inf of X over [0,s] >= -a).

Brownian triplets get the reflection-principle closed form; everything else
gets a Monte Carlo table on an (s, a) grid with bilinear interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .. import _batch
from ..levy_model import LevyTriplet, NoJumps
from ..simulate import RngStream, _increments

__all__ = ["LambdaTable", "estimate_lambda"]


@dataclass(frozen=True)
class LambdaTable:
    s_grid: np.ndarray
    a_grid: np.ndarray
    values: np.ndarray          # shape (len(s_grid), len(a_grid)), in [0, 1]
    provenance: str             # "closed_form" | "monte_carlo(n=..., seed=...)"
    se: float                   # worst-case cell standard error (0 if exact)

    def __post_init__(self):
        v = self.values
        if v.min() < -1e-12 or v.max() > 1 + 1e-12:
            raise ValueError("Lambda values must lie in [0, 1]")

    def at(self, s, a) -> np.ndarray:
        """Bilinear interpolation, clamped to the grid box."""
        s = np.asarray(s, dtype=float)
        a = np.asarray(a, dtype=float)
        ds = self.s_grid[1] - self.s_grid[0]
        da = self.a_grid[1] - self.a_grid[0]
        si = np.clip(s / ds, 0, len(self.s_grid) - 1 - 1e-9)
        ai = np.clip(a / da, 0, len(self.a_grid) - 1 - 1e-9)
        i0 = si.astype(int)
        j0 = ai.astype(int)
        fs = si - i0
        fa = ai - j0
        v = self.values
        return (v[i0, j0] * (1 - fs) * (1 - fa)
                + v[i0 + 1, j0] * fs * (1 - fa)
                + v[i0, j0 + 1] * (1 - fs) * fa
                + v[i0 + 1, j0 + 1] * fs * fa)


def _brownian_lambda(b: float, drift: float, s_grid, a_grid) -> np.ndarray:
    """P(inf (c s + sigma B) over [0,s] >= -a) for sigma^2 = 2b.

    Driftless closed form is 1 - 2 Phi(-a / (sigma sqrt(s))); with drift c
    the standard first-passage formula applies.
    """
    sig = math.sqrt(2.0 * b)
    out = np.empty((len(s_grid), len(a_grid)))
    for i, s in enumerate(s_grid):
        if s <= 0:
            out[i] = (a_grid >= 0).astype(float)
            continue
        rt = sig * math.sqrt(s)
        if drift == 0.0:
            out[i] = 1.0 - 2.0 * ndtr(-a_grid / rt)
        else:
            z1 = (-a_grid - drift * s) / rt
            z2 = (-a_grid + drift * s) / rt
            log_term = -2.0 * drift * a_grid / (sig * sig) + log_ndtr(z2)
            out[i] = 1.0 - (ndtr(z1) + np.exp(np.clip(log_term, -745.0, 0.0)))
        np.clip(out[i], 0.0, 1.0, out=out[i])
    return out


def estimate_lambda(triplet: LevyTriplet, s_max: float, a_max: float,
                    n: int, seed: int, n_s: int = 41, n_a: int = 81,
                    grid_step: float = 1e-3) -> LambdaTable:
    """Lambda table on [0, s_max] x [0, a_max].

    Brownian (no jumps) triplets are exact; otherwise a Monte Carlo table of
    running-minimum exceedance fractions is built from n paths.
    """
    s_grid = np.linspace(0.0, s_max, n_s)
    a_grid = np.linspace(0.0, a_max, n_a)
    if isinstance(triplet.jumps, NoJumps):
        vals = _brownian_lambda(triplet.gaussian_b, triplet.path_drift(),
                                s_grid, a_grid)
        return LambdaTable(s_grid, a_grid, vals, "closed_form", 0.0)
    h = grid_step
    n_cells = max(1, int(round(s_max / h)))
    s_idx = np.minimum((s_grid / h).astype(int), n_cells)
    stream = RngStream(seed, 0x1A3)

    def block(a, b):
        acc = np.zeros((len(s_grid), len(a_grid)))
        for i in range(a, b):
            gen = stream.substream(i).generator()
            incr, _, _, _ = _increments(triplet, n_cells, h, gen)
            v = np.concatenate([[0.0], np.cumsum(incr)])
            rmin = np.minimum.accumulate(v)[s_idx]
            acc += rmin[:, None] >= -a_grid[None, :]
        return acc

    counts = sum(_batch.run_blocks(block, n))
    vals = counts / n
    vals[0] = 1.0
    se = float(np.sqrt(np.clip(vals * (1 - vals), 0, None) / n).max())
    return LambdaTable(s_grid, a_grid, vals,
                       f"monte_carlo(n={n}, seed={seed})", se)
