"""Cadlag path sampling on a uniform grid with exact jump records.

A :class:`Path` holds grid values plus an exact jump list.  Between grid
points the continuous part is unresolved; each cell's Brownian-plus-drift
increment is realized at the cell's right endpoint, while jumps keep their
exact times and sizes so path transforms can treat them exactly.

Randomness comes from Philox counter streams keyed by ``(seed,
stream_index)``: output depends only on the key and the draw counter, never
on scheduling or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .levy_model import (CompoundPoissonJumps, LevyTriplet, NoJumps,
                         TruncatedStableJumps, char_exponent)

__all__ = ["Path", "RngStream", "sample_path", "sample_path_from",
           "sample_path_exp_horizon", "path_from_values",
           "characteristic_selftest"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream identity; cheap to fork by (stream_index, slot)."""

    seed: int
    stream_index: int = 0

    def generator(self, slot: int = 0) -> np.random.Generator:
        """A fresh generator for this (seed, stream_index, slot)."""
        key = np.array([self.seed & _MASK64, self.stream_index & _MASK64],
                       dtype=np.uint64)
        counter = np.array([0, 0, slot & _MASK64, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key,
                                                    counter=counter))

    def substream(self, k: int) -> "RngStream":
        """Derived stream; distinct k values never collide."""
        return RngStream(self.seed, (self.stream_index * 0x9E3779B97F4A7C15
                                     + k + 1) & _MASK64)


@dataclass(frozen=True)
class Path:
    """Finite-lifetime path skeleton: uniform grid values + exact jumps.

    ``values[k]`` is the value at time ``k * grid_step`` (right-continuous).
    A jump with time t in (k*h, (k+1)*h] is owned by cell k: its size is part
    of the increment ``values[k+1] - values[k]``.  ``jump_cells`` records the
    owning cell explicitly so transforms stay exact even for jump times that
    sit on a grid boundary.
    """

    grid_step: float
    values: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_cells: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")
        if len(self.values) < 1:
            raise ValueError("a path needs at least its starting value")
        if not (len(self.jump_times) == len(self.jump_sizes)
                == len(self.jump_cells)):
            raise ValueError("jump arrays must have equal length")
        if len(self.jump_times) > 1 and np.any(np.diff(self.jump_times) <= 0):
            raise ValueError("jump times must be strictly increasing")

    @property
    def lifetime(self) -> float:
        return self.grid_step * (len(self.values) - 1)

    @property
    def n_cells(self) -> int:
        return len(self.values) - 1

    @property
    def start(self) -> float:
        return float(self.values[0])

    @property
    def end(self) -> float:
        return float(self.values[-1])

    def jump_at(self, t: float, rtol: float = 1e-9) -> float:
        """Size of the recorded jump at time t (0.0 when none).

        Reconstructed from the jump list, never by finite differences.
        """
        if len(self.jump_times) == 0:
            return 0.0
        tol = rtol * max(self.grid_step, abs(t))
        i = np.searchsorted(self.jump_times, t)
        for j in (i - 1, i):
            if 0 <= j < len(self.jump_times) and \
                    abs(float(self.jump_times[j]) - t) <= tol:
                return float(self.jump_sizes[j])
        return 0.0


def path_from_values(grid_step: float, values, jumps=()) -> Path:
    """Build a path from explicit grid values and (time, size) jump pairs.

    Intended for hand-constructed test paths; a jump with time t in
    (k*h, (k+1)*h] is assigned to cell k.
    """
    values = np.asarray(values, dtype=float)
    jumps = sorted(jumps)
    times = np.asarray([t for t, _ in jumps], dtype=float)
    sizes = np.asarray([s for _, s in jumps], dtype=float)
    cells = np.asarray([int(math.ceil(t / grid_step)) - 1 for t, _ in jumps],
                       dtype=np.int64)
    if len(times) and (cells.min() < 0 or cells.max() >= len(values) - 1):
        raise ValueError("jump outside the path's lifetime")
    return Path(grid_step, values, times, sizes, cells)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _draw_jumps(triplet: LevyTriplet, horizon: float, grid_step: float,
                n_cells: int, gen: np.random.Generator):
    """Exact jump count, uniform times, and sizes; fixed draw order."""
    j = triplet.jumps
    if isinstance(j, NoJumps):
        return (np.empty(0), np.empty(0), np.empty(0, dtype=np.int64))
    if isinstance(j, CompoundPoissonJumps):
        rate = j.rate
        n = int(gen.poisson(rate * horizon))
        times = np.sort(gen.random(n)) * horizon
        sizes = j.law.sample(gen, n)
    else:
        assert isinstance(j, TruncatedStableJumps)
        n = int(gen.poisson(j.big_jump_rate() * horizon))
        times = np.sort(gen.random(n)) * horizon
        sizes = j.sample_big_jumps(gen, n)
    lifetime = n_cells * grid_step
    keep = times < lifetime
    times, sizes = times[keep], sizes[keep]
    # Nudge off grid boundaries and away from duplicates so times stay
    # strictly increasing and strictly inside their cells.
    if len(times):
        eps = grid_step * 1e-9
        on_grid = np.isclose(times % grid_step, 0.0, atol=eps) \
            | np.isclose(times % grid_step, grid_step, atol=eps)
        times = np.where(on_grid, times + grid_step * 1e-6, times)
        for i in range(1, len(times)):
            if times[i] <= times[i - 1]:
                times[i] = times[i - 1] + eps
        times = np.minimum(times, lifetime * (1 - 1e-12))
    cells = np.minimum((times / grid_step).astype(np.int64), n_cells - 1)
    return times, sizes, cells


def _increments(triplet: LevyTriplet, n_cells: int, grid_step: float,
                gen: np.random.Generator):
    """Per-cell increments plus exact jump records; fixed draw order so the
    batch kernels and the Path sampler consume identical random numbers."""
    times, sizes, cells = _draw_jumps(triplet, n_cells * grid_step, grid_step,
                                      n_cells, gen)
    incr = np.full(n_cells, triplet.path_drift() * grid_step)
    b_eff = triplet.effective_gaussian_b()
    if b_eff > 0:
        incr += math.sqrt(2.0 * b_eff * grid_step) \
            * gen.standard_normal(n_cells)
    if len(cells):
        np.add.at(incr, cells, sizes)
    return incr, times, sizes, cells


def _sample(triplet: LevyTriplet, horizon: float, grid_step: float,
            stream: RngStream, start: float, slot: int = 0) -> Path:
    n_cells = max(1, int(round(horizon / grid_step)))
    gen = stream.generator(slot)
    incr, times, sizes, cells = _increments(triplet, n_cells, grid_step, gen)
    values = np.empty(n_cells + 1)
    values[0] = start
    np.cumsum(incr, out=values[1:])
    values[1:] += start
    return Path(grid_step, values, times, sizes, cells)


def sample_path(triplet: LevyTriplet, horizon: float, grid_step: float,
                stream: RngStream) -> Path:
    """One path of X on [0, horizon] started at 0.

    The horizon is rounded to the nearest whole number of grid cells (at
    least one), so ``lifetime == grid_step * n_cells``.
    """
    if grid_step > horizon:
        raise ValueError("grid_step must not exceed the horizon")
    return _sample(triplet, horizon, grid_step, stream, 0.0)


def sample_path_from(triplet: LevyTriplet, start: float, horizon: float,
                     grid_step: float, stream: RngStream) -> Path:
    """As :func:`sample_path` with ``values[0] == start``; same stream use,
    so start 0 reproduces sample_path bit for bit."""
    if grid_step > horizon:
        raise ValueError("grid_step must not exceed the horizon")
    return _sample(triplet, horizon, grid_step, stream, start)


def sample_path_exp_horizon(triplet: LevyTriplet, alpha: float,
                            grid_step: float, stream: RngStream) -> Path:
    """Path on an independent Exponential(alpha) horizon.

    T is drawn from the stream's slot 0, the path from slot 1; the recorded
    lifetime is T rounded to the grid (minimum one cell).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    t_horizon = float(stream.generator(0).exponential(1.0 / alpha))
    return _sample(triplet, max(t_horizon, grid_step), grid_step, stream,
                   0.0, slot=1)


def characteristic_selftest(triplet: LevyTriplet, lam: float, t: float,
                            grid_step: float, n_paths: int,
                            stream: RngStream) -> tuple[complex, complex]:
    """(Monte Carlo E[e^{i lam X_t}], exp(-t psi(lam))).

    Startup self-test of the sign convention: the two must agree within
    Monte Carlo error.  Only endpoint values are accumulated.
    """
    acc = 0.0 + 0.0j
    for i in range(n_paths):
        p = _sample(triplet, t, grid_step, stream.substream(i), 0.0)
        acc += np.exp(1j * lam * p.end)
    exact = np.exp(-t * char_exponent(triplet, lam))
    return acc / n_paths, complex(exact)
