"""Statistical helpers shared by the verification experiments.

Thresholds are fixed a priori by the callers; nothing here peeks
sequentially.  All resampling uses an explicit Philox generator so report
contents depend only on (config, seed).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as sps

__all__ = ["ks_two_sample", "corr_independence", "energy_distance_pvalue",
           "bootstrap_ratio_z", "weighted_mass", "mass_z", "CheckResult"]


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """(statistic, p-value) of the two-sample Kolmogorov-Smirnov test."""
    res = sps.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def corr_independence(f: np.ndarray, g: np.ndarray,
                      bound_sigmas: float = 3.0) -> dict:
    """Empirical-correlation independence check: |corr| <= sigmas/sqrt(n)."""
    n = len(f)
    if n != len(g) or n < 10:
        raise ValueError("need paired samples of equal length >= 10")
    sf, sg = f.std(), g.std()
    corr = 0.0 if sf == 0 or sg == 0 else \
        float(np.corrcoef(f, g)[0, 1])
    bound = bound_sigmas / math.sqrt(n)
    return {"corr": corr, "bound": bound, "passed": abs(corr) <= bound,
            "n": n}


def _pair_energy(a: np.ndarray, b: np.ndarray) -> float:
    """Energy distance between two samples of 2-d points."""
    from scipy.spatial.distance import cdist
    dab = cdist(a, b).mean()
    daa = cdist(a, a).mean()
    dbb = cdist(b, b).mean()
    return 2.0 * dab - daa - dbb


def energy_distance_pvalue(a: np.ndarray, b: np.ndarray, seed: int,
                           n_perm: int = 200, max_points: int = 600
                           ) -> tuple[float, float]:
    """Permutation p-value for the two-sample energy distance on pairs."""
    gen = np.random.Generator(np.random.Philox(key=[seed, 0xE7E]))
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if len(a) > max_points:
        a = a[gen.choice(len(a), max_points, replace=False)]
    if len(b) > max_points:
        b = b[gen.choice(len(b), max_points, replace=False)]
    obs = _pair_energy(a, b)
    pool = np.concatenate([a, b])
    na = len(a)
    count = 0
    for _ in range(n_perm):
        gen.shuffle(pool)
        if _pair_energy(pool[:na], pool[na:]) >= obs:
            count += 1
    return obs, (count + 1) / (n_perm + 1)


def bootstrap_ratio_z(num_a: np.ndarray, den_a: np.ndarray,
                      ratio_b: float, ratio_b_se: float, seed: int,
                      n_boot: int = 200) -> dict:
    """z-score for sum(num_a)/sum(den_a) against an external ratio.

    The A-side standard error comes from a path-level bootstrap (num and
    den resampled together, preserving within-path dependence).
    """
    gen = np.random.Generator(np.random.Philox(key=[seed, 0xB007]))
    n = len(num_a)
    tot_d = den_a.sum()
    if tot_d <= 0:
        raise ValueError("degenerate denominator")
    r_a = num_a.sum() / tot_d
    reps = np.empty(n_boot)
    for k in range(n_boot):
        idx = gen.integers(0, n, n)
        d = den_a[idx].sum()
        reps[k] = num_a[idx].sum() / d if d > 0 else r_a
    se_a = float(reps.std(ddof=1))
    se = math.hypot(se_a, ratio_b_se)
    z = (r_a - ratio_b) / se if se > 0 else 0.0
    return {"ratio_a": float(r_a), "ratio_b": float(ratio_b),
            "se": se, "z": float(z)}


def weighted_mass(weights: np.ndarray) -> tuple[float, float]:
    """(mean, standard error) of an importance-weighted mass estimate."""
    m = float(weights.mean())
    se = float(weights.std(ddof=1) / math.sqrt(len(weights)))
    return m, se


def mass_z(a: np.ndarray, b: np.ndarray) -> dict:
    """z-score between two independent mean estimates given per-sample
    contributions (zeros included)."""
    ma, sa = weighted_mass(a)
    mb, sb = weighted_mass(b)
    se = math.hypot(sa, sb)
    return {"lhs": ma, "rhs": mb, "se": se,
            "z": (ma - mb) / se if se > 0 else 0.0}


class CheckResult(dict):
    """A single named check inside a TestReport."""

    @staticmethod
    def ks(name: str, stat: float, p: float, threshold: float = 0.01,
           **extra) -> "CheckResult":
        c = CheckResult(name=name, kind="ks", statistic=stat, p_value=p,
                        threshold=threshold, passed=bool(p >= threshold))
        c.update(extra)
        return c

    @staticmethod
    def z(name: str, z: float, sigmas: float = 3.0, **extra) -> "CheckResult":
        c = CheckResult(name=name, kind="z", z_value=float(z),
                        threshold=sigmas, passed=bool(abs(z) <= sigmas))
        c.update(extra)
        return c

    @staticmethod
    def bound(name: str, value: float, lo: float, hi: float,
              **extra) -> "CheckResult":
        c = CheckResult(name=name, kind="interval", value=float(value),
                        lo=lo, hi=hi, passed=bool(lo <= value <= hi))
        c.update(extra)
        return c
