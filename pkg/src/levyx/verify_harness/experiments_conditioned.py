"""Experiments built on the pathwise conditioned-to-stay-positive process.

The Brownian members have exact oracles: the three-dimensional Bessel
process (norm of three Brownian skeletons), its uniform future-infimum law
(scale-function thinning makes finite windows exact), and the classical
first/last passage decompositions.  Jump families are tested by
self-consistent cross-estimates at three combined standard errors.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .. import _batch, fluctuation_theory as ft, path_algebra, stats
from ..conditioned_process import (Direction, build_conditioned,
                                   bessel3_reference, future_infimum,
                                   passage_functionals,
                                   semimartingale_local_time)
from ..levy_model import (CompoundPoissonJumps, LevyTriplet, NoJumps,
                          DriftClass, drift_classification)
from ..simulate import RngStream, sample_path, _increments
from .config import ExperimentConfig
from .experiments import (KS_P_THRESHOLD, KS_POLICY, Z_POLICY,
                          _new_report, _require_regularity, creep_tolerance)
from .reports import TestReport


def conditioned_batch(triplet: LevyTriplet, n: int, horizon: float, h: float,
                      eps: float, stream: RngStream):
    """Yield (index, ConditionedPath) built from fresh source paths."""
    b = triplet.effective_gaussian_b()
    for i in range(n):
        src = sample_path(triplet, horizon, h, stream.substream(i))
        lt0 = semimartingale_local_time(src, b, eps)
        yield i, build_conditioned(src, lt0, Direction.UP)


def bessel_marginal_oracle(n: int, u: float, source_horizon: float,
                           stream: RngStream) -> np.ndarray:
    """Bessel(3) marginal at time u, thinned to match the occupation-window
    conditioning of a construction from a finite Brownian horizon.

    The window event {occupation of (0,inf) by `source_horizon` exceeds u}
    has conditional probability 2(1 - Phi(J_u / sqrt(horizon - u))) given
    the positive excursions, where J_u is the future infimum; J_u for the
    Bessel process is exactly Uniform * (value at u).
    """
    from scipy.special import ndtr
    gen = stream.generator()
    r = math.sqrt(u) * np.linalg.norm(gen.standard_normal((n, 3)), axis=1)
    j_u = gen.random(n) * r
    accept = 2.0 * (1.0 - ndtr(j_u / math.sqrt(source_horizon - u)))
    return r[gen.random(n) < accept]


def _bessel_last_passage(x: float, h: float, n: int, stream: RngStream,
                         cap: float, horizon: float):
    """Bessel(3) stopped at its last passage of x, restricted to
    {last passage <= cap}; the no-future-dip event beyond the simulated
    horizon is decided exactly by a scale-function Bernoulli (prob
    1 - x / endpoint)."""
    lifetimes, fracs = [], []
    paths = bessel3_reference(n, horizon, h, stream)
    gen = stream.substream(999_331).generator()
    u_acc = gen.random(n)
    k_cap = int(round(cap / h))
    for p, u in zip(paths, u_acc):
        v = p.values
        below = np.nonzero(v[:k_cap + 1] <= x)[0]
        if len(below) == 0:
            continue
        i_star = int(below[-1])
        if np.any(v[k_cap + 1:] <= x):
            continue
        if u >= 1.0 - x / float(v[-1]):
            continue
        sigma = (i_star + 1) * h if i_star < k_cap else cap
        lifetimes.append(sigma)
        fracs.append(float(v[int(round(0.5 * sigma / h))]))
    return np.asarray(lifetimes), np.asarray(fracs)


# ---------------------------------------------------------------------------
# Williams at the first/last passage of a level
# ---------------------------------------------------------------------------

def run_williams_first_passage(config: ExperimentConfig) -> TestReport:
    """Creep branch (Brownian): the path reversed at its first passage of x,
    given creeping, against the Bessel(3) process to its last passage of x.
    Jump branch: the creep-probability identity between the conditioned
    path's last passage and the plain path's first passage, plus the
    pair law and independence checks at a jump crossing."""
    report = _new_report(config, KS_POLICY + "; " + Z_POLICY)
    t0 = time.time()
    if not _require_regularity(config.triplet, report):
        return report
    x, = config.require("x")
    h = config.grid_step
    tol = creep_tolerance(config.triplet, h)
    if isinstance(config.triplet.jumps, NoJumps):
        _williams1_brownian(config, report, x, tol)
    else:
        _williams1_jump(config, report, x, tol)
    report.runtime_seconds = time.time() - t0
    return report


def _williams1_brownian(config, report, x, tol):
    h = config.grid_step
    n = config.n_paths
    cap = float(config.get("lifetime_cap", 8.0))
    oracle_horizon = float(config.get("oracle_horizon", 2.0 * cap))
    votes = {"lifetime": 0, "midpoint": 0}
    creep_fracs = []
    for k_seed in range(3):
        seed = config.seed + k_seed
        lhs = _batch.step_crossing_batch(
            config.triplet, x, h, n, RngStream(seed, 11), horizon=cap,
            chunk_time=cap, fractions=(0.5,))
        creep = lhs["crossed"] & (lhs["value"] - x <= tol)
        creep_fracs.append(float(creep.sum()) / max(lhs["crossed"].sum(), 1))
        o_life, o_frac = _bessel_last_passage(
            x, h, int(config.get("n_reference", n)), RngStream(seed, 22),
            cap, oracle_horizon)
        pairs = {"lifetime": (lhs["time"][creep], o_life),
                 "midpoint": (lhs["rev_frac_0.5"][creep], o_frac)}
        for name, (a, b) in pairs.items():
            _, p = stats.ks_two_sample(a, b)
            votes[name] += p >= KS_P_THRESHOLD
    for name, v in votes.items():
        report.checks.append(stats.CheckResult(
            name=f"reversed_vs_bessel[{name}]", kind="ks_votes", votes=v,
            needed=2, passed=bool(v >= 2)))
    report.checks.append(stats.CheckResult.bound(
        "brownian_creep_fraction", float(np.mean(creep_fracs)), 0.95, 1.0))
    report.sample_sizes = {"lhs_paths_per_seed": n}


def _williams1_jump(config, report, x, tol):
    h = config.grid_step
    n_cp = int(config.get("n_conditioned", 1500))
    src_horizon = float(config.get("source_horizon", 48.0))
    eps = float(config.get("level_eps", 0.05))
    w0 = float(config.get("post_window", 2.0))

    # Conditioned side: last passage of x with creep/jump classification.
    rows = []
    n_unresolved = 0
    for i, cp in conditioned_batch(config.triplet, n_cp, src_horizon, h,
                                   eps, RngStream(config.seed, 33)):
        if cp.empty:
            n_unresolved += 1
            continue
        pf = passage_functionals(cp, x)
        if not pf.resolved or not math.isfinite(pf.sigma_time):
            n_unresolved += 1
            continue
        lp = path_algebra.last_passage(cp.base, x, cp.base.lifetime)
        row = {"sigma": pf.sigma_time, "value": lp.value_after,
               "pre": lp.pre_value}
        tail = path_algebra.shift(cp.base, min(pf.sigma_time,
                                               cp.base.lifetime))
        if tail.lifetime >= w0:
            g_inf, _ = path_algebra.extremum_times(tail, tail.lifetime)
            row["y_split"] = g_inf
            row["y_inf"] = float(path_algebra.running_extrema(tail)[1][-1])
            post = path_algebra.shift(tail, g_inf)
            k0 = int(round(w0 / h))
            if post.n_cells >= k0:
                row["post_win_sup"] = float(post.values[:k0 + 1].max())
        rows.append(row)
    excl = n_unresolved / max(n_cp, 1)
    report.exclusion_rates = {"unresolved_sigma": excl}
    if excl >= 0.05:
        report.inconclusive_reason = \
            f"unresolved last-passage rate {excl:.3f} >= 5%"
        return
    sig_val = np.array([r["value"] for r in rows])
    sig_pre = np.array([r["pre"] for r in rows])
    cp_creep = (sig_val - x) <= tol
    p_cp = float(cp_creep.mean())
    se_cp = math.sqrt(max(p_cp * (1 - p_cp), 1e-12) / len(rows))

    # Plain-path side.
    res = ft.estimate_creeping(config.triplet, x, config.n_paths, h,
                               RngStream(config.seed, 44),
                               horizon=float(config.get("horizon", 32.0)))
    z = (p_cp - res["estimate"]) / math.hypot(se_cp, res["se"])
    report.checks.append(stats.CheckResult.z(
        "creep_probability_identity", z, conditioned=p_cp,
        plain=res["estimate"], se=math.hypot(se_cp, res["se"])))

    # Pair law at a jump crossing: conditioned components against the plain
    # path split at its pre-passage maximum.
    xb = _batch.step_crossing_batch(
        config.triplet, x, h, int(config.get("n_reference", 20000)),
        RngStream(config.seed, 55),
        horizon=float(config.get("horizon", 32.0)))
    xq = xb["crossed"] & xb["by_jump"] & (xb["value"] - x > tol)
    cq = ~cp_creep & ((sig_val - x) > tol)
    y_split = np.array([r.get("y_split", np.nan) for r in rows])
    y_inf = np.array([r.get("y_inf", np.nan) for r in rows])
    post_sup = np.array([r.get("post_win_sup", np.nan) for r in rows])
    cq_tail = cq & np.isfinite(y_split)
    pairs = {
        "head_endpoint": (sig_val[cq],
                          xb["jump_size"][xq] + xb["s_max_before"][xq]),
        "head_start": ((sig_val - sig_pre)[cq], xb["jump_size"][xq]),
        "tail_lifetime": (y_split[cq_tail],
                          (xb["time"] - xb["g_max"])[xq]),
        "tail_depth": (y_inf[cq_tail],
                       (xb["pre_value"] - xb["s_max_before"])[xq]),
    }
    for name, (a, b) in pairs.items():
        if len(a) < 100 or len(b) < 100:
            report.notes.append(f"pair check {name}: too few samples "
                                f"({len(a)}, {len(b)})")
            continue
        stat, p = stats.ks_two_sample(a, b)
        report.checks.append(stats.CheckResult.ks(
            f"jump_pair[{name}]", stat, p))

    # Independence of the post-infimum tail from the head, and its law.
    have_post = cq & np.isfinite(post_sup)
    f_head = sig_val[have_post]
    g_tail = post_sup[have_post]
    if len(f_head) >= 100:
        res_c = stats.corr_independence(f_head, g_tail)
        report.checks.append(stats.CheckResult(
            name="post_tail_independence", kind="corr", **res_c))
        fresh = []
        for i, cp in conditioned_batch(config.triplet,
                                       min(len(g_tail), 800), 8.0 + w0, h,
                                       eps, RngStream(config.seed, 66)):
            if not cp.empty and cp.base.lifetime >= w0:
                k0 = int(round(w0 / h))
                fresh.append(float(cp.base.values[:k0 + 1].max()))
        stat, p = stats.ks_two_sample(g_tail, np.asarray(fresh))
        report.checks.append(stats.CheckResult.ks(
            "post_tail_is_conditioned_law", stat, p))
    report.sample_sizes = {"conditioned": len(rows),
                           "conditioned_jump_cross": int(cq.sum()),
                           "plain_jump_cross": int(xq.sum())}


# ---------------------------------------------------------------------------
# Excursion disintegration over a uniform time point
# ---------------------------------------------------------------------------

def run_bismut_excursion(config: ExperimentConfig) -> TestReport:
    """Time-integral disintegration of the excursion above the infimum:
    occupation of a thin band at level x factorizes into the ladder-height
    potential density times the conditioned-path law up to its last passage
    of x times a fresh first-passage-below leg.

    Tested in ratio across two levels so every normalization cancels:
    LHS(x1)/LHS(x2) from complete excursions against
    [u*(x1) G1 D1] / [u*(x2) G2 D2] from the module estimators.
    """
    report = _new_report(config, Z_POLICY)
    t0 = time.time()
    if not _require_regularity(config.triplet, report):
        return report
    levels = [float(v) for v in config.get("levels", [0.4, 0.8])]
    if len(levels) != 2:
        raise ValueError("bismut needs exactly two levels")
    x1, x2 = levels
    h = config.grid_step
    delta = float(config.get("band_delta", 0.05))
    c_g = float(config.get("pre_window", 0.25))
    c_d = float(config.get("post_window", 0.25))
    horizon = float(config.get("horizon", 24.0))
    n = config.n_paths
    tol = creep_tolerance(config.triplet, h)

    combos = (("G1D1", False, False), ("G2D1", True, False),
              ("G1D2", False, True))
    lhs = {(name, lv): [] for name, _, _ in combos for lv in (0, 1)}
    stream = RngStream(config.seed, 77)
    n_exc = 0
    for i in range(n):
        path = sample_path(config.triplet, horizon, h, stream.substream(i))
        row = {k: 0.0 for k in lhs}
        for rec in ft.excursions_above_infimum(path):
            if rec.height < min(x1, x2) - delta:
                continue
            n_exc += 1
            vals = rec.segment.values[:-1]
            times = np.arange(len(vals)) * h
            zeta = rec.lifetime
            for lv, x_c in enumerate((x1, x2)):
                band = np.abs(vals - x_c) <= delta
                if not band.any():
                    continue
                for name, use_g, use_d in combos:
                    mask = band
                    if use_g:
                        mask = mask & (times > c_g)
                    if use_d:
                        mask = mask & (times < zeta - c_d)
                    row[(name, lv)] += h * float(mask.sum())
        for k in lhs:
            lhs[k].append(row[k])
    lhs = {k: np.asarray(v) for k, v in lhs.items()}
    if n_exc < 500:
        report.inconclusive_reason = f"only {n_exc} tall excursions (< 500)"
        report.runtime_seconds = time.time() - t0
        return report

    # Ladder-height potential integrated over each band.
    n_lad = int(config.get("n_ladders", 2500))
    lad_hor = float(config.get("ladder_horizon", horizon))
    eps = float(config.get("level_eps", 0.05))
    dv = float(config.get("ladder_dv", 0.01))
    u_band = {0: [], 1: []}
    stream_l = RngStream(config.seed, 88)
    for i in range(n_lad):
        path = sample_path(config.triplet, lad_hor, h, stream_l.substream(i))
        lt = ft.local_time_at_supremum(path, ft.LocalTimeMethod.
                                       EPS_OCCUPATION, eps)
        lad = ft.ladder_process(path, lt, "max", dv=dv)
        for lv, x_c in enumerate((x1, x2)):
            inside = np.abs(lad.heights - x_c) <= delta
            u_band[lv].append(dv * float(inside.sum()))
    u_band = {lv: np.asarray(v) for lv, v in u_band.items()}

    # Conditioned-path factor: P(last passage of x > c_g | creeps at x).
    # Brownian sources decide "the last passage lies beyond the window"
    # exactly, by the scale-function Bernoulli of the Bessel(3) limit
    # (probability x / endpoint); such paths creep and count for the window
    # indicator, so no path is excluded.  Jump sources use the future-
    # infimum gate with the exclusion-rate budget.
    brownian = isinstance(config.triplet.jumps, NoJumps)
    n_cp = int(config.get("n_conditioned", 900))
    src_horizon = float(config.get("source_horizon", 48.0))
    g_fac = {0: [], 1: []}
    n_unresolved = 0.0
    gen_u = RngStream(config.seed, 98).generator()
    u_tail = gen_u.random((n_cp, 2))
    for i, cp in conditioned_batch(config.triplet, n_cp, src_horizon, h,
                                   eps, RngStream(config.seed, 99)):
        if cp.empty:
            n_unresolved += 1
            continue
        for lv, x_c in enumerate((x1, x2)):
            if brownian:
                r_end = cp.base.end
                if r_end <= x_c or u_tail[i, lv] < x_c / r_end:
                    g_fac[lv].append(1.0)
                    continue
                lp = path_algebra.last_passage(cp.base, x_c,
                                               cp.base.lifetime)
                if not math.isfinite(lp.time):
                    g_fac[lv].append(0.0 if c_g > 0 else 1.0)
                else:
                    g_fac[lv].append(1.0 if lp.time > c_g else 0.0)
                continue
            pf = passage_functionals(cp, x_c)
            if not pf.resolved or not math.isfinite(pf.sigma_time):
                n_unresolved += 0.5
                continue
            if pf.value_at_sigma - x_c <= tol:
                g_fac[lv].append(1.0 if pf.sigma_time > c_g else 0.0)
    excl = n_unresolved / max(n_cp, 1)
    report.exclusion_rates = {"unresolved_sigma": float(excl)}
    if excl >= 0.05:
        report.inconclusive_reason = \
            f"unresolved last-passage rate {excl:.3f} >= 5%"
        report.runtime_seconds = time.time() - t0
        return report

    # First-passage-below factor: P(tau_{-x} > c_d).
    n_d = int(config.get("n_reference", 20000))
    d_fac = {}
    for lv, x_c in enumerate((x1, x2)):
        fp = _batch.first_passage_batch(
            LevyTriplet(-config.triplet.drift_a, config.triplet.gaussian_b,
                        _mirror_jumps(config.triplet)), x_c, h, n_d,
            RngStream(config.seed, 110 + lv), horizon=c_d * 4 + 1.0)
        ok = fp["crossed"] & (fp["time"] <= c_d)
        d_fac[lv] = 1.0 - ok.mean()

    def rhs_factor(lv, use_g, use_d):
        val = float(u_band[lv].mean())
        rel2 = (u_band[lv].std(ddof=1) / math.sqrt(n_lad)
                / max(val, 1e-12)) ** 2
        if use_g:
            g = np.asarray(g_fac[lv])
            pg = float(g.mean())
            val *= pg
            rel2 += max(pg * (1 - pg), 1e-12) / len(g) / max(pg, 1e-9) ** 2
        if use_d:
            pd = float(d_fac[lv])
            val *= pd
            rel2 += max(pd * (1 - pd), 1e-12) / n_d / max(pd, 1e-9) ** 2
        return val, rel2

    for name, use_g, use_d in combos:
        r1, rel1 = rhs_factor(0, use_g, use_d)
        r2, rel2 = rhs_factor(1, use_g, use_d)
        ratio_rhs = r1 / r2
        se_rhs = ratio_rhs * math.sqrt(rel1 + rel2)
        res = stats.bootstrap_ratio_z(lhs[(name, 0)], lhs[(name, 1)],
                                      ratio_rhs, se_rhs, seed=config.seed)
        report.checks.append(stats.CheckResult.z(
            f"bismut_ratio[{name}]", res["z"], ratio_lhs=res["ratio_a"],
            ratio_rhs=ratio_rhs, se=res["se"]))
    report.sample_sizes = {"paths": n, "tall_excursions": n_exc,
                           "ladder_paths": n_lad,
                           "conditioned_hits": {lv: len(g_fac[lv])
                                                for lv in g_fac}}
    report.runtime_seconds = time.time() - t0
    return report


def _mirror_jumps(triplet: LevyTriplet):
    j = triplet.jumps
    if isinstance(j, NoJumps):
        return j
    if isinstance(j, CompoundPoissonJumps):
        from ..levy_model import (DiracMixtureLaw, GaussianLaw,
                                  TwoSidedExponentialLaw)
        law = j.law
        if isinstance(law, DiracMixtureLaw):
            m = DiracMixtureLaw(tuple(-a for a in law.atoms), law.weights)
        elif isinstance(law, TwoSidedExponentialLaw):
            m = TwoSidedExponentialLaw(1.0 - law.p_up, law.mean_down,
                                       law.mean_up)
        elif isinstance(law, GaussianLaw):
            m = GaussianLaw(-law.mu, law.sigma)
        else:
            raise TypeError("cannot mirror this jump law")
        return CompoundPoissonJumps(j.rate, m)
    from ..levy_model import TruncatedStableJumps
    return TruncatedStableJumps(j.index, -j.skew, j.inner_cutoff)


# ---------------------------------------------------------------------------
# Creep-ending excursion reversal and the diverging zero-overshoot mass
# ---------------------------------------------------------------------------

def run_creeping_excursion_reversal(config: ExperimentConfig) -> TestReport:
    """Excursions under the supremum that end continuously, reversed at
    their lifetime, share the (normalization-free) conditional law of the
    excursions above the infimum that end continuously; meanwhile the
    truncated count of zero-overshoot excursions diverges as the lifetime
    floor shrinks."""
    report = _new_report(config, KS_POLICY)
    t0 = time.time()
    if not _require_regularity(config.triplet, report) \
            or config.triplet.effective_gaussian_b() <= 0:
        report.inconclusive_reason = "needs a Brownian component (two-sided " \
            "creeping)"
        return report
    h = config.grid_step
    tol = creep_tolerance(config.triplet, h)
    t_floor = float(config.get("lifetime_floor", 0.25))
    horizon = float(config.get("horizon", 24.0))
    n = config.n_paths
    votes = {"lifetime": 0, "rev_sup": 0, "midpoint": 0}
    n_above = n_below = 0
    eps_levels = [float(v) for v in config.get("eps_levels",
                                               [0.1, 0.01, 0.001])]
    eps_counts = np.zeros(len(eps_levels))
    for k_seed in range(3):
        seed = config.seed + k_seed
        above = {"lifetime": [], "rev_sup": [], "midpoint": []}
        below = {"lifetime": [], "rev_sup": [], "midpoint": []}
        sa = RngStream(seed, 121)
        sb = RngStream(seed, 122)
        for i in range(n):
            pa = sample_path(config.triplet, horizon, h, sa.substream(i))
            for rec in ft.excursions_above_infimum(pa):
                if rec.end_value >= -tol and rec.lifetime > t_floor:
                    vals = rec.segment.values
                    above["lifetime"].append(rec.lifetime)
                    above["rev_sup"].append(rec.height)
                    above["midpoint"].append(float(vals[len(vals) // 2]))
            pb = sample_path(config.triplet, horizon, h, sb.substream(i))
            for rec in ft.excursions_below_supremum(pb):
                if rec.end_value <= tol:
                    if k_seed == 0:
                        for j, e in enumerate(eps_levels):
                            eps_counts[j] += rec.lifetime > e
                    if rec.lifetime > t_floor:
                        vals = rec.segment.values
                        below["lifetime"].append(rec.lifetime)
                        below["rev_sup"].append(
                            rec.end_value - float(vals.min()))
                        below["midpoint"].append(
                            rec.end_value - float(vals[len(vals) // 2]))
        n_above += len(above["lifetime"])
        n_below += len(below["lifetime"])
        for name in votes:
            _, p = stats.ks_two_sample(np.asarray(above[name]),
                                       np.asarray(below[name]))
            votes[name] += p >= KS_P_THRESHOLD
    if min(n_above, n_below) < 500 * 3:
        report.inconclusive_reason = \
            f"fewer than 500 creeping excursions per side per seed " \
            f"({n_above}, {n_below})"
        report.runtime_seconds = time.time() - t0
        return report
    for name, v in votes.items():
        report.checks.append(stats.CheckResult(
            name=f"creep_reversal[{name}]", kind="ks_votes", votes=v,
            needed=2, passed=bool(v >= 2)))
    increasing = bool(np.all(np.diff(eps_counts) > 0))
    report.checks.append(stats.CheckResult(
        name="zero_overshoot_mass_divergence", kind="monotone",
        eps_levels=eps_levels, counts=[int(c) for c in eps_counts],
        passed=increasing))
    report.sample_sizes = {"above": n_above, "below": n_below}
    report.runtime_seconds = time.time() - t0
    return report


# ---------------------------------------------------------------------------
# Decomposition of the excursion at its maximum
# ---------------------------------------------------------------------------

def run_williams_excursion_max(config: ExperimentConfig) -> TestReport:
    """Excursions above the infimum conditioned on the height of their
    maximum: the two legs around the maximum are independent; the rising
    leg follows the conditioned path stopped at its first passage (Bessel(3)
    for Brownian sources); the conditioned path restarted at the level has
    the stated infimum law (uniform for Brownian)."""
    report = _new_report(config, KS_POLICY + "; " + Z_POLICY)
    t0 = time.time()
    if not _require_regularity(config.triplet, report):
        return report
    if drift_classification(config.triplet) is not DriftClass.OSCILLATES:
        report.inconclusive_reason = "needs an oscillating triplet"
        return report
    x, = config.require("x")
    h = config.grid_step
    delta = float(config.get("delta", 0.05))
    horizon = float(config.get("horizon", 24.0))
    n = config.n_paths
    brownian = isinstance(config.triplet.jumps, NoJumps)

    pre_life, pre_mid = [], []
    post_life, post_end = [], []
    pre_life_half, pre_mid_half = [], []
    stream = RngStream(config.seed, 131)
    for i in range(n):
        path = sample_path(config.triplet, horizon, h, stream.substream(i))
        for rec in ft.excursions_above_infimum(path):
            if not x <= rec.height < x + delta:
                continue
            vals = rec.segment.values
            g_idx = int(np.argmax(vals))
            if g_idx == 0 or g_idx >= len(vals) - 1:
                continue
            pre_life.append(g_idx * h)
            pre_mid.append(float(vals[g_idx // 2]))
            post_life.append(rec.lifetime - g_idx * h)
            post_end.append(rec.end_value - float(vals[g_idx]))
            if rec.height < x + delta / 2:
                pre_life_half.append(g_idx * h)
                pre_mid_half.append(float(vals[g_idx // 2]))
    n_band = len(pre_life)
    if n_band < 300:
        report.inconclusive_reason = \
            f"band acceptance too low: {n_band} excursions"
        report.runtime_seconds = time.time() - t0
        return report
    pre_life = np.asarray(pre_life)
    pre_mid = np.asarray(pre_mid)
    post_life = np.asarray(post_life)
    post_end = np.asarray(post_end)

    for name, (f, g) in {
            "mid_vs_postlife": (pre_mid, post_life),
            "prelife_vs_postdepth": (pre_life, post_end)}.items():
        res = stats.corr_independence(f, g)
        report.checks.append(stats.CheckResult(
            name=f"leg_independence[{name}]", kind="corr", **res))

    # Rising leg against the conditioned-path first-passage oracle.
    if brownian:
        n_o = int(config.get("n_reference", 4000))
        o_paths = bessel3_reference(n_o, float(config.get(
            "oracle_horizon", 6.0)), h, RngStream(config.seed, 141))
        o_life, o_mid = [], []
        for p in o_paths:
            above = np.nonzero(p.values > x)[0]
            if len(above) == 0:
                continue
            k = int(above[0])
            o_life.append(k * h)
            o_mid.append(float(p.values[k // 2]))
        for name, a, b in (("lifetime", pre_life, np.asarray(o_life)),
                           ("midpoint", pre_mid, np.asarray(o_mid))):
            stat, p = stats.ks_two_sample(a, b)
            report.checks.append(stats.CheckResult.ks(
                f"rising_leg_vs_bessel[{name}]", stat, p))
            stat_h, p_h = stats.ks_two_sample(
                np.asarray(pre_life_half if name == "lifetime"
                           else pre_mid_half), b)
            report.notes.append({"half_band_check": name, "ks": stat_h,
                                 "p": p_h, "n_half": len(pre_life_half)})

    # Conditioned path restarted at the level: independence of the split
    # and the infimum law of the restarted piece.
    _restarted_piece_checks(config, report, x, brownian)
    report.sample_sizes = {"band_excursions": n_band}
    report.exclusion_rates.setdefault("band_acceptance",
                                      n_band / max(n, 1))
    report.runtime_seconds = time.time() - t0
    return report


def _restarted_piece_checks(config, report, x, brownian):
    h = config.grid_step
    tol = creep_tolerance(config.triplet, h)
    eps = float(config.get("level_eps", 0.05))
    n_cp = int(config.get("n_conditioned", 1200))
    src_horizon = float(config.get("source_horizon", 32.0))
    w0 = float(config.get("post_window", 1.0))
    infima, ends = [], []
    split_depth, tail_sup = [], []
    fresh_sup = []
    n_short = 0
    gen_u = RngStream(config.seed, 151).generator()
    u1 = gen_u.random(n_cp)
    u2 = gen_u.random(n_cp)
    for i, cp in conditioned_batch(config.triplet, n_cp, src_horizon, h,
                                   eps, RngStream(config.seed, 152)):
        if cp.empty:
            continue
        fp = path_algebra.first_passage_up(cp.base, x)
        if not fp.happened or fp.value - x > tol:
            continue
        z_piece = path_algebra.shift(cp.base, fp.time)
        if z_piece.lifetime < w0 * 2:
            n_short += 1
            continue
        vals = x + z_piece.values
        m = float(vals.min())
        r_end = float(vals[-1])
        if brownian:
            # Exact infimum of the restarted transient piece: the window
            # minimum survives with probability 1 - m / endpoint, else the
            # true infimum is uniform below the window minimum.
            if r_end <= m:
                continue
            v_inf = m if u1[i] >= m / r_end else u2[i] * m
            infima.append(v_inf)
        else:
            if vals[-1] > 2.0 * x:
                infima.append(m)
            else:
                n_short += 1
        g_inf, _ = path_algebra.extremum_times(z_piece, z_piece.lifetime)
        post = path_algebra.shift(z_piece, g_inf)
        k0 = int(round(w0 / h))
        if post.n_cells >= k0:
            split_depth.append(float(path_algebra.eval_at(z_piece, g_inf)))
            tail_sup.append(float(post.values[:k0 + 1].max()))
    for i, cp in conditioned_batch(config.triplet, min(800, n_cp),
                                   8.0 + w0, h, eps,
                                   RngStream(config.seed, 153)):
        k0 = int(round(w0 / h))
        if not cp.empty and cp.base.n_cells >= k0:
            fresh_sup.append(float(cp.base.values[:k0 + 1].max()))
    report.exclusion_rates["restart_window_short"] = \
        n_short / max(n_cp, 1)
    if len(split_depth) >= 100 and len(tail_sup) >= 100:
        res = stats.corr_independence(np.asarray(split_depth),
                                      np.asarray(tail_sup))
        report.checks.append(stats.CheckResult(
            name="restart_split_independence", kind="corr", **res))
        stat, p = stats.ks_two_sample(np.asarray(tail_sup),
                                      np.asarray(fresh_sup))
        report.checks.append(stats.CheckResult.ks(
            "restart_post_infimum_law", stat, p))
    if brownian and len(infima) >= 200:
        import scipy.stats as sps
        res = sps.ks_1samp(np.asarray(infima),
                           lambda v: np.clip(np.asarray(v) / x, 0, 1))
        report.checks.append(stats.CheckResult.ks(
            "restart_infimum_uniform", float(res.statistic),
            float(res.pvalue)))
    elif infima:
        dens, se = ft.estimate_potential_density(
            _min_ladder_batch(config), np.linspace(0, x, 6))
        emp, _ = np.histogram(np.asarray(infima), bins=np.linspace(0, x, 6))
        emp = emp / max(len(infima), 1)
        model = dens[::-1] / max(dens.sum(), 1e-12)
        for k in range(len(model)):
            se_k = math.sqrt(emp[k] * (1 - emp[k]) / max(len(infima), 2)
                             + (se[::-1][k] / max(dens.sum(), 1e-12)) ** 2)
            report.checks.append(stats.CheckResult.z(
                f"restart_infimum_bin{k}", (emp[k] - model[k])
                / max(se_k, 1e-9), empirical=float(emp[k]),
                model=float(model[k])))


def _min_ladder_batch(config):
    h = config.grid_step
    eps = float(config.get("level_eps", 0.05))
    out = []
    stream = RngStream(config.seed, 161)
    for i in range(int(config.get("n_ladders", 1500))):
        path = sample_path(config.triplet,
                           float(config.get("horizon", 24.0)), h,
                           stream.substream(i))
        lt = ft.local_time_at_infimum(path, ft.LocalTimeMethod.
                                      EPS_OCCUPATION, eps)
        out.append(ft.ladder_process(path, lt, "min", dv=0.01))
    return out
