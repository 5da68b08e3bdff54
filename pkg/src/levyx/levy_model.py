"""Levy process families specified by their characteristic triplet.

A process is described by ``LevyTriplet(drift_a, gaussian_b, jumps)`` so that
its characteristic exponent is

    psi(lam) = i*a*lam + b*lam**2 + integral pi(dr) (1 - e^{i lam r}
               + i lam r 1{|r|<1})

and E[exp(i lam X_t)] = exp(-t psi(lam)).  The simulator targets exactly this
sign convention; a positive ``drift_a`` therefore pushes the path *down*
(path drift is ``-a`` before jump compensation).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

__all__ = [
    "JumpLaw",
    "DiracMixtureLaw",
    "TwoSidedExponentialLaw",
    "GaussianLaw",
    "JumpSpec",
    "NoJumps",
    "CompoundPoissonJumps",
    "TruncatedStableJumps",
    "LevyTriplet",
    "DriftClass",
    "RegularityStatus",
    "char_exponent",
    "regularity_check",
    "drift_classification",
    "triplet_from_config",
]

QUAD_ABS_TOL = 1e-9
QUAD_LIMIT = 400


class QuadratureError(ArithmeticError):
    """Raised when an adaptive integral fails to reach the requested tolerance."""


def _quad(f, a, b, points=None):
    val, err = integrate.quad(f, a, b, epsabs=QUAD_ABS_TOL, epsrel=1e-10,
                              limit=QUAD_LIMIT, points=points)
    if not math.isfinite(val) or err > max(1e-7, 1e-6 * abs(val)):
        raise QuadratureError(
            f"integral on [{a}, {b}] did not converge: value={val}, err={err}")
    return val


# ---------------------------------------------------------------------------
# Jump size laws for the compound Poisson case
# ---------------------------------------------------------------------------

class JumpLaw:
    """A probability law on R \\ {0} with sampler and analytic summaries.

    Subclasses provide everything the toolkit needs: sampling, the mean,
    the tail P(J > r), the truncated means used in the compensator, and
    sampling of the law conditioned to be positive (used by the
    importance-sampled experiments).
    """

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        """E[J]; raises ValueError when undefined."""
        raise NotImplementedError

    def tail(self, r: float) -> float:
        """P(J > r) for any real r."""
        raise NotImplementedError

    def mean_small(self) -> float:
        """E[J 1{|J| < 1}] (compensator contribution per jump)."""
        raise NotImplementedError

    def cf(self, lam: float) -> complex:
        """E[exp(i lam J)], by closed form or quadrature."""
        raise NotImplementedError

    def positive_mass(self) -> float:
        """P(J > 0)."""
        return self.tail(0.0)

    def sample_positive(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Sample from the law conditioned on {J > 0}."""
        raise NotImplementedError

    def mean_large(self) -> float:
        """E[J 1{|J| >= 1}]."""
        return self.mean() - self.mean_small()


@dataclass(frozen=True)
class DiracMixtureLaw(JumpLaw):
    """Finite mixture of point masses; weights need not be normalized."""

    atoms: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ValueError("atoms and weights must be nonempty, equal length")
        if any(a == 0.0 for a in self.atoms):
            raise ValueError("jump law must not charge 0")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        total = sum(self.weights)
        object.__setattr__(self, "weights",
                           tuple(w / total for w in self.weights))

    def sample(self, gen, n):
        idx = gen.choice(len(self.atoms), size=n, p=np.asarray(self.weights))
        return np.asarray(self.atoms)[idx]

    def mean(self):
        return float(sum(a * w for a, w in zip(self.atoms, self.weights)))

    def tail(self, r):
        return float(sum(w for a, w in zip(self.atoms, self.weights) if a > r))

    def mean_small(self):
        return float(sum(a * w for a, w in zip(self.atoms, self.weights)
                         if abs(a) < 1.0))

    def cf(self, lam):
        return complex(sum(w * np.exp(1j * lam * a)
                           for a, w in zip(self.atoms, self.weights)))

    def sample_positive(self, gen, n):
        pos = [(a, w) for a, w in zip(self.atoms, self.weights) if a > 0]
        if not pos:
            raise ValueError("law does not charge (0, inf)")
        atoms, weights = zip(*pos)
        p = np.asarray(weights) / sum(weights)
        idx = gen.choice(len(atoms), size=n, p=p)
        return np.asarray(atoms)[idx]


@dataclass(frozen=True)
class TwoSidedExponentialLaw(JumpLaw):
    """P(J > 0) = p_up with J|+ ~ Exp(mean_up), -J|- ~ Exp(mean_down)."""

    p_up: float = 0.5
    mean_up: float = 0.5
    mean_down: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError("p_up must lie in [0, 1]")
        if self.mean_up <= 0 or self.mean_down <= 0:
            raise ValueError("exponential means must be positive")

    def sample(self, gen, n):
        sign = gen.random(n) < self.p_up
        mags_up = gen.exponential(self.mean_up, size=n)
        mags_dn = gen.exponential(self.mean_down, size=n)
        return np.where(sign, mags_up, -mags_dn)

    def mean(self):
        return self.p_up * self.mean_up - (1 - self.p_up) * self.mean_down

    def tail(self, r):
        if r >= 0:
            return self.p_up * math.exp(-r / self.mean_up)
        return self.p_up + (1 - self.p_up) * (1 - math.exp(r / self.mean_down))

    def mean_small(self):
        # E[J 1{0<J<1}] = p_up * m (1 - e^{-1/m}(1 + 1/m)) and the mirror term.
        def trunc(m):
            return m - math.exp(-1.0 / m) * (m + 1.0)
        return (self.p_up * trunc(self.mean_up)
                - (1 - self.p_up) * trunc(self.mean_down))

    def cf(self, lam):
        up = 1.0 / (1.0 - 1j * lam * self.mean_up)
        dn = 1.0 / (1.0 + 1j * lam * self.mean_down)
        return self.p_up * up + (1 - self.p_up) * dn

    def sample_positive(self, gen, n):
        if self.p_up == 0:
            raise ValueError("law does not charge (0, inf)")
        return gen.exponential(self.mean_up, size=n)


@dataclass(frozen=True)
class GaussianLaw(JumpLaw):
    """Normal jump sizes (Merton style); the atom at 0 has measure zero."""

    mu: float = 0.0
    sigma: float = 0.3

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def sample(self, gen, n):
        return self.mu + self.sigma * gen.standard_normal(n)

    def mean(self):
        return self.mu

    def tail(self, r):
        return float(ndtr((self.mu - r) / self.sigma))

    def mean_small(self):
        # E[J 1{a<J<b}] for a=-1,b=1 via the truncated-normal identity.
        a = (-1.0 - self.mu) / self.sigma
        b = (1.0 - self.mu) / self.sigma
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        mass = float(ndtr(b) - ndtr(a))
        return self.mu * mass + self.sigma * (phi(a) - phi(b))

    def cf(self, lam):
        return complex(np.exp(1j * lam * self.mu - 0.5 * (lam * self.sigma) ** 2))

    def sample_positive(self, gen, n):
        # Inverse-CDF on the conditioned tail keeps the draw count deterministic.
        from scipy.special import ndtri
        p0 = 1.0 - self.positive_mass()
        u = gen.random(n)
        return self.mu + self.sigma * ndtri(p0 + u * (1.0 - p0))


# ---------------------------------------------------------------------------
# Jump specifications
# ---------------------------------------------------------------------------

class JumpSpec:
    """Jump part of a triplet; one of NoJumps / CompoundPoissonJumps /
    TruncatedStableJumps."""


@dataclass(frozen=True)
class NoJumps(JumpSpec):
    pass


@dataclass(frozen=True)
class CompoundPoissonJumps(JumpSpec):
    rate: float
    law: JumpLaw

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def levy_tail(self, r: float) -> float:
        """pi((r, inf)) = rate * P(J > r)."""
        return self.rate * self.law.tail(r)


@dataclass(frozen=True)
class TruncatedStableJumps(JumpSpec):
    """Stable Levy density c(r) |r|^{-1-alpha} restricted to |r| >= eps.

    The removed small jumps are replaced at simulation time by a Gaussian
    term with matched variance (folded into the effective gaussian_b), so
    the law actually simulated has a strictly positive Brownian component.
    The overall scale constant is fixed to 1; c_+ = (1+skew)/2 and
    c_- = (1-skew)/2.
    """

    index: float
    skew: float = 0.0
    inner_cutoff: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.index < 2.0:
            raise ValueError("index must lie in (0, 2)")
        if not -1.0 <= self.skew <= 1.0:
            raise ValueError("skew must lie in [-1, 1]")
        if self.inner_cutoff <= 0:
            raise ValueError("inner_cutoff must be positive")

    @property
    def c_plus(self) -> float:
        return (1.0 + self.skew) / 2.0

    @property
    def c_minus(self) -> float:
        return (1.0 - self.skew) / 2.0

    def small_jump_variance(self) -> float:
        """integral_{|r|<eps} r^2 pi(dr), the matched-variance substitute."""
        a, eps = self.index, self.inner_cutoff
        return (self.c_plus + self.c_minus) * eps ** (2.0 - a) / (2.0 - a)

    def big_jump_rate(self) -> float:
        """pi({|r| >= eps}), the compound Poisson rate actually simulated."""
        a, eps = self.index, self.inner_cutoff
        return (self.c_plus + self.c_minus) * eps ** (-a) / a

    def sample_big_jumps(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Pareto tails beyond the cutoff with the skew-split sign."""
        a, eps = self.index, self.inner_cutoff
        total = self.c_plus + self.c_minus
        mags = eps * gen.random(n) ** (-1.0 / a)
        sign = np.where(gen.random(n) < self.c_plus / total, 1.0, -1.0)
        return sign * mags

    def mean_small(self) -> float:
        """integral_{eps<=|r|<1} r pi(dr) (0 when eps >= 1)."""
        a, eps = self.index, self.inner_cutoff
        if eps >= 1.0:
            return 0.0
        if a == 1.0:
            base = math.log(1.0 / eps)
        else:
            base = (1.0 - eps ** (1.0 - a)) / (1.0 - a)
        return (self.c_plus - self.c_minus) * base

    def mean_large(self) -> float:
        """integral_{|r|>=max(1,eps)} r pi(dr); diverges for index <= 1."""
        a = self.index
        if a <= 1.0:
            raise ValueError("tail mean diverges for index <= 1")
        lo = max(1.0, self.inner_cutoff)
        return (self.c_plus - self.c_minus) * lo ** (1.0 - a) / (a - 1.0)

    def levy_tail(self, r: float) -> float:
        if r < self.inner_cutoff:
            r = self.inner_cutoff
        return self.c_plus * r ** (-self.index) / self.index


# ---------------------------------------------------------------------------
# The triplet itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevyTriplet:
    """Characteristic data (a, b, jumps); immutable and safe to share."""

    drift_a: float
    gaussian_b: float
    jumps: JumpSpec = field(default_factory=NoJumps)

    def __post_init__(self):
        if self.gaussian_b < 0:
            raise ValueError("gaussian_b must be nonnegative")
        if not isinstance(self.jumps, (NoJumps, CompoundPoissonJumps,
                                       TruncatedStableJumps)):
            raise TypeError("unsupported jump specification")

    def effective_gaussian_b(self) -> float:
        """gaussian_b plus the matched-variance substitute for truncated
        stable small jumps (variance per unit time is 2*b)."""
        b = self.gaussian_b
        if isinstance(self.jumps, TruncatedStableJumps):
            b += 0.5 * self.jumps.small_jump_variance()
        return b

    def path_drift(self) -> float:
        """Deterministic drift of the simulated path per unit time:
        -(a + integral_{|r|<1} r pi(dr))."""
        comp = 0.0
        if isinstance(self.jumps, CompoundPoissonJumps):
            comp = self.jumps.rate * self.jumps.law.mean_small()
        elif isinstance(self.jumps, TruncatedStableJumps):
            comp = self.jumps.mean_small()
        return -(self.drift_a + comp)

    def mean_at_unit_time(self) -> float:
        """E[X_1] = -a + integral_{|r|>=1} r pi(dr); ValueError if undefined."""
        tail_mean = 0.0
        if isinstance(self.jumps, CompoundPoissonJumps):
            tail_mean = self.jumps.rate * self.jumps.law.mean_large()
        elif isinstance(self.jumps, TruncatedStableJumps):
            tail_mean = self.jumps.mean_large()
        return -self.drift_a + tail_mean

    def is_spectrally_positive(self) -> bool:
        """True when the Levy measure does not charge (-inf, 0)."""
        j = self.jumps
        if isinstance(j, NoJumps):
            return True
        if isinstance(j, CompoundPoissonJumps):
            if isinstance(j.law, DiracMixtureLaw):
                return all(a > 0 for a in j.law.atoms)
            if isinstance(j.law, TwoSidedExponentialLaw):
                return j.law.p_up == 1.0
            return False
        return j.c_minus == 0.0

    def charges_positive(self) -> bool:
        """True when the Levy measure charges (0, inf)."""
        j = self.jumps
        if isinstance(j, NoJumps):
            return False
        if isinstance(j, CompoundPoissonJumps):
            return j.law.positive_mass() > 0
        return j.c_plus > 0


class DriftClass(enum.Enum):
    DRIFTS_UP = "drifts_up"
    DRIFTS_DOWN = "drifts_down"
    OSCILLATES = "oscillates"
    UNKNOWN = "unknown"


class RegularityStatus(enum.Enum):
    SATISFIES_A = "satisfies_a"
    FAILS_A = "fails_a"
    UNDETERMINED = "undetermined"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def char_exponent(triplet: LevyTriplet, lam: float) -> complex:
    """Evaluate psi(lam) for the law the simulator actually targets.

    For the truncated stable family this includes the matched-variance
    Gaussian substitute, so the simulator-consistency check
    |MC cf - exp(-t psi)| is unbiased for every supported family.
    """
    a, lam = float(triplet.drift_a), float(lam)
    b = triplet.effective_gaussian_b()
    psi = 1j * a * lam + b * lam * lam
    j = triplet.jumps
    if isinstance(j, NoJumps):
        return psi
    if isinstance(j, CompoundPoissonJumps):
        # rate * (1 - E e^{i lam J} + i lam E[J 1{|J|<1}])
        return psi + j.rate * (1.0 - j.law.cf(lam)
                               + 1j * lam * j.law.mean_small())
    # Truncated stable: quadrature of the restricted density.
    eps = j.inner_cutoff
    alpha = j.index

    def dens(r):
        c = j.c_plus if r > 0 else j.c_minus
        return c * abs(r) ** (-1.0 - alpha)

    def integrand_re(r):
        return (1.0 - math.cos(lam * r)) * dens(r)

    def integrand_im(r):
        comp = lam * r if abs(r) < 1.0 else 0.0
        return (-math.sin(lam * r) + comp) * dens(r)

    re = im = 0.0
    hi = max(200.0, 80.0 / max(abs(lam), 1e-9))
    for lo_, hi_, pts in ((eps, 1.0, None), (1.0, hi, None),
                          (-1.0, -eps, None), (-hi, -1.0, None)):
        if lo_ < hi_ and j.levy_tail(0) >= 0:
            if (lo_ >= eps and j.c_plus == 0) or (hi_ <= -eps and j.c_minus == 0):
                continue
            re += _quad(integrand_re, lo_, hi_, points=pts)
            im += _quad(integrand_im, lo_, hi_, points=pts)
    # Tail of (1 - cos) beyond `hi` decays like the Levy tail itself.
    tail = (j.c_plus + j.c_minus) * hi ** (-alpha) / alpha
    if tail > 1e-10:
        raise QuadratureError("stable tail truncation too coarse")
    return psi + re + 1j * im


def regularity_check(triplet: LevyTriplet) -> RegularityStatus:
    """Conservative two-sided regularity classification.

    Certified only when the (effective) Brownian part is positive; compound
    Poisson with no Brownian part fails; every other case is reported as
    undetermined and simulation proceeds with a warning.
    """
    if triplet.effective_gaussian_b() > 0:
        return RegularityStatus.SATISFIES_A
    if isinstance(triplet.jumps, (NoJumps, CompoundPoissonJumps)):
        return RegularityStatus.FAILS_A
    return RegularityStatus.UNDETERMINED


def drift_classification(triplet: LevyTriplet, tol: float = 1e-12) -> DriftClass:
    """Trichotomy by the sign of E[X_1]; Unknown when the mean diverges."""
    try:
        m = triplet.mean_at_unit_time()
    except ValueError:
        return DriftClass.UNKNOWN
    if m > tol:
        return DriftClass.DRIFTS_UP
    if m < -tol:
        return DriftClass.DRIFTS_DOWN
    return DriftClass.OSCILLATES


# ---------------------------------------------------------------------------
# Config deserialization (TOML/JSON dict)
# ---------------------------------------------------------------------------

_LAW_KINDS = {"dirac_mixture", "two_sided_exponential", "gaussian"}
_JUMP_KINDS = {"none", "compound_poisson", "truncated_stable"}


def _check_keys(block: dict, allowed: set, where: str):
    unknown = set(block) - allowed
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)} in {where}")


def _law_from_config(block: dict) -> JumpLaw:
    _check_keys(block, {"kind", "params"}, "jumps.params.law")
    kind = block.get("kind")
    params = dict(block.get("params", {}))
    if kind not in _LAW_KINDS:
        raise ValueError(f"unknown jump law kind {kind!r}")
    if kind == "dirac_mixture":
        _check_keys(params, {"atoms", "weights"}, "dirac_mixture params")
        return DiracMixtureLaw(tuple(params["atoms"]),
                               tuple(params.get("weights",
                                                [1.0] * len(params["atoms"]))))
    if kind == "two_sided_exponential":
        _check_keys(params, {"p_up", "mean_up", "mean_down"},
                    "two_sided_exponential params")
        return TwoSidedExponentialLaw(**params)
    _check_keys(params, {"mu", "sigma"}, "gaussian params")
    return GaussianLaw(**params)


def triplet_from_config(block: dict) -> LevyTriplet:
    """Deserialize a triplet from a config mapping.

    Expected keys: ``drift``, ``gaussian``, ``jumps.kind``, ``jumps.params``.
    Unknown keys raise ValueError.
    """
    _check_keys(block, {"drift", "gaussian", "jumps"}, "triplet")
    drift = float(block.get("drift", 0.0))
    gaussian = float(block.get("gaussian", 0.0))
    jumps_block = block.get("jumps", {"kind": "none"})
    _check_keys(jumps_block, {"kind", "params"}, "triplet.jumps")
    kind = jumps_block.get("kind", "none")
    if kind not in _JUMP_KINDS:
        raise ValueError(f"unknown jumps.kind {kind!r}")
    params = dict(jumps_block.get("params", {}))
    if kind == "none":
        _check_keys(params, set(), "jumps.params")
        jumps: JumpSpec = NoJumps()
    elif kind == "compound_poisson":
        _check_keys(params, {"rate", "law"}, "compound_poisson params")
        jumps = CompoundPoissonJumps(rate=float(params["rate"]),
                                     law=_law_from_config(params["law"]))
    else:
        _check_keys(params, {"index", "skew", "inner_cutoff"},
                    "truncated_stable params")
        jumps = TruncatedStableJumps(index=float(params["index"]),
                                     skew=float(params.get("skew", 0.0)),
                                     inner_cutoff=float(
                                         params.get("inner_cutoff", 1e-3)))
    return LevyTriplet(drift_a=drift, gaussian_b=gaussian, jumps=jumps)
