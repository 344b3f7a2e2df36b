"""Staircase densities, band probability tables and the two-stage sampler.

The staircase density with offset ``gamma`` is constant on the radial bands

    B_{k,1} = [k delta, (k + gamma) delta)        value a(gamma) e^{-k eps}
    B_{k,2} = [(k + gamma) delta, (k + 1) delta)  value a(gamma) e^{-(k+1) eps}

Intervals are right-open: a radius sitting exactly on a breakpoint takes the
plateau that starts there. Sampling picks a band from its probability mass,
draws the radius by inverse transform inside the band, and multiplies by a
cone-measure direction.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _series
from ._alias import AliasTable
from ._rng import as_generator
from .norms import NormSpec, norm, sample_direction

DEFAULT_TAIL_TOL = 1e-12
ALIAS_MIN_KMAX = 16


class DegenerateBandError(ValueError):
    """Raised when a band has zero width (gamma = 0 for i = 1, gamma = 1 for i = 2)."""


@dataclass(frozen=True)
class StaircaseParams:
    eps: float
    delta: float
    gamma: float
    norm: NormSpec

    def __post_init__(self):
        for name in ("eps", "delta"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, value)
        gamma = float(self.gamma)
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        object.__setattr__(self, "gamma", gamma)
        if not isinstance(self.norm, NormSpec):
            raise TypeError("norm must be a NormSpec")

    @property
    def dim(self):
        return self.norm.dim

    def with_gamma(self, gamma):
        return StaircaseParams(self.eps, self.delta, gamma, self.norm)


def _log_norm_sum(eps, gamma, n, rel=1e-18):
    """log S(gamma), the full (untruncated) sum of unnormalized band masses.

    The per-period envelope bounds the period mass from above and, times
    e^{-eps}, from below, so a remainder below ``rel * e^{-eps} * sum(envelope)``
    is below ``rel * S``.
    """

    def log_env(ks):
        return _series.log_period_envelope(eps, n, ks)

    # cutoff against a target relative to the envelope's own total
    probe_k, probe_lt, _ = _series.least_cutoff(log_env, 0.0)
    log_env_total = _series.logsumexp(probe_lt)
    target = math.log(rel) - eps + log_env_total
    kcut, _, log_rem = _series.least_cutoff(log_env, target)
    ks = np.arange(kcut + 1, dtype=float)
    lw1, lw2 = _series.log_band_masses(eps, gamma, n, ks)
    terms = np.concatenate([lw1, lw2])
    return _series.logsumexp(terms[np.isfinite(terms)])


@dataclass(frozen=True)
class BandTable:
    """Truncated, renormalized band pmf for one parameter set.

    ``probs[k, i-1]`` is the probability of band ``(k, i)``; ``log_a`` is the
    log of the exact (untruncated) normalizer ``a(gamma)``.
    """

    params: StaircaseParams
    k_max: int
    probs: np.ndarray
    log_a: float
    tail_mass: float
    tail_tol: float
    _sampler: object = field(default=None, repr=False, compare=False)

    @property
    def normalizer_a(self):
        return math.exp(self.log_a)

    @property
    def weights(self):
        """``[(k, i, probability), ...]`` for every retained band."""
        return [
            (k, i + 1, float(self.probs[k, i]))
            for k in range(self.k_max + 1)
            for i in range(2)
        ]

    @property
    def band_edges(self):
        """``(lo, hi)`` arrays of band radii in units of delta, shape (k_max+1, 2)."""
        ks = np.arange(self.k_max + 1, dtype=float)
        g = self.params.gamma
        lo = np.stack([ks, ks + g], axis=1)
        hi = np.stack([ks + g, ks + 1.0], axis=1)
        return lo, hi

    def flat(self):
        """Flattened ``(k, i, lo, hi, prob)`` arrays in radial order."""
        lo, hi = self.band_edges
        k = np.repeat(np.arange(self.k_max + 1), 2)
        i = np.tile([1, 2], self.k_max + 1)
        return k, i, lo.ravel(), hi.ravel(), self.probs.ravel()

    def draw_bands(self, rng, size):
        """Draw flat band indices ``2k + (i-1)``."""
        if self._sampler is not None:
            return self._sampler.sample(rng, size)
        cdf = np.cumsum(self.probs.ravel())
        u = rng.random(size=size) * cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        return np.minimum(idx, cdf.size - 1)


def build_band_table(params, tail_tol=DEFAULT_TAIL_TOL):
    """Band probabilities truncated at the least ``k_max`` with tail bound below ``tail_tol``.

    The tail bound after ``K`` is ``sum_{k>K} e^{-k eps}((k+1)^n - k^n) / S``
    (every plateau in period ``k`` is at most ``a e^{-k eps}``); the retained
    weights are renormalized to sum to one.
    """
    tail_tol = float(tail_tol)
    if not 0.0 < tail_tol < 1.0:
        raise ValueError(f"tail_tol must lie in (0, 1), got {tail_tol!r}")
    eps, gamma, n = params.eps, params.gamma, params.dim
    log_s = _log_norm_sum(eps, gamma, n, rel=min(1e-18, tail_tol * 1e-6))
    log_a = -(params.norm.log_unit_volume + n * math.log(params.delta) + log_s)

    def log_bound(ks):
        return _series.log_period_envelope(eps, n, ks) - log_s

    k_max, _, _ = _series.least_cutoff(log_bound, math.log(tail_tol))

    ks_all = np.arange(k_max + 1, dtype=float)
    lw1, lw2 = _series.log_band_masses(eps, gamma, n, ks_all)
    probs = np.exp(np.stack([lw1, lw2], axis=1) - log_s)
    kept = float(math.fsum(probs.ravel()))

    # exact pre-renormalization tail mass
    def log_actual(ks):
        a1, a2 = _series.log_band_masses(eps, gamma, n, ks + k_max + 1)
        return np.logaddexp(a1, a2) - log_s

    _, lt_tail, log_rem = _series.least_cutoff(log_actual, math.log(tail_tol) - 30.0)
    tail_mass = math.exp(_series.logsumexp(np.append(lt_tail, log_rem)))

    probs = probs / kept
    probs.setflags(write=False)
    sampler = AliasTable(probs.ravel()) if k_max >= ALIAS_MIN_KMAX else None
    return BandTable(params, int(k_max), probs, float(log_a), tail_mass, tail_tol, sampler)


def _check_table(params, table):
    if table.params != params:
        raise ValueError("band table was built for different parameters")


def _plateau_index(params, r):
    """Return ``j`` with the plateau value ``a e^{-j eps}`` at radius ``r``."""
    delta, gamma = params.delta, params.gamma
    r = np.asarray(r, dtype=float)
    k = np.floor(r / delta)
    # repair floor() against the products that define the breakpoints
    k = np.where(r < k * delta, k - 1, k)
    k = np.where(r >= (k + 1) * delta, k + 1, k)
    upper = r < (k + gamma) * delta
    return np.where(upper, k, k + 1)


def log_density(params, table, x):
    """log f_gamma(x); ``x`` is a vector or an ``(m, dim)`` batch."""
    _check_table(params, table)
    r = norm(params.norm, x)
    j = _plateau_index(params, r)
    out = table.log_a - j * params.eps
    if np.ndim(out) == 0:
        return float(out)
    return out


def density(params, table, x):
    """Staircase density f_gamma(x), exact plateau values from ``k`` computed off ``||x||``."""
    out = np.exp(log_density(params, table, x))
    if np.ndim(out) == 0:
        return float(out)
    return out


def radial_value(params, table, r):
    """Radial profile rho(r) = f_gamma(x) at ``||x|| = r``."""
    _check_table(params, table)
    j = _plateau_index(params, r)
    out = np.exp(table.log_a - j * params.eps)
    if np.ndim(out) == 0:
        return float(out)
    return out


def band_bounds(k, i, gamma):
    """Band ``(k, i)`` as ``[lo, hi]`` in units of delta."""
    k = np.asarray(k, dtype=float)
    i = np.asarray(i)
    lo = np.where(i == 1, k, k + gamma)
    hi = np.where(i == 1, k + gamma, k + 1.0)
    return lo, hi


def _radius_in_band(lo, hi, n, u, delta):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        # R = delta * (u (hi^n - lo^n) + lo^n)^(1/n), written relative to lo
        growth = np.expm1(n * (np.log(hi) - np.log(lo)))
        rel = lo * (1.0 + u * growth) ** (1.0 / n)
    r = np.where(lo > 0, rel, hi * u ** (1.0 / n))
    return delta * np.clip(r, lo, hi)


def radius_from_uniform(k, i, params, u):
    """Inverse-transform radius for band ``(k, i)`` at uniform level ``u``."""
    lo, hi = band_bounds(k, i, params.gamma)
    if np.any(hi <= lo):
        raise DegenerateBandError(
            f"band (k={k}, i={i}) is empty at gamma={params.gamma}"
        )
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("uniform level must lie in [0, 1]")
    out = _radius_in_band(lo, hi, params.dim, u, params.delta)
    if np.ndim(out) == 0:
        return float(out)
    return out


def sample(params, table, rng=None, count=1, return_bands=False):
    """Draw ``count`` iid staircase vectors, shape ``(count, dim)``.

    With ``return_bands`` also returns the flat band index ``2k + (i-1)`` of
    every draw.
    """
    _check_table(params, table)
    count = int(count)
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = as_generator(rng)
    n = params.dim
    if count == 0:
        empty = np.empty((0, n))
        return (empty, np.empty(0, dtype=int)) if return_bands else empty
    flat = table.draw_bands(rng, count)
    k = flat // 2
    i = flat % 2 + 1
    lo, hi = band_bounds(k, i, params.gamma)
    radius = _radius_in_band(lo, hi, n, rng.random(size=count), params.delta)
    x = radius[:, None] * sample_direction(params.norm, rng, size=count)
    return (x, flat) if return_bands else x


def radial_cdf(params, table, r):
    """P(||X|| <= r) under the (truncated, renormalized) band table."""
    _check_table(params, table)
    _, _, lo, hi, p = table.flat()
    n, delta = params.dim, params.delta
    r = np.atleast_1d(np.asarray(r, dtype=float)) / delta
    keep = p > 0
    lo, hi, p = lo[keep], hi[keep], p[keep]
    cum = np.concatenate([[0.0], np.cumsum(p)])
    idx = np.searchsorted(hi, r, side="right")
    idx_c = np.minimum(idx, p.size - 1)
    a, b = lo[idx_c], hi[idx_c]
    t = np.clip(r, a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.exp(_series.log_power_gap(n, a, t) - _series.log_power_gap(n, a, b))
    out = np.where(idx >= p.size, 1.0, cum[idx_c] + p[idx_c] * frac)
    return np.clip(out, 0.0, 1.0)


def total_mass(params, table):
    """Closed-series integral of f_gamma over R^n using the exact a(gamma)."""
    n = params.dim
    log_s = _log_norm_sum(params.eps, params.gamma, n)
    return math.exp(table.log_a + params.norm.log_unit_volume + n * math.log(params.delta) + log_s)


def radial_profile(params, table):
    """The staircase's radial profile as a :class:`~staircase_dp.profiles.RadialProfile`."""
    from .profiles import RadialProfile

    _check_table(params, table)
    return RadialProfile.staircase(params.eps, params.delta, params.gamma, math.exp(table.log_a))
