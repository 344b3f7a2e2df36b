"""Norm-monotone costs phi(||x||) and their expectations under staircase noise."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _series
from ._rng import map_shards, shard_generators
from ._series import SeriesDivergenceError
from .staircase import DegenerateBandError, sample

COST_KINDS = ("power", "threshold", "truncated")


@dataclass(frozen=True)
class CostSpec:
    """phi(r) = r^q (power), 1{r >= lam} (threshold) or min(r, cap) (truncated)."""

    kind: str
    q: float = 1.0
    lam: float = 0.0
    cap: float = 0.0

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"cost kind must be one of {COST_KINDS}, got {self.kind!r}")
        if self.kind == "power" and not (math.isfinite(self.q) and self.q > 0):
            raise ValueError("power cost needs q > 0")
        if self.kind == "threshold" and not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("threshold cost needs lam >= 0")
        if self.kind == "truncated" and not (math.isfinite(self.cap) and self.cap >= 0):
            raise ValueError("truncated cost needs cap >= 0")

    @classmethod
    def power(cls, q=1.0):
        return cls("power", q=float(q))

    @classmethod
    def threshold(cls, lam):
        return cls("threshold", lam=float(lam))

    @classmethod
    def truncated(cls, cap):
        return cls("truncated", cap=float(cap))

    @property
    def tag(self):
        if self.kind == "power":
            return f"power(q={self.q:g})"
        if self.kind == "threshold":
            return f"threshold(lambda={self.lam:g})"
        return f"truncated(cap={self.cap:g})"


def phi(cost, r):
    """Evaluate phi at radius ``r`` (scalar or array)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    if cost.kind == "power":
        out = r**cost.q
    elif cost.kind == "threshold":
        out = (r >= cost.lam).astype(float)
    else:
        out = np.minimum(r, cost.cap)
    return float(out) if out.ndim == 0 else out


def band_conditional_moment(a, b, n, q):
    """E[R^q | R in [a delta, b delta]] / delta^q for a radius uniform in volume.

    Equals ``(n/(n+q)) (b^{n+q} - a^{n+q}) / (b^n - a^n)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < a):
        raise ValueError("need 0 <= a <= b")
    if np.any(a == b):
        raise DegenerateBandError("band has zero width")
    ratio = np.exp(_series.log_power_gap(n + q, a, b) - _series.log_power_gap(n, a, b))
    out = n / (n + q) * ratio
    return float(out) if out.ndim == 0 else out


def _band_expectation(cost, lo, hi, n, delta):
    """E[phi(R) | band] for arrays of band edges in units of delta (closed forms)."""
    if cost.kind == "power":
        return delta**cost.q * band_conditional_moment(lo, hi, n, cost.q)
    gap = _series.log_power_gap(n, lo, hi)
    if cost.kind == "threshold":
        t = np.clip(cost.lam / delta, lo, hi)
        return np.exp(_series.log_power_gap(n, t, hi) - gap)
    t = np.clip(cost.cap / delta, lo, hi)
    below = delta * n / (n + 1.0) * np.exp(_series.log_power_gap(n + 1, lo, t) - gap)
    above = cost.cap * np.exp(_series.log_power_gap(n, t, hi) - gap)
    return below + above


def _period_log_envelope(cost, eps, n, delta, log_s):
    def log_env(ks):
        base = _series.log_period_envelope(eps, n, ks) - log_s
        if cost.kind == "power":
            return base + cost.q * np.log((ks + 1.0) * delta)
        if cost.kind == "truncated":
            return base + (math.log(cost.cap) if cost.cap > 0 else -np.inf)
        return base

    return log_env


def _log_s(params):
    from .staircase import _log_norm_sum

    return _log_norm_sum(params.eps, params.gamma, params.dim)


def expected_cost_series(params, table, cost, tol=1e-12):
    """E[phi(||X||)] under f_gamma as an exact band series with certified tail < ``tol``.

    ``cost`` is a :class:`CostSpec` (closed-form band expectations) or any
    nondecreasing callable ``phi(r)``, integrated per band with adaptive
    quadrature. Series that do not decay raise :class:`SeriesDivergenceError`.
    """
    if table is not None and table.params != params:
        raise ValueError("band table was built for different parameters")
    if not isinstance(cost, CostSpec):
        return _callable_series(params, cost, tol)
    eps, n, delta, gamma = params.eps, params.dim, params.delta, params.gamma
    log_s = _log_s(params)
    env = _period_log_envelope(cost, eps, n, delta, log_s)
    try:
        # cut well below tol so the truncation error is invisible next to rounding
        kcut, _, _ = _series.least_cutoff(env, math.log(tol) - 9.0)
    except SeriesDivergenceError as exc:
        raise SeriesDivergenceError(f"{cost.tag}: {exc}") from None
    ks = np.arange(kcut + 1, dtype=float)
    lw1, lw2 = _series.log_band_masses(eps, gamma, n, ks)
    lo = np.concatenate([ks, ks + gamma])
    hi = np.concatenate([ks + gamma, ks + 1.0])
    w = np.exp(np.concatenate([lw1, lw2]) - log_s)
    keep = (w > 0) & (hi > lo)
    terms = w[keep] * _band_expectation(cost, lo[keep], hi[keep], n, delta)
    total = math.fsum(terms)
    if not math.isfinite(total):
        raise SeriesDivergenceError(f"{cost.tag}: non-finite expected cost")
    return total


def _callable_series(params, func, tol, max_periods=100_000, window=8):
    """Band series for an arbitrary nondecreasing phi.

    Periods are summed until the per-period contributions have decreased for
    ``window`` consecutive periods and their geometric extrapolation is below
    ``tol``. Contributions that keep growing past the polynomial mode of the
    band masses for ``window`` periods are reported as divergence.
    """
    eps, n, delta, gamma = params.eps, params.dim, params.delta, params.gamma
    log_s = _log_s(params)
    k_mode = int(math.ceil(2.0 * (n + 1) / eps)) + window
    contributions = []
    rising = 0
    k = 0
    while True:
        lw1, lw2 = _series.log_band_masses(eps, gamma, n, np.array([k], dtype=float))
        c = 0.0
        for lw, (a, b) in ((lw1[0], (k, k + gamma)), (lw2[0], (k + gamma, k + 1.0))):
            if not np.isfinite(lw) or b <= a:
                continue
            w = math.exp(lw - log_s)
            lo_r, hi_r = a * delta, b * delta
            vol = hi_r**n - lo_r**n
            val, _ = integrate.quad(
                lambda r: float(func(r)) * n * r ** (n - 1) / vol, lo_r, hi_r, epsabs=tol * 1e-3, limit=200
            )
            c += w * val
        if not math.isfinite(c):
            raise SeriesDivergenceError(f"phi contribution at period {k} is not finite")
        contributions.append(c)
        if len(contributions) >= 2:
            prev = contributions[-2]
            if c >= prev and c > 0:
                rising += 1
            else:
                rising = 0
            if k > k_mode and rising >= window:
                growth = c / prev if prev > 0 else math.inf
                raise SeriesDivergenceError(
                    f"band contributions grew for {window} consecutive periods past k={k_mode} "
                    f"(per-period growth factor {growth:.4g} >= 1, mass decay factor e^-eps = {math.exp(-eps):.4g})"
                )
        if len(contributions) > window and k > k_mode:
            recent = contributions[-window - 1 :]
            ratios = [recent[i + 1] / recent[i] for i in range(window) if recent[i] > 0]
            if ratios and len(ratios) == window and max(ratios) < 1:
                rho = max(ratios)
                if c * rho / (1 - rho) < tol:
                    break
            elif c == 0 and all(v == 0 for v in recent):
                break
        k += 1
        if k > max_periods:
            raise SeriesDivergenceError(f"no convergence after {max_periods} periods")
    return math.fsum(contributions)


def _mc_chunk(args):
    params, table, cost, gen, count = args
    x = sample(params, table, gen, count)
    from .norms import norm

    r = norm(params.norm, x) if count else np.empty(0)
    values = np.atleast_1d(phi(cost, r)) if isinstance(cost, CostSpec) else np.asarray([cost(t) for t in r])
    if values.size == 0:
        return 0, 0.0, 0.0
    mean = float(values.mean())
    m2 = float(np.sum((values - mean) ** 2))
    return values.size, mean, m2


def expected_cost_mc(params, table, cost, rng, N, n_shards=1):
    """Monte Carlo ``(mean, stderr)`` of phi(||X||) over ``N`` sampler draws.

    Draws are split over ``n_shards`` independent substreams of ``rng``; the
    shard statistics are merged in shard order, so the result depends only on
    ``(rng, N, n_shards)``.
    """
    N = int(N)
    if N < 2:
        raise ValueError("need N >= 2 draws for a standard error")
    n_shards = max(1, min(int(n_shards), N))
    gens = shard_generators(rng, n_shards) if n_shards > 1 else [rng_for_single(rng)]
    sizes = [N // n_shards + (1 if i < N % n_shards else 0) for i in range(n_shards)]
    parts = map_shards(_mc_chunk, [(params, table, cost, g, s) for g, s in zip(gens, sizes)])
    count, mean, m2 = 0, 0.0, 0.0
    for c, mu, sq in parts:
        if c == 0:
            continue
        total = count + c
        d = mu - mean
        mean += d * c / total
        m2 += sq + d * d * count * c / total
        count = total
    var = m2 / (count - 1)
    return mean, math.sqrt(var / count)


def rng_for_single(rng):
    from ._rng import as_generator

    return as_generator(rng)
