"""Log-space helpers for the geometric-times-polynomial series behind the bands."""

import numpy as np

_MAX_TERMS = 1 << 22


class SeriesDivergenceError(ArithmeticError):
    """A series that should converge failed to, or grows too fast to bound."""


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -0.6931471805599453, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def log_power_gap(n, lo, hi):
    """log(hi^n - lo^n) for arrays 0 <= lo <= hi, without cancellation."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        llo = np.log(lo)
        lhi = np.log(hi)
        out = n * lhi + log1mexp(n * (llo - lhi))
    out = np.where(lo == 0, n * lhi, out)
    return np.where(lo == hi, -np.inf, out)


def log_band_masses(eps, gamma, n, ks):
    """Unnormalized log band masses for periods ``ks``.

    Returns ``(lw1, lw2)`` with ``lw1 = log e^{-k eps}((k+gamma)^n - k^n)`` and
    ``lw2 = log e^{-(k+1) eps}((k+1)^n - (k+gamma)^n)``; empty bands are -inf.
    """
    ks = np.asarray(ks, dtype=float)
    lw1 = -ks * eps + log_power_gap(n, ks, ks + gamma)
    lw2 = -(ks + 1.0) * eps + log_power_gap(n, ks + gamma, ks + 1.0)
    return lw1, lw2


def log_period_envelope(eps, n, ks):
    """log e^{-k eps}((k+1)^n - k^n): the period mass at the upper plateau value."""
    ks = np.asarray(ks, dtype=float)
    return -ks * eps + log_power_gap(n, ks, ks + 1.0)


def least_cutoff(log_term, log_target, start=64):
    """Least ``K`` whose certified tail ``sum_{k>K} term_k`` is below ``exp(log_target)``.

    ``log_term`` maps an integer grid to log terms; the terms must have
    eventually decreasing ratios, which bounds everything past the evaluated
    window by a geometric series. Returns ``(K, log_terms, log_remainder)``
    where ``log_remainder`` bounds the mass beyond the window.
    """
    size = start
    while True:
        ks = np.arange(size, dtype=float)
        lt = np.asarray(log_term(ks), dtype=float)
        last, prev = lt[-1], lt[-2]
        if last == -np.inf:
            log_rem = -np.inf
            break
        if not np.isfinite(last):
            raise SeriesDivergenceError("series term is not finite")
        ratio = last - prev
        if ratio < 0:
            log_rem = last + ratio - float(log1mexp(ratio))
            if log_rem < log_target - 7.0:
                break
        size *= 2
        if size > _MAX_TERMS:
            raise SeriesDivergenceError(
                f"no geometric decay after {size // 2} terms (last log-ratio {ratio:.3g})"
            )
    suffix = np.logaddexp.accumulate(lt[::-1])[::-1]
    after = np.logaddexp(np.append(suffix[1:], -np.inf), log_rem)
    below = np.flatnonzero(after < log_target)
    return int(below[0]), lt, log_rem


def logsumexp(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return -np.inf
    top = values.max()
    if not np.isfinite(top):
        return top
    return float(top + np.log(np.sum(np.exp(values - top))))


def polylog_neg(k, x):
    """Li_{-k}(x) = sum_{j>=1} j^k x^j for integer k >= 0 and 0 <= x < 1.

    Uses the Eulerian-polynomial closed form ``x A_k(x) / (1-x)^(k+1)``.
    """
    if k < 0:
        raise ValueError("order must be a nonnegative integer")
    if k == 0:
        return x / (1.0 - x)
    row = [1]
    for m in range(1, k + 1):
        nxt = []
        for i in range(m):
            left = row[i - 1] if i >= 1 else 0
            here = row[i] if i < len(row) else 0
            nxt.append((m - i) * left + (i + 1) * here)
        row = nxt
    poly = 0.0
    for coeff in reversed(row):
        poly = poly * x + coeff
    return x * poly / (1.0 - x) ** (k + 1)
