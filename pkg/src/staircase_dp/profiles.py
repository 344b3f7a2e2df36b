"""Step-function carriers: radial profiles, 1-D step densities and interval unions.

All step functions are right-open: the value on ``[b_j, b_{j+1})`` is
``values[j]``, so a point on a breakpoint takes the plateau starting there.
A *decay tail* extends a function past its explicit domain by repeating the
last ``delta``-wide period scaled by ``e^{-eps}`` per period.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._series import least_cutoff, polylog_neg

_TAIL_REL = 1e-17


def _as_edges(breakpoints, values):
    bp = np.asarray(breakpoints, dtype=float)
    vals = np.asarray(values, dtype=float)
    if bp.ndim != 1 or vals.ndim != 1 or bp.size != vals.size + 1 or vals.size == 0:
        raise ValueError("need m+1 breakpoints for m plateau values (m >= 1)")
    if not np.all(np.diff(bp) > 0):
        raise ValueError("breakpoints must be strictly increasing")
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ValueError("plateau values must be finite and nonnegative")
    bp.setflags(write=False)
    vals.setflags(write=False)
    return bp, vals


def _period_cells(bp, vals, start, width):
    """Cells of ``[start, start + width)`` as (relative edges, values)."""
    stop = start + width
    # breakpoints within rounding of the period edges would leave sliver cells
    tol = 1e-12 * max(width, abs(start), abs(stop))
    inner = bp[(bp > start + tol) & (bp < stop - tol)]
    edges = np.concatenate([[start], inner, [stop]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    idx = np.searchsorted(bp, mids, side="right") - 1
    rel = edges - start
    rel[-1] = width
    return rel, vals[idx]


def _tile(rel, vals, first_start, width, periods, eps, step_sign=1, final=None):
    """Concatenate ``periods`` decayed copies of one period pattern.

    Copy ``j`` (1-based) starts at ``first_start + step_sign*(j-1)*width`` and
    carries values ``vals * e^{-j eps}``. Shared edges between consecutive
    copies are bitwise identical.
    """
    if periods <= 0:
        return np.empty(0), np.empty(0), np.empty(0)
    j = np.arange(1, periods + 1, dtype=float)
    starts = first_start + step_sign * (j - 1) * width
    if step_sign < 0:
        starts = starts[::-1]
        j = j[::-1]
    lo = (starts[:, None] + rel[None, :-1]).ravel()
    last = starts[-1] + width if final is None else final
    hi = np.concatenate(
        [starts[:, None] + rel[None, 1:-1], np.append(starts[1:], last)[:, None]], axis=1
    ).ravel()
    val = (vals[None, :] * np.exp(-j * eps)[:, None]).ravel()
    return lo, hi, val


@dataclass(frozen=True, eq=False)
class PiecewiseCDF:
    """A continuous CDF given by an evaluator plus the breakpoints of its density."""

    func: object
    breakpoints: np.ndarray

    def __call__(self, t):
        return self.func(t)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Right-open step function rho on [0, inf).

    ``breakpoints`` start at 0 and end at ``end``; past ``end`` the profile is
    zero, or, when ``tail_eps``/``tail_delta`` are given, continues by
    ``rho(t + delta) = e^{-eps} rho(t)``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    tail_eps: float = None
    tail_delta: float = None

    def __post_init__(self):
        bp, vals = _as_edges(self.breakpoints, self.values)
        if bp[0] != 0.0:
            raise ValueError("radial profiles start at 0")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if (self.tail_eps is None) != (self.tail_delta is None):
            raise ValueError("give both tail_eps and tail_delta, or neither")
        if self.tail_eps is not None:
            eps, delta = float(self.tail_eps), float(self.tail_delta)
            if not (eps > 0 and delta > 0):
                raise ValueError("tail parameters must be positive")
            if bp[-1] < delta * (1 - 1e-12):
                raise ValueError("a decay tail needs an explicit domain of at least one period")
            object.__setattr__(self, "tail_eps", eps)
            object.__setattr__(self, "tail_delta", delta)

    # construction -----------------------------------------------------------

    @classmethod
    def staircase(cls, eps, delta, gamma, a):
        """Staircase profile with top plateau ``a`` (gamma = 0 aliases to gamma = 1 scaled)."""
        if 0.0 < gamma < 1.0:
            return cls([0.0, gamma * delta, delta], [a, a * math.exp(-eps)], eps, delta)
        top = a if gamma == 1.0 else a * math.exp(-eps)
        return cls([0.0, delta], [top], eps, delta)

    @classmethod
    def from_function(cls, func, eps, delta, cells, periods=1):
        """Grid restriction of ``func`` on ``[0, periods*delta)``: left-endpoint values, decay tail."""
        edges = np.linspace(0.0, periods * delta, periods * cells + 1)
        vals = np.asarray([func(t) for t in edges[:-1]], dtype=float)
        return cls(edges, vals, eps, delta)

    # basic queries ----------------------------------------------------------

    @property
    def end(self):
        return float(self.breakpoints[-1])

    @property
    def has_decay_tail(self):
        return self.tail_eps is not None

    @property
    def period_support(self):
        if not self.has_decay_tail:
            return None
        return self.end / self.tail_delta

    def _explicit(self, r):
        idx = np.searchsorted(self.breakpoints, r, side="right") - 1
        idx = np.clip(idx, 0, self.values.size - 1)
        return self.values[idx]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        flat = np.atleast_1d(r)
        out = np.zeros_like(flat)
        inside = flat < self.end
        out[inside] = self._explicit(flat[inside])
        if self.has_decay_tail and np.any(~inside):
            t = flat[~inside]
            delta = self.tail_delta
            j = np.floor((t - self.end) / delta) + 1.0
            shifted = t - j * delta
            j = np.where(shifted >= self.end, j + 1, j)
            j = np.where(shifted < self.end - delta, j - 1, j)
            shifted = np.clip(t - j * delta, 0.0, np.nextafter(self.end, 0.0))
            out[~inside] = np.exp(-j * self.tail_eps) * self._explicit(shifted)
        if r.ndim == 0:
            return float(out[0])
        return out

    def pattern(self):
        """Relative edges and values of the last explicit period (decay tails only)."""
        return _period_cells(self.breakpoints, self.values, self.end - self.tail_delta, self.tail_delta)

    def segments(self, r_max=None):
        """Materialized plateaus ``(lo, hi, value)`` covering at least ``[0, r_max)``."""
        lo = self.breakpoints[:-1].copy()
        hi = self.breakpoints[1:].copy()
        val = self.values.copy()
        if r_max is None or r_max <= self.end:
            return lo, hi, val
        if not self.has_decay_tail:
            return (
                np.append(lo, self.end),
                np.append(hi, float(r_max)),
                np.append(val, 0.0),
            )
        rel, pv = self.pattern()
        periods = int(math.ceil((r_max - self.end) / self.tail_delta))
        tlo, thi, tval = _tile(rel, pv, self.end, self.tail_delta, periods, self.tail_eps)
        return np.concatenate([lo, tlo]), np.concatenate([hi, thi]), np.concatenate([val, tval])

    def tail_radius(self, n, rel=_TAIL_REL):
        """A radius past which the r^{n-1}-weighted mass is below ``rel`` of the total."""
        if not self.has_decay_tail:
            return self.end
        total = self.moment_integral(n)
        if not total > 0:
            return self.end
        rel_edges, pv = self.pattern()
        delta, eps = self.tail_delta, self.tail_eps
        start = self.end - delta

        def log_term(ks):
            # copy j = k + 1 of the pattern, weighted by r^{n-1}
            shift = start + (ks[:, None] + 1.0) * delta
            a = shift + rel_edges[None, :-1]
            b = shift + rel_edges[None, 1:]
            with np.errstate(divide="ignore"):
                body = np.log(np.sum(pv[None, :] * (b**n - a**n), axis=1) / n)
            return body - (ks + 1.0) * eps

        k, _, _ = least_cutoff(log_term, math.log(rel * total))
        return self.end + (k + 1) * delta

    def moment_integral(self, n):
        """Exact ``int_0^inf r^{n-1} rho(r) dr`` including the closed-form geometric tail."""
        n = int(n)
        bp, vals = self.breakpoints, self.values
        head = math.fsum(vals * (bp[1:] ** n - bp[:-1] ** n) / n)
        if not self.has_decay_tail:
            return head
        rel, pv = self.pattern()
        start = self.end - self.tail_delta
        a = start + rel[:-1]
        b = start + rel[1:]
        x = math.exp(-self.tail_eps)
        tail = 0.0
        for k in range(n):
            coeff = math.comb(n, k) * self.tail_delta**k * polylog_neg(k, x)
            tail += coeff * float(np.sum(pv * (b ** (n - k) - a ** (n - k))))
        return head + tail / n

    def mass(self, n, unit_volume):
        """``int |B| n r^{n-1} rho(r) dr``: total mass of x -> rho(||x||) on R^n."""
        return unit_volume * n * self.moment_integral(n)

    def scaled(self, factor):
        return RadialProfile(self.breakpoints, self.values * factor, self.tail_eps, self.tail_delta)

    def normalized(self, n, unit_volume):
        m = self.mass(n, unit_volume)
        if not m > 0:
            raise ValueError("profile has zero mass")
        return self.scaled(1.0 / m)

    def is_nonincreasing(self, rel_tol=1e-12):
        r_max = self.end + 2 * self.tail_delta if self.has_decay_tail else self.end
        _, _, val = self.segments(r_max)
        return bool(np.all(val[1:] <= val[:-1] * (1 + rel_tol)))

    def cdf(self, n, r_max=None):
        """CDF of ``||X||`` for X with density proportional to rho(||x||) on R^n."""
        n = int(n)
        total = self.moment_integral(n)
        if not total > 0:
            raise ValueError("profile has zero mass")
        if r_max is None:
            r_max = self.tail_radius(n)
        lo, hi, val = self.segments(r_max)
        cum = np.concatenate([[0.0], np.cumsum(val * (hi**n - lo**n) / n)]) / total

        def func(t):
            t = np.asarray(t, dtype=float)
            idx = np.clip(np.searchsorted(hi, t, side="right"), 0, lo.size - 1)
            inside = np.clip(t, lo[idx], hi[idx])
            part = val[idx] * (inside**n - lo[idx] ** n) / n / total
            out = np.where(t >= hi[-1], 1.0, np.minimum(cum[idx] + part, 1.0))
            out = np.where(t < 0, 0.0, out)
            return out if out.ndim else float(out)

        return PiecewiseCDF(func, np.concatenate([lo, hi[-1:]]))


@dataclass(frozen=True, eq=False)
class StepDensity1D:
    """Right-open step function on the real line, optionally with decay tails.

    With ``tail_eps``/``tail_delta`` set, the right tail repeats the last period
    ``[x_m - delta, x_m)`` and the left tail the first period ``[x_0, x_0 + delta)``,
    each scaled by ``e^{-eps}`` per period away from the explicit part.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    tail_eps: float = None
    tail_delta: float = None

    def __post_init__(self):
        bp, vals = _as_edges(self.breakpoints, self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if (self.tail_eps is None) != (self.tail_delta is None):
            raise ValueError("give both tail_eps and tail_delta, or neither")
        if self.tail_eps is not None:
            if bp[-1] - bp[0] < self.tail_delta * (1 - 1e-12):
                raise ValueError("decay tails need an explicit domain of at least one period")
            object.__setattr__(self, "tail_eps", float(self.tail_eps))
            object.__setattr__(self, "tail_delta", float(self.tail_delta))

    @property
    def has_decay_tail(self):
        return self.tail_eps is not None

    @property
    def lo(self):
        return float(self.breakpoints[0])

    @property
    def hi(self):
        return float(self.breakpoints[-1])

    def left_pattern(self):
        return _period_cells(self.breakpoints, self.values, self.lo, self.tail_delta)

    def right_pattern(self):
        return _period_cells(self.breakpoints, self.values, self.hi - self.tail_delta, self.tail_delta)

    def segments(self, periods=0):
        """Explicit plateaus plus ``periods`` tail copies on each side, left to right."""
        lo = self.breakpoints[:-1]
        hi = self.breakpoints[1:]
        val = self.values
        if not self.has_decay_tail or periods <= 0:
            return lo.copy(), hi.copy(), val.copy()
        delta, eps = self.tail_delta, self.tail_eps
        rrel, rv = self.right_pattern()
        rlo, rhi, rval = _tile(rrel, rv, self.hi, delta, periods, eps)
        lrel, lv = self.left_pattern()
        llo, lhi, lval = _tile(lrel, lv, self.lo - delta, delta, periods, eps, step_sign=-1, final=self.lo)
        return (
            np.concatenate([llo, lo, rlo]),
            np.concatenate([lhi, hi, rhi]),
            np.concatenate([lval, val, rval]),
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x)
        out = np.zeros_like(flat)
        inside = (flat >= self.lo) & (flat < self.hi)
        idx = np.clip(np.searchsorted(self.breakpoints, flat[inside], side="right") - 1, 0, self.values.size - 1)
        out[inside] = self.values[idx]
        if self.has_decay_tail:
            delta, eps = self.tail_delta, self.tail_eps
            right = flat >= self.hi
            if np.any(right):
                t = flat[right]
                j = np.floor((t - self.hi) / delta) + 1.0
                s = t - j * delta
                j = np.where(s >= self.hi, j + 1, j)
                j = np.where(s < self.hi - delta, j - 1, j)
                s = np.clip(t - j * delta, self.lo, np.nextafter(self.hi, -np.inf))
                out[right] = np.exp(-j * eps) * self.values[np.searchsorted(self.breakpoints, s, side="right") - 1]
            left = flat < self.lo
            if np.any(left):
                t = flat[left]
                j = np.floor((self.lo - t) / delta)
                j = np.where(t + j * delta < self.lo, j + 1, j)
                j = np.where(t + (j - 1) * delta >= self.lo, j - 1, j)
                s = np.clip(t + j * delta, self.lo, np.nextafter(self.lo + delta, -np.inf))
                out[left] = np.exp(-j * eps) * self.values[np.searchsorted(self.breakpoints, s, side="right") - 1]
        if x.ndim == 0:
            return float(out[0])
        return out

    def total_mass(self):
        head = math.fsum(self.values * np.diff(self.breakpoints))
        if not self.has_decay_tail:
            return head
        _, lv = self.left_pattern()
        lrel, _ = self.left_pattern()
        rrel, rv = self.right_pattern()
        x = math.exp(-self.tail_eps)
        geo = x / (1 - x)
        return head + geo * (math.fsum(lv * np.diff(lrel)) + math.fsum(rv * np.diff(rrel)))

    def normalized(self):
        m = self.total_mass()
        return StepDensity1D(self.breakpoints, self.values / m, self.tail_eps, self.tail_delta)

    def tail_periods(self, rel=_TAIL_REL):
        """Tail copies per side after which the leftover mass is below ``rel`` of the total."""
        if not self.has_decay_tail:
            return 0
        # leftover after J copies per side is (sum of both patterns) * x^{J+1}/(1-x) <= total * x^J
        return int(math.ceil(-math.log(rel) / self.tail_eps)) + 1

    def abs_cdf(self):
        """CDF of |X| for X with this (normalized) density."""
        periods = self.tail_periods()
        lo, hi, val = self.segments(periods)
        total = self.total_mass()
        # F(t) = int_{-t}^{t} f; accumulate symmetric pieces via the density's primitive
        mass = val * (hi - lo)
        prim_at = np.concatenate([[0.0], np.cumsum(mass)])
        left_rest = 0.0
        if self.has_decay_tail:
            lrel, lv = self.left_pattern()
            x = math.exp(-self.tail_eps)
            left_rest = math.fsum(lv * np.diff(lrel)) * x ** (periods + 1) / (1 - x)

        def primitive(z):
            z = np.asarray(z, dtype=float)
            idx = np.clip(np.searchsorted(hi, z, side="right"), 0, lo.size - 1)
            part = val[idx] * (np.clip(z, lo[idx], hi[idx]) - lo[idx])
            out = left_rest + prim_at[idx] + part
            out = np.where(z < lo[0], left_rest, out)
            return np.where(z >= hi[-1], total, out)

        def func(t):
            t = np.asarray(t, dtype=float)
            tt = np.maximum(t, 0.0)
            out = (primitive(tt) - primitive(-tt)) / total
            out = np.clip(out, 0.0, 1.0)
            return out if out.ndim else float(out)

        edges = np.abs(np.concatenate([lo, hi[-1:]]))
        return PiecewiseCDF(func, np.unique(np.append(edges, 0.0)))


class GridSet:
    """Finite union of disjoint half-open intervals ``[a, b)`` on the line.

    Endpoints may be floats or :class:`fractions.Fraction` for exact arithmetic.
    Overlapping or touching input intervals are merged.
    """

    def __init__(self, intervals=()):
        cleaned = sorted((a, b) for a, b in intervals if b > a)
        merged = []
        for a, b in cleaned:
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        self.intervals = tuple(merged)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __eq__(self, other):
        return isinstance(other, GridSet) and self.intervals == other.intervals

    def __repr__(self):
        return f"GridSet({list(self.intervals)!r})"

    @property
    def measure(self):
        return sum((b - a for a, b in self.intervals), Fraction(0) if self._exact() else 0.0)

    def _exact(self):
        return all(isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)) for a, b in self.intervals)

    def is_empty(self):
        return not self.intervals

    def intersection(self, other):
        out = []
        i = j = 0
        A, B = self.intervals, other.intervals
        while i < len(A) and j < len(B):
            a = max(A[i][0], B[j][0])
            b = min(A[i][1], B[j][1])
            if b > a:
                out.append((a, b))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return GridSet(out)

    def difference(self, other):
        """``self`` minus ``other``."""
        out = []
        for a, b in self.intervals:
            cur = a
            for c, d in other.intervals:
                if d <= cur or c >= b:
                    continue
                if c > cur:
                    out.append((cur, c))
                cur = max(cur, d)
                if cur >= b:
                    break
            if cur < b:
                out.append((cur, b))
        return GridSet(out)

    def minkowski_sum(self, other):
        """``{a + b}``; sums of half-open intervals ``[a1+a2, b1+b2)`` up to a null set."""
        return GridSet([(a1 + a2, b1 + b2) for a1, b1 in self.intervals for a2, b2 in other.intervals])
