"""Mechanized checks of epsilon-DP for additive noise densities.

Covers pairwise density ratios, the radial log-Lipschitz property, maximal
decay, level-set enlargement and the Laplace sandwich. All radial checks
work on right-open step profiles, where finitely many plateau comparisons
decide each property exactly.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from ._rng import as_generator
from .norms import norm as norm_of
from .norms import sample_direction
from .profiles import GridSet, RadialProfile

RATIO_RTOL = 1e-12
# radial gap used for "distance Delta" pairs, keeps rounding from adding a period
_GAP = 1.0 - 1e-12


@dataclass(frozen=True)
class DpReport:
    max_ratio: float
    witness_pair: tuple
    passed: bool
    pairs_tested: int
    eps: float

    def to_json(self):
        x, y = self.witness_pair
        payload = {
            "max_ratio": self.max_ratio,
            "bound": math.exp(self.eps),
            "passed": self.passed,
            "pairs_tested": self.pairs_tested,
            "eps": self.eps,
            "witness_pair": [[float(v) for v in x], [float(v) for v in y]],
        }
        return json.dumps(payload, sort_keys=True)


def _unit_directions(norm, rng, size):
    u = sample_direction(norm, rng, size=size)
    return u / norm_of(norm, u)[:, None]


def check_ratio_pairs(density, eps, delta, norm, rng=None, N=10_000, sampler=None, breakpoints=None, log=False):
    """Largest ``f(x)/f(y)`` (either order) over pairs with ``||x - y|| <= delta``.

    Base points come from ``sampler(rng, size)`` when given, otherwise radii
    uniform on the breakpoint span. Partners are ``x + t delta U`` with ``t``
    uniform and ``U`` a unit direction. Deterministic pairs straddle every
    radius in ``breakpoints``: one step below vs. on it, and radii a full
    ``delta`` apart on either side. With ``log=True`` the evaluator returns
    ``log f``, which keeps ratios of far-out plateaus exact.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = as_generator(rng)
    n = norm.dim
    bps = np.unique(np.asarray([] if breakpoints is None else breakpoints, dtype=float))
    bps = bps[bps >= 0]
    if sampler is not None:
        x = np.asarray(sampler(rng, N), dtype=float).reshape(N, n)
    else:
        span = (bps.max() if bps.size else 0.0) + 2.0 * delta
        x = rng.uniform(0.0, span, size=N)[:, None] * _unit_directions(norm, rng, N)
    t = rng.random(N) * _GAP
    y = x + (t * delta)[:, None] * _unit_directions(norm, rng, N)

    if bps.size:
        axis = np.zeros(n)
        axis[0] = 1.0
        rand_dir = _unit_directions(norm, rng, 1)[0]
        below = np.nextafter(bps, -np.inf)
        pairs_r = [
            (below, bps),
            (bps * (1 - 2.0**-40), bps),
            (bps, bps + delta * _GAP),
            (below, below + delta * _GAP),
            (bps - delta * _GAP, bps),
        ]
        xs, ys = [], []
        for rx, ry in pairs_r:
            ok = (rx >= 0) & (ry >= 0)
            for direction in (axis, rand_dir):
                xs.append(rx[ok, None] * direction)
                ys.append(ry[ok, None] * direction)
        x = np.concatenate([x] + xs)
        y = np.concatenate([y] + ys)

    fx = np.asarray(density(x), dtype=float)
    fy = np.asarray(density(y), dtype=float)
    if log:
        with np.errstate(invalid="ignore"):
            gap = np.abs(fx - fy)
        gap = np.where(fx == fy, 0.0, gap)
        ratios = np.exp(gap)
    else:
        hi = np.maximum(fx, fy)
        lo = np.minimum(fx, fy)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(hi == lo, 1.0, hi / lo)
    ratios = np.where(np.isnan(ratios), np.inf, ratios)
    worst = int(np.argmax(ratios))
    max_ratio = float(ratios[worst])
    return DpReport(
        max_ratio=max_ratio,
        witness_pair=(tuple(x[worst]), tuple(y[worst])),
        passed=bool(max_ratio <= math.exp(eps) * (1 + RATIO_RTOL)),
        pairs_tested=int(ratios.size),
        eps=float(eps),
    )


def staircase_log_density(params):
    """Unnormalized ``log f_gamma`` (``-j eps`` on plateau ``j``) for ratio checks."""
    from .staircase import _plateau_index

    def log_f(x):
        return -_plateau_index(params, norm_of(params.norm, x)) * params.eps

    return log_f


def check_staircase_ratios(params, table, rng=None, N=10_000):
    """:func:`check_ratio_pairs` wired to a staircase's sampler and breakpoints."""
    from .staircase import sample

    ks = np.arange(table.k_max + 2, dtype=float)
    bps = np.concatenate([ks, ks + params.gamma]) * params.delta

    def sampler(gen, size):
        return sample(params, table, gen, size)

    return check_ratio_pairs(
        staircase_log_density(params), params.eps, params.delta, params.norm, rng, N,
        sampler=sampler, breakpoints=bps, log=True,
    )


def profile_log_density(profile, norm):
    def log_f(x):
        with np.errstate(divide="ignore"):
            return np.log(np.atleast_1d(profile(norm_of(norm, x))))

    return log_f


def profile_breakpoints(profile, extra_periods=3):
    r_max = profile.end + (extra_periods * profile.tail_delta if profile.has_decay_tail else 0.0)
    lo, hi, _ = profile.segments(r_max)
    return np.unique(np.concatenate([lo, hi]))


def check_profile_ratios(profile, eps, delta, norm, rng=None, N=10_000):
    """:func:`check_ratio_pairs` for ``x -> rho(||x||)`` with straddles at every breakpoint."""
    return check_ratio_pairs(
        profile_log_density(profile, norm), eps, delta, norm, rng, N,
        breakpoints=profile_breakpoints(profile), log=True,
    )


def _log_gap_ok(v_i, window, eps, tol):
    """Plateau ``v_i`` against every plateau in ``window`` within a log gap of ``eps``."""
    if window.size == 0:
        return True
    vmax, vmin = window.max(), window.min()
    if v_i == 0.0:
        return vmax == 0.0
    if vmin == 0.0:
        return False
    bound = eps + tol * max(1.0, eps)
    return math.log(vmax) - math.log(v_i) <= bound and math.log(v_i) - math.log(vmin) <= bound


def _materialized(profile, extra_periods):
    if profile.has_decay_tail:
        return profile.segments(profile.end + extra_periods * profile.tail_delta)
    # explicit part followed by the zero continuation
    return profile.segments(profile.end + 1.0)


def check_radial_loglip(profile, eps, delta, tol=RATIO_RTOL):
    """Whether ``|log rho(r) - log rho(s)| <= eps ceil(|r - s| / delta)`` for all r, s.

    Pairs with ``|r - s| <= delta`` suffice (longer pairs chain through
    ``ceil(|r-s|/delta)`` such steps). Plateaus ``[a_i, b_i)``, ``[a_j, b_j)``
    with ``i < j`` host such a pair iff ``a_j - b_i < delta``. Two periods of
    a decay tail cover every tail window since the pattern repeats.
    """
    lo, hi, val = _materialized(profile, extra_periods=3)
    for i in range(val.size):
        # plateaus exactly delta apart (up to rounding of grid edges) do not interact
        reach = hi[i] + delta - tol * max(delta, hi[i])
        j_end = int(np.searchsorted(lo, reach, side="left"))
        if not _log_gap_ok(val[i], val[i + 1 : j_end], eps, tol):
            return False
    return True


def check_maximal_decay(profile, eps, delta, tol=1e-9):
    """Membership in the maximal-decay class on a right-open step profile.

    Requires a decay tail with these ``(eps, delta)``, whole-period explicit
    support, ``rho(t + delta) = e^{-eps} rho(t)`` on every cell of the
    explicit part, and a nonincreasing profile. Right-open plateaus of a
    nonincreasing step function are lower semicontinuous by construction.
    """
    if not profile.has_decay_tail:
        return False
    if not (math.isclose(profile.tail_eps, eps, rel_tol=1e-12) and math.isclose(profile.tail_delta, delta, rel_tol=1e-12)):
        return False
    periods = profile.end / delta
    if abs(periods - round(periods)) > 1e-9 * max(1.0, periods) or round(periods) < 1:
        return False
    if not profile.is_nonincreasing(rel_tol=tol):
        return False
    bp = profile.breakpoints
    cells = np.unique(np.concatenate([bp, bp - delta, bp + delta]))
    cells = cells[(cells >= 0) & (cells <= profile.end)]
    mids = 0.5 * (cells[:-1] + cells[1:])
    here = profile(mids)
    there = profile(mids + delta)
    target = here * math.exp(-eps)
    return bool(np.all(np.abs(there - target) <= tol * np.maximum(np.abs(target), 1e-300)))


def enlargement_radius(h, eps, delta):
    """``delta (ceil(h/eps) - 1)``; ``h/eps`` within 1e-12 of an integer is snapped."""
    if not h > 0:
        raise ValueError("h must be positive")
    ratio = h / eps
    near = round(ratio)
    if abs(ratio - near) <= 1e-12 * max(1.0, abs(ratio)):
        ratio = near
    return delta * (math.ceil(ratio) - 1)


def enlarge_interval(lo, hi, h, eps, delta, lo_closed=True, hi_closed=True):
    """h-enlargement of an interval on the line under ``eps ceil(|x-y|/delta)``.

    Returns ``(lo', hi', lo_closed', hi_closed')``. The enlargement is the set
    of points within (attained) distance ``gamma(h)`` of the interval, i.e.
    the Minkowski sum with the closed ball of that radius.
    """
    g = enlargement_radius(h, eps, delta)
    return lo - g, hi + g, lo_closed, hi_closed


def minkowski_open_ball(lo, hi, radius, lo_closed=True, hi_closed=True):
    """``[lo, hi] + radius * B`` with ``B`` the open unit ball (radius 0 leaves the set unchanged)."""
    if radius == 0:
        return lo, hi, lo_closed, hi_closed
    return lo - radius, hi + radius, False, False


def _level_set(lo, hi, val, level):
    return GridSet([(a, b) for a, b, v in zip(lo, hi, val) if v > level])


def levelset_grid(profile, eps, max_k=3, rel=1e-9):
    """Canonical ``(lambdas, hs)`` for :func:`check_levelset_enlargement`.

    ``lambda`` sits just below each distinct positive plateau of the explicit
    part and ``h`` just above ``k eps`` for ``k = 1..max_k``, so that
    ``gamma(h) = k delta`` and each level set is exactly ``{rho >= plateau}``.
    """
    vals = np.unique(profile.values[profile.values > 0])
    lambdas = [float(v) * (1 - rel) for v in vals[::-1]]
    hs = [k * eps * (1 + rel) for k in range(1, max_k + 1)]
    return lambdas, hs


def check_levelset_enlargement(profile, eps, delta, lambdas, hs, tol=1e-12):
    """Whether ``{rho > lambda}_h`` is inside ``{rho > lambda e^{-h}}`` for every pair.

    Level sets of ``x -> rho(||x||)`` are radial, so everything is computed
    on radii: a plateau ``[a, b)`` of ``{rho > lambda}`` grows to
    ``[a - gamma(h), b + gamma(h))``. Uncovered pieces no wider than ``tol``
    relative (boundary-exact cases) are not counted.
    """
    lambdas = [float(v) for v in lambdas]
    hs = [float(h) for h in hs]
    if any(v <= 0 for v in lambdas) or any(h <= 0 for h in hs):
        raise ValueError("levels and enlargement sizes must be positive")
    if not lambdas or not hs:
        return True
    top = float(profile.values.max())
    floor = min(lambdas) * math.exp(-max(hs))
    g_max = max(enlargement_radius(h, eps, delta) for h in hs)
    if profile.has_decay_tail and top > 0:
        pos = profile.values[profile.values > 0]
        periods = math.ceil(math.log(top / min(floor, pos.min())) / profile.tail_eps) + 2
        r_max = profile.end + (periods + g_max / profile.tail_delta + 1) * profile.tail_delta
    else:
        r_max = profile.end + g_max + delta
    lo, hi, val = profile.segments(r_max)
    for lam in lambdas:
        if lam >= top:
            continue
        src = _level_set(lo, hi, val, lam * (1 + tol))
        for h in hs:
            g = enlargement_radius(h, eps, delta)
            grown = GridSet([(max(0.0, a - g), b + g) for a, b in src])
            tgt = _level_set(lo, hi, val, lam * math.exp(-h) * (1 - tol))
            for a, b in grown.difference(tgt):
                if b - a > tol * max(1.0, abs(b)):
                    return False
    return True


def laplace_profile_value(t, eps, delta, norm):
    """``eps^n / (|B| n! delta^n) exp(-eps t / delta)``, the radial Laplace comparator."""
    n = norm.dim
    t = np.asarray(t, dtype=float)
    log_c = n * math.log(eps) - norm.log_unit_volume - math.lgamma(n + 1) - n * math.log(delta)
    out = np.exp(log_c - eps * t / delta)
    return float(out) if out.ndim == 0 else out


def laplace_grid_profile(eps, delta, norm, cells=64, periods=1):
    """Normalized grid restriction of the radial Laplace comparator (a maximal-decay profile)."""
    raw = RadialProfile.from_function(
        lambda t: laplace_profile_value(t, eps, delta, norm), eps, delta, cells, periods
    )
    return raw.normalized(norm.dim, norm.unit_volume)


def laplace_sandwich_check(profile, eps, delta, norm, tol=RATIO_RTOL):
    """``e^{-2 eps} phi(t) <= rho(t) <= e^{2 eps} phi(t)`` on every plateau.

    The profile must be a probability density on R^n (mass within 1e-9 of 1)
    in the maximal-decay class; both sides decay by ``e^{-eps}`` per period,
    so the explicit plateaus decide the bound for all t.
    """
    n = norm.dim
    mass = profile.mass(n, norm.unit_volume)
    if not abs(mass - 1.0) <= 1e-9:
        raise ValueError(f"profile is not normalized on R^{n} (mass {mass!r})")
    if not check_maximal_decay(profile, eps, delta):
        raise ValueError("profile is not in the maximal-decay class")
    a = profile.breakpoints[:-1]
    b = profile.breakpoints[1:]
    v = profile.values
    upper = np.exp(2 * eps) * laplace_profile_value(b, eps, delta, norm)
    lower = np.exp(-2 * eps) * laplace_profile_value(a, eps, delta, norm)
    return bool(np.all(v <= upper * (1 + tol)) and np.all(v >= lower * (1 - tol)))
