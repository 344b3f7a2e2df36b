"""Rearrangements, the rho_y construction, mass matching, domination and mixture decomposition.

Everything works on right-open step functions, so each statement reduces to
finitely many plateau comparisons.
"""

import math
from fractions import Fraction

import numpy as np
from scipy.optimize import nnls

from .dpverify import check_maximal_decay, check_radial_loglip
from .profiles import GridSet, PiecewiseCDF, RadialProfile, StepDensity1D
from .staircase import _log_norm_sum


class DecompositionError(ValueError):
    """The profile is not a nonnegative mixture of staircases on the given grid."""


def rearrange_set(A, ball_volume_coeff=2, n=1):
    """Centered rearrangement ``(-r, r)`` with ``r = (|A| / |B|)^{1/n}``.

    On the line (``n = 1``, ``|B| = 2``) the result has the same measure as
    ``A``; with Fraction endpoints the arithmetic is exact. The open interval
    is stored half-open, which differs only by a null set.
    """
    if not isinstance(A, GridSet):
        A = GridSet(A)
    if A.is_empty():
        return GridSet()
    measure = A.measure
    if n == 1:
        if isinstance(measure, Fraction) and isinstance(ball_volume_coeff, (int, Fraction)):
            r = measure / Fraction(ball_volume_coeff)
        else:
            r = measure / ball_volume_coeff
    else:
        r = (float(measure) / ball_volume_coeff) ** (1.0 / n)
    return GridSet([(-r, r)])


def _dedupe(points, anchors, scale):
    """Sorted unique points; anything within rounding of an anchor becomes the anchor."""
    tol = 1e-12 * max(1.0, scale)
    pts = np.sort(np.asarray(points, dtype=float))
    for a in anchors:
        pts[np.abs(pts - a) <= tol] = a
    pts = np.unique(np.concatenate([pts, anchors]))
    keep = np.concatenate([[True], np.diff(pts) > tol])
    out = pts[keep]
    for a in anchors:
        out[np.argmin(np.abs(out - a))] = a
    return np.unique(out)


def _merge_equal(edges, values):
    keep = np.concatenate([[True], values[1:] != values[:-1]])
    idx = np.flatnonzero(keep)
    return np.append(edges[idx], edges[-1]), values[idx]


def _profile_on_cells(points, func, end, eps, delta):
    edges = _dedupe(points[(points > 0) & (points < end)], [0.0, end - delta, end], end)
    edges = edges[(edges >= 0) & (edges <= end)]
    mids = 0.5 * (edges[:-1] + edges[1:])
    vals = np.asarray(func(mids), dtype=float)
    edges, vals = _merge_equal(edges, vals)
    return RadialProfile(edges, vals, eps, delta)


def rearrange_profile(f):
    """Symmetric decreasing rearrangement of a 1-D step density, as a radial profile.

    Plateaus are sorted by value and stacked outward, each taking half its
    width in radius (the ball of radius r has length 2r). Below the smallest
    explicit value ``theta`` only decay-tail copies remain; every pattern cell
    has exactly one copy in ``[theta e^{-eps}, theta)`` per band, so those
    copies, sorted, form one ``delta``-wide period of the rearranged tail.
    """
    if not isinstance(f, StepDensity1D):
        raise TypeError("f must be a StepDensity1D")
    vals = f.values
    widths = np.diff(f.breakpoints)
    pos = vals > 0
    if not np.any(pos):
        raise ValueError("density is identically zero")
    if not f.has_decay_tail:
        order = np.argsort(-vals[pos], kind="stable")
        edges = np.concatenate([[0.0], np.cumsum(widths[pos][order] / 2.0)])
        return RadialProfile(*_merge_equal(edges, vals[pos][order]))

    eps, delta = f.tail_eps, f.tail_delta
    theta = float(vals[pos].min())
    up_vals = [vals[pos]]
    up_widths = [widths[pos]]
    band_vals, band_widths = [], []
    for rel, pv in (f.left_pattern(), f.right_pattern()):
        for w, v in zip(np.diff(rel), pv):
            if v <= 0:
                continue
            j = 1
            copy = v * math.exp(-eps)
            while copy >= theta:
                up_vals.append([copy])
                up_widths.append([w])
                j += 1
                copy = v * math.exp(-j * eps)
            band_vals.append(copy)
            band_widths.append(w)
    up_vals = np.concatenate(up_vals)
    up_widths = np.concatenate(up_widths)
    order = np.argsort(-up_vals, kind="stable")
    upper_edges = np.concatenate([[0.0], np.cumsum(up_widths[order] / 2.0)])
    band_vals = np.asarray(band_vals)
    band_widths = np.asarray(band_widths)
    border = np.argsort(-band_vals, kind="stable")
    end = upper_edges[-1] + delta
    # make the tail pattern start exactly where the band starts
    upper_edges[-1] = end - delta
    inner = upper_edges[-1] + np.cumsum(band_widths[border] / 2.0)[:-1]
    inner = inner[inner < end]
    edges = np.concatenate([upper_edges, inner, [end]])
    values = np.concatenate([up_vals[order], band_vals[border][: inner.size + 1]])
    edges, values = _merge_equal(edges, values)
    return RadialProfile(edges, values, eps, delta)


def make_rho_y(rho, y, eps, delta):
    """Maximal-decay modification of ``rho`` anchored on the window ``[y, y + delta)``.

    ``rho_y(r) = e^{-eps floor((r-y)/delta)} rho(r - delta floor((r-y)/delta))``.
    The explicit part is stored on whole periods ``[0, m delta)`` followed by a
    decay tail.
    """
    y = float(y)
    if y < 0:
        raise ValueError("y must be nonnegative")
    if not rho.is_nonincreasing():
        raise ValueError("rho must be nonincreasing")
    if not check_radial_loglip(rho, eps, delta):
        raise ValueError("rho must satisfy the eps-per-delta log-Lipschitz bound")

    def rho_y(r):
        r = np.asarray(r, dtype=float)
        j = np.floor((r - y) / delta)
        return np.exp(-eps * j) * rho(np.clip(r - j * delta, 0.0, None))

    m = int(math.floor(y / delta)) + 1
    end = m * delta
    lo, hi, _ = rho.segments(y + delta)
    window = np.concatenate([lo, hi])
    window = window[(window >= y) & (window < y + delta)]
    base = np.mod(np.append(window, y), delta)
    shifts = np.arange(-1, m + 2, dtype=float) * delta
    points = (base[:, None] + shifts[None, :]).ravel()
    return _profile_on_cells(points, rho_y, end, eps, delta)


def psi(rho_y, n):
    """``int_0^inf r^{n-1} rho_y(r) dr`` in closed form."""
    return rho_y.moment_integral(n)


def find_mass_matching_y(rho, n, eps, delta, tol=1e-12):
    """``(y, rho_y)`` with ``psi(y)`` matching ``int r^{n-1} rho`` to relative ``tol``.

    ``psi(0) <= target`` since ``rho_0 <= rho``; ``m`` is doubled until
    ``psi(m delta) >= target`` and the bracket is bisected. A profile that
    already decays maximally is returned unchanged with ``y = 0``.
    """
    if check_maximal_decay(rho, eps, delta):
        return 0.0, rho
    target = rho.moment_integral(n)
    if not target > 0:
        raise ValueError("profile has zero mass")

    def gap(y):
        prof = make_rho_y(rho, y, eps, delta)
        return psi(prof, n) - target, prof

    g0, p0 = gap(0.0)
    if abs(g0) <= tol * target:
        return 0.0, p0
    lo, hi = 0.0, delta
    g_hi, p_hi = gap(hi)
    while g_hi < 0:
        lo = hi
        hi *= 2.0
        if hi > 1e6 * max(delta, rho.end):
            raise ArithmeticError("no mass-matching bracket found")
        g_hi, p_hi = gap(hi)
    best = (hi, p_hi, g_hi)
    for _ in range(200):
        if abs(best[2]) <= tol * target or hi - lo <= 4e-16 * max(hi, delta):
            break
        mid = 0.5 * (lo + hi)
        g_mid, p_mid = gap(mid)
        if abs(g_mid) < abs(best[2]):
            best = (mid, p_mid, g_mid)
        if g_mid < 0:
            lo = mid
        else:
            hi = mid
    return best[0], best[1]


def _cdf_grid(F, G, grid):
    if grid is not None:
        return np.unique(np.asarray(grid, dtype=float))
    pts = []
    for H in (F, G):
        if isinstance(H, PiecewiseCDF):
            pts.append(np.asarray(H.breakpoints, dtype=float))
    if not pts:
        raise ValueError("need breakpoints: pass PiecewiseCDF objects or a grid")
    return np.unique(np.concatenate(pts))


def check_domination(F, G, grid=None, tol=1e-12):
    """True iff ``F >= G`` at every breakpoint, i.e. the F-variable is dominated by the G-variable.

    Between consecutive breakpoints of radial step densities both CDFs are
    affine in ``r^n``, so ``F - G`` is monotone there and the breakpoints decide
    the comparison.
    """
    pts = _cdf_grid(F, G, grid)
    fv = np.asarray(F(pts), dtype=float)
    gv = np.asarray(G(pts), dtype=float)
    for name, v in (("F", fv), ("G", gv)):
        if np.any(np.diff(v) < -tol) or np.any(v < -tol) or np.any(v > 1 + tol):
            raise ValueError(f"{name} is not a CDF (non-monotone or outside [0, 1])")
    return bool(np.all(fv >= gv - tol))


def staircase_normalizer(eps, delta, gamma, norm):
    """``a(gamma)``: the top plateau of the normalized staircase density."""
    n = norm.dim
    return math.exp(-(norm.log_unit_volume + n * math.log(delta) + _log_norm_sum(eps, gamma, n)))


def decompose_staircase_mixture(rho, gamma_grid, eps, delta, norm, rtol=1e-8):
    """Weights ``w_j`` over ``gamma_j = j / gamma_grid`` with ``sum_j w_j f_{gamma_j} = rho``.

    Each column is the normalized staircase restricted to one period
    (``a(gamma_j)`` on cells below ``gamma_j``, ``a(gamma_j) e^{-eps}`` above);
    maximal decay carries the fit to every later period. Solved by
    nonnegative least squares; a plateau-wise relative residual above
    ``rtol`` raises :class:`DecompositionError`.
    """
    G = int(gamma_grid)
    if G < 1:
        raise ValueError("gamma_grid must be a positive integer")
    if not check_maximal_decay(rho, eps, delta):
        raise DecompositionError("profile is not in the maximal-decay class")
    gammas = np.arange(1, G + 1) / G
    a = np.array([staircase_normalizer(eps, delta, g, norm) for g in gammas])
    # fine cells: the gamma grid plus every breakpoint of rho in [0, delta)
    bp = rho.breakpoints[rho.breakpoints < delta]
    edges = np.unique(np.concatenate([np.arange(G + 1) * (delta / G), bp]))
    edges = edges[edges <= delta]
    mids = 0.5 * (edges[:-1] + edges[1:])
    cell = np.floor(mids / delta * G)
    A = np.where(cell[:, None] < np.arange(1, G + 1)[None, :], a[None, :], a[None, :] * math.exp(-eps))
    b = rho(mids)
    scale = b.max()
    w, _ = nnls(A / scale, b / scale)
    fit = A @ w
    resid = np.abs(fit - b) / np.maximum(b, 1e-300)
    if not np.all(resid <= rtol):
        raise DecompositionError(
            f"plateau-wise relative residual {resid.max():.3g} exceeds {rtol:g}"
        )
    return [(float(g), float(v)) for g, v in zip(gammas, w)]
