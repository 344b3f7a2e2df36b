"""Random instances for property tests: interval unions, DP step densities, profiles and violators."""

import math
from fractions import Fraction

import numpy as np

from ._rng import as_generator
from .profiles import GridSet, RadialProfile, StepDensity1D


def random_gridset(rng=None, max_intervals=4, denom=8, span=16):
    """Union of up to ``max_intervals`` intervals with Fraction endpoints on a 1/denom grid."""
    rng = as_generator(rng)
    k = int(rng.integers(0, max_intervals + 1))
    ivs = []
    for _ in range(k):
        a = int(rng.integers(-span * denom, span * denom))
        w = int(rng.integers(1, 4 * denom + 1))
        ivs.append((Fraction(a, denom), Fraction(a + w, denom)))
    return GridSet(ivs)


def random_dp_step_density(eps, delta, rng=None, cells=8, middle_periods=3):
    """Normalized, generally non-monotone 1-D step density that is eps-DP for sensitivity delta.

    Consecutive cells of width ``delta/cells`` differ by at most ``eps/cells``
    in log value, so any two points within ``delta`` differ by at most eps.
    The first and last periods are ramps of exactly ``eps/cells`` per cell,
    which the decay tails continue seamlessly.
    """
    rng = as_generator(rng)
    step = eps / cells
    n_mid = int(middle_periods * cells)
    mid_steps = rng.uniform(-step, step, size=n_mid)
    left = np.arange(1, cells + 1) * step
    middle = left[-1] + np.cumsum(mid_steps)
    right = middle[-1] - np.arange(1, cells + 1) * step
    logv = np.concatenate([left, middle, right])
    logv -= logv.max()
    width = delta / cells
    x0 = float(rng.uniform(-2.0, 2.0)) * delta - (cells + n_mid / 2) * width
    edges = x0 + np.arange(logv.size + 1) * width
    return StepDensity1D(edges, np.exp(logv), eps, delta).normalized()


def random_admissible_profile(eps, delta, norm=None, rng=None, cells=8, periods=3):
    """Nonincreasing radial profile with log drops in ``[0, eps/cells]`` per cell and a decay tail.

    Satisfies the log-Lipschitz bound but is generally not maximally
    decaying. Normalized on R^n when ``norm`` is given.
    """
    rng = as_generator(rng)
    drops = rng.uniform(0.0, eps / cells, size=periods * cells - 1)
    logv = np.concatenate([[0.0], -np.cumsum(drops)])
    edges = np.linspace(0.0, periods * delta, periods * cells + 1)
    prof = RadialProfile(edges, np.exp(logv), eps, delta)
    return prof if norm is None else prof.normalized(norm.dim, norm.unit_volume)


def random_d_profile(eps, delta, norm=None, rng=None, grid=64):
    """Random maximal-decay profile on a ``grid``-cell period: total drop within a period at most eps."""
    rng = as_generator(rng)
    share = rng.dirichlet(np.ones(grid))
    total = eps * float(rng.uniform(0.0, 1.0))
    drops = total * share[:-1]
    logv = np.concatenate([[0.0], -np.cumsum(drops)])
    edges = np.arange(grid + 1) * (delta / grid)
    edges[-1] = delta
    prof = RadialProfile(edges, np.exp(logv), eps, delta)
    return prof if norm is None else prof.normalized(norm.dim, norm.unit_volume)


def jump_violator(eps, delta, jump, rng=None, cells=8, periods=3):
    """An admissible profile with one extra log drop of size ``jump`` at an interior cell edge."""
    rng = as_generator(rng)
    base = random_admissible_profile(eps, delta, rng=rng, cells=cells, periods=periods)
    cut = int(rng.integers(1, base.values.size))
    vals = base.values.copy()
    vals[cut:] *= math.exp(-jump)
    return RadialProfile(base.breakpoints, vals, eps, delta)


def decay_violator(eps, delta, rng=None, cells=8, ratio=0.5):
    """Two explicit periods where the second is the first times ``e^{-ratio eps}``."""
    rng = as_generator(rng)
    drops = rng.uniform(0.0, eps / cells, size=cells - 1)
    first = np.exp(np.concatenate([[0.0], -np.cumsum(drops)]))
    vals = np.concatenate([first, first * math.exp(-ratio * eps)])
    edges = np.linspace(0.0, 2 * delta, 2 * cells + 1)
    return RadialProfile(edges, vals, eps, delta)
