"""Search for the optimal staircase offset, Laplace baselines and tradeoff sweeps."""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from ._rng import map_shards, substream
from .cost import CostSpec, expected_cost_mc, expected_cost_series
from .norms import NormSpec
from .staircase import StaircaseParams, build_band_table

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LAPLACE_FLAVORS = ("product_l1", "radial")


@dataclass(frozen=True)
class TradeoffRow:
    eps: float
    dim: int
    p: float
    gamma_star: float
    staircase_cost: float
    laplace_cost: float
    cost_kind: str
    mc_mean: float = None
    mc_stderr: float = None
    mc_agrees: bool = None

    def as_dict(self):
        return asdict(self)


def staircase_cost(eps, delta, norm, cost, gamma, tol=1e-12):
    params = StaircaseParams(eps, delta, gamma, norm)
    return expected_cost_series(params, None, cost, tol=tol)


def find_gamma_star(eps, delta, norm, cost, grid_points=101, refine_tol=1e-6, refine_iters=200, tol=1e-12):
    """Grid search over gamma in [0, 1] followed by golden-section refinement.

    The refinement only runs inside the grid cells around the grid minimum;
    the returned point is the best of everything evaluated, so its cost is
    never above any grid point's.
    """
    grid_points = int(grid_points)
    if grid_points < 3:
        raise ValueError("grid_points must be at least 3")

    def J(g):
        return staircase_cost(eps, delta, norm, cost, float(g), tol=tol)

    grid = np.linspace(0.0, 1.0, grid_points)
    values = [J(g) for g in grid]
    best = int(np.argmin(values))
    best_g, best_v = float(grid[best]), float(values[best])

    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, grid_points - 1)])
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = J(c), J(d)
    for _ in range(int(refine_iters)):
        if b - a < refine_tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = J(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = J(d)
    for g, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_g, best_v = float(g), float(v)
    return best_g, best_v


def laplace_baseline_cost(eps, delta, dim, flavor="product_l1", cost=None, p=1):
    """Expected cost of a Laplace comparator.

    ``product_l1`` is i.i.d. Laplace(delta/eps) per coordinate paired with the
    l1 norm; ``radial`` has density proportional to ``exp(-eps ||x|| / delta)``.
    Both give ``||X| ~ Gamma(dim, delta/eps)``, so every cost has a closed form.
    """
    if flavor not in LAPLACE_FLAVORS:
        raise ValueError(f"flavor must be one of {LAPLACE_FLAVORS}, got {flavor!r}")
    spec = NormSpec(p, dim)
    if flavor == "product_l1" and spec.p != 1:
        raise ValueError("product_l1 Laplace is only matched with the l1 norm (p=1)")
    if not (eps > 0 and delta > 0):
        raise ValueError("eps and delta must be positive")
    cost = CostSpec.power(1.0) if cost is None else cost
    n = int(dim)
    scale = delta / eps
    if cost.kind == "power":
        q = cost.q
        return float(special.poch(n, q)) * scale**q
    if cost.kind == "threshold":
        return float(special.gammaincc(n, cost.lam / scale))
    t = cost.cap / scale
    return float(n * scale * special.gammainc(n + 1, t) + cost.cap * special.gammaincc(n, t))


def _sweep_row(args):
    eps, n, p, delta, cost, grid_points, mc_samples, seed, n_shards, tol = args
    norm = NormSpec(p, n)
    g, v = find_gamma_star(eps, delta, norm, cost, grid_points=grid_points, tol=tol)
    flavor = "product_l1" if norm.p == 1 else "radial"
    lap = laplace_baseline_cost(eps, delta, n, flavor, cost, p)
    row = dict(eps=float(eps), dim=n, p=norm.p, gamma_star=g, staircase_cost=v, laplace_cost=lap, cost_kind=cost.tag)
    if mc_samples:
        params = StaircaseParams(eps, delta, g, norm)
        table = build_band_table(params)
        rng = substream(seed, f"sweep:{float(eps)!r}:{n}")
        mean, se = expected_cost_mc(params, table, cost, rng, mc_samples, n_shards)
        row.update(mc_mean=mean, mc_stderr=se, mc_agrees=bool(abs(mean - v) <= 3 * se))
    return TradeoffRow(**row)


def tradeoff_sweep(eps_list, dim_list, p=1, cost=None, mc_check=False, delta=1.0, grid_points=101,
                   mc_samples=100_000, seed=0, n_shards=4, tol=1e-12):
    """One :class:`TradeoffRow` per (eps, dim), sorted by (eps, dim).

    With ``mc_check`` each row also carries a Monte Carlo estimate at gamma*
    from a substream keyed on ``(seed, eps, dim)``.
    """
    eps_list = sorted({float(e) for e in eps_list})
    dim_list = sorted({int(n) for n in dim_list})
    if not eps_list or not dim_list:
        raise ValueError("eps_list and dim_list must be nonempty")
    cost = CostSpec.power(1.0) if cost is None else cost
    jobs = [
        (e, n, p, delta, cost, grid_points, mc_samples if mc_check else 0, seed, n_shards, tol)
        for e in eps_list
        for n in dim_list
    ]
    return map_shards(_sweep_row, jobs)
