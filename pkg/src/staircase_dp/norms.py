"""lp norms on R^n: evaluation, ball volumes and cone-measure directions."""

import math
from dataclasses import dataclass

import numpy as np

from ._rng import as_generator


def _parse_p(p):
    if isinstance(p, str):
        if p.strip().lower() in {"inf", "infinity", "max"}:
            return math.inf
        p = float(p)
    return float(p)


@dataclass(frozen=True)
class NormSpec:
    """An lp norm on R^dim, ``1 <= p <= inf``."""

    p: float
    dim: int

    def __post_init__(self):
        p = _parse_p(self.p)
        if math.isnan(p) or p < 1:
            raise ValueError(f"norm exponent must satisfy p >= 1, got {self.p!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def is_inf(self):
        return math.isinf(self.p)

    @property
    def log_unit_volume(self):
        """log C_n, where C_n is the volume of the unit ball."""
        n = self.dim
        if self.is_inf:
            return n * math.log(2.0)
        p = self.p
        return n * (math.log(2.0) + math.lgamma(1.0 + 1.0 / p)) - math.lgamma(1.0 + n / p)

    @property
    def unit_volume(self):
        return math.exp(self.log_unit_volume)

    def __call__(self, x):
        return norm(self, x)


def norm(spec, x):
    """lp norm of ``x`` along its last axis.

    A 1-D input of length ``spec.dim`` returns a float; an ``(m, dim)`` array
    returns ``m`` norms.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != spec.dim:
        raise ValueError(
            f"expected vectors of length {spec.dim}, got shape {x.shape}"
        )
    a = np.abs(x)
    if spec.is_inf:
        out = a.max(axis=-1)
    elif spec.p == 1.0:
        out = a.sum(axis=-1)
    elif spec.p == 2.0:
        out = np.sqrt(np.einsum("...i,...i->...", a, a))
    else:
        # scale by the max coordinate so a**p neither overflows nor underflows
        m = a.max(axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        out = safe[..., 0] * np.sum((a / safe) ** spec.p, axis=-1) ** (1.0 / spec.p)
        out = np.where(m[..., 0] > 0, out, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def ball_volume(spec, r):
    """Volume C_n r^n of the radius-``r`` ball."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    with np.errstate(divide="ignore"):
        out = np.where(r > 0, np.exp(spec.log_unit_volume + spec.dim * np.log(np.where(r > 0, r, 1.0))), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def sample_direction(spec, rng=None, size=None):
    """Draw directions on the unit sphere of ``spec`` from its cone measure.

    Coordinates are drawn iid with density proportional to ``exp(-|t|^p)``
    (``|T| = W^(1/p)`` with ``W ~ Gamma(1/p)`` and a uniform sign), or uniform
    on ``[-1, 1]`` when ``p = inf``, and the vector is divided by its norm. For
    ``p = 1`` this is the exponential-and-random-sign recipe.

    Returns an array of shape ``(dim,)`` when ``size`` is None, otherwise
    ``(size, dim)``.
    """
    rng = as_generator(rng)
    count = 1 if size is None else int(size)
    shape = (count, spec.dim)
    if spec.is_inf:
        g = rng.uniform(-1.0, 1.0, size=shape)
    else:
        if spec.p == 1.0:
            mag = rng.standard_exponential(size=shape)
        else:
            mag = rng.standard_gamma(1.0 / spec.p, size=shape) ** (1.0 / spec.p)
        sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
        g = sign * mag
    u = g / norm(spec, g)[:, None]
    # second pass absorbs the rounding of the first division
    u = u / norm(spec, u)[:, None]
    if size is None:
        return u[0]
    return u
