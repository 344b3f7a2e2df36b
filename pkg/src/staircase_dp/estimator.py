"""scikit-learn style front end: fit chooses the staircase, transform adds the noise."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._rng import as_generator
from .cost import CostSpec, expected_cost_mc, expected_cost_series
from .norms import NormSpec
from .optimize import find_gamma_star
from .staircase import DEFAULT_TAIL_TOL, StaircaseParams, build_band_table, sample


class StaircaseMechanism(BaseEstimator, TransformerMixin):
    """Additive staircase noise for vector-valued queries with l_p sensitivity.

    Parameters
    ----------
    epsilon : float
        Privacy level.
    sensitivity : float
        l_p sensitivity of the query (delta).
    gamma : float or None
        Staircase offset in [0, 1]; ``None`` picks the cost-optimal offset at fit time.
    p : float or "inf"
        Norm exponent.
    cost, q, lam, cap
        Cost used when optimizing gamma: ``power`` (``||x||^q``), ``threshold``
        (``1{||x|| >= lam}``) or ``truncated`` (``min(||x||, cap)``).
    tail_tol : float
        Band-table truncation tolerance.
    grid_points : int
        Grid size of the gamma search.
    random_state : None, int or Generator
        Noise source; an int is expanded with the package's seed derivation.
    """

    def __init__(self, epsilon=1.0, sensitivity=1.0, gamma=None, p=1, cost="power", q=1.0, lam=1.0,
                 cap=1.0, tail_tol=DEFAULT_TAIL_TOL, grid_points=101, random_state=None):
        self.epsilon = epsilon
        self.sensitivity = sensitivity
        self.gamma = gamma
        self.p = p
        self.cost = cost
        self.q = q
        self.lam = lam
        self.cap = cap
        self.tail_tol = tail_tol
        self.grid_points = grid_points
        self.random_state = random_state

    def _cost_spec(self):
        if self.cost == "power":
            return CostSpec.power(self.q)
        if self.cost == "threshold":
            return CostSpec.threshold(self.lam)
        if self.cost == "truncated":
            return CostSpec.truncated(self.cap)
        raise ValueError(f"unknown cost {self.cost!r}")

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.norm_ = NormSpec(self.p, self.n_features_in_)
        self.cost_ = self._cost_spec()
        if self.gamma is None:
            self.gamma_, self.optimal_cost_ = find_gamma_star(
                self.epsilon, self.sensitivity, self.norm_, self.cost_, grid_points=self.grid_points
            )
        else:
            self.gamma_ = float(self.gamma)
            self.optimal_cost_ = None
        self.params_ = StaircaseParams(self.epsilon, self.sensitivity, self.gamma_, self.norm_)
        self.table_ = build_band_table(self.params_, self.tail_tol)
        self._rng = as_generator(self.random_state)
        return self

    def sample(self, n_samples=1, random_state=None):
        """Draw ``n_samples`` noise vectors, shape ``(n_samples, n_features_in_)``."""
        check_is_fitted(self, "table_")
        rng = self._rng if random_state is None else as_generator(random_state)
        return sample(self.params_, self.table_, rng, n_samples)

    def transform(self, X):
        """Return ``X`` plus independent staircase noise on every row."""
        check_is_fitted(self, "table_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X + sample(self.params_, self.table_, self._rng, X.shape[0])

    def expected_cost(self, method="series", n_samples=100_000, random_state=None):
        """Expected cost of the fitted noise; ``method='mc'`` returns ``(mean, stderr)``."""
        check_is_fitted(self, "table_")
        if method == "series":
            return expected_cost_series(self.params_, self.table_, self.cost_)
        if method == "mc":
            rng = self._rng if random_state is None else random_state
            return expected_cost_mc(self.params_, self.table_, self.cost_, rng, n_samples)
        raise ValueError("method must be 'series' or 'mc'")
