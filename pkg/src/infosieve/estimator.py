"""scikit-learn compatible wrapper around :func:`infosieve.model.fit_sieve`."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import PreprocSpec
from .layer import FitConfig
from .model import StopRule, factor_map, fit_sieve, inverse, reconstruct, transform

__all__ = ["InformationSieve"]


class InformationSieve(TransformerMixin, BaseEstimator):
    """Linear information sieve as a transformer.

    Parameters
    ----------
    n_layers : int, default=10
        Maximum number of layers (factors).
    min_tc : float, default=1e-3
        Stop after the first layer contributing less than this (nats).
    n_restarts : int, default=10
    max_iterations : int, default=10000
    tol : float, default=1e-8
    residual_tol : float, default=1e-6
    gaussianize : {'none', 'rank'}, default='none'
    rank_tie_rule : {'average', 'first'}, default='average'
    center : bool, default=True
    channel_noise : bool, default=True
    moments : {'auto', 'samples', 'gram'}, default='auto'
    random_state : int, default=0

    Attributes
    ----------
    model_ : SieveModel
    n_features_in_ : int
    tc_ledger_ : list of float
        Per-layer TC contributions in nats.

    Examples
    --------
    >>> import numpy as np
    >>> from infosieve import InformationSieve
    >>> rng = np.random.default_rng(0)
    >>> z = rng.standard_normal((500, 1))
    >>> X = z + 0.3 * rng.standard_normal((500, 6))
    >>> sieve = InformationSieve(n_layers=1).fit(X)
    >>> sieve.transform(X).shape
    (500, 1)
    """

    def __init__(
        self,
        n_layers=10,
        min_tc=1e-3,
        n_restarts=10,
        max_iterations=10000,
        tol=1e-8,
        residual_tol=1e-6,
        gaussianize="none",
        rank_tie_rule="average",
        center=True,
        channel_noise=True,
        moments="auto",
        random_state=0,
    ):
        self.n_layers = n_layers
        self.min_tc = min_tc
        self.n_restarts = n_restarts
        self.max_iterations = max_iterations
        self.tol = tol
        self.residual_tol = residual_tol
        self.gaussianize = gaussianize
        self.rank_tie_rule = rank_tie_rule
        self.center = center
        self.channel_noise = channel_noise
        self.moments = moments
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        cfg = FitConfig(
            n_restarts=self.n_restarts,
            max_iterations=self.max_iterations,
            tol=self.tol,
            seed=self.random_state,
            residual_tol=self.residual_tol,
            moments=self.moments,
        )
        preproc = PreprocSpec(
            center=self.center, gaussianize=self.gaussianize, rank_tie_rule=self.rank_tie_rule
        )
        self.model_ = fit_sieve(
            X,
            cfg,
            StopRule(max_layers=self.n_layers, min_tc=self.min_tc),
            preproc,
            channel_noise=self.channel_noise,
        )
        self.tc_ledger_ = self.model_.tc_ledger
        return self

    def _check(self, X, min_samples=1):
        check_is_fitted(self, "model_")
        return validate_data(self, X, dtype=np.float64, reset=False, ensure_min_samples=min_samples)

    def transform(self, X):
        """Factors ``y_1 .. y_r`` as an ``(N, r)`` array.

        Each row is mapped independently by the deterministic learned map.
        """
        X = self._check(X)
        return factor_map(self.model_, X)

    def remainder(self, X):
        """Final remainder: observed-variable columns then factor columns."""
        X = self._check(X, min_samples=2)
        return transform(self.model_, X)[1].values

    def inverse_transform(self, X, remainder=None):
        """Map factors (and optionally a remainder) back to data space.

        Without ``remainder`` this is the reconstruction from factors alone.
        """
        check_is_fitted(self, "model_")
        factors = np.asarray(X, dtype=np.float64)
        if remainder is None:
            return reconstruct(self.model_, factors).values
        return inverse(self.model_, factors, remainder).values
