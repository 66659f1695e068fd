"""Closed-form information measures for Gaussian variables (in nats)."""
import math
from dataclasses import dataclass

import numpy as np

from .data import as_data_matrix
from .exceptions import DegenerateColumn, DomainError, SingularCovariance

__all__ = [
    "TcEstimate",
    "capacity_to_noise",
    "gaussian_tc",
    "gaussian_tc_from_cov",
    "nats_to_bits",
    "noise_to_capacity",
    "pairwise_mi",
]

# Condition estimate above which a correlation matrix counts as singular.
_MAX_CONDITION = 1e12
_MIN_DET = 1e-300


@dataclass(frozen=True)
class TcEstimate:
    """Total correlation of a set of columns.

    Attributes
    ----------
    value : float
        Total correlation in nats.
    d : int
        Number of variables.
    N : int
        Number of samples the estimate was computed from (0 for a covariance input).
    method : str
        Always ``'gaussian_closed_form'``.
    """

    value: float
    d: int
    N: int
    method: str = "gaussian_closed_form"

    def __float__(self):
        return self.value


def nats_to_bits(x):
    return x / math.log(2.0)


def gaussian_tc_from_cov(cov):
    """Total correlation of a Gaussian with covariance ``cov``.

    Computed as ``-1/2 log det R`` with ``R`` the correlation matrix, through
    a Cholesky factorization of ``R``.

    Raises
    ------
    DegenerateColumn
        A variance is zero.
    SingularCovariance
        ``R`` is not positive definite, its determinant underflows, or its
        condition estimate exceeds 1e12.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DomainError(f"covariance must be square, got shape {cov.shape}")
    var = np.diag(cov)
    zero = np.flatnonzero(var <= 0)
    if zero.size:
        raise DegenerateColumn(zero)
    scale = 1.0 / np.sqrt(var)
    corr = cov * scale[:, None] * scale[None, :]
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise SingularCovariance("correlation matrix is not positive definite") from None
    diag = np.diag(chol)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise SingularCovariance("non-finite Cholesky factor")
    logdet = 2.0 * np.sum(np.log(diag))
    # Squared ratio of extreme Cholesky pivots, a cheap condition estimate.
    cond = (diag.max() / diag.min()) ** 2
    if logdet < math.log(_MIN_DET) or cond > _MAX_CONDITION:
        raise SingularCovariance(
            f"correlation matrix is numerically singular (condition estimate {cond:.3g})"
        )
    return max(-0.5 * logdet, 0.0)


def gaussian_tc(data, columns=None):
    """Gaussian total correlation of selected columns of ``data``.

    Parameters
    ----------
    data : DataMatrix or array of shape (N, d)
    columns : sequence of int, optional
        Column subset; all columns by default.

    Returns
    -------
    TcEstimate
    """
    values = as_data_matrix(data).values
    if columns is not None:
        values = values[:, np.asarray(columns, dtype=int)]
    n, d = values.shape
    if n <= d:
        raise SingularCovariance(f"need more samples than columns ({n} <= {d})")
    centered = values - values.mean(axis=0)
    cov = centered.T @ centered / n
    return TcEstimate(value=gaussian_tc_from_cov(cov), d=d, N=n)


def pairwise_mi(rho):
    """Mutual information ``-1/2 log(1 - rho^2)`` of two jointly Gaussian variables."""
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    return -0.5 * math.log1p(-rho * rho)


def capacity_to_noise(capacity):
    """Noise variance of a unit-signal AWGN channel with the given capacity (nats)."""
    capacity = float(capacity)
    if not capacity > 0:
        raise DomainError(f"capacity must be positive, got {capacity}")
    return 1.0 / math.expm1(2.0 * capacity)


def noise_to_capacity(noise_var):
    """Capacity ``1/2 log(1 + 1/noise_var)`` in nats."""
    noise_var = float(noise_var)
    if not noise_var > 0:
        raise DomainError(f"noise variance must be positive, got {noise_var}")
    return 0.5 * math.log1p(1.0 / noise_var)
