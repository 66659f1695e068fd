"""Stacked sieve: fit, transform, inverse, reconstruction and serialization.

Layer ``k`` (0-based) sees ``n_original + k`` columns: the remainder of the
observed variables followed by the factor columns of earlier layers.
"""
import json
from dataclasses import dataclass

import numpy as np

from .data import DataMatrix, PreprocSpec, as_data_matrix, preprocess
from .exceptions import InputError, SchemaError, ShapeError
from .layer import (
    FitConfig,
    LayerParams,
    fit_layer,
    invert_layer,
    layer_noise_seed,
    remainder,
    sample_channel_noise,
)

__all__ = [
    "SCHEMA_VERSION",
    "SieveModel",
    "StopRule",
    "factor_map",
    "fit_sieve",
    "inverse",
    "load_model",
    "reconstruct",
    "save_model",
    "transform",
]

SCHEMA_VERSION = 1
SUPPORTED_VERSIONS = (1,)


@dataclass(frozen=True)
class StopRule:
    """When to stop adding layers.

    Stacking ends after ``max_layers`` layers or after the first layer whose
    contribution falls below ``min_tc`` nats (that layer is kept).
    """

    max_layers: int = 10
    min_tc: float = 1e-3

    def __post_init__(self):
        if self.max_layers < 1:
            raise InputError(f"max_layers must be >= 1, got {self.max_layers}")
        if not self.min_tc >= 0:
            raise InputError(f"min_tc must be >= 0, got {self.min_tc}")


@dataclass(frozen=True, eq=False)
class SieveModel:
    """A fitted stack of sieve layers.

    Attributes
    ----------
    preproc : PreprocSpec
    layers : tuple of LayerParams
    n_original : int
        Number of observed variables.
    column_means : ndarray or None
        Offsets removed by centering at fit time (``None`` without centering).
    seed : int
        Root seed; channel-noise draws of the remainder derive from it.
    """

    preproc: PreprocSpec
    layers: tuple
    n_original: int
    column_means: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        layers = tuple(self.layers)
        for k, layer in enumerate(layers):
            if layer.n_inputs != self.n_original + k:
                raise ShapeError(
                    f"layer {k} has {layer.n_inputs} inputs, expected {self.n_original + k}"
                )
        object.__setattr__(self, "layers", layers)
        if self.column_means is not None:
            means = np.array(self.column_means, dtype=np.float64, copy=True)
            if means.shape != (self.n_original,):
                raise ShapeError("column_means must have one entry per observed variable")
            means.setflags(write=False)
            object.__setattr__(self, "column_means", means)

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def tc_ledger(self):
        """Per-layer TC contributions in nats."""
        return [layer.tc_contribution for layer in self.layers]

    @property
    def total_tc(self):
        return float(sum(self.tc_ledger))

    def to_dict(self):
        return {
            "version": SCHEMA_VERSION,
            "preproc": self.preproc.to_dict(),
            "n_original": self.n_original,
            "column_means": None if self.column_means is None else self.column_means.tolist(),
            "seed": self.seed,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "version" not in d:
            raise SchemaError("model file has no version field")
        if d["version"] not in SUPPORTED_VERSIONS:
            raise SchemaError(
                f"unsupported model version {d['version']!r}; supported versions: {list(SUPPORTED_VERSIONS)}"
            )
        try:
            return cls(
                preproc=PreprocSpec.from_dict(d["preproc"]),
                layers=tuple(LayerParams.from_dict(layer) for layer in d["layers"]),
                n_original=int(d["n_original"]),
                column_means=d.get("column_means"),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed model file: {exc}") from exc


def _layer_noise(values, model_seed, layer_index, params):
    if not params.channel_noise:
        return None
    return sample_channel_noise(values, layer_noise_seed(model_seed, layer_index), params.eta)


def fit_sieve(data, cfg=None, stop=None, preproc=None, channel_noise=True):
    """Fit a sieve by stacking layers on successive remainders.

    Parameters
    ----------
    data : DataMatrix or array of shape (N, n)
        Raw observations; ``preproc`` is applied first.
    cfg : FitConfig, optional
    stop : StopRule, optional
    preproc : PreprocSpec, optional
        Defaults to centering only.
    channel_noise : bool, default=True
        Form remainders from a realization of the unit-variance training
        channel (see :func:`infosieve.layer.remainder`).  ``False`` uses the
        deterministic factor ``w . x``, whose remainder is exactly rank
        deficient.

    Returns
    -------
    SieveModel
    """
    cfg = cfg or FitConfig()
    stop = stop or StopRule()
    preproc = preproc or PreprocSpec()
    raw = as_data_matrix(data)
    prepared = preprocess(raw, preproc)
    current = prepared
    n_original = raw.n_columns
    layers = []
    for k in range(stop.max_layers):
        params = fit_layer(current, cfg, layer_index=k, channel_noise=channel_noise)
        layers.append(params)
        if k + 1 < stop.max_layers and params.tc_contribution >= stop.min_tc:
            noise = _layer_noise(current, cfg.seed, k, params)
            current = remainder(current, params, noise)
        else:
            break
    return SieveModel(
        preproc=preproc,
        layers=tuple(layers),
        n_original=n_original,
        column_means=prepared.column_means if preproc.center else None,
        seed=cfg.seed,
    )


def _prepared_values(model, data):
    if isinstance(data, DataMatrix):
        data = data.values
    values = np.asarray(data, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != model.n_original:
        raise ShapeError(f"model expects {model.n_original} columns, got shape {values.shape}")
    if model.preproc.gaussianize != "none":
        return preprocess(values, model.preproc, means=model.column_means).values
    if not np.all(np.isfinite(values)):
        raise InputError("data contains NaN or infinite values")
    if model.column_means is None:
        return values
    return values - model.column_means


def _deterministic_chain(model, values):
    factors = np.empty((values.shape[0], model.n_layers))
    for k, params in enumerate(model.layers):
        y = values @ params.w
        factors[:, k] = y
        values = np.column_stack([values - np.outer(y, params.coef), y])
    return factors, values


def factor_map(model, data):
    """The learned factors ``y_k = w_k . x^(k-1)`` with the channel noise set to zero.

    Works row by row, so any number of samples (including one) is accepted
    unless rank Gaussianization is part of the preprocessing.
    """
    return _deterministic_chain(model, _prepared_values(model, data))[0]


def transform(model, data, channel_noise=True):
    """Apply the fitted layers to new data.

    Parameters
    ----------
    channel_noise : bool, default=True
        Form the remainder of layers fitted with channel noise from a
        regenerated channel realization (as during fitting).  ``False`` uses
        the deterministic factors throughout.

    Returns
    -------
    factors : ndarray of shape (N, r)
        The deterministic factor map, see :func:`factor_map`.
    remainder : DataMatrix of shape (N, n + r)
        Final remainder: the observed-variable remainder followed by the
        transformed factor columns.  On the training data it is bitwise
        equal to the remainder produced while fitting.
    """
    values = _prepared_values(model, data)
    factors, det_remainder = _deterministic_chain(model, values)
    if not channel_noise or not any(p.channel_noise for p in model.layers):
        return factors, _wrap(det_remainder, model.n_original)
    current = _wrap(values, model.n_original)
    for k, params in enumerate(model.layers):
        current = remainder(current, params, _layer_noise(current, model.seed, k, params))
    return factors, current


def _wrap(values, n_original):
    return DataMatrix(
        values=values,
        column_means=np.zeros(values.shape[1]),
        column_stds=values.std(axis=0),
        n_original=n_original,
        centered=True,
    )


def _factor_remainder(model, factors):
    """Factor part of the final remainder when no channel noise is present."""
    r = model.n_layers
    factors = np.asarray(factors, dtype=np.float64)
    out = factors.copy()
    n = model.n_original
    for j in range(1, r):
        coef = model.layers[j].coef
        for k in range(j):
            out[:, k] -= coef[n + k] * factors[:, j]
    return out


def inverse(model, factors, remainder_data, uncenter=True):
    """Map a final remainder back to the (preprocessed) input space.

    Parameters
    ----------
    factors : array of shape (N, r)
    remainder_data : DataMatrix or array of shape (N, n + r) or (N, n)
        With ``n + r`` columns (as returned by :func:`transform`) the inverse
        is exact and ``factors`` is only checked for shape.  With ``n``
        columns the factor part of the remainder is rebuilt from ``factors``
        assuming zero channel noise.
    uncenter : bool, default=True
        Add back the offsets removed by centering.

    Returns
    -------
    DataMatrix of shape (N, n)
        Rank Gaussianization, if used, is not undone.
    """
    r, n = model.n_layers, model.n_original
    factors = np.asarray(factors, dtype=np.float64)
    if factors.ndim == 1 and r == 1:
        factors = factors[:, None]
    if isinstance(remainder_data, DataMatrix):
        remainder_data = remainder_data.values
    rem = np.asarray(remainder_data, dtype=np.float64)
    if rem.ndim != 2:
        raise ShapeError(f"remainder must be 2-d, got shape {rem.shape}")
    if factors.shape != (rem.shape[0], r):
        raise ShapeError(f"factors must have shape ({rem.shape[0]}, {r}), got {factors.shape}")
    if rem.shape[1] == n and r > 0:
        rem = np.column_stack([rem, _factor_remainder(model, factors)])
    elif rem.shape[1] != n + r:
        raise ShapeError(f"remainder must have {n} or {n + r} columns, got {rem.shape[1]}")

    current = _wrap(rem, n)
    for params in reversed(model.layers):
        current = invert_layer(current, params)
    values = current.values
    if uncenter and model.column_means is not None:
        values = values + model.column_means
        return DataMatrix(values, model.column_means, values.std(axis=0), n, centered=False)
    return current


def reconstruct(model, factors, uncenter=True):
    """Rebuild the data from factors alone by zeroing the observed-variable remainder."""
    if model.n_layers < 1:
        raise InputError("reconstruction needs a model with at least one layer")
    factors = np.asarray(factors, dtype=np.float64)
    if factors.ndim == 1:
        factors = factors[:, None]
    zeros = np.zeros((factors.shape[0], model.n_original))
    return inverse(model, factors, zeros, uncenter=uncenter)


def save_model(model, path):
    """Write ``model`` as JSON (floats in shortest round-trip form)."""
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Read a model written by :func:`save_model`.

    Raises
    ------
    OSError
        The file cannot be read.
    SchemaError
        The file is truncated, malformed or has an unsupported version.
    """
    with open(path) as fh:
        text = fh.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a valid model file ({exc})") from exc
    return SieveModel.from_dict(payload)
