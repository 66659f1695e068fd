"""One layer of the linear information sieve.

A layer learns weights ``w`` for a single factor ``y = w . x`` by iterating
the fixed-point rule

    w_i <- <X_i Y> / (<X_i^2> <Y^2> - <X_i Y>^2)

where ``Y = y + noise`` is the training channel with unit noise variance, so
``<Y^2> = <y^2> + 1``.  The layer then emits the remainder
``x_i - <X_i Y> / <Y^2> * Y`` with the factor column appended.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import DataMatrix, as_data_matrix
from .exceptions import (
    DegenerateColumn,
    DomainError,
    InputError,
    NoConvergenceWarning,
    NumericalBlowup,
    NumericalBlowupWarning,
    ShapeError,
)

__all__ = [
    "FitConfig",
    "LayerParams",
    "Moments",
    "fit_layer",
    "fixed_point_residual",
    "fixed_point_step",
    "init_weights",
    "invert_layer",
    "layer_noise_seed",
    "layer_objective",
    "remainder",
    "restart_seed",
    "sample_channel_noise",
    "update_weights",
]

MIN_DENOMINATOR = 1e-12
# Channel signal-to-noise ratio beyond which the weights are treated as diverged.
MAX_SNR = 1e12

_RESTART_STREAM = 0
_NOISE_STREAM = 1


@dataclass(frozen=True)
class FitConfig:
    """Optimization settings for one layer.

    Parameters
    ----------
    n_restarts : int, default=10
        Random initializations; the one with the highest objective wins.
    max_iterations : int, default=10000
        Cap on fixed-point updates per restart.
    tol : float, default=1e-8
        Convergence threshold on the change of the objective between
        successive iterations.
    seed : int, default=0
        Root seed; restart streams are derived from it.
    residual_tol : float, default=1e-6
        A restart only counts as converged once
        ``max|w - update(w)| <= residual_tol * max(1, max|w|)``.
    moments : {'auto', 'samples', 'gram'}, default='auto'
        ``'samples'`` recomputes ``y`` and its moments from the data matrix at
        every step.  ``'gram'`` evaluates the same moments through the
        ``d x d`` second-moment matrix, which is cheaper when ``d < N``.
    """

    n_restarts: int = 10
    max_iterations: int = 10000
    tol: float = 1e-8
    seed: int = 0
    residual_tol: float = 1e-6
    moments: str = "auto"

    def __post_init__(self):
        if self.n_restarts < 1:
            raise InputError(f"n_restarts must be >= 1, got {self.n_restarts}")
        if self.max_iterations < 0:
            raise InputError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if not self.tol > 0:
            raise InputError(f"tol must be positive, got {self.tol}")
        if not self.residual_tol > 0:
            raise InputError(f"residual_tol must be positive, got {self.residual_tol}")
        if self.seed < 0:
            raise InputError(f"seed must be non-negative, got {self.seed}")
        if self.moments not in ("auto", "samples", "gram"):
            raise InputError(f"moments must be 'auto', 'samples' or 'gram', got {self.moments!r}")


class Moments(NamedTuple):
    """Second moments of one layer: ``<X_i Y>``, ``<X_i^2>`` and ``<Y^2>``."""

    xy: np.ndarray
    xx: np.ndarray
    yy: float


def _array_field():
    return field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True, eq=False)
class LayerParams:
    """A fitted sieve layer.

    ``moment_yy`` is the second moment of the training channel,
    ``signal_power + eta**2``.  ``signal_power`` is ``<(w . x)^2>``.
    With ``channel_noise=True`` the appended factor column is a realization
    of the channel, otherwise it is the deterministic projection ``w . x``.
    """

    w: np.ndarray
    moment_xy: np.ndarray
    moment_xx: np.ndarray
    moment_yy: float
    signal_power: float
    tc_contribution: float
    iterations: int
    converged: bool
    eta: float = 1.0
    channel_noise: bool = True
    rho: np.ndarray = _array_field()
    initial_objective: float = math.nan
    restart_objectives: tuple = ()

    def __post_init__(self):
        for name in ("w", "moment_xy", "moment_xx"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        d = self.w.shape[0]
        if self.moment_xy.shape != (d,) or self.moment_xx.shape != (d,):
            raise ShapeError("layer moments must match the weight vector length")
        rho = self.moment_xy / np.sqrt(self.moment_xx * self.moment_yy)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "restart_objectives", tuple(float(v) for v in self.restart_objectives))

    @property
    def n_inputs(self):
        return self.w.shape[0]

    @property
    def coef(self):
        """Per-column coefficient of the factor column in the remainder."""
        denom = self.moment_yy if self.channel_noise else self.signal_power
        if denom == 0:
            return np.zeros_like(self.moment_xy)
        return self.moment_xy / denom

    def to_dict(self):
        return {
            "w": self.w.tolist(),
            "moment_xy": self.moment_xy.tolist(),
            "moment_xx": self.moment_xx.tolist(),
            "moment_yy": float(self.moment_yy),
            "signal_power": float(self.signal_power),
            "tc_contribution": float(self.tc_contribution),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "eta": float(self.eta),
            "channel_noise": bool(self.channel_noise),
            "initial_objective": float(self.initial_objective),
            "restart_objectives": list(self.restart_objectives),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            w=np.asarray(d["w"], dtype=np.float64),
            moment_xy=np.asarray(d["moment_xy"], dtype=np.float64),
            moment_xx=np.asarray(d["moment_xx"], dtype=np.float64),
            moment_yy=float(d["moment_yy"]),
            signal_power=float(d["signal_power"]),
            tc_contribution=float(d["tc_contribution"]),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d["converged"]),
            eta=float(d.get("eta", 1.0)),
            channel_noise=bool(d.get("channel_noise", True)),
            initial_objective=float(d.get("initial_objective", math.nan)),
            restart_objectives=tuple(d.get("restart_objectives", ())),
        )


def restart_seed(seed, layer_index, restart):
    """Seed of the initialization stream for one restart of one layer."""
    return np.random.SeedSequence([seed, _RESTART_STREAM, layer_index, restart])


def layer_noise_seed(seed, layer_index):
    """Seed of the channel-noise stream of one layer."""
    return np.random.SeedSequence([seed, _NOISE_STREAM, layer_index])


def _column_stds(values):
    stds = values.std(axis=0)
    zero = np.flatnonzero(stds == 0)
    if zero.size:
        raise DegenerateColumn(zero, f"constant column(s) {zero.tolist()}: drop or perturb them first")
    return stds


def init_weights(data, rng_seed):
    """Draw initial weights ``w_i ~ N(0, (1 / (sqrt(d) sigma_i))^2)``.

    ``rng_seed`` is anything :func:`numpy.random.default_rng` accepts; the
    same seed always gives the same weights.
    """
    values = as_data_matrix(data).values
    stds = _column_stds(values)
    d = values.shape[1]
    rng = np.random.default_rng(rng_seed)
    return rng.standard_normal(d) / (math.sqrt(d) * stds)


def _denominator(xx, xy, signal, eta):
    # xx*<Y^2> - xy^2 split so that the Cauchy-Schwarz part cannot go negative
    # through rounding; eta^2 * xx keeps it away from zero.
    return np.maximum(xx * signal - xy * xy, 0.0) + xx * (eta * eta)


def update_weights(moments):
    """Fixed-point update of the weights from layer moments.

    Denominators below 1e-12 are clamped to 1e-12 with a
    :class:`NumericalBlowupWarning`.
    """
    xy = np.asarray(moments.xy, dtype=np.float64)
    xx = np.asarray(moments.xx, dtype=np.float64)
    yy = float(moments.yy)
    den = xx * yy - xy * xy
    small = den < MIN_DENOMINATOR
    if np.any(small):
        warnings.warn(
            f"denominator clamped to {MIN_DENOMINATOR:g} for column(s) {np.flatnonzero(small).tolist()}",
            NumericalBlowupWarning,
            stacklevel=2,
        )
        den = np.where(small, MIN_DENOMINATOR, den)
    return xy / den


def _sample_moments(values, w, eta):
    n = values.shape[0]
    y = values @ w
    signal = float(y @ y) / n
    xy = values.T @ y / n
    xx = np.einsum("ij,ij->j", values, values) / n
    return Moments(xy=xy, xx=xx, yy=signal + eta * eta), signal


def fixed_point_step(data, w, eta=1.0):
    """One fixed-point iteration.

    Computes ``y = X w``, the moments ``<X_i Y>``, ``<X_i^2>`` and
    ``<Y^2> = <y^2> + eta^2`` with a ``1/N`` normalization, and the updated
    weights.

    Returns
    -------
    w_new : ndarray of shape (d,)
    moments : Moments

    Raises
    ------
    NumericalBlowup
        ``y`` is identically zero, so the step carries no information.
    """
    values = as_data_matrix(data).values
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (values.shape[1],):
        raise ShapeError(f"weights of shape {w.shape} do not match {values.shape[1]} columns")
    if not np.all(np.isfinite(w)):
        raise NumericalBlowup("weights are not finite")
    moments, signal = _sample_moments(values, w, eta)
    if signal == 0.0:
        raise NumericalBlowup("projection y = w . x is identically zero")
    return update_weights(moments), moments


def layer_objective(moments, eta=1.0):
    """Dependence explained by the factor: ``sum_i I(X_i; Y) - I(X; Y)`` in nats.

    Equals ``sum_i -1/2 log(1 - rho_i^2) - 1/2 log(<Y^2> / eta^2)``.

    Raises
    ------
    DomainError
        Some ``|rho_i| >= 1`` or ``<Y^2>`` is below the channel noise floor.
    """
    xy = np.asarray(moments.xy, dtype=np.float64)
    xx = np.asarray(moments.xx, dtype=np.float64)
    yy = float(moments.yy)
    if yy < eta * eta * (1 - 1e-9):
        raise DomainError(f"<Y^2> = {yy} is below the channel noise variance {eta * eta}")
    rho2 = xy * xy / (xx * yy)
    if np.any(~(rho2 < 1.0)):
        raise DomainError("correlation coefficient with |rho| >= 1")
    return float(np.sum(-0.5 * np.log1p(-rho2)) - 0.5 * math.log(yy / (eta * eta)))


def _stable_objective(xx, xy, signal, eta):
    # xx has shape (d,), xy shape (d, R) and signal shape (R,) for R restarts.
    den = _denominator(xx[:, None], xy, signal, eta)
    yy = signal + eta * eta
    return np.sum(-0.5 * np.log(den / (xx[:, None] * yy)), axis=0) - 0.5 * np.log(yy / (eta * eta))


def fixed_point_residual(params):
    """``max_i |w_i - <X_i Y> / (<X_i^2><Y^2> - <X_i Y>^2)|`` for a fitted layer."""
    target = params.moment_xy / (params.moment_xx * params.moment_yy - params.moment_xy**2)
    return float(np.max(np.abs(params.w - target)))


class _RestartRun(NamedTuple):
    w: np.ndarray
    objectives: np.ndarray
    initial: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    diverged: np.ndarray
    history: list


def _iterate(values, w0, cfg, eta=1.0, track=False, stop_on_objective_only=False):
    """Run the fixed-point iteration for a batch of restarts (columns of ``w0``)."""
    n, d = values.shape
    mode = cfg.moments
    if mode == "auto":
        mode = "gram" if d < n else "samples"
    if mode == "gram":
        gram = values.T @ values / n
        xx = np.diag(gram).copy()
    else:
        xx = np.einsum("ij,ij->j", values, values) / n

    W = np.array(w0, dtype=np.float64, copy=True)
    n_runs = W.shape[1]
    active = np.ones(n_runs, dtype=bool)
    converged = np.zeros(n_runs, dtype=bool)
    diverged = np.zeros(n_runs, dtype=bool)
    objectives = np.full(n_runs, np.nan)
    initial = np.full(n_runs, np.nan)
    iterations = np.zeros(n_runs, dtype=int)
    previous = np.full(n_runs, np.nan)
    history = []

    for t in range(cfg.max_iterations + 1):
        if mode == "gram":
            XY = gram @ W
        else:
            XY = values.T @ (values @ W) / n
        signal = np.einsum("ij,ij->j", W, XY)
        obj = _stable_objective(xx, XY, signal, eta)
        den = _denominator(xx[:, None], XY, signal, eta)
        W_new = XY / np.maximum(den, MIN_DENOMINATOR)
        scale = np.maximum(1.0, np.max(np.abs(W), axis=0))
        resid = np.max(np.abs(W - W_new), axis=0) / scale

        if t == 0:
            initial[:] = obj
        objectives[active] = obj[active]
        iterations[active] = t
        if track:
            history.append(obj.copy())

        blown = active & ~(np.isfinite(obj) & (signal <= MAX_SNR * eta * eta))
        if t > 0:
            done = np.abs(obj - previous) < cfg.tol
            if not stop_on_objective_only:
                done &= resid <= cfg.residual_tol
            done &= active & ~blown
            converged |= done
            active &= ~done
        diverged |= blown
        active &= ~blown
        if not active.any() or t == cfg.max_iterations:
            break
        previous = obj
        W = np.where(active, W_new, W)

    return _RestartRun(W, objectives, initial, iterations, converged, diverged, history)


def fit_layer(data, cfg=None, layer_index=0, channel_noise=True, eta=1.0):
    """Fit one sieve layer by fixed-point iteration with random restarts.

    Parameters
    ----------
    data : DataMatrix or array of shape (N, d)
        Centered layer input.
    cfg : FitConfig, optional
    layer_index : int, default=0
        Position of the layer in a stack; selects independent seed streams.
    channel_noise : bool, default=True
        Recorded on the returned parameters; decides how the remainder is
        formed (see :func:`remainder`).

    Returns
    -------
    LayerParams
        The restart with the highest objective (lowest index on ties).
        ``converged`` tells whether that restart met both the objective and
        the fixed-point residual criteria.
    """
    cfg = cfg or FitConfig()
    values = as_data_matrix(data).values
    w0 = np.column_stack(
        [init_weights(values, restart_seed(cfg.seed, layer_index, r)) for r in range(cfg.n_restarts)]
    )
    run = _iterate(values, w0, cfg, eta)
    objectives = np.where(np.isnan(run.objectives), -np.inf, run.objectives)
    best = int(np.argmax(objectives))
    w = run.w[:, best]

    moments, signal = _sample_moments(values, w, eta)
    tc = float(_stable_objective(moments.xx, moments.xy[:, None], np.array([signal]), eta)[0])
    converged = bool(run.converged[best])
    if converged:
        resid = np.max(np.abs(w - update_weights(moments)))
        converged = bool(resid <= cfg.residual_tol * max(1.0, np.max(np.abs(w))))

    if run.diverged[best]:
        warnings.warn(
            f"layer {layer_index}: weights diverged (a variable is nearly a deterministic "
            "function of the factor); keeping the last finite iterate",
            NumericalBlowupWarning,
            stacklevel=2,
        )
    if not run.converged.any():
        warnings.warn(
            f"layer {layer_index}: no restart converged within {cfg.max_iterations} iterations",
            NoConvergenceWarning,
            stacklevel=2,
        )
    return LayerParams(
        w=w,
        moment_xy=moments.xy,
        moment_xx=moments.xx,
        moment_yy=moments.yy,
        signal_power=signal,
        tc_contribution=tc,
        iterations=int(run.iterations[best]),
        converged=converged,
        eta=eta,
        channel_noise=channel_noise,
        initial_objective=float(run.initial[best]),
        restart_objectives=tuple(objectives),
    )


def sample_channel_noise(data, seed, eta=1.0):
    """Draw one realization of the training-channel noise for ``data``.

    The draw is centered, made orthogonal to every column of ``data`` (when
    there are enough samples) and scaled to mean square ``eta**2``, so the
    sample moments of ``Y = w . x + noise`` match the channel moments exactly.
    """
    values = as_data_matrix(data).values
    n, d = values.shape
    noise = np.random.default_rng(seed).standard_normal(n)
    noise -= noise.mean()
    if n > d + 1:
        basis = values - values.mean(axis=0)
        coef, *_ = np.linalg.lstsq(basis, noise, rcond=None)
        noise -= basis @ coef
    power = math.sqrt(float(noise @ noise) / n)
    if power == 0.0:
        raise NumericalBlowup("channel noise vanished after projection")
    return noise * (eta / power)


def remainder(data, params, noise=None):
    """Remainder information of a layer, with the factor column appended.

    Each column becomes ``x_i - coef_i * Y``.  With ``params.channel_noise``
    the factor column is ``Y = w . x + noise`` and ``noise`` must be supplied
    (see :func:`sample_channel_noise`); otherwise ``Y = w . x``.
    """
    dm = as_data_matrix(data)
    values = dm.values
    if values.shape[1] != params.n_inputs:
        raise ShapeError(f"layer expects {params.n_inputs} columns, got {values.shape[1]}")
    y = values @ params.w
    if params.channel_noise:
        if noise is None:
            raise InputError("this layer uses channel noise; pass noise=sample_channel_noise(...)")
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != y.shape:
            raise ShapeError(f"noise must have shape {y.shape}, got {noise.shape}")
        y = y + noise
    out = np.column_stack([values - np.outer(y, params.coef), y])
    return _layer_output(out, dm.n_original, dm.centered)


def invert_layer(remainder_data, params):
    """Undo :func:`remainder`: ``x_i = xbar_i + coef_i * Y``; drops the factor column."""
    dm = as_data_matrix(remainder_data)
    values = dm.values
    if values.shape[1] != params.n_inputs + 1:
        raise ShapeError(
            f"layer inverse expects {params.n_inputs + 1} columns, got {values.shape[1]}"
        )
    y = values[:, -1]
    out = values[:, :-1] + np.outer(y, params.coef)
    return _layer_output(out, min(dm.n_original, params.n_inputs), dm.centered)


def _layer_output(values, n_original, centered):
    return DataMatrix(
        values=values,
        column_means=np.zeros(values.shape[1]) if centered else values.mean(axis=0),
        column_stds=values.std(axis=0),
        n_original=n_original,
        centered=centered,
    )
