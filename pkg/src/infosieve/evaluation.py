"""Scoring against true sources, a PCA baseline, convergence traces and benchmarks."""
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import as_data_matrix
from .exceptions import DegenerateColumn, DegenerateColumnWarning, InputError, ShapeError
from .layer import FitConfig, _iterate, init_weights, restart_seed
from .model import StopRule, fit_sieve, transform
from .synth import GenSpec, generate

__all__ = [
    "PRESETS",
    "BenchmarkRow",
    "ScoreReport",
    "TracePoint",
    "abs_corr_matrix",
    "benchmark_point",
    "iterations_to_tol",
    "log_linear_fit",
    "match_scores",
    "pca_components",
    "pca_scores",
    "run_benchmark",
    "save_benchmark",
    "save_trace",
    "score_recovery",
    "trace_convergence",
]


@dataclass(frozen=True, eq=False)
class ScoreReport:
    """Best-match absolute correlations between sources and components.

    ``assignment[j]`` is the component matched to source ``j``.
    """

    per_source_best: np.ndarray
    mean_score: float
    assignment: np.ndarray
    corr: np.ndarray

    def to_dict(self):
        return {
            "per_source_best": self.per_source_best.tolist(),
            "mean_score": self.mean_score,
            "assignment": self.assignment.tolist(),
            "corr": self.corr.tolist(),
        }


def abs_corr_matrix(factors, sources):
    """``|corr(source_j, factor_c)|`` as an ``m x r`` matrix.

    Constant factors get correlation 0 and a :class:`DegenerateColumnWarning`;
    constant sources raise :class:`DegenerateColumn`.
    """
    F = np.asarray(factors, dtype=np.float64)
    S = np.asarray(sources, dtype=np.float64)
    F = F[:, None] if F.ndim == 1 else F
    S = S[:, None] if S.ndim == 1 else S
    if F.shape[0] != S.shape[0]:
        raise ShapeError(f"factors have {F.shape[0]} rows, sources {S.shape[0]}")
    F = F - F.mean(axis=0)
    S = S - S.mean(axis=0)
    f_norm = np.sqrt(np.sum(F * F, axis=0))
    s_norm = np.sqrt(np.sum(S * S, axis=0))
    if np.any(s_norm == 0):
        raise DegenerateColumn(np.flatnonzero(s_norm == 0), "constant source column")
    dead = f_norm == 0
    if np.any(dead):
        warnings.warn(
            f"constant factor column(s) {np.flatnonzero(dead).tolist()} scored as 0",
            DegenerateColumnWarning,
            stacklevel=2,
        )
        f_norm = np.where(dead, 1.0, f_norm)
    corr = np.abs(S.T @ F) / np.outer(s_norm, f_norm)
    return np.minimum(corr, 1.0)


def match_scores(corr, allow_reuse=False):
    """Score an ``m x r`` matrix of absolute correlations.

    By default each component is matched to at most one source so that the
    total is maximal; ``allow_reuse`` takes each source's best component.
    """
    corr = np.asarray(corr, dtype=np.float64)
    m, r = corr.shape
    if allow_reuse:
        assignment = np.argmax(corr, axis=1)
    else:
        if r < m:
            raise ShapeError(f"need at least as many components as sources ({r} < {m})")
        rows, cols = linear_sum_assignment(corr, maximize=True)
        assignment = cols[np.argsort(rows)]
    best = corr[np.arange(m), assignment]
    return ScoreReport(
        per_source_best=best,
        mean_score=float(best.mean()),
        assignment=assignment,
        corr=corr,
    )


def score_recovery(factors, sources, allow_reuse=False):
    """Mean best-match ``|Pearson|`` between recovered factors and true sources."""
    return match_scores(abs_corr_matrix(factors, sources), allow_reuse=allow_reuse)


def pca_components(data, r):
    """Top ``r`` principal directions as an ``r x d`` matrix.

    Rows are unit eigenvectors of the ``1/N`` covariance in decreasing
    eigenvalue order, each signed so its largest-magnitude entry is positive.
    """
    values = as_data_matrix(data).values
    d = values.shape[1]
    if not 1 <= r <= d:
        raise InputError(f"need 1 <= r <= {d}, got {r}")
    centered = values - values.mean(axis=0)
    cov = centered.T @ centered / values.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    comps = eigvecs[:, np.argsort(eigvals)[::-1][:r]].T
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(r), pivot])
    return comps * signs[:, None]


def pca_scores(data, r):
    """Projections of the centered data onto the top ``r`` principal directions."""
    values = as_data_matrix(data).values
    return (values - values.mean(axis=0)) @ pca_components(values, r).T


class TracePoint(NamedTuple):
    iteration: int
    objective: float
    error: float


def trace_convergence(data, cfg=None, restart=0, final_tol=1e-14, max_iterations=100000):
    """Objective per fixed-point iteration for one restart of the first layer.

    The run stops once successive objectives differ by less than
    ``final_tol`` (or after ``max_iterations``); its last objective is the
    reference for ``error_t = |obj_t - obj_final|``.
    """
    cfg = cfg or FitConfig()
    dm = as_data_matrix(data)
    values = dm.values if dm.centered else dm.values - dm.values.mean(axis=0)
    w0 = init_weights(values, restart_seed(cfg.seed, 0, restart))[:, None]
    run_cfg = FitConfig(
        n_restarts=1,
        max_iterations=max_iterations,
        tol=final_tol,
        seed=cfg.seed,
        moments=cfg.moments,
    )
    run = _iterate(values, w0, run_cfg, track=True, stop_on_objective_only=True)
    objectives = np.array([h[0] for h in run.history])
    final = objectives[-1]
    return [TracePoint(t, float(o), float(abs(o - final))) for t, o in enumerate(objectives)]


def iterations_to_tol(trace, tol=1e-8):
    """First iteration whose objective changed by less than ``tol`` from the previous one.

    Returns ``None`` if that never happens within the trace.
    """
    for prev, cur in zip(trace, trace[1:]):
        if abs(cur.objective - prev.objective) < tol:
            return cur.iteration
    return None


def log_linear_fit(trace, floor=1e-12):
    """Least-squares line through ``log(error)`` against iteration.

    Only points with ``error > floor`` before the final point are used.

    Returns
    -------
    slope : float
    r_squared : float
    n_points : int
    """
    pts = [(p.iteration, math.log(p.error)) for p in trace[:-1] if p.error > floor]
    if len(pts) < 3:
        return math.nan, math.nan, len(pts)
    t, e = np.array(pts).T
    slope, intercept = np.polyfit(t, e, 1)
    resid = e - (slope * t + intercept)
    total = np.sum((e - e.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / total if total > 0 else 1.0
    return float(slope), float(r2), len(pts)


def save_trace(path, trace):
    """Write a trace as CSV with header ``iteration,objective,error``."""
    with open(path, "w") as fh:
        fh.write("iteration,objective,error\n")
        for p in trace:
            fh.write(f"{p.iteration},{p.objective:.17g},{p.error:.17g}\n")


PRESETS = {
    "single-source": {"m": 1, "C": 4.0, "N": 500, "ks": (2, 5, 10, 20, 50)},
    "bss": {"m": 10, "C": 12.0, "N": 10000, "ks": (2, 3, 5)},
}


class BenchmarkRow(NamedTuple):
    k: int
    method: str
    mean: float
    std: float
    n_seeds: int


def benchmark_point(preset, k, seed, cfg=None):
    """Sieve and PCA scores on one generated dataset.

    The dataset and the sieve both use ``seed``; the sieve learns ``m``
    layers regardless of their contributions.
    """
    p = PRESETS[preset]
    m = p["m"]
    data = generate(GenSpec(m=m, k=k, total_capacity=p["C"], N=p["N"], seed=seed))
    base = cfg or FitConfig()
    cfg = FitConfig(
        n_restarts=base.n_restarts,
        max_iterations=base.max_iterations,
        tol=base.tol,
        seed=seed,
        residual_tol=base.residual_tol,
        moments=base.moments,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit_sieve(data.X, cfg, StopRule(max_layers=m, min_tc=0.0))
    factors, _ = transform(model, data.X)
    sieve = score_recovery(factors, data.Z).mean_score
    pca = score_recovery(pca_scores(data.X, m), data.Z).mean_score
    return sieve, pca


def run_benchmark(preset, seeds=10, ks=None, cfg=None, progress=None):
    """Mean and standard deviation of sieve and PCA scores over seeds ``0..seeds-1``.

    ``progress``, if given, is called with ``(k, seed, sieve, pca)`` after
    every dataset.
    """
    if preset not in PRESETS:
        raise InputError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    if seeds < 1:
        raise InputError(f"seeds must be >= 1, got {seeds}")
    rows = []
    for k in ks or PRESETS[preset]["ks"]:
        scores = []
        for s in range(seeds):
            pair = benchmark_point(preset, k, s, cfg)
            scores.append(pair)
            if progress is not None:
                progress(k, s, *pair)
        scores = np.array(scores)
        for j, method in enumerate(("sieve", "pca")):
            rows.append(BenchmarkRow(k, method, float(scores[:, j].mean()), float(scores[:, j].std()), seeds))
    return rows


def save_benchmark(path, rows):
    with open(path, "w") as fh:
        fh.write("k,method,mean,std,n_seeds\n")
        for row in rows:
            fh.write(f"{row.k},{row.method},{row.mean:.17g},{row.std:.17g},{row.n_seeds}\n")
