"""Data ingestion and marginal preprocessing.

A :class:`DataMatrix` is an immutable ``N x d`` float64 array plus the column
statistics needed to undo centering.  Preprocessing is described by a
:class:`PreprocSpec` and applied with :func:`preprocess`.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .exceptions import (
    DegenerateColumnWarning,
    InputError,
    ParseError,
    ShapeError,
)

__all__ = [
    "DataMatrix",
    "PreprocSpec",
    "as_data_matrix",
    "center",
    "gaussianize_rank",
    "load_csv",
    "preprocess",
    "save_csv",
]

_GAUSSIANIZE = ("none", "rank")
_TIE_RULES = ("average", "first")


@dataclass(frozen=True)
class PreprocSpec:
    """How raw columns are transformed before the sieve sees them.

    Parameters
    ----------
    center : bool, default=True
        Subtract the column means.
    gaussianize : {'none', 'rank'}, default='none'
        Replace each column by normal scores of its ranks before centering.
    rank_tie_rule : {'average', 'first'}, default='average'
        How tied values are ranked when ``gaussianize='rank'``.
    """

    center: bool = True
    gaussianize: str = "none"
    rank_tie_rule: str = "average"

    def __post_init__(self):
        if self.gaussianize not in _GAUSSIANIZE:
            raise InputError(f"gaussianize must be one of {_GAUSSIANIZE}, got {self.gaussianize!r}")
        if self.rank_tie_rule not in _TIE_RULES:
            raise InputError(f"rank_tie_rule must be one of {_TIE_RULES}, got {self.rank_tie_rule!r}")

    def to_dict(self):
        return {
            "center": self.center,
            "gaussianize": self.gaussianize,
            "rank_tie_rule": self.rank_tie_rule,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            center=bool(d["center"]),
            gaussianize=str(d["gaussianize"]),
            rank_tie_rule=str(d["rank_tie_rule"]),
        )


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Samples in rows, variables in columns.

    ``column_means`` holds the offsets needed to recover the uncentered data:
    for raw data they are the column means, after :func:`center` they are the
    means that were subtracted.  ``n_original`` counts observed variables;
    columns past it are factor columns appended by sieve layers.
    """

    values: np.ndarray
    column_means: np.ndarray
    column_stds: np.ndarray
    n_original: int
    centered: bool = False
    _constant: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ShapeError(f"expected a 2-d array, got shape {values.shape}")
        n, d = values.shape
        if n < 2:
            raise ShapeError(f"need at least 2 samples, got {n}")
        if d < 1:
            raise ShapeError("need at least 1 column")
        if not np.all(np.isfinite(values)):
            raise InputError("data contains NaN or infinite values")
        if not 0 <= self.n_original <= d:
            raise ShapeError(f"n_original={self.n_original} outside [0, {d}]")
        means = np.array(self.column_means, dtype=np.float64, copy=True)
        stds = np.array(self.column_stds, dtype=np.float64, copy=True)
        if means.shape != (d,) or stds.shape != (d,):
            raise ShapeError("column statistics must have one entry per column")
        for arr in (values, means, stds):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "column_stds", stds)
        object.__setattr__(self, "_constant", np.ptp(values, axis=0) == 0)

    @classmethod
    def from_array(cls, values, n_original=None):
        """Wrap a raw array, computing column statistics."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ShapeError(f"expected a 2-d array, got shape {values.shape}")
        if values.shape[0] < 2:
            raise ShapeError(f"need at least 2 samples, got {values.shape[0]}")
        d = values.shape[1]
        return cls(
            values=values,
            column_means=values.mean(axis=0),
            column_stds=values.std(axis=0),
            n_original=d if n_original is None else n_original,
        )

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def n_columns(self):
        return self.values.shape[1]

    @property
    def constant_columns(self):
        """Indices of columns whose entries are all equal."""
        return np.flatnonzero(self._constant)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)


def as_data_matrix(data):
    """Return ``data`` as a :class:`DataMatrix` (no copy if it already is one)."""
    if isinstance(data, DataMatrix):
        return data
    return DataMatrix.from_array(data)


def load_csv(path, has_header=False):
    """Read a numeric CSV file into a :class:`DataMatrix`.

    Raises
    ------
    OSError
        The file is missing or unreadable.
    ParseError
        A cell is not a finite real number.
    ShapeError
        Rows have unequal lengths or there are fewer than two samples.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not record or all(not cell.strip() for cell in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ShapeError(
                    f"{path}: row {lineno} has {len(record)} columns, expected {width}"
                )
            parsed = []
            for col, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(lineno, col, cell, path) from None
                if not math.isfinite(value):
                    raise ParseError(lineno, col, cell, path)
                parsed.append(value)
            rows.append(parsed)
    if len(rows) < 2:
        raise ShapeError(f"{path}: need at least 2 data rows, got {len(rows)}")
    return DataMatrix.from_array(np.array(rows, dtype=np.float64))


def save_csv(path, values, header=None):
    """Write an array as CSV with 17 significant digits (exact round trip)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def center(data):
    """Subtract column means; the offsets are kept in ``column_means``.

    Centering an already centered matrix returns it unchanged.
    """
    data = as_data_matrix(data)
    if data.centered:
        return data
    means = data.values.mean(axis=0)
    return DataMatrix(
        values=data.values - means,
        column_means=means,
        column_stds=data.column_stds,
        n_original=data.n_original,
        centered=True,
    )


def _normal_scores(column, tie_rule):
    method = "average" if tie_rule == "average" else "ordinal"
    ranks = rankdata(column, method=method)
    return ndtri((ranks - 0.5) / column.shape[0])


def gaussianize_rank(data, spec=None):
    """Map each column to standard-normal scores of its ranks.

    Entry ``x`` with rank ``r`` among ``N`` values becomes
    ``Phi^-1((r - 0.5) / N)``.  Constant columns become all zeros under the
    ``'average'`` tie rule and trigger a :class:`DegenerateColumnWarning`.
    """
    data = as_data_matrix(data)
    spec = spec or PreprocSpec(gaussianize="rank")
    if spec.gaussianize != "rank":
        raise InputError("gaussianize_rank requires a spec with gaussianize='rank'")
    constant = data.constant_columns
    if constant.size:
        warnings.warn(
            f"constant column(s) {constant.tolist()} gaussianized to ties",
            DegenerateColumnWarning,
            stacklevel=2,
        )
    out = np.empty_like(data.values)
    for j in range(data.n_columns):
        out[:, j] = _normal_scores(data.values[:, j], spec.rank_tie_rule)
    return DataMatrix(
        values=out,
        column_means=out.mean(axis=0),
        column_stds=out.std(axis=0),
        n_original=data.n_original,
    )


def preprocess(data, spec, means=None):
    """Apply ``spec`` to ``data``.

    With ``means`` given (e.g. the offsets stored at fit time) centering
    subtracts those instead of the data's own means.
    """
    data = as_data_matrix(data)
    if spec.gaussianize == "rank":
        data = gaussianize_rank(data, spec)
    if not spec.center:
        return data
    if means is None:
        return center(data)
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (data.n_columns,):
        raise ShapeError(f"expected {data.n_columns} offsets, got shape {means.shape}")
    return DataMatrix(
        values=data.values - means,
        column_means=means,
        column_stds=data.column_stds,
        n_original=data.n_original,
        centered=True,
    )
