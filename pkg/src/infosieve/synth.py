"""Synthetic data from the latent-source model with AWGN children.

Each of ``m`` independent standard-normal sources has ``k`` children
``X_i = Z_pa(i) + eps_i``.  The capacities ``C_i = 1/2 log(1 + 1/var(eps_i))``
of a source's children are a uniform draw from the simplex scaled to the
total capacity ``C``.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .metrics import capacity_to_noise

__all__ = ["GenSpec", "SynthDataset", "generate", "random_rotation", "sample_simplex"]

_SPLITS = ("simplex", "equal")


@dataclass(frozen=True)
class GenSpec:
    """Parameters of the generative model.

    Parameters
    ----------
    m : int
        Number of sources.
    k : int
        Children per source.
    total_capacity : float
        Capacity budget ``C`` in nats, per source unless ``global_capacity``.
    N : int
        Number of samples.
    seed : int, default=0
    rotate : bool, default=False
        Mix the sources with a random orthonormal matrix before generating
        the children.
    global_capacity : bool, default=False
        Spread ``C`` over all ``m * k`` channels with one simplex draw.
    split : {'simplex', 'equal'}, default='simplex'
        ``'equal'`` gives every child the same share of the budget.
    """

    m: int
    k: int
    total_capacity: float
    N: int
    seed: int = 0
    rotate: bool = False
    global_capacity: bool = False
    split: str = "simplex"

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise InputError(f"need m >= 1 and k >= 1, got m={self.m}, k={self.k}")
        if not self.total_capacity > 0:
            raise InputError(f"total capacity must be positive, got {self.total_capacity}")
        if self.N < 2:
            raise InputError(f"need N >= 2, got {self.N}")
        if self.seed < 0:
            raise InputError(f"seed must be non-negative, got {self.seed}")
        if self.split not in _SPLITS:
            raise InputError(f"split must be one of {_SPLITS}, got {self.split!r}")

    def to_dict(self):
        return {
            "m": self.m,
            "k": self.k,
            "total_capacity": self.total_capacity,
            "N": self.N,
            "seed": self.seed,
            "rotate": self.rotate,
            "global_capacity": self.global_capacity,
            "split": self.split,
        }


@dataclass(frozen=True, eq=False)
class SynthDataset:
    """A generated dataset.

    ``Z`` holds the sources the children were generated from (after rotation
    when ``spec.rotate`` is set).  ``parent_map[i]`` is the source of
    child ``i``; children of source ``j`` occupy columns ``j*k .. j*k+k-1``.
    """

    X: np.ndarray
    Z: np.ndarray
    noise_vars: np.ndarray
    capacities: np.ndarray
    parent_map: np.ndarray
    spec: GenSpec
    rotation: np.ndarray = None

    def meta(self):
        """JSON-ready description used by the CLI sidecar."""
        return {
            "spec": self.spec.to_dict(),
            "noise_vars": self.noise_vars.tolist(),
            "capacities": self.capacities.tolist(),
            "parent_map": self.parent_map.tolist(),
            "rotation": None if self.rotation is None else self.rotation.tolist(),
        }


def sample_simplex(k, rng):
    """Uniform draw from the ``k``-simplex (normalized standard exponentials)."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    e = rng.standard_exponential(k)
    return e / e.sum()


def random_rotation(m, rng):
    """Haar-distributed orthonormal ``m x m`` matrix (QR with sign correction)."""
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def generate(spec):
    """Draw a dataset from ``spec``; identical specs give identical arrays.

    Random draws happen in a fixed order from one PCG64 stream seeded with
    ``spec.seed``: capacity shares, rotation, sources, channel noise.
    """
    rng = np.random.default_rng(spec.seed)
    m, k, n = spec.m, spec.k, spec.N
    d = m * k
    if spec.split == "equal":
        shares = np.full(d, 1.0 / (d if spec.global_capacity else k))
    elif spec.global_capacity:
        shares = sample_simplex(d, rng)
    else:
        shares = np.concatenate([sample_simplex(k, rng) for _ in range(m)])
    capacities = spec.total_capacity * shares
    noise_vars = np.array([capacity_to_noise(c) for c in capacities])

    rotation = random_rotation(m, rng) if spec.rotate else None
    Z = rng.standard_normal((n, m))
    if rotation is not None:
        Z = Z @ rotation.T
    parent_map = np.repeat(np.arange(m), k)
    X = Z[:, parent_map] + rng.standard_normal((n, d)) * np.sqrt(noise_vars)
    return SynthDataset(
        X=X,
        Z=Z,
        noise_vars=noise_vars,
        capacities=capacities,
        parent_map=parent_map,
        spec=spec,
        rotation=rotation,
    )
