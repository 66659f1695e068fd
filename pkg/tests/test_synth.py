import math

import numpy as np
import pytest

from infosieve.exceptions import InputError
from infosieve.synth import GenSpec, generate, random_rotation, sample_simplex


def test_spec_validation():
    for bad in (dict(m=0), dict(k=0), dict(total_capacity=0.0), dict(N=1), dict(split="dirichlet")):
        with pytest.raises(InputError):
            GenSpec(**{"m": 1, "k": 2, "total_capacity": 1.0, "N": 10, **bad})


def test_simplex_single():
    assert sample_simplex(1, np.random.default_rng(0)).tolist() == [1.0]


def test_simplex_mean():
    rng = np.random.default_rng(1)
    draws = np.array([sample_simplex(3, rng) for _ in range(100000)])
    np.testing.assert_allclose(draws.mean(axis=0), 1 / 3, atol=0.01)


def test_simplex_membership():
    rng = np.random.default_rng(2)
    for k in (1, 2, 5, 50):
        w = sample_simplex(k, rng)
        assert w.min() >= 0
        assert abs(w.sum() - 1.0) <= 1e-12
    with pytest.raises(InputError):
        sample_simplex(0, rng)


def test_equal_split_correlation():
    ds = generate(GenSpec(m=1, k=2, total_capacity=math.log(2.0), N=10000, seed=3, split="equal"))
    np.testing.assert_allclose(ds.noise_vars, 1.0, rtol=1e-12)
    for i in range(2):
        corr = np.corrcoef(ds.X[:, i], ds.Z[:, 0])[0, 1]
        assert abs(corr - 1 / math.sqrt(2)) <= 0.03


def test_sources_uncorrelated():
    ds = generate(GenSpec(m=6, k=2, total_capacity=2.0, N=4000, seed=4))
    c = np.corrcoef(ds.Z.T)
    off = c[~np.eye(6, dtype=bool)]
    assert np.max(np.abs(off)) < 4 / math.sqrt(4000)


def test_deterministic():
    spec = GenSpec(m=3, k=4, total_capacity=4.0, N=100, seed=5, rotate=True)
    a, b = generate(spec), generate(spec)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.Z, b.Z)
    np.testing.assert_array_equal(a.rotation, b.rotation)


@pytest.mark.parametrize("seed", range(5))
def test_per_source_capacity(seed):
    ds = generate(GenSpec(m=4, k=5, total_capacity=4.0, N=10, seed=seed))
    caps = 0.5 * np.log1p(1.0 / ds.noise_vars)
    np.testing.assert_allclose(caps.reshape(4, 5).sum(axis=1), 4.0, atol=1e-9)
    assert np.all(ds.noise_vars > 0)


def test_global_capacity():
    ds = generate(GenSpec(m=4, k=5, total_capacity=4.0, N=10, seed=0, global_capacity=True))
    assert 0.5 * np.log1p(1.0 / ds.noise_vars).sum() == pytest.approx(4.0, abs=1e-9)


def test_parent_map_partition():
    ds = generate(GenSpec(m=3, k=4, total_capacity=1.0, N=10, seed=0))
    assert ds.parent_map.tolist() == [0] * 4 + [1] * 4 + [2] * 4
    assert ds.X.shape == (10, 12) and ds.Z.shape == (10, 3)


def test_child_source_correlation():
    n = 20000
    ds = generate(GenSpec(m=2, k=5, total_capacity=3.0, N=n, seed=6))
    for i, parent in enumerate(ds.parent_map):
        corr = np.corrcoef(ds.X[:, i], ds.Z[:, parent])[0, 1]
        assert abs(corr - 1 / math.sqrt(1 + ds.noise_vars[i])) <= 5 / math.sqrt(n)


def test_rotation_orthonormal():
    r = random_rotation(5, np.random.default_rng(0))
    np.testing.assert_allclose(r @ r.T, np.eye(5), atol=1e-12)


def test_rotated_sources_mix():
    ds = generate(GenSpec(m=3, k=2, total_capacity=4.0, N=5000, seed=7, rotate=True))
    # rotated sources stay white
    np.testing.assert_allclose(np.cov(ds.Z.T, bias=True), np.eye(3), atol=0.06)
    meta = ds.meta()
    assert meta["spec"]["rotate"] is True
    assert len(meta["rotation"]) == 3
