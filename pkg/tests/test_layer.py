import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infosieve.data import center
from infosieve.exceptions import (
    DegenerateColumn,
    DomainError,
    InputError,
    NoConvergenceWarning,
    NumericalBlowup,
    NumericalBlowupWarning,
    ShapeError,
)
from infosieve.layer import (
    FitConfig,
    LayerParams,
    Moments,
    fit_layer,
    fixed_point_residual,
    fixed_point_step,
    init_weights,
    invert_layer,
    layer_noise_seed,
    layer_objective,
    remainder,
    restart_seed,
    sample_channel_noise,
    update_weights,
)
from infosieve.metrics import gaussian_tc


def exact_correlation_sample(r, n, seed):
    """Two columns with population std 1 and sample correlation exactly r."""
    rng = np.random.default_rng(seed)
    z = center(rng.standard_normal((n, 2))).values
    z = z @ np.linalg.inv(np.linalg.cholesky(z.T @ z / n)).T
    mix = np.linalg.cholesky(np.array([[1.0, r], [r, 1.0]]))
    return z @ mix.T


def fitted(data, **kw):
    cfg = FitConfig(**{"n_restarts": 3, "seed": 1, **kw})
    return fit_layer(center(data), cfg)


def test_fit_config_validation():
    with pytest.raises(InputError):
        FitConfig(n_restarts=0)
    with pytest.raises(InputError):
        FitConfig(tol=0.0)
    with pytest.raises(InputError):
        FitConfig(moments="dense")
    assert FitConfig().n_restarts == 10 and FitConfig().tol == 1e-8


def test_init_weights_deterministic():
    x = center(np.array([[1.0], [-1.0]]))
    a = init_weights(x, 42)
    assert a.shape == (1,)
    assert init_weights(x, 42)[0] == a[0]
    assert a[0] == np.random.default_rng(42).standard_normal()


def test_init_weights_scale():
    x = center(np.tile(np.array([[2.0], [-2.0]]), (1, 4)))
    draws = np.concatenate([init_weights(x, s) for s in range(25000)])
    assert draws.size == 100000
    assert abs(draws.std() / 0.25 - 1.0) < 0.02


def test_init_weights_degenerate():
    with pytest.raises(DegenerateColumn):
        init_weights(np.array([[1.0, 3.0], [1.0, 4.0]]), 0)


def test_update_weights_example():
    w = update_weights(Moments(xy=np.array([0.5]), xx=np.array([1.0]), yy=1.0))
    assert w[0] == pytest.approx(2.0 / 3.0, rel=1e-15)


def test_update_weights_clamps_denominator():
    with pytest.warns(NumericalBlowupWarning):
        w = update_weights(Moments(xy=np.array([1.0, 0.5]), xx=np.array([1.0, 1.0]), yy=1.0))
    assert w[0] == pytest.approx(1e12)
    assert np.all(np.isfinite(w))


def test_fixed_point_step_zero_weights():
    x = center(np.random.default_rng(0).standard_normal((10, 3)))
    with pytest.raises(NumericalBlowup):
        fixed_point_step(x, np.zeros(3))


def test_fixed_point_step_moments(rng):
    x = center(rng.standard_normal((200, 3)))
    w = np.array([0.3, -0.2, 0.5])
    w_new, m = fixed_point_step(x, w)
    y = x.values @ w
    np.testing.assert_allclose(m.xy, x.values.T @ y / 200, rtol=1e-13)
    np.testing.assert_allclose(m.xx, (x.values**2).mean(axis=0), rtol=1e-13)
    assert m.yy == pytest.approx(np.mean(y**2) + 1.0, rel=1e-13)
    np.testing.assert_allclose(w_new, m.xy / (m.xx * m.yy - m.xy**2), rtol=1e-12)
    with pytest.raises(ShapeError):
        fixed_point_step(x, np.ones(2))


def test_fixed_point_symmetric_bivariate():
    x = exact_correlation_sample(0.8, 2000, 3)
    params = fit_layer(x, FitConfig(n_restarts=1, seed=0))
    assert params.converged
    assert abs(abs(params.w[0]) - abs(params.w[1])) <= 1e-6
    assert abs(abs(params.rho[0]) - abs(params.rho[1])) <= 1e-6


def test_objective_independent_factor():
    m = Moments(xy=np.zeros(3), xx=np.ones(3), yy=1.0)
    assert layer_objective(m) == 0.0


def test_objective_single_variable_is_zero():
    rho = 0.6
    yy = 1.0 / (1.0 - rho**2)
    m = Moments(xy=np.array([rho * math.sqrt(yy)]), xx=np.array([1.0]), yy=yy)
    assert abs(layer_objective(m)) < 1e-12


def test_objective_domain_errors():
    with pytest.raises(DomainError):
        layer_objective(Moments(xy=np.array([2.0]), xx=np.array([1.0]), yy=4.0))
    with pytest.raises(DomainError):
        layer_objective(Moments(xy=np.array([0.1]), xx=np.array([1.0]), yy=0.5))


def test_bivariate_layer_captures_all_tc():
    x = exact_correlation_sample(0.5, 5000, 4)
    params = fit_layer(x, FitConfig(seed=2))
    expected = gaussian_tc(x).value
    assert expected == pytest.approx(-0.5 * math.log(0.75), abs=1e-12)
    assert params.tc_contribution == pytest.approx(expected, abs=1e-6)


def test_independent_columns_small_objective():
    values = []
    for seed in range(10):
        x = np.random.default_rng(seed).standard_normal((10000, 10))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoConvergenceWarning)
            values.append(fitted(x, seed=seed).tc_contribution)
    assert max(values) <= 0.05
    assert min(values) >= -1e-9


def test_single_source_recovery(single_source):
    params = fit_layer(center(single_source.X), FitConfig(seed=0))
    y = center(single_source.X).values @ params.w
    assert abs(np.corrcoef(y, single_source.Z[:, 0])[0, 1]) >= 0.9


def test_fit_layer_deterministic(three_sources):
    x = center(three_sources.X)
    a = fit_layer(x, FitConfig(n_restarts=4, seed=5))
    b = fit_layer(x, FitConfig(n_restarts=4, seed=5))
    assert a.to_dict() == b.to_dict()
    np.testing.assert_array_equal(a.w, b.w)


def test_restart_independence(three_sources):
    # each restart's trajectory does not depend on how many others run with it
    x = center(three_sources.X)
    few = fit_layer(x, FitConfig(n_restarts=3, seed=5))
    many = fit_layer(x, FitConfig(n_restarts=6, seed=5))
    np.testing.assert_allclose(few.restart_objectives, many.restart_objectives[:3], rtol=0, atol=1e-12)


def test_winner_dominates_restarts(three_sources):
    params = fit_layer(center(three_sources.X), FitConfig(seed=9))
    assert params.tc_contribution >= max(params.restart_objectives) - 1e-9
    assert params.tc_contribution >= params.initial_objective
    assert len(params.restart_objectives) == 10


def test_converged_layer_residual(three_sources):
    params = fit_layer(center(three_sources.X), FitConfig(seed=0))
    assert params.converged
    assert fixed_point_residual(params) <= 1e-6 * max(1.0, np.max(np.abs(params.w)))
    np.testing.assert_allclose(
        params.rho, params.moment_xy / np.sqrt(params.moment_xx * params.moment_yy), rtol=1e-15
    )
    assert np.all(np.abs(params.rho) < 1)
    assert params.moment_yy >= 1.0


def test_gram_and_sample_moments_agree(three_sources):
    x = center(three_sources.X)
    a = fit_layer(x, FitConfig(n_restarts=2, seed=3, moments="gram"))
    b = fit_layer(x, FitConfig(n_restarts=2, seed=3, moments="samples"))
    np.testing.assert_allclose(a.w, b.w, rtol=1e-6)
    assert a.tc_contribution == pytest.approx(b.tc_contribution, abs=1e-9)


def test_scale_invariance(single_source):
    x = center(single_source.X).values
    scaled = x.copy()
    scaled[:, 3] *= 100.0
    z = single_source.Z[:, 0]
    corr = []
    for data in (x, scaled):
        params = fit_layer(center(data), FitConfig(seed=4))
        corr.append(abs(np.corrcoef(center(data).values @ params.w, z)[0, 1]))
    assert abs(corr[0] - corr[1]) <= 1e-3


def test_no_convergence_returns_best_so_far(three_sources):
    with pytest.warns(NoConvergenceWarning):
        params = fit_layer(center(three_sources.X), FitConfig(n_restarts=2, max_iterations=2))
    assert not params.converged
    assert params.iterations == 2
    assert np.isfinite(params.tc_contribution)


def test_noiseless_duplicates_are_flagged():
    z = np.random.default_rng(0).standard_normal((300, 1))
    x = center(np.hstack([z, 2 * z, -z]))
    with pytest.warns(NumericalBlowupWarning):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoConvergenceWarning)
            params = fit_layer(x, FitConfig(n_restarts=2))
    assert not params.converged
    assert np.all(np.isfinite(params.w))


def test_seed_streams_distinct():
    a = np.random.default_rng(restart_seed(0, 0, 0)).random()
    b = np.random.default_rng(restart_seed(0, 0, 1)).random()
    c = np.random.default_rng(layer_noise_seed(0, 0)).random()
    assert len({a, b, c}) == 3


def test_channel_noise_properties(three_sources):
    x = center(three_sources.X)
    noise = sample_channel_noise(x, layer_noise_seed(0, 0))
    n = x.n_samples
    assert abs(noise.mean()) < 1e-14
    assert float(noise @ noise) / n == pytest.approx(1.0, rel=1e-14)
    assert np.max(np.abs(x.values.T @ noise / n)) < 1e-13
    np.testing.assert_array_equal(noise, sample_channel_noise(x, layer_noise_seed(0, 0)))


def manual_params(coef, channel_noise=False):
    coef = np.asarray(coef, dtype=float)
    return LayerParams(
        w=np.ones(coef.size),
        moment_xy=coef,
        moment_xx=np.ones(coef.size) * 4,
        moment_yy=2.0,
        signal_power=1.0,
        tc_contribution=0.0,
        iterations=0,
        converged=True,
        channel_noise=channel_noise,
    )


def test_remainder_formula_example():
    # one column, w = 0.5 so y = 1 for x = 2; coefficient 0.5
    params = LayerParams(
        w=np.array([0.5]),
        moment_xy=np.array([0.5]),
        moment_xx=np.array([4.0]),
        moment_yy=2.0,
        signal_power=1.0,
        tc_contribution=0.0,
        iterations=0,
        converged=True,
        channel_noise=False,
    )
    out = remainder(np.array([[2.0], [-2.0]]), params)
    np.testing.assert_array_equal(out.values, [[1.5, 1.0], [-1.5, -1.0]])
    back = invert_layer(out, params)
    np.testing.assert_array_equal(back.values, [[2.0], [-2.0]])


def test_remainder_uncorrelated_column_passes_through(rng):
    x = rng.standard_normal((5, 2))
    out = remainder(x, manual_params([0.0, 0.0]))
    np.testing.assert_array_equal(out.values[:, :2], x)


def test_invert_zero_factor_column(rng):
    rem = np.column_stack([rng.standard_normal((6, 2)), np.zeros(6)])
    out = invert_layer(rem, manual_params([0.3, -0.7]))
    np.testing.assert_array_equal(out.values, rem[:, :2])


def test_invert_shape_error(rng):
    with pytest.raises(ShapeError):
        invert_layer(rng.standard_normal((4, 2)), manual_params([0.3, -0.7]))
    with pytest.raises(ShapeError):
        remainder(rng.standard_normal((4, 3)), manual_params([0.3, -0.7]))


def test_channel_remainder_requires_noise(rng):
    with pytest.raises(InputError):
        remainder(rng.standard_normal((4, 2)), manual_params([0.3, 0.1], channel_noise=True))


@pytest.mark.parametrize("channel_noise", [True, False])
def test_remainder_orthogonal_and_invertible(three_sources, channel_noise):
    x = center(three_sources.X)
    params = fit_layer(x, FitConfig(n_restarts=3, seed=0), channel_noise=channel_noise)
    noise = sample_channel_noise(x, 123) if channel_noise else None
    out = remainder(x, params, noise)
    y = out.values[:, -1]
    n = x.n_samples
    xbar = out.values[:, :-1]
    ortho = np.abs(xbar.T @ y / n) / params.moment_xx
    assert ortho.max() <= 1e-10
    back = invert_layer(out, params).values
    assert np.max(np.abs(back - x.values) / np.maximum(np.abs(x.values), 1.0)) <= 1e-10


def test_layer_params_round_trip(three_sources):
    params = fit_layer(center(three_sources.X), FitConfig(n_restarts=2))
    again = LayerParams.from_dict(params.to_dict())
    assert again.to_dict() == params.to_dict()
    np.testing.assert_array_equal(again.coef, params.coef)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_objective_nonnegative_at_fit(seed, r):
    x = exact_correlation_sample(r, 400, seed)
    params = fit_layer(x, FitConfig(n_restarts=2, seed=seed))
    assert params.tc_contribution >= -1e-9
