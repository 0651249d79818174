import numpy as np
import pytest

from tagsysid.data import Dataset, make_benchmark
from tagsysid.estimation import estimate, extended_least_squares, fit_structure, least_squares
from tagsysid.exceptions import InsufficientData
from tagsysid.model import FittedModel, generate, parse_terms, predict_one_step, regressor_matrix


def linear_data(n=200, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, n)
    s = parse_terms("y_{k-1} + u_{k-1}")
    y = generate(s, [0.7, 0.5], u, noise * rng.normal(size=n))
    return Dataset(u, y)


def normal_equation_se(phi, resid, p):
    """Standard errors from the textbook covariance sigma^2 (X'X)^-1."""
    sigma2 = resid @ resid / (phi.shape[0] - p)
    return np.sqrt(np.diag(sigma2 * np.linalg.inv(phi.T @ phi)))


def test_noise_free_recovery():
    r = least_squares(parse_terms("y_{k-1} + u_{k-1}"), linear_data())
    np.testing.assert_allclose(r.coefficients, [0.7, 0.5], atol=1e-8)
    assert not r.condition_warning and r.rank == 2 and r.n_rows == 199


def test_matches_normal_equations():
    d = linear_data(noise=0.05, seed=3)
    m = parse_terms("y_{k-1} + u_{k-1} + u_{k-1}*y_{k-1}")
    phi = regressor_matrix(m, d.u, d.y)
    ref = np.linalg.solve(phi.T @ phi, phi.T @ d.y[1:])
    np.testing.assert_allclose(least_squares(m, d).coefficients, ref, rtol=1e-9)


def test_duplicate_term_minimum_norm():
    d = linear_data(noise=0.01, seed=1)
    single = fit_structure(parse_terms("y_{k-1} + u_{k-1}"), d)
    dup_s = parse_terms("y_{k-1} + y_{k-1} + u_{k-1}")
    r = least_squares(dup_s, d)
    assert r.condition_warning and r.rank == 2
    # minimum norm splits the collinear weight evenly
    assert r.coefficients[0] == pytest.approx(r.coefficients[1], abs=1e-10)
    dup = FittedModel(dup_s, r.coefficients)
    np.testing.assert_allclose(predict_one_step(dup, d)[1:], predict_one_step(single, d)[1:], atol=1e-8)


def test_zero_column_gets_zero_coefficient():
    d = Dataset(np.zeros(50), linear_data(50).y)
    r = least_squares(parse_terms("y_{k-1} + u_{k-1}"), d)
    assert r.coefficients[1] == 0.0


def test_transient_skipped():
    d = linear_data(noise=0.0)
    y = d.y.copy()
    y[:20] = 100.0  # garbage that must not enter the fit
    r = least_squares(parse_terms("y_{k-1} + u_{k-1}"), Dataset(d.u, y, n_transient=21))
    np.testing.assert_allclose(r.coefficients, [0.7, 0.5], atol=1e-8)
    assert r.n_rows == 200 - 21


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        least_squares(parse_terms("y_{k-1} + u_{k-1} + u_{k-2}"), linear_data(4))


def test_wrong_solver_for_structure():
    with pytest.raises(ValueError):
        least_squares(parse_terms("y_{k-1} + ξ_{k-1}"), linear_data())
    with pytest.raises(ValueError):
        extended_least_squares(parse_terms("y_{k-1}"), linear_data())


def test_ls_three_standard_errors_small():
    s = parse_terms("y_{k-1} + u_{k-1}")
    inside = 0
    for seed in range(60):
        d = linear_data(1000, noise=0.01, seed=seed)
        r = least_squares(s, d)
        phi = regressor_matrix(s, d.u, d.y)
        se = normal_equation_se(phi, d.y[1:] - phi @ r.coefficients, 2)
        inside += np.all(np.abs(r.coefficients - [0.7, 0.5]) <= 3 * se)
    assert inside >= 58


def test_els_zero_noise_coefficient_is_narx_fixed_point():
    d = linear_data(300, noise=0.0)
    r = extended_least_squares(parse_terms("y_{k-1} + u_{k-1} + ξ_{k-1}"), d)
    assert r.converged and r.iterations_used <= 2
    np.testing.assert_allclose(r.coefficients, [0.7, 0.5, 0.0], atol=1e-8)


def test_els_zero_budget_returns_iteration_zero():
    d = make_benchmark("S2", 500, seed=0)
    s = parse_terms("y_{k-1} + u_{k-1} + ξ_{k-1}")
    r = extended_least_squares(s, d, max_iterations=0)
    assert not r.converged and r.iterations_used == 0
    narx = least_squares(parse_terms("y_{k-1} + u_{k-1}"), d)
    np.testing.assert_allclose(r.coefficients[:2], narx.coefficients, rtol=1e-12)
    assert r.coefficients[2] == 0.0


def test_els_recovers_s2_single_run():
    r = estimate(parse_terms("y_{k-1} + u_{k-1} + ξ_{k-1}"), make_benchmark("S2", 4000, seed=11))
    np.testing.assert_allclose(r.coefficients, [0.8, 1.0, 0.5], atol=0.06)


def test_els_beats_ls_on_coloured_noise():
    d = make_benchmark("S2", 4000, seed=12)
    ls = least_squares(parse_terms("y_{k-1} + u_{k-1}"), d).coefficients
    els = estimate(parse_terms("y_{k-1} + u_{k-1} + ξ_{k-1}"), d).coefficients
    assert abs(els[0] - 0.8) < abs(ls[0] - 0.8)


def test_els_noise_only_structure():
    rng = np.random.default_rng(5)
    e = rng.normal(size=3000)
    y = generate(parse_terms("ξ_{k-1}"), [0.6], np.zeros(3000), e)
    r = extended_least_squares(parse_terms("ξ_{k-1}"), Dataset(np.zeros(3000), y))
    assert r.coefficients[0] == pytest.approx(0.6, abs=0.05)

