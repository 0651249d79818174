import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tagsysid.data import make_benchmark
from tagsysid.estimators import NarmaxRegressor, TagGPIdentifier
from tagsysid.grammar import builtin_grammar
from tagsysid.model import parse_terms


@pytest.fixture(scope="module")
def s1():
    return make_benchmark("S1", 600, seed=0, noise_std=0.0)


def test_regressor_recovers_s1(s1):
    terms = "y_{k-1} + y_{k-2} + u_{k-1} + u_{k-1}*y_{k-1}"
    r = NarmaxRegressor(terms).fit(s1.u, s1.y)
    np.testing.assert_allclose(r.coef_, [0.7, -0.1, 0.5, 0.2], atol=1e-8)
    assert r.score(s1.u, s1.y) == pytest.approx(100.0)
    np.testing.assert_allclose(r.simulate(s1.u, s1.y), s1.y, atol=1e-9)
    pred = r.predict(s1.u.reshape(-1, 1), s1.y)
    assert np.isnan(pred[:2]).all()
    np.testing.assert_allclose(pred[2:], s1.y[2:], atol=1e-9)


def test_regressor_accepts_structure_object(s1):
    r = NarmaxRegressor(parse_terms("y_{k-1} + u_{k-1}")).fit(s1.u, s1.y)
    assert r.structure_.p == 2 and r.report_.n_rows == len(s1.u) - 1


def test_regressor_params_and_clone():
    r = NarmaxRegressor("y_{k-1}", max_iter=3)
    assert r.get_params() == {"structure": "y_{k-1}", "max_iter": 3, "tol": 1e-8,
                              "n_transient": 0, "metric_form": "paper"}
    c = clone(r).set_params(tol=1e-6)
    assert c.tol == 1e-6 and r.tol == 1e-8


def test_regressor_needs_fit(s1):
    with pytest.raises(NotFittedError):
        NarmaxRegressor("y_{k-1}").predict(s1.u, s1.y)


def test_regressor_input_checks(s1):
    with pytest.raises(ValueError):
        NarmaxRegressor().fit(s1.u, s1.y)
    with pytest.raises(ValueError):
        NarmaxRegressor("y_{k-1}").fit(s1.u[:-1], s1.y)
    with pytest.raises(ValueError):
        NarmaxRegressor("y_{k-1}").fit(np.c_[s1.u, s1.u], s1.y)
    with pytest.raises(ValueError):
        NarmaxRegressor("y_{k-1}").fit(np.r_[np.nan, s1.u[1:]], s1.y)


def test_regressor_els_branch():
    d = make_benchmark("S2", 3000, seed=1)
    r = NarmaxRegressor("y_{k-1} + u_{k-1} + ξ_{k-1}").fit(d.u, d.y)
    np.testing.assert_allclose(r.coef_, [0.8, 1.0, 0.5], atol=0.08)
    assert r.report_.iterations_used >= 1


def test_identifier_fit(s1):
    est = TagGPIdentifier(population_size=20, n_iterations=5, random_state=3)
    est.fit(s1.u, s1.y)
    assert len(est.models_) == len(est.front_) >= 1
    assert len(est.history_) == 6
    assert est.model_ in est.models_
    assert np.isfinite(est.score(s1.u, s1.y))
    assert est.simulate(s1.u, s1.y).shape == s1.y.shape


def test_identifier_validation_split(s1):
    val = make_benchmark("S1", 300, seed=9, noise_std=0.0)
    est = TagGPIdentifier(population_size=10, n_iterations=2).fit(s1.u, s1.y, val.u, val.y)
    assert est.front_.population[0].fitness is not None


def test_identifier_grammar_choices(tmp_path, s1):
    g = builtin_grammar("narx")
    p = tmp_path / "g.tag"
    p.write_text(g.to_text())
    for grammar in ("narx", g, str(p)):
        est = TagGPIdentifier(grammar=grammar, population_size=8, n_iterations=1).fit(s1.u, s1.y)
        assert all(not t.has_noise for m in est.models_ for t in m.structure.terms)


def test_identifier_is_reproducible(s1):
    a = TagGPIdentifier(population_size=15, n_iterations=3, random_state=1).fit(s1.u, s1.y)
    b = clone(a).fit(s1.u, s1.y)
    assert [m.equation() for m in a.models_] == [m.equation() for m in b.models_]


def test_identifier_config_validation(s1):
    with pytest.raises(ValueError):
        TagGPIdentifier(p_mutation=2.0).fit(s1.u, s1.y)
