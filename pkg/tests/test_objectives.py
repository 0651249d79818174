import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagsysid.data import Dataset
from tagsysid.exceptions import DegenerateOutput
from tagsysid.model import FittedModel, generate, parse_terms
from tagsysid.objectives import (
    WORST,
    ObjectiveTriple,
    bfr,
    crowding_distance,
    crowding_truncate,
    dominates,
    evaluate,
    non_dominated_sort,
    objectives,
    quality,
    rms,
)


def brute_force_fronts(points):
    """Repeatedly peel off the points nobody left dominates."""
    left = list(range(len(points)))
    fronts = []
    while left:
        front = [i for i in left if not any(dominates(points[j], points[i]) for j in left)]
        fronts.append(front)
        left = [i for i in left if i not in front]
    return fronts


def clean_system(n=300, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, n)
    s = parse_terms("y_{k-1} + u_{k-1}")
    y = generate(s, [0.6, 1.0], u, np.zeros(n))
    return FittedModel(s, [0.6, 1.0]), Dataset(u, y)


def test_true_model_scores_zero():
    fm, d = clean_system()
    obj = objectives(fm, d)
    assert obj.pred_sse == pytest.approx(0.0, abs=1e-24)
    assert obj.sim_sse == pytest.approx(0.0, abs=1e-20)
    assert obj.complexity == 2 and not obj.failed
    q = quality(fm, d)
    assert q.bfr_p == pytest.approx(100.0) and q.bfr_s == pytest.approx(100.0)
    assert q.rms_p == pytest.approx(0.0, abs=1e-12)


def test_unstable_model_gets_sentinel():
    _, d = clean_system()
    obj = objectives(FittedModel(parse_terms("y_{k-1} + u_{k-1}"), [1.5, 1.0]), d)
    assert obj.sim_sse == WORST and math.isfinite(obj.pred_sse) and obj.failed


def test_sse_by_hand():
    e = np.array([1.0, -1.0, 2.0])
    assert float(e @ e) == 6.0
    assert rms(e, form="conventional") == pytest.approx(math.sqrt(2.0))
    assert rms(e, form="paper") == pytest.approx(math.sqrt(6.0) / 3)


def test_zero_error_and_mean_predictor():
    y = np.array([1.0, 3.0, 2.0, 6.0])
    assert bfr(np.zeros(4), y) == 100.0
    assert rms(np.zeros(4)) == 0.0
    assert bfr(y - y.mean(), y) == pytest.approx(0.0, abs=1e-12)


def test_transient_excluded():
    e = np.array([100.0, 1.0, -1.0])
    y = np.array([0.0, 1.0, 3.0])
    assert rms(e, 1, "conventional") == pytest.approx(1.0)
    assert bfr(e, y, 1) == pytest.approx(100 * (1 - 2 / 2))


def test_constant_output_is_degenerate():
    with pytest.raises(DegenerateOutput):
        bfr(np.ones(5), np.full(5, 2.0))
    fm, _ = clean_system()
    with pytest.raises(DegenerateOutput):
        quality(fm, Dataset(np.ones(20), np.full(20, 3.0)))


def test_scoring_starts_after_max_lag():
    fm, d = clean_system()
    y = d.y.copy()
    y[0] += 50.0  # only an initial condition, never scored
    obj, _ = evaluate(fm, Dataset(d.u, y), n_transient=0)
    assert obj.pred_sse > 0  # y_1 depends on y_0
    obj2, _ = evaluate(fm, Dataset(d.u, y), n_transient=2)
    assert obj2.pred_sse == pytest.approx(0.0, abs=1e-20)


def test_small_sort_example():
    pts = [(1, 1, 0), (1, 2, 0), (2, 1, 0), (2, 2, 0)]
    assert [sorted(f) for f in non_dominated_sort(pts)] == [[0], [1, 2], [3]]


def test_identical_points_share_front():
    assert non_dominated_sort([(1.0, 2.0, 3)] * 5) == [[0, 1, 2, 3, 4]]
    assert non_dominated_sort([]) == []


def test_infinite_objectives_sort_last():
    pts = [(WORST, WORST, 1), (1.0, 1.0, 2), (2.0, 0.5, 3)]
    assert non_dominated_sort(pts) == [[0, 1, 2]]
    pts = [(WORST, WORST, 3), (1.0, 1.0, 2)]
    assert non_dominated_sort(pts) == [[1], [0]]


def test_objective_triple_accepted():
    a = ObjectiveTriple(1.0, 1.0, 1)
    b = ObjectiveTriple(1.0, 2.0, 1)
    assert dominates(a, b) and not dominates(b, a) and not dominates(a, a)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(1, 4)), max_size=40))
def test_sort_matches_brute_force(points):
    got = [sorted(f) for f in non_dominated_sort(points)]
    assert got == brute_force_fronts(points)


@given(st.tuples(*[st.floats(-1e6, 1e6)] * 3), st.tuples(*[st.floats(-1e6, 1e6)] * 3),
       st.tuples(*[st.floats(-1e6, 1e6)] * 3))
def test_dominance_is_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    if dominates(a, b):
        assert not dominates(b, a)
        if dominates(b, c):
            assert dominates(a, c)


def test_crowding_boundaries_infinite():
    d = crowding_distance([(0, 4, 1), (1, 3, 1), (3, 1, 1), (4, 0, 1)])
    assert d[0] == d[3] == np.inf
    # interior gaps normalised by each objective's span; the third is constant
    assert d[1] == pytest.approx(3 / 4 + 3 / 4)
    assert d[2] == pytest.approx(3 / 4 + 3 / 4)


def test_truncate_cases():
    pts = [(0, 2, 1), (1, 1, 1), (2, 0, 1), (5, 5, 5)]
    assert crowding_truncate(pts, 10) == [0, 1, 2, 3]
    assert crowding_truncate(pts, 0) == []
    # collinear straddling front: boundaries survive
    assert sorted(crowding_truncate(pts[:3], 2)) == [0, 2]


def test_truncate_keeps_whole_better_fronts():
    pts = [(0, 0, 1), (1, 1, 1), (1, 2, 1), (2, 1, 1), (3, 3, 3)]
    keep = crowding_truncate(pts, 3)
    assert keep[:2] == [0, 1] and len(keep) == 3


def test_truncate_tiebreak():
    # duplicates: the stable sort puts 0 and 3 on the boundary, the tiebreak orders them
    pts = [(0, 0, 1)] * 4
    assert crowding_truncate(pts, 2, tiebreak=[5, 1, 3, 0]) == [3, 0]
    assert crowding_truncate(pts, 1, tiebreak=[0, 1, 3, 5]) == [0]
