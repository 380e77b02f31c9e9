import json

import numpy as np
import pytest

from skelmatch.errors import ShapeError
from skelmatch.matching import (GROUP_TERMS, KINDS, MatchStrategy, combined, cross_spatial, cross_temporal, match,
                                multi_spatial, multi_temporal, strategy_total)
from skelmatch.ot import SolverOptions

from conftest import random_pyramid

EXACT = SolverOptions("exact", exact_limit=10**6)


@pytest.fixture(scope="module")
def pair():
    return random_pyramid(C=4, T=4, seed=1), random_pyramid(C=4, T=4, seed=2, shift=0.2)


def test_term_counts():
    assert len(MatchStrategy("S").terms()) == 1
    assert len(MatchStrategy("M").terms()) == 6
    assert len(MatchStrategy("MC").terms()) == 18
    assert all(len(GROUP_TERMS[g]) == 6 for g in ("Cs", "Ct"))
    with pytest.raises(ValueError):
        MatchStrategy("XY")


@pytest.mark.parametrize("kind", KINDS)
def test_total_matches_formula(pair, kind):
    X, Y = pair
    score = match(X, Y, MatchStrategy(kind, EXACT))
    assert abs(score.total - score.recompute()) < 1e-15
    inner = match(X, Y, MatchStrategy(kind, EXACT, inner_normalization=True))
    assert abs(inner.total - strategy_total(kind, score.components, True)) < 1e-12


def test_mc_is_mean_of_groups(pair):
    X, Y = pair
    mc = match(X, Y, MatchStrategy("MC", EXACT))
    agg = mc.aggregates()
    assert abs(mc.total - (agg["s_ms"] + agg["s_mt"] + agg["s_cs"] + agg["s_ct"]) / 4) < 1e-12
    assert abs(multi_spatial(X, Y, EXACT).total - agg["s_ms"]) < 1e-12
    assert abs(multi_temporal(X, Y, EXACT).total - agg["s_mt"]) < 1e-12
    assert abs(cross_spatial(X, Y, EXACT).total - agg["s_cs"]) < 1e-12
    assert abs(cross_temporal(X, Y, EXACT).total - agg["s_ct"]) < 1e-12
    assert abs(combined(X, Y, MatchStrategy("MC", EXACT)).total - mc.total) < 1e-15


def test_s1_t1_terms_coincide(pair):
    X, Y = pair
    comp = match(X, Y, MatchStrategy("M", EXACT)).components
    assert comp["s(Xs1,Ys1)"] == comp["s(Xt1,Yt1)"]


def test_self_match_diagonal_terms_are_one():
    X = random_pyramid(C=4, T=4, seed=3)
    comp = match(X, X, MatchStrategy("M", EXACT)).components
    for v in comp.values():
        assert abs(v - 1.0) < 1e-9


def test_shape_mismatch_names_level():
    X = random_pyramid(C=4, T=8)
    Y = random_pyramid(C=4, T=4)
    with pytest.raises(ShapeError) as ei:
        match(X, Y, MatchStrategy("S"))
    assert "s1" in str(ei.value)
    with pytest.raises(ShapeError):
        match(X, random_pyramid(C=3, T=8), MatchStrategy("S"))


def test_score_json(pair):
    X, Y = pair
    doc = json.loads(match(X, Y, MatchStrategy("MC", EXACT)).to_json())
    assert doc["strategy"] == "MC"
    assert len(doc["components"]) == 18
    assert set(doc["aggregates"]) == {"s_ms", "s_mt", "s_cs", "s_ct"}


def test_sinkhorn_close_to_exact(pair):
    X, Y = pair
    a = match(X, Y, MatchStrategy("MC", EXACT)).total
    b = match(X, Y, MatchStrategy("MC", SolverOptions("sinkhorn", epsilon=0.01, tol=1e-9, max_iter=10000))).total
    assert abs(a - b) / abs(a) < 0.02


def test_scaling_invariance(pair):
    X, Y = pair
    Xs = X.map_levels(lambda d: 3.0 * d)
    a = match(X, Y, MatchStrategy("MC", EXACT)).total
    b = match(Xs, Y, MatchStrategy("MC", EXACT)).total
    assert abs(a - b) < 1e-9
    assert np.isfinite(a)


def test_cross_terms_match_explicit_loop(pair):
    from skelmatch.ot import relevance_score

    X, Y = pair
    for axis, fn, levels in ((1, cross_spatial, ("s1", "s2", "s3")), (2, cross_temporal, ("t1", "t2", "t3"))):
        pooled_x = {a: X.level(a).data.mean(axis=axis).T for a in levels}
        pooled_y = {a: Y.level(a).data.mean(axis=axis).T for a in levels}
        oracle = sum(relevance_score(pooled_x[a], pooled_y[b], EXACT)[0]
                     for a in levels for b in levels if a != b)
        assert abs(fn(X, Y, EXACT).total - oracle) < 1e-12


def test_cross_orthogonal_pooled_features_zero():
    from conftest import consistent_pyramid

    X = consistent_pyramid(C=4, T=4, seed=1)
    Y = consistent_pyramid(C=4, T=4, seed=2)
    # disjoint channel supports make every pooled pair orthogonal
    Xo = X.map_levels(lambda d: np.concatenate([d, np.zeros_like(d)]))
    Yo = Y.map_levels(lambda d: np.concatenate([np.zeros_like(d), d]))
    assert abs(cross_spatial(Xo, Yo, EXACT).total) < 1e-15
    assert abs(cross_temporal(Xo, Yo, EXACT).total) < 1e-15
