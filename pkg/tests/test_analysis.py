from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linecomplex.analysis import (
    AnalysisError,
    ChooseSError,
    ResistanceSeries,
    ball_stats,
    choose_s,
    conjugate_gradient,
    effective_resistance,
    growth_fit,
    mean_excess_spread,
    nash_williams,
    random_walk_return,
    resistance_series,
    wilson_interval,
)
from linecomplex.planar import _from_edge_slots, cycle_graph, digon, grid_graph, grid_vertex, path_graph
from linecomplex.tree import build_pruned_tree


def t3_ball(depth):
    """Ball of radius ``depth`` in the 3-regular tree, as a plane tree."""
    edges, parity, level = [], [0], [0]
    frontier = [0]
    for d in range(1, depth + 1):
        nxt = []
        for u in frontier:
            for b in range(3 if u == 0 else 2):
                v = len(parity)
                parity.append(d % 2)
                level.append(d)
                edges.append((u, b + 1, v, 0))
                nxt.append(v)
        frontier = nxt
    return _from_edge_slots(len(parity), parity, edges)


def t3_resistance(depth):
    R = 0.0
    for _ in range(depth - 1):
        R = (1 + R) / 2
    return (1 + R) / 3


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_path_resistance(n):
    assert effective_resistance(path_graph(n), 0, n) == pytest.approx(n, rel=1e-10)


@pytest.mark.parametrize("depth", [1, 2, 4, 7])
def test_tree_resistance_recursion(depth):
    g = t3_ball(depth)
    assert effective_resistance(g, 0, depth) == pytest.approx(t3_resistance(depth), rel=1e-10)


def test_cg_matches_direct(gamma_small):
    g = gamma_small.graph
    assert g.n_vertices < 2000
    for r in (2, 4, int(g.trusted_radius(gamma_small.w0))):
        a = effective_resistance(g, gamma_small.w0, r)
        b = effective_resistance(g, gamma_small.w0, r, method="direct")
        assert abs(a - b) <= 1e-8 * b
    grid = grid_graph(21, 21)
    c = grid_vertex(21, 10, 10)
    assert effective_resistance(grid, c, 9) == pytest.approx(effective_resistance(grid, c, 9, method="direct"), rel=1e-8)


def test_cg_solves_spd_system():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(30, 30))
    A = m @ m.T + 30 * np.eye(30)
    b = rng.normal(size=30)
    x, res, _ = conjugate_gradient(A, b, rtol=1e-12)
    assert res <= 1e-12
    assert np.allclose(A @ x, b)


def test_resistance_rejects_radius_zero():
    with pytest.raises(ValueError):
        effective_resistance(path_graph(3), 0, 0)


def test_growth_fit_controls():
    r = np.arange(1, 20)
    fit = growth_fit(r, 2.0**r)
    assert fit.a == pytest.approx(2.0) and fit.quality == pytest.approx(1.0) and fit.c == pytest.approx(1.0)
    quad = growth_fit(r, 2 * r * r + 2 * r + 1)
    assert quad.a < growth_fit(np.arange(1, 80), 2 * np.arange(1, 80) ** 2).a * 1.5
    with pytest.raises(AnalysisError):
        growth_fit([1, 2, 3], [1, 2, 4])


def test_grid_growth_decreases_with_size():
    a = []
    for n in (41, 121):
        g = grid_graph(n, n)
        c = grid_vertex(n, n // 2, n // 2)
        d = g.distances_from(c)
        R = n // 2 - 2
        a.append(growth_fit(range(1, R + 1), [(d <= r).sum() for r in range(1, R + 1)]).a)
    assert a[1] < a[0]


def test_nash_williams(gamma8):
    nw = nash_williams(gamma8)
    assert set(nw.cutset_sizes) == {8}
    assert all(nw.separating) and nw.disjoint
    assert nw.partial_sums == pytest.approx([(m + 1) / 8 for m in range(8)])
    assert nw.increment == pytest.approx(1 / 8)
    vals = [nw.truncated_sum(r) for r in range(1, 15)]
    assert vals == sorted(vals)


def test_resistance_series_on_gamma(gamma8):
    tr = int(gamma8.graph.trusted_radius(gamma8.w0))
    res = resistance_series(gamma8, range(1, tr + 1))
    assert res.strictly_increasing()
    assert res.dominates_nash_williams()
    assert res.increments_not_decaying()


def test_increment_criterion_controls():
    path = ResistanceSeries(list(range(1, 20)), [float(r) for r in range(1, 20)], [0.0] * 19)
    assert path.increments_not_decaying()
    tree = ResistanceSeries(list(range(1, 12)), [t3_resistance(d) for d in range(1, 12)], [0.0] * 11)
    assert tree.strictly_increasing() and not tree.increments_not_decaying()


def test_walk_controls():
    est = random_walk_return(digon(), 0, 2, 1000, seed=1)
    assert est.frequency == 1.0 and est.returned == 1000
    est = random_walk_return(path_graph(1), 0, 1, 500, seed=1)
    assert est.returned == 0
    est = random_walk_return(cycle_graph(4), 0, 3, 2000, seed=2)
    # returns only at step 2: probability 1/2
    assert est.low <= 0.5 <= est.high


def test_walk_determinism(gamma8):
    a = random_walk_return(gamma8.graph, gamma8.w0, 50, 5000, seed=11)
    b = random_walk_return(gamma8.graph, gamma8.w0, 50, 5000, seed=11)
    c = random_walk_return(gamma8.graph, gamma8.w0, 50, 5000, seed=12)
    assert a == b and a != c


def test_walk_returns_grow_with_horizon(gamma8):
    f = [random_walk_return(gamma8.graph, gamma8.w0, h, 8000, seed=5).frequency for h in (10, 100, 1000)]
    assert f[0] < f[1] < f[2]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_interval(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_ball_stats_shifted_counts(gamma8):
    st_ = ball_stats(gamma8.graph, gamma8.w0)
    assert st_.shifted_count_violations(3) == []
    t = st_.trusted()
    assert len(t.radii) == st_.trusted_radius + 1


def test_choose_s():
    tree = build_pruned_tree(8)
    ch = choose_s(tree, 8, range(1, 7))
    assert ch.s == 2 and ch.epsilon > 0
    assert ch.margins[1] <= 0
    with pytest.raises(ChooseSError) as err:
        choose_s(tree, 8, range(1, 3), epsilon_target=10.0)
    assert set(err.value.margins) == {1, 2}


def test_mean_excess_spread_window(gamma8):
    st_ = ball_stats(gamma8.graph, gamma8.w0)
    assert mean_excess_spread(st_, 1) == 0.0
    assert mean_excess_spread(st_, 4) <= mean_excess_spread(st_, 8)


def test_banded_schedule_mean_excess_settles():
    from linecomplex.gamma import SchedulePolicy, assemble

    gamma = assemble(build_pruned_tree(10), SchedulePolicy.banded(2, 3))
    st_ = ball_stats(gamma.graph, gamma.w0)
    means = [float(m) for m, c in zip(st_.mean_excess, st_.clipped) if not c]
    assert max(means[1:]) < 0
    assert mean_excess_spread(st_) <= 0.02
