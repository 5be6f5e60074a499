from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linecomplex.planar import EmbeddedGraph, _from_edge_slots, cycle_graph, digon, grid_graph, grid_vertex
from linecomplex.speiser import (
    UntrustedVertexError,
    check_labeling,
    excess,
    excess_from_profile,
    excess_table,
    label_faces,
    mean_excess_series,
    radial_counts,
    validate_speiser,
)

# (face half-degrees at the corners) -> excess, evaluated by hand
HAND_TABLE = {
    (2, 2, 2, 2): Fraction(0),
    (1, 2, 2, 2): Fraction(1, 2),
    (3, 3, 2, 2): Fraction(-1, 3),
    (3, 2, 2, 2): Fraction(-1, 6),
    (1, 3, 3, 3): Fraction(0),
    (1, 2, 1, 2): Fraction(1),
    (3, 3, 3, 3): Fraction(-2, 3),
    (1, 1): Fraction(2),
}


@pytest.mark.parametrize("profile,value", sorted(HAND_TABLE.items()))
def test_excess_hand_table(profile, value):
    assert excess_from_profile(profile) == value


def test_logarithmic_face_deficit():
    assert excess_from_profile((math.inf, 2, 2, 2)) == Fraction(-1, 2)


def test_grid_interior_excess_zero():
    g = grid_graph(5, 5)
    assert excess(g, grid_vertex(5, 2, 2)) == 0
    with pytest.raises(UntrustedVertexError):
        excess(g, grid_vertex(5, 0, 2))


def test_table_matches_pointwise(gamma_small):
    g = gamma_small.graph
    t = excess_table(g)
    for v in range(0, g.n_vertices, 7):
        if t.trusted[v]:
            assert t.value(v) == excess(g, v)
    assert t.denominator % 6 == 0  # the outer truncation face may add a factor
    vals = {t.value(v) for v in range(g.n_vertices) if t.trusted[v]}
    assert vals == {Fraction(1, 2), Fraction(0), Fraction(-1, 6), Fraction(-1, 3)}


def _grid_edges(nx, ny):
    edges = []
    for j in range(ny):
        for i in range(nx):
            if i + 1 < nx:
                edges.append((j * nx + i, 0, j * nx + i + 1, 4))
            if j + 1 < ny:
                edges.append((j * nx + i, 2, (j + 1) * nx + i, 6))
    return edges


def _closed(g):
    """Same embedding without truncation marks (a map on the sphere)."""
    return g.with_boundary_marks(())


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8))
def test_gauss_bonnet_on_closed_grids(nx, ny):
    g = _closed(grid_graph(nx, ny))
    t = excess_table(g)
    assert sum(t.value(v) for v in range(g.n_vertices)) == 4


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_excess_is_local(data):
    nx = ny = 8
    v = grid_vertex(nx, 3, 3)
    edges = _grid_edges(nx, ny)
    # cells (i, j) with lower-left corner in {2,3} x {2,3} touch v
    star = {(i, j) for i in (2, 3) for j in (2, 3)}

    def cells_of(e):
        u, _, w, _ = e
        (ui, uj), (wi, wj) = divmod(u, nx)[::-1], divmod(w, nx)[::-1]
        if uj == wj:
            return {(ui, uj), (ui, uj - 1)}
        return {(ui, uj), (ui - 1, uj)}

    far = [k for k, e in enumerate(edges) if not cells_of(e) & star]
    drop = data.draw(st.sets(st.sampled_from(far), max_size=6))
    parity = [(i + j) % 2 for j in range(ny) for i in range(nx)]
    g0 = _from_edge_slots(nx * ny, parity, edges)
    g1 = _from_edge_slots(nx * ny, parity, [e for k, e in enumerate(edges) if k not in drop])
    assert excess(_closed(g1), v) == excess(_closed(g0), v) == 0


def test_validate_square_and_gamma(gamma_small):
    assert validate_speiser(cycle_graph(4), 2).ok
    assert validate_speiser(gamma_small.graph, 4).ok


def test_validate_reports_diagonal():
    g = grid_graph(4, 4, diagonal=(1, 1))
    rep = validate_speiser(g, 4)
    assert rep.kinds() == {"bipartite", "degree"}
    bad = [v for v in rep.violations if v.kind == "bipartite"]
    assert len(bad) == 1
    e = bad[0].location
    ends = {int(g.origin[2 * e]), int(g.origin[2 * e + 1])}
    assert ends == {grid_vertex(4, 1, 1), grid_vertex(4, 2, 2)}


def test_validate_disconnected():
    g = EmbeddedGraph([[0], [1], [2], [3]], [0, 1, 0, 1])
    assert "disconnected" in validate_speiser(g, 1).kinds()


def test_grid_labeling_is_consistent():
    g = grid_graph(7, 7)
    lab = label_faces(g, 4)
    assert lab.ok
    assert check_labeling(g, lab) == []
    assert set(lab.labels.values()) == {1, 2, 3, 4}


def test_forced_wrong_label_gives_witness():
    g = grid_graph(5, 5)
    lab = label_faces(g, 4)
    f, x = next(iter(sorted(lab.labels.items())[1:]))
    bad = label_faces(g, 4, forced={f: x % 4 + 1})
    assert not bad.ok
    assert bad.conflict is not None
    assert bad.conflict.existing != bad.conflict.required


def test_labeling_determined_by_one_face(gamma_small):
    g = gamma_small.graph
    a = label_faces(g, 4)
    seed = sorted(a.labels)[len(a.labels) // 2]
    b = label_faces(g, 4, seed_face=seed, forced={seed: a.labels[seed]})
    assert a.ok and b.ok and a.labels == b.labels


def test_digon_excess():
    assert excess_table(digon()).value(0) == 2


def test_grid_mean_excess_zero():
    g = grid_graph(11, 11)
    c = grid_vertex(11, 5, 5)
    series = mean_excess_series(g, c, 5)
    assert all(m == 0 for m in series.trusted_means())
    assert series.clipped[-1] and not series.clipped[3]


def test_gamma_mean_excess_at_zero(gamma8):
    series = mean_excess_series(gamma8.graph, gamma8.w0, 3)
    assert series.means[0] == excess(gamma8.graph, gamma8.w0) < 0


def test_radial_counts_exact(gamma8):
    g = gamma8.graph
    rc = radial_counts(g, gamma8.w0, 6)
    t = excess_table(g)
    d = g.distances_from(gamma8.w0)
    for i, r in enumerate(rc.radii.tolist()):
        ball = [v for v in range(g.n_vertices) if 0 <= d[v] <= r]
        assert rc.n_vertices[i] == len(ball)
        assert Fraction(int(rc.total_numerator[i]), rc.denominator) == sum(t.value(v) for v in ball)
        assert rc.n_plus[i] == sum(t.numerator[v] > 0 for v in ball)
        assert rc.n_minus[i] == sum(t.numerator[v] < 0 for v in ball)
