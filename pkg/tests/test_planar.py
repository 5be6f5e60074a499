from __future__ import annotations

from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linecomplex.planar import (
    CIRCLE,
    CROSS,
    EmbeddedGraph,
    StructuralError,
    check_structure,
    combinatorial_ball,
    cycle_graph,
    digon,
    grid_graph,
    grid_vertex,
    path_graph,
    trace_faces,
)


def brute_faces(rotations):
    """Reference face tracer on plain lists: next(h) = rotation predecessor of twin(h)."""
    where = {}
    for v, rot in enumerate(rotations):
        for i, h in enumerate(rot):
            where[h] = (v, i)
    cycles, seen = [], set()
    for start in sorted(where):
        if start in seen:
            continue
        cyc, h = [], start
        while h not in seen:
            seen.add(h)
            cyc.append(h)
            v, i = where[h ^ 1]
            h = rotations[v][(i - 1) % len(rotations[v])]
        cycles.append(cyc)
    return cycles


def test_digon_faces():
    g = digon()
    faces = trace_faces(g)
    assert len(faces) == 2
    assert [f.size for f in faces] == [2, 2]
    assert [f.half_degree for f in faces] == [1, 1]
    assert g.euler_characteristic() == 2


def test_square_faces_and_euler():
    g = cycle_graph(4)
    assert sorted(f.half_degree for f in g.faces) == [2, 2]
    assert g.n_vertices - g.n_edges + len(g.faces) == 2


def test_grid_faces_match_reference_tracer():
    g = grid_graph(6, 6)
    ref = brute_faces(g.rotations())
    ours = sorted(sorted(f.boundary) for f in g.faces)
    assert ours == sorted(sorted(c) for c in ref)
    interior = [f for f in g.faces if not f.touches_truncation_boundary]
    outer = [f for f in g.faces if f.touches_truncation_boundary]
    assert len(interior) == 25 and all(f.half_degree == 2 for f in interior)
    assert len(outer) == 1 and outer[0].size == 20
    assert g.euler_characteristic() == 2


def test_faces_partition_half_edges():
    g = grid_graph(5, 4)
    assert int(g.face_size.sum()) == g.n_half_edges
    assert sorted(h for f in g.faces for h in f.boundary) == list(range(g.n_half_edges))


def test_missing_half_edge_reports_index():
    with pytest.raises(StructuralError) as err:
        EmbeddedGraph([[0, 2], [3, 3]], [CROSS, CIRCLE])
    assert err.value.index == 1
    assert "missing" in str(err.value)


def test_repeated_half_edge_reports_index():
    with pytest.raises(StructuralError) as err:
        EmbeddedGraph([[0, 0], [2, 3]], [CROSS, CIRCLE])
    assert err.value.index == 0
    assert "repeated" in str(err.value)


def test_bipartite_parity_on_grid():
    g = grid_graph(4, 4)
    assert check_structure(g) == []
    h = np.arange(g.n_half_edges)
    assert (g.parity[g.origin[h]] != g.parity[g.origin[h ^ 1]]).all()


def test_ball_radius_zero():
    g = grid_graph(3, 3)
    b = combinatorial_ball(g, 4, 0)
    assert b.vertices.tolist() == [4] and b.distances.tolist() == [0]


def test_ball_on_square():
    b = combinatorial_ball(cycle_graph(4), 0, 1)
    assert len(b.vertices) == 3


def test_ball_clipped_near_boundary():
    g = grid_graph(7, 7)
    c = grid_vertex(7, 3, 3)
    assert g.trusted_radius(c) == 1
    assert not combinatorial_ball(g, c, 1).clipped
    assert combinatorial_ball(g, c, 2).clipped


def bfs(adj, s):
    dist = {s: 0}
    q = deque([s])
    while q:
        x = q.popleft()
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def test_ball_counts_match_independent_bfs(gamma8):
    g = gamma8.graph
    adj = [g.neighbors(v) for v in range(g.n_vertices)]
    ref = bfs(adj, gamma8.w0)
    b = combinatorial_ball(g, gamma8.w0, 5)
    assert len(b.vertices) == sum(1 for d in ref.values() if d <= 5)
    assert b.as_dict() == {v: d for v, d in ref.items() if d <= 5}


def test_path_graph_shape():
    g = path_graph(3)
    assert g.n_vertices == 4 and g.n_edges == 3 and len(g.faces) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.data())
def test_ball_monotone_and_triangle(nx, ny, data):
    g = grid_graph(nx, ny)
    n = g.n_vertices
    u, v, w = (data.draw(st.integers(0, n - 1)) for _ in range(3))
    du, dv = g.distances_from(u), g.distances_from(v)
    assert du[w] <= du[v] + dv[w]
    r = data.draw(st.integers(0, nx + ny))
    small = set(combinatorial_ball(g, u, r).vertices.tolist())
    big = set(combinatorial_ball(g, u, r + 1).vertices.tolist())
    assert small <= big


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8))
def test_grid_euler(nx, ny):
    g = grid_graph(nx, ny)
    assert g.euler_characteristic() == 2
    assert (g.n_vertices, g.n_edges) == (nx * ny, (nx - 1) * ny + nx * (ny - 1))
