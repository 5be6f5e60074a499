from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from linecomplex.analysis import ball_stats, sigma_check
from linecomplex.gamma import (
    GadgetError,
    SchedulePolicy,
    SigmaError,
    assemble,
    check_contract,
    faces_on_two_gon,
    leaf_gadget,
    pants_gadget,
    pasting_circles_disjoint,
    sigma,
    sign_pattern,
)
from linecomplex.planar import CROSS
from linecomplex.speiser import corner_profile, excess_from_profile, excess_table
from linecomplex.tree import build_pruned_tree


def interior_sizes(g):
    return sorted({int(k) for k in g.face_size[~g.face_touches_boundary]})


def piece_chi(piece):
    g = piece.graph
    return g.n_vertices - g.n_edges + int((~g.face_touches_boundary).sum())


@pytest.mark.parametrize("s", [1, 2, 3, 5])
def test_leaf_gadget_contract(s):
    p = leaf_gadget(s, 8)
    g = p.graph
    assert p.n_vertices == 8 * (s + 1)
    assert p.n_two_gons == 2
    assert interior_sizes(g) == [2, 4]
    assert piece_chi(p) == 1
    deg = g.degree
    outer = list(p.outer)
    assert (deg[outer] == 3).all()
    rest = np.setdiff1d(np.arange(p.n_vertices), outer)
    assert (deg[rest] == 4).all()
    # the 2-gons sit s steps from the boundary circle
    d = np.min([g.distances_from(v) for v in outer], axis=0)
    assert set(d[faces_on_two_gon(g)].tolist()) == {s}


def test_leaf_gadget_small_L():
    p = leaf_gadget(2, 4)
    # with L = 4 the closing chord doubles a circle edge too
    assert p.n_two_gons == 2 and piece_chi(p) == 1


def test_pants_gadget_contract():
    p = pants_gadget(8)
    g = p.graph
    assert p.n_two_gons == 0
    assert interior_sizes(g) == [4, 6]
    assert piece_chi(p) == -1
    assert len(p.inners) == 2 and p.n_vertices == 24


@pytest.mark.parametrize("L", [2, 6, 12])
def test_bad_lengths(L):
    with pytest.raises(GadgetError):
        leaf_gadget(2, L)


def test_leaf_needs_positive_s():
    with pytest.raises((GadgetError, ValueError)):
        leaf_gadget(0, 8)


def test_assemble_n1():
    gamma = assemble(build_pruned_tree(1), SchedulePolicy.constant(3))
    assert check_contract(gamma).ok


def test_contract_gamma8(gamma8):
    rep = check_contract(gamma8)
    assert rep.ok, rep.failures()
    assert interior_sizes(gamma8.graph) == [2, 4, 6]


def test_pasting_circles(gamma8):
    assert pasting_circles_disjoint(gamma8)
    for c in gamma8.ray_circles:
        assert len(c) == gamma8.L


def test_sign_pattern(gamma8):
    pat = sign_pattern(gamma8)
    assert pat == {"positive_off_two_gon": [], "pants_without_negative": []}


def test_realized_profiles_on_two_gons(gamma8):
    g = gamma8.graph
    t = excess_table(g)
    on2 = np.flatnonzero(faces_on_two_gon(g) & t.trusted)
    profiles = {tuple(sorted(corner_profile(g, int(v)))) for v in on2}
    assert all(excess_from_profile(p) > 0 for p in profiles)
    assert (1, 2, 2, 2) in profiles


def test_pants_have_minus_one_third(gamma8):
    g = gamma8.graph
    t = excess_table(g)
    pants = set(gamma8.pieces_of_kind("pants"))
    vals = {t.value(v) for v in range(g.n_vertices) if t.trusted[v] and int(gamma8.owner[v]) in pants}
    assert Fraction(-1, 3) in vals and max(vals) <= 0


def test_sigma(gamma8):
    stats = ball_stats(gamma8.graph, gamma8.w0)
    rep = sigma_check(gamma8, stats)
    assert rep.domain and rep.injective and rep.distances_match
    assert set(rep.distances) == {3}
    with pytest.raises(SigmaError):
        sigma(gamma8, gamma8.w0)


def test_basepoint(gamma8):
    t = excess_table(gamma8.graph)
    assert t.value(gamma8.w0) == Fraction(-1, 6)
    assert gamma8.owner[gamma8.w0] == gamma8.tree.ray[1]


def test_zero_excess_bounded_by_negative(gamma8):
    st = ball_stats(gamma8.graph, gamma8.w0).trusted()
    z = st.zero_ratio()[1:]
    tail = z[len(z) // 2:]
    assert z.max() < 4
    assert tail.max() / tail.min() <= 1.5


def test_banded_schedule():
    t = build_pruned_tree(6)
    pol = SchedulePolicy.banded(2, 3)
    gamma = assemble(t, pol)
    assert check_contract(gamma).ok
    leaves = gamma.pieces_of_kind("leaf")
    assert {int(gamma.piece_s[u]) for u in leaves} == {2, 3, 4}
    rep = sigma_check(gamma, ball_stats(gamma.graph, gamma.w0))
    assert rep.injective and rep.distances_match


def test_schedule_json_roundtrip():
    for pol in (SchedulePolicy.constant(4), SchedulePolicy.banded(2, 5)):
        assert SchedulePolicy.from_json(pol.to_json()) == pol
    with pytest.raises(ValueError):
        SchedulePolicy.from_json({"linear": 3})
    with pytest.raises(ValueError):
        SchedulePolicy.constant(0)


def test_parity_alternates_on_circles(gamma8):
    g = gamma8.graph
    for c in gamma8.ray_circles:
        assert [int(x) for x in g.parity[c]] == [(i % 2) ^ int(g.parity[c[0]] != CROSS) for i in range(len(c))]


def test_assemble_L4():
    gamma = assemble(build_pruned_tree(5), SchedulePolicy.constant(3), L=4)
    assert check_contract(gamma).ok
    assert sign_pattern(gamma) == {"positive_off_two_gon": [], "pants_without_negative": []}
    rep = sigma_check(gamma, ball_stats(gamma.graph, gamma.w0))
    assert rep.injective and rep.distances_match
