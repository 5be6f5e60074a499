"""Gadget pieces S(v) and their assembly into the Speiser graph Gamma.

Every boundary circle has ``L`` vertices indexed counter-clockwise in the
plane, vertex ``i`` carrying mark ``i % 2``.  A circle vertex has four
rotation slots ``OUT, NEXT, IN, PREV`` (away from the circle centre, to
``i+1``, towards the centre, to ``i-1``); a piece fills only the slots on its
own side of each boundary circle, so pasting a child's outer circle onto a
parent's inner circle simply merges two half-filled rotations.

Leaf piece, ``s`` circles inside its boundary circle ``C_0``::

    C_0 .. C_s joined by radial edges i -> i (quadrilateral bands); on C_s,
    in each block (p, p+1, p+2, p+3) with p = 1 mod 4 the edge p+1 -- p+2 is
    doubled (a 2-gon) and a chord p -- p+3 closes a 4-gon.

Pants piece, outer circle ``O`` and inner circles ``A`` (first child) and
``B`` (second child), no interior vertices::

    o[L/4 + t]  -- a[L/4 + 1 + t]     t < L/2
    o[3L/4 + t] -- b[3L/4 + 1 + t]    t < L/2
    a[L/4 - t]  -- b[L/4 + 1 + t]     t < L/2

which leaves quadrilaterals between parallel edges and two hexagons where the
three circles meet.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .planar import EmbeddedGraph, _from_edge_slots
from .speiser import excess_table, label_faces, validate_speiser
from .tree import PrunedTree

OUT, NEXT_OUT, NEXT, NEXT_IN, IN, PREV_IN, PREV, PREV_OUT = range(8)

SUPPORTED_L = (4, 8)


class GadgetError(ValueError):
    pass


class AssemblyError(ValueError):
    pass


def _check_length(L: int) -> None:
    if L % 2 or L < 4:
        raise GadgetError(f"boundary length L={L} must be even and at least 4")
    if L % 4:
        raise GadgetError(f"L={L}: the pants matching needs L divisible by 4 to stay bipartite")
    if L not in SUPPORTED_L:
        raise GadgetError(
            f"L={L}: leaf cores beyond 8 either exceed hexagons or outnumber "
            f"the negative vertices on the parent circle; use one of {SUPPORTED_L}"
        )


@dataclass(frozen=True)
class GadgetPiece:
    """A standalone piece with its boundary circles.

    ``edges`` rows are ``(u, slot_u, v, slot_v)`` in local vertex ids.
    ``circle_edges[c][i]`` is the row of the edge from circle vertex ``i`` to
    ``i + 1`` on circle ``c`` (0 = outer, 1.. = inner).
    """

    kind: str
    L: int
    s: int | None
    n_vertices: int
    parity: tuple[int, ...]
    edges: tuple[tuple[int, int, int, int], ...]
    outer: tuple[int, ...]
    inners: tuple[tuple[int, ...], ...]
    circle_edges: tuple[tuple[int, ...], ...]
    ring: tuple[int, ...]
    owner: int | None = None

    @cached_property
    def graph(self) -> EmbeddedGraph:
        """The piece on its own, with every boundary-circle face marked."""
        g = _from_edge_slots(self.n_vertices, self.parity, self.edges)
        marks = []
        # outside the outer circle lies left of i+1 -> i; inside an inner
        # circle lies left of i -> i+1
        holes = [2 * self.circle_edges[0][0] + 1] + [2 * ce[0] for ce in self.circle_edges[1:]]
        for h in holes:
            marks.extend(g.faces[g.face_of[h]].boundary)
        return g.with_boundary_marks(marks)

    @property
    def n_two_gons(self) -> int:
        return int((self.graph.face_size == 2).sum())


def _circle(edges, ids, L, skip=()):
    rows = []
    for i in range(L):
        if i in skip:
            rows.append(None)
            continue
        rows.append(len(edges))
        edges.append((ids[i], NEXT, ids[(i + 1) % L], PREV))
    return rows


def leaf_gadget(s: int, L: int = 8) -> GadgetPiece:
    if s < 1:
        raise GadgetError("a leaf piece needs at least one circle inside its boundary")
    _check_length(L)
    circles = [[j * L + i for i in range(L)] for j in range(s + 1)]
    parity = tuple((i + j) % 2 for j in range(s + 1) for i in range(L))
    ring = tuple(j for j in range(s + 1) for _ in range(L))
    edges: list[tuple[int, int, int, int]] = []
    doubled = {(4 * b + 2) % L for b in range(L // 4)}
    circle_rows = []
    for j, ids in enumerate(circles):
        circle_rows.append(_circle(edges, ids, L, skip=doubled if j == s else ()))
    for j in range(s):
        for i in range(L):
            edges.append((circles[j][i], IN, circles[j + 1][i], OUT))
    core = circles[s]
    for b in range(L // 4):
        p = 4 * b + 1
        u, v = core[(p + 1) % L], core[(p + 2) % L]
        edges.append((u, NEXT_OUT, v, PREV_OUT))
        edges.append((u, NEXT_IN, v, PREV_IN))
        edges.append((core[p % L], IN, core[(p + 3) % L], IN))
    return GadgetPiece(
        "leaf",
        L,
        s,
        (s + 1) * L,
        parity,
        tuple(edges),
        tuple(circles[0]),
        (),
        (tuple(circle_rows[0]),),
        ring,
    )


def pants_gadget(L: int = 8) -> GadgetPiece:
    _check_length(L)
    o = list(range(L))
    a = list(range(L, 2 * L))
    b = list(range(2 * L, 3 * L))
    parity = tuple(i % 2 for _ in range(3) for i in range(L))
    edges: list[tuple[int, int, int, int]] = []
    rows = [_circle(edges, c, L) for c in (o, a, b)]
    q1, q3, half = L // 4, 3 * L // 4, L // 2
    for t in range(half):
        edges.append((o[(q1 + t) % L], IN, a[(q1 + 1 + t) % L], OUT))
    for t in range(half):
        edges.append((o[(q3 + t) % L], IN, b[(q3 + 1 + t) % L], OUT))
    for t in range(half):
        edges.append((a[(q1 - t) % L], OUT, b[(q1 + 1 + t) % L], OUT))
    return GadgetPiece(
        "pants",
        L,
        None,
        3 * L,
        parity,
        tuple(edges),
        tuple(o),
        (tuple(a), tuple(b)),
        tuple(tuple(r) for r in rows),
        tuple([-1] * (3 * L)),
    )


# -- schedules -------------------------------------------------------------------


@dataclass(frozen=True)
class SchedulePolicy:
    """Number of leaf circles per tree vertex.

    ``constant``: s everywhere.  ``banded``: s0 + (k // band) for a leaf
    hanging from ray vertex v_k, so s grows slowly along the ray.
    """

    mode: str = "constant"
    s0: int = 3
    band: int = 1

    def __post_init__(self):
        if self.mode not in ("constant", "banded"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.s0 < 1:
            raise ValueError("schedule must give s >= 1")
        if self.band < 1:
            raise ValueError("band width must be positive")

    @classmethod
    def constant(cls, s: int) -> "SchedulePolicy":
        return cls("constant", s, 1)

    @classmethod
    def banded(cls, s0: int, band: int) -> "SchedulePolicy":
        return cls("banded", s0, band)

    @classmethod
    def from_json(cls, obj: dict) -> "SchedulePolicy":
        if "constant" in obj:
            return cls.constant(int(obj["constant"]))
        if "banded" in obj:
            s0, band = obj["banded"]
            return cls.banded(int(s0), int(band))
        raise ValueError(f"schedule must be {{'constant': s}} or {{'banded': [s0, band]}}, got {obj}")

    def to_json(self) -> dict:
        if self.mode == "constant":
            return {"constant": self.s0}
        return {"banded": [self.s0, self.band]}

    def s_for(self, tree: PrunedTree, u: int) -> int:
        if self.mode == "constant":
            return self.s0
        return self.s0 + int(tree.attach[u]) // self.band


# -- assembly ---------------------------------------------------------------------------


@dataclass
class Gamma:
    """A finite truncation of the Speiser graph with its piece bookkeeping."""

    graph: EmbeddedGraph
    tree: PrunedTree
    policy: SchedulePolicy
    L: int
    piece_kind: tuple[str, ...]
    piece_s: np.ndarray
    owner: np.ndarray
    ring: np.ndarray
    outer_circle: tuple[np.ndarray, ...]
    inner_circles: tuple[tuple[np.ndarray, ...], ...]
    slot: np.ndarray
    w0: int = -1
    meta: dict = field(default_factory=dict)

    @property
    def ray_circles(self) -> list[np.ndarray]:
        """Pasting circle between S(v_k) and S(v_{k+1}) for k = 0..N-1."""
        return [self.inner_circles[self.tree.ray[k + 1]][0] for k in range(self.tree.N)]

    def cutset(self, k: int) -> np.ndarray:
        """Edges leaving ray circle k on the parent side."""
        circle = self.ray_circles[k]
        g = self.graph
        hs = [
            h
            for v in circle.tolist()
            for h in g.rotation(v)
            if self.slot[h] == OUT
        ]
        return np.asarray(sorted(h // 2 for h in hs), dtype=np.int64)

    def pieces_of_kind(self, kind: str) -> list[int]:
        return [u for u, k in enumerate(self.piece_kind) if k == kind]

    def owned_by(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.owner == u)

    def config(self) -> dict:
        return {"N": self.tree.N, "L": self.L, "schedule": self.policy.to_json()}


_TEMPLATE_CACHE: dict = {}


def _template(kind: str, s: int | None, L: int):
    key = (kind, s, L)
    if key not in _TEMPLATE_CACHE:
        piece = leaf_gadget(s, L) if kind == "leaf" else pants_gadget(L)
        arr = np.asarray(piece.edges, dtype=np.int64)
        outer_rows = np.asarray([r for r in piece.circle_edges[0] if r is not None], dtype=np.int64)
        keep_nontop = np.ones(len(arr), dtype=bool)
        keep_nontop[outer_rows] = False
        _TEMPLATE_CACHE[key] = (piece, arr, keep_nontop)
    return _TEMPLATE_CACHE[key]


def assemble(tree: PrunedTree, policy: SchedulePolicy, L: int = 8) -> Gamma:
    """Paste one piece per tree vertex, each outer circle into its parent's
    inner circle; the top piece keeps its outer circle as truncation boundary."""
    _check_length(L)
    n_nodes = tree.n_nodes
    kinds: list[str] = []
    s_of = np.zeros(n_nodes, dtype=np.int64)
    outer: list[np.ndarray] = [None] * n_nodes  # type: ignore[list-item]
    inners: list[tuple[np.ndarray, ...]] = [()] * n_nodes
    edge_blocks = []
    parity_blocks = []
    parity_all: list[int] = []
    owner_blocks = []
    ring_blocks = []
    n_global = 0
    top_outer_row = None
    for u in range(n_nodes):
        kids = tree.children[u]
        if len(kids) == 2:
            kind, s = "pants", None
        elif not kids:
            kind, s = "leaf", policy.s_for(tree, u)
        else:
            raise AssemblyError(f"tree vertex {tree.name(u)} has {len(kids)} children")
        piece, arr, keep_nontop = _template(kind, s, L)
        kinds.append(kind)
        s_of[u] = s or 0
        local_to_global = np.full(piece.n_vertices, -1, dtype=np.int64)
        outer_local = np.asarray(piece.outer)
        p = int(tree.parent[u])
        if p >= 0:
            slot_idx = tree.children[p].index(u)
            parent_circle = inners[p][slot_idx]
            par_local = np.asarray(piece.parity)[outer_local]
            if par_local.tolist() != [parity_all[x] for x in parent_circle.tolist()]:
                raise AssemblyError(
                    f"parity mismatch pasting {tree.name(u)} into {tree.name(p)}"
                )
            local_to_global[outer_local] = parent_circle
            rows = arr[keep_nontop]
        else:
            rows = arr
        fresh = np.flatnonzero(local_to_global < 0)
        local_to_global[fresh] = np.arange(n_global, n_global + len(fresh))
        n_global += len(fresh)
        parity_blocks.append(np.asarray(piece.parity, dtype=np.int8)[fresh])
        parity_all.extend(parity_blocks[-1].tolist())
        owner_blocks.append(np.full(len(fresh), u, dtype=np.int64))
        ring_blocks.append(
            np.asarray(piece.ring, dtype=np.int64)[fresh]
            if kind == "leaf"
            else np.full(len(fresh), -1, dtype=np.int64)
        )
        g_rows = rows.copy()
        g_rows[:, 0] = local_to_global[rows[:, 0]]
        g_rows[:, 2] = local_to_global[rows[:, 2]]
        if p < 0:
            top_outer_row = sum(len(b) for b in edge_blocks) + piece.circle_edges[0][0]
        edge_blocks.append(g_rows)
        outer[u] = local_to_global[outer_local]
        inners[u] = tuple(local_to_global[np.asarray(c)] for c in piece.inners)
    edges = np.concatenate(edge_blocks)
    parity = np.concatenate(parity_blocks)
    g0 = _from_edge_slots(n_global, parity, edges)
    outer_face = g0.face_of[2 * top_outer_row + 1]
    marks = g0.faces[outer_face].boundary
    g = g0.with_boundary_marks(marks)
    slot = np.empty(2 * len(edges), dtype=np.int8)
    slot[0::2] = edges[:, 1]
    slot[1::2] = edges[:, 3]
    gamma = Gamma(
        g,
        tree,
        policy,
        L,
        tuple(kinds),
        s_of,
        np.concatenate(owner_blocks),
        np.concatenate(ring_blocks),
        tuple(outer),
        tuple(inners),
        slot,
    )
    gamma.w0 = default_basepoint(gamma)
    return gamma


def default_basepoint(gamma: Gamma) -> int:
    """Smallest-index vertex of S(v_1) with negative excess."""
    table = excess_table(gamma.graph)
    v1 = gamma.tree.ray[1]
    for v in gamma.owned_by(v1).tolist():
        if table.trusted[v] and table.numerator[v] < 0:
            return v
    raise AssemblyError("S(v_1) has no trusted negative-excess vertex")


# -- sigma ------------------------------------------------------------------------------


class SigmaError(LookupError):
    pass


def sigma(gamma: Gamma, w: int) -> tuple[int, int]:
    """Nearest negative-excess vertex to ``w`` (ties to smallest index) and
    its distance."""
    g = gamma.graph
    table = excess_table(g)
    if not table.trusted[w] or table.numerator[w] <= 0:
        raise SigmaError(f"vertex {w} is not a trusted positive-excess vertex")
    dist = {w: 0}
    frontier = [w]
    while frontier:
        hits = [v for v in frontier if table.trusted[v] and table.numerator[v] < 0]
        if hits:
            return min(hits), dist[hits[0]]
        nxt = []
        for x in frontier:
            if not table.trusted[x]:
                raise SigmaError(f"search from {w} reached the truncation boundary")
            for y in g.neighbors(x):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    nxt.append(y)
        frontier = nxt
    raise SigmaError(f"no negative-excess vertex reachable from {w}")


@dataclass
class SigmaReport:
    domain: list[int]
    image: list[int]
    distances: list[int]
    expected: list[int]

    @property
    def injective(self) -> bool:
        return len(set(self.image)) == len(self.image)

    @property
    def distances_match(self) -> bool:
        return self.distances == self.expected


def sigma_map(gamma: Gamma, vertices) -> SigmaReport:
    table = excess_table(gamma.graph)
    dom, img, dst, exp = [], [], [], []
    for w in sorted(int(v) for v in vertices):
        if not table.trusted[w] or table.numerator[w] <= 0:
            continue
        t, d = sigma(gamma, w)
        dom.append(w)
        img.append(t)
        dst.append(d)
        exp.append(int(gamma.piece_s[gamma.owner[w]]))
    return SigmaReport(dom, img, dst, exp)


# -- assembly contract ----------------------------------------------------------------------


@dataclass
class ContractReport:
    checks: dict[str, bool]
    details: dict[str, str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]


def pasting_circles_disjoint(gamma: Gamma) -> bool:
    seen: set[int] = set()
    for c in gamma.ray_circles:
        cs = set(c.tolist())
        if len(cs) != gamma.L or cs & seen:
            return False
        seen |= cs
    return True


def faces_on_two_gon(g: EmbeddedGraph) -> np.ndarray:
    """Boolean mask of vertices incident to a 2-gon."""
    on = np.zeros(g.n_vertices, dtype=bool)
    small = g.face_size[g.face_of] == 2
    on[g.origin[small]] = True
    return on


def sign_pattern(gamma: Gamma, radius_vertices=None) -> dict[str, list[int]]:
    """Exceptions to the sign pattern: positive excess off 2-gons, and pants
    pieces without a negative-excess vertex."""
    g = gamma.graph
    table = excess_table(g)
    on2 = faces_on_two_gon(g)
    verts = np.arange(g.n_vertices) if radius_vertices is None else np.asarray(radius_vertices)
    pos = verts[(table.numerator[verts] > 0) & table.trusted[verts]]
    off = pos[~on2[pos]].tolist()
    neg = table.trusted & (table.numerator < 0)
    has_neg = np.zeros(gamma.tree.n_nodes, dtype=bool)
    has_neg[gamma.owner[neg]] = True
    bare = [u for u in gamma.pieces_of_kind("pants") if not has_neg[u]]
    return {"positive_off_two_gon": off, "pants_without_negative": bare}


def check_contract(gamma: Gamma, q: int = 4) -> ContractReport:
    """Structural checks on an assembled truncation, away from its boundary."""
    g = gamma.graph
    report = validate_speiser(g, q)
    kinds = report.kinds()
    interior = ~g.face_touches_boundary
    sizes = sorted({int(k) for k in np.unique(g.face_size[interior])})
    labeling = label_faces(g, q)
    chi = g.euler_characteristic()
    checks = {
        "connected": "disconnected" not in kinds,
        "bipartite": "bipartite" not in kinds,
        f"degree_{q}": "degree" not in kinds,
        "face_sizes_2_4_6": set(sizes) <= {2, 4, 6},
        f"labeling_q{q}": labeling.ok,
        "euler_characteristic_2": chi == 2,
        "pasting_circles_disjoint": pasting_circles_disjoint(gamma),
    }
    details = {
        "violations": str(len(report.violations)),
        "interior_face_sizes": ",".join(map(str, sizes)),
        "euler_characteristic": str(chi),
        "labeling": "ok" if labeling.ok else (
            f"conflict at vertex {labeling.conflict.vertex}" if labeling.conflict
            else f"{len(labeling.unlabeled)} faces unreached"
        ),
    }
    return ContractReport(checks, details)
