"""Finite embedded planar multigraphs stored as rotation systems.

Half-edges come in twin pairs ``(2e, 2e + 1)``; the rotation at a vertex is
the counter-clockwise cyclic order of the half-edges leaving it.  Faces are
traced with ``phi(h) = sigma^-1(twin(h))`` so every face lies to the left of
its boundary half-edges.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

CROSS = 0
CIRCLE = 1

# half-degree of a logarithmic face; never produced by the builders here
INFINITE = math.inf


class StructuralError(ValueError):
    """A rotation system that does not describe a valid embedded graph."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


@dataclass(frozen=True)
class FaceRecord:
    index: int
    boundary: tuple[int, ...]
    half_degree: float
    touches_truncation_boundary: bool
    label: int | None = None

    @property
    def size(self) -> int:
        return len(self.boundary)


@dataclass(frozen=True)
class Ball:
    """Vertices within combinatorial distance ``radius`` of ``center``."""

    center: int
    radius: int
    vertices: np.ndarray
    distances: np.ndarray
    clipped: bool

    def __len__(self) -> int:
        return len(self.vertices)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.vertices.tolist(), self.distances.tolist()))


class EmbeddedGraph:
    """Immutable embedded graph.

    ``rotations[v]`` lists the half-edges leaving ``v`` in counter-clockwise
    order.  ``parity[v]`` is ``CROSS`` or ``CIRCLE``.  ``boundary_marks`` holds
    the half-edges that bound the truncation (the outer face of a finite
    piece of an infinite graph).
    """

    def __init__(
        self,
        rotations: Sequence[Sequence[int]],
        parity: Sequence[int],
        boundary_marks: Iterable[int] = (),
    ):
        lengths = np.fromiter((len(r) for r in rotations), dtype=np.int64, count=len(rotations))
        ptr = np.zeros(len(rotations) + 1, dtype=np.int64)
        np.cumsum(lengths, out=ptr[1:])
        flat = np.fromiter(
            (h for r in rotations for h in r), dtype=np.int64, count=int(ptr[-1])
        )
        self._init_csr(ptr, flat, np.asarray(parity, dtype=np.int8), boundary_marks)

    @classmethod
    def from_csr(
        cls,
        rot_ptr: np.ndarray,
        rot_half: np.ndarray,
        parity: np.ndarray,
        boundary_marks: Iterable[int] = (),
    ) -> "EmbeddedGraph":
        g = cls.__new__(cls)
        g._init_csr(
            np.asarray(rot_ptr, dtype=np.int64),
            np.asarray(rot_half, dtype=np.int64),
            np.asarray(parity, dtype=np.int8),
            boundary_marks,
        )
        return g

    def _init_csr(self, ptr, flat, parity, boundary_marks) -> None:
        n_half = len(flat)
        if len(parity) != len(ptr) - 1:
            raise StructuralError("parity length does not match vertex count")
        if n_half % 2:
            raise StructuralError("odd number of half-edges", n_half)
        seen = np.zeros(n_half, dtype=np.int64)
        if n_half:
            if flat.min() < 0 or flat.max() >= n_half:
                bad = int(flat[(flat < 0) | (flat >= n_half)][0])
                raise StructuralError("half-edge id out of range", bad)
            np.add.at(seen, flat, 1)
        if (seen != 1).any():
            bad = int(np.flatnonzero(seen != 1)[0])
            what = "missing from every rotation" if seen[bad] == 0 else "repeated in rotations"
            raise StructuralError(f"half-edge {what}", bad)
        origin = np.empty(n_half, dtype=np.int64)
        origin[flat] = np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))
        pos = np.arange(n_half)
        succ = pos + 1
        ends = ptr[1:] - 1
        nonempty = np.diff(ptr) > 0
        succ[ends[nonempty]] = ptr[:-1][nonempty]
        sigma = np.empty(n_half, dtype=np.int64)
        sigma[flat] = flat[succ]
        sigma_inv = np.empty(n_half, dtype=np.int64)
        sigma_inv[sigma] = np.arange(n_half)

        self.rot_ptr = ptr
        self.rot_half = flat
        self.parity = parity
        self.origin = origin
        self.sigma = sigma
        self.sigma_inv = sigma_inv
        marks = frozenset(int(h) for h in boundary_marks)
        for h in marks:
            if not 0 <= h < n_half:
                raise StructuralError("boundary mark out of range", h)
        self.boundary_marks = marks
        for arr in (ptr, flat, parity, origin, sigma, sigma_inv):
            arr.flags.writeable = False

    def with_boundary_marks(self, marks: Iterable[int]) -> "EmbeddedGraph":
        """Same embedding with new truncation marks; reuses traced faces."""
        g = EmbeddedGraph.from_csr(self.rot_ptr, self.rot_half, self.parity, marks)
        if "faces" in self.__dict__:
            m = g.boundary_marks
            g.__dict__["faces"] = [
                FaceRecord(f.index, f.boundary, f.half_degree, any(x in m for x in f.boundary))
                for f in self.faces
            ]
            g.__dict__["face_of"] = self.face_of
        return g

    # -- basic queries -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.rot_ptr) - 1

    @property
    def n_half_edges(self) -> int:
        return len(self.rot_half)

    @property
    def n_edges(self) -> int:
        return len(self.rot_half) // 2

    @staticmethod
    def twin(h: int) -> int:
        return h ^ 1

    def target(self, h: int) -> int:
        return int(self.origin[h ^ 1])

    def rotation(self, v: int) -> tuple[int, ...]:
        return tuple(self.rot_half[self.rot_ptr[v]:self.rot_ptr[v + 1]].tolist())

    def rotations(self) -> list[list[int]]:
        return [self.rot_half[a:b].tolist() for a, b in zip(self.rot_ptr[:-1], self.rot_ptr[1:])]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.rot_ptr)

    def neighbors(self, v: int) -> list[int]:
        """Neighbors in rotation order, repeated for parallel edges."""
        return [int(self.origin[h ^ 1]) for h in self.rotation(v)]

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric adjacency with edge multiplicities (loops count twice)."""
        n = self.n_vertices
        a = sparse.coo_matrix(
            (np.ones(self.n_half_edges), (self.origin, self.origin[np.arange(self.n_half_edges) ^ 1])),
            shape=(n, n),
        ).tocsr()
        a.sum_duplicates()
        return a

    @cached_property
    def boundary_vertices(self) -> frozenset[int]:
        vs = set()
        for h in self.boundary_marks:
            vs.add(int(self.origin[h]))
            vs.add(int(self.origin[h ^ 1]))
        return frozenset(vs)

    # -- faces -----------------------------------------------------------

    @cached_property
    def face_of(self) -> np.ndarray:
        return self._trace()[0]

    @cached_property
    def faces(self) -> list[FaceRecord]:
        return self._trace()[1]

    @cached_property
    def face_size(self) -> np.ndarray:
        return np.array([f.size for f in self.faces], dtype=np.int64)

    @cached_property
    def face_touches_boundary(self) -> np.ndarray:
        return np.array([f.touches_truncation_boundary for f in self.faces], dtype=bool)

    def face_next(self, h: int) -> int:
        return int(self.sigma_inv[h ^ 1])

    def _trace(self):
        n = self.n_half_edges
        nxt = self.sigma_inv[np.arange(n) ^ 1]
        face_of = np.full(n, -1, dtype=np.int64)
        faces: list[FaceRecord] = []
        nxt_l = nxt.tolist()
        face_l = face_of.tolist()
        marks = self.boundary_marks
        for start in range(n):
            if face_l[start] != -1:
                continue
            fid = len(faces)
            cyc = []
            h = start
            while face_l[h] == -1:
                face_l[h] = fid
                cyc.append(h)
                h = nxt_l[h]
            if h != start:
                raise StructuralError("face permutation is not a permutation", h)
            size = len(cyc)
            touches = bool(marks) and any(x in marks for x in cyc)
            # an odd face has no integral half-degree; keep the rational value
            half = size // 2 if size % 2 == 0 else size / 2
            faces.append(FaceRecord(fid, tuple(cyc), half, touches))
        face_of = np.asarray(face_l, dtype=np.int64)
        face_of.flags.writeable = False
        return face_of, faces

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + len(self.faces)

    def n_components(self) -> int:
        return int(csgraph.connected_components(self.adjacency, directed=False)[0])

    def is_connected(self) -> bool:
        return self.n_vertices <= 1 or self.n_components() == 1

    # -- distances ---------------------------------------------------------

    def distances_from(self, w0: int) -> np.ndarray:
        """Graph distances from ``w0``; ``-1`` marks unreachable vertices."""
        cache = self.__dict__.setdefault("_dist_cache", {})
        if w0 not in cache:
            if not 0 <= w0 < self.n_vertices:
                raise IndexError(f"vertex {w0} not in graph")
            d = csgraph.shortest_path(self.adjacency, directed=False, unweighted=True, indices=w0)
            out = np.where(np.isinf(d), -1, d).astype(np.int64)
            out.flags.writeable = False
            cache[w0] = out
        return cache[w0]

    def boundary_distance(self, w0: int) -> float:
        """Distance from ``w0`` to the nearest truncation-boundary vertex."""
        if not self.boundary_vertices:
            return math.inf
        d = self.distances_from(w0)
        ds = [d[v] for v in self.boundary_vertices if d[v] >= 0]
        return float(min(ds)) if ds else math.inf

    def trusted_radius(self, w0: int) -> float:
        """Largest r with B(w0, r + 1) free of truncation-boundary vertices."""
        return self.boundary_distance(w0) - 2

    def __repr__(self) -> str:
        return (
            f"EmbeddedGraph(V={self.n_vertices}, E={self.n_edges}, "
            f"boundary={len(self.boundary_marks)})"
        )


def trace_faces(g: EmbeddedGraph) -> list[FaceRecord]:
    return g.faces


def combinatorial_ball(g: EmbeddedGraph, w0: int, r: int) -> Ball:
    if r < 0:
        raise ValueError("radius must be nonnegative")
    d = g.distances_from(w0)
    inside = (d >= 0) & (d <= r)
    vs = np.flatnonzero(inside)
    clipped = r > g.trusted_radius(w0)
    return Ball(w0, r, vs, d[vs], bool(clipped))


def check_structure(g: EmbeddedGraph) -> list[str]:
    """Invariant violations as human-readable strings (empty when sound)."""
    problems = []
    for h in np.flatnonzero(g.parity[g.origin] == g.parity[g.origin[np.arange(g.n_half_edges) ^ 1]]):
        problems.append(f"half-edge {int(h)} joins two vertices of equal parity")
    if int(g.face_size.sum()) != g.n_half_edges:
        problems.append("faces do not partition the half-edges")
    return problems


# -- small builders used as fixtures and controls ---------------------------


def _from_edge_slots(n: int, parity, edges, boundary_edge_sides=()) -> EmbeddedGraph:
    """Assemble from ``edges = [(u, key_u, v, key_v), ...]``.

    Half-edge ``2e`` leaves ``u`` and ``2e + 1`` leaves ``v``; the rotation at a
    vertex is its half-edges sorted by key.  ``boundary_edge_sides`` lists
    half-edge ids to mark as truncation boundary.
    """
    m = len(edges)
    origin = np.empty(2 * m, dtype=np.int64)
    key = np.empty(2 * m, dtype=np.float64)
    if m:
        arr = np.asarray(edges, dtype=np.float64)
        origin[0::2] = arr[:, 0]
        origin[1::2] = arr[:, 2]
        key[0::2] = arr[:, 1]
        key[1::2] = arr[:, 3]
    order = np.lexsort((key, origin))
    counts = np.bincount(origin, minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return EmbeddedGraph.from_csr(ptr, order, np.asarray(parity), boundary_edge_sides)


def digon() -> EmbeddedGraph:
    """Two vertices joined by two parallel edges."""
    return EmbeddedGraph([[0, 2], [3, 1]], [CROSS, CIRCLE])


def cycle_graph(n: int) -> EmbeddedGraph:
    """Cycle of length ``n`` drawn as a plane polygon (no boundary marks)."""
    edges = [(i, 0, (i + 1) % n, 1) for i in range(n)]
    return _from_edge_slots(n, [i % 2 for i in range(n)], edges)


def path_graph(n_edges: int) -> EmbeddedGraph:
    edges = [(i, 0, i + 1, 1) for i in range(n_edges)]
    return _from_edge_slots(n_edges + 1, [i % 2 for i in range(n_edges + 1)], edges)


def grid_graph(nx: int, ny: int, diagonal: tuple[int, int] | None = None) -> EmbeddedGraph:
    """Planar ``nx`` by ``ny`` square grid with its outer face marked as boundary.

    ``diagonal=(i, j)`` adds the edge (i, j)-(i+1, j+1) inside that cell, which
    breaks bipartiteness.
    """

    def vid(i, j):
        return j * nx + i

    # slot keys follow compass angle: E=0, NE=1, N=2, W=4, SW=5, S=6
    edges = []
    for j in range(ny):
        for i in range(nx):
            if i + 1 < nx:
                edges.append((vid(i, j), 0, vid(i + 1, j), 4))
            if j + 1 < ny:
                edges.append((vid(i, j), 2, vid(i, j + 1), 6))
    if diagonal is not None:
        i, j = diagonal
        edges.append((vid(i, j), 1, vid(i + 1, j + 1), 5))
    parity = [(i + j) % 2 for j in range(ny) for i in range(nx)]
    g = _from_edge_slots(nx * ny, parity, edges)
    # the outer face lies left of the westward bottom-row edge from (1,0)
    bottom = next(k for k, e in enumerate(edges) if e[0] == vid(0, 0) and e[2] == vid(1, 0))
    outer = g.face_of[2 * bottom + 1]
    return g.with_boundary_marks(g.faces[outer].boundary)


def grid_vertex(nx: int, i: int, j: int) -> int:
    return j * nx + i
