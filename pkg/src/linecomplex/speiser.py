"""Excess, mean excess and validity checks for truncated Speiser graphs.

Everything here is exact: excess values are :class:`fractions.Fraction` and
ball totals are integer numerators over a shared denominator.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from .planar import CROSS, EmbeddedGraph


class UntrustedVertexError(ValueError):
    """Raised for a vertex whose incident faces touch the truncation boundary."""


def face_deficit(k) -> Fraction:
    """``1 - 1/k`` with ``k = inf`` giving 1."""
    if k == math.inf:
        return Fraction(1)
    return 1 - Fraction(1) / Fraction(k)


def excess_from_profile(half_degrees) -> Fraction:
    """Excess of a vertex whose corners see faces of the given half-degrees."""
    return 2 - sum((face_deficit(k) for k in half_degrees), Fraction(0))


def corner_profile(g: EmbeddedGraph, v: int) -> tuple:
    """Half-degrees of the faces at ``v``, one per corner, in rotation order."""
    return tuple(g.faces[g.face_of[h]].half_degree for h in g.rotation(v))


def is_trusted(g: EmbeddedGraph, v: int) -> bool:
    return not any(g.face_touches_boundary[g.face_of[h]] for h in g.rotation(v))


def excess(g: EmbeddedGraph, v: int) -> Fraction:
    if not is_trusted(g, v):
        raise UntrustedVertexError(f"vertex {v} touches the truncation boundary")
    return excess_from_profile(corner_profile(g, v))


@dataclass(frozen=True)
class ExcessTable:
    """Excess of every vertex as ``numerator / denominator``.

    Untrusted vertices carry ``trusted = False`` and a meaningless numerator.
    """

    numerator: np.ndarray
    denominator: int
    trusted: np.ndarray

    def value(self, v: int) -> Fraction:
        if not self.trusted[v]:
            raise UntrustedVertexError(f"vertex {v} touches the truncation boundary")
        return Fraction(int(self.numerator[v]), self.denominator)

    @property
    def sign(self) -> np.ndarray:
        return np.sign(self.numerator)


def excess_table(g: EmbeddedGraph) -> ExcessTable:
    cache = g.__dict__.get("_excess_table")
    if cache is not None:
        return cache
    half = [f.half_degree for f in g.faces]
    finite = {int(k) for k in half if k != math.inf}
    if any(k != int(k) for k in finite):
        raise ValueError("graph has odd faces; excess needs even boundaries")
    den = reduce(math.lcm, finite, 1)
    # deficit of each face in units of 1/den
    face_def = np.array(
        [den if k == math.inf else den - den // int(k) for k in half], dtype=np.int64
    )
    corner = face_def[g.face_of[g.rot_half]]
    sums = np.zeros(g.n_vertices, dtype=np.int64)
    nonempty = np.diff(g.rot_ptr) > 0
    if corner.size:
        sums[nonempty] = np.add.reduceat(corner, g.rot_ptr[:-1][nonempty])
    num = 2 * den - sums
    bad_corner = g.face_touches_boundary[g.face_of[g.rot_half]].astype(np.int64)
    bad = np.zeros(g.n_vertices, dtype=np.int64)
    if corner.size:
        bad[nonempty] = np.add.reduceat(bad_corner, g.rot_ptr[:-1][nonempty])
    table = ExcessTable(num, den, bad == 0)
    g.__dict__["_excess_table"] = table
    return table


# -- validity ------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    location: int
    detail: str


@dataclass
class ValidityReport:
    q: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def validate_speiser(g: EmbeddedGraph, q: int) -> ValidityReport:
    """Check connectivity, q-regularity away from the truncation, bipartiteness."""
    report = ValidityReport(q)
    if not g.is_connected():
        report.violations.append(
            Violation("disconnected", 0, f"{g.n_components()} components")
        )
    boundary = g.boundary_vertices
    for v in np.flatnonzero(g.degree != q):
        if int(v) not in boundary:
            report.violations.append(
                Violation("degree", int(v), f"degree {int(g.degree[v])} != {q}")
            )
    tail = g.origin[0::2]
    head = g.origin[1::2]
    for e in np.flatnonzero(g.parity[tail] == g.parity[head]):
        report.violations.append(
            Violation("bipartite", int(e), f"edge {int(tail[e])}-{int(head[e])} joins equal marks")
        )
    return report


# -- face labelling ---------------------------------------------------------------


@dataclass(frozen=True)
class LabelConflict:
    vertex: int
    half_edge: int
    face: int
    existing: int
    required: int


@dataclass
class FaceLabeling:
    q: int
    labels: dict[int, int]
    unlabeled: set[int]
    conflict: LabelConflict | None = None

    @property
    def ok(self) -> bool:
        return self.conflict is None and not self.unlabeled


def _step(label: int, delta: int, q: int) -> int:
    return (label - 1 + delta) % q + 1


def label_faces(
    g: EmbeddedGraph,
    q: int,
    seed_face: int | None = None,
    forced: dict[int, int] | None = None,
) -> FaceLabeling:
    """Label interior faces by ``1..q`` so labels rise counter-clockwise at
    cross vertices and fall at circle vertices.

    Labels propagate across edges from one seed face; ``forced`` pins labels
    in advance and any disagreement is returned as a conflict.
    """
    interior = [f.index for f in g.faces if not f.touches_truncation_boundary]
    interior_set = set(interior)
    labels: dict[int, int] = dict(forced or {})
    if seed_face is None:
        seed_face = interior[0] if interior else None
    if seed_face is None:
        return FaceLabeling(q, {}, set())
    labels.setdefault(seed_face, 1)
    queue = deque([seed_face])
    visited = {seed_face}
    while queue:
        f = queue.popleft()
        for h in g.faces[f].boundary:
            other = int(g.face_of[h ^ 1])
            if other not in interior_set:
                continue
            # f is left of h; going counter-clockwise at origin(h) the face
            # right of h precedes f
            delta = -1 if g.parity[g.origin[h]] == CROSS else 1
            want = _step(labels[f], delta, q)
            have = labels.get(other)
            if have is not None and have != want:
                return FaceLabeling(
                    q,
                    labels,
                    interior_set - set(labels),
                    LabelConflict(int(g.origin[h]), int(h), other, have, want),
                )
            labels[other] = want
            if other not in visited:
                visited.add(other)
                queue.append(other)
    return FaceLabeling(q, labels, interior_set - visited)


def check_labeling(g: EmbeddedGraph, labeling: FaceLabeling) -> list[int]:
    """Vertices where the cyclic condition fails among labelled corners."""
    bad = []
    lab = labeling.labels
    q = labeling.q
    for v in range(g.n_vertices):
        rot = g.rotation(v)
        fs = [int(g.face_of[h]) for h in rot]
        if any(f not in lab for f in fs):
            continue
        step = 1 if g.parity[v] == CROSS else -1
        n = len(fs)
        for i in range(n):
            # corner i lies between rot[i] and rot[i+1]; the next corner
            # counter-clockwise is i+1
            if _step(lab[fs[i]], step, q) != lab[fs[(i + 1) % n]]:
                bad.append(v)
                break
    return bad


# -- radial statistics --------------------------------------------------------------


@dataclass(frozen=True)
class RadialCounts:
    """Per-radius excess bookkeeping around ``w0`` (integer numerators)."""

    w0: int
    radii: np.ndarray
    n_vertices: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    n_zero: np.ndarray
    total_numerator: np.ndarray
    denominator: int
    clipped: np.ndarray
    trusted_radius: int


def radial_counts(g: EmbeddedGraph, w0: int, r_max: int) -> RadialCounts:
    table = excess_table(g)
    d = g.distances_from(w0)
    trusted_r = int(min(g.trusted_radius(w0), r_max + 1))
    radii = np.arange(r_max + 1)
    reach = d >= 0
    dist = d[reach]
    num = table.numerator[reach]
    ok = table.trusted[reach]
    width = max(r_max + 1, int(dist.max()) + 1 if dist.size else 1)

    def cum(weights):
        return np.cumsum(np.bincount(dist, weights=weights, minlength=width))[: r_max + 1]

    n_all = cum(np.ones_like(dist, dtype=np.float64)).astype(np.int64)
    n_plus = cum((num > 0) & ok).astype(np.int64)
    n_minus = cum((num < 0) & ok).astype(np.int64)
    n_zero = cum((num == 0) & ok).astype(np.int64)
    # integer cumulative sums; float bincount would lose exactness
    order = np.argsort(dist, kind="stable")
    sd = dist[order]
    sn = np.where(ok, num, 0)[order]
    cs = np.concatenate([[0], np.cumsum(sn)])
    ends = np.searchsorted(sd, radii, side="right")
    total = cs[ends]
    clipped = radii > trusted_r
    return RadialCounts(
        w0, radii, n_all, n_plus, n_minus, n_zero, total, table.denominator, clipped, trusted_r
    )


@dataclass
class MeanExcessSeries:
    w0: int
    radii: list[int]
    n_vertices: list[int]
    totals: list[Fraction | None]
    means: list[Fraction | None]
    clipped: list[bool]
    window: int
    limsup_estimate: Fraction | None
    liminf_estimate: Fraction | None

    def trusted_means(self) -> list[Fraction]:
        return [m for m, c in zip(self.means, self.clipped) if not c]

    def rows(self) -> list[dict]:
        out = []
        for r, n, t, m, c in zip(self.radii, self.n_vertices, self.totals, self.means, self.clipped):
            out.append(
                {
                    "r": r,
                    "n_vertices": n,
                    "total_excess_num": "" if t is None else t.numerator,
                    "total_excess_den": "" if t is None else t.denominator,
                    "mean_excess": "" if m is None else f"{float(m):.12g}",
                    "clipped": int(c),
                }
            )
        return out


def tail_window(n_trusted: int, window: int | None) -> int:
    if window is None:
        return max(1, (n_trusted + 1) // 2)
    return max(1, min(window, n_trusted))


def mean_excess_series(
    g: EmbeddedGraph, w0: int, r_max: int, window: int | None = None
) -> MeanExcessSeries:
    rc = radial_counts(g, w0, r_max)
    totals: list[Fraction | None] = []
    means: list[Fraction | None] = []
    for i in range(len(rc.radii)):
        if rc.clipped[i]:
            totals.append(None)
            means.append(None)
            continue
        t = Fraction(int(rc.total_numerator[i]), rc.denominator)
        totals.append(t)
        means.append(t / int(rc.n_vertices[i]))
    trusted = [m for m in means if m is not None]
    w = tail_window(len(trusted), window)
    tail = trusted[-w:]
    return MeanExcessSeries(
        w0,
        rc.radii.tolist(),
        rc.n_vertices.tolist(),
        totals,
        means,
        rc.clipped.tolist(),
        w,
        max(tail) if tail else None,
        min(tail) if tail else None,
    )
