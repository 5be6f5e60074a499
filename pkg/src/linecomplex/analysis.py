"""Quantitative type diagnostics: ball statistics, growth, recurrence, choice of s."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .gamma import Gamma, SchedulePolicy, assemble, sigma_map
from .planar import EmbeddedGraph
from .speiser import radial_counts, tail_window
from .tree import PrunedTree


class AnalysisError(RuntimeError):
    pass


# -- ball statistics --------------------------------------------------------------


@dataclass
class BallStats:
    w0: int
    radii: np.ndarray
    n_vertices: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    n_zero: np.ndarray
    total_excess: list[Fraction]
    clipped: np.ndarray
    trusted_radius: int

    @property
    def mean_excess(self) -> list[Fraction]:
        return [t / int(n) for t, n in zip(self.total_excess, self.n_vertices)]

    def trusted(self) -> "BallStats":
        keep = ~self.clipped
        idx = np.flatnonzero(keep)
        return BallStats(
            self.w0,
            self.radii[keep],
            self.n_vertices[keep],
            self.n_plus[keep],
            self.n_minus[keep],
            self.n_zero[keep],
            [self.total_excess[i] for i in idx],
            self.clipped[keep],
            self.trusted_radius,
        )

    def rows(self) -> list[dict]:
        out = []
        for i, r in enumerate(self.radii.tolist()):
            t = self.total_excess[i]
            out.append(
                {
                    "r": r,
                    "n_vertices": int(self.n_vertices[i]),
                    "n_plus": int(self.n_plus[i]),
                    "n_minus": int(self.n_minus[i]),
                    "n_zero": int(self.n_zero[i]),
                    "total_excess_num": t.numerator,
                    "total_excess_den": t.denominator,
                    "mean_excess": f"{float(t / int(self.n_vertices[i])):.12g}",
                    "clipped": int(self.clipped[i]),
                }
            )
        return out

    def shifted_count_violations(self, s: int) -> list[int]:
        """Radii r with n_plus(r + s) > n_minus(r), among trusted radii."""
        bad = []
        n = len(self.radii)
        for i in range(n - s):
            if self.clipped[i + s]:
                break
            if self.n_plus[i + s] > self.n_minus[i]:
                bad.append(int(self.radii[i]))
        return bad

    def excess_margin(self, a: float, r_min: int = 1) -> float:
        """min over trusted r >= r_min of -total_excess(r) / a^r."""
        vals = [
            -float(t) / a ** int(r)
            for r, t, c in zip(self.radii, self.total_excess, self.clipped)
            if r >= r_min and not c
        ]
        if not vals:
            raise AnalysisError("no trusted radius at or above r_min")
        return min(vals)

    def zero_ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.n_minus > 0, self.n_zero / np.maximum(self.n_minus, 1), np.nan)


def ball_stats(g: EmbeddedGraph, w0: int, r_max: int | None = None) -> BallStats:
    if r_max is None:
        r_max = int(g.trusted_radius(w0))
        if r_max < 0:
            raise AnalysisError("truncation too small: no trusted radius around w0")
    rc = radial_counts(g, w0, r_max)
    totals = [Fraction(int(x), rc.denominator) for x in rc.total_numerator]
    return BallStats(
        w0,
        rc.radii,
        rc.n_vertices,
        rc.n_plus,
        rc.n_minus,
        rc.n_zero,
        totals,
        rc.clipped,
        rc.trusted_radius,
    )


# -- growth --------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    a: float
    c: float
    quality: float
    radii: tuple[int, ...]
    intercept: float

    @property
    def exponential(self) -> bool:
        return self.a > 1.0


def growth_fit(radii, counts, min_points: int = 6, tail: int | None = None) -> GrowthFit:
    """Least-squares fit of log(count) against r over the upper half of the
    given radii (at least ``min_points`` of them).

    ``c`` is the largest constant with c a^r <= n_r <= a^r / c on the fitted
    radii.
    """
    radii = np.asarray(radii, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    ok = counts > 0
    radii, counts = radii[ok], counts[ok]
    if len(radii) < min_points:
        raise AnalysisError(f"need at least {min_points} radii with positive counts, got {len(radii)}")
    w = tail if tail is not None else max(min_points, (len(radii) + 1) // 2)
    r = radii[-w:]
    y = np.log(counts[-w:])
    if np.ptp(y) == 0:
        raise AnalysisError("degenerate series: all counts equal")
    slope, intercept = np.polyfit(r, y, 1)
    pred = intercept + slope * r
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    quality = 1.0 - ss_res / ss_tot
    a = float(math.exp(slope))
    ratio = counts[-w:] / a**r
    c = float(min(ratio.min(), (1.0 / ratio).min()))
    return GrowthFit(a, c, quality, tuple(int(x) for x in r), float(intercept))


# -- recurrence -----------------------------------------------------------------------


@dataclass
class NashWilliamsReport:
    cutset_sizes: list[int]
    partial_sums: list[float]
    increment: float
    separating: list[bool]
    disjoint: bool
    inner_radius: list[int] = field(default_factory=list)

    def truncated_sum(self, r: int) -> float:
        """Sum of 1/|cutset| over cutsets whose inner side lies in B(w0, r-1)."""
        return sum(1.0 / n for n, rad in zip(self.cutset_sizes, self.inner_radius) if rad <= r - 1)


def nash_williams(gamma: Gamma, w0: int | None = None) -> NashWilliamsReport:
    g = gamma.graph
    w0 = gamma.w0 if w0 is None else w0
    cuts = [gamma.cutset(k) for k in range(gamma.tree.N)]
    flat = np.concatenate(cuts)
    disjoint = len(np.unique(flat)) == len(flat)
    if not disjoint:
        raise AnalysisError("ray cutsets overlap; assembly is inconsistent")
    target = min(g.boundary_vertices)
    dist = g.distances_from(w0)
    sizes, separating, inner = [], [], []
    tail = g.origin[0::2]
    head = g.origin[1::2]
    for cut in cuts:
        keep = np.ones(g.n_edges, dtype=bool)
        keep[cut] = False
        a = sparse.coo_matrix(
            (np.ones(int(keep.sum())), (tail[keep], head[keep])), shape=(g.n_vertices,) * 2
        )
        _, lab = csgraph.connected_components(a, directed=False)
        comp = lab == lab[w0]
        separating.append(bool(not comp[target]))
        sizes.append(len(cut))
        inner.append(int(dist[comp].max()))
    partial = np.cumsum([1.0 / n for n in sizes]).tolist()
    inc = 1.0 / sizes[0] if len(set(sizes)) == 1 else float("nan")
    return NashWilliamsReport(sizes, partial, inc, separating, disjoint, inner)


def _ball_network(g: EmbeddedGraph, w0: int, r: int):
    d = g.distances_from(w0)
    inside = np.flatnonzero((d >= 0) & (d <= r))
    a = g.adjacency[inside][:, inside].tocsr()
    a.setdiag(0)  # loops carry no current
    a.eliminate_zeros()
    dd = d[inside]
    src = int(np.flatnonzero(inside == w0)[0])
    free = np.flatnonzero((dd < r) & (np.arange(len(inside)) != src))
    return a, src, free


def conjugate_gradient(A, b, rtol: float = 1e-10, maxiter: int | None = None):
    """Jacobi-preconditioned conjugate gradients; returns (x, relative residual, iters)."""
    n = len(b)
    maxiter = maxiter or 10 * n + 100
    diag = A.diagonal()
    m_inv = 1.0 / diag
    x = np.zeros(n)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x, 0.0, 0
    z = m_inv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        ap = A @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if it % 50 == 0:
            r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            true_res = np.linalg.norm(b - A @ x) / bnorm
            if true_res <= rtol:
                return x, float(true_res), it
            r = b - A @ x
        z = m_inv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, float(np.linalg.norm(b - A @ x) / bnorm), maxiter


def _reduced_system(a, src, free):
    deg = np.asarray(a.sum(axis=1)).ravel()
    lap = sparse.diags(deg) - a
    A = lap[free][:, free].tocsr()
    b = np.asarray(a[free][:, [src]].todense()).ravel()
    return A, b


def effective_resistance(
    g: EmbeddedGraph, w0: int, r: int, rtol: float = 1e-10, method: str = "cg"
) -> float:
    """Resistance between ``w0`` and the sphere d = r in the unit-conductance
    network on B(w0, r).  ``method='direct'`` uses a sparse LU solve."""
    if r < 1:
        raise ValueError("radius must be at least 1")
    a, src, free = _ball_network(g, w0, r)
    if len(free):
        A, b = _reduced_system(a, src, free)
        if method == "cg":
            phi_free, res, _ = conjugate_gradient(A, b, rtol=rtol)
            if res > rtol:
                raise AnalysisError(f"CG did not converge: relative residual {res:.3e}")
        elif method == "direct":
            from scipy.sparse.linalg import spsolve

            phi_free = spsolve(A.tocsc(), b)
        else:
            raise ValueError(f"unknown method {method!r}")
    else:
        phi_free = np.zeros(0)
    phi = np.zeros(a.shape[0])
    phi[src] = 1.0
    phi[free] = phi_free
    row = a[src]
    current = float((row.data * (1.0 - phi[row.indices])).sum())
    if current <= 0:
        raise AnalysisError("no current leaves w0; is the sphere of radius r empty?")
    return 1.0 / current


@dataclass
class ResistanceSeries:
    radii: list[int]
    resistance: list[float]
    nw_lower: list[float]

    def relative_increments(self) -> list[float]:
        R = self.resistance
        return [(R[i + 1] - R[i]) / R[i] for i in range(len(R) - 1)]

    def strictly_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.resistance, self.resistance[1:]))

    def dominates_nash_williams(self, slack: float = 1e-12) -> bool:
        return all(R >= lb - slack for R, lb in zip(self.resistance, self.nw_lower))

    def scaled_increments(self) -> list[float]:
        """r^2 times the relative increment from r to r + 1."""
        return [inc * r * r for r, inc in zip(self.radii, self.relative_increments())]

    def increments_not_decaying(self) -> bool:
        """r^2 times the relative increment does not drift to 0: its minimum
        over the upper half of the radii is at least that over the lower half."""
        q = self.scaled_increments()
        if len(q) < 2:
            return False
        half = len(q) // 2
        return min(q[half:]) >= min(q[:half]) > 0


def resistance_series(gamma: Gamma, radii, nw: NashWilliamsReport | None = None) -> ResistanceSeries:
    nw = nw or nash_williams(gamma)
    res = [effective_resistance(gamma.graph, gamma.w0, int(r)) for r in radii]
    return ResistanceSeries([int(r) for r in radii], res, [nw.truncated_sum(int(r)) for r in radii])


# -- random walks -------------------------------------------------------------------------


@dataclass(frozen=True)
class ReturnEstimate:
    horizon: int
    trials: int
    returned: int
    excluded: int
    frequency: float
    low: float
    high: float

    @property
    def radius(self) -> float:
        return (self.high - self.low) / 2


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return min(lo, p), max(hi, p)


def walk_streams(seed: int, n_blocks: int):
    """Independent Philox streams, one per block of trials."""
    base = np.random.Philox(key=seed)
    return [np.random.Generator(base.jumped(b)) for b in range(n_blocks)]


def random_walk_return(
    g: EmbeddedGraph,
    w0: int,
    horizon: int,
    trials: int,
    seed: int = 0,
    trusted_radius: float | None = None,
    block: int = 4096,
) -> ReturnEstimate:
    """Fraction of simple random walks from ``w0`` that come back within
    ``horizon`` steps.  Walks that leave B(w0, trusted_radius) first are
    excluded."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if trusted_radius is None:
        trusted_radius = g.trusted_radius(w0)
    dist = g.distances_from(w0)
    far = (dist > trusted_radius) | (dist < 0)
    ptr, half = g.rot_ptr, g.rot_half
    deg = np.diff(ptr)
    nbr = g.origin[half ^ 1]
    returned = excluded = 0
    n_blocks = -(-trials // block)
    for b, rng in enumerate(walk_streams(seed, n_blocks)):
        m = min(block, trials - b * block)
        pos = np.full(m, w0, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        for _ in range(horizon):
            idx = np.flatnonzero(alive)
            if not idx.size:
                break
            u = rng.random(idx.size)
            step = (u * deg[pos[idx]]).astype(np.int64)
            pos[idx] = nbr[ptr[pos[idx]] + step]
            back = pos[idx] == w0
            out = far[pos[idx]]
            returned += int(back.sum())
            excluded += int((out & ~back).sum())
            alive[idx[back | out]] = False
    n = trials - excluded
    lo, hi = wilson_interval(returned, n)
    return ReturnEstimate(horizon, trials, returned, excluded, returned / n if n else float("nan"), lo, hi)


# -- choice of s ---------------------------------------------------------------------------


@dataclass
class SChoice:
    s: int
    epsilon: float
    a: float
    margins: dict[int, float]
    gamma: Gamma
    stats: BallStats
    fit: GrowthFit


class ChooseSError(AnalysisError):
    def __init__(self, message, margins):
        super().__init__(message)
        self.margins = margins


def excess_negative_everywhere(stats: BallStats) -> bool:
    return all(t < 0 for t, c in zip(stats.total_excess, stats.clipped) if not c)


def evaluate_s(tree: PrunedTree, L: int, s: int):
    gamma = assemble(tree, SchedulePolicy.constant(s), L)
    stats = ball_stats(gamma.graph, gamma.w0)
    ts = stats.trusted()
    fit = growth_fit(ts.radii, ts.n_minus)
    margin = ts.excess_margin(fit.a, r_min=1)
    return gamma, stats, fit, margin


def choose_s(tree: PrunedTree, L: int, s_range, epsilon_target: float = 0.0) -> SChoice:
    """Smallest s with total_excess(r) <= -epsilon_target a^r at every trusted
    r >= 1 and negative mean excess at every trusted radius."""
    s_values = list(s_range)
    if not s_values:
        raise ValueError("s_range is empty")
    margins: dict[int, float] = {}
    for s in s_values:
        gamma, stats, fit, margin = evaluate_s(tree, L, s)
        margins[s] = margin
        if margin > 0 and margin >= epsilon_target and excess_negative_everywhere(stats):
            return SChoice(s, margin, fit.a, margins, gamma, stats, fit)
    best = max(margins, key=margins.get)
    raise ChooseSError(
        f"no s in {s_values} reaches epsilon {epsilon_target}; best margin {margins[best]:.4g} at s={best}",
        margins,
    )


def mean_excess_spread(stats: BallStats, window: int | None = None) -> float:
    """max - min of the mean excess over the tail window of trusted radii."""
    means = [float(m) for m, c in zip(stats.mean_excess, stats.clipped) if not c]
    w = tail_window(len(means), window)
    tail = means[-w:]
    return max(tail) - min(tail)


def sigma_check(gamma: Gamma, stats: BallStats):
    """sigma over positive vertices of the trusted ball."""
    d = gamma.graph.distances_from(stats.w0)
    verts = np.flatnonzero((d >= 0) & (d <= stats.trusted_radius))
    return sigma_map(gamma, verts)
