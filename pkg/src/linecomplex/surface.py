"""The plane with metric |dz|/y on P = {y >= 1} and exp(1 - y)|dz| on Q = {y < 1}.

P is a horoball in the upper half-plane, so distances inside it are
hyperbolic.  w = exp(iz + 1) maps Q isometrically onto the universal cover
of {|w| > 1}, with cover coordinates theta = x and rho = exp(1 - y); the
interface beta = {y = 1} becomes the unit circle.  Everything is measured
from the basepoint a = i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import csgraph

A_POINT = (0.0, 1.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DomainError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


def density(x, y):
    """Conformal factor of the metric."""
    y = np.asarray(y, dtype=np.float64)
    return np.where(y >= 1.0, 1.0 / np.maximum(y, 1e-300), np.exp(1.0 - y)) + 0.0 * np.asarray(x)


def density_P(x, y):
    return 1.0 / np.asarray(y, dtype=np.float64) + 0.0 * np.asarray(x)


def density_Q(x, y):
    return np.exp(1.0 - np.asarray(y, dtype=np.float64)) + 0.0 * np.asarray(x)


def curvature_density(y):
    """Gaussian curvature: -1 on P, 0 on Q."""
    return np.where(np.asarray(y) >= 1.0, -1.0, 0.0)


def to_cover(x, y):
    return np.asarray(x, dtype=np.float64), np.exp(1.0 - np.asarray(y, dtype=np.float64))


def from_cover(theta, rho):
    return np.asarray(theta, dtype=np.float64), 1.0 - np.log(np.asarray(rho, dtype=np.float64))


# -- closed-form distances ---------------------------------------------------------


def hyperbolic_distance(x1, y1, x2, y2):
    """Upper half-plane distance, cosh d = 1 + |z1 - z2|^2 / (2 y1 y2)."""
    x1, y1, x2, y2 = (np.asarray(v, dtype=np.float64) for v in (x1, y1, x2, y2))
    chord = np.hypot(x1 - x2, y1 - y2)
    return 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(y1 * y2)))


def flat_cover_distance(theta1, rho1, theta2, rho2):
    """Distance in the universal cover of the exterior of the unit disk."""
    t1, r1, t2, r2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (theta1, rho1, theta2, rho2))
    )
    if (r1 < 1.0 - 1e-12).any() or (r2 < 1.0 - 1e-12).any():
        raise DomainError("cover points need rho >= 1")
    r1 = np.maximum(r1, 1.0)
    r2 = np.maximum(r2, 1.0)
    dt = np.abs(t1 - t2)
    a1 = np.arccos(1.0 / r1)
    a2 = np.arccos(1.0 / r2)
    visible = dt <= a1 + a2
    chord = np.sqrt(np.maximum(r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * np.cos(np.minimum(dt, math.pi)), 0.0))
    wrap = np.sqrt(r1 * r1 - 1.0) + np.sqrt(r2 * r2 - 1.0) + np.maximum(dt - a1 - a2, 0.0)
    out = np.where(visible, chord, wrap)
    return out if out.ndim else float(out)


def _beta_to_q(t, theta, rho):
    """Cover distance from the interface point (t, 1) to (theta, rho)."""
    dt = np.abs(theta - t)
    alpha = np.arccos(1.0 / rho)
    chord = np.sqrt(np.maximum(rho * rho + 1.0 - 2.0 * rho * np.cos(np.minimum(dt, math.pi)), 0.0))
    wrap = np.sqrt(rho * rho - 1.0) + (dt - alpha)
    return np.where(dt <= alpha, chord, wrap)


def _fpoint(t, xa, rho):
    return 2.0 * np.arcsinh(np.abs(t) / 2.0) + _beta_to_q(t, xa, rho)


def _q_distance(x, y, n_grid: int = 64, n_golden: int = 60):
    """distance_from_a for points of Q by minimising over the crossing point.

    With x >= 0 the optimal crossing t lies in [max(0, x - arccos(1/rho)), x]:
    left of that window the path wraps around the unit circle, where moving t
    right gains 1 per unit while the P part grows by less.
    """
    sign = np.where(x < 0, -1.0, 1.0)
    xa = np.abs(x)
    rho = np.exp(1.0 - y)
    lo = np.maximum(xa - np.arccos(1.0 / rho), 0.0)
    width = xa - lo
    grid = lo[:, None] + width[:, None] * np.linspace(0.0, 1.0, n_grid)[None, :]
    vals = _fpoint(grid, xa[:, None], rho[:, None])
    k = np.argmin(vals, axis=1)
    step = width / (n_grid - 1)
    a = np.maximum(lo, lo + (k - 1) * step)
    b = np.minimum(xa, lo + (k + 1) * step)
    for _ in range(n_golden):
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        left = _fpoint(c, xa, rho) < _fpoint(d, xa, rho)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    t = (a + b) / 2
    best = np.minimum(_fpoint(t, xa, rho), vals.min(axis=1))
    return best, sign * t


def distance_from_a(x, y, bbox: "BoundingBox | None" = None):
    """Distance from a = i to (x, y) in Y; scalar or array input."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x, y = np.broadcast_arrays(x, y)
    if bbox is not None and not bbox.contains(x, y).all():
        raise DomainError("point outside the bounding box for this radius")
    out = np.empty(x.shape, dtype=np.float64)
    inP = y >= 1.0
    out[inP] = hyperbolic_distance(0.0, 1.0, x[inP], y[inP])
    if (~inP).any():
        out[~inP] = _q_distance(x[~inP], y[~inP])[0]
    return out if out.ndim else float(out)


def crossing_point(x, y) -> float:
    """Where the shortest path from a to a point of Q crosses beta."""
    if y >= 1.0:
        raise DomainError("crossing point is defined for points of Q")
    return float(_q_distance(np.atleast_1d(float(x)), np.atleast_1d(float(y)))[1][0])


# -- bounding box -----------------------------------------------------------------


@dataclass(frozen=True)
class BoundingBox:
    x_max: float
    y_min: float
    y_max: float

    @classmethod
    def for_radius(cls, r: float) -> "BoundingBox":
        """Box containing D(a, r), with a margin of 1.

        On P the disc is the hyperbolic disc, which reaches |x| = sinh r at
        height cosh r; on Q a point with crossing t is within r - H(t) of
        beta, so |x| <= 2 sinh(r/2) + r there.
        """
        return cls(
            max(math.sinh(r), 2.0 * math.sinh(r / 2.0) + r) + 1.0,
            1.0 - math.log(1.0 + r) - 1.0,
            math.exp(r) + 1.0,
        )

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (np.abs(x) <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)


# -- beta_r -----------------------------------------------------------------------


def beta_r_length(r: float) -> float:
    """Length of {x + i : d(a, x + i) <= r}; the metric is |dx| along beta."""
    if r <= 0:
        return 0.0
    hi = 2.0 * math.sinh(r / 2.0) + 1.0
    x = optimize.brentq(lambda t: distance_from_a(t, 1.0) - r, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    return 2.0 * x


def beta_r_closed_form(r: float) -> float:
    return 4.0 * math.sinh(r / 2.0)


# -- areas -------------------------------------------------------------------------


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _composite(func, a: float, b: float, panels: int, order: int = 8) -> float:
    xg, wg = _gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return float((func(nodes) * weights).sum())


def adaptive_integral(func, a: float, b: float, rtol: float = 1e-3, start: int = 8, max_panels: int = 1 << 14):
    """Composite Gauss-Legendre with panel doubling; returns (value, error estimate)."""
    panels = start
    prev = _composite(func, a, b, panels)
    while panels < max_panels:
        panels *= 2
        cur = _composite(func, a, b, panels)
        err = abs(cur - prev)
        if err <= rtol * abs(cur) / 10 or err < 1e-300:
            return cur, err
        prev = cur
    raise QuadratureError(f"no convergence to rtol {rtol}: last change {err:.3e} on {cur:.6e}")


def p_halfwidth(y, r: float):
    """Half-width of D(a, r) on the row at height y >= 1 (hyperbolic disc)."""
    y = np.asarray(y, dtype=np.float64)
    w2 = 2.0 * y * (math.cosh(r) - 1.0) - (y - 1.0) ** 2
    return np.sqrt(np.maximum(w2, 0.0))


def q_depth(x, r: float, iters: int = 64):
    """Largest rho with d(a, (x, 1 - log rho)) <= r on each column x."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    lo = np.ones_like(x)
    hi = np.full_like(x, 1.0 + r)
    for _ in range(iters):
        mid = (lo + hi) / 2
        inside = _q_distance(x, 1.0 - np.log(mid))[0] <= r
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    on_beta = 2.0 * np.arcsinh(x / 2.0) <= r
    return np.where(on_beta, lo, 1.0)


@dataclass(frozen=True)
class Areas:
    r: float
    area_P: float
    area_Q: float
    err_P: float
    err_Q: float

    @property
    def total(self) -> float:
        return self.area_P + self.area_Q


def ball_areas(r: float, rtol: float = 1e-3) -> Areas:
    """Areas of P and Q inside D(a, r), by sections.

    P: rows y = exp(u), area element dx dy / y^2 = exp(-u) dx du.
    Q: columns x in cover coordinates, area element rho drho dtheta.
    Both endpoints where a section shrinks to zero are straightened by a
    quadratic substitution.
    """
    if r <= 0:
        return Areas(r, 0.0, 0.0, 0.0, 0.0)

    def p_integrand(tau):
        u = r * (1.0 - tau * tau)
        y = np.exp(u)
        return 2.0 * p_halfwidth(y, r) * np.exp(-u) * 2.0 * r * tau

    X = 2.0 * math.sinh(r / 2.0)

    def q_integrand(tau):
        x = X * (1.0 - tau * tau)
        rho = q_depth(x, r)
        return 2.0 * (rho * rho - 1.0) / 2.0 * 2.0 * X * tau

    area_P, err_P = adaptive_integral(p_integrand, 0.0, 1.0, rtol)
    area_Q, err_Q = adaptive_integral(q_integrand, 0.0, 1.0, rtol)
    return Areas(r, area_P, area_Q, err_P, err_Q)


def hyperbolic_disc_area(r: float) -> float:
    return 4.0 * math.pi * math.sinh(r / 2.0) ** 2


# -- cell-subdivision oracle for areas ----------------------------------------------------


@dataclass(frozen=True)
class CellAreas:
    inner_P: float
    outer_P: float
    inner_Q: float
    outer_Q: float
    cells: int

    @property
    def area_P(self) -> float:
        return (self.inner_P + self.outer_P) / 2

    @property
    def area_Q(self) -> float:
        return (self.inner_Q + self.outer_Q) / 2


def _cell_weight(x0, x1, y0, y1):
    """Exact metric area of axis-aligned cells lying on one side of beta."""
    w = x1 - x0
    inP = y0 >= 1.0
    wp = w * (1.0 / np.where(inP, y0, 1.0) - 1.0 / np.where(inP, y1, 1.0))
    wq = w * (np.exp(2.0 * (1.0 - y0)) - np.exp(2.0 * (1.0 - y1))) / 2.0
    return np.where(inP, wp, 0.0), np.where(inP, 0.0, wq)


def ball_areas_cells(r: float, h_min: float = 1e-3, max_cells: int = 4_000_000) -> CellAreas:
    """Inner and outer covers of D(a, r) by dyadic cells.

    A cell is inside when d(centre) plus the metric radius of the cell is at
    most r, outside when d(centre) minus it exceeds r; the rest is split
    until the cell diameter drops below ``h_min``.  Only for small r: the
    boundary of a hyperbolic disc is as long as its area.
    """
    box = BoundingBox.for_radius(r)
    # quarter-plane x >= 0 by symmetry; rows split at beta
    xs = [0.0, box.x_max]
    pieces = [(0.0, box.x_max, 1.0, min(box.y_max, math.exp(r) + 1e-9)), (0.0, box.x_max, max(box.y_min, 1.0 - math.log(1.0 + r) - 1e-9), 1.0)]
    del xs
    x0 = np.array([p[0] for p in pieces])
    x1 = np.array([p[1] for p in pieces])
    y0 = np.array([p[2] for p in pieces])
    y1 = np.array([p[3] for p in pieces])
    inner_P = outer_P = inner_Q = outer_Q = 0.0
    total = 0
    while len(x0):
        total += len(x0)
        if total > max_cells:
            raise QuadratureError("cell budget exhausted; raise h_min")
        cx = (x0 + x1) / 2
        cy = (y0 + y1) / 2
        lam_max = np.where(y0 >= 1.0, 1.0 / y0, np.exp(1.0 - y0))
        rad = lam_max * np.hypot(x1 - x0, y1 - y0) / 2
        d = distance_from_a(cx, cy)
        wp, wq = _cell_weight(x0, x1, y0, y1)
        inside = d + rad <= r
        outside = d - rad > r
        inner_P += wp[inside].sum()
        inner_Q += wq[inside].sum()
        outer_P += wp[inside].sum()
        outer_Q += wq[inside].sum()
        edge = ~(inside | outside)
        small = edge & (np.hypot(x1 - x0, y1 - y0) < h_min)
        outer_P += wp[small].sum()
        outer_Q += wq[small].sum()
        split = edge & ~small
        x0, x1, y0, y1, cx, cy = (v[split] for v in (x0, x1, y0, y1, cx, cy))
        x0, x1, y0, y1 = (
            np.concatenate([x0, cx, x0, cx]),
            np.concatenate([cx, x1, cx, x1]),
            np.concatenate([y0, y0, cy, cy]),
            np.concatenate([cy, cy, y1, y1]),
        )
    return CellAreas(2 * inner_P, 2 * outer_P, 2 * inner_Q, 2 * outer_Q, total)


# -- curvature report ----------------------------------------------------------------


@dataclass
class BallReport:
    radii: list[float]
    length_beta: list[float]
    area_P: list[float]
    area_Q: list[float]
    curvature_integral: list[float]
    ratio: list[float]
    epsilon_estimate: float
    kappa: float
    K: float
    kappa_spread: float
    K_spread: float
    ratio_spread: float

    def rows(self) -> list[dict]:
        return [
            {
                "r": f"{r:.12g}",
                "length_beta_r": f"{lb:.12g}",
                "area_P": f"{ap:.12g}",
                "area_Q": f"{aq:.12g}",
                "curvature_integral": f"{ci:.12g}",
                "ratio": f"{ra:.12g}",
            }
            for r, lb, ap, aq, ci, ra in zip(
                self.radii, self.length_beta, self.area_P, self.area_Q, self.curvature_integral, self.ratio
            )
        ]

    def summary(self) -> dict:
        return {
            "epsilon_estimate": self.epsilon_estimate,
            "kappa": self.kappa,
            "K": self.K,
            "kappa_spread": self.kappa_spread,
            "K_spread": self.K_spread,
            "ratio_spread": self.ratio_spread,
        }


def _upper_half_spread(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    tail = v[len(v) // 2:]
    return float(tail.max() / tail.min())


def curvature_report(r_grid, rtol: float = 1e-3) -> BallReport:
    radii = [float(r) for r in r_grid]
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("r_grid must be increasing and positive")
    lengths, aP, aQ = [], [], []
    for r in radii:
        lengths.append(beta_r_length(r))
        ar = ball_areas(r, rtol)
        aP.append(ar.area_P)
        aQ.append(ar.area_Q)
    curv = [-p for p in aP]
    ratio = [p / (p + q) for p, q in zip(aP, aQ)]
    pl = [p / lb for p, lb in zip(aP, lengths)]
    ql = [q / lb for q, lb in zip(aQ, lengths)]
    return BallReport(
        radii,
        lengths,
        aP,
        aQ,
        curv,
        ratio,
        min(ratio),
        min(pl),
        max(ql),
        _upper_half_spread(pl),
        _upper_half_spread(ql),
        _upper_half_spread(ratio),
    )


# -- mesh oracle ------------------------------------------------------------------------


@dataclass
class DistanceField:
    h: float
    xs: np.ndarray
    ys: np.ndarray
    dist: np.ndarray  # shape (len(ys), len(xs))

    def index(self, x: float, y: float) -> tuple[int, int]:
        i = int(round((x - self.xs[0]) / self.h))
        j = int(round((y - self.ys[0]) / self.h))
        if not (0 <= i < len(self.xs) and 0 <= j < len(self.ys)):
            raise DomainError(f"({x}, {y}) outside the mesh")
        return j, i

    def at(self, x: float, y: float) -> float:
        """Distance at the nearest mesh node."""
        return float(self.dist[self.index(x, y)])

    def node(self, x: float, y: float) -> tuple[float, float]:
        j, i = self.index(x, y)
        return float(self.xs[i]), float(self.ys[j])


STENCILS = {
    8: [(1, 0), (0, 1), (1, 1), (1, -1)],
    16: [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)],
}


def mesh_distance_oracle(
    h: float,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    source: tuple[float, float] = A_POINT,
    metric=density,
    stencil: int = 8,
    max_nodes: int = 6_000_000,
) -> DistanceField:
    """Dijkstra distances from ``source`` on a uniform grid through it.

    Each stencil edge weighs metric(midpoint) times its Euclidean length.
    """
    if h <= 0:
        raise ValueError("cell size must be positive")
    sx, sy = source
    i0 = math.floor((x_range[0] - sx) / h)
    i1 = math.ceil((x_range[1] - sx) / h)
    j0 = math.floor((y_range[0] - sy) / h)
    j1 = math.ceil((y_range[1] - sy) / h)
    xs = sx + h * np.arange(i0, i1 + 1)
    ys = sy + h * np.arange(j0, j1 + 1)
    ys = ys[(ys >= y_range[0] - 1e-12) & (ys <= y_range[1] + 1e-12)]
    nx, ny = len(xs), len(ys)
    if nx * ny > max_nodes:
        raise MemoryError(f"{nx * ny} mesh nodes exceed the budget of {max_nodes}; use a larger h")
    idx = np.arange(nx * ny).reshape(ny, nx)
    rows, cols, wts = [], [], []
    for di, dj in STENCILS[stencil]:
        a_sl_j = slice(max(0, -dj), ny - max(0, dj))
        a_sl_i = slice(max(0, -di), nx - max(0, di))
        b_sl_j = slice(max(0, dj), ny - max(0, -dj))
        b_sl_i = slice(max(0, di), nx - max(0, -di))
        a = idx[a_sl_j, a_sl_i].ravel()
        b = idx[b_sl_j, b_sl_i].ravel()
        X, Y = np.meshgrid(xs, ys)
        mx = (X[a_sl_j, a_sl_i] + X[b_sl_j, b_sl_i]).ravel() / 2
        my = (Y[a_sl_j, a_sl_i] + Y[b_sl_j, b_sl_i]).ravel() / 2
        w = metric(mx, my) * h * math.hypot(di, dj)
        rows.append(a)
        cols.append(b)
        wts.append(w)
    g = sparse.coo_matrix(
        (np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny,) * 2
    ).tocsr()
    j_src = int(round((sy - ys[0]) / h))
    i_src = int(round((sx - xs[0]) / h))
    d = csgraph.dijkstra(g, directed=False, indices=idx[j_src, i_src])
    return DistanceField(h, xs, ys, d.reshape(ny, nx))


# -- configuration ---------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSurfaceY:
    """Y with its numerical parameters; the basepoint is always a = i."""

    h: float = 0.01
    stencil: int = 8
    rtol: float = 1e-3
    h_min: float = 2e-3
    basepoint: tuple[float, float] = field(default=A_POINT, init=False)

    def __post_init__(self):
        if self.h <= 0 or self.h_min <= 0:
            raise ValueError("mesh sizes must be positive")
        if self.stencil not in STENCILS:
            raise ValueError(f"stencil must be one of {sorted(STENCILS)}")
        if not 0 < self.rtol < 1:
            raise ValueError("quadrature tolerance must lie in (0, 1)")

    @staticmethod
    def density(x, y):
        return density(x, y)

    @staticmethod
    def bbox(r: float) -> BoundingBox:
        return BoundingBox.for_radius(r)

    def distance(self, x, y):
        return distance_from_a(x, y)

    def areas(self, r: float) -> Areas:
        return ball_areas(r, self.rtol)

    def report(self, r_grid) -> BallReport:
        return curvature_report(r_grid, self.rtol)

    def mesh(self, x_range, y_range, source=A_POINT, metric=density, h: float | None = None) -> DistanceField:
        return mesh_distance_oracle(h or self.h, x_range, y_range, source, metric, self.stencil)

    def to_json(self) -> dict:
        return {"h": self.h, "stencil": self.stencil, "rtol": self.rtol, "h_min": self.h_min}


def stencil_bound(stencil: int) -> float:
    """Worst relative overestimate of straight-line length on the stencil."""
    angles = sorted({math.atan2(dj, di) % (math.pi / 2) for di, dj in STENCILS[stencil]} | {math.pi / 2})
    gap = max(b - a for a, b in zip(angles, angles[1:]))
    return 1.0 / math.cos(gap / 2) - 1.0
