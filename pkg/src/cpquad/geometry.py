"""Fixed-dimension geometry: projections, inscribed grid polytopes, the
facet-normal knapsack reduction, vertex purification and direction classes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .instance import DomainError

MEMBER_TOL = 1e-9
FRAC_TOL = 1e-9

log = logging.getLogger(__name__)


def project(mu, nu) -> np.ndarray:
    """Vector projection of mu on nu."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    nn = float(nu @ nu)
    if nn <= 0:
        raise DomainError("cannot project on the zero vector")
    return (float(mu @ nu) / nn) * nu


def axis_widths(q_T, C: float) -> np.ndarray:
    """Distance along each axis from q_T to the sphere of radius C."""
    q_T = np.asarray(q_T, dtype=float)
    sq = q_T**2
    rest = C * C - (sq.sum() - sq)
    return np.sqrt(np.maximum(rest, 0.0)) - q_T


@dataclass(frozen=True)
class Halfspace:
    """a . nu <= b."""

    a: np.ndarray
    b: float
    kind: str = "facet"


@dataclass(frozen=True)
class InscribedPolytope:
    r: int
    anchor: np.ndarray
    C: float
    eps: float
    widths: np.ndarray
    vertices: np.ndarray
    facets: tuple  # hull facets as Halfspace (unit normals)
    caps: np.ndarray  # nu_j <= caps[j]
    feet: np.ndarray  # sigma_l, one per hull facet
    support: np.ndarray | None = None  # sphere points below the anchor, hull only

    @property
    def halfspaces(self) -> list:
        out = list(self.facets)
        for j in range(self.r):
            e = np.zeros(self.r)
            e[j] = 1.0
            out.append(Halfspace(e, float(self.caps[j]), "cap"))
        for j in range(self.r):
            e = np.zeros(self.r)
            e[j] = -1.0
            out.append(Halfspace(e, 0.0, "nonneg"))
        return out

    @property
    def facet_count(self) -> int:
        return len(self.facets) + 2 * self.r

    def contains(self, nu, tol: float = MEMBER_TOL) -> bool:
        nu = np.asarray(nu, dtype=float)
        scale = tol * max(1.0, self.C)
        if np.any(nu < -scale) or np.any(nu > self.caps + scale):
            return False
        return all(float(f.a @ nu) <= f.b + scale for f in self.facets)

    def contains_rows(self, V: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        """Vectorized membership of each row of V."""
        scale = tol * max(1.0, self.C)
        ok = np.all(V >= -scale, axis=1) & np.all(V <= self.caps + scale, axis=1)
        if self.facets:
            A = np.array([f.a for f in self.facets])
            b = np.array([f.b for f in self.facets])
            ok &= np.all(V @ A.T <= b + scale, axis=1)
        return ok


def grid_points(q_T: np.ndarray, C: float, eps: float) -> tuple[np.ndarray, int]:
    """Intersections of the axis-parallel grid lines with the sphere."""
    r = len(q_T)
    w = axis_widths(q_T, C)
    K = math.ceil(2 * r / eps)
    # the extra tick at 0 puts sphere points on every coordinate plane, so the
    # hull's only facets through the origin are the coordinate planes
    ticks = [np.unique(np.append(q_T[j] + w[j] * np.arange(K + 1) / K, 0.0)) for j in range(r)]
    blocks = []
    for j in range(r):
        others = [ticks[jj] for jj in range(r) if jj != j]
        grid = np.array(np.meshgrid(*others, indexing="ij")).reshape(r - 1, -1).T if others else np.zeros((1, 0))
        rest = C * C - np.sum(grid**2, axis=1)
        keep = rest >= 0
        grid, rest = grid[keep], rest[keep]
        blocks.append(np.insert(grid, j, np.sqrt(rest), axis=1))
    pts = np.vstack(blocks) if blocks else np.zeros((0, r))
    P = np.array(pts, dtype=float).reshape(-1, r)
    if len(P):
        P = np.unique(np.round(P, 13), axis=0)
    return P, K


def split_region(P: np.ndarray, q_T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Grid points inside the region nu >= q_T, and the remaining support points."""
    inside = np.all(P >= q_T - 1e-12, axis=1)
    return P[inside], P[~inside]


def _hull_facets(P: np.ndarray, C: float) -> tuple[list, list]:
    """Origin-avoiding hull facets as (unit normal, offset), plus the points on each."""
    r = P.shape[1]
    pts = np.vstack([np.zeros(r), P])
    try:
        hull = ConvexHull(pts)
    except QhullError:
        hull = ConvexHull(pts, qhull_options="QJ")
    facets = []
    for eq, simplex in zip(hull.equations, hull.simplices):
        a, b = eq[:-1], -eq[-1]
        if b <= 1e-9 * C:
            continue
        a = a / np.linalg.norm(a)
        b = float(b / np.linalg.norm(eq[:-1]))
        facets.append((a, b, set(int(k) for k in simplex)))
    facets.sort(key=lambda abv: tuple(np.round(abv[0], 9)))
    merged, on = [], []
    for a, b, vs in facets:
        if merged and np.max(np.abs(merged[-1][0] - a)) <= 1e-9 and abs(merged[-1][1] - b) <= 1e-9 * C:
            on[-1] |= vs
            continue
        merged.append((a, b))
        on.append(vs)
    return merged, [pts[sorted(vs)] for vs in on]


def straddling_facets(points_on: list, w: np.ndarray, K: int) -> int:
    """Facets whose points span more than one grid cell along some axis."""
    step = w / K
    return sum(int(np.any(np.ptp(v, axis=0) > step * (1 + 1e-9) + 1e-12)) for v in points_on)


def build_inscribed_polytope(q_T, C: float, eps: float) -> InscribedPolytope:
    q_T = np.asarray(q_T, dtype=float)
    r = len(q_T)
    if r < 1:
        raise ValueError("dimension must be at least 1")
    norm = float(np.linalg.norm(q_T))
    if norm > C * (1 + 1e-12) + 1e-15:
        raise DomainError("anchor lies outside the ball")
    w = axis_widths(q_T, C)
    caps = q_T + w
    if r == 1:
        verts = np.array([[C]])
        facets = (Halfspace(np.array([1.0]), float(C)),)
        return InscribedPolytope(1, q_T, C, eps, w, verts, facets, caps, np.array([[C]]))
    if np.all(w <= 1e-12 * max(C, 1.0)) and norm > 0:
        # anchor on the sphere: the polytope shrinks to the box [0, q_T] under the tangent plane
        a = q_T / norm
        facets = (Halfspace(a, norm),)
        return InscribedPolytope(r, q_T, C, eps, np.maximum(w, 0.0), q_T[None, :], facets,
                                 np.maximum(caps, q_T), (a * norm)[None, :])
    P, K = grid_points(q_T, C, eps)
    raw, points_on = _hull_facets(P, C)
    if log.isEnabledFor(logging.DEBUG):
        log.debug("inscribed polytope r=%d eps=%g: %d of %d facets straddle a grid cell",
                  r, eps, straddling_facets(points_on, w, K), len(raw))
    facets = tuple(Halfspace(a, b) for a, b in raw)
    feet = np.array([b * a for a, b in raw]).reshape(-1, r)
    verts, support = split_region(P, q_T)
    return InscribedPolytope(r, q_T, C, eps, w, verts, facets, caps, feet, support)


def facet_bound(r: int, eps: float) -> float:
    return (2 * r / eps) ** (r * r / 2) + 2 * r


# Knapsack reduction -----------------------------------------------------------


@dataclass(frozen=True)
class KnapsackSystem:
    W: np.ndarray  # rows x items, nonnegative
    budgets: np.ndarray

    @property
    def rows(self) -> int:
        return self.W.shape[0]

    def feasible(self, x, tol: float = MEMBER_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.W @ x <= self.budgets + tol * np.maximum(1.0, self.budgets)))

    def feasible_rows(self, X: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        return np.all(X @ self.W.T <= self.budgets + tol * np.maximum(1.0, self.budgets), axis=1)

    @staticmethod
    def stack(systems) -> "KnapsackSystem":
        systems = list(systems)
        if not systems:
            return KnapsackSystem(np.zeros((0, 0)), np.zeros(0))
        return KnapsackSystem(np.vstack([s.W for s in systems]), np.concatenate([s.budgets for s in systems]))


def knapsack_reduction(poly: InscribedPolytope, vectors) -> KnapsackSystem:
    """Rows sum_k (q_k . sigma/|sigma|) x_k <= |sigma| per hull facet, plus axis caps.

    vectors holds one r-vector per item (shape n x r)."""
    V = np.asarray(vectors, dtype=float).reshape(-1, poly.r)
    rows, budgets = [], []
    for sigma in poly.feet:
        s = float(np.linalg.norm(sigma))
        rows.append(V @ (sigma / s))
        budgets.append(s)
    for j in range(poly.r):
        rows.append(V[:, j].copy())
        budgets.append(float(poly.caps[j]))
    W = np.array(rows).reshape(len(rows), V.shape[0])
    W[(W < 0) & (W > -1e-12)] = 0.0
    return KnapsackSystem(W, np.array(budgets))


# Vertex purification -------------------------------------------------------------


def _null_direction(A: np.ndarray) -> np.ndarray | None:
    """Nonzero null vector of A restricted to the smallest column prefix that has one."""
    for k in range(1, A.shape[1] + 1):
        sub = A[:, :k]
        if sub.shape[0] == 0:
            d = np.zeros(k)
            d[-1] = 1.0
            return d
        _, s, vt = np.linalg.svd(sub)
        tol = 1e-10 * max(1.0, s[0] if len(s) else 1.0)
        rank = int(np.sum(s > tol))
        if rank < k:
            return vt[-1]
    return None


def find_improving_bfs(G, h, x, u, max_steps: int | None = None) -> np.ndarray:
    """Move from a feasible x of {y in [0,1]^N : G y <= h} to a vertex y with u.y >= u.x.

    G may carry negative coefficients (>= rows are passed negated)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    u = np.asarray(u, dtype=float)
    y = np.clip(np.asarray(x, dtype=float).copy(), 0.0, 1.0)
    n = len(y)
    if G.size == 0:
        G = np.zeros((0, n))
    scale = np.maximum(1.0, np.abs(h))
    y[y <= FRAC_TOL] = 0.0
    y[y >= 1 - FRAC_TOL] = 1.0
    steps = max_steps if max_steps is not None else 4 * (n + len(h)) + 4
    for _ in range(steps):
        frac = [k for k in range(n) if 0.0 < y[k] < 1.0]
        if not frac:
            break
        slack = h - G @ y
        tight = np.abs(slack) <= 1e-9 * scale
        tight |= slack < 0
        A = G[tight][:, frac]
        dsub = _null_direction(A)
        if dsub is None:
            break
        d = np.zeros(n)
        d[frac[: len(dsub)]] = dsub
        d[np.abs(d) < 1e-15] = 0.0
        ud = float(u @ d)
        if abs(ud) <= 1e-12 * max(1.0, float(np.max(np.abs(u), initial=0.0))) * float(np.max(np.abs(d))):
            lead = d[np.nonzero(d)[0][0]]
            if lead < 0:
                d = -d
        elif ud < 0:
            d = -d
        # longest step keeping the box and the non-tight rows
        alpha = np.inf
        block = None
        for k in np.nonzero(d)[0]:
            lim = (1.0 - y[k]) / d[k] if d[k] > 0 else y[k] / -d[k]
            if lim < alpha:
                alpha, block = lim, ("box", k)
        gd = G @ d
        for j in np.nonzero(~tight & (gd > 1e-15))[0]:
            lim = slack[j] / gd[j]
            if lim < alpha:
                alpha, block = lim, ("row", j)
        if not np.isfinite(alpha):
            break
        y = y + alpha * d
        if block[0] == "box":
            k = block[1]
            y[k] = 1.0 if d[k] > 0 else 0.0
        y = np.clip(y, 0.0, 1.0)
        y[y <= FRAC_TOL] = 0.0
        y[y >= 1 - FRAC_TOL] = 1.0
    return y


def fractional_count(y, tol: float = FRAC_TOL) -> int:
    y = np.asarray(y, dtype=float)
    return int(np.sum((y > tol) & (y < 1 - tol)))


# Direction classes for the covering scheme ------------------------------------


@dataclass(frozen=True)
class SpacePartition:
    classes: tuple  # tuple of tuples of item indices
    directions: np.ndarray  # unit xi(s), one row per class
    centers: np.ndarray  # cell centers c(s)
    excluded: tuple  # zero-vector items
    cells_per_axis: int
    keys: tuple = ()

    def cosine(self, q, s: int) -> float:
        q = np.asarray(q, dtype=float)
        return float(q @ self.directions[s] / (np.linalg.norm(q) * np.linalg.norm(self.directions[s])))


def partition_cells(r: int, eps: float) -> int:
    return max(1, math.floor(math.sqrt(r) / eps))


def space_partition(q_T, C: float, eps: float, vectors, items=None) -> SpacePartition:
    """Assign each item to the box-facet cell hit by the ray q_T + lambda q_k."""
    q_T = np.asarray(q_T, dtype=float)
    r = len(q_T)
    V = np.asarray(vectors, dtype=float).reshape(-1, r)
    items = list(range(len(V))) if items is None else list(items)
    w = axis_widths(q_T, C)
    wbar = float(np.max(w)) if r else 0.0
    if not np.isfinite(wbar) or wbar <= 1e-12 * max(1.0, C):
        wbar = max(C, 1.0)
    M = partition_cells(r, eps) if r > 1 else 1
    side = wbar / M
    groups: dict = {}
    excluded = []
    for k, v in zip(items, V):
        if not np.any(v > 0):
            excluded.append(k)
            continue
        pos = v > 0
        lam = np.full(r, np.inf)
        lam[pos] = wbar / v[pos]
        jstar = int(np.argmin(lam))
        hit = lam[jstar] * v
        cell = []
        for j in range(r):
            if j == jstar:
                continue
            c = max(0, math.ceil(hit[j] / side - 1e-12) - 1)
            cell.append(min(c, M - 1))
        groups.setdefault((jstar, tuple(cell)), []).append(k)
    keys = sorted(groups)
    classes, dirs, centers = [], [], []
    for key in keys:
        jstar, cell = key
        xi = np.empty(r)
        it = iter(cell)
        for j in range(r):
            xi[j] = wbar if j == jstar else (next(it) + 0.5) * side
        classes.append(tuple(groups[key]))
        centers.append(q_T + xi)
        dirs.append(xi / np.linalg.norm(xi))
    return SpacePartition(tuple(classes), np.array(dirs).reshape(-1, r), np.array(centers).reshape(-1, r),
                          tuple(excluded), M, tuple(keys))


def class_bound(r: int, eps: float) -> float:
    return r * (math.sqrt(r) / eps) ** (r - 1)
