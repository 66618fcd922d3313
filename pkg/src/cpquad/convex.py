"""Primal log-barrier solver for linear objectives over convex quadratic rows.

Maximizes u^T x over x in [0,1]^n subject to x^T Q_i x + q_i^T x <= cap_i,
G x <= h, A x >= alpha, with some coordinates fixed to 1 or 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PHASE1_TOL = 1e-8
NEWTON_TOL = 1e-10
MAX_OUTER = 200
MAX_INNER = 50
T_GROWTH = 5.0


@dataclass(frozen=True)
class RelaxationSpec:
    u: np.ndarray
    quadratic: tuple = ()
    le_rows: tuple = (None, None)
    ge_rows: tuple = (None, None)
    fixed_one: frozenset = frozenset()
    fixed_zero: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "fixed_one", frozenset(int(k) for k in self.fixed_one))
        object.__setattr__(self, "fixed_zero", frozenset(int(k) for k in self.fixed_zero))
        if self.fixed_one & self.fixed_zero:
            raise ValueError("a coordinate cannot be fixed to both 0 and 1")

    @property
    def n(self) -> int:
        return len(self.u)

    def free(self) -> list:
        return [k for k in range(self.n) if k not in self.fixed_one and k not in self.fixed_zero]

    def linear_le(self) -> tuple[np.ndarray, np.ndarray]:
        G, h = self.le_rows
        if G is None:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.atleast_2d(np.asarray(G, float)).reshape(-1, self.n), np.asarray(h, float).ravel()

    def linear_ge(self) -> tuple[np.ndarray, np.ndarray]:
        A, a = self.ge_rows
        if A is None:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.atleast_2d(np.asarray(A, float)).reshape(-1, self.n), np.asarray(a, float).ravel()

    def violation(self, x: np.ndarray) -> float:
        """Largest scaled constraint violation of x (0 when feasible)."""
        worst = 0.0
        for Q, q, cap in self.quadratic:
            load = x @ Q @ x + (0.0 if q is None else q @ x)
            worst = max(worst, (load - cap) / max(1.0, abs(cap)))
        G, h = self.linear_le()
        if len(h):
            worst = max(worst, float(np.max((G @ x - h) / np.maximum(1.0, np.abs(h)))))
        A, a = self.linear_ge()
        if len(a):
            worst = max(worst, float(np.max((a - A @ x) / np.maximum(1.0, np.abs(a)))))
        box = max(float(np.max(-x, initial=0.0)), float(np.max(x - 1.0, initial=0.0)))
        return max(worst, box)


@dataclass(frozen=True)
class FractionalSolution:
    x: np.ndarray
    value: float
    max_violation: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Infeasible:
    certified: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return False


# Reduced problem over the free coordinates, all rows scaled to unit size.


@dataclass
class _Reduced:
    free: list
    c: np.ndarray
    quads: list  # (P, p, rhs) with z^T P z + p^T z <= rhs
    G: np.ndarray
    h: np.ndarray
    zero: set


def _reduce(spec: RelaxationSpec) -> _Reduced | Infeasible:
    n = spec.n
    one = np.zeros(n)
    one[list(spec.fixed_one)] = 1.0
    free = spec.free()
    if not free:
        return _Reduced([], np.zeros(0), [], np.zeros((0, 0)), np.zeros(0), set())
    F = np.array(free)
    quads = []
    for Q, q, cap in spec.quadratic:
        Q = np.asarray(Q, float)
        q = np.zeros(n) if q is None else np.asarray(q, float)
        P = Q[np.ix_(F, F)]
        p = q[F] + 2.0 * (Q[F, :] @ one)
        rhs = cap - one @ Q @ one - q @ one
        scale = max(1.0, abs(cap))
        quads.append((P / scale, p / scale, rhs / scale))
    rows, rhs_l = [], []
    G, h = spec.linear_le()
    for g, hv in zip(G, h):
        scale = max(1.0, abs(hv))
        rows.append(g[F] / scale)
        rhs_l.append((hv - g @ one) / scale)
    A, a = spec.linear_ge()
    for g, av in zip(A, a):
        scale = max(1.0, abs(av))
        rows.append(-g[F] / scale)
        rhs_l.append(-(av - g @ one) / scale)
    Gr = np.array(rows).reshape(len(rows), len(F))
    hr = np.array(rhs_l, dtype=float)
    return _simplify(_Reduced(free, -spec.u[F], quads, Gr, hr, set()))


def _simplify(red: _Reduced) -> _Reduced | Infeasible:
    """Drop box-redundant rows, detect trivial infeasibility, fix faces."""
    d = len(red.free)
    alive = np.ones(d, dtype=bool)
    changed = True
    while changed:
        changed = False
        idx = np.nonzero(alive)[0]
        keep_q = []
        for P, p, rhs in red.quads:
            Pa, pa = P[np.ix_(idx, idx)], p[idx]
            lo = float(np.sum(np.minimum(pa, 0.0)))  # P >= 0 entrywise here
            hi = float(Pa.sum() + np.sum(np.maximum(pa, 0.0)))
            if lo > rhs + PHASE1_TOL:
                return Infeasible(True, "quadratic row violated on the whole box")
            if hi <= rhs:
                continue
            if rhs <= PHASE1_TOL and np.all(pa >= 0):
                hit = (np.diag(Pa) > 0) | (pa > 0)
                if np.any(hit):
                    alive[idx[hit]] = False
                    changed = True
                continue
            keep_q.append((P, p, rhs))
        red.quads = keep_q
        keep = []
        for j in range(len(red.h)):
            g = red.G[j, idx]
            lo = float(np.sum(np.minimum(g, 0.0)))
            hi = float(np.sum(np.maximum(g, 0.0)))
            if lo > red.h[j] + PHASE1_TOL:
                return Infeasible(True, "linear row violated on the whole box")
            if hi <= red.h[j]:
                continue
            if red.h[j] <= PHASE1_TOL and np.all(g >= 0):
                hit = g > 0
                alive[idx[hit]] = False
                changed = True
                continue
            if red.h[j] - lo <= PHASE1_TOL:
                # the row holds only at a box corner along its support
                raise _PinnedFace(j)
            keep.append(j)
        red.G, red.h = red.G[keep], red.h[keep]
    if not np.all(alive):
        return _restrict(red, alive)
    return red


class _PinnedFace(Exception):
    def __init__(self, row):
        self.row = row


def _restrict(red: _Reduced, alive: np.ndarray) -> _Reduced | Infeasible:
    idx = np.nonzero(alive)[0]
    zero = set(red.zero) | {red.free[k] for k in np.nonzero(~alive)[0]}
    quads = [(P[np.ix_(idx, idx)], p[idx], rhs) for P, p, rhs in red.quads]
    out = _Reduced([red.free[k] for k in idx], red.c[idx], quads, red.G[:, idx], red.h, zero)
    if len(idx) == 0:
        return out
    return _simplify(out)


# Generic barrier machinery ---------------------------------------------------


class _Barrier:
    """phi(w) = -sum log(r_i - w^T P_i w - p_i^T w) - sum log(h - G w)
    - sum_{k < nbox} [log w_k + log(1 - w_k)]."""

    def __init__(self, quads, G, h, nbox):
        self.quads, self.G, self.h, self.nbox = quads, G, h, nbox
        self.count = len(quads) + len(h) + 2 * nbox

    def slacks(self, w):
        sq = np.array([r - w @ P @ w - p @ w for P, p, r in self.quads])
        sl = self.h - self.G @ w
        b = w[: self.nbox]
        return sq, sl, b

    def inside(self, w) -> bool:
        sq, sl, b = self.slacks(w)
        return bool(np.all(sq > 0) and np.all(sl > 0) and np.all(b > 0) and np.all(b < 1))

    def value(self, w) -> float:
        sq, sl, b = self.slacks(w)
        return float(-np.sum(np.log(sq)) - np.sum(np.log(sl)) - np.sum(np.log(b)) - np.sum(np.log1p(-b)))

    def derivatives(self, w):
        d = len(w)
        g = np.zeros(d)
        H = np.zeros((d, d))
        for P, p, r in self.quads:
            s = r - w @ P @ w - p @ w
            dg = 2.0 * P @ w + p
            g += dg / s
            H += 2.0 * P / s + np.outer(dg, dg) / (s * s)
        if len(self.h):
            sl = self.h - self.G @ w
            g += self.G.T @ (1.0 / sl)
            H += self.G.T @ (self.G / (sl * sl)[:, None])
        b = w[: self.nbox]
        g[: self.nbox] += -1.0 / b + 1.0 / (1.0 - b)
        H[np.arange(self.nbox), np.arange(self.nbox)] += 1.0 / b**2 + 1.0 / (1.0 - b) ** 2
        return g, H


def _newton_direction(H, g):
    try:
        return np.linalg.solve(H, -g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(H, -g, rcond=None)[0]


def _center(bar: _Barrier, c, t, w, early: Callable | None = None):
    iters = 0
    for _ in range(MAX_INNER):
        gb, H = bar.derivatives(w)
        g = t * c + gb
        dw = _newton_direction(H, g)
        lam2 = float(-g @ dw)
        if not np.isfinite(lam2) or lam2 / 2.0 <= NEWTON_TOL:
            break
        f0 = t * (c @ w) + bar.value(w)
        step = 1.0
        while step > 1e-20:
            cand = w + step * dw
            if bar.inside(cand) and t * (c @ cand) + bar.value(cand) <= f0 + 0.25 * step * (g @ dw):
                break
            step *= 0.5
        else:
            break
        w = cand
        iters += 1
        if early is not None and early(w):
            break
    return w, iters


def _run_barrier(bar, c, w, stop, early=None):
    t = 1.0
    total = 0
    for outer in range(MAX_OUTER):
        w, it = _center(bar, c, t, w, early)
        total += it
        gap = bar.count / t
        done = stop(w, gap) or (early is not None and early(w))
        if done:
            return w, gap, outer + 1, total, True
        t *= T_GROWTH
    return w, bar.count / t, MAX_OUTER, total, False


# Start point and Phase I ----------------------------------------------------------


def _start_point(red: _Reduced) -> np.ndarray:
    d = len(red.free)
    tau = 1.0
    ones = np.ones(d)
    for P, p, rhs in red.quads:
        a, b = float(ones @ P @ ones), float(p @ ones)
        if a > 0:
            root = (-b + np.sqrt(b * b + 4 * a * max(rhs, 0.0))) / (2 * a)
        elif b > 0:
            root = max(rhs, 0.0) / b
        else:
            root = np.inf
        tau = min(tau, root)
    for g, hv in zip(red.G, red.h):
        s = float(np.sum(g))
        if np.all(g >= 0) and s > 0:
            tau = min(tau, max(hv, 0.0) / s)
    val = max(min(0.5, 0.9 * tau), 1e-9)
    return np.full(d, val)


def _row_excess(red: _Reduced, z) -> float:
    worst = -np.inf
    for P, p, rhs in red.quads:
        worst = max(worst, float(z @ P @ z + p @ z - rhs))
    if len(red.h):
        worst = max(worst, float(np.max(red.G @ z - red.h)))
    return worst


def _phase_one(red: _Reduced, z0: np.ndarray):
    """Find a strictly feasible z, relaxing rows by at most PHASE1_TOL."""
    d = len(z0)
    quads = []
    for P, p, rhs in red.quads:
        Pw = np.zeros((d + 1, d + 1))
        Pw[:d, :d] = P
        quads.append((Pw, np.append(p, -1.0), rhs))
    G = np.hstack([red.G, -np.ones((len(red.h), 1))])
    G = np.vstack([G, np.append(np.zeros(d), -1.0)])  # s > -1 keeps phase I bounded
    h = np.append(red.h, 1.0)
    bar = _Barrier(quads, G, h, d)
    s0 = max(_row_excess(red, z0), 0.0) + 1.0
    w0 = np.append(z0, s0)
    c = np.zeros(d + 1)
    c[d] = 1.0
    state = {}

    def early(w):
        return w[d] < 0.0

    def stop(w, gap):
        state["lower"] = w[d] - gap
        return state["lower"] > PHASE1_TOL or (w[d] <= PHASE1_TOL and gap < 1e-10)

    w, gap, outer, iters, _ = _run_barrier(bar, c, w0, stop, early)
    s = float(w[d])
    if s < 0.0:
        return w[:d], 0.0, outer
    if s - gap > PHASE1_TOL:
        return Infeasible(True, "phase I slack bounded away from zero"), None, outer
    if s <= PHASE1_TOL:
        return w[:d], s + 1e-15, outer
    return Infeasible(False, "phase I did not converge"), None, outer


def solve_relaxation(spec: RelaxationSpec, eps: float) -> FractionalSolution | Infeasible:
    """epsilon-optimal maximizer of u^T x over the relaxation, or Infeasible."""
    try:
        red = _reduce(spec)
    except _PinnedFace:
        return _solve_pinned(spec, eps)
    if isinstance(red, Infeasible):
        return red
    n = spec.n
    x = np.zeros(n)
    x[list(spec.fixed_one)] = 1.0
    diag = {"outer": 0, "newton": 0, "gap": 0.0, "phase1": False, "relaxed": 0.0, "free": len(red.free)}
    if red.free:
        F = np.array(red.free)
        if not red.quads and not len(red.h):
            z = (red.c <= 0).astype(float)
        else:
            z, diag = _interior_solve(red, spec, x, F, eps, diag)
            if isinstance(z, Infeasible):
                return z
        x[F] = np.clip(z, 0.0, 1.0)
    elif spec.violation(x) > PHASE1_TOL:
        # nothing left free: the fixed point itself is the only candidate
        return Infeasible(True, "fixed coordinates violate a row")
    value = float(spec.u @ x)
    return FractionalSolution(x, value, spec.violation(x), diag)


def _interior_solve(red, spec, x_fixed, F, eps, diag):
    z0 = _start_point(red)
    relax = 0.0
    if _row_excess(red, z0) >= 0.0:
        diag["phase1"] = True
        z0, relax, _ = _phase_one(red, z0)
        if isinstance(z0, Infeasible):
            return z0, diag
    quads = [(P, p, rhs + relax) for P, p, rhs in red.quads]
    bar = _Barrier(quads, red.G, red.h + relax, len(F))
    c = red.c
    if not np.any(c != 0):
        diag["relaxed"] = relax
        return z0, diag
    base = float(spec.u @ x_fixed)
    cscale = float(np.max(np.abs(c)))
    cs = c / cscale

    def stop(w, gap):
        value = base - cscale * float(cs @ w)
        return gap * cscale <= eps * max(abs(value), 1e-12)

    w, gap, outer, iters, ok = _run_barrier(bar, cs, z0, stop)
    diag.update(outer=outer, newton=iters, gap=gap * cscale, relaxed=relax, converged=ok)
    return w, diag


def _solve_pinned(spec: RelaxationSpec, eps: float):
    """Handle a >= row that holds only at a box corner by pinning its support."""
    G, h = spec.linear_ge()
    one = set(spec.fixed_one)
    zero = set(spec.fixed_zero)
    for g, a in zip(G, h):
        free = [k for k in range(spec.n) if k not in one and k not in zero]
        base = sum(g[k] for k in one)
        reach = base + sum(max(g[k], 0.0) for k in free)
        if reach - a <= PHASE1_TOL * max(1.0, abs(a)):
            one |= {k for k in free if g[k] > 0}
            zero |= {k for k in free if g[k] < 0}
    if one == set(spec.fixed_one) and zero == set(spec.fixed_zero):
        return Infeasible(False, "could not pin a degenerate face")
    pinned = RelaxationSpec(spec.u, spec.quadratic, spec.le_rows, spec.ge_rows,
                            frozenset(one), frozenset(zero))
    return solve_relaxation(pinned, eps)
