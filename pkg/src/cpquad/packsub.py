"""Packing with a submodular (coverage) objective through inscribed polytopes.

Each anchor collection (T^1, ..., T^m) fixes one polytope per constraint; the
polytopes become knapsack rows and a pluggable backend solves the resulting
multi-knapsack problem. The best backend answer over all collections wins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np

from .factorize import FactorizeBudget, ensure_factors
from .geometry import (
    KnapsackSystem,
    axis_widths,
    build_inscribed_polytope,
    knapsack_reduction,
)
from .instance import (
    BinarySolution,
    CoverageObjective,
    LinearObjective,
    ProblemInstance,
    evaluate_objective,
)
from .oracle import CHUNK, mask_matrix, mask_to_subset, objective_rows
from .packlin import _better
from .parallel import batches, pmap

EXACT_CAP = 20
SOLVER_TOL = 1e-11
BATCH = 16


class BackendError(RuntimeError):
    def __init__(self, msg, anchors=None):
        super().__init__(msg)
        self.anchors = anchors


class PreconditionError(ValueError):
    pass


def anchor_size(eps: float) -> int:
    return math.ceil(1.0 / eps - 1e-12)


# Backends ---------------------------------------------------------------------


def _lexmin(masks: np.ndarray, n: int) -> tuple:
    return min(mask_to_subset(int(m), n) for m in masks)


def _exact(obj, sys: KnapsackSystem, n: int) -> tuple:
    if n > EXACT_CAP:
        raise BackendError(f"exact backend refuses n={n} > {EXACT_CAP}")
    best, winners = -np.inf, []
    for start in range(0, 1 << n, CHUNK):
        stop = min(1 << n, start + CHUNK)
        X = mask_matrix(start, stop, n)
        ok = sys.feasible_rows(X, SOLVER_TOL) if sys.rows else np.ones(len(X), bool)
        vals = np.where(ok, objective_rows(obj, X), -np.inf)
        top = float(vals.max())
        tol = 1e-12 * max(1.0, abs(top))
        if top > best + tol:
            best, winners = top, []
        if top >= best - tol:
            winners.extend((np.nonzero(vals >= top - tol)[0] + start).tolist())
    return _lexmin(np.array(winners), n)


def _gain_fn(obj, n: int):
    """Marginal gains of every item given the current 0/1 vector x."""
    if isinstance(obj, CoverageObjective):
        inc = obj.incidence() > 0
        w = np.asarray(obj.weights, dtype=float)

        def gains(x):
            covered = inc[x > 0.5].any(axis=0)
            return (inc & ~covered) @ w
        return gains
    if isinstance(obj, LinearObjective):
        u = np.asarray(obj.u, dtype=float)
        return lambda x: u.copy()

    def gains(x):
        S = [int(k) for k in np.nonzero(x > 0.5)[0]]
        base = evaluate_objective(obj, S)
        return np.array([evaluate_objective(obj, S + [k]) - base for k in range(n)])
    return gains


def _greedy_enum(obj, sys: KnapsackSystem, n: int, seed_size: int = 3) -> tuple:
    W = sys.W if sys.rows else np.zeros((0, n))
    slack = sys.budgets + SOLVER_TOL * np.maximum(1.0, sys.budgets)
    with np.errstate(divide="ignore", invalid="ignore"):
        load = np.where(W > 0, W / np.where(sys.budgets > 0, sys.budgets, 1.0)[:, None], 0.0)
        load[(W > 0) & (sys.budgets[:, None] <= 0)] = np.inf
    item_load = load.max(axis=0) if sys.rows else np.zeros(n)
    gains = _gain_fn(obj, n)
    best_val, best_S = -np.inf, None
    for size in range(0, seed_size + 1):
        for seed in combinations(range(n), size):
            x = np.zeros(n)
            x[list(seed)] = 1.0
            used = W @ x
            if np.any(used > slack):
                continue
            while True:
                fit = np.all(used[:, None] + W <= slack[:, None], axis=0) & (x < 0.5)
                g = gains(x)
                live = fit & (g > 1e-12)
                if not live.any():
                    break
                with np.errstate(divide="ignore"):
                    score = np.where(item_load > 0, g / item_load, np.inf)
                score[~live] = -np.inf
                k = int(np.argmax(score))
                x[k] = 1.0
                used = used + W[:, k]
            T = tuple(int(k) for k in np.nonzero(x > 0.5)[0])
            val = evaluate_objective(obj, list(T))
            if _better(val, T, best_val, best_S):
                best_val, best_S = val, T
    return () if best_S is None else best_S


def mdks_solve(obj, sys: KnapsackSystem, backend: str = "exact", n: int | None = None) -> tuple:
    """Maximize the objective subject to the knapsack rows of sys."""
    n = sys.W.shape[1] if n is None else n
    if backend == "exact":
        return _exact(obj, sys, n)
    if backend == "greedy-enum":
        return _greedy_enum(obj, sys, n)
    raise ValueError(f"unknown backend {backend!r}")


# Anchors and polytopes ------------------------------------------------------------


def anchor_sets(V: np.ndarray, C: float, size: int) -> list:
    """Subsets T with |T| <= size whose vector sum stays inside the ball."""
    n = V.shape[0]
    out = [()]
    stack = [((), np.zeros(V.shape[1]))]
    while stack:
        T, s = stack.pop()
        if len(T) >= size:
            continue
        for k in range(T[-1] + 1 if T else 0, n):
            s2 = s + V[k]
            if float(s2 @ s2) <= C * C * (1 + 1e-9) + 1e-9:
                out.append(T + (k,))
                stack.append((T + (k,), s2))
    return sorted(out, key=lambda T: (len(T), T))


@dataclass(frozen=True)
class SubRun:
    solution: BinarySolution
    collections: int
    anchors_per_constraint: tuple
    max_rows: int


def _factor_vectors(inst: ProblemInstance) -> list:
    return [np.asarray(c.U, dtype=float) for c in inst.constraints]


def _check_objective(inst: ProblemInstance, linear_geometric: bool):
    if inst.sense != "pack":
        raise ValueError("pack-sub needs a packing instance")
    if isinstance(inst.objective, LinearObjective) and not linear_geometric:
        raise ValueError("linear objectives need the linear-geometric flag")
    if not isinstance(inst.objective, (CoverageObjective, LinearObjective)):
        raise ValueError("pack-sub supports coverage (or flagged linear) objectives")
    if any(c.q is not None and np.any(c.q > 0) for c in inst.constraints):
        raise ValueError("pack-sub takes pure quadratic constraints")


def _linear_system(inst: ProblemInstance) -> KnapsackSystem | None:
    A, b = inst.linear_rows()
    return KnapsackSystem(A, b) if A.shape[0] else None


def pack_sub_run(inst: ProblemInstance, eps: float, backend: str = "exact",
                 budget: FactorizeBudget = FactorizeBudget(), linear_geometric: bool = False) -> SubRun:
    _check_objective(inst, linear_geometric)
    n = inst.n
    if n == 0:
        return SubRun(inst.solution(()), 1, (), 0)
    work = ensure_factors(inst, budget)
    vecs = _factor_vectors(work)
    size = anchor_size(eps)
    anchors = [anchor_sets(V, c.C, size) for V, c in zip(vecs, work.constraints)]
    polys = [[build_inscribed_polytope(V[list(T)].sum(axis=0), c.C, eps) for T in A_i]
             for V, c, A_i in zip(vecs, work.constraints, anchors)]
    systems = [[knapsack_reduction(P, V) for P in P_i] for V, P_i in zip(vecs, polys)]
    max_rows = sum(max((s.rows for s in S_i), default=0) for S_i in systems)
    total = int(np.prod([len(a) for a in anchors])) if anchors else 1
    lin = _linear_system(work)
    if backend == "exact":
        S = _exact_over_collections(work, systems, lin)
    else:
        S = _literal_over_collections(work, anchors, systems, lin, backend)
    return SubRun(inst.solution(S), total, tuple(len(a) for a in anchors), max_rows)


def _exact_over_collections(inst, systems, lin) -> tuple:
    """Exact backend over every collection at once.

    With an exact backend the best answer over all collections is the best
    subset in the union of their feasible sets, and that union factors as the
    intersection over constraints of the per-constraint unions."""
    n = inst.n
    if n > EXACT_CAP:
        raise BackendError(f"exact backend refuses n={n} > {EXACT_CAP}")
    best, winners = -np.inf, []
    for start in range(0, 1 << n, CHUNK):
        stop = min(1 << n, start + CHUNK)
        X = mask_matrix(start, stop, n)
        ok = np.ones(len(X), dtype=bool)
        for S_i in systems:
            any_i = np.zeros(len(X), dtype=bool)
            for sys in S_i:
                any_i |= sys.feasible_rows(X, SOLVER_TOL)
            ok &= any_i
        if lin is not None:
            ok &= lin.feasible_rows(X, SOLVER_TOL)
        vals = np.where(ok, objective_rows(inst.objective, X), -np.inf)
        top = float(vals.max())
        tol = 1e-12 * max(1.0, abs(top))
        if top > best + tol:
            best, winners = top, []
        if top >= best - tol:
            winners.extend((np.nonzero(vals >= top - tol)[0] + start).tolist())
    return _lexmin(np.array(winners), n)


def _literal_over_collections(inst, anchors, systems, lin, backend) -> tuple:
    n = inst.n
    combos = list(product(*[range(len(a)) for a in anchors]))
    best_val, best_S = -np.inf, None

    def run(combo):
        parts = [systems[i][c] for i, c in enumerate(combo)]
        if lin is not None:
            parts.append(lin)
        try:
            S = mdks_solve(inst.objective, KnapsackSystem.stack(parts), backend, n)
        except BackendError as e:
            raise BackendError(str(e), tuple(anchors[i][c] for i, c in enumerate(combo))) from e
        return S, evaluate_objective(inst.objective, S)

    for chunk in batches(combos, BATCH):
        for S, val in pmap(run, chunk):
            if _better(val, S, best_val, best_S):
                best_val, best_S = val, S
    return () if best_S is None else best_S


def pack_sub_approx(inst: ProblemInstance, eps: float, backend: str = "exact",
                    budget: FactorizeBudget = FactorizeBudget(), linear_geometric: bool = False) -> BinarySolution:
    return pack_sub_run(inst, eps, backend, budget, linear_geometric).solution


# Constructive partition and drop ----------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    axis: int
    groups: tuple
    sums: tuple


def pack_partition(vectors, w, eps: float, order: Sequence | None = None) -> Partition:
    """Consecutive batching of the vectors along one axis with a large total."""
    V = np.asarray(vectors, dtype=float)
    r = V.shape[1]
    w = np.asarray(w, dtype=float)
    idx = list(range(len(V))) if order is None else list(order)
    small = eps / (2 * r) * w
    if np.any(V > small[None, :] * (1 + 1e-12) + 1e-15):
        raise PreconditionError("a vector exceeds the small-component bound")
    kappa = V.sum(axis=0)
    axes = [j for j in range(r) if kappa[j] >= w[j] / r * (1 - 1e-12)]
    if not axes:
        raise PreconditionError("no axis carries a large enough total")
    j = axes[0]
    cap = eps / r * w[j]
    groups, cur, s = [], [], 0.0
    for pos, k in enumerate(idx):
        v = V[pos, j]
        if cur and s + v > cap * (1 + 1e-12):
            groups.append((cur, s))
            cur, s = [], 0.0
        cur.append(k)
        s += v
    if cur:
        groups.append((cur, s))
    if len(groups) > 1 and groups[-1][1] <= small[j] * (1 + 1e-12):
        last = groups.pop()
        prev = groups.pop()
        groups.append((prev[0] + last[0], prev[1] + last[1]))
    return Partition(j, tuple(tuple(g) for g, _ in groups), tuple(float(t) for _, t in groups))


def drop_choice(f: Callable, S, parts) -> int:
    """Lowest part index whose removal keeps at least (1 - 1/k) of f(S)."""
    S = set(S)
    k = len(parts)
    base = f(sorted(S))
    vals = [f(sorted(S - set(P))) for P in parts]
    for i, v in enumerate(vals):
        if v >= (1 - 1 / k) * base - 1e-12:
            return i
    return int(np.argmax(vals))


@dataclass(frozen=True)
class Construction:
    anchors: tuple
    subset: tuple
    polytopes: tuple


def qc_construct(f: Callable, vectors: Sequence[np.ndarray], capacities, eps: float, S_star,
                 utility=None) -> Construction:
    """Anchor collection and a subset of S_star feasible for its polytopes.

    vectors[i] is the n x r_i factor of constraint i; f maps a sorted list of
    items to a value. With a utility vector the drop step removes the cheapest
    candidate instead of following the submodular rule."""
    S = sorted(set(int(k) for k in S_star))
    limit = anchor_size(eps)
    anchors, polys = [], []
    for V, C in zip(vectors, capacities):
        V = np.asarray(V, dtype=float)
        r = V.shape[1]
        T: list = []
        while True:
            w = axis_widths(V[T].sum(axis=0), C)
            rest = [k for k in S if k not in T]
            big = [k for k in rest if np.any(V[k] > eps / (2 * r) * w)]
            T += big
            if len(T) >= 1 / eps - 1e-12 or not big or len(T) == len(S):
                break
        if len(T) >= 1 / eps - 1e-12:
            T = T[:limit]
        poly = build_inscribed_polytope(V[T].sum(axis=0), C, eps)
        if not poly.contains(V[S].sum(axis=0)):
            rest = [k for k in S if k not in T]
            if len(T) >= 1 / eps - 1e-12:
                groups = [tuple(rest)] if rest else []
            else:
                part = pack_partition(V[rest], poly.widths, eps, order=rest)
                groups = list(part.groups)
            parts = [(k,) for k in T] + groups
            if utility is not None:
                cost = [float(np.sum(np.asarray(utility)[list(P)])) for P in parts]
                choice = int(np.argmin(cost))
            else:
                fS = f(S)
                ok = [i for i, P in enumerate(parts) if f(sorted(set(S) - set(P))) >= (1 - eps) * fS - 1e-12]
                choice = ok[0] if ok else drop_choice(f, S, parts)
            S = sorted(set(S) - set(parts[choice]))
            if parts[choice][0] in T and len(parts[choice]) == 1 and choice < len(T):
                T = [k for k in T if k != parts[choice][0]]
                poly = build_inscribed_polytope(V[T].sum(axis=0), C, eps)
        anchors.append(tuple(sorted(T)))
        polys.append(poly)
    return Construction(tuple(anchors), tuple(S), tuple(polys))
