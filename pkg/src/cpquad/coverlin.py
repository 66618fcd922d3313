"""Covering with a linear cost and one quadratic constraint.

For every budget guess B the cheap items are fixed in, the expensive ones out,
and the rest are split into direction x utility cells. Each cell then offers
either a small explicit subset or a prefix of its length-sorted items, and the
cheapest assembled cover wins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .factorize import FactorizeBudget, ensure_factors
from .geometry import SpacePartition, space_partition
from .instance import BinarySolution, LinearObjective, ProblemInstance
from .parallel import pmap

COVER_TOL = 1e-9
MAX_GUESSES = 100_000


class InfeasibleError(ValueError):
    pass


def _covers(v, C: float) -> bool:
    v = np.asarray(v, dtype=float)
    return float(v @ v) >= C * C - COVER_TOL * max(1.0, C * C)


def _cheaper(cost, S, best_cost, best_S) -> bool:
    if best_S is None:
        return True
    tol = 1e-12 * max(1.0, abs(best_cost))
    return cost < best_cost - tol or (abs(cost - best_cost) <= tol and S < best_S)


def length_order(vectors, items) -> list:
    """Items by non-increasing vector length, ties by index."""
    V = np.asarray(vectors, dtype=float)
    return sorted(items, key=lambda k: (-float(np.linalg.norm(V[k])), k))


def greedy_prefix(vectors, C: float, anchor=None) -> list | None:
    """Shortest length-sorted prefix whose sum (plus the anchor) reaches C."""
    V = np.asarray(vectors, dtype=float)
    s = np.zeros(V.shape[1]) if anchor is None else np.asarray(anchor, dtype=float).copy()
    out = []
    if _covers(s, C):
        return out
    for k in length_order(V, range(len(V))):
        out.append(k)
        s = s + V[k]
        if _covers(s, C):
            return out
    return None


def greedy_cover(u, vectors, C: float, eps: float, anchor=None) -> tuple:
    """Better of the best cover of at most ceil(1/eps) items and the greedy prefix.

    Items are positions in vectors. Raises InfeasibleError when even all items
    together fall short of C."""
    u = np.asarray(u, dtype=float)
    V = np.asarray(vectors, dtype=float)
    n = len(V)
    base = np.zeros(V.shape[1]) if anchor is None else np.asarray(anchor, dtype=float)
    small, small_cost = None, np.inf
    for size in range(0, min(n, math.ceil(1 / eps - 1e-12)) + 1):
        for S in combinations(range(n), size):
            if _covers(base + V[list(S)].sum(axis=0), C) and _cheaper(float(u[list(S)].sum()), S, small_cost, small):
                small, small_cost = S, float(u[list(S)].sum())
    prefix = greedy_prefix(V, C, base)
    if prefix is None and small is None:
        raise InfeasibleError("the vectors cannot reach the demand")
    if prefix is not None:
        G = tuple(sorted(prefix))
        if small is None or float(u[list(G)].sum()) <= small_cost:
            return G
    return small


# Classes -------------------------------------------------------------------------


@dataclass(frozen=True)
class BudgetGuess:
    B: float
    forced_out: tuple
    forced_in: tuple
    residual: tuple


def budget_guesses(u, eps: float) -> list:
    """B = (1 + eps)^i min u for i = 0, 1, ... until B exceeds n max u."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    pos = u[u > 0]
    zero = tuple(int(k) for k in np.nonzero(u <= 0)[0])
    if len(pos) == 0:
        return [BudgetGuess(0.0, (), zero, ())]
    lo, hi = float(pos.min()), n * float(pos.max())
    out = []
    i = 0
    while True:
        B = lo * (1 + eps) ** i
        out_set = tuple(k for k in range(n) if u[k] >= (1 + eps) * B)
        in_set = tuple(k for k in range(n) if u[k] < eps / n * B)
        rest = tuple(k for k in range(n) if k not in out_set and k not in in_set)
        out.append(BudgetGuess(B, out_set, in_set, rest))
        if B > hi or i >= MAX_GUESSES:
            break
        i += 1
    return out


def utility_class_count(n: int, eps: float) -> int:
    return 1 + math.ceil(math.log(n / eps) / math.log1p(eps) - 1e-12)


def utility_class(uk: float, B: float, n: int, eps: float) -> int:
    """1-based l with uk in [(eps/n) B (1+eps)^(l-1), (eps/n) B (1+eps)^l)."""
    lo = eps / n * B
    l = int(math.floor(math.log(uk / lo) / math.log1p(eps))) + 1
    while l > 1 and uk < lo * (1 + eps) ** (l - 1):
        l -= 1
    while uk >= lo * (1 + eps) ** l:
        l += 1
    return max(l, 1)


def utility_classes(u, items, B: float, n: int, eps: float) -> dict:
    groups: dict = {}
    for k in items:
        groups.setdefault(utility_class(float(u[k]), B, n, eps), []).append(k)
    for l, ks in groups.items():
        vals = [float(u[k]) for k in ks]
        assert max(vals) <= min(vals) * (1 + eps) * (1 + 1e-12)
    return groups


@dataclass(frozen=True)
class Cells:
    space: SpacePartition
    cells: tuple  # tuples of items, each inside one space class and one utility class
    labels: tuple  # (space class, utility class) per cell


def build_cells(u, V, guess: BudgetGuess, C: float, eps: float, n: int) -> Cells:
    q_T = V[list(guess.forced_in)].sum(axis=0) if guess.forced_in else np.zeros(V.shape[1])
    items = [k for k in guess.residual]
    part = space_partition(q_T, C, eps, V[items], items)
    for s, cls in enumerate(part.classes):
        for k in cls:
            assert part.cosine(V[k], s) >= 1 - eps - 1e-12
    cells, labels = [], []
    for s, cls in enumerate(part.classes):
        for l, ks in sorted(utility_classes(u, cls, guess.B, n, eps).items()):
            cells.append(tuple(sorted(ks)))
            labels.append((s, l))
    return Cells(part, tuple(cells), tuple(labels))


# Enumeration -----------------------------------------------------------------------


def cell_options(cell, V, u, eps: float) -> list:
    """Every small subset (the cell is in the guessed set) and every nonempty
    length-sorted prefix (it is not), as unique sorted tuples."""
    size = math.ceil(1 / eps - 1e-12)
    opts = set()
    for t in range(0, min(len(cell), size) + 1):
        opts.update(combinations(cell, t))
    order = length_order(V, cell)
    for t in range(1, len(order) + 1):
        opts.add(tuple(sorted(order[:t])))
    return sorted(opts, key=lambda S: (len(S), S))


@dataclass
class _Partial:
    sums: np.ndarray  # rows x r
    costs: np.ndarray
    picks: list  # per row, tuple of option indices


def _assemble(base_sum, base_cost, options, V, u, C: float, best_cost: float):
    """Cheapest cover over the product of per-cell options, pruned by cost."""
    r = V.shape[1]
    sums = base_sum.reshape(1, r)
    costs = np.array([base_cost])
    picks = np.zeros((1, 0), dtype=np.int64)
    for opts in options:
        osum = np.array([V[list(S)].sum(axis=0) if S else np.zeros(r) for S in opts]).reshape(-1, r)
        ocost = np.array([float(u[list(S)].sum()) for S in opts])
        ns = (sums[:, None, :] + osum[None, :, :]).reshape(-1, r)
        nc = (costs[:, None] + ocost[None, :]).ravel()
        npk = np.concatenate([np.repeat(picks, len(opts), axis=0),
                              np.tile(np.arange(len(opts)), len(picks))[:, None]], axis=1)
        keep = nc <= best_cost * (1 + 1e-12) + 1e-12
        sums, costs, picks = ns[keep], nc[keep], npk[keep]
        if not len(costs):
            return None
    good = np.einsum("ij,ij->i", sums, sums) >= C * C - COVER_TOL * max(1.0, C * C)
    if not good.any():
        return None
    idx = np.nonzero(good)[0]
    found = []
    for i in idx:
        S = set()
        for c, o in enumerate(picks[i]):
            S.update(options[c][o])
        found.append((float(costs[i]), tuple(sorted(S))))
    return min(found)


@dataclass(frozen=True)
class CoverStats:
    guesses: int
    distinct: int
    bound: float


def cover_bound(eps: float, r: int) -> float:
    """(1+eps)^2 (1/(1 - 5 eps - sqrt(5 eps (2 - 5 eps) r)) + eps)(1 + eps)."""
    den = 1 - 5 * eps - math.sqrt(5 * eps * (2 - 5 * eps) * r)
    if den <= 0:
        raise ValueError(f"eps={eps} is too large for r={r}")
    return (1 + eps) ** 2 * (1 / den + eps) * (1 + eps)


def _solve_guess(key, V, u, C, eps, upper):
    forced_in, cells = key
    base = V[list(forced_in)].sum(axis=0) if forced_in else np.zeros(V.shape[1])
    cost = float(u[list(forced_in)].sum())
    options = [cell_options(c, V, u, eps) for c in cells]
    return _assemble(base, cost, options, V, u, C, upper)


def cover_lin_run(inst: ProblemInstance, eps: float,
                  budget: FactorizeBudget = FactorizeBudget()) -> tuple[BinarySolution, CoverStats]:
    if inst.sense != "cover" or inst.m != 1 or not isinstance(inst.objective, LinearObjective):
        raise ValueError("cover-lin needs a covering instance with one constraint and a linear cost")
    if inst.A is not None and len(inst.A):
        raise ValueError("cover-lin takes no extra linear rows")
    n = inst.n
    u = np.asarray(inst.objective.u, dtype=float)
    work = ensure_factors(inst, budget)
    con = work.constraints[0]
    V = np.asarray(con.U, dtype=float)
    C = con.C
    r = V.shape[1]
    bound = cover_bound(eps, max(r, 1))
    if not _covers(V.sum(axis=0), C):
        raise InfeasibleError("even the full item set does not cover the demand")
    best = (float(u.sum()), tuple(range(n)))
    keys = []
    guesses = budget_guesses(u, eps)
    for g in guesses:
        cells = build_cells(u, V, g, C, eps, n) if g.residual else Cells(None, (), ())
        key = (g.forced_in, tuple(sorted(cells.cells)))
        if key not in keys:
            keys.append(key)
    results = pmap(lambda k: _solve_guess(k, V, u, C, eps, best[0]), keys)
    for res in results:
        if res is not None and _cheaper(res[0], res[1], best[0], best[1]):
            best = res
    S = best[1]
    sol = inst.solution(S)
    if not sol.feasible:
        sol = inst.solution(tuple(range(n)))
    return sol, CoverStats(len(guesses), len(keys), bound)


def cover_lin_qptas(inst: ProblemInstance, eps: float, budget: FactorizeBudget = FactorizeBudget()) -> BinarySolution:
    return cover_lin_run(inst, eps, budget)[0]
