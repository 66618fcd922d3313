"""Approximate Pareto frontiers for linear objectives over a packing region, and
the single-objective wrappers built from them (quadratic, product, sum of ratios).

For every threshold tuple on the side objectives and every guessed set of top
items, the convex relaxation maximizes the last max-objective; a vertex of the
linearized polytope is rounded down and collected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convex import FractionalSolution, solve_relaxation
from .factorize import FactorizeBudget, cp_factorize, ensure_factors, numeric_rank
from .geometry import find_improving_bfs, fractional_count
from .instance import (
    BinarySolution,
    DomainError,
    LinearObjective,
    ProblemInstance,
    ProductObjective,
    QuadraticObjective,
    SumRatioObjective,
    evaluate_objective,
)
from .packlin import pack_lin_run, round_down, relaxation_for, rounding_polytope
from .parallel import pmap

VALUE_TOL = 1e-9


@dataclass(frozen=True)
class ThresholdGrid:
    """Geometric levels nu (1 - eps^2)^(1 - l) for l = 1..top, plus level 0."""

    nu: float
    exponent: int  # v_j or w_j
    top: int  # highest level index
    base: float  # 1 - eps^2

    def level(self, l: int) -> float:
        return 0.0 if l == 0 else self.nu * self.base ** (1 - l)

    def levels(self) -> np.ndarray:
        return np.array([self.level(l) for l in range(self.top + 1)])


def grid_exponent(seed_value: float, nu: float, eps: float) -> int:
    """ceil(log_{1/(1-eps^2)}(seed_value / nu)), zero for a vanishing seed."""
    if seed_value <= 0:
        return 0
    t = math.log(seed_value / nu) / -math.log1p(-eps * eps)
    return max(0, math.ceil(t - 1e-12))


def _grid(coef, seed_value: float, eps: float, extra: int) -> ThresholdGrid:
    pos = coef[coef > 0]
    nu = float(pos.min()) if len(pos) else 1.0
    v = grid_exponent(seed_value, nu, eps)
    return ThresholdGrid(nu, v, v + extra, 1 - eps * eps)


@dataclass(frozen=True)
class ParetoSet:
    solutions: tuple  # (subset, max values, min values)
    seeds: tuple  # seed subsets S_j then T_j
    grids: tuple
    lam: int
    candidates: int
    solves: int
    max_fractional: int
    fractional_bound: int

    def subsets(self) -> list:
        return [s for s, _, _ in self.solutions]

    def to_json(self) -> list:
        return [{"subset": list(s), "objectives": [float(v) for v in f] + [float(v) for v in g]}
                for s, f, g in self.solutions]


def pareto_lambda(inst: ProblemInstance, p: int, eps: float) -> int:
    phi = sum(c.rank + 1 for c in inst.constraints)
    A, _ = inst.linear_rows()
    d = A.shape[0]
    rows = phi + 2 * p + d + inst.m - 1
    return math.ceil(rows * (1 + eps) / (eps * (1 - eps)) - 1e-12)


def fractional_limit(inst: ProblemInstance, p: int) -> int:
    A, _ = inst.linear_rows()
    return sum(c.rank + 1 for c in inst.constraints) + 2 * p + A.shape[0] + inst.m - 1


def _top(U: tuple, a: np.ndarray, count: int) -> tuple:
    return tuple(sorted(sorted(U, key=lambda k: (-a[k], k))[:count]))


def guess_sets(inst: ProblemInstance, maxima: np.ndarray, lam: int) -> list:
    """Feasible U = X_1 u ... u X_p where X_j is the top-min(lam, |U|) of U by a_j.

    The guess for a feasible S built from its own top items always has this
    form, so the list covers every tuple the analysis relies on."""
    p = len(maxima)
    out = []
    stack = [()]
    while stack:
        U = stack.pop()
        cnt = min(lam, len(U))
        X = [_top(U, a, cnt) for a in maxima]
        if set().union(*X) == set(U):
            V = set()
            for a, Xj in zip(maxima, X):
                if Xj:
                    lo = min(a[k] for k in Xj)
                    V.update(k for k in range(inst.n) if k not in Xj and a[k] > lo)
            if not (V & set(U)):
                out.append((U, tuple(sorted(V))))
        if len(U) >= p * lam:
            continue
        for k in range(U[-1] + 1 if U else 0, inst.n):
            T = U + (k,)
            if inst.is_feasible(T):
                stack.append(T)
    return sorted(out)


@dataclass
class _Scan:
    candidates: list = field(default_factory=list)
    solves: int = 0
    max_fractional: int = 0


def _round(inst, target, sol, U, V, maxima, minima):
    n = inst.n
    free = [k for k in range(n) if k not in U and k not in V]
    x = sol.x
    ge = [(a, float(a @ x)) for a in maxima[:-1]]
    le = [(b, float(b @ x)) for b in minima]
    poly = rounding_polytope(inst, x, U, free, le, ge)
    y = find_improving_bfs(poly.G, poly.h, x[free], target[free])
    frac = fractional_count(y)
    xb = round_down(y, U, V, free, n)
    S = tuple(int(k) for k in np.nonzero(xb > 0.5)[0])
    if not inst.is_feasible(S):
        S = tuple(U)
    return S, frac


def _scan_guess(inst, guess, maxima, minima, grids, eps) -> _Scan:
    """All threshold tuples for one guess, loosest first.

    A tuple is skipped when a looser tuple was infeasible (so is this one) or
    when an earlier relaxation optimum already meets its thresholds (that
    optimum is an eps-optimal answer here too and yields the same rounding)."""
    U, V = guess
    n = inst.n
    free = [k for k in range(n) if k not in U and k not in V]
    target = maxima[-1]
    side = maxima[:-1]
    one = np.zeros(n)
    one[list(U)] = 1.0
    box = one.copy()
    box[free] = 1.0
    hi = [float(a @ box) for a in side]
    lo_b = [float(b @ one) for b in minima]
    a_levels = [g.levels() for g in grids[: len(side)]]
    b_levels = [g.levels()[::-1] for g in grids[len(maxima):]]
    dims = a_levels + b_levels
    out = _Scan()
    seen = set()
    infeasible = []  # tuples (alpha..., beta...) known infeasible
    optima = []  # (side values, min values)

    def visit(th):
        alpha, beta = th[: len(side)], th[len(side):]
        if any(al > h + VALUE_TOL * max(1.0, h) for al, h in zip(alpha, hi)):
            return False
        if any(be < l - VALUE_TOL * max(1.0, l) for be, l in zip(beta, lo_b)):
            return False
        for t in infeasible:
            if all(al >= ta for al, ta in zip(alpha, t[: len(side)])) and \
                    all(be <= tb for be, tb in zip(beta, t[len(side):])):
                return False
        for fa, gb in optima:
            if all(v >= al - VALUE_TOL * max(1.0, al) for v, al in zip(fa, alpha)) and \
                    all(v <= be + VALUE_TOL * max(1.0, be) for v, be in zip(gb, beta)):
                return True
        if not free:
            S = tuple(U)
            optima.append(([float(a @ one) for a in side], [float(b @ one) for b in minima]))
            if S not in seen:
                seen.add(S)
                out.candidates.append(S)
            return True
        ge = [(a, al) for a, al in zip(side, alpha) if al > 0]
        le = list(zip(minima, beta))
        spec = relaxation_for(inst, target, U, V, le, ge)
        sol = solve_relaxation(spec, eps)
        out.solves += 1
        if not isinstance(sol, FractionalSolution):
            infeasible.append(th)
            return False
        optima.append(([float(a @ sol.x) for a in side], [float(b @ sol.x) for b in minima]))
        S, frac = _round(inst, target, sol, U, V, maxima, minima)
        out.max_fractional = max(out.max_fractional, frac)
        if S not in seen:
            seen.add(S)
            out.candidates.append(S)
        return True

    def walk(prefix, depth):
        if depth == len(dims):
            return visit(tuple(prefix))
        any_ok = False
        for v in dims[depth]:
            ok = walk(prefix + [v], depth + 1)
            any_ok |= ok
            if not ok and depth == len(dims) - 1:
                break
        return any_ok

    walk([], 0)
    return out


def _dominates(f1, g1, f2, g2) -> bool:
    weak = np.all(f1 >= f2) and np.all(g1 <= g2)
    return bool(weak and (np.any(f1 > f2) or np.any(g1 < g2)))


def filter_dominated(items) -> list:
    """Drop exactly dominated entries and duplicate objective vectors (keep the
    smallest subset)."""
    items = sorted(items, key=lambda t: t[0])
    keep = []
    for S, f, g in items:
        if any(_dominates(f2, g2, f, g) or (np.array_equal(f2, f) and np.array_equal(g2, g))
               for _, f2, g2 in keep):
            continue
        keep = [(S2, f2, g2) for S2, f2, g2 in keep if not _dominates(f, g, f2, g2)]
        keep.append((S, f, g))
    return sorted(keep, key=lambda t: t[0])


def pareto_opt(inst: ProblemInstance, maxima, minima=None, eps: float = 0.25,
               budget: FactorizeBudget = FactorizeBudget(), lam: int | None = None) -> ParetoSet:
    """eps-approximate Pareto set for max a_j^T x and min b_j^T x over the region of inst."""
    if inst.sense != "pack":
        raise ValueError("Pareto sets are computed over packing regions")
    maxima = np.atleast_2d(np.asarray(maxima, dtype=float))
    minima = np.zeros((0, inst.n)) if minima is None else np.atleast_2d(np.asarray(minima, dtype=float))
    if maxima.shape[0] < 1:
        raise ValueError("at least one max-objective is needed")
    if np.any(maxima < 0) or np.any(minima < 0):
        raise ValueError("objective coefficients must be nonnegative")
    work = ensure_factors(inst, budget)
    p = max(maxima.shape[0], minima.shape[0])
    eps2 = eps * eps
    seeds, grids = [], []
    for a in maxima:
        S, _ = pack_lin_run(work, eps2, budget, u=a)
        seeds.append(S.subset)
    for b in minima:
        T, _ = pack_lin_run(work, eps2, budget, u=b)
        seeds.append(T.subset)
    for a, S in zip(maxima, seeds):
        grids.append(_grid(a, float(a[list(S)].sum()), eps, 1))
    for b, T in zip(minima, seeds[len(maxima):]):
        grids.append(_grid(b, float(b[list(T)].sum()), eps, 2))
    lam = pareto_lambda(work, p, eps) if lam is None else lam
    guesses = guess_sets(work, maxima, lam)
    scans = pmap(lambda g: _scan_guess(work, g, maxima, minima, grids, eps), guesses)
    subsets = sorted({S for sc in scans for S in sc.candidates})
    sols = [(S, maxima[:, list(S)].sum(axis=1), minima[:, list(S)].sum(axis=1)) for S in subsets
            if inst.is_feasible(S)]
    kept = filter_dominated(sols)
    return ParetoSet(tuple(kept), tuple(seeds), tuple(grids), lam, len(subsets),
                     sum(sc.solves for sc in scans), max((sc.max_fractional for sc in scans), default=0),
                     fractional_limit(work, p))


def covers(front: ParetoSet, f, g, eps: float, slack: float = VALUE_TOL) -> bool:
    """Some member has f' >= (1-eps) f and g' <= g / (1-eps)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    for _, f2, g2 in front.solutions:
        if np.all(f2 >= (1 - eps) * f - slack) and np.all(g2 <= g / (1 - eps) + slack):
            return True
    return False


# Wrappers ----------------------------------------------------------------------


def _best_member(inst: ProblemInstance, front: ParetoSet, skip_empty: bool = False) -> BinarySolution:
    best, best_val = None, -np.inf
    for S, _, _ in front.solutions:
        if skip_empty and not S:
            continue
        try:
            v = evaluate_objective(inst.objective, S)
        except DomainError:
            continue
        if best is None or v > best_val + 1e-12 * max(1.0, abs(best_val)):
            best, best_val = S, v
    return inst.solution(() if best is None else best)


def objective_forms(obj: QuadraticObjective, budget: FactorizeBudget = FactorizeBudget()) -> np.ndarray:
    """Rows a_1..a_p with Q = sum a_j a_j^T, followed by q when it is nonzero."""
    U = obj.U
    if U is None:
        r = max(1, numeric_rank(obj.Q))
        fact = cp_factorize(obj.Q, r, budget)
        if not fact:
            raise ValueError("no nonnegative factor found for the objective")
        U = fact.U
    rows = [col for col in np.asarray(U, dtype=float).T if np.any(col > 0)]
    if np.any(obj.q > 0):
        rows.append(np.asarray(obj.q, dtype=float))
    if not rows:
        rows.append(np.zeros(len(obj.q)))
    return np.array(rows)


def bqcqp_ptas(inst: ProblemInstance, eps: float, budget: FactorizeBudget = FactorizeBudget()) -> BinarySolution:
    if not isinstance(inst.objective, QuadraticObjective):
        raise ValueError("bqcqp needs a quadratic objective")
    front = pareto_opt(inst, objective_forms(inst.objective, budget), None, eps, budget)
    return _best_member(inst, front)


def bmpp_ptas(inst: ProblemInstance, eps: float, budget: FactorizeBudget = FactorizeBudget()) -> BinarySolution:
    if not isinstance(inst.objective, ProductObjective):
        raise ValueError("bmpp needs a product objective")
    front = pareto_opt(inst, inst.objective.vectors, None, eps, budget)
    return _best_member(inst, front)


def sum_ratio_ptas(inst: ProblemInstance, eps: float, budget: FactorizeBudget = FactorizeBudget()) -> BinarySolution:
    if not isinstance(inst.objective, SumRatioObjective):
        raise ValueError("sum-ratio needs a ratio objective")
    obj = inst.objective
    front = pareto_opt(inst, obj.numerators, obj.denominators, eps, budget)
    return _best_member(inst, front, skip_empty=True)


def linear_objectives(inst: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    """Max and min linear forms carried by an instance objective."""
    obj = inst.objective
    if isinstance(obj, LinearObjective):
        return np.atleast_2d(obj.u), np.zeros((0, inst.n))
    if isinstance(obj, ProductObjective):
        return obj.vectors, np.zeros((0, inst.n))
    if isinstance(obj, SumRatioObjective):
        return obj.numerators, obj.denominators
    if isinstance(obj, QuadraticObjective):
        return objective_forms(obj), np.zeros((0, inst.n))
    raise ValueError("objective has no linear forms")
