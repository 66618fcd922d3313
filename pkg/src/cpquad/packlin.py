"""Packing with a linear objective: guess the top utility items, solve the convex
relaxation, move to a vertex of the linearized polytope and round down."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convex import FractionalSolution, RelaxationSpec, solve_relaxation
from .factorize import FactorizeBudget, ensure_factors
from .geometry import find_improving_bfs, fractional_count
from .instance import BinarySolution, LinearObjective, ProblemInstance
from .parallel import batches, pmap

BATCH = 16


@dataclass(frozen=True)
class EnumerationConfig:
    eps: float
    rbar: int
    cap: int | None = None

    @property
    def lam(self) -> int:
        lam = max(1, math.ceil(self.rbar / self.eps - 1e-12))
        return lam if self.cap is None else min(lam, self.cap)


def rounding_rank(inst: ProblemInstance) -> int:
    """Rows of the rounding polytope: r_i + 1 per constraint, one per linear term, d for Ax <= b."""
    rbar = sum(c.rank + 1 for c in inst.constraints)
    rbar += sum(1 for c in inst.constraints if c.q is not None and np.any(c.q > 0))
    A, _ = inst.linear_rows()
    return rbar + A.shape[0]


def guard_ok(inst: ProblemInstance, S) -> bool:
    """The fixed-one set alone respects every constraint."""
    return inst.is_feasible(S)


def guarded_subsets(inst: ProblemInstance, max_size: int) -> list:
    """All subsets of size <= max_size passing the guard (the family is downward closed)."""
    out = [()]
    stack = [()]
    while stack:
        S = stack.pop()
        if len(S) >= max_size:
            continue
        start = S[-1] + 1 if S else 0
        for k in range(start, inst.n):
            T = S + (k,)
            if guard_ok(inst, T):
                out.append(T)
                stack.append(T)
    return out


def round_down(y, fixed_one, fixed_zero, free, n: int) -> np.ndarray:
    """Floor the free coordinates of y, then impose the fixed coordinates."""
    x = np.zeros(n)
    x[list(free)] = np.floor(np.asarray(y, dtype=float))
    x[list(fixed_one)] = 1.0
    x[list(fixed_zero)] = 0.0
    return x


@dataclass(frozen=True)
class RoundingPolytope:
    """Rows G y <= h over the free coordinates, all tight at the relaxation optimum
    except the explicit threshold rows."""

    G: np.ndarray
    h: np.ndarray
    free: tuple


def rounding_polytope(inst: ProblemInstance, xstar: np.ndarray, fixed_one, free,
                      extra_le=(), extra_ge=()) -> RoundingPolytope:
    F = np.array(free, dtype=int)
    one = np.zeros(inst.n)
    one[list(fixed_one)] = 1.0
    xN = xstar[F]
    rows = []
    for con in inst.constraints:
        for row in con.U.T[:, F]:
            rows.append((row, float(row @ xN)))
        if fixed_one:
            cross = one @ con.Q[:, F]
            rows.append((cross, float(cross @ xN)))
        if con.q is not None and np.any(con.q > 0):
            rows.append((con.q[F], float(con.q[F] @ xN)))
    A, _ = inst.linear_rows()
    for a in A:
        rows.append((a[F], float(a[F] @ xN)))
    for a, bound in extra_le:
        a = np.asarray(a, float)
        rows.append((a[F], float(bound - a @ one)))
    for a, bound in extra_ge:
        a = np.asarray(a, float)
        rows.append((-a[F], -float(bound - a @ one)))
    rows = [(g, t) for g, t in rows if np.any(g != 0)]
    G = np.array([g for g, _ in rows]).reshape(len(rows), len(F))
    h = np.array([t for _, t in rows], dtype=float)
    return RoundingPolytope(G, h, tuple(int(k) for k in F))


def relaxation_for(inst: ProblemInstance, u, fixed_one, fixed_zero, extra_le=(), extra_ge=()) -> RelaxationSpec:
    quads = tuple((c.Q, c.q, c.cap) for c in inst.constraints)
    A, b = inst.linear_rows()
    le_G = [a for a in A] + [np.asarray(a, float) for a, _ in extra_le]
    le_h = list(b) + [float(t) for _, t in extra_le]
    ge_G = [np.asarray(a, float) for a, _ in extra_ge]
    ge_h = [float(t) for _, t in extra_ge]
    n = inst.n
    return RelaxationSpec(
        np.asarray(u, float), quads,
        (np.array(le_G).reshape(-1, n), np.array(le_h)) if le_G else (None, None),
        (np.array(ge_G).reshape(-1, n), np.array(ge_h)) if ge_G else (None, None),
        frozenset(fixed_one), frozenset(fixed_zero))


@dataclass
class CandidateResult:
    subset: tuple | None
    value: float
    relaxed: float
    fractional: int = 0
    solved: bool = False
    fallback: bool = False


def solve_candidate(inst: ProblemInstance, u, fixed_one, fixed_zero, eps, extra_le=(), extra_ge=()) -> CandidateResult:
    """Relax, purify and round a single guess; the rounded set is checked exactly."""
    n = inst.n
    free = [k for k in range(n) if k not in fixed_one and k not in fixed_zero]
    u = np.asarray(u, float)
    if not free:
        S = tuple(sorted(fixed_one))
        return CandidateResult(S, float(u[list(S)].sum()), float(u[list(S)].sum()))
    spec = relaxation_for(inst, u, fixed_one, fixed_zero, extra_le, extra_ge)
    sol = solve_relaxation(spec, eps)
    if not isinstance(sol, FractionalSolution):
        return CandidateResult(None, -np.inf, -np.inf, solved=True)
    poly = rounding_polytope(inst, sol.x, fixed_one, free, extra_le, extra_ge)
    y = find_improving_bfs(poly.G, poly.h, sol.x[list(free)], u[list(free)])
    frac = fractional_count(y)
    x = round_down(y, fixed_one, fixed_zero, free, n)
    S = tuple(int(k) for k in np.nonzero(x > 0.5)[0])
    fallback = False
    if not inst.is_feasible(S):
        S, fallback = tuple(sorted(fixed_one)), True
    return CandidateResult(S, float(u[list(S)].sum()), sol.value, frac, True, fallback)


@dataclass
class PackLinStats:
    lam: int = 0
    candidates: int = 0
    solves: int = 0
    pruned: int = 0
    fallbacks: int = 0
    max_fractional: int = 0


def _better(val, S, best_val, best_S) -> bool:
    if best_S is None:
        return True
    if val > best_val + 1e-12 * max(1.0, abs(best_val)):
        return True
    return abs(val - best_val) <= 1e-12 * max(1.0, abs(best_val)) and S < best_S


def pack_lin_run(inst: ProblemInstance, eps: float, budget: FactorizeBudget = FactorizeBudget(),
                 u=None, cap: int | None = None) -> tuple[BinarySolution, PackLinStats]:
    if inst.sense != "pack":
        raise ValueError("pack-lin needs a packing instance")
    if u is None:
        if not isinstance(inst.objective, LinearObjective):
            raise ValueError("pack-lin needs a linear objective")
        u = inst.objective.u
    u = np.asarray(u, dtype=float)
    work = ensure_factors(inst, budget)
    cfg = EnumerationConfig(eps, rounding_rank(work), cap)
    stats = PackLinStats(lam=cfg.lam)
    cands = guarded_subsets(work, cfg.lam)
    cands.sort(key=lambda S: (-float(u[list(S)].sum()), S))
    stats.candidates = len(cands)
    n = inst.n
    best_val, best_S = 0.0, ()
    jobs = []
    for U_set in cands:
        umin = min((u[k] for k in U_set), default=np.inf)
        V_set = [k for k in range(n) if k not in U_set and u[k] > umin]
        N = [k for k in range(n) if k not in U_set and k not in V_set]
        if N and U_set:
            assert min(u[k] for k in U_set) >= max(u[k] for k in N)
        jobs.append((U_set, tuple(V_set), float(u[list(U_set)].sum() + u[N].sum())))
    for chunk in batches(jobs, BATCH):
        live = [j for j in chunk if j[2] > best_val + 1e-12 * max(1.0, best_val)]
        stats.pruned += len(chunk) - len(live)
        results = pmap(lambda j: solve_candidate(work, u, j[0], j[1], eps), live)
        for res in results:
            stats.solves += int(res.solved)
            stats.fallbacks += int(res.fallback)
            stats.max_fractional = max(stats.max_fractional, res.fractional)
            if res.subset is not None and _better(res.value, res.subset, best_val, best_S):
                best_val, best_S = res.value, res.subset
    return inst.solution(best_S), stats


def pack_lin_ptas(inst: ProblemInstance, eps: float, budget: FactorizeBudget = FactorizeBudget()) -> BinarySolution:
    """Feasible S with u(S) >= (1 - 2 eps) OPT."""
    return pack_lin_run(inst, eps, budget)[0]
