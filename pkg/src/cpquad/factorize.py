"""Numeric completely positive factorization Q = U U^T with U >= 0.

The search runs over the r x s matrix H acting on a fixed basis of s columns of
Q: every factor has the form U^T = H Q_V, and U U^T = Q exactly when
H^T H = Q[V,V]^{-1}. Writing H = O L with L^T L = Q[V,V]^{-1} leaves an r x s
matrix O with orthonormal columns to find such that W O^T >= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

from .instance import ProblemInstance, QuadraticConstraint, symmetric_gram
from .parallel import batches, pmap
from .rng import make_rng

RANK_TOL = 1e-8
DOMINANCE_TOL = 1e-14
BATCH = 16


class RankError(ValueError):
    pass


class MarginError(ValueError):
    pass


class ResidualError(ValueError):
    pass


@dataclass(frozen=True)
class FactorizeBudget:
    max_restarts: int = 64
    max_iterations: int = 400
    delta: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.max_restarts < 1 or self.max_iterations < 1 or self.delta <= 0:
            raise ValueError("budget fields must be positive")


@dataclass(frozen=True)
class CPFactorization:
    U: np.ndarray
    residual: float
    dominates: bool
    inner_dim: int
    restarts: int = 0

    def to_json(self) -> dict:
        return {"U": self.U.tolist(), "residual": self.residual, "dominates": self.dominates,
                "inner_dim": self.inner_dim}


@dataclass(frozen=True)
class NotFound:
    best_residual: float
    restarts: int

    def __bool__(self) -> bool:
        return False


def residual_of(U: np.ndarray, Q: np.ndarray) -> float:
    return float(np.max(np.abs(U @ U.T - Q), initial=0.0))


def make_factorization(U: np.ndarray, Q: np.ndarray, restarts: int = 0) -> CPFactorization:
    U = np.array(U, dtype=float)
    diff = U @ U.T - Q
    dom = bool(np.min(diff, initial=0.0) >= -DOMINANCE_TOL)
    return CPFactorization(U, residual_of(U, Q), dom, U.shape[1], restarts)


def numeric_rank(Q: np.ndarray) -> int:
    if Q.size == 0:
        return 0
    s = np.linalg.svd(Q, compute_uv=False)
    if s[0] <= 0:
        return 0
    return int(np.sum(s >= RANK_TOL * s[0]))


@dataclass(frozen=True)
class _Basis:
    V: np.ndarray  # chosen column indices
    QV: np.ndarray  # s x n
    L: np.ndarray  # s x s, L^T L = Q[V,V]^{-1}
    W: np.ndarray  # n x s, W = QV^T L^T


def column_basis(Q: np.ndarray, s: int) -> _Basis:
    _, _, piv = qr(Q, pivoting=True)
    V = np.sort(piv[:s])
    QV = Q[V, :]
    M = Q[np.ix_(V, V)]
    M = (M + M.T) / 2
    # M^{-1} = L^T L with L = chol(M)^{-1}, chol(M) lower so M = C C^T
    Cm = np.linalg.cholesky(M)
    L = np.linalg.solve(Cm, np.eye(s))
    W = QV.T @ L.T
    return _Basis(V, QV, L, W)


def _procrustes(K: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(K, full_matrices=False)
    return u @ vt


def _alternate(basis: _Basis, O: np.ndarray, iters: int) -> np.ndarray:
    W = basis.W
    for _ in range(iters):
        U = W @ O.T
        if np.min(U) >= 0:
            break
        P = np.maximum(U, 0.0)
        O = _procrustes(P.T @ W)
    return O


def _polish(basis: _Basis, H: np.ndarray, Q: np.ndarray, iters: int, penalty: float = 10.0) -> np.ndarray:
    """Damped least squares on (H Q_V)^T (H Q_V) - Q plus a negativity penalty."""
    QV = basis.QV
    r, s = H.shape
    n = Q.shape[0]
    iu = np.triu_indices(n)

    def residuals(Hm):
        G = Hm @ QV
        R = (G.T @ G - Q)[iu]
        return np.concatenate([R, penalty * np.minimum(G, 0.0).ravel()]), G

    res, G = residuals(H)
    cost = float(res @ res)
    mu = 1e-3
    for _ in range(iters):
        J = np.zeros((len(res), r * s))
        for a in range(r):
            for b in range(s):
                dG = np.outer(QV[b, :], G[a, :])
                J[: len(iu[0]), a * s + b] = (dG + dG.T)[iu]
                col = np.zeros((r, n))
                col[a, :] = np.where(G[a, :] < 0, QV[b, :], 0.0)
                J[len(iu[0]):, a * s + b] = penalty * col.ravel()
        JtJ = J.T @ J
        g = J.T @ res
        improved = False
        for _ in range(20):
            step = np.linalg.solve(JtJ + mu * np.diag(np.diag(JtJ) + 1e-12), -g)
            Hn = H + step.reshape(r, s)
            rn, Gn = residuals(Hn)
            cn = float(rn @ rn)
            if cn < cost:
                H, res, G, cost = Hn, rn, Gn, cn
                mu = max(mu / 3, 1e-12)
                improved = True
                break
            mu *= 4
        if not improved or cost < 1e-30:
            break
    return H


def _restart(Q, basis, r, budget, idx):
    s = basis.W.shape[1]
    rng = make_rng(budget.seed, "factorize", idx)
    O, _ = np.linalg.qr(rng.standard_normal((r, s)))
    O = O[:, :s]
    O = _alternate(basis, O, budget.max_iterations)
    U = np.maximum(basis.W @ O.T, 0.0)
    res = residual_of(U, Q)
    if res > budget.delta:
        H = _polish(basis, O @ basis.L, Q, max(20, budget.max_iterations // 10))
        U2 = np.maximum((H @ basis.QV).T, 0.0)
        res2 = residual_of(U2, Q)
        if res2 < res:
            U, res = U2, res2
    return U, res


def cp_factorize(Q, r: int, budget: FactorizeBudget = FactorizeBudget()) -> CPFactorization | NotFound:
    """Multi-start search for a nonnegative factor of inner dimension at most r."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    s = numeric_rank(Q)
    if s > r:
        raise RankError(f"numeric rank {s} exceeds r={r}")
    if s == 0:
        return make_factorization(np.zeros((n, r)), Q)
    basis = column_basis(Q, s)
    best = None
    done = 0
    for chunk in batches(list(range(budget.max_restarts)), BATCH):
        results = pmap(lambda i: _restart(Q, basis, r, budget, i), chunk)
        done += len(chunk)
        for i, (U, res) in zip(chunk, results):
            if best is None or res < best[1]:
                best = (U, res, i)
        if best[1] <= budget.delta:
            return make_factorization(best[0], Q, done)
    return NotFound(best[1], done)


def shift_factorization(Q, fact: CPFactorization, eps: float) -> CPFactorization:
    """U + delta' * ones with the smallest delta' making the product dominate Q."""
    Q = np.asarray(Q, dtype=float)
    U = np.asarray(fact.U, dtype=float)
    n, r = U.shape
    D = Q - U @ U.T
    if np.min(-D, initial=0.0) >= -DOMINANCE_TOL:
        return make_factorization(U, Q, fact.restarts)
    s = U.sum(axis=1)
    S = s[:, None] + s[None, :]
    pos = D > 0
    roots = (-S[pos] + np.sqrt(S[pos] ** 2 + 4 * r * D[pos])) / (2 * r)
    delta = float(np.max(roots)) * (1 + 1e-12)
    limit = eps / (2 * n * r * max(1.0, float(np.max(U))))
    for _ in range(200):
        Ut = U + delta
        if np.min(Ut @ Ut.T - Q) >= -DOMINANCE_TOL:
            break
        delta = delta * (1 + 1e-9) + 1e-300
    if delta > limit:
        raise MarginError(f"shift {delta:.3g} exceeds the admissible {limit:.3g}")
    out = make_factorization(U + delta, Q, fact.restarts)
    if out.residual > eps or not out.dominates:
        raise MarginError("shifted factor misses the target residual")
    return out


def capacity_delta(constraints) -> float:
    n = constraints[0].n if constraints else 0
    diag = [float(v) for c in constraints for v in np.diag(c.Q) if v > 0]
    if not diag or n == 0:
        return 0.0
    return min(diag) / (n * n)


def adjust_capacities(inst: ProblemInstance, facts) -> ProblemInstance:
    """Swap each Q_i for U_i U_i^T and move C_i^2 by delta n^2 against the sense."""
    facts = list(facts)
    if len(facts) != inst.m:
        raise ValueError("one factorization per constraint")
    delta = capacity_delta(inst.constraints)
    n = inst.n
    cons = []
    for con, f in zip(inst.constraints, facts):
        U = np.asarray(f.U, dtype=float)
        res = residual_of(U, con.Q)
        if res > delta:
            raise ResidualError(f"factor residual {res:.3g} exceeds delta={delta:.3g}")
        if res == 0.0:
            cons.append(QuadraticConstraint(con.Q, con.C, U, con.q))
            continue
        shift = delta * n * n
        cap = con.cap - shift if inst.sense == "pack" else con.cap + shift
        cons.append(QuadraticConstraint(symmetric_gram(U), math.sqrt(max(cap, 0.0)), U, con.q))
    return ProblemInstance(inst.n, inst.sense, inst.objective, tuple(cons), inst.A, inst.b)


def ensure_factors(inst: ProblemInstance, budget: FactorizeBudget = FactorizeBudget(), rank=None) -> ProblemInstance:
    """Instance whose constraints all carry a factor, adjusting capacities when the
    numeric factor is inexact. Feasibility for the result implies feasibility for inst."""
    if all(c.U is not None for c in inst.constraints):
        return inst
    facts = []
    for i, c in enumerate(inst.constraints):
        if c.U is not None:
            facts.append(make_factorization(c.U, c.Q))
            continue
        r = numeric_rank(c.Q) if rank is None else rank
        f = cp_factorize(c.Q, max(r, 1), budget)
        if not f:
            raise ResidualError(f"no nonnegative factor found for constraint {i}")
        facts.append(f)
    return adjust_capacities(inst, facts)
