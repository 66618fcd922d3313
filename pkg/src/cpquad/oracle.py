"""Exhaustive ground truth for desk-scale instances.

All 2^n subsets are scanned in vectorized chunks; item k corresponds to bit k of
the subset mask.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import (
    FEAS_TOL,
    CoverageObjective,
    DomainError,
    LinearObjective,
    ProblemInstance,
    ProductObjective,
    QuadraticObjective,
    SumRatioObjective,
)

OPT_CAP = 22
PARETO_CAP = 18
CHUNK = 1 << 16


class SizeCapError(ValueError):
    pass


def mask_to_subset(mask: int, n: int) -> tuple:
    return tuple(k for k in range(n) if (mask >> k) & 1)


def subset_to_mask(S) -> int:
    mask = 0
    for k in S:
        mask |= 1 << int(k)
    return mask


def mask_matrix(start: int, stop: int, n: int) -> np.ndarray:
    masks = np.arange(start, stop, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(float)


def feasible_rows(inst: ProblemInstance, X: np.ndarray) -> np.ndarray:
    ok = np.ones(X.shape[0], dtype=bool)
    for con in inst.constraints:
        load = np.einsum("ij,ij->i", X @ con.Q, X) + X @ con.linear()
        slack = con.cap - load if inst.sense == "pack" else load - con.cap
        ok &= slack >= -FEAS_TOL * max(1.0, con.cap)
    A, b = inst.linear_rows()
    if A.shape[0]:
        slack = b[None, :] - X @ A.T
        ok &= np.all(slack >= -FEAS_TOL * np.maximum(1.0, b)[None, :], axis=1)
    return ok


def objective_rows(obj, X: np.ndarray) -> np.ndarray:
    if isinstance(obj, LinearObjective):
        return X @ obj.u
    if isinstance(obj, CoverageObjective):
        return ((X @ obj.incidence()) > 0).astype(float) @ obj.weights
    if isinstance(obj, QuadraticObjective):
        return np.einsum("ij,ij->i", X @ obj.Q, X) + X @ obj.q
    if isinstance(obj, ProductObjective):
        return np.prod(X @ obj.vectors.T, axis=1)
    den = X @ obj.denominators.T
    num = X @ obj.numerators.T
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(np.all(den > 0, axis=1), np.sum(num / np.where(den > 0, den, 1.0), axis=1), np.nan)
    return val


@dataclass(frozen=True)
class OracleReport:
    sense: str
    value: float
    subsets: tuple
    enumerated: int
    feasible: bool = True
    n_feasible: int = 0

    @property
    def subset(self) -> tuple:
        return self.subsets[0] if self.subsets else ()

    def ratio(self, achieved: float) -> float:
        """achieved/OPT for packing, achieved/OPT for covering (>= 1 means worse)."""
        if self.value == 0:
            return 1.0 if achieved == 0 else float("inf")
        return float(achieved / self.value)

    def to_json(self) -> dict:
        return {
            "value": self.value if self.feasible else None,
            "subsets": [list(s) for s in self.subsets],
            "enumerated": self.enumerated,
            "feasible": self.feasible,
        }


def brute_force_opt(inst: ProblemInstance) -> OracleReport:
    n = inst.n
    if n > OPT_CAP:
        raise SizeCapError(f"oracle refuses n={n} > {OPT_CAP}")
    maximize = inst.sense == "pack"
    ratio_obj = isinstance(inst.objective, SumRatioObjective)
    best = -np.inf if maximize else np.inf
    vals_all, masks_all = [], []
    n_feas = 0
    total = 1 << n
    for start in range(0, total, CHUNK):
        stop = min(total, start + CHUNK)
        X = mask_matrix(start, stop, n)
        ok = feasible_rows(inst, X)
        if ratio_obj and start == 0:
            ok[0] = False
        vals = objective_rows(inst.objective, X)
        if ratio_obj and np.any(ok & np.isnan(vals)):
            raise DomainError("a feasible nonempty subset zeroes a ratio denominator")
        idx = np.nonzero(ok)[0]
        n_feas += idx.size
        if idx.size:
            vals_all.append(vals[idx])
            masks_all.append(idx + start)
    if not vals_all:
        return OracleReport(inst.sense, float("nan"), (), total, False, 0)
    vals = np.concatenate(vals_all)
    masks = np.concatenate(masks_all)
    best = float(vals.max() if maximize else vals.min())
    tol = 1e-12 * max(1.0, abs(best))
    hit = masks[np.abs(vals - best) <= tol]
    subsets = tuple(sorted(mask_to_subset(int(m), n) for m in hit))
    return OracleReport(inst.sense, best, subsets, total, True, n_feas)


def feasible_table(inst: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    """Masks and 0/1 rows of every feasible subset."""
    n = inst.n
    total = 1 << n
    masks, rows = [], []
    for start in range(0, total, CHUNK):
        stop = min(total, start + CHUNK)
        X = mask_matrix(start, stop, n)
        ok = feasible_rows(inst, X)
        masks.append(np.nonzero(ok)[0] + start)
        rows.append(X[ok])
    return np.concatenate(masks), np.concatenate(rows)


def nondominated(points: np.ndarray) -> np.ndarray:
    """Boolean mask of rows not dominated under componentwise maximization."""
    k = points.shape[0]
    keep = np.zeros(k, dtype=bool)
    if k == 0:
        return keep
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    order = np.lexsort(uniq.T[::-1])[::-1]
    kept = []
    uniq_keep = np.zeros(len(uniq), dtype=bool)
    for i in order:
        p = uniq[i]
        if kept:
            K = np.array(kept)
            if np.any(np.all(K >= p, axis=1)):
                continue
        kept.append(p)
        uniq_keep[i] = True
    return uniq_keep[np.asarray(inverse).ravel()]


@dataclass(frozen=True)
class ParetoPoint:
    subset: tuple
    maxima: tuple
    minima: tuple

    def to_json(self) -> dict:
        return {"subset": list(self.subset), "maximize": list(self.maxima), "minimize": list(self.minima)}


def brute_force_pareto(inst: ProblemInstance, maxima: np.ndarray, minima: np.ndarray | None = None) -> list:
    """Exact Pareto frontier of linear max-objectives (rows of ``maxima``) and
    min-objectives (rows of ``minima``) over the feasible subsets of ``inst``."""
    n = inst.n
    if n > PARETO_CAP:
        raise SizeCapError(f"Pareto oracle refuses n={n} > {PARETO_CAP}")
    F = np.atleast_2d(np.asarray(maxima, dtype=float)).reshape(-1, n)
    G = np.zeros((0, n)) if minima is None else np.atleast_2d(np.asarray(minima, dtype=float)).reshape(-1, n)
    masks, X = feasible_table(inst)
    fv = X @ F.T
    gv = X @ G.T
    keep = nondominated(np.hstack([fv, -gv]))
    out = [
        ParetoPoint(mask_to_subset(int(m), n), tuple(fr.tolist()), tuple(gr.tolist()))
        for m, fr, gr, k in zip(masks, fv, gv, keep) if k
    ]
    return sorted(out, key=lambda p: p.subset)
