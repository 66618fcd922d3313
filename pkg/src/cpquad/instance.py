"""Instances, objectives and solutions, plus JSON I/O and a seeded generator."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .rng import make_rng

FEAS_TOL = 1e-9
FACTOR_TOL = 1e-9


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class DomainError(ValueError):
    pass


def _frozen(a, dtype=float, ndim=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        if arr.size == 0 and ndim == 2:
            arr = arr.reshape(0, 0)
        else:
            raise ValidationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major matrix as stored in instance files."""

    rows: int
    cols: int
    values: tuple

    def __post_init__(self):
        if len(self.values) != self.rows * self.cols:
            raise ValidationError("values length must equal rows * cols")

    @classmethod
    def from_array(cls, a) -> "DenseMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise ValidationError("DenseMatrix needs a 2-d array")
        return cls(a.shape[0], a.shape[1], tuple(float(v) for v in a.ravel()))

    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=float).reshape(self.rows, self.cols)

    def is_symmetric(self) -> bool:
        a = self.array()
        return a.shape[0] == a.shape[1] and bool(np.all(a == a.T))


@dataclass(frozen=True)
class QuadraticConstraint:
    """x^T Q x + q^T x <= C^2 (packing) or >= C^2 (covering)."""

    Q: np.ndarray
    C: float
    U: np.ndarray | None = None
    q: np.ndarray | None = None

    def __post_init__(self):
        Q = _frozen(self.Q, ndim=2)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "C", float(self.C))
        if self.U is not None:
            U = _frozen(self.U, ndim=2)
            if U.size == 0:
                U = _frozen(np.zeros((Q.shape[0], 0)))
            object.__setattr__(self, "U", U)
        if self.q is not None:
            object.__setattr__(self, "q", _frozen(self.q, ndim=1))
        self._validate()

    def _validate(self):
        Q = self.Q
        if Q.shape[0] != Q.shape[1]:
            raise ValidationError("Q must be square")
        if not np.all(Q == Q.T):
            raise ValidationError("Q must be exactly symmetric")
        if not np.all(np.isfinite(Q)) or np.any(Q < 0):
            raise ValidationError("Q must be entrywise nonnegative")
        if not np.isfinite(self.C) or self.C < 0:
            raise ValidationError("capacity C must be nonnegative")
        zero = np.diag(Q) == 0
        if np.any(Q[zero, :] != 0):
            raise ValidationError("a zero diagonal entry needs a zero row and column")
        n = Q.shape[0]
        if self.U is not None:
            if self.U.shape[0] != n:
                raise ValidationError("factor U has the wrong number of rows")
            if np.any(self.U < 0):
                raise ValidationError("factor U must be entrywise nonnegative")
            scale = max(1.0, float(np.max(Q, initial=0.0)))
            if self.factor_residual() > FACTOR_TOL * scale:
                raise ValidationError("stored factor does not reproduce Q")
        if self.q is not None:
            if self.q.shape != (n,) or np.any(self.q < 0):
                raise ValidationError("linear term q must be a nonnegative n-vector")

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def cap(self) -> float:
        return self.C * self.C

    @property
    def rank(self) -> int | None:
        return None if self.U is None else self.U.shape[1]

    def linear(self) -> np.ndarray:
        return np.zeros(self.n) if self.q is None else self.q

    def factor_residual(self) -> float:
        if self.U is None:
            return float("inf")
        return float(np.max(np.abs(self.U @ self.U.T - self.Q), initial=0.0))

    def load(self, x: np.ndarray) -> float:
        return float(x @ self.Q @ x + self.linear() @ x)


# Objectives -------------------------------------------------------------


@dataclass(frozen=True)
class LinearObjective:
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u, ndim=1))
        if np.any(self.u < 0):
            raise ValidationError("utilities must be nonnegative")


@dataclass(frozen=True)
class CoverageObjective:
    """Weighted coverage: f(S) = total weight of universe elements covered by S."""

    weights: np.ndarray
    covers: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights, ndim=1))
        covers = tuple(tuple(sorted(set(int(e) for e in c))) for c in self.covers)
        object.__setattr__(self, "covers", covers)
        if np.any(self.weights < 0):
            raise ValidationError("coverage weights must be nonnegative")
        m = len(self.weights)
        for c in covers:
            if any(e < 0 or e >= m for e in c):
                raise ValidationError("covered element out of range")

    def incidence(self) -> np.ndarray:
        M = np.zeros((len(self.covers), len(self.weights)))
        for k, c in enumerate(self.covers):
            M[k, list(c)] = 1.0
        return M


@dataclass(frozen=True)
class QuadraticObjective:
    Q: np.ndarray
    q: np.ndarray
    U: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "Q", _frozen(self.Q, ndim=2))
        object.__setattr__(self, "q", _frozen(self.q, ndim=1))
        if self.U is not None:
            object.__setattr__(self, "U", _frozen(self.U, ndim=2))
        if not np.all(self.Q == self.Q.T) or np.any(self.Q < 0) or np.any(self.q < 0):
            raise ValidationError("quadratic objective needs symmetric nonnegative data")


@dataclass(frozen=True)
class ProductObjective:
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _frozen(self.vectors, ndim=2))
        if np.any(self.vectors < 0):
            raise ValidationError("product factors must be nonnegative")


@dataclass(frozen=True)
class SumRatioObjective:
    numerators: np.ndarray
    denominators: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "numerators", _frozen(self.numerators, ndim=2))
        object.__setattr__(self, "denominators", _frozen(self.denominators, ndim=2))
        if self.numerators.shape != self.denominators.shape:
            raise ValidationError("numerators and denominators must match")
        if np.any(self.numerators < 0) or np.any(self.denominators < 0):
            raise ValidationError("ratio data must be nonnegative")
        if np.any(self.denominators.max(axis=1, initial=0.0) <= 0):
            raise ValidationError("every denominator needs a positive entry")


ObjectiveSpec = Union[
    LinearObjective, CoverageObjective, QuadraticObjective, ProductObjective, SumRatioObjective
]

OBJECTIVE_TAGS = {
    LinearObjective: "linear",
    CoverageObjective: "coverage",
    QuadraticObjective: "quadratic",
    ProductObjective: "product",
    SumRatioObjective: "sum_ratio",
}


def objective_size(obj: ObjectiveSpec) -> int:
    if isinstance(obj, LinearObjective):
        return len(obj.u)
    if isinstance(obj, CoverageObjective):
        return len(obj.covers)
    if isinstance(obj, QuadraticObjective):
        return len(obj.q)
    if isinstance(obj, ProductObjective):
        return obj.vectors.shape[1]
    return obj.numerators.shape[1]


def indicator(n: int, S) -> np.ndarray:
    x = np.zeros(n)
    x[list(S)] = 1.0
    return x


def evaluate_objective(obj: ObjectiveSpec, S) -> float:
    S = sorted(set(int(k) for k in S))
    n = objective_size(obj)
    if any(k < 0 or k >= n for k in S):
        raise ValueError("subset index out of range")
    if isinstance(obj, LinearObjective):
        return float(sum(obj.u[k] for k in S))
    if isinstance(obj, CoverageObjective):
        covered = set()
        for k in S:
            covered.update(obj.covers[k])
        return float(sum(obj.weights[e] for e in sorted(covered)))
    x = indicator(n, S)
    if isinstance(obj, QuadraticObjective):
        return float(x @ obj.Q @ x + obj.q @ x)
    if isinstance(obj, ProductObjective):
        return float(np.prod(obj.vectors @ x))
    den = obj.denominators @ x
    if np.any(den <= 0):
        raise DomainError("a ratio denominator vanishes on this subset")
    return float(np.sum((obj.numerators @ x) / den))


# Instances and solutions --------------------------------------------------


@dataclass(frozen=True)
class ProblemInstance:
    n: int
    sense: str
    objective: ObjectiveSpec
    constraints: tuple
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.A is not None:
            A = _frozen(self.A, ndim=2)
            if A.size == 0:
                A = _frozen(np.zeros((0, self.n)))
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", _frozen(self.b, ndim=1))
        self._validate()

    def _validate(self):
        if self.n < 0:
            raise ValidationError("n must be nonnegative")
        if self.sense not in ("pack", "cover"):
            raise ValidationError(f"unknown sense {self.sense!r}")
        if type(self.objective) not in OBJECTIVE_TAGS:
            raise ValidationError("unsupported objective")
        if objective_size(self.objective) != self.n:
            raise ValidationError("objective size does not match n")
        for con in self.constraints:
            if con.n != self.n:
                raise ValidationError("constraint size does not match n")
        if self.A is not None:
            if self.A.shape[1] != self.n or self.b.shape != (self.A.shape[0],):
                raise ValidationError("linear system has inconsistent dimensions")
            if np.any(self.A < 0) or np.any(self.b < 0):
                raise ValidationError("linear system must be nonnegative")
        if self.sense == "cover":
            if len(self.constraints) != 1 or not isinstance(self.objective, LinearObjective):
                raise ValidationError("cover instances take one constraint and a linear objective")
            if self.A is not None and self.A.shape[0] > 0:
                raise ValidationError("cover instances take no linear side constraints")

    @property
    def m(self) -> int:
        return len(self.constraints)

    def linear_rows(self) -> tuple[np.ndarray, np.ndarray]:
        if self.A is None:
            return np.zeros((0, self.n)), np.zeros(0)
        return self.A, self.b

    def slacks(self, S) -> list[float]:
        x = indicator(self.n, S)
        out = []
        for con in self.constraints:
            load = con.load(x)
            out.append(con.cap - load if self.sense == "pack" else load - con.cap)
        A, b = self.linear_rows()
        out.extend((b - A @ x).tolist())
        return out

    def slack_scales(self) -> list[float]:
        A, b = self.linear_rows()
        return [max(1.0, c.cap) for c in self.constraints] + [max(1.0, v) for v in b]

    def is_feasible(self, S, tol: float = FEAS_TOL) -> bool:
        return all(s >= -tol * sc for s, sc in zip(self.slacks(S), self.slack_scales()))

    def solution(self, S) -> "BinarySolution":
        S = tuple(sorted(set(int(k) for k in S)))
        sl = self.slacks(S)
        feas = all(s >= -FEAS_TOL * sc for s, sc in zip(sl, self.slack_scales()))
        try:
            value = evaluate_objective(self.objective, S)
        except DomainError:
            value = float("nan")
        return BinarySolution(S, value, tuple(sl), feas)


@dataclass(frozen=True)
class BinarySolution:
    subset: tuple
    value: float
    slacks: tuple
    feasible: bool

    def to_json(self) -> dict:
        return {
            "subset": list(self.subset),
            "value": self.value,
            "slacks": list(self.slacks),
            "feasible": self.feasible,
        }


# JSON ---------------------------------------------------------------------


def _num(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError as e:
            raise ParseError(f"bad number {v!r}") from e
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {v!r}")
    return float(v)


def _vec(v) -> list:
    if not isinstance(v, list):
        raise ParseError("expected an array")
    return [_num(x) for x in v]


def _mat(v) -> np.ndarray:
    if not isinstance(v, list):
        raise ParseError("expected an array of arrays")
    rows = [_vec(r) for r in v]
    if len({len(r) for r in rows}) > 1:
        raise ValidationError("ragged matrix")
    return np.array(rows, dtype=float).reshape(len(rows), len(rows[0]) if rows else 0)


def _objective_from_json(d: dict, n: int) -> ObjectiveSpec:
    kind = d.get("type")
    if kind == "linear":
        return LinearObjective(_vec(d["u"]))
    if kind == "coverage":
        return CoverageObjective(_vec(d["weights"]), tuple(tuple(c) for c in d["covers"]))
    if kind == "quadratic":
        U = _mat(d["U"]) if "U" in d else None
        q = _vec(d["q"]) if "q" in d else [0.0] * n
        return QuadraticObjective(_mat(d["Q"]), q, U)
    if kind == "product":
        return ProductObjective(_mat(d["a"]))
    if kind == "sum_ratio":
        return SumRatioObjective(_mat(d["a"]), _mat(d["b"]))
    raise ValidationError(f"unknown objective type {kind!r}")


def instance_from_dict(d: dict) -> ProblemInstance:
    try:
        n = int(d["n"])
        cons = []
        for c in d.get("constraints", []):
            cons.append(QuadraticConstraint(
                _mat(c["Q"]).reshape(n, n) if n else np.zeros((0, 0)),
                _num(c["C"]),
                _mat(c["U"]) if "U" in c else None,
                _vec(c["q"]) if "q" in c else None,
            ))
        obj = _objective_from_json(d["objective"], n)
        A = b = None
        if d.get("linear") is not None:
            A = _mat(d["linear"]["A"])
            b = _vec(d["linear"]["b"])
        return ProblemInstance(n, d["sense"], obj, tuple(cons), A, b)
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed instance: {e}") from e


def _l(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def objective_to_dict(obj: ObjectiveSpec) -> dict:
    if isinstance(obj, LinearObjective):
        return {"type": "linear", "u": _l(obj.u)}
    if isinstance(obj, CoverageObjective):
        return {"type": "coverage", "weights": _l(obj.weights), "covers": [list(c) for c in obj.covers]}
    if isinstance(obj, QuadraticObjective):
        d = {"type": "quadratic", "Q": _l(obj.Q), "q": _l(obj.q)}
        if obj.U is not None:
            d["U"] = _l(obj.U)
        return d
    if isinstance(obj, ProductObjective):
        return {"type": "product", "a": _l(obj.vectors)}
    return {"type": "sum_ratio", "a": _l(obj.numerators), "b": _l(obj.denominators)}


def instance_to_dict(inst: ProblemInstance) -> dict:
    cons = []
    for c in inst.constraints:
        d = {"Q": _l(c.Q), "C": c.C}
        if c.U is not None:
            d["U"] = _l(c.U)
        if c.q is not None:
            d["q"] = _l(c.q)
        cons.append(d)
    out = {"n": inst.n, "sense": inst.sense, "objective": objective_to_dict(inst.objective),
           "constraints": cons}
    if inst.A is not None:
        out["linear"] = {"A": _l(inst.A), "b": _l(inst.b)}
    return out


def dumps_instance(inst: ProblemInstance) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(instance_to_dict(inst), sort_keys=True)


def loads_instance(text: str) -> ProblemInstance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(str(e)) from e
    if not isinstance(d, dict):
        raise ParseError("instance file must hold a JSON object")
    return instance_from_dict(d)


def load_instance(path) -> ProblemInstance:
    return loads_instance(Path(path).read_text(encoding="utf-8"))


def save_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


# Generator ----------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    n: int
    m: int = 1
    rank: int | Sequence[int] = 1
    sense: str = "pack"
    objective: str = "linear"
    coef_range: tuple = (1, 20)
    integer: bool = True
    capacity: tuple = (0.3, 0.7)
    n_objectives: int = 2
    objective_rank: int = 1
    linear_term: bool = False

    def ranks(self) -> tuple:
        if isinstance(self.rank, int):
            return (self.rank,) * self.m
        return tuple(self.rank)


def _coefs(rng, lo, hi, size, integer):
    if integer:
        return rng.integers(int(lo), int(hi) + 1, size=size).astype(float)
    return rng.uniform(lo, hi, size=size)


def symmetric_gram(U: np.ndarray) -> np.ndarray:
    Q = U @ U.T
    return (Q + Q.T) / 2


def generate_instance(spec: InstanceSpec, seed: int) -> ProblemInstance:
    n, m = spec.n, spec.m
    if n < 1 or m < 1 or min(spec.ranks()) < 1:
        raise ValueError("generator needs n, m, r >= 1")
    if len(spec.ranks()) != m:
        raise ValueError("one rank per constraint")
    rng = make_rng(seed, "instance")
    lo, hi = spec.coef_range
    cons = []
    for r in spec.ranks():
        U = rng.uniform(0.0, 1.0, size=(n, r))
        Q = symmetric_gram(U)
        total = float(np.linalg.norm(U.sum(axis=0)))
        frac = rng.uniform(*spec.capacity)
        q = rng.uniform(0.0, 0.5, size=n) if spec.linear_term else None
        cons.append(QuadraticConstraint(Q, frac * total, U, q))
    kind = spec.objective
    if kind == "linear":
        obj = LinearObjective(_coefs(rng, lo, hi, n, spec.integer))
    elif kind == "coverage":
        size = 2 * n
        weights = _coefs(rng, lo, hi, size, spec.integer)
        covers = []
        for _ in range(n):
            k = int(rng.integers(1, min(4, size + 1)))
            covers.append(tuple(sorted(rng.choice(size, size=k, replace=False).tolist())))
        obj = CoverageObjective(weights, tuple(covers))
    elif kind == "quadratic":
        V = rng.uniform(0.0, 1.0, size=(n, spec.objective_rank))
        q = _coefs(rng, lo, hi, n, spec.integer) if spec.linear_term else np.zeros(n)
        obj = QuadraticObjective(symmetric_gram(V), q, V)
    elif kind == "product":
        obj = ProductObjective(_coefs(rng, lo, hi, (spec.n_objectives, n), spec.integer))
    elif kind == "sum_ratio":
        a = _coefs(rng, lo, hi, (spec.n_objectives, n), spec.integer)
        b = _coefs(rng, max(lo, 1), hi, (spec.n_objectives, n), spec.integer)
        obj = SumRatioObjective(a, b)
    else:
        raise ValueError(f"unknown objective family {kind!r}")
    return ProblemInstance(n, spec.sense, obj, tuple(cons))
