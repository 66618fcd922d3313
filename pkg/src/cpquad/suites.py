"""Seeded instance families shared by the bench command, scripts and tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import InstanceSpec, ProblemInstance, generate_instance, symmetric_gram
from .rng import make_rng

SUITES = ("pack-lin", "pack-sub", "cover-lin", "factorize", "pareto", "bqcqp", "bmpp", "sum-ratio")


def instance_seed(seed: int, suite: str, index: int) -> int:
    return int(make_rng(seed, "suite", suite, index).integers(0, 2**62))


def suite_spec(suite: str, i: int) -> InstanceSpec:
    if suite == "pack-lin":
        m = 1 + i % 2
        return InstanceSpec(n=6 + i % 7, m=m, rank=tuple(1 + (i // 2 + j) % 3 for j in range(m)))
    if suite == "pack-sub":
        return InstanceSpec(n=6 + i % 5, m=1 + (i // 5) % 2, rank=1 + (i // 10) % 2, objective="coverage")
    if suite == "cover-lin":
        return InstanceSpec(n=6 + i % 5, rank=1 + (i // 5) % 2, sense="cover")
    if suite == "pareto":
        if i % 2 == 0:
            return InstanceSpec(n=6 + i % 5, m=1 + (i // 2) % 2, rank=1 + (i // 4) % 2, objective="product")
        return InstanceSpec(n=6 + i % 5, m=1 + (i // 2) % 2, rank=1 + (i // 4) % 2, objective="sum_ratio",
                            n_objectives=1)
    if suite == "bqcqp":
        rk = 1 + i % 2
        return InstanceSpec(n=6 + i % 5, m=1 + (i // 2) % 2, rank=1 + (i // 4) % 2, objective="quadratic",
                            objective_rank=rk, linear_term=rk == 1)
    if suite == "bmpp":
        return InstanceSpec(n=6 + i % 5, m=1 + (i // 2) % 2, rank=1 + (i // 4) % 2, objective="product")
    if suite == "sum-ratio":
        return InstanceSpec(n=6 + i % 5, m=1 + (i // 2) % 2, rank=1 + (i // 4) % 2, objective="sum_ratio",
                            n_objectives=1)
    raise ValueError(f"unknown suite {suite!r}")


def suite_instance(suite: str, i: int, seed: int = 0) -> ProblemInstance:
    return generate_instance(suite_spec(suite, i), instance_seed(seed, suite, i))


def pareto_objectives(inst: ProblemInstance) -> tuple[np.ndarray, np.ndarray | None]:
    """Max and min forms of a Pareto-suite instance: two maxima, or one of each."""
    obj = inst.objective
    if hasattr(obj, "vectors"):
        return obj.vectors, None
    return obj.numerators, obj.denominators


@dataclass(frozen=True)
class Planted:
    U: np.ndarray
    Q: np.ndarray


def planted_factor(i: int, seed: int = 0) -> Planted:
    """Q = U U^T with U uniform on [0, 1], n in 3..6 and r in 1..3."""
    n, r = 3 + i % 4, 1 + (i // 4) % 3
    U = make_rng(seed, "planted", i).uniform(0.0, 1.0, size=(n, r))
    return Planted(U, symmetric_gram(U))

