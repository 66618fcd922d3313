from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpquad.instance import (
    InstanceSpec,
    LinearObjective,
    ProblemInstance,
    QuadraticConstraint,
    evaluate_objective,
    generate_instance,
)
from cpquad.oracle import (
    SizeCapError,
    brute_force_opt,
    brute_force_pareto,
    mask_to_subset,
    nondominated,
    subset_to_mask,
)


def _all_ones(u, C, sense="pack"):
    n = len(u)
    return ProblemInstance(n, sense, LinearObjective(u), (QuadraticConstraint(np.ones((n, n)), C),))


def _subsets(n):
    for size in range(n + 1):
        yield from combinations(range(n), size)


def test_pack_example():
    rep = brute_force_opt(_all_ones([3, 2, 1], 2.0))
    assert rep.value == 5 and rep.subset == (0, 1) and rep.enumerated == 8


def test_cover_example():
    rep = brute_force_opt(_all_ones([1, 1, 1], 2.0, "cover"))
    assert rep.value == 2
    assert set(rep.subsets) == {(0, 1), (0, 2), (1, 2)}


def test_empty_instance():
    rep = brute_force_opt(ProblemInstance(0, "pack", LinearObjective([]), ()))
    assert rep.value == 0 and rep.subset == ()


def test_cover_infeasible():
    rep = brute_force_opt(_all_ones([1, 1], 5.0, "cover"))
    assert not rep.feasible


def test_size_cap():
    with pytest.raises(SizeCapError):
        brute_force_opt(_all_ones([1] * 23, 1.0))


def test_pareto_example():
    inst = ProblemInstance(2, "pack", LinearObjective([1, 1]), (QuadraticConstraint(np.ones((2, 2)), 1.0),))
    front = brute_force_pareto(inst, np.eye(2))
    assert sorted(p.subset for p in front) == [(0,), (1,)]


def test_pareto_single_objective_is_argmax():
    inst = _all_ones([3, 2, 3], 1.0)
    front = brute_force_pareto(inst, np.array([[3.0, 2.0, 3.0]]))
    assert sorted(p.subset for p in front) == [(0,), (2,)]


def test_pareto_nothing_fits():
    inst = _all_ones([1, 1], 0.5)
    front = brute_force_pareto(inst, np.eye(2))
    assert [p.subset for p in front] == [()]


def test_masks_round_trip():
    assert mask_to_subset(subset_to_mask((0, 3, 4)), 5) == (0, 3, 4)


def test_nondominated_keeps_ties():
    pts = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.2, 0.2]])
    assert nondominated(pts).tolist() == [True, True, True, True, False]


@given(st.integers(1, 9), st.sampled_from(["linear", "coverage", "quadratic", "product"]), st.integers(0, 2**31))
def test_optimum_matches_plain_enumeration(n, family, seed):
    inst = generate_instance(InstanceSpec(n=n, m=1, rank=2, objective=family), seed)
    rep = brute_force_opt(inst)
    feas = [S for S in _subsets(n) if inst.is_feasible(S)]
    best = max(evaluate_objective(inst.objective, S) for S in feas)
    assert rep.value == pytest.approx(best, rel=1e-12)
    assert inst.is_feasible(rep.subset)
    assert evaluate_objective(inst.objective, rep.subset) == pytest.approx(rep.value, rel=1e-12)


@given(st.integers(1, 8), st.integers(0, 2**31))
def test_pareto_matches_pairwise_definition(n, seed):
    inst = generate_instance(InstanceSpec(n=n, objective="product"), seed)
    F = inst.objective.vectors
    front = {p.subset for p in brute_force_pareto(inst, F)}
    feas = [S for S in _subsets(n) if inst.is_feasible(S)]
    vals = {S: F[:, list(S)].sum(axis=1) for S in feas}
    for S in feas:
        dominated = any(np.all(vals[T] >= vals[S]) and np.any(vals[T] > vals[S]) for T in feas)
        assert (S in front) == (not dominated)
