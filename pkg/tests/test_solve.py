import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from cyclicot import (CapExceededError, DiscreteMeasure, InfeasibleError, build_tensor,
                      exact_lp, make_instance, plan_marginal, round_to_feasible, sinkhorn_mm,
                      validate_plan)
from cyclicot.cost import build_tensor

from conftest import random_instance


def linprog_value(inst, tensor, sense):
    shape = inst.shape
    N = tensor.size
    rows, rhs = [], []
    for k, mu in enumerate(inst.marginals):
        idx = np.indices(shape).reshape(len(shape), -1)[k]
        for j in range(mu.size):
            rows.append((idx == j).astype(float))
            rhs.append(mu.weights[j])
    c = tensor.ravel() * (1 if sense == "min" else -1)
    res = linprog(c, A_eq=np.array(rows), b_eq=rhs, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun * (1 if sense == "min" else -1)


@pytest.mark.parametrize("sizes", [(2, 2, 2, 2), (3, 2, 4), (3, 3, 3, 2), (2, 5)])
@pytest.mark.parametrize("objective", ["surplus", "cost"])
def test_lp_matches_highs(rng, sizes, objective):
    inst = random_instance(rng, sizes)
    res = exact_lp(inst, objective)
    T = build_tensor(inst, objective).values
    ref = linprog_value(inst, T, res.sense)
    assert_allclose(res.value, ref, rtol=1e-10, atol=1e-12)
    assert abs(res.value - res.dual_value) <= 1e-8
    assert validate_plan(res.plan) == []


def test_duals_are_feasible_and_tight(rng):
    inst = random_instance(rng, (3, 2, 3, 2))
    res = exact_lp(inst, "surplus")
    T = build_tensor(inst, "surplus").values
    U = sum(np.reshape(u, [-1 if a == k else 1 for a in range(inst.m)])
            for k, u in enumerate(res.duals))
    assert np.all(U - T >= -1e-10)
    for idx in res.plan.indices:
        assert abs(U[tuple(idx)] - T[tuple(idx)]) <= 1e-10


def test_degenerate_marginals_handled():
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.5, 0.5])
    inst = make_instance([mu, mu, mu])
    res = exact_lp(inst, "cost")
    assert abs(res.value - res.dual_value) <= 1e-12


def test_lp_cap(rng):
    inst = random_instance(rng, (5, 5, 5, 5))
    with pytest.raises(CapExceededError):
        exact_lp(inst, cap=100)


def test_lp_rejects_bad_weights():
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.5, 0.6])
    with pytest.raises(InfeasibleError):
        exact_lp(make_instance([mu, mu]))


def test_sinkhorn_close_to_lp(rng):
    inst = random_instance(rng, (3, 3, 3))
    T = build_tensor(inst, "cost")
    sk = sinkhorn_mm(inst, 1e-3 * T.value_range)
    plan = round_to_feasible(sk.tensor, inst)
    assert validate_plan(plan) == []
    lp = exact_lp(inst, "cost")
    value = float(np.sum(plan.to_dense() * T.values))
    assert abs(value - lp.value) <= 0.01 * abs(lp.value)


def test_sinkhorn_marginals_converge(rng):
    inst = random_instance(rng, (2, 3, 2))
    sk = sinkhorn_mm(inst, 0.1)
    assert sk.converged and sk.residual <= 1e-9


def test_sinkhorn_rejects_nonpositive_epsilon(rng):
    with pytest.raises(ValueError):
        sinkhorn_mm(random_instance(rng), 0.0)


def test_rounding_repairs_marginals(rng):
    inst = random_instance(rng, (3, 4))
    P = np.outer(inst.marginals[0].weights, inst.marginals[1].weights)
    P *= 1 + 0.01 * rng.uniform(-1, 1, P.shape)
    plan = round_to_feasible(P, inst)
    for k in range(2):
        assert_allclose(plan_marginal(plan, k).weights, inst.marginals[k].weights, atol=1e-12)
