import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cyclicot import (AffineMap, Box, Certificate, DiscreteMeasure, Plan, PotentialSet,
                      QuadraticPotential, TabulatedPotential, make_instance, plan_marginal,
                      validate_instance, validate_plan)

from conftest import random_instance


def two_point(a, b, w=(0.5, 0.5)):
    return DiscreteMeasure(np.array([[a], [b]], dtype=float), np.array(w))


def test_box_grid_is_lexicographic():
    g = Box([0, 0], [1, 2]).grid(3)
    assert g.shape == (9, 2)
    assert_array_equal(g[:3], [[0, 0], [0, 1], [0, 2]])
    assert_array_equal(g[-1], [1, 2])


def test_box_enlarged_keeps_center():
    b = Box([-1, 0], [1, 4]).enlarged(2.0)
    assert_allclose(b.lo, [-2, -2])
    assert_allclose(b.hi, [2, 6])


@pytest.mark.parametrize("weights, points, box, message", [
    ([0.7, 0.4], [[0.0], [1.0]], None, "weights not normalized"),
    ([1.5, -0.5], [[0.0], [1.0]], None, "negative weights"),
    ([0.5, 0.5], [[0.0], [0.0]], None, "duplicate support points"),
    ([0.5, 0.5], [[0.0], [3.0]], Box([0.0], [1.0]), "point outside domain box"),
])
def test_measure_problems(weights, points, box, message):
    mu = DiscreteMeasure(np.array(points), np.array(weights), box)
    assert message in mu.problems()


def test_valid_instance_has_empty_report(rng):
    assert validate_instance(random_instance(rng)) == []


def test_dimension_mismatch_reported():
    mu2 = DiscreteMeasure(np.zeros((1, 2)), [1.0])
    mu1 = DiscreteMeasure(np.zeros((1, 1)), [1.0])
    inst = make_instance([mu2, mu1], np.eye(2))
    assert any("dimension mismatch" in p for p in validate_instance(inst))


def test_product_plan_projection_is_exact():
    mu1, mu2 = two_point(0, 1, (0.25, 0.75)), two_point(2, 3, (0.6, 0.4))
    plan = Plan.product(make_instance([mu1, mu2]))
    assert_array_equal(plan_marginal(plan, 0).weights, mu1.weights)
    assert_allclose(plan_marginal(plan, 1).weights, mu2.weights, rtol=0, atol=1e-15)


def test_graph_plan_projection_is_pushforward():
    mu1 = DiscreteMeasure(np.arange(4.0)[:, None], [0.1, 0.2, 0.3, 0.4])
    mu2 = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.4, 0.6])
    T = np.array([0, 1, 0, 1])  # pushforward of mu1 under T
    plan = Plan(make_instance([mu1, mu2]), np.stack([np.arange(4), T], 1), mu1.weights)
    assert_allclose(plan_marginal(plan, 1).weights, [0.4, 0.6], atol=1e-15)


def test_random_plan_projection_matches_summation(rng):
    P = rng.uniform(size=(3, 3, 3))
    P /= P.sum()
    marg = [P.sum(axis=(1, 2)), P.sum(axis=(0, 2)), P.sum(axis=(0, 1))]
    mus = [DiscreteMeasure(rng.normal(size=(3, 1)), w) for w in marg]
    plan = Plan.from_dense(make_instance(mus), P)
    for k in range(3):
        loop = np.zeros(3)
        for idx, w in zip(plan.indices, plan.masses):
            loop[idx[k]] += w
        assert_allclose(plan_marginal(plan, k).weights, loop, atol=1e-12)
        assert_allclose(plan_marginal(plan, k).weights, marg[k], atol=1e-12)
    assert validate_plan(plan) == []


def test_plan_marginal_errors():
    inst = make_instance([two_point(0, 1), two_point(0, 1)])
    plan = Plan(inst, [[0, 5]], [1.0])
    with pytest.raises(IndexError):
        plan_marginal(plan, 2)
    with pytest.raises(IndexError):
        plan_marginal(plan, 1)


def test_validate_plan_flags_wrong_marginal():
    inst = make_instance([two_point(0, 1), two_point(0, 1)])
    plan = Plan(inst, [[0, 0]], [1.0])
    report = validate_plan(plan)
    assert any("mismatch" in r for r in report)


def test_affine_map_applies_rowwise():
    F = AffineMap([[0, -1], [1, 0]], [1, 0])
    assert_allclose(F(np.array([[1.0, 2.0]])), [[-1.0, 1.0]])
    assert not F.is_linear
    assert AffineMap.identity(3, 2.0).is_linear


def test_quadratic_potential_rejects_asymmetric():
    with pytest.raises(ValueError):
        QuadraticPotential(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_tabulated_potential_only_on_support():
    mu = two_point(0, 1)
    inst = make_instance([mu, mu])
    pots = PotentialSet((TabulatedPotential([1.0, 2.0]), QuadraticPotential(np.eye(1))))
    assert_array_equal(pots.evaluate(0, [[1.0]], inst), [2.0])
    with pytest.raises(ValueError):
        pots.evaluate(0, [[0.5]], inst)
    assert not pots.is_closed_form


def test_certificate_verdict():
    ok = Certificate(1e-12, 1e-12, 0.0, 10)
    bad = Certificate(1e-3, 0.0, 0.0, 10)
    assert ok.verdict == "optimal" and ok.is_optimal
    assert bad.verdict == "not certified"
    assert set(ok.as_dict()) == {"violation", "residual", "gap", "n_checked", "verdict"}
