import numpy as np
import pytest
from numpy.testing import assert_allclose

from cyclicot import (DiscreteMeasure, Plan, make_instance, monge_test, support_dimension,
                      uniqueness_probe)
from cyclicot.construct import dirac_example, regular_instance
from cyclicot.diagnose import partner_spread, plan_distance


def line(k):
    return DiscreteMeasure(np.arange(k, dtype=float)[:, None], np.full(k, 1.0 / k))


def test_graph_plan_is_monge():
    inst = make_instance([line(3), line(3)])
    plan = Plan(inst, [[0, 2], [1, 1], [2, 0]], np.full(3, 1 / 3))
    rep = monge_test(plan)
    assert rep.is_monge and rep.split_mass == 0


def test_product_plan_split_mass():
    inst = make_instance([line(2), line(2)])
    rep = monge_test(Plan.product(inst))
    assert not rep.is_monge
    assert_allclose(rep.split_mass, 0.5)


def test_partner_spread_zero_on_graphs():
    inst = make_instance([line(3), line(3)])
    plan = Plan(inst, [[0, 0], [1, 1], [2, 2]], np.full(3, 1 / 3))
    assert partner_spread(plan) == 0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_support_dimension_of_subspaces(rng, d):
    basis = rng.normal(size=(d, 6))
    pts = rng.normal(size=(200, d)) @ basis + 3.0
    assert support_dimension(pts) == d


def test_support_dimension_needs_points():
    with pytest.raises(ValueError):
        support_dimension(np.zeros((5, 2)))


def test_plan_distance():
    inst = make_instance([line(2), line(2)])
    p = Plan(inst, [[0, 0], [1, 1]], [0.5, 0.5])
    q = Plan(inst, [[0, 1], [1, 0]], [0.5, 0.5])
    assert plan_distance(p, q) == 2.0
    assert plan_distance(p, p) == 0.0


def test_uniqueness_false_on_dirac():
    pkg = dirac_example(grid_points_per_axis=5)
    assert not uniqueness_probe(pkg.instance, n_perturbations=3).unique_verdict


def test_uniqueness_true_on_uniform_grid():
    rep = uniqueness_probe(regular_instance(1.0, 4), n_perturbations=3)
    assert rep.unique_verdict
