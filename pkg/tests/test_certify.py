import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from cyclicot import (AffineMap, CapExceededError, PotentialSet, QuadraticPotential,
                      TabulatedPotential, certify, exact_lp, feasibility_violation)
from cyclicot.certify import check_sets, max_gap_over_product
from cyclicot.construct import prop42_package

from conftest import random_instance


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_elimination_equals_enumeration(seed, m):
    rng = np.random.default_rng(seed)
    sets = [rng.normal(size=(int(rng.integers(1, 4)), 2)) for _ in range(m)]
    vals = [rng.normal(size=len(s)) for s in sets]
    F = AffineMap(rng.normal(size=(2, 2)))
    best = -np.inf
    for idx in itertools.product(*[range(len(s)) for s in sets]):
        x = [s[i] for s, i in zip(sets, idx)]
        b = sum(x[k] @ x[k + 1] for k in range(m - 1)) + x[-1] @ F(x[0])
        best = max(best, b - sum(v[i] for v, i in zip(vals, idx)))
    got, tup = max_gap_over_product(sets, vals, F)
    assert_allclose(got, best, rtol=1e-12, atol=1e-12)
    x = [s[i] for s, i in zip(sets, tup)]
    direct = sum(x[k] @ x[k + 1] for k in range(m - 1)) + x[-1] @ F(x[0])
    assert_allclose(direct - sum(v[i] for v, i in zip(vals, tup)), best, rtol=1e-12, atol=1e-12)


def test_lp_duals_certify_lp_plan(rng):
    inst = random_instance(rng, (3, 2, 3, 2))
    res = exact_lp(inst)
    pots = PotentialSet(tuple(TabulatedPotential(u) for u in res.duals))
    cert = certify(res.plan, pots)
    assert cert.is_optimal
    assert abs(cert.duality_gap) <= 1e-8
    assert cert.n_points_checked == 36


def test_shifted_potential_is_detected():
    pkg = prop42_package(np.array([[0.0, -1.0], [1.0, 0.0]]), n_samples=60)
    u = list(pkg.potentials.potentials)
    u[2] = QuadraticPotential(u[2].Q, u[2].l, u[2].q0 - 1e-3)
    cert = certify(pkg.plan, PotentialSet(tuple(u)), grid="grid", points_per_axis=4)
    assert not cert.is_optimal
    assert_allclose(cert.max_feasibility_violation, 1e-3, rtol=1e-6)


def test_tabulated_potentials_need_supports(rng):
    inst = random_instance(rng)
    pots = PotentialSet(tuple(TabulatedPotential(np.zeros(2)) for _ in range(4)))
    with pytest.raises(ValueError):
        check_sets(inst, pots, "grid")


def test_check_cap():
    pkg = prop42_package(np.array([[0.0, -1.0], [1.0, 0.0]]), n_samples=60)
    with pytest.raises(CapExceededError):
        feasibility_violation(pkg.potentials, pkg.instance, "grid", 8, cap=1000)
