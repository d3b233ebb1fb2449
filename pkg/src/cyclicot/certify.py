"""Duality certificates for the surplus problem.

A feasible dual tuple (sum_k u_k >= b everywhere) that is tight on the support
of a plan proves the plan optimal among all couplings of its marginals.
Feasibility is checked on a finite product set; because b is a cycle of
pairwise dot products, the maximum of b - sum u_k over the full product is
computed exactly by fixing x_1 and eliminating x_2, ..., x_m in turn, which
costs O(N_1 sum_k N_k N_{k+1}) instead of O(prod_k N_k).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import (CapExceededError, Certificate, Instance, Plan, PotentialSet,
                   QuadraticPotential)
from .cost import plan_value

DEFAULT_TOL = 1e-8
DEFAULT_CHECK_CAP = 10**11
_CHUNK_ENTRIES = 5 * 10**6


def check_sets(instance: Instance, potentials: PotentialSet, grid="supports",
               points_per_axis: int = 8, enlarge: float = 2.0,
               include_supports: bool = True) -> list[np.ndarray]:
    """Per-marginal point sets on which feasibility is checked.

    ``grid`` is 'supports', 'grid' (a regular grid over each domain box
    enlarged by ``enlarge``, plus the supports unless ``include_supports`` is
    False), or an explicit list of per-marginal point arrays.
    """
    if isinstance(grid, str):
        if grid == "supports":
            return [mu.points for mu in instance.marginals]
        if grid != "grid":
            raise ValueError("grid must be 'supports', 'grid', or a list of point arrays")
        if not potentials.is_closed_form:
            raise ValueError("tabulated potentials can only be checked on supports")
        sets = []
        for mu in instance.marginals:
            g = mu.box.enlarged(enlarge).grid(points_per_axis)
            sets.append(np.vstack([g, mu.points]) if include_supports else g)
        return sets
    return [np.atleast_2d(np.asarray(g, dtype=float)) for g in grid]


def max_gap_over_product(sets: Sequence[np.ndarray], values: Sequence[np.ndarray],
                         F) -> tuple[float, tuple[int, ...]]:
    """max over the product of ``sets`` of b(x) - sum_k values[k][i_k].

    Returns the maximum and one maximizing index tuple.
    """
    m = len(sets)
    X = [np.atleast_2d(s) for s in sets]
    V = [np.asarray(v, dtype=float) for v in values]
    links = [X[k] @ X[k + 1].T for k in range(m - 1)]
    closing = X[-1] @ F(X[0]).T  # [i_m, i_1] -> x_m . F(x_1)
    n1 = X[0].shape[0]
    widest = max(X[k].shape[0] * X[k + 1].shape[0] for k in range(m - 1))
    chunk = max(1, _CHUNK_ENTRIES // max(widest, 1))
    best, best_tuple = -np.inf, None
    for start in range(0, n1, chunk):
        rows = np.arange(start, min(n1, start + chunk))
        # msg[b, i_k]: best partial value of the chain x_1 -> ... -> x_k
        msg = links[0][rows] - V[1][None, :]
        back = []
        for k in range(1, m - 1):
            cand = msg[:, :, None] + links[k][None, :, :]
            arg = cand.argmax(axis=1)
            back.append(arg)
            msg = np.take_along_axis(cand, arg[:, None, :], axis=1)[:, 0, :] - V[k + 1][None, :]
        total = msg + closing[:, rows].T
        last = total.argmax(axis=1)
        vals = total[np.arange(rows.size), last] - V[0][rows]
        b = int(vals.argmax())
        if vals[b] > best:
            best = float(vals[b])
            tup = [int(last[b])]
            for arg in reversed(back):
                tup.append(int(arg[b, tup[-1]]))
            best_tuple = (int(rows[b]),) + tuple(reversed(tup))
    return best, best_tuple


def _values_on(potentials: PotentialSet, instance: Instance, k: int, pts: np.ndarray):
    u = potentials[k]
    if isinstance(u, QuadraticPotential):
        return u(pts)
    return potentials.evaluate(k, pts, instance)


def feasibility_violation(potentials: PotentialSet, instance: Instance, check_grid="supports",
                          points_per_axis: int = 8, enlarge: float = 2.0,
                          cap: int = DEFAULT_CHECK_CAP, return_count: bool = False):
    """Largest b - sum_k u_k over the product of the check sets.

    Positive values are violations. The maximum is exact over the whole
    product (see module docstring), not sampled; ``cap`` bounds the
    elimination work N_1 * sum_k N_k N_{k+1} rather than the tuple count.
    """
    sets = check_sets(instance, potentials, check_grid, points_per_axis, enlarge)
    sizes = [s.shape[0] for s in sets]
    count = math.prod(sizes)
    work = sizes[0] * sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))
    if work > cap:
        raise CapExceededError(f"checking {count} tuples needs {work} operations (cap {cap})")
    values = [_values_on(potentials, instance, k, s) for k, s in enumerate(sets)]
    worst, _ = max_gap_over_product(sets, values, instance.F)
    return (worst, count) if return_count else worst


def _support_slack(plan: Plan, potentials: PotentialSet) -> np.ndarray:
    """sum_k u_k - b at every plan entry."""
    inst = plan.instance
    pts = plan.tuple_points()
    b = sum(np.sum(pts[k] * pts[k + 1], axis=1) for k in range(inst.m - 1))
    b = b + np.sum(pts[-1] * inst.F(pts[0]), axis=1)
    total = np.zeros(plan.masses.size)
    for k in range(inst.m):
        vals = potentials.on_support(inst, k)
        total += vals[plan.indices[:, k]]
    return total - b


def support_equality_residual(plan: Plan, potentials: PotentialSet) -> float:
    """max over plan entries of |b - sum_k u_k|."""
    return float(np.abs(_support_slack(plan, potentials)).max())


def duality_gap(plan: Plan, potentials: PotentialSet) -> float:
    """sum_k integral of u_k against marginal k, minus the integral of b against the plan.

    Marginal weights are taken from the plan's instance.
    """
    inst = plan.instance
    dual = sum(mu.weights @ potentials.on_support(inst, k)
               for k, mu in enumerate(inst.marginals))
    return float(dual - plan_value(plan, "surplus"))


def certify(plan: Plan, potentials: PotentialSet, instance: Instance | None = None,
            grid="supports", points_per_axis: int = 8, enlarge: float = 2.0,
            tol: float = DEFAULT_TOL) -> Certificate:
    instance = plan.instance if instance is None else instance
    viol, count = feasibility_violation(potentials, instance, grid, points_per_axis, enlarge,
                                        return_count=True)
    return Certificate(
        max_feasibility_violation=viol,
        support_equality_residual=support_equality_residual(plan, potentials),
        duality_gap=duality_gap(plan, potentials),
        n_points_checked=count,
        tol=tol,
    )
