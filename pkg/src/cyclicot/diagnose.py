"""Observable structure of discrete plans: graph-ness, support dimension, uniqueness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, Plan
from .cost import build_tensor
from .solve import exact_lp


@dataclass(frozen=True)
class MongeReport:
    is_monge: bool
    split_mass: float
    worst_x1: np.ndarray
    worst_x1_index: int


def monge_test(plan: Plan, split_tol: float = 1e-9) -> MongeReport:
    """Is ``plan`` concentrated on the graph of a map of the first variable?

    For each first-marginal support point the mass not carried by its single
    heaviest partner tuple (x_2, ..., x_m) is "split"; the plan is Monge when
    the total split mass is at most ``split_tol``.
    """
    # merge duplicated entries so that a partner is a distinct tuple
    keys, inverse = np.unique(plan.indices, axis=0, return_inverse=True)
    masses = np.bincount(inverse.reshape(-1), weights=plan.masses)
    first = keys[:, 0]
    n1 = plan.instance.marginals[0].size
    totals = np.bincount(first, weights=masses, minlength=n1)
    heaviest = np.zeros(n1)
    np.maximum.at(heaviest, first, masses)
    split = totals - heaviest
    worst = int(np.argmax(split))
    total_split = float(split.sum())
    return MongeReport(total_split <= split_tol, total_split,
                       plan.instance.marginals[0].points[worst].copy(), worst)


def partner_spread(plan: Plan) -> float:
    """Mass-weighted mean distance of partner tuples from their conditional mean.

    A complement to split mass for refinements: plans that split atoms only
    between neighbouring grid cells have small spread.
    """
    first = plan.indices[:, 0]
    pts = np.hstack(plan.tuple_points()[1:])
    n1 = plan.instance.marginals[0].size
    totals = np.bincount(first, weights=plan.masses, minlength=n1)
    means = np.zeros((n1, pts.shape[1]))
    np.add.at(means, first, plan.masses[:, None] * pts)
    means /= np.where(totals > 0, totals, 1.0)[:, None]
    dev = np.linalg.norm(pts - means[first], axis=1)
    return float(plan.masses @ dev / plan.masses.sum())


def support_dimension(points, scale: float = 1e-6) -> int:
    """Number of singular values of the centered cloud above ``scale`` times the largest."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] < 10:
        raise ValueError("support_dimension needs at least 10 points")
    s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > scale * s[0]))


def plan_support_points(plan: Plan) -> np.ndarray:
    """Concatenated coordinates (x_1, ..., x_m) of every plan entry, one row each."""
    return np.hstack(plan.tuple_points())


def plan_distance(p: Plan, q: Plan) -> float:
    """L1 distance between two plans on the same instance."""
    a = {tuple(i): w for i, w in zip(p.indices.tolist(), p.masses)}
    for i, w in zip(q.indices.tolist(), q.masses):
        a[tuple(i)] = a.get(tuple(i), 0.0) - w
    return float(sum(abs(v) for v in a.values()))


@dataclass(frozen=True)
class UniquenessReport:
    unique_verdict: bool
    max_plan_distance: float
    plans: tuple[Plan, ...]
    values: tuple[float, ...]


def uniqueness_probe(instance: Instance, n_perturbations: int = 5, seed: int = 0,
                     tol: float = 1e-6, magnitude: float = 1e-9,
                     objective: str = "surplus") -> UniquenessReport:
    """Re-solve the LP under tiny random objective perturbations.

    Each perturbation adds ``magnitude`` times the objective range times a
    uniform(-1, 1) tensor, which selects one vertex of the optimal face. If
    the optimum is unique all returned plans coincide. ``values`` are the
    unperturbed objective values of the returned plans.
    """
    T = build_tensor(instance, objective).values
    span = float(T.max() - T.min()) or 1.0
    base = exact_lp(instance, objective)
    plans, values = [base.plan], [base.value]
    rng = np.random.default_rng(seed)
    dist = 0.0
    for _ in range(n_perturbations):
        noise = rng.uniform(-1.0, 1.0, T.shape) * magnitude * span
        res = exact_lp(instance, objective, tensor=T + noise)
        plans.append(res.plan)
        values.append(float(np.sum(res.plan.to_dense() * T)))
        dist = max(dist, plan_distance(base.plan, res.plan))
    return UniquenessReport(dist <= tol, dist, tuple(plans), tuple(values))
