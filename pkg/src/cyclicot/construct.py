"""Concrete instances, plans and dual potentials for the cyclic-cost problem.

* ``dirac_example``: two Dirac marginals make every coupling optimal.
* ``prop42_package``: four marginals in R^2 and a linear F that is not a
  positive multiple of the identity; the optimal plan lives on a
  three-dimensional linear set W and so is not a graph over x_1.
* ``prop43_package``: the same phenomenon for m >= 5 marginals with F = I.
* ``regular_instance``: grid marginals with positive weights for the m = 4,
  F = lambda I regime, where optimal plans are graphs in the continuum.

Counterexample plans are uniform on sampled points of W, and their marginals
are the plan's projections, so the closed-form potentials certify optimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ballantine import factor_pd2, factor_pd3, lemma41_singular_companion
from .core import (AffineMap, Box, DiscreteMeasure, HypothesisError, Instance, Plan,
                   PotentialSet, QuadraticPotential, make_instance)
from .quadratic import grid_sup_error_bound, nested_grid_sup

PROP43_MATRIX = np.array([[-1.0, 3.0], [0.0, -1.0]])


@dataclass(frozen=True)
class CounterexamplePackage:
    kind: str
    instance: Instance
    plan: Plan
    potentials: PotentialSet
    support_parametrization: dict
    expected_support_dim: int | None
    samples: np.ndarray | None = None  # (S, m, n) raw sampled tuples
    notes: dict = field(default_factory=dict)


def _package_from_samples(kind, samples, F, potentials, parametrization, expected_dim,
                          notes=None) -> CounterexamplePackage:
    S, m, n = samples.shape
    marginals, columns = [], []
    for k in range(m):
        pts, inverse = np.unique(samples[:, k, :], axis=0, return_inverse=True)
        weights = np.bincount(inverse.reshape(-1), minlength=pts.shape[0]) / S
        marginals.append(DiscreteMeasure(pts, weights, Box.covering(pts)))
        columns.append(inverse.reshape(-1))
    instance = make_instance(marginals, F)
    idx = np.stack(columns, axis=1)
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    masses = np.bincount(inverse.reshape(-1)) / S
    plan = Plan(instance, keys, masses)
    return CounterexamplePackage(kind, instance, plan, potentials, parametrization,
                                 expected_dim, samples, dict(notes or {}))


def _grid_in_ball(r: float, k: int, n: int) -> np.ndarray:
    axes = [np.linspace(-r, r, k)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return pts[np.linalg.norm(pts, axis=1) < r]


def dirac_example(r: float = 1.0, grid_points_per_axis: int = 5, n: int = 2) -> CounterexamplePackage:
    """mu_2 = mu_4 = delta_0, mu_1 = mu_3 uniform on grid points inside B(0, r); F = I.

    Since y = w = 0 on every coupling, b vanishes and the cost reduces to
    2 (|x|^2 + |z|^2): every feasible plan is optimal. The returned plan is
    the product measure and the potentials are the constant majorant u = 0.
    ``notes['cost_scale']`` is the factor 1/2 under which the plan cost equals
    the integral of |x|^2 against mu_1 plus that of |z|^2 against mu_3.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if grid_points_per_axis < 2:
        raise ValueError("degenerate grid: need at least 2 points per axis")
    ball = _grid_in_ball(r, grid_points_per_axis, n)
    if ball.shape[0] == 0:
        raise ValueError("degenerate grid: no grid point inside the open ball")
    box = Box(-r * np.ones(n), r * np.ones(n))
    uniform = DiscreteMeasure(ball, np.full(ball.shape[0], 1.0 / ball.shape[0]), box)
    origin = DiscreteMeasure(np.zeros((1, n)), [1.0], box)
    instance = make_instance([uniform, origin, uniform, origin], np.eye(n))
    plan = Plan.product(instance)
    zero = QuadraticPotential.constant(n, 0.0)
    potentials = PotentialSet((zero,) * 4)
    second_moment = float(uniform.weights @ np.sum(ball**2, axis=1))
    notes = {"cost_scale": 0.5, "predicted_scaled_cost": 2 * second_moment,
             "every_feasible_plan_optimal": True}
    return CounterexamplePackage("dirac", instance, plan, potentials,
                                 {"ball_radius": r, "grid_points_per_axis": grid_points_per_axis},
                                 None, None, notes)


def dirac_monge_plan(instance: Instance) -> Plan:
    """(Id, 0, T, 0)#mu_1 with T = Id, valid because mu_1 = mu_3."""
    n1 = instance.marginals[0].size
    idx = np.stack([np.arange(n1), np.zeros(n1, int), np.arange(n1), np.zeros(n1, int)], axis=1)
    return Plan(instance, idx, instance.marginals[0].weights)


def _is_positive_scalar(F) -> bool:
    return F[0, 1] == 0 and F[1, 0] == 0 and F[0, 0] == F[1, 1] and F[0, 0] > 0


def prop42_structure(F) -> dict:
    """Matrices behind the four-marginal construction for a given linear F."""
    F = np.asarray(F, dtype=float)
    if F.shape != (2, 2):
        raise ValueError("F must be 2x2")
    if _is_positive_scalar(F):
        raise HypothesisError("F is a positive multiple of the identity")
    M = lemma41_singular_companion(F)
    Minv = np.linalg.inv(M)
    M1, M2 = factor_pd2(Minv).factors
    A = Minv @ F + np.eye(2)
    U, s, Vt = np.linalg.svd(A)
    return {"F": F, "M": M, "M1": M1, "M2": M2, "A": A,
            "v": Vt[-1], "left_null": U[:, -1], "singular_values": s}


def prop42_potentials(st: dict) -> PotentialSet:
    F, M1, M2, A, v = st["F"], st["M1"], st["M2"], st["A"], st["v"]
    M2F = M2 @ F
    u1 = (np.eye(2) - np.outer(v, v)) + M2F.T @ M1 @ M2F + F.T @ M2 @ F
    u2 = A @ A.T + M1
    u3 = np.linalg.inv(M1) + M2
    u4 = np.linalg.inv(M2)
    return PotentialSet(tuple(QuadraticPotential(0.5 * (Q + Q.T)) for Q in (u1, u2, u3, u4)))


def prop42_package(F, n_samples: int = 500, seed: int = 0, partners: int = 2) -> CounterexamplePackage:
    """Uniform plan on sampled points of W for the four-marginal counterexample.

    Samples come in groups sharing x (drawn from t in [-1, 1] and y_0 in
    [-1, 1]^2), each member moving y along the left null direction of A by
    s in [-1, 1]. Every group is one x_1 atom with ``partners`` partner
    tuples, so the discrete plan is visibly not a graph.
    """
    if n_samples < 1 or partners < 1:
        raise ValueError("need positive n_samples and partners")
    st = prop42_structure(F)
    F, M1, M2, A, v, k = st["F"], st["M1"], st["M2"], st["A"], st["v"], st["left_null"]
    rng = np.random.default_rng(seed)
    n_groups = -(-n_samples // partners)
    t = rng.uniform(-1, 1, n_groups)
    y0 = rng.uniform(-1, 1, (n_groups, 2))
    s = rng.uniform(-1, 1, (n_groups, partners))
    x = np.repeat(y0 @ A + t[:, None] * v, partners, axis=0)[:n_samples]
    y = (y0[:, None, :] + s[:, :, None] * k).reshape(-1, 2)[:n_samples]
    Fx = x @ F.T
    z = (y + Fx @ M2.T) @ M1.T
    w = (z + Fx) @ M2.T
    samples = np.stack([x, y, z, w], axis=1)
    param = {"free_parameters": ["t: coefficient of x along v", "y in R^2"],
             "constraints": ["x_perp = A^T y", "z = M1 (y + M2 F x)", "w = M2 (z + F x)"],
             **{key: np.asarray(val).tolist() for key, val in st.items()}}
    return _package_from_samples("prop42", samples, AffineMap(F), prop42_potentials(st),
                                 param, 3, {"partners": partners, "seed": seed})


def prop42_w_residual(package: CounterexamplePackage) -> float:
    p = package.support_parametrization
    F, M1, M2, A, v = (np.array(p[key]) for key in ("F", "M1", "M2", "A", "v"))
    x, y, z, w = (package.samples[:, k, :] for k in range(4))
    x_perp = x - np.outer(x @ v, v)
    Fx = x @ F.T
    res = [x_perp - y @ A, z - (y + Fx @ M2.T) @ M1.T, w - (z + Fx) @ M2.T]
    return float(max(np.abs(r).max() for r in res))


def prop43_factors(seed: int = 0):
    return factor_pd3(PROP43_MATRIX, seed=seed).factors


def prop43_potentials(m: int, M1, M2, M3) -> PotentialSet:
    if m < 5:
        raise HypothesisError("the construction needs m >= 5")
    I = np.eye(2)
    M23 = M2 @ M3
    g1 = M3.T @ M2 @ M3 + M23.T @ M1 @ M23
    Qs = [np.diag([0.0, 3.0]) + g1 + M3 + (m - 5) * I,
          np.diag([3.0, 0.0]) + M1,
          np.linalg.inv(M1) + M2,
          np.linalg.inv(M2) + M3]
    M3inv = np.linalg.inv(M3)
    if m == 5:
        Qs.append(M3inv)
    else:
        Qs.append(M3inv + I)
        Qs.extend(2 * I for _ in range(6, m))
        Qs.append(I)
    return PotentialSet(tuple(QuadraticPotential(0.5 * (Q + Q.T)) for Q in Qs))


def prop43_package(m: int = 5, n_samples: int = 500, seed: int = 0,
                   partners: int = 2) -> CounterexamplePackage:
    """Uniform plan on sampled points of W for the m >= 5, F = I counterexample.

    Each group shares x_1 in [-1, 1]^2; members differ in the free second
    coordinate of x_2 (drawn from [-1, 1]) while x_2's first coordinate equals
    x_1's second.
    """
    if m < 5:
        raise HypothesisError("the construction needs m >= 5")
    M1, M2, M3 = prop43_factors(seed)
    rng = np.random.default_rng(seed)
    n_groups = -(-n_samples // partners)
    x1 = np.repeat(rng.uniform(-1, 1, (n_groups, 2)), partners, axis=0)[:n_samples]
    free = rng.uniform(-1, 1, n_groups * partners)[:n_samples]
    x2 = np.stack([x1[:, 1], free], axis=1)
    xs = [x1, x2]
    xs.append((x2 + x1 @ (M2 @ M3).T) @ M1.T)
    xs.append((xs[2] + x1 @ M3.T) @ M2.T)
    xs.append((xs[3] + x1) @ M3.T)
    for _ in range(6, m + 1):
        xs.append(x1 + xs[-1])
    samples = np.stack(xs, axis=1)
    param = {"free_parameters": ["x_1 in R^2", "second coordinate of x_2"],
             "constraints": ["x_2[0] = x_1[1]", "x_3 = M1 (x_2 + M2 M3 x_1)",
                             "x_4 = M2 (x_3 + M3 x_1)", "x_5 = M3 (x_4 + x_1)",
                             "x_k = x_1 + x_{k-1} for k >= 6"],
             "m": m, "M": PROP43_MATRIX.tolist(),
             "M1": M1.tolist(), "M2": M2.tolist(), "M3": M3.tolist()}
    return _package_from_samples("prop43", samples, AffineMap.identity(2),
                                 prop43_potentials(m, M1, M2, M3), param, 3,
                                 {"partners": partners, "seed": seed})


def prop43_w_residual(package: CounterexamplePackage) -> float:
    p = package.support_parametrization
    M1, M2, M3 = (np.array(p[key]) for key in ("M1", "M2", "M3"))
    xs = [package.samples[:, k, :] for k in range(package.samples.shape[1])]
    res = [xs[1][:, 0] - xs[0][:, 1],
           xs[2] - (xs[1] + xs[0] @ (M2 @ M3).T) @ M1.T,
           xs[3] - (xs[2] + xs[0] @ M3.T) @ M2.T,
           xs[4] - (xs[3] + xs[0]) @ M3.T]
    res += [xs[k] - xs[0] - xs[k - 1] for k in range(5, len(xs))]
    return float(max(np.abs(r).max() for r in res))


def regular_instance(lam: float = 1.0, grid_points_per_axis: int = 4, n: int = 1,
                     jitter_seed: int = 0, m: int = 4, jitter: float = 0.0) -> Instance:
    """m = 4 instance with F = lam I and positive jittered weights on a grid of [-1, 1]^n.

    Weights are proportional to 1 + jitter * U(-1, 1), drawn independently
    for every marginal; the default jitter 0 gives uniform weights, the
    discretization of the uniform density on the box.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not 0 <= jitter < 1:
        raise ValueError("jitter must lie in [0, 1) to keep weights positive")
    rng = np.random.default_rng(jitter_seed)
    box = Box(-np.ones(n), np.ones(n))
    pts = box.grid(grid_points_per_axis)
    marginals = []
    for _ in range(m):
        w = 1.0 + jitter * rng.uniform(-1, 1, pts.shape[0])
        marginals.append(DiscreteMeasure(pts, w / w.sum(), box))
    return make_instance(marginals, AffineMap.identity(n, lam))


def _as_values(u, grid):
    return np.asarray(u(grid) if callable(u) else u, dtype=float).reshape(-1)


def effective_surplus(x, y, u3, u4, F, z_grid, w_grid) -> float:
    """x.y + max_z [y.z - u3(z) + max_w ((F(x) + z).w - u4(w))] over grids.

    ``u3``/``u4`` are callables on (P, n) arrays or values tabulated on the
    grids; ``F`` is an AffineMap or a matrix.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    F = F if isinstance(F, AffineMap) else AffineMap(F)
    z_grid, w_grid = np.atleast_2d(z_grid), np.atleast_2d(w_grid)
    inner = nested_grid_sup([z_grid, w_grid],
                            [_as_values(u3, z_grid), _as_values(u4, w_grid)],
                            first_link=y, closing=F(x))
    return float(x @ y + inner)


def chain_sup(x1, x2, potentials, grids, F=None) -> float:
    """Grid value of sup over x_3..x_m of b(x_1, ..., x_m) - sum_{k>=3} u_k(x_k).

    ``potentials`` and ``grids`` list u_3..u_m and their grids.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    Fx1 = x1 if F is None else (F if isinstance(F, AffineMap) else AffineMap(F))(x1)
    return float(x1 @ x2 + nested_grid_sup(grids, potentials, first_link=x2, closing=Fx1))


def chain_sup_tolerance(Qs, steps) -> float:
    """Grid error bound for ``chain_sup`` with quadratic potentials 1/2 x^T Q_k x.

    The concave objective of the innermost variable has Hessian -Q_m; an outer
    variable's objective adds the convex inner supremum, whose Hessian is the
    inverse of the next level's curvature. Each level contributes
    ``grid_sup_error_bound``; the errors add up along the chain.
    """
    H = np.atleast_2d(Qs[-1])
    total = grid_sup_error_bound(H, steps[-1])
    for Q, step in zip(reversed(Qs[:-1]), reversed(steps[:-1])):
        H = Q - np.linalg.inv(H)
        total += grid_sup_error_bound(H, step)
    return total


def refined_chain_sup(x1, x2, potentials, boxes, points_per_axis: int = 41, levels: int = 4,
                      zoom_halfwidth: float = 6.0, F=None):
    """``chain_sup`` with successive local refinement around the grid argmax.

    Level 0 uses a regular grid over each of ``boxes``; every later level
    re-grids a box of half-width ``zoom_halfwidth`` previous steps centred on
    the previous argmax, clipped to the original box. Returns
    (value, final steps, interior) where ``interior`` says the final argmax
    lies strictly inside every final box, the condition under which
    ``chain_sup_tolerance`` applies to a concave chain.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    Fx1 = x1 if F is None else (F if isinstance(F, AffineMap) else AffineMap(F))(x1)
    cur = [Box(np.asarray(b.lo, float), np.asarray(b.hi, float)) for b in boxes]
    for level in range(levels):
        grids = [b.grid(points_per_axis) for b in cur]
        steps = [(b.hi - b.lo) / (points_per_axis - 1) for b in cur]
        val, idx = nested_grid_sup(grids, potentials, first_link=x2, closing=Fx1,
                                   return_argmax=True)
        centers = [g[i] for g, i in zip(grids, idx)]
        interior = all(np.all(c > b.lo + 0.5 * s) and np.all(c < b.hi - 0.5 * s)
                       for c, b, s in zip(centers, cur, steps))
        if level == levels - 1:
            break
        cur = [Box(np.maximum(b0.lo, c - zoom_halfwidth * s), np.minimum(b0.hi, c + zoom_halfwidth * s))
               for c, s, b0 in zip(centers, steps, boxes)]
    return float(x1 @ x2 + val), steps, interior
