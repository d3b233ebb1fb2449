"""Solvers for small discrete instances.

``exact_lp`` runs a dense two-phase revised simplex with Bland's rule on the
multi-marginal transportation polytope. Columns are never materialized: a
column is a support-index tuple, so reduced costs are the objective tensor
minus a broadcast sum of per-marginal duals.

``sinkhorn_mm`` solves the entropic relaxation by cyclic log-domain scaling
and ``round_to_feasible`` turns its output into an exactly feasible plan.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import CapExceededError, InfeasibleError, Instance, Plan, validate_instance
from .cost import DEFAULT_TENSOR_CAP, build_tensor

log = logging.getLogger(__name__)

LP_VARIABLE_CAP = 10**5


@dataclass(frozen=True)
class LPResult:
    plan: Plan
    duals: tuple[np.ndarray, ...]
    value: float
    dual_value: float
    iterations: int
    objective: str
    sense: str

    @property
    def duality_gap(self) -> float:
        return abs(self.value - self.dual_value)


def _broadcast_sum(vectors, shape):
    m = len(shape)
    out = np.zeros(shape)
    for k, v in enumerate(vectors):
        s = [1] * m
        s[k] = shape[k]
        out = out + v.reshape(s)
    return out


class _TransportSimplex:
    """Two-phase revised simplex, Bland's rule, on {P >= 0 : marginals of P = w}.

    The last row of every marginal except the first is dropped: each marginal
    constraint block sums to the total mass, so m - 1 rows are redundant.
    """

    def __init__(self, cost: np.ndarray, weights, rc_tol: float, pivot_tol: float = 1e-9,
                 max_iters: int = 200000):
        self.cost = cost
        self.shape = cost.shape
        self.m = len(self.shape)
        self.N = cost.size
        self.row_of = []
        r = 0
        for k, nk in enumerate(self.shape):
            rows = np.full(nk, -1)
            keep = nk if k == 0 else nk - 1
            rows[:keep] = np.arange(r, r + keep)
            r += keep
            self.row_of.append(rows)
        self.r = r
        self.b = np.concatenate([np.asarray(w, float)[: (len(w) if k == 0 else len(w) - 1)]
                                 for k, w in enumerate(weights)])
        self.rc_tol = rc_tol
        self.pivot_tol = pivot_tol
        self.max_iters = max_iters
        self.iterations = 0

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.r)
        if j >= self.N:
            col[j - self.N] = 1.0
            return col
        for k, i in enumerate(np.unravel_index(j, self.shape)):
            row = self.row_of[k][i]
            if row >= 0:
                col[row] = 1.0
        return col

    def basis_matrix(self, basis) -> np.ndarray:
        return np.stack([self.column(j) for j in basis], axis=1)

    def row_duals(self, y: np.ndarray) -> list[np.ndarray]:
        out = []
        for rows in self.row_of:
            v = np.zeros(rows.size)
            kept = rows >= 0
            v[kept] = y[rows[kept]]
            out.append(v)
        return out

    def structural_products(self, y: np.ndarray) -> np.ndarray:
        """y^T A_j for every structural column j, as a tensor."""
        return _broadcast_sum(self.row_duals(y), self.shape)

    def _iterate(self, basis: list[int], cost_of, phase: int) -> list[int]:
        while True:
            if self.iterations >= self.max_iters:
                raise RuntimeError("simplex iteration limit reached")
            B = self.basis_matrix(basis)
            cB = np.array([cost_of(j) for j in basis])
            y = np.linalg.solve(B.T, cB)
            if phase == 1:
                reduced = -self.structural_products(y).ravel()
                art_reduced = 1.0 - y
            else:
                reduced = (self.cost - self.structural_products(y)).ravel()
                art_reduced = None
            candidates = np.flatnonzero(reduced < -self.rc_tol)
            entering = int(candidates[0]) if candidates.size else None
            if entering is None and art_reduced is not None:
                art = np.flatnonzero(art_reduced < -self.rc_tol)
                if art.size:
                    entering = self.N + int(art[0])
            if entering is None:
                return basis
            xB = np.linalg.solve(B, self.b)
            xB = np.where(xB < 0, 0.0, xB)
            d = np.linalg.solve(B, self.column(entering))
            pos = np.flatnonzero(d > self.pivot_tol)
            if pos.size == 0:
                raise RuntimeError("unbounded direction in a bounded transport polytope")
            ratios = xB[pos] / d[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, best)]
            leave = min(ties, key=lambda p: basis[p])
            basis = list(basis)
            basis[leave] = entering
            self.iterations += 1

    def solve(self):
        basis = [self.N + i for i in range(self.r)]
        basis = self._iterate(basis, lambda j: 1.0 if j >= self.N else 0.0, phase=1)
        B = self.basis_matrix(basis)
        xB = np.linalg.solve(B, self.b)
        infeas = sum(x for j, x in zip(basis, xB) if j >= self.N)
        if infeas > 1e-9:
            raise InfeasibleError(f"marginals are inconsistent (phase-one residual {infeas:.3g})")
        basis = self._drive_out_artificials(basis)
        flat_cost = self.cost.ravel()
        basis = self._iterate(basis, lambda j: flat_cost[j], phase=2)
        B = self.basis_matrix(basis)
        xB = np.linalg.solve(B, self.b)
        y = np.linalg.solve(B.T, np.array([flat_cost[j] for j in basis]))
        return basis, np.clip(xB, 0.0, None), y

    def _drive_out_artificials(self, basis):
        basis = list(basis)
        for pos, j in enumerate(list(basis)):
            if j < self.N:
                continue
            B = self.basis_matrix(basis)
            e = np.zeros(self.r)
            e[pos] = 1.0
            row = np.linalg.solve(B.T, e)
            vals = self.structural_products(row).ravel()
            vals[[b for b in basis if b < self.N]] = 0.0
            cand = np.flatnonzero(np.abs(vals) > 1e-9)
            if cand.size == 0:
                raise InfeasibleError("redundant constraint left after row reduction")
            basis[pos] = int(cand[np.argmax(np.abs(vals[cand]))])
        return basis


def exact_lp(instance: Instance, objective: str = "surplus", sense: str | None = None,
             tensor: np.ndarray | None = None, cap: int = LP_VARIABLE_CAP,
             rc_tol: float | None = None) -> LPResult:
    """Optimal basic plan of the transportation LP, with duals.

    ``objective`` is 'surplus' (default sense 'max') or 'cost' (default
    'min'). Duals are per-marginal arrays ``u_k``; for a maximization they
    satisfy sum_k u_k >= objective entrywise, for a minimization <=, with
    equality on the plan's support. ``tensor`` overrides the objective tensor
    (used for perturbation probes).
    """
    if sense is None:
        sense = "max" if objective == "surplus" else "min"
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    size = int(np.prod(instance.shape, dtype=np.int64))
    if size > cap:
        raise CapExceededError(f"LP would have {size} variables (cap {cap})")
    problems = [p for p in validate_instance(instance) if "weights" in p]
    if problems:
        raise InfeasibleError("; ".join(problems))
    if tensor is None:
        tensor = build_tensor(instance, objective).values
    sign = 1.0 if sense == "min" else -1.0
    C = sign * np.asarray(tensor, dtype=float)
    scale = max(1.0, float(np.abs(C).max()))
    if rc_tol is None:
        rc_tol = 1e-12 * scale
    weights = [mu.weights for mu in instance.marginals]
    lp = _TransportSimplex(C, weights, rc_tol=rc_tol)
    basis, xB, y = lp.solve()
    dense = np.zeros(lp.N)
    for j, x in zip(basis, xB):
        if j < lp.N:
            dense[j] += x
    dense = dense.reshape(instance.shape)
    plan = Plan.from_dense(instance, dense)
    duals = tuple(sign * v for v in lp.row_duals(y))
    value = float(np.sum(dense * tensor))
    dual_value = float(sum(w @ u for w, u in zip(weights, duals)))
    log.debug("simplex finished in %d pivots, value %.12g", lp.iterations, value)
    return LPResult(plan, duals, value, dual_value, lp.iterations, objective, sense)


@dataclass(frozen=True)
class SinkhornResult:
    tensor: np.ndarray
    potentials: tuple[np.ndarray, ...]
    residual: float
    converged: bool
    iterations: int
    epsilon: float


def _log_marginal(logP: np.ndarray, k: int) -> np.ndarray:
    axes = tuple(a for a in range(logP.ndim) if a != k)
    return logsumexp(logP, axis=axes) if axes else logP


def sinkhorn_mm(instance: Instance, epsilon: float, max_iters: int = 5000,
                stop_tol: float = 1e-9, objective: str = "cost",
                eps_scaling: bool = True, cap: int = DEFAULT_TENSOR_CAP) -> SinkhornResult:
    """Entropic multi-marginal transport by cyclic log-domain scaling.

    The plan is P = exp((sum_k phi_k - C) / epsilon) with C the cost tensor
    (or minus the surplus). Each sweep resets phi_k so that marginal k is
    matched exactly. With ``eps_scaling`` the potentials are warm-started
    along a geometric sequence of larger epsilons. ``residual`` is the largest
    L1 marginal error of the returned plan.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    tensor = build_tensor(instance, objective, cap=cap).values
    C = tensor if objective == "cost" else -tensor
    shape = instance.shape
    m = instance.m
    logw = []
    for mu in instance.marginals:
        with np.errstate(divide="ignore"):
            logw.append(np.log(mu.weights))
    phis = [np.zeros(nk) for nk in shape]

    span = max(float(C.max() - C.min()), 1e-300)
    schedule = [epsilon]
    if eps_scaling:
        e = span
        while e > epsilon:
            schedule.insert(-1, e)
            e *= 0.25
    total_iters = 0
    residual = np.inf
    converged = False
    logP = None
    for stage, eps in enumerate(schedule):
        final = stage == len(schedule) - 1
        budget = max_iters if final else max(50, max_iters // 20)
        tol = stop_tol if final else max(stop_tol, 1e-4)
        for it in range(budget):
            for k in range(m):
                logP = (_broadcast_sum(phis, shape) - C) / eps
                phis[k] = phis[k] + eps * (logw[k] - _log_marginal(logP, k))
            logP = (_broadcast_sum(phis, shape) - C) / eps
            P = np.exp(logP)
            residual = max(float(np.abs(P.sum(axis=tuple(a for a in range(m) if a != k))
                                        - np.exp(logw[k])).sum()) for k in range(m))
            total_iters += 1
            if residual <= tol:
                converged = final
                break
    if not converged:
        log.warning("sinkhorn stopped at residual %.3g after %d sweeps", residual, total_iters)
    return SinkhornResult(np.exp(logP), tuple(phis), residual, converged, total_iters, epsilon)


def round_to_feasible(tensor, instance: Instance) -> Plan:
    """Project a nearly feasible nonnegative tensor onto the exact marginals.

    Slices carrying too much mass along each axis are scaled down, then the
    common deficit is filled with the product of the per-marginal deficits.
    The L1 change is at most twice the input's total marginal error.
    """
    P = np.array(tensor, dtype=float)
    if P.shape != instance.shape:
        raise ValueError("tensor shape does not match instance supports")
    if np.any(P < 0):
        raise ValueError("tensor has negative entries")
    m = instance.m
    wmin = min(float(mu.weights[mu.weights > 0].min()) for mu in instance.marginals)
    for k, mu in enumerate(instance.marginals):
        marg = P.sum(axis=tuple(a for a in range(m) if a != k))
        if np.abs(marg - mu.weights).max() >= 0.5 * wmin:
            raise InfeasibleError("marginal error too large to round")
    for k, mu in enumerate(instance.marginals):
        marg = P.sum(axis=tuple(a for a in range(m) if a != k))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(marg > mu.weights, mu.weights / marg, 1.0)
        s = [1] * m
        s[k] = marg.size
        P = P * ratio.reshape(s)
    deficits = [mu.weights - P.sum(axis=tuple(a for a in range(m) if a != k))
                for k, mu in enumerate(instance.marginals)]
    deficits = [np.clip(e, 0.0, None) for e in deficits]
    missing = 1.0 - P.sum()
    if missing > 0 and all(e.sum() > 0 for e in deficits):
        fill = deficits[0]
        for e in deficits[1:]:
            fill = np.multiply.outer(fill, e)
        P = P + fill / missing ** (m - 1)
    return Plan.from_dense(instance, P)
