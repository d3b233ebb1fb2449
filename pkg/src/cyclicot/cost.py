"""Cyclic quadratic cost, its surplus, and dense tensors over discrete supports.

For points x_1, ..., x_m in R^n and an affine map F::

    c(x) = sum_{k<m} |x_k - x_{k+1}|^2 + |x_m - F(x_1)|^2
    b(x) = sum_{k<m} x_k . x_{k+1} + x_m . F(x_1)

and c + 2 b depends on each x_k separately, so minimizing c and maximizing b
over couplings with fixed marginals are the same problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AffineMap, CapExceededError, Instance, Plan

DEFAULT_TENSOR_CAP = 10**7


def _as_tuple(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("expected m points of equal dimension")
    return pts


def _check(pts: np.ndarray, F: AffineMap):
    if pts.shape[0] < 2:
        raise ValueError("need at least two points")
    if pts.shape[1] != F.dim:
        raise ValueError(f"dimension mismatch: points in R^{pts.shape[1]}, F on R^{F.dim}")


def eval_cost(points, F: AffineMap) -> float:
    pts = _as_tuple(points)
    _check(pts, F)
    chain = np.sum((pts[:-1] - pts[1:]) ** 2)
    return float(chain + np.sum((pts[-1] - F(pts[0])) ** 2))


def eval_surplus(points, F: AffineMap) -> float:
    pts = _as_tuple(points)
    _check(pts, F)
    chain = np.sum(pts[:-1] * pts[1:])
    return float(chain + pts[-1] @ F(pts[0]))


def separable_part(points, F: AffineMap) -> float:
    """|x_1|^2 + |F(x_1)|^2 + 2 sum_{1<k<m} |x_k|^2 + 2 |x_m|^2."""
    pts = _as_tuple(points)
    _check(pts, F)
    sq = np.sum(pts**2, axis=1)
    return float(sq[0] + np.sum(F(pts[0]) ** 2) + 2 * sq[1:].sum())


def cost_surplus_identity(points, F: AffineMap) -> float:
    """c + 2b - separable part; zero up to rounding for every tuple."""
    return eval_cost(points, F) + 2 * eval_surplus(points, F) - separable_part(points, F)


@dataclass(frozen=True)
class CostTensor:
    values: np.ndarray
    is_surplus: bool

    @property
    def shape(self):
        return self.values.shape

    @property
    def value_range(self) -> float:
        return float(self.values.max() - self.values.min())


def _expand(mat: np.ndarray, axes: tuple[int, int], m: int) -> np.ndarray:
    # axes are increasing, so a reshape places the matrix on them
    shape = [1] * m
    shape[axes[0]], shape[axes[1]] = mat.shape
    return mat.reshape(shape)


def pairwise_terms(instance: Instance, kind: str) -> list[tuple[tuple[int, int], np.ndarray]]:
    """The cycle's edge matrices: ((k, k+1), matrix) including the closing edge (0, m-1).

    For ``kind='surplus'`` entry [i, j] of edge (k, k+1) is x_k[i] . x_{k+1}[j]
    and the closing edge holds x_m[j] . F(x_1)[i]; for ``kind='cost'`` the
    squared distances instead.
    """
    X = [mu.points for mu in instance.marginals]
    m = instance.m
    FX1 = instance.F(X[0])
    out = []
    for k in range(m - 1):
        if kind == "surplus":
            mat = X[k] @ X[k + 1].T
        else:
            mat = np.sum((X[k][:, None, :] - X[k + 1][None, :, :]) ** 2, axis=2)
        out.append(((k, k + 1), mat))
    if kind == "surplus":
        mat = FX1 @ X[-1].T
    else:
        mat = np.sum((FX1[:, None, :] - X[-1][None, :, :]) ** 2, axis=2)
    out.append(((0, m - 1), mat))
    return out


def build_tensor(instance: Instance, kind: str = "cost",
                 cap: int = DEFAULT_TENSOR_CAP) -> CostTensor:
    """Dense cost or surplus tensor, row-major over (i_1, ..., i_m)."""
    if kind not in ("cost", "surplus"):
        raise ValueError("kind must be 'cost' or 'surplus'")
    size = int(np.prod(instance.shape, dtype=np.int64))
    if size > cap:
        raise CapExceededError(
            f"tensor would have {size} entries (cap {cap}); use the sparse/certificate path")
    m = instance.m
    values = np.zeros(instance.shape)
    for axes, mat in pairwise_terms(instance, kind):
        values = values + _expand(mat, axes, m)
    return CostTensor(values, is_surplus=(kind == "surplus"))


def plan_value(plan: Plan, kind: str = "surplus") -> float:
    """Integral of the cost or surplus against ``plan``."""
    pts = plan.tuple_points()
    F = plan.instance.F
    if kind == "surplus":
        vals = sum(np.sum(pts[k] * pts[k + 1], axis=1) for k in range(len(pts) - 1))
        vals = vals + np.sum(pts[-1] * F(pts[0]), axis=1)
    elif kind == "cost":
        vals = sum(np.sum((pts[k] - pts[k + 1]) ** 2, axis=1) for k in range(len(pts) - 1))
        vals = vals + np.sum((pts[-1] - F(pts[0])) ** 2, axis=1)
    else:
        raise ValueError("kind must be 'cost' or 'surplus'")
    return float(plan.masses @ vals)


def separable_constant(instance: Instance) -> float:
    """Plan-independent value of the integral of c + 2b for this instance's marginals."""
    mus = instance.marginals
    sq = [mu.weights @ np.sum(mu.points**2, axis=1) for mu in mus]
    FX1 = instance.F(mus[0].points)
    first = sq[0] + mus[0].weights @ np.sum(FX1**2, axis=1)
    return float(first + 2 * sum(sq[1:]))
