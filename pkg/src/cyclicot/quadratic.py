"""Closed-form calculus for quadratic functions and brute-force grid suprema.

The grid routines are deliberately naive: they serve as the independent
oracle for every supremum that the constructions compute in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PD_REL_TOL = 1e-10


class NotPositiveDefinite(ValueError):
    pass


def is_positive_definite(A, rel_tol: float = PD_REL_TOL) -> bool:
    """Symmetric A with smallest eigenvalue above ``rel_tol`` times its trace."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        return False
    eig = np.linalg.eigvalsh(0.5 * (A + A.T))
    return bool(eig[0] > rel_tol * max(np.trace(A), 0.0)) and eig[0] > 0


@dataclass(frozen=True)
class QuadraticForm:
    """f(x) = 1/2 x^T A x + b.x + c0."""

    A: np.ndarray
    b: np.ndarray
    c0: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if np.abs(A - A.T).max() > 1e-12 * max(1.0, np.abs(A).max()):
            raise ValueError("A is not symmetric")
        A = 0.5 * (A + A.T)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.size != A.shape[0]:
            raise ValueError("b has the wrong dimension")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c0", float(self.c0))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        vals = 0.5 * np.einsum("ij,jk,ik->i", X, self.A, X) + X @ self.b + self.c0
        return vals if x.ndim > 1 else float(vals[0])


def legendre_quadratic(f: QuadraticForm) -> QuadraticForm:
    """Convex conjugate of a strictly convex quadratic.

    f*(y) = 1/2 (y - b)^T A^{-1} (y - b) - c0, returned expanded as a
    QuadraticForm.
    """
    if not is_positive_definite(f.A):
        raise NotPositiveDefinite("transform unbounded/undefined: A is not positive definite")
    Ainv = np.linalg.inv(f.A)
    Ainv = 0.5 * (Ainv + Ainv.T)
    shift = Ainv @ f.b
    return QuadraticForm(Ainv, -shift, 0.5 * f.b @ shift - f.c0)


def grid_points(lo, hi, step) -> np.ndarray:
    """Lexicographically ordered grid over the box [lo, hi] with spacing ``step``.

    The last point of every axis is ``hi`` whenever the extent is a multiple of
    ``step`` (up to rounding).
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    step = np.broadcast_to(np.asarray(step, dtype=float), lo.shape)
    if np.any(step <= 0) or np.any(hi < lo):
        raise ValueError("empty grid")
    counts = np.floor((hi - lo) / step + 1e-9).astype(int) + 1
    axes = [l + s * np.arange(c) for l, s, c in zip(lo, step, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def grid_sup(objective: Callable[[np.ndarray], np.ndarray], lo=None, hi=None, step=None,
             points: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Exact maximum of ``objective`` over a finite grid.

    ``objective`` receives an (P, n) array and returns P values. Either a box
    (``lo``, ``hi``, ``step``) or explicit ``points`` in lexicographic order is
    given. Ties go to the first (lexicographically smallest) grid point.
    """
    if points is None:
        points = grid_points(lo, hi, step)
    points = np.atleast_2d(points)
    if points.shape[0] == 0:
        raise ValueError("empty grid")
    vals = np.asarray(objective(points), dtype=float).reshape(-1)
    i = int(np.argmax(vals))
    return float(vals[i]), points[i].copy()


def nested_grid_sup(chain_grids, potentials, first_link, closing=None,
                    return_argmax: bool = False):
    """Grid supremum over a chain of variables of bilinear links minus potentials.

    Evaluates ::

        max_{z_1 in G_1, ..., z_r in G_r}  a . z_1 + sum_j z_j . z_{j+1}
                                          + z_r . e - sum_j u_j(z_j)

    by backward induction, each stage a grid maximum taken pointwise over the
    previous grid. ``first_link`` is a, ``closing`` is e (zero when omitted),
    and ``potentials[j]`` is either a callable on (P, n) arrays or an array of
    values tabulated on ``chain_grids[j]``. With ``return_argmax`` the
    maximizing grid indices (one per variable) are returned as well.
    """
    grids = [np.atleast_2d(np.asarray(g, dtype=float)) for g in chain_grids]
    if any(g.shape[0] == 0 for g in grids):
        raise ValueError("empty grid")

    def values(j):
        u = potentials[j]
        return np.asarray(u(grids[j]) if callable(u) else u, dtype=float).reshape(-1)

    a = np.asarray(first_link, dtype=float).reshape(-1)
    e = np.zeros_like(a) if closing is None else np.asarray(closing, dtype=float).reshape(-1)
    # tail(z_j) = -u_j(z_j) + max_{z_{j+1}} [z_j . z_{j+1} + tail(z_{j+1})]
    tail = grids[-1] @ e - values(len(grids) - 1)
    back = []
    for j in range(len(grids) - 2, -1, -1):
        links = grids[j] @ grids[j + 1].T + tail[None, :]
        arg = links.argmax(axis=1)
        back.append(arg)
        tail = links[np.arange(arg.size), arg] - values(j)
    top = grids[0] @ a + tail
    i = int(np.argmax(top))
    if not return_argmax:
        return float(top[i])
    idx = [i]
    for arg in reversed(back):
        idx.append(int(arg[idx[-1]]))
    return float(top[i]), idx


def det_sum(A, B) -> tuple[float, float]:
    """(|A+B|, |A| + |B| + trace(adj(A) B)) for 2x2 matrices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != (2, 2) or B.shape != (2, 2):
        raise ValueError("det_sum needs two 2x2 matrices")
    det = lambda X: X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
    adj = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])
    return det(A + B), det(A) + det(B) + float(np.trace(adj @ B))


def grid_sup_error_bound(curvature, step) -> float:
    """Worst-case shortfall of a grid maximum of a concave quadratic with Hessian -H.

    If the true maximizer lies inside the grid box, some grid point is within
    |step| / 2 of it, and the quadratic drops by at most
    1/2 lambda_max(H) |delta|^2 there. ``step`` is a scalar or per-axis vector.
    """
    H = np.atleast_2d(curvature)
    lam = np.linalg.eigvalsh(0.5 * (H + H.T))[-1]
    half = 0.5 * np.broadcast_to(np.asarray(step, dtype=float), (H.shape[0],))
    return 0.5 * float(lam) * float(np.sum(half**2))
