"""Data model for discrete multi-marginal transport problems.

Every object here is immutable after construction: numpy arrays are copied
and flagged read-only. Structural problems (wrong shapes) raise on
construction; semantic invariants (normalization, duplicate points, box
membership) are reported by :func:`validate_instance` and
:func:`validate_plan` so that malformed inputs can be diagnosed rather than
rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

WEIGHT_TOL = 1e-12
DISTINCT_TOL = 1e-12
PLAN_MASS_TOL = 1e-10
PLAN_MARGINAL_TOL = 1e-8
SYMMETRY_TOL = 1e-12


class CyclicOTError(Exception):
    """Base class for errors raised by this package."""


class CapExceededError(CyclicOTError):
    """A dense object would exceed the configured size cap."""


class InfeasibleError(CyclicOTError):
    """Marginals or plans violate the feasibility constraints."""


class HypothesisError(CyclicOTError, ValueError):
    """An input violates the hypothesis of the construction used."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]`` in R^n."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(self.lo).reshape(-1)
        hi = _frozen(self.hi).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box bounds have different dimensions")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lo - tol) & (points <= self.hi + tol), axis=1)

    def enlarged(self, factor: float) -> "Box":
        """Box with the same center and half-widths scaled by ``factor``."""
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo) * factor
        return Box(center - half, center + half)

    def grid(self, points_per_axis: int) -> np.ndarray:
        """Regular grid of ``points_per_axis**n`` points, lexicographic order."""
        axes = [np.linspace(l, h, points_per_axis) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    @classmethod
    def covering(cls, points, pad: float = 0.05) -> "Box":
        """Smallest box containing ``points``, padded by ``pad`` times its extent."""
        points = np.atleast_2d(points)
        lo, hi = points.min(axis=0), points.max(axis=0)
        extent = np.maximum(hi - lo, 1.0)
        return cls(lo - pad * extent, hi + pad * extent)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud in R^n.

    ``points`` has shape (N, n) and ``weights`` shape (N,).
    """

    points: np.ndarray
    weights: np.ndarray
    box: Box | None = None

    def __post_init__(self):
        points = _frozen(self.points)
        if points.ndim == 1:
            points = _frozen(points.reshape(-1, 1))
        weights = _frozen(self.weights).reshape(-1)
        if points.ndim != 2:
            raise ValueError("points must be a 2-d array of shape (N, n)")
        if points.shape[0] != weights.size:
            raise ValueError("number of points and weights differ")
        if points.shape[0] == 0:
            raise ValueError("a measure needs at least one support point")
        box = self.box if self.box is not None else Box.covering(points)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "box", box)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def problems(self, weight_tol=WEIGHT_TOL, distinct_tol=DISTINCT_TOL) -> list[str]:
        out = []
        if np.any(self.weights < 0):
            out.append("negative weights")
        if abs(self.weights.sum() - 1.0) > weight_tol:
            out.append("weights not normalized")
        if not np.all(np.isfinite(self.points)):
            out.append("non-finite support points")
        elif self.size > 1 and cKDTree(self.points).query_pairs(distinct_tol):
            out.append("duplicate support points")
        if self.box.dim != self.dim:
            out.append("box dimension mismatch")
        elif not np.all(self.box.contains(self.points)):
            out.append("point outside domain box")
        return out


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray | None = None

    def __post_init__(self):
        A = _frozen(np.atleast_2d(self.matrix))
        if A.shape[0] != A.shape[1]:
            raise ValueError("F must be square")
        off = np.zeros(A.shape[0]) if self.offset is None else self.offset
        off = _frozen(off).reshape(-1)
        if off.size != A.shape[0]:
            raise ValueError("offset dimension does not match matrix")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", off)

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "AffineMap":
        return cls(scale * np.eye(n))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_linear(self) -> bool:
        return not np.any(self.offset)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset


@dataclass(frozen=True)
class Instance:
    """One cyclic-cost transport problem: m marginals and the map F."""

    marginals: tuple[DiscreteMeasure, ...]
    F: AffineMap

    def __post_init__(self):
        margs = tuple(self.marginals)
        if len(margs) < 2:
            raise ValueError("need at least two marginals")
        object.__setattr__(self, "marginals", margs)

    @property
    def m(self) -> int:
        return len(self.marginals)

    @property
    def n(self) -> int:
        return self.marginals[0].dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(mu.size for mu in self.marginals)

    @property
    def domain_boxes(self) -> tuple[Box, ...]:
        return tuple(mu.box for mu in self.marginals)


def validate_instance(instance: Instance, weight_tol: float = WEIGHT_TOL,
                      distinct_tol: float = DISTINCT_TOL) -> list[str]:
    """List every violated invariant of ``instance``; empty means valid."""
    report = []
    n = instance.n
    for k, mu in enumerate(instance.marginals):
        if mu.dim != n:
            report.append(f"marginal {k}: dimension mismatch ({mu.dim} != {n})")
            continue
        report.extend(f"marginal {k}: {p}" for p in mu.problems(weight_tol, distinct_tol))
    if instance.F.dim != n:
        report.append(f"F: dimension mismatch ({instance.F.dim} != {n})")
    return report


@dataclass(frozen=True)
class Plan:
    """Sparse coupling: ``indices[e]`` is a support-index tuple with mass ``masses[e]``."""

    instance: Instance
    indices: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        idx = _frozen(np.asarray(self.indices).reshape(-1, self.instance.m), dtype=np.int64)
        masses = _frozen(self.masses).reshape(-1)
        if idx.shape[0] != masses.size:
            raise ValueError("number of index tuples and masses differ")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_dense(cls, instance: Instance, tensor, threshold: float = 0.0) -> "Plan":
        tensor = np.asarray(tensor, dtype=float)
        if tensor.shape != instance.shape:
            raise ValueError("tensor shape does not match instance supports")
        flat = tensor.ravel()
        nz = np.flatnonzero(flat > threshold)
        idx = np.stack(np.unravel_index(nz, tensor.shape), axis=1)
        return cls(instance, idx, flat[nz])

    @classmethod
    def product(cls, instance: Instance) -> "Plan":
        tensor = instance.marginals[0].weights
        for mu in instance.marginals[1:]:
            tensor = np.multiply.outer(tensor, mu.weights)
        return cls.from_dense(instance, tensor)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.instance.shape)
        np.add.at(out, tuple(self.indices.T), self.masses)
        return out

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def tuple_points(self) -> list[np.ndarray]:
        """Per-marginal arrays of the support points each entry couples."""
        return [mu.points[self.indices[:, k]] for k, mu in enumerate(self.instance.marginals)]


def plan_marginal(plan: Plan, k: int) -> DiscreteMeasure:
    """The k-th one-marginal projection of ``plan`` (k is 0-based)."""
    inst = plan.instance
    if not 0 <= k < inst.m:
        raise IndexError(f"marginal index {k} out of range for m={inst.m}")
    mu = inst.marginals[k]
    col = plan.indices[:, k]
    if col.size and (col.min() < 0 or col.max() >= mu.size):
        raise IndexError(f"plan references nonexistent support point of marginal {k}")
    weights = np.bincount(col, weights=plan.masses, minlength=mu.size)
    return DiscreteMeasure(mu.points, weights, mu.box)


def validate_plan(plan: Plan, mass_tol: float = PLAN_MASS_TOL,
                  marginal_tol: float = PLAN_MARGINAL_TOL) -> list[str]:
    report = []
    if np.any(plan.masses <= 0):
        report.append("non-positive masses")
    if abs(plan.total_mass - 1.0) > mass_tol:
        report.append("masses do not sum to 1")
    for k, mu in enumerate(plan.instance.marginals):
        try:
            proj = plan_marginal(plan, k)
        except IndexError as exc:
            report.append(str(exc))
            continue
        err = np.abs(proj.weights - mu.weights).max()
        if err > marginal_tol:
            report.append(f"marginal {k} mismatch (max error {err:.3g})")
    return report


@dataclass(frozen=True)
class QuadraticPotential:
    """u(x) = 1/2 x^T Q x + l.x + q0 with symmetric Q."""

    Q: np.ndarray
    l: np.ndarray | None = None
    q0: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if np.abs(Q - Q.T).max(initial=0.0) > SYMMETRY_TOL * max(1.0, np.abs(Q).max()):
            raise ValueError("Q is not symmetric")
        l = np.zeros(Q.shape[0]) if self.l is None else self.l
        object.__setattr__(self, "Q", _frozen(0.5 * (Q + Q.T)))
        object.__setattr__(self, "l", _frozen(l).reshape(-1))
        object.__setattr__(self, "q0", float(self.q0))

    @classmethod
    def constant(cls, n: int, value: float) -> "QuadraticPotential":
        return cls(np.zeros((n, n)), np.zeros(n), value)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return 0.5 * np.einsum("ij,jk,ik->i", x, self.Q, x) + x @ self.l + self.q0


@dataclass(frozen=True)
class TabulatedPotential:
    """Potential known only through its values on the support of its marginal."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values).reshape(-1))


Potential = Union[QuadraticPotential, TabulatedPotential]


@dataclass(frozen=True)
class PotentialSet:
    """m dual functions (u_1, ..., u_m) for the surplus problem."""

    potentials: tuple[Potential, ...]

    def __post_init__(self):
        object.__setattr__(self, "potentials", tuple(self.potentials))

    def __len__(self):
        return len(self.potentials)

    def __getitem__(self, k):
        return self.potentials[k]

    @property
    def is_closed_form(self) -> bool:
        return all(isinstance(u, QuadraticPotential) for u in self.potentials)

    def on_support(self, instance: Instance, k: int) -> np.ndarray:
        """Values of u_k at every support point of marginal k."""
        u = self.potentials[k]
        mu = instance.marginals[k]
        if isinstance(u, TabulatedPotential):
            if u.values.size != mu.size:
                raise ValueError(f"potential {k} is tabulated on {u.values.size} points, "
                                 f"marginal has {mu.size}")
            return np.asarray(u.values)
        return u(mu.points)

    def evaluate(self, k: int, points, instance: Instance | None = None) -> np.ndarray:
        """Evaluate u_k at arbitrary points.

        Tabulated potentials are only evaluable at support points of
        ``instance``; anything else raises ``ValueError``.
        """
        u = self.potentials[k]
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if isinstance(u, QuadraticPotential):
            return u(points)
        if instance is None:
            raise ValueError("tabulated potential needs the instance to locate points")
        support = instance.marginals[k].points
        dist, idx = cKDTree(support).query(points)
        if np.any(dist > DISTINCT_TOL):
            raise ValueError(f"potential {k} not evaluable off the support of marginal {k}")
        return np.asarray(u.values)[idx]


@dataclass(frozen=True)
class Certificate:
    """Outcome of checking a (plan, potentials) pair against duality."""

    max_feasibility_violation: float
    support_equality_residual: float
    duality_gap: float
    n_points_checked: int
    tol: float = field(default=1e-8, compare=False)

    @property
    def verdict(self) -> str:
        ok = (self.max_feasibility_violation <= self.tol
              and self.support_equality_residual <= self.tol)
        return "optimal" if ok else "not certified"

    @property
    def is_optimal(self) -> bool:
        return self.verdict == "optimal"

    def as_dict(self) -> dict:
        return {
            "violation": float(self.max_feasibility_violation),
            "residual": float(self.support_equality_residual),
            "gap": float(self.duality_gap),
            "n_checked": int(self.n_points_checked),
            "verdict": self.verdict,
        }


def make_instance(marginals: Sequence[DiscreteMeasure], F=None) -> Instance:
    """Convenience constructor; ``F`` may be a matrix, an AffineMap, or None (identity)."""
    n = marginals[0].dim
    if F is None:
        F = AffineMap.identity(n)
    elif not isinstance(F, AffineMap):
        F = AffineMap(F)
    return Instance(tuple(marginals), F)
