"""Products of positive definite 2x2 matrices.

R2 and R3 denote the 2x2 real matrices that factor as a product of two,
respectively three, symmetric positive definite matrices. For |M| > 0:

* M is in R2 iff M is diagonalizable with both eigenvalues positive;
* M is in R3 iff tr(M) > 0 or (M[1,0] - M[0,1])^2 > 4|M|.

This module decides membership, produces explicit factorizations, and builds
the singular companion used by the four-marginal counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HypothesisError
from .quadratic import is_positive_definite

SCALAR_TOL = 1e-10
DISC_TOL = 1e-12


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PDFactorization:
    factors: tuple[np.ndarray, ...]
    product_residual: float

    def product(self) -> np.ndarray:
        out = np.eye(2)
        for P in self.factors:
            out = out @ P
        return out


def _mat(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    return M


def _det(M) -> float:
    return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])


def _require_positive_det(M):
    if _det(M) <= 0:
        raise HypothesisError(f"hypothesis violated: |M| = {_det(M):.6g} <= 0")


def _finish(M, factors) -> PDFactorization:
    factors = tuple(0.5 * (P + P.T) for P in factors)
    prod = np.eye(2)
    for P in factors:
        prod = prod @ P
    residual = float(np.abs(prod - M).max())
    return PDFactorization(factors, residual)


def in_R2(M) -> bool:
    """Membership in R2 (requires |M| > 0)."""
    M = _mat(M)
    _require_positive_det(M)
    tr, det = np.trace(M), _det(M)
    disc = tr * tr - 4 * det
    if disc > DISC_TOL * tr * tr:
        # real distinct eigenvalues of equal sign since det > 0
        return bool(tr > 0)
    if disc < -DISC_TOL * tr * tr:
        return False
    lam = 0.5 * tr
    scalar = np.abs(M - lam * np.eye(2)).max() <= SCALAR_TOL * np.abs(M).max()
    return bool(lam > 0 and scalar)


def in_R3(M) -> bool:
    """Membership in R3 (requires |M| > 0)."""
    M = _mat(M)
    _require_positive_det(M)
    return bool(np.trace(M) > 0 or (M[1, 0] - M[0, 1]) ** 2 > 4 * _det(M))


def factor_pd2(M) -> PDFactorization:
    """M = P1 P2 with P1 = S D S^T and P2 = (S S^T)^{-1}, from M = S D S^{-1}."""
    M = _mat(M)
    if not in_R2(M):
        raise HypothesisError("matrix is not a product of two positive definite matrices")
    if np.allclose(M, M.T, rtol=0, atol=1e-14 * np.abs(M).max()):
        # symmetric positive definite: orthogonal eigenvectors make S S^T = I
        return _finish(M, (M, np.eye(2)))
    evals, S = np.linalg.eig(M)
    evals, S = evals.real, S.real
    P1 = S @ np.diag(evals) @ S.T
    P2 = np.linalg.inv(S @ S.T)
    # P1 / c and c P2 is the same product; equal norms keep rounding balanced
    c = np.sqrt(np.linalg.norm(P1, 2) / np.linalg.norm(P2, 2))
    return _finish(M, (P1 / c, c * P2))


def _rotated(theta: float, s: float) -> np.ndarray:
    c, sn = np.cos(theta), np.sin(theta)
    R = np.array([[c, -sn], [sn, c]])
    return R @ np.diag([s, 1.0 / s]) @ R.T


def _well_inside_R2(N, margin: float) -> bool:
    tr, det = np.trace(N), _det(N)
    return bool(det > 0 and tr > 0 and tr * tr - 4 * det >= margin * tr * tr)


def factor_pd3(M, seed: int = 0, margin: float = 0.25, max_log2_scale: int = 60) -> PDFactorization:
    """M = P N1 N2 with P positive definite and P^{-1} M in R2.

    Candidates are P^{-1} = R(theta) diag(s, 1/s) R(theta)^T. The angle of the
    leading eigenvector of the symmetric part of M is tried first, then a
    coarse angle grid, each for s = 2, 4, 8, ...; a candidate is admissible
    when P^{-1} M has real eigenvalues separated by ``margin``. From the first
    scale with an admissible angle and the next two scales, the candidate with
    the smallest product of factor norms is returned (near the boundary of R3
    the first admissible one can have huge, cancelling factors). A seeded
    random search is the last resort.
    """
    M = _mat(M)
    if not in_R3(M):
        raise HypothesisError("matrix is not a product of three positive definite matrices")
    if is_positive_definite(M):
        return _finish(M, (M, np.eye(2), np.eye(2)))
    if in_R2(M):
        P1, P2 = factor_pd2(M).factors
        return _finish(M, (P1, P2, np.eye(2)))

    sym_vals, sym_vecs = np.linalg.eigh(0.5 * (M + M.T))
    lead = sym_vecs[:, -1]
    thetas = [float(np.arctan2(lead[1], lead[0]))]
    thetas += list(np.linspace(0.0, np.pi, 36, endpoint=False))

    def attempt(theta, s):
        Q = _rotated(theta, s)
        N = Q @ M
        if not _well_inside_R2(N, margin):
            return None
        P = np.linalg.inv(Q)
        N1, N2 = factor_pd2(N).factors
        fac = _finish(M, (P, N1, N2))
        if all(is_positive_definite(F) for F in fac.factors):
            return fac
        return None

    def spread(fac):
        return float(np.prod([np.linalg.norm(F, 2) for F in fac.factors]))

    best, last_j = None, max_log2_scale
    for j in range(1, max_log2_scale + 1):
        if j > last_j:
            break
        for theta in thetas:
            fac = attempt(theta, 2.0**j)
            if fac is not None and (best is None or spread(fac) < spread(best)):
                best = fac
        if best is not None and last_j == max_log2_scale:
            last_j = min(j + 2, max_log2_scale)
    if best is not None:
        return best
    rng = np.random.default_rng(seed)
    for _ in range(20000):
        fac = attempt(rng.uniform(0, np.pi), 2.0 ** rng.uniform(0, max_log2_scale))
        if fac is not None:
            return fac
    raise FactorizationError(
        f"no positive definite pull-out found for M={M.tolist()} "
        f"(symmetric-part eigenvalues {sym_vals.tolist()})")


def _lambda_matrix(a: float, d: float, lam: float) -> np.ndarray:
    # b = c = 0 and a > d >= 0
    q = a - d
    r = (a + d) / (2 * a)
    return np.array([[a * d / q + lam, d * d / q + r * lam],
                     [-a * a / q - lam, -a * d / q - r * lam]])


def lemma41_singular_companion(F, lam: float | None = None) -> np.ndarray:
    """M in R2 with F + M singular, for F not a nonnegative multiple of I.

    The case split follows the classical determinant argument
    |F+M| = |F| + |M| + trace(adj(F) M):

    1. F[1,0] != 0: M = [[1, f], [0, 2]] with f solving |F+M| = 0.
    2. F[1,0] == 0, F[0,1] != 0: the transposed construction.
    3. F diagonal: M = -min-negative-entry * I when some diagonal entry is
       negative, otherwise a lambda-parametrized matrix with trace and
       determinant proportional to lambda. ``lam`` overrides the default
       lambda for that subcase.
    """
    F = _mat(F)
    a, b, c, d = F[0, 0], F[0, 1], F[1, 0], F[1, 1]
    detF = a * d - b * c
    if b == 0 and c == 0 and a == d and a >= 0:
        if a > 0:
            raise HypothesisError(
                f"F = {a:g} I: no singular companion exists in R2 for this F")
        raise HypothesisError("F = 0: F + M singular forces |M| = 0, so M cannot be in R2")
    e, h = 1.0, 2.0
    if c != 0:
        M = np.array([[e, (detF + e * h + d * e + a * h) / c], [0.0, h]])
    elif b != 0:
        M = np.array([[e, 0.0], [(detF + e * h + d * e + a * h) / b, h]])
    elif min(a, d) < 0:
        t = -min(a, d)
        M = t * np.eye(2)
    else:
        swap = d > a
        hi, lo = (d, a) if swap else (a, d)
        if lam is None:
            lam = 64.0 * max(1.0, hi / (hi - lo))
            # tr^2 > 4|M| needs lam > 8 hi^2 / (hi - lo)
            while True:
                M = _lambda_matrix(hi, lo, lam)
                tr, det = np.trace(M), _det(M)
                if tr * tr > 4 * det + 1e-6 * max(1.0, tr * tr):
                    break
                lam *= 2.0
        M = _lambda_matrix(hi, lo, lam)
        if swap:
            P = np.array([[0.0, 1.0], [1.0, 0.0]])
            M = P @ M @ P
    return M
