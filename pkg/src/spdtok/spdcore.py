"""Symmetric eigendecomposition and differentiable spectral matrix functions.

The forward map is f(C) = V diag(f(lambda_i)) V^T where C = V diag(lambda) V^T
and the eigenvalues are floored at a clip value before f is applied. The exact
reverse-mode gradient is the Hadamard sandwich

    dL/dC = V (K ∘ (V^T G V)) V^T

where G is the upstream gradient and K is the matrix of divided differences
(f(lambda_i) - f(lambda_j)) / (lambda_i - lambda_j) with f'(lambda_i) on the
diagonal. For f = sqrt the divided difference collapses to the cancellation-free
form 1/(sqrt(lambda_i) + sqrt(lambda_j)), which also covers the diagonal; for
f = log a two-term Taylor branch replaces the quotient when a pair of
eigenvalues nearly coincides.

The eigensolver is a cyclic Jacobi iteration. Pairs are visited in a fixed
round-robin schedule (every pair exactly once per sweep); the pairs inside one
round are disjoint, so their rotations commute and can be applied with
vectorised row/column updates, which also makes a whole stack of matrices
decomposable in one call. All routines are pure and deterministic: the same
input bytes produce the same output bytes on one platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import DimMismatch, DomainError, NoConvergence, NonFinite

CLIP_FLOOR = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 64
DEGENERACY_REL_TOL = 1e-8


def sym(M: np.ndarray) -> np.ndarray:
    """Exact symmetrisation (M + M^T)/2 along the trailing two axes."""
    M = np.asarray(M, dtype=np.float64)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


class EigenPair(NamedTuple):
    """Orthonormal eigenvectors (columns) and eigenvalues sorted descending."""

    vectors: np.ndarray
    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class SpectralFn:
    """Scalar function applied to eigenvalues, with its derivative.

    Both maps must be defined on (0, inf). `name` selects the numerically
    stable divided-difference branch in dk_matrix; unknown names fall back to
    the generic quotient with a midpoint-derivative guard.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]

    def __repr__(self):
        return f"SpectralFn({self.name})"


SQRT = SpectralFn("sqrt", np.sqrt, lambda x: 0.5 / np.sqrt(x))
LOG = SpectralFn("log", np.log, lambda x: 1.0 / x)
IDENTITY = SpectralFn("identity", lambda x: x, lambda x: np.ones_like(x))
EXP = SpectralFn("exp", np.exp, np.exp)  # defined on all of R; used to invert LOG


@lru_cache(maxsize=None)
def _round_robin_rounds(d: int) -> tuple:
    """Fixed round-robin schedule: each round is a set of disjoint (p, q) pairs,
    and a full cycle of rounds covers every p < q exactly once."""
    slots = list(range(d)) if d % 2 == 0 else list(range(d)) + [-1]
    n = len(slots)
    rounds = []
    arr = slots[:]
    for _ in range(n - 1):
        ps, qs = [], []
        for i in range(n // 2):
            a, b = arr[i], arr[n - 1 - i]
            if a >= 0 and b >= 0:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.asarray(ps, dtype=np.intp), np.asarray(qs, dtype=np.intp)))
        arr = [arr[0]] + [arr[-1]] + arr[1:-1]
    return tuple(rounds)


def _jacobi_stack(A: np.ndarray, tol: float, max_sweeps: int):
    """Diagonalise a stack of symmetric matrices in place; returns (V, values)."""
    B, d, _ = A.shape
    V = np.broadcast_to(np.eye(d), (B, d, d)).copy()
    norm_c = np.sqrt(np.sum(A * A, axis=(1, 2)))
    if d == 1:
        return V, A[:, :, 0].copy()
    rounds = _round_robin_rounds(d)
    offmask = ~np.eye(d, dtype=bool)
    converged = False
    for sweep in range(max_sweeps + 1):
        off = np.sqrt(np.sum((A * A)[:, offmask], axis=1))
        if np.all(off <= tol * norm_c):
            converged = True
            break
        if sweep == max_sweeps:
            break
        for p, q in rounds:
            apq = A[:, p, q]
            app = A[:, p, p].copy()
            aqq = A[:, q, q].copy()
            rotate = np.abs(apq) > 0.0
            safe = np.where(rotate, apq, 1.0)
            with np.errstate(over="ignore", invalid="ignore"):
                tau = (aqq - app) / (2.0 * safe)
                # smaller root of t^2 + 2*tau*t - 1 = 0; hypot avoids tau^2 overflow
                t = np.where(np.signbit(tau), -1.0, 1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(rotate, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rows_p = A[:, p, :]
            rows_q = A[:, q, :]
            A[:, p, :] = c[:, :, None] * rows_p - s[:, :, None] * rows_q
            A[:, q, :] = s[:, :, None] * rows_p + c[:, :, None] * rows_q
            cols_p = A[:, :, p].copy()
            cols_q = A[:, :, q].copy()
            A[:, :, p] = cols_p * c[:, None, :] - cols_q * s[:, None, :]
            A[:, :, q] = cols_p * s[:, None, :] + cols_q * c[:, None, :]
            # exact values for the rotated 2x2 block
            A[:, p, p] = app - t * apq
            A[:, q, q] = aqq + t * apq
            A[:, p, q] = 0.0
            A[:, q, p] = 0.0
            vp = V[:, :, p].copy()
            vq = V[:, :, q].copy()
            V[:, :, p] = vp * c[:, None, :] - vq * s[:, None, :]
            V[:, :, q] = vp * s[:, None, :] + vq * c[:, None, :]
    if not converged:
        worst = float(np.max(off / np.maximum(norm_c, np.finfo(np.float64).tiny)))
        raise NoConvergence(
            f"Jacobi sweep limit {max_sweeps} reached (worst relative off-norm {worst:.3e})",
            residual=worst,
        )
    vals = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(-vals, axis=1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    # sign convention: largest-magnitude component of each eigenvector positive
    idx = np.argmax(np.abs(V), axis=1)
    picked = np.take_along_axis(V, idx[:, None, :], axis=1)[:, 0, :]
    V = V * np.where(picked < 0.0, -1.0, 1.0)[:, None, :]
    return V, vals


def eig_sym(C: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenPair:
    """Eigendecomposition of one symmetric matrix.

    Returns eigenvalues in descending order and eigenvectors as columns, with
    each eigenvector's largest-magnitude component made positive so the output
    is unique. Raises NonFinite on NaN/Inf input and NoConvergence if the
    off-diagonal norm has not fallen below tol * ||C||_F after max_sweeps.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise NonFinite("matrix contains NaN or Inf")
    A = sym(C)[None, :, :].copy()
    V, vals = _jacobi_stack(A, tol, max_sweeps)
    return EigenPair(vectors=V[0], values=vals[0])


def eig_sym_batch(Cs: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a (batch, d, d) stack; returns (vectors, values).

    Sweeps continue until every matrix in the stack converges, so trailing
    bits may differ from one-at-a-time calls; each stacked call is itself
    deterministic.
    """
    Cs = np.asarray(Cs, dtype=np.float64)
    if Cs.ndim != 3 or Cs.shape[1] != Cs.shape[2]:
        raise DimMismatch(f"expected a (batch, d, d) stack, got shape {Cs.shape}")
    if not np.all(np.isfinite(Cs)):
        raise NonFinite("stack contains NaN or Inf")
    A = sym(Cs).copy()
    return _jacobi_stack(A, tol, max_sweeps)


def apply_from_eig(eig: EigenPair, fn: SpectralFn, clip: float = CLIP_FLOOR) -> np.ndarray:
    """f(C) reconstructed from a precomputed eigendecomposition."""
    lam = np.maximum(eig.values, clip)
    out = (eig.vectors * fn.f(lam)[None, :]) @ eig.vectors.T
    return sym(out)


def spectral_apply(C: np.ndarray, fn: SpectralFn, clip: float = CLIP_FLOOR) -> np.ndarray:
    """V diag(f(max(lambda, clip))) V^T, symmetrised."""
    return apply_from_eig(eig_sym(C), fn, clip)


def spectral_apply_batch(Cs: np.ndarray, fn: SpectralFn, clip: float = CLIP_FLOOR) -> np.ndarray:
    """Batched spectral_apply over a (batch, d, d) stack."""
    V, vals = eig_sym_batch(Cs)
    lam = np.maximum(vals, clip)
    out = (V * fn.f(lam)[:, None, :]) @ np.swapaxes(V, 1, 2)
    return sym(out)


@dataclass(frozen=True)
class DkMatrix:
    """Divided-difference matrix governing the spectral backward pass.

    `entries[i, j]` is (f(l_i) - f(l_j)) / (l_i - l_j) for i != j and f'(l_i)
    on the diagonal, so the backward pass is a single Hadamard sandwich.
    `taylor_hits` counts the off-diagonal pairs (i < j) that fell into the
    near-degeneracy branch; `pairs` is d(d-1)/2.
    """

    entries: np.ndarray
    taylor_hits: int
    pairs: int

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def branch_fraction(self) -> float:
        return self.taylor_hits / self.pairs if self.pairs else 0.0

    @property
    def entry_range_ratio(self) -> float:
        """max |entry| / min |entry|, scanned over all d^2 entries."""
        mags = np.abs(self.entries)
        return float(np.max(mags) / np.min(mags))


def dk_matrix(values: np.ndarray, fn: SpectralFn,
              degeneracy_rel_tol: float = DEGENERACY_REL_TOL) -> DkMatrix:
    """Daleckii-Krein matrix for the given eigenvalues.

    sqrt uses the cancellation-free form 1/(sqrt(l_i) + sqrt(l_j)) for every
    entry. log uses the direct quotient except when |l_i - l_j| <
    degeneracy_rel_tol * max(l_i, l_j), where the two-term Taylor expansion
    1/l_i - (l_j - l_i)/(2 l_i^2) (anchored at the smaller index) takes over.
    identity is the all-ones matrix. The result is exactly symmetric.
    """
    lam = np.asarray(values, dtype=np.float64).ravel()
    if lam.size == 0:
        raise DomainError("empty eigenvalue list")
    if not np.all(np.isfinite(lam)):
        raise NonFinite("eigenvalues contain NaN or Inf")
    if np.any(lam <= 0.0):
        raise DomainError(f"eigenvalues must be positive, got min {lam.min():.3e}")
    d = lam.size
    pairs = d * (d - 1) // 2
    li = lam[:, None]
    lj = lam[None, :]
    if fn.name == "identity":
        return DkMatrix(np.ones((d, d)), 0, pairs)
    if fn.name == "sqrt":
        K = 1.0 / (np.sqrt(li) + np.sqrt(lj))
        return DkMatrix(_mirror_upper(K), 0, pairs)
    near = np.abs(li - lj) < degeneracy_rel_tol * np.maximum(li, lj)
    if fn.name == "log":
        taylor = 1.0 / li - (lj - li) / (2.0 * li * li)
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = (np.log(li) - np.log(lj)) / (li - lj)
        K = np.where(near, taylor, quotient)
        np.fill_diagonal(K, 1.0 / lam)
    else:
        fi = fn.f(li)
        fj = fn.f(lj)
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = (fi - fj) / (li - lj)
        K = np.where(near, fn.df(0.5 * (li + lj)), quotient)
        np.fill_diagonal(K, fn.df(lam))
    hits = int(np.count_nonzero(np.triu(near, k=1)))
    return DkMatrix(_mirror_upper(K), hits, pairs)


def _mirror_upper(K: np.ndarray) -> np.ndarray:
    """Copy the strict upper triangle onto the lower one for exact symmetry."""
    U = np.triu(K, k=1)
    return U + U.T + np.diag(np.diag(K))


def spectral_backward(eig: EigenPair, fn: SpectralFn, upstream: np.ndarray,
                      clip: float = CLIP_FLOOR,
                      degeneracy_rel_tol: float = DEGENERACY_REL_TOL) -> np.ndarray:
    """Gradient of L w.r.t. C given the upstream gradient G = dL/df(C).

    Computes V (K ∘ (V^T G V)) V^T with the clip floor applied to the
    eigenvalues before building K, keeping forward and backward consistent at
    the clip boundary. The result is symmetrised.
    """
    G = np.asarray(upstream, dtype=np.float64)
    d = eig.dim
    if G.shape != (d, d):
        raise DimMismatch(f"upstream shape {G.shape} does not match dim {d}")
    G = sym(G)
    lam = np.maximum(eig.values, clip)
    K = dk_matrix(lam, fn, degeneracy_rel_tol).entries
    V = eig.vectors
    inner = K * (V.T @ G @ V)
    return sym(V @ inner @ V.T)


def condition_ratio(values: np.ndarray) -> float:
    """kappa = lambda_max / lambda_min of a positive spectrum."""
    lam = np.asarray(values, dtype=np.float64).ravel()
    if lam.size == 0:
        raise DomainError("empty eigenvalue list")
    if not np.all(np.isfinite(lam)):
        raise NonFinite("eigenvalues contain NaN or Inf")
    if np.any(lam <= 0.0):
        raise DomainError(f"eigenvalues must be positive, got min {lam.min():.3e}")
    return float(np.max(lam) / np.min(lam))


def gradient_norm_bound(fn: SpectralFn, lam_min: float) -> float:
    """Frobenius bound on dL/dC for a unit-Frobenius upstream gradient.

    1/(2 sqrt(lam_min)) for sqrt and 1/lam_min for log; for anything else the
    bound is max |f'| over the clipped spectrum's lower edge.
    """
    if fn.name == "sqrt":
        return 0.5 / math.sqrt(lam_min)
    if fn.name == "log":
        return 1.0 / lam_min
    if fn.name == "identity":
        return 1.0
    return float(np.abs(fn.df(np.asarray([lam_min]))).max())
