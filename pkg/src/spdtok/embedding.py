"""Geometric token embeddings for SPD matrices.

A d x d symmetric matrix is packed into a token of length d(d+1)/2 by reading
the upper triangle (diagonal included) in row-major order:

    index(i, j) = i*d - i*(i-1)/2 + (j - i)   for 0-based i <= j.

The three embeddings differ only in the matrix function applied before
packing: sqrt(C) for the transport-geometry embedding, log(C) for the
tangent-space embedding, and C itself for the flat baseline.

Gradient convention: a gradient G with respect to a symmetric matrix C means
dL = sum_ij G[i,j] E[i,j] for any symmetric perturbation E. The forward
packing reads each off-diagonal element once, so its adjoint distributes each
off-diagonal token gradient g across the two mirrored slots as g/2 + g/2 (no
duplicate scaling). This is the unique choice that passes finite differences;
diagonal slots are unaffected.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import spdcore
from .errors import DimMismatch, NotSymmetric
from .spdcore import CLIP_FLOOR, EXP, LOG, SQRT, eig_sym, sym


class EmbeddingKind(str, Enum):
    BWSPD = "bwspd"
    LOG_EUCLIDEAN = "logeuclidean"
    EUCLIDEAN = "euclidean"

    @property
    def display(self) -> str:
        return {"bwspd": "BWSPD", "logeuclidean": "LogEuclidean", "euclidean": "Euclidean"}[self.value]


def token_length(d: int) -> int:
    return d * (d + 1) // 2


def vech(M: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Row-major upper-triangle packing of a symmetric matrix."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {M.shape}")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > rtol * max(np.linalg.norm(M), np.finfo(np.float64).tiny):
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance")
    i, j = np.triu_indices(M.shape[0])
    return M[i, j].copy()


def unvech(v: np.ndarray) -> np.ndarray:
    """Inverse of vech: rebuild the full symmetric matrix."""
    v = np.asarray(v, dtype=np.float64).ravel()
    d = int(round((np.sqrt(8.0 * v.size + 1.0) - 1.0) / 2.0))
    if token_length(d) != v.size:
        raise DimMismatch(f"length {v.size} is not a triangular number")
    M = np.zeros((d, d))
    i, j = np.triu_indices(d)
    M[i, j] = v
    M[j, i] = v
    return M


def embed(C: np.ndarray, kind: EmbeddingKind, clip: float = CLIP_FLOOR) -> np.ndarray:
    """Token vector of length d(d+1)/2 for one SPD matrix."""
    kind = EmbeddingKind(kind)
    C = sym(C)
    if kind is EmbeddingKind.EUCLIDEAN:
        return vech(C)
    fn = SQRT if kind is EmbeddingKind.BWSPD else LOG
    return vech(spdcore.spectral_apply(C, fn, clip))


def embed_batch(Cs: np.ndarray, kind: EmbeddingKind, clip: float = CLIP_FLOOR) -> np.ndarray:
    """Tokens for a (batch, d, d) stack; returns (batch, d(d+1)/2)."""
    kind = EmbeddingKind(kind)
    Cs = sym(np.asarray(Cs, dtype=np.float64))
    if kind is not EmbeddingKind.EUCLIDEAN:
        fn = SQRT if kind is EmbeddingKind.BWSPD else LOG
        Cs = spdcore.spectral_apply_batch(Cs, fn, clip)
    i, j = np.triu_indices(Cs.shape[-1])
    return Cs[:, i, j].copy()


def reconstruct_spd(token: np.ndarray, kind: EmbeddingKind, clip: float = CLIP_FLOOR) -> np.ndarray:
    """Rebuild the SPD matrix a token came from (partial inverse of embed).

    sqrt tokens are unpacked and squared; log tokens are unpacked and
    exponentiated; flat tokens are unpacked directly (clipped to the SPD cone
    in every case).
    """
    kind = EmbeddingKind(kind)
    M = unvech(token)
    if kind is EmbeddingKind.BWSPD:
        return sym(M @ M)
    if kind is EmbeddingKind.LOG_EUCLIDEAN:
        return spdcore.spectral_apply(M, EXP, clip=-np.inf)
    return spdcore.spectral_apply(M, spdcore.IDENTITY, clip)


def vech_adjoint(g: np.ndarray) -> np.ndarray:
    """Adjoint of vech under the symmetric-matrix gradient convention.

    Diagonal token slots map to the diagonal unchanged; each off-diagonal slot
    contributes g/2 to both mirrored entries, so sum_ij out[i,j] E[i,j] equals
    g . vech(E) for every symmetric E.
    """
    G = unvech(g)
    half = 0.5 * (G + np.diag(np.diag(G)))
    return half


def embed_backward(C: np.ndarray, kind: EmbeddingKind, upstream: np.ndarray,
                   clip: float = CLIP_FLOOR) -> np.ndarray:
    """Gradient w.r.t. C of a scalar loss, given the token gradient.

    The vech adjoint turns the token gradient into a symmetric matrix, and the
    spectral backward pass maps it through sqrt/log. The flat embedding
    returns the adjoint directly.
    """
    kind = EmbeddingKind(kind)
    C = sym(C)
    d = C.shape[0]
    upstream = np.asarray(upstream, dtype=np.float64).ravel()
    if upstream.size != token_length(d):
        raise DimMismatch(f"token gradient length {upstream.size} != {token_length(d)}")
    G = vech_adjoint(upstream)
    if kind is EmbeddingKind.EUCLIDEAN:
        return G
    fn = SQRT if kind is EmbeddingKind.BWSPD else LOG
    return spdcore.spectral_backward(eig_sym(C), fn, G, clip)
