"""Distances, barycenters and distortion diagnostics on the SPD cone.

Three metrics are provided. The transport distance

    d_bw(A, B)^2 = tr A + tr B - 2 tr((A^{1/2} B A^{1/2})^{1/2})

is computed through the spectral machinery; the bracketed quantity can go
marginally negative by roundoff and is clamped at zero (a warning is logged
when the excursion exceeds 1e-9 relative to tr A + tr B). The tangent-space
distance is ||log A - log B||_F and the flat distance is ||A - B||_F.

The barycenter solves the fixed-point equation

    mu = (1/n) sum_i (mu^{1/2} C_i mu^{1/2})^{1/2}

by direct iteration from the Euclidean mean, which converges linearly for the
clustered batches this package produces and is residual-checked on exit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import spdcore
from .embedding import embed
from .errors import DimMismatch, InvalidSpec, NoConvergence
from .spdcore import SQRT, eig_sym, spectral_apply, spectral_apply_batch, sym

log = logging.getLogger(__name__)

NEGATIVE_BRACKET_REL_TOL = 1e-9


class DistanceKind(str, Enum):
    BURES_WASSERSTEIN = "bw"
    LOG_EUCLIDEAN = "logeuclidean"
    FROBENIUS = "frobenius"


def _check_pair(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimMismatch(f"incompatible shapes {A.shape} and {B.shape}")
    return A, B


def bw_distance(A: np.ndarray, B: np.ndarray) -> float:
    A, B = _check_pair(A, B)
    sq = spectral_apply(A, SQRT)
    cross = eig_sym(sq @ B @ sq).values
    bracket = float(np.trace(A) + np.trace(B) - 2.0 * np.sum(np.sqrt(np.maximum(cross, 0.0))))
    scale = float(np.trace(A) + np.trace(B))
    if bracket < 0.0:
        if -bracket > NEGATIVE_BRACKET_REL_TOL * scale:
            log.warning("bw_distance bracket %.3e below zero (scale %.3e); clamping", bracket, scale)
        bracket = 0.0
    return float(np.sqrt(bracket))


def bw_distances_to(Cs: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """d_bw(C_i, ref) for a stack of matrices against one reference."""
    Cs = np.asarray(Cs, dtype=np.float64)
    sq = spectral_apply(ref, SQRT)
    inner = sq[None, :, :] @ Cs @ sq[None, :, :]
    _, vals = spdcore.eig_sym_batch(sym(inner))
    cross = np.sum(np.sqrt(np.maximum(vals, 0.0)), axis=1)
    bracket = np.trace(Cs, axis1=1, axis2=2) + np.trace(ref) - 2.0 * cross
    return np.sqrt(np.maximum(bracket, 0.0))


def bw_distance_pairs(As: np.ndarray, Bs: np.ndarray) -> np.ndarray:
    """Elementwise d_bw(A_i, B_i) for two aligned (n, d, d) stacks."""
    As = np.asarray(As, dtype=np.float64)
    Bs = np.asarray(Bs, dtype=np.float64)
    if As.shape != Bs.shape or As.ndim != 3:
        raise DimMismatch(f"incompatible stacks {As.shape} and {Bs.shape}")
    sq = spectral_apply_batch(As, SQRT)
    inner = sq @ Bs @ sq
    _, vals = spdcore.eig_sym_batch(sym(inner))
    cross = np.sum(np.sqrt(np.maximum(vals, 0.0)), axis=1)
    bracket = (np.trace(As, axis1=1, axis2=2) + np.trace(Bs, axis1=1, axis2=2) - 2.0 * cross)
    return np.sqrt(np.maximum(bracket, 0.0))


def logeuclidean_distance(A: np.ndarray, B: np.ndarray) -> float:
    A, B = _check_pair(A, B)
    return float(np.linalg.norm(spectral_apply(A, spdcore.LOG) - spectral_apply(B, spdcore.LOG)))


def frobenius_distance(A: np.ndarray, B: np.ndarray) -> float:
    A, B = _check_pair(A, B)
    return float(np.linalg.norm(A - B))


def distance(A: np.ndarray, B: np.ndarray, kind: DistanceKind) -> float:
    kind = DistanceKind(kind)
    if kind is DistanceKind.BURES_WASSERSTEIN:
        return bw_distance(A, B)
    if kind is DistanceKind.LOG_EUCLIDEAN:
        return logeuclidean_distance(A, B)
    return frobenius_distance(A, B)


def bw_barycenter(Cs, max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    """Fixed point of mu -> (1/n) sum_i (sqrt(mu) C_i sqrt(mu))^{1/2}.

    Initialised at the Euclidean mean. Returns the first iterate whose
    fixed-point residual is at most tol * ||mu||_F; raises NoConvergence with
    the last iterate and residual attached otherwise.
    """
    stack = np.asarray(Cs, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] < 1 or stack.shape[1] != stack.shape[2]:
        raise DimMismatch(f"expected a nonempty (n, d, d) stack, got {stack.shape}")
    mu = sym(np.mean(stack, axis=0))
    residual = np.inf
    for _ in range(max_iter):
        sq = spectral_apply(mu, SQRT)
        inner = sq[None, :, :] @ stack @ sq[None, :, :]
        mapped = sym(np.mean(spectral_apply_batch(sym(inner), SQRT), axis=0))
        residual = float(np.linalg.norm(mu - mapped))
        if residual <= tol * np.linalg.norm(mu):
            return mu
        mu = mapped
    raise NoConvergence(
        f"barycenter fixed point not converged after {max_iter} iterations "
        f"(residual {residual:.3e})",
        last=mu,
        residual=residual,
    )


@dataclass(frozen=True)
class DispersionReport:
    """Cluster tightness relative to the barycenter.

    epsilon is max_i d_bw(C_i, mu) / ||sqrt(mu)||_F; sqrt_mean_gap is
    ||sqrt(mu) - mean_i sqrt(C_i)||_F, the quantity whose second-order decay
    in epsilon justifies flat batch normalisation of sqrt-space tokens.
    """

    barycenter: np.ndarray
    epsilon: float
    sqrt_mean_gap: float


def dispersion_report(Cs, max_iter: int = 200, tol: float = 1e-10) -> DispersionReport:
    stack = np.asarray(Cs, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] < 2:
        raise InvalidSpec(f"need at least two matrices, got shape {stack.shape}")
    mu = bw_barycenter(stack, max_iter=max_iter, tol=tol)
    sq_mu = spectral_apply(mu, SQRT)
    dists = bw_distances_to(stack, mu)
    epsilon = float(np.max(dists) / np.linalg.norm(sq_mu))
    mean_sqrt = np.mean(spectral_apply_batch(stack, SQRT), axis=0)
    gap = float(np.linalg.norm(sq_mu - mean_sqrt))
    return DispersionReport(barycenter=mu, epsilon=epsilon, sqrt_mean_gap=gap)


@dataclass(frozen=True)
class DistortionCheck:
    """Outcome of the token-space vs manifold distance comparison for one pair."""

    token_distance: float
    bw: float
    sqrt_diff_fro: float
    lower_ok: bool          # token >= d_bw / sqrt(2 (kappa+1))
    upper_ok: bool          # token <= ||sqrt A - sqrt B||_F
    sandwich_lower_ok: bool    # token >= ||sqrt A - sqrt B||_F / sqrt(2)
    procrustes_ok: bool     # d_bw <= ||sqrt A - sqrt B||_F
    powers_stormer_ok: bool  # ||sqrt A - sqrt B||_F^2 <= ||A - B||_tr
    lipschitz_ok: bool      # ||sqrt A - sqrt B||_F <= ||A - B||_F / (2 sqrt(lambda_min))
    ratio: float            # token_distance / d_bw (1.0 for coincident pairs)

    @property
    def all_ok(self) -> bool:
        return (self.lower_ok and self.upper_ok and self.sandwich_lower_ok
                and self.procrustes_ok and self.powers_stormer_ok and self.lipschitz_ok)


def distortion_check(A: np.ndarray, B: np.ndarray, kappa_bound: float,
                     slack: float = 1e-9) -> DistortionCheck:
    """Check every distance-preservation bound for one pair of SPD matrices.

    kappa_bound is the caller's promise on lambda_max/lambda_min over both
    spectra and enters only the sqrt(2 (kappa+1)) lower-bound constant; the
    derivative-based bound uses the actual smallest eigenvalue.
    """
    A, B = _check_pair(A, B)
    eig_a = eig_sym(A)
    eig_b = eig_sym(B)
    tok = float(np.linalg.norm(embed(A, "bwspd") - embed(B, "bwspd")))
    dbw = bw_distance(A, B)
    sq_diff = float(np.linalg.norm(
        spdcore.apply_from_eig(eig_a, SQRT) - spdcore.apply_from_eig(eig_b, SQRT)))
    diff_vals = eig_sym(A - B).values
    trace_norm = float(np.sum(np.abs(diff_vals)))
    fro_diff = float(np.linalg.norm(A - B))
    lam_min = float(min(np.min(eig_a.values), np.min(eig_b.values)))
    lam_min = max(lam_min, spdcore.CLIP_FLOOR)
    return DistortionCheck(
        token_distance=tok,
        bw=dbw,
        sqrt_diff_fro=sq_diff,
        lower_ok=tok >= dbw / np.sqrt(2.0 * (kappa_bound + 1.0)) - slack,
        upper_ok=tok <= sq_diff + slack,
        sandwich_lower_ok=tok >= sq_diff / np.sqrt(2.0) - slack,
        procrustes_ok=dbw <= sq_diff + slack,
        powers_stormer_ok=sq_diff ** 2 <= trace_norm + slack,
        lipschitz_ok=sq_diff <= fro_diff / (2.0 * np.sqrt(lam_min)) + slack,
        ratio=tok / dbw if dbw > slack else 1.0,
    )
