"""Covariance estimation, band filtering, synthetic datasets, and splits.

Covariance of a multichannel segment X (channels x samples) is the sample
estimator after channel-wise de-meaning, X~ X~^T / (T - 1), plus a ridge
epsilon*I that keeps the result strictly positive definite.

Band filtering is zero-phase frequency-domain masking: real FFT per channel,
zero every bin outside [lo, hi], inverse FFT. Inside the band the filter is
exactly the identity, there is no phase distortion and no ringing order to
tune.

The synthetic SPD generator samples in sqrt-space: class anchors mu_k are
drawn with a controlled spectrum, rescaled so every anchor pair is at least
`separation` apart in transport distance (the distance is 1-homogeneous in
sqrt-space scale, so a global rescale is enough), and each trial is
(sqrt(mu_k) + delta)^2 with ||delta||_F = dispersion * ||sqrt(mu_k)||_F * u,
u ~ U(0.5, 1). Because the draw order does not depend on the dispersion
value, datasets generated from the same seed are perturbation-paired across
dispersion levels, which the second-order batch-normalisation check exploits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, asdict

import numpy as np

from . import geometry, spdcore
from .embedding import EmbeddingKind, embed_batch
from .errors import BandOutOfRange, DimMismatch, InvalidSpec, TooFewSamples
from .spdcore import IDENTITY, SQRT, spectral_apply_batch, sym

DEFAULT_RIDGE = 1e-6
SPLIT_RATIOS = (0.70, 0.15, 0.15)


# -- covariance and filtering ---------------------------------------------------


def estimate_covariance(X: np.ndarray, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Sample covariance of a (channels, samples) segment with ridge term."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimMismatch(f"expected (channels, samples), got {X.shape}")
    n_ch, n_s = X.shape
    if n_s < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n_s}")
    centered = X - X.mean(axis=1, keepdims=True)
    C = centered @ centered.T / (n_s - 1) + ridge * np.eye(n_ch)
    return sym(C)


@dataclass(frozen=True)
class BandSpec:
    name: str
    lo_hz: float
    hi_hz: float
    sample_rate_hz: float

    def __post_init__(self):
        nyquist = self.sample_rate_hz / 2.0
        if not (0.0 < self.lo_hz < self.hi_hz < nyquist):
            raise BandOutOfRange(
                f"band {self.name}: need 0 < {self.lo_hz} < {self.hi_hz} < {nyquist}")

    def to_dict(self):
        return asdict(self)


def analysis_bands(sample_rate_hz: float):
    """The three analysis bands used for multi-band tokenisation."""
    return [
        BandSpec("mu", 4.0, 8.0, sample_rate_hz),
        BandSpec("beta", 8.0, 13.0, sample_rate_hz),
        BandSpec("gamma", 13.0, 30.0, sample_rate_hz),
    ]


def bandpass(X: np.ndarray, band: BandSpec) -> np.ndarray:
    """Zero-phase FFT mask along the last axis; bins with lo <= f <= hi pass."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / band.sample_rate_hz)
    mask = (freqs >= band.lo_hz) & (freqs <= band.hi_hz)
    spectrum = np.fft.rfft(X, axis=-1)
    spectrum *= mask
    return np.fft.irfft(spectrum, n=n, axis=-1)


def multiband_tokens(X: np.ndarray, bands, kind: EmbeddingKind,
                     ridge: float = DEFAULT_RIDGE,
                     clip: float = spdcore.CLIP_FLOOR) -> np.ndarray:
    """(T, D_token) token sequence, one token per band."""
    if not bands:
        raise InvalidSpec("band list must be nonempty")
    covs = np.stack([estimate_covariance(bandpass(X, b), ridge) for b in bands])
    return embed_batch(covs, kind, clip)


# -- segment batches --------------------------------------------------------------


@dataclass
class SegmentBatch:
    """Raw multichannel trials: data is (trials, channels, samples)."""

    data: np.ndarray
    labels: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 3 or self.data.shape[2] < 2:
            raise InvalidSpec(f"data shape {self.data.shape}")
        if self.labels.shape != (self.data.shape[0],):
            raise InvalidSpec("labels length mismatch")
        if self.labels.min(initial=0) < 0:
            raise InvalidSpec("negative label")

    @property
    def n_trials(self):
        return self.data.shape[0]


# -- synthetic SPD datasets --------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int
    dim: int
    trials_per_class: int
    separation: float
    dispersion: float
    seed: int
    eig_lo: float = 0.5
    eig_hi: float = 2.0
    scale: float = 1.0
    shared_basis: bool = False
    spectra: tuple = ()  # optional per-class eigenvalue tuples
    frobenius_equalize: bool = False

    def __post_init__(self):
        if self.n_classes < 1 or self.dim < 1 or self.trials_per_class < 1:
            raise InvalidSpec("n_classes, dim, trials_per_class must be >= 1")
        if self.separation < 0 or self.dispersion < 0:
            raise InvalidSpec("separation and dispersion must be >= 0")
        if not (0 < self.eig_lo <= self.eig_hi):
            raise InvalidSpec("eigenvalue range must satisfy 0 < lo <= hi")
        if self.spectra and len(self.spectra) != self.n_classes:
            raise InvalidSpec("spectra must list one spectrum per class")

    def to_dict(self):
        d = asdict(self)
        d["spectra"] = [list(s) for s in self.spectra]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["spectra"] = tuple(tuple(s) for s in d.get("spectra", ()))
        return cls(**d)


@dataclass
class SpdDataset:
    matrices: np.ndarray  # (n, d, d)
    labels: np.ndarray   # (n,)
    anchors: np.ndarray  # (n_classes, d, d)
    spec: SynthSpec


def _random_orthogonal(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def synth_dataset(spec: SynthSpec) -> SpdDataset:
    """Seed-deterministic clustered SPD dataset; see the module docstring."""
    rng = np.random.default_rng(spec.seed)
    d, k = spec.dim, spec.n_classes

    shared_q = _random_orthogonal(rng, d) if spec.shared_basis else None
    sqrt_anchors = []
    for c in range(k):
        Q = shared_q if shared_q is not None else _random_orthogonal(rng, d)
        if spec.spectra:
            # explicit spectra keep their slot order: with a shared basis the
            # pairing of eigenvalue to eigenvector carries the class signal
            lam = np.asarray(spec.spectra[c], dtype=np.float64)
            if lam.shape != (d,) or np.any(lam <= 0):
                raise InvalidSpec(f"spectrum for class {c} must be {d} positive values")
            lam = lam * spec.scale
        else:
            lam = np.sort(np.exp(rng.uniform(np.log(spec.eig_lo), np.log(spec.eig_hi), d)))[::-1]
            lam = lam * spec.scale
        sqrt_anchors.append(sym((Q * np.sqrt(lam)) @ Q.T))
    sqrt_anchors = np.stack(sqrt_anchors)

    if spec.frobenius_equalize:
        norms = np.linalg.norm(sqrt_anchors.reshape(k, -1), axis=1)
        sqrt_anchors *= (norms.mean() / norms)[:, None, None]

    anchors = sym(sqrt_anchors @ sqrt_anchors)
    if k > 1 and spec.separation > 0:
        dists = [geometry.bw_distance(anchors[a], anchors[b])
                 for a in range(k) for b in range(a + 1, k)]
        m = min(dists)
        if m <= 0:
            raise InvalidSpec("anchors coincide; cannot enforce separation")
        if m < spec.separation:
            gamma = 1.02 * spec.separation / m
            sqrt_anchors *= gamma
            anchors = sym(sqrt_anchors @ sqrt_anchors)

    n = k * spec.trials_per_class
    mats = np.empty((n, d, d))
    labels = np.empty(n, dtype=np.int64)
    idx = 0
    for c in range(k):
        base = sqrt_anchors[c]
        base_norm = np.linalg.norm(base)
        for _ in range(spec.trials_per_class):
            direction = rng.standard_normal((d, d))
            direction = sym(direction)
            direction /= np.linalg.norm(direction)
            magnitude = spec.dispersion * base_norm * rng.uniform(0.5, 1.0)
            S = base + magnitude * direction
            mats[idx] = sym(S @ S)
            labels[idx] = c
            idx += 1
    # clip to the SPD cone: squared symmetric matrices are only PSD
    mats = spectral_apply_batch(mats, IDENTITY, spdcore.CLIP_FLOOR)
    return SpdDataset(matrices=mats, labels=labels, anchors=anchors, spec=spec)


def nearest_anchor_accuracy(ds: SpdDataset) -> float:
    """Accuracy of classifying each trial to its transport-nearest anchor."""
    dists = np.stack([geometry.bw_distances_to(ds.matrices, anchor)
                      for anchor in ds.anchors], axis=1)
    return float(np.mean(np.argmin(dists, axis=1) == ds.labels))


# -- banded time-series mixtures ----------------------------------------------------


@dataclass(frozen=True)
class BandMixtureSpec:
    """Two-class time-series task whose class signature is split across bands.

    The mu- and beta-band spatial patterns are swapped between the classes, so
    broadband covariance carries only a `broadband_leak`-sized residue of the
    class signal while each band alone separates them cleanly.
    """

    channels: int = 8
    samples: int = 1024
    sample_rate_hz: float = 256.0
    trials_per_class: int = 60
    broadband_leak: float = 0.15
    noise_scale: float = 0.3
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _spatial_pattern(rng, d, kappa=6.0):
    Q = _random_orthogonal(rng, d)
    lam = np.geomspace(1.0, kappa, d)
    return sym((Q * lam) @ Q.T)


def synth_band_mixture(spec: BandMixtureSpec) -> SegmentBatch:
    rng = np.random.default_rng(spec.seed)
    d = spec.channels
    bands = analysis_bands(spec.sample_rate_hz)
    P = _spatial_pattern(rng, d)
    Qp = _spatial_pattern(rng, d)
    R = _spatial_pattern(rng, d)
    leak = spec.broadband_leak
    patterns = {
        0: [P, Qp, R],
        1: [Qp, (1.0 + leak) * P, R],
    }
    mixers = {cls: spectral_apply_batch(np.stack(patterns[cls]), SQRT) for cls in (0, 1)}
    n = 2 * spec.trials_per_class
    data = np.empty((n, d, spec.samples))
    labels = np.empty(n, dtype=np.int64)
    idx = 0
    for cls in (0, 1):
        for _ in range(spec.trials_per_class):
            x = np.zeros((d, spec.samples))
            for b, band in enumerate(bands):
                source = bandpass(rng.standard_normal((d, spec.samples)), band)
                frac = (band.hi_hz - band.lo_hz) / (spec.sample_rate_hz / 2.0)
                source /= np.sqrt(frac)
                x += mixers[cls][b] @ source
            x += spec.noise_scale * rng.standard_normal((d, spec.samples))
            data[idx] = x
            labels[idx] = cls
            idx += 1
    return SegmentBatch(data=data, labels=labels, sample_rate_hz=spec.sample_rate_hz)


# -- deterministic splits --------------------------------------------------------


def trial_key(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.digest()


def split_indices(keys, seed: int, ratios=SPLIT_RATIOS):
    """Deterministic train/val/test split keyed on content hashes.

    Each trial is ranked by sha256(seed || key); the ranking is a pure
    function of trial content, so permuting the input permutes the returned
    indices consistently (identical trials are interchangeable).
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise InvalidSpec(f"ratios must be three numbers summing to 1, got {ratios}")
    n = len(keys)
    seed_bytes = int(seed).to_bytes(8, "little", signed=True)
    digests = [hashlib.sha256(seed_bytes + bytes(k)).digest() for k in keys]
    order = sorted(range(n), key=lambda i: (digests[i], i))
    n_train = int(np.floor(ratios[0] * n))
    n_val = int(np.floor(ratios[1] * n))
    train = np.array(sorted(order[:n_train]), dtype=np.int64)
    val = np.array(sorted(order[n_train:n_train + n_val]), dtype=np.int64)
    test = np.array(sorted(order[n_train + n_val:]), dtype=np.int64)
    return train, val, test
