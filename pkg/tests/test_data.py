import numpy as np
import pytest

from spdtok.data import (
    BandMixtureSpec,
    BandSpec,
    SynthSpec,
    bandpass,
    estimate_covariance,
    multiband_tokens,
    nearest_anchor_accuracy,
    analysis_bands,
    split_indices,
    synth_band_mixture,
    synth_dataset,
    trial_key,
)
from spdtok.embedding import EmbeddingKind, embed
from spdtok.errors import BandOutOfRange, InvalidSpec, TooFewSamples
from spdtok.geometry import bw_distance, dispersion_report
from spdtok.spdcore import eig_sym


class TestEstimateCovariance:
    def test_constant_channels_give_ridge_identity(self):
        X = np.ones((3, 50)) * np.array([[1.0], [2.0], [-4.0]])
        C = estimate_covariance(X, ridge=1e-6)
        assert np.allclose(C, 1e-6 * np.eye(3), atol=1e-18)

    def test_hand_computed_two_samples(self):
        # de-meaned rows are [1, -1]; divisor T-1 = 1 -> all entries 2
        X = np.array([[1.0, -1.0], [1.0, -1.0]])
        C = estimate_covariance(X, ridge=1e-6)
        assert np.allclose(C, np.array([[2.0, 2.0], [2.0, 2.0]]) + 1e-6 * np.eye(2))

    def test_white_noise_concentrates(self, rng):
        X = rng.standard_normal((8, 100_000))
        C = estimate_covariance(X)
        off = C - np.diag(np.diag(C))
        assert np.max(np.abs(off)) < 0.05
        assert np.all(np.diag(C) > 0.9) and np.all(np.diag(C) < 1.1)

    def test_spd_invariants(self, rng):
        X = rng.standard_normal((5, 40))
        C = estimate_covariance(X, ridge=1e-6)
        assert np.array_equal(C, C.T)
        assert eig_sym(C).values.min() >= 1e-6 - 1e-12

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            estimate_covariance(np.ones((3, 1)))


class TestBandpass:
    def test_in_band_sinusoid_preserved(self):
        fs, n = 250.0, 1000
        t = np.arange(n) / fs
        x = np.sin(2 * np.pi * 10.0 * t)[None, :]
        band = BandSpec("beta", 8.0, 13.0, fs)
        y = bandpass(x, band)
        assert np.sqrt(np.mean(y**2)) >= 0.99 * np.sqrt(np.mean(x**2))

    def test_out_of_band_sinusoid_killed(self):
        fs, n = 250.0, 1000
        t = np.arange(n) / fs
        x = np.sin(2 * np.pi * 10.0 * t)[None, :]
        band = BandSpec("gamma", 13.0, 30.0, fs)
        y = bandpass(x, band)
        assert np.sqrt(np.mean(y**2)) <= 1e-3 * np.sqrt(np.mean(x**2))

    def test_zero_in_zero_out(self):
        band = BandSpec("mu", 4.0, 8.0, 250.0)
        assert np.array_equal(bandpass(np.zeros((2, 64)), band), np.zeros((2, 64)))

    def test_band_validation(self):
        with pytest.raises(BandOutOfRange):
            BandSpec("bad", 0.0, 8.0, 250.0)
        with pytest.raises(BandOutOfRange):
            BandSpec("bad", 10.0, 8.0, 250.0)
        with pytest.raises(BandOutOfRange):
            BandSpec("bad", 10.0, 130.0, 250.0)

    def test_paper_band_edges(self):
        mu, beta, gamma = analysis_bands(250.0)
        assert (mu.lo_hz, mu.hi_hz) == (4.0, 8.0)
        assert (beta.lo_hz, beta.hi_hz) == (8.0, 13.0)
        assert (gamma.lo_hz, gamma.hi_hz) == (13.0, 30.0)


class TestMultibandTokens:
    def test_three_bands_give_three_tokens(self, rng):
        X = rng.standard_normal((6, 512))
        toks = multiband_tokens(X, analysis_bands(256.0), EmbeddingKind.LOG_EUCLIDEAN)
        assert toks.shape == (3, 21)

    def test_single_band_matches_manual_pipeline(self, rng):
        X = rng.standard_normal((4, 256))
        band = BandSpec("beta", 8.0, 13.0, 256.0)
        toks = multiband_tokens(X, [band], EmbeddingKind.BWSPD)
        manual = embed(estimate_covariance(bandpass(X, band)), EmbeddingKind.BWSPD)
        assert np.allclose(toks[0], manual, atol=1e-12)

    def test_near_identity_band_matches_unfiltered(self, rng):
        # a band spanning every nonzero non-Nyquist bin only removes DC, which
        # the covariance estimator removes anyway
        fs, n = 256.0, 512
        X = rng.standard_normal((4, n))
        wide = BandSpec("wide", fs / n, fs / 2 - fs / n, fs)
        # strip Nyquist-bin content so the excluded top bin carries no energy
        spectrum = np.fft.rfft(X, axis=-1)
        spectrum[:, -1] = 0.0
        X = np.fft.irfft(spectrum, n=n, axis=-1)
        toks = multiband_tokens(X, [wide], EmbeddingKind.EUCLIDEAN)
        direct = embed(estimate_covariance(X), EmbeddingKind.EUCLIDEAN)
        assert np.linalg.norm(toks[0] - direct) <= 1e-9 * np.linalg.norm(direct)

    def test_band_energy_dominates_matching_band(self, rng):
        # 10 Hz sinusoid + weak noise: the beta-band covariance trace dominates
        fs, n = 256.0, 1024
        t = np.arange(n) / fs
        carrier = np.sin(2 * np.pi * 10.0 * t)
        X = np.outer(rng.uniform(0.5, 1.5, 6), carrier) + 0.05 * rng.standard_normal((6, n))
        traces = [np.trace(estimate_covariance(bandpass(X, b))) for b in analysis_bands(fs)]
        assert traces[1] > 5 * traces[0]
        assert traces[1] > 5 * traces[2]

    def test_empty_bands_rejected(self, rng):
        with pytest.raises(InvalidSpec):
            multiband_tokens(rng.standard_normal((3, 64)), [], EmbeddingKind.EUCLIDEAN)


class TestSynthDataset:
    def test_zero_dispersion_reproduces_anchors(self):
        ds = synth_dataset(SynthSpec(n_classes=3, dim=4, trials_per_class=5,
                                     separation=1.0, dispersion=0.0, seed=9))
        for C, label in zip(ds.matrices, ds.labels):
            anchor = ds.anchors[label]
            assert np.linalg.norm(C - anchor) <= 1e-10 * np.linalg.norm(anchor)

    def test_separation_enforced(self):
        ds = synth_dataset(SynthSpec(n_classes=4, dim=6, trials_per_class=2,
                                     separation=3.0, dispersion=0.02, seed=3))
        k = ds.anchors.shape[0]
        for a in range(k):
            for b in range(a + 1, k):
                assert bw_distance(ds.anchors[a], ds.anchors[b]) >= 3.0 - 1e-9

    def test_nearest_anchor_oracle_scores_100(self):
        ds = synth_dataset(SynthSpec(n_classes=2, dim=4, trials_per_class=100,
                                     separation=2.0, dispersion=0.05, seed=11))
        assert nearest_anchor_accuracy(ds) == 1.0

    def test_seed_determinism(self):
        spec = SynthSpec(n_classes=2, dim=5, trials_per_class=7,
                         separation=1.5, dispersion=0.1, seed=21)
        a = synth_dataset(spec)
        b = synth_dataset(spec)
        assert np.array_equal(a.matrices, b.matrices)
        assert np.array_equal(a.labels, b.labels)

    def test_dispersion_estimator_consistency(self):
        for eps in (0.05, 0.1, 0.2):
            ds = synth_dataset(SynthSpec(n_classes=1, dim=5, trials_per_class=24,
                                         separation=0.0, dispersion=eps, seed=5))
            rep = dispersion_report(ds.matrices)
            assert abs(rep.epsilon - eps) <= 0.3 * eps

    def test_dispersion_pairing_across_levels(self):
        # same seed, different dispersion: perturbation directions are shared,
        # so sample sqrt-offsets scale exactly with the dispersion value
        spec_lo = SynthSpec(n_classes=1, dim=4, trials_per_class=6,
                            separation=0.0, dispersion=0.05, seed=2)
        spec_hi = SynthSpec(n_classes=1, dim=4, trials_per_class=6,
                            separation=0.0, dispersion=0.1, seed=2)
        lo = synth_dataset(spec_lo)
        hi = synth_dataset(spec_hi)
        from spdtok.spdcore import SQRT, spectral_apply_batch
        anchor_sqrt = spectral_apply_batch(lo.anchors, SQRT)[0]
        off_lo = spectral_apply_batch(lo.matrices, SQRT) - anchor_sqrt
        off_hi = spectral_apply_batch(hi.matrices, SQRT) - anchor_sqrt
        assert np.allclose(2.0 * off_lo, off_hi, atol=1e-8)

    def test_frobenius_equalize(self):
        ds = synth_dataset(SynthSpec(n_classes=3, dim=5, trials_per_class=1,
                                     separation=0.0, dispersion=0.0, seed=4,
                                     frobenius_equalize=True))
        from spdtok.spdcore import SQRT, spectral_apply_batch
        norms = np.linalg.norm(spectral_apply_batch(ds.anchors, SQRT).reshape(3, -1), axis=1)
        assert np.allclose(norms, norms[0], rtol=1e-10)

    def test_invalid_specs(self):
        with pytest.raises(InvalidSpec):
            SynthSpec(n_classes=0, dim=3, trials_per_class=1, separation=1, dispersion=0, seed=0)
        with pytest.raises(InvalidSpec):
            SynthSpec(n_classes=1, dim=3, trials_per_class=1, separation=-1, dispersion=0, seed=0)

    def test_spec_round_trip(self):
        spec = SynthSpec(n_classes=2, dim=3, trials_per_class=4, separation=1.0,
                         dispersion=0.1, seed=7, spectra=((1.0, 2.0, 3.0), (2.0, 2.0, 2.0)))
        assert SynthSpec.from_dict(spec.to_dict()) == spec


class TestBandMixture:
    def test_shapes_and_determinism(self):
        spec = BandMixtureSpec(trials_per_class=4, samples=256, seed=1)
        a = synth_band_mixture(spec)
        b = synth_band_mixture(spec)
        assert a.data.shape == (8, 8, 256)
        assert np.array_equal(a.data, b.data)
        assert set(a.labels.tolist()) == {0, 1}

    def test_band_covariances_separate_classes(self):
        # the mu/beta spatial patterns swap between classes: within those bands
        # the class means differ clearly, while the broadband covariance hides
        # most of the signal
        spec = BandMixtureSpec(trials_per_class=12, samples=2048, seed=3)
        batch = synth_band_mixture(spec)

        def ratio(covs):
            mean0 = covs[batch.labels == 0].mean(axis=0)
            mean1 = covs[batch.labels == 1].mean(axis=0)
            within = np.concatenate([covs[batch.labels == 0] - mean0,
                                     covs[batch.labels == 1] - mean1])
            spread = np.mean(np.linalg.norm(within.reshape(len(within), -1), axis=1))
            return np.linalg.norm(mean0 - mean1) / spread

        bands = analysis_bands(spec.sample_rate_hz)
        mu_ratio = ratio(np.stack([estimate_covariance(bandpass(x, bands[0])) for x in batch.data]))
        beta_ratio = ratio(np.stack([estimate_covariance(bandpass(x, bands[1])) for x in batch.data]))
        broad_ratio = ratio(np.stack([estimate_covariance(x) for x in batch.data]))
        assert mu_ratio > 1.2 and beta_ratio > 1.2
        assert broad_ratio < 0.8
        assert broad_ratio < 0.5 * min(mu_ratio, beta_ratio)


class TestSplits:
    def test_disjoint_cover_and_ratio(self, rng):
        keys = [trial_key(rng.standard_normal((3, 3))) for _ in range(100)]
        train, val, test = split_indices(keys, seed=42)
        joined = np.concatenate([train, val, test])
        assert sorted(joined.tolist()) == list(range(100))
        assert len(train) == 70 and len(val) == 15 and len(test) == 15

    def test_order_invariance(self, rng):
        items = [rng.standard_normal((4, 4)) for _ in range(60)]
        keys = [trial_key(x) for x in items]
        train, val, test = split_indices(keys, seed=7)
        perm = rng.permutation(60)
        keys_p = [keys[i] for i in perm]
        train_p, val_p, test_p = split_indices(keys_p, seed=7)
        # membership must follow the trials, not their positions
        train_set = {bytes(keys[i]) for i in train}
        train_set_p = {bytes(keys_p[i]) for i in train_p}
        assert train_set == train_set_p

    def test_seed_changes_split(self, rng):
        keys = [trial_key(rng.standard_normal((2, 2))) for _ in range(50)]
        a = split_indices(keys, seed=1)[0]
        b = split_indices(keys, seed=2)[0]
        assert not np.array_equal(a, b)

    def test_bad_ratios(self):
        with pytest.raises(InvalidSpec):
            split_indices([b"x"], seed=0, ratios=(0.5, 0.2, 0.2))
