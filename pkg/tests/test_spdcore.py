import numpy as np
import pytest

from spdtok import spdcore
from spdtok.errors import DimMismatch, DomainError, NoConvergence, NonFinite
from spdtok.spdcore import (
    IDENTITY,
    LOG,
    SQRT,
    SpectralFn,
    condition_ratio,
    dk_matrix,
    eig_sym,
    eig_sym_batch,
    gradient_norm_bound,
    spectral_apply,
    spectral_apply_batch,
    spectral_backward,
    sym,
)

from conftest import random_spd, random_symmetric

EXP = SpectralFn("exp", np.exp, np.exp)


def check_eigenpair(eig, C):
    d = C.shape[0]
    V, lam = eig.vectors, eig.values
    assert np.max(np.abs(V.T @ V - np.eye(d))) <= 1e-10
    assert np.linalg.norm((V * lam) @ V.T - C) <= 1e-9 * max(np.linalg.norm(C), 1e-300)
    assert np.all(np.diff(lam) <= 0.0)


class TestEigSym:
    def test_identity(self):
        eig = eig_sym(np.eye(3))
        assert np.array_equal(eig.values, np.ones(3))
        assert np.array_equal(np.abs(eig.vectors), np.eye(3))

    def test_diagonal(self):
        eig = eig_sym(np.diag([4.0, 1.0]))
        assert np.allclose(eig.values, [4.0, 1.0])
        assert np.allclose(np.abs(eig.vectors), np.eye(2))

    def test_2x2_characteristic_polynomial(self):
        # roots of x^2 - 4x + 3 computed by the quadratic formula
        a, b, c = 1.0, -4.0, 3.0
        disc = np.sqrt(b * b - 4 * a * c)
        roots = sorted([(-b + disc) / (2 * a), (-b - disc) / (2 * a)], reverse=True)
        eig = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(eig.values, roots, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 22])
    def test_invariants_random(self, rng, d):
        for _ in range(5):
            C = random_spd(rng, d, kappa=10 ** rng.uniform(0, 4))
            check_eigenpair(eig_sym(C), C)

    def test_sign_convention(self, rng):
        C = random_spd(rng, 6)
        V = eig_sym(C).vectors
        for k in range(6):
            col = V[:, k]
            assert col[np.argmax(np.abs(col))] > 0

    def test_deterministic(self, rng):
        C = random_spd(rng, 22, kappa=1000)
        e1 = eig_sym(C.copy())
        e2 = eig_sym(C.copy())
        assert np.array_equal(e1.vectors, e2.vectors)
        assert np.array_equal(e1.values, e2.values)

    def test_nonfinite_rejected(self):
        C = np.eye(3)
        C[0, 1] = np.nan
        with pytest.raises(NonFinite):
            eig_sym(C)

    def test_no_convergence(self, rng):
        C = random_spd(rng, 8)
        with pytest.raises(NoConvergence) as err:
            eig_sym(C, max_sweeps=1)
        assert err.value.residual is not None

    def test_batch_matches_invariants(self, rng):
        Cs = np.stack([random_spd(rng, 5) for _ in range(7)])
        V, lam = eig_sym_batch(Cs)
        for i in range(7):
            check_eigenpair(spdcore.EigenPair(V[i], lam[i]), Cs[i])


class TestSpectralApply:
    def test_sqrt_diagonal(self):
        out = spectral_apply(np.diag([4.0, 9.0]), SQRT)
        assert np.allclose(out, np.diag([2.0, 3.0]), atol=1e-12)

    def test_log_identity_is_zero(self):
        assert np.max(np.abs(spectral_apply(np.eye(4), LOG))) <= 1e-12

    def test_sqrt_squares_back(self):
        C = np.array([[2.0, 1.0], [1.0, 2.0]])
        R = spectral_apply(C, SQRT)
        assert np.max(np.abs(R @ R - C)) <= 1e-10

    @pytest.mark.parametrize("d", [2, 5, 8, 22])
    def test_reconstruction_laws(self, rng, d):
        C = random_spd(rng, d, kappa=100)
        S = spectral_apply(C, SQRT)
        assert np.linalg.norm(S @ S - C) <= 1e-8 * np.linalg.norm(C)
        L = spectral_apply(C, LOG)
        back = spectral_apply(L, EXP, clip=-np.inf)
        assert np.linalg.norm(back - C) <= 1e-8 * np.linalg.norm(C)

    def test_clip_floor_applied(self):
        C = np.diag([1.0, 0.0])
        out = spectral_apply(C, LOG, clip=1e-12)
        assert np.isclose(out[1, 1], np.log(1e-12))

    def test_batch_matches_single(self, rng):
        Cs = np.stack([random_spd(rng, 6) for _ in range(4)])
        batch = spectral_apply_batch(Cs, SQRT)
        for i in range(4):
            assert np.allclose(batch[i], spectral_apply(Cs[i], SQRT), atol=1e-11)


class TestDkMatrix:
    def test_sqrt_example(self):
        dk = dk_matrix(np.array([4.0, 1.0]), SQRT)
        # off-diagonal oracle: (sqrt(4) - sqrt(1)) / (4 - 1) = 1/3
        expected = np.array([[0.25, 1.0 / 3.0], [1.0 / 3.0, 0.5]])
        assert np.allclose(dk.entries, expected, rtol=0, atol=1e-15)
        assert dk.taylor_hits == 0 and dk.pairs == 1

    def test_identity_all_ones(self, rng):
        lam = np.exp(rng.uniform(-3, 3, 7))
        dk = dk_matrix(lam, IDENTITY)
        assert np.array_equal(dk.entries, np.ones((7, 7)))

    def test_log_example(self):
        dk = dk_matrix(np.array([np.e, 1.0]), LOG)
        assert np.isclose(dk.entries[0, 1], 1.0 / (np.e - 1.0), rtol=1e-14)
        assert np.isclose(dk.entries[0, 0], 1.0 / np.e, rtol=1e-14)

    def test_log_taylor_branch_matches_extended_precision(self):
        # inside the branch (|h| < 1e-8 * max): compare against the divided
        # difference evaluated in 80-bit extended precision
        lo = np.longdouble(1.0)
        h = np.longdouble(1e-9)
        hi = lo + h
        oracle = float((np.log(hi) - np.log(lo)) / h)
        dk = dk_matrix(np.array([1.0, 1.0 + 1e-9]), LOG)
        assert dk.taylor_hits == 1
        assert abs(dk.entries[0, 1] - oracle) <= 1e-10 * abs(oracle)
        # the two-term correction is ~5e-10 here, so a sign error in the
        # Taylor branch would miss the oracle by ~1e-9 relative
        assert abs(dk.entries[0, 1] - 1.0) > 1e-10

    def test_log_equal_eigenvalues_finite(self):
        dk = dk_matrix(np.array([2.0, 2.0, 5.0]), LOG)
        assert np.all(np.isfinite(dk.entries))
        assert np.isclose(dk.entries[0, 1], 0.5)
        assert dk.taylor_hits == 1

    def test_exact_symmetry(self, rng):
        lam = np.sort(np.exp(rng.uniform(-2, 2, 9)))[::-1]
        lam[3] = lam[2] * (1 + 1e-10)
        for fn in (SQRT, LOG, EXP):
            K = dk_matrix(lam, fn).entries
            assert np.array_equal(K, K.T)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            dk_matrix(np.array([1.0, -0.5]), SQRT)
        with pytest.raises(DomainError):
            dk_matrix(np.array([1.0, 0.0]), LOG)

    def test_sqrt_entry_bounds(self, rng):
        lam = np.exp(rng.uniform(-2, 4, 12))
        K = dk_matrix(lam, SQRT).entries
        lo = 1.0 / (2.0 * np.sqrt(lam.max()))
        hi = 1.0 / (2.0 * np.sqrt(lam.min()))
        assert np.all(K >= lo - 1e-15) and np.all(K <= hi + 1e-15)

    def test_generic_fn_near_degenerate_uses_midpoint_derivative(self):
        dk = dk_matrix(np.array([3.0, 3.0]), EXP)
        assert np.isclose(dk.entries[0, 1], np.exp(3.0))


class TestConditionRatio:
    def test_flat_spectrum(self):
        assert condition_ratio([1.0, 1.0, 1.0]) == 1.0

    def test_kappa_100_ratio_pair(self):
        # at kappa = 100 the sqrt/log DK range ratios are exactly (10, 100)
        lam = np.array([100.0, 1.0])
        assert condition_ratio(lam) == 100.0
        sqrt_ratio = dk_matrix(lam, SQRT).entry_range_ratio
        log_ratio = dk_matrix(lam, LOG).entry_range_ratio
        assert abs(sqrt_ratio - 10.0) <= 1e-9 * 10.0
        assert abs(log_ratio - 100.0) <= 1e-9 * 100.0

    def test_exhaustive_scan_9_4_1(self):
        lam = np.array([9.0, 4.0, 1.0])
        assert condition_ratio(lam) == 9.0
        K = dk_matrix(lam, SQRT).entries
        scan = max(K[i, j] for i in range(3) for j in range(3)) / min(
            K[i, j] for i in range(3) for j in range(3)
        )
        assert np.isclose(scan, 3.0, rtol=1e-12)
        assert np.isclose(dk_matrix(lam, SQRT).entry_range_ratio, scan, rtol=0)

    def test_conditioning_law_random(self, rng):
        for d in (2, 5, 13, 22):
            for kappa in (10.0, 100.0, 1e4):
                lam = np.concatenate([[1.0, kappa], np.exp(rng.uniform(0, np.log(kappa), d - 2))])
                assert abs(dk_matrix(lam, SQRT).entry_range_ratio - np.sqrt(kappa)) <= 1e-6 * np.sqrt(kappa)
                assert abs(dk_matrix(lam, LOG).entry_range_ratio - kappa) <= 1e-6 * kappa

    def test_domain_error(self):
        with pytest.raises(DomainError):
            condition_ratio([0.0, 1.0])


def fd_directional(loss, C, E, h):
    return (loss(C + h * E) - loss(C - h * E)) / (2.0 * h)


class TestSpectralBackward:
    def test_identity_returns_symmetrized_upstream(self, rng):
        C = random_spd(rng, 4)
        G = rng.standard_normal((4, 4))
        out = spectral_backward(eig_sym(C), IDENTITY, G)
        assert np.allclose(out, sym(G), atol=1e-12)

    def test_sqrt_diagonal_case(self):
        eig = eig_sym(np.diag([4.0, 9.0]))
        out = spectral_backward(eig, SQRT, np.eye(2))
        assert np.allclose(out, np.diag([0.25, 1.0 / 6.0]), atol=1e-12)

    def test_dim_mismatch(self, rng):
        eig = eig_sym(random_spd(rng, 3))
        with pytest.raises(DimMismatch):
            spectral_backward(eig, SQRT, np.eye(4))

    @pytest.mark.parametrize("fn", [SQRT, LOG])
    def test_entrywise_finite_differences(self, rng, fn):
        d = 5
        C = random_spd(rng, d, kappa=50)
        G = random_symmetric(rng, d)
        grad = spectral_backward(eig_sym(C), fn, G)
        h = 1e-5 * np.linalg.norm(C)

        def loss(M):
            return float(np.sum(G * spectral_apply(M, fn)))

        tol = max(1e-5, 1e-3 * np.linalg.norm(grad))
        for i in range(d):
            for j in range(i, d):
                E = np.zeros((d, d))
                E[i, j] = E[j, i] = 1.0
                want = fd_directional(loss, C, E, h)
                got = float(np.sum(grad * E))
                assert abs(got - want) <= tol

    @pytest.mark.parametrize("d", [2, 3, 5, 8, 22])
    def test_directional_finite_differences(self, rng, d):
        for fn in (SQRT, LOG):
            C = random_spd(rng, d, kappa=10 ** rng.uniform(0, 3))
            G = random_symmetric(rng, d)
            E = random_symmetric(rng, d)
            E /= np.linalg.norm(E)
            grad = spectral_backward(eig_sym(C), fn, G)
            h = 1e-5 * np.linalg.norm(C)

            def loss(M):
                return float(np.sum(G * spectral_apply(M, fn)))

            want = fd_directional(loss, C, E, h)
            got = float(np.sum(grad * E))
            assert abs(got - want) <= max(1e-5, 1e-3 * abs(want))

    @pytest.mark.parametrize("fn", [SQRT, LOG])
    def test_gradient_norm_bound(self, rng, fn):
        for _ in range(20):
            d = int(rng.integers(2, 9))
            C = random_spd(rng, d, kappa=10 ** rng.uniform(0, 4))
            G = random_symmetric(rng, d)
            G /= np.linalg.norm(G)
            eig = eig_sym(C)
            grad = spectral_backward(eig, fn, G)
            bound = gradient_norm_bound(fn, max(eig.values.min(), spdcore.CLIP_FLOOR))
            assert np.linalg.norm(grad) <= bound * 1.05
