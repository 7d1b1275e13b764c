"""Property suites that mechanically check the package's mathematical claims.

Each suite stresses one cluster of results at desk scale: the vech norm
sandwich, token-space distortion bounds (including the Powers-Stormer and
Procrustes inequalities and the derivative-based Lipschitz bound), embedding
injectivity, metric axioms, spectral reconstruction, divided-difference
conditioning (sqrt(kappa) vs kappa), gradient norm bounds, finite-difference
gradient agreement, barycenter fixed-point behaviour, the second-order decay
of the sqrt-space mean gap, eigenvalue-pair counting with the near-degeneracy
branch fraction, and bitwise determinism.

Every suite returns PropertyResult records carrying the measured quantities,
so the JSON summary documents not just pass/fail but the observed margins.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from . import geometry, spdcore
from .data import SynthSpec, synth_dataset
from .embedding import EmbeddingKind, embed, embed_backward, unvech, vech
from .errors import InvalidSpec
from .geometry import bw_barycenter, bw_distance, dispersion_report, distance, DistanceKind
from .network import ModelConfig, SpdTokenTransformer
from .spdcore import (
    IDENTITY,
    LOG,
    SQRT,
    dk_matrix,
    eig_sym,
    eig_sym_batch,
    spectral_apply,
    spectral_apply_batch,
    spectral_backward,
    sym,
)
from .stats import loglog_slope


@dataclass
class PropertyResult:
    suite: str
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extras = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.suite}/{self.name}" + (f" ({extras})" if extras else "")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _random_spd_stack(rng, n, d, kappa_max):
    """Stack of SPD matrices, each with its own condition ratio <= kappa_max."""
    mats = np.empty((n, d, d))
    for i in range(n):
        kappa = 10 ** rng.uniform(0.0, np.log10(kappa_max)) if d > 1 else 1.0
        Q, R = np.linalg.qr(rng.standard_normal((d, d)))
        Q = Q * np.sign(np.diag(R))
        if d == 1:
            lam = np.array([1.0])
        else:
            lam = np.concatenate([[1.0, kappa], np.exp(rng.uniform(0, np.log(kappa), d - 2))])
        mats[i] = (Q * lam) @ Q.T
    return sym(mats)


def _random_symmetric(rng, d):
    M = rng.standard_normal((d, d))
    return 0.5 * (M + M.T)


# -- suites ----------------------------------------------------------------------


def suite_norm_equivalence(rng, trials=300) -> list:
    worst_lo = np.inf
    worst_hi = np.inf
    ok = True
    for _ in range(trials):
        d = int(rng.integers(2, 12))
        M = _random_symmetric(rng, d)
        fro = np.linalg.norm(M)
        tok = np.linalg.norm(vech(M))
        lo_margin = tok - fro / np.sqrt(2.0)
        hi_margin = fro - tok
        worst_lo = min(worst_lo, lo_margin)
        worst_hi = min(worst_hi, hi_margin)
        ok = ok and lo_margin >= -1e-12 and hi_margin >= -1e-12
    diag = np.diag([1.0, 2.0, 3.0])
    tight_hi = abs(np.linalg.norm(vech(diag)) - np.linalg.norm(diag)) <= 1e-12
    hollow = np.array([[0.0, 2.0], [2.0, 0.0]])
    tight_lo = abs(np.linalg.norm(vech(hollow)) - np.linalg.norm(hollow) / np.sqrt(2.0)) <= 1e-12
    return [
        PropertyResult("norm_equivalence", "sandwich", ok,
                       {"trials": trials, "worst_lower_margin": float(worst_lo),
                        "worst_upper_margin": float(worst_hi)}),
        PropertyResult("norm_equivalence", "tight_cases", tight_hi and tight_lo, {}),
    ]


def distortion_sweep(rng, d, n_pairs, kappa_max=100.0) -> dict:
    """Vectorised distortion-bound check over random pairs at one dimension."""
    As = _random_spd_stack(rng, n_pairs, d, kappa_max)
    Bs = _random_spd_stack(rng, n_pairs, d, kappa_max)
    Va, la = eig_sym_batch(As)
    Vb, lb = eig_sym_batch(Bs)
    sqA = sym((Va * np.sqrt(np.maximum(la, 0.0))[:, None, :]) @ np.swapaxes(Va, 1, 2))
    sqB = sym((Vb * np.sqrt(np.maximum(lb, 0.0))[:, None, :]) @ np.swapaxes(Vb, 1, 2))
    iu = np.triu_indices(d)
    tok = np.linalg.norm(sqA[:, iu[0], iu[1]] - sqB[:, iu[0], iu[1]], axis=1)
    inner = sqA @ Bs @ sqA
    _, cross = eig_sym_batch(sym(inner))
    bracket = (np.trace(As, axis1=1, axis2=2) + np.trace(Bs, axis1=1, axis2=2)
               - 2.0 * np.sum(np.sqrt(np.maximum(cross, 0.0)), axis=1))
    dbw = np.sqrt(np.maximum(bracket, 0.0))
    sq_diff = np.linalg.norm((sqA - sqB).reshape(n_pairs, -1), axis=1)
    _, diff_vals = eig_sym_batch(sym(As - Bs))
    trace_norm = np.sum(np.abs(diff_vals), axis=1)
    fro_diff = np.linalg.norm((As - Bs).reshape(n_pairs, -1), axis=1)
    lam_min = np.minimum(la.min(axis=1), lb.min(axis=1))
    lam_max = np.maximum(la.max(axis=1), lb.max(axis=1))
    kappa = lam_max / lam_min
    slack = 1e-9
    violations = {
        "lower": int(np.sum(tok < dbw / np.sqrt(2.0 * (kappa + 1.0)) - slack)),
        "sandwich_upper": int(np.sum(tok > sq_diff + slack)),
        "sandwich_lower": int(np.sum(tok < sq_diff / np.sqrt(2.0) - slack)),
        "procrustes": int(np.sum(dbw > sq_diff + slack)),
        "powers_stormer": int(np.sum(sq_diff ** 2 > trace_norm + slack)),
        "lipschitz": int(np.sum(sq_diff > fro_diff / (2.0 * np.sqrt(lam_min)) + slack)),
    }
    return {"violations": violations, "n_pairs": n_pairs, "dim": d,
            "max_ratio": float(np.max(tok / np.maximum(dbw, 1e-30)))}


def suite_distortion(rng, dims=(2, 5, 8, 22), n_pairs=1000, kappa_max=100.0) -> list:
    results = []
    for d in dims:
        sweep = distortion_sweep(rng, d, n_pairs, kappa_max)
        total = sum(sweep["violations"].values())
        results.append(PropertyResult(
            "distortion", f"random_pairs_d{d}", total == 0,
            {"n_pairs": n_pairs, **sweep["violations"]}))
    # commuting pairs: transport distance equals the sqrt-space Frobenius gap
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 9))
        Q, R = np.linalg.qr(rng.standard_normal((d, d)))
        Q = Q * np.sign(np.diag(R))
        A = sym((Q * rng.uniform(0.5, 4.0, d)) @ Q.T)
        B = sym((Q * rng.uniform(0.5, 4.0, d)) @ Q.T)
        gap = abs(bw_distance(A, B) - np.linalg.norm(spectral_apply(A, SQRT) - spectral_apply(B, SQRT)))
        worst = max(worst, gap)
    results.append(PropertyResult("distortion", "commuting_identity", worst <= 1e-8,
                                  {"worst_gap": worst}))
    chk = geometry.distortion_check(np.diag([4.0, 1.0]), np.diag([1.0, 4.0]), kappa_bound=4.0)
    results.append(PropertyResult("distortion", "tightness_cases",
                                  abs(chk.ratio - 1.0) <= 1e-9, {"diag_ratio": chk.ratio}))
    return results


def suite_injectivity(rng, trials=100) -> list:
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(2, 9))
        A = _random_spd_stack(rng, 1, d, 100.0)[0]
        S = unvech(embed(A, EmbeddingKind.BWSPD))
        B = sym(S @ S)
        worst = max(worst, float(np.linalg.norm(A - B) / max(np.linalg.norm(A), 1e-30)))
    return [PropertyResult("injectivity", "token_round_trip", worst <= 1e-8,
                           {"trials": trials, "worst_rel_gap": worst})]


def suite_metrics(rng, triples=1000) -> list:
    results = []
    for kind in DistanceKind:
        sym_worst = 0.0
        self_worst = 0.0
        tri_viol = 0
        for _ in range(triples // 10):
            A = _random_spd_stack(rng, 1, 4, 100.0)[0]
            B = _random_spd_stack(rng, 1, 4, 100.0)[0]
            sym_worst = max(sym_worst, abs(distance(A, B, kind) - distance(B, A, kind)))
            # the transport bracket subtracts two trace-sized quantities, so the
            # self-distance roundoff floor grows like sqrt(eps * tr A)
            scale = max(1.0, np.sqrt(np.trace(A)))
            self_worst = max(self_worst, distance(A, A, kind) / scale)
        for _ in range(triples):
            A, B, C = (_random_spd_stack(rng, 1, 3, 100.0)[0] for _ in range(3))
            if distance(A, C, kind) > distance(A, B, kind) + distance(B, C, kind) + 1e-9:
                tri_viol += 1
        results.append(PropertyResult(
            "metrics", f"axioms_{kind.value}",
            bool(sym_worst <= 1e-7 and self_worst <= 1e-7 and tri_viol == 0),
            {"symmetry_worst": sym_worst, "scaled_self_worst": self_worst,
             "triangle_violations": tri_viol, "triples": triples}))
    return results


def suite_reconstruction(rng, trials=40) -> list:
    worst_sqrt = 0.0
    worst_log = 0.0
    for _ in range(trials):
        d = int(rng.integers(2, 12))
        C = _random_spd_stack(rng, 1, d, 1e4)[0]
        S = spectral_apply(C, SQRT)
        worst_sqrt = max(worst_sqrt, np.linalg.norm(S @ S - C) / np.linalg.norm(C))
        L = spectral_apply(C, LOG)
        back = spectral_apply(L, spdcore.EXP, clip=-np.inf)
        worst_log = max(worst_log, np.linalg.norm(back - C) / np.linalg.norm(C))
    return [
        PropertyResult("reconstruction", "sqrt_squares_back", worst_sqrt <= 1e-8,
                       {"worst_rel": worst_sqrt}),
        PropertyResult("reconstruction", "exp_inverts_log", worst_log <= 1e-8,
                       {"worst_rel": worst_log}),
    ]


def check_dk_matrix(lam: np.ndarray, entries: np.ndarray, fn_name: str) -> dict:
    """Range/ratio law check for a divided-difference matrix.

    Returns the measured entry-range ratio and whether every entry is finite,
    inside the theoretical bounds, and the ratio matches sqrt(kappa) (sqrt) or
    kappa (log) to 1e-6 relative.
    """
    lam = np.asarray(lam, dtype=np.float64)
    kappa = float(lam.max() / lam.min())
    finite = bool(np.all(np.isfinite(entries)))
    mags = np.abs(entries)
    ratio = float(mags.max() / mags.min()) if finite and mags.min() > 0 else float("inf")
    if fn_name == "sqrt":
        lo, hi = 1.0 / (2.0 * np.sqrt(lam.max())), 1.0 / (2.0 * np.sqrt(lam.min()))
        want = np.sqrt(kappa)
    elif fn_name == "log":
        lo, hi = 1.0 / lam.max(), 1.0 / lam.min()
        want = kappa
    else:
        lo, hi, want = 1.0, 1.0, 1.0
    in_bounds = finite and bool(np.all(mags >= lo * (1 - 1e-9)) and np.all(mags <= hi * (1 + 1e-9)))
    ratio_ok = finite and abs(ratio - want) <= 1e-6 * want
    return {"ok": finite and in_bounds and ratio_ok, "finite": finite,
            "in_bounds": in_bounds, "ratio": ratio, "expected_ratio": want,
            "kappa": kappa}


def _spectrum(rng, d, kappa, clustered=False):
    if d == 2:
        return np.array([kappa, 1.0])
    if clustered:
        half = d // 2
        base = np.concatenate([np.full(half, kappa), np.full(d - half, 1.0)])
        jitter = 1.0 + rng.uniform(0.0, 1e-9, d)
        return np.sort(base * jitter)[::-1]
    return np.sort(np.concatenate([[1.0, kappa], np.exp(rng.uniform(0, np.log(kappa), d - 2))]))[::-1]


def suite_conditioning(rng, dims=(2, 5, 13, 22), kappas=(10.0, 100.0, 1e4)) -> list:
    results = []
    all_ok = True
    worst_rel = 0.0
    for d in dims:
        for kappa in kappas:
            for clustered in (False, True):
                lam = _spectrum(rng, d, kappa, clustered)
                for fn in (SQRT, LOG):
                    chk = check_dk_matrix(lam, dk_matrix(lam, fn).entries, fn.name)
                    all_ok = all_ok and chk["ok"]
                    worst_rel = max(worst_rel,
                                    abs(chk["ratio"] - chk["expected_ratio"]) / chk["expected_ratio"])
    results.append(PropertyResult("conditioning", "range_ratio_law", all_ok,
                                  {"worst_rel_error": worst_rel,
                                   "dims": list(dims), "kappas": list(kappas)}))
    # 2x2 exactness at 1e-9 and the kappa=100 ratio pair (10, 100)
    lam2 = np.array([100.0, 1.0])
    sqrt_ratio = dk_matrix(lam2, SQRT).entry_range_ratio
    log_ratio = dk_matrix(lam2, LOG).entry_range_ratio
    results.append(PropertyResult(
        "conditioning", "kappa100_pair",
        abs(sqrt_ratio - 10.0) <= 1e-9 * 10.0 and abs(log_ratio - 100.0) <= 1e-9 * 100.0,
        {"sqrt_ratio": float(sqrt_ratio), "log_ratio": float(log_ratio)}))
    ident = dk_matrix(np.array([3.0, 1.0, 0.5]), IDENTITY)
    results.append(PropertyResult("conditioning", "identity_all_ones",
                                  bool(np.all(ident.entries == 1.0)), {}))
    lam_dup = np.array([2.0, 2.0, 1.0])
    chk = check_dk_matrix(lam_dup, dk_matrix(lam_dup, LOG).entries, "log")
    results.append(PropertyResult("conditioning", "degenerate_spectrum_log", chk["ok"],
                                  {"ratio": chk["ratio"]}))
    return results


def suite_gradient_bounds(rng, trials=100) -> list:
    worst_excess = 0.0
    ok = True
    for _ in range(trials):
        d = int(rng.integers(2, 12))
        C = _random_spd_stack(rng, 1, d, 1e4)[0]
        G = _random_symmetric(rng, d)
        G /= np.linalg.norm(G)
        eig = eig_sym(C)
        lam_min = max(float(eig.values.min()), spdcore.CLIP_FLOOR)
        for fn in (SQRT, LOG):
            grad = spectral_backward(eig, fn, G)
            bound = spdcore.gradient_norm_bound(fn, lam_min)
            excess = np.linalg.norm(grad) / bound
            worst_excess = max(worst_excess, excess)
            ok = ok and excess <= 1.05
    return [PropertyResult("gradient_bounds", "unit_upstream_norm", ok,
                           {"trials": trials, "worst_norm_over_bound": worst_excess})]


def suite_gradient_oracle(rng, dims=(2, 3, 5, 8, 22), per_dim=40) -> list:
    """Directional finite differences for the spectral and embedding backward passes."""
    checked = 0
    failures = 0
    worst = 0.0
    for d in dims:
        for _ in range(per_dim):
            C = _random_spd_stack(rng, 1, d, 1e4)[0]
            fn_kind = [(SQRT, EmbeddingKind.BWSPD), (LOG, EmbeddingKind.LOG_EUCLIDEAN)][int(rng.integers(0, 2))]
            fn, kind = fn_kind
            w = rng.standard_normal(d * (d + 1) // 2)
            grad = embed_backward(C, kind, w)
            E = _random_symmetric(rng, d)
            E /= np.linalg.norm(E)
            h = 1e-5 * np.linalg.norm(C)
            hi = float(w @ embed(C + h * E, kind))
            lo = float(w @ embed(C - h * E, kind))
            want = (hi - lo) / (2.0 * h)
            got = float(np.sum(grad * E))
            tol = max(1e-4, 1e-2 * abs(got))
            err = abs(got - want)
            worst = max(worst, err / tol)
            failures += err > tol
            checked += 1
    return [PropertyResult("gradient_oracle", "token_to_matrix_fd", failures == 0,
                           {"instances": checked, "failures": failures,
                            "worst_err_over_tol": worst})]


def micro_model_gradient_check(rng, n_params=50) -> dict:
    """Finite differences on a tiny transformer, including the sqrt-token path."""
    d = 4
    D = d * (d + 1) // 2
    model = SpdTokenTransformer(ModelConfig(d_token=D, n_classes=3, d_model=16, layers=2,
                                            heads=2, d_ff=24, dropout=0.0), seed=5)
    Cs = _random_spd_stack(rng, 6, d, 100.0)
    tokens = np.stack([embed(C, EmbeddingKind.BWSPD) for C in Cs])[:, None, :]
    labels = rng.integers(0, 3, 6)

    def loss_value():
        return float(ad.cross_entropy(model.forward(tokens, training=True), labels).data)

    model.zero_grad()
    loss = ad.cross_entropy(model.forward(tokens, training=True), labels)
    loss.backward()
    names = list(model.params)
    checked = 0
    failures = 0
    worst = 0.0
    while checked < n_params:
        name = names[int(rng.integers(0, len(names)))]
        p = model.params[name]
        idx = np.unravel_index(int(rng.integers(0, p.data.size)), p.data.shape)
        old = p.data[idx]
        h = 1e-5 * max(1.0, abs(old))
        p.data[idx] = old + h
        hi = loss_value()
        p.data[idx] = old - h
        lo = loss_value()
        p.data[idx] = old
        num = (hi - lo) / (2.0 * h)
        got = p.grad[idx] if p.grad is not None else 0.0
        tol = max(1e-4, 1e-2 * abs(got))
        err = abs(got - num)
        worst = max(worst, err / tol)
        failures += err > tol
        checked += 1
    # input-gradient path: token gradient -> matrix gradient via the adjoint
    tok_t = ad.Tensor(tokens, requires_grad=True)
    loss = ad.cross_entropy(model.forward(tok_t, training=True), labels)
    loss.backward()
    grad_C0 = embed_backward(Cs[0], EmbeddingKind.BWSPD, tok_t.grad[0, 0])
    E = _random_symmetric(rng, d)
    E /= np.linalg.norm(E)
    h = 1e-5 * np.linalg.norm(Cs[0])

    def loss_of_first(Cmat):
        toks = tokens.copy()
        toks[0, 0] = embed(Cmat, EmbeddingKind.BWSPD)
        return float(ad.cross_entropy(model.forward(toks, training=True), labels).data)

    want = (loss_of_first(Cs[0] + h * E) - loss_of_first(Cs[0] - h * E)) / (2.0 * h)
    got = float(np.sum(grad_C0 * E))
    input_ok = abs(got - want) <= max(1e-4, 1e-2 * abs(got))
    return {"param_checks": checked, "param_failures": int(failures),
            "worst_err_over_tol": float(worst), "input_path_ok": bool(input_ok)}


def suite_micro_model(rng, n_params=50) -> list:
    res = micro_model_gradient_check(rng, n_params)
    ok = res["param_failures"] == 0 and res["input_path_ok"]
    return [PropertyResult("gradient_oracle", "micro_model_fd", ok, res)]


def suite_barycenter(rng, batches=5, n=32, eps=0.2, d=5, tol=1e-10) -> list:
    results = []
    A = _random_spd_stack(rng, 1, 4, 50.0)[0]
    mu = bw_barycenter(A[None])
    results.append(PropertyResult("barycenter", "singleton_identity",
                                  np.linalg.norm(mu - A) <= 1e-9 * np.linalg.norm(A), {}))
    mu = bw_barycenter(np.stack([A, A, A]))
    results.append(PropertyResult("barycenter", "duplicate_identity",
                                  np.linalg.norm(mu - A) <= 1e-9 * np.linalg.norm(A), {}))
    worst_resid = 0.0
    ok = True
    for b in range(batches):
        ds = synth_dataset(SynthSpec(n_classes=1, dim=d, trials_per_class=n,
                                     separation=0.0, dispersion=eps, seed=700 + b))
        mu = bw_barycenter(ds.matrices, tol=tol)
        sq = spectral_apply(mu, SQRT)
        inner = sq[None] @ ds.matrices @ sq[None]
        mapped = sym(np.mean(spectral_apply_batch(sym(inner), SQRT), axis=0))
        resid = np.linalg.norm(mu - mapped) / np.linalg.norm(mu)
        worst_resid = max(worst_resid, resid)
        ok = ok and resid <= tol
    results.append(PropertyResult("barycenter", "clustered_residual", ok,
                                  {"batches": batches, "n": n, "dispersion": eps,
                                   "worst_rel_residual": worst_resid}))
    return results


def bn_embed_slope(rng, eps_levels=(0.02, 0.05, 0.1, 0.15, 0.2), batches_per_eps=20,
                   n=32, d=5) -> dict:
    """Log-log slope of the sqrt-space mean gap against dispersion.

    Batches are perturbation-paired across dispersion levels (same seed ->
    same directions), isolating the second-order term.
    """
    gaps = []
    measured_eps = []
    for eps in eps_levels:
        level_gaps = []
        level_eps = []
        for b in range(batches_per_eps):
            ds = synth_dataset(SynthSpec(n_classes=1, dim=d, trials_per_class=n,
                                         separation=0.0, dispersion=eps, seed=3000 + b))
            rep = dispersion_report(ds.matrices)
            level_gaps.append(rep.sqrt_mean_gap)
            level_eps.append(rep.epsilon)
        gaps.append(float(np.mean(level_gaps)))
        measured_eps.append(float(np.mean(level_eps)))
    slope = loglog_slope(eps_levels, gaps)
    return {"slope": slope, "eps_levels": list(eps_levels), "mean_gaps": gaps,
            "measured_eps": measured_eps}


def suite_bn_embed(rng, **kw) -> list:
    res = bn_embed_slope(rng, **kw)
    ok = 1.7 <= res["slope"] <= 2.3
    return [PropertyResult("bn_embed", "second_order_gap_slope", ok, res)]


def suite_pair_counts(rng) -> list:
    results = []
    for d, want in ((8, 28), (22, 231)):
        lam = _spectrum(rng, d, 100.0)
        dk = dk_matrix(lam, LOG)
        results.append(PropertyResult("pair_counts", f"offdiag_pairs_d{d}",
                                      dk.pairs == want, {"pairs": dk.pairs, "expected": want}))
    lam_sep = _spectrum(rng, 8, 100.0, clustered=False)
    lam_clu = _spectrum(rng, 8, 100.0, clustered=True)
    p_sep = dk_matrix(lam_sep, LOG).branch_fraction
    p_clu = dk_matrix(lam_clu, LOG).branch_fraction
    results.append(PropertyResult("pair_counts", "branch_fraction_clustered",
                                  p_clu > p_sep, {"p_separated": p_sep, "p_clustered": p_clu}))
    return results


def suite_determinism(rng) -> list:
    C = _random_spd_stack(rng, 1, 22, 1000.0)[0]
    e1 = eig_sym(C.copy())
    e2 = eig_sym(C.copy())
    eig_ok = np.array_equal(e1.vectors, e2.vectors) and np.array_equal(e1.values, e2.values)
    from .train import DataConfig, ExperimentConfig, run_single, tokenize

    data = DataConfig(source="synth", embedding="logeuclidean",
                      synth=dict(n_classes=2, dim=4, trials_per_class=12,
                                 separation=1.0, dispersion=0.05, seed=17))
    exp = ExperimentConfig(data=data, model=dict(d_model=16, layers=1, heads=2, d_ff=16,
                                                 dropout=0.1),
                           epochs=2, batch_size=8, seeds=(7,))
    tds = tokenize(data)
    m1 = run_single(exp, tds, 7).to_metrics_dict()
    m2 = run_single(exp, tds, 7).to_metrics_dict()
    train_ok = json.dumps(m1, sort_keys=True) == json.dumps(m2, sort_keys=True)
    return [
        PropertyResult("determinism", "eig_bit_identical", bool(eig_ok), {}),
        PropertyResult("determinism", "training_run_bit_identical", bool(train_ok), {}),
    ]


SUITES = {
    "norm_equivalence": suite_norm_equivalence,
    "distortion": suite_distortion,
    "injectivity": suite_injectivity,
    "metrics": suite_metrics,
    "reconstruction": suite_reconstruction,
    "conditioning": suite_conditioning,
    "gradient_bounds": suite_gradient_bounds,
    "gradient_oracle": suite_gradient_oracle,
    "micro_model": suite_micro_model,
    "barycenter": suite_barycenter,
    "bn_embed": suite_bn_embed,
    "pair_counts": suite_pair_counts,
    "determinism": suite_determinism,
}


def run_verification(name_filter: str | None = None, seed: int = 0):
    """Run matching suites; returns (results, all_passed)."""
    selected = {k: v for k, v in SUITES.items()
                if name_filter is None or name_filter in k}
    if not selected:
        raise InvalidSpec(f"no suite matches filter {name_filter!r}; "
                          f"available: {', '.join(SUITES)}")
    results = []
    for name, fn in selected.items():
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        results.extend(fn(rng))
    return results, all(r.passed for r in results)


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def results_to_json(results) -> dict:
    return {
        "all_passed": all(r.passed for r in results),
        "properties": [_plain(asdict(r)) for r in results],
    }
