"""Experiment configuration, tokenisation, and the training loop.

A run is fully determined by (config, seed): model init, batch shuffling and
dropout all draw from generators derived from the seed, and every file the
run writes except the timing column of epochs.csv is a pure function of the
two. metrics.json deliberately contains no timing, so two runs with the same
config and seed produce byte-identical metrics files.

Per run directory:
    metrics.json         config echo, per-epoch curves, final metrics
    epochs.csv           per-epoch losses/accuracies plus wall-clock seconds
    checkpoint.spdt      parameters after the last epoch
    checkpoint_best.spdt parameters at the best validation epoch
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .container import read_matrix_container, save_checkpoint
from .data import (
    BandMixtureSpec,
    SynthSpec,
    estimate_covariance,
    analysis_bands,
    split_indices,
    synth_band_mixture,
    synth_dataset,
    trial_key,
)
from .embedding import EmbeddingKind
from .errors import InvalidSpec
from .network import ModelConfig, SpdTokenTransformer
from .optim import Adam
from .spdcore import CLIP_FLOOR, DEGENERACY_REL_TOL, eig_sym_batch
from .stats import mean_std

DEFAULT_SEEDS = (42, 123, 456, 789, 1024)


@dataclass
class DataConfig:
    source: str  # "synth" | "band_mixture" | "container"
    embedding: str = EmbeddingKind.LOG_EUCLIDEAN.value
    multiband: bool = False
    synth: dict | None = None
    band_mixture: dict | None = None
    container_path: str | None = None
    split_seed: int = 0
    ratios: tuple = (0.70, 0.15, 0.15)

    def __post_init__(self):
        if self.source not in ("synth", "band_mixture", "container"):
            raise InvalidSpec(f"unknown data source {self.source!r}")
        if self.source == "synth" and not self.synth:
            raise InvalidSpec("synth source needs a synth spec")
        if self.source == "band_mixture" and not self.band_mixture:
            raise InvalidSpec("band_mixture source needs its spec")
        if self.source == "container" and not self.container_path:
            raise InvalidSpec("container source needs container_path")
        if self.multiband and self.source == "synth":
            raise InvalidSpec("multiband tokenisation needs a time-series source")
        EmbeddingKind(self.embedding)
        self.ratios = tuple(self.ratios)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "ratios" in d:
            d["ratios"] = tuple(d["ratios"])
        return cls(**d)


@dataclass
class ExperimentConfig:
    data: DataConfig
    model: dict = field(default_factory=dict)  # ModelConfig overrides
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    seeds: tuple = DEFAULT_SEEDS

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidSpec("epochs must be >= 1")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise InvalidSpec("need at least one seed")

    def to_dict(self):
        d = asdict(self)
        d["data"] = self.data.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["data"] = DataConfig.from_dict(d["data"])
        if "seeds" in d:
            d["seeds"] = tuple(d["seeds"])
        return cls(**d)

    @classmethod
    def from_json_file(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class TokenDataset:
    tokens: np.ndarray   # (n, T, D)
    labels: np.ndarray   # (n,)
    keys: list           # stable per-trial content hashes
    n_classes: int
    meta: dict           # matrix dim, embedding, branch diagnostics


def _branch_diagnostics(values: np.ndarray, kind: EmbeddingKind) -> dict:
    """Would-be divided-difference branch hits for the token spectra.

    Counts eigenvalue pairs within the log backward pass's near-degeneracy
    tolerance, aggregated over all embedded matrices.
    """
    n, d = values.shape
    pairs_per_matrix = d * (d - 1) // 2
    total_pairs = int(n * pairs_per_matrix)
    if kind is not EmbeddingKind.LOG_EUCLIDEAN or d < 2:
        return {"taylor_hits": 0, "pairs": total_pairs, "branch_fraction": 0.0}
    lam = np.maximum(values, CLIP_FLOOR)
    li = lam[:, :, None]
    lj = lam[:, None, :]
    near = np.abs(li - lj) < DEGENERACY_REL_TOL * np.maximum(li, lj)
    iu = np.triu_indices(d, k=1)
    hits = int(np.count_nonzero(near[:, iu[0], iu[1]]))
    return {
        "taylor_hits": hits,
        "pairs": total_pairs,
        "branch_fraction": hits / total_pairs if total_pairs else 0.0,
    }


def tokenize_matrices(Cs: np.ndarray, kind: EmbeddingKind, clip: float = CLIP_FLOOR):
    """Tokens plus branch diagnostics for a stack of SPD matrices."""
    from .spdcore import LOG, SQRT, sym

    kind = EmbeddingKind(kind)
    Cs = sym(np.asarray(Cs, dtype=np.float64))
    d = Cs.shape[-1]
    i, j = np.triu_indices(d)
    if kind is EmbeddingKind.EUCLIDEAN:
        diag = {"taylor_hits": 0, "pairs": Cs.shape[0] * d * (d - 1) // 2, "branch_fraction": 0.0}
        return Cs[:, i, j].copy(), diag
    V, vals = eig_sym_batch(Cs)
    diag = _branch_diagnostics(vals, kind)
    fn = SQRT if kind is EmbeddingKind.BWSPD else LOG
    lam = fn.f(np.maximum(vals, clip))
    out = sym((V * lam[:, None, :]) @ np.swapaxes(V, 1, 2))
    return out[:, i, j].copy(), diag


def _matrix_token_dataset(mats, labels, kind, extra_meta=None) -> TokenDataset:
    tokens, diag = tokenize_matrices(mats, kind)
    keys = [trial_key(C) for C in mats]
    meta = {"dim": mats.shape[-1], "embedding": kind.value, "branch": diag}
    meta.update(extra_meta or {})
    labels = np.asarray(labels, dtype=np.int64)
    return TokenDataset(tokens[:, None, :], labels, keys, int(labels.max()) + 1, meta)


def tokenize(data_cfg: DataConfig) -> TokenDataset:
    kind = EmbeddingKind(data_cfg.embedding)
    if data_cfg.source == "synth":
        ds = synth_dataset(SynthSpec.from_dict(data_cfg.synth))
        return _matrix_token_dataset(ds.matrices, ds.labels, kind, {"anchors": ds.anchors})

    if data_cfg.source == "band_mixture":
        batch = synth_band_mixture(BandMixtureSpec.from_dict(data_cfg.band_mixture))
    else:
        packed = read_matrix_container(data_cfg.container_path)
        if "matrices" in packed:
            return _matrix_token_dataset(packed["matrices"],
                                         packed["labels"].astype(np.int64), kind)
        from .data import SegmentBatch, bandpass

        batch = SegmentBatch(packed["segments"], packed["labels"].astype(np.int64),
                             float(packed["sample_rate"]))

    keys = [trial_key(x) for x in batch.data]
    if not data_cfg.multiband:
        covs = np.stack([estimate_covariance(x) for x in batch.data])
        tokens, diag = tokenize_matrices(covs, kind)
        tokens = tokens[:, None, :]
    else:
        from .data import bandpass

        bands = analysis_bands(batch.sample_rate_hz)
        covs = np.stack([estimate_covariance(bandpass(x, b))
                         for x in batch.data for b in bands])
        flat_tokens, diag = tokenize_matrices(covs, kind)
        tokens = flat_tokens.reshape(batch.n_trials, len(bands), -1)
    labels = np.asarray(batch.labels, dtype=np.int64)
    meta = {"dim": batch.data.shape[1], "embedding": kind.value, "branch": diag}
    return TokenDataset(tokens, labels, keys, int(labels.max()) + 1, meta)


@dataclass
class RunReport:
    seed: int
    config: dict
    epochs: list          # row dicts, appended as training progresses
    final_test_accuracy: float
    best_val_epoch: int
    branch: dict

    def to_metrics_dict(self):
        """Everything except wall-clock timing (kept out for byte-stable files)."""
        rows = [{k: v for k, v in row.items() if k != "wall_clock_s"} for row in self.epochs]
        return {
            "seed": self.seed,
            "config": self.config,
            "epochs": rows,
            "final_test_accuracy": self.final_test_accuracy,
            "best_val_epoch": self.best_val_epoch,
            "branch_diagnostics": self.branch,
        }


def _evaluate(model, tokens, labels, batch_size=512):
    total_loss = 0.0
    correct = 0
    for start in range(0, len(labels), batch_size):
        sl = slice(start, start + batch_size)
        logits = model.forward(tokens[sl], training=False)
        loss = ad.cross_entropy(logits, labels[sl])
        total_loss += float(loss.data) * len(labels[sl])
        correct += int(np.sum(np.argmax(logits.data, axis=1) == labels[sl]))
    n = len(labels)
    return (total_loss / n if n else 0.0, correct / n if n else 0.0)


def run_single(exp: ExperimentConfig, token_ds: TokenDataset, seed: int,
               out_dir: str | None = None, attn_bias: np.ndarray | None = None) -> RunReport:
    """Train one model on pre-tokenised data with a fixed split and seed."""
    tokens, labels = token_ds.tokens, token_ds.labels
    n, T, D = tokens.shape
    train_idx, val_idx, test_idx = split_indices(token_ds.keys, exp.data.split_seed,
                                                 exp.data.ratios)
    model_cfg = ModelConfig(d_token=D, n_classes=token_ds.n_classes, seq_len=T,
                            **exp.model)
    model = SpdTokenTransformer(model_cfg, seed=seed)
    if model_cfg.attention == "geometric" and attn_bias is None:
        from .network import geometric_bias

        attn_bias = geometric_bias(tokens, model_cfg.token_kind)
    opt = Adam(model.params, lr=exp.lr)
    shuffle_rng = np.random.default_rng([seed, 1])
    dropout_rng = np.random.default_rng([seed, 2])

    config_echo = {
        "experiment": exp.to_dict(),
        "model": model_cfg.to_dict(),
        "n_trials": int(n),
        "split_sizes": [int(len(train_idx)), int(len(val_idx)), int(len(test_idx))],
    }
    rows = []
    best_val = -1.0
    best_epoch = 0
    best_state = model.state_arrays()
    for epoch in range(exp.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(train_idx)
        for start in range(0, len(order), exp.batch_size):
            sel = order[start:start + exp.batch_size]
            if len(sel) < 2 and model_cfg.use_bn_embed:
                continue  # a singleton batch has no batch statistics
            bias = attn_bias[sel] if attn_bias is not None else None
            logits = model.forward(tokens[sel], training=True,
                                   dropout_rng=dropout_rng, attn_bias=bias)
            loss = ad.cross_entropy(logits, labels[sel])
            opt.zero_grad()
            loss.backward()
            opt.step()
        wall = time.perf_counter() - t0
        train_loss, train_acc = _evaluate(model, tokens[train_idx], labels[train_idx])
        val_loss, val_acc = _evaluate(model, tokens[val_idx], labels[val_idx])
        test_loss, test_acc = _evaluate(model, tokens[test_idx], labels[test_idx])
        rows.append({
            "epoch": epoch,
            "train_loss": train_loss, "train_acc": train_acc,
            "val_loss": val_loss, "val_acc": val_acc,
            "test_loss": test_loss, "test_acc": test_acc,
            "wall_clock_s": wall,
        })
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            best_state = model.state_arrays()

    report = RunReport(
        seed=seed,
        config=config_echo,
        epochs=rows,
        final_test_accuracy=rows[-1]["test_acc"],
        best_val_epoch=best_epoch,
        branch=token_ds.meta.get("branch", {}),
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_run_dir(out_dir, report, model, best_state)
    return report


def write_run_dir(out_dir: str, report: RunReport, model, best_state):
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as f:
        json.dump(report.to_metrics_dict(), f, sort_keys=True, indent=2)
        f.write("\n")
    cols = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc",
            "test_loss", "test_acc", "wall_clock_s"]
    with open(os.path.join(out_dir, "epochs.csv"), "w", encoding="utf-8") as f:
        f.write(",".join(cols) + "\n")
        for row in report.epochs:
            f.write(",".join(repr(row[c]) if c != "epoch" else str(row[c]) for c in cols) + "\n")
    header = {"config": report.config, "seed": report.seed, "kind": "spdtok-checkpoint"}
    save_checkpoint(os.path.join(out_dir, "checkpoint.spdt"), header, model.state_arrays())
    save_checkpoint(os.path.join(out_dir, "checkpoint_best.spdt"), header, best_state)


def train_experiment(exp: ExperimentConfig, out_root: str | None = None):
    """Run every seed; returns (summary dict, list of RunReports)."""
    token_ds = tokenize(exp.data)
    attn_bias = None
    model_over = dict(exp.model)
    if model_over.get("attention") == "geometric":
        from .network import geometric_bias

        attn_bias = geometric_bias(token_ds.tokens,
                                   model_over.get("token_kind", exp.data.embedding))
        model_over.setdefault("token_kind", exp.data.embedding)
    reports = []
    for seed in exp.seeds:
        out_dir = os.path.join(out_root, f"seed{seed}") if out_root else None
        exp_seeded = ExperimentConfig(data=exp.data, model=model_over, lr=exp.lr,
                                      batch_size=exp.batch_size, epochs=exp.epochs,
                                      seeds=exp.seeds)
        reports.append(run_single(exp_seeded, token_ds, seed, out_dir, attn_bias))
    finals = [r.final_test_accuracy for r in reports]
    mean, std = mean_std(finals)
    wall = [row["wall_clock_s"] for r in reports for row in r.epochs]
    summary = {
        "final_test_accuracy_mean": mean,
        "final_test_accuracy_std": std,
        "per_seed": {str(r.seed): r.final_test_accuracy for r in reports},
        "time_per_epoch_s": float(np.mean(wall)) if wall else 0.0,
        "branch_diagnostics": token_ds.meta.get("branch", {}),
    }
    if out_root is not None:
        os.makedirs(out_root, exist_ok=True)
        with open(os.path.join(out_root, "summary.json"), "w", encoding="utf-8") as f:
            json.dump(summary, f, sort_keys=True, indent=2)
            f.write("\n")
    return summary, reports
