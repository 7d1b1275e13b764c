"""Transformer classifier over geometric tokens.

Pipeline (identical for every embedding): linear projection of the token to
d_model, additive learnable positional table, optional embedding-space batch
normalisation, a stack of post-norm encoder blocks (multi-head self-attention,
feed-forward, residuals, layer norm), global average pooling over the token
axis, and a linear head.

The optional geometric attention mode mixes the scaled dot-product score with
a transport-distance score computed between the SPD matrices reconstructed
from the tokens:

    score = (1 - alpha) * q.k / sqrt(d_k) + alpha * (-d_bw(C_i, C_j))

The distance term depends only on the input tokens, never on parameters, so
it enters the graph as a constant bias; alpha = 0 reproduces the standard
path bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .embedding import EmbeddingKind, unvech
from .errors import DegenerateBatch, InvalidSpec, NonFinite, ShapeMismatch
from . import geometry, spdcore

ATTENTION_MODES = ("standard", "geometric")


@dataclass
class ModelConfig:
    d_token: int
    n_classes: int
    d_model: int = 128
    layers: int = 6
    heads: int = 8
    d_ff: int = 256
    dropout: float = 0.1
    seq_len: int = 1
    use_bn_embed: bool = True
    attention: str = "standard"
    geo_alpha: float = 0.5
    token_kind: str = EmbeddingKind.BWSPD.value
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise InvalidSpec(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidSpec(f"dropout {self.dropout} outside [0, 1)")
        if self.attention not in ATTENTION_MODES:
            raise InvalidSpec(f"attention must be one of {ATTENTION_MODES}")
        if self.seq_len < 1 or self.layers < 1 or self.n_classes < 2:
            raise InvalidSpec("seq_len/layers must be >= 1 and n_classes >= 2")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def scaled_down(d_token: int, n_classes: int, **overrides) -> ModelConfig:
    """Small-capacity variant for low-dimensional tokens."""
    base = dict(d_token=d_token, n_classes=n_classes, d_model=64, layers=4, heads=4, d_ff=128)
    base.update(overrides)
    return ModelConfig(**base)


def _glorot(rng, fan_in, fan_out):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, (fan_in, fan_out))


class SpdTokenTransformer:
    """The shared classifier; parameters live in an ordered name -> Tensor dict."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        p = {}
        p["proj.W"] = _glorot(rng, c.d_token, c.d_model)
        p["proj.b"] = np.zeros(c.d_model)
        p["pos"] = rng.normal(0.0, 0.02, (c.seq_len, c.d_model))
        if c.use_bn_embed:
            p["bn.gamma"] = np.ones(c.d_model)
            p["bn.beta"] = np.zeros(c.d_model)
        for i in range(c.layers):
            for name in ("q", "k", "v", "o"):
                p[f"enc{i}.attn.W{name}"] = _glorot(rng, c.d_model, c.d_model)
                p[f"enc{i}.attn.b{name}"] = np.zeros(c.d_model)
            p[f"enc{i}.ln1.gamma"] = np.ones(c.d_model)
            p[f"enc{i}.ln1.beta"] = np.zeros(c.d_model)
            p[f"enc{i}.ffn.W1"] = _glorot(rng, c.d_model, c.d_ff)
            p[f"enc{i}.ffn.b1"] = np.zeros(c.d_ff)
            p[f"enc{i}.ffn.W2"] = _glorot(rng, c.d_ff, c.d_model)
            p[f"enc{i}.ffn.b2"] = np.zeros(c.d_model)
            p[f"enc{i}.ln2.gamma"] = np.ones(c.d_model)
            p[f"enc{i}.ln2.beta"] = np.zeros(c.d_model)
        p["head.W"] = _glorot(rng, c.d_model, c.n_classes)
        p["head.b"] = np.zeros(c.n_classes)
        self.params = {name: Tensor(v, requires_grad=True) for name, v in p.items()}
        self.running_mean = np.zeros(c.d_model)
        self.running_var = np.ones(c.d_model)

    # -- parameter bookkeeping -------------------------------------------------

    def parameter_counts(self) -> dict:
        """Per-component trainable sizes.

        'core' counts projection + encoder + head, the convention used for the
        published totals; 'total' additionally counts the positional table and
        the embedding-norm affine parameters.
        """
        sizes = {name: t.data.size for name, t in self.params.items()}
        proj = sum(v for k, v in sizes.items() if k.startswith("proj."))
        pos = sizes.get("pos", 0)
        bn = sum(v for k, v in sizes.items() if k.startswith("bn."))
        enc = sum(v for k, v in sizes.items() if k.startswith("enc"))
        head = sum(v for k, v in sizes.items() if k.startswith("head."))
        return {
            "projection": proj,
            "positional": pos,
            "bn_embed": bn,
            "encoder": enc,
            "head": head,
            "core": proj + enc + head,
            "total": sum(sizes.values()),
        }

    def state_arrays(self) -> dict:
        """Everything a checkpoint needs: parameters plus running statistics."""
        out = {name: t.data.copy() for name, t in self.params.items()}
        out["bn.running_mean"] = self.running_mean.copy()
        out["bn.running_var"] = self.running_var.copy()
        return out

    def load_state_arrays(self, arrays: dict):
        for name, t in self.params.items():
            if name not in arrays:
                raise ShapeMismatch(f"checkpoint missing parameter {name}")
            if arrays[name].shape != t.data.shape:
                raise ShapeMismatch(f"checkpoint shape {arrays[name].shape} for {name}")
            t.data = arrays[name].copy()
        self.running_mean = arrays["bn.running_mean"].copy()
        self.running_var = arrays["bn.running_var"].copy()

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    # -- forward ---------------------------------------------------------------

    def forward(self, tokens, training: bool = False, attn_bias=None,
                dropout_rng: np.random.Generator | None = None) -> Tensor:
        """Logits for a (batch, T, d_token) array (a (batch, d_token) array is
        treated as T = 1). `attn_bias` optionally supplies precomputed
        (batch, T, T) transport distances for geometric attention."""
        c = self.config
        x = tokens if isinstance(tokens, Tensor) else Tensor(tokens)
        if x.data.ndim == 2:
            x = ad.reshape(x, (x.data.shape[0], 1, x.data.shape[1]))
        if x.data.ndim != 3 or x.data.shape[1] != c.seq_len or x.data.shape[2] != c.d_token:
            raise ShapeMismatch(
                f"tokens shape {x.data.shape}, expected (batch, {c.seq_len}, {c.d_token})")
        if training and c.dropout > 0.0 and dropout_rng is None:
            raise InvalidSpec("training with dropout needs a dropout_rng")
        batch = x.data.shape[0]

        if c.attention == "geometric" and attn_bias is None:
            attn_bias = geometric_bias(x.data, c.token_kind)

        p = self.params
        h = ad.linear(x, p["proj.W"], p["proj.b"])
        h = ad.add(h, p["pos"])
        if c.use_bn_embed:
            if training:
                if batch * c.seq_len < 2:
                    raise DegenerateBatch("need batch * T >= 2 in train mode")
                h, batch_mean, batch_var = ad.batch_norm_train(h, p["bn.gamma"], p["bn.beta"], c.bn_eps)
                m = c.bn_momentum
                self.running_mean = (1.0 - m) * self.running_mean + m * batch_mean
                self.running_var = (1.0 - m) * self.running_var + m * batch_var
            else:
                h = ad.batch_norm_eval(h, p["bn.gamma"], p["bn.beta"],
                                       self.running_mean, self.running_var, c.bn_eps)
        if training and c.dropout > 0.0:
            h = ad.dropout(h, c.dropout, dropout_rng)

        for i in range(c.layers):
            attn = self._attention(h, i, attn_bias)
            if training and c.dropout > 0.0:
                attn = ad.dropout(attn, c.dropout, dropout_rng)
            h = ad.layer_norm(ad.add(h, attn), p[f"enc{i}.ln1.gamma"], p[f"enc{i}.ln1.beta"])
            ff = ad.linear(ad.relu(ad.linear(h, p[f"enc{i}.ffn.W1"], p[f"enc{i}.ffn.b1"])),
                           p[f"enc{i}.ffn.W2"], p[f"enc{i}.ffn.b2"])
            if training and c.dropout > 0.0:
                ff = ad.dropout(ff, c.dropout, dropout_rng)
            h = ad.layer_norm(ad.add(h, ff), p[f"enc{i}.ln2.gamma"], p[f"enc{i}.ln2.beta"])
            if not np.all(np.isfinite(h.data)):
                raise NonFinite(f"non-finite activations after encoder block {i}")

        pooled = ad.mean_over_axis(h, axis=1)
        logits = ad.linear(pooled, p["head.W"], p["head.b"])
        if not np.all(np.isfinite(logits.data)):
            raise NonFinite("non-finite logits")
        return logits

    def _attention(self, h: Tensor, i: int, attn_bias) -> Tensor:
        c = self.config
        p = self.params
        batch, T, _ = h.data.shape
        dk = c.d_model // c.heads

        def heads(t):
            t = ad.reshape(t, (batch, T, c.heads, dk))
            return ad.transpose(t, (0, 2, 1, 3))

        q = heads(ad.linear(h, p[f"enc{i}.attn.Wq"], p[f"enc{i}.attn.bq"]))
        k = heads(ad.linear(h, p[f"enc{i}.attn.Wk"], p[f"enc{i}.attn.bk"]))
        v = heads(ad.linear(h, p[f"enc{i}.attn.Wv"], p[f"enc{i}.attn.bv"]))
        dot = ad.bmm(q, k, transpose_b=True)
        if c.attention == "geometric":
            scores = ad.scale(dot, (1.0 - c.geo_alpha) / math.sqrt(dk))
            bias = Tensor(-c.geo_alpha * attn_bias[:, None, :, :])
            scores = ad.add(scores, bias)
        else:
            scores = ad.scale(dot, 1.0 / math.sqrt(dk))
        weights = ad.softmax(scores, axis=-1)
        ctx = ad.bmm(weights, v)
        ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (batch, T, c.d_model))
        return ad.linear(ctx, p[f"enc{i}.attn.Wo"], p[f"enc{i}.attn.bo"])


def geometric_bias(tokens: np.ndarray, kind) -> np.ndarray:
    """(batch, T, T) matrix of transport distances between the SPD matrices
    reconstructed from each sample's tokens; zero on the diagonal."""
    kind = EmbeddingKind(kind)
    tokens = np.asarray(tokens, dtype=np.float64)
    batch, T, D = tokens.shape
    d = unvech(tokens[0, 0]).shape[0]
    i, j = np.triu_indices(d)
    S = np.zeros((batch * T, d, d))
    flat = tokens.reshape(batch * T, D)
    S[:, i, j] = flat
    S[:, j, i] = flat
    if kind is EmbeddingKind.BWSPD:
        Cs = spdcore.sym(S @ S)
    elif kind is EmbeddingKind.LOG_EUCLIDEAN:
        Cs = spdcore.spectral_apply_batch(S, spdcore.EXP, clip=-np.inf)
    else:
        Cs = spdcore.spectral_apply_batch(S, spdcore.IDENTITY, spdcore.CLIP_FLOOR)
    Cs = Cs.reshape(batch, T, d, d)
    bias = np.zeros((batch, T, T))
    for a in range(T):
        for b in range(a + 1, T):
            dist = geometry.bw_distance_pairs(Cs[:, a], Cs[:, b])
            bias[:, a, b] = dist
            bias[:, b, a] = dist
    return bias


def predict_classes(model: SpdTokenTransformer, tokens: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax labels in eval mode, streamed in batches."""
    out = []
    for start in range(0, tokens.shape[0], batch_size):
        logits = model.forward(tokens[start:start + batch_size], training=False)
        out.append(np.argmax(logits.data, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def accuracy(model: SpdTokenTransformer, tokens: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predict_classes(model, tokens) == labels))
