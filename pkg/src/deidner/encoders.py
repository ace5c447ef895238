"""Context encoders: BiLSTM, transformer encoder, and the two stacked."""
from __future__ import annotations

import math

import numpy as np

from . import numeric as nm
from .numeric.module import Module, uniform_param, zeros_param
from .numeric.rng import SeededRng

ENCODERS = ("bilstm", "transformer", "transformer-bilstm")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- LSTM


class LstmCellParams(Module):
    """One LSTM direction.

    ``W`` acts on ``[x_t ; h_{t-1}]`` and produces the input, forget and output
    gates followed by the candidate, in that column order.  The forget-gate bias
    starts at 1.
    """

    def __init__(self, k: int, h: int, rng: SeededRng):
        self.k, self.h = k, h
        self.W = uniform_param(rng, (k + h, 4 * h))
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        self.b = nm.Parameter(bias)


def _gates(z: nm.Tensor, c_prev, h: int):
    sig = nm.sigmoid(z[..., : 3 * h])
    i, f, o = sig[..., :h], sig[..., h : 2 * h], sig[..., 2 * h :]
    g = nm.tanh(z[..., 3 * h :])
    c = f * c_prev + i * g
    return o * nm.tanh(c), c


def lstm_step(x_t, h_prev, c_prev, params: LstmCellParams):
    x_t, h_prev, c_prev = nm.as_tensor(x_t), nm.as_tensor(h_prev), nm.as_tensor(c_prev)
    if x_t.shape[-1] != params.k or h_prev.shape[-1] != params.h or c_prev.shape[-1] != params.h:
        raise nm.ShapeError(
            f"lstm_step: input {x_t.shape} / state {h_prev.shape}, {c_prev.shape} "
            f"do not fit a cell with k={params.k}, h={params.h}"
        )
    z = nm.concat([x_t, h_prev], axis=-1) @ params.W + params.b
    return _gates(z, c_prev, params.h)


def run_lstm(X: nm.Tensor, mask: np.ndarray, cell: LstmCellParams, reverse: bool = False):
    """Run one direction over a (B, m, k) batch.

    Returns the (B, m, h) outputs, zero at masked positions, and the final hidden
    state: the state at the last real position for a forward pass, at position 0
    for a reverse pass.  Masked positions leave the recurrent state untouched.
    """
    B, m, _ = X.shape
    h = cell.h
    k = cell.k
    XW = X @ cell.W[:k] + cell.b
    Wh = cell.W[k:]
    hs = nm.Tensor(np.zeros((B, h)))
    cs = nm.Tensor(np.zeros((B, h)))
    maskf = mask.astype(np.float64)
    outs = [None] * m
    order = range(m - 1, -1, -1) if reverse else range(m)
    for t in order:
        mt = maskf[:, t : t + 1]
        z = XW[:, t] + hs @ Wh
        h_new, c_new = _gates(z, cs, h)
        if mt.all():
            hs, cs = h_new, c_new
            outs[t] = h_new
        else:
            keep = 1.0 - mt
            hs = h_new * mt + hs * keep
            cs = c_new * mt + cs * keep
            outs[t] = h_new * mt
    return nm.stack(outs, axis=1), hs


class BiLstmEncoder(Module):
    def __init__(self, k: int, h: int, rng: SeededRng):
        self.h = h
        self.fwd = LstmCellParams(k, h, rng)
        self.bwd = LstmCellParams(k, h, rng)

    @property
    def out_width(self) -> int:
        return 2 * self.h


def bilstm_encode(X, mask, enc: BiLstmEncoder) -> nm.Tensor:
    X, mask, single = _batched(X, mask)
    f, _ = run_lstm(X, mask, enc.fwd)
    b, _ = run_lstm(X, mask, enc.bwd, reverse=True)
    out = nm.concat([f, b], axis=-1)
    return out[0] if single else out


def _batched(X, mask):
    X = nm.as_tensor(X)
    if X.ndim == 2:
        m = X.shape[0]
        mask = np.ones(m, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        return nm.reshape(X, (1,) + X.shape), mask[None], True
    mask = np.ones(X.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    return X, mask, False


# ---------------------------------------------------------------- attention


def attention(Q, K, V, mask=None, return_weights: bool = False):
    """softmax(Q K^T / sqrt(d_k)) V with masked keys removed.

    ``mask`` marks real key positions and broadcasts against the score matrix's
    key axis, e.g. shape (m,) or (B, 1, m) for (B, H, m, m) scores.
    """
    Q, K, V = nm.as_tensor(Q), nm.as_tensor(K), nm.as_tensor(V)
    d_k = Q.shape[-1]
    if d_k == 0:
        raise nm.ShapeError("attention: d_k must be positive")
    if K.shape[-1] != d_k or K.shape[-2] != V.shape[-2]:
        raise nm.ShapeError(f"attention: Q {Q.shape}, K {K.shape}, V {V.shape} do not fit")
    scores = (Q @ nm.transpose(K, _swap_last(K.ndim))) * (1.0 / math.sqrt(d_k))
    if mask is not None:
        keymask = np.asarray(mask, dtype=bool)
        scores = nm.masked_fill(scores, ~np.expand_dims(keymask, -2), -np.inf)
    weights = nm.softmax(scores, axis=-1)
    out = weights @ V
    return (out, weights) if return_weights else out


def _swap_last(ndim: int) -> tuple[int, ...]:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


class PositionalEncoding:
    """Fixed sinusoids: even columns sin(pos / 10000^(2i/k)), odd columns cos."""

    def __init__(self, m_max: int, k: int):
        self.m_max, self.k = m_max, k
        pos = np.arange(m_max)[:, None]
        two_i = np.arange(0, k, 2)[None, :]
        angle = pos / np.power(10000.0, two_i / k)
        pe = np.zeros((m_max, k))
        pe[:, 0::2] = np.sin(angle)
        pe[:, 1::2] = np.cos(angle[:, : k // 2])
        self.table = pe


class TransformerEncoderLayer(Module):
    """Post-norm encoder block: x = LN(x + MHA(x)); x = LN(x + FFN(x))."""

    def __init__(self, k: int, heads: int, rng: SeededRng, ff_mult: int = 4):
        if heads < 1 or k % heads:
            raise ConfigError(f"model width {k} is not divisible by {heads} heads")
        self.k, self.heads, self.d_k = k, heads, k // heads
        self.W_Q = uniform_param(rng, (k, k))
        self.W_K = uniform_param(rng, (k, k))
        self.W_V = uniform_param(rng, (k, k))
        self.W_O = uniform_param(rng, (k, k))
        self.ln1_gain = nm.Parameter(np.ones(k))
        self.ln1_bias = zeros_param(k)
        self.ff_W1 = uniform_param(rng, (k, ff_mult * k))
        self.ff_b1 = zeros_param(ff_mult * k)
        self.ff_W2 = uniform_param(rng, (ff_mult * k, k))
        self.ff_b2 = zeros_param(k)
        self.ln2_gain = nm.Parameter(np.ones(k))
        self.ln2_bias = zeros_param(k)


def multi_head_attention(X, layer: TransformerEncoderLayer, mask=None) -> nm.Tensor:
    X, mask, single = _batched(X, mask)
    B, m, k = X.shape
    if k != layer.k:
        raise nm.ShapeError(f"multi_head_attention: input width {k} != layer width {layer.k}")
    H, d_k = layer.heads, layer.d_k

    def split(t):
        return nm.transpose(nm.reshape(t, (B, m, H, d_k)), (0, 2, 1, 3))

    q, kk, v = split(X @ layer.W_Q), split(X @ layer.W_K), split(X @ layer.W_V)
    heads = attention(q, kk, v, mask[:, None, :])
    merged = nm.reshape(nm.transpose(heads, (0, 2, 1, 3)), (B, m, k))
    out = merged @ layer.W_O
    return out[0] if single else out


def encoder_block(X, mask, layer: TransformerEncoderLayer, dropout: float = 0.0, rng=None) -> nm.Tensor:
    a = nm.dropout(multi_head_attention(X, layer, mask), dropout, rng)
    x = nm.layer_norm(X + a, layer.ln1_gain, layer.ln1_bias)
    ff = nm.relu(x @ layer.ff_W1 + layer.ff_b1) @ layer.ff_W2 + layer.ff_b2
    ff = nm.dropout(ff, dropout, rng)
    return nm.layer_norm(x + ff, layer.ln2_gain, layer.ln2_bias)


def transformer_encode(X, mask, layers, pe: PositionalEncoding | None, dropout: float = 0.0, rng=None):
    X, mask, single = _batched(X, mask)
    m = X.shape[1]
    if pe is not None:
        if m > pe.m_max:
            raise ValueError(f"sequence length {m} exceeds positional table size {pe.m_max}")
        X = X + pe.table[:m]
    for layer in layers:
        X = encoder_block(X, mask, layer, dropout, rng)
    out = X * mask[..., None].astype(np.float64)
    return out[0] if single else out


class TransformerEncoder(Module):
    def __init__(self, k: int, heads: int, n_layers: int, m_max: int, rng: SeededRng, ff_mult: int = 4):
        self.k = k
        self.layers = [TransformerEncoderLayer(k, heads, rng, ff_mult) for _ in range(n_layers)]
        self.pe = PositionalEncoding(m_max, k)

    @property
    def out_width(self) -> int:
        return self.k


class ContextEncoder(Module):
    """Dispatches one of the three encoder stacks by name."""

    def __init__(self, kind: str, k_in: int, rng: SeededRng, h: int = 64, heads: int = 4,
                 n_layers: int = 2, m_max: int = 512, ff_mult: int = 4, dropout: float = 0.0):
        if kind not in ENCODERS:
            raise ConfigError(f"unknown encoder {kind!r}; expected one of {', '.join(ENCODERS)}")
        self.kind = kind
        self.dropout = dropout
        self.transformer = None
        self.bilstm = None
        width = k_in
        if kind in ("transformer", "transformer-bilstm"):
            self.transformer = TransformerEncoder(k_in, heads, n_layers, m_max, rng, ff_mult)
        if kind in ("bilstm", "transformer-bilstm"):
            self.bilstm = BiLstmEncoder(k_in, h, rng)
            width = 2 * h
        self.out_width = width


def encode(X, mask, enc: ContextEncoder, rng=None, use_transformer: bool = True) -> nm.Tensor:
    """Run the configured stack; ``use_transformer=False`` skips the transformer (ablation)."""
    out = X
    if enc.transformer is not None and use_transformer:
        out = transformer_encode(out, mask, enc.transformer.layers, enc.transformer.pe, enc.dropout, rng)
    if enc.bilstm is not None:
        out = bilstm_encode(out, mask, enc.bilstm)
    return out
