"""Finite-difference gradient suites for every differentiable model component.

Each trial builds a small random instance (at most 4 tokens, inputs in
[-2, 2]), reduces the component's output to a scalar through fixed random
weights, and compares backward() against central differences.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import numeric as nm
from .decoders import CrfParams, SoftmaxDecoder, crf_nll, sequence_logprob
from .encoders import (
    BiLstmEncoder,
    LstmCellParams,
    TransformerEncoderLayer,
    attention,
    bilstm_encode,
    lstm_step,
    multi_head_attention,
)
from .numeric.rng import SeededRng

TOLERANCE = 1e-6
EPS = 1e-5


def _x(gen: np.random.Generator, *shape) -> nm.Tensor:
    return nm.Tensor(gen.uniform(-2.0, 2.0, shape), requires_grad=True)


def _spread(params, gen: np.random.Generator, scale: float = 0.5) -> None:
    for p in params:
        p.data = gen.uniform(-scale, scale, p.shape)


def _lstm(seed: int):
    gen = np.random.default_rng(seed)
    cell = LstmCellParams(3, 4, SeededRng(seed))
    _spread(cell.parameters(), gen)
    x, h, c = _x(gen, 3), _x(gen, 4), _x(gen, 4)
    wh, wc = gen.normal(size=4), gen.normal(size=4)

    def f():
        h_t, c_t = lstm_step(x, h, c, cell)
        return nm.reduce_sum(h_t * wh) + nm.reduce_sum(c_t * wc)

    return f, cell.parameters() + [x, h, c]


def _bilstm(seed: int):
    gen = np.random.default_rng(seed)
    enc = BiLstmEncoder(3, 2, SeededRng(seed))
    _spread(enc.parameters(), gen)
    X = _x(gen, 4, 3)
    mask = np.arange(4) < int(gen.integers(1, 5))
    w = gen.normal(size=(4, 4))
    return (lambda: nm.reduce_sum(bilstm_encode(X, mask, enc) * w)), enc.parameters() + [X]


def _attention(seed: int):
    gen = np.random.default_rng(seed)
    Q, K, V = _x(gen, 4, 3), _x(gen, 4, 3), _x(gen, 4, 2)
    mask = np.arange(4) < int(gen.integers(1, 5))
    w = gen.normal(size=(4, 2))
    return (lambda: nm.reduce_sum(attention(Q, K, V, mask) * w)), [Q, K, V]


def _mha(seed: int):
    gen = np.random.default_rng(seed)
    layer = TransformerEncoderLayer(4, 2, SeededRng(seed))
    attn = [layer.W_Q, layer.W_K, layer.W_V, layer.W_O]
    _spread(attn, gen)
    X = _x(gen, 3, 4)
    mask = np.arange(3) < int(gen.integers(1, 4))
    w = gen.normal(size=(3, 4))
    return (lambda: nm.reduce_sum(multi_head_attention(X, layer, mask) * w)), attn + [X]


def _softmax(seed: int):
    gen = np.random.default_rng(seed)
    dec = SoftmaxDecoder(3, 5, SeededRng(seed))
    _spread(dec.parameters(), gen)
    H = _x(gen, 2, 4, 3)
    labels = gen.integers(0, 5, size=(2, 4))
    mask = np.arange(4)[None, :] < gen.integers(1, 5, size=(2, 1))
    return (lambda: -nm.reduce_sum(sequence_logprob(dec.logits(H), labels, mask))), dec.parameters() + [H]


def _crf(seed: int):
    gen = np.random.default_rng(seed)
    crf = CrfParams(3, 3, SeededRng(seed))
    _spread([crf.trans, crf.start, crf.end], gen, scale=1.0)
    S = _x(gen, 4, 3)
    labels = gen.integers(0, 3, size=4)
    return (lambda: crf_nll(S, labels, crf)), [S, crf.trans, crf.start, crf.end]


COMPONENTS: dict[str, Callable] = {
    "lstm": _lstm,
    "bilstm": _bilstm,
    "attention": _attention,
    "mha": _mha,
    "softmax": _softmax,
    "crf": _crf,
}


def run_gradcheck(components=None, trials: int = 20, eps: float = EPS, seed: int = 0) -> dict[str, float]:
    """Worst relative error per component over ``trials`` random instances."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    names = list(COMPONENTS) if components in (None, "all") else list(components)
    worst = {}
    for name in names:
        build = COMPONENTS[name]
        err = 0.0
        for t in range(trials):
            f, params = build(seed + 7919 * t)
            err = max(err, nm.finite_difference_check(f, params, eps))
        worst[name] = err
    return worst
