"""Tag decoders: time-distributed softmax and a linear-chain CRF."""
from __future__ import annotations

import numpy as np

from . import kernels
from . import numeric as nm
from .encoders import ConfigError
from .numeric.module import Module, uniform_param, zeros_param
from .numeric.rng import SeededRng

DECODERS = ("softmax", "crf")


class SoftmaxDecoder(Module):
    def __init__(self, h_out: int, n_labels: int, rng: SeededRng):
        self.w = uniform_param(rng, (h_out, n_labels))
        self.b = zeros_param(n_labels)

    def logits(self, H) -> nm.Tensor:
        return nm.as_tensor(H) @ self.w + self.b


class CrfParams(Module):
    """Emission projection plus transition, begin and end scores.

    ``trans[i, j]`` scores label i followed by label j.
    """

    def __init__(self, h_out: int, n_labels: int, rng: SeededRng):
        self.w = uniform_param(rng, (h_out, n_labels))
        self.b = zeros_param(n_labels)
        self.trans = uniform_param(rng, (n_labels, n_labels))
        self.start = zeros_param(n_labels)
        self.end = zeros_param(n_labels)

    def emissions(self, H) -> nm.Tensor:
        return nm.as_tensor(H) @ self.w + self.b


# ---------------------------------------------------------------- softmax


def softmax_decode(H, dec: SoftmaxDecoder, mask=None) -> nm.Tensor:
    """Per-position label distributions; rows at masked positions are left as computed."""
    return nm.softmax(dec.logits(H), axis=-1)


def softmax_sequence_logprob(probs, labels, mask=None) -> nm.Tensor:
    """Sum of log P(label_t) over unmasked positions of one sentence."""
    probs = nm.as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.ones(labels.shape, bool) if mask is None else np.asarray(mask, bool)
    picked = probs[np.arange(len(labels))[mask], labels[mask]]
    return nm.reduce_sum(nm.log(picked))


def sequence_logprob(logits, labels, mask) -> nm.Tensor:
    """Per-sentence masked log-likelihood from raw logits, shape (B,)."""
    logits = nm.as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    logp = nm.log_softmax(logits, axis=-1)
    B, m = labels.shape
    picked = logp[np.arange(B)[:, None], np.arange(m)[None, :], labels]
    return nm.reduce_sum(picked * mask.astype(np.float64), axis=1)


# ---------------------------------------------------------------- CRF


def _as_batch(scores, labels=None):
    scores = nm.as_tensor(scores)
    if scores.ndim == 2:
        scores = nm.reshape(scores, (1,) + scores.shape)
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)[None]
        return scores, labels, True
    return scores, labels, False


def _lengths(scores: nm.Tensor, lengths) -> np.ndarray:
    if lengths is None:
        return np.full(scores.shape[0], scores.shape[1], dtype=np.int64)
    return np.atleast_1d(np.asarray(lengths, dtype=np.int64))


def crf_score(scores, labels, crf: CrfParams, lengths=None) -> nm.Tensor:
    """b[y_1] + sum_t s_t[y_t] + sum_t T[y_t, y_{t+1}] + e[y_last] per sentence.

    Accepts one sentence (m, K) or a batch (B, m, K); positions at or past
    ``lengths`` are outside the chain.
    """
    scores, labels, single = _as_batch(scores, labels)
    labels = np.asarray(labels, dtype=np.int64)
    lengths = _lengths(scores, lengths)
    B, m, _ = scores.shape
    pos = np.arange(m)[None, :]
    live = (pos < lengths[:, None]).astype(np.float64)
    emit = scores[np.arange(B)[:, None], pos, labels]
    total = nm.reduce_sum(emit * live, axis=1)
    if m > 1:
        step = crf.trans[labels[:, :-1], labels[:, 1:]]
        total = total + nm.reduce_sum(step * live[:, 1:], axis=1)
    nonempty = (lengths > 0).astype(np.float64)
    last = labels[np.arange(B), np.maximum(lengths - 1, 0)]
    total = total + crf.start[labels[:, 0]] * nonempty + crf.end[last] * nonempty
    return total[0] if single else total


def crf_log_partition(scores, crf: CrfParams, lengths=None) -> nm.Tensor:
    """log of the sum of exp(crf_score) over every label sequence (forward algorithm)."""
    scores, _, single = _as_batch(scores)
    lengths = _lengths(scores, lengths)
    log_z, unary, pair = kernels.forward_backward(
        scores.data, lengths, crf.trans.data, crf.start.data, crf.end.data
    )
    B = len(lengths)
    first = unary[:, 0, :]
    last = unary[np.arange(B), np.maximum(lengths - 1, 0), :]

    def fn(g):
        g = np.asarray(g).reshape(B)
        return (
            g[:, None, None] * unary,
            np.einsum("b,bij->ij", g, pair),
            g @ first,
            g @ last,
        )

    out = nm.custom(log_z, (scores, crf.trans, crf.start, crf.end), fn)
    return out[0] if single else out


def crf_nll(scores, labels, crf: CrfParams, lengths=None) -> nm.Tensor:
    return crf_log_partition(scores, crf, lengths) - crf_score(scores, labels, crf, lengths)


def viterbi_decode(scores, crf: CrfParams, lengths=None):
    """Best labels and their score.  One sentence in, one (labels, score) out."""
    data = nm.as_tensor(scores).data
    single = data.ndim == 2
    if single:
        data = data[None]
    lengths = np.full(data.shape[0], data.shape[1], dtype=np.int64) if lengths is None else np.atleast_1d(lengths)
    paths, best = kernels.viterbi(data, lengths, crf.trans.data, crf.start.data, crf.end.data)
    if single:
        return paths[0], float(best[0])
    return [p[:n] for p, n in zip(paths, lengths)], best


# ---------------------------------------------------------------- dispatch


class TagDecoder(Module):
    def __init__(self, kind: str, h_out: int, n_labels: int, rng: SeededRng):
        if kind not in DECODERS:
            raise ConfigError(f"unknown decoder {kind!r}; expected one of {', '.join(DECODERS)}")
        self.kind = kind
        self.layer = CrfParams(h_out, n_labels, rng) if kind == "crf" else SoftmaxDecoder(h_out, n_labels, rng)

    def scores(self, H) -> nm.Tensor:
        if self.kind == "crf":
            return self.layer.emissions(H)
        return self.layer.logits(H)

    def nll(self, H, labels, mask) -> nm.Tensor:
        """Per-sentence negative log-likelihood, shape (B,)."""
        lengths = np.asarray(mask, bool).sum(axis=1)
        if self.kind == "crf":
            return crf_nll(self.scores(H), labels, self.layer, lengths)
        return -sequence_logprob(self.scores(H), labels, mask)


def decode(H, mask, dec: TagDecoder) -> list[np.ndarray]:
    """Label ids for the unmasked prefix of every sentence in the batch."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        mask = mask[None]
        H = nm.as_tensor(H).data[None]
    lengths = mask.sum(axis=1)
    with nm.no_grad():
        s = dec.scores(H).data
    if dec.kind == "crf":
        paths, _ = viterbi_decode(s, dec.layer, lengths)
        return paths
    best = s.argmax(axis=-1)
    return [best[i, :n] for i, n in enumerate(lengths)]
