"""Pure numpy linear-chain CRF kernels (fallback for the compiled module).

Shapes: ``scores`` (B, m, K), ``lengths`` (B,), ``trans`` (K, K) with
``trans[i, j]`` scoring the step i -> j, ``start`` and ``end`` (K,).
Only the first ``lengths[b]`` positions of row b take part in the chain.
"""
from __future__ import annotations

import numpy as np


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    mx = x.max(axis=axis, keepdims=True)
    return np.squeeze(np.log(np.exp(x - mx).sum(axis=axis, keepdims=True)) + mx, axis=axis)


def forward_backward(scores, lengths, trans, start, end):
    """Log-partition per sequence plus the marginals its gradient needs.

    Returns ``(log_z, unary, pair)`` where ``unary[b, t, j] = P(y_t = j)`` and
    ``pair[b, i, j]`` sums ``P(y_t = i, y_{t+1} = j)`` over the chain.
    """
    B, m, K = scores.shape
    log_z = np.zeros(B)
    unary = np.zeros((B, m, K))
    pair = np.zeros((B, K, K))
    for b in range(B):
        n = int(lengths[b])
        if n == 0:
            continue
        s = scores[b, :n]
        alpha = np.empty((n, K))
        beta = np.empty((n, K))
        alpha[0] = start + s[0]
        for t in range(1, n):
            alpha[t] = _lse(alpha[t - 1][:, None] + trans, 0) + s[t]
        beta[n - 1] = end
        for t in range(n - 2, -1, -1):
            beta[t] = _lse(trans + (s[t + 1] + beta[t + 1])[None, :], 1)
        z = _lse(alpha[n - 1] + end, 0)
        log_z[b] = z
        unary[b, :n] = np.exp(alpha + beta - z)
        if n > 1:
            pw = alpha[:-1, :, None] + trans[None] + (s[1:] + beta[1:])[:, None, :] - z
            pair[b] = np.exp(pw).sum(axis=0)
    return log_z, unary, pair


def viterbi(scores, lengths, trans, start, end):
    """Best label path per sequence; ties go to the lexicographically smallest path.

    A max-product pass runs right to left, then labels are chosen left to right
    taking the lowest id among maximisers.  Padded positions hold 0.
    """
    B, m, K = scores.shape
    paths = np.zeros((B, m), dtype=np.int64)
    best = np.zeros(B)
    for b in range(B):
        n = int(lengths[b])
        if n == 0:
            continue
        s = scores[b, :n]
        suffix = np.empty((n, K))
        suffix[n - 1] = end + s[n - 1]
        for t in range(n - 2, -1, -1):
            suffix[t] = s[t] + (trans + suffix[t + 1][None, :]).max(axis=1)
        cand = start + suffix[0]
        y = int(np.argmax(cand))
        best[b] = cand[y]
        paths[b, 0] = y
        for t in range(1, n):
            y = int(np.argmax(trans[y] + suffix[t]))
            paths[b, t] = y
    return paths, best
