"""CRF dynamic-programming kernels.

The compiled extension is used when it was built; otherwise, or when
``DEIDNER_PURE_PYTHON=1`` is set, the numpy implementation is used.  Both
expose ``forward_backward`` and ``viterbi`` with identical contracts.
"""
from __future__ import annotations

import os

import numpy as np

from . import _crf_py

if os.environ.get("DEIDNER_PURE_PYTHON") == "1":
    _impl = _crf_py
    BACKEND = "python"
else:
    try:
        from . import _crf_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _crf_py
        BACKEND = "python"


def _prep(scores, lengths, trans, start, end):
    return (
        np.ascontiguousarray(scores, dtype=np.float64),
        np.ascontiguousarray(lengths, dtype=np.int64),
        np.ascontiguousarray(trans, dtype=np.float64),
        np.ascontiguousarray(start, dtype=np.float64),
        np.ascontiguousarray(end, dtype=np.float64),
    )


def forward_backward(scores, lengths, trans, start, end, impl=None):
    return (impl or _impl).forward_backward(*_prep(scores, lengths, trans, start, end))


def viterbi(scores, lengths, trans, start, end, impl=None):
    return (impl or _impl).viterbi(*_prep(scores, lengths, trans, start, end))
