"""Compare the compiled CRF kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per call for forward-backward and Viterbi on
a few batch shapes, and checks that both back ends agree.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from deidner.kernels import _crf_py, forward_backward, viterbi

try:
    from deidner.kernels import _crf_cy
except ImportError:
    _crf_cy = None

SHAPES = [(32, 20, 9), (32, 60, 15), (64, 100, 39)]  # (batch, length, labels)


def instance(batch, length, k, seed=0):
    gen = np.random.default_rng(seed)
    lengths = gen.integers(1, length + 1, batch)
    lengths[0] = length
    return (gen.normal(size=(batch, length, k)), lengths, gen.normal(size=(k, k)),
            gen.normal(size=k), gen.normal(size=k))


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _crf_cy is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'shape (B, m, K)':18}{'kernel':10}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for shape in SHAPES:
        args_ = instance(*shape)
        lz_py = forward_backward(*args_, impl=_crf_py)[0]
        lz_cy = forward_backward(*args_, impl=_crf_cy)[0]
        if not np.allclose(lz_py, lz_cy, rtol=1e-12):
            print("back ends disagree on log Z", file=sys.stderr)
            return 2
        if not np.array_equal(viterbi(*args_, impl=_crf_py)[0], viterbi(*args_, impl=_crf_cy)[0]):
            print("back ends disagree on Viterbi paths", file=sys.stderr)
            return 2
        for name, fn in (("fwd-bwd", forward_backward), ("viterbi", viterbi)):
            t_py = best(lambda: fn(*args_, impl=_crf_py), args.repeat)
            t_cy = best(lambda: fn(*args_, impl=_crf_cy), args.repeat)
            print(f"{str(shape):18}{name:10}{t_py * 1e3:>10.2f}{t_cy * 1e3:>11.2f}{t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
