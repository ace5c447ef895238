"""Independent reference implementations used as test oracles.

Everything here is written in plain Python, deliberately without the
package's vectorised code paths, so agreement means something.
"""
from __future__ import annotations

import itertools
import math
import random

# ---------------------------------------------------------------- CRF


def path_score(scores, labels, trans, start, end) -> float:
    s = start[labels[0]] + end[labels[-1]]
    for t, y in enumerate(labels):
        s += scores[t][y]
        if t:
            s += trans[labels[t - 1]][y]
    return float(s)


def brute_force_crf(scores, trans, start, end):
    """(log Z, lexicographically smallest argmax path, its score) by enumeration."""
    n, k = len(scores), len(scores[0])
    all_scores = []
    best, best_path = -math.inf, None
    for path in itertools.product(range(k), repeat=n):
        s = path_score(scores, path, trans, start, end)
        all_scores.append(s)
        if s > best:
            best, best_path = s, list(path)
    top = max(all_scores)
    log_z = top + math.log(math.fsum(math.exp(s - top) for s in all_scores))
    return log_z, best_path, best


# ---------------------------------------------------------------- BIO


def reference_bio_decode(labels, spans):
    """Spans (start, end, type) from BIO labels over token ``spans``.

    Repair first (an I-X that does not continue an X entity becomes B-X),
    then read off maximal B I* runs.
    """
    fixed = []
    prev_type = None
    for lab in labels:
        if lab.startswith("I-") and prev_type != lab[2:]:
            lab = "B-" + lab[2:]
        fixed.append(lab)
        prev_type = lab[2:] if lab != "O" else None
    out = []
    i = 0
    while i < len(fixed):
        if fixed[i].startswith("B-"):
            typ = fixed[i][2:]
            j = i + 1
            while j < len(fixed) and fixed[j] == "I-" + typ:
                j += 1
            out.append((spans[i][0], spans[j - 1][1], typ))
            i = j
        else:
            i += 1
    return out


# ---------------------------------------------------------------- text fuzzing

_PIECES = [
    "Mr.", "Dr.", "Mrs.", "vs.", "e.g.", "SamLee", "70yo", "abc", "XYZ", "x1y2", "O'Neil",
    "12/03/2013", "555-1234", "a@b.org", "(note)", "...", "!?", "McDonald", "état", "naïve",
    "中文", "a.", "b?", "c!", "--", "#42", "3.5mg", "iPhone", "DNA", "q8h",
]
_SEPS = [" ", " ", " ", "  ", "\n", "\t", " \n ", ""]


def fuzz_text(rng: random.Random, max_pieces: int = 40) -> str:
    parts = []
    for _ in range(rng.randint(0, max_pieces)):
        if rng.random() < 0.3:
            parts.append("".join(rng.choice("aZ9.-/ é") for _ in range(rng.randint(1, 6))))
        else:
            parts.append(rng.choice(_PIECES))
        parts.append(rng.choice(_SEPS))
    return "".join(parts)


def reconstruct(text_len: int, tokens) -> list:
    """Characters at token positions, ``None`` elsewhere."""
    out = [None] * text_len
    for t in tokens:
        for k, c in enumerate(t.text):
            out[t.start_char + k] = c
    return out
