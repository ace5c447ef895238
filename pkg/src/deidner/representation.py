"""Token-level embeddings, optionally concatenated with a 50-d character encoding."""
from __future__ import annotations

import numpy as np

from . import numeric as nm
from .corpus import PAD_ID
from .encoders import LstmCellParams, run_lstm
from .numeric import checkpoint
from .numeric.module import Module, uniform_param, zeros_param
from .numeric.rng import SeededRng

CHAR_DIM = 50


class TokenEmbeddingTable(Module):
    def __init__(self, vocab_size: int, d: int, rng: SeededRng):
        self.d = d
        table = rng.uniform(-0.1, 0.1, (vocab_size, d))
        table[PAD_ID] = 0.0
        self.table = nm.Parameter(table)


class CharEncoder(Module):
    """Character BiLSTM; final forward and backward states are projected to 50 dims."""

    def __init__(self, n_chars: int, rng: SeededRng, d_char: int = 16, hidden: int = 25,
                 frozen: bool = False):
        chars = rng.uniform(-0.1, 0.1, (n_chars, d_char))
        chars[PAD_ID] = 0.0
        self.chars = nm.Parameter(chars)
        self.fwd = LstmCellParams(d_char, hidden, rng)
        self.bwd = LstmCellParams(d_char, hidden, rng)
        self.proj = uniform_param(rng, (2 * hidden, CHAR_DIM))
        self.proj_b = zeros_param(CHAR_DIM)
        self.set_frozen(frozen)

    def set_frozen(self, frozen: bool) -> None:
        self.frozen = frozen
        for p in self.parameters():
            p.frozen = frozen


def export_char_weights(enc: CharEncoder, path, char_to_id: dict[str, int]) -> None:
    """Write the character encoder alone, with its alphabet, as a checkpoint."""
    alphabet = sorted(char_to_id, key=char_to_id.__getitem__)
    arrays = {n: p.data for n, p in enc.named_parameters()}
    checkpoint.save(path, arrays, {"kind": "char-encoder", "alphabet": alphabet})


def import_char_weights(enc: CharEncoder, path, char_to_id: dict[str, int]) -> int:
    """Load externally trained character-encoder weights.

    Character-table rows are matched by character, so the external alphabet
    may differ from ours; characters it lacks keep their current rows.  All
    other arrays must match in shape.  Returns the number of rows copied.
    """
    arrays, meta = checkpoint.load(path)
    if meta.get("kind") != "char-encoder":
        raise checkpoint.CheckpointError(f"{path} does not hold character-encoder weights")
    params = dict(enc.named_parameters())
    if set(arrays) != set(params):
        raise checkpoint.CheckpointError(f"char weights mismatch on {sorted(set(arrays) ^ set(params))}")
    for name, p in params.items():
        if name != "chars" and arrays[name].shape != p.shape:
            raise checkpoint.CheckpointError(f"{name}: shape {arrays[name].shape} != {p.shape}")
    if arrays["chars"].shape[1] != enc.chars.shape[1]:
        raise checkpoint.CheckpointError("character embedding width differs")
    ext = {c: i for i, c in enumerate(meta["alphabet"])}
    table = enc.chars.data.copy()
    copied = 0
    for c, i in char_to_id.items():
        if i != PAD_ID and c in ext:
            table[i] = arrays["chars"][ext[c]]
            copied += 1
    enc.chars.data = table
    for name, p in params.items():
        if name != "chars":
            p.data = arrays[name].copy()
    return copied


def embed_tokens(token_ids, table: TokenEmbeddingTable) -> nm.Tensor:
    ids = np.asarray(token_ids, dtype=np.int64)
    out = nm.gather(table.table, ids)
    # PAD rows stay exactly zero and send no gradient to the table
    return out * (ids != PAD_ID)[..., None].astype(np.float64)


def embed_chars(char_ids, enc: CharEncoder) -> nm.Tensor:
    ids = np.asarray(char_ids, dtype=np.int64)
    lead = ids.shape[:-1]
    flat = ids.reshape(-1, ids.shape[-1])
    cmask = flat != PAD_ID
    width = int(cmask.sum(axis=1).max()) if flat.size else 0
    has_chars = cmask.any(axis=1)
    if width == 0:
        return nm.Tensor(np.zeros(lead + (CHAR_DIM,)))
    flat, cmask = flat[:, :width], cmask[:, :width]
    X = nm.gather(enc.chars, flat)
    _, h_fwd = run_lstm(X, cmask, enc.fwd)
    _, h_bwd = run_lstm(X, cmask, enc.bwd, reverse=True)
    out = nm.concat([h_fwd, h_bwd], axis=-1) @ enc.proj + enc.proj_b
    out = out * has_chars[:, None].astype(np.float64)
    return nm.reshape(out, lead + (CHAR_DIM,))


class Representation(Module):
    def __init__(self, vocab_size: int, n_chars: int, rng: SeededRng, d: int = 64,
                 use_chars: bool = False, d_char: int = 16, char_hidden: int = 25,
                 freeze_chars: bool = False):
        self.tokens = TokenEmbeddingTable(vocab_size, d, rng)
        self.chars = CharEncoder(n_chars, rng, d_char, char_hidden, freeze_chars) if use_chars else None

    @property
    def width(self) -> int:
        return self.tokens.d + (CHAR_DIM if self.chars is not None else 0)


def represent(token_ids, char_ids, rep: Representation) -> nm.Tensor:
    tok = embed_tokens(token_ids, rep.tokens)
    if rep.chars is None:
        return tok
    return nm.concat([tok, embed_chars(char_ids, rep.chars)], axis=-1)
