import numpy as np
import pytest

from deidner import numeric as nm
from deidner.corpus import PAD_ID, UNK_ID
from deidner.numeric.checkpoint import CheckpointError
from deidner.numeric.rng import SeededRng
from deidner.representation import (
    CHAR_DIM,
    CharEncoder,
    Representation,
    TokenEmbeddingTable,
    embed_chars,
    embed_tokens,
    export_char_weights,
    import_char_weights,
    represent,
)
from deidner.training import AdamState, TrainConfig, adam_step


def char_ids(words, alphabet, c_max=6):
    out = np.zeros((len(words), c_max), dtype=np.int64)
    for i, w in enumerate(words):
        for j, c in enumerate(w[:c_max]):
            out[i, j] = alphabet[c]
    return out


ALPHA = {c: i + 2 for i, c in enumerate("0123456789/")}


def test_token_embeddings():
    table = TokenEmbeddingTable(10, 4, SeededRng(0))
    assert np.all(table.table.data[PAD_ID] == 0)
    out = embed_tokens([3, PAD_ID, 3, UNK_ID], table).data
    assert np.array_equal(out[0], out[2]) and np.all(out[1] == 0)
    assert np.array_equal(out[3], table.table.data[UNK_ID])
    assert np.all(embed_tokens(np.zeros((2, 3), int), table).data == 0)
    with pytest.raises(IndexError):
        embed_tokens([10], table)


def test_one_step_moves_only_touched_rows():
    table = TokenEmbeddingTable(10, 4, SeededRng(0))
    before = table.table.data.copy()
    table.table.zero_grad()
    with nm.Tape() as tape:
        loss = nm.reduce_sum(embed_tokens([5, PAD_ID], table))
    nm.backward(loss, tape)
    adam_step([("t", table.table)], AdamState(), TrainConfig())
    after = table.table.data
    assert not np.array_equal(after[5], before[5])
    assert np.array_equal(after[6], before[6]) and np.array_equal(after[PAD_ID], before[PAD_ID])


def test_char_encoder_contract():
    enc = CharEncoder(len(ALPHA) + 2, SeededRng(1), d_char=5, hidden=4)
    ids = char_ids(["8/20", "8/20", "", "12345", "54321"], ALPHA)
    out = embed_chars(ids, enc).data
    assert out.shape == (5, CHAR_DIM)
    assert np.array_equal(out[0], out[1])
    assert np.all(out[2] == 0)
    assert np.any(out[3] != 0) and np.any(out[4] != 0) and not np.array_equal(out[3], out[4])
    assert np.all(embed_chars(np.zeros((2, 3, 6), int), enc).data == 0)


def test_char_encoding_ignores_padding_width():
    enc = CharEncoder(len(ALPHA) + 2, SeededRng(1))
    narrow = embed_chars(char_ids(["12", "3"], ALPHA, c_max=3), enc).data
    wide = embed_chars(char_ids(["12", "3"], ALPHA, c_max=9), enc).data
    np.testing.assert_array_equal(narrow, wide)


@pytest.mark.parametrize("use_chars, width", [(False, 8), (True, 58)])
def test_representation_width(use_chars, width):
    rep = Representation(20, 13, SeededRng(0), d=8, use_chars=use_chars)
    assert rep.width == width
    tok = np.array([[UNK_ID, 4, PAD_ID]])
    ch = char_ids(["12", "3", ""], ALPHA)[None]
    out = represent(tok, ch, rep).data
    assert out.shape == (1, 3, width)
    np.testing.assert_array_equal(out[0, 0, :8], rep.tokens.table.data[UNK_ID])
    assert np.all(out[0, 2] == 0)
    if use_chars:
        assert np.any(out[0, 0, 8:] != 0)


def test_frozen_char_encoder_is_untouched_by_adam():
    enc = CharEncoder(len(ALPHA) + 2, SeededRng(1), frozen=True)
    before = [p.data.copy() for p in enc.parameters()]
    for p in enc.parameters():
        p.grad = np.ones_like(p.data)
    adam_step(list(enc.named_parameters()), AdamState(), TrainConfig())
    assert all(np.array_equal(b, p.data) for b, p in zip(before, enc.parameters()))
    enc.set_frozen(False)
    adam_step(list(enc.named_parameters()), AdamState(), TrainConfig())
    assert not np.array_equal(before[0], enc.chars.data)


def test_char_weight_import_matches_rows_by_character(tmp_path):
    src = CharEncoder(5, SeededRng(1), d_char=4, hidden=3)
    src_alpha = {"<PAD>": 0, "<UNK>": 1, "a": 2, "b": 3, "c": 4}
    export_char_weights(src, tmp_path / "c.ckpt", src_alpha)
    dst = CharEncoder(4, SeededRng(2), d_char=4, hidden=3)
    dst_alpha = {"<PAD>": 0, "<UNK>": 1, "c": 2, "z": 3}
    z_row = dst.chars.data[3].copy()
    copied = import_char_weights(dst, tmp_path / "c.ckpt", dst_alpha)
    assert copied == 2
    np.testing.assert_array_equal(dst.chars.data[2], src.chars.data[4])
    np.testing.assert_array_equal(dst.chars.data[3], z_row)
    np.testing.assert_array_equal(dst.proj.data, src.proj.data)
    with pytest.raises(CheckpointError):
        import_char_weights(CharEncoder(4, SeededRng(2), d_char=4, hidden=5), tmp_path / "c.ckpt", dst_alpha)
