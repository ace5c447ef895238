"""Sentence splitting and rule-based tokenization of clinical free text.

Every token keeps its character span in the source document.  Offsets count
Unicode code points (Python string indices), end-exclusive.

Within a whitespace-delimited chunk the rules are, in order:

1. a chunk on the abbreviation whitelist is emitted unchanged;
2. runs of punctuation become their own tokens;
3. a lowercase letter followed by an uppercase letter is a boundary;
4. a letter next to a digit (either order) is a boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

SENTENCE_END = ".?!"


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Token:
    text: str
    start_char: int
    end_char: int


@dataclass
class TokenizedDocument:
    doc_id: str
    sentences: list[list[Token]] = field(default_factory=list)

    @property
    def tokens(self) -> list[Token]:
        return [t for s in self.sentences for t in s]


def load_abbreviations(path=None) -> frozenset[str]:
    """Read a whitelist file: one abbreviation per line, ``#`` starts a comment."""
    if path is None:
        text = resources.files("deidner.data").joinpath("abbreviations.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    out = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.add(line)
    return frozenset(out)


DEFAULT_ABBREVIATIONS = load_abbreviations()


def _kind(c: str) -> str:
    if c.isdigit():
        return "D"
    if c.isalnum():
        return "L"
    return "P"


def _split_chunk(chunk: str, offset: int) -> list[Token]:
    tokens = []
    start = 0
    for i in range(1, len(chunk) + 1):
        if i < len(chunk):
            prev, cur = chunk[i - 1], chunk[i]
            kp, kc = _kind(prev), _kind(cur)
            if kp == kc == "P":
                continue
            if kp == "P" or kc == "P":
                boundary = True
            elif kp != kc:
                boundary = True
            else:
                boundary = kp == "L" and prev.islower() and cur.isupper()
            if not boundary:
                continue
        tokens.append(Token(chunk[start:i], offset + start, offset + i))
        start = i
    return tokens


def _chunks(text: str) -> Iterable[tuple[int, int]]:
    i, n = 0, len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        j = i
        while j < n and not text[j].isspace():
            j += 1
        if j > i:
            yield i, j
        i = j


class Tokenizer:
    def __init__(self, abbreviations: Iterable[str] | None = None):
        self.abbreviations = (
            DEFAULT_ABBREVIATIONS if abbreviations is None else frozenset(abbreviations)
        )

    def split_sentences(self, doc: RawDocument | str) -> list[tuple[int, int]]:
        text = doc.text if isinstance(doc, RawDocument) else doc
        spans = []
        first = last = None  # first / last non-space index of the open sentence

        def close():
            nonlocal first, last
            if first is not None:
                spans.append((first, last + 1))
            first = last = None

        chunk_start = 0
        n = len(text)
        for i, c in enumerate(text):
            if c == "\n":
                close()
                continue
            if c.isspace():
                continue
            if first is None:
                first = i
            if i == 0 or text[i - 1].isspace():
                chunk_start = i
            last = i
            if c in SENTENCE_END and (i + 1 == n or text[i + 1].isspace()):
                if text[chunk_start : i + 1] not in self.abbreviations:
                    close()
        close()
        return spans

    def tokenize_sentence(self, text: str, sentence_offset: int = 0) -> list[Token]:
        tokens = []
        for s, e in _chunks(text):
            chunk = text[s:e]
            if chunk in self.abbreviations:
                tokens.append(Token(chunk, sentence_offset + s, sentence_offset + e))
            else:
                tokens.extend(_split_chunk(chunk, sentence_offset + s))
        return tokens

    def tokenize_document(self, doc: RawDocument) -> TokenizedDocument:
        sentences = []
        for s, e in self.split_sentences(doc):
            toks = self.tokenize_sentence(doc.text[s:e], s)
            if toks:
                sentences.append(toks)
        return TokenizedDocument(doc.doc_id, sentences)


_default = Tokenizer()


def split_sentences(doc: RawDocument | str) -> list[tuple[int, int]]:
    return _default.split_sentences(doc)


def tokenize_sentence(text: str, sentence_offset: int = 0) -> list[Token]:
    return _default.tokenize_sentence(text, sentence_offset)


def tokenize_document(doc: RawDocument) -> TokenizedDocument:
    return _default.tokenize_document(doc)
