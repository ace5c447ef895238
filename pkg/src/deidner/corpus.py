"""Annotation model, BIO codec, vocabularies, sentence encoding and corpus I/O."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tokenizer import RawDocument, Token, TokenizedDocument

PAD, UNK = "<PAD>", "<UNK>"
PAD_ID, UNK_ID = 0, 1
OUTSIDE = "O"

DEFAULT_MAX_LEN = 64
DEFAULT_MAX_CHARS = 24


class MisalignedAnnotation(ValueError):
    def __init__(self, start: int, end: int, phi_type: str, token: Token | None = None):
        self.span = (start, end, phi_type)
        self.token = token
        where = f" (cuts token {token.text!r} at {token.start_char}-{token.end_char})" if token else ""
        super().__init__(f"annotation {phi_type} [{start}, {end}) is not token-aligned{where}")


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class EntityAnnotation:
    start_char: int
    end_char: int
    phi_type: str

    def __post_init__(self):
        if self.end_char <= self.start_char:
            raise ValueError(
                f"annotation end ({self.end_char}) must exceed start ({self.start_char})"
            )


@dataclass
class AnnotatedDocument:
    doc: RawDocument
    annotations: list[EntityAnnotation] = field(default_factory=list)

    @property
    def doc_id(self) -> str:
        return self.doc.doc_id

    @property
    def text(self) -> str:
        return self.doc.text

    def validate(self) -> None:
        n = len(self.doc.text)
        prev_end = -1
        for a in sorted(self.annotations):
            if a.start_char < 0 or a.end_char > n:
                raise ValueError(f"{self.doc_id}: annotation {a} outside text of length {n}")
            if a.start_char < prev_end:
                raise ValueError(f"{self.doc_id}: overlapping annotations at {a.start_char}")
            prev_end = a.end_char


# ---------------------------------------------------------------- labels


class LabelSet:
    """``O`` (id 0) followed by ``B-X``, ``I-X`` for every type X, types sorted."""

    def __init__(self, phi_types: Iterable[str]):
        self.types = sorted(set(phi_types))
        self.labels = [OUTSIDE]
        for t in self.types:
            self.labels += [f"B-{t}", f"I-{t}"]
        self.label_to_id = {lab: i for i, lab in enumerate(self.labels)}
        self.outside_id = 0

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSet) and self.labels == other.labels

    def encode(self, labels: Sequence[str]) -> list[int]:
        return [self.label_to_id[lab] for lab in labels]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.labels[i] for i in ids]

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> "LabelSet":
        out = cls(lab[2:] for lab in labels if lab != OUTSIDE)
        if out.labels != list(labels):
            raise ValueError(f"label list is not in canonical order: {labels}")
        return out

    @classmethod
    def from_documents(cls, docs: Iterable[AnnotatedDocument]) -> "LabelSet":
        return cls(a.phi_type for d in docs for a in d.annotations)


def bio_encode(tokens: Sequence[Token], annotations: Iterable[EntityAnnotation]) -> list[str]:
    labels = [OUTSIDE] * len(tokens)
    if not tokens:
        return labels
    lo, hi = tokens[0].start_char, tokens[-1].end_char
    for ann in annotations:
        if ann.end_char <= lo or ann.start_char >= hi:
            continue
        inside = []
        for i, tok in enumerate(tokens):
            if tok.start_char < ann.start_char < tok.end_char or tok.start_char < ann.end_char < tok.end_char:
                raise MisalignedAnnotation(ann.start_char, ann.end_char, ann.phi_type, tok)
            if tok.start_char >= ann.start_char and tok.end_char <= ann.end_char:
                inside.append(i)
        if not inside:
            raise MisalignedAnnotation(ann.start_char, ann.end_char, ann.phi_type)
        for k, i in enumerate(inside):
            labels[i] = ("B-" if k == 0 else "I-") + ann.phi_type
    return labels


def bio_decode(labels: Sequence[str], tokens: Sequence[Token]) -> list[EntityAnnotation]:
    """Turn a BIO sequence into spans.  A stray ``I-X`` opens a new ``X`` entity."""
    if len(labels) != len(tokens):
        raise ValueError(f"{len(labels)} labels for {len(tokens)} tokens")
    out = []
    cur_type, cur_start, cur_end = None, 0, 0
    for lab, tok in zip(labels, tokens):
        prefix, _, typ = lab.partition("-")
        if prefix == "I" and typ == cur_type:
            cur_end = tok.end_char
            continue
        if cur_type is not None:
            out.append(EntityAnnotation(cur_start, cur_end, cur_type))
            cur_type = None
        if prefix in ("B", "I"):
            cur_type, cur_start, cur_end = typ, tok.start_char, tok.end_char
    if cur_type is not None:
        out.append(EntityAnnotation(cur_start, cur_end, cur_type))
    return out


def find_misaligned(doc: AnnotatedDocument, tdoc: TokenizedDocument) -> list[EntityAnnotation]:
    """Annotations whose start or end is not a token boundary.

    Training treats these as a hard error (``bio_encode`` raises); for
    third-party gold data they are only counted and reported.
    """
    tokens = tdoc.tokens
    starts = {t.start_char for t in tokens}
    ends = {t.end_char for t in tokens}
    return [a for a in doc.annotations if a.start_char not in starts or a.end_char not in ends]


# ---------------------------------------------------------------- vocabulary


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    char_to_id: dict[str, int]

    def __len__(self) -> int:
        return len(self.token_to_id)

    @property
    def n_chars(self) -> int:
        return len(self.char_to_id)

    def token_id(self, text: str) -> int:
        return self.token_to_id.get(text, UNK_ID)

    def char_id(self, c: str) -> int:
        return self.char_to_id.get(c, UNK_ID)

    def to_dict(self) -> dict:
        return {
            "tokens": sorted(self.token_to_id, key=self.token_to_id.__getitem__),
            "chars": sorted(self.char_to_id, key=self.char_to_id.__getitem__),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls({t: i for i, t in enumerate(d["tokens"])}, {c: i for i, c in enumerate(d["chars"])})


def build_vocabulary(train_docs: Iterable[TokenizedDocument], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    chars: set[str] = set()
    for doc in train_docs:
        for sent in doc.sentences:
            for tok in sent:
                counts[tok.text] += 1
                chars.update(tok.text)
    kept = sorted(t for t, n in counts.items() if n >= min_count and t not in (PAD, UNK))
    token_to_id = {PAD: PAD_ID, UNK: UNK_ID}
    for t in kept:
        token_to_id[t] = len(token_to_id)
    char_to_id = {PAD: PAD_ID, UNK: UNK_ID}
    for c in sorted(chars):
        char_to_id[c] = len(char_to_id)
    return Vocabulary(token_to_id, char_to_id)


# ---------------------------------------------------------------- encoding


@dataclass
class EncodedSentence:
    token_ids: np.ndarray  # (m,) int64
    char_ids: np.ndarray  # (m, c_max) int64
    label_ids: np.ndarray  # (m,) int64
    mask: np.ndarray  # (m,) bool, a prefix of trues
    tokens: list[Token]

    @property
    def length(self) -> int:
        return len(self.tokens)


def encode_sentence(
    tokens: Sequence[Token],
    labels: Sequence[str] | None,
    vocab: Vocabulary,
    label_set: LabelSet,
    m: int = DEFAULT_MAX_LEN,
    c_max: int = DEFAULT_MAX_CHARS,
) -> EncodedSentence:
    n = len(tokens)
    if n > m:
        raise ValueError(f"sentence of {n} tokens exceeds padded length {m}; window it first")
    token_ids = np.full(m, PAD_ID, dtype=np.int64)
    char_ids = np.full((m, c_max), PAD_ID, dtype=np.int64)
    label_ids = np.full(m, label_set.outside_id, dtype=np.int64)
    mask = np.zeros(m, dtype=bool)
    for i, tok in enumerate(tokens):
        token_ids[i] = vocab.token_id(tok.text)
        for j, c in enumerate(tok.text[:c_max]):
            char_ids[i, j] = vocab.char_id(c)
        mask[i] = True
    if labels is not None:
        label_ids[:n] = label_set.encode(labels)
    return EncodedSentence(token_ids, char_ids, label_ids, mask, list(tokens))


def windows(tokens: Sequence[Token], m: int) -> list[list[Token]]:
    """Consecutive windows of at most ``m`` tokens; nothing is dropped."""
    return [list(tokens[i : i + m]) for i in range(0, len(tokens), m)] or [[]]


def encode_document(
    tdoc: TokenizedDocument,
    annotations: Sequence[EntityAnnotation] | None,
    vocab: Vocabulary,
    label_set: LabelSet,
    m: int = DEFAULT_MAX_LEN,
    c_max: int = DEFAULT_MAX_CHARS,
) -> list[EncodedSentence]:
    out = []
    for sent in tdoc.sentences:
        labels = bio_encode(sent, annotations) if annotations is not None else None
        if not sent:
            continue
        for k, win in enumerate(windows(sent, m)):
            win_labels = labels[k * m : (k + 1) * m] if labels is not None else None
            out.append(encode_sentence(win, win_labels, vocab, label_set, m, c_max))
    return out


# ---------------------------------------------------------------- file I/O


def _record(doc: AnnotatedDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "text": doc.text,
        "annotations": [
            {"start": a.start_char, "end": a.end_char, "type": a.phi_type} for a in sorted(doc.annotations)
        ],
    }


def dumps_corpus(docs: Iterable[AnnotatedDocument]) -> str:
    return "".join(json.dumps(_record(d), ensure_ascii=False, sort_keys=True) + "\n" for d in docs)


def write_corpus(docs: Iterable[AnnotatedDocument], path) -> None:
    Path(path).write_text(dumps_corpus(docs), encoding="utf-8")


def parse_record(line: str, lineno: int) -> AnnotatedDocument:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise CorpusFormatError(f"line {lineno}: record must be an object")
    for key, typ in (("doc_id", str), ("text", str)):
        if key not in rec:
            raise CorpusFormatError(f"line {lineno}: missing field {key!r}")
        if not isinstance(rec[key], typ):
            raise CorpusFormatError(f"line {lineno}: field {key!r} must be a string")
    if not rec["doc_id"]:
        raise CorpusFormatError(f"line {lineno}: empty doc_id")
    anns = []
    for k, a in enumerate(rec.get("annotations", [])):
        try:
            start, end, typ = a["start"], a["end"], a["type"]
        except (KeyError, TypeError):
            raise CorpusFormatError(
                f"line {lineno}: annotation {k} needs 'start', 'end' and 'type'"
            ) from None
        if not (isinstance(start, int) and isinstance(end, int) and isinstance(typ, str)):
            raise CorpusFormatError(f"line {lineno}: annotation {k} has wrongly typed fields")
        try:
            anns.append(EntityAnnotation(start, end, typ))
        except ValueError as exc:
            raise CorpusFormatError(f"line {lineno}: annotation {k}: {exc}") from None
    doc = AnnotatedDocument(RawDocument(rec["doc_id"], rec["text"]), anns)
    try:
        doc.validate()
    except ValueError as exc:
        raise CorpusFormatError(f"line {lineno}: {exc}") from None
    return doc


def loads_corpus(text: str) -> list[AnnotatedDocument]:
    docs = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        doc = parse_record(line, lineno)
        if doc.doc_id in seen:
            raise CorpusFormatError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def read_corpus(path) -> list[AnnotatedDocument]:
    return loads_corpus(Path(path).read_text(encoding="utf-8"))
