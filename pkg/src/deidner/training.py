"""Model assembly, masked NLL training with Adam, checkpoints."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import numeric as nm
from .corpus import (
    DEFAULT_MAX_CHARS,
    DEFAULT_MAX_LEN,
    AnnotatedDocument,
    EncodedSentence,
    LabelSet,
    Vocabulary,
    bio_decode,
    build_vocabulary,
    encode_document,
)
from .decoders import TagDecoder, decode
from .encoders import ConfigError, ContextEncoder, encode
from .numeric import checkpoint
from .numeric.module import Module
from .numeric.rng import SeededRng
from .representation import Representation, represent
from .tokenizer import Tokenizer, TokenizedDocument

log = logging.getLogger(__name__)

# name -> (char channel, encoder stack, decoder)
MODEL_ZOO = {
    "bilstm": (False, "bilstm", "softmax"),
    "bilstm-crf": (False, "bilstm", "crf"),
    "c2v-bilstm-crf": (True, "bilstm", "crf"),
    "transformer": (False, "transformer", "softmax"),
    "transformer-crf": (False, "transformer", "crf"),
    "transformer-bilstm": (False, "transformer-bilstm", "softmax"),
}


@dataclass
class ModelConfig:
    name: str = "bilstm-crf"
    use_chars: bool = False
    encoder: str = "bilstm"
    decoder: str = "crf"
    d: int = 64
    d_char: int = 16
    char_hidden: int = 25
    freeze_chars: bool = False
    h: int = 64
    heads: int = 4
    layers: int = 2
    ff_mult: int = 4
    m: int = DEFAULT_MAX_LEN
    c_max: int = DEFAULT_MAX_CHARS
    dropout: float = 0.0

    @classmethod
    def named(cls, name: str, **overrides) -> "ModelConfig":
        if name not in MODEL_ZOO:
            raise ConfigError(f"unknown model {name!r}; valid names: {', '.join(MODEL_ZOO)}")
        use_chars, enc, dec = MODEL_ZOO[name]
        return cls(name=name, use_chars=use_chars, encoder=enc, decoder=dec, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 10
    seed: int = 13
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


# ---------------------------------------------------------------- model


class Model(Module):
    def __init__(self, config: ModelConfig, vocab: Vocabulary, labels: LabelSet, seed: int):
        self.config = config
        self.vocab = vocab
        self.labels = labels
        rng = SeededRng(seed)
        self.rep = Representation(
            len(vocab), vocab.n_chars, rng, d=config.d, use_chars=config.use_chars,
            d_char=config.d_char, char_hidden=config.char_hidden, freeze_chars=config.freeze_chars,
        )
        self.encoder = ContextEncoder(
            config.encoder, self.rep.width, rng, h=config.h, heads=config.heads,
            n_layers=config.layers, m_max=max(config.m, 512), ff_mult=config.ff_mult,
            dropout=config.dropout,
        )
        self.decoder = TagDecoder(config.decoder, self.encoder.out_width, len(labels), rng)
        self._dropout_rng = SeededRng(seed + 1).generator if config.dropout > 0 else None

    def named_parameters(self, prefix: str = ""):
        for key in ("rep", "encoder", "decoder"):
            yield from getattr(self, key).named_parameters(f"{prefix}{key}.")

    def hidden(self, batch: "Batch", train: bool = False) -> nm.Tensor:
        X = represent(batch.token_ids, batch.char_ids, self.rep)
        return encode(X, batch.mask, self.encoder, rng=self._dropout_rng if train else None)

    def sentence_nll(self, batch: "Batch") -> nm.Tensor:
        return self.decoder.nll(self.hidden(batch, train=True), batch.label_ids, batch.mask)

    def predict_ids(self, batch: "Batch") -> list[np.ndarray]:
        with nm.no_grad():
            H = self.hidden(batch)
        return decode(H.data, batch.mask, self.decoder)

    # persistence
    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) ^ set(arrays)
        if missing:
            raise checkpoint.CheckpointError(f"checkpoint/model mismatch on {sorted(missing)}")
        for name, p in params.items():
            if arrays[name].shape != p.shape:
                raise checkpoint.CheckpointError(
                    f"{name}: checkpoint shape {arrays[name].shape} != model shape {p.shape}"
                )
            p.data = np.array(arrays[name], dtype=np.float64)

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {
            "model_config": self.config.to_dict(),
            "vocabulary": self.vocab.to_dict(),
            "labels": self.labels.labels,
        }
        meta.update(extra_meta or {})
        checkpoint.save(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path) -> "Model":
        arrays, meta = checkpoint.load(path)
        labels = LabelSet.from_labels(meta["labels"])
        model = cls(ModelConfig.from_dict(meta["model_config"]),
                    Vocabulary.from_dict(meta["vocabulary"]), labels, seed=0)
        model.load_state_dict(arrays)
        return model


def build_model(mc: ModelConfig, vocab: Vocabulary, label_set: LabelSet, seed: int) -> Model:
    if mc.encoder in ("transformer", "transformer-bilstm"):
        width = mc.d + (50 if mc.use_chars else 0)
        if width % mc.heads:
            raise ConfigError(
                f"representation width {width} is not divisible by {mc.heads} attention heads"
            )
    return Model(mc, vocab, label_set, seed)


# ---------------------------------------------------------------- batching


@dataclass
class Batch:
    token_ids: np.ndarray
    char_ids: np.ndarray
    label_ids: np.ndarray
    mask: np.ndarray


def collate(sentences: Sequence[EncodedSentence]) -> Batch:
    """Stack sentences, trimming the shared padding beyond the longest one."""
    n = max(1, max(int(s.mask.sum()) for s in sentences))
    return Batch(
        np.stack([s.token_ids[:n] for s in sentences]),
        np.stack([s.char_ids[:n] for s in sentences]),
        np.stack([s.label_ids[:n] for s in sentences]),
        np.stack([s.mask[:n] for s in sentences]),
    )


def loss(model: Model, batch: Sequence[EncodedSentence] | Batch) -> nm.Tensor:
    """Summed negative log-likelihood of the gold tags; padding contributes nothing."""
    if not isinstance(batch, Batch):
        if not batch:
            raise ValueError("empty batch")
        batch = collate(batch)
    return nm.reduce_sum(model.sentence_nll(batch))


# ---------------------------------------------------------------- optimiser


def adam_step(params: Sequence[tuple[str, nm.Parameter]], state: AdamState, tc: TrainConfig) -> None:
    for name, p in params:
        if not np.isfinite(p.grad).all():
            raise FloatingPointError(f"non-finite gradient in parameter {name}")
    state.t += 1
    t = state.t
    c1 = 1.0 - tc.beta1**t
    c2 = 1.0 - tc.beta2**t
    for name, p in params:
        if p.frozen:
            continue
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= tc.beta1
        m += (1.0 - tc.beta1) * g
        v *= tc.beta2
        v += (1.0 - tc.beta2) * g * g
        p.data = p.data - tc.learning_rate * (m / c1) / (np.sqrt(v / c2) + tc.eps)


# ---------------------------------------------------------------- data prep


@dataclass
class PreparedCorpus:
    docs: list[AnnotatedDocument]
    tokenized: list[TokenizedDocument]
    sentences: list[EncodedSentence]
    doc_index: list[int]  # owning document of every encoded sentence


def tokenize_corpus(docs: Sequence[AnnotatedDocument], tokenizer: Tokenizer | None = None):
    tokenizer = tokenizer or Tokenizer()
    return [tokenizer.tokenize_document(d.doc) for d in docs]


def prepare(docs, vocab, labels, mc: ModelConfig, tokenized=None, with_labels=True) -> PreparedCorpus:
    tokenized = tokenized or tokenize_corpus(docs)
    sentences, owner = [], []
    for i, (doc, tdoc) in enumerate(zip(docs, tokenized)):
        enc = encode_document(tdoc, doc.annotations if with_labels else None, vocab, labels, mc.m, mc.c_max)
        sentences.extend(enc)
        owner.extend([i] * len(enc))
    return PreparedCorpus(list(docs), tokenized, sentences, owner)


def vocabulary_and_labels(train_docs, min_count: int = 1, tokenized=None):
    tokenized = tokenized or tokenize_corpus(train_docs)
    return build_vocabulary(tokenized, min_count), LabelSet.from_documents(train_docs), tokenized


# ---------------------------------------------------------------- training loop


@dataclass
class FitResult:
    model: Model
    losses: list[float]


def fit(
    model: Model,
    train: PreparedCorpus | Sequence[EncodedSentence],
    tc: TrainConfig,
    out_dir=None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> FitResult:
    sentences = train.sentences if isinstance(train, PreparedCorpus) else list(train)
    if not sentences:
        raise ValueError("no training sentences")
    shuffle_rng = SeededRng(tc.seed).child(1000)
    params = list(model.named_parameters())
    state = AdamState()
    losses = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "train_log.jsonl").write_text("")
    for epoch in range(1, tc.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(sentences))
        total = 0.0
        for start in range(0, len(order), tc.batch_size):
            batch = collate([sentences[i] for i in order[start : start + tc.batch_size]])
            for _, p in params:
                p.zero_grad()
            with nm.Tape() as tape:
                value = loss(model, batch)
            nm.backward(value, tape)
            tape.clear()
            adam_step(params, state, tc)
            total += value.item()
        losses.append(total)
        wall = time.perf_counter() - t0
        log.info("epoch %d loss %.4f (%.1fs)", epoch, total, wall)
        if out is not None:
            model.save(out / f"epoch-{epoch:02d}.ckpt")
            with open(out / "train_log.jsonl", "a") as fh:
                fh.write(json.dumps({"epoch": epoch, "loss": total, "wall_time": round(wall, 3)}) + "\n")
        if on_epoch:
            on_epoch(epoch, total)
    return FitResult(model, losses)


# ---------------------------------------------------------------- prediction


def predict_documents(model: Model, docs: Sequence[AnnotatedDocument], batch_size: int = 64,
                      tokenized=None) -> list[AnnotatedDocument]:
    """Annotate ``docs`` (their gold annotations, if any, are ignored)."""
    prep = prepare(docs, model.vocab, model.labels, model.config, tokenized, with_labels=False)
    found: list[list] = [[] for _ in docs]
    for start in range(0, len(prep.sentences), batch_size):
        chunk = prep.sentences[start : start + batch_size]
        ids = model.predict_ids(collate(chunk))
        for k, (sent, lab) in enumerate(zip(chunk, ids)):
            anns = bio_decode(model.labels.decode(lab), sent.tokens)
            found[prep.doc_index[start + k]].extend(anns)
    return [AnnotatedDocument(d.doc, sorted(a)) for d, a in zip(docs, found)]
