"""Strict entity-level scoring with micro/macro averages and per-category token metrics."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import AnnotatedDocument, EntityAnnotation
from .tokenizer import Tokenizer

CATEGORIES = ("NAME", "PROFESSION", "LOCATION", "AGE", "DATE", "CONTACT", "ID")


class UnmappedTypeError(KeyError):
    def __init__(self, phi_type: str):
        self.phi_type = phi_type
        super().__init__(f"PHI type {phi_type!r} has no entry in the category map")

    def __str__(self) -> str:
        return self.args[0]


class CategoryMap(dict):
    """Fine-grained PHI type -> HIPAA category."""

    def category(self, phi_type: str) -> str:
        try:
            return self[phi_type]
        except KeyError:
            raise UnmappedTypeError(phi_type) from None

    @classmethod
    def load(cls, path=None) -> "CategoryMap":
        if path is None:
            text = resources.files("deidner.data").joinpath("category_map.json").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        return cls(json.loads(text))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.precision, self.recall, self.f1)


def prf(c: ConfusionCounts) -> PRF:
    """Precision, recall, F1; any zero denominator yields 0."""
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f)


def _keys(anns: Iterable[EntityAnnotation], cmap: Mapping[str, str] | None):
    if cmap is None:
        return {(a.start_char, a.end_char, a.phi_type) for a in anns}
    cat = cmap.category if isinstance(cmap, CategoryMap) else CategoryMap(cmap).category
    return {(a.start_char, a.end_char, cat(a.phi_type)) for a in anns}


def strict_match(gold: Sequence[EntityAnnotation], pred: Sequence[EntityAnnotation],
                 cmap: Mapping[str, str] | None = None) -> ConfusionCounts:
    """Exact span and type agreement; types are compared after ``cmap`` when given."""
    g, p = _keys(gold, cmap), _keys(pred, cmap)
    tp = len(g & p)
    return ConfusionCounts(tp, len(p) - tp, len(g) - tp)


def per_category_entity_counts(gold_docs: Sequence[AnnotatedDocument], pred_docs: Sequence[AnnotatedDocument],
                               cmap: Mapping[str, str] | None = None) -> dict[str, ConfusionCounts]:
    """Strict entity counts split by HIPAA category, summed over documents."""
    cmap = CategoryMap.load() if cmap is None else cmap
    tp: dict[str, int] = defaultdict(int)
    fp: dict[str, int] = defaultdict(int)
    fn: dict[str, int] = defaultdict(int)
    for g, p in zip(gold_docs, pred_docs):
        gk, pk = _keys(g.annotations, cmap), _keys(p.annotations, cmap)
        for *_, c in gk & pk:
            tp[c] += 1
        for *_, c in pk - gk:
            fp[c] += 1
        for *_, c in gk - pk:
            fn[c] += 1
    cats = sorted(set(tp) | set(fp) | set(fn))
    return {c: ConfusionCounts(tp[c], fp[c], fn[c]) for c in cats}


def micro_macro(per_doc: Sequence[ConfusionCounts], skip_empty: bool = False) -> tuple[PRF, PRF]:
    """Corpus-level metrics from summed counts, and the mean of per-document metrics.

    Documents with no gold and no predicted entities score (0, 0, 0) in the
    macro mean unless ``skip_empty`` drops them.
    """
    if not per_doc:
        raise ValueError("micro_macro needs at least one document")
    total = sum(per_doc, ConfusionCounts())
    docs = [c for c in per_doc if not (skip_empty and c.tp + c.fp + c.fn == 0)]
    if not docs:
        return prf(total), PRF(0.0, 0.0, 0.0)
    scores = [prf(c) for c in docs]
    n = len(scores)
    macro = PRF(
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f1 for s in scores) / n,
    )
    return prf(total), macro


def _token_categories(tokens, anns, cat) -> list[str | None]:
    out: list[str | None] = [None] * len(tokens)
    spans = sorted((a.start_char, a.end_char, cat(a.phi_type)) for a in anns)
    j = 0
    for i, tok in enumerate(tokens):
        while j < len(spans) and spans[j][1] <= tok.start_char:
            j += 1
        if j < len(spans) and spans[j][0] < tok.end_char:
            out[i] = spans[j][2]
    return out


def per_category_token_counts(gold_docs: Sequence[AnnotatedDocument], pred_docs: Sequence[AnnotatedDocument],
                              cmap: Mapping[str, str] | None = None,
                              tokenizer: Tokenizer | None = None) -> dict[str, ConfusionCounts]:
    tokenizer = tokenizer or Tokenizer()
    cmap = CategoryMap.load() if cmap is None else cmap
    cat = cmap.category if isinstance(cmap, CategoryMap) else CategoryMap(cmap).category
    tp: dict[str, int] = defaultdict(int)
    fp: dict[str, int] = defaultdict(int)
    fn: dict[str, int] = defaultdict(int)
    for g, p in zip(gold_docs, pred_docs):
        tokens = tokenizer.tokenize_document(g.doc).tokens
        gc = _token_categories(tokens, g.annotations, cat)
        pc = _token_categories(tokens, p.annotations, cat)
        for a, b in zip(gc, pc):
            if a is not None and a == b:
                tp[a] += 1
                continue
            if b is not None:
                fp[b] += 1
            if a is not None:
                fn[a] += 1
    cats = sorted(set(tp) | set(fp) | set(fn))
    return {c: ConfusionCounts(tp[c], fp[c], fn[c]) for c in cats}


def per_category_token_metrics(gold_docs, pred_docs, cmap=None, tokenizer=None) -> dict[str, PRF]:
    counts = per_category_token_counts(gold_docs, pred_docs, cmap, tokenizer)
    return {c: prf(n) for c, n in counts.items()}


@dataclass
class MetricsReport:
    micro: PRF
    macro: PRF
    micro_counts: ConfusionCounts
    per_category: dict[str, PRF]
    per_category_counts: dict[str, ConfusionCounts]
    per_document: dict[str, ConfusionCounts] = field(default_factory=dict)
    per_category_entity: dict[str, ConfusionCounts] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def counts(c):
            return {"tp": c.tp, "fp": c.fp, "fn": c.fn}

        def metrics(m):
            return {"precision": m.precision, "recall": m.recall, "f1": m.f1}

        return {
            "micro": metrics(self.micro),
            "macro": metrics(self.macro),
            "micro_counts": counts(self.micro_counts),
            "per_category": {
                c: {**metrics(m), **counts(self.per_category_counts[c])} for c, m in self.per_category.items()
            },
            "per_document": {d: counts(c) for d, c in self.per_document.items()},
            "per_category_entity": {
                c: {**metrics(prf(n)), **counts(n)} for c, n in self.per_category_entity.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format(self) -> str:
        lines = ["Strict entity match", f"{'':10}{'Precision':>10}{'Recall':>10}{'F1':>10}"]
        for label, m in (("macro", self.macro), ("micro", self.micro)):
            lines.append(f"{label:10}{m.precision:>10.4f}{m.recall:>10.4f}{m.f1:>10.4f}")
        lines += ["", "Per category (token level, micro)",
                  f"{'Category':12}{'Precision':>10}{'Recall':>10}{'F1':>10}{'Support':>9}"]
        for c, m in self.per_category.items():
            n = self.per_category_counts[c]
            lines.append(f"{c:12}{m.precision:>10.4f}{m.recall:>10.4f}{m.f1:>10.4f}{n.tp + n.fn:>9d}")
        return "\n".join(lines) + "\n"


def evaluate(gold_corpus: Sequence[AnnotatedDocument], pred_corpus: Sequence[AnnotatedDocument],
             cmap: Mapping[str, str] | None = None, fine_grained: bool = False,
             skip_empty_docs: bool = False, tokenizer: Tokenizer | None = None) -> MetricsReport:
    """Score predictions against gold.

    Entity types are compared at HIPAA-category level through ``cmap`` (the
    shipped default map when omitted) unless ``fine_grained`` is set.
    """
    gold_ids = [d.doc_id for d in gold_corpus]
    pred_by_id = {d.doc_id: d for d in pred_corpus}
    if set(gold_ids) != set(pred_by_id):
        only_gold = sorted(set(gold_ids) - set(pred_by_id))
        only_pred = sorted(set(pred_by_id) - set(gold_ids))
        raise ValueError(f"doc_id sets differ: missing predictions for {only_gold}, "
                         f"unexpected predictions for {only_pred}")
    cmap = CategoryMap.load() if cmap is None else (cmap if isinstance(cmap, CategoryMap) else CategoryMap(cmap))
    preds = [pred_by_id[i] for i in gold_ids]
    for g, p in zip(gold_corpus, preds):
        if g.text != p.text:
            raise ValueError(f"{g.doc_id}: gold and predicted texts differ")
    entity_map = None if fine_grained else cmap
    per_doc = {g.doc_id: strict_match(g.annotations, p.annotations, entity_map) for g, p in zip(gold_corpus, preds)}
    micro, macro = micro_macro(list(per_doc.values()), skip_empty_docs)
    cat_counts = per_category_token_counts(gold_corpus, preds, cmap, tokenizer)
    return MetricsReport(
        micro=micro,
        macro=macro,
        micro_counts=sum(per_doc.values(), ConfusionCounts()),
        per_category={c: prf(n) for c, n in cat_counts.items()},
        per_category_counts=cat_counts,
        per_document=per_doc,
        per_category_entity=per_category_entity_counts(gold_corpus, preds, cmap),
    )
