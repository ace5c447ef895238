"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""
import json
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import DATA, frac, record_acceptance
from deidner import cli, kernels, training
from deidner.corpus import LabelSet, bio_decode, bio_encode, read_corpus
from deidner.evaluation import ConfusionCounts, evaluate, micro_macro, prf
from deidner.synthetic import generate_corpus
from deidner.tokenizer import tokenize_sentence
from deidner.training import (
    Batch,
    ModelConfig,
    TrainConfig,
    build_model,
    collate,
    fit,
    loss,
    predict_documents,
    prepare,
    vocabulary_and_labels,
)
from deidner.verify import COMPONENTS, TOLERANCE, run_gradcheck
from oracles import brute_force_crf, fuzz_text, reference_bio_decode
from test_corpus import TYPES, fake_tokens, random_aligned
from test_tokenizer import check_document

# ---------------------------------------------------------------- 1. CRF oracle equivalence


def test_crf_oracle_equivalence():
    gen = np.random.default_rng(2024)
    worst, viterbi_ok, n = 0.0, True, 200
    t0 = time.perf_counter()
    for _ in range(n):
        m, k = int(gen.integers(1, 7)), int(gen.integers(1, 6))
        S, T = gen.uniform(-3, 3, (m, k)), gen.uniform(-3, 3, (k, k))
        b, e = gen.uniform(-3, 3, k), gen.uniform(-3, 3, k)
        log_z, best_path, _ = brute_force_crf(S.tolist(), T.tolist(), b.tolist(), e.tolist())
        lz, _, _ = kernels.forward_backward(S[None], [m], T, b, e)
        paths, _ = kernels.viterbi(S[None], [m], T, b, e)
        worst = max(worst, abs(float(lz[0]) - log_z))
        viterbi_ok &= paths[0][:m].tolist() == best_path
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and viterbi_ok and elapsed < 10
    record_acceptance("C-1", ok, f"{n} instances, max |dlogZ| {worst:.2e}, viterbi exact {viterbi_ok}, "
                                 f"{elapsed:.2f}s, backend {kernels.BACKEND}")
    assert ok


# ---------------------------------------------------------------- 2. gradient suite


def test_gradient_suite():
    t0 = time.perf_counter()
    worst = run_gradcheck("all", trials=20)
    elapsed = time.perf_counter() - t0
    ok = set(worst) == set(COMPONENTS) and max(worst.values()) < TOLERANCE and elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record_acceptance("C-2", ok, f"20 trials each: {detail}; {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------- 3. tokenizer


def test_tokenizer_golden_and_fuzz():
    toks = tokenize_sentence("Mr. SamLee is a 70yo man")
    golden = [t.text for t in toks] == ["Mr.", "Sam", "Lee", "is", "a", "70", "yo", "man"]
    golden &= all("Mr. SamLee is a 70yo man"[t.start_char : t.end_char] == t.text for t in toks)
    rng = random.Random(3)
    failures = 0
    for _ in range(1000):
        try:
            check_document(fuzz_text(rng))
        except AssertionError:
            failures += 1
    ok = golden and failures == 0
    record_acceptance("C-3", ok, f"golden example {'exact' if golden else 'WRONG'}; "
                                 f"{failures}/1000 fuzzed documents violate span fidelity")
    assert ok


# ---------------------------------------------------------------- 4. BIO round trip


def test_bio_round_trip_and_totality():
    rng = random.Random(4)
    round_trip = sum(
        bio_decode(bio_encode(toks, anns), toks) == anns
        for toks, anns in (random_aligned(rng, rng.randint(0, 15)) for _ in range(1000))
    )
    labels = LabelSet(TYPES).labels + ["I-OTHER", "B-OTHER"]
    total = 0
    for _ in range(1000):
        seq = [rng.choice(labels) for _ in range(rng.randint(0, 15))]
        toks = fake_tokens(len(seq))
        try:
            out = bio_decode(seq, toks)
        except Exception:  # noqa: BLE001 - any failure breaks totality
            continue
        ref = reference_bio_decode(seq, [(t.start_char, t.end_char) for t in toks])
        total += [(a.start_char, a.end_char, a.phi_type) for a in out] == ref
    ok = round_trip == 1000 and total == 1000
    record_acceptance("C-4", ok, f"round trip {round_trip}/1000, total decode {total}/1000")
    assert ok


# ---------------------------------------------------------------- 5. evaluation fixture


def test_evaluation_fixture_and_micro_macro():
    base = DATA / "eval_fixture"
    got = evaluate(read_corpus(base / "gold.jsonl"), read_corpus(base / "pred.jsonl")).to_dict()
    want = json.loads((base / "expected.json").read_text())
    problems = []
    if got["per_document"] != want["per_document"] or got["micro_counts"] != want["micro_counts"]:
        problems.append("counts")
    for level in ("micro", "macro"):
        if any(abs(got[level][k] - frac(v)) > 1e-12 for k, v in want[level].items()):
            problems.append(level)
    if set(got["per_category"]) != set(want["per_category"]):
        problems.append("category set")
    for cat, w in want["per_category"].items():
        g = got["per_category"].get(cat, {})
        if any(g.get(k) != w[k] for k in ("tp", "fp", "fn")) or any(
                abs(g.get(k, -1) - frac(w[k])) > 1e-12 for k in ("precision", "recall", "f1")):
            problems.append(cat)
    micro, macro = micro_macro([ConfusionCounts(1, 0, 0), ConfusionCounts(1, 3, 0)])
    discrim = micro.precision == float(Fraction(2, 5)) and macro.precision == float(Fraction(5, 8))
    ok = not problems and discrim
    record_acceptance("C-5", ok, f"fixture mismatches {problems or 'none'}; "
                                 f"P_micro {micro.precision} vs P_macro {macro.precision}")
    assert ok


# ---------------------------------------------------------------- 6 and 7. desk-scale learning

PAPER_SETTINGS = TrainConfig(learning_rate=0.001, batch_size=32, epochs=10)
_RUNS: dict = {}


def desk_run(seed: int, name: str):
    """Train ``name`` on an 800/200 split of generate_corpus(seed, 1000); cached."""
    key = (seed, name)
    if key not in _RUNS:
        docs = generate_corpus(seed, 1000)
        train, test = docs[:800], docs[800:]
        t0 = time.perf_counter()
        mc = ModelConfig.named(name)
        vocab, labels, tok = vocabulary_and_labels(train)
        model = build_model(mc, vocab, labels, seed)
        fit(model, prepare(train, vocab, labels, mc, tok), TrainConfig(**{**PAPER_SETTINGS.to_dict(), "seed": seed}))
        report = evaluate(test, predict_documents(model, test))
        _RUNS[key] = (report, time.perf_counter() - t0)
    return _RUNS[key]


@pytest.mark.slow
def test_desk_scale_learning():
    report, elapsed = desk_run(7, "bilstm-crf")
    date = report.per_category_entity.get("DATE", ConfusionCounts())
    date_f1 = prf(date).f1
    cats = set(report.per_category_entity)
    ok = date_f1 >= 0.90 and report.micro.f1 >= 0.80 and elapsed < 15 * 60
    record_acceptance("C-6", ok, f"bilstm-crf seed 7: DATE strict F1 {date_f1:.4f}, micro F1 {report.micro.f1:.4f}, "
                                 f"{len(cats)} categories in test, {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_bilstm_crf_vs_transformer_ordering():
    rows, wins = [], 0
    for seed in (7, 11, 23):
        crf = desk_run(seed, "bilstm-crf")[0].macro.f1
        tr = desk_run(seed, "transformer")[0].macro.f1
        wins += crf >= tr
        rows.append(f"seed {seed}: {crf:.4f} vs {tr:.4f}")
    ok = wins >= 2
    record_acceptance("C-7", ok, f"bilstm-crf >= transformer macro F1 on {wins}/3 seeds ({'; '.join(rows)})")
    assert ok


# ---------------------------------------------------------------- 8. benchmark determinism


def content(path):
    """File bytes; training logs are compared without their wall-clock field."""
    if path.name != "train_log.jsonl":
        return path.read_bytes()
    return [{k: v for k, v in json.loads(r).items() if k != "wall_time"} for r in path.read_text().splitlines()]


@pytest.mark.slow
def test_benchmark_determinism(tmp_path):
    corpus = tmp_path / "corpus"
    assert cli.main(["gen-corpus", "--seed", "3", "--docs", "120", "--out", str(corpus)]) == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"train": {"learning_rate": 0.005}}))
    outs = []
    for run in ("a", "b"):
        argv = ["benchmark", "--train", str(corpus / "train.jsonl"), "--test", str(corpus / "test.jsonl"),
                "--epochs", "4", "--config", str(cfg), "--seed", "13", "--out-dir", str(tmp_path / run)]
        assert cli.main(argv) == 0
        outs.append(tmp_path / run)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    differ = [str(f) for f in files if content(outs[0] / f) != content(outs[1] / f)]
    rows = json.loads((outs[0] / "benchmark.json").read_text())["models"]
    ok = not differ and len(rows) == 6
    record_acceptance("C-8", ok, f"{len(files)} files compared across two six-model runs (logs minus wall time), "
                                 f"{len(differ)} differ{': ' + ', '.join(differ) if differ else ''}")
    assert ok


# ---------------------------------------------------------------- 9. masking invariants


def doubled(batch: Batch) -> Batch:
    """Pad every sentence with PAD positions to twice the batch width."""
    extra = batch.mask.shape[1]
    pad2 = ((0, 0), (0, extra))
    return Batch(np.pad(batch.token_ids, pad2), np.pad(batch.char_ids, pad2 + ((0, 0),)),
                 np.pad(batch.label_ids, pad2), np.pad(batch.mask, pad2))


def test_padding_changes_no_loss_and_no_metric(monkeypatch):
    docs = generate_corpus(9, 60)
    train, test = docs[:45], docs[45:]
    small = dict(d=16, h=16, heads=2, layers=1, d_char=8, char_hidden=8)
    loss_gap, metric_diffs = 0.0, []
    for name in training.MODEL_ZOO:
        mc = ModelConfig.named(name, **small)
        vocab, labels, tok = vocabulary_and_labels(train)
        model = build_model(mc, vocab, labels, 1)
        prep = prepare(train, vocab, labels, mc, tok)
        fit(model, prep, TrainConfig(epochs=3, learning_rate=0.01))
        batches = [prep.sentences[i : i + 32] for i in range(0, len(prep.sentences), 32)]
        plain_loss = [loss(model, b).item() for b in batches]
        plain_report = evaluate(test, predict_documents(model, test)).to_json()
        with monkeypatch.context() as mp:
            mp.setattr(training, "collate", lambda sents, _c=collate: doubled(_c(sents)))
            padded_loss = [loss(model, b).item() for b in batches]
            padded_report = evaluate(test, predict_documents(model, test)).to_json()
        loss_gap = max(loss_gap, max(abs(a - b) / max(1.0, abs(a)) for a, b in zip(plain_loss, padded_loss)))
        if padded_report != plain_report:
            metric_diffs.append(name)
    ok = loss_gap <= 1e-12 and not metric_diffs
    record_acceptance("C-9", ok, f"six models, max relative loss change {loss_gap:.1e}, "
                                 f"reports differing: {metric_diffs or 'none'}")
    assert ok
