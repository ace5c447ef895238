"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Configuration is layered: built-in defaults < JSON config file (``--config``
or ``$DEIDNER_CONFIG``) < command-line flags.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, kernels
from .corpus import (
    AnnotatedDocument,
    CorpusFormatError,
    MisalignedAnnotation,
    find_misaligned,
    read_corpus,
    write_corpus,
)
from .encoders import ConfigError
from .evaluation import CATEGORIES, CategoryMap, MetricsReport, UnmappedTypeError, evaluate
from .numeric.checkpoint import CheckpointError
from .representation import import_char_weights
from .synthetic import generate_corpus
from .tokenizer import RawDocument, Tokenizer
from .training import (
    MODEL_ZOO,
    Model,
    ModelConfig,
    TrainConfig,
    build_model,
    fit,
    predict_documents,
    prepare,
    vocabulary_and_labels,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
CONFIG_ENV = "DEIDNER_CONFIG"

log = logging.getLogger("deidner")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------- helpers


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_config_file(path) -> dict:
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    unknown = set(cfg) - {"model", "train"}
    if unknown:
        raise UsageError(f"config {path}: unknown sections {sorted(unknown)}")
    return cfg


def effective_configs(model_name: str, file_cfg: dict, args) -> tuple[ModelConfig, TrainConfig]:
    if model_name not in MODEL_ZOO:
        raise UsageError(f"unknown model {model_name!r}; valid names: {', '.join(MODEL_ZOO)}")
    model_over = dict(file_cfg.get("model", {}))
    model_over.pop("name", None)
    for key in ("use_chars", "encoder", "decoder"):
        model_over.pop(key, None)
    if getattr(args, "freeze_char", False):
        model_over["freeze_chars"] = True
    train_over = dict(file_cfg.get("train", {}))
    for flag, key in (("seed", "seed"), ("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "learning_rate")):
        val = getattr(args, flag, None)
        if val is not None:
            train_over[key] = val
    try:
        mc = ModelConfig.named(model_name, **model_over)
        tc = TrainConfig(**train_over)
    except TypeError as exc:
        raise UsageError(f"bad config key: {exc}") from None
    return mc, tc


def train_model(mc: ModelConfig, tc: TrainConfig, train_docs, work_dir=None, min_count: int = 1,
                char_weights=None):
    vocab, labels, tokenized = vocabulary_and_labels(train_docs, min_count)
    prep = prepare(train_docs, vocab, labels, mc, tokenized)
    model = build_model(mc, vocab, labels, tc.seed)
    if char_weights is not None:
        if model.rep.chars is None:
            raise UsageError(f"model {mc.name} has no character channel")
        n = import_char_weights(model.rep.chars, char_weights, vocab.char_to_id)
        log.info("imported %d character rows from %s", n, char_weights)
    result = fit(model, prep, tc, out_dir=work_dir)
    return result


def _model_row(name: str, report: MetricsReport) -> dict:
    d = report.to_dict()
    return {"model": name, "macro": d["macro"], "micro": d["micro"], "per_category": d["per_category"]}


# ---------------------------------------------------------------- commands


def cmd_gen_corpus(args) -> int:
    if args.docs < 1:
        raise UsageError("--docs must be >= 1")
    try:
        a, b = (int(x) for x in args.split.split(":"))
        if a < 0 or b < 0 or a + b == 0:
            raise ValueError
    except ValueError:
        raise UsageError(f"--split must look like 80:20, got {args.split!r}") from None
    docs = generate_corpus(args.seed, args.docs)
    n_train = round(args.docs * a / (a + b))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(docs[:n_train], out / "train.jsonl")
    write_corpus(docs[n_train:], out / "test.jsonl")
    print(f"wrote {n_train} train / {len(docs) - n_train} test documents to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    mc, tc = effective_configs(args.model, load_config_file(args.config), args)
    train_docs = read_corpus(args.train)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    work = out.parent / f"{out.stem}_epochs"
    result = train_model(mc, tc, train_docs, work, args.min_count, args.char_weights)
    result.model.save(out)
    manifest = {
        "command": "train",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "model_config": mc.to_dict(),
        "train_config": tc.to_dict(),
        "min_count": args.min_count,
        "char_weights": None if args.char_weights is None else {
            "path": str(args.char_weights), "sha256": sha256(args.char_weights)},
        "inputs": {"train": {"path": str(args.train), "sha256": sha256(args.train)}},
        "outputs": {"checkpoint": {"path": str(out), "sha256": sha256(out)},
                    "train_log": str(work / "train_log.jsonl")},
        "epoch_losses": result.losses,
    }
    _write_json(out.with_name(out.name + ".manifest.json"), manifest)
    print(f"trained {mc.name}: final epoch loss {result.losses[-1]:.4f}; checkpoint {out}")
    return EXIT_OK


def _read_input(path) -> list[AnnotatedDocument]:
    path = Path(path)
    if path.suffix == ".jsonl":
        return read_corpus(path)
    return [AnnotatedDocument(RawDocument(path.stem, path.read_text(encoding="utf-8")), [])]


def redact(doc: AnnotatedDocument, cmap: CategoryMap) -> str:
    """Replace each annotated span by a bracketed category placeholder."""
    text = doc.text
    for a in sorted(doc.annotations, reverse=True):
        cat = cmap.category(a.phi_type)
        text = text[: a.start_char] + f"[{cat}]" + text[a.end_char :]
    return text


def cmd_predict(args) -> int:
    model = Model.load(args.ckpt)
    docs = _read_input(args.input)
    preds = predict_documents(model, docs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(preds, out)
    if args.redact:
        cmap = CategoryMap.load(args.category_map)
        lines = [json.dumps({"doc_id": d.doc_id, "text": redact(d, cmap)}, ensure_ascii=False) for d in preds]
        out.with_suffix(".redacted.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"annotated {len(preds)} documents -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.gold is None:
        raise UsageError("--gold is required")
    if (args.pred is None) == (args.ckpt is None):
        raise UsageError("give exactly one of --pred or --ckpt")
    gold = read_corpus(args.gold)
    if args.pred is not None:
        pred = read_corpus(args.pred)
    else:
        pred = predict_documents(Model.load(args.ckpt), gold)
    tokenizer = Tokenizer()
    bad = sum(len(find_misaligned(d, tokenizer.tokenize_document(d.doc))) for d in gold)
    if bad:
        print(f"deidner: warning: {bad} gold annotations are not token-aligned", file=sys.stderr)
    cmap = CategoryMap.load(args.category_map)
    report = evaluate(gold, pred, cmap, fine_grained=args.fine_grained, skip_empty_docs=args.skip_empty_docs)
    sys.stdout.write(report.format())
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def _benchmark_one(name, file_cfg, seed, epochs, train_path, test_path, out_dir, category_map):
    args = argparse.Namespace(seed=seed, epochs=epochs, batch_size=None, lr=None, freeze_char=False)
    mc, tc = effective_configs(name, file_cfg, args)
    train_docs, test_docs = read_corpus(train_path), read_corpus(test_path)
    mdir = Path(out_dir) / name
    mdir.mkdir(parents=True, exist_ok=True)
    result = train_model(mc, tc, train_docs, mdir / "epochs")
    result.model.save(mdir / "model.ckpt")
    report = evaluate(test_docs, predict_documents(result.model, test_docs), CategoryMap.load(category_map))
    (mdir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (mdir / "report.txt").write_text(report.format(), encoding="utf-8")
    _write_json(mdir / "manifest.json", {
        "command": "benchmark",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "model_config": mc.to_dict(),
        "train_config": tc.to_dict(),
        "inputs": {"train": sha256(train_path), "test": sha256(test_path)},
        "outputs": {"checkpoint": sha256(mdir / "model.ckpt"), "report": sha256(mdir / "report.json")},
    })
    return name, report


def format_benchmark(rows: list[dict]) -> str:
    lines = ["Global performance (strict entities, macro average)",
             f"{'Model':22}{'Precision':>10}{'Recall':>10}{'F1':>10}"]
    for r in rows:
        m = r["macro"]
        lines.append(f"{r['model']:22}{m['precision']:>10.4f}{m['recall']:>10.4f}{m['f1']:>10.4f}")
    cats = [c for c in CATEGORIES if any(c in r["per_category"] for r in rows)]
    lines += ["", "Per category (token level, micro average)",
              f"{'Category':12}{'Model':22}{'Precision':>10}{'Recall':>10}{'F1':>10}"]
    for c in cats:
        for r in rows:
            m = r["per_category"].get(c, {"precision": 0.0, "recall": 0.0, "f1": 0.0})
            lines.append(f"{c:12}{r['model']:22}{m['precision']:>10.4f}{m['recall']:>10.4f}{m['f1']:>10.4f}")
    return "\n".join(lines) + "\n"


def cmd_benchmark(args) -> int:
    models = args.models.split(",") if args.models else list(MODEL_ZOO)
    for name in models:
        if name not in MODEL_ZOO:
            raise UsageError(f"unknown model {name!r}; valid names: {', '.join(MODEL_ZOO)}")
    file_cfg = load_config_file(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(n, file_cfg, args.seed, args.epochs, args.train, args.test, out, args.category_map) for n in models]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = dict(pool.map(_benchmark_one, *zip(*jobs)))
    else:
        results = dict(_benchmark_one(*j) for j in jobs)
    rows = [_model_row(n, results[n]) for n in models]
    _write_json(out / "benchmark.json", {"seed": args.seed, "models": rows})
    table = format_benchmark(rows)
    (out / "benchmark.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .verify import COMPONENTS, TOLERANCE, run_gradcheck

    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    comps = list(COMPONENTS) if args.component == "all" else [args.component]
    worst = run_gradcheck(comps, args.trials)
    failed = False
    for name, err in worst.items():
        ok = err < TOLERANCE
        failed |= not ok
        print(f"{name:10} max relative error {err:.3e}  {'ok' if ok else 'FAIL'}")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="deidner", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-corpus", help="write a seeded synthetic train/test corpus")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--docs", type=int, default=1000)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--split", default="80:20")
    g.set_defaults(func=cmd_gen_corpus)

    t = sub.add_parser("train", help="train one model")
    t.add_argument("--model", required=True, help=f"one of: {', '.join(MODEL_ZOO)}")
    t.add_argument("--train", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--min-count", type=int, default=1)
    t.add_argument("--freeze-char", action="store_true")
    t.add_argument("--char-weights", help="external character-encoder weights (checkpoint container)")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="annotate a corpus or a raw text file")
    pr.add_argument("--ckpt", required=True)
    pr.add_argument("--in", dest="input", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--redact", action="store_true", help="also write [CATEGORY]-masked text")
    pr.add_argument("--category-map")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="strict entity-level scoring")
    e.add_argument("--gold", "--test", dest="gold")
    e.add_argument("--pred")
    e.add_argument("--ckpt")
    e.add_argument("--category-map")
    e.add_argument("--out")
    e.add_argument("--fine-grained", action="store_true")
    e.add_argument("--skip-empty-docs", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="train and evaluate every model on the same data")
    b.add_argument("--train", required=True)
    b.add_argument("--test", required=True)
    b.add_argument("--seed", type=int, default=13)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--epochs", type=int)
    b.add_argument("--models", help="comma-separated subset")
    b.add_argument("--config")
    b.add_argument("--category-map")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_benchmark)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    gc.add_argument("--component", default="all",
                    choices=["all", "lstm", "bilstm", "attention", "mha", "softmax", "crf"])
    gc.add_argument("--trials", type=int, default=20)
    gc.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"deidner: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusFormatError, MisalignedAnnotation, UnmappedTypeError, CheckpointError,
            OSError, ValueError) as exc:
        print(f"deidner: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
