"""Command-line interface.

Every subcommand reads an optional YAML config (``--config``) and a seed
(``--seed``, overriding any ``seed`` key). Exit status: 0 on success, 1 on
invalid input or configuration, 2 when a pipeline stage failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .errors import DomainError, ParseError, StageError, ValidationError
from .pipeline.config import load_yaml

log = logging.getLogger("signaddr")


class _Opts:
    """Config section with defaults; unknown keys are rejected."""

    def __init__(self, name: str, defaults: dict, given: dict, base: Path, paths=()):
        unknown = set(given) - set(defaults)
        if unknown:
            raise ValidationError(f"unknown {name} config keys: {sorted(unknown)}")
        self._d = {**defaults, **given}
        for k in paths:
            v = self._d.get(k)
            if isinstance(v, str) and not Path(v).is_absolute():
                self._d[k] = str(base / v)

    def __getattr__(self, k):
        try:
            return self._d[k]
        except KeyError:
            raise AttributeError(k) from None

    def require(self, *keys):
        for k in keys:
            if self._d.get(k) is None:
                raise ValidationError(f"config key {k!r} is required")


def _emit(records: List[dict], report: Optional[str]) -> None:
    text = "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records)
    sys.stdout.write(text)
    if report:
        Path(report).parent.mkdir(parents=True, exist_ok=True)
        Path(report).write_text(text, encoding="utf-8")


def _nested(cls, given: Optional[dict], seed: int):
    d = dict(given or {})
    d["seed"] = seed
    return cls.from_dict(d)


# ---------------------------------------------------------------------------
# generators


def cmd_gen_ocr(o: _Opts, seed: int) -> int:
    from .synthgen import AddressCorpus, generate_ocr_dataset, synthesize_corpus

    corpus = AddressCorpus.from_file(o.corpus_file) if o.corpus_file else synthesize_corpus(o.corpus_size, seed)
    _, rows = generate_ocr_dataset(corpus, o.n, seed, o.out_dir)
    _emit([{"images": len(rows), "manifest": str(Path(o.out_dir) / "manifest.tsv")}], None)
    return 0


def cmd_gen_correction(o: _Opts, seed: int) -> int:
    from .synthgen import AddressCorpus, generate_correction_dataset, synthesize_corpus, write_correction_manifest

    corpus = AddressCorpus.from_file(o.corpus_file) if o.corpus_file else synthesize_corpus(o.n, seed)
    pairs = generate_correction_dataset(corpus.entries, seed, unit=o.unit)
    Path(o.output).parent.mkdir(parents=True, exist_ok=True)
    write_correction_manifest(pairs, o.output)
    _emit([{"pairs": len(pairs), "manifest": o.output}], None)
    return 0


def cmd_gen_parsing(o: _Opts, seed: int) -> int:
    from .synthgen import generate_parsing_dataset, synthesize_tagged_addresses, write_conll

    samples = generate_parsing_dataset(synthesize_tagged_addresses(o.n, seed), o.n_augmented, seed)
    Path(o.output).parent.mkdir(parents=True, exist_ok=True)
    write_conll(samples, o.output)
    _emit([{"samples": len(samples), "conll": o.output}], None)
    return 0


# ---------------------------------------------------------------------------
# training


def _ocr_samples(manifest: str):
    from .synthgen import TextLineSample, load_image, read_ocr_manifest

    base = Path(manifest).parent
    return [TextLineSample(load_image(base / rel), text) for rel, text in read_ocr_manifest(manifest)]


def cmd_train_recognizer(o: _Opts, seed: int) -> int:
    from .recognizer import Alphabet, RecognizerConfig, build_recognizer, save_recognizer, train_recognizer

    o.require("manifest")
    samples = _ocr_samples(o.manifest)
    config = _nested(RecognizerConfig, o.recognizer, seed)
    model = build_recognizer(config, Alphabet.from_texts(s.text for s in samples))
    result = train_recognizer(model, samples, config, target_accuracy=o.target_accuracy)
    save_recognizer(model, o.checkpoint)
    _emit([{"checkpoint": o.checkpoint, "epochs": len(result.losses), "final_loss": result.losses[-1]}], None)
    return 0


def cmd_train_corrector(o: _Opts, seed: int) -> int:
    from .corrector import CorrectorConfig, Tokenizer, build_corrector, save_corrector, train_corrector
    from .synthgen import read_correction_manifest

    o.require("manifest")
    pairs = read_correction_manifest(o.manifest)
    config = _nested(CorrectorConfig, o.corrector, seed)
    texts = [p.original for p in pairs] + [p.corrupted for p in pairs]
    tok = Tokenizer.fit(texts, config.tokenizer_mode, config.num_merges)
    model = build_corrector(config, tok)
    result = train_corrector(model, pairs, config, target_accuracy=o.target_accuracy)
    save_corrector(model, o.checkpoint)
    _emit([{"checkpoint": o.checkpoint, "epochs": len(result.losses), "final_loss": result.losses[-1]}], None)
    return 0


def cmd_train_parser(o: _Opts, seed: int) -> int:
    from .addrparse import ParserConfig, WordVocab, build_parser, save_parser, train_parser
    from .synthgen import read_conll

    o.require("conll")
    samples = read_conll(o.conll)
    config = _nested(ParserConfig, o.parser, seed)
    model = build_parser(config, WordVocab.fit(s.tokens for s in samples))
    result = train_parser(model, samples, config, target_accuracy=o.target_accuracy)
    save_parser(model, o.checkpoint)
    _emit([{"checkpoint": o.checkpoint, "epochs": len(result.losses), "final_loss": result.losses[-1]}], None)
    return 0


# ---------------------------------------------------------------------------
# evaluation


def cmd_eval_detection(o: _Opts, seed: int) -> int:
    from .detgeom import evaluate_detections, load_label_dir

    preds = load_label_dir(o.predictions_dir, with_conf=True)
    gts = load_label_dir(o.labels_dir)
    _emit(evaluate_detections(preds, gts, o.iou_threshold, o.model, o.interpolated), o.report)
    return 0


def cmd_eval_recognizer(o: _Opts, seed: int) -> int:
    from .recognizer import load_recognizer, predict_texts, word_recognition_accuracy

    o.require("manifest", "checkpoint")
    model = load_recognizer(o.checkpoint)
    samples = _ocr_samples(o.manifest)
    preds = predict_texts(model, [s.image for s in samples], beam_width=o.beam_width)
    wra = word_recognition_accuracy(preds, [s.text for s in samples], o.unit)
    if o.predictions:
        from .synthgen import read_ocr_manifest

        rows = read_ocr_manifest(o.manifest)
        records = [{"path": rel, "predicted_text": p, "reference_text": t} for (rel, t), p in zip(rows, preds)]
        Path(o.predictions).parent.mkdir(parents=True, exist_ok=True)
        Path(o.predictions).write_text(
            "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records), encoding="utf-8"
        )
    rec = {"framework": model.config.framework, "backbone": model.config.backbone, "unit": o.unit, "wra": wra}
    _emit([rec], o.report)
    return 0


def cmd_eval_corrector(o: _Opts, seed: int) -> int:
    from .corrector import evaluate_corrector, load_corrector
    from .synthgen import read_correction_manifest

    o.require("manifest", "checkpoint")
    model = load_corrector(o.checkpoint)
    pairs = read_correction_manifest(o.manifest)
    wla = evaluate_corrector(model, pairs, o.bag_of_words)
    _emit([{"wla": wla, "bag_of_words": bool(o.bag_of_words)}], o.report)
    return 0


def cmd_eval_parser(o: _Opts, seed: int) -> int:
    from .addrparse import load_parser, parser_report
    from .synthgen import read_conll

    o.require("conll", "checkpoint")
    model = load_parser(o.checkpoint)
    _emit([parser_report(model, read_conll(o.conll))], o.report)
    return 0


def cmd_run_pipeline(o: _Opts, seed: int, base: Path) -> int:
    from .pipeline import PipelineConfig, run_pipeline, serialize_results

    o.require("images")
    pcfg = dict(o.pipeline or {})
    pcfg["seed"] = seed
    config = PipelineConfig.from_dict(pcfg, base)
    src = o.images
    if isinstance(src, str):
        p = Path(src)
        images = sorted(q for q in p.iterdir() if q.is_file()) if p.is_dir() else [p]
    else:
        images = [Path(base / s) if not Path(s).is_absolute() else Path(s) for s in src]
    results = run_pipeline(config, images)
    text = serialize_results(results, include_timings=bool(o.timings))
    sys.stdout.write(text)
    if o.output:
        Path(o.output).parent.mkdir(parents=True, exist_ok=True)
        Path(o.output).write_text(text, encoding="utf-8")
    failed = [e for r in results for e in r.errors()]
    for e in failed:
        log.error("%s", e)
    return 2 if failed else 0


def _bundled_detection() -> dict:
    from .fixtures import DETECTION_FIXTURE

    return {"labels_dir": str(DETECTION_FIXTURE / "labels"), "predictions_dir": str(DETECTION_FIXTURE / "predictions")}


COMMANDS: Dict[str, tuple] = {
    "gen-ocr": (cmd_gen_ocr, {"n": 100, "corpus_size": 500, "corpus_file": None, "out_dir": "ocr_data"}, ("corpus_file", "out_dir")),
    "gen-correction": (
        cmd_gen_correction,
        {"n": 1000, "corpus_file": None, "unit": "codepoint", "output": "correction.tsv"},
        ("corpus_file", "output"),
    ),
    "gen-parsing": (cmd_gen_parsing, {"n": 500, "n_augmented": 500, "output": "parsing.conll"}, ("output",)),
    "train-recognizer": (
        cmd_train_recognizer,
        {"manifest": None, "checkpoint": "recognizer.pt", "target_accuracy": None, "recognizer": None},
        ("manifest", "checkpoint"),
    ),
    "train-corrector": (
        cmd_train_corrector,
        {"manifest": None, "checkpoint": "corrector.pt", "target_accuracy": None, "corrector": None},
        ("manifest", "checkpoint"),
    ),
    "train-parser": (
        cmd_train_parser,
        {"conll": None, "checkpoint": "parser.pt", "target_accuracy": None, "parser": None},
        ("conll", "checkpoint"),
    ),
    "eval-detection": (
        cmd_eval_detection,
        {"labels_dir": None, "predictions_dir": None, "iou_threshold": 0.5, "model": "detector", "interpolated": True, "report": None},
        ("labels_dir", "predictions_dir", "report"),
    ),
    "eval-recognizer": (
        cmd_eval_recognizer,
        {"manifest": None, "checkpoint": None, "beam_width": 1, "unit": "line", "report": None, "predictions": None},
        ("manifest", "checkpoint", "report", "predictions"),
    ),
    "eval-corrector": (
        cmd_eval_corrector,
        {"manifest": None, "checkpoint": None, "bag_of_words": False, "report": None},
        ("manifest", "checkpoint", "report"),
    ),
    "eval-parser": (cmd_eval_parser, {"conll": None, "checkpoint": None, "report": None}, ("conll", "checkpoint", "report")),
    "run-pipeline": (
        cmd_run_pipeline,
        {"pipeline": None, "images": None, "output": None, "timings": False},
        ("images", "output"),
    ),
}


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="signaddr", description="Signboard address extraction toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="seed for all randomness (default: config seed or 0)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    fn, defaults, paths = COMMANDS[args.command]
    try:
        given, base = {}, Path.cwd()
        if args.config:
            given = load_yaml(args.config)
            base = Path(args.config).resolve().parent
        seed = args.seed if args.seed is not None else int(given.pop("seed", 0) or 0)
        given.pop("seed", None)
        if args.command == "eval-detection" and not given.get("labels_dir") and not given.get("predictions_dir"):
            defaults = {**defaults, **_bundled_detection()}
        opts = _Opts(args.command, defaults, given, base, paths)
        if args.command == "run-pipeline":
            return fn(opts, seed, base)
        return fn(opts, seed)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValidationError, ParseError, DomainError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
