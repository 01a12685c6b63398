"""Command-line entry point.

Exit codes: 0 success, 1 domain error (audio, weights, data), 2 usage or
configuration error. Failures print one ``error: <Code>: <message>`` line
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import read_wav, segment_stream
from .content import load_content
from .documents import default_text, parse_document
from .dsp import feature_table
from .emotion import DEFAULT_CATEGORIES, EmotionAgent, classifier_input
from .errors import EmptyDataset, EngineError, SchemaError, ShapeMismatch
from .neural import TrainOptions, default_spec, load_weights, quantize_int8, save_weights, train
from .neural.training import accuracy
from .pipeline import Pipeline, PipelineConfig, run_benchmark, with_overrides
from .policy import load_policy
from .safety import load_rules, load_templates

log = logging.getLogger("emorespond")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=False) + "\n")


def _segments(path):
    audio = read_wav(path)
    return segment_stream(audio.samples)


def _pipeline_from_args(args) -> Pipeline:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    cfg = with_overrides(
        cfg,
        profile=args.profile,
        weights=args.weights,
        seed=args.seed,
        max_iterations=args.max_iter,
    )
    if getattr(args, "no_policy", False):
        cfg.bypass_policy = True
    if getattr(args, "no_safety", False):
        cfg.bypass_safety = True
    if getattr(args, "jitter", False):
        cfg.jitter = True
    return Pipeline(cfg)


def cmd_pipeline(args) -> int:
    pipeline = _pipeline_from_args(args)
    for i, seg in enumerate(_segments(args.wav)):
        out = pipeline.process(seg, pipeline.cfg.seed + i)
        if args.json:
            record = out.to_record()
            record["start_offset"] = seg.start_offset
            _emit(record)
        else:
            e, p = out.emotion, out.params
            print(
                f"[{seg.start_offset:6.2f}s] {e.predicted} ({e.confidence:.2f}, arousal {e.arousal} {e.arousal_score:.2f})"
                f" -> {out.mode.value}; tempo {p.tempo:.2f} volume {p.volume:.2f} brightness {p.brightness:.2f}"
                f" animation {p.animation_speed:.2f} template {p.template_id}; verified={out.verified}"
                f" attempts={out.attempts_used} fallback={out.used_fallback} {out.stage_timings['total']:.1f} ms"
            )
    return 0


def cmd_classify(args) -> int:
    weights = load_weights(args.weights) if args.weights else None
    categories = tuple(args.categories.split(","))
    agent = EmotionAgent(weights, categories)
    for seg in _segments(args.wav):
        state = agent.classify(seg)
        if args.json:
            record = state.to_dict()
            record["start_offset"] = seg.start_offset
            _emit(record)
        else:
            dist = " ".join(f"{c}={p:.4f}" for c, p in zip(categories, state.distribution))
            print(f"[{seg.start_offset:6.2f}s] {state.predicted} | {dist} | arousal {state.arousal} ({state.arousal_score:.3f})")
    return 0


def cmd_features(args) -> int:
    audio = read_wav(args.wav)
    columns, rows = feature_table(audio)
    if args.out:
        try:
            fh = open(args.out, "w", newline="")
        except OSError as exc:
            raise EngineError(f"cannot write {args.out}: {exc.strerror}") from None
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def load_labelled_dir(root, categories) -> list:
    """(FeatureTensor, class index) for every wav in ``root/<category>/``."""
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"{root} is not a directory")
    data = []
    for idx, cat in enumerate(categories):
        for wav in sorted((root / cat).glob("*.wav")) if (root / cat).is_dir() else []:
            seg = segment_stream(read_wav(wav).samples)[0]
            data.append((classifier_input(seg), idx))
    unknown = [d.name for d in root.iterdir() if d.is_dir() and d.name not in categories]
    if unknown:
        log.warning("ignoring directories that are not categories: %s", ", ".join(sorted(unknown)))
    if not data:
        raise EmptyDataset(f"no labelled wav files under {root}")
    return data


def cmd_train(args) -> int:
    categories = tuple(args.categories.split(","))
    data = load_labelled_dir(args.data, categories)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(data))
    n_val = int(round(len(data) * args.val_fraction))
    val = [data[i] for i in order[:n_val]]
    tr = [data[i] for i in order[n_val:]]
    spec = default_spec(len(categories))
    opts = TrainOptions(
        optimizer=args.optimizer,
        lr=args.lr,
        epochs=args.epochs,
        batch=args.batch,
        seed=args.seed,
        patience=args.patience,
        target_accuracy=args.target_accuracy,
    )
    weights, trace = train(spec, tr, opts, validation=val or None)
    for epoch, (loss, acc) in enumerate(zip(trace.loss, trace.accuracy), 1):
        print(f"epoch {epoch:3d} loss {loss:.4f} accuracy {acc:.4f}")
    if val:
        vx = np.stack([x.data for x, _ in val])
        vy = np.array([y for _, y in val])
        final = accuracy(spec, weights, vx, vy)
    else:
        final = max(trace.accuracy)
    print(f"final accuracy {final:.4f} (best epoch {trace.best_epoch + 1})")
    save_weights(weights, args.out)
    print(f"saved {args.out}")
    return 0


def cmd_quantize(args) -> int:
    weights = load_weights(args.input)
    if "dense1.bias" not in weights.tensors:
        raise ShapeMismatch("weight file does not describe the default classifier")
    spec = default_spec(weights.tensors["dense1.bias"].shape[0])
    weights.check(spec)
    q = quantize_int8(spec, weights)
    save_weights(q, args.out)
    ratio = q.payload_bytes() / weights.payload_bytes()
    print(f"float payload {weights.payload_bytes()} B, int8 payload {q.payload_bytes()} B, ratio {ratio:.4f}")
    return 0


def cmd_bench(args) -> int:
    pipeline = _pipeline_from_args(args)
    metrics, _ = run_benchmark(pipeline, args.iterations, args.warmup)
    if args.json:
        _emit(metrics.to_dict())
    else:
        print(f"{args.iterations} iterations after {args.warmup} warmup")
        for stage, s in metrics.latency_ms.items():
            print(f"{stage:>12}: mean {s['mean']:8.3f} ms  p95 {s['p95']:8.3f} ms  p99 {s['p99']:8.3f} ms")
    return 0


_LOADERS = {"policy": load_policy, "rules": load_rules, "content": load_content, "templates": load_templates}


def cmd_export_config(args) -> int:
    text = default_text(args.what)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _detect_kind(data: dict) -> str:
    if "default_mode" in data:
        return "policy"
    if "modes" in data:
        return "content"
    if "templates" in data:
        return "templates"
    if "rules" in data:
        return "rules"
    raise SchemaError("cannot tell which kind of document this is; pass --what")


def cmd_validate_config(args) -> int:
    if args.path == "-":
        text = sys.stdin.read()
    else:
        try:
            text = Path(args.path).read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read {args.path}: {exc.strerror}") from None
    data = parse_document(text)
    kind = args.what or _detect_kind(data)
    _LOADERS[kind](data)
    print(f"ok: valid {kind} document")
    return 0


def cmd_make_dataset(args) -> int:
    from .synthetic import write_dataset

    paths = write_dataset(args.out, args.per_class, args.seed, args.seconds)
    print(f"wrote {len(paths)} files under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emorespond", description="Emotion-to-response content engine.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline_flags(p):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--profile", choices=("child", "general"))
        p.add_argument("--weights", help="ERNW weight file")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-iter", type=_positive_int, help="max generate/verify attempts (K)")
        p.add_argument("--jitter", action="store_true", help="perturb generator outputs (test profile)")
        p.add_argument("--no-policy", action="store_true", help="ablation: fixed 'play' mode")
        p.add_argument("--no-safety", action="store_true", help="ablation: skip verification")
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("pipeline", help="run the full agent pipeline on a wav file")
    p.add_argument("wav")
    pipeline_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("classify", help="emotion recognition only")
    p.add_argument("wav")
    p.add_argument("--weights")
    p.add_argument("--categories", default=",".join(DEFAULT_CATEGORIES))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("features", help="dump per-frame features as CSV")
    p.add_argument("wav")
    p.add_argument("--out")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the CNN on <dir>/<category>/*.wav")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=_positive_int, default=100)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--optimizer", choices=("adamw", "sgd"), default="adamw")
    p.add_argument("--batch", type=_positive_int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=_positive_int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--target-accuracy", type=float, help="stop once validation accuracy reaches this")
    p.add_argument("--categories", default=",".join(DEFAULT_CATEGORIES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("quantize", help="INT8 post-training quantization")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("bench", help="latency benchmark on synthetic 3 s segments")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--warmup", type=int, default=20)
    pipeline_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export-config", help="print a shipped default document")
    p.add_argument("--what", choices=tuple(_LOADERS), required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_config)

    p = sub.add_parser("validate-config", help="validate a policy/rules/content/templates document")
    p.add_argument("path", help="document path, or - for stdin")
    p.add_argument("--what", choices=tuple(_LOADERS))
    p.set_defaults(func=cmd_validate_config)

    p = sub.add_parser("make-dataset", help="write the seeded synthetic tone dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seconds", type=float, default=3.0, help="clip length")
    p.set_defaults(func=cmd_make_dataset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
